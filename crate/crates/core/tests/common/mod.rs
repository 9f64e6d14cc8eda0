//! Oracle checks shared by the integration tests and the acceptance run.
//! Each check returns a one-line summary or a failure description.
#![allow(dead_code)]

pub mod augmentation;
pub mod gradients;
pub mod mixing;
pub mod optim;
pub mod presets;

pub type Check = Result<String, String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}
