//! Training-recipe engine for image classification.
//!
//! The crate is organised by training stage: [`augment`] for pixel-space
//! augmentation, [`mix`] for Mixup/CutMix with target construction and the
//! losses, [`optim`] for update rules, [`schedule`] for learning-rate
//! curves, [`regularize`] for stochastic depth, dropout, EMA and repeated
//! augmentation, [`recipe`] for the hyper-parameter records, and
//! [`harness`] for the desk-scale dataset, model and training loop. All of
//! it runs on the small reverse-mode engine in [`tensor`].

pub mod error;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub mod augment;
pub mod harness;
pub mod mix;
pub mod optim;
pub mod recipe;
pub mod regularize;
pub mod schedule;
