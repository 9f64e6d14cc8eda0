//! Augmentation invariants: identity at zero magnitude, monotone magnitude
//! maps, and the statistics of erased regions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsb_core::augment::{
    apply_op, map_magnitude, random_erasing_regions, ChannelStats, ImageBuffer, OpKind, RandomErasingConfig, MAX_MAGNITUDE,
};
use rsb_core::rng::{Purpose, RngKey};

use super::{ensure, Check};

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImageBuffer {
    let px = (0..h * w * 3).map(|_| rng.random_range(0..256) as f64 / 255.0).collect();
    ImageBuffer::new(h, w, 3, px).unwrap()
}

/// Ops whose increasing-mode magnitude 0 must reproduce the input bit for bit.
pub const IDENTITY_OPS: [OpKind; 6] =
    [OpKind::Color, OpKind::Contrast, OpKind::Brightness, OpKind::Sharpness, OpKind::Posterize, OpKind::Solarize];

pub fn zero_magnitude_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fill = [0.5; 3];
    for i in 0..50 {
        let img = random_image(&mut rng, 5 + i % 7, 4 + i % 5);
        for kind in IDENTITY_OPS {
            let params = map_magnitude(kind, 0.0, true, &mut RngKey::new(0, 0, i as u64, Purpose::RandAugment).stream())
                .map_err(|e| e.to_string())?;
            let out = apply_op(&img, kind, params, &fill).map_err(|e| e.to_string())?;
            ensure(out == img, || format!("{} at magnitude 0 changed image {i}", kind.name()))?;
        }
    }
    Ok(format!("{} ops x 50 images unchanged at magnitude 0", IDENTITY_OPS.len()))
}

/// Distance from identity never decreases as the magnitude grows, for every
/// op and a fixed sign draw.
pub fn magnitude_monotone() -> Check {
    const STEPS: usize = 100;
    for kind in OpKind::ALL {
        for trial in 0..10u64 {
            let mut prev = f64::NEG_INFINITY;
            for s in 0..=STEPS {
                let m = MAX_MAGNITUDE * s as f64 / STEPS as f64;
                let p = map_magnitude(kind, m, true, &mut RngKey::new(1, 0, trial, Purpose::RandAugment).stream())
                    .map_err(|e| e.to_string())?;
                let strength = p.strength();
                ensure(strength >= prev, || format!("{} strength drops to {strength} at magnitude {m}", kind.name()))?;
                prev = strength;
            }
        }
    }
    Ok(format!("{} ops monotone over magnitude [0, {MAX_MAGNITUDE}]", OpKind::ALL.len()))
}

/// Every per-pixel erased region of at least 1024 pixels has mean within
/// ±0.1 and standard deviation in [0.9, 1.1].
pub fn erasing_stats() -> Check {
    let stats = ChannelStats::new(vec![0.5; 3], vec![0.25; 3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let img = random_image(&mut rng, 64, 64).normalize(&stats).map_err(|e| e.to_string())?;
    let cfg = RandomErasingConfig::new(1.0, 1);
    let mut checked = 0;
    for i in 0..400 {
        let (out, regions) = random_erasing_regions(&img, &cfg, &mut RngKey::new(2, 0, i, Purpose::Erasing).stream())
            .map_err(|e| e.to_string())?;
        for r in regions.iter().filter(|r| r.height * r.width >= 1024) {
            let mut vals = Vec::new();
            for y in r.top..r.top + r.height {
                for x in r.left..r.left + r.width {
                    vals.extend((0..3).map(|k| out.get(y, x, k)));
                }
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            ensure((-0.1..=0.1).contains(&mean), || format!("draw {i}: region mean {mean}"))?;
            ensure((0.9..=1.1).contains(&std), || format!("draw {i}: region std {std}"))?;
            checked += 1;
        }
    }
    ensure(checked >= 20, || format!("only {checked} large regions drawn"))?;
    Ok(format!("{checked} large erased regions within bounds"))
}

pub fn augmentation_invariants() -> Check {
    Ok(format!("{}; {}; {}", zero_magnitude_identity()?, magnitude_monotone()?, erasing_stats()?))
}
