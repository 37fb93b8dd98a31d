use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{AssemblyResult, MetricsReport};
use super::solver::{greedy_assemble, SolverMode};
use crate::cipher::{encrypt, CipherConfig};
use crate::keystream::{KeySet, Scheme, SecretKey, TransformSpec};
use crate::raster::{split_into_blocks, BlockGeometry, RasterImage};
use crate::{Error, Result};

/// Keys tried per image.
pub const DEFAULT_TRIALS: usize = 30;

/// Solves one encrypted image and scores it against the assembly the
/// keyed transform implies, after undoing any whole-picture turn or
/// mirror the solver has no way to detect.
pub fn attack_encrypted(
    encrypted: &RasterImage,
    spec: &TransformSpec,
    grid: &BlockGeometry,
    mode: SolverMode,
) -> Result<MetricsReport> {
    let pieces = split_into_blocks(encrypted, grid)?;
    let truth = AssemblyResult::truth_for(spec, *grid, mode.orients())?;
    let result = greedy_assemble(&pieces, grid, mode)?.aligned_to(&truth)?;
    MetricsReport::compute(&result, &truth, &pieces)
}

/// Encrypts `image` with `keys` and attacks the result.
pub fn attack_image(image: &RasterImage, keys: &KeySet, cfg: &CipherConfig, mode: SolverMode) -> Result<MetricsReport> {
    let grid = cfg.geometry(image.width(), image.height())?;
    let spec = TransformSpec::generate(keys, grid.n())?;
    let encrypted = encrypt(image, keys, cfg)?;
    attack_encrypted(&encrypted, &spec, &grid, mode)
}

/// Outcome of attacking one image under several keys.
#[derive(Clone, Debug, Serialize)]
pub struct ProtocolReport {
    /// Blocks per encrypted image.
    pub n: usize,
    pub trials: Vec<MetricsReport>,
    /// Trial with the highest `Dc + Nc + Lc`, earliest on ties.
    pub best_trial: usize,
}

impl ProtocolReport {
    pub fn best(&self) -> &MetricsReport {
        &self.trials[self.best_trial]
    }
}

/// Attacks `image` once per key set and keeps every trial.
pub fn attack_trial_protocol(
    image: &RasterImage,
    keys: &[KeySet],
    cfg: &CipherConfig,
    mode: SolverMode,
) -> Result<ProtocolReport> {
    if keys.is_empty() {
        return Err(Error::Policy("attack needs at least one key".into()));
    }
    let n = cfg.geometry(image.width(), image.height())?.n();
    let trials = keys
        .par_iter()
        .map(|k| attack_image(image, k, cfg, mode))
        .collect::<Result<Vec<_>>>()?;
    let mut best_trial = 0;
    for (i, t) in trials.iter().enumerate() {
        if t.score() > trials[best_trial].score() {
            best_trial = i;
        }
    }
    Ok(ProtocolReport { n, trials, best_trial })
}

/// `count` master keys drawn from a seeded generator, expanded for `scheme`.
pub fn keysets_from_seed(seed: u64, count: usize, scheme: Scheme) -> Vec<KeySet> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut bytes = [0u8; 32];
            rng.fill_bytes(&mut bytes);
            KeySet::derive(&SecretKey::from_bytes(&bytes).expect("32 bytes"), scheme)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_keys_are_reproducible_and_distinct() {
        let a = keysets_from_seed(7, 3, Scheme::Grayscale);
        let b = keysets_from_seed(7, 3, Scheme::Grayscale);
        assert_eq!(a[2].subkeys()[0].as_bytes(), b[2].subkeys()[0].as_bytes());
        assert_ne!(a[0].subkeys()[0].as_bytes(), a[1].subkeys()[0].as_bytes());
    }

    #[test]
    fn best_trial_maximizes_score() {
        let img = RasterImage::from_fn(64, 32, 3, |x, y, c| ((x * 3 + y * 5 + c * 40) % 256) as u8).unwrap();
        let cfg = CipherConfig::grayscale();
        let keys = keysets_from_seed(1, 3, Scheme::Grayscale);
        let report = attack_trial_protocol(&img, &keys, &cfg, SolverMode::WithD4).unwrap();
        assert_eq!(report.n, 8 * 12);
        assert_eq!(report.trials.len(), 3);
        let best = report.best().score();
        assert!(report.trials.iter().all(|t| t.score() <= best));
        assert!(attack_trial_protocol(&img, &[], &cfg, SolverMode::WithD4).is_err());
    }
}
