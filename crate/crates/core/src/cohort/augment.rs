use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::graph::{NodeKind, PatientGraph};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Perturbed copies added next to the original.
    pub variants: usize,
    /// Per-node drop probability for anatomical regions.
    pub dropout: f64,
    pub noise_sd: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            variants: 4,
            dropout: 0.05,
            noise_sd: 0.1,
        }
    }
}

/// The untouched graph followed by `cfg.variants` perturbed copies.
///
/// Each copy drops anatomical regions independently (never the last one) and
/// adds Gaussian noise to every raw feature.
pub fn augment(graph: &PatientGraph, seed: u64, cfg: &AugmentConfig) -> Vec<PatientGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, cfg.noise_sd.max(0.0)).expect("finite sd");
    let mut out = Vec::with_capacity(cfg.variants + 1);
    out.push(graph.clone());
    for _ in 0..cfg.variants {
        let mut g = graph.clone();
        for kind in NodeKind::ANATOMICAL {
            if !g.is_present(kind) {
                continue;
            }
            if rng.random_bool(cfg.dropout.clamp(0.0, 1.0)) && g.present_anatomical_count() > 1 {
                g.remove_node(kind);
            }
        }
        if cfg.noise_sd > 0.0 {
            for node in g.nodes.iter_mut().filter(|n| n.present) {
                for v in &mut node.features {
                    *v += noise.sample(&mut rng);
                }
            }
        }
        out.push(g);
    }
    out
}
