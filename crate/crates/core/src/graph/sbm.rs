//! Stochastic block model generator, the synthetic substrate for the
//! desk-scale oracle experiments.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::rng::SplitMix64;
use crate::{Error, Result};

use super::Graph;

/// Stochastic block model specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SbmSpec {
    pub blocks: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feat_dim: usize,
    /// Per-block feature-mean offset along the block's direction.
    pub mean_shift: f64,
    pub noise_std: f64,
    /// Fraction of labels resampled uniformly over all classes.
    pub label_noise: f64,
    pub seed: u64,
}

impl SbmSpec {
    fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() || self.blocks.iter().any(|&b| b < 1) {
            return Err(Error::Config("block sizes must all be >= 1".into()));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::Config(format!(
                "label_noise = {} outside [0, 1)",
                self.label_noise
            )));
        }
        if self.feat_dim == 0 {
            return Err(Error::Config("feat_dim must be >= 1".into()));
        }
        Ok(())
    }
}

/// Generates a block-structured graph. Labels equal block ids (before label
/// noise); features are the block mean `mean_shift * e_{b mod d}` plus
/// Gaussian noise. Deterministic per seed; masks start empty.
///
/// RNG stream order: edges over ordered pairs `(u, v)` with `u < v`, then
/// features row-major, then the label-noise shuffle and resampling.
pub fn gen_sbm(spec: &SbmSpec) -> Result<Graph> {
    spec.validate()?;
    let n: usize = spec.blocks.iter().sum();
    let mut block_of = Vec::with_capacity(n);
    for (b, &size) in spec.blocks.iter().enumerate() {
        block_of.extend(std::iter::repeat(b).take(size));
    }

    let mut rng = SplitMix64::new(spec.seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block_of[u] == block_of[v] { spec.p_in } else { spec.p_out };
            if rng.next_f64() < p {
                edges.push((u, v));
            }
        }
    }

    let mut features = Matrix::zeros(n, spec.feat_dim);
    for v in 0..n {
        let axis = block_of[v] % spec.feat_dim;
        for j in 0..spec.feat_dim {
            let mean = if j == axis { spec.mean_shift } else { 0.0 };
            features.set(v, j, mean + spec.noise_std * rng.next_normal());
        }
    }

    let mut labels: Vec<Option<usize>> = block_of.iter().map(|&b| Some(b)).collect();
    let num_classes = spec.blocks.len();
    let n_noisy = (spec.label_noise * n as f64).round() as usize;
    if n_noisy > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        for &v in order.iter().take(n_noisy) {
            labels[v] = Some(rng.next_below(num_classes));
        }
    }

    let mut g = Graph::build(features, labels, &edges)?;
    // Graph::build derives the class count from labels; under heavy noise a
    // block could lose every label, so pin it to the block count.
    g.num_classes = num_classes;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SbmSpec {
        SbmSpec {
            blocks: vec![5, 5],
            p_in: 1.0,
            p_out: 0.0,
            feat_dim: 4,
            mean_shift: 1.0,
            noise_std: 0.1,
            label_noise: 0.0,
            seed: 11,
        }
    }

    #[test]
    fn two_cliques() {
        let g = gen_sbm(&spec()).unwrap();
        assert_eq!(g.num_nodes(), 10);
        assert_eq!(g.num_edges(), 2 * (5 * 4 / 2));
        assert!(g.has_edge(0, 4));
        assert!(!g.has_edge(0, 5));
    }

    #[test]
    fn labels_equal_block_ids_without_noise() {
        let g = gen_sbm(&spec()).unwrap();
        for v in 0..10 {
            assert_eq!(g.label(v), Some(v / 5));
        }
    }

    #[test]
    fn edge_count_within_three_sigma() {
        let s = SbmSpec {
            blocks: vec![150, 150],
            p_in: 0.05,
            p_out: 0.005,
            feat_dim: 2,
            mean_shift: 1.0,
            noise_std: 1.0,
            label_noise: 0.0,
            seed: 1234,
        };
        let g = gen_sbm(&s).unwrap();
        // Binomial expectation: 2 * C(150,2) * 0.05 + 150^2 * 0.005.
        let pairs_in = 2.0 * (150.0 * 149.0 / 2.0);
        let pairs_out = 150.0 * 150.0;
        let mean = pairs_in * 0.05 + pairs_out * 0.005;
        let var: f64 = pairs_in * 0.05 * 0.95 + pairs_out * 0.005 * 0.995;
        let sigma = var.sqrt();
        let m = g.num_edges() as f64;
        assert!((m - mean).abs() < 3.0 * sigma, "edges {m} vs expectation {mean} +- 3*{sigma}");
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_sbm(&spec()).unwrap();
        let b = gen_sbm(&spec()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let mut other = spec();
        other.seed = 12;
        let c = gen_sbm(&other).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut s = spec();
        s.p_in = 1.5;
        assert!(gen_sbm(&s).is_err());
        let mut s = spec();
        s.blocks = vec![];
        assert!(gen_sbm(&s).is_err());
    }
}
