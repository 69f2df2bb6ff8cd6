//! Exhaustive enumeration of single-root arborescences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{edge_weights, marginals_from_scores, InductionError, StructureMarginals};
use crate::numerics::Tensor;

pub const BRUTE_FORCE_MAX_NODES: usize = 8;

const ROOT: usize = usize::MAX;

fn is_arborescence(parent: &[usize]) -> bool {
    let n = parent.len();
    if parent.iter().filter(|&&p| p == ROOT).count() != 1 {
        return false;
    }
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while parent[cur] != ROOT {
            cur = parent[cur];
            steps += 1;
            if steps > n {
                return false;
            }
        }
    }
    true
}

/// Enumerates every parent assignment (each node picks the root or another
/// node), keeps the acyclic single-root ones, and accumulates
/// `weight = root weight × Π edge weights`.
pub fn brute_force_marginals(p: &Tensor, root: &[f64]) -> Result<StructureMarginals, InductionError> {
    let n = root.len();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(InductionError::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    let mut z = 0.0;
    let mut edge = Tensor::zeros(&[n, n]);
    let mut root_mass = vec![0.0; n];
    // choice c for node j: c == n means root, otherwise parent c (c != j)
    let mut choice = vec![0usize; n];
    let mut parent = vec![ROOT; n];
    'outer: loop {
        let mut valid = true;
        for j in 0..n {
            if choice[j] == j {
                valid = false;
                break;
            }
            parent[j] = if choice[j] == n { ROOT } else { choice[j] };
        }
        if valid && is_arborescence(&parent) {
            let mut w = 1.0;
            for (j, &pj) in parent.iter().enumerate() {
                w *= if pj == ROOT { root[j] } else { p.get(pj, j) };
            }
            z += w;
            for (j, &pj) in parent.iter().enumerate() {
                if pj == ROOT {
                    root_mass[j] += w;
                } else {
                    let v = edge.get(pj, j);
                    edge.set(pj, j, v + w);
                }
            }
        }
        // odometer over {0..=n}^n
        for slot in choice.iter_mut() {
            *slot += 1;
            if *slot <= n {
                continue 'outer;
            }
            *slot = 0;
        }
        break;
    }
    Ok(StructureMarginals {
        a: edge.scale(1.0 / z),
        root: root_mass.iter().map(|m| m / z).collect(),
        log_z: z.ln(),
    })
}

/// Worst-case agreement between the Matrix-Tree marginals and enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleReport {
    pub instances: usize,
    pub max_edge_diff: f64,
    pub max_root_diff: f64,
    pub max_log_z_diff: f64,
    pub max_normalization_error: f64,
}

impl OracleReport {
    pub fn max_marginal_diff(&self) -> f64 {
        self.max_edge_diff.max(self.max_root_diff)
    }
}

/// Random pair and root scores, uniform in `[-spread, spread]`, with a
/// zero diagonal.
pub fn random_scores(rng: &mut impl Rng, n: usize, spread: f64) -> (Tensor, Vec<f64>) {
    let mut s = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s.set(i, j, rng.gen_range(-spread..spread));
            }
        }
    }
    let root = (0..n).map(|_| rng.gen_range(-spread..spread)).collect();
    (s, root)
}

/// Compares `marginals_from_scores` with enumeration on `trials` random
/// score sets for every size in `sizes`.
pub fn compare_with_oracle(seed: u64, trials: usize, sizes: &[usize]) -> Result<OracleReport, InductionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport {
        instances: 0,
        max_edge_diff: 0.0,
        max_root_diff: 0.0,
        max_log_z_diff: 0.0,
        max_normalization_error: 0.0,
    };
    for &n in sizes {
        for _ in 0..trials {
            let (s, s_root) = random_scores(&mut rng, n, 3.0);
            let fast = marginals_from_scores(&s, &s_root)?;
            let w = edge_weights(&s, &s_root);
            let slow = brute_force_marginals(&w.p, &w.root)?;
            report.instances += 1;
            report.max_edge_diff = report.max_edge_diff.max(fast.a.max_abs_diff(&slow.a));
            let root_diff = fast.root.iter().zip(&slow.root).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            report.max_root_diff = report.max_root_diff.max(root_diff);
            let log_z_diff = (fast.log_z - (slow.log_z + n as f64 * w.shift)).abs();
            report.max_log_z_diff = report.max_log_z_diff.max(log_z_diff);
            report.max_normalization_error = report.max_normalization_error.max(fast.normalization_error());
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Tensor {
        let mut p = Tensor::filled(&[n, n], 1.0);
        for i in 0..n {
            p.set(i, i, 0.0);
        }
        p
    }

    #[test]
    fn two_nodes_two_trees() {
        let m = brute_force_marginals(&uniform(2), &[1.0, 1.0]).unwrap();
        assert!((m.log_z.exp() - 2.0).abs() < 1e-12);
        assert!((m.a.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((m.root[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_nodes_nine_trees() {
        let m = brute_force_marginals(&uniform(3), &[1.0; 3]).unwrap();
        assert!((m.log_z.exp() - 9.0).abs() < 1e-12);
        for i in 0..3 {
            assert!((m.root[i] - 1.0 / 3.0).abs() < 1e-15);
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 1.0 / 3.0 };
                assert!((m.a.get(i, j) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cayley_count_for_four() {
        // n · n^(n−2) rooted trees on K_n
        let m = brute_force_marginals(&uniform(4), &[1.0; 4]).unwrap();
        assert!((m.log_z.exp() - 64.0).abs() < 1e-9);
    }

    #[test]
    fn small_random_comparison() {
        let r = compare_with_oracle(11, 5, &[2, 3, 4]).unwrap();
        assert_eq!(r.instances, 15);
        assert!(r.max_marginal_diff() < 1e-10, "{r:?}");
        assert!(r.max_log_z_diff < 1e-9);
    }

    #[test]
    fn too_large_rejected() {
        assert!(matches!(
            brute_force_marginals(&uniform(9), &[1.0; 9]),
            Err(InductionError::TooLarge { n: 9, max: 8 })
        ));
    }
}
