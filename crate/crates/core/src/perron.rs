//! Transition matrices and Perron–Frobenius data.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Weighting};
use crate::map::{strongly_connected, GraphMap};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 1_000_000;

/// Entry `(i, j)` counts traversals of `e_j` by `φ(e_i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub rows: Vec<Vec<u64>>,
}

impl TransitionMatrix {
    pub fn of(map: &GraphMap) -> Self {
        TransitionMatrix {
            rows: map.transition_counts(),
        }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn is_irreducible(&self) -> bool {
        strongly_connected(&self.rows)
    }

    /// Exact `k`-th power.
    pub fn power(&self, k: u32) -> Vec<Vec<BigUint>> {
        let n = self.size();
        let mut acc: Vec<Vec<BigUint>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| BigUint::from(u8::from(i == j)))
                    .collect()
            })
            .collect();
        for _ in 0..k {
            acc = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            (0..n)
                                .filter(|&l| self.rows[l][j] != 0)
                                .fold(BigUint::zero(), |s, l| {
                                    s + &acc[i][l] * self.rows[l][j]
                                })
                        })
                        .collect()
                })
                .collect();
        }
        acc
    }

    /// Bounds on the dominant eigenvalue from the row sums of `M^k`:
    /// `min_i (row_i)^{1/k} ≤ ϖ ≤ max_i (row_i)^{1/k}`.
    pub fn growth_bracket(&self, k: u32) -> (f64, f64) {
        let p = self.power(k.max(1));
        let sums: Vec<f64> = p
            .iter()
            .map(|r| {
                r.iter()
                    .fold(BigUint::zero(), |s, x| s + x)
                    .to_f64()
                    .unwrap_or(f64::INFINITY)
            })
            .collect();
        let root = |x: f64| x.powf(1.0 / f64::from(k.max(1)));
        let lo = sums.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = sums.iter().copied().fold(0.0, f64::max);
        (root(lo), root(hi))
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(v).map(|(&m, x)| m as f64 * x).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerronData {
    pub eigenvalue: f64,
    /// Positive right eigenvector scaled so that the first edge has weight 1.
    pub weights: Weighting,
    /// `max_i |(M w)_i − ϖ w_i|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Dominant eigenpair of an irreducible nonnegative matrix.
///
/// Iterates with `M + I`, which is primitive whenever `M` is irreducible, so
/// periodic matrices converge too. The Collatz–Wielandt ratios
/// `(Mv)_i / v_i` bracket the eigenvalue; iteration stops once the bracket
/// is narrower than `tol` (relative to the eigenvalue when it exceeds 1).
pub fn perron_eigen(m: &TransitionMatrix, tol: f64) -> Result<PerronData> {
    if !m.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let n = m.size();
    let mut v = vec![1.0 / n as f64; n];
    for it in 1..=MAX_ITERATIONS {
        let mv = m.apply(&v);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in mv.iter().zip(&v) {
            let r = x / y;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let eig = 0.5 * (lo + hi);
        if v.iter().all(|x| *x > 0.0) && hi - lo <= tol * eig.max(1.0) {
            let scale = v[0];
            let w: Vec<f64> = v.iter().map(|x| x / scale).collect();
            let mw = m.apply(&w);
            let residual = mw
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - eig * b).abs())
                .fold(0.0, f64::max);
            return Ok(PerronData {
                eigenvalue: eig,
                weights: Weighting::new(w)?,
                residual,
                iterations: it,
            });
        }
        // (M + I) v, renormalised
        let mut next: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a + b).collect();
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        v = next;
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
    })
}

/// Result of comparing tightened iterated lengths with `ϖ^n |e|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub max_residual: f64,
    pub worst_edge: Option<EdgeId>,
    pub worst_power: usize,
    pub within_tol: bool,
}

/// Maximum over edges `e` and `1 ≤ n ≤ n_max` of
/// `| |φ^n(e)|_w / (ϖ^n |e|) − 1 |`, using tightened images.
pub fn verify_expansion(
    map: &GraphMap,
    pd: &PerronData,
    n_max: usize,
    tol: f64,
) -> Result<ExpansionCheck> {
    map.ensure_valid()?;
    let mut worst = ExpansionCheck {
        max_residual: 0.0,
        worst_edge: None,
        worst_power: 0,
        within_tol: true,
    };
    for e in map.graph().edges() {
        let we = pd.weights.get(e)?;
        let mut path = map.iterate_edge(e, 0, true);
        for n in 1..=n_max {
            path = map.apply_path(&path).tighten();
            let len = path.weighted_length(&pd.weights)?;
            let r = (len / (pd.eigenvalue.powi(n as i32) * we) - 1.0).abs();
            if worst.worst_edge.is_none() || r > worst.max_residual {
                worst.max_residual = r;
                worst.worst_edge = Some(e);
                worst.worst_power = n;
            }
        }
    }
    worst.within_tol = worst.max_residual <= tol;
    Ok(worst)
}
