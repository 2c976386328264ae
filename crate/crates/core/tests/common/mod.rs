//! Independent reference computations for the integration tests.
//!
//! Everything here is built from the closed-form transition rule and dense
//! matrix powers; none of it goes through the crate's solver or kernel
//! tables.

#![allow(dead_code)]

pub type Matrix = Vec<Vec<f64>>;

/// Tiny dense model: states `(delta, level)` flattened age-major.
#[derive(Debug, Clone)]
pub struct Reference {
    pub delta_max: usize,
    pub levels: Vec<f64>,
    pub chain: Matrix,
    pub p_eps: f64,
    pub c0: f64,
}

impl Reference {
    pub fn uniform(delta_max: usize, k: usize, p_eps: f64, c0: f64) -> Self {
        Self {
            delta_max,
            levels: (0..k).map(|i| i as f64 / (k - 1) as f64).collect(),
            chain: vec![vec![1.0 / k as f64; k]; k],
            p_eps,
            c0,
        }
    }

    pub fn n(&self) -> usize {
        self.delta_max * self.levels.len()
    }

    pub fn index(&self, delta: usize, level: usize) -> usize {
        (delta - 1) * self.levels.len() + level
    }

    /// Row of the transition kernel for `(s, pull)`.
    pub fn row(&self, s: usize, pull: bool) -> Vec<f64> {
        let k = self.levels.len();
        let (delta, level) = (s / k + 1, s % k);
        let aged = self.index((delta + 1).min(self.delta_max), level);
        let mut row = vec![0.0; self.n()];
        if pull {
            for j in 0..k {
                row[self.index(1, j)] += self.chain[level][j] * (1.0 - self.p_eps);
            }
            row[aged] += self.p_eps;
        } else {
            row[aged] += 1.0;
        }
        row
    }

    /// Reward of landing in `s`: freshness `1 / delta` times level.
    pub fn state_reward(&self, s: usize) -> f64 {
        let k = self.levels.len();
        self.levels[s % k] / (s / k + 1) as f64
    }

    /// Kernel and expected one-step `(reward, cost)` of a randomized policy.
    pub fn induced(&self, pull: &[f64]) -> (Matrix, Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut p = vec![vec![0.0; n]; n];
        let mut r = vec![0.0; n];
        let mut c = vec![0.0; n];
        for s in 0..n {
            for (a, w) in [(false, 1.0 - pull[s]), (true, pull[s])] {
                if w == 0.0 {
                    continue;
                }
                let row = self.row(s, a);
                for (t, &q) in row.iter().enumerate() {
                    p[s][t] += w * q;
                    r[s] += w * q * self.state_reward(t);
                }
                if a {
                    c[s] += w * self.c0;
                }
            }
        }
        (p, r, c)
    }

    /// Long-run `(reward, cost)` from state 0.
    pub fn averages(&self, pull: &[f64]) -> (f64, f64) {
        let (p, r, c) = self.induced(pull);
        let rho = cesaro_row(&p, 0);
        (dot(&rho, &r), dot(&rho, &c))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// Row `start` of the Cesàro limit of `p`, via repeated squaring of the
/// lazy chain `(I + P) / 2`.
pub fn cesaro_row(p: &Matrix, start: usize) -> Vec<f64> {
    let n = p.len();
    let mut m: Matrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| 0.5 * p[i][j] + if i == j { 0.5 } else { 0.0 })
                .collect()
        })
        .collect();
    for _ in 0..64 {
        let next = matmul(&m, &m);
        let diff = next
            .iter()
            .flatten()
            .zip(m.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        m = next;
        if diff < 1e-15 {
            break;
        }
    }
    m[start].clone()
}

/// Every deterministic policy over `n` states as pull indicators.
pub fn all_deterministic(n: usize) -> impl Iterator<Item = Vec<f64>> {
    (0u64..1 << n).map(move |mask| (0..n).map(|s| ((mask >> s) & 1) as f64).collect())
}

/// Total variation distance between two distributions.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
