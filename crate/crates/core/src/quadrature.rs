//! Gauss–Hermite quadrature against the standard normal density.

use crate::error::{RecalError, Result};

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` by the implicit QL algorithm, sorted ascending.
fn tridiagonal_eigenvalues(mut d: Vec<f64>, off: Vec<f64>) -> Option<Vec<f64>> {
    let n = d.len();
    let mut e = off;
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return None;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Some(d)
}

/// Newton polish of a root of the degree-`n` Hermite polynomial (weight
/// `exp(-x^2)`); returns the root and its Gauss weight.
fn polish(n: usize, mut z: f64) -> Option<(f64, f64)> {
    const PI_M4: f64 = 0.751_125_544_464_942_5;
    let nf = n as f64;
    for _ in 0..50 {
        let (mut p1, mut p2) = (PI_M4, 0.0);
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
        }
        let derivative = (2.0 * nf).sqrt() * p2;
        let step = p1 / derivative;
        z -= step;
        if step.abs() <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
            return Some((z, 2.0 / (derivative * derivative)));
        }
    }
    None
}

/// Nodes and weights such that `sum(w_i * f(z_i))` approximates `E[f(Z)]`
/// for `Z ~ N(0, 1)`. Weights sum to one.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `n`-point rule. Starting nodes are the eigenvalues of the
    /// Jacobi matrix of the Hermite recurrence; each is then polished by
    /// Newton iteration on the orthonormal recurrence, which also yields the
    /// weight.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(RecalError::Domain("quadrature needs at least one node".into()));
        }
        let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
        let guesses = tridiagonal_eigenvalues(vec![0.0; n], off)
            .ok_or_else(|| RecalError::Domain(format!("Jacobi matrix eigenvalues for n = {n} did not converge")))?;

        // Polish the non-negative half and mirror it so the rule is exactly
        // symmetric.
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in n / 2..n {
            let (x, w) = polish(n, guesses[i].max(0.0)).ok_or_else(|| {
                RecalError::Domain(format!("Gauss-Hermite node {i} of {n} did not converge"))
            })?;
            let x = if 2 * i + 1 == n { 0.0 } else { x * std::f64::consts::SQRT_2 };
            let w = w / std::f64::consts::PI.sqrt();
            nodes[i] = x;
            weights[i] = w;
            nodes[n - 1 - i] = -x;
            weights[n - 1 - i] = w;
        }
        if nodes.windows(2).any(|p| p[0] >= p[1]) {
            return Err(RecalError::Domain(format!("Gauss-Hermite nodes for n = {n} are not distinct")));
        }
        Ok(Self { nodes, weights })
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}
