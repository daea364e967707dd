//! Gauss rules on `[0, 1]`, including the Jacobi-type rules used for
//! `t^mu` weights on cells that touch the Dirichlet boundary.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of an `n`-point rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Jacobi rule for `∫_{-1}^{1} (1 - x)^a (1 + x)^b g(x) dx` with `a = 0`,
/// computed by Golub–Welsch.
fn gauss_jacobi_b(n: usize, b: f64) -> Rule {
    assert!(n >= 1);
    assert!(b > -1.0);
    let a = 0.0_f64;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let diag = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            let s = 2.0 * kf + a + b;
            (b * b - a * a) / (s * (s + 2.0))
        };
        jac[(k, k)] = diag;
        if k + 1 < n {
            let m = kf + 1.0;
            let off = if k == 0 {
                (4.0 * (a + 1.0) * (b + 1.0) / ((a + b + 2.0).powi(2) * (a + b + 3.0))).sqrt()
            } else {
                let s = 2.0 * m + a + b;
                (4.0 * m * (m + a) * (m + b) * (m + a + b) / (s * s * (s + 1.0) * (s - 1.0)))
                    .sqrt()
            };
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    // zeroth moment of (1+x)^b on [-1, 1]
    let mu0 = 2f64.powf(b + 1.0) / (b + 1.0);
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Rule {
        points: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Rule {
    let r = gauss_jacobi_b(n, 0.0);
    Rule {
        points: r.points.iter().map(|x| 0.5 * (1.0 + x)).collect(),
        weights: r.weights.iter().map(|w| 0.5 * w).collect(),
    }
}

/// Rule for `∫_0^1 t^mu g(t) dt`, exact for polynomial `g` of degree `< 2n`.
pub fn gauss_jacobi_unit(n: usize, mu: f64) -> Rule {
    let r = gauss_jacobi_b(n, mu);
    let scale = 2f64.powf(-mu - 1.0);
    Rule {
        points: r.points.iter().map(|x| 0.5 * (1.0 + x)).collect(),
        weights: r.weights.iter().map(|w| w * scale).collect(),
    }
}

/// Lagrange basis polynomial `k` on `nodes`, evaluated at `t`.
pub fn lagrange(nodes: &[f64], k: usize, t: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, &tj)| (t - tj) / (nodes[k] - tj))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in 1..=10 {
            let r = gauss_legendre_unit(n);
            for deg in 0..(2 * n) {
                let approx: f64 = r
                    .points
                    .iter()
                    .zip(&r.weights)
                    .map(|(t, w)| w * t.powi(deg as i32))
                    .sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((approx - exact).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn jacobi_moments() {
        for &mu in &[-0.9, -0.5, -0.3, 0.0, 0.4, 1.7] {
            for n in 1..=8 {
                let r = gauss_jacobi_unit(n, mu);
                for deg in 0..(2 * n) {
                    let approx: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(t, w)| w * t.powi(deg as i32))
                        .sum();
                    let exact = 1.0 / (deg as f64 + mu + 1.0);
                    assert!(
                        (approx - exact).abs() < 1e-13 * exact.max(1.0),
                        "mu={mu} n={n} deg={deg}: {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn lagrange_is_cardinal() {
        let r = gauss_legendre_unit(4);
        for k in 0..4 {
            for j in 0..4 {
                let v = lagrange(&r.points, k, r.points[j]);
                assert!((v - if j == k { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
}
