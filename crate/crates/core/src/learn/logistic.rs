use serde::{Deserialize, Serialize};

use super::Dataset;

/// Column means and standard deviations from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub cols: Vec<usize>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Scaler {
    pub fn fit(ds: &Dataset, cols: &[usize]) -> Scaler {
        let n = ds.len().max(1) as f64;
        let mut mean = vec![0.0; cols.len()];
        let mut sd = vec![0.0; cols.len()];
        for (j, &c) in cols.iter().enumerate() {
            mean[j] = ds.rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = ds.rows.iter().map(|r| (r[c] - mean[j]).powi(2)).sum::<f64>() / n;
            sd[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Scaler { cols: cols.to_vec(), mean, sd }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        self.cols.iter().enumerate().map(|(j, &c)| (row[c] - self.mean[j]) / self.sd[j]).collect()
    }
}

/// L2-regularized mean log loss over standardized rows. Parameters are the
/// weights followed by the intercept; the intercept is not penalized.
pub struct LogisticProblem {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<bool>,
    pub l2: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticProblem {
    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, |r| r.len()) + 1
    }

    fn margin(&self, theta: &[f64], row: &[f64]) -> f64 {
        let d = row.len();
        theta[d] + row.iter().zip(theta).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        let n = self.x.len() as f64;
        let d = self.dim() - 1;
        let data: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(row, &y)| {
                let z = self.margin(theta, row);
                if y {
                    softplus(-z)
                } else {
                    softplus(z)
                }
            })
            .sum();
        data / n + 0.5 * self.l2 * theta[..d].iter().map(|w| w * w).sum::<f64>()
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.x.len() as f64;
        let d = self.dim() - 1;
        let mut g = vec![0.0; d + 1];
        for (row, &y) in self.x.iter().zip(&self.y) {
            let r = sigmoid(self.margin(theta, row)) - y as u8 as f64;
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += r * xj;
            }
            g[d] += r;
        }
        for (j, gj) in g.iter_mut().enumerate() {
            *gj /= n;
            if j < d {
                *gj += self.l2 * theta[j];
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub scaler: Scaler,
    /// One weight per scaled column.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after each accepted step.
    pub losses: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl LogisticModel {
    /// Gradient descent with backtracking until the gradient norm drops
    /// below `tol`.
    pub fn train(ds: &Dataset, cols: &[usize], l2: f64, max_iter: usize, tol: f64) -> LogisticModel {
        let scaler = Scaler::fit(ds, cols);
        let problem = LogisticProblem {
            x: ds.rows.iter().map(|r| scaler.transform(r)).collect(),
            y: ds.labels.clone(),
            l2,
        };
        let mut theta = vec![0.0; problem.dim()];
        let mut loss = problem.loss(&theta);
        let mut losses = vec![loss];
        let mut step = 1.0;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < max_iter {
            let g = problem.gradient(&theta);
            let gn = norm(&g);
            if gn < tol {
                converged = true;
                break;
            }
            iterations += 1;
            loop {
                let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t - step * gi).collect();
                let cl = problem.loss(&cand);
                if cl <= loss - 0.5 * step * gn * gn {
                    theta = cand;
                    loss = cl;
                    step *= 2.0;
                    break;
                }
                step /= 2.0;
                if step < 1e-20 {
                    break;
                }
            }
            if step < 1e-20 {
                break;
            }
            losses.push(loss);
        }
        let d = theta.len() - 1;
        LogisticModel {
            scaler,
            weights: theta[..d].to_vec(),
            intercept: theta[d],
            l2,
            converged,
            iterations,
            losses,
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let x = self.scaler.transform(row);
        sigmoid(self.intercept + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn accuracy(&self, ds: &Dataset) -> f64 {
        let correct = ds
            .rows
            .iter()
            .zip(&ds.labels)
            .filter(|(x, &y)| (self.predict_proba(&x[..]) >= 0.5) == y)
            .count();
        correct as f64 / ds.len().max(1) as f64
    }

    /// Weight of an original feature column, in standardized units.
    pub fn weight_of(&self, col: usize) -> Option<f64> {
        self.scaler.cols.iter().position(|&c| c == col).map(|j| self.weights[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::NUM_FEATURES;

    fn row(v: f64) -> [f64; NUM_FEATURES] {
        let mut r = [0.0; NUM_FEATURES];
        r[0] = v;
        r
    }

    #[test]
    fn two_point_problem_matches_closed_form() {
        // Points x = -1 (negative) and x = +1 (positive) standardize to
        // themselves. With intercept 0 by symmetry the optimum solves
        // l2 * w = 1 - sigmoid(w).
        let mut ds = Dataset::default();
        ds.push(row(-1.0), false);
        ds.push(row(1.0), true);
        let l2 = 0.1;
        let m = LogisticModel::train(&ds, &[0], l2, 10_000, 1e-12);
        assert!(m.converged);
        let w = m.weights[0];
        assert!((l2 * w - (1.0 - sigmoid(w))).abs() < 1e-10);
        // Bisection on the optimality condition as the reference.
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if l2 * mid - (1.0 - sigmoid(mid)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((w - lo).abs() < 1e-4);
        assert!(m.intercept.abs() < 1e-8);
    }

    #[test]
    fn loss_never_increases() {
        let mut ds = Dataset::default();
        for i in 0..200 {
            ds.push(row((i % 17) as f64), (i * 31) % 7 < 3);
        }
        let m = LogisticModel::train(&ds, &[0], 0.01, 500, 1e-9);
        assert!(m.losses.windows(2).all(|w| w[1] <= w[0]));
    }
}
