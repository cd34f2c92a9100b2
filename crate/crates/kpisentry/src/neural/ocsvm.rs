//! One-class SVM in the nu formulation, solved by sequential minimal
//! optimization over maximal violating pairs.
//!
//! Dual problem: minimize `(1/2) a' K a` subject to `0 <= a_i <= 1/(nu * n)`
//! and `sum a_i = 1`, with the Gaussian kernel
//! `k(a, b) = exp(-||a - b||^2 / (2 sigma^2))`. The decision value is
//! `f(z) = sum_i a_i k(x_i, z) - rho`; negative means anomalous.

use std::collections::{HashMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneClassSvmParams {
    /// Gaussian kernel bandwidth sigma.
    pub sigma: f64,
    /// Upper bound on the training outlier fraction, lower bound on the
    /// support vector fraction.
    pub nu: f64,
    /// KKT violation tolerance for convergence.
    pub kkt_tol: f64,
    /// Iteration cap before the solver reports non-convergence.
    pub max_iter: usize,
}

impl Default for OneClassSvmParams {
    fn default() -> Self {
        OneClassSvmParams {
            sigma: 1.0,
            nu: 0.1,
            kkt_tol: 1e-4,
            max_iter: 2_000_000,
        }
    }
}

impl OneClassSvmParams {
    fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "nu must be in (0, 1], got {}",
                self.nu
            )));
        }
        if self.kkt_tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::InvalidConfig(
                "kkt_tol must be positive and max_iter >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassSvmModel {
    pub sigma: f64,
    pub nu: f64,
    /// Latent-space support vectors (training points with positive alpha).
    pub support_vectors: Vec<Vec<f64>>,
    /// Dual coefficients matching `support_vectors`; they sum to 1.
    pub alphas: Vec<f64>,
    /// Decision offset.
    pub rho: f64,
    pub dim: usize,
    /// SMO iterations spent during training.
    pub iterations: usize,
}

pub(crate) fn gaussian_kernel(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let mut sq = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sq += d * d;
    }
    (-sq / (2.0 * sigma * sigma)).exp()
}

impl OneClassSvmModel {
    /// Signed decision value of `z`; negative means anomalous.
    pub fn decision(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "expected {}-dim latent vector, got {}",
                self.dim,
                z.len()
            )));
        }
        let kernel_sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.alphas)
            .map(|(sv, a)| a * gaussian_kernel(sv, z, self.sigma))
            .sum();
        Ok(kernel_sum - self.rho)
    }
}

/// Kernel rows computed on demand with bounded FIFO caching; the full Gram
/// matrix does not fit in memory for realistic training sizes.
struct KernelCache<'a> {
    points: &'a [Vec<f64>],
    sigma: f64,
    rows: HashMap<usize, Vec<f64>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(points: &'a [Vec<f64>], sigma: f64, capacity: usize) -> Self {
        KernelCache {
            points,
            sigma,
            rows: HashMap::new(),
            order: VecDeque::new(),
            capacity: capacity.max(4),
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if !self.rows.contains_key(&i) {
            let row: Vec<f64> = self
                .points
                .iter()
                .map(|p| gaussian_kernel(&self.points[i], p, self.sigma))
                .collect();
            if self.order.len() >= self.capacity {
                if let Some(evict) = self.order.pop_front() {
                    self.rows.remove(&evict);
                }
            }
            self.order.push_back(i);
            self.rows.insert(i, row);
        }
        self.rows.get(&i).expect("row just inserted")
    }
}

/// Train a nu-one-class SVM on latent vectors.
///
/// The initial alpha mass is spread over a seeded permutation of the points;
/// the SMO loop itself is deterministic (maximal violating pair selection).
pub fn train_one_class_svm(
    latents: &[Vec<f64>],
    params: &OneClassSvmParams,
    seed: u64,
) -> Result<OneClassSvmModel> {
    params.validate()?;
    let n = latents.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "one-class SVM needs at least 2 training points".into(),
        ));
    }
    let dim = latents[0].len();
    if latents.iter().any(|z| z.len() != dim) {
        return Err(Error::InvalidInput(
            "latent vectors have inconsistent widths".into(),
        ));
    }

    let upper = 1.0 / (params.nu * n as f64);
    let bound_eps = upper * 1e-9;

    // Initial feasible point: fill floor(nu * n) coefficients at the upper
    // bound plus one fractional remainder, over a seeded permutation.
    let mut order: Vec<usize> = (0..n).collect();
    {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
    }
    let mut alpha = vec![0.0; n];
    let mut remaining = 1.0f64;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let take = remaining.min(upper);
        alpha[i] = take;
        remaining -= take;
    }

    let mut cache = KernelCache::new(latents, params.sigma, 768);

    // Gradient of the objective: g = K alpha.
    let mut gradient = vec![0.0; n];
    for (i, &a) in alpha.iter().enumerate() {
        if a > 0.0 {
            let row = cache.row(i);
            for (g, k) in gradient.iter_mut().zip(row) {
                *g += a * k;
            }
        }
    }

    let mut iterations = 0usize;
    loop {
        // Maximal violating pair: raise alpha where the gradient is lowest,
        // lower it where the gradient is highest.
        let mut up: Option<(usize, f64)> = None;
        let mut down: Option<(usize, f64)> = None;
        for i in 0..n {
            let g = gradient[i];
            if alpha[i] < upper - bound_eps && up.is_none_or(|(_, best)| g < best) {
                up = Some((i, g));
            }
            if alpha[i] > bound_eps && down.is_none_or(|(_, best)| g > best) {
                down = Some((i, g));
            }
        }
        let (Some((i_up, g_up)), Some((i_down, g_down))) = (up, down) else {
            break;
        };
        if g_down - g_up <= params.kkt_tol {
            break;
        }
        if iterations >= params.max_iter {
            return Err(Error::NonConvergence(format!(
                "one-class SVM SMO: KKT violation {:.3e} > tol {:.1e} after {} iterations",
                g_down - g_up,
                params.kkt_tol,
                iterations
            )));
        }
        iterations += 1;

        let k_up_row = cache.row(i_up).to_vec();
        let k_down_row = cache.row(i_down);
        let eta = (k_up_row[i_up] + k_down_row[i_down] - 2.0 * k_up_row[i_down]).max(1e-12);
        let step = ((g_down - g_up) / eta)
            .min(upper - alpha[i_up])
            .min(alpha[i_down]);
        alpha[i_up] += step;
        alpha[i_down] -= step;
        for ((g, ku), kd) in gradient.iter_mut().zip(&k_up_row).zip(k_down_row) {
            *g += step * (ku - kd);
        }
    }

    // rho: average gradient over free support vectors, falling back to the
    // midpoint of the boundary gradients when none are free.
    let free: Vec<f64> = (0..n)
        .filter(|&i| alpha[i] > bound_eps && alpha[i] < upper - bound_eps)
        .map(|i| gradient[i])
        .collect();
    let rho = if free.is_empty() {
        let hi = (0..n)
            .filter(|&i| alpha[i] >= upper - bound_eps)
            .map(|i| gradient[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let lo = (0..n)
            .filter(|&i| alpha[i] <= bound_eps)
            .map(|i| gradient[i])
            .fold(f64::INFINITY, f64::min);
        match (hi.is_finite(), lo.is_finite()) {
            (true, true) => (hi + lo) / 2.0,
            (true, false) => hi,
            (false, true) => lo,
            (false, false) => 0.0,
        }
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };

    let mut support_vectors = Vec::new();
    let mut alphas = Vec::new();
    for (i, &a) in alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(latents[i].clone());
            alphas.push(a);
        }
    }

    Ok(OneClassSvmModel {
        sigma: params.sigma,
        nu: params.nu,
        support_vectors,
        alphas,
        rho,
        dim,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian_cloud(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        // Stddev 0.3 keeps the cluster diameter below the default kernel
        // bandwidth, so the decision region is a ball around the data mass.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.3).unwrap();
        (0..n)
            .map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect())
            .collect()
    }

    fn check_nu_property(points: &[Vec<f64>], model: &OneClassSvmModel, nu: f64, tol: f64) {
        // Free support vectors satisfy |f| <= solver tolerance rather than
        // f = 0 exactly; only decisions below -tol count as margin errors.
        let n = points.len() as f64;
        let outliers = points
            .iter()
            .filter(|z| model.decision(z).unwrap() < -tol)
            .count() as f64;
        assert!(
            outliers / n <= nu + 1.0 / n,
            "outlier fraction {} exceeds nu {}",
            outliers / n,
            nu
        );
        let sv_fraction = model.support_vectors.len() as f64 / n;
        assert!(
            sv_fraction >= nu - 1.0 / n,
            "support vector fraction {sv_fraction} below nu {nu}"
        );
    }

    fn check_dual_feasibility(model: &OneClassSvmModel, n: usize) {
        let upper = 1.0 / (model.nu * n as f64);
        let sum: f64 = model.alphas.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6, "alpha sum {sum}");
        for &a in &model.alphas {
            assert!(a >= -1e-6 && a <= upper + 1e-6, "alpha {a} outside box");
        }
    }

    #[test]
    fn nu_property_and_feasibility_on_random_instances() {
        for seed in 0..20u64 {
            let n = 40 + (seed as usize % 4) * 17;
            let points = gaussian_cloud(n, 3, seed);
            let params = OneClassSvmParams {
                nu: 0.2,
                ..OneClassSvmParams::default()
            };
            let model = train_one_class_svm(&points, &params, seed).unwrap();
            check_nu_property(&points, &model, params.nu, params.kkt_tol);
            check_dual_feasibility(&model, n);
        }
    }

    #[test]
    fn cluster_mean_inside_far_point_outside() {
        let points = gaussian_cloud(200, 3, 7);
        let params = OneClassSvmParams::default();
        let model = train_one_class_svm(&points, &params, 1).unwrap();
        let mean = vec![0.0, 0.0, 0.0];
        assert!(
            model.decision(&mean).unwrap() > 0.0,
            "cluster mean should be inside the boundary"
        );
        // Ten cluster radii out (cluster radius ~ 0.5 at stddev 0.3 in 3-d).
        let far = vec![5.0, 0.0, 0.0];
        assert!(
            model.decision(&far).unwrap() < 0.0,
            "distant point should be outside the boundary"
        );
    }

    #[test]
    fn kernel_matrix_is_positive_semidefinite() {
        // Smallest eigenvalue of the Gram matrix stays above -1e-8 on random
        // instances; eigenvalues via a Jacobi rotation oracle.
        fn jacobi_eigenvalues(mut m: Vec<Vec<f64>>) -> Vec<f64> {
            let n = m.len();
            for _ in 0..100 {
                let mut p = 0;
                let mut q = 1;
                let mut largest = 0.0f64;
                for i in 0..n {
                    for j in i + 1..n {
                        if m[i][j].abs() > largest {
                            largest = m[i][j].abs();
                            p = i;
                            q = j;
                        }
                    }
                }
                if largest < 1e-14 {
                    break;
                }
                let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
            (0..n).map(|i| m[i][i]).collect()
        }

        for seed in 0..6u64 {
            let points = gaussian_cloud(8, 3, 100 + seed);
            let gram: Vec<Vec<f64>> = points
                .iter()
                .map(|a| points.iter().map(|b| gaussian_kernel(a, b, 1.0)).collect())
                .collect();
            // Symmetry first.
            for i in 0..gram.len() {
                for j in 0..gram.len() {
                    assert!((gram[i][j] - gram[j][i]).abs() < 1e-12);
                }
            }
            let eig = jacobi_eigenvalues(gram);
            for e in eig {
                assert!(e >= -1e-8, "negative eigenvalue {e}");
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let points = gaussian_cloud(120, 4, 3);
        let params = OneClassSvmParams::default();
        let a = train_one_class_svm(&points, &params, 5).unwrap();
        let b = train_one_class_svm(&points, &params, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let points = gaussian_cloud(100, 3, 9);
        let params = OneClassSvmParams {
            max_iter: 1,
            ..OneClassSvmParams::default()
        };
        match train_one_class_svm(&points, &params, 0) {
            Err(Error::NonConvergence(msg)) => {
                assert!(msg.contains("KKT violation"), "message: {msg}");
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(train_one_class_svm(&[], &OneClassSvmParams::default(), 0).is_err());
        let mixed = vec![vec![0.0, 1.0], vec![0.0]];
        assert!(train_one_class_svm(&mixed, &OneClassSvmParams::default(), 0).is_err());
        let params = OneClassSvmParams {
            nu: 0.0,
            ..OneClassSvmParams::default()
        };
        assert!(train_one_class_svm(&gaussian_cloud(10, 2, 0), &params, 0).is_err());
    }

    #[test]
    fn decision_monotone_along_outward_ray() {
        let points = gaussian_cloud(150, 3, 15);
        let model = train_one_class_svm(&points, &OneClassSvmParams::default(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..5 {
            let dir: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-9);
            let mut last = f64::INFINITY;
            for step in 0..12 {
                let r = 0.5 * step as f64;
                let z: Vec<f64> = dir.iter().map(|d| d / norm * r).collect();
                let f = model.decision(&z).unwrap();
                assert!(
                    f <= last + 1e-9,
                    "decision rose moving outward: {last} -> {f} at radius {r}"
                );
                last = f;
            }
        }
    }
}
