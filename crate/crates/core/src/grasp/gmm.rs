use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

pub const EM_STEPS: usize = 10;
pub const COVARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Gaussian mixture fitted by expectation–maximisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    pub components: Vec<Component>,
}

fn floored(mut cov: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    for i in 0..cov.nrows() {
        cov[(i, i)] += floor;
    }
    cov
}

fn chol(cov: &DMatrix<f64>) -> Cholesky<f64, Dyn> {
    Cholesky::new(cov.clone())
        .or_else(|| Cholesky::new(floored(cov.clone(), 1e-9)))
        .expect("floored covariance is positive definite")
}

fn log_density(x: &DVector<f64>, mean: &DVector<f64>, ch: &Cholesky<f64, Dyn>) -> f64 {
    let d = x - mean;
    let z = ch.l().solve_lower_triangular(&d).expect("triangular solve");
    let log_det: f64 = ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    -0.5 * (z.norm_squared() + log_det + x.len() as f64 * (2.0 * PI).ln())
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn sample_covariance(data: &[DVector<f64>], w: &[f64], mean: &DVector<f64>) -> DMatrix<f64> {
    let dim = mean.len();
    let total: f64 = w.iter().sum();
    let mut cov = DMatrix::zeros(dim, dim);
    for (x, &wi) in data.iter().zip(w) {
        let d = x - mean;
        cov += (&d * d.transpose()) * wi;
    }
    cov / total.max(f64::MIN_POSITIVE)
}

impl Gmm {
    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    /// Single Gaussian at `mean` with isotropic spread `sigma` per axis.
    pub fn isotropic(mean: DVector<f64>, sigma: &DVector<f64>) -> Self {
        let cov = DMatrix::from_diagonal(&sigma.map(|s| s * s));
        Gmm {
            components: vec![Component {
                weight: 1.0,
                mean,
                covariance: cov,
            }],
        }
    }

    /// EM fit of `m` components. Means start from farthest-point picks
    /// beginning at `data[0]`, so callers control initialisation by order.
    pub fn fit(data: &[DVector<f64>], m: usize, steps: usize, floor: f64) -> Gmm {
        assert!(!data.is_empty() && m >= 1, "fit needs data and components");
        let n = data.len();
        let m = m.min(n);
        let uniform = vec![1.0; n];
        let global_mean = data.iter().fold(DVector::zeros(data[0].len()), |a, x| a + x) / n as f64;
        let global_cov = floored(sample_covariance(data, &uniform, &global_mean), floor);

        let mut picks = vec![0usize];
        let mut dist: Vec<f64> = data.iter().map(|x| (x - &data[0]).norm_squared()).collect();
        while picks.len() < m {
            let (far, _) = dist
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .expect("non-empty");
            picks.push(far);
            for (d, x) in dist.iter_mut().zip(data) {
                *d = d.min((x - &data[far]).norm_squared());
            }
        }
        let mut gmm = Gmm {
            components: picks
                .iter()
                .map(|&i| Component {
                    weight: 1.0 / m as f64,
                    mean: data[i].clone(),
                    covariance: global_cov.clone(),
                })
                .collect(),
        };

        let mut resp = vec![vec![0.0; m]; n];
        for _ in 0..steps {
            // E step
            let chols: Vec<_> = gmm.components.iter().map(|c| chol(&c.covariance)).collect();
            for (x, r) in data.iter().zip(resp.iter_mut()) {
                let logs: Vec<f64> = gmm
                    .components
                    .iter()
                    .zip(&chols)
                    .map(|(c, ch)| c.weight.max(f64::MIN_POSITIVE).ln() + log_density(x, &c.mean, ch))
                    .collect();
                let lse = log_sum_exp(&logs);
                for (ri, l) in r.iter_mut().zip(&logs) {
                    *ri = (l - lse).exp();
                }
            }
            // M step
            for (k, comp) in gmm.components.iter_mut().enumerate() {
                let w: Vec<f64> = resp.iter().map(|r| r[k]).collect();
                let nk: f64 = w.iter().sum();
                if nk < 1e-12 {
                    // starved component: leave it where it was
                    continue;
                }
                let mean = data
                    .iter()
                    .zip(&w)
                    .fold(DVector::zeros(comp.mean.len()), |a, (x, &wi)| a + x * wi)
                    / nk;
                comp.covariance = floored(sample_covariance(data, &w, &mean), floor);
                comp.mean = mean;
                comp.weight = nk / n as f64;
            }
            let total: f64 = gmm.components.iter().map(|c| c.weight).sum();
            gmm.components.iter_mut().for_each(|c| c.weight /= total);
        }
        gmm
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                pick = i;
                break;
            }
        }
        let c = &self.components[pick];
        let z = DVector::from_fn(c.mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &c.mean + chol(&c.covariance).l() * z
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let logs: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + log_density(x, &c.mean, &chol(&c.covariance)))
            .collect();
        log_sum_exp(&logs)
    }

    /// Multiplies every covariance by `factor`.
    pub fn inflate(&mut self, factor: f64) {
        for c in &mut self.components {
            c.covariance *= factor;
        }
    }
}
