use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gmm::{Gmm, COVARIANCE_FLOOR, EM_STEPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CemParams {
    pub population: usize,
    pub elite_fraction: f64,
    pub components: usize,
    pub iterations: usize,
    /// Multiplier on the first fitted covariance; >1 widens early search.
    pub init_scale: f64,
}

impl Default for CemParams {
    fn default() -> Self {
        Self {
            population: 120,
            elite_fraction: 0.15,
            components: 2,
            iterations: 8,
            init_scale: 1.5,
        }
    }
}

impl CemParams {
    pub fn elite_count(&self) -> usize {
        (self.elite_fraction * self.population as f64).ceil() as usize
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(format!("elite fraction {} not in (0, 1)", self.elite_fraction));
        }
        if self.components == 0 {
            return Err("need at least one mixture component".into());
        }
        if self.elite_count() < self.components {
            return Err(format!(
                "{} elites cannot support {} components",
                self.elite_count(),
                self.components
            ));
        }
        if !(self.init_scale > 0.0) {
            return Err("init_scale must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CemOutcome {
    pub best: DVector<f64>,
    pub best_score: f64,
    /// Best score seen so far, after the initial population and after each
    /// iteration.
    pub history: Vec<f64>,
    /// Every evaluated sample with its score, in evaluation order.
    pub evaluated: Vec<(DVector<f64>, f64)>,
    pub model: Option<Gmm>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CemError {
    InvalidParams(String),
    /// Every elite scored zero; carries the best sample anyway.
    EmptyElite {
        best: DVector<f64>,
        evaluated: usize,
    },
}

/// Cross-entropy maximisation of `objective` with a Gaussian-mixture
/// sampling model. `periodic` lists `(dimension, period)` pairs that are
/// unwrapped around the best elite before each refit; `project` maps
/// samples back into the feasible set.
pub fn cem<R, F, P>(
    params: &CemParams,
    initial: Vec<DVector<f64>>,
    periodic: &[(usize, f64)],
    mut objective: F,
    mut project: P,
    rng: &mut R,
) -> Result<CemOutcome, CemError>
where
    R: Rng + ?Sized,
    F: FnMut(&DVector<f64>) -> f64,
    P: FnMut(&mut DVector<f64>),
{
    params.validate().map_err(CemError::InvalidParams)?;
    if initial.is_empty() {
        return Err(CemError::InvalidParams("empty initial population".into()));
    }
    let mut evaluated: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut population: Vec<(DVector<f64>, f64)> = initial
        .into_iter()
        .map(|mut x| {
            project(&mut x);
            let s = objective(&x);
            (x, s)
        })
        .collect();
    evaluated.extend(population.iter().cloned());

    let best_of = |pop: &[(DVector<f64>, f64)]| {
        pop.iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
            .map(|(_, p)| p.clone())
            .expect("non-empty population")
    };
    let (mut best, mut best_score) = best_of(&population);
    let mut history = vec![best_score];
    let mut model = None;

    for it in 0..params.iterations {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| population[b].1.total_cmp(&population[a].1).then(a.cmp(&b)));
        let k = params.elite_count().min(order.len());
        let mut elites: Vec<DVector<f64>> = order[..k].iter().map(|&i| population[i].0.clone()).collect();
        if population[order[0]].1 <= 0.0 {
            return Err(CemError::EmptyElite {
                best,
                evaluated: evaluated.len(),
            });
        }
        let anchor = elites[0].clone();
        for x in elites.iter_mut() {
            for &(d, period) in periodic {
                let delta = x[d] - anchor[d];
                x[d] = anchor[d] + delta - period * (delta / period).round();
            }
        }
        let mut gmm = Gmm::fit(&elites, params.components, EM_STEPS, COVARIANCE_FLOOR);
        if it == 0 {
            gmm.inflate(params.init_scale);
        }
        population = (0..params.population)
            .map(|_| {
                let mut x = gmm.sample(rng);
                project(&mut x);
                let s = objective(&x);
                (x, s)
            })
            .collect();
        evaluated.extend(population.iter().cloned());
        let (b, s) = best_of(&population);
        if s > best_score {
            best = b;
            best_score = s;
        }
        history.push(best_score);
        model = Some(gmm);
    }
    if best_score <= 0.0 {
        return Err(CemError::EmptyElite {
            best,
            evaluated: evaluated.len(),
        });
    }
    Ok(CemOutcome {
        best,
        best_score,
        history,
        evaluated,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bump(x: &DVector<f64>) -> f64 {
        let d = (x[0] - 0.3).powi(2) + (x[1] + 0.2).powi(2);
        (-d / 0.02).exp()
    }

    fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<DVector<f64>> {
        (0..n)
            .map(|_| DVector::from_vec(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
            .collect()
    }

    #[test]
    fn climbs_a_bump() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = CemParams::default();
        let init = uniform(&mut rng, p.population);
        let out = cem(&p, init, &[], bump, |_| {}, &mut rng).unwrap();
        assert!(out.best_score > 0.999, "{}", out.best_score);
        assert_eq!(out.history.len(), p.iterations + 1);
        assert!(out.history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(out.evaluated.len(), p.population * (p.iterations + 1));
    }

    #[test]
    fn zero_iterations_is_random_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = CemParams {
            iterations: 0,
            ..CemParams::default()
        };
        let init = uniform(&mut rng, p.population);
        let best = init.iter().map(bump).fold(f64::NEG_INFINITY, f64::max);
        let out = cem(&p, init, &[], bump, |_| {}, &mut rng).unwrap();
        assert_eq!(out.best_score, best);
        assert!(out.model.is_none());
    }

    #[test]
    fn flat_zero_field_is_empty_elite() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = CemParams::default();
        let init = uniform(&mut rng, p.population);
        let first = init[0].clone();
        match cem(&p, init, &[], |_| 0.0, |_| {}, &mut rng) {
            Err(CemError::EmptyElite { best, .. }) => assert_eq!(best, first),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn periodic_dimension_wraps() {
        // optimum sits on the seam at 0 == π
        let f = |x: &DVector<f64>| {
            let d = x[0].rem_euclid(std::f64::consts::PI);
            let d = d.min(std::f64::consts::PI - d);
            (-d * d / 0.01).exp()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = CemParams::default();
        let init: Vec<_> = (0..p.population)
            .map(|_| DVector::from_vec(vec![rng.random_range(0.0..std::f64::consts::PI)]))
            .collect();
        let out = cem(
            &p,
            init,
            &[(0, std::f64::consts::PI)],
            f,
            |x| x[0] = x[0].rem_euclid(std::f64::consts::PI),
            &mut rng,
        )
        .unwrap();
        assert!(out.best_score > 0.999);
    }

    #[test]
    fn params_validation() {
        let bad = CemParams {
            elite_fraction: 1.0,
            ..CemParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = CemParams {
            population: 4,
            elite_fraction: 0.2,
            components: 2,
            ..CemParams::default()
        };
        assert!(bad.validate().is_err());
        assert!(CemParams::default().validate().is_ok());
    }
}
