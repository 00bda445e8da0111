//! Bootstrap particle filter over (velocity, distance) with systematic
//! resampling. Handles any measurement-noise density, in particular the
//! exponentially modified Gaussian that the Kalman filter cannot.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{DynamicsParams, FilterError, Mat2};
use crate::ftm::MeasurementNoiseModel;

/// Weighted particle approximation of the state posterior.
#[derive(Debug, Clone)]
pub struct ParticlePopulation {
    /// `(velocity, distance)` per particle.
    states: Vec<[f64; 2]>,
    /// Normalized weights (sum to 1).
    weights: Vec<f64>,
    /// Cached effective sample size, `1 / sum(w^2)`.
    ess: f64,
}

impl ParticlePopulation {
    /// Draws `n >= 2` particles from a Gaussian prior.
    pub fn from_gaussian<R: Rng + ?Sized>(
        mean: [f64; 2],
        covariance: Mat2,
        n: usize,
        rng: &mut R,
    ) -> Self {
        assert!(n >= 2, "population needs at least two particles");
        let (l11, l21, l22) = covariance.cholesky();
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let states = (0..n)
            .map(|_| {
                let e1: f64 = unit.sample(rng);
                let e2: f64 = unit.sample(rng);
                [mean[0] + l11 * e1, mean[1] + l21 * e1 + l22 * e2]
            })
            .collect();
        ParticlePopulation {
            states,
            weights: vec![1.0 / n as f64; n],
            ess: n as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn effective_sample_size(&self) -> f64 {
        self.ess
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn states(&self) -> &[[f64; 2]] {
        &self.states
    }

    /// Posterior mean of the distance.
    pub fn distance_mean(&self) -> f64 {
        self.states
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| s[1] * w)
            .sum()
    }

    /// Posterior standard deviation of the distance.
    pub fn distance_sd(&self) -> f64 {
        let mean = self.distance_mean();
        let var: f64 = self
            .states
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * (s[1] - mean).powi(2))
            .sum();
        var.max(0.0).sqrt()
    }

    fn min_max_distance(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.states {
            lo = lo.min(s[1]);
            hi = hi.max(s[1]);
        }
        (lo, hi)
    }

    /// One filtering step: propagate every particle through the transition
    /// over `tau`, reweight by the measurement likelihood of `z`, renormalize,
    /// and systematically resample when the effective sample size drops below
    /// half the population.
    ///
    /// If every weight vanishes (measurement impossibly far from the
    /// population under the noise model) the propagated particles keep their
    /// previous weights and a [`FilterError::DegenerateWeights`] is returned
    /// so the caller can reset.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        tau: f64,
        dynamics: &DynamicsParams,
        z: f64,
        noise: &MeasurementNoiseModel,
        rng: &mut R,
    ) -> Result<(), FilterError> {
        let q = super::transition_covariance(tau, dynamics)?;
        let (l11, l21, l22) = q.cholesky();
        let unit = Normal::new(0.0, 1.0).expect("unit normal");

        for s in &mut self.states {
            let e1: f64 = unit.sample(rng);
            let e2: f64 = unit.sample(rng);
            let trend_noise = l11 * e1;
            let level_noise = l21 * e1 + l22 * e2;
            let [nu, rho] = *s;
            *s = [nu + trend_noise, rho + nu * tau + level_noise];
        }

        let mut scratch = Vec::with_capacity(self.weights.len());
        let mut total = 0.0;
        for (s, w) in self.states.iter().zip(&self.weights) {
            let lw = w * noise.pdf(z - s[1]);
            total += lw;
            scratch.push(lw);
        }
        if total <= 0.0 || !total.is_finite() {
            let (lo, hi) = self.min_max_distance();
            return Err(FilterError::DegenerateWeights {
                measurement_m: z,
                population_min_m: lo,
                population_max_m: hi,
            });
        }

        for (w, lw) in self.weights.iter_mut().zip(&scratch) {
            *w = lw / total;
        }
        self.ess = 1.0 / self.weights.iter().map(|w| w * w).sum::<f64>();

        if self.ess < self.states.len() as f64 / 2.0 {
            self.systematic_resample(rng);
        }
        Ok(())
    }

    /// Systematic resampling: one uniform offset positions an equidistant
    /// grid over the cumulative weights; O(n).
    fn systematic_resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.states.len();
        let offset: f64 = rng.random::<f64>() / n as f64;
        let mut resampled = Vec::with_capacity(n);
        let mut cumulative = self.weights[0];
        let mut source = 0usize;
        for i in 0..n {
            let target = offset + i as f64 / n as f64;
            while cumulative < target && source + 1 < n {
                source += 1;
                cumulative += self.weights[source];
            }
            resampled.push(self.states[source]);
        }
        self.states = resampled;
        let uniform = 1.0 / n as f64;
        self.weights.fill(uniform);
        self.ess = n as f64;
    }

    /// Samples the predictive distance distribution `tau` seconds ahead:
    /// draw a particle per its weight, then push it through the transition
    /// with fresh process noise. Leaves the population untouched.
    pub fn predict_distance<R: Rng + ?Sized>(
        &self,
        tau: f64,
        n_samples: usize,
        dynamics: &DynamicsParams,
        rng: &mut R,
    ) -> Vec<f64> {
        let q = super::transition_covariance(tau, dynamics).expect("tau checked by caller");
        // Only the distance marginal of the transition noise matters here.
        let (_, l21, l22) = q.cholesky();
        let unit = Normal::new(0.0, 1.0).expect("unit normal");

        // Cumulative weights for inverse-CDF particle draws.
        let mut cumulative = Vec::with_capacity(self.weights.len());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cumulative.push(acc);
        }

        (0..n_samples)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * acc;
                let idx = cumulative
                    .partition_point(|&c| c < u)
                    .min(self.states.len() - 1);
                let [nu, rho] = self.states[idx];
                let e1: f64 = unit.sample(rng);
                let e2: f64 = unit.sample(rng);
                rho + nu * tau + l21 * e1 + l22 * e2
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::kalman::{kf_predict, kf_update, GaussianState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn gaussian_noise(sigma: f64) -> MeasurementNoiseModel {
        MeasurementNoiseModel::Gaussian { sigma_m: sigma }
    }

    #[test]
    fn weights_stay_normalized() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut pop =
            ParticlePopulation::from_gaussian([0.0, 20.0], Mat2::diagonal(1.0, 1.0), 512, &mut rng);
        let dynamics = DynamicsParams::default();
        for step in 0..30 {
            pop.step(
                0.5,
                &dynamics,
                20.0 + (step % 3) as f64 * 0.1,
                &gaussian_noise(1.0),
                &mut rng,
            )
            .unwrap();
            let total: f64 = pop.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "weights sum to {total}");
            let ess = pop.effective_sample_size();
            assert!(ess >= 1.0 && ess <= pop.len() as f64 + 1e-9);
        }
    }

    #[test]
    fn matches_kalman_on_linear_gaussian_trace() {
        // The Kalman filter is exact here, so the particle posterior must
        // agree within Monte-Carlo error.
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let dynamics = DynamicsParams {
            sigma_velocity: 0.5,
            sigma_distance: 0.1,
        };
        let sigma = 1.0;
        let measurements: Vec<f64> = {
            let mut d = 15.0;
            (0..20)
                .map(|_| {
                    d += 0.3;
                    d + rand_distr::Normal::new(0.0, sigma)
                        .unwrap()
                        .sample(&mut rng)
                })
                .collect()
        };

        let mut kf = GaussianState {
            mean: [0.0, measurements[0]],
            covariance: Mat2::diagonal(1.0, sigma * sigma),
        };
        let mut pf = ParticlePopulation::from_gaussian(
            [0.0, measurements[0]],
            Mat2::diagonal(1.0, sigma * sigma),
            4096,
            &mut rng,
        );

        for &z in &measurements[1..] {
            kf = kf_update(&kf_predict(&kf, 0.5, &dynamics), z, sigma);
            pf.step(0.5, &dynamics, z, &gaussian_noise(sigma), &mut rng)
                .unwrap();
        }

        let se = pf.distance_sd() / pf.effective_sample_size().sqrt();
        let diff = (pf.distance_mean() - kf.mean[1]).abs();
        assert!(
            diff <= 3.0 * se + 0.02,
            "pf mean {} vs kf mean {} (3se = {})",
            pf.distance_mean(),
            kf.mean[1],
            3.0 * se
        );
    }

    #[test]
    fn collapses_on_repeated_exact_measurement() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let zero_dynamics = DynamicsParams {
            sigma_velocity: 0.0,
            sigma_distance: 0.0,
        };
        let mut pop = ParticlePopulation::from_gaussian(
            [0.0, 10.0],
            Mat2::diagonal(0.0, 4.0),
            1024,
            &mut rng,
        );
        let mut prev_sd = f64::INFINITY;
        for _ in 0..10 {
            pop.step(0.0, &zero_dynamics, 10.0, &gaussian_noise(0.5), &mut rng)
                .unwrap();
            let sd = pop.distance_sd();
            assert!(
                sd < prev_sd + 1e-12,
                "spread must shrink: {sd} vs {prev_sd}"
            );
            prev_sd = sd;
        }
        assert!((pop.distance_mean() - 10.0).abs() < 0.2);
        assert!(prev_sd < 0.5);
    }

    #[test]
    fn degenerate_weights_reported_with_diagnostics() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let mut pop =
            ParticlePopulation::from_gaussian([0.0, 10.0], Mat2::diagonal(0.0, 0.01), 64, &mut rng);
        // A measurement hundreds of sigmas away under a tight noise model.
        let err = pop
            .step(
                0.0,
                &DynamicsParams {
                    sigma_velocity: 0.0,
                    sigma_distance: 0.0,
                },
                10_000.0,
                &gaussian_noise(0.1),
                &mut rng,
            )
            .unwrap_err();
        match err {
            FilterError::DegenerateWeights {
                measurement_m,
                population_min_m,
                population_max_m,
            } => {
                assert_eq!(measurement_m, 10_000.0);
                assert!(population_min_m < population_max_m);
                assert!(population_max_m < 100.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
        // Population still usable: weights remain normalized.
        let total: f64 = pop.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn emg_posterior_corrects_positive_bias() {
        // EMG errors have mean 1/rate, so the filter should settle below the
        // raw measurement average; a brute-force grid filter over distance is
        // the reference posterior.
        let rate = 1.0;
        let noise = MeasurementNoiseModel::ExpGaussian {
            mu_m: 0.0,
            sigma_m: 0.5,
            rate_per_m: rate,
        };
        let dynamics = DynamicsParams {
            sigma_velocity: 0.0,
            sigma_distance: 0.1,
        };
        let truth = 20.0;
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let measurements: Vec<f64> = (0..40)
            .map(|_| crate::ftm::sample_measurement(truth, &noise, &mut rng))
            .collect();
        let raw_mean = measurements.iter().sum::<f64>() / measurements.len() as f64;

        // Particle filter with zero velocity uncertainty (1-D dynamics).
        let mut pop = ParticlePopulation::from_gaussian(
            [0.0, measurements[0] - noise.mean_error()],
            Mat2::diagonal(0.0, noise_variance(&noise)),
            8192,
            &mut rng,
        );
        // Grid filter over the same prior.
        let lo = 10.0;
        let hi = 30.0;
        let n = 2001;
        let h = (hi - lo) / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
        let prior_mean = measurements[0] - noise.mean_error();
        let prior_sd = noise_variance(&noise).sqrt();
        let mut density: Vec<f64> = grid
            .iter()
            .map(|&x| (-0.5 * ((x - prior_mean) / prior_sd).powi(2)).exp())
            .collect();
        normalize(&mut density);

        for &z in &measurements[1..] {
            pop.step(0.5, &dynamics, z, &noise, &mut rng).unwrap();

            // Grid predict: convolve with N(0, tau * sigma_distance^2).
            let step_sd = (0.5 * dynamics.sigma_distance.powi(2)).sqrt();
            density = convolve_gaussian(&density, h, step_sd);
            for (p, &x) in density.iter_mut().zip(&grid) {
                *p *= noise.pdf(z - x);
            }
            normalize(&mut density);
        }

        let grid_mean: f64 = grid.iter().zip(&density).map(|(x, p)| x * p).sum();
        let pf_mean = pop.distance_mean();

        assert!(
            pf_mean < raw_mean - 0.5,
            "filter must undo most of the +{} bias: pf {pf_mean}, raw {raw_mean}",
            1.0 / rate
        );
        assert!(
            (pf_mean - grid_mean).abs() < 0.15,
            "pf {pf_mean} vs grid {grid_mean}"
        );
    }

    fn noise_variance(noise: &MeasurementNoiseModel) -> f64 {
        match *noise {
            MeasurementNoiseModel::Gaussian { sigma_m } => sigma_m * sigma_m,
            MeasurementNoiseModel::ExpGaussian {
                sigma_m,
                rate_per_m,
                ..
            } => sigma_m * sigma_m + 1.0 / (rate_per_m * rate_per_m),
        }
    }

    fn normalize(density: &mut [f64]) {
        let total: f64 = density.iter().sum();
        for p in density.iter_mut() {
            *p /= total;
        }
    }

    fn convolve_gaussian(density: &[f64], h: f64, sd: f64) -> Vec<f64> {
        if sd == 0.0 {
            return density.to_vec();
        }
        let halfwidth = ((4.0 * sd / h).ceil() as isize).max(1);
        let kernel: Vec<f64> = (-halfwidth..=halfwidth)
            .map(|k| (-0.5 * (k as f64 * h / sd).powi(2)).exp())
            .collect();
        let ksum: f64 = kernel.iter().sum();
        let n = density.len() as isize;
        let mut out = vec![0.0; density.len()];
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kv) in kernel.iter().enumerate() {
                let src = i + j as isize - halfwidth;
                if src >= 0 && src < n {
                    acc += density[src as usize] * kv;
                }
            }
            out[i as usize] = acc / ksum;
        }
        out
    }

    #[test]
    fn deterministic_under_same_seed() {
        let run = |seed: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut pop = ParticlePopulation::from_gaussian(
                [0.0, 12.0],
                Mat2::diagonal(1.0, 1.0),
                256,
                &mut rng,
            );
            for i in 0..10 {
                pop.step(
                    0.5,
                    &DynamicsParams::default(),
                    12.0 + i as f64 * 0.2,
                    &gaussian_noise(1.0),
                    &mut rng,
                )
                .unwrap();
            }
            pop.distance_mean()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }
}
