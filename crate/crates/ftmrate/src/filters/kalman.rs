//! Kalman filter over (velocity, distance) — the exact posterior when the
//! measurement noise is Gaussian.

use super::{DynamicsParams, Mat2};

/// Gaussian belief over the state `(velocity, distance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    /// `[velocity m/s, distance m]`.
    pub mean: [f64; 2],
    pub covariance: Mat2,
}

/// Time update over `tau >= 0` seconds.
///
/// Transition matrix `F = [[1, 0], [tau, 1]]`: velocity persists, distance
/// advances by `velocity * tau`. The covariance gains the exact process noise
/// from [`super::transition_covariance`], so predictions compose:
/// predicting `tau1` then `tau2` equals predicting `tau1 + tau2`.
pub fn kf_predict(state: &GaussianState, tau: f64, dynamics: &DynamicsParams) -> GaussianState {
    let q = super::transition_covariance(tau, dynamics).expect("tau checked by caller");
    let [nu, rho] = state.mean;
    let Mat2 { a, b, d } = state.covariance;
    // F P F^T for F = [[1,0],[tau,1]].
    let propagated = Mat2 {
        a,
        b: tau * a + b,
        d: tau * tau * a + 2.0 * tau * b + d,
    };
    GaussianState {
        mean: [nu, rho + nu * tau],
        covariance: propagated + q,
    }
}

/// Measurement update with observation model `z = distance + noise`,
/// `noise ~ N(0, measurement_sigma^2)`. Uses the Joseph-form covariance
/// update.
pub fn kf_update(state: &GaussianState, z: f64, measurement_sigma: f64) -> GaussianState {
    let Mat2 { a, b, d } = state.covariance;
    let r = measurement_sigma * measurement_sigma;
    let s = d + r;
    // Gain K = P H^T / S with H = [0, 1].
    let k_nu = b / s;
    let k_rho = d / s;
    let innovation = z - state.mean[1];

    let mean = [
        state.mean[0] + k_nu * innovation,
        state.mean[1] + k_rho * innovation,
    ];

    // (I - K H) = [[1, -k_nu], [0, 1 - k_rho]]
    let one_minus = 1.0 - k_rho;
    let joseph = Mat2 {
        a: a - 2.0 * k_nu * b + k_nu * k_nu * d,
        b: one_minus * (b - k_nu * d),
        d: one_minus * one_minus * d,
    };
    let gain_noise = Mat2 {
        a: k_nu * k_nu * r,
        b: k_nu * k_rho * r,
        d: k_rho * k_rho * r,
    };
    GaussianState {
        mean,
        covariance: joseph + gain_noise,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn dynamics() -> DynamicsParams {
        DynamicsParams {
            sigma_velocity: 0.5,
            sigma_distance: 0.1,
        }
    }

    #[test]
    fn predict_with_zero_tau_is_identity() {
        let state = GaussianState {
            mean: [1.0, 10.0],
            covariance: Mat2 {
                a: 0.5,
                b: 0.1,
                d: 2.0,
            },
        };
        assert_eq!(kf_predict(&state, 0.0, &dynamics()), state);
    }

    #[test]
    fn predict_advances_distance_by_velocity() {
        let state = GaussianState {
            mean: [2.0, 10.0],
            covariance: Mat2::diagonal(1.0, 1.0),
        };
        let next = kf_predict(&state, 1.5, &dynamics());
        assert_eq!(next.mean, [2.0, 13.0]);
        assert!(next.covariance.trace() > state.covariance.trace());
        assert!(next.covariance.determinant() >= state.covariance.determinant());
    }

    #[test]
    fn predict_preserves_psd_over_many_random_steps() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let mut state = GaussianState {
            mean: [0.0, 20.0],
            covariance: Mat2::diagonal(1.0, 1.0),
        };
        for _ in 0..10_000 {
            let tau = rng.random::<f64>() * 2.0;
            let d = DynamicsParams {
                sigma_velocity: rng.random::<f64>() * 2.0,
                sigma_distance: rng.random::<f64>(),
            };
            state = kf_predict(&state, tau, &d);
            // Renormalize occasionally so the covariance stays finite.
            if state.covariance.trace() > 1e9 {
                state.covariance = Mat2::diagonal(1.0, 1.0);
            }
            let (lo, _) = state.covariance.eigenvalues();
            assert!(
                lo >= -1e-9 * state.covariance.trace().max(1.0),
                "covariance lost PSD: {:?}",
                state.covariance
            );
        }
    }

    #[test]
    fn chapman_kolmogorov_composition() {
        let state = GaussianState {
            mean: [1.2, 8.0],
            covariance: Mat2 {
                a: 0.4,
                b: 0.05,
                d: 1.5,
            },
        };
        let d = dynamics();
        let taus = [(0.2, 0.3), (1.0, 2.5), (0.0, 4.0), (0.7, 0.7)];
        for (t1, t2) in taus {
            let two_step = kf_predict(&kf_predict(&state, t1, &d), t2, &d);
            let one_step = kf_predict(&state, t1 + t2, &d);
            for i in 0..2 {
                assert!((two_step.mean[i] - one_step.mean[i]).abs() < 1e-9);
            }
            assert!((two_step.covariance.a - one_step.covariance.a).abs() < 1e-9);
            assert!((two_step.covariance.b - one_step.covariance.b).abs() < 1e-9);
            assert!((two_step.covariance.d - one_step.covariance.d).abs() < 1e-9);
        }
    }

    #[test]
    fn update_with_uninformative_prior_adopts_measurement() {
        let state = GaussianState {
            mean: [0.0, 0.0],
            covariance: Mat2::diagonal(1.0, 1e12),
        };
        let posterior = kf_update(&state, 42.0, 1.0);
        assert!((posterior.mean[1] - 42.0).abs() < 1e-3);
        assert!((posterior.covariance.d - 1.0).abs() < 1e-3);
    }

    #[test]
    fn update_with_uninformative_measurement_is_noop() {
        let state = GaussianState {
            mean: [1.0, 10.0],
            covariance: Mat2 {
                a: 0.5,
                b: 0.2,
                d: 2.0,
            },
        };
        let posterior = kf_update(&state, 500.0, 1e12);
        assert!((posterior.mean[0] - state.mean[0]).abs() < 1e-6);
        assert!((posterior.mean[1] - state.mean[1]).abs() < 1e-6);
        assert!((posterior.covariance.d - state.covariance.d).abs() < 1e-6);
    }

    #[test]
    fn update_matches_textbook_scalar_case() {
        // Decoupled velocity: prior rho ~ N(10, 1), z = 12, sigma = 1.
        let state = GaussianState {
            mean: [0.0, 10.0],
            covariance: Mat2::diagonal(1.0, 1.0),
        };
        let posterior = kf_update(&state, 12.0, 1.0);
        assert!((posterior.mean[1] - 11.0).abs() < 1e-12);
        assert!((posterior.covariance.d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn update_never_exceeds_prior_or_measurement_precision() {
        let state = GaussianState {
            mean: [0.3, 15.0],
            covariance: Mat2 {
                a: 1.0,
                b: 0.4,
                d: 3.0,
            },
        };
        let sigma = 1.5;
        let posterior = kf_update(&state, 14.0, sigma);
        assert!(posterior.covariance.d <= state.covariance.d);
        assert!(posterior.covariance.d <= sigma * sigma);
    }
}
