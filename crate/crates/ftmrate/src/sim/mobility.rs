//! Station mobility: fixed placement, constant radial velocity, and random
//! waypoint movement inside a square area with the AP at the center.
//!
//! Positions are evaluated lazily from closed-form trajectories, so event
//! times see exact positions without a fixed tick. Queries must be
//! non-decreasing in time; the waypoint model advances leg by leg.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Declarative mobility description (per scenario).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MobilityModel {
    /// Parked at a fixed distance from the AP.
    Static { distance_m: f64 },
    /// Moves radially away from the AP at constant speed, starting at 0 m.
    ConstantVelocity { velocity_mps: f64 },
    /// Random waypoint walk in an `area_m` x `area_m` square; speeds drawn
    /// uniformly from `[0, max_speed_mps]`, pauses from `[0, max_pause_s]`.
    RandomWaypoint {
        area_m: f64,
        max_speed_mps: f64,
        max_pause_s: f64,
    },
}

#[derive(Debug, Clone)]
enum MobilityState {
    Static {
        distance_m: f64,
    },
    ConstantVelocity {
        velocity_mps: f64,
    },
    RandomWaypoint {
        area_m: f64,
        max_speed_mps: f64,
        max_pause_s: f64,
        position: (f64, f64),
        waypoint: (f64, f64),
        speed_mps: f64,
        /// Walking resumes at this time (start of the current leg).
        leg_start_s: f64,
        rng: ChaCha12Rng,
    },
}

/// One station's kinematic state.
#[derive(Debug, Clone)]
pub struct Mobility {
    state: MobilityState,
    last_query_s: f64,
}

impl Mobility {
    pub fn new(model: MobilityModel, mut rng: ChaCha12Rng) -> Self {
        let state = match model {
            MobilityModel::Static { distance_m } => MobilityState::Static { distance_m },
            MobilityModel::ConstantVelocity { velocity_mps } => {
                MobilityState::ConstantVelocity { velocity_mps }
            }
            MobilityModel::RandomWaypoint {
                area_m,
                max_speed_mps,
                max_pause_s,
            } => {
                let position = (rng.random::<f64>() * area_m, rng.random::<f64>() * area_m);
                let waypoint = (rng.random::<f64>() * area_m, rng.random::<f64>() * area_m);
                let speed_mps = rng.random::<f64>() * max_speed_mps;
                // Stations may start paused.
                let leg_start_s = rng.random::<f64>() * max_pause_s;
                MobilityState::RandomWaypoint {
                    area_m,
                    max_speed_mps,
                    max_pause_s,
                    position,
                    waypoint,
                    speed_mps,
                    leg_start_s,
                    rng,
                }
            }
        };
        Mobility {
            state,
            last_query_s: 0.0,
        }
    }

    /// Distance from the AP at time `t_s`. Queries must not go backwards.
    pub fn distance_at(&mut self, t_s: f64) -> f64 {
        debug_assert!(
            t_s >= self.last_query_s - 1e-9,
            "mobility queried backwards: {} after {}",
            t_s,
            self.last_query_s
        );
        self.last_query_s = t_s;
        match &mut self.state {
            MobilityState::Static { distance_m } => *distance_m,
            MobilityState::ConstantVelocity { velocity_mps } => *velocity_mps * t_s,
            MobilityState::RandomWaypoint {
                area_m,
                max_speed_mps,
                max_pause_s,
                position,
                waypoint,
                speed_mps,
                leg_start_s,
                rng,
            } => {
                // Advance through completed legs up to t_s.
                loop {
                    if t_s <= *leg_start_s {
                        break; // still pausing
                    }
                    let dx = waypoint.0 - position.0;
                    let dy = waypoint.1 - position.1;
                    let leg_length = (dx * dx + dy * dy).sqrt();
                    if *speed_mps <= 0.0 {
                        break; // degenerate draw: parked until scenario end
                    }
                    let arrival_s = *leg_start_s + leg_length / *speed_mps;
                    if t_s < arrival_s {
                        // Mid-leg: interpolate.
                        let walked = (t_s - *leg_start_s) * *speed_mps;
                        let frac = if leg_length > 0.0 {
                            walked / leg_length
                        } else {
                            1.0
                        };
                        let x = position.0 + frac * dx;
                        let y = position.1 + frac * dy;
                        let cx = *area_m / 2.0;
                        let cy = *area_m / 2.0;
                        return ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                    }
                    // Arrived: pause, then draw the next leg.
                    *position = *waypoint;
                    let pause = rng.random::<f64>() * *max_pause_s;
                    *leg_start_s = arrival_s + pause;
                    *waypoint = (rng.random::<f64>() * *area_m, rng.random::<f64>() * *area_m);
                    *speed_mps = rng.random::<f64>() * *max_speed_mps;
                }
                let cx = *area_m / 2.0;
                let cy = *area_m / 2.0;
                ((position.0 - cx).powi(2) + (position.1 - cy).powi(2)).sqrt()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn static_station_never_moves() {
        let mut m = Mobility::new(
            MobilityModel::Static { distance_m: 20.0 },
            ChaCha12Rng::seed_from_u64(0),
        );
        for i in 0..100 {
            assert_eq!(m.distance_at(i as f64 * 0.37), 20.0);
        }
    }

    #[test]
    fn constant_velocity_matches_closed_form() {
        let mut m = Mobility::new(
            MobilityModel::ConstantVelocity { velocity_mps: 2.0 },
            ChaCha12Rng::seed_from_u64(0),
        );
        assert_eq!(m.distance_at(0.0), 0.0);
        assert_eq!(m.distance_at(12.5), 25.0);
        assert_eq!(m.distance_at(25.0), 50.0);
    }

    #[test]
    fn waypoint_walk_stays_inside_the_area() {
        let mut m = Mobility::new(
            MobilityModel::RandomWaypoint {
                area_m: 40.0,
                max_speed_mps: 1.4,
                max_pause_s: 20.0,
            },
            ChaCha12Rng::seed_from_u64(7),
        );
        // Center is (20, 20); the farthest corner is 20 * sqrt(2) away.
        let limit = 20.0 * std::f64::consts::SQRT_2 + 1e-9;
        for i in 0..1_000_000 {
            let d = m.distance_at(i as f64 * 0.01);
            assert!(d <= limit, "distance {d} escaped the area");
        }
    }

    #[test]
    fn waypoint_walk_is_deterministic_per_seed() {
        let run = |seed| {
            let mut m = Mobility::new(
                MobilityModel::RandomWaypoint {
                    area_m: 40.0,
                    max_speed_mps: 1.4,
                    max_pause_s: 5.0,
                },
                ChaCha12Rng::seed_from_u64(seed),
            );
            (0..500)
                .map(|i| m.distance_at(i as f64 * 0.2))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn waypoint_walk_actually_moves() {
        let mut m = Mobility::new(
            MobilityModel::RandomWaypoint {
                area_m: 40.0,
                max_speed_mps: 1.4,
                max_pause_s: 1.0,
            },
            ChaCha12Rng::seed_from_u64(1),
        );
        let samples: Vec<f64> = (0..200).map(|i| m.distance_at(i as f64)).collect();
        let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(max - min > 1.0, "station never moved: [{min}, {max}]");
    }
}
