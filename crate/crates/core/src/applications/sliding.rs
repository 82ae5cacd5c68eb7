//! Free sliding on a uniform surface.
//!
//! In normalized coordinates the body-frame dynamics are
//! `M dV/dt = -c H_inv(V / |V|)` with `M = diag(m, m, I / rho^2)` and `c` the
//! physical load magnitude. [`SlideOptions::frame_rotation`] adds the
//! rotating-frame term `-omega x v` to the translational part. That term does
//! no work, so energy bookkeeping is the same either way, but it breaks the
//! `V -> -V` symmetry of the plain equation.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::inversion::{invert, InversionOptions};
use crate::poly_model::PolyModel;
use crate::wrench_space::{BodyParams, GeneralizedVelocity, PoseSE2};

/// `diag(m, m, I / rho^2)`, mapping normalized twist rates to normalized loads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedMass {
    diagonal: Vector3<f64>,
    rho: f64,
}

impl GeneralizedMass {
    pub fn new(mass: f64, inertia_z: f64, rho: f64) -> Result<Self> {
        if !(mass > 0.0 && inertia_z > 0.0 && rho > 0.0)
            || ![mass, inertia_z, rho].iter().all(|v| v.is_finite())
        {
            return Err(invalid(format!(
                "mass {mass}, inertia {inertia_z} and rho {rho} must be positive"
            )));
        }
        Ok(Self {
            diagonal: Vector3::new(mass, mass, inertia_z / (rho * rho)),
            rho,
        })
    }

    pub fn diagonal(&self) -> Vector3<f64> {
        self.diagonal
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn kinetic_energy(&self, twist: &Vector3<f64>) -> f64 {
        0.5 * twist.component_mul(&self.diagonal).dot(twist)
    }
}

/// Everything the integrator needs besides the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlidingBody {
    pub mass: GeneralizedMass,
    /// Physical size of the model's 1-level set load.
    pub load_magnitude: f64,
}

impl SlidingBody {
    /// Model fitted to oracle data, whose loads are per unit normal force and friction coefficient.
    pub fn oracle_trained(model: &PolyModel, body: &BodyParams) -> Result<Self> {
        Ok(Self {
            mass: GeneralizedMass::new(body.mass, body.inertia_z, model.rho())?,
            load_magnitude: model.load_scale() * body.mu_support * body.mass * body.gravity,
        })
    }

    /// Model fitted to measured loads already in physical units.
    pub fn sensor_trained(model: &PolyModel, body: &BodyParams) -> Result<Self> {
        Ok(Self {
            mass: GeneralizedMass::new(body.mass, body.inertia_z, model.rho())?,
            load_magnitude: model.load_scale(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlideState {
    /// World frame.
    pub pose: PoseSE2,
    /// Body frame, normalized (`V3 = omega rho`).
    pub twist: GeneralizedVelocity,
    pub time: f64,
}

impl SlideState {
    pub fn new(pose: PoseSE2, twist: GeneralizedVelocity) -> Self {
        Self {
            pose,
            twist,
            time: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideOptions {
    pub step: f64,
    /// Rest threshold on `|V|`; defaults to `1e-4 |V0|`.
    pub v_stop: Option<f64>,
    pub max_steps: usize,
    /// Include the rotating-frame term `-omega x v` (off by default).
    pub frame_rotation: bool,
    pub inversion: InversionOptions,
}

impl Default for SlideOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            v_stop: None,
            max_steps: 1_000_000,
            frame_rotation: false,
            inversion: InversionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SlideOutcome {
    Rest,
    StepLimit,
    /// Inversion failed; the trajectory holds everything up to `time`.
    Aborted {
        time: f64,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<SlideState>,
    /// Physical generalized friction load `c H_inv(V)` at each sample; zero at rest.
    pub loads: Vec<Vector3<f64>>,
    pub v_stop: f64,
    pub outcome: SlideOutcome,
}

impl Trajectory {
    pub fn reached_rest(&self) -> bool {
        self.outcome == SlideOutcome::Rest
    }

    pub fn final_state(&self) -> &SlideState {
        self.samples
            .last()
            .expect("trajectory has an initial sample")
    }
}

type State = [f64; 6];

struct Dynamics<'a> {
    model: &'a PolyModel,
    body: &'a SlidingBody,
    opts: &'a SlideOptions,
}

impl Dynamics<'_> {
    fn friction(&self, v: &Vector3<f64>) -> Result<Vector3<f64>> {
        let n = v.norm();
        if n == 0.0 {
            return Ok(Vector3::zeros());
        }
        Ok(invert(self.model, &(v / n), &self.opts.inversion)? * self.body.load_magnitude)
    }

    fn derivative(&self, y: &State) -> Result<State> {
        let v = Vector3::new(y[3], y[4], y[5]);
        let rho = self.body.mass.rho();
        let omega = v.z / rho;
        let dv = -self.friction(&v)?.component_div(&self.body.mass.diagonal());
        let (dvx, dvy) = if self.opts.frame_rotation {
            (dv.x + omega * v.y, dv.y - omega * v.x)
        } else {
            (dv.x, dv.y)
        };
        let (s, c) = y[2].sin_cos();
        Ok([c * v.x - s * v.y, s * v.x + c * v.y, omega, dvx, dvy, dv.z])
    }

    /// One RK4 step; `None` if an intermediate stage twist has reversed or
    /// dropped to `v_stop`, where the friction direction is no longer smooth.
    fn rk4(&self, y: &State, h: f64, v_stop: f64) -> Result<Option<State>> {
        let axpy =
            |a: &State, k: &State, t: f64| -> State { std::array::from_fn(|i| a[i] + t * k[i]) };
        let reference = twist_of(y);
        let moving = |s: &State| signed_speed(s, &reference) > v_stop;
        let k1 = self.derivative(y)?;
        let y2 = axpy(y, &k1, h / 2.0);
        if !moving(&y2) {
            return Ok(None);
        }
        let k2 = self.derivative(&y2)?;
        let y3 = axpy(y, &k2, h / 2.0);
        if !moving(&y3) {
            return Ok(None);
        }
        let k3 = self.derivative(&y3)?;
        let y4 = axpy(y, &k3, h);
        if !moving(&y4) {
            return Ok(None);
        }
        let k4 = self.derivative(&y4)?;
        let next: State =
            std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        Ok(moving(&next).then_some(next))
    }
}

fn twist_of(y: &State) -> Vector3<f64> {
    Vector3::new(y[3], y[4], y[5])
}

fn state_of(y: &State, time: f64) -> SlideState {
    SlideState {
        pose: PoseSE2::new(y[0], y[1], y[2]),
        twist: GeneralizedVelocity(twist_of(y)),
        time,
    }
}

/// Speed along the initial direction of the step; negative once the twist has reversed.
fn signed_speed(y: &State, reference: &Vector3<f64>) -> f64 {
    let v = twist_of(y);
    if v.dot(reference) > 0.0 {
        v.norm()
    } else {
        -v.norm()
    }
}

/// Integrates with fixed-step RK4 until `|V|` drops to the rest threshold.
/// The step that would cross the threshold is shortened to land on it.
pub fn simulate_sliding(
    model: &PolyModel,
    body: &SlidingBody,
    state0: &SlideState,
    opts: &SlideOptions,
) -> Result<Trajectory> {
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(invalid(format!("step must be positive, got {}", opts.step)));
    }
    if !(body.load_magnitude > 0.0 && body.load_magnitude.is_finite()) {
        return Err(invalid("load magnitude must be positive"));
    }
    let p = state0.pose;
    if ![p.x, p.y, p.theta, state0.time]
        .iter()
        .all(|v| v.is_finite())
        || !state0.twist.is_finite()
    {
        return Err(invalid("initial state must be finite"));
    }
    let v0 = state0.twist.norm();
    let v_stop = opts.v_stop.unwrap_or(1e-4 * v0);
    if !(v_stop >= 0.0 && v_stop.is_finite()) {
        return Err(invalid(format!(
            "rest threshold must be non-negative, got {v_stop}"
        )));
    }

    let dynamics = Dynamics { model, body, opts };
    let mut y: State = [
        p.x,
        p.y,
        p.theta,
        state0.twist.vx(),
        state0.twist.vy(),
        state0.twist.vz(),
    ];
    let mut t = state0.time;
    let mut samples = Vec::new();
    let mut loads = Vec::new();

    let rest =
        |y: &mut State, t: f64, samples: &mut Vec<SlideState>, loads: &mut Vec<Vector3<f64>>| {
            y[3] = 0.0;
            y[4] = 0.0;
            y[5] = 0.0;
            samples.push(state_of(y, t));
            loads.push(Vector3::zeros());
        };
    let abort = |t: f64, e: Error| SlideOutcome::Aborted {
        time: t,
        message: e.to_string(),
    };

    if v0 <= v_stop {
        rest(&mut y, t, &mut samples, &mut loads);
        return Ok(Trajectory {
            samples,
            loads,
            v_stop,
            outcome: SlideOutcome::Rest,
        });
    }

    for _ in 0..opts.max_steps {
        let v = twist_of(&y);
        let load = match dynamics.friction(&v) {
            Ok(f) => f,
            Err(e) => {
                return Ok(Trajectory {
                    samples,
                    loads,
                    v_stop,
                    outcome: abort(t, e),
                })
            }
        };
        samples.push(state_of(&y, t));
        loads.push(load);

        let next = match dynamics.rk4(&y, opts.step, v_stop) {
            Ok(n) => n,
            Err(e) => {
                return Ok(Trajectory {
                    samples,
                    loads,
                    v_stop,
                    outcome: abort(t, e),
                })
            }
        };
        if let Some(next) = next {
            y = next;
            t += opts.step;
            continue;
        }
        // Shorten the step so the speed lands on the threshold: bisect on the
        // largest fraction of the step that still ends moving.
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut landed = y;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            match dynamics.rk4(&y, mid * opts.step, v_stop) {
                Ok(Some(trial)) => {
                    lo = mid;
                    landed = trial;
                }
                Ok(None) => hi = mid,
                Err(e) => {
                    return Ok(Trajectory {
                        samples,
                        loads,
                        v_stop,
                        outcome: abort(t, e),
                    })
                }
            }
            if hi - lo <= 1e-12 {
                break;
            }
        }
        y = landed;
        t += lo * opts.step;
        rest(&mut y, t, &mut samples, &mut loads);
        return Ok(Trajectory {
            samples,
            loads,
            v_stop,
            outcome: SlideOutcome::Rest,
        });
    }
    samples.push(state_of(&y, t));
    loads.push(
        dynamics
            .friction(&twist_of(&y))
            .unwrap_or_else(|_| Vector3::zeros()),
    );
    Ok(Trajectory {
        samples,
        loads,
        v_stop,
        outcome: SlideOutcome::StepLimit,
    })
}

/// Unit twist at the last sample still moving faster than the rest threshold.
pub fn final_twist_direction(trajectory: &Trajectory) -> Result<Vector3<f64>> {
    if !trajectory.reached_rest() {
        return Err(Error::NotAtRest);
    }
    trajectory
        .samples
        .iter()
        .rev()
        .find(|s| s.twist.norm() > trajectory.v_stop)
        .map(|s| s.twist.0.normalize())
        .ok_or(Error::NotAtRest)
}

/// World-frame velocity of the body origin.
pub fn world_velocity(state: &SlideState) -> Vector2<f64> {
    state
        .pose
        .rotate(Vector2::new(state.twist.vx(), state.twist.vy()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn iso_body(mu: f64, g: f64) -> (PolyModel, SlidingBody) {
        let model = PolyModel::quadratic(&Matrix3::identity())
            .with_rho(0.05)
            .unwrap();
        let body = BodyParams::with_rho(1.5, 1.5 * 0.05 * 0.05, 0.05, mu, g).unwrap();
        let sb = SlidingBody::oracle_trained(&model, &body).unwrap();
        (model, sb)
    }

    #[test]
    fn coulomb_translation_closed_form() {
        let (mu, g, v0) = (0.4, 9.81, 0.8);
        let (model, body) = iso_body(mu, g);
        let s0 = SlideState::new(PoseSE2::default(), GeneralizedVelocity::new(v0, 0.0, 0.0));
        let traj = simulate_sliding(&model, &body, &s0, &SlideOptions::default()).unwrap();
        assert!(traj.reached_rest());
        let end = traj.final_state();
        let t_stop = v0 / (mu * g);
        let d_stop = v0 * v0 / (2.0 * mu * g);
        assert!(
            (end.time / t_stop - 1.0).abs() <= 5e-3,
            "{} vs {t_stop}",
            end.time
        );
        assert!(
            (end.pose.x / d_stop - 1.0).abs() <= 5e-3,
            "{} vs {d_stop}",
            end.pose.x
        );
        let dir = final_twist_direction(&traj).unwrap();
        assert!((dir - Vector3::new(1.0, 0.0, 0.0)).norm() <= 1e-12);
    }

    #[test]
    fn zero_initial_twist_is_at_rest() {
        let (model, body) = iso_body(0.5, 9.81);
        let s0 = SlideState::new(
            PoseSE2::new(1.0, 2.0, 0.3),
            GeneralizedVelocity::new(0.0, 0.0, 0.0),
        );
        let traj = simulate_sliding(&model, &body, &s0, &SlideOptions::default()).unwrap();
        assert_eq!(traj.samples.len(), 1);
        assert!(traj.reached_rest());
    }

    #[test]
    fn energy_decreases_and_matches_dissipated_work() {
        let model =
            PolyModel::quadratic(&Matrix3::new(1.0, 0.2, 0.1, 0.2, 1.4, -0.1, 0.1, -0.1, 0.7))
                .with_rho(0.05)
                .unwrap();
        let body = BodyParams::with_rho(1.5, 1.5 * 0.05 * 0.05, 0.05, 0.5, 9.81).unwrap();
        let sb = SlidingBody::oracle_trained(&model, &body).unwrap();
        let s0 = SlideState::new(PoseSE2::default(), GeneralizedVelocity::new(0.3, -0.2, 0.5));
        let traj = simulate_sliding(&model, &sb, &s0, &SlideOptions::default()).unwrap();
        assert!(traj.reached_rest());
        let energies: Vec<f64> = traj
            .samples
            .iter()
            .map(|s| sb.mass.kinetic_energy(&s.twist.0))
            .collect();
        assert!(energies.windows(2).all(|w| w[1] < w[0]));
        let mut work = 0.0;
        for i in 1..traj.samples.len() {
            let dt = traj.samples[i].time - traj.samples[i - 1].time;
            let p0 = traj.loads[i - 1].dot(&traj.samples[i - 1].twist.0);
            let p1 = traj.loads[i].dot(&traj.samples[i].twist.0);
            work += 0.5 * dt * (p0 + p1);
        }
        let lost = energies[0] - energies[energies.len() - 1];
        assert!((work / lost - 1.0).abs() <= 1e-2, "{work} vs {lost}");
    }

    #[test]
    fn rotated_start_rotates_the_trajectory() {
        let model =
            PolyModel::quadratic(&Matrix3::new(1.0, 0.2, 0.0, 0.2, 1.3, 0.1, 0.0, 0.1, 0.8))
                .with_rho(0.05)
                .unwrap();
        let body = BodyParams::with_rho(1.5, 1.5 * 0.05 * 0.05, 0.05, 0.5, 9.81).unwrap();
        let sb = SlidingBody::oracle_trained(&model, &body).unwrap();
        let twist = GeneralizedVelocity::new(0.25, 0.1, 0.3);
        let phi = 0.7;
        let a = simulate_sliding(
            &model,
            &sb,
            &SlideState::new(PoseSE2::default(), twist),
            &SlideOptions::default(),
        )
        .unwrap();
        let b = simulate_sliding(
            &model,
            &sb,
            &SlideState::new(PoseSE2::new(0.0, 0.0, phi), twist),
            &SlideOptions::default(),
        )
        .unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        let r = PoseSE2::new(0.0, 0.0, phi);
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            let p = r.rotate(Vector2::new(sa.pose.x, sa.pose.y));
            assert!((p.x - sb.pose.x).abs() <= 1e-9 && (p.y - sb.pose.y).abs() <= 1e-9);
            assert!((sa.pose.theta + phi - sb.pose.theta).abs() <= 1e-9);
            assert!((sa.twist.0 - sb.twist.0).amax() <= 1e-9);
        }
    }

    #[test]
    fn reversed_start_negates_final_direction() {
        let model = PolyModel::sphere_quartic().with_rho(0.05).unwrap();
        let body = BodyParams::with_rho(1.5, 1.5 * 0.05 * 0.05, 0.05, 0.5, 9.81).unwrap();
        let sb = SlidingBody::oracle_trained(&model, &body).unwrap();
        let v = GeneralizedVelocity::new(0.2, -0.1, 0.4);
        let neg = GeneralizedVelocity(-v.0);
        let a = simulate_sliding(
            &model,
            &sb,
            &SlideState::new(PoseSE2::default(), v),
            &SlideOptions::default(),
        )
        .unwrap();
        let b = simulate_sliding(
            &model,
            &sb,
            &SlideState::new(PoseSE2::default(), neg),
            &SlideOptions::default(),
        )
        .unwrap();
        let da = final_twist_direction(&a).unwrap();
        let db = final_twist_direction(&b).unwrap();
        assert!((da + db).norm() <= 1e-9);
    }
}
