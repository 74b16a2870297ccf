//! Fixed-step hybrid simulation of the leader–follower network under
//! event-triggered sampled feedback.
//!
//! Each follower holds its last sampled disagreement `P_i(t_k^i)` and applies
//! `u_i = −K P_i(t_k^i)` until its next event. Leaders are uncontrolled.
//! Between grid points the agent states, and for the dynamic trigger the
//! auxiliary variables `φ_i`, are advanced together by classical RK4. Trigger
//! conditions are evaluated only at grid points, so event times resolve to
//! the step size `h`.
//!
//! Within a step: integrate over `[t, t+h]` with start-of-step inputs, then
//! evaluate every follower's condition at `t+h`, then resample all fired
//! followers at once.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::control::{self, GainDesign, TriggerBounds};
use crate::error::{Error, Result};
use crate::graph::{self, DirectedNetwork};
use crate::scalar::{lit, to_f64, Real};

/// Any agent state norm above this aborts the run as divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TriggerMode {
    /// `∫‖e_i‖² > ∫(k_i‖P_i(t_k)‖² + βe^{−σs})` since the last event.
    SetcIntegral,
    /// `‖e_i‖² > k_i‖P_i(t_k)‖² + βe^{−σt}`
    SetcInstantaneous,
    /// `φ_i < θ_i(‖e_i‖² − k_i‖P_i(t_k)‖² − βe^{−σt})`
    Detc,
}

impl TriggerMode {
    pub fn name(self) -> &'static str {
        match self {
            TriggerMode::SetcIntegral => "setc",
            TriggerMode::SetcInstantaneous => "setc-inst",
            TriggerMode::Detc => "detc",
        }
    }
}

impl fmt::Display for TriggerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TriggerMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "setc" | "setc-integral" => Ok(TriggerMode::SetcIntegral),
            "setc-inst" | "setc-instantaneous" => Ok(TriggerMode::SetcInstantaneous),
            "detc" => Ok(TriggerMode::Detc),
            other => Err(format!(
                "unknown trigger mode `{other}` (expected setc, setc-inst or detc)"
            )),
        }
    }
}

/// Parameters shared by all trigger modes.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticTrigger<T> {
    /// Per-follower state-dependent weight `k_i`.
    pub k: Vec<T>,
    pub beta: T,
    pub sigma: T,
}

/// Parameters of the auxiliary variables `φ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicTrigger<T> {
    pub mu: Vec<T>,
    pub xi: Vec<T>,
    pub theta: Vec<T>,
    pub phi0: Vec<T>,
    /// `Θ_i > φ_i(0)`, used only by the inter-event lower bound.
    pub phi_cap: Vec<T>,
}

/// A complete simulation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub network: DirectedNetwork<T>,
    /// `n × N`, column `j` is agent `j`'s initial state.
    pub initial_states: DMatrix<T>,
    pub mode: TriggerMode,
    pub trigger: StaticTrigger<T>,
    pub dynamic: Option<DynamicTrigger<T>>,
    pub horizon: T,
    pub step: T,
    /// Keep every `decimation`-th grid point in the output.
    pub decimation: usize,
}

fn positive<T: Real>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be positive, got {}", to_f64(v)),
        ))
    }
}

fn per_follower<T>(name: &str, v: &[T], m: usize) -> Result<()> {
    if v.len() == m {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("needs {m} entries, got {}", v.len()),
        ))
    }
}

impl<T: Real> Scenario<T> {
    /// Number of grid steps, `round(T / h)`.
    pub fn steps(&self) -> usize {
        to_f64(self.horizon / self.step).round() as usize
    }

    /// Checks dimensions and parameter ranges that do not depend on the
    /// gain design.
    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if n == 0 || self.a.ncols() != n {
            return Err(Error::Dimension("A must be square and non-empty".into()));
        }
        if self.b.nrows() != n || self.b.ncols() == 0 {
            return Err(Error::Dimension(format!("B must have {n} rows")));
        }
        let m = self.network.followers();
        if self.initial_states.nrows() != n || self.initial_states.ncols() != self.network.agents()
        {
            return Err(Error::Dimension(format!(
                "initial states must be {n} x {}, got {} x {}",
                self.network.agents(),
                self.initial_states.nrows(),
                self.initial_states.ncols()
            )));
        }
        positive("horizon", self.horizon)?;
        positive("step", self.step)?;
        if self.step > self.horizon {
            return Err(Error::param("step", "must not exceed the horizon"));
        }
        if self.decimation == 0 {
            return Err(Error::param("decimation", "must be at least 1"));
        }
        per_follower("k", &self.trigger.k, m)?;
        if let Some(k) = self.trigger.k.iter().find(|k| !(**k >= T::zero())) {
            return Err(Error::param(
                "k",
                format!("must be nonnegative, got {}", to_f64(*k)),
            ));
        }
        if !(self.trigger.beta >= T::zero()) {
            return Err(Error::param("beta", "must be nonnegative"));
        }
        positive("sigma", self.trigger.sigma)?;
        match (&self.dynamic, self.mode) {
            (None, TriggerMode::Detc) => {
                return Err(Error::param(
                    "detc",
                    "dynamic trigger parameters are required",
                ));
            }
            (Some(d), _) => {
                for (name, v) in [
                    ("mu", &d.mu),
                    ("xi", &d.xi),
                    ("theta", &d.theta),
                    ("phi0", &d.phi0),
                    ("Theta", &d.phi_cap),
                ] {
                    per_follower(name, v, m)?;
                    for &x in v {
                        positive(name, x)?;
                    }
                }
                for i in 0..m {
                    if !(d.phi_cap[i] > d.phi0[i]) {
                        return Err(Error::param(
                            "Theta",
                            format!("follower {}: Theta must exceed phi0", i + 1),
                        ));
                    }
                }
            }
            (None, _) => {}
        }
        Ok(())
    }

    /// Checks the trigger parameters against a certified design. For the
    /// dynamic trigger this also returns the envelope constants.
    pub fn validate_against(&self, design: &GainDesign<T>) -> Result<Option<TriggerBounds<T>>> {
        self.validate()?;
        if design.k.ncols() != self.a.nrows() || design.k.nrows() != self.b.ncols() {
            return Err(Error::Dimension("gain does not match (A, B)".into()));
        }
        for (i, &k) in self.trigger.k.iter().enumerate() {
            if k >= design.k_max {
                return Err(Error::param(
                    "k",
                    format!(
                        "follower {}: k = {} is not below k_max = {}",
                        i + 1,
                        to_f64(k),
                        to_f64(design.k_max)
                    ),
                ));
            }
        }
        if self.mode != TriggerMode::Detc {
            return Ok(None);
        }
        let d = self.dynamic.as_ref().expect("validated");
        let k_gain = self
            .trigger
            .k
            .iter()
            .copied()
            .fold(T::zero(), |a, b| a.max(b));
        let mu_min =
            d.mu.iter()
                .copied()
                .fold(T::max_value().unwrap(), |a, b| a.min(b));
        let bounds = control::trigger_bounds(design, k_gain, mu_min)?;
        for (i, &xi) in d.xi.iter().enumerate() {
            if xi > bounds.xi_max {
                return Err(Error::param(
                    "xi",
                    format!(
                        "follower {}: xi = {} exceeds xi_max = {}",
                        i + 1,
                        to_f64(xi),
                        to_f64(bounds.xi_max)
                    ),
                ));
            }
        }
        Ok(Some(bounds))
    }
}

/// Disagreement `P_i = Σ_j a_ij(x_i − x_j) + Σ_l b_il(x_i − x_l)` for
/// follower `i`, with `states` holding one agent per column.
pub fn measurement<T: Real>(net: &DirectedNetwork<T>, states: &DMatrix<T>, i: usize) -> DVector<T> {
    let m = net.followers();
    let xi = states.column(i);
    let mut p = DVector::zeros(states.nrows());
    for j in 0..m {
        let w = net.adjacency()[(i, j)];
        if w != T::zero() {
            p += (xi - states.column(j)) * w;
        }
    }
    for l in 0..net.leaders() {
        let w = net.coupling()[(i, l)];
        if w != T::zero() {
            p += (xi - states.column(m + l)) * w;
        }
    }
    p
}

/// All follower measurements at once, one per column: `X_F Mᵀ − X_L Cᵀ`.
pub fn measurements<T: Real>(
    grounded: &DMatrix<T>,
    coupling: &DMatrix<T>,
    states: &DMatrix<T>,
) -> DMatrix<T> {
    let m = grounded.nrows();
    let followers = states.columns(0, m);
    let leaders = states.columns(m, coupling.ncols());
    followers * grounded.transpose() - leaders * coupling.transpose()
}

/// `u_i = −K P_i(t_k^i)` for followers, zero for leaders.
pub fn control_input<T: Real>(
    k: &DMatrix<T>,
    followers: usize,
    samples: &DMatrix<T>,
    agent: usize,
) -> DVector<T> {
    if agent >= followers {
        DVector::zeros(k.nrows())
    } else {
        -(k * samples.column(agent))
    }
}

/// `k_i‖P_i(t_k)‖² + βe^{−σt}`
pub fn static_threshold<T: Real>(k: T, sample_sq: T, beta: T, sigma: T, t: T) -> T {
    k * sample_sq + beta * (-sigma * t).exp()
}

/// Integral static condition: fires when `I_e − I_th > 0`.
pub fn setc_integral_trigger<T: Real>(error_integral: T, threshold_integral: T) -> bool {
    error_integral - threshold_integral > T::zero()
}

pub fn setc_instant_trigger<T: Real>(error_sq: T, threshold: T) -> bool {
    error_sq > threshold
}

/// Dynamic condition: fires when `φ < θ(‖e‖² − threshold)`.
pub fn detc_trigger<T: Real>(phi: T, theta: T, error_sq: T, threshold: T) -> bool {
    phi < theta * (error_sq - threshold)
}

/// `φ̇ = −μφ + ξ(threshold − ‖e‖²)`
pub fn phi_rate<T: Real>(phi: T, mu: T, xi: T, threshold: T, error_sq: T) -> T {
    -mu * phi + xi * (threshold - error_sq)
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<T: Real, F>(t: T, h: T, y: &DVector<T>, f: F) -> DVector<T>
where
    F: Fn(T, &DVector<T>) -> DVector<T>,
{
    let half = lit::<T>(0.5);
    let k1 = f(t, y);
    let k2 = f(t + h * half, &(y + &k1 * (h * half)));
    let k3 = f(t + h * half, &(y + &k2 * (h * half)));
    let k4 = f(t + h, &(y + &k3 * h));
    y + (k1 + k2 * lit::<T>(2.0) + k3 * lit::<T>(2.0) + k4) * (h / lit::<T>(6.0))
}

/// Advances a single `φ` by one RK4 step given the forcing
/// `threshold(s) − ‖e(s)‖²` as a function of time.
pub fn phi_step<T: Real, F>(phi: T, mu: T, xi: T, t: T, h: T, forcing: F) -> Result<T>
where
    F: Fn(T) -> T,
{
    let y = DVector::from_element(1, phi);
    let next = rk4_step(t, h, &y, |s, y| {
        DVector::from_element(1, -mu * y[0] + xi * forcing(s))
    })[0];
    if next > T::zero() {
        Ok(next)
    } else {
        Err(Error::PhiNonPositive {
            agent: 0,
            time: to_f64(t + h),
            value: to_f64(next),
        })
    }
}

/// A trigger instant of one follower together with the sampled `P_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<T: Real> {
    pub time: T,
    pub step: usize,
    pub sample: DVector<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination<T> {
    Completed,
    /// An agent state norm exceeded [`DIVERGENCE_NORM`] at `time`.
    Diverged {
        time: T,
        norm: T,
    },
}

/// Mutable run state at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T: Real> {
    pub step: usize,
    pub t: T,
    /// `n × N`, one agent per column.
    pub x: DMatrix<T>,
    /// `n × m`, last sampled `P_i(t_k^i)` per follower.
    pub samples: DMatrix<T>,
    pub last_trigger: Vec<T>,
    /// `∫‖e_i‖²` since the last event (trapezoidal).
    pub error_integral: Vec<T>,
    /// `∫(k_i‖P_i(t_k)‖² + βe^{−σs})` since the last event (trapezoidal).
    pub threshold_integral: Vec<T>,
    /// `‖e_i‖²` at the current grid point.
    pub error_sq: Vec<T>,
    pub phi: Vec<T>,
}

impl<T: Real> SimState<T> {
    pub fn measurement(&self, net: &DirectedNetwork<T>, i: usize) -> DVector<T> {
        measurement(net, &self.x, i)
    }

    /// `e_i = P_i(t_k^i) − P_i(t)`
    pub fn error(&self, net: &DirectedNetwork<T>, i: usize) -> DVector<T> {
        self.samples.column(i) - self.measurement(net, i)
    }

    pub fn control_input(&self, k: &DMatrix<T>, agent: usize) -> DVector<T> {
        control_input(k, self.samples.ncols(), &self.samples, agent)
    }
}

/// Output of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub mode: TriggerMode,
    pub step: T,
    pub followers: usize,
    pub times: Vec<T>,
    /// `n × N` per output time.
    pub states: Vec<DMatrix<T>>,
    /// `p × N` per output time: the input held on `[t, t + h)`.
    pub inputs: Vec<DMatrix<T>>,
    /// `‖e_i‖` per follower per output time, after any resampling.
    pub error_norms: Vec<Vec<T>>,
    /// `φ_i` per follower per output time; empty unless dynamic.
    pub phi: Vec<Vec<T>>,
    /// Events per follower; the first is always `t = 0`.
    pub events: Vec<Vec<Event<T>>>,
    pub termination: Termination<T>,
    /// Smallest `φ_i` over every grid point.
    pub phi_min: Option<T>,
    /// Smallest `φ_i(t) − φ_i(0)e^{−(μ_i + ξ_i/θ_i)t}` over every grid point.
    pub phi_bound_slack: Option<T>,
    pub steps_taken: usize,
}

impl<T: Real> Trajectory<T> {
    /// Events after `t = 0` for each follower.
    pub fn trigger_counts(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.len() - 1).collect()
    }

    /// Shortest gap between consecutive events of each follower, `None`
    /// when the follower never triggered after `t = 0`.
    pub fn min_inter_event_times(&self) -> Vec<Option<T>> {
        self.events
            .iter()
            .map(|ev| {
                ev.windows(2)
                    .map(|w| w[1].time - w[0].time)
                    .fold(None, |acc: Option<T>, d| Some(acc.map_or(d, |a| a.min(d))))
            })
            .collect()
    }

    pub fn min_inter_event_time(&self) -> Option<T> {
        self.min_inter_event_times()
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<T>, d| Some(acc.map_or(d, |a| a.min(d))))
    }

    pub fn diverged(&self) -> bool {
        matches!(self.termination, Termination::Diverged { .. })
    }

    pub fn final_time(&self) -> T {
        *self
            .times
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn final_states(&self) -> &DMatrix<T> {
        self.states
            .last()
            .expect("trajectory has at least one sample")
    }
}

struct Recorder<T: Real> {
    traj: Trajectory<T>,
}

impl<T: Real> Recorder<T> {
    fn push(&mut self, state: &SimState<T>, k: &DMatrix<T>, detc: bool) {
        let agents = state.x.ncols();
        let p = k.nrows();
        let mut u = DMatrix::zeros(p, agents);
        for a in 0..state.samples.ncols() {
            u.set_column(a, &state.control_input(k, a));
        }
        self.traj.times.push(state.t);
        self.traj.states.push(state.x.clone());
        self.traj.inputs.push(u);
        self.traj
            .error_norms
            .push(state.error_sq.iter().map(|e| e.sqrt()).collect());
        if detc {
            self.traj.phi.push(state.phi.clone());
        }
    }
}

/// Simulates `scenario` from `t = 0` to the horizon with the gain of
/// `design`. Identical inputs give bit-identical outputs.
pub fn run<T: Real>(scenario: &Scenario<T>, design: &GainDesign<T>) -> Result<Trajectory<T>> {
    scenario.validate_against(design)?;
    let net = &scenario.network;
    let n = scenario.a.nrows();
    let m = net.followers();
    let agents = net.agents();
    let h = scenario.step;
    let steps = scenario.steps();
    let detc = scenario.mode == TriggerMode::Detc;
    let trig = &scenario.trigger;
    let dynamic = if detc { scenario.dynamic.clone() } else { None };

    let grounded = graph::assemble_grounded(net);
    let coupling = net.coupling().clone();
    let bk = &scenario.b * &design.k;

    let x0 = scenario.initial_states.clone();
    let samples = measurements(&grounded, &coupling, &x0);
    let mut state = SimState {
        step: 0,
        t: T::zero(),
        x: x0,
        samples,
        last_trigger: vec![T::zero(); m],
        error_integral: vec![T::zero(); m],
        threshold_integral: vec![T::zero(); m],
        error_sq: vec![T::zero(); m],
        phi: dynamic.as_ref().map(|d| d.phi0.clone()).unwrap_or_default(),
    };

    let mut rec = Recorder {
        traj: Trajectory {
            mode: scenario.mode,
            step: h,
            followers: m,
            times: Vec::new(),
            states: Vec::new(),
            inputs: Vec::new(),
            error_norms: Vec::new(),
            phi: Vec::new(),
            events: (0..m)
                .map(|i| {
                    vec![Event {
                        time: T::zero(),
                        step: 0,
                        sample: state.samples.column(i).into_owned(),
                    }]
                })
                .collect(),
            termination: Termination::Completed,
            phi_min: dynamic.as_ref().map(|d| {
                d.phi0
                    .iter()
                    .copied()
                    .fold(T::max_value().unwrap(), |a, b| a.min(b))
            }),
            phi_bound_slack: dynamic.as_ref().map(|_| T::zero()),
            steps_taken: 0,
        },
    };
    rec.push(&state, &design.k, detc);

    let limit: T = lit(DIVERGENCE_NORM);
    let state_len = n * agents;
    for s in 0..steps {
        let t = lit::<T>(s as f64) * h;
        let t1 = lit::<T>((s + 1) as f64) * h;

        // held inputs, as B u_i per agent column
        let mut drive = DMatrix::<T>::zeros(n, agents);
        for i in 0..m {
            drive.set_column(i, &(-(&bk * state.samples.column(i))));
        }
        let sample_sq: Vec<T> = (0..m)
            .map(|i| state.samples.column(i).norm_squared())
            .collect();

        let mut y = DVector::<T>::zeros(state_len + if detc { m } else { 0 });
        y.rows_mut(0, state_len).copy_from_slice(state.x.as_slice());
        if detc {
            y.rows_mut(state_len, m).copy_from_slice(&state.phi);
        }
        let a = &scenario.a;
        let rhs = |tau: T, y: &DVector<T>| -> DVector<T> {
            let x = DMatrix::from_column_slice(n, agents, &y.as_slice()[..state_len]);
            let dx = a * &x + &drive;
            let mut dy = DVector::<T>::zeros(y.len());
            dy.rows_mut(0, state_len).copy_from_slice(dx.as_slice());
            if let Some(d) = dynamic.as_ref() {
                let p = measurements(&grounded, &coupling, &x);
                for i in 0..m {
                    let err_sq = (state.samples.column(i) - p.column(i)).norm_squared();
                    let thr = static_threshold(trig.k[i], sample_sq[i], trig.beta, trig.sigma, tau);
                    dy[state_len + i] = phi_rate(y[state_len + i], d.mu[i], d.xi[i], thr, err_sq);
                }
            }
            dy
        };
        let y1 = rk4_step(t, h, &y, rhs);

        state.x = DMatrix::from_column_slice(n, agents, &y1.as_slice()[..state_len]);
        state.step = s + 1;
        state.t = t1;
        rec.traj.steps_taken = s + 1;

        let worst = state
            .x
            .column_iter()
            .map(|c| c.norm())
            .fold(T::zero(), |a, b| a.max(b));
        if !(worst <= limit) {
            // keep the last finite grid point as the final sample
            if worst.is_finite() {
                rec.push(&state, &design.k, detc);
            }
            rec.traj.termination = Termination::Diverged {
                time: t1,
                norm: worst,
            };
            return Ok(rec.traj);
        }

        if let Some(d) = dynamic.as_ref() {
            for i in 0..m {
                let phi = y1[state_len + i];
                if !(phi > T::zero()) {
                    return Err(Error::PhiNonPositive {
                        agent: i + 1,
                        time: to_f64(t1),
                        value: to_f64(phi),
                    });
                }
                state.phi[i] = phi;
                let floor = d.phi0[i] * (-(d.mu[i] + d.xi[i] / d.theta[i]) * t1).exp();
                let slack = phi - floor;
                if let Some(cur) = rec.traj.phi_bound_slack.as_mut() {
                    *cur = cur.min(slack);
                }
                if let Some(cur) = rec.traj.phi_min.as_mut() {
                    *cur = cur.min(phi);
                }
            }
        }

        let p1 = measurements(&grounded, &coupling, &state.x);
        let half_h = h * lit::<T>(0.5);
        let mut fired = Vec::new();
        for i in 0..m {
            let err_sq = (state.samples.column(i) - p1.column(i)).norm_squared();
            let thr0 = static_threshold(trig.k[i], sample_sq[i], trig.beta, trig.sigma, t);
            let thr1 = static_threshold(trig.k[i], sample_sq[i], trig.beta, trig.sigma, t1);
            state.error_integral[i] += half_h * (state.error_sq[i] + err_sq);
            state.threshold_integral[i] += half_h * (thr0 + thr1);
            state.error_sq[i] = err_sq;
            let fire = match scenario.mode {
                TriggerMode::SetcIntegral => {
                    setc_integral_trigger(state.error_integral[i], state.threshold_integral[i])
                }
                TriggerMode::SetcInstantaneous => setc_instant_trigger(err_sq, thr1),
                TriggerMode::Detc => {
                    let d = dynamic.as_ref().expect("validated");
                    detc_trigger(state.phi[i], d.theta[i], err_sq, thr1)
                }
            };
            if fire {
                fired.push(i);
            }
        }
        for &i in &fired {
            let sample = p1.column(i).into_owned();
            state.samples.set_column(i, &sample);
            state.last_trigger[i] = t1;
            state.error_integral[i] = T::zero();
            state.threshold_integral[i] = T::zero();
            state.error_sq[i] = T::zero();
            rec.traj.events[i].push(Event {
                time: t1,
                step: s + 1,
                sample,
            });
        }

        if (s + 1) % scenario.decimation == 0 || s + 1 == steps {
            rec.push(&state, &design.k, detc);
        }
    }
    Ok(rec.traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{DesignParams, GainDesign};
    use approx::assert_relative_eq;

    fn scalar_network() -> DirectedNetwork<f64> {
        DirectedNetwork::from_edges(2, 1, &[], &[(0, 1, 1.0)]).unwrap()
    }

    fn scalar_design(k: f64) -> GainDesign<f64> {
        GainDesign {
            r: DMatrix::from_element(1, 1, k),
            k: DMatrix::from_element(1, 1, k),
            varsigma_r: 1.0,
            delta: 0.05,
            v1: 1.0,
            varsigma_t: 1.0,
            rho1: 1.0,
            k_max: 0.5,
            k_max_dynamic: 0.5,
            riccati_certificate: -0.05,
            riccati_iterations: 0,
            eta: 2.0,
            psi_min: 1.0,
            psi_max: 1.0,
            m_norm: 1.0,
            closed_loop_abscissa: -1.0,
        }
    }

    fn scalar_scenario(mode: TriggerMode, x_follower: f64, beta: f64) -> Scenario<f64> {
        Scenario {
            a: DMatrix::from_element(1, 1, -1.0),
            b: DMatrix::from_element(1, 1, 1.0),
            network: scalar_network(),
            initial_states: DMatrix::from_row_slice(1, 2, &[x_follower, 0.0]),
            mode,
            trigger: StaticTrigger {
                k: vec![0.1],
                beta,
                sigma: 1.0,
            },
            dynamic: Some(DynamicTrigger {
                mu: vec![1.0],
                xi: vec![0.5],
                theta: vec![1.0],
                phi0: vec![1.0],
                phi_cap: vec![2.0],
            }),
            horizon: 1.0,
            step: 1e-2,
            decimation: 1,
        }
    }

    #[test]
    fn measurement_examples() {
        let net = scalar_network();
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert_eq!(measurement(&net, &x, 0)[0], 1.0);
        let same = DMatrix::from_row_slice(1, 2, &[3.0, 3.0]);
        assert_eq!(measurement(&net, &same, 0)[0], 0.0);
    }

    #[test]
    fn batched_measurements_match_per_agent() {
        let net = DirectedNetwork::from_edges(
            5,
            3,
            &[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 0.5)],
            &[(0, 3, 1.0), (2, 4, 3.0)],
        )
        .unwrap();
        let x = DMatrix::from_fn(2, 5, |r, c| (r as f64 + 1.0) * (c as f64 - 1.7).sin());
        let all = measurements(&graph::assemble_grounded(&net), net.coupling(), &x);
        for i in 0..3 {
            assert!((all.column(i) - measurement(&net, &x, i)).norm() < 1e-14);
        }
    }

    #[test]
    fn control_input_examples() {
        let k = DMatrix::from_element(1, 1, 1.0);
        let samples = DMatrix::from_row_slice(1, 1, &[2.0]);
        assert_eq!(control_input(&k, 1, &samples, 0)[0], -2.0);
        assert_eq!(control_input(&k, 1, &samples, 1)[0], 0.0);
        assert_eq!(control_input(&k, 1, &DMatrix::zeros(1, 1), 0)[0], 0.0);
    }

    #[test]
    fn trigger_predicates() {
        assert!(!setc_integral_trigger(0.0, 0.0));
        assert!(setc_integral_trigger(1.0, 0.5));
        // e ≡ 0 keeps the dynamic condition quiet for any positive φ
        assert!(!detc_trigger(1e-9, 1e6, 0.0, 0.3));
        assert!(detc_trigger(0.1, 1.0, 1.0, 0.5));
        assert!(setc_instant_trigger(1.0, 0.5));
        assert!(!setc_instant_trigger(0.5, 0.5));
    }

    #[test]
    fn phi_decays_without_forcing() {
        let mut phi = 1.0;
        let h = 0.01;
        for s in 0..100 {
            phi = phi_step(phi, 2.0, 1.0, s as f64 * h, h, |_| 0.0).unwrap();
        }
        assert_relative_eq!(phi, (-2.0f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn phi_reaches_forced_steady_state() {
        // φ̇ = −φ + 1 from φ(0) = 1e-9: φ(t) = 1 − (1 − 1e-9)e^{−t}
        let mut phi = 1e-9;
        let h = 0.01;
        for s in 0..2000 {
            phi = phi_step(phi, 1.0, 1.0, s as f64 * h, h, |_| 1.0).unwrap();
        }
        assert_relative_eq!(phi, 1.0 - (1.0 - 1e-9) * (-20.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn phi_step_reports_lost_positivity() {
        assert!(matches!(
            phi_step(1e-6, 1.0, 1.0, 0.0, 0.1, |_| -1.0),
            Err(Error::PhiNonPositive { .. })
        ));
    }

    #[test]
    fn equilibrium_without_offset_never_triggers() {
        for mode in [
            TriggerMode::SetcIntegral,
            TriggerMode::SetcInstantaneous,
            TriggerMode::Detc,
        ] {
            let sc = scalar_scenario(mode, 0.0, 0.0);
            let traj = run(&sc, &scalar_design(1.0)).unwrap();
            assert_eq!(traj.trigger_counts(), vec![0], "{mode}");
            assert!(traj.states.iter().all(|x| x.iter().all(|v| *v == 0.0)));
            assert_eq!(traj.events[0][0].time, 0.0);
        }
    }

    #[test]
    fn leaders_are_uncontrolled() {
        let sc = scalar_scenario(TriggerMode::SetcIntegral, 1.0, 0.1);
        let traj = run(&sc, &scalar_design(1.0)).unwrap();
        for u in &traj.inputs {
            assert_eq!(u[(0, 1)], 0.0);
        }
    }

    #[test]
    fn rejects_k_at_or_above_bound() {
        let mut sc = scalar_scenario(TriggerMode::SetcIntegral, 1.0, 0.1);
        sc.trigger.k = vec![0.5];
        assert!(matches!(
            run(&sc, &scalar_design(1.0)),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn detc_requires_parameters_and_cap() {
        let mut sc = scalar_scenario(TriggerMode::Detc, 1.0, 0.1);
        sc.dynamic.as_mut().unwrap().phi_cap = vec![0.5];
        assert!(sc.validate().is_err());
        sc.dynamic = None;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn design_params_default_matches_documentation() {
        let p = DesignParams::<f64>::default();
        assert_eq!(p.delta, 0.05);
    }

    #[test]
    fn mode_names_round_trip() {
        for mode in [
            TriggerMode::SetcIntegral,
            TriggerMode::SetcInstantaneous,
            TriggerMode::Detc,
        ] {
            assert_eq!(mode.name().parse::<TriggerMode>().unwrap(), mode);
        }
        assert!("bogus".parse::<TriggerMode>().is_err());
    }
}
