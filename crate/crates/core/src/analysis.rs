//! Post-processing of simulated trajectories: deviation from the leader
//! combination, distance to the leader hull, Lyapunov levels against the
//! dynamic-trigger envelope, and inter-event lower bounds.

use nalgebra::{DMatrix, DVector};

use crate::control::{self, GainDesign, TriggerBounds};
use crate::error::{Error, Result};
use crate::graph::{DirectedNetwork, GroundedMatrix};
use crate::linalg;
use crate::scalar::{lit, Real};
use crate::sim::{Scenario, Termination, Trajectory, TriggerMode};

/// Safety factor applied to the empirical supremum of `Γ_i`.
pub const H_SAFETY_FACTOR: f64 = 1.1;
/// `|k_w − σ|` below which the coincident-rate branch of the envelope is used.
pub const ENVELOPE_BRANCH_TOLERANCE: f64 = 1e-9;
/// Projected-gradient stationarity tolerance for hulls with more than three
/// vertices.
pub const HULL_TOLERANCE: f64 = 1e-10;

const HULL_MAX_ITERATIONS: usize = 100_000;
const BISECTION_ITERATIONS: usize = 400;

/// `x̃_i = x_i − Σ_j χ_ij x_j`, stacked follower by follower.
pub fn tilde_x<T: Real>(states: &DMatrix<T>, chi: &DMatrix<T>) -> DVector<T> {
    let m = chi.nrows();
    let followers = states.columns(0, m);
    let leaders = states.columns(m, chi.ncols());
    let dev = followers - leaders * chi.transpose();
    DVector::from_column_slice(dev.as_slice())
}

fn point_segment<T: Real>(x: &DVector<T>, a: &DVector<T>, b: &DVector<T>) -> T {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 <= T::zero() {
        return (x - a).norm();
    }
    let s = ((x - a).dot(&d) / len2).max(T::zero()).min(T::one());
    (x - (a + d * s)).norm()
}

fn point_triangle<T: Real>(x: &DVector<T>, a: &DVector<T>, b: &DVector<T>, c: &DVector<T>) -> T {
    let edges = point_segment(x, a, b)
        .min(point_segment(x, b, c))
        .min(point_segment(x, a, c));
    let e1 = b - a;
    let e2 = c - a;
    let w = x - a;
    let (d11, d12, d22) = (e1.dot(&e1), e1.dot(&e2), e2.dot(&e2));
    let det = d11 * d22 - d12 * d12;
    let scale = d11 * d22;
    if !(det > scale * lit::<T>(1e-12)) {
        return edges;
    }
    let (r1, r2) = (w.dot(&e1), w.dot(&e2));
    let s = (d22 * r1 - d12 * r2) / det;
    let t = (d11 * r2 - d12 * r1) / det;
    if s >= T::zero() && t >= T::zero() && s + t <= T::one() {
        (w - e1 * s - e2 * t).norm().min(edges)
    } else {
        edges
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex<T: Real>(v: &DVector<T>) -> DVector<T> {
    let mut u: Vec<T> = v.iter().copied().collect();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
    let mut cumsum = T::zero();
    let mut tau = T::zero();
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - T::one()) / lit::<T>((j + 1) as f64);
        if uj - candidate > T::zero() {
            tau = candidate;
        }
    }
    v.map(|vi| (vi - tau).max(T::zero()))
}

fn point_polytope<T: Real>(x: &DVector<T>, vertices: &DMatrix<T>) -> T {
    let k = vertices.ncols();
    let gram = vertices.transpose() * vertices;
    let lin = vertices.transpose() * x;
    let lipschitz = linalg::sym_max_eigenvalue(&gram);
    if lipschitz <= T::zero() {
        return x.norm();
    }
    let step = T::one() / lipschitz;
    let tol: T = lit(HULL_TOLERANCE);
    let mut w = DVector::from_element(k, T::one() / lit::<T>(k as f64));
    let mut y = w.clone();
    let mut momentum = T::one();
    for _ in 0..HULL_MAX_ITERATIONS {
        let grad_y = &gram * &y - &lin;
        let next = project_simplex(&(&y - grad_y * step));
        let grad = &gram * &next - &lin;
        let stationarity = (&next - project_simplex(&(&next - &grad))).norm();
        let m_next =
            (T::one() + (T::one() + lit::<T>(4.0) * momentum * momentum).sqrt()) * lit::<T>(0.5);
        y = &next + (&next - &w) * ((momentum - T::one()) / m_next);
        w = next;
        momentum = m_next;
        if stationarity < tol {
            break;
        }
    }
    (vertices * w - x).norm()
}

/// Distance from `x` to the convex hull of the columns of `leaders`.
pub fn hull_distance<T: Real>(x: &DVector<T>, leaders: &DMatrix<T>) -> T {
    let col = |j: usize| leaders.column(j).into_owned();
    match leaders.ncols() {
        0 => T::max_value().unwrap(),
        1 => (x - col(0)).norm(),
        2 => point_segment(x, &col(0), &col(1)),
        3 => point_triangle(x, &col(0), &col(1), &col(2)),
        _ => point_polytope(x, leaders),
    }
}

/// Distance of every follower to the hull spanned by the leaders, for
/// states laid out one agent per column with followers first.
pub fn hull_residual<T: Real>(states: &DMatrix<T>, followers: usize) -> Vec<T> {
    let leaders = states
        .columns(followers, states.ncols() - followers)
        .into_owned();
    (0..followers)
        .map(|i| hull_distance(&states.column(i).into_owned(), &leaders))
        .collect()
}

/// `V₁ = x̃ᵀ(Ψ ⊗ R)x̃`
pub fn lyapunov_v1<T: Real>(tilde: &DVector<T>, psi: &DVector<T>, r: &DMatrix<T>) -> T {
    let n = r.nrows();
    psi.iter().enumerate().fold(T::zero(), |acc, (i, &w)| {
        let xi = tilde.rows(i * n, n);
        acc + w * (xi.transpose() * r * xi)[0]
    })
}

/// Parameters of the comparison envelope `ψ̇ = −k_w ψ + mβe^{−σt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams<T> {
    pub k_w: T,
    pub sigma: T,
    /// Number of followers.
    pub m: T,
    pub beta: T,
    pub psi0: T,
}

pub fn detc_envelope<T: Real>(p: &EnvelopeParams<T>, t: T) -> T {
    let decay = (-p.k_w * t).exp();
    let gap = p.k_w - p.sigma;
    if gap.abs() < lit(ENVELOPE_BRANCH_TOLERANCE) {
        decay * p.psi0 + p.m * p.beta * t * decay
    } else {
        decay * p.psi0 + p.m * p.beta / gap * ((-p.sigma * t).exp() - decay)
    }
}

/// Lower bound `τ` on the next inter-event time of the static trigger after
/// an event at `t_k`: the positive root of
/// `βe^{−σ(t_k+τ)} = (h/‖A‖)²(e^{‖A‖τ} − 1)²`.
pub fn setc_zeno_bound<T: Real>(h: T, norm_a: T, beta: T, sigma: T, t_k: T) -> Result<T> {
    for (name, v) in [("h", h), ("norm_a", norm_a), ("beta", beta)] {
        if !(v > T::zero() && v.is_finite()) {
            return Err(Error::param(name, "must be positive and finite"));
        }
    }
    if !(sigma >= T::zero()) {
        return Err(Error::param("sigma", "must be nonnegative"));
    }
    // log-space gap between the two sides, strictly decreasing in τ
    let gap = |tau: T| {
        beta.ln()
            - sigma * (t_k + tau)
            - lit::<T>(2.0) * (h / norm_a * (norm_a * tau).exp_m1()).ln()
    };
    let mut hi = T::one();
    let mut expansions = 0;
    while !(gap(hi) < T::zero()) {
        hi *= lit::<T>(2.0);
        expansions += 1;
        if expansions > 200 || !hi.is_finite() {
            return Err(Error::BracketFailure);
        }
    }
    let mut lo = T::zero();
    for _ in 0..BISECTION_ITERATIONS {
        let mid = (lo + hi) * lit::<T>(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * lit::<T>(0.5))
}

/// `τ_i = ln(1 + σΘ_i/(θ_i h_i²)) / σ`
pub fn detc_zeno_bound<T: Real>(sigma: T, phi_cap: T, theta: T, h: T) -> Result<T> {
    for (name, v) in [
        ("sigma", sigma),
        ("Theta", phi_cap),
        ("theta", theta),
        ("h", h),
    ] {
        if !(v > T::zero()) {
            return Err(Error::param(name, "must be positive"));
        }
    }
    Ok((sigma * phi_cap / (theta * h * h)).ln_1p() / sigma)
}

/// `h_i = 1.1 · sup ‖−A P_i(t_k^i) + BK[Σ_j a_ij(P_i(t_k^i) − P_j(t_k'^j)) + Σ_l b_il P_i(t_k^i)]‖`
/// over every configuration of held samples visited by the run. Leaders
/// hold no samples and contribute through the pinning weight only.
pub fn estimate_h<T: Real>(
    traj: &Trajectory<T>,
    a: &DMatrix<T>,
    bk: &DMatrix<T>,
    net: &DirectedNetwork<T>,
) -> Result<Vec<T>> {
    let m = net.followers();
    if traj.times.is_empty() || traj.events.len() != m || traj.events.iter().any(|e| e.is_empty()) {
        return Err(Error::EmptyTrajectory);
    }
    let n = a.nrows();
    let mut held = DMatrix::<T>::zeros(n, m);
    for (i, ev) in traj.events.iter().enumerate() {
        held.set_column(i, &ev[0].sample);
    }
    let mut sup = vec![T::zero(); m];
    let mut cursor = vec![1usize; m];
    let gamma = |held: &DMatrix<T>, sup: &mut [T]| {
        for i in 0..m {
            let pi = held.column(i);
            let mut agg = pi * net.pinning_weight(i);
            for j in 0..m {
                let w = net.adjacency()[(i, j)];
                if w != T::zero() {
                    agg += (pi - held.column(j)) * w;
                }
            }
            let g = (bk * agg - a * pi).norm();
            sup[i] = sup[i].max(g);
        }
    };
    gamma(&held, &mut sup);
    loop {
        let next_step = (0..m)
            .filter_map(|i| traj.events[i].get(cursor[i]).map(|e| e.step))
            .min();
        let Some(step) = next_step else { break };
        for i in 0..m {
            if let Some(e) = traj.events[i].get(cursor[i]) {
                if e.step == step {
                    held.set_column(i, &e.sample);
                    cursor[i] += 1;
                }
            }
        }
        gamma(&held, &mut sup);
    }
    Ok(sup
        .into_iter()
        .map(|s| s * lit::<T>(H_SAFETY_FACTOR))
        .collect())
}

/// Metrics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport<T: Real> {
    pub mode: TriggerMode,
    pub times: Vec<T>,
    pub tilde_x_norms: Vec<T>,
    /// Largest follower distance to the leader hull per output time.
    pub hull_residuals: Vec<T>,
    /// Per-follower distance to the leader hull at the final output time.
    pub final_hull_residuals: Vec<T>,
    pub lyapunov_v1: Vec<T>,
    /// Dynamic trigger only.
    pub envelope: Option<EnvelopeParams<T>>,
    pub envelope_values: Vec<T>,
    /// `max_t V₁(t)/ψ(t)` over output times, dynamic trigger only.
    pub envelope_ratio_max: Option<T>,
    pub trigger_bounds: Option<TriggerBounds<T>>,
    pub trigger_counts: Vec<usize>,
    pub min_inter_event_times: Vec<Option<T>>,
    pub h_estimates: Vec<T>,
    /// Static lower bound evaluated after every event of each follower;
    /// empty when the bound does not apply (`h_i = 0` or `β = 0`).
    pub setc_zeno_bounds: Vec<Vec<T>>,
    /// `τ_i` per follower, dynamic trigger with `h_i > 0` only.
    pub detc_zeno_bounds: Vec<Option<T>>,
    /// Followers whose empirical minimum inter-event time falls below `τ_i`.
    pub detc_bound_violations: Vec<usize>,
    pub diverged: bool,
    pub termination_time: T,
    pub phi_min: Option<T>,
    pub phi_bound_slack: Option<T>,
}

impl<T: Real> AnalysisReport<T> {
    pub fn initial_tilde_x_norm(&self) -> T {
        self.tilde_x_norms[0]
    }

    pub fn final_tilde_x_norm(&self) -> T {
        *self.tilde_x_norms.last().expect("non-empty report")
    }

    pub fn max_final_hull_residual(&self) -> T {
        self.final_hull_residuals
            .iter()
            .copied()
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn total_triggers(&self) -> usize {
        self.trigger_counts.iter().sum()
    }
}

/// Assembles every metric for a finished run.
pub fn summarize<T: Real>(
    traj: &Trajectory<T>,
    scenario: &Scenario<T>,
    design: &GainDesign<T>,
    grounded: &GroundedMatrix<T>,
) -> Result<AnalysisReport<T>> {
    if traj.times.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let net = &scenario.network;
    let m = net.followers();
    let chi = control::chi_coefficients(grounded, net)?;
    let tildes: Vec<DVector<T>> = traj.states.iter().map(|x| tilde_x(x, &chi)).collect();
    let tilde_x_norms = tildes.iter().map(|v| v.norm()).collect();
    let per_follower: Vec<Vec<T>> = traj.states.iter().map(|x| hull_residual(x, m)).collect();
    let hull_residuals = per_follower
        .iter()
        .map(|r| r.iter().copied().fold(T::zero(), |a, b| a.max(b)))
        .collect();
    let final_hull_residuals = per_follower.last().cloned().unwrap_or_default();
    let lyap: Vec<T> = tildes
        .iter()
        .map(|v| lyapunov_v1(v, &grounded.psi, &design.r))
        .collect();

    let trigger_bounds = scenario.validate_against(design)?;
    let (envelope, envelope_values, envelope_ratio_max) = match (&trigger_bounds, &scenario.dynamic)
    {
        (Some(b), Some(d)) if scenario.mode == TriggerMode::Detc => {
            let phi_sum = d.phi0.iter().copied().fold(T::zero(), |a, b| a + b);
            let params = EnvelopeParams {
                k_w: b.k_w,
                sigma: scenario.trigger.sigma,
                m: lit(m as f64),
                beta: scenario.trigger.beta,
                psi0: lyap[0] + phi_sum,
            };
            let values: Vec<T> = traj
                .times
                .iter()
                .map(|&t| detc_envelope(&params, t))
                .collect();
            let ratio = lyap
                .iter()
                .zip(&values)
                .map(|(&v, &p)| {
                    if p > T::zero() {
                        v / p
                    } else if v > T::zero() {
                        T::max_value().unwrap()
                    } else {
                        T::zero()
                    }
                })
                .fold(T::zero(), |a, b| a.max(b));
            (Some(params), values, Some(ratio))
        }
        _ => (None, Vec::new(), None),
    };

    let bk = &scenario.b * &design.k;
    let h_estimates = estimate_h(traj, &scenario.a, &bk, net)?;
    let norm_a = linalg::spectral_norm(&scenario.a);
    let setc_zeno_bounds = traj
        .events
        .iter()
        .zip(&h_estimates)
        .map(|(ev, &h)| {
            ev.iter()
                .filter_map(|e| {
                    setc_zeno_bound(
                        h,
                        norm_a,
                        scenario.trigger.beta,
                        scenario.trigger.sigma,
                        e.time,
                    )
                    .ok()
                })
                .collect()
        })
        .collect();
    let min_inter_event_times = traj.min_inter_event_times();
    let detc_zeno_bounds: Vec<Option<T>> = match (&scenario.dynamic, scenario.mode) {
        (Some(d), TriggerMode::Detc) => (0..m)
            .map(|i| {
                detc_zeno_bound(
                    scenario.trigger.sigma,
                    d.phi_cap[i],
                    d.theta[i],
                    h_estimates[i],
                )
                .ok()
            })
            .collect(),
        _ => vec![None; m],
    };
    let detc_bound_violations = (0..m)
        .filter(|&i| matches!((min_inter_event_times[i], detc_zeno_bounds[i]), (Some(gap), Some(tau)) if gap < tau))
        .collect();
    let (diverged, termination_time) = match traj.termination {
        Termination::Completed => (false, traj.final_time()),
        Termination::Diverged { time, .. } => (true, time),
    };

    Ok(AnalysisReport {
        mode: traj.mode,
        times: traj.times.clone(),
        tilde_x_norms,
        hull_residuals,
        final_hull_residuals,
        lyapunov_v1: lyap,
        envelope,
        envelope_values,
        envelope_ratio_max,
        trigger_bounds,
        trigger_counts: traj.trigger_counts(),
        min_inter_event_times,
        h_estimates,
        setc_zeno_bounds,
        detc_zeno_bounds,
        detc_bound_violations,
        diverged,
        termination_time,
        phi_min: traj.phi_min,
        phi_bound_slack: traj.phi_bound_slack,
    })
}

/// Relative imbalance of the two sides of the static inter-event equation
/// at `τ`; used to audit [`setc_zeno_bound`].
pub fn setc_zeno_residual(h: f64, norm_a: f64, beta: f64, sigma: f64, t_k: f64, tau: f64) -> f64 {
    let lhs = beta * (-sigma * (t_k + tau)).exp();
    let rhs = (h / norm_a * (norm_a * tau).exp_m1()).powi(2);
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn tilde_x_examples() {
        let chi = DMatrix::from_element(1, 1, 1.0);
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert_eq!(tilde_x(&x, &chi)[0], 1.0);
        let chi2 = DMatrix::from_row_slice(1, 2, &[0.25, 0.75]);
        let at_combo = DMatrix::from_row_slice(1, 3, &[3.0, 0.0, 4.0]);
        assert_eq!(tilde_x(&at_combo, &chi2)[0], 0.0);
    }

    #[test]
    fn hull_examples() {
        let leaders = DMatrix::from_column_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(hull_distance(&v(&[0.0, 0.0]), &leaders), 0.0);
        assert_eq!(hull_distance(&v(&[0.5, 0.0]), &leaders), 0.0);
        assert_relative_eq!(
            hull_distance(&v(&[0.5, 1.0]), &leaders),
            1.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            hull_distance(&v(&[2.0, 0.0]), &leaders),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn triangle_hull() {
        let tri = DMatrix::from_column_slice(2, 3, &[0.0, 0.0, 2.0, 0.0, 0.0, 2.0]);
        assert_eq!(hull_distance(&v(&[0.5, 0.5]), &tri), 0.0);
        assert_relative_eq!(
            hull_distance(&v(&[2.0, 2.0]), &tri),
            2f64.sqrt(),
            epsilon = 1e-14
        );
        assert_relative_eq!(hull_distance(&v(&[-1.0, 1.0]), &tri), 1.0, epsilon = 1e-14);
        // lifted out of the plane
        let tri3 = DMatrix::from_column_slice(3, 3, &[0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
        assert_relative_eq!(
            hull_distance(&v(&[0.5, 0.5, 3.0]), &tri3),
            3.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn square_hull_matches_geometry() {
        let sq = DMatrix::from_column_slice(2, 4, &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        assert!(hull_distance(&v(&[0.3, 0.6]), &sq) < 1e-8);
        assert_relative_eq!(hull_distance(&v(&[2.0, 0.5]), &sq), 1.0, epsilon = 1e-8);
        assert_relative_eq!(
            hull_distance(&v(&[2.0, 2.0]), &sq),
            2f64.sqrt(),
            epsilon = 1e-8
        );
    }

    #[test]
    fn simplex_projection_lands_on_simplex() {
        let p = project_simplex(&v(&[0.9, 0.8, -3.0, 0.1]));
        assert_relative_eq!(p.sum(), 1.0, epsilon = 1e-15);
        assert!(p.iter().all(|&x| x >= 0.0));
        assert_relative_eq!(p[0] - p[1], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn lyapunov_examples() {
        let r = DMatrix::<f64>::identity(2, 2);
        assert_eq!(lyapunov_v1(&v(&[0.0, 0.0]), &v(&[1.0]), &r), 0.0);
        assert_eq!(lyapunov_v1(&v(&[1.0, 0.0]), &v(&[1.0]), &r), 1.0);
    }

    #[test]
    fn envelope_examples() {
        let p = EnvelopeParams {
            k_w: 2.0,
            sigma: 1.0,
            m: 4.0,
            beta: 0.5,
            psi0: 3.0,
        };
        assert_eq!(detc_envelope(&p, 0.0), 3.0);
        let e1 = (-2.0f64).exp();
        let expected = e1 * 3.0 + 2.0 * ((-1.0f64).exp() - e1);
        assert_relative_eq!(detc_envelope(&p, 1.0), expected, epsilon = 1e-15);
        let pure = EnvelopeParams { beta: 0.0, ..p };
        assert_relative_eq!(
            detc_envelope(&pure, 1.5),
            3.0 * (-3.0f64).exp(),
            epsilon = 1e-15
        );
        let equal = EnvelopeParams { sigma: 2.0, ..p };
        assert_relative_eq!(
            detc_envelope(&equal, 1.0),
            e1 * 3.0 + 2.0 * e1,
            epsilon = 1e-15
        );
        // the two branches join continuously
        let near = EnvelopeParams {
            sigma: 2.0 + 1e-7,
            ..p
        };
        assert_relative_eq!(
            detc_envelope(&near, 1.0),
            detc_envelope(&equal, 1.0),
            epsilon = 1e-6
        );
    }

    #[test]
    fn setc_bound_unit_point() {
        let tau = setc_zeno_bound(1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(tau, 0.562_399_148_645_923_7, epsilon = 1e-12);
        assert!(setc_zeno_residual(1.0, 1.0, 1.0, 1.0, 0.0, tau) < 1e-12);
        // logarithmic form
        let log_form = (1.0 + (-tau).exp().sqrt()).ln();
        assert_relative_eq!(tau, log_form, epsilon = 1e-12);
    }

    #[test]
    fn setc_bound_limits() {
        assert!(setc_zeno_bound(1.0, 1.0, 1e-12, 1.0, 0.0).unwrap() < 1e-5);
        assert!(setc_zeno_bound(1e9, 1.0, 1.0, 1.0, 0.0).unwrap() < 1e-8);
        assert!(setc_zeno_bound(0.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn detc_bound_examples() {
        assert_relative_eq!(
            detc_zeno_bound(1.0, 1.0, 1.0, 1.0).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
        assert!(detc_zeno_bound(1.0, 1e-12, 1.0, 1.0).unwrap() < 1e-11);
        assert!(detc_zeno_bound(1.0, 1.0, 1.0, 1e8).unwrap() < 1e-15);
    }
}
