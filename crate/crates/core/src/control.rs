//! Riccati-based gain synthesis and the certificate constants that bound
//! the trigger parameters.
//!
//! Two scalars share the Greek letter ς in the literature this follows; here
//! `varsigma_r` weights the Riccati term `R B Bᵀ R`, and `varsigma_t` is the
//! decay margin `η λ_min(Ψ) − v₁` left after Young's inequality.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{DirectedNetwork, GroundedMatrix};
use crate::linalg;
use crate::scalar::{lit, to_f64, Real};

/// Newton–Kleinman stops once the Frobenius residual drops below this,
/// relative to `max(1, ‖Q‖_F)`.
pub const RICCATI_TOLERANCE: f64 = 1e-10;
pub const RICCATI_MAX_ITERATIONS: usize = 100;

/// Converged Riccati solution and its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution<T: Real> {
    pub r: DMatrix<T>,
    pub iterations: usize,
    /// `λ_max(AᵀR + RA − ς RBBᵀR + ς I)`; at most `−δ/2` when accepted.
    pub certificate: T,
}

fn check_dims<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<()> {
    if a.nrows() == 0 || a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "A must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != a.nrows() || b.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "B must have {} rows and at least one column, got {}x{}",
            a.nrows(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// Hautus test restricted to the closed right half-plane: every eigenvalue
/// `λ` of `A` with `Re λ >= 0` must satisfy `rank [A − λI, B] = n`.
pub fn check_stabilizable<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<()> {
    check_dims(a, b)?;
    let n = a.nrows();
    let p = b.ncols();
    let scale = linalg::spectral_norm(a).max(T::one());
    for z in linalg::eigenvalues(a) {
        if z.re < -scale * lit(1e-12) {
            continue;
        }
        // [A − λI, B] over ℂ as a real 2n × 2(n+p) block matrix
        let mut h = DMatrix::<T>::zeros(2 * n, 2 * (n + p));
        for r in 0..n {
            for c in 0..n {
                let diag = if r == c { T::one() } else { T::zero() };
                let v = a[(r, c)] - z.re * diag;
                h[(r, c)] = v;
                h[(n + r, n + c)] = v;
                h[(r, n + c)] = z.im * diag;
                h[(n + r, c)] = -z.im * diag;
            }
            for c in 0..p {
                h[(r, 2 * n + c)] = b[(r, c)];
                h[(n + r, 2 * n + p + c)] = b[(r, c)];
            }
        }
        if linalg::numerical_rank(&h) < 2 * n {
            return Err(Error::NotStabilizable {
                re: to_f64(z.re),
                im: to_f64(z.im),
            });
        }
    }
    Ok(())
}

/// `AᵀR + RA − ς RBBᵀR + ς I`
pub fn riccati_inequality_matrix<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    r: &DMatrix<T>,
    varsigma: T,
) -> DMatrix<T> {
    let n = a.nrows();
    let rb = r * b;
    a.transpose() * r + r * a - (&rb * rb.transpose()) * varsigma
        + DMatrix::identity(n, n) * varsigma
}

/// Solves `AᵀR + RA − ς RBBᵀR + (ς + δ) I = 0` by Newton–Kleinman, so that
/// the strict Riccati inequality holds with margin `δ`.
///
/// The initial stabilizing iterate comes from Bass's shifted Lyapunov
/// equation; every Newton step is one Lyapunov solve.
pub fn solve_riccati<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    varsigma: T,
    delta: T,
) -> Result<RiccatiSolution<T>> {
    check_dims(a, b)?;
    if !(varsigma > T::zero()) || !varsigma.is_finite() {
        return Err(Error::param("varsigma_r", "must be positive"));
    }
    if !(delta >= T::zero()) || !delta.is_finite() {
        return Err(Error::param("delta", "must be nonnegative"));
    }
    check_stabilizable(a, b)?;

    let n = a.nrows();
    let eye = DMatrix::<T>::identity(n, n);
    let g = (b * b.transpose()) * varsigma;
    let q = &eye * (varsigma + delta);

    // Bass: (A + ζI)Z + Z(A + ζI)ᵀ = 2BBᵀ with ζ beyond the spectral radius
    let zeta = a.norm() + T::one();
    let shifted = a + &eye * zeta;
    let bbt2 = (b * b.transpose()) * lit::<T>(2.0);
    let z = linalg::solve_lyapunov(&(-shifted.transpose()), &bbt2).ok_or(
        Error::RiccatiNonConvergence {
            iterations: 0,
            residual: f64::INFINITY,
        },
    )?;
    let z_inv = z
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| z.pseudo_inverse(lit(1e-12)).expect("pseudo-inverse"));
    let mut r = linalg::symmetrize(&(z_inv / varsigma));
    let start_abscissa = linalg::spectral_abscissa(&(a - &g * &r));
    if start_abscissa >= T::zero() {
        return Err(Error::RiccatiNonConvergence {
            iterations: 0,
            residual: to_f64(start_abscissa),
        });
    }

    let tol = q.norm().max(T::one()) * lit(RICCATI_TOLERANCE);
    let residual = |r: &DMatrix<T>| (a.transpose() * r + r * a - r * &g * r + &q).norm();
    let mut res = residual(&r);
    let mut iterations = 0;
    while res > tol {
        if iterations == RICCATI_MAX_ITERATIONS {
            return Err(Error::RiccatiNonConvergence {
                iterations,
                residual: to_f64(res),
            });
        }
        let closed = a - &g * &r;
        let rhs = &q + &r * &g * &r;
        r = linalg::solve_lyapunov(&closed, &rhs).ok_or(Error::RiccatiNonConvergence {
            iterations,
            residual: to_f64(res),
        })?;
        iterations += 1;
        let next = residual(&r);
        if !next.is_finite() {
            return Err(Error::RiccatiNonConvergence {
                iterations,
                residual: f64::INFINITY,
            });
        }
        res = next;
    }

    let certificate = linalg::sym_max_eigenvalue(&riccati_inequality_matrix(a, b, &r, varsigma));
    let bound = -delta * lit(0.5);
    let slack = tol * lit(10.0);
    if certificate > bound + slack || linalg::sym_min_eigenvalue(&r) <= T::zero() {
        return Err(Error::RiccatiCertificate {
            residual: to_f64(certificate),
            bound: to_f64(bound),
        });
    }
    Ok(RiccatiSolution {
        r,
        iterations,
        certificate,
    })
}

/// `K = BᵀR`
pub fn feedback_gain<T: Real>(r: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    b.transpose() * r
}

/// `I_m ⊗ A − M ⊗ (BK)`, the error-free closed-loop matrix for `x̃`.
pub fn closed_loop_matrix<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    k: &DMatrix<T>,
    m: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    check_dims(a, b)?;
    if k.nrows() != b.ncols() || k.ncols() != a.nrows() {
        return Err(Error::Dimension(format!(
            "K must be {}x{}, got {}x{}",
            b.ncols(),
            a.nrows(),
            k.nrows(),
            k.ncols()
        )));
    }
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension("M must be square".into()));
    }
    let eye = DMatrix::<T>::identity(m.nrows(), m.nrows());
    Ok(eye.kronecker(a) - m.kronecker(&(b * k)))
}

/// `χ_ij`, the i-th entry of `M⁻¹ B_oj 1_m`, as an `m × (N−m)` matrix.
pub fn chi_coefficients<T: Real>(
    gm: &GroundedMatrix<T>,
    net: &DirectedNetwork<T>,
) -> Result<DMatrix<T>> {
    if gm.matrix.nrows() != net.followers() {
        return Err(Error::Dimension(
            "grounded matrix does not match the network".into(),
        ));
    }
    // B_oj 1_m is column j of the coupling matrix
    linalg::solve(&gm.matrix, net.coupling()).ok_or_else(|| {
        let sv = linalg::singular_values(&gm.matrix);
        Error::SingularGroundedMatrix(to_f64(*sv.last().unwrap()))
    })
}

/// How the Riccati weight `ς_R` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiccatiWeight<T> {
    /// `ς_R = η`, which keeps `A − λBK` Hurwitz for every eigenvalue `λ`
    /// of `M` since `Re λ >= η/2`.
    Eta,
    Fixed(T),
}

/// How the Young's-inequality weight `v₁` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YoungWeight<T> {
    /// `v₁ = η λ_min(Ψ) / 2`
    HalfMargin,
    Fixed(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignParams<T> {
    pub varsigma_r: RiccatiWeight<T>,
    pub delta: T,
    pub v1: YoungWeight<T>,
}

impl<T: Real> Default for DesignParams<T> {
    fn default() -> Self {
        Self {
            varsigma_r: RiccatiWeight::Eta,
            delta: lit(0.05),
            v1: YoungWeight::HalfMargin,
        }
    }
}

/// Certified feedback design for one network and one `(A, B)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GainDesign<T: Real> {
    pub r: DMatrix<T>,
    pub k: DMatrix<T>,
    pub varsigma_r: T,
    pub delta: T,
    pub v1: T,
    pub varsigma_t: T,
    /// `λ_max(Ψ² ⊗ (RBK)²)`
    pub rho1: T,
    /// Upper bound on every `k_i` for the static trigger.
    pub k_max: T,
    /// Largest `k` keeping `ϑ > 0` for the dynamic trigger.
    pub k_max_dynamic: T,
    pub riccati_certificate: T,
    pub riccati_iterations: usize,
    pub eta: T,
    pub psi_min: T,
    pub psi_max: T,
    /// `‖M‖₂`
    pub m_norm: T,
    /// Spectral abscissa of `I ⊗ A − M ⊗ BK`.
    pub closed_loop_abscissa: T,
}

impl<T: Real> GainDesign<T> {
    /// The tighter of the two trigger-parameter caps.
    pub fn k_cap(&self) -> T {
        self.k_max.min(self.k_max_dynamic)
    }

    /// `λ_max(Ψ ⊗ R)`
    pub fn lyapunov_weight_max(&self) -> T {
        self.psi_max * linalg::sym_max_eigenvalue(&self.r)
    }
}

/// `ρ₁ = λ_max(Ψ² ⊗ (RBK)²)`. `RBK` is symmetric positive semidefinite, so the
/// Kronecker spectrum is the product of the factor spectra.
pub fn rho1<T: Real>(psi: &DVector<T>, r: &DMatrix<T>, b: &DMatrix<T>, k: &DMatrix<T>) -> T {
    let rbk = r * b * k;
    let sq = &rbk * &rbk;
    let psi_max = psi.max();
    psi_max * psi_max * linalg::sym_max_eigenvalue(&sq)
}

/// `ς_T v₁ / (ρ₁ ‖M‖ + v₁ ς_T)`
pub fn k_max_bound<T: Real>(varsigma_t: T, v1: T, rho1: T, m_norm: T) -> T {
    varsigma_t * v1 / (rho1 * m_norm + v1 * varsigma_t)
}

/// Supremum of `k` for which `ϑ(k) > 0`:
/// `v₁ ς_T / (‖M‖² (ρ₁ + v₁ ς_T))`.
pub fn k_max_dynamic_bound<T: Real>(varsigma_t: T, v1: T, rho1: T, m_norm: T) -> T {
    v1 * varsigma_t / (m_norm * m_norm * (rho1 + v1 * varsigma_t))
}

/// Synthesizes `R`, `K = BᵀR` and all certificate constants.
pub fn design_gain<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    gm: &GroundedMatrix<T>,
    params: &DesignParams<T>,
) -> Result<GainDesign<T>> {
    check_dims(a, b)?;
    let varsigma_r = match params.varsigma_r {
        RiccatiWeight::Eta => gm.eta,
        RiccatiWeight::Fixed(v) => v,
    };
    let sol = solve_riccati(a, b, varsigma_r, params.delta)?;
    let k = feedback_gain(&sol.r, b);

    let closed = closed_loop_matrix(a, b, &k, &gm.matrix)?;
    let closed_loop_abscissa = linalg::spectral_abscissa(&closed);
    if closed_loop_abscissa >= T::zero() {
        return Err(Error::ClosedLoopUnstable(to_f64(closed_loop_abscissa)));
    }

    let margin = gm.eta * gm.psi_min();
    let v1 = match params.v1 {
        YoungWeight::HalfMargin => margin * lit(0.5),
        YoungWeight::Fixed(v) => v,
    };
    if !(v1 > T::zero() && v1 < margin) {
        return Err(Error::param(
            "v1",
            format!("must lie in (0, {}), got {}", to_f64(margin), to_f64(v1)),
        ));
    }
    let varsigma_t = margin - v1;
    let rho1 = rho1(&gm.psi, &sol.r, b, &k);
    let m_norm = gm.norm();
    Ok(GainDesign {
        k_max: k_max_bound(varsigma_t, v1, rho1, m_norm),
        k_max_dynamic: k_max_dynamic_bound(varsigma_t, v1, rho1, m_norm),
        r: sol.r,
        k,
        varsigma_r,
        delta: params.delta,
        v1,
        varsigma_t,
        rho1,
        riccati_certificate: sol.certificate,
        riccati_iterations: sol.iterations,
        eta: gm.eta,
        psi_min: gm.psi_min(),
        psi_max: gm.psi_max(),
        m_norm,
        closed_loop_abscissa,
    })
}

/// Constants of the dynamic-trigger analysis, evaluated at the largest
/// configured trigger gain `k_gain`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerBounds<T> {
    pub k_max: T,
    pub k_gain: T,
    /// `ρ₁ / (v₁ (1 − k‖M‖²))`
    pub xi_max: T,
    /// `ς_T − ξ_max k ‖M‖²`
    pub vartheta: T,
    /// `min{ϑ / λ_max(Ψ ⊗ R), μ_min}`
    pub k_w: T,
}

/// Evaluates `ξ_max`, `ϑ` and `k_w` for trigger gain `k_gain` and smallest
/// decay rate `mu_min` of the dynamic variables.
pub fn trigger_bounds<T: Real>(
    design: &GainDesign<T>,
    k_gain: T,
    mu_min: T,
) -> Result<TriggerBounds<T>> {
    if !(k_gain >= T::zero() && k_gain < design.k_max) {
        return Err(Error::param(
            "k",
            format!(
                "must lie in [0, k_max = {}), got {}",
                to_f64(design.k_max),
                to_f64(k_gain)
            ),
        ));
    }
    if !(mu_min > T::zero()) {
        return Err(Error::param("mu", "must be positive"));
    }
    let m2 = design.m_norm * design.m_norm;
    let denom = T::one() - k_gain * m2;
    if denom <= T::zero() {
        return Err(Error::param("k", "k ‖M‖² must stay below 1"));
    }
    let xi_max = design.rho1 / (design.v1 * denom);
    let vartheta = design.varsigma_t - xi_max * k_gain * m2;
    if vartheta <= T::zero() {
        return Err(Error::param(
            "k",
            format!(
                "dynamic-trigger margin vartheta = {} is not positive; use k below {}",
                to_f64(vartheta),
                to_f64(design.k_max_dynamic)
            ),
        ));
    }
    let k_w = (vartheta / design.lyapunov_weight_max()).min(mu_min);
    Ok(TriggerBounds {
        k_max: design.k_max,
        k_gain,
        xi_max,
        vartheta,
        k_w,
    })
}
