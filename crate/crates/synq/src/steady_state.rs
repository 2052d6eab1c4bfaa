//! Steady-state workload transforms, decomposition and moments.
//!
//! The joint transform of the stationary workload vector Z* satisfies
//!
//! ```text
//! phi_tilde(alpha) E e^{-alpha.Z*} = sum_{k<n} alpha_k f_k(tail_k) + alpha_n f_n,
//! ```
//!
//! with f_n = -E Y_n(1) constant and the f_k given by a backward recursion
//! whose denominators are sum(tail) - psi_k evaluated at the reverse
//! cumulative sums of the tail. The W-transform (differenced workloads,
//! the tandem view) is the Z-transform at the difference vector. For n = 2
//! a two-factor closed form provides an independent evaluation path, and for
//! general n the transform factors into n terms, one per queue level.
//!
//! Denominator zeros are removable in exact arithmetic; evaluations within
//! `NEAR_POLE` of one are rejected instead of patched so that root-solver
//! error cannot hide behind a silent limit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{reverse_cumsum, w_to_z, ValidatedModel};
use crate::psi::{psi1_second_derivative_closed, psi_root_tight};

/// Rejection radius around denominator zeros.
pub const NEAR_POLE: f64 = 1e-9;

/// One value of the f_k recursion.
#[derive(Debug, Clone, Serialize)]
pub struct FkValue {
    pub k: usize,
    pub alpha_tail: Vec<f64>,
    pub value: f64,
}

/// The n factors of the workload decomposition at a W-space point.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionFactors {
    pub factors: Vec<f64>,
    pub product: f64,
}

/// Evaluation space for the 2-d closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformSpace {
    Z,
    W,
}

fn check_z_space(alpha: &[f64]) -> Result<()> {
    let mut tail = 0.0;
    for (i, a) in alpha.iter().enumerate().rev() {
        tail += a;
        if tail < 0.0 {
            return Err(Error::Domain(format!(
                "Z-space requires sum_{{i>={}}} alpha_i >= 0, got {tail}",
                i + 1
            )));
        }
    }
    Ok(())
}

fn check_w_space(alpha: &[f64]) -> Result<()> {
    if let Some(a) = alpha.iter().find(|a| **a < 0.0) {
        return Err(Error::Domain(format!(
            "W-space requires alpha_i >= 0, got {a}"
        )));
    }
    Ok(())
}

/// All f_k values along the suffix chain of `alpha` (full length n);
/// out[k] holds f_k(alpha_{k+1}, ..., alpha_n) for k = 1..=n, out[0] unused.
fn suffix_f_values(model: &ValidatedModel, alpha: &[f64]) -> Result<Vec<f64>> {
    let n = model.n();
    let ey = model.mean_y();
    let mut fv = vec![0.0; n + 1];
    fv[n] = -ey[n - 1];
    for k in (1..n).rev() {
        let tail = &alpha[k..];
        if tail.iter().all(|&x| x == 0.0) {
            // 0/0 in the recursion; continuity gives -E Y_k(1).
            fv[k] = -ey[k - 1];
            continue;
        }
        let x = reverse_cumsum(tail);
        let root = psi_root_tight(model, k, &x)?;
        let den = x[0] - root;
        if den.abs() < NEAR_POLE {
            return Err(Error::NearPole {
                location: format!("f_{k} denominator at tail {tail:?}"),
                threshold: NEAR_POLE,
            });
        }
        let mut num = alpha[n - 1] * fv[n];
        for i in (k + 1)..n {
            num += alpha[i - 1] * fv[i];
        }
        fv[k] = num / den;
    }
    Ok(fv)
}

/// f_k of the recursion; `alpha_tail` is (alpha_{k+1}, ..., alpha_n) in
/// Z-space (reverse partial sums nonnegative), empty for k = n.
pub fn f(model: &ValidatedModel, k: usize, alpha_tail: &[f64]) -> Result<FkValue> {
    model.require_stable()?;
    let n = model.n();
    if k < 1 || k > n {
        return Err(Error::Domain(format!("f requires 1 <= k <= {n}, got {k}")));
    }
    if alpha_tail.len() != n - k {
        return Err(Error::Domain(format!(
            "f_{k} takes a tail of length {}, got {}",
            n - k,
            alpha_tail.len()
        )));
    }
    check_z_space(alpha_tail)?;
    let mut alpha = vec![0.0; n];
    alpha[k..].copy_from_slice(alpha_tail);
    let fv = suffix_f_values(model, &alpha)?;
    Ok(FkValue {
        k,
        alpha_tail: alpha_tail.to_vec(),
        value: fv[k],
    })
}

/// Joint transform E e^{-alpha.Z*} at a Z-space point.
pub fn lst_z(model: &ValidatedModel, alpha: &[f64]) -> Result<f64> {
    model.require_stable()?;
    if alpha.len() != model.n() {
        return Err(Error::Domain(format!(
            "expected {} coordinates, got {}",
            model.n(),
            alpha.len()
        )));
    }
    check_z_space(alpha)?;
    if alpha.iter().all(|&a| a == 0.0) {
        return Ok(1.0);
    }
    let tphi = model.phi_tilde(alpha)?;
    if tphi.abs() < NEAR_POLE {
        return Err(Error::NearPole {
            location: format!("phi_tilde at {alpha:?}"),
            threshold: NEAR_POLE,
        });
    }
    let fv = suffix_f_values(model, alpha)?;
    let num: f64 = (1..=model.n()).map(|k| alpha[k - 1] * fv[k]).sum();
    Ok(num / tphi)
}

/// Joint transform E e^{-alpha.W*} of the differenced (tandem) workloads at
/// a componentwise nonnegative point.
pub fn lst_w(model: &ValidatedModel, alpha: &[f64]) -> Result<f64> {
    if alpha.len() != model.n() {
        return Err(Error::Domain(format!(
            "expected {} coordinates, got {}",
            model.n(),
            alpha.len()
        )));
    }
    check_w_space(alpha)?;
    lst_z(model, &w_to_z(alpha))
}

/// d psi_1 / d alpha_2 at 0 for n = 2.
fn psi1_slope(model: &ValidatedModel) -> f64 {
    -model.mean_x()[1] / model.mean_x()[0]
}

/// Two-factor closed form for n = 2, in either space. The second factor is
/// 0/0 at alpha_2 = 0 and is evaluated by its continuity value 1 there.
pub fn lst_2d_closed(
    model: &ValidatedModel,
    alpha1: f64,
    alpha2: f64,
    space: TransformSpace,
) -> Result<f64> {
    model.require_stable()?;
    if model.n() != 2 {
        return Err(Error::Unsupported(format!(
            "closed form requires n = 2, model has n = {}",
            model.n()
        )));
    }
    if alpha2 < 0.0 {
        return Err(Error::Domain(format!("alpha_2 must be >= 0, got {alpha2}")));
    }
    // The Z form at (a1, a2) is the W form at (a1 + a2, a2).
    let a1 = match space {
        TransformSpace::Z => {
            if alpha1 < -alpha2 {
                return Err(Error::Domain(format!(
                    "Z-space requires alpha_1 >= -alpha_2, got {alpha1} < {}",
                    -alpha2
                )));
            }
            alpha1 + alpha2
        }
        TransformSpace::W => {
            if alpha1 < 0.0 {
                return Err(Error::Domain(format!(
                    "W-space requires alpha_1 >= 0, got {alpha1}"
                )));
            }
            alpha1
        }
    };
    if a1 == 0.0 && alpha2 == 0.0 {
        return Ok(1.0);
    }
    let root = psi_root_tight(model, 1, &[alpha2])?;
    let phi1p0 = -model.mean_x()[0];
    let denom = model.phi(&[a1, alpha2])?;
    if denom.abs() < NEAR_POLE {
        return Err(Error::NearPole {
            location: format!("phi({a1}, {alpha2})"),
            threshold: NEAR_POLE,
        });
    }
    let first = phi1p0 * (a1 - root) / denom;
    let second = if alpha2 == 0.0 {
        1.0
    } else {
        let d = alpha2 - root;
        if d.abs() < NEAR_POLE {
            return Err(Error::NearPole {
                location: format!("alpha_2 - psi_1 at alpha_2 = {alpha2}"),
                threshold: NEAR_POLE,
            });
        }
        (1.0 - psi1_slope(model)) * alpha2 / d
    };
    Ok(first * second)
}

/// The n-factor decomposition of E e^{-alpha.W*} at a W-space point.
///
/// Factor 1 is phi_1'(0)(alpha_1 - psi_1(suffix)) / phi(alpha); factor k
/// (2 <= k < n) is (E Y_k / E Y_{k-1}) (alpha_k - psi_k(suffix_{k+1})) /
/// (alpha_k - psi_{k-1}(suffix_k)); the last factor is the generalized
/// Pollaczek-Khinchine term in alpha_n. Removable 0/0 points at vanishing
/// suffixes take their continuity value 1.
pub fn decomposition(model: &ValidatedModel, alpha: &[f64]) -> Result<DecompositionFactors> {
    model.require_stable()?;
    let n = model.n();
    if alpha.len() != n {
        return Err(Error::Domain(format!(
            "expected {} coordinates, got {}",
            n,
            alpha.len()
        )));
    }
    check_w_space(alpha)?;
    if alpha.iter().all(|&a| a == 0.0) {
        return Ok(DecompositionFactors {
            factors: vec![1.0; n],
            product: 1.0,
        });
    }
    let ey = model.mean_y();
    let mut factors = Vec::with_capacity(n);

    let root1 = psi_root_tight(model, 1, &alpha[1..])?;
    let den = model.phi(alpha)?;
    if den.abs() < NEAR_POLE {
        return Err(Error::NearPole {
            location: format!("phi at {alpha:?}"),
            threshold: NEAR_POLE,
        });
    }
    factors.push(-model.mean_x()[0] * (alpha[0] - root1) / den);

    for k in 2..n {
        if alpha[k - 1..].iter().all(|&a| a == 0.0) {
            factors.push(1.0);
            continue;
        }
        let ratio = ey[k - 1] / ey[k - 2];
        let num_root = psi_root_tight(model, k, &alpha[k..])?;
        let den_root = psi_root_tight(model, k - 1, &alpha[k - 1..])?;
        let den = alpha[k - 1] - den_root;
        if den.abs() < NEAR_POLE {
            return Err(Error::NearPole {
                location: format!("factor {k} denominator at {alpha:?}"),
                threshold: NEAR_POLE,
            });
        }
        factors.push(ratio * (alpha[k - 1] - num_root) / den);
    }

    let an = alpha[n - 1];
    if an == 0.0 {
        factors.push(1.0);
    } else {
        let ratio = ey[n - 1] / ey[n - 2];
        let root = psi_root_tight(model, n - 1, &[an])?;
        let den = an - root;
        if den.abs() < NEAR_POLE {
            return Err(Error::NearPole {
                location: format!("last factor denominator at alpha_n = {an}"),
                threshold: NEAR_POLE,
            });
        }
        factors.push(ratio * an / den);
    }

    let product = factors.iter().product();
    Ok(DecompositionFactors { factors, product })
}

/// One compound-Poisson part of a subordinator exponent, kept for the
/// residual-lifetime descriptor of the mixture representation.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualPart {
    pub rate: f64,
    pub mean_jump: f64,
}

/// Handle on a one-dimensional subordinator exponent
/// `xi(beta) = b beta + int (1 - e^{-beta u}) mu(du)`.
#[derive(Debug, Clone, Serialize)]
pub struct SubordinatorExponent {
    /// Drift b.
    pub drift: f64,
    /// `int_0^inf mu(u, inf) du`; equals `sum_m rate_m mean_m` for
    /// compound-Poisson jumps.
    pub jump_tail_integral: f64,
    /// Component jump data backing the residual-lifetime density
    /// `mu(x, inf) / int mu(u, inf) du` (empty for numeric handles).
    pub parts: Vec<ResidualPart>,
}

impl SubordinatorExponent {
    /// Drift plus a single compound-Poisson stream with known jump mean.
    pub fn compound_poisson(drift: f64, rate: f64, mean_jump: f64) -> Self {
        SubordinatorExponent {
            drift,
            jump_tail_integral: rate * mean_jump,
            parts: vec![ResidualPart { rate, mean_jump }],
        }
    }

    /// The exponent of marginal coordinate i (1-based, 2 <= i <= n).
    pub fn marginal(model: &ValidatedModel, i: usize) -> Result<Self> {
        if i < 2 || i > model.n() {
            return Err(Error::Domain(format!(
                "marginal subordinator exponent needs 2 <= i <= {}, got {i}",
                model.n()
            )));
        }
        let idx = i - 1;
        let parts: Vec<ResidualPart> = model
            .components()
            .iter()
            .filter_map(|c| {
                let m = c.law.mean(idx);
                (m > 0.0).then_some(ResidualPart {
                    rate: c.rate,
                    mean_jump: m,
                })
            })
            .collect();
        let jump_tail_integral = parts.iter().map(|p| p.rate * p.mean_jump).sum();
        Ok(SubordinatorExponent {
            drift: model.drift()[idx],
            jump_tail_integral,
            parts,
        })
    }

    /// psi_{n-1} viewed as a one-dimensional subordinator exponent. The mean
    /// is closed-form; the drift is the large-argument slope psi(B)/B
    /// extracted numerically at B = 1e6.
    pub fn from_psi_tail(model: &ValidatedModel) -> Result<Self> {
        model.require_stable()?;
        let n = model.n();
        let mean = -model.mean_x()[n - 1] / model.mean_y()[n - 2];
        const BIG: f64 = 1e6;
        let root = psi_root_tight(model, n - 1, &[BIG])?;
        let drift = (root / BIG).max(0.0);
        Ok(SubordinatorExponent {
            drift,
            jump_tail_integral: (mean - drift).max(0.0),
            parts: Vec::new(),
        })
    }

    /// xi'(0) = b + int mu(u, inf) du.
    pub fn mean(&self) -> f64 {
        self.drift + self.jump_tail_integral
    }
}

/// Mixture weights of xi(beta)/(beta xi'(0)): an atom at zero (drift part)
/// and the residual-lifetime distribution (jump part).
#[derive(Debug, Clone, Serialize)]
pub struct MixtureSpec {
    pub drift_weight: f64,
    pub jump_weight: f64,
    pub exponent: SubordinatorExponent,
}

pub fn mixture(xi: &SubordinatorExponent) -> Result<MixtureSpec> {
    let mean = xi.mean();
    if !mean.is_finite() {
        return Err(Error::InfiniteMean);
    }
    if mean <= 0.0 {
        return Err(Error::Domain(format!(
            "subordinator exponent mean must be > 0, got {mean}"
        )));
    }
    Ok(MixtureSpec {
        drift_weight: xi.drift / mean,
        jump_weight: xi.jump_tail_integral / mean,
        exponent: xi.clone(),
    })
}

/// Stationary means for n = 2: E W_1*, E W_2*, E Z_2* = E W_1* + E W_2*.
#[derive(Debug, Clone, Serialize)]
pub struct WorkloadMoments {
    pub mean_w1: f64,
    pub mean_w2: f64,
    pub mean_z2: f64,
}

/// Closed-form stationary means for n = 2, covariance-aware.
pub fn moments_w(model: &ValidatedModel) -> Result<WorkloadMoments> {
    model.require_stable()?;
    if model.n() != 2 {
        return Err(Error::Unsupported(format!(
            "workload moments are closed-form for n = 2 only, model has n = {}",
            model.n()
        )));
    }
    let mx = model.mean_x();
    let cov = model.cov();
    let mean_w1 = cov[0][0] / (-2.0 * mx[0]);
    let slope = psi1_slope(model);
    let second = psi1_second_derivative_closed(model);
    let mean_w2 =
        cov[1][1] / (-2.0 * mx[1]) - second / (2.0 * slope) - second / (2.0 * (1.0 - slope));
    if !mean_w1.is_finite() || !mean_w2.is_finite() {
        return Err(Error::InfiniteMoment(format!(
            "E W_1* = {mean_w1}, E W_2* = {mean_w2}"
        )));
    }
    Ok(WorkloadMoments {
        mean_w1,
        mean_w2,
        mean_z2: mean_w1 + mean_w2,
    })
}

/// One evaluation point of the two-sided distributional identity.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityPoint {
    pub alpha2: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheckReport {
    pub points: Vec<IdentityPoint>,
    pub max_gap: f64,
}

/// Pointwise comparison of eta_2(a)/(a eta_2'(0)) x LST(W_2*) against
/// psi_1(a)/(a psi_1'(0)) x LST(W_2 observed at emptiness of queue 1).
/// The left side goes through the Theorem-1 recursion, the right side
/// through the closed-form second factor, so the two routes are independent.
pub fn decomposition_identity_check(
    model: &ValidatedModel,
    alpha2_grid: &[f64],
) -> Result<IdentityCheckReport> {
    model.require_stable()?;
    if model.n() != 2 {
        return Err(Error::Unsupported(format!(
            "identity check requires n = 2, model has n = {}",
            model.n()
        )));
    }
    let mx = model.mean_x();
    let slope = psi1_slope(model);
    let mut points = Vec::with_capacity(alpha2_grid.len());
    let mut max_gap: f64 = 0.0;
    for &a2 in alpha2_grid {
        if a2 < 0.0 {
            return Err(Error::Domain(format!("alpha_2 must be >= 0, got {a2}")));
        }
        let (lhs, rhs) = if a2 == 0.0 {
            // Both sides are transforms of nonnegative variables at 0.
            (1.0, 1.0)
        } else {
            let eta2 = model.eta(&[a2])?;
            let root = psi_root_tight(model, 1, &[a2])?;
            let d = a2 - root;
            if d.abs() < NEAR_POLE {
                return Err(Error::NearPole {
                    location: format!("alpha_2 - psi_1 at alpha_2 = {a2}"),
                    threshold: NEAR_POLE,
                });
            }
            let lhs = eta2 / (a2 * mx[1]) * lst_w(model, &[0.0, a2])?;
            let rhs = root / (a2 * slope) * ((1.0 - slope) * a2 / d);
            (lhs, rhs)
        };
        let gap = (lhs - rhs).abs();
        max_gap = max_gap.max(gap);
        points.push(IdentityPoint {
            alpha2: a2,
            lhs,
            rhs,
            gap,
        });
    }
    Ok(IdentityCheckReport { points, max_gap })
}

/// Stationary means E Z_j* extracted from the transform by second-order
/// forward differences at 0 (the W-space domain has no negative side).
pub fn mean_z_by_differencing(model: &ValidatedModel) -> Result<Vec<f64>> {
    let n = model.n();
    let h = 1e-5;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut a1 = vec![0.0; n];
        let mut a2 = vec![0.0; n];
        a1[j] = h;
        a2[j] = 2.0 * h;
        let g1 = lst_z(model, &a1)?;
        let g2 = lst_z(model, &a2)?;
        out.push((3.0 - 4.0 * g1 + g2) / (2.0 * h));
    }
    Ok(out)
}

/// Stationary means E W_j* by the same differencing on the W-transform.
pub fn mean_w_by_differencing(model: &ValidatedModel) -> Result<Vec<f64>> {
    let n = model.n();
    let h = 1e-5;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut a1 = vec![0.0; n];
        let mut a2 = vec![0.0; n];
        a1[j] = h;
        a2[j] = 2.0 * h;
        let g1 = lst_w(model, &a1)?;
        let g2 = lst_w(model, &a2)?;
        out.push((3.0 - 4.0 * g1 + g2) / (2.0 * h));
    }
    Ok(out)
}
