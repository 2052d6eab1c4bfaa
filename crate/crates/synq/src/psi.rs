//! The implicit root psi_k and its derivatives at zero.
//!
//! For a stable model and a nonnegative tail (alpha_{k+1}, ..., alpha_n) that
//! is not all zero, `phi(beta, ..., beta, tail)` is convex in beta, negative
//! at beta = 0 and tends to +infinity, so it has a unique positive root
//! psi_k(tail). At the all-zero tail stability makes 0 the unique nonnegative
//! root. Everything downstream (the f-recursion, the closed forms, the
//! decomposition factors) is built on this root.

use crate::error::{Error, Result};
use crate::model::{reverse_cumsum, ValidatedModel};

/// Residual bound the solver must reach; sits well below the transform
/// tolerances so the division by (sum alpha - psi) stays accurate.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_BRACKET_DOUBLINGS: u32 = 64;

/// A root query for psi_k.
#[derive(Debug, Clone)]
pub struct PsiQuery {
    /// Index 1 <= k <= n-1.
    pub k: usize,
    /// Nonnegative tail (alpha_{k+1}, ..., alpha_n), length n-k.
    pub alpha_tail: Vec<f64>,
    /// Absolute residual bound on phi at the returned root.
    pub tolerance: f64,
    pub max_bracket_doublings: u32,
}

impl PsiQuery {
    pub fn new(k: usize, alpha_tail: impl Into<Vec<f64>>) -> Self {
        PsiQuery {
            k,
            alpha_tail: alpha_tail.into(),
            tolerance: DEFAULT_TOLERANCE,
            max_bracket_doublings: DEFAULT_MAX_BRACKET_DOUBLINGS,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

/// A solved root.
#[derive(Debug, Clone)]
pub struct PsiResult {
    /// The root beta >= 0.
    pub beta: f64,
    /// phi(beta, ..., beta, tail) actually achieved.
    pub residual: f64,
    /// Final enclosing interval (collapses to (0, 0) for the all-zero tail).
    pub bracket: (f64, f64),
}

/// Solve phi(beta, ..., beta, alpha_tail) = 0 for the unique root of Lemma-1
/// type. Brackets [0, 1], doubles the upper end until the sign flips, then
/// refines with safeguarded Brent steps.
pub fn psi(model: &ValidatedModel, query: &PsiQuery) -> Result<PsiResult> {
    model.require_stable()?;
    let n = model.n();
    if query.k < 1 || query.k >= n {
        return Err(Error::Domain(format!(
            "psi requires 1 <= k <= {}, got {}",
            n - 1,
            query.k
        )));
    }
    if query.alpha_tail.len() != n - query.k {
        return Err(Error::Domain(format!(
            "psi_{} takes a tail of length {}, got {}",
            query.k,
            n - query.k,
            query.alpha_tail.len()
        )));
    }
    if !(query.tolerance > 0.0) {
        return Err(Error::Domain("tolerance must be > 0".into()));
    }
    if let Some(x) = query.alpha_tail.iter().find(|x| **x < 0.0) {
        return Err(Error::Domain(format!(
            "psi requires a nonnegative tail, got {x}"
        )));
    }
    if query.alpha_tail.iter().all(|&x| x == 0.0) {
        // Stability forces the zero root.
        return Ok(PsiResult {
            beta: 0.0,
            residual: 0.0,
            bracket: (0.0, 0.0),
        });
    }
    solve(
        model,
        query.k,
        &query.alpha_tail,
        query.tolerance,
        query.max_bracket_doublings,
    )
}

/// Convenience wrapper returning only the root at default tolerance.
pub fn psi_value(model: &ValidatedModel, k: usize, alpha_tail: &[f64]) -> Result<f64> {
    Ok(psi(model, &PsiQuery::new(k, alpha_tail))?.beta)
}

/// Root at machine-limited residual. The transform code divides by
/// (sum alpha - psi), which for small arguments amplifies root error by
/// 1/|alpha|; solving to the rounding floor keeps finite-difference slopes
/// of the transforms accurate.
pub(crate) fn psi_root_tight(model: &ValidatedModel, k: usize, alpha_tail: &[f64]) -> Result<f64> {
    Ok(psi(
        model,
        &PsiQuery::new(k, alpha_tail).with_tolerance(1e-300),
    )?
    .beta)
}

/// The alpha_k value annihilating phi_tilde(0,...,0, alpha_k, tail):
/// psi_k at the reverse cumulative sums of the (signed, Z-space) tail,
/// minus the tail's total sum.
pub fn psi_shifted(model: &ValidatedModel, k: usize, alpha_tail: &[f64]) -> Result<f64> {
    let x = reverse_cumsum(alpha_tail);
    if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::Domain(format!(
            "psi_shifted requires nonnegative reverse partial sums, sum from \
             position {} is {v}",
            i + 1
        )));
    }
    let total: f64 = if x.is_empty() { 0.0 } else { x[0] };
    let root = psi(model, &PsiQuery::new(k, x))?.beta;
    Ok(root - total)
}

/// Gradient and Hessian of psi_k at the zero tail.
#[derive(Debug, Clone)]
pub struct PsiDerivatives {
    /// d psi_k / d alpha_j (0) = -E X_j(1) / E Y_k(1) for j = k+1..n.
    pub first: Vec<f64>,
    pub second: PsiSecondDerivative,
}

#[derive(Debug, Clone)]
pub enum PsiSecondDerivative {
    /// n = 2: the covariance-aware closed form.
    Closed(f64),
    /// General case: central finite differences on psi (step 1e-4).
    FiniteDifference(Vec<Vec<f64>>),
}

impl PsiSecondDerivative {
    /// The (i, j) entry regardless of representation.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            PsiSecondDerivative::Closed(v) => {
                assert_eq!((i, j), (0, 0));
                *v
            }
            PsiSecondDerivative::FiniteDifference(m) => m[i][j],
        }
    }
}

/// Step for the central differences of the general-k Hessian.
const FD_STEP: f64 = 1e-4;

/// psi_1''(0) for n = 2 from the model's first two moments and covariance.
pub(crate) fn psi1_second_derivative_closed(model: &ValidatedModel) -> f64 {
    let mx = model.mean_x();
    let cov = model.cov();
    let (ex1, ex2) = (mx[0], mx[1]);
    (cov[0][0] / ex1) * (ex2 / ex1) * (ex2 / ex1) + cov[1][1] / ex1
        - 2.0 * cov[0][1] * ex2 / (ex1 * ex1)
}

pub fn psi_derivatives_at_zero(model: &ValidatedModel, k: usize) -> Result<PsiDerivatives> {
    model.require_stable()?;
    let n = model.n();
    if k < 1 || k >= n {
        return Err(Error::Domain(format!(
            "psi derivatives require 1 <= k <= {}, got {k}",
            n - 1
        )));
    }
    let ey_k = model.mean_y()[k - 1];
    let first: Vec<f64> = (k..n).map(|j| -model.mean_x()[j] / ey_k).collect();

    let second = if n == 2 {
        PsiSecondDerivative::Closed(psi1_second_derivative_closed(model))
    } else {
        let m = n - k;
        let h = FD_STEP;
        let mut hess = vec![vec![0.0; m]; m];
        let eval = |tail: &[f64]| -> Result<f64> { solve_signed_tail(model, k, tail) };
        for i in 0..m {
            let mut up = vec![0.0; m];
            let mut down = vec![0.0; m];
            up[i] = h;
            down[i] = -h;
            // psi(0) = 0, so the diagonal needs only the two offsets.
            hess[i][i] = (eval(&up)? + eval(&down)?) / (h * h);
            for j in (i + 1)..m {
                let mut pp = vec![0.0; m];
                let mut pm = vec![0.0; m];
                let mut mp = vec![0.0; m];
                let mut mm = vec![0.0; m];
                pp[i] = h;
                pp[j] = h;
                pm[i] = h;
                pm[j] = -h;
                mp[i] = -h;
                mp[j] = h;
                mm[i] = -h;
                mm[j] = -h;
                let v = (eval(&pp)? - eval(&pm)? - eval(&mp)? + eval(&mm)?) / (4.0 * h * h);
                hess[i][j] = v;
                hess[j][i] = v;
            }
        }
        PsiSecondDerivative::FiniteDifference(hess)
    };

    Ok(PsiDerivatives { first, second })
}

/// Root of phi(beta,...,beta,tail) = 0 for tails with (slightly) negative
/// entries, needed by the central differences. When phi(0,...,0,tail) > 0
/// the root is negative and the bracket grows downward instead.
fn solve_signed_tail(model: &ValidatedModel, k: usize, tail: &[f64]) -> Result<f64> {
    if tail.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let g0 = eval_phi(model, k, tail, 0.0);
    if g0 == 0.0 {
        return Ok(0.0);
    }
    if g0 < 0.0 {
        // Residual tolerance near machine precision: these roots feed second
        // differences that divide by FD_STEP^2.
        return Ok(solve(model, k, tail, 1e-15, DEFAULT_MAX_BRACKET_DOUBLINGS)?.beta);
    }
    // g(0) > 0: bracket downward.
    let mut lo = -FD_STEP;
    let mut doublings = 0;
    while eval_phi(model, k, tail, lo) >= 0.0 {
        lo *= 2.0;
        doublings += 1;
        if doublings > 20 {
            return Err(Error::BracketOverflow { doublings });
        }
    }
    let g = |b: f64| eval_phi(model, k, tail, b);
    let (beta, _residual, _bracket) = brent(&g, lo, 0.0, g(lo), g0, 1e-15);
    Ok(beta)
}

fn eval_phi(model: &ValidatedModel, k: usize, tail: &[f64], beta: f64) -> f64 {
    let n = model.n();
    let mut v = vec![0.0; n];
    v[..k].fill(beta);
    v[k..].copy_from_slice(tail);
    model.phi_unchecked(&v)
}

fn solve(
    model: &ValidatedModel,
    k: usize,
    tail: &[f64],
    tolerance: f64,
    max_doublings: u32,
) -> Result<PsiResult> {
    let g = |b: f64| eval_phi(model, k, tail, b);
    let lo = 0.0;
    let g_lo = g(lo);
    debug_assert!(g_lo < 0.0);
    let mut hi = 1.0;
    let mut g_hi = g(hi);
    let mut doublings = 0;
    while g_hi <= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > max_doublings {
            return Err(Error::BracketOverflow { doublings });
        }
        g_hi = g(hi);
    }
    let (beta, residual, bracket) = brent(&g, lo, hi, g_lo, g_hi, tolerance);
    Ok(PsiResult {
        beta,
        residual,
        bracket,
    })
}

/// Safeguarded Brent root refinement on a sign-changing bracket.
/// Runs until |f| <= tolerance or the bracket collapses to rounding width;
/// returns the best point, its residual, and the final bracket.
fn brent<F: Fn(f64) -> f64>(
    f: &F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    tolerance: f64,
) -> (f64, f64, (f64, f64)) {
    debug_assert!(fa * fb <= 0.0);
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..200 {
        if fb.abs() <= tolerance {
            break;
        }
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5e-16;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 {
            break;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Secant / inverse quadratic interpolation.
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else if xm > 0.0 {
            tol1
        } else {
            -tol1
        };
        fb = f(b);
    }

    let (lo, hi) = if b < c { (b, c) } else { (c, b) };
    (b, fb, (lo, hi))
}
