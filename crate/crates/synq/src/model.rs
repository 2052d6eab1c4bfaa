//! Input model and its Laplace exponents.
//!
//! The driving process is an n-dimensional Lévy process X where coordinate 1
//! is spectrally positive but not a subordinator and coordinates 2..n are
//! subordinators that are not identically zero. Jumps come from finitely many
//! compound-Poisson components; each component fires at its own Poisson rate
//! and adds one nonnegative n-dimensional jump vector, so dependence between
//! coordinates enters through shared jump epochs and joint jump laws. An
//! optional Brownian part (volatility `sigma`) acts on coordinate 1 only.
//!
//! With finite jump activity the Laplace exponent needs no compensator:
//!
//! ```text
//! phi(v) = -c.v + sigma^2 v_1^2 / 2 + sum_m rate_m (L_m(v) - 1),
//! ```
//!
//! where `L_m` is the joint Laplace transform of component m's jump vector.
//! All first and second moments of X(1) are available in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError, Violation};

/// Parametric description of the n-dimensional driving process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyModel {
    /// Dimension (number of parallel queues), at least 2.
    pub n: usize,
    /// Drift vector c; c_1 is unrestricted, c_i >= 0 for i >= 2.
    pub drift: Vec<f64>,
    /// Brownian volatility on coordinate 1 only.
    #[serde(default)]
    pub sigma: f64,
    /// Compound-Poisson jump components.
    pub components: Vec<JumpComponent>,
}

/// One Poisson stream of nonnegative n-dimensional jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpComponent {
    /// Poisson intensity (events per unit time), strictly positive.
    pub rate: f64,
    pub law: JumpLaw,
}

/// Joint law of a single jump vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpLaw {
    /// A fixed nonnegative vector.
    Deterministic { values: Vec<f64> },
    /// Independent per-coordinate marginals.
    Independent { marginals: Vec<Marginal> },
    /// `weights * E` for a single exponential driver E of the given rate;
    /// all coordinates move together (comonotone dependence).
    Comonotone { weights: Vec<f64>, rate: f64 },
}

/// Per-coordinate marginal for [`JumpLaw::Independent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Marginal {
    Zero,
    Deterministic { value: f64 },
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
}

impl Marginal {
    /// Laplace transform E e^{-v J} of the marginal.
    pub(crate) fn lst(&self, v: f64) -> f64 {
        match self {
            Marginal::Zero => 1.0,
            Marginal::Deterministic { value } => (-v * value).exp(),
            Marginal::Exponential { rate } => rate / (rate + v),
            Marginal::Erlang { shape, rate } => (rate / (rate + v)).powi(*shape as i32),
        }
    }

    pub(crate) fn mean(&self) -> f64 {
        match self {
            Marginal::Zero => 0.0,
            Marginal::Deterministic { value } => *value,
            Marginal::Exponential { rate } => 1.0 / rate,
            Marginal::Erlang { shape, rate } => f64::from(*shape) / rate,
        }
    }

    pub(crate) fn second_moment(&self) -> f64 {
        match self {
            Marginal::Zero => 0.0,
            Marginal::Deterministic { value } => value * value,
            Marginal::Exponential { rate } => 2.0 / (rate * rate),
            Marginal::Erlang { shape, rate } => {
                let k = f64::from(*shape);
                k * (k + 1.0) / (rate * rate)
            }
        }
    }

}

impl JumpLaw {
    /// Joint Laplace transform E e^{-v.J} of one jump vector.
    pub(crate) fn lst(&self, v: &[f64]) -> f64 {
        match self {
            JumpLaw::Deterministic { values } => {
                let s: f64 = values.iter().zip(v).map(|(d, vi)| d * vi).sum();
                (-s).exp()
            }
            JumpLaw::Independent { marginals } => marginals
                .iter()
                .zip(v)
                .map(|(m, vi)| m.lst(*vi))
                .product(),
            JumpLaw::Comonotone { weights, rate } => {
                let s: f64 = weights.iter().zip(v).map(|(w, vi)| w * vi).sum();
                rate / (rate + s)
            }
        }
    }

    /// E J_i for coordinate i (0-based).
    pub(crate) fn mean(&self, i: usize) -> f64 {
        match self {
            JumpLaw::Deterministic { values } => values[i],
            JumpLaw::Independent { marginals } => marginals[i].mean(),
            JumpLaw::Comonotone { weights, rate } => weights[i] / rate,
        }
    }

    /// E[J_i J_j] (0-based coordinates).
    pub(crate) fn cross_moment(&self, i: usize, j: usize) -> f64 {
        match self {
            JumpLaw::Deterministic { values } => values[i] * values[j],
            JumpLaw::Independent { marginals } => {
                if i == j {
                    marginals[i].second_moment()
                } else {
                    marginals[i].mean() * marginals[j].mean()
                }
            }
            JumpLaw::Comonotone { weights, rate } => {
                // E[(w_i E)(w_j E)] with E exponential: E E^2 = 2 / rate^2.
                weights[i] * weights[j] * 2.0 / (rate * rate)
            }
        }
    }
}

/// First and second moments of X(1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    /// E X_i(1).
    pub mean: Vec<f64>,
    /// Cov(X_i(1), X_j(1)).
    pub cov: Vec<Vec<f64>>,
    /// E Y_k(1) = sum_{i<=k} E X_i(1).
    pub cumulative_mean: Vec<f64>,
}

/// E Y_k(1) for all k plus the stability flag E Y_n(1) < 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub cumulative_mean: Vec<f64>,
    pub stable: bool,
}

/// Which transform coordinates an [`AlphaVector`] lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AlphaSpace {
    /// Arguments of E e^{-a.Z}; requires sum_{i=k..n} a_i >= 0 for every k.
    Z,
    /// Arguments of E e^{-a.W}; requires a_i >= 0 for every i.
    W,
}

/// A transform argument point together with its domain flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub space: AlphaSpace,
    pub values: Vec<f64>,
}

impl AlphaVector {
    /// Z-space point; every reverse partial sum must be nonnegative.
    pub fn z(values: Vec<f64>) -> Result<Self> {
        let mut tail = 0.0;
        for (i, a) in values.iter().enumerate().rev() {
            tail += a;
            if tail < 0.0 {
                return Err(Error::Domain(format!(
                    "Z-space requires sum_{{i>={}}} alpha_i >= 0, got {tail}",
                    i + 1
                )));
            }
        }
        Ok(AlphaVector {
            space: AlphaSpace::Z,
            values,
        })
    }

    /// W-space point; every coordinate must be nonnegative.
    pub fn w(values: Vec<f64>) -> Result<Self> {
        if let Some(a) = values.iter().find(|a| **a < 0.0) {
            return Err(Error::Domain(format!(
                "W-space requires alpha_i >= 0, got {a}"
            )));
        }
        Ok(AlphaVector {
            space: AlphaSpace::W,
            values,
        })
    }

    /// The Z-space argument this point corresponds to.
    ///
    /// W-space points map through successive differences, because
    /// sum_i a_i W_i = sum_i (a_i - a_{i+1}) Z_i.
    pub fn to_z_arguments(&self) -> Vec<f64> {
        match self.space {
            AlphaSpace::Z => self.values.clone(),
            AlphaSpace::W => w_to_z(&self.values),
        }
    }
}

/// Difference transform taking W-space arguments to Z-space arguments.
pub(crate) fn w_to_z(alpha_w: &[f64]) -> Vec<f64> {
    let n = alpha_w.len();
    (0..n)
        .map(|i| {
            if i + 1 < n {
                alpha_w[i] - alpha_w[i + 1]
            } else {
                alpha_w[i]
            }
        })
        .collect()
}

/// Reverse cumulative sums: out[j] = sum_{i>=j} a[i].
pub(crate) fn reverse_cumsum(a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    let mut s = 0.0;
    for (i, v) in a.iter().enumerate().rev() {
        s += v;
        out[i] = s;
    }
    out
}

/// A [`LevyModel`] that passed [`validate`], with moments precomputed.
#[derive(Debug, Clone)]
pub struct ValidatedModel {
    model: LevyModel,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    cumulative_mean: Vec<f64>,
}

/// Check every structural assumption; the error lists each violation found.
pub fn validate(model: LevyModel) -> Result<ValidatedModel> {
    let mut violations = Vec::new();
    let n = model.n;

    if n < 2 {
        violations.push(Violation::DimensionMismatch {
            what: "n".into(),
            expected: 2,
            found: n,
        });
        return Err(ValidationError { violations }.into());
    }
    if model.drift.len() != n {
        violations.push(Violation::DimensionMismatch {
            what: "drift".into(),
            expected: n,
            found: model.drift.len(),
        });
        return Err(ValidationError { violations }.into());
    }
    for (i, c) in model.drift.iter().enumerate() {
        if !c.is_finite() {
            violations.push(Violation::NonFiniteParameter(format!("drift[{}]", i + 1)));
        }
    }
    if !model.sigma.is_finite() || model.sigma < 0.0 {
        violations.push(Violation::NonFiniteParameter("sigma".into()));
    }

    // Which coordinates receive positive jump mass from some component.
    let mut has_mass = vec![false; n];
    for (ci, comp) in model.components.iter().enumerate() {
        if !comp.rate.is_finite() || comp.rate <= 0.0 {
            violations.push(Violation::InvalidRate {
                component: ci,
                rate: comp.rate,
            });
        }
        let dim = match &comp.law {
            JumpLaw::Deterministic { values } => values.len(),
            JumpLaw::Independent { marginals } => marginals.len(),
            JumpLaw::Comonotone { weights, .. } => weights.len(),
        };
        if dim != n {
            violations.push(Violation::DimensionMismatch {
                what: format!("component {ci} law"),
                expected: n,
                found: dim,
            });
            continue;
        }
        let mut any_nonzero = false;
        match &comp.law {
            JumpLaw::Deterministic { values } => {
                for (i, d) in values.iter().enumerate() {
                    if !d.is_finite() {
                        violations.push(Violation::NonFiniteParameter(format!(
                            "component {ci} values[{i}]"
                        )));
                    } else if *d < 0.0 {
                        violations.push(Violation::NotSpectrallyOneSided {
                            component: ci,
                            coordinate: i + 1,
                        });
                    } else if *d > 0.0 {
                        any_nonzero = true;
                        has_mass[i] = true;
                    }
                }
            }
            JumpLaw::Independent { marginals } => {
                for (i, m) in marginals.iter().enumerate() {
                    match m {
                        Marginal::Zero => {}
                        Marginal::Deterministic { value } => {
                            if !value.is_finite() {
                                violations.push(Violation::NonFiniteParameter(format!(
                                    "component {ci} marginal {i}"
                                )));
                            } else if *value < 0.0 {
                                violations.push(Violation::NotSpectrallyOneSided {
                                    component: ci,
                                    coordinate: i + 1,
                                });
                            } else if *value > 0.0 {
                                any_nonzero = true;
                                has_mass[i] = true;
                            }
                        }
                        Marginal::Exponential { rate } => {
                            if !rate.is_finite() || *rate <= 0.0 {
                                violations.push(Violation::InvalidLawParameter {
                                    component: ci,
                                    detail: format!("marginal {i}: rate {rate} must be > 0"),
                                });
                            } else {
                                any_nonzero = true;
                                has_mass[i] = true;
                            }
                        }
                        Marginal::Erlang { shape, rate } => {
                            if *shape == 0 || !rate.is_finite() || *rate <= 0.0 {
                                violations.push(Violation::InvalidLawParameter {
                                    component: ci,
                                    detail: format!(
                                        "marginal {i}: erlang shape {shape}, rate {rate}"
                                    ),
                                });
                            } else {
                                any_nonzero = true;
                                has_mass[i] = true;
                            }
                        }
                    }
                }
            }
            JumpLaw::Comonotone { weights, rate } => {
                if !rate.is_finite() || *rate <= 0.0 {
                    violations.push(Violation::InvalidLawParameter {
                        component: ci,
                        detail: format!("comonotone driver rate {rate} must be > 0"),
                    });
                }
                for (i, w) in weights.iter().enumerate() {
                    if !w.is_finite() {
                        violations.push(Violation::NonFiniteParameter(format!(
                            "component {ci} weights[{i}]"
                        )));
                    } else if *w < 0.0 {
                        violations.push(Violation::NotSpectrallyOneSided {
                            component: ci,
                            coordinate: i + 1,
                        });
                    } else if *w > 0.0 {
                        any_nonzero = true;
                        has_mass[i] = true;
                    }
                }
            }
        }
        if !any_nonzero {
            violations.push(Violation::EmptyJumpLaw { component: ci });
        }
    }

    // X_1 must not be a subordinator: with finite activity and nonnegative
    // jumps this is exactly sigma > 0 or c_1 < 0.
    if model.sigma == 0.0 && model.drift[0] >= 0.0 {
        violations.push(Violation::SubordinatorFirstCoordinate);
    }
    for i in 1..n {
        if model.drift[i] < 0.0 {
            violations.push(Violation::NegativeSubordinatorDrift { coordinate: i + 1 });
        }
        if model.drift[i] == 0.0 && !has_mass[i] {
            violations.push(Violation::ZeroSubordinator { coordinate: i + 1 });
        }
    }

    if !violations.is_empty() {
        return Err(ValidationError { violations }.into());
    }

    let mut mean = vec![0.0; n];
    let mut cov = vec![vec![0.0; n]; n];
    for (i, m) in mean.iter_mut().enumerate() {
        *m = model.drift[i]
            + model
                .components
                .iter()
                .map(|c| c.rate * c.law.mean(i))
                .sum::<f64>();
    }
    for i in 0..n {
        for j in 0..n {
            cov[i][j] = model
                .components
                .iter()
                .map(|c| c.rate * c.law.cross_moment(i, j))
                .sum::<f64>();
        }
    }
    cov[0][0] += model.sigma * model.sigma;

    let mut cumulative_mean = vec![0.0; n];
    let mut s = 0.0;
    for (k, m) in mean.iter().enumerate() {
        s += m;
        cumulative_mean[k] = s;
    }

    Ok(ValidatedModel {
        model,
        mean,
        cov,
        cumulative_mean,
    })
}

impl ValidatedModel {
    pub fn n(&self) -> usize {
        self.model.n
    }

    pub fn drift(&self) -> &[f64] {
        &self.model.drift
    }

    pub fn sigma(&self) -> f64 {
        self.model.sigma
    }

    pub fn components(&self) -> &[JumpComponent] {
        &self.model.components
    }

    pub fn as_levy(&self) -> &LevyModel {
        &self.model
    }

    /// E X_i(1) for all i.
    pub fn mean_x(&self) -> &[f64] {
        &self.mean
    }

    /// E Y_k(1) for all k.
    pub fn mean_y(&self) -> &[f64] {
        &self.cumulative_mean
    }

    pub fn is_stable(&self) -> bool {
        *self.cumulative_mean.last().unwrap() < 0.0
    }

    pub(crate) fn require_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Unstable {
                mean_yn: *self.cumulative_mean.last().unwrap(),
            })
        }
    }

    /// Laplace exponent phi(v) for componentwise nonnegative v.
    pub fn phi(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v)?;
        if let Some(x) = v.iter().find(|x| **x < 0.0) {
            return Err(Error::Domain(format!("phi requires v_i >= 0, got {x}")));
        }
        Ok(self.phi_unchecked(v))
    }

    /// Closed-form exponent without the domain check. Light-tailed laws keep
    /// the formula valid for slightly negative arguments; only the finite
    /// difference machinery relies on that.
    pub(crate) fn phi_unchecked(&self, v: &[f64]) -> f64 {
        let dot: f64 = self
            .model
            .drift
            .iter()
            .zip(v)
            .map(|(c, vi)| c * vi)
            .sum();
        let mut out = 0.5 * self.model.sigma * self.model.sigma * v[0] * v[0] - dot;
        for comp in &self.model.components {
            out += comp.rate * (comp.law.lst(v) - 1.0);
        }
        out
    }

    /// Exponent of the cumulative process Y: phi applied to reverse
    /// cumulative sums of `alpha` (which must be a Z-space point).
    pub fn phi_tilde(&self, alpha: &[f64]) -> Result<f64> {
        self.check_dim(alpha)?;
        let v = reverse_cumsum(alpha);
        if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| **x < 0.0) {
            return Err(Error::Domain(format!(
                "phi_tilde requires sum_{{i>={}}} alpha_i >= 0, got {x}",
                i + 1
            )));
        }
        Ok(self.phi_unchecked(&v))
    }

    /// Exponent of X_1 + ... + X_k: phi with k leading betas.
    pub fn phi_k(&self, k: usize, beta: f64) -> Result<f64> {
        if k < 1 || k > self.model.n {
            return Err(Error::Domain(format!(
                "phi_k requires 1 <= k <= {}, got {k}",
                self.model.n
            )));
        }
        if beta < 0.0 {
            return Err(Error::Domain(format!("phi_k requires beta >= 0, got {beta}")));
        }
        let mut v = vec![0.0; self.model.n];
        v[..k].fill(beta);
        Ok(self.phi_unchecked(&v))
    }

    /// Exponent of the subordinator (X_2, ..., X_n): eta(tail) = -phi(0, tail).
    /// Nonnegative, nondecreasing and concave in each argument.
    pub fn eta(&self, alpha_tail: &[f64]) -> Result<f64> {
        if alpha_tail.len() != self.model.n - 1 {
            return Err(Error::Domain(format!(
                "eta takes {} arguments, got {}",
                self.model.n - 1,
                alpha_tail.len()
            )));
        }
        if let Some(x) = alpha_tail.iter().find(|x| **x < 0.0) {
            return Err(Error::Domain(format!("eta requires alpha_i >= 0, got {x}")));
        }
        let mut v = vec![0.0; self.model.n];
        v[1..].copy_from_slice(alpha_tail);
        Ok(-self.phi_unchecked(&v))
    }

    /// Closed-form means and covariances of X(1).
    pub fn moments(&self) -> MomentTable {
        MomentTable {
            mean: self.mean.clone(),
            cov: self.cov.clone(),
            cumulative_mean: self.cumulative_mean.clone(),
        }
    }

    pub fn stability(&self) -> StabilityReport {
        StabilityReport {
            cumulative_mean: self.cumulative_mean.clone(),
            stable: self.is_stable(),
        }
    }

    pub(crate) fn cov(&self) -> &[Vec<f64>] {
        &self.cov
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.model.n {
            return Err(Error::Domain(format!(
                "expected {} coordinates, got {}",
                self.model.n,
                v.len()
            )));
        }
        Ok(())
    }
}

/// Parse a model from its JSON file format and validate it.
///
/// Schema: `{"n": 2, "drift": [-1.0, 0.0], "sigma": 0.0, "components":
/// [{"rate": 1.0, "law": {"type": "independent", "marginals": [{"type":
/// "exponential", "rate": 4.0}, {"type": "zero"}]}}]}`. Unknown fields are
/// rejected.
pub fn model_from_json(json: &str) -> Result<ValidatedModel> {
    let model: LevyModel =
        serde_json::from_str(json).map_err(|e| Error::ModelFile(e.to_string()))?;
    validate(model)
}
