//! Monte Carlo simulation of the reflected workload vector.
//!
//! Pure-jump models (sigma = 0) are simulated exactly: between Poisson
//! epochs every cumulative net input Y_i is linear, so the reflection
//! Z_i = max(Z_i + slope dt, 0) and all time integrals have closed forms on
//! each segment — there is no discretization bias. Models with a Brownian
//! part fall back to an Euler grid with the discrete Lindley recursion
//! per coordinate; the known downward bias of the discretized reflected
//! infimum is controlled by the step-halving test in the property suite.
//!
//! Replications are independent: replication r draws from ChaCha stream r
//! of the master seed (the priority oracle uses streams offset by 2^32), so
//! results are bit-identical no matter how many threads run them. The
//! aggregation is an ordered reduction over replication index.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AlphaVector, JumpLaw, Marginal, ValidatedModel};

/// Stream offset separating priority-oracle draws from plain simulation.
const PRIORITY_STREAM_BASE: u64 = 1 << 32;

/// Grid mode keeps Brownian and jump draws on separate streams so that
/// refining the step reuses the identical driving randomness (the jump
/// draw count does not depend on the step, and Gaussian increments are
/// drawn at sub-step resolution and summed).
const GRID_BROWNIAN_STREAM_BASE: u64 = 1 << 33;
const GRID_JUMP_STREAM_BASE: u64 = 1 << 34;

/// Ordering tolerance in grid mode (event mode is exact).
const GRID_ORDER_TOL: f64 = 1e-12;

/// Simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Time horizon T > 0 per replication.
    pub horizon: f64,
    /// Euler step width, required when sigma > 0, ignored otherwise.
    #[serde(default)]
    pub step: Option<f64>,
    /// Number of independent replications, >= 1.
    pub replications: usize,
    /// Fraction of the horizon discarded before time averaging.
    #[serde(default = "default_burn_in")]
    pub burn_in_fraction: f64,
    /// Master seed; replication r uses ChaCha stream r.
    pub seed: u64,
    /// Transform arguments at which to estimate empirical LST values.
    #[serde(default)]
    pub alpha_grid: Vec<AlphaVector>,
}

fn default_burn_in() -> f64 {
    0.5
}

impl SimConfig {
    pub fn new(horizon: f64, replications: usize, seed: u64) -> Self {
        SimConfig {
            horizon,
            step: None,
            replications,
            burn_in_fraction: 0.5,
            seed,
            alpha_grid: Vec::new(),
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }

    pub fn with_alpha_grid(mut self, grid: Vec<AlphaVector>) -> Self {
        self.alpha_grid = grid;
        self
    }

    fn validate(&self, model: &ValidatedModel) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Config(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if self.replications < 1 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::Config(format!(
                "burn_in_fraction must be in [0, 1), got {}",
                self.burn_in_fraction
            )));
        }
        if model.sigma() > 0.0 {
            match self.step {
                Some(h) if h > 0.0 && h.is_finite() => {}
                _ => {
                    return Err(Error::Config(
                        "a positive step width is required when sigma > 0".into(),
                    ))
                }
            }
        }
        for a in &self.alpha_grid {
            if a.values.len() != model.n() {
                return Err(Error::Config(format!(
                    "alpha grid point {:?} has {} coordinates, model needs {}",
                    a.values,
                    a.values.len(),
                    model.n()
                )));
            }
        }
        Ok(())
    }
}

/// A point estimate with its across-replication standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LstEstimate {
    pub alpha: AlphaVector,
    pub value: f64,
    pub std_error: f64,
}

/// Aggregated simulation output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimate {
    /// Time-average workload per queue over the retained window.
    pub mean_z: Vec<Estimate>,
    /// Time-average differenced (tandem) workloads.
    pub mean_w: Vec<Estimate>,
    /// Ensemble average of Z(T) across replications.
    pub ensemble_mean_z: Vec<Estimate>,
    /// Empirical transform values at the configured grid.
    pub lst_values: Vec<LstEstimate>,
    /// Total count of Z_i > Z_{i+1} violations (must be zero).
    pub ordering_violations: u64,
    /// Smallest differenced workload seen at any checkpoint.
    pub min_w: f64,
    pub replications: usize,
    pub warnings: Vec<String>,
    /// Per-replication summaries, kept out of the JSON estimate (dumped
    /// separately as CSV on request).
    #[serde(skip)]
    rows: Vec<ReplicationRow>,
}

impl SimEstimate {
    /// Per-replication summaries in replication order.
    pub fn per_replication(&self) -> &[ReplicationRow] {
        &self.rows
    }
}

/// Per-replication summary row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRow {
    pub replication: u64,
    pub time_avg_z: Vec<f64>,
    pub ensemble_z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct RepSummary {
    time_avg_z: Vec<f64>,
    ensemble_z: Vec<f64>,
    lst: Vec<f64>,
    violations: u64,
    min_w: f64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_marginal<R: Rng>(m: &Marginal, rng: &mut R) -> f64 {
    match m {
        Marginal::Zero => 0.0,
        Marginal::Deterministic { value } => *value,
        Marginal::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
        Marginal::Erlang { shape, rate } => Gamma::new(f64::from(*shape), 1.0 / rate)
            .expect("validated shape/rate")
            .sample(rng),
    }
}

fn sample_jump<R: Rng>(law: &JumpLaw, rng: &mut R, out: &mut [f64]) {
    match law {
        JumpLaw::Deterministic { values } => out.copy_from_slice(values),
        JumpLaw::Independent { marginals } => {
            for (o, m) in out.iter_mut().zip(marginals) {
                *o = sample_marginal(m, rng);
            }
        }
        JumpLaw::Comonotone { weights, rate } => {
            let e = Exp::new(*rate).expect("validated rate").sample(rng);
            for (o, w) in out.iter_mut().zip(weights) {
                *o = w * e;
            }
        }
    }
}

/// Integral of max(z + b u, 0) over [u0, u1] (z >= 0, u0 <= u1).
fn seg_mean_integral(z: f64, b: f64, u0: f64, u1: f64) -> f64 {
    if u1 <= u0 {
        return 0.0;
    }
    let v0 = z + b * u0;
    let v1 = z + b * u1;
    if b >= 0.0 || v1 >= 0.0 {
        return 0.5 * (v0 + v1) * (u1 - u0);
    }
    if v0 <= 0.0 {
        return 0.0;
    }
    // Crosses zero inside the interval.
    v0 * v0 / (-2.0 * b)
}

/// Integrals of exp(-sum_i a_i max(z_i + b_i u, 0)) over [u0, u1], one per
/// argument vector. The segment is split at every coordinate's zero-hitting
/// time; inside each piece the exponent is linear in u.
fn seg_lst_integrals(
    z: &[f64],
    b: &[f64],
    u0: f64,
    u1: f64,
    alphas: &[Vec<f64>],
    out: &mut [f64],
    cuts: &mut Vec<f64>,
) {
    if u1 <= u0 || alphas.is_empty() {
        return;
    }
    cuts.clear();
    cuts.push(u0);
    for i in 0..z.len() {
        if b[i] < 0.0 && z[i] > 0.0 {
            let h = -z[i] / b[i];
            if h > u0 && h < u1 {
                cuts.push(h);
            }
        }
    }
    cuts.push(u1);
    cuts.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    for w in 0..cuts.len() - 1 {
        let (p, q) = (cuts[w], cuts[w + 1]);
        if q <= p {
            continue;
        }
        let mid = 0.5 * (p + q);
        for (gi, a) in alphas.iter().enumerate() {
            let mut aa = 0.0;
            let mut bb = 0.0;
            for i in 0..z.len() {
                if z[i] + b[i] * mid > 0.0 {
                    aa += a[i] * z[i];
                    bb += a[i] * b[i];
                }
            }
            let e0 = (-(aa + bb * p)).exp();
            out[gi] += if bb == 0.0 {
                (q - p) * e0
            } else {
                e0 * (-(-bb * (q - p)).exp_m1()) / bb
            };
        }
    }
}

/// Cumulative drift slopes of Y_i = sum_{j<=i} X_j.
fn y_slopes(model: &ValidatedModel) -> Vec<f64> {
    let mut out = Vec::with_capacity(model.n());
    let mut s = 0.0;
    for c in model.drift() {
        s += c;
        out.push(s);
    }
    out
}

struct EventEngine<'m> {
    model: &'m ValidatedModel,
    slopes: Vec<f64>,
    total_rate: f64,
    z_alphas: Vec<Vec<f64>>,
    horizon: f64,
    burn: f64,
}

impl<'m> EventEngine<'m> {
    fn new(model: &'m ValidatedModel, cfg: &SimConfig) -> Self {
        EventEngine {
            model,
            slopes: y_slopes(model),
            total_rate: model.components().iter().map(|c| c.rate).sum(),
            z_alphas: cfg.alpha_grid.iter().map(|a| a.to_z_arguments()).collect(),
            horizon: cfg.horizon,
            burn: cfg.burn_in_fraction * cfg.horizon,
        }
    }

    fn pick_component<R: Rng>(&self, rng: &mut R) -> usize {
        let mut r: f64 = rng.gen::<f64>() * self.total_rate;
        for (i, c) in self.model.components().iter().enumerate() {
            r -= c.rate;
            if r <= 0.0 {
                return i;
            }
        }
        self.model.components().len() - 1
    }

    fn run(&self, seed: u64, stream: u64, mut record: Option<&mut Vec<PathState>>) -> RepSummary {
        let n = self.model.n();
        let mut rng = stream_rng(seed, stream);
        let mut z = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut local = vec![0.0; n];
        let mut jump = vec![0.0; n];
        let mut int_z = vec![0.0; n];
        let mut int_lst = vec![0.0; self.z_alphas.len()];
        let mut cuts = Vec::with_capacity(n + 2);
        let mut violations = 0u64;
        let mut min_w = f64::INFINITY;
        let mut t = 0.0;
        let window = self.horizon - self.burn;

        if let Some(rec) = record.as_deref_mut() {
            rec.push(PathState {
                t,
                y: y.clone(),
                z: z.clone(),
                local_time: local.clone(),
            });
        }
        check_state(&z, &mut violations, &mut min_w, 0.0);

        loop {
            let dt = if self.total_rate > 0.0 {
                Exp::new(self.total_rate).expect("positive rate").sample(&mut rng)
            } else {
                f64::INFINITY
            };
            let seg_end = (t + dt).min(self.horizon);
            let seg = seg_end - t;
            let u0 = (self.burn - t).clamp(0.0, seg);
            if u0 < seg {
                for i in 0..n {
                    int_z[i] += seg_mean_integral(z[i], self.slopes[i], u0, seg);
                }
                seg_lst_integrals(&z, &self.slopes, u0, seg, &self.z_alphas, &mut int_lst, &mut cuts);
            }
            for i in 0..n {
                let end = z[i] + self.slopes[i] * seg;
                if end < 0.0 {
                    local[i] -= end;
                }
                z[i] = end.max(0.0);
                y[i] += self.slopes[i] * seg;
            }
            t = seg_end;
            check_state(&z, &mut violations, &mut min_w, 0.0);
            // Post-segment state (pre-jump): the record shows that local
            // time grew only while the coordinate sat at zero.
            if let Some(rec) = record.as_deref_mut() {
                rec.push(PathState {
                    t,
                    y: y.clone(),
                    z: z.clone(),
                    local_time: local.clone(),
                });
            }
            if t >= self.horizon {
                break;
            }
            let ci = self.pick_component(&mut rng);
            sample_jump(&self.model.components()[ci].law, &mut rng, &mut jump);
            let mut prefix = 0.0;
            for i in 0..n {
                prefix += jump[i];
                z[i] += prefix;
                y[i] += prefix;
            }
            check_state(&z, &mut violations, &mut min_w, 0.0);
            if let Some(rec) = record.as_deref_mut() {
                rec.push(PathState {
                    t,
                    y: y.clone(),
                    z: z.clone(),
                    local_time: local.clone(),
                });
            }
        }

        RepSummary {
            time_avg_z: int_z.iter().map(|v| v / window).collect(),
            ensemble_z: z,
            lst: int_lst.iter().map(|v| v / window).collect(),
            violations,
            min_w,
        }
    }
}

fn check_state(z: &[f64], violations: &mut u64, min_w: &mut f64, tol: f64) {
    let mut prev = 0.0;
    for &zi in z {
        if prev > zi + tol {
            *violations += 1;
        }
        *min_w = min_w.min(zi - prev);
        prev = zi;
    }
}

fn run_grid_replication(
    model: &ValidatedModel,
    cfg: &SimConfig,
    z_alphas: &[Vec<f64>],
    seed: u64,
    stream: u64,
    substeps: u32,
    mut record: Option<&mut Vec<PathState>>,
) -> RepSummary {
    let n = model.n();
    let h = cfg.step.expect("validated step");
    let steps = (cfg.horizon / h).round().max(1.0) as u64;
    let burn_steps = (cfg.burn_in_fraction * steps as f64).floor() as u64;
    let slopes = y_slopes(model);
    let sigma = model.sigma();
    let sub_sd = sigma * (h / f64::from(substeps)).sqrt();
    let mut brownian_rng = stream_rng(seed, GRID_BROWNIAN_STREAM_BASE + stream);
    let mut jump_rng = stream_rng(seed, GRID_JUMP_STREAM_BASE + stream);
    let total_rate: f64 = model.components().iter().map(|c| c.rate).sum();
    let mut z = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut local = vec![0.0; n];
    let mut jump = vec![0.0; n];
    let mut dy = vec![0.0; n];
    let mut sum_z = vec![0.0; n];
    let mut sum_lst = vec![0.0; z_alphas.len()];
    let mut count = 0u64;
    let mut violations = 0u64;
    let mut min_w = f64::INFINITY;
    let mut next_jump = if total_rate > 0.0 {
        Exp::new(total_rate)
            .expect("positive rate")
            .sample(&mut jump_rng)
    } else {
        f64::INFINITY
    };

    if let Some(rec) = record.as_deref_mut() {
        rec.push(PathState {
            t: 0.0,
            y: y.clone(),
            z: z.clone(),
            local_time: local.clone(),
        });
    }

    for step in 1..=steps {
        let step_end = step as f64 * h;
        let mut g = 0.0;
        for _ in 0..substeps {
            g += brownian_rng.sample::<f64, _>(StandardNormal);
        }
        let g = g * sub_sd;
        for d in dy.iter_mut() {
            *d = g;
        }
        // Bin the exact jump epochs into this step.
        while next_jump <= step_end {
            let ci = {
                let mut r: f64 = jump_rng.gen::<f64>() * total_rate;
                let mut idx = model.components().len() - 1;
                for (i, c) in model.components().iter().enumerate() {
                    r -= c.rate;
                    if r <= 0.0 {
                        idx = i;
                        break;
                    }
                }
                idx
            };
            sample_jump(&model.components()[ci].law, &mut jump_rng, &mut jump);
            let mut prefix = 0.0;
            for i in 0..n {
                prefix += jump[i];
                dy[i] += prefix;
            }
            next_jump += Exp::new(total_rate)
                .expect("positive rate")
                .sample(&mut jump_rng);
        }
        for i in 0..n {
            let inc = slopes[i] * h + dy[i];
            y[i] += inc;
            let end = z[i] + inc;
            if end < 0.0 {
                local[i] -= end;
            }
            z[i] = end.max(0.0);
        }
        check_state(&z, &mut violations, &mut min_w, GRID_ORDER_TOL);
        if step > burn_steps {
            count += 1;
            for i in 0..n {
                sum_z[i] += z[i];
            }
            for (gi, a) in z_alphas.iter().enumerate() {
                let s: f64 = a.iter().zip(&z).map(|(ai, zi)| ai * zi).sum();
                sum_lst[gi] += (-s).exp();
            }
        }
        if let Some(rec) = record.as_deref_mut() {
            rec.push(PathState {
                t: step_end,
                y: y.clone(),
                z: z.clone(),
                local_time: local.clone(),
            });
        }
    }

    let c = count.max(1) as f64;
    RepSummary {
        time_avg_z: sum_z.iter().map(|v| v / c).collect(),
        ensemble_z: z,
        lst: sum_lst.iter().map(|v| v / c).collect(),
        violations,
        min_w,
    }
}

fn run_replication(
    model: &ValidatedModel,
    cfg: &SimConfig,
    engine: &EventEngine<'_>,
    z_alphas: &[Vec<f64>],
    rep: u64,
) -> RepSummary {
    if model.sigma() == 0.0 {
        engine.run(cfg.seed, rep, None)
    } else {
        run_grid_replication(model, cfg, z_alphas, cfg.seed, rep, 1, None)
    }
}

#[cfg(feature = "parallel")]
fn collect_replications<F>(replications: usize, run: F) -> Vec<RepSummary>
where
    F: Fn(u64) -> RepSummary + Sync + Send,
{
    use rayon::prelude::*;
    (0..replications as u64).into_par_iter().map(run).collect()
}

#[cfg(not(feature = "parallel"))]
fn collect_replications<F>(replications: usize, run: F) -> Vec<RepSummary>
where
    F: Fn(u64) -> RepSummary + Sync + Send,
{
    (0..replications as u64).map(run).collect()
}

fn collect_replications_seq<F>(replications: usize, run: F) -> Vec<RepSummary>
where
    F: Fn(u64) -> RepSummary + Sync + Send,
{
    (0..replications as u64).map(run).collect()
}

fn mean_se(values: &[f64]) -> Estimate {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return Estimate {
            value: mean,
            std_error: 0.0,
        };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
    Estimate {
        value: mean,
        std_error: (var / r).sqrt(),
    }
}

fn aggregate(model: &ValidatedModel, cfg: &SimConfig, reps: Vec<RepSummary>) -> SimEstimate {
    let n = model.n();
    let col = |f: &dyn Fn(&RepSummary) -> f64| -> Vec<f64> { reps.iter().map(f).collect() };
    let mean_z: Vec<Estimate> = (0..n)
        .map(|i| mean_se(&col(&|r: &RepSummary| r.time_avg_z[i])))
        .collect();
    let mean_w: Vec<Estimate> = (0..n)
        .map(|i| {
            mean_se(&col(&|r: &RepSummary| {
                r.time_avg_z[i] - if i > 0 { r.time_avg_z[i - 1] } else { 0.0 }
            }))
        })
        .collect();
    let ensemble_mean_z: Vec<Estimate> = (0..n)
        .map(|i| mean_se(&col(&|r: &RepSummary| r.ensemble_z[i])))
        .collect();
    let lst_values: Vec<LstEstimate> = cfg
        .alpha_grid
        .iter()
        .enumerate()
        .map(|(gi, a)| {
            let e = mean_se(&col(&|r: &RepSummary| r.lst[gi]));
            LstEstimate {
                alpha: a.clone(),
                value: e.value,
                std_error: e.std_error,
            }
        })
        .collect();
    let ordering_violations = reps.iter().map(|r| r.violations).sum();
    let min_w = reps.iter().map(|r| r.min_w).fold(f64::INFINITY, f64::min);
    let rows = reps
        .iter()
        .enumerate()
        .map(|(i, r)| ReplicationRow {
            replication: i as u64,
            time_avg_z: r.time_avg_z.clone(),
            ensemble_z: r.ensemble_z.clone(),
        })
        .collect();
    let mut warnings = Vec::new();
    if !model.is_stable() {
        warnings.push(format!(
            "unstable model: E Y_n(1) = {} >= 0; steady-state comparison suppressed",
            model.mean_y().last().unwrap()
        ));
    }
    SimEstimate {
        mean_z,
        mean_w,
        ensemble_mean_z,
        lst_values,
        ordering_violations,
        min_w,
        replications: cfg.replications,
        warnings,
        rows,
    }
}

/// Simulate the reflected workload vector. Runs replications in parallel
/// when the `parallel` feature is enabled; the result is bit-identical to
/// [`simulate_sequential`] either way.
pub fn simulate(model: &ValidatedModel, cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.validate(model)?;
    let engine = EventEngine::new(model, cfg);
    let z_alphas = engine.z_alphas.clone();
    let reps = collect_replications(cfg.replications, |rep| {
        run_replication(model, cfg, &engine, &z_alphas, rep)
    });
    Ok(aggregate(model, cfg, reps))
}

/// Single-threaded fallback path (also the benchmark baseline).
pub fn simulate_sequential(model: &ValidatedModel, cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.validate(model)?;
    let engine = EventEngine::new(model, cfg);
    let z_alphas = engine.z_alphas.clone();
    let reps = collect_replications_seq(cfg.replications, |rep| {
        run_replication(model, cfg, &engine, &z_alphas, rep)
    });
    Ok(aggregate(model, cfg, reps))
}

/// State of one path at a recorded epoch; Z = Y + L componentwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathState {
    pub t: f64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub local_time: Vec<f64>,
}

/// Full record of one replication's path (event epochs or grid points).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub states: Vec<PathState>,
}

/// Re-run one replication (same stream as inside [`simulate`]) and record
/// its path.
pub fn simulate_path(model: &ValidatedModel, cfg: &SimConfig, replication: u64) -> Result<PathRecord> {
    cfg.validate(model)?;
    let mut states = Vec::new();
    if model.sigma() == 0.0 {
        let engine = EventEngine::new(model, cfg);
        engine.run(cfg.seed, replication, Some(&mut states));
    } else {
        let z_alphas: Vec<Vec<f64>> = cfg.alpha_grid.iter().map(|a| a.to_z_arguments()).collect();
        run_grid_replication(model, cfg, &z_alphas, cfg.seed, replication, 1, Some(&mut states));
    }
    Ok(PathRecord { states })
}

/// Differenced (tandem) trajectories W_j(t) = Z_j(t) - Z_{j-1}(t).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WTrajectories {
    pub points: Vec<(f64, Vec<f64>)>,
}

impl WTrajectories {
    /// Smallest W_j over all recorded epochs (nonnegative by the ordering
    /// theorem).
    pub fn min_w(&self) -> f64 {
        self.points
            .iter()
            .flat_map(|(_, w)| w.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

/// View a recorded parallel-system path as tandem workloads.
pub fn tandem_view(path: &PathRecord) -> WTrajectories {
    let points = path
        .states
        .iter()
        .map(|s| {
            let mut prev = 0.0;
            let w = s
                .z
                .iter()
                .map(|&z| {
                    let d = z - prev;
                    prev = z;
                    d
                })
                .collect();
            (s.t, w)
        })
        .collect();
    WTrajectories { points }
}

/// Event-driven preemptive-resume priority simulation (Remark-3 oracle).
///
/// Requires a compound-Poisson model with c_1 = -1, c_i = 0 for i >= 2 and
/// sigma = 0: a single unit-rate server serving n job classes, class i
/// preempting class j for i < j, class-i work arriving as jump coordinate i.
/// The reported `mean_z[j]` is the time-average total workload of classes
/// 1..=j+1, which matches the parallel system's Z in distribution.
pub fn priority_oracle(model: &ValidatedModel, cfg: &SimConfig) -> Result<SimEstimate> {
    if model.sigma() != 0.0 {
        return Err(Error::Unsupported(
            "priority oracle requires sigma = 0".into(),
        ));
    }
    if model.drift()[0] != -1.0 || model.drift()[1..].iter().any(|&c| c != 0.0) {
        return Err(Error::Unsupported(
            "priority oracle requires drift (-1, 0, ..., 0)".into(),
        ));
    }
    cfg.validate(model)?;
    let z_alphas: Vec<Vec<f64>> = cfg.alpha_grid.iter().map(|a| a.to_z_arguments()).collect();
    let reps = collect_replications(cfg.replications, |rep| {
        run_priority_replication(model, cfg, &z_alphas, rep)
    });
    Ok(aggregate(model, cfg, reps))
}

fn run_priority_replication(
    model: &ValidatedModel,
    cfg: &SimConfig,
    z_alphas: &[Vec<f64>],
    rep: u64,
) -> RepSummary {
    let n = model.n();
    let total_rate: f64 = model.components().iter().map(|c| c.rate).sum();
    let mut rng = stream_rng(cfg.seed, PRIORITY_STREAM_BASE + rep);
    let burn = cfg.burn_in_fraction * cfg.horizon;
    let window = cfg.horizon - burn;
    // Remaining work per class; the cumulative vector plays the role of Z.
    let mut v = vec![0.0; n];
    let mut cum = vec![0.0; n];
    let mut jump = vec![0.0; n];
    let mut int_v = vec![0.0; n];
    let mut int_lst = vec![0.0; z_alphas.len()];
    let mut cuts = Vec::with_capacity(n + 2);
    let slopes = vec![-1.0; n];
    let mut violations = 0u64;
    let mut min_w = f64::INFINITY;
    let mut t = 0.0;

    check_state(&cum, &mut violations, &mut min_w, 0.0);
    loop {
        let dt = if total_rate > 0.0 {
            Exp::new(total_rate).expect("positive rate").sample(&mut rng)
        } else {
            f64::INFINITY
        };
        let seg_end = (t + dt).min(cfg.horizon);
        let seg = seg_end - t;
        let u0 = (burn - t).clamp(0.0, seg);
        if u0 < seg {
            // While any class <= j holds work, the cumulative workload of
            // classes 1..=j depletes at unit rate: cum_j(u) = max(cum_j - u, 0).
            for i in 0..n {
                int_v[i] += seg_mean_integral(cum[i], -1.0, u0, seg);
            }
            seg_lst_integrals(&cum, &slopes, u0, seg, z_alphas, &mut int_lst, &mut cuts);
        }
        // Deplete lowest classes first (preemptive resume).
        let mut rem = seg;
        for vi in v.iter_mut() {
            let d = f64::min(*vi, rem);
            *vi -= d;
            rem -= d;
            if rem <= 0.0 {
                break;
            }
        }
        t = seg_end;
        if t >= cfg.horizon {
            rebuild_cum(&v, &mut cum);
            break;
        }
        let ci = {
            let mut r: f64 = rng.gen::<f64>() * total_rate;
            let mut idx = model.components().len() - 1;
            for (i, c) in model.components().iter().enumerate() {
                r -= c.rate;
                if r <= 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        };
        sample_jump(&model.components()[ci].law, &mut rng, &mut jump);
        for i in 0..n {
            v[i] += jump[i];
        }
        rebuild_cum(&v, &mut cum);
        check_state(&cum, &mut violations, &mut min_w, 0.0);
    }

    RepSummary {
        time_avg_z: int_v.iter().map(|x| x / window).collect(),
        ensemble_z: cum,
        lst: int_lst.iter().map(|x| x / window).collect(),
        violations,
        min_w,
    }
}

fn rebuild_cum(v: &[f64], cum: &mut [f64]) {
    let mut s = 0.0;
    for (c, vi) in cum.iter_mut().zip(v) {
        s += vi;
        *c = s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, LevyModel};
    use crate::steady_state::moments_w;
    use crate::test_models::{m1, m1_raw, m1_sigma, m3};

    fn w_point(values: Vec<f64>) -> AlphaVector {
        AlphaVector::w(values).unwrap()
    }

    #[test]
    fn deterministic_no_jump_path() {
        // Pure drift: Y_1 slope -1 keeps Z_1 at zero, Y_2 slope +0.1 grows
        // Z_2 = 0.1 t unreflected.
        let model = validate(LevyModel {
            n: 2,
            drift: vec![-1.0, 1.1],
            sigma: 0.0,
            components: vec![],
        })
        .unwrap();
        let cfg = SimConfig::new(10.0, 1, 7);
        let est = simulate(&model, &cfg).unwrap();
        assert_eq!(est.ordering_violations, 0);
        assert!(!est.warnings.is_empty(), "E Y_2(1) = 0.1 >= 0 must warn");
        assert_eq!(est.ensemble_mean_z[0].value, 0.0);
        assert!((est.ensemble_mean_z[1].value - 1.0).abs() < 1e-12);

        let path = simulate_path(&model, &cfg, 0).unwrap();
        let last = path.states.last().unwrap();
        assert_eq!(last.z[0], 0.0);
        assert!((last.z[1] - 1.0).abs() < 1e-12);
        assert!((last.local_time[0] - 10.0).abs() < 1e-12);
        assert_eq!(last.local_time[1], 0.0);
        // Z = Y + L along the whole path.
        for s in &path.states {
            for i in 0..2 {
                assert!((s.z[i] - (s.y[i] + s.local_time[i])).abs() < 1e-12);
            }
        }
        let w = tandem_view(&path);
        assert!(w.min_w() >= 0.0);
        let last_w = &w.points.last().unwrap().1;
        assert!((last_w[1] - 1.0).abs() < 1e-12, "W_2 = Z_2 here");
    }

    #[test]
    fn segment_integrals_match_quadrature() {
        // One decreasing coordinate crossing zero, one increasing.
        let z = [1.0, 2.0];
        let b = [-0.5, 0.25];
        let a = vec![vec![0.7, 0.3], vec![-0.5, 0.8]];
        let (u0, u1) = (0.3, 4.0);
        let mut got = vec![0.0; 2];
        let mut cuts = Vec::new();
        seg_lst_integrals(&z, &b, u0, u1, &a, &mut got, &mut cuts);
        // Midpoint quadrature oracle.
        let steps = 400_000;
        let h = (u1 - u0) / steps as f64;
        for (gi, alpha) in a.iter().enumerate() {
            let mut acc = 0.0;
            for s in 0..steps {
                let u = u0 + (s as f64 + 0.5) * h;
                let e: f64 = (0..2)
                    .map(|i| alpha[i] * (z[i] + b[i] * u).max(0.0))
                    .sum();
                acc += (-e).exp() * h;
            }
            assert!((got[gi] - acc).abs() < 1e-9, "grid {gi}: {} vs {acc}", got[gi]);
        }
        for i in 0..2 {
            let exact = seg_mean_integral(z[i], b[i], u0, u1);
            let mut acc = 0.0;
            for s in 0..steps {
                let u = u0 + (s as f64 + 0.5) * h;
                acc += (z[i] + b[i] * u).max(0.0) * h;
            }
            assert!((exact - acc).abs() < 1e-9);
        }
    }

    #[test]
    fn event_mode_matches_analytic_means() {
        let model = m1();
        let cfg = SimConfig::new(2000.0, 64, 42).with_alpha_grid(vec![
            w_point(vec![1.0, 2.0]),
            w_point(vec![1.0, 0.0]),
        ]);
        let est = simulate(&model, &cfg).unwrap();
        assert_eq!(est.ordering_violations, 0);
        assert!(est.min_w >= 0.0);
        let w = moments_w(&model).unwrap();
        for (got, want) in [
            (&est.mean_z[0], w.mean_w1),
            (&est.mean_z[1], w.mean_z2),
        ] {
            assert!(
                (got.value - want).abs() <= 3.0 * got.std_error,
                "{} vs {want} (se {})",
                got.value,
                got.std_error
            );
        }
        // Empirical transform against the analytic value.
        let analytic = crate::steady_state::lst_w(&model, &[1.0, 2.0]).unwrap();
        let got = &est.lst_values[0];
        assert!((got.value - analytic).abs() <= 3.0 * got.std_error);
    }

    #[test]
    fn determinism_and_parallel_equivalence() {
        let model = m3();
        let cfg = SimConfig::new(200.0, 16, 99).with_alpha_grid(vec![w_point(vec![1.0, 1.0])]);
        let a = simulate(&model, &cfg).unwrap();
        let b = simulate(&model, &cfg).unwrap();
        let c = simulate_sequential(&model, &cfg).unwrap();
        assert_eq!(a, b, "same seed, same result");
        assert_eq!(a, c, "parallel and sequential paths agree bit-exactly");
        let mut cfg2 = cfg;
        cfg2.seed = 100;
        let d = simulate(&model, &cfg2).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn grid_halving_bias_below_one_standard_error() {
        // Common-random-number comparison: the coarse run consumes the same
        // Brownian draws (two sub-steps summed) and the same jump epochs as
        // the fine run, so the difference isolates the discretization bias
        // of the reflected infimum.
        let model = m1_sigma(1.0);
        let reps = 32u64;
        let coarse_cfg = SimConfig::new(200.0, reps as usize, 11).with_step(0.005);
        let fine_cfg = SimConfig::new(200.0, reps as usize, 11).with_step(0.0025);
        let mut coarse = Vec::new();
        let mut fine = Vec::new();
        for r in 0..reps {
            coarse.push(run_grid_replication(&model, &coarse_cfg, &[], 11, r, 2, None));
            fine.push(run_grid_replication(&model, &fine_cfg, &[], 11, r, 1, None));
        }
        for i in 0..2 {
            let fine_col: Vec<f64> = fine.iter().map(|s| s.time_avg_z[i]).collect();
            let fine_est = mean_se(&fine_col);
            let coarse_mean =
                coarse.iter().map(|s| s.time_avg_z[i]).sum::<f64>() / reps as f64;
            let diff = (coarse_mean - fine_est.value).abs();
            assert!(
                diff < fine_est.std_error,
                "coordinate {i}: halving moved the mean by {diff} \
                 (> SE {})",
                fine_est.std_error
            );
        }
    }

    #[test]
    fn grid_mode_runs_and_orders() {
        let model = m1_sigma(1.0);
        let cfg = SimConfig::new(50.0, 8, 5).with_step(0.01);
        let est = simulate(&model, &cfg).unwrap();
        assert_eq!(est.ordering_violations, 0);
        assert!(est.min_w >= -GRID_ORDER_TOL);
        // Missing step is a config error for diffusive models.
        let bad = SimConfig::new(50.0, 8, 5);
        assert!(matches!(simulate(&model, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn config_validation() {
        let model = m1();
        assert!(simulate(&model, &SimConfig::new(0.0, 1, 1)).is_err());
        assert!(simulate(&model, &SimConfig::new(10.0, 0, 1)).is_err());
        let mut cfg = SimConfig::new(10.0, 1, 1);
        cfg.burn_in_fraction = 1.0;
        assert!(simulate(&model, &cfg).is_err());
        let cfg = SimConfig::new(10.0, 1, 1)
            .with_alpha_grid(vec![w_point(vec![1.0, 2.0, 3.0])]);
        assert!(simulate(&model, &cfg).is_err());
    }

    #[test]
    fn priority_requires_unit_server() {
        let mut raw = m1_raw();
        raw.drift[0] = -0.5;
        let model = validate(raw).unwrap();
        assert!(matches!(
            priority_oracle(&model, &SimConfig::new(10.0, 1, 1)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn priority_workload_empty_until_first_arrival() {
        // Arrival rates so small that no event fires before the horizon on
        // this seed: the workload stays at zero throughout.
        let mut raw = m1_raw();
        for c in raw.components.iter_mut() {
            c.rate = 1e-9;
        }
        let model = validate(raw).unwrap();
        let mut cfg = SimConfig::new(1.0, 4, 11);
        cfg.burn_in_fraction = 0.0;
        let est = priority_oracle(&model, &cfg).unwrap();
        for e in &est.mean_z {
            assert_eq!(e.value, 0.0);
        }
        for e in &est.ensemble_mean_z {
            assert_eq!(e.value, 0.0);
        }
    }

    #[test]
    fn priority_matches_parallel_simulation() {
        let model = m1();
        let cfg = SimConfig::new(1500.0, 48, 7);
        let par = simulate(&model, &cfg).unwrap();
        let pri = priority_oracle(&model, &cfg).unwrap();
        for j in 0..2 {
            let a = &par.mean_z[j];
            let b = &pri.mean_z[j];
            let joint = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
            assert!(
                (a.value - b.value).abs() <= 3.0 * joint,
                "class cum {j}: {} vs {} (joint se {joint})",
                a.value,
                b.value
            );
        }
    }
}
