//! Seeded Monte Carlo experiments with CSV and JSON reporting.
//!
//! Trial `i` of a run with master seed `s` draws everything from
//! `trial_rng(s, i)` (see [`crate::ensemble::trial_seed`]). The same trial
//! seeds are reused at every density of a grid, so neighbouring grid points
//! see nested matrices.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    gen_base, gen_interpolated, gen_pinned, splitmix64, trial_seed, EnsembleParams,
};
use crate::error::{Error, Result};
use crate::peel::two_core;
use crate::spmat::{
    balance_distance, freeness_audit, rank, rank_dense, rref, Norm, SparseMatrix,
    DEFAULT_AUDIT_BUDGET,
};
use crate::theory::{
    fixed_points, predicted_node_stats, threshold_dk, threshold_dk_star, Potential,
};
use crate::wp::{
    degree_imbalance, fixed_point_violations, labels, standard_messages, stats, wp_iterate, Init,
    Label, TannerGraph, DEFAULT_STANDARD_BUDGET,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Largest `rows × cols` handed to dense elimination.
pub const ELIMINATION_BUDGET: u128 = 400_000_000;
/// Exact rank cross-checks in the peeling experiment run up to this `n`.
pub const PEEL_RANK_CHECK_MAX_N: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    RankProfile,
    ThresholdScan,
    WpStats,
    Balance,
    Peel,
    Interpolate,
    AuditFreeness,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::RankProfile => "rank-profile",
            Experiment::ThresholdScan => "threshold-scan",
            Experiment::WpStats => "wp-stats",
            Experiment::Balance => "balance",
            Experiment::Peel => "peel",
            Experiment::Interpolate => "interpolate",
            Experiment::AuditFreeness => "audit-freeness",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WpMode {
    Exact,
    #[default]
    Iterate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub tol_fp: f64,
    pub tol_stats: f64,
    pub tol_balance: f64,
    /// Slack in the nullity lower bound `nullity/n >= Φ(α_f) − tol`.
    pub tol_nullity: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            tol_fp: 0.1,
            tol_stats: 0.1,
            tol_balance: 0.05,
            tol_nullity: 0.02,
        }
    }
}

/// Bisection window for the threshold scan, in units of `m/n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub lo: f64,
    pub hi: f64,
    pub resolution: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            lo: 0.85,
            hi: 0.98,
            resolution: 0.005,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreenessConfig {
    pub delta: f64,
    pub ell: usize,
    pub budget: u128,
}

impl Default for FreenessConfig {
    fn default() -> Self {
        FreenessConfig {
            delta: 0.1,
            ell: 3,
            budget: DEFAULT_AUDIT_BUDGET,
        }
    }
}

fn default_trials() -> usize {
    1
}

fn default_max_iter() -> usize {
    100_000
}

fn default_kernel_samples() -> usize {
    100
}

fn default_thetas() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}

fn default_workers() -> usize {
    1
}

fn default_standard_budget() -> u128 {
    DEFAULT_STANDARD_BUDGET
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub params: EnsembleParams,
    /// Density grid (values of `d`); empty means the single density of `params`.
    #[serde(default)]
    pub densities: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub wp_mode: WpMode,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_standard_budget")]
    pub standard_budget: u128,
    #[serde(default = "default_kernel_samples")]
    pub kernel_samples: usize,
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub freeness: FreenessConfig,
    /// Master seed; falls back to `params.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, params: EnsembleParams, trials: usize) -> Self {
        ExperimentConfig {
            experiment: Some(experiment),
            params,
            densities: Vec::new(),
            trials,
            tolerances: ToleranceConfig::default(),
            wp_mode: WpMode::default(),
            max_iter: default_max_iter(),
            standard_budget: DEFAULT_STANDARD_BUDGET,
            kernel_samples: default_kernel_samples(),
            thetas: default_thetas(),
            scan: ScanConfig::default(),
            freeness: FreenessConfig::default(),
            seed: None,
            workers: 1,
            out_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn master_seed(&self) -> u64 {
        self.seed.unwrap_or(self.params.seed)
    }

    pub fn density_grid(&self) -> Vec<f64> {
        if self.densities.is_empty() {
            vec![self.params.density()]
        } else {
            self.densities.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1".into());
        }
        if self.densities.windows(2).any(|w| w[0] > w[1]) {
            return bad("densities must be sorted ascending".into());
        }
        if self
            .densities
            .iter()
            .any(|&d| !(0.0..=crate::theory::MAX_D).contains(&d))
        {
            return bad(format!(
                "densities must lie in [0, {}]",
                crate::theory::MAX_D
            ));
        }
        if self.thetas.is_empty() || self.thetas.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return bad("thetas must be a non-empty list in [0, 1]".into());
        }
        let s = &self.scan;
        if !(s.lo < s.hi && s.resolution > 0.0) {
            return bad("scan needs lo < hi and resolution > 0".into());
        }
        self.params
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// One trial. Fields an experiment does not measure stay empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    /// Weight-k rows.
    pub m: usize,
    /// Pinning rows.
    pub t: Option<usize>,
    /// Unary rows of the interpolating family.
    pub unary: Option<usize>,
    pub k: usize,
    pub q: u64,
    pub d: f64,
    pub theta: Option<f64>,
    pub rank: Option<usize>,
    pub nullity: Option<usize>,
    pub full_row_rank: Option<bool>,
    pub alpha_hat: Option<f64>,
    pub core_rows: Option<usize>,
    pub core_cols: Option<usize>,
    pub excess: Option<i64>,
    pub wp_iterations: Option<usize>,
    pub wp_converged: Option<bool>,
    pub fp_violations: Option<usize>,
    pub stats_distance: Option<f64>,
    pub stats_distance_u: Option<f64>,
    pub stats_distance_s: Option<f64>,
    pub stats_distance_f: Option<f64>,
    pub stats_distance_theory: Option<f64>,
    pub out_of_class: Option<usize>,
    pub label_symdiff: Option<usize>,
    pub balance_distance: Option<f64>,
    pub degree_imbalance: Option<f64>,
    pub free: Option<bool>,
    pub relations_h2: Option<u64>,
    pub relations_h3: Option<u64>,
    #[serde(skip)]
    pub runtime_ms: f64,
}

impl TrialRecord {
    fn new(trial: usize, seed: u64, params: &EnsembleParams, m: usize, d: f64) -> Self {
        TrialRecord {
            trial,
            seed,
            n: params.n,
            m,
            k: params.k,
            q: params.q,
            d,
            ..Default::default()
        }
    }
}

/// Per-experiment aggregates. Empty cells are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl SummaryTable {
    fn with_columns(cols: &[&str]) -> Self {
        SummaryTable {
            columns: cols.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<f64> {
        self.rows.get(row)?[self.column_index(name)?]
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            wr.write_record(
                row.iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            )
            .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

pub fn write_trials_csv<W: std::io::Write>(records: &[TrialRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r).map_err(csv_err)?;
    }
    if records.is_empty() {
        wr.serialize(TrialRecord::default()).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_trials_csv<R: std::io::Read>(r: R) -> Result<Vec<TrialRecord>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|rec| rec.map_err(csv_err))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub experiment: Experiment,
    pub trials: Vec<TrialRecord>,
    pub summary: SummaryTable,
    /// Experiment-specific results (threshold estimate, theory values).
    pub result: serde_json::Value,
}

fn mean<T>(recs: &[&TrialRecord], f: impl Fn(&TrialRecord) -> Option<T>) -> Option<f64>
where
    T: Into<f64>,
{
    let vals: Vec<f64> = recs.iter().filter_map(|r| f(r).map(Into::into)).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn frac(recs: &[&TrialRecord], f: impl Fn(&TrialRecord) -> Option<bool>) -> Option<f64> {
    mean(recs, |r| f(r).map(|b| if b { 1.0 } else { 0.0 }))
}

fn as_f64(x: usize) -> f64 {
    x as f64
}

struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Runner { pool })
    }

    /// Runs `f(i, rng_i)` for `i < count`; results come back in trial order.
    fn trials<F>(&self, master: u64, count: usize, f: F) -> Result<Vec<TrialRecord>>
    where
        F: Fn(usize, u64, &mut ChaCha8Rng) -> Result<TrialRecord> + Sync,
    {
        self.pool.install(|| {
            (0..count)
                .into_par_iter()
                .map(|i| {
                    let start = Instant::now();
                    let seed = trial_seed(master, i as u64);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut rec = f(i, seed, &mut rng)?;
                    rec.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                    Ok(rec)
                })
                .collect()
        })
    }
}

fn rows_for(params: &EnsembleParams, d: f64) -> usize {
    (d * params.n as f64 / params.k as f64).round() as usize
}

fn with_rows(params: &EnsembleParams, m: usize) -> EnsembleParams {
    EnsembleParams {
        m: Some(m),
        d: None,
        ..params.clone()
    }
}

fn with_density(params: &EnsembleParams, d: f64) -> EnsembleParams {
    EnsembleParams {
        m: None,
        d: Some(d),
        ..params.clone()
    }
}

fn check_elimination(rows: usize, cols: usize) -> Result<()> {
    let needed = rows as u128 * cols as u128;
    if needed > ELIMINATION_BUDGET {
        return Err(Error::BudgetExceeded {
            what: "dense elimination",
            needed,
            budget: ELIMINATION_BUDGET,
        });
    }
    Ok(())
}

/// Full row rank, skipping elimination when the 2-core has more rows than
/// columns.
pub fn has_full_row_rank(a: &SparseMatrix) -> (bool, i64, Option<usize>) {
    let p = two_core(a);
    if p.excess() > 0 {
        return (false, p.excess(), None);
    }
    let r = p.removed_rows.len() + rank_dense(&p.core);
    (r == a.n_rows(), p.excess(), Some(r))
}

pub fn exp_rank_profile(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let runner = Runner::new(cfg.workers)?;
    let params = &cfg.params;
    let mut summary =
        SummaryTable::with_columns(&["d", "n", "m", "trials", "full_rank_frac", "mean_nullity"]);
    let mut all = Vec::new();
    for d in cfg.density_grid() {
        let m = rows_for(params, d);
        check_elimination(m, params.n)?;
        let p = with_rows(params, m);
        let recs = runner.trials(cfg.master_seed(), cfg.trials, |i, seed, rng| {
            let a = gen_base(&p, rng)?;
            let r = rank(&a);
            let mut rec = TrialRecord::new(i, seed, &p, m, d);
            rec.rank = Some(r);
            rec.nullity = Some(p.n - r);
            rec.full_row_rank = Some(r == m);
            Ok(rec)
        })?;
        let refs: Vec<&TrialRecord> = recs.iter().collect();
        summary.push(vec![
            Some(d),
            Some(as_f64(params.n)),
            Some(as_f64(m)),
            Some(as_f64(recs.len())),
            frac(&refs, |r| r.full_row_rank),
            mean(&refs, |r| r.nullity.map(as_f64)),
        ]);
        all.extend(recs);
    }
    Ok(RunReport {
        experiment: Experiment::RankProfile,
        trials: all,
        summary,
        result: serde_json::Value::Null,
    })
}

/// Outcome of a threshold scan, in units of `m/n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub estimate: f64,
    pub resolution: f64,
    pub lo: f64,
    pub hi: f64,
    pub theory: Option<f64>,
    /// `(m/n, full_rank_frac)` for every evaluated ratio, in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
}

pub fn exp_threshold_scan(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let runner = Runner::new(cfg.workers)?;
    let params = &cfg.params;
    let n = params.n;
    let mut all = Vec::new();
    let mut evaluations = Vec::new();
    let mut eval = |ratio: f64, all: &mut Vec<TrialRecord>| -> Result<f64> {
        let m = (ratio * n as f64).round() as usize;
        check_elimination(m, n)?;
        let p = with_rows(params, m);
        let d = p.density();
        let recs = runner.trials(cfg.master_seed(), cfg.trials, |i, seed, rng| {
            let a = gen_base(&p, rng)?;
            let (full, excess, r) = has_full_row_rank(&a);
            let mut rec = TrialRecord::new(i, seed, &p, m, d);
            rec.full_row_rank = Some(full);
            rec.excess = Some(excess);
            rec.rank = r;
            rec.nullity = r.map(|r| n - r);
            Ok(rec)
        })?;
        let f = recs
            .iter()
            .filter(|r| r.full_row_rank == Some(true))
            .count() as f64
            / recs.len() as f64;
        evaluations.push((ratio, f));
        all.extend(recs);
        Ok(f)
    };
    let (mut lo, mut hi) = (cfg.scan.lo, cfg.scan.hi);
    let f_lo = eval(lo, &mut all)?;
    let f_hi = eval(hi, &mut all)?;
    if !(f_lo >= 0.5 && f_hi < 0.5) {
        return Err(Error::BracketNotAchieved(format!(
            "full-rank fraction {f_lo} at m/n = {lo} and {f_hi} at m/n = {hi}"
        )));
    }
    while hi - lo > cfg.scan.resolution {
        let mid = 0.5 * (lo + hi);
        if eval(mid, &mut all)? >= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theory = threshold_dk(params.k as u32, 1e-9)
        .ok()
        .map(|d| d / params.k as f64);
    let result = ScanResult {
        estimate: 0.5 * (lo + hi),
        resolution: hi - lo,
        lo,
        hi,
        theory,
        evaluations,
    };
    let mut summary =
        SummaryTable::with_columns(&["m_over_n", "d", "n", "trials", "full_rank_frac"]);
    let mut evals = result.evaluations.clone();
    evals.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (ratio, f) in evals {
        summary.push(vec![
            Some(ratio),
            Some(ratio * params.k as f64),
            Some(as_f64(n)),
            Some(as_f64(cfg.trials)),
            Some(f),
        ]);
    }
    Ok(RunReport {
        experiment: Experiment::ThresholdScan,
        trials: all,
        summary,
        result: serde_json::to_value(&result)?,
    })
}

pub fn exp_wp_stats(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let runner = Runner::new(cfg.workers)?;
    let params = &cfg.params;
    let k = params.k as u32;
    let mut summary = SummaryTable::with_columns(&[
        "d",
        "n",
        "trials",
        "alpha_f",
        "mean_alpha_hat",
        "mean_distance",
        "mean_distance_u",
        "mean_distance_s",
        "mean_distance_f",
        "mean_distance_theory",
        "mean_violations",
        "mean_symdiff_frac",
        "converged_frac",
        "mean_out_of_class",
    ]);
    let mut all = Vec::new();
    for d in cfg.density_grid() {
        let alpha_f = fixed_points(d, k, 1e-12)?.alpha_f;
        let theory = predicted_node_stats(d, k, alpha_f)?;
        let p = with_density(params, d);
        let recs = runner.trials(cfg.master_seed(), cfg.trials, |i, seed, rng| {
            let (a, t) = gen_pinned(&p, rng)?;
            let g = TannerGraph::new(&a);
            let n = p.n;
            let mut rec = TrialRecord::new(i, seed, &p, a.n_rows() - t, d);
            rec.t = Some(t);
            let msgs = match cfg.wp_mode {
                WpMode::Exact => {
                    let msgs = standard_messages(&a, cfg.standard_budget)?;
                    let rr = rref(&a);
                    let frozen = rr.frozen_cols();
                    rec.rank = Some(rr.rank);
                    rec.nullity = Some(n - rr.rank);
                    rec.alpha_hat = Some(frozen.len() as f64 / n as f64);
                    let lab = labels(&g, &msgs);
                    let mut in_f = vec![false; n];
                    for &j in &frozen {
                        in_f[j] = true;
                    }
                    rec.label_symdiff = Some(
                        (0..n)
                            .filter(|&j| (lab.var[j] != Label::U) != in_f[j])
                            .count(),
                    );
                    msgs
                }
                WpMode::Iterate => {
                    let res = wp_iterate(&g, Init::AllFrozen, cfg.max_iter)?;
                    rec.wp_iterations = Some(res.iterations);
                    rec.wp_converged = Some(res.converged);
                    rec.alpha_hat = Some(res.messages.frozen_fraction());
                    res.messages
                }
            };
            let st = stats(&g, &msgs);
            let alpha_hat = rec.alpha_hat.unwrap_or(0.0);
            let by = st.distance_by_label(&predicted_node_stats(d, k, alpha_hat)?);
            rec.stats_distance = Some(by.iter().sum());
            rec.stats_distance_u = Some(by[0]);
            rec.stats_distance_s = Some(by[1]);
            rec.stats_distance_f = Some(by[2]);
            rec.stats_distance_theory = Some(st.distance(&theory));
            rec.out_of_class = Some(st.var_out_of_class + st.check_out_of_class);
            rec.fp_violations = Some(fixed_point_violations(&g, &msgs));
            Ok(rec)
        })?;
        let refs: Vec<&TrialRecord> = recs.iter().collect();
        summary.push(vec![
            Some(d),
            Some(as_f64(params.n)),
            Some(as_f64(recs.len())),
            Some(alpha_f),
            mean(&refs, |r| r.alpha_hat),
            mean(&refs, |r| r.stats_distance),
            mean(&refs, |r| r.stats_distance_u),
            mean(&refs, |r| r.stats_distance_s),
            mean(&refs, |r| r.stats_distance_f),
            mean(&refs, |r| r.stats_distance_theory),
            mean(&refs, |r| r.fp_violations.map(as_f64)),
            mean(&refs, |r| r.label_symdiff.map(|s| s as f64 / r.n as f64)),
            frac(&refs, |r| r.wp_converged),
            mean(&refs, |r| r.out_of_class.map(as_f64)),
        ]);
        all.extend(recs);
    }
    Ok(RunReport {
        experiment: Experiment::WpStats,
        trials: all,
        summary,
        result: serde_json::Value::Null,
    })
}

/// Kernel balance. Labels for the degree-resolved imbalance come from the
/// all-`𝚏` WP iterate.
pub fn exp_balance(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let runner = Runner::new(cfg.workers)?;
    let params = &cfg.params;
    let field = params.field()?;
    let samples = cfg.kernel_samples.max(1);
    let mut summary = SummaryTable::with_columns(&[
        "d",
        "n",
        "q",
        "trials",
        "samples",
        "mean_balance_l2",
        "mean_degree_imbalance",
        "mean_alpha_hat",
        "within_tolerance_frac",
    ]);
    let mut all = Vec::new();
    for d in cfg.density_grid() {
        let m = rows_for(params, d);
        check_elimination(m + crate::ensemble::max_pins(params.n), params.n)?;
        let p = with_rows(params, m);
        let recs = runner.trials(cfg.master_seed(), cfg.trials, |i, seed, rng| {
            let (a, t) = gen_pinned(&p, rng)?;
            let n = p.n;
            let rr = rref(&a);
            let g = TannerGraph::new(&a);
            let lab = labels(&g, &wp_iterate(&g, Init::AllFrozen, cfg.max_iter)?.messages);
            let mut dist = 0.0;
            let mut imbalance = 0.0;
            for _ in 0..samples {
                let sigma = rr.sample_kernel(rng);
                dist += balance_distance(&field, &sigma, Norm::L2)?;
                imbalance += degree_imbalance(&g, &lab, &field, &sigma, true)? / n as f64;
            }
            let mut rec = TrialRecord::new(i, seed, &p, m, d);
            rec.t = Some(t);
            rec.rank = Some(rr.rank);
            rec.nullity = Some(n - rr.rank);
            rec.alpha_hat = Some(rr.frozen_cols().len() as f64 / n as f64);
            rec.balance_distance = Some(dist / samples as f64);
            rec.degree_imbalance = Some(imbalance / samples as f64);
            Ok(rec)
        })?;
        let refs: Vec<&TrialRecord> = recs.iter().collect();
        summary.push(vec![
            Some(d),
            Some(as_f64(params.n)),
            Some(params.q as f64),
            Some(as_f64(recs.len())),
            Some(as_f64(samples)),
            mean(&refs, |r| r.balance_distance),
            mean(&refs, |r| r.degree_imbalance),
            mean(&refs, |r| r.alpha_hat),
            frac(&refs, |r| {
                r.balance_distance.map(|b| b <= cfg.tolerances.tol_balance)
            }),
        ]);
        all.extend(recs);
    }
    Ok(RunReport {
        experiment: Experiment::Balance,
        trials: all,
        summary,
        result: serde_json::Value::Null,
    })
}

pub fn exp_peel(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let runner = Runner::new(cfg.workers)?;
    let params = &cfg.params;
    let k = params.k as u32;
    let d_star = threshold_dk_star(k, 1e-9)?;
    let d_k = threshold_dk(k, 1e-9)?;
    let mut summary = SummaryTable::with_columns(&[
        "d",
        "n",
        "trials",
        "empty_core_frac",
        "positive_excess_frac",
        "mean_excess_over_n",
        "mean_core_cols_over_n",
        "d_k_star",
        "d_k",
        "implication_violations",
    ]);
    let mut all = Vec::new();
    for d in cfg.density_grid() {
        let m = rows_for(params, d);
        let p = with_rows(params, m);
        let recs = runner.trials(cfg.master_seed(), cfg.trials, |i, seed, rng| {
            let a = gen_base(&p, rng)?;
            let core = two_core(&a);
            let mut rec = TrialRecord::new(i, seed, &p, m, d);
            rec.core_rows = Some(core.core_rows);
            rec.core_cols = Some(core.core_cols);
            rec.excess = Some(core.excess());
            if p.n <= PEEL_RANK_CHECK_MAX_N {
                let r = rank_dense(&a);
                rec.rank = Some(r);
                rec.nullity = Some(p.n - r);
                rec.full_row_rank = Some(r == m);
            }
            Ok(rec)
        })?;
        let refs: Vec<&TrialRecord> = recs.iter().collect();
        let violations = if params.n <= PEEL_RANK_CHECK_MAX_N {
            Some(as_f64(
                recs.iter()
                    .filter(|r| r.excess.unwrap_or(0) > 0 && r.full_row_rank == Some(true))
                    .count(),
            ))
        } else {
            None
        };
        summary.push(vec![
            Some(d),
            Some(as_f64(params.n)),
            Some(as_f64(recs.len())),
            frac(&refs, |r| {
                Some(r.core_rows == Some(0) && r.core_cols == Some(0))
            }),
            frac(&refs, |r| r.excess.map(|e| e > 0)),
            mean(&refs, |r| r.excess.map(|e| e as f64 / r.n as f64)),
            mean(&refs, |r| r.core_cols.map(|c| c as f64 / r.n as f64)),
            Some(d_star),
            Some(d_k),
            violations,
        ]);
        all.extend(recs);
    }
    Ok(RunReport {
        experiment: Experiment::Peel,
        trials: all,
        summary,
        result: serde_json::Value::Null,
    })
}

/// Interpolating family at each `θ`, plus the pinned matrix `Â` itself
/// (rows with an empty `theta`) drawn from an independent stream.
pub fn exp_interpolation(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let runner = Runner::new(cfg.workers)?;
    let params = &cfg.params;
    let k = params.k as u32;
    let mut summary = SummaryTable::with_columns(&[
        "theta",
        "d",
        "n",
        "trials",
        "alpha_f",
        "mean_nullity_frac",
        "predicted",
        "phi_alpha_f",
        "lower_bound_frac",
    ]);
    let mut all = Vec::new();
    for d in cfg.density_grid() {
        let pot = Potential::new(d, k)?;
        let alpha_f = pot.fixed_points(1e-12).alpha_f;
        let phi_f = pot.Phi(alpha_f);
        let p = with_density(params, d);
        let n = p.n;
        let nullity_of = |a: &SparseMatrix| -> Result<usize> {
            let core = two_core(a);
            check_elimination(core.core_rows, core.core_cols)?;
            Ok(n - core.removed_rows.len() - rank_dense(&core.core))
        };
        let pinned_master = splitmix64(cfg.master_seed() ^ 0x5049_4E4E_4544);
        let pinned = runner.trials(pinned_master, cfg.trials, |i, seed, rng| {
            let (a, t) = gen_pinned(&p, rng)?;
            let nul = nullity_of(&a)?;
            let mut rec = TrialRecord::new(i, seed, &p, a.n_rows() - t, d);
            rec.t = Some(t);
            rec.nullity = Some(nul);
            rec.rank = Some(n - nul);
            Ok(rec)
        })?;
        let pinned_refs: Vec<&TrialRecord> = pinned.iter().collect();
        let pinned_mean = mean(&pinned_refs, |r| r.nullity.map(|x| x as f64 / n as f64));
        for &theta in &cfg.thetas {
            let recs = runner.trials(cfg.master_seed(), cfg.trials, |i, seed, rng| {
                let a = gen_interpolated(&p, theta, alpha_f, rng)?;
                let nul = nullity_of(&a)?;
                let weight_k = a.rows().iter().filter(|r| r.len() == p.k).count();
                let mut rec = TrialRecord::new(i, seed, &p, weight_k, d);
                rec.unary = Some(a.n_rows() - weight_k);
                rec.theta = Some(theta);
                rec.nullity = Some(nul);
                rec.rank = Some(n - nul);
                Ok(rec)
            })?;
            let refs: Vec<&TrialRecord> = recs.iter().collect();
            let predicted = if theta == 1.0 {
                Some((-d * alpha_f.powi(k as i32 - 1)).exp())
            } else if theta == 0.0 {
                pinned_mean
            } else {
                None
            };
            summary.push(vec![
                Some(theta),
                Some(d),
                Some(as_f64(n)),
                Some(as_f64(recs.len())),
                Some(alpha_f),
                mean(&refs, |r| r.nullity.map(|x| x as f64 / n as f64)),
                predicted,
                Some(phi_f),
                None,
            ]);
            all.extend(recs);
        }
        summary.push(vec![
            None,
            Some(d),
            Some(as_f64(n)),
            Some(as_f64(pinned.len())),
            Some(alpha_f),
            pinned_mean,
            None,
            Some(phi_f),
            frac(&pinned_refs, |r| {
                r.nullity
                    .map(|x| x as f64 / n as f64 >= phi_f - cfg.tolerances.tol_nullity)
            }),
        ]);
        all.extend(pinned);
    }
    Ok(RunReport {
        experiment: Experiment::Interpolate,
        trials: all,
        summary,
        result: serde_json::Value::Null,
    })
}

pub fn exp_freeness_audit(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let runner = Runner::new(cfg.workers)?;
    let params = &cfg.params;
    let fc = cfg.freeness;
    let mut summary = SummaryTable::with_columns(&[
        "d",
        "n",
        "trials",
        "delta",
        "ell",
        "pass_frac",
        "mean_h2",
        "mean_h3",
    ]);
    let mut all = Vec::new();
    for d in cfg.density_grid() {
        let m = rows_for(params, d);
        let p = with_rows(params, m);
        let recs = runner.trials(cfg.master_seed(), cfg.trials, |i, seed, rng| {
            let (a, t) = gen_pinned(&p, rng)?;
            let audit = freeness_audit(&a, fc.delta, fc.ell, fc.budget)?;
            let mut rec = TrialRecord::new(i, seed, &p, m, d);
            rec.t = Some(t);
            rec.free = Some(audit.is_free);
            let count = |h: usize| {
                audit
                    .counts
                    .iter()
                    .find(|c| c.size == h)
                    .map(|c| c.proper_relations)
            };
            rec.relations_h2 = count(2);
            rec.relations_h3 = count(3);
            Ok(rec)
        })?;
        let refs: Vec<&TrialRecord> = recs.iter().collect();
        summary.push(vec![
            Some(d),
            Some(as_f64(params.n)),
            Some(as_f64(recs.len())),
            Some(fc.delta),
            Some(as_f64(fc.ell)),
            frac(&refs, |r| r.free),
            mean(&refs, |r| r.relations_h2.map(|x| x as f64)),
            mean(&refs, |r| r.relations_h3.map(|x| x as f64)),
        ]);
        all.extend(recs);
    }
    Ok(RunReport {
        experiment: Experiment::AuditFreeness,
        trials: all,
        summary,
        result: serde_json::Value::Null,
    })
}

pub fn run_experiment(experiment: Experiment, cfg: &ExperimentConfig) -> Result<RunReport> {
    if let Some(named) = cfg.experiment {
        if named != experiment {
            return Err(Error::Config(format!(
                "config names experiment {}, but {} was requested",
                named.name(),
                experiment.name()
            )));
        }
    }
    match experiment {
        Experiment::RankProfile => exp_rank_profile(cfg),
        Experiment::ThresholdScan => exp_threshold_scan(cfg),
        Experiment::WpStats => exp_wp_stats(cfg),
        Experiment::Balance => exp_balance(cfg),
        Experiment::Peel => exp_peel(cfg),
        Experiment::Interpolate => exp_interpolation(cfg),
        Experiment::AuditFreeness => exp_freeness_audit(cfg),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Runs `experiment` and writes `trials.*`, `summary.*` and `run.json` into
/// `out_dir`. Per-trial runtimes go to the manifest only, so the tables are
/// byte-identical across repeated runs.
pub fn run(
    experiment: Experiment,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<RunReport> {
    let start = Instant::now();
    let report = run_experiment(experiment, cfg)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    fs::create_dir_all(out_dir)?;
    let (trials_name, summary_name) = match format {
        OutputFormat::Csv => ("trials.csv", "summary.csv"),
        OutputFormat::Json => ("trials.json", "summary.json"),
    };
    match format {
        OutputFormat::Csv => {
            write_trials_csv(&report.trials, fs::File::create(out_dir.join(trials_name))?)?;
            report
                .summary
                .write_csv(fs::File::create(out_dir.join(summary_name))?)?;
        }
        OutputFormat::Json => {
            fs::write(
                out_dir.join(trials_name),
                serde_json::to_string_pretty(&report.trials)?,
            )?;
            fs::write(
                out_dir.join(summary_name),
                serde_json::to_string_pretty(&report.summary)?,
            )?;
        }
    }
    let master = cfg.master_seed();
    let manifest = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "library": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": experiment.name(),
        "config": cfg,
        "master_seed": master,
        "trial_seeds": (0..cfg.trials as u64).map(|i| trial_seed(master, i)).collect::<Vec<_>>(),
        "wall_time_ms": wall_ms,
        "trial_runtime_ms": report.trials.iter().map(|r| r.runtime_ms).collect::<Vec<_>>(),
        "files": [trials_name, summary_name],
        "result": report.result,
    });
    fs::write(
        out_dir.join("run.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(experiment: Experiment) -> ExperimentConfig {
        let mut cfg =
            ExperimentConfig::new(experiment, EnsembleParams::with_density(60, 3, 2.0, 2), 3);
        cfg.seed = Some(1);
        cfg
    }

    #[test]
    fn config_round_trip() {
        let mut cfg = small(Experiment::Balance);
        cfg.densities = vec![1.0, 2.0];
        cfg.out_dir = Some(PathBuf::from("out"));
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small(Experiment::Peel);
        cfg.trials = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = small(Experiment::Peel);
        cfg.densities = vec![2.0, 1.0];
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_json("{\"params\": {\"n\": 10}}").is_err());
        assert!(ExperimentConfig::from_json(
            "{\"params\": {\"n\": 10, \"k\": 3, \"d\": 1.0}, \"bogus\": 1}"
        )
        .is_err());
    }

    #[test]
    fn zero_density_is_full_rank() {
        let mut cfg = small(Experiment::RankProfile);
        cfg.densities = vec![0.0];
        let rep = exp_rank_profile(&cfg).unwrap();
        assert_eq!(rep.summary.get(0, "full_rank_frac"), Some(1.0));
        assert_eq!(rep.summary.get(0, "mean_nullity"), Some(60.0));
    }

    #[test]
    fn mismatched_experiment_rejected() {
        let cfg = small(Experiment::Peel);
        assert!(matches!(
            run_experiment(Experiment::Balance, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut cfg = small(Experiment::WpStats);
        let a = exp_wp_stats(&cfg).unwrap();
        cfg.workers = 3;
        let b = exp_wp_stats(&cfg).unwrap();
        assert_eq!(a.summary, b.summary);
        let strip = |v: &[TrialRecord]| {
            v.iter()
                .map(|r| TrialRecord {
                    runtime_ms: 0.0,
                    ..r.clone()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a.trials), strip(&b.trials));
    }

    #[test]
    fn trial_csv_round_trip() {
        let rep = exp_peel(&small(Experiment::Peel)).unwrap();
        let mut buf = Vec::new();
        write_trials_csv(&rep.trials, &mut buf).unwrap();
        let back = read_trials_csv(buf.as_slice()).unwrap();
        let strip = |v: &[TrialRecord]| {
            v.iter()
                .map(|r| TrialRecord {
                    runtime_ms: 0.0,
                    ..r.clone()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(back, strip(&rep.trials));
    }
}
