//! Scenario configuration, time-grid runs, oracle comparison and CSV output.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use crate::asymptotics::{self, ExpansionPrediction};
use crate::conditional::{ConditionalProbe, ConditionalValues};
use crate::dynamics::{decompose_thermal_branches, dense_initial_state, evolve, JointState, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::fock::{qubit_from_bloch, SpaceConfig, C64};
use crate::thermo::{self, Ledger, Snapshot, ThermoRecord};

/// Column contract of the CSV output.
pub const CSV_COLUMNS: [&str; 26] = [
    "gt",
    "theta",
    "Pe",
    "Re_Ceg",
    "Im_Ceg",
    "E_Q",
    "E_C",
    "S_Q",
    "S_C",
    "S_QC",
    "I_QC",
    "p_eff_Q",
    "nbar_eff_C",
    "Eth_Q",
    "Eth_C",
    "Q_C",
    "W_C",
    "Q_Q",
    "W_Q",
    "sigma_Q",
    "demon_lhs",
    "demon_rhs",
    "Re_mean_a",
    "Im_mean_a",
    "abs_cross_trace",
    "branch_overlap",
];

/// `|cross_trace|` threshold defining the operational collapse time.
pub const COLLAPSE_THRESHOLD: f64 = 0.05;

/// Above this truncation the `auto` method uses branches.
pub const AUTO_BRANCH_NPH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Custom,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fig1" => Ok(Scenario::Fig1),
            "fig2" => Ok(Scenario::Fig2),
            "fig3" => Ok(Scenario::Fig3),
            "fig4" => Ok(Scenario::Fig4),
            "custom" => Ok(Scenario::Custom),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::Fig1 => "fig1",
            Scenario::Fig2 => "fig2",
            Scenario::Fig3 => "fig3",
            Scenario::Fig4 => "fig4",
            Scenario::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dense,
    Branches,
    Auto,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dense" => Ok(Method::Dense),
            "branches" => Ok(Method::Branches),
            "auto" => Ok(Method::Auto),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n0: f64,
    pub nbar: f64,
    pub phi0: f64,
    /// Fock truncation; 0 selects the automatic rule.
    pub n_ph: usize,
    /// Upper end of the `gt` grid; `None` uses the scenario default.
    pub gt_max: Option<f64>,
    pub steps: usize,
    pub init_qubit: [f64; 3],
    pub method: Method,
    pub rank_tol: f64,
    pub out_path: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn preset(scenario: Scenario) -> Self {
        let base = Self {
            scenario,
            n0: 100.0,
            nbar: 1.0,
            phi0: 0.0,
            n_ph: 0,
            gt_max: None,
            steps: 400,
            init_qubit: [0.0, 0.0, 1.0],
            method: Method::Auto,
            rank_tol: DEFAULT_RANK_TOL,
            out_path: None,
        };
        match scenario {
            Scenario::Fig1 | Scenario::Custom => base,
            Scenario::Fig2 => Self { n0: 500.0, steps: 200, ..base },
            Scenario::Fig3 => Self { init_qubit: [0.0, 1.0, 0.0], ..base },
            Scenario::Fig4 => Self { n0: 50.0, init_qubit: [0.0, 0.0, 0.0], ..base },
        }
    }

    /// Builds a config from a preset, then file lines, then overrides.
    pub fn from_sources(scenario: Option<Scenario>, file: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let file_pairs = match file {
            Some(text) => parse_key_values(text)?,
            None => Vec::new(),
        };
        let mut chosen = scenario;
        if chosen.is_none() {
            for (k, v) in &file_pairs {
                if k == "scenario" {
                    chosen = Some(v.parse()?);
                }
            }
        }
        let mut cfg = Self::preset(chosen.unwrap_or(Scenario::Custom));
        for (k, v) in file_pairs.iter().chain(overrides) {
            if k == "scenario" {
                continue;
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let real = |name: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| Error::Config(format!("{name}: cannot parse '{v}' as a number")))
        };
        let int = |name: &str| -> Result<usize> {
            v.parse::<usize>().map_err(|_| Error::Config(format!("{name}: cannot parse '{v}' as an integer")))
        };
        match key.trim() {
            "scenario" => self.scenario = v.parse()?,
            "n0" => self.n0 = real("n0")?,
            "nbar" => self.nbar = real("nbar")?,
            "phi0" => self.phi0 = real("phi0")?,
            "n_ph" | "nph" => self.n_ph = int("n_ph")?,
            "gt_max" | "gt-max" => self.gt_max = Some(real("gt_max")?),
            "steps" => self.steps = int("steps")?,
            "init" | "init_qubit" => self.init_qubit = parse_bloch(v)?,
            "method" => self.method = v.parse()?,
            "rank_tol" | "rank-tol" => self.rank_tol = real("rank_tol")?,
            "out" | "out_path" => self.out_path = Some(PathBuf::from(v)),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n0 > 0.0) || !self.n0.is_finite() {
            return Err(Error::Config(format!("n0 must be positive, got {}", self.n0)));
        }
        if !(self.nbar >= 0.0) || !self.nbar.is_finite() {
            return Err(Error::Config(format!("nbar must be non-negative, got {}", self.nbar)));
        }
        if !self.phi0.is_finite() {
            return Err(Error::Config("phi0 must be finite".into()));
        }
        if self.steps < 2 {
            return Err(Error::Config(format!("steps must be at least 2, got {}", self.steps)));
        }
        if self.n_ph == 1 {
            return Err(Error::Config("n_ph must be 0 (auto) or at least 2".into()));
        }
        if let Some(g) = self.gt_max {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::Config(format!("gt_max must be positive, got {g}")));
            }
        }
        let r = self.init_qubit;
        let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if !(len <= 1.0 + 1e-12) {
            return Err(Error::Config(format!("initial Bloch vector has length {len} > 1")));
        }
        if !(self.rank_tol > 0.0) {
            return Err(Error::Config(format!("rank_tol must be positive, got {}", self.rank_tol)));
        }
        Ok(())
    }

    pub fn alpha(&self) -> C64 {
        C64::from_polar(self.n0.sqrt(), self.phi0)
    }

    pub fn space(&self) -> Result<SpaceConfig> {
        if self.n_ph == 0 {
            SpaceConfig::auto(self.n0, self.nbar)
        } else {
            SpaceConfig::new(self.n_ph)
        }
    }

    pub fn resolved_gt_max(&self) -> f64 {
        self.gt_max.unwrap_or_else(|| match self.scenario {
            // θ ∈ [0, 4π]
            Scenario::Fig2 => 2.0 * PI / self.n0.sqrt(),
            // one feedback sweep up to just past t_min
            Scenario::Fig3 => 1.1 * PI * self.n0.sqrt(),
            _ => 2.2 * PI * self.n0.sqrt(),
        })
    }

    pub fn grid(&self) -> Vec<f64> {
        let top = self.resolved_gt_max();
        let last = (self.steps - 1) as f64;
        (0..self.steps).map(|i| if i + 1 == self.steps { top } else { top * i as f64 / last }).collect()
    }

    pub fn resolved_method(&self, space: &SpaceConfig) -> Method {
        match self.method {
            Method::Auto if space.n_ph() > AUTO_BRANCH_NPH => Method::Branches,
            Method::Auto => Method::Dense,
            m => m,
        }
    }
}

fn parse_bloch(v: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("init expects rx,ry,rz, got '{v}'")));
    }
    let mut r = [0.0; 3];
    for (slot, p) in r.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| Error::Config(format!("init: cannot parse '{p}'")))?;
    }
    Ok(r)
}

/// Flat `key = value` lines with `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got '{raw}'", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Prepared initial state, probe and ledger for one configuration.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    space: SpaceConfig,
    method: Method,
    state0: JointState,
    probe: ConditionalProbe,
    ledger: Ledger,
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let space = config.space()?;
        let method = config.resolved_method(&space);
        let rho_q = qubit_from_bloch(config.init_qubit).map_err(|e| Error::Config(e.to_string()))?;
        let alpha = config.alpha();
        let (state0, probe) = match method {
            Method::Dense => {
                (dense_initial_state(&rho_q, alpha, config.nbar, &space)?, ConditionalProbe::dense(alpha, config.nbar, &space)?)
            }
            _ => (
                decompose_thermal_branches(&rho_q, alpha, config.nbar, config.rank_tol, &space)?,
                ConditionalProbe::branches(alpha, config.nbar, config.rank_tol, &space)?,
            ),
        };
        let snap0 = thermo::observe(&state0, 0.0)?;
        let cv0 = probe.evaluate(0.0);
        let ledger =
            Ledger::new(config.n0, config.nbar, snap0.s_q + snap0.s_c, &snap0, cv0.cross_trace, cv0.branch_overlap)?;
        Ok(Self { config: config.clone(), space, method, state0, probe, ledger })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn space(&self) -> &SpaceConfig {
        &self.space
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn state_at(&self, gt: f64) -> Result<JointState> {
        evolve(&self.state0, gt)
    }

    pub fn snapshot(&self, gt: f64) -> Result<(Snapshot, ConditionalValues)> {
        let st = self.state_at(gt)?;
        Ok((thermo::observe(&st, gt)?, self.probe.evaluate(gt)))
    }

    /// Ledger row at `gt` without the demon columns.
    pub fn record_at(&self, gt: f64) -> Result<ThermoRecord> {
        let (snap, cv) = self.snapshot(gt)?;
        self.ledger.record(&snap, cv.cross_trace, cv.branch_overlap)
    }

    pub fn conditional(&self, gt: f64) -> ConditionalValues {
        self.probe.evaluate(gt)
    }

    /// First `gt` with `|cross_trace| ≤ threshold`, from a 0.01 scan refined
    /// by bisection; `None` if not reached before `horizon`.
    pub fn collapse_time(&self, threshold: f64, horizon: f64) -> Option<f64> {
        let f = |gt: f64| self.probe.evaluate(gt).cross_trace.norm();
        if f(0.0) <= threshold {
            return Some(0.0);
        }
        let step = 0.01;
        let mut lo = 0.0;
        let mut k = 1;
        loop {
            let hi = (k as f64 * step).min(horizon);
            if f(hi) <= threshold {
                let (mut a, mut b) = (lo, hi);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if f(m) <= threshold {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                return Some(b);
            }
            if hi >= horizon {
                return None;
            }
            lo = hi;
            k += 1;
        }
    }

    /// Evaluates the full grid; points are computed in parallel and merged in order.
    pub fn run(&self) -> Result<RunReport> {
        let grid = self.config.grid();
        let mut records: Vec<ThermoRecord> = grid.par_iter().map(|&gt| self.record_at(gt)).collect::<Result<_>>()?;

        let horizon = self.config.resolved_gt_max().max(10.0);
        let t_c = self.collapse_time(COLLAPSE_THRESHOLD, horizon);
        // demon columns of the reference row itself are zero
        let tc_record = t_c.map(|t| self.record_at(t)).transpose()?;
        match &tc_record {
            Some(r) => Ledger::attach_demon(&mut records, r),
            None => {
                for r in records.iter_mut() {
                    r.demon_lhs = f64::NAN;
                    r.demon_rhs = f64::NAN;
                }
            }
        }

        let joint_checks = self.joint_entropy_checks(&grid)?;
        let oracle: Vec<OraclePoint> = records.iter().map(|r| OraclePoint::at(r.gt, &self.config)).collect();
        let t_min = PI * self.config.n0.sqrt();
        let beta_c0 = self.ledger.beta_c0();
        let landauer_margin = if beta_c0.is_finite() && self.config.resolved_gt_max() >= t_min {
            Some(self.record_at(t_min)?.w_c - LN_2 / beta_c0)
        } else {
            None
        };
        let summary = Summary::build(&self.config, &records, &oracle, tc_record.as_ref(), joint_checks, landauer_margin);
        let report = RunReport { config: self.config.clone(), records, oracle, t_c, tc_record, summary };
        report.check_invariants()?;
        Ok(report)
    }

    /// `|S_QC(t) - S_QC(0)|` at the first, middle and last grid times.
    fn joint_entropy_checks(&self, grid: &[f64]) -> Result<f64> {
        let picks = [grid[0], grid[grid.len() / 2], grid[grid.len() - 1]];
        let mut worst: f64 = 0.0;
        for gt in picks {
            let s = thermo::joint_entropy(&self.state_at(gt)?)?;
            worst = worst.max((s - self.ledger.s_qc()).abs());
        }
        Ok(worst)
    }
}

/// Closed-form values matched to one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePoint {
    pub gt: f64,
    pub expansion: ExpansionPrediction,
    pub cross_trace_pred: C64,
    pub branch_overlap_pred: f64,
}

impl OraclePoint {
    pub fn at(gt: f64, config: &ScenarioConfig) -> Self {
        let theta = 2.0 * gt * config.n0.sqrt();
        Self {
            gt,
            expansion: asymptotics::unitary_expansion(theta, config.n0, config.nbar, config.phi0),
            cross_trace_pred: asymptotics::cross_trace_pred(gt, config.n0, config.nbar),
            branch_overlap_pred: asymptotics::branch_overlap_pred(gt, config.n0, config.nbar),
        }
    }
}

/// Discrete extremum of a sampled series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub gt: f64,
    pub value: f64,
    pub index: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extrema {
    pub minima: Vec<Extremum>,
    pub maxima: Vec<Extremum>,
}

impl Extrema {
    pub fn t_min_observed(&self) -> Option<f64> {
        self.minima.first().map(|m| m.gt)
    }
}

/// Local extrema of `S_Q` whose prominence is at least a quarter of the
/// series range, refined by a parabola through the neighbouring samples.
pub fn locate_extrema(records: &[ThermoRecord]) -> Extrema {
    let t: Vec<f64> = records.iter().map(|r| r.gt).collect();
    let y: Vec<f64> = records.iter().map(|r| r.s_q).collect();
    locate_series_extrema(&t, &y, 0.25)
}

/// Extrema of `y(t)` with relative prominence `rel_prominence`.
pub fn locate_series_extrema(t: &[f64], y: &[f64], rel_prominence: f64) -> Extrema {
    let mut out = Extrema::default();
    if y.len() < 3 {
        return out;
    }
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let min_prom = rel_prominence * (hi - lo);
    if !(hi > lo) {
        return out;
    }
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    for i in 1..y.len() - 1 {
        if y[i] < y[i - 1] && y[i] <= y[i + 1] && prominence(&neg, i) >= min_prom {
            out.minima.push(refine(t, y, i));
        }
        if y[i] > y[i - 1] && y[i] >= y[i + 1] && prominence(y, i) >= min_prom {
            out.maxima.push(refine(t, y, i));
        }
    }
    out
}

/// Topographic prominence of the peak `y[i]`.
fn prominence(y: &[f64], i: usize) -> f64 {
    let peak = y[i];
    let side = |range: &mut dyn Iterator<Item = usize>| -> f64 {
        let mut low = peak;
        for j in range {
            if y[j] > peak {
                return low;
            }
            low = low.min(y[j]);
        }
        // no higher ground: the drop to the series end counts
        low
    };
    let left = side(&mut (0..i).rev());
    let right = side(&mut (i + 1..y.len()));
    peak - left.max(right)
}

fn refine(t: &[f64], y: &[f64], i: usize) -> Extremum {
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let h = 0.5 * (t[i + 1] - t[i - 1]);
    if denom == 0.0 {
        return Extremum { gt: t[i], value: y1, index: i };
    }
    let off = (0.5 * (y0 - y2) / denom).clamp(-1.0, 1.0);
    Extremum { gt: t[i] + off * h, value: y1 - 0.25 * (y0 - y2) * off, index: i }
}

/// Per-column `max |exact - oracle|`. Expansion columns need an excited
/// initial qubit; with `valid_only` they skip points flagged outside the
/// unitary window.
pub fn oracle_deviations(
    config: &ScenarioConfig,
    records: &[ThermoRecord],
    oracle: &[OraclePoint],
    valid_only: bool,
) -> Vec<(&'static str, f64)> {
    let max_dev = |f: &dyn Fn(&ThermoRecord, &OraclePoint) -> f64, restrict: bool| {
        records
            .iter()
            .zip(oracle)
            .filter(|(_, o)| !restrict || o.expansion.valid)
            .map(|(r, o)| f(r, o))
            .fold(0.0, f64::max)
    };
    let mut out = Vec::new();
    if config.init_qubit == [0.0, 0.0, 1.0] {
        out.push(("Pe", max_dev(&|r, o| (r.p_e - o.expansion.p_e()).abs(), valid_only)));
        out.push(("Ceg", max_dev(&|r, o| (r.c_eg - o.expansion.c_eg()).norm(), valid_only)));
        out.push(("Re_Ceg", max_dev(&|r, o| (r.c_eg.re - o.expansion.c_eg().re).abs(), valid_only)));
        out.push(("Im_Ceg", max_dev(&|r, o| (r.c_eg.im - o.expansion.c_eg().im).abs(), valid_only)));
        out.push(("E_C", max_dev(&|r, o| (r.e_c - o.expansion.mean_n_pred).abs(), valid_only)));
        out.push(("Q_C", max_dev(&|r, o| (r.q_c - o.expansion.q_c_pred).abs(), valid_only)));
        out.push(("sqrt_det_V", max_dev(&|r, o| (r.sqrt_det_v - o.expansion.sqrt_det_v_pred).abs(), valid_only)));
    }
    out.push(("abs_cross_trace", max_dev(&|r, o| (r.cross_trace.norm() - o.cross_trace_pred.norm()).abs(), false)));
    out.push(("branch_overlap", max_dev(&|r, o| (r.branch_overlap - o.branch_overlap_pred).abs(), false)));
    out
}

/// Aggregated diagnostics of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// `(column, max |exact - oracle|)`; unitary-regime columns are present
    /// only for an excited initial qubit and use points with `θ/√n₀ ≤ 1`.
    pub deviations: Vec<(&'static str, f64)>,
    pub extrema: Extrema,
    /// Minimum of `demon_lhs - demon_rhs` on `[t_c, t_min]`.
    pub demon_margin: Option<f64>,
    /// `W_C(t_min) - ln 2 / β_C(0)` with `t_min = π√n₀`, when the grid reaches it.
    pub landauer_margin: Option<f64>,
    pub excitation_drift: f64,
    pub s_qc_drift: f64,
    pub first_law_residual: f64,
    pub min_sigma_q: f64,
}

impl Summary {
    fn build(
        config: &ScenarioConfig,
        records: &[ThermoRecord],
        oracle: &[OraclePoint],
        tc: Option<&ThermoRecord>,
        s_qc_drift: f64,
        landauer_margin: Option<f64>,
    ) -> Self {
        let deviations = oracle_deviations(config, records, oracle, true);

        let extrema = locate_extrema(records);
        let t_min = PI * config.n0.sqrt();
        let demon_margin = tc.map(|r0| {
            records
                .iter()
                .filter(|r| r.gt >= r0.gt && r.gt <= t_min)
                .map(|r| r.demon_lhs - r.demon_rhs)
                .fold(f64::INFINITY, f64::min)
        });
        let e0 = records.first().map_or(0.0, |r| r.excitation);
        Summary {
            deviations,
            extrema,
            demon_margin,
            landauer_margin,
            excitation_drift: records.iter().map(|r| (r.excitation - e0).abs()).fold(0.0, f64::max),
            s_qc_drift,
            first_law_residual: records
                .iter()
                .flat_map(|r| {
                    let r0 = &records[0];
                    [(r.w_c + r.q_c + (r.e_c - r0.e_c)).abs(), (r.w_q + r.q_q + (r.e_q - r0.e_q)).abs()]
                })
                .fold(0.0, f64::max),
            min_sigma_q: records.iter().map(|r| r.sigma_q).filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn deviation(&self, column: &str) -> Option<f64> {
        self.deviations.iter().find(|(c, _)| *c == column).map(|(_, v)| *v)
    }
}

/// Output of [`Simulation::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub records: Vec<ThermoRecord>,
    pub oracle: Vec<OraclePoint>,
    /// Operational collapse time (first `|cross_trace| ≤ 0.05`).
    pub t_c: Option<f64>,
    pub tc_record: Option<ThermoRecord>,
    pub summary: Summary,
}

impl RunReport {
    /// Dynamical and thermodynamic invariants; violations are [`Error::Invariant`].
    pub fn check_invariants(&self) -> Result<()> {
        let s = &self.summary;
        let n0 = self.config.n0.max(1.0);
        if s.excitation_drift > 1e-8 * n0 {
            return Err(Error::Invariant(format!("excitation drift {:.3e} exceeds 1e-8·n0", s.excitation_drift)));
        }
        if s.first_law_residual > 1e-10 {
            return Err(Error::Invariant(format!("first-law residual {:.3e}", s.first_law_residual)));
        }
        if s.s_qc_drift > 1e-7 {
            return Err(Error::Invariant(format!("joint entropy drift {:.3e}", s.s_qc_drift)));
        }
        if s.min_sigma_q < -1e-6 {
            return Err(Error::Invariant(format!("entropy production {:.3e} < 0", s.min_sigma_q)));
        }
        for r in &self.records {
            if r.i_qc < -1e-8 {
                return Err(Error::Invariant(format!("negative mutual information {:.3e} at gt = {}", r.i_qc, r.gt)));
            }
            if r.s_q < -1e-9 || r.s_q > LN_2 + 1e-9 {
                return Err(Error::Invariant(format!("qubit entropy {} out of range at gt = {}", r.s_q, r.gt)));
            }
        }
        if self.records.windows(2).any(|w| w[1].gt <= w[0].gt) {
            return Err(Error::Invariant("grid is not strictly increasing".into()));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv(&self.records, out)
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the header and one row per record.
pub fn write_csv<W: Write>(records: &[ThermoRecord], mut out: W) -> Result<()> {
    let mut buf = String::new();
    buf.push_str(&CSV_COLUMNS.join(","));
    buf.push('\n');
    for r in records {
        let row = [
            r.gt,
            r.theta,
            r.p_e,
            r.c_eg.re,
            r.c_eg.im,
            r.e_q,
            r.e_c,
            r.s_q,
            r.s_c,
            r.s_qc,
            r.i_qc,
            r.p_eff_q,
            r.nbar_eff_c,
            r.eth_q,
            r.eth_c,
            r.q_c,
            r.w_c,
            r.q_q,
            r.w_q,
            r.sigma_q,
            r.demon_lhs,
            r.demon_rhs,
            r.mean_a.re,
            r.mean_a.im,
            r.cross_trace.norm(),
            r.branch_overlap,
        ];
        let cells: Vec<String> = row.iter().map(|v| fmt_value(*v)).collect();
        buf.push_str(&cells.join(","));
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

/// One row of the n₀-scaling table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n0: f64,
    pub column: &'static str,
    pub max_abs_dev: f64,
    /// Deviation at the previous n₀ divided by this one.
    pub ratio_vs_prev: Option<f64>,
}

/// Runs `config` for every `n0` over `θ ∈ [0, 2π]` and tabulates the
/// deviation from the first-order expansion.
pub fn compare(config: &ScenarioConfig, n0_list: &[f64]) -> Result<(Vec<RunReport>, Vec<ScalingRow>)> {
    if n0_list.is_empty() {
        return Err(Error::Config("compare needs at least one n0".into()));
    }
    let mut reports = Vec::new();
    for &n0 in n0_list {
        let mut c = config.clone();
        c.n0 = n0;
        c.gt_max = Some(PI / n0.sqrt());
        c.validate()?;
        reports.push(Simulation::new(&c)?.run()?);
    }
    let mut rows = Vec::new();
    let tables: Vec<Vec<(&'static str, f64)>> =
        reports.iter().map(|r| oracle_deviations(&r.config, &r.records, &r.oracle, false)).collect();
    let columns: Vec<&'static str> = tables[0].iter().map(|(c, _)| *c).collect();
    for col in columns {
        let mut prev: Option<f64> = None;
        for (rep, table) in reports.iter().zip(&tables) {
            let dev = table.iter().find(|(c, _)| *c == col).map_or(f64::NAN, |(_, v)| *v);
            rows.push(ScalingRow { n0: rep.config.n0, column: col, max_abs_dev: dev, ratio_vs_prev: prev.map(|p| p / dev) });
            prev = Some(dev);
        }
    }
    Ok((reports, rows))
}

pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], mut out: W) -> Result<()> {
    let mut buf = String::from("n0,column,max_abs_dev,ratio_vs_prev\n");
    for r in rows {
        let ratio = r.ratio_vs_prev.map_or_else(|| "NaN".to_string(), fmt_value);
        buf.push_str(&format!("{},{},{},{}\n", fmt_value(r.n0), r.column, fmt_value(r.max_abs_dev), ratio));
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}
