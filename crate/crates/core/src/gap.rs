//! Step-response experiments and trajectory gap metrics.
//!
//! The accumulated error between two trajectories is the running sum of
//! per-sample absolute position differences on a uniform 60 Hz comparison
//! grid (units: rad). Because it is a per-sample sum, its value depends on
//! the grid rate, which is therefore fixed.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::control::{controller_step, make_controller_with_defaults, ControllerVariant, PidGains};
use crate::dynamics::{step_dynamics, JointState, Trajectory, TrajectoryRecorder};
use crate::error::{check_finite, Error, Result};
use crate::model::RobotModel;

/// Comparison grid rate for accumulated errors (Hz).
pub const COMPARISON_RATE: f64 = 60.0;

/// Default steady-state band (rad).
pub const DEFAULT_SETTLE_EPS: f64 = 1e-3;

/// Default steady-state window (s).
pub const DEFAULT_SETTLE_WINDOW: f64 = 0.5;

/// Timestamps closer than this are treated as the same instant when
/// resampling, so grids built by `k/rate` and `k·dt` line up.
const TIME_SNAP: f64 = 1e-9;

/// A single simultaneous step on every joint, held for `duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepExperiment {
    pub targets: Vec<f64>,
    pub duration: f64,
    pub dt: f64,
    /// Starting state; `None` means home at rest.
    pub initial: Option<JointState>,
}

impl StepExperiment {
    pub fn new(targets: Vec<f64>, duration: f64, dt: f64) -> Self {
        Self {
            targets,
            duration,
            dt,
            initial: None,
        }
    }

    /// Home-to-zero step over `duration` at the model's default timestep.
    pub fn home_to_zero(model: &RobotModel, duration: f64) -> Result<Self> {
        Ok(Self::new(
            model.zero_configuration()?,
            duration,
            model.dt_default(),
        ))
    }

    /// Number of integration steps; the trajectory has one more sample.
    pub fn steps(&self) -> usize {
        ((self.duration / self.dt) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invariant(
                "dt",
                format!("must be > 0, got {}", self.dt),
            ));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(Error::invariant(
                "duration",
                format!("must be >= dt ({}), got {}", self.dt, self.duration),
            ));
        }
        Error::check_dim("step targets", model.dof(), self.targets.len())?;
        check_finite("step targets", &self.targets)?;
        for (i, (j, &t)) in model.joints().iter().zip(&self.targets).enumerate() {
            if !j.contains(t) {
                return Err(Error::joint_invariant(
                    "target",
                    i,
                    &j.name,
                    format!("{t} outside [{}, {}]", j.q_min, j.q_max),
                ));
            }
        }
        if let Some(initial) = &self.initial {
            initial.check_against(model)?;
            for (i, (j, &q)) in model.joints().iter().zip(&initial.q).enumerate() {
                if !j.contains(q) {
                    return Err(Error::joint_invariant(
                        "initial",
                        i,
                        &j.name,
                        format!("{q} outside [{}, {}]", j.q_min, j.q_max),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Runs the closed loop with the step target held constant from `t = 0`.
///
/// For `RosPid` without explicit gains, `k_p = stiffness`, `k_d = damping`
/// and `k_i = 0` are used.
pub fn run_step_response(
    model: &RobotModel,
    variant: ControllerVariant,
    experiment: &StepExperiment,
    gains: Option<PidGains>,
) -> Result<Trajectory> {
    experiment.validate(model)?;
    let mut ctrl = make_controller_with_defaults(variant, model, gains)?;
    let mut state = experiment
        .initial
        .clone()
        .unwrap_or_else(|| JointState::home(model));
    let steps = experiment.steps();
    let mut rec = TrajectoryRecorder::new(experiment.dt, model.dof(), steps + 1);
    rec.push(state.clone());
    for _ in 0..steps {
        let (effort, next) =
            controller_step(&ctrl, &experiment.targets, &state, model, experiment.dt)?;
        ctrl = next;
        state = step_dynamics(&state, &effort, model, experiment.dt)?;
        rec.push(state.clone());
    }
    Ok(rec.finish())
}

/// Earliest sample time `t*` such that every sample in `[t*, t* + window]`
/// is within `eps` of `reference` on every DOF. `Ok(None)` means not settled.
pub fn detect_steady_state(
    traj: &Trajectory,
    reference: &[f64],
    eps: f64,
    window: f64,
) -> Result<Option<f64>> {
    if !(eps > 0.0 && window > 0.0) {
        return Err(Error::invariant(
            "settle",
            format!("eps and window must be > 0, got eps={eps} window={window}"),
        ));
    }
    Error::check_dim("settle reference", traj.dof(), reference.len())?;
    check_finite("settle reference", reference)?;
    let span = traj.end_time() - traj.start_time();
    if window > span + TIME_SNAP {
        return Err(Error::invariant(
            "window",
            format!("window {window} s is longer than the trajectory ({span} s)"),
        ));
    }

    let t = traj.t();
    let n = t.len();
    let in_band = |s: &JointState| s.q.iter().zip(reference).all(|(q, r)| (q - r).abs() <= eps);
    // next_bad[k]: first index >= k outside the band, or n
    let mut next_bad = vec![n; n + 1];
    for k in (0..n).rev() {
        next_bad[k] = if in_band(&traj.samples()[k]) {
            next_bad[k + 1]
        } else {
            k
        };
    }
    for k in 0..n {
        let window_end = t[k] + window;
        if window_end > t[n - 1] + TIME_SNAP {
            break;
        }
        let bad = next_bad[k];
        if bad == n || t[bad] > window_end + TIME_SNAP {
            return Ok(Some(t[k]));
        }
    }
    Ok(None)
}

/// Linearly interpolates q and qd onto a uniform grid spanning `[t₀, t_end]`.
pub fn resample(traj: &Trajectory, rate: f64) -> Result<Trajectory> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::invariant("rate", format!("must be > 0, got {rate}")));
    }
    if traj.len() < 2 {
        return Err(Error::invariant(
            "trajectory",
            format!("resampling needs at least 2 samples, got {}", traj.len()),
        ));
    }
    let count = grid_count(traj.start_time(), traj.end_time(), rate);
    Ok(resample_onto(traj, traj.start_time(), count, rate))
}

fn grid_count(start: f64, end: f64, rate: f64) -> usize {
    ((end - start) * rate + 1e-9).floor() as usize + 1
}

fn resample_onto(traj: &Trajectory, start: f64, count: usize, rate: f64) -> Trajectory {
    let t = traj.t();
    let samples = traj.samples();
    let mut cursor = 0;
    let mut out_t = Vec::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let x = start + k as f64 / rate;
        while cursor + 1 < t.len() && t[cursor + 1] <= x + TIME_SNAP {
            cursor += 1;
        }
        let sample = if (x - t[cursor]).abs() <= TIME_SNAP || x < t[cursor] || cursor + 1 == t.len()
        {
            samples[cursor].clone()
        } else {
            let w = (x - t[cursor]) / (t[cursor + 1] - t[cursor]);
            lerp_state(&samples[cursor], &samples[cursor + 1], w)
        };
        out_t.push(x);
        out.push(sample);
    }
    Trajectory::new(out_t, out, traj.dof()).expect("uniform grid is strictly increasing")
}

fn lerp_state(a: &JointState, b: &JointState, w: f64) -> JointState {
    let lerp = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p + w * (q - p)).collect();
    JointState {
        q: lerp(&a.q, &b.q),
        qd: lerp(&a.qd, &b.qd),
    }
}

/// What position each trajectory must settle to.
#[derive(Debug, Clone, PartialEq)]
pub enum SettleReference {
    /// Both trajectories settle to this pose (typically the step target).
    Target(Vec<f64>),
    /// Each trajectory settles to its own final sample.
    FinalSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettleParams {
    pub reference: SettleReference,
    pub eps: f64,
    pub window: f64,
}

impl SettleParams {
    pub fn for_target(target: Vec<f64>) -> Self {
        Self {
            reference: SettleReference::Target(target),
            ..Self::default()
        }
    }
}

impl Default for SettleParams {
    fn default() -> Self {
        Self {
            reference: SettleReference::FinalSample,
            eps: DEFAULT_SETTLE_EPS,
            window: DEFAULT_SETTLE_WINDOW,
        }
    }
}

/// Per-DOF accumulated error between two trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Accumulated error per DOF at the steady-state time (rad).
    pub per_dof: Vec<f64>,
    /// Sum of `per_dof`.
    pub total: f64,
    /// Later of the two settle times, or the end of the comparison horizon
    /// when either trajectory never settles.
    pub steady_state_time: f64,
    pub settled: bool,
    /// Comparison grid timestamps.
    #[serde(skip)]
    pub grid_t: Vec<f64>,
    /// Running sums per DOF, indexed `[dof][sample]`.
    #[serde(skip)]
    pub error_curves: Vec<Vec<f64>>,
}

impl GapReport {
    /// A curve-less report, e.g. for rendering externally recorded values.
    pub fn from_per_dof(per_dof: Vec<f64>, steady_state_time: f64, settled: bool) -> Self {
        let total = per_dof.iter().sum();
        Self {
            per_dof,
            total,
            steady_state_time,
            settled,
            grid_t: Vec::new(),
            error_curves: Vec::new(),
        }
    }

    pub fn dof(&self) -> usize {
        self.per_dof.len()
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Parses a stored report. Totals transcribed from printed tables are
    /// often computed from unrounded values, so the stored total is kept as
    /// long as it agrees with the per-DOF sum to 1e-5 relative.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let report: GapReport =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("gap report: {e}")))?;
        check_finite("gap report", &report.per_dof)?;
        if let Some(i) = report.per_dof.iter().position(|&v| v < 0.0) {
            return Err(Error::Invariant {
                field: "per_dof",
                joint: Some(i + 1),
                name: None,
                message: "accumulated error must be >= 0".into(),
            });
        }
        let sum: f64 = report.per_dof.iter().sum();
        let agrees = (report.total - sum).abs() <= 1e-5 * sum.abs().max(1.0);
        if !agrees {
            return Err(Error::invariant(
                "total",
                format!(
                    "stored total {} disagrees with per-DOF sum {sum}",
                    report.total
                ),
            ));
        }
        Ok(report)
    }

    /// CSV with header `t,dof1,...,dofN` holding the running sums.
    pub fn error_curves_csv(&self) -> String {
        let mut out = String::from("t");
        for d in 1..=self.error_curves.len() {
            let _ = write!(out, ",dof{d}");
        }
        out.push('\n');
        for (k, t) in self.grid_t.iter().enumerate() {
            let _ = write!(out, "{t}");
            for curve in &self.error_curves {
                let _ = write!(out, ",{}", curve[k]);
            }
            out.push('\n');
        }
        out
    }
}

/// Accumulated error of `test` against `reference` on the common 60 Hz grid.
pub fn accumulated_error(
    reference: &Trajectory,
    test: &Trajectory,
    settle: &SettleParams,
) -> Result<GapReport> {
    Error::check_dim("trajectory dof", reference.dof(), test.dof())?;
    if reference.is_empty() || test.is_empty() {
        return Err(Error::invariant("trajectory", "empty trajectory"));
    }
    let start = reference.start_time().max(test.start_time());
    let end = reference.end_time().min(test.end_time());
    if end < start {
        return Err(Error::invariant(
            "trajectory",
            format!("no time overlap between trajectories ([{start}, {end}])"),
        ));
    }
    let count = grid_count(start, end, COMPARISON_RATE);
    let a = resample_onto(reference, start, count, COMPARISON_RATE);
    let b = resample_onto(test, start, count, COMPARISON_RATE);

    let dof = reference.dof();
    let mut curves = vec![Vec::with_capacity(count); dof];
    for (sa, sb) in a.samples().iter().zip(b.samples()) {
        for (i, curve) in curves.iter_mut().enumerate() {
            let prev = curve.last().copied().unwrap_or(0.0);
            curve.push(prev + (sb.q[i] - sa.q[i]).abs());
        }
    }

    let settle_time = |traj: &Trajectory| -> Result<Option<f64>> {
        let target = match &settle.reference {
            SettleReference::Target(target) => target.clone(),
            SettleReference::FinalSample => traj.last().expect("non-empty").q.clone(),
        };
        detect_steady_state(traj, &target, settle.eps, settle.window)
    };
    let (index, steady_state_time, settled) = match (settle_time(&a)?, settle_time(&b)?) {
        (Some(ta), Some(tb)) => {
            let t_ss = ta.max(tb);
            let k = a
                .t()
                .iter()
                .position(|&t| t == t_ss)
                .expect("settle time is a grid time");
            (k, t_ss, true)
        }
        _ => (count - 1, a.end_time(), false),
    };
    let per_dof: Vec<f64> = curves.iter().map(|c| c[index]).collect();
    let total = per_dof.iter().sum();
    Ok(GapReport {
        per_dof,
        total,
        steady_state_time,
        settled,
        grid_t: a.t().to_vec(),
        error_curves: curves,
    })
}

/// Formats with 7 significant digits, trailing zeros trimmed.
pub fn format_table_value(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (6 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Renders reports as a pipe table with 1-based DOF columns and a Σ column.
/// With two or more rows the lowest value of each column is marked `**bold**`.
pub fn render_gap_table(rows: &[(&str, &GapReport)]) -> String {
    let dof = rows.iter().map(|(_, r)| r.dof()).max().unwrap_or(0);
    let mut header = vec![String::new()];
    header.extend((1..=dof).map(|d| format!("DOF {d}")));
    header.push("Σ".to_owned());

    let column = |r: &GapReport, c: usize| {
        if c < dof {
            r.per_dof.get(c).copied()
        } else {
            Some(r.total)
        }
    };
    let mut minima = vec![f64::INFINITY; dof + 1];
    for (_, r) in rows {
        for (c, m) in minima.iter_mut().enumerate() {
            if let Some(v) = column(r, c) {
                *m = m.min(v);
            }
        }
    }

    let mut table = vec![header];
    for (label, r) in rows {
        let mut cells = vec![(*label).to_owned()];
        for (c, &min) in minima.iter().enumerate() {
            cells.push(match column(r, c) {
                Some(v) if rows.len() > 1 && v == min => {
                    format!("**{}**", format_table_value(v))
                }
                Some(v) => format_table_value(v),
                None => "-".to_owned(),
            });
        }
        table.push(cells);
    }

    let widths: Vec<usize> = (0..=dof + 1)
        .map(|c| {
            table
                .iter()
                .map(|row| row[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (r, row) in table.iter().enumerate() {
        out.push('|');
        for (cell, w) in row.iter().zip(&widths) {
            let pad = w - cell.chars().count();
            let _ = write!(out, " {cell}{} |", " ".repeat(pad));
        }
        out.push('\n');
        if r == 0 {
            out.push('|');
            for w in &widths {
                let _ = write!(out, "{}|", "-".repeat(w + 2));
            }
            out.push('\n');
        }
    }
    out
}

/// Extracts the cells of the first data row whose label is `label`.
pub fn table_row_cells(table: &str, label: &str) -> Option<Vec<String>> {
    table.lines().find_map(|line| {
        let cells: Vec<String> = line
            .trim()
            .trim_matches('|')
            .split('|')
            .map(|c| c.trim().trim_matches('*').to_owned())
            .collect();
        (cells.first().map(String::as_str) == Some(label)).then(|| cells[1..].to_vec())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofViolation {
    /// 1-based DOF index.
    pub dof: usize,
    pub count: usize,
    pub max_abs_qd: f64,
    pub qd_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub per_dof: Vec<DofViolation>,
    pub any_violation: bool,
}

impl ViolationReport {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn total_count(&self) -> usize {
        self.per_dof.iter().map(|d| d.count).sum()
    }
}

/// Counts samples with `|qd| > qd_max` per DOF.
pub fn velocity_violations(traj: &Trajectory, model: &RobotModel) -> Result<ViolationReport> {
    Error::check_dim("trajectory dof", model.dof(), traj.dof())?;
    let per_dof: Vec<DofViolation> = model
        .joints()
        .iter()
        .enumerate()
        .map(|(i, j)| {
            let (count, max_abs_qd) = traj.samples().iter().fold((0, 0.0f64), |(n, m), s| {
                let v = s.qd[i].abs();
                (n + usize::from(v > j.qd_max), m.max(v))
            });
            DofViolation {
                dof: i + 1,
                count,
                max_abs_qd,
                qd_max: j.qd_max,
            }
        })
        .collect();
    let any_violation = per_dof.iter().any(|d| d.count > 0);
    Ok(ViolationReport {
        per_dof,
        any_violation,
    })
}
