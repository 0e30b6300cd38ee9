//! Optimal drive parameters and parameter-plane sweeps.
//!
//! The 1-D conditions `alpha(Omega_0) = target` and `beta(V) = target` are
//! solved by continuation: the unwrapped phase is sampled on a uniform ladder
//! starting from the lower end of the bracket, and the first ladder interval
//! with a sign change is bisected. Neither phase is globally monotone, so
//! starting from the smooth end avoids roots on the wrong branch.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{alpha_adiabatic, beta_adiabatic};
use crate::gate::{gate_from_dynamics, GateReport};
use crate::model::{HamiltonianKind, PulseParams};
use crate::output;
use crate::propagator::{phase_of, PhaseOptions, DEFAULT_TOL};
use crate::{Error, Result, SystemParams};

/// How phases are evaluated inside the solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMethod {
    /// Unwrapped phase of the propagated amplitude.
    Exact,
    /// Dressed-state integral.
    Adiabatic,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveOptions {
    pub method: PhaseMethod,
    /// Propagation tolerance for [`PhaseMethod::Exact`].
    pub tol: f64,
    /// Required `|phase - target|` at the returned root (rad).
    pub residual_tol: f64,
    pub ladder_nodes: usize,
    pub window_halfwidth: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { method: PhaseMethod::Exact, tol: DEFAULT_TOL, residual_tol: 1e-6, ladder_nodes: 48, window_halfwidth: 4.5 }
    }
}

impl SolveOptions {
    fn pulse(&self, omega0: f64, omega_e: f64) -> PulseParams {
        PulseParams::new(omega0, omega_e).with_window(self.window_halfwidth)
    }

    pub fn alpha(&self, omega_e: f64, omega0: f64) -> Result<f64> {
        let s = SystemParams::new(self.pulse(omega0, omega_e), 0.0);
        match self.method {
            PhaseMethod::Exact => Ok(phase_of(&s, HamiltonianKind::SingleRotating, 0, PhaseOptions::with_tol(self.tol))?.phase),
            PhaseMethod::Adiabatic => alpha_adiabatic(&s),
        }
    }

    pub fn beta(&self, omega_e: f64, omega0: f64, v: f64) -> Result<f64> {
        let s = SystemParams::new(self.pulse(omega0, omega_e), v);
        match self.method {
            PhaseMethod::Exact => Ok(phase_of(&s, HamiltonianKind::TripleRotating, 0, PhaseOptions::with_tol(self.tol))?.phase),
            PhaseMethod::Adiabatic => beta_adiabatic(&s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Root {
    pub value: f64,
    /// `phase(value) - target`
    pub residual: f64,
    pub evaluations: usize,
}

const MAX_BISECTIONS: usize = 200;

/// Scans `nodes` (ascending) for the first sign change of `f` and bisects it.
fn continuation_root<F>(f: F, segments: &[Vec<f64>], residual_tol: f64) -> Result<Root>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut evaluations = 0;
    let mut first: Option<(f64, f64)> = None;
    let mut last: Option<(f64, f64)> = None;
    for nodes in segments {
        let mut prev: Option<(f64, f64)> = None;
        for &x in nodes {
            let fx = f(x)?;
            evaluations += 1;
            first.get_or_insert((x, fx));
            last = Some((x, fx));
            if fx.abs() <= residual_tol {
                return Ok(Root { value: x, residual: fx, evaluations });
            }
            if let Some((xa, fa)) = prev {
                if fa.signum() != fx.signum() {
                    return bisect(&f, (xa, fa), (x, fx), residual_tol, evaluations);
                }
            }
            prev = Some((x, fx));
        }
    }
    let (lo, f_first) = first.unwrap_or((f64::NAN, f64::NAN));
    let (hi, f_last) = last.unwrap_or((f64::NAN, f64::NAN));
    Err(Error::Bracketing { lo, hi, f_first, f_last })
}

fn bisect<F>(f: &F, mut a: (f64, f64), mut b: (f64, f64), residual_tol: f64, mut evaluations: usize) -> Result<Root>
where
    F: Fn(f64) -> Result<f64>,
{
    for _ in 0..MAX_BISECTIONS {
        let xm = 0.5 * (a.0 + b.0);
        if xm == a.0 || xm == b.0 {
            break;
        }
        let fm = f(xm)?;
        evaluations += 1;
        if fm.abs() <= residual_tol {
            return Ok(Root { value: xm, residual: fm, evaluations });
        }
        if fm.signum() == a.1.signum() {
            a = (xm, fm);
        } else {
            b = (xm, fm);
        }
    }
    Err(Error::NoConvergence(format!(
        "bracket [{}, {}] collapsed with residuals ({:e}, {:e}); the phase is discontinuous there",
        a.0, b.0, a.1, b.1
    )))
}

fn ladder(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    v[n - 1] = hi;
    v
}

fn check_bracket(bracket: (f64, f64)) -> Result<()> {
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
        return Err(Error::invalid("bracket", format!("need 0 <= lo < hi, got [{lo}, {hi}]")));
    }
    Ok(())
}

/// Finds `Omega_0` with `alpha(Omega_0) = alpha_target`.
///
/// The default bracket runs from 0 to about twice the far-detuned estimate
/// `sqrt(4 |alpha| |omega_e| / sqrt(pi/2))`.
pub fn solve_omega0_for_alpha(omega_e: f64, alpha_target: f64, bracket: Option<(f64, f64)>, opts: &SolveOptions) -> Result<Root> {
    if !alpha_target.is_finite() {
        return Err(Error::invalid("alpha_target", "must be finite"));
    }
    let bracket = bracket.unwrap_or_else(|| {
        let estimate = (4.0 * alpha_target.abs() * omega_e.abs() / (PI / 2.0).sqrt()).sqrt();
        (0.0, 2.0 * estimate + 5.0)
    });
    check_bracket(bracket)?;
    let nodes = ladder(bracket.0, bracket.1, opts.ladder_nodes);
    continuation_root(|o| Ok(opts.alpha(omega_e, o)? - alpha_target), &[nodes], opts.residual_tol)
}

/// Finds `V` with `beta(V) = beta_target` at fixed `(omega_e, Omega_0)`.
///
/// `beta(V)` is discontinuous across the two-photon resonance `V = 2 omega_e`;
/// a bracket containing it is split there and ladder nodes within the
/// non-adiabatic band `|V - 2 omega_e| < sqrt(Omega_0)` are skipped. The
/// segments are searched in ascending order of `V`.
pub fn solve_v_for_beta(omega_e: f64, omega0: f64, beta_target: f64, bracket: Option<(f64, f64)>, opts: &SolveOptions) -> Result<Root> {
    if !beta_target.is_finite() {
        return Err(Error::invalid("beta_target", "must be finite"));
    }
    let bracket = bracket.unwrap_or((0.0, 2.0 * omega_e.max(0.0) + 200.0));
    check_bracket(bracket)?;
    let (lo, hi) = bracket;
    let critical = 2.0 * omega_e;
    let band = omega0.sqrt().max(1e-9);
    let segments: Vec<Vec<f64>> = if critical > lo - band && critical < hi + band {
        let below = (lo, (critical - band).min(hi));
        let above = ((critical + band).max(lo), hi);
        let span = hi - lo;
        [below, above]
            .into_iter()
            .filter(|(a, b)| b >= a)
            .map(|(a, b)| {
                let n = ((opts.ladder_nodes as f64 * (b - a) / span).ceil() as usize).max(2);
                if b > a {
                    ladder(a, b, n)
                } else {
                    vec![a]
                }
            })
            .collect()
    } else {
        vec![ladder(lo, hi, opts.ladder_nodes)]
    };
    continuation_root(|v| Ok(opts.beta(omega_e, omega0, v)? - beta_target), &segments, opts.residual_tol)
}

/// Far-detuned optimum for `alpha = -2 pi`, `beta = -3 pi`:
/// `((128 pi)^{1/4} sqrt(omega_e), 2 omega_e + 16 sqrt(pi))` in units of `t_p = 1`.
pub fn analytic_optimum(omega_e: f64) -> Result<(f64, f64)> {
    if !(omega_e > 0.0) {
        return Err(Error::Precondition(format!("analytic_optimum requires omega_e > 0, got {omega_e}")));
    }
    Ok(((128.0 * PI).powf(0.25) * omega_e.sqrt(), 2.0 * omega_e + 16.0 * PI.sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("axis", "needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("axis", "values must be finite and strictly ascending"));
        }
        Ok(Axis { name: name.into(), values })
    }

    pub fn linspace(name: impl Into<String>, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lo.is_finite() && hi.is_finite()) || (n > 1 && hi <= lo) {
            return Err(Error::invalid("axis", format!("bad range [{lo}, {hi}] with {n} points")));
        }
        let values = if n == 1 { vec![lo] } else { ladder(lo, hi, n) };
        Axis::new(name, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellFailure {
    pub ix: usize,
    pub iy: usize,
    pub reason: String,
}

/// Scalar metric on an `(x, y)` grid, row-major with `y` outer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepGrid {
    pub metric: String,
    pub x: Axis,
    pub y: Axis,
    /// `values[iy * x.len() + ix]`; NaN for failed cells.
    pub values: Vec<f64>,
    pub failures: Vec<CellFailure>,
}

impl SweepGrid {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.x.len() + ix]
    }

    /// `(x, y, value)` for every cell.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let nx = self.x.len();
        self.values.iter().enumerate().map(move |(i, &v)| (self.x.values[i % nx], self.y.values[i / nx], v))
    }

    /// Comment line naming metric and axes, then `y,x,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = output::comment(&[("metric", &self.metric), ("x", &self.x.name), ("y", &self.y.name)]);
        out.push_str(&output::table(
            &[&self.y.name, &self.x.name, &self.metric],
            self.cells().map(|(x, y, v)| [y, x, v]),
        ));
        out
    }

    fn from_cells<T, F>(metric: &str, x: &Axis, y: &Axis, cells: &[std::result::Result<T, String>], f: F) -> Self
    where
        F: Fn(&T) -> f64,
    {
        let nx = x.len();
        let mut failures = Vec::new();
        let values = cells
            .iter()
            .enumerate()
            .map(|(i, c)| match c {
                Ok(r) => f(r),
                Err(reason) => {
                    failures.push(CellFailure { ix: i % nx, iy: i / nx, reason: reason.clone() });
                    f64::NAN
                }
            })
            .collect();
        SweepGrid { metric: metric.into(), x: x.clone(), y: y.clone(), values, failures }
    }
}

/// Evaluates `f` on every `(x, y)` cell in parallel; the result order is the
/// row-major cell order regardless of scheduling.
fn evaluate_cells<T, F>(x: &Axis, y: &Axis, f: F) -> Vec<std::result::Result<T, String>>
where
    T: Send,
    F: Fn(f64, f64) -> Result<T> + Sync,
{
    let nx = x.len();
    (0..nx * y.len())
        .into_par_iter()
        .map(|i| f(x.values[i % nx], y.values[i / nx]).map_err(|e| e.to_string()))
        .collect()
}

fn gate_at(omega_e: f64, omega0: f64, v: f64, tol: f64, window: f64) -> Result<GateReport> {
    gate_from_dynamics(&SystemParams::new(PulseParams::new(omega0, omega_e).with_window(window), v), tol)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SweepOptions {
    pub tol: f64,
    pub window_halfwidth: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { tol: DEFAULT_TOL, window_halfwidth: 4.5 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseMaps {
    pub alpha: SweepGrid,
    pub beta: SweepGrid,
    pub population_01: SweepGrid,
    pub population_11: SweepGrid,
}

/// Unwrapped `alpha` and `beta` (and return populations) over
/// `(omega_e, Omega_0)` at fixed `V`. Every cell, including the critical
/// lines, is propagated.
pub fn sweep_phase_maps(omega_e: &Axis, omega0: &Axis, v: f64, opts: &SweepOptions) -> Result<PhaseMaps> {
    SystemParams::gaussian(0.0, 0.0, v).validate()?;
    let cells = evaluate_cells(omega_e, omega0, |w, o| gate_at(w, o, v, opts.tol, opts.window_halfwidth));
    Ok(PhaseMaps {
        alpha: SweepGrid::from_cells("alpha", omega_e, omega0, &cells, |r| r.alpha),
        beta: SweepGrid::from_cells("beta", omega_e, omega0, &cells, |r| r.beta),
        population_01: SweepGrid::from_cells("population_01", omega_e, omega0, &cells, |r| r.return_populations.0),
        population_11: SweepGrid::from_cells("population_11", omega_e, omega0, &cells, |r| r.return_populations.1),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GateMaps {
    pub fidelity_cz: SweepGrid,
    pub entangling_power: SweepGrid,
    pub entangling_phase: SweepGrid,
}

/// CZ fidelity, entangling power and entangling phase over
/// `(omega_e, Omega_0 / V)`.
pub fn sweep_gate_metrics(omega_e: &Axis, ratio: &Axis, v: f64, opts: &SweepOptions) -> Result<GateMaps> {
    SystemParams::gaussian(0.0, 0.0, v).validate()?;
    if ratio.values[0] < 0.0 {
        return Err(Error::invalid("ratio", "Omega_0 / V must be >= 0"));
    }
    let cells = evaluate_cells(omega_e, ratio, |w, r| gate_at(w, r * v, v, opts.tol, opts.window_halfwidth));
    Ok(GateMaps {
        fidelity_cz: SweepGrid::from_cells("fidelity_cz", omega_e, ratio, &cells, |r| r.fidelity_cz),
        entangling_power: SweepGrid::from_cells("entangling_power", omega_e, ratio, &cells, |r| r.entangling_power),
        entangling_phase: SweepGrid::from_cells("entangling_phase", omega_e, ratio, &cells, |r| r.entangling_phase),
    })
}

/// One column of the optimal-`Omega_0` curve or of the `beta` locus.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    /// NaN when the solver failed; see `reason`.
    pub y: f64,
    pub reason: Option<String>,
}

impl CurvePoint {
    fn from_result(x: f64, r: Result<Root>) -> Self {
        match r {
            Ok(root) => CurvePoint { x, y: root.value, reason: None },
            Err(e) => CurvePoint { x, y: f64::NAN, reason: Some(e.to_string()) },
        }
    }
}

pub fn curve_csv(x_name: &str, y_name: &str, points: &[CurvePoint]) -> String {
    output::table(&[x_name, y_name], points.iter().map(|p| [p.x, p.y]))
}

#[derive(Clone, Debug, Serialize)]
pub struct FidelityLandscape {
    /// Optimal `Omega_0` per `omega_e` column.
    pub omega0_opt: Vec<CurvePoint>,
    pub fidelity_cz: SweepGrid,
    pub population_11: SweepGrid,
    /// `V` solving the `beta` condition per column, within the `V` axis range.
    pub beta_locus: Vec<CurvePoint>,
    /// Far-detuned locus `V = 2 omega_e + 16 sqrt(pi)` (only for `alpha = -2 pi`,
    /// `beta = -3 pi`, `omega_e > 0`; NaN elsewhere).
    pub analytic_locus: Vec<CurvePoint>,
}

/// Fidelity and `|11>` return over `(omega_e, V)` with `Omega_0` solved per
/// column for the phase target.
///
/// The targets are given for `omega_e > 0`; columns with `omega_e < 0` use
/// the mirrored targets `(-alpha_target, -beta_target)` since `alpha` takes
/// the sign of `-omega_e`.
pub fn sweep_fidelity_vs_v_omega(
    omega_e: &Axis,
    v: &Axis,
    alpha_target: f64,
    beta_target: f64,
    solve: &SolveOptions,
    opts: &SweepOptions,
) -> Result<FidelityLandscape> {
    if v.values[0] < 0.0 {
        return Err(Error::invalid("v", "must be >= 0"));
    }
    let solve = SolveOptions { window_halfwidth: opts.window_halfwidth, ..*solve };
    let signed = |w: f64| if w < 0.0 { (-alpha_target, -beta_target) } else { (alpha_target, beta_target) };

    let omega0_opt: Vec<CurvePoint> = omega_e
        .values
        .par_iter()
        .map(|&w| {
            let r = if w == 0.0 {
                Err(Error::CriticalPoint("omega_e = 0: alpha is 0 or pi for every Omega_0".into()))
            } else {
                solve_omega0_for_alpha(w, signed(w).0, None, &solve)
            };
            CurvePoint::from_result(w, r)
        })
        .collect();

    let column = |w: f64| -> Result<f64> {
        let i = omega_e.values.iter().position(|&x| x == w).expect("column on axis");
        let p = &omega0_opt[i];
        match &p.reason {
            None => Ok(p.y),
            Some(r) => Err(Error::Precondition(format!("no optimal Omega_0 for this column: {r}"))),
        }
    };
    let cells = evaluate_cells(omega_e, v, |w, vv| gate_at(w, column(w)?, vv, opts.tol, opts.window_halfwidth));

    let v_range = (v.values[0], *v.values.last().unwrap());
    let beta_locus: Vec<CurvePoint> = omega_e
        .values
        .par_iter()
        .zip(&omega0_opt)
        .map(|(&w, p)| {
            let r = match &p.reason {
                None if v_range.1 > v_range.0 => solve_v_for_beta(w, p.y, signed(w).1, Some(v_range), &solve),
                None => Err(Error::invalid("v", "locus needs a V range")),
                Some(r) => Err(Error::Precondition(r.clone())),
            };
            CurvePoint::from_result(w, r)
        })
        .collect();

    let is_design_target = (alpha_target + 2.0 * PI).abs() < 1e-12 && (beta_target + 3.0 * PI).abs() < 1e-12;
    let analytic_locus = omega_e
        .values
        .iter()
        .map(|&w| match analytic_optimum(w) {
            Ok((_, vv)) if is_design_target => CurvePoint { x: w, y: vv, reason: None },
            Ok(_) => CurvePoint { x: w, y: f64::NAN, reason: Some("analytic locus only for (-2 pi, -3 pi)".into()) },
            Err(e) => CurvePoint { x: w, y: f64::NAN, reason: Some(e.to_string()) },
        })
        .collect();

    Ok(FidelityLandscape {
        omega0_opt,
        fidelity_cz: SweepGrid::from_cells("fidelity_cz", omega_e, v, &cells, |r| r.fidelity_cz),
        population_11: SweepGrid::from_cells("population_11", omega_e, v, &cells, |r| r.return_populations.1),
        beta_locus,
        analytic_locus,
    })
}

/// Solved design point and its gate report.
#[derive(Clone, Debug, Serialize)]
pub struct DesignPoint {
    pub omega_e: f64,
    pub omega0: f64,
    pub v: f64,
    pub alpha_residual: f64,
    pub beta_residual: f64,
    pub gate: GateReport,
}

impl DesignPoint {
    pub fn system(&self, window_halfwidth: f64) -> SystemParams {
        SystemParams::new(PulseParams::new(self.omega0, self.omega_e).with_window(window_halfwidth), self.v)
    }
}

/// Solves `alpha(Omega_0) = alpha_target`, then `beta(V) = beta_target`, and
/// evaluates the exact gate there.
pub fn optimize(
    omega_e: f64,
    alpha_target: f64,
    beta_target: f64,
    omega0_bracket: Option<(f64, f64)>,
    v_bracket: Option<(f64, f64)>,
    opts: &SolveOptions,
) -> Result<DesignPoint> {
    let o = solve_omega0_for_alpha(omega_e, alpha_target, omega0_bracket, opts)?;
    let v = solve_v_for_beta(omega_e, o.value, beta_target, v_bracket, opts)?;
    let s = SystemParams::new(opts.pulse(o.value, omega_e), v.value);
    let gate = gate_from_dynamics(&s, opts.tol)?;
    Ok(DesignPoint { omega_e, omega0: o.value, v: v.value, alpha_residual: o.residual, beta_residual: v.residual, gate })
}
