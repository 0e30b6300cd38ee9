//! Closed-form adiabatic and limiting phases for the single-atom and `|11>`
//! problems.
//!
//! All phases are integrated over the full window `[-W, W]`. Dressed-state
//! energies are those of the rotating-frame Hamiltonians of [`crate::model`];
//! the tracked bare state always has zero energy when the drive is off, so
//! `phase = -integral(E_connected dt)`.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::model::{envelope, envelope_derivative, total_area, window_samples, SystemParams, MARGIN_SAMPLES};
use crate::quadrature::integrate;
use crate::{Error, Result, C64};

const QUAD_REL_TOL: f64 = 1e-10;
const QUAD_ABS_TOL: f64 = 1e-14;
/// Arccos arguments within this distance of +-1 are clamped.
const ARCCOS_CLAMP: f64 = 1e-12;

fn require_zero_detuning(s: &SystemParams) -> Result<()> {
    if s.delta != 0.0 {
        return Err(Error::NonzeroDetuning { delta: s.delta });
    }
    Ok(())
}

fn window_integral<F: Fn(f64) -> f64>(s: &SystemParams, f: F) -> f64 {
    let (lo, hi) = s.pulse.span();
    integrate(f, lo, hi, QUAD_REL_TOL, QUAD_ABS_TOL)
}

/// Dressed energies `(E+, E-) = (-omega_e +- Omega_e(t)) / 2` of the
/// single-atom rotating-frame Hamiltonian.
pub fn dressed_energies_single(t: f64, s: &SystemParams) -> Result<(f64, f64)> {
    require_zero_detuning(s)?;
    let w = s.pulse.omega_e;
    let omega = envelope(t, &s.pulse);
    let gap = w.hypot(omega);
    Ok((0.5 * (-w + gap), 0.5 * (-w - gap)))
}

/// Energy of the dressed state adiabatically connected to `|1>`: `E+` for
/// `omega_e > 0`, `E-` for `omega_e < 0`. Written without cancellation.
fn connected_single(omega: f64, w: f64) -> f64 {
    let gap = w.hypot(omega);
    0.5 * w.signum() * omega * omega / (gap + w.abs())
}

/// Adiabatic single-atom phase `alpha = -integral(E_connected dt)`.
pub fn alpha_adiabatic(s: &SystemParams) -> Result<f64> {
    s.validate()?;
    require_zero_detuning(s)?;
    let w = s.pulse.omega_e;
    if w == 0.0 {
        return Err(Error::CriticalPoint("omega_e = 0: dressed states degenerate; use rabi_case_alpha".into()));
    }
    if s.pulse.omega0 == 0.0 {
        return Ok(0.0);
    }
    Ok(-window_integral(s, |t| connected_single(envelope(t, &s.pulse), w)))
}

/// Far-detuned limit for the Gaussian envelope:
/// `alpha = -(1/4) sqrt(pi/2) Omega_0^2 t_p / omega_e`.
pub fn alpha_ae_limit(s: &SystemParams) -> Result<f64> {
    let w = s.pulse.omega_e;
    if w == 0.0 {
        return Err(Error::Precondition("alpha_ae_limit requires omega_e != 0".into()));
    }
    let p = &s.pulse;
    Ok(-0.25 * (PI / 2.0).sqrt() * p.omega0 * p.omega0 * p.t_p / w)
}

/// Second-order Magnus (average-Hamiltonian) phase: the effective shift
/// `Omega^2(t) / (4 omega_e)` on `|1>` integrated over the window.
pub fn magnus_effective_phase(s: &SystemParams) -> Result<f64> {
    s.validate()?;
    let w = s.pulse.omega_e;
    if w == 0.0 {
        return Err(Error::Precondition("magnus_effective_phase requires omega_e != 0".into()));
    }
    Ok(-window_integral(s, |t| {
        let omega = envelope(t, &s.pulse);
        omega * omega / (4.0 * w)
    }))
}

/// Phase of `|1>` at the Rabi critical point `omega_e = 0`: `0` if
/// `cos(S/2) > 0`, `pi` if `cos(S/2) < 0`, with `S` the total envelope area.
pub fn rabi_case_alpha(s: &SystemParams) -> Result<f64> {
    s.validate()?;
    require_zero_detuning(s)?;
    if s.pulse.omega_e != 0.0 {
        return Err(Error::Precondition("rabi_case_alpha requires omega_e = 0".into()));
    }
    let c = (0.5 * total_area(&s.pulse)).cos();
    if c.abs() <= 1e-10 {
        return Err(Error::FullTransfer { cos_half_area: c });
    }
    Ok(if c > 0.0 { 0.0 } else { PI })
}

/// Instantaneous spectrum of the three-level `{|11>, |W>, |rr>}` Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DressedSpectrum {
    /// `E_k` for `k = 0, 1, 2` in trigonometric-root order (not sorted).
    pub energies: [f64; 3],
    /// Branch connected to `|11>` for these `(omega_e, V)`, if not critical.
    pub branch_index: Option<usize>,
    pub p: f64,
    pub q: f64,
}

impl DressedSpectrum {
    pub fn connected(&self) -> Option<f64> {
        self.branch_index.map(|k| self.energies[k])
    }
}

/// Trigonometric roots of the characteristic cubic of
///
/// ```text
/// [ 0      O/√2      0        ]
/// [ O/√2   -w        O/√2     ]
/// [ 0      O/√2      V - 2w   ]
/// ```
///
/// Shifting by the mean diagonal `V/3 - w` gives the depressed cubic
/// `y^3 - p y + q = 0` with
/// `p = O^2 + w^2 - V w + V^2/3` and
/// `q = O^2 V/6 - V w^2/3 + V^2 w/3 - 2 V^3/27`, whose roots are
/// `y_k = sqrt(4p/3) cos((arccos(x) + 2 pi k)/3)` with
/// `x = -(3q/p) sqrt(3/(4p))`.
pub fn cubic_energies(omega: f64, omega_e: f64, v: f64) -> Result<([f64; 3], f64, f64)> {
    let w = omega_e;
    let o2 = omega * omega;
    let p = o2 + w * w - v * w + v * v / 3.0;
    let q = o2 * v / 6.0 - v * w * w / 3.0 + v * v * w / 3.0 - 2.0 * v * v * v / 27.0;
    if !(p > 0.0) {
        return Err(Error::Domain(format!("p = {p:e} <= 0 (fully degenerate spectrum)")));
    }
    let mut x = -(3.0 * q / p) * (3.0 / (4.0 * p)).sqrt();
    if x.abs() > 1.0 + ARCCOS_CLAMP {
        return Err(Error::Domain(format!("arccos argument {x} outside [-1, 1]")));
    }
    x = x.clamp(-1.0, 1.0);
    let theta = x.acos();
    let radius = (4.0 * p / 3.0).sqrt();
    let shift = v / 3.0 - w;
    let e = |k: f64| shift + radius * ((theta + TAU * k) / 3.0).cos();
    let d = v - 2.0 * w;
    let c2 = 0.5 * o2;
    let scale = radius + shift.abs();
    Ok(([0.0, 1.0, 2.0].map(|k| polish(e(k), w, d, c2, scale)), p, q))
}

/// Newton refinement on `det(H - E) = E (E + w)(d - E) + c^2 (2E - d)`.
///
/// The trigonometric form carries an absolute error of a few ulps of the
/// spectral scale; the root connected to `|11>` is tiny in the pulse tails,
/// where the adiabaticity normalizations need it to full relative precision.
/// Steps larger than roundoff level are rejected, so near-degenerate roots
/// are left untouched.
fn polish(mut e: f64, w: f64, d: f64, c2: f64, scale: f64) -> f64 {
    for _ in 0..2 {
        let f = e * (e + w) * (d - e) + c2 * (2.0 * e - d);
        let df = (e + w) * (d - e) + e * (d - e) - e * (e + w) + 2.0 * c2;
        if df == 0.0 {
            break;
        }
        let step = f / df;
        if !step.is_finite() || step.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        e -= step;
    }
    e
}

/// Branch of the three-level spectrum adiabatically connected to `|11>`:
/// `k = 1` for `omega_e < 0`, `k = 2` for `0 < omega_e < V/2`, `k = 0` for
/// `omega_e > V/2`.
pub fn branch_index(omega_e: f64, v: f64) -> Result<usize> {
    if omega_e == 0.0 {
        return Err(Error::CriticalPoint("omega_e = 0: |11> and |W> are degenerate".into()));
    }
    if omega_e == 0.5 * v {
        return Err(Error::CriticalPoint("omega_e = V/2: |11> and |rr> are degenerate".into()));
    }
    Ok(if omega_e < 0.0 {
        1
    } else if omega_e < 0.5 * v {
        2
    } else {
        0
    })
}

pub fn dressed_energies_three(t: f64, s: &SystemParams) -> Result<DressedSpectrum> {
    require_zero_detuning(s)?;
    let (energies, p, q) = cubic_energies(envelope(t, &s.pulse), s.pulse.omega_e, s.v)?;
    Ok(DressedSpectrum { energies, branch_index: branch_index(s.pulse.omega_e, s.v).ok(), p, q })
}

/// Adiabatic `|11>` phase `beta = -integral(E_k dt)` on the connected branch.
pub fn beta_adiabatic(s: &SystemParams) -> Result<f64> {
    s.validate()?;
    require_zero_detuning(s)?;
    let k = branch_index(s.pulse.omega_e, s.v)?;
    beta_on_branch(s, k)
}

/// `-integral(E_k dt)` for an explicit branch.
pub fn beta_on_branch(s: &SystemParams, k: usize) -> Result<f64> {
    if k > 2 {
        return Err(Error::invalid("k", format!("branch index must be 0, 1 or 2, got {k}")));
    }
    if s.pulse.omega0 == 0.0 {
        // the undriven spectrum is diagonal; the |11> energy is zero
        let (e, _, _) = cubic_energies(0.0, s.pulse.omega_e, s.v)?;
        let (lo, hi) = s.pulse.span();
        return Ok(-e[k] * (hi - lo));
    }
    let w = s.pulse.omega_e;
    // evaluate once up front so domain errors surface instead of NaN integrals
    cubic_energies(s.pulse.omega0, w, s.v)?;
    let failure = std::cell::RefCell::new(None);
    let value = window_integral(s, |t| match cubic_energies(envelope(t, &s.pulse), w, s.v) {
        Ok((e, _, _)) => e[k],
        Err(err) => {
            failure.borrow_mut().get_or_insert(err);
            f64::NAN
        }
    });
    match failure.into_inner() {
        Some(err) => Err(err),
        None => Ok(-value),
    }
}

fn require_ae_regime(s: &SystemParams) -> Result<f64> {
    let w = s.pulse.omega_e;
    if w == 0.0 {
        return Err(Error::Precondition("adiabatic-elimination limit requires omega_e != 0".into()));
    }
    let detuning = s.v - 2.0 * w;
    if detuning == 0.0 {
        return Err(Error::CriticalPoint("V = 2 omega_e: two-photon resonance; use resonant_case".into()));
    }
    Ok(detuning)
}

/// Adiabatic elimination of `|W>` and `|rr>`:
/// `beta = -(1/2) integral(Omega^2 / (omega_e + Omega^2 / (2 (V - 2 omega_e))) dt)`.
pub fn beta_ae_limit(s: &SystemParams) -> Result<f64> {
    s.validate()?;
    let detuning = require_ae_regime(s)?;
    let w = s.pulse.omega_e;
    Ok(-0.5
        * window_integral(s, |t| {
            let o2 = envelope(t, &s.pulse).powi(2);
            o2 / (w + o2 / (2.0 * detuning))
        }))
}

/// Gaussian closed form of [`beta_ae_limit`] expanded to fourth order in
/// `Omega_0`: `-(1/2) sqrt(pi/2) Omega_0^2 t_p / omega_e
/// + (sqrt(pi)/8) Omega_0^4 t_p / (omega_e^2 (V - 2 omega_e))`.
pub fn beta_ae_expanded(s: &SystemParams) -> Result<f64> {
    let detuning = require_ae_regime(s)?;
    let w = s.pulse.omega_e;
    let p = &s.pulse;
    let o2 = p.omega0 * p.omega0;
    Ok(-0.5 * (PI / 2.0).sqrt() * o2 * p.t_p / w + PI.sqrt() / 8.0 * o2 * o2 * p.t_p / (w * w * detuning))
}

/// Final amplitudes at the two-photon resonance `V = 2 omega_e`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResonantCase {
    pub a11: C64,
    pub arr: C64,
    /// `omega_e T/4 - (1/4) integral(sqrt(omega_e^2 + 4 Omega^2) dt)`, `T = 2W`.
    pub beta: f64,
}

impl ResonantCase {
    pub fn populations(&self) -> (f64, f64) {
        (self.a11.norm_sqr(), self.arr.norm_sqr())
    }
}

/// Adiabatic solution at `V = 2 omega_e`: `a11 = cos(beta) e^{i beta}`,
/// `a_rr = i sin(beta) e^{i beta}`. Amplitudes are in the three-level
/// rotating frame.
pub fn resonant_case(s: &SystemParams) -> Result<ResonantCase> {
    s.validate()?;
    require_zero_detuning(s)?;
    let w = s.pulse.omega_e;
    if (s.v - 2.0 * w).abs() > 1e-12 * s.v.abs().max(1.0) {
        return Err(Error::Precondition(format!("resonant_case requires V = 2 omega_e (V = {}, omega_e = {w})", s.v)));
    }
    if w <= 0.0 {
        return Err(Error::Precondition("resonant_case requires omega_e > 0".into()));
    }
    // omega_e T/4 - (1/4) int sqrt(w^2 + 4 O^2) = -(1/4) int 4 O^2 / (sqrt(w^2 + 4 O^2) + w)
    let beta = -window_integral(s, |t| {
        let o2 = envelope(t, &s.pulse).powi(2);
        o2 / ((w * w + 4.0 * o2).sqrt() + w)
    });
    let phase = C64::from_polar(1.0, beta);
    Ok(ResonantCase { a11: phase * beta.cos(), arr: C64::i() * phase * beta.sin(), beta })
}

/// Maximum of a non-adiabatic coupling ratio along the pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MarginReport {
    pub value: f64,
    /// Sample times excluded because a normalization factor was singular
    /// (`E_k = 0`, `V - 2 omega_e - E_k = 0` or `Omega = 0`).
    pub skipped: usize,
    /// Set when the pair `(E_k, E_l)` was degenerate at some sample; `value`
    /// is then infinite.
    pub degenerate: bool,
}

/// `N = sqrt(E^-2 + 2 Omega^-2 + (V - 2 omega_e - E)^-2)` for a root `E`.
///
/// Of the factors `E`, `E + omega_e` and `V - 2 omega_e - E`, at most one is
/// small for a nondegenerate root; it is recovered from the characteristic
/// equation `E (E + w)(d - E) = c^2 (d - 2E)` instead of by cancellation.
fn normalization(e: f64, omega: f64, w: f64, detuning: f64) -> Option<f64> {
    let c2 = 0.5 * omega * omega;
    let rhs = c2 * (detuning - 2.0 * e);
    let (mut a, b, mut c) = (e, e + w, detuning - e);
    if a.abs() <= b.abs().min(c.abs()) {
        a = rhs / (b * c);
    } else if c.abs() <= a.abs().min(b.abs()) {
        c = rhs / (a * b);
    }
    if a == 0.0 || c == 0.0 || !a.is_finite() || !c.is_finite() {
        return None;
    }
    Some((1.0 / (a * a) + 2.0 / (omega * omega) + 1.0 / (c * c)).sqrt())
}

/// Three-level adiabaticity margin for the pair `(k, l)`:
/// `max_t |2 dOmega/dt (E_k + E_l + 2 omega_e)| / (Omega^3 N_k N_l (E_l - E_k)^2)`.
pub fn adiabaticity_margin_triple(s: &SystemParams, k: usize, l: usize) -> Result<MarginReport> {
    s.validate()?;
    require_zero_detuning(s)?;
    if k > 2 || l > 2 || k == l {
        return Err(Error::invalid("k, l", format!("need two distinct branches in 0..3, got ({k}, {l})")));
    }
    let w = s.pulse.omega_e;
    let detuning = s.v - 2.0 * w;
    let mut report = MarginReport { value: 0.0, skipped: 0, degenerate: false };
    if s.pulse.omega0 == 0.0 {
        return Ok(report);
    }
    for t in window_samples(&s.pulse, MARGIN_SAMPLES) {
        let omega = envelope(t, &s.pulse);
        if omega < 1e-100 {
            report.skipped += 1;
            continue;
        }
        let (e, _, _) = cubic_energies(omega, w, s.v)?;
        let (ek, el) = (e[k], e[l]);
        let scale = e.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if (el - ek).abs() <= 1e-12 * scale {
            report.degenerate = true;
            report.value = f64::INFINITY;
            continue;
        }
        let (Some(nk), Some(nl)) = (normalization(ek, omega, w, detuning), normalization(el, omega, w, detuning)) else {
            report.skipped += 1;
            continue;
        };
        let num = (2.0 * envelope_derivative(t, &s.pulse) * (ek + el + 2.0 * w)).abs();
        let den = omega.powi(3) * nk * nl * (el - ek).powi(2);
        report.value = report.value.max(num / den);
    }
    Ok(report)
}

/// Largest margin between the connected branch and either other branch.
pub fn adiabaticity_margin_triple_connected(s: &SystemParams) -> Result<MarginReport> {
    let k = branch_index(s.pulse.omega_e, s.v)?;
    let mut out = MarginReport { value: 0.0, skipped: 0, degenerate: false };
    for l in (0..3).filter(|&l| l != k) {
        let r = adiabaticity_margin_triple(s, k, l)?;
        out.value = out.value.max(r.value);
        out.skipped += r.skipped;
        out.degenerate |= r.degenerate;
    }
    Ok(out)
}
