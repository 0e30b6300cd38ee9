//! Pulses, system parameters and the Hamiltonians in the frames used for
//! propagation.
//!
//! Basis conventions:
//!
//! - [`HamiltonianKind::SingleRotating`]: `{|1>, |r>}` of the driven atom, in
//!   the frame `R = diag(1, i e^{-i omega_e t})`.
//! - [`HamiltonianKind::TripleRotating`]: `{|11>, |W>, |rr>}` with
//!   `|W> = (|1r> + |r1>)/sqrt(2)`, in the frame
//!   `R = diag(1, i e^{-i omega_e t}, -e^{-2 i omega_e t})`.
//! - [`HamiltonianKind::FullRwa`]: `{|0>,|1>,|r>} x {|0>,|1>,|r>}` with the
//!   first atom as the slow index, i.e. index `3a + b` for `|a b>`.
//!
//! The one-photon detuning enters as the energy of each Rydberg excitation,
//! so the rotating-frame diagonals are `Delta - omega_e` for one excitation
//! and `V + 2 Delta - 2 omega_e` for two. This is the `(1/2) h . sigma`
//! convention of the single-atom Hamiltonian with `h_z = Delta`, shifted so
//! that `|1>` carries no energy.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::quadrature::integrate;
use crate::{Error, Result, C64};

/// Envelope value below which the pulse is treated as switched off at the
/// window edge, relative to the peak (`exp(-3^2)`).
const MIN_WINDOW_HALFWIDTH: f64 = 3.0;

/// Number of uniform samples used when maximizing adiabaticity margins.
pub const MARGIN_SAMPLES: usize = 4001;

/// Shape of the pulse envelope as a function of `x = t / t_p`, peak value 1 at
/// `x = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub enum Envelope {
    /// `exp(-x^2)`
    #[default]
    Gaussian,
    /// User-supplied profile and its derivative with respect to `x`.
    Custom { profile: fn(f64) -> f64, derivative: fn(f64) -> f64 },
}

impl Envelope {
    pub fn profile(&self, x: f64) -> f64 {
        match self {
            Envelope::Gaussian => (-x * x).exp(),
            Envelope::Custom { profile, .. } => profile(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Envelope::Gaussian => -2.0 * x * (-x * x).exp(),
            Envelope::Custom { derivative, .. } => derivative(x),
        }
    }
}

fn default_t_p() -> f64 {
    1.0
}

fn default_window() -> f64 {
    4.5
}

/// Drive parameters: envelope amplitude and width, modulation frequency and
/// truncation window.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseParams {
    /// Peak Rabi frequency `Omega_0`.
    pub omega0: f64,
    /// Pulse width; sets the time unit.
    #[serde(default = "default_t_p")]
    pub t_p: f64,
    /// Signed modulation frequency `omega_e`.
    pub omega_e: f64,
    /// Half-width of the integration window in units of `t_p`.
    #[serde(default = "default_window")]
    pub window_halfwidth: f64,
    #[serde(skip)]
    pub shape: Envelope,
}

impl PulseParams {
    pub fn new(omega0: f64, omega_e: f64) -> Self {
        PulseParams {
            omega0,
            t_p: default_t_p(),
            omega_e,
            window_halfwidth: default_window(),
            shape: Envelope::Gaussian,
        }
    }

    pub fn with_window(mut self, halfwidth: f64) -> Self {
        self.window_halfwidth = halfwidth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0.is_finite() && self.omega0 >= 0.0) {
            return Err(Error::invalid("omega0", format!("must be finite and >= 0, got {}", self.omega0)));
        }
        if !(self.t_p.is_finite() && self.t_p > 0.0) {
            return Err(Error::invalid("t_p", format!("must be finite and > 0, got {}", self.t_p)));
        }
        if !self.omega_e.is_finite() {
            return Err(Error::invalid("omega_e", "must be finite"));
        }
        if !(self.window_halfwidth.is_finite() && self.window_halfwidth >= MIN_WINDOW_HALFWIDTH) {
            return Err(Error::invalid(
                "window_halfwidth",
                format!("must be >= {MIN_WINDOW_HALFWIDTH}, got {}", self.window_halfwidth),
            ));
        }
        Ok(())
    }

    /// Absolute half-width `W` of the pulse support.
    pub fn window(&self) -> f64 {
        self.window_halfwidth * self.t_p
    }

    /// `(-W, W)`
    pub fn span(&self) -> (f64, f64) {
        let w = self.window();
        (-w, w)
    }
}

fn default_delta() -> f64 {
    0.0
}

/// Pulse plus the Rydberg-Rydberg interaction and the one-photon detuning.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub pulse: PulseParams,
    /// Rydberg-Rydberg interaction `V`.
    pub v: f64,
    /// One-photon detuning `Delta`.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl SystemParams {
    pub fn new(pulse: PulseParams, v: f64) -> Self {
        SystemParams { pulse, v, delta: 0.0 }
    }

    /// Gaussian pulse with the default window, `t_p = 1`, `Delta = 0`.
    pub fn gaussian(omega0: f64, omega_e: f64, v: f64) -> Self {
        SystemParams::new(PulseParams::new(omega0, omega_e), v)
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        if !(self.v.is_finite() && self.v >= 0.0) {
            return Err(Error::invalid("v", format!("must be finite and >= 0, got {}", self.v)));
        }
        if !self.delta.is_finite() {
            return Err(Error::invalid("delta", "must be finite"));
        }
        Ok(())
    }

    pub fn omega_e(&self) -> f64 {
        self.pulse.omega_e
    }

    pub fn omega0(&self) -> f64 {
        self.pulse.omega0
    }
}

/// Which Hamiltonian (and basis) to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    SingleRotating,
    TripleRotating,
    FullRwa,
}

impl HamiltonianKind {
    pub fn dim(self) -> usize {
        match self {
            HamiltonianKind::SingleRotating => 2,
            HamiltonianKind::TripleRotating => 3,
            HamiltonianKind::FullRwa => 9,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HamiltonianKind::SingleRotating => "single_rotating",
            HamiltonianKind::TripleRotating => "triple_rotating",
            HamiltonianKind::FullRwa => "full_rwa",
        }
    }

    /// Human-readable basis labels in index order.
    pub fn basis_labels(self) -> &'static [&'static str] {
        match self {
            HamiltonianKind::SingleRotating => &["1", "r"],
            HamiltonianKind::TripleRotating => &["11", "W", "rr"],
            HamiltonianKind::FullRwa => &["00", "01", "0r", "10", "11", "1r", "r0", "r1", "rr"],
        }
    }
}

impl fmt::Display for HamiltonianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HamiltonianKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_rotating" | "single" => Ok(HamiltonianKind::SingleRotating),
            "triple_rotating" | "triple" => Ok(HamiltonianKind::TripleRotating),
            "full_rwa" | "full" => Ok(HamiltonianKind::FullRwa),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

/// Index of `|a b>` in the full two-atom basis (`0`, `1`, `2 = r`).
pub const fn full_index(a: usize, b: usize) -> usize {
    3 * a + b
}

/// Envelope `Omega(t)`; exactly zero outside the window.
pub fn envelope(t: f64, p: &PulseParams) -> f64 {
    if t.abs() > p.window() {
        return 0.0;
    }
    p.omega0 * p.shape.profile(t / p.t_p)
}

/// Time derivative of the envelope; zero outside the window.
pub fn envelope_derivative(t: f64, p: &PulseParams) -> f64 {
    if t.abs() > p.window() {
        return 0.0;
    }
    p.omega0 * p.shape.derivative(t / p.t_p) / p.t_p
}

/// Field quadratures `(Omega_x, Omega_y) = Omega(t) (sin(omega_e t), cos(omega_e t))`.
pub fn quadratures(t: f64, p: &PulseParams) -> (f64, f64) {
    let omega = envelope(t, p);
    let (s, c) = (p.omega_e * t).sin_cos();
    (omega * s, omega * c)
}

/// Envelope area accumulated from the window start up to `t`.
pub fn pulse_area(p: &PulseParams, t: f64) -> f64 {
    let (lo, hi) = p.span();
    let upper = t.min(hi);
    if upper <= lo || p.omega0 == 0.0 {
        return 0.0;
    }
    integrate(|x| envelope(x, p), lo, upper, 1e-12, 1e-14 * p.omega0 * p.t_p)
}

/// Total envelope area over the window.
pub fn total_area(p: &PulseParams) -> f64 {
    pulse_area(p, p.window())
}

pub(crate) type Mat2 = [[C64; 2]; 2];
pub(crate) type Mat3 = [[C64; 3]; 3];
pub(crate) type Mat9 = [[C64; 9]; 9];

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub(crate) fn single_matrix(t: f64, s: &SystemParams) -> Mat2 {
    let half = 0.5 * envelope(t, &s.pulse);
    [[re(0.0), re(half)], [re(half), re(s.delta - s.pulse.omega_e)]]
}

pub(crate) fn triple_matrix(t: f64, s: &SystemParams) -> Mat3 {
    let c = envelope(t, &s.pulse) * FRAC_1_SQRT_2;
    let w = s.pulse.omega_e;
    [
        [re(0.0), re(c), re(0.0)],
        [re(c), re(s.delta - w), re(c)],
        [re(0.0), re(c), re(s.v + 2.0 * s.delta - 2.0 * w)],
    ]
}

pub(crate) fn full_matrix(t: f64, s: &SystemParams) -> Mat9 {
    // single-atom block on {|0>,|1>,|r>}: <1|h|r> = -(i/2) Omega e^{i omega_e t}
    let omega = envelope(t, &s.pulse);
    let coupling = C64::new(0.0, -0.5 * omega) * C64::from_polar(1.0, s.pulse.omega_e * t);
    let mut h1 = [[C64::new(0.0, 0.0); 3]; 3];
    h1[1][2] = coupling;
    h1[2][1] = coupling.conj();
    h1[2][2] = re(s.delta);

    let mut h = [[C64::new(0.0, 0.0); 9]; 9];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                // h1 (x) 1
                h[full_index(a, b)][full_index(c, b)] += h1[a][c];
                // 1 (x) h1
                h[full_index(a, b)][full_index(a, c)] += h1[b][c];
            }
        }
    }
    h[full_index(2, 2)][full_index(2, 2)] += re(s.v);
    h
}

/// Hamiltonian of the requested kind at time `t`, as a dense Hermitian matrix.
pub fn hamiltonian(t: f64, s: &SystemParams, kind: HamiltonianKind) -> DMatrix<C64> {
    match kind {
        HamiltonianKind::SingleRotating => {
            let m = single_matrix(t, s);
            DMatrix::from_fn(2, 2, |i, j| m[i][j])
        }
        HamiltonianKind::TripleRotating => {
            let m = triple_matrix(t, s);
            DMatrix::from_fn(3, 3, |i, j| m[i][j])
        }
        HamiltonianKind::FullRwa => {
            let m = full_matrix(t, s);
            DMatrix::from_fn(9, 9, |i, j| m[i][j])
        }
    }
}

/// Diagonal of the frame transformation `R(t)` taking rotating-frame
/// amplitudes of `kind` to the field-interaction (RWA) frame:
/// `psi_rwa = R(t) psi_rot`. For [`HamiltonianKind::FullRwa`] this is
/// `R_1 (x) R_1` with `R_1 = diag(1, 1, i e^{-i omega_e t})`.
pub fn frame_rotation(t: f64, omega_e: f64, kind: HamiltonianKind) -> Vec<C64> {
    let rot = C64::i() * C64::from_polar(1.0, -omega_e * t);
    match kind {
        HamiltonianKind::SingleRotating => vec![re(1.0), rot],
        HamiltonianKind::TripleRotating => vec![re(1.0), rot, rot * rot],
        HamiltonianKind::FullRwa => {
            let r1 = [re(1.0), re(1.0), rot];
            let mut out = Vec::with_capacity(9);
            for a in r1 {
                for b in r1 {
                    out.push(a * b);
                }
            }
            out
        }
    }
}

/// Diagonal of `R^{-1} dR/dt` for [`frame_rotation`]: `-i omega_e` per
/// Rydberg excitation.
pub fn frame_generator(omega_e: f64, kind: HamiltonianKind) -> Vec<C64> {
    let per = C64::new(0.0, -omega_e);
    match kind {
        HamiltonianKind::SingleRotating => vec![re(0.0), per],
        HamiltonianKind::TripleRotating => vec![re(0.0), per, per * 2.0],
        HamiltonianKind::FullRwa => {
            let n = [0.0, 0.0, 1.0];
            let mut out = Vec::with_capacity(9);
            for a in n {
                for b in n {
                    out.push(per * (a + b));
                }
            }
            out
        }
    }
}

/// Uniform sample times spanning the pulse window.
pub(crate) fn window_samples(p: &PulseParams, n: usize) -> impl Iterator<Item = f64> {
    let (lo, hi) = p.span();
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |i| lo + step * i as f64)
}

/// Single-atom adiabaticity margin `max_t |omega_e dOmega/dt| / (2 Omega_e^3)`
/// with `Omega_e = sqrt(omega_e^2 + Omega^2)`.
///
/// Returns `+inf` at the critical point `omega_e = 0` with a nonzero pulse,
/// where the dressed states are degenerate at the window edges.
pub fn adiabaticity_margin_single(s: &SystemParams) -> Result<f64> {
    s.validate()?;
    if s.delta != 0.0 {
        return Err(Error::NonzeroDetuning { delta: s.delta });
    }
    let p = &s.pulse;
    if p.omega0 == 0.0 {
        return Ok(0.0);
    }
    if p.omega_e == 0.0 {
        return Ok(f64::INFINITY);
    }
    let w = p.omega_e;
    let margin = window_samples(p, MARGIN_SAMPLES)
        .map(|t| {
            let omega = envelope(t, p);
            let gap = (w * w + omega * omega).sqrt();
            (w * envelope_derivative(t, p)).abs() / (2.0 * gap * gap * gap)
        })
        .fold(0.0, f64::max);
    Ok(margin)
}

/// Approximate peak-Rabi-frequency thresholds (in units of `1/t_p`, with
/// `t_p = 1`) beyond which adiabatic return fails near `omega_e = 0` and near
/// `2 omega_e = V`: `(2 omega_e^2, (V - 2 omega_e)^2)`.
pub fn nonadiabatic_boundaries(omega_e: f64, v: f64) -> (f64, f64) {
    (2.0 * omega_e * omega_e, (v - 2.0 * omega_e).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_hermitian_defect(m: &DMatrix<C64>) -> f64 {
        (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn envelope_values() {
        let p = PulseParams::new(2.0, 0.0);
        assert_eq!(envelope(0.0, &p), 2.0);
        assert!((envelope(1.0, &p) - 2.0 / std::f64::consts::E).abs() < 1e-15);
        assert_eq!(envelope(10.0, &p), 0.0);
        assert_eq!(envelope_derivative(10.0, &p), 0.0);
    }

    #[test]
    fn quadrature_values() {
        let p = PulseParams::new(1.0, 10.0);
        assert_eq!(quadratures(0.0, &p), (0.0, 1.0));
        let t = PI / 20.0;
        let (x, y) = quadratures(t, &p);
        assert!((x - (-(t * t)).exp()).abs() < 1e-15);
        assert!(y.abs() < 1e-15);
    }

    #[test]
    fn area_values() {
        let p = PulseParams::new(1.0, 0.0);
        let full = total_area(&p);
        let exact = PI.sqrt() * libm::erf(4.5);
        assert!((full - exact).abs() < 1e-10 * exact);
        assert!((pulse_area(&p, 0.0) - exact / 2.0).abs() < 1e-10);
        assert_eq!(total_area(&PulseParams::new(0.0, 3.0)), 0.0);
        assert_eq!(pulse_area(&p, -100.0), 0.0);
    }

    #[test]
    fn single_rotating_without_drive_is_diagonal() {
        let s = SystemParams::gaussian(1.0, 7.0, 0.0);
        let h = hamiltonian(20.0, &s, HamiltonianKind::SingleRotating);
        assert_eq!(h[(0, 0)], re(0.0));
        assert_eq!(h[(1, 1)], re(-7.0));
        assert_eq!(h[(0, 1)], re(0.0));
    }

    #[test]
    fn triple_rotating_two_photon_resonance() {
        let s = SystemParams::gaussian(3.0, 10.0, 20.0);
        let h = hamiltonian(-50.0, &s, HamiltonianKind::TripleRotating);
        let diag: Vec<f64> = (0..3).map(|i| h[(i, i)].re).collect();
        assert_eq!(diag, vec![0.0, -10.0, 0.0]);
    }

    #[test]
    fn all_kinds_hermitian() {
        let s = SystemParams::gaussian(7.3, -3.1, 41.0).with_delta(0.7);
        for kind in [HamiltonianKind::SingleRotating, HamiltonianKind::TripleRotating, HamiltonianKind::FullRwa] {
            for i in 0..50 {
                let t = -4.5 + 0.18 * i as f64;
                assert!(max_hermitian_defect(&hamiltonian(t, &s, kind)) <= 1e-14);
            }
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("triple_rotating".parse::<HamiltonianKind>().unwrap(), HamiltonianKind::TripleRotating);
        assert!(matches!("quintuple".parse::<HamiltonianKind>(), Err(Error::UnknownKind(_))));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut p = PulseParams::new(1.0, 1.0);
        p.t_p = -1.0;
        assert!(p.validate().is_err());
        let p = PulseParams::new(1.0, 1.0).with_window(2.0);
        assert!(p.validate().is_err());
        assert!(SystemParams::gaussian(-1.0, 1.0, 0.0).validate().is_err());
        assert!(SystemParams::gaussian(1.0, 1.0, -1.0).validate().is_err());
    }

    #[test]
    fn boundaries() {
        assert_eq!(nonadiabatic_boundaries(1.0, 50.0), (2.0, 2304.0));
        assert_eq!(nonadiabatic_boundaries(25.0, 50.0), (1250.0, 0.0));
        assert_eq!(nonadiabatic_boundaries(10.0, 50.0), (200.0, 900.0));
    }

    #[test]
    fn margin_edge_cases() {
        assert_eq!(adiabaticity_margin_single(&SystemParams::gaussian(0.0, 3.0, 0.0)).unwrap(), 0.0);
        assert!(adiabaticity_margin_single(&SystemParams::gaussian(1.0, 0.0, 0.0)).unwrap().is_infinite());
        let err = adiabaticity_margin_single(&SystemParams::gaussian(1.0, 1.0, 0.0).with_delta(0.1));
        assert!(matches!(err, Err(Error::NonzeroDetuning { .. })));
    }

    #[test]
    fn custom_envelope_hook() {
        fn flat(x: f64) -> f64 {
            1.0 / x.cosh()
        }
        fn flat_d(x: f64) -> f64 {
            -x.tanh() / x.cosh()
        }
        let mut p = PulseParams::new(2.0, 0.0);
        p.shape = Envelope::Custom { profile: flat, derivative: flat_d };
        assert_eq!(envelope(0.0, &p), 2.0);
        assert!((envelope_derivative(0.5, &p) - 2.0 * flat_d(0.5)).abs() < 1e-15);
    }
}
