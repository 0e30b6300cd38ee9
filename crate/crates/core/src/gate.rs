//! The diagonal two-qubit phase gate `diag(1, e^{i alpha}, e^{i alpha}, e^{i beta})`
//! in the computational basis `{|00>, |01>, |10>, |11>}` and its figures of
//! merit.

use std::f64::consts::PI;

use serde::Serialize;

use crate::model::HamiltonianKind;
use crate::propagator::{phase_of, PhaseOptions};
use crate::{Result, SystemParams, C64};

/// Leakage above which the gate is not unitary on the computational space to
/// a useful accuracy.
pub const LEAKAGE_FLAG_THRESHOLD: f64 = 1e-4;

/// Maximum entangling power of a two-qubit gate.
pub const MAX_ENTANGLING_POWER: f64 = 2.0 / 9.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateReport {
    pub alpha: f64,
    pub beta: f64,
    /// Diagonal of the gate unitary.
    #[serde(skip)]
    pub unitary: [C64; 4],
    pub fidelity_cz: f64,
    pub entangling_power: f64,
    /// `2 alpha - beta`, unreduced.
    pub entangling_phase: f64,
    /// `1 - min(return populations)`; zero for gates assembled from phases.
    pub leakage: f64,
    #[serde(skip)]
    pub leakage_flagged: bool,
    /// Final populations of `|01>` (equivalently `|10>`) and `|11>`.
    #[serde(skip)]
    pub return_populations: (f64, f64),
}

pub fn unitary_diagonal(alpha: f64, beta: f64) -> [C64; 4] {
    let a = C64::from_polar(1.0, alpha);
    [C64::new(1.0, 0.0), a, a, C64::from_polar(1.0, beta)]
}

/// Builds the gate from its phases; leakage is zero.
pub fn assemble(alpha: f64, beta: f64) -> GateReport {
    GateReport {
        alpha,
        beta,
        unitary: unitary_diagonal(alpha, beta),
        fidelity_cz: cz_fidelity(alpha, beta),
        entangling_power: entangling_power(alpha, beta),
        entangling_phase: 2.0 * alpha - beta,
        leakage: 0.0,
        leakage_flagged: false,
        return_populations: (1.0, 1.0),
    }
}

/// Hilbert-Schmidt fidelity `|Tr(U_cz^dag U)|^2 / 16` with
/// `U_cz = diag(1, 1, 1, -1)`, in closed form.
pub fn cz_fidelity(alpha: f64, beta: f64) -> f64 {
    let f = (3.0 + 2.0 * alpha.cos() - beta.cos() - 2.0 * (alpha - beta).cos()) / 8.0;
    f.clamp(0.0, 1.0)
}

/// The same fidelity from the matrix trace.
pub fn cz_fidelity_trace(u: &[C64; 4]) -> f64 {
    let cz = [1.0, 1.0, 1.0, -1.0];
    let tr: C64 = u.iter().zip(cz).map(|(x, c)| x * c).sum();
    tr.norm_sqr() / 16.0
}

/// `(2/9) sin^2((2 alpha - beta)/2)`
pub fn entangling_power(alpha: f64, beta: f64) -> f64 {
    MAX_ENTANGLING_POWER * (0.5 * (2.0 * alpha - beta)).sin().powi(2)
}

/// Parameters of `U = e^{i g} (e^{i a sz} (x) e^{i a sz}) e^{-i c sz (x) sz}`
/// with `sz = |1><1| - |0><0|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CartanFactors {
    /// `g = (2 alpha + beta)/4`
    pub global_phase: f64,
    /// `a = beta/4`
    pub local_angle: f64,
    /// `c = (2 alpha - beta)/4`
    pub entangling: f64,
}

pub fn cartan_factors(alpha: f64, beta: f64) -> CartanFactors {
    CartanFactors {
        global_phase: (2.0 * alpha + beta) / 4.0,
        local_angle: beta / 4.0,
        entangling: (2.0 * alpha - beta) / 4.0,
    }
}

impl CartanFactors {
    /// Diagonal of the reassembled unitary.
    pub fn reassemble(&self) -> [C64; 4] {
        let sz = [-1.0, 1.0];
        let mut out = [C64::new(0.0, 0.0); 4];
        for a in 0..2 {
            for b in 0..2 {
                let phase = self.global_phase + self.local_angle * (sz[a] + sz[b]) - self.entangling * sz[a] * sz[b];
                out[2 * a + b] = C64::from_polar(1.0, phase);
            }
        }
        out
    }
}

/// Propagates `|01>` in the single-atom frame and `|11>` in the three-level
/// frame, and assembles the gate from the unwrapped phases.
pub fn gate_from_dynamics(s: &SystemParams, tol: f64) -> Result<GateReport> {
    let opts = PhaseOptions::with_tol(tol);
    let single = phase_of(s, HamiltonianKind::SingleRotating, 0, opts)?;
    let pair = phase_of(s, HamiltonianKind::TripleRotating, 0, opts)?;
    let mut report = assemble(single.phase, pair.phase);
    report.return_populations = (single.return_population, pair.return_population);
    report.leakage = (1.0 - single.return_population.min(pair.return_population)).max(0.0);
    report.leakage_flagged = report.leakage > LEAKAGE_FLAG_THRESHOLD;
    Ok(report)
}

/// Reduces `x` to `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_cz() {
        let id = assemble(0.0, 0.0);
        assert!((id.fidelity_cz - 0.25).abs() < 1e-15);
        assert_eq!(id.entangling_power, 0.0);
        let cz = assemble(-2.0 * PI, -3.0 * PI);
        assert!((cz.fidelity_cz - 1.0).abs() < 1e-12);
        assert!((cz.entangling_power - MAX_ENTANGLING_POWER).abs() < 1e-12);
        assert!((cz_fidelity(PI, 0.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn entangling_power_values() {
        for a in [-3.0, 0.2, 7.0] {
            assert!(entangling_power(a, 2.0 * a) < 1e-30);
        }
        assert!((entangling_power(0.0, -PI / 2.0) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn cartan_design_point() {
        let c = cartan_factors(-2.0 * PI, -3.0 * PI);
        assert!((c.global_phase + 1.75 * PI).abs() < 1e-15);
        assert!((c.local_angle + 0.75 * PI).abs() < 1e-15);
        assert!((c.entangling + 0.25 * PI).abs() < 1e-15);
        let u = c.reassemble();
        // CZ up to a global phase
        let g = u[0];
        for (x, s) in u.iter().zip([1.0, 1.0, 1.0, -1.0]) {
            assert!((x / g - s).norm() < 1e-12);
        }
    }

    #[test]
    fn wrap() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn serialized_fields() {
        let v = serde_json::to_value(assemble(0.1, 0.3)).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["alpha", "beta", "entangling_phase", "entangling_power", "fidelity_cz", "leakage"]);
    }
}
