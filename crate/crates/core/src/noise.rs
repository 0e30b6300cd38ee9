//! Robustness of a design point against parameter errors.
//!
//! Errors are relative, `chi = chi_opt (1 + eps_chi)`, except the one-photon
//! detuning which is scanned as `Delta / V`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gate::gate_from_dynamics;
use crate::output;
use crate::{Error, Result, SystemParams};

/// Draws beyond this many standard deviations are rejected and redrawn.
pub const TRUNCATION_SIGMAS: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub sigma_omega0: f64,
    #[serde(default)]
    pub sigma_v: f64,
    #[serde(default)]
    pub sigma_omega_e: f64,
    pub samples: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("sigma_omega0", self.sigma_omega0), ("sigma_v", self.sigma_v), ("sigma_omega_e", self.sigma_omega_e)] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {s}")));
            }
        }
        if self.samples == 0 {
            return Err(Error::invalid("samples", "must be >= 1"));
        }
        Ok(())
    }
}

/// Coefficients of the quadratic loss `1 - F = sum_chi beta_chi eps_chi^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SensitivityCoeffs {
    pub beta_omega0: f64,
    pub beta_v: f64,
    pub beta_omega_e: f64,
}

impl SensitivityCoeffs {
    /// Predicted mean fidelity for independent errors with the given relative
    /// standard deviations, starting from `f0`.
    pub fn predicted_mean(&self, f0: f64, spec: &NoiseSpec) -> f64 {
        f0 - self.beta_omega0 * spec.sigma_omega0.powi(2)
            - self.beta_v * spec.sigma_v.powi(2)
            - self.beta_omega_e * spec.sigma_omega_e.powi(2)
    }

    pub fn get(&self, chi: Chi) -> f64 {
        match chi {
            Chi::Omega0 => self.beta_omega0,
            Chi::V => self.beta_v,
            Chi::OmegaE => self.beta_omega_e,
        }
    }
}

/// Far-detuned closed form at `x = omega_e t_p`:
/// `beta_Omega0 = 3 pi^2`,
/// `beta_V = (3 pi x^2 + 48 pi^{3/2} x + 192 pi^2) / 1024`,
/// `beta_omega_e = (3 pi x^2 + 32 pi^{3/2} x + 768 pi^2) / 1024`.
pub fn sensitivity_coeffs(omega_e_tp: f64) -> Result<SensitivityCoeffs> {
    let x = omega_e_tp;
    if !(x > 0.0) {
        return Err(Error::Precondition(format!("sensitivity_coeffs requires omega_e t_p > 0, got {x}")));
    }
    let p32 = PI.powf(1.5);
    Ok(SensitivityCoeffs {
        beta_omega0: 3.0 * PI * PI,
        beta_v: (3.0 * PI * x * x + 48.0 * p32 * x + 192.0 * PI * PI) / 1024.0,
        beta_omega_e: (3.0 * PI * x * x + 32.0 * p32 * x + 768.0 * PI * PI) / 1024.0,
    })
}

/// Perturbed parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chi {
    Omega0,
    V,
    OmegaE,
}

impl Chi {
    pub const ALL: [Chi; 3] = [Chi::Omega0, Chi::V, Chi::OmegaE];

    pub fn name(self) -> &'static str {
        match self {
            Chi::Omega0 => "omega0",
            Chi::V => "v",
            Chi::OmegaE => "omega_e",
        }
    }
}

fn perturbed(s: &SystemParams, eps: [f64; 3]) -> SystemParams {
    let mut p = *s;
    p.pulse.omega0 *= 1.0 + eps[0];
    p.v *= 1.0 + eps[1];
    p.pulse.omega_e *= 1.0 + eps[2];
    p
}

fn unit(chi: Chi, eps: f64) -> [f64; 3] {
    let mut e = [0.0; 3];
    e[chi as usize] = eps;
    e
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveSample {
    pub x: f64,
    /// NaN when the propagation failed.
    pub fidelity: f64,
    pub leakage: f64,
    pub error: Option<String>,
}

/// Least-squares fit of `1 - F = beta x^2` through the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraticFit {
    pub beta: f64,
    /// Coefficient of determination of `F` against `1 - beta x^2`.
    pub r_squared: f64,
    pub points: usize,
}

pub fn quadratic_fit(samples: &[CurveSample]) -> QuadraticFit {
    let ok: Vec<(f64, f64)> = samples.iter().filter(|s| s.fidelity.is_finite()).map(|s| (s.x, s.fidelity)).collect();
    let num: f64 = ok.iter().map(|(x, f)| (1.0 - f) * x * x).sum();
    let den: f64 = ok.iter().map(|(x, _)| x.powi(4)).sum();
    let beta = if den > 0.0 { num / den } else { f64::NAN };
    let mean = ok.iter().map(|(_, f)| f).sum::<f64>() / ok.len() as f64;
    let ss_tot: f64 = ok.iter().map(|(_, f)| (f - mean).powi(2)).sum();
    let ss_res: f64 = ok.iter().map(|(x, f)| (f - (1.0 - beta * x * x)).powi(2)).sum();
    QuadraticFit { beta, r_squared: 1.0 - ss_res / ss_tot, points: ok.len() }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Curve {
    pub parameter: String,
    pub samples: Vec<CurveSample>,
}

impl Curve {
    pub fn to_csv(&self) -> String {
        output::table(&[&self.parameter, "fidelity_cz", "leakage"], self.samples.iter().map(|s| [s.x, s.fidelity, s.leakage]))
    }

    /// Sample with the highest fidelity.
    pub fn argmax(&self) -> Option<&CurveSample> {
        self.samples.iter().filter(|s| s.fidelity.is_finite()).max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
    }
}

fn evaluate_curve<F>(name: &str, xs: &[f64], tol: f64, f: F) -> Curve
where
    F: Fn(f64) -> Result<SystemParams> + Sync,
{
    let samples = xs
        .par_iter()
        .map(|&x| match f(x).and_then(|p| gate_from_dynamics(&p, tol)) {
            Ok(g) => CurveSample { x, fidelity: g.fidelity_cz, leakage: g.leakage, error: None },
            Err(e) => CurveSample { x, fidelity: f64::NAN, leakage: f64::NAN, error: Some(e.to_string()) },
        })
        .collect();
    Curve { parameter: name.into(), samples }
}

/// Exact fidelity at `chi = chi_opt (1 + eps)` for each `eps`.
pub fn fidelity_vs_relative_error(design: &SystemParams, chi: Chi, eps: &[f64], tol: f64) -> Result<Curve> {
    design.validate()?;
    Ok(evaluate_curve(&format!("eps_{}", chi.name()), eps, tol, |e| {
        let p = perturbed(design, unit(chi, e));
        p.validate()?;
        Ok(p)
    }))
}

/// Exact fidelity with one-photon detuning `Delta = r V` for each ratio `r`.
pub fn fidelity_vs_detuning(design: &SystemParams, ratios: &[f64], tol: f64) -> Result<Curve> {
    design.validate()?;
    Ok(evaluate_curve("delta_over_v", ratios, tol, |r| Ok(design.with_delta(r * design.v))))
}

/// Curvatures fitted to exact fidelity curves over `|eps| <= eps_max`.
pub fn fitted_coeffs(design: &SystemParams, eps_max: f64, points: usize, tol: f64) -> Result<(SensitivityCoeffs, [QuadraticFit; 3])> {
    let n = points.max(3);
    let eps: Vec<f64> = (0..n).map(|i| -eps_max + 2.0 * eps_max * i as f64 / (n - 1) as f64).collect();
    let mut fits = [QuadraticFit { beta: 0.0, r_squared: 0.0, points: 0 }; 3];
    for chi in Chi::ALL {
        fits[chi as usize] = quadratic_fit(&fidelity_vs_relative_error(design, chi, &eps, tol)?.samples);
    }
    let coeffs = SensitivityCoeffs { beta_omega0: fits[0].beta, beta_v: fits[1].beta, beta_omega_e: fits[2].beta };
    Ok((coeffs, fits))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// `bins` equal-width bins spanning the finite data.
    pub fn of(data: &[f64], bins: usize) -> Self {
        let finite: Vec<f64> = data.iter().copied().filter(|x| x.is_finite()).collect();
        let bins = bins.max(1);
        if finite.is_empty() {
            return Histogram { edges: vec![], counts: vec![] };
        }
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi == lo {
            return Histogram { edges: vec![lo, hi], counts: vec![finite.len()] };
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
        let mut counts = vec![0; bins];
        for x in finite {
            let i = (((x - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{c}\n", output::number(self.edges[i]), output::number(self.edges[i + 1])));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub summary: MonteCarloSummary,
    /// Samples whose propagation failed; excluded from the statistics.
    pub failures: usize,
    pub fidelities: Vec<f64>,
    pub histogram: Histogram,
}

impl MonteCarloResult {
    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        self.summary.std / (self.summary.n as f64).sqrt()
    }
}

fn truncated_normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= TRUNCATION_SIGMAS {
            return sigma * z;
        }
    }
}

/// Relative errors `(eps_Omega0, eps_V, eps_omega_e)` of sample `index`.
///
/// Every sample owns the ChaCha stream `index` of the seed, so the draws do
/// not depend on evaluation order or thread count.
pub fn sample_errors(spec: &NoiseSpec, index: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    [
        truncated_normal(&mut rng, spec.sigma_omega0),
        truncated_normal(&mut rng, spec.sigma_v),
        truncated_normal(&mut rng, spec.sigma_omega_e),
    ]
}

/// Mean and spread of the exact fidelity under independent Gaussian relative
/// errors.
pub fn monte_carlo_fidelity(design: &SystemParams, spec: &NoiseSpec, tol: f64, bins: usize) -> Result<MonteCarloResult> {
    design.validate()?;
    spec.validate()?;
    let fidelities: Vec<f64> = (0..spec.samples as u64)
        .into_par_iter()
        .map(|i| {
            let p = perturbed(design, sample_errors(spec, i));
            p.validate().and_then(|_| gate_from_dynamics(&p, tol)).map(|g| g.fidelity_cz).unwrap_or(f64::NAN)
        })
        .collect();
    let ok: Vec<f64> = fidelities.iter().copied().filter(|f| f.is_finite()).collect();
    let n = ok.len();
    if n == 0 {
        return Err(Error::NoConvergence("every Monte-Carlo sample failed to propagate".into()));
    }
    let mean = ok.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { ok.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    Ok(MonteCarloResult {
        summary: MonteCarloSummary { mean, std: var.sqrt(), n, seed: spec.seed },
        failures: fidelities.len() - n,
        histogram: Histogram::of(&fidelities, bins),
        fidelities,
    })
}
