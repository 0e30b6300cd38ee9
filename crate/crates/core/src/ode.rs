//! Dormand-Prince 5(4) integrator with dense output for complex state
//! vectors of fixed dimension.

use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    /// Same relative and absolute tolerance; appropriate for normalized
    /// state vectors.
    pub fn uniform(tol: f64) -> Self {
        OdeOptions { rtol: tol, atol: tol, max_steps: 20_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

type Vector<const N: usize> = [C64; N];

fn zero<const N: usize>() -> Vector<N> {
    [C64::new(0.0, 0.0); N]
}

/// `y + h * sum(w_j k_j)`
fn combine<const N: usize>(y: &Vector<N>, h: f64, terms: &[(f64, &Vector<N>)]) -> Vector<N> {
    let mut out = *y;
    for &(w, k) in terms {
        if w == 0.0 {
            continue;
        }
        let hw = h * w;
        for i in 0..N {
            out[i] += k[i] * hw;
        }
    }
    out
}

fn scaled_norm<const N: usize>(v: &Vector<N>, y0: &Vector<N>, y1: &Vector<N>, o: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = o.atol + o.rtol * y0[i].norm().max(y1[i].norm());
        acc += v[i].norm_sqr() / (sc * sc);
    }
    (acc / N as f64).sqrt()
}

/// Coefficients of the dense-output polynomial over one accepted step.
struct Dense<const N: usize> {
    t0: f64,
    h: f64,
    r: [Vector<N>; 5],
}

impl<const N: usize> Dense<N> {
    fn eval(&self, t: f64) -> Vector<N> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut out = zero::<N>();
        for i in 0..N {
            out[i] = self.r[0][i]
                + (self.r[1][i] + (self.r[2][i] + (self.r[3][i] + self.r[4][i] * th1) * th) * th1) * th;
        }
        out
    }
}

fn initial_step<const N: usize, F>(f: &mut F, t0: f64, y0: &Vector<N>, f0: &Vector<N>, span: f64, o: &OdeOptions) -> f64
where
    F: FnMut(f64, &Vector<N>) -> Vector<N>,
{
    let d0 = scaled_norm(y0, y0, y0, o);
    let d1 = scaled_norm(f0, y0, y0, o);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = combine(y0, h0, &[(1.0, f0)]);
    let f1 = f(t0 + h0, &y1);
    let mut diff = zero::<N>();
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = scaled_norm(&diff, y0, y0, o) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1 > t0`.
///
/// `sample_times` must be ascending inside `[t0, t1]`; `on_sample` receives
/// the dense-output state at each of them.
pub fn integrate<const N: usize, F, S>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: Vector<N>,
    opts: &OdeOptions,
    sample_times: &[f64],
    mut on_sample: S,
) -> Result<(Vector<N>, OdeStats)>
where
    F: FnMut(f64, &Vector<N>) -> Vector<N>,
    S: FnMut(f64, &Vector<N>),
{
    let mut stats = OdeStats::default();
    let mut next_sample = 0;
    while next_sample < sample_times.len() && sample_times[next_sample] <= t0 {
        on_sample(sample_times[next_sample], &y0);
        next_sample += 1;
    }
    if t1 <= t0 {
        return Ok((y0, stats));
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evaluations += 1;
    let mut h = initial_step(&mut f, t0, &y, &k1, t1 - t0, opts);
    stats.evaluations += 1;
    let mut reject_streak = false;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::IntegrationFailure { t, reason: format!("exceeded {} steps", opts.max_steps) });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::IntegrationFailure { t, reason: format!("step size underflow (h = {h:e})") });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }

        let k2 = f(t + C2 * h, &combine(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &combine(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * h, &combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + h, &combine(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = combine(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y_new);
        stats.evaluations += 6;

        let err_vec = combine(&zero::<N>(), h, &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
        let err = scaled_norm(&err_vec, &y, &y_new, opts);

        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = if last { t1 } else { t + h };
            if next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                let mut ydiff = zero::<N>();
                let mut bspl = zero::<N>();
                let mut r4 = zero::<N>();
                let mut r5 = zero::<N>();
                for i in 0..N {
                    ydiff[i] = y_new[i] - y[i];
                    bspl[i] = k1[i] * h - ydiff[i];
                    r4[i] = ydiff[i] - k7[i] * h - bspl[i];
                    r5[i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
                }
                let dense = Dense { t0: t, h, r: [y, ydiff, bspl, r4, r5] };
                while next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                    let ts = sample_times[next_sample];
                    let ys = if ts == t_new { y_new } else { dense.eval(ts) };
                    on_sample(ts, &ys);
                    next_sample += 1;
                }
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            if last {
                return Ok((y, stats));
            }
            let mut fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if reject_streak {
                fac = fac.min(1.0);
            }
            reject_streak = false;
            h *= fac;
        } else {
            stats.rejected += 1;
            reject_streak = true;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_phase() {
        // dy/dt = -i w y  =>  y(t) = e^{-i w t}
        let w = 3.7;
        let opts = OdeOptions::uniform(1e-11);
        let samples: Vec<f64> = (0..=20).map(|i| 0.25 * i as f64).collect();
        let mut seen = Vec::new();
        let (y, stats) = integrate(
            |_, y: &[C64; 1]| [C64::new(0.0, -w) * y[0]],
            0.0,
            5.0,
            [C64::new(1.0, 0.0)],
            &opts,
            &samples,
            |t, y| seen.push((t, y[0])),
        )
        .unwrap();
        assert!((y[0] - C64::from_polar(1.0, -w * 5.0)).norm() < 1e-9);
        assert_eq!(seen.len(), samples.len());
        for (t, z) in seen {
            // dense output is 4th order; still far below the unwrap scale
            assert!((z - C64::from_polar(1.0, -w * t)).norm() < 1e-6, "t = {t}");
        }
        assert!(stats.accepted > 0);
    }

    #[test]
    fn exponential_growth() {
        let opts = OdeOptions::uniform(1e-12);
        let (y, _) = integrate(|_, y: &[C64; 1]| [y[0]], 0.0, 2.0, [C64::new(1.0, 0.0)], &opts, &[], |_, _| {}).unwrap();
        assert!((y[0].re - 2.0f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn underflow_reports_time() {
        let opts = OdeOptions { max_steps: 10, ..OdeOptions::uniform(1e-13) };
        let res = integrate(
            |t, y: &[C64; 1]| [C64::new(0.0, -1e6 * t) * y[0]],
            0.0,
            10.0,
            [C64::new(1.0, 0.0)],
            &opts,
            &[],
            |_, _| {},
        );
        assert!(matches!(res, Err(Error::IntegrationFailure { .. })));
    }
}
