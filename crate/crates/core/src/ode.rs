//! Adaptive Dormand–Prince 5(4) integration of complex ODE systems.

use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-8, atol: 1e-10 }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Tolerances { rtol, atol }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl std::ops::AddAssign for Stats {
    fn add_assign(&mut self, o: Stats) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.rhs_evals += o.rhs_evals;
    }
}

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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Dormand–Prince integrator with a persistent step-size hint, so that
/// repeated short intervals do not restart from a guessed step.
#[derive(Clone, Debug)]
pub struct Dopri5 {
    pub tol: Tolerances,
    pub max_steps: usize,
    h_hint: Option<f64>,
    k: [Vec<C64>; 7],
    ytmp: Vec<C64>,
}

impl Dopri5 {
    pub fn new(tol: Tolerances) -> Self {
        Dopri5 {
            tol,
            max_steps: 10_000_000,
            h_hint: None,
            k: Default::default(),
            ytmp: Vec::new(),
        }
    }

    pub fn reset_step(&mut self) {
        self.h_hint = None;
    }

    fn error_norm(&self, y: &[C64], ynew: &[C64], err: &[C64]) -> f64 {
        let n = y.len().max(1) as f64;
        let s: f64 = y
            .iter()
            .zip(ynew)
            .zip(err)
            .map(|((a, b), e)| {
                let sc = self.tol.atol + self.tol.rtol * a.norm().max(b.norm());
                (e.norm() / sc).powi(2)
            })
            .sum();
        (s / n).sqrt()
    }

    /// Integrate `y' = f(t, y)` from `t0` to `t1` in place.
    pub fn integrate<F>(&mut self, y: &mut [C64], t0: f64, t1: f64, mut f: F) -> Result<Stats>
    where
        F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    {
        let n = y.len();
        let mut stats = Stats::default();
        if t1 <= t0 || n == 0 {
            return Ok(stats);
        }
        for k in self.k.iter_mut() {
            k.resize(n, C64::new(0.0, 0.0));
        }
        self.ytmp.resize(n, C64::new(0.0, 0.0));
        let span = t1 - t0;
        let mut t = t0;

        let wrap = |t: f64, e: Error| match e {
            Error::IntegrationFailure { .. } => e,
            other => Error::IntegrationFailure { time: t, reason: other.to_string() },
        };

        f(t, y, &mut self.k[0]).map_err(|e| wrap(t, e))?;
        stats.rhs_evals += 1;

        let mut h = match self.h_hint {
            Some(h) => h.min(span),
            None => self.initial_step(y, span),
        };
        let h_min = 1e-13 * t1.abs().max(1.0);

        while t < t1 {
            if stats.accepted + stats.rejected > self.max_steps {
                return Err(Error::IntegrationFailure { time: t, reason: "step budget exhausted".into() });
            }
            let last = t + h >= t1 - 1e-14 * span;
            if last {
                h = t1 - t;
            }
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let yt = &mut self.ytmp;
            let hc = |a: f64| C64::new(h * a, 0.0);

            for i in 0..n {
                yt[i] = y[i] + hc(A21) * k1[i];
            }
            f(t + C2 * h, yt, k2).map_err(|e| wrap(t, e))?;
            for i in 0..n {
                yt[i] = y[i] + hc(A31) * k1[i] + hc(A32) * k2[i];
            }
            f(t + C3 * h, yt, k3).map_err(|e| wrap(t, e))?;
            for i in 0..n {
                yt[i] = y[i] + hc(A41) * k1[i] + hc(A42) * k2[i] + hc(A43) * k3[i];
            }
            f(t + C4 * h, yt, k4).map_err(|e| wrap(t, e))?;
            for i in 0..n {
                yt[i] = y[i] + hc(A51) * k1[i] + hc(A52) * k2[i] + hc(A53) * k3[i] + hc(A54) * k4[i];
            }
            f(t + C5 * h, yt, k5).map_err(|e| wrap(t, e))?;
            for i in 0..n {
                yt[i] = y[i]
                    + hc(A61) * k1[i]
                    + hc(A62) * k2[i]
                    + hc(A63) * k3[i]
                    + hc(A64) * k4[i]
                    + hc(A65) * k5[i];
            }
            f(t + h, yt, k6).map_err(|e| wrap(t, e))?;
            for i in 0..n {
                yt[i] = y[i]
                    + hc(A71) * k1[i]
                    + hc(A73) * k3[i]
                    + hc(A74) * k4[i]
                    + hc(A75) * k5[i]
                    + hc(A76) * k6[i];
            }
            f(t + h, yt, k7).map_err(|e| wrap(t, e))?;
            stats.rhs_evals += 6;

            // Reuse k2 as the error estimate buffer.
            for i in 0..n {
                k2[i] = hc(E1) * k1[i] + hc(E3) * k3[i] + hc(E4) * k4[i] + hc(E5) * k5[i] + hc(E6) * k6[i]
                    + hc(E7) * k7[i];
            }
            let err = {
                let (yt, k2) = (&self.ytmp, &self.k[1]);
                self.error_norm(y, yt, k2)
            };
            if !err.is_finite() {
                stats.rejected += 1;
                h *= 0.2;
                if h < h_min {
                    return Err(Error::IntegrationFailure { time: t, reason: "non-finite derivative".into() });
                }
                continue;
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&self.ytmp);
                self.k.swap(0, 6);
                stats.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let h_next = h * fac;
                if !last {
                    h = h_next;
                    self.h_hint = Some(h_next);
                } else {
                    // Keep the unclipped step for the next call.
                    self.h_hint = Some(self.h_hint.map_or(h_next, |old| old.max(h_next)));
                }
            } else {
                stats.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                if h < h_min {
                    return Err(Error::IntegrationFailure {
                        time: t,
                        reason: format!("step size underflow (h = {h:e})"),
                    });
                }
            }
        }
        Ok(stats)
    }

    fn initial_step(&self, y: &[C64], span: f64) -> f64 {
        let d0 = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let d1 = self.k[0].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span).max(1e-12)
    }
}
