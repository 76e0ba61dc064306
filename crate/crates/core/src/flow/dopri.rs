//! Dormand–Prince 5(4) embedded pair with the 4th-order continuous extension.

use nalgebra::SVector;

use crate::error::{Error, Result};

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
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension over one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<const N: usize> {
    pub t0: f64,
    pub h: f64,
    r: [SVector<f64, N>; 5],
}

impl<const N: usize> Dense<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Interpolated state at `t` (meaningful for `t` inside the step).
    pub fn eval(&self, t: f64) -> SVector<f64, N> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        self.r[0]
            + (self.r[1] + (self.r[2] + (self.r[3] + self.r[4] * th1) * th) * th1) * th
    }

    pub fn start(&self) -> &SVector<f64, N> {
        &self.r[0]
    }
}

/// Step-size control settings shared by every integration in the crate.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

/// Integrates `y' = f(t, y)` from `t0` toward `t_end` (either direction),
/// calling `on_step` after every accepted step. `on_step` may stop the
/// integration by returning `Some(t_stop)` with `t_stop` inside the step;
/// the returned pair is then the interpolated stop point.
pub fn integrate<const N: usize, F, S>(
    f: F,
    t0: f64,
    y0: SVector<f64, N>,
    t_end: f64,
    ctl: &StepControl,
    mut on_step: S,
) -> Result<(f64, SVector<f64, N>)>
where
    F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
    S: FnMut(&Dense<N>, &SVector<f64, N>) -> Result<Option<f64>>,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    if span == 0.0 {
        return Ok((t0, y0));
    }
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = dir * initial_step(&f, t, &y, &k1, ctl).min(span);
    let mut steps = 0usize;
    let mut last_rejected = false;
    loop {
        if steps >= ctl.max_steps {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let remaining = (t_end - t).abs();
        if h.abs() > remaining {
            h = dir * remaining;
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            if remaining <= 1e-14 * t.abs().max(1.0) {
                return Ok((t, y));
            }
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let k2 = f(t + C2 * h, &(y + k1 * (h * A21)));
        let k3 = f(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h));
        let k4 = f(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
        let k5 = f(
            t + C5 * h,
            &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h),
        );
        let k6 = f(
            t + h,
            &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h),
        );
        let y1 = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
        let k7 = f(t + h, &y1);
        let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let mut acc = 0.0;
        for i in 0..N {
            let sk = ctl.abs_tol + ctl.rel_tol * y[i].abs().max(y1[i].abs());
            acc += (err_vec[i] / sk).powi(2);
        }
        let err = (acc / N as f64).sqrt();
        steps += 1;
        if !err.is_finite() {
            h *= 0.25;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            let dy = y1 - y;
            let bspl = k1 * h - dy;
            let dense = Dense {
                t0: t,
                h,
                r: [
                    y,
                    dy,
                    bspl,
                    dy - k7 * h - bspl,
                    (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h,
                ],
            };
            if let Some(ts) = on_step(&dense, &y1)? {
                let ys = if ts == t + h { y1 } else { dense.eval(ts) };
                return Ok((ts, ys));
            }
            t += h;
            y = y1;
            k1 = k7;
            if (t_end - t).abs() <= 1e-14 * t.abs().max(1.0) {
                return Ok((t, y));
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, if last_rejected { 1.0 } else { 10.0 });
            h = dir * (h.abs() * fac).min(ctl.max_step);
            last_rejected = false;
        } else {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            last_rejected = true;
        }
    }
}

fn initial_step<const N: usize, F>(
    f: &F,
    t: f64,
    y: &SVector<f64, N>,
    k1: &SVector<f64, N>,
    ctl: &StepControl,
) -> f64
where
    F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let sk = y.map(|v| ctl.abs_tol + ctl.rel_tol * v.abs());
    let d0 = (y.component_div(&sk).norm_squared() / N as f64).sqrt();
    let d1 = (k1.component_div(&sk).norm_squared() / N as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1 = y + k1 * h0;
    let k2 = f(t + h0, &y1);
    let d2 = ((k2 - k1).component_div(&sk).norm_squared() / N as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(ctl.max_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    const CTL: StepControl = StepControl {
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        max_step: 1.0,
        max_steps: 1_000_000,
    };

    #[test]
    fn harmonic_oscillator_period() {
        let f = |_t: f64, y: &Vector2<f64>| Vector2::new(y[1], -y[0]);
        let (t, y) = integrate(f, 0.0, Vector2::new(1.0, 0.0), std::f64::consts::TAU, &CTL, |_, _| Ok(None)).unwrap();
        assert!((t - std::f64::consts::TAU).abs() < 1e-14);
        assert!((y - Vector2::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn dense_output_matches_solution() {
        let f = |_t: f64, y: &Vector2<f64>| Vector2::new(y[1], -y[0]);
        let mut worst: f64 = 0.0;
        integrate(f, 0.0, Vector2::new(1.0, 0.0), 10.0, &CTL, |d, _| {
            for k in 1..10 {
                let t = d.t0 + d.h * k as f64 / 10.0;
                let y = d.eval(t);
                worst = worst.max((y[0] - t.cos()).abs());
            }
            Ok(None)
        })
        .unwrap();
        assert!(worst < 1e-8, "dense error {worst}");
    }

    #[test]
    fn backward_direction() {
        let f = |_t: f64, y: &Vector2<f64>| Vector2::new(-y[0], 0.0);
        let (_, y) = integrate(f, 0.0, Vector2::new(1.0, 0.0), -2.0, &CTL, |_, _| Ok(None)).unwrap();
        assert!((y[0] - 2f64.exp()).abs() < 1e-8);
    }
}
