//! Fixed-step integration on the probability simplex.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tolerated drift of total mass or negativity before a step is rejected.
pub const SIMPLEX_STEP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "euler" => Ok(Method::Euler),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub t_end: f64,
    pub dt: f64,
    pub method: Method,
    /// Record spacing in time units; `None` records every step.
    pub record_every: Option<f64>,
}

impl IntegrateOptions {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self {
            t_end,
            dt,
            method: Method::Rk4,
            record_every: None,
        }
    }

    pub fn record_every(mut self, every: f64) -> Self {
        self.record_every = Some(every);
        self
    }

    pub fn method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if let Some(r) = self.record_every {
            if !(r > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "record interval must be > 0, got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// Time-stamped states. Times are strictly increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn push(&mut self, t: f64, state: DVector<f64>) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&DVector<f64>> {
        self.states.last()
    }

    /// Linear interpolation at `t`, clamped to the recorded range.
    pub fn at(&self, t: f64) -> DVector<f64> {
        assert!(!self.is_empty(), "empty trajectory");
        let i = self.times.partition_point(|&x| x <= t);
        if i == 0 {
            return self.states[0].clone();
        }
        if i == self.len() {
            return self.states[i - 1].clone();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        &self.states[i - 1] * (1.0 - w) + &self.states[i] * w
    }

    /// Componentwise sup-norm distance to `other`, evaluated at this
    /// trajectory's record times within `[0, t_max]`.
    pub fn sup_deviation(&self, other: &Trajectory, t_max: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.states)
            .filter(|(&t, _)| t <= t_max + 1e-12)
            .map(|(&t, s)| (s - other.at(t)).amax())
            .fold(0.0, f64::max)
    }
}

/// Projects a stepped state back onto the simplex, rejecting steps that left
/// it by more than [`SIMPLEX_STEP_TOL`].
pub fn project_step(y: &mut DVector<f64>, t: f64) -> Result<()> {
    let sum = y.sum();
    if !sum.is_finite() || (sum - 1.0).abs() > SIMPLEX_STEP_TOL {
        return Err(Error::IntegrationInstability {
            time: t,
            reason: format!("total mass drifted to {sum}"),
        });
    }
    let min = y.min();
    if min < -SIMPLEX_STEP_TOL {
        return Err(Error::IntegrationInstability {
            time: t,
            reason: format!("component fell to {min:e}"),
        });
    }
    y.iter_mut().for_each(|x| *x = x.max(0.0));
    *y /= y.sum();
    Ok(())
}

pub fn rk4_step<F>(f: &F, y: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut probe = y.clone();
    let k1 = f(y);
    probe.axpy(h / 2.0, &k1, 1.0);
    let k2 = f(&probe);
    probe.copy_from(y);
    probe.axpy(h / 2.0, &k2, 1.0);
    let k3 = f(&probe);
    probe.copy_from(y);
    probe.axpy(h, &k3, 1.0);
    let k4 = f(&probe);
    // reuse the probe buffer for the weighted sum
    probe.copy_from(y);
    probe.axpy(h / 6.0, &k1, 1.0);
    probe.axpy(h / 3.0, &k2, 1.0);
    probe.axpy(h / 3.0, &k3, 1.0);
    probe.axpy(h / 6.0, &k4, 1.0);
    probe
}

/// Integrates `dy/dt = f(y)` from `y0` on the simplex.
///
/// The step is shrunk to `t_end / ceil(t_end / dt)` so the grid ends exactly
/// at `t_end`. The initial and final states are always recorded.
pub fn integrate_on_simplex<F>(
    f: F,
    y0: DVector<f64>,
    opts: &IntegrateOptions,
) -> Result<Trajectory>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    opts.check()?;
    let steps = (opts.t_end / opts.dt - 1e-9).ceil().max(1.0) as usize;
    let h = opts.t_end / steps as f64;
    let stride = match opts.record_every {
        None => 1,
        Some(r) => ((r / h).round() as usize).max(1),
    };
    let mut traj = Trajectory::default();
    let mut y = y0;
    traj.push(0.0, y.clone());
    for s in 1..=steps {
        y = match opts.method {
            Method::Rk4 => rk4_step(&f, &y, h),
            Method::Euler => &y + f(&y) * h,
        };
        let t = s as f64 * h;
        project_step(&mut y, t)?;
        if s % stride == 0 || s == steps {
            traj.push(if s == steps { opts.t_end } else { t }, y.clone());
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_relaxation_matches_closed_form() {
        // two-state flip at unit rate: x' = y - x, y' = x - y
        let f = |v: &DVector<f64>| DVector::from_vec(vec![v[1] - v[0], v[0] - v[1]]);
        let y0 = DVector::from_vec(vec![1.0, 0.0]);
        let tr = integrate_on_simplex(f, y0, &IntegrateOptions::new(1.0, 1e-2)).unwrap();
        let exact = 0.5 + 0.5 * (-2.0f64).exp();
        assert!((tr.last().unwrap()[0] - exact).abs() < 1e-9);
        assert_eq!(*tr.times.last().unwrap(), 1.0);
        assert_eq!(tr.len(), 101);
    }

    #[test]
    fn record_stride_and_interpolation() {
        let f = |v: &DVector<f64>| v * 0.0;
        let y0 = DVector::from_vec(vec![0.25, 0.75]);
        let tr = integrate_on_simplex(f, y0, &IntegrateOptions::new(1.0, 1e-2).record_every(0.1))
            .unwrap();
        assert_eq!(tr.len(), 11);
        assert!((tr.times[3] - 0.3).abs() < 1e-12);
        assert_eq!(tr.at(0.55)[0], 0.25);
    }

    #[test]
    fn unstable_step_is_rejected() {
        let f = |v: &DVector<f64>| DVector::from_vec(vec![-50.0 * v[0], 50.0 * v[0]]);
        let y0 = DVector::from_vec(vec![1.0, 0.0]);
        let err = integrate_on_simplex(
            f,
            y0,
            &IntegrateOptions::new(1.0, 0.5).method(Method::Euler),
        );
        assert!(matches!(err, Err(Error::IntegrationInstability { .. })));
    }

    #[test]
    fn bad_options() {
        let f = |v: &DVector<f64>| v.clone();
        let y0 = DVector::from_vec(vec![1.0]);
        assert!(integrate_on_simplex(f, y0.clone(), &IntegrateOptions::new(0.0, 0.1)).is_err());
        assert!(integrate_on_simplex(f, y0, &IntegrateOptions::new(1.0, -0.1)).is_err());
    }
}
