//! Text output: fixed-precision numbers and CSV trajectories.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::ode::Trajectory;

/// Formats `x` with 12 significant digits, `%g`-style.
pub fn sig12(x: f64) -> String {
    sig(x, 12)
}

pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // rounding may carry into the next decade, so take the exponent from
    // the scientific rendering
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, e) = sci.split_once('e').expect("scientific format");
    let e: i32 = e.parse().expect("exponent");
    if e < -4 || e >= digits as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{e}");
    }
    let decimals = (digits as i32 - 1 - e).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV text with header `t,<label1>,...` and one row per record.
pub fn trajectory_csv(traj: &Trajectory, labels: &[String]) -> String {
    let mut out = String::from("t");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (t, s) in traj.times.iter().zip(&traj.states) {
        out.push_str(&sig12(*t));
        for x in s.iter() {
            let _ = write!(out, ",{}", sig12(*x));
        }
        out.push('\n');
    }
    out
}

/// Writes `contents` to `path` through a temporary sibling so that a failed
/// run never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| {
        io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name")
    })?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(0.1), "0.1");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(2.0 / 3.0), "0.666666666667");
        assert_eq!(sig12(-0.24), "-0.24");
        assert_eq!(sig12(1e-20), "1e-20");
        assert_eq!(sig12(123456.789), "123456.789");
        assert_eq!(sig12(9.9999999999999), "10");
        assert_eq!(sig12(1.5e15), "1.5e15");
        assert_eq!(sig12(1e-4), "0.0001");
        assert_eq!(sig12(9.89e-5), "9.89e-5");
    }

    #[test]
    fn csv_layout() {
        let mut t = Trajectory::default();
        t.push(0.0, DVector::from_vec(vec![0.5, 0.5]));
        t.push(0.5, DVector::from_vec(vec![1.0, 0.0]));
        let csv = trajectory_csv(&t, &["A".into(), "B".into()]);
        assert_eq!(csv, "t,A,B\n0,0.5,0.5\n0.5,1,0\n");
    }
}
