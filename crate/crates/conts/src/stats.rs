use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    /// Mean of `a[i] - b[i]`.
    pub mean_diff: f64,
    pub t: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Standard paired t-test on per-pair differences `a[i] - b[i]`.
///
/// When every difference is equal the statistic is undefined; we return
/// `p = 1` if that difference is zero and `p = 0` otherwise.
pub fn paired_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() {
        return Err(Error::Stats(format!("unpaired samples: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Stats(format!("need at least 2 pairs, got {n}")));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Stats("non-finite sample".into()));
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if var == 0.0 || diffs.iter().all(|d| *d == diffs[0]) {
        let (t, p) = if mean == 0.0 { (0.0, 1.0) } else { (mean.signum() * f64::INFINITY, 0.0) };
        return Ok(PairedTest { n, mean_diff: mean, t, p_value: p });
    }
    let t = mean / (var / nf).sqrt();
    Ok(PairedTest { n, mean_diff: mean, t, p_value: two_sided_p(t, nf - 1.0)? })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn two_sided_p(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Stats(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
}

pub fn t_cdf(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Stats(e.to_string()))?;
    Ok(dist.cdf(t))
}
