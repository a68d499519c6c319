use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    #[default]
    Welch,
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Two-sided Welch test; `t` has the sign of `mean(a) - mean(b)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    t_test(a, b, TTestKind::Welch)
}

pub fn t_test(a: &[f64], b: &[f64], kind: TTestKind) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Config("a t-test needs at least two samples per side".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (se2, df) = match kind {
        TTestKind::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            (se2, df)
        }
        TTestKind::Pooled => {
            let df = na + nb - 2.0;
            let sp = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            (sp * (1.0 / na + 1.0 / nb), df)
        }
    };
    let diff = ma - mb;
    if se2 == 0.0 {
        return Ok(if diff == 0.0 {
            TTest { t: 0.0, df: na + nb - 2.0, p: 1.0 }
        } else {
            TTest {
                t: diff.signum() * f64::INFINITY,
                df: na + nb - 2.0,
                p: 0.0,
            }
        });
    }
    let t = diff / se2.sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Config(format!("t distribution: {e}")))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTest { t, df, p })
}

/// `**` below 0.01, `*` below 0.05, empty otherwise.
pub fn significance_marker(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let r = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        let c = welch_t_test(&[2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!((c.t, c.p), (0.0, 1.0));
        let d = welch_t_test(&[2.0, 2.0], &[3.0, 3.0]).unwrap();
        assert_eq!(d.p, 0.0);
    }

    #[test]
    fn reference_pair() {
        // scipy.stats.ttest_ind(a, b, equal_var=False)
        let a = [77.2, 77.9, 76.8, 77.5, 77.0];
        let b = [78.5, 79.1, 78.0, 78.8, 78.2];
        let r = welch_t_test(&a, &b).unwrap();
        assert!((r.t - -4.474464586219582).abs() < 1e-9, "t {}", r.t);
        assert!((r.df - 7.994578329583351).abs() < 1e-9, "df {}", r.df);
        assert!((r.p - 0.0020744305493377233).abs() < 1e-6, "p {}", r.p);
        let pooled = t_test(&a, &b, TTestKind::Pooled).unwrap();
        assert!((pooled.p - 0.0020709334214416807).abs() < 1e-6, "p {}", pooled.p);
    }

    #[test]
    fn stars() {
        assert_eq!(significance_marker(0.001), "**");
        assert_eq!(significance_marker(0.02), "*");
        assert_eq!(significance_marker(0.05), "");
    }

    #[test]
    fn too_few_samples() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }
}
