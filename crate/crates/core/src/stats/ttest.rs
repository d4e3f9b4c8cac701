use statrs::function::beta::beta_reg;

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    /// Student's test with pooled variance.
    #[default]
    Pooled,
    /// Welch's unequal-variance test.
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    /// Signed: positive when sample a has the larger mean.
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
    pub reject: bool,
    /// Both samples had zero variance but different means.
    pub degenerate: bool,
}

/// Pooled-variance two-sample Student's t-test, two-sided.
pub fn students_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTest, StatsError> {
    two_sample_t_test(a, b, alpha, TestKind::Pooled)
}

pub fn two_sample_t_test(
    a: &[f64],
    b: &[f64],
    alpha: f64,
    kind: TestKind,
) -> Result<TTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewSamples {
            a: a.len(),
            b: b.len(),
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::BadAlpha(alpha));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let diff = ma - mb;

    let (se, df) = match kind {
        TestKind::Pooled => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), df)
        }
        TestKind::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let denom = qa * qa / (na - 1.0) + qb * qb / (nb - 1.0);
            let df = if denom > 0.0 {
                se2 * se2 / denom
            } else {
                na + nb - 2.0
            };
            (se2.sqrt(), df)
        }
    };

    if se == 0.0 {
        return Ok(if diff == 0.0 {
            TTest {
                t: 0.0,
                df,
                p_value: 1.0,
                reject: false,
                degenerate: false,
            }
        } else {
            TTest {
                t: f64::INFINITY.copysign(diff),
                df,
                p_value: 0.0,
                reject: true,
                degenerate: true,
            }
        });
    }

    let t = diff / se;
    let p_value = two_sided_p(t, df);
    Ok(TTest {
        t,
        df,
        p_value,
        reject: p_value < alpha,
        degenerate: false,
    })
}

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom, via the
/// regularized incomplete beta function.
pub(crate) fn two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
