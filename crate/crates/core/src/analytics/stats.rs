use serde::Serialize;
use thiserror::Error;

use super::special::{f_sf, normal_two_sided, student_t_two_sided};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StatsError {
    #[error("sample needs at least {need} values, got {got}")]
    TooSmall { need: usize, got: usize },
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anova {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZTest {
    pub z: f64,
    pub p_two_sided: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for a single value.
    pub sd: Option<f64>,
}

fn finite(xs: &[f64]) -> Result<(), StatsError> {
    match xs.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(StatsError::Invalid(format!("non-finite value {x}"))),
        None => Ok(()),
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n − 1 denominator), two-pass.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn summarize(xs: &[f64]) -> Option<Summary> {
    if xs.is_empty() {
        return None;
    }
    let sd = (xs.len() > 1).then(|| variance(xs).sqrt());
    Some(Summary { n: xs.len(), mean: mean(xs), sd })
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of
/// freedom.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooSmall { need: 2, got: s.len() });
        }
        finite(s)?;
    }
    let (va, vb) = (variance(a) / a.len() as f64, variance(b) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(StatsError::Degenerate("both samples have zero variance"));
    }
    let diff = mean(a) - mean(b);
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    Ok(TTest { t, df, p_two_sided: student_t_two_sided(t, df) })
}

pub fn one_way_anova(groups: &[&[f64]]) -> Result<Anova, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooSmall { need: 2, got: groups.len() });
    }
    for g in groups {
        if g.len() < 2 {
            return Err(StatsError::TooSmall { need: 2, got: g.len() });
        }
        finite(g)?;
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / n as f64;
    let ssw: f64 = groups.iter().zip(&means).map(|(g, m)| g.iter().map(|x| (x - m).powi(2)).sum::<f64>()).sum();
    // Equal group means have no between-group variance, whatever the
    // rounding of the grand mean.
    let ssb = if means.iter().all(|m| *m == means[0]) {
        0.0
    } else {
        groups.iter().zip(&means).map(|(g, m)| g.len() as f64 * (m - grand).powi(2)).sum()
    };
    if ssb + ssw == 0.0 {
        return Err(StatsError::Degenerate("total variance is zero"));
    }
    if ssw == 0.0 {
        return Err(StatsError::Degenerate("within-group variance is zero"));
    }
    let (df_between, df_within) = (groups.len() - 1, n - groups.len());
    let f = (ssb / df_between as f64) / (ssw / df_within as f64);
    Ok(Anova { f, df_between, df_within, p: f_sf(f, df_between as f64, df_within as f64) })
}

/// Pooled two-proportion z-test. A pooled proportion of 0 or 1 leaves z
/// undefined and is reported as degenerate.
pub fn two_prop_z(x1: u64, n1: u64, x2: u64, n2: u64) -> Result<ZTest, StatsError> {
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::TooSmall { need: 1, got: 0 });
    }
    if x1 > n1 || x2 > n2 {
        return Err(StatsError::Invalid(format!("successes exceed trials: {x1}/{n1}, {x2}/{n2}")));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1f + n2f);
    if pooled == 0.0 || pooled == 1.0 {
        return Err(StatsError::Degenerate("pooled proportion is 0 or 1"));
    }
    let diff = x1 as f64 / n1f - x2 as f64 / n2f;
    let z = diff / (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    Ok(ZTest { z, p_two_sided: normal_two_sided(z) })
}

/// Pearson product-moment correlation, clamped to [−1, 1].
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooSmall { need: 3, got: x.len() });
    }
    finite(x)?;
    finite(y)?;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Degenerate("constant input"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Compares two independent correlations through Fisher's z-transform.
pub fn fisher_z_compare(r1: f64, n1: u64, r2: f64, n2: u64) -> Result<ZTest, StatsError> {
    for r in [r1, r2] {
        if !(r.abs() < 1.0) {
            return Err(StatsError::Invalid(format!("|r| must be below 1, got {r}")));
        }
    }
    for n in [n1, n2] {
        if n < 4 {
            return Err(StatsError::TooSmall { need: 4, got: n as usize });
        }
    }
    let se = (1.0 / (n1 as f64 - 3.0) + 1.0 / (n2 as f64 - 3.0)).sqrt();
    let z = (r1.atanh() - r2.atanh()) / se;
    Ok(ZTest { z, p_two_sided: normal_two_sided(z) })
}
