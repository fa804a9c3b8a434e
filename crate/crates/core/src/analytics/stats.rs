use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::special::{chi2_sf, normal_cdf};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("table needs at least 2 rows and 2 columns")]
    TooSmall,
    #[error("table has ragged rows")]
    Ragged,
    #[error("grand total is zero")]
    EmptyTable,
    #[error("an expected count is zero")]
    DegenerateTable,
    #[error("sample is empty")]
    EmptySample,
    #[error("inputs have different lengths")]
    LengthMismatch,
    #[error("need at least {0} observations")]
    TooShort(usize),
    #[error("outcome must contain both classes")]
    SingleClass,
    #[error("classes are perfectly separated by the covariate")]
    Separation,
    #[error("input has zero variance")]
    ZeroVariance,
}

/// Rows × columns of counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    rows: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(rows: Vec<Vec<u64>>) -> Result<Self, StatsError> {
        if rows.len() < 2 || rows[0].len() < 2 {
            return Err(StatsError::TooSmall);
        }
        if rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(StatsError::Ragged);
        }
        if rows.iter().flatten().sum::<u64>() == 0 {
            return Err(StatsError::EmptyTable);
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().flatten().sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.rows[0].len())
            .map(|j| self.rows.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// Drops rows whose total is zero.
    pub fn without_empty_rows(&self) -> Result<Self, StatsError> {
        Self::new(
            self.rows
                .iter()
                .filter(|r| r.iter().sum::<u64>() > 0)
                .cloned()
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquared {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson's test of independence.
pub fn chi_squared(table: &ContingencyTable) -> Result<ChiSquared, StatsError> {
    let n = table.total() as f64;
    let rt = table.row_totals();
    let ct = table.col_totals();
    if rt.contains(&0) || ct.contains(&0) {
        return Err(StatsError::DegenerateTable);
    }
    let mut statistic = 0.0;
    for (i, row) in table.rows().iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = rt[i] as f64 * ct[j] as f64 / n;
            statistic += (o as f64 - e).powi(2) / e;
        }
    }
    let dof = (rt.len() - 1) * (ct.len() - 1);
    Ok(ChiSquared {
        statistic,
        dof,
        p_value: chi2_sf(statistic, dof as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub intercept: f64,
    pub slope: f64,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Wald test of the slope.
    pub slope_se: f64,
    pub slope_p: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn log_likelihood(b0: f64, b1: f64, x: &[f64], y: &[u8]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let eta = b0 + b1 * xi;
            f64::from(yi) * eta - softplus(eta)
        })
        .sum()
}

/// Gradient of [`log_likelihood`] with respect to (b0, b1).
pub fn gradient(b0: f64, b1: f64, x: &[f64], y: &[u8]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (&xi, &yi) in x.iter().zip(y) {
        let r = f64::from(yi) - sigmoid(b0 + b1 * xi);
        g[0] += r;
        g[1] += r * xi;
    }
    g
}

fn information(b0: f64, b1: f64, x: &[f64]) -> [[f64; 2]; 2] {
    let mut h = [[0.0; 2]; 2];
    for &xi in x {
        let p = sigmoid(b0 + b1 * xi);
        let w = p * (1.0 - p);
        h[0][0] += w;
        h[0][1] += w * xi;
        h[1][1] += w * xi * xi;
    }
    h[1][0] = h[0][1];
    h
}

const MAX_NEWTON: usize = 500;

/// Maximum-likelihood fit of logit(p) = b0 + b1·x by damped Newton.
pub fn logistic_fit(x: &[f64], y: &[u8]) -> Result<LogisticFit, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch);
    }
    if x.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let ones = y.iter().filter(|&&v| v != 0).count();
    if ones == 0 || ones == y.len() {
        return Err(StatsError::SingleClass);
    }
    let y: Vec<u8> = y.iter().map(|&v| u8::from(v != 0)).collect();
    let rate = ones as f64 / y.len() as f64;

    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if lo == hi {
        // Constant covariate: only the intercept is identified.
        let b0 = (rate / (1.0 - rate)).ln();
        return Ok(LogisticFit {
            intercept: b0,
            slope: 0.0,
            converged: true,
            iterations: 0,
            log_likelihood: log_likelihood(b0, 0.0, x, &y),
            slope_se: f64::INFINITY,
            slope_p: 1.0,
        });
    }
    let range = |class: u8| {
        x.iter()
            .zip(&y)
            .filter(|(_, &c)| c == class)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (&v, _)| {
                (a.min(v), b.max(v))
            })
    };
    let ((min0, max0), (min1, max1)) = (range(0), range(1));
    if max0 <= min1 || max1 <= min0 {
        return Err(StatsError::Separation);
    }

    let (mut b0, mut b1) = ((rate / (1.0 - rate)).ln(), 0.0);
    let mut ll = log_likelihood(b0, b1, x, &y);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_NEWTON {
        let g = gradient(b0, b1, x, &y);
        if g[0].abs().max(g[1].abs()) < 1e-8 {
            converged = true;
            break;
        }
        iterations += 1;
        let h = information(b0, b1, x);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let (d0, d1) = if det.abs() > 1e-300 {
            (
                (h[1][1] * g[0] - h[0][1] * g[1]) / det,
                (h[0][0] * g[1] - h[1][0] * g[0]) / det,
            )
        } else {
            (g[0], g[1])
        };
        let mut step = 1.0;
        loop {
            let (n0, n1) = (b0 + step * d0, b1 + step * d1);
            let candidate = log_likelihood(n0, n1, x, &y);
            if candidate >= ll || step < 1e-12 {
                if candidate >= ll {
                    b0 = n0;
                    b1 = n1;
                    ll = candidate;
                }
                break;
            }
            step *= 0.5;
        }
    }
    let h = information(b0, b1, x);
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let slope_se = (h[0][0] / det).sqrt();
    let z = b1 / slope_se;
    Ok(LogisticFit {
        intercept: b0,
        slope: b1,
        converged,
        iterations,
        log_likelihood: ll,
        slope_se,
        slope_p: 2.0 * (1.0 - normal_cdf(z.abs())),
    })
}

/// Ranks starting at 1, ties sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    pub u: f64,
    pub z: f64,
    /// Two-sided, normal approximation with tie correction.
    pub p_value: f64,
}

/// U statistic for sample `a` against `b`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&all);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;

    let n = n1 + n2;
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        ties += t * t * t - t;
        i += j;
    }
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)).max(1.0));
    let mean = n1 * n2 / 2.0;
    let (z, p_value) = if var > 0.0 {
        let z = (u - mean) / var.sqrt();
        (z, (2.0 * (1.0 - normal_cdf(z.abs()))).min(1.0))
    } else {
        (0.0, 1.0)
    };
    Ok(MannWhitney { u, z, p_value })
}

/// Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Spearman's rank correlation: Pearson over midranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch);
    }
    if x.len() < 3 {
        return Err(StatsError::TooShort(3));
    }
    pearson(&midranks(x), &midranks(y))
}

/// Linear-interpolation quantile of sorted data (`q` in [0, 1]).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
