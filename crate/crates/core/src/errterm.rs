//! The error term `err(u) = π·lim (1/T)∫₀ᵀ #(bad ∩ D_t)/vol(D_t) dt`.
//!
//! Counts come either from a developing map and covector or from an explicit
//! point set (orbit counting, which calibrates the estimator against
//! `π/covol`).

use num_rational::Ratio;
use rayon::prelude::*;
use thiserror::Error;

use crate::devmaps::{bad_locus_count, Covector, DevError, DevelopingMap};
use crate::fuchsian::{orbit_point_set, FuchsianError, FundamentalDomain};
use crate::hypgeo::{ball_volume, hyp_dist, BallSpec, GeomError, HPoint};
use crate::oseledets::{Normalization, SpectrumEstimate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ErrTermError {
    #[error("t grid must be strictly increasing, finite and start above 0")]
    Grid,
    #[error("count decreased from {before} to {after} at t = {t}")]
    NonMonotone { t: f64, before: u64, after: u64 },
    #[error("grid has {nodes} nodes up to T_max, at least {min} needed")]
    Resolution { nodes: usize, min: usize },
    #[error("grid ends at {end}, before T_max = {t_max}")]
    ShortGrid { end: f64, t_max: f64 },
    #[error("normalization mismatch: spectrum in {0}, error term in minus4")]
    Normalization(Normalization),
    #[error("partial sum index {k} outside 1..={n}")]
    Index { k: usize, n: usize },
    #[error(transparent)]
    Dev(#[from] DevError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Fuchsian(#[from] FuchsianError),
}

pub type Result<T> = std::result::Result<T, ErrTermError>;

/// Minimum number of grid nodes in `(0, T_max]`.
pub const MIN_NODES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountSource {
    DevMap,
    PointSet,
}

impl CountSource {
    pub fn as_str(self) -> &'static str {
        match self {
            CountSource::DevMap => "devmap",
            CountSource::PointSet => "point-set",
        }
    }
}

/// What to count.
#[derive(Debug, Clone, Copy)]
pub enum Counted<'a> {
    Bad {
        dev: &'a DevelopingMap,
        covector: &'a Covector,
    },
    Points(&'a [HPoint]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountFunction {
    pub t: Vec<f64>,
    pub counts: Vec<u64>,
    /// Points within boundary tolerance at each node.
    pub ambiguous: Vec<u64>,
    pub source: CountSource,
}

/// `n` equally spaced nodes on `(0, t_max]`.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| t_max * k as f64 / n as f64).collect()
}

fn validate_grid(t: &[f64]) -> Result<()> {
    let ok = !t.is_empty()
        && t[0] > 0.0
        && t.iter().all(|x| x.is_finite())
        && t.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(ErrTermError::Grid)
    }
}

/// Ambiguity band for distance-filtered point sets.
const POINT_TOL: f64 = 1e-9;

pub fn count_in_balls(source: Counted<'_>, center: HPoint, t_grid: &[f64]) -> Result<CountFunction> {
    validate_grid(t_grid)?;
    let (counts, ambiguous, tag): (Vec<u64>, Vec<u64>, _) = match source {
        Counted::Points(points) => {
            let mut d: Vec<f64> = points.iter().map(|&p| hyp_dist(center, p)).collect();
            d.sort_by(f64::total_cmp);
            let upto = |r: f64| d.partition_point(|&x| x <= r) as u64;
            let (counts, ambiguous) = t_grid
                .iter()
                .map(|&t| (upto(t), upto(t + POINT_TOL) - upto(t - POINT_TOL)))
                .unzip();
            (counts, ambiguous, CountSource::PointSet)
        }
        Counted::Bad { dev, covector } => {
            let rows: Vec<(u64, u64)> = t_grid
                .par_iter()
                .map(|&t| {
                    let ball = BallSpec::new(center, t)?;
                    let c = bad_locus_count(dev, covector, &ball)?;
                    Ok((c.count as u64, c.ambiguous as u64))
                })
                .collect::<Result<_>>()?;
            let (counts, ambiguous) = rows.into_iter().unzip();
            (counts, ambiguous, CountSource::DevMap)
        }
    };
    for (i, w) in counts.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(ErrTermError::NonMonotone {
                t: t_grid[i + 1],
                before: w[0],
                after: w[1],
            });
        }
    }
    Ok(CountFunction {
        t: t_grid.to_vec(),
        counts,
        ambiguous,
        source: tag,
    })
}

/// The orbit `Γz₀` counted in balls around `center`.
pub fn orbit_count_function(
    dom: &FundamentalDomain,
    z0: HPoint,
    center: HPoint,
    t_grid: &[f64],
    budget: usize,
) -> Result<CountFunction> {
    validate_grid(t_grid)?;
    let t_max = t_grid[t_grid.len() - 1];
    let reach = t_max + hyp_dist(z0, center) + 1e-6;
    let points = orbit_point_set(dom, z0, reach, budget)?;
    count_in_balls(Counted::Points(&points), center, t_grid)
}

/// One row of the running estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrRow {
    pub t: f64,
    pub count: u64,
    pub count_over_vol: f64,
    /// `π/t · ∫_{t₀}^{t} count/vol`.
    pub running_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrEstimate {
    pub value: f64,
    /// `(T, estimate at T)` for `T = 0.6, 0.8, 1.0 × T_max`.
    pub tail: [(f64, f64); 3],
    /// `(max − min)/value` over the tail windows.
    pub tail_spread: f64,
    pub converged: bool,
    /// `π·count(T_max)/vol(T_max)`, reported but never used as the estimate.
    pub unaveraged: f64,
    pub t_max: f64,
    pub rows: Vec<ErrRow>,
}

/// Trapezoidal estimate of the time average up to `t_max`.
pub fn err_estimate(cf: &CountFunction, t_max: f64) -> Result<ErrEstimate> {
    validate_grid(&cf.t)?;
    let end = cf.t[cf.t.len() - 1];
    if end < t_max * (1.0 - 1e-12) {
        return Err(ErrTermError::ShortGrid { end, t_max });
    }
    let n = cf.t.partition_point(|&t| t <= t_max * (1.0 + 1e-12));
    if n < MIN_NODES {
        return Err(ErrTermError::Resolution { nodes: n, min: MIN_NODES });
    }
    let mut rows = Vec::with_capacity(n);
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..n {
        let t = cf.t[i];
        let ratio = cf.counts[i] as f64 / ball_volume(t)?;
        if let Some((pt, pr)) = prev {
            integral += 0.5 * (t - pt) * (ratio + pr);
        }
        prev = Some((t, ratio));
        rows.push(ErrRow {
            t,
            count: cf.counts[i],
            count_over_vol: ratio,
            running_err: std::f64::consts::PI * integral / t,
        });
    }
    let at = |tau: f64| -> (f64, f64) {
        let k = rows.partition_point(|r| r.t < tau * (1.0 - 1e-12)).min(n - 1);
        (rows[k].t, rows[k].running_err)
    };
    let tail = [at(0.6 * t_max), at(0.8 * t_max), at(t_max)];
    let value = rows[n - 1].running_err.max(0.0);
    let hi = tail.iter().map(|x| x.1).fold(f64::MIN, f64::max);
    let lo = tail.iter().map(|x| x.1).fold(f64::MAX, f64::min);
    let tail_spread = if value > 0.0 { (hi - lo) / value } else { 0.0 };
    Ok(ErrEstimate {
        value,
        tail,
        tail_spread,
        converged: value < 1e-3 || tail_spread < 0.1,
        unaveraged: std::f64::consts::PI * rows[n - 1].count_over_vol,
        t_max: rows[n - 1].t,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumRuleReport {
    pub k: usize,
    /// `Σ_{i≤k} λ_i`.
    pub lhs: f64,
    /// `degree_ratio + err`.
    pub rhs: f64,
    pub stderr: f64,
    /// `|lhs − rhs|` in units of `stderr`; infinite when `stderr = 0` and
    /// the sides differ.
    pub discrepancy: f64,
}

impl SumRuleReport {
    pub fn passes(&self, sigmas: f64) -> bool {
        self.discrepancy < sigmas
    }
}

/// Compares the top-`k` partial sum with `degree_ratio + err.value`.
pub fn sum_rule_check(
    spectrum: &SpectrumEstimate,
    k: usize,
    degree_ratio: Ratio<i64>,
    err: &ErrEstimate,
) -> Result<SumRuleReport> {
    if spectrum.normalization != Normalization::Minus4 {
        return Err(ErrTermError::Normalization(spectrum.normalization));
    }
    let n = spectrum.dim();
    if k == 0 || k > n {
        return Err(ErrTermError::Index { k, n });
    }
    let (lhs, stderr) = spectrum.partial_sum(k);
    let rhs = *degree_ratio.numer() as f64 / *degree_ratio.denom() as f64 + err.value;
    let gap = (lhs - rhs).abs();
    let discrepancy = if stderr > 0.0 {
        gap / stderr
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(SumRuleReport {
        k,
        lhs,
        rhs,
        stderr,
        discrepancy,
    })
}

/// An estimate of exactly zero, for bad loci known to be empty.
pub fn zero_estimate(t_max: f64) -> ErrEstimate {
    ErrEstimate {
        value: 0.0,
        tail: [(0.6 * t_max, 0.0), (0.8 * t_max, 0.0), (t_max, 0.0)],
        tail_spread: 0.0,
        converged: true,
        unaveraged: 0.0,
        t_max,
        rows: Vec::new(),
    }
}
