//! Lyapunov spectra of representations over the geodesic flow.
//!
//! A sample codes one long geodesic, multiplies the frame by `ρ(g)` for each
//! pairing `g` crossed, and reads growth rates off the diagonal of repeated
//! QR factorizations. Samples run in parallel and are merged in index order,
//! so estimates are bit-identical for a given seed whatever the thread count.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::fuchsian::{code_geodesic, FuchsianError, FundamentalDomain};
use crate::hypgeo::{HPoint, UnitTangent};
use crate::linrep::{ext_power, Cx, MatrixN, RepError, Representation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OseledetsError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("matrix of size {got} does not match frame of size {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite cocycle entry at step {step}")]
    Numeric { step: usize },
    #[error("sample {sample}: {source}")]
    Sample {
        sample: usize,
        #[source]
        source: Box<OseledetsError>,
    },
    #[error(transparent)]
    Coding(#[from] FuchsianError),
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error("only {ok} samples succeeded ({failed} failed); need at least 2")]
    InsufficientData { ok: usize, failed: usize },
    #[error("pairing letter {0} has no generator in the representation")]
    Letter(i32),
}

pub type Result<T> = std::result::Result<T, OseledetsError>;

/// Curvature convention for reported exponents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Normalization {
    /// Rates per unit length in curvature −4, twice the curvature −1 rates.
    #[default]
    Minus4,
    Minus1,
}

impl Normalization {
    pub fn factor(self) -> f64 {
        match self {
            Normalization::Minus4 => 2.0,
            Normalization::Minus1 => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Minus4 => "minus4",
            Normalization::Minus1 => "minus1",
        }
    }
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "minus4" => Ok(Normalization::Minus4),
            "minus1" => Ok(Normalization::Minus1),
            _ => Err(format!("normalization must be minus4 or minus1, got {s:?}")),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Frame entry size beyond which a QR step is forced. Guarding only against
/// overflow is not enough: a frame stretched by `σ` resolves the weakest
/// directions to about `ε·σ²`, so this keeps `σ` well below `1/√ε`.
pub const FORCE_QR_NORM: f64 = 1e6;

/// Running product `m_k ⋯ m_1 · Q₀` kept as an orthonormal frame plus logs.
#[derive(Debug, Clone, PartialEq)]
pub struct CocycleAccumulator {
    pub frame: MatrixN,
    pub log_diag: Vec<f64>,
    pub steps: usize,
    pub elapsed_length: f64,
    qr_interval: usize,
    since_qr: usize,
}

impl CocycleAccumulator {
    pub fn new(n: usize, qr_interval: usize) -> Self {
        Self {
            frame: MatrixN::identity(n, n),
            log_diag: vec![0.0; n],
            steps: 0,
            elapsed_length: 0.0,
            qr_interval: qr_interval.max(1),
            since_qr: 0,
        }
    }

    /// `frame ← m·frame`, re-orthonormalizing on schedule.
    pub fn advance(&mut self, m: &MatrixN) -> Result<()> {
        let n = self.frame.nrows();
        if m.nrows() != n || m.ncols() != n {
            return Err(OseledetsError::Dimension {
                expected: n,
                got: m.nrows(),
            });
        }
        // Bound the stretch of the product before forming it.
        if self.since_qr > 0 && self.frame.camax() * m.camax() * n as f64 > FORCE_QR_NORM {
            self.reorthonormalize()?;
        }
        self.frame = m * &self.frame;
        self.steps += 1;
        self.since_qr += 1;
        if self.since_qr >= self.qr_interval || self.frame.camax() > FORCE_QR_NORM {
            self.reorthonormalize()?;
        }
        Ok(())
    }

    /// QR with positive real diagonal; the logs of `|R_ii|` are accumulated.
    pub fn reorthonormalize(&mut self) -> Result<()> {
        if self.frame.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(OseledetsError::Numeric { step: self.steps });
        }
        let qr = self.frame.clone().qr();
        let r = qr.r();
        let mut q = qr.q();
        for i in 0..r.nrows() {
            let d = r[(i, i)];
            let abs = d.norm();
            if !(abs > 0.0) || !abs.is_finite() {
                return Err(OseledetsError::Numeric { step: self.steps });
            }
            self.log_diag[i] += abs.ln();
            let phase = d / abs;
            let mut col = q.column_mut(i);
            col *= phase;
        }
        self.frame = q;
        self.since_qr = 0;
        Ok(())
    }

    /// Largest deviation of the frame from orthonormality.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.frame.nrows();
        (self.frame.adjoint() * &self.frame - MatrixN::identity(n, n)).camax()
    }
}

/// How sample base points are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BasePoints {
    /// Uniform with respect to area in the fundamental polygon.
    #[default]
    Uniform,
    Fixed(HPoint),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Flow time per sample, curvature −1 arc length.
    pub time: f64,
    pub samples: usize,
    pub seed: u64,
    pub qr_interval: usize,
    pub normalization: Normalization,
    pub base_points: BasePoints,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Flow time discarded before measuring, so the frame settles onto the
    /// Oseledets flag. `None` means `min(time/10, 50)`.
    pub warmup: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            time: 500.0,
            samples: 64,
            seed: 1,
            qr_interval: 8,
            normalization: Normalization::Minus4,
            base_points: BasePoints::Uniform,
            threads: None,
            warmup: None,
        }
    }
}

impl RunConfig {
    pub fn warmup_time(&self) -> f64 {
        self.warmup.unwrap_or((0.1 * self.time).min(50.0))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time > 0.0 && self.time.is_finite()) {
            return Err(OseledetsError::Config(format!("time must be positive, got {}", self.time)));
        }
        if self.samples < 1 {
            return Err(OseledetsError::Config("samples must be at least 1".into()));
        }
        if self.qr_interval < 1 {
            return Err(OseledetsError::Config("qr_interval must be at least 1".into()));
        }
        if self.warmup.is_some_and(|w| !(w >= 0.0 && w.is_finite())) {
            return Err(OseledetsError::Config("warmup must be nonnegative".into()));
        }
        if self.threads == Some(0) {
            return Err(OseledetsError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean spectrum over samples with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    /// Sorted nonincreasing.
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
    pub normalization: Normalization,
    /// Per-sample exponent vectors in QR column order, by sample index.
    pub per_sample: Vec<Vec<f64>>,
    /// Samples that failed, with their error messages.
    pub failures: Vec<(usize, String)>,
    /// Set for estimates that are not geodesic-flow exponents.
    pub caveat: Option<String>,
}

impl SpectrumEstimate {
    fn from_samples(
        per_sample: Vec<Vec<f64>>,
        failures: Vec<(usize, String)>,
        normalization: Normalization,
    ) -> Result<Self> {
        if per_sample.len() < 2 {
            return Err(OseledetsError::InsufficientData {
                ok: per_sample.len(),
                failed: failures.len(),
            });
        }
        let n = per_sample[0].len();
        let (mean, se): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|i| mean_stderr(per_sample.iter().map(|v| v[i])))
            .unzip();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]));
        Ok(Self {
            values: order.iter().map(|&i| mean[i]).collect(),
            stderr: order.iter().map(|&i| se[i]).collect(),
            samples: per_sample.len(),
            normalization,
            per_sample,
            failures,
            caveat: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `Σ_{i≤k} λ_i` with its standard error, computed sample by sample.
    pub fn partial_sum(&self, k: usize) -> (f64, f64) {
        mean_stderr(self.per_sample.iter().map(|v| {
            let mut s = v.clone();
            s.sort_by(|a, b| b.total_cmp(a));
            s[..k].iter().sum()
        }))
    }

    /// `Σ λ_i` with its standard error.
    pub fn total(&self) -> (f64, f64) {
        mean_stderr(self.per_sample.iter().map(|v| v.iter().sum()))
    }

    /// `λ_i + λ_{n+1−i}` (1-based) with its standard error. Panics unless
    /// `1 ≤ i ≤ n`.
    pub fn symmetric_pair(&self, i: usize) -> (f64, f64) {
        let n = self.dim();
        mean_stderr(self.per_sample.iter().map(|v| {
            let mut s = v.clone();
            s.sort_by(|a, b| b.total_cmp(a));
            s[i - 1] + s[n - i]
        }))
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let xs: Vec<f64> = xs.collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Images of the pairing letters, indexed by side.
fn side_matrices(dom: &FundamentalDomain, rep: &Representation) -> Result<Vec<MatrixN>> {
    dom.sides
        .iter()
        .map(|s| {
            if s.letter.unsigned_abs() as usize > rep.generator_count() {
                return Err(OseledetsError::Letter(s.letter));
            }
            Ok(rep.letter_image(s.letter).clone())
        })
        .collect()
}

/// Exponents along one geodesic: growth over `[warmup, warmup + time]`
/// divided by `time`, in the configured normalization.
pub fn run_sample(
    dom: &FundamentalDomain,
    rep: &Representation,
    ut: UnitTangent,
    config: &RunConfig,
) -> Result<Vec<f64>> {
    let mats = side_matrices(dom, rep)?;
    run_with(dom, &mats, rep.n(), ut, config)
}

fn run_with(
    dom: &FundamentalDomain,
    mats: &[MatrixN],
    n: usize,
    ut: UnitTangent,
    config: &RunConfig,
) -> Result<Vec<f64>> {
    let warmup = config.warmup_time();
    let stream = code_geodesic(dom, ut, warmup + config.time)?;
    let mut acc = CocycleAccumulator::new(n, config.qr_interval);
    let mut warm = warmup == 0.0;
    for c in &stream.crossings {
        if !warm && c.time > warmup {
            acc.reorthonormalize()?;
            acc.log_diag.iter_mut().for_each(|l| *l = 0.0);
            warm = true;
        }
        acc.advance(&mats[c.side])?;
        acc.elapsed_length = c.time;
    }
    acc.reorthonormalize()?;
    if !warm {
        acc.log_diag.iter_mut().for_each(|l| *l = 0.0);
    }
    let f = config.normalization.factor() / config.time;
    Ok(acc.log_diag.iter().map(|l| l * f).collect())
}

/// The random generator for sample `index`.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Starting vector for sample `index`.
pub fn sample_start(dom: &FundamentalDomain, config: &RunConfig, index: usize) -> UnitTangent {
    let mut rng = sample_rng(config.seed, index);
    let base = match config.base_points {
        BasePoints::Uniform => dom.sample_point(&mut rng),
        BasePoints::Fixed(z) => z,
    };
    UnitTangent::new(base, rng.gen_range(0.0..TAU))
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

/// Monte-Carlo estimate of the spectrum over the geodesic flow.
pub fn estimate_spectrum(
    dom: &FundamentalDomain,
    rep: &Representation,
    config: &RunConfig,
) -> Result<SpectrumEstimate> {
    config.validate()?;
    let mats = side_matrices(dom, rep)?;
    let results: Vec<Result<Vec<f64>>> = in_pool(config.threads, || {
        (0..config.samples)
            .into_par_iter()
            .map(|i| {
                let ut = sample_start(dom, config, i);
                run_with(dom, &mats, rep.n(), ut, config)
                    .map_err(|e| OseledetsError::Sample {
                        sample: i,
                        source: Box::new(e),
                    })
            })
            .collect()
    });
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    SpectrumEstimate::from_samples(ok, failures, config.normalization)
}

/// Top exponent of `∧ᵏρ` against `Σ_{i≤k} λ_i(ρ)` on the same samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WedgeCheck {
    pub wedge_top: (f64, f64),
    pub direct_sum: (f64, f64),
    pub discrepancy: f64,
    /// `√(se₁² + se₂²)`.
    pub combined_stderr: f64,
}

pub fn wedge_crosscheck(
    dom: &FundamentalDomain,
    rep: &Representation,
    k: usize,
    config: &RunConfig,
) -> Result<WedgeCheck> {
    if k == 0 || k > rep.n() {
        return Err(OseledetsError::Config(format!("wedge degree {k} outside 1..={}", rep.n())));
    }
    let wedge = estimate_spectrum(dom, &ext_power(rep, k)?, config)?;
    let direct = estimate_spectrum(dom, rep, config)?;
    let wedge_top = (wedge.values[0], wedge.stderr[0]);
    let direct_sum = direct.partial_sum(k);
    Ok(WedgeCheck {
        wedge_top,
        direct_sum,
        discrepancy: (wedge_top.0 - direct_sum.0).abs(),
        combined_stderr: wedge_top.1.hypot(direct_sum.1),
    })
}

/// Exponents per step of i.i.d. uniform products over `{g_i^{±1}}`.
///
/// The uniform measure is not the one linking random walks to the geodesic
/// flow, so values are only meaningful as zero versus nonzero.
pub fn random_walk_spectrum(
    rep: &Representation,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<SpectrumEstimate> {
    if steps == 0 {
        return Err(OseledetsError::Config("steps must be positive".into()));
    }
    let letters: Vec<MatrixN> = (1..=rep.generator_count() as i32)
        .flat_map(|l| [l, -l])
        .map(|l| rep.letter_image(l).clone())
        .collect();
    let per_sample = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let mut acc = CocycleAccumulator::new(rep.n(), 8);
            for _ in 0..steps {
                acc.advance(&letters[rng.gen_range(0..letters.len())])?;
            }
            acc.reorthonormalize()?;
            Ok(acc.log_diag.iter().map(|l| l / steps as f64).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut est = SpectrumEstimate::from_samples(per_sample, vec![], Normalization::Minus1)?;
    est.caveat = Some("per-step random-walk exponents; not comparable to geodesic exponents".into());
    Ok(est)
}

/// `diag(values)` as a complex matrix.
pub fn diag(values: &[f64]) -> MatrixN {
    DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| Cx::new(v, 0.0)),
    ))
}
