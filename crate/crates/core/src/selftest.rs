//! Reduced-size invariant suites across all modules.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::devmaps::{ode_develop, veronese_dev, Covector, OdeDev, Phi};
use crate::errterm::{count_in_balls, orbit_count_function, uniform_grid, Counted};
use crate::fuchsian::{
    build_group, code_geodesic, eval_word_mobius, pull_back, FuchsianGroup, ORBIT_BUDGET,
};
use crate::hypgeo::{geodesic_flow, hyp_dist, HPoint, Mobius, UnitTangent};
use crate::linrep::{check_relations, ext_matrix, sym_matrix, sym_power, Cx, MatrixN, Representation};
use crate::oseledets::{estimate_spectrum, RunConfig};
use crate::report::spectrum_csv;
use crate::word::Word;

pub const RELATION_TOL: f64 = 1e-9;
pub const WRONSKIAN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Default)]
pub struct SelftestOptions {
    /// Adds this amount to one entry of each generator before the relation
    /// suite runs.
    pub corrupt_generators: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for SuiteOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<22} {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.detail,
            self.seconds
        )
    }
}

type SuiteFn = fn(&Fixtures, &SelftestOptions) -> (bool, String);

pub const SUITES: [(&str, SuiteFn); 8] = [
    ("isometry-invariance", isometry_invariance),
    ("homomorphism-laws", homomorphism_laws),
    ("relation-residuals", relation_residuals),
    ("coding-consistency", coding_consistency),
    ("qr-interval-invariance", qr_interval_invariance),
    ("seed-determinism", seed_determinism),
    ("ode-wronskian", ode_wronskian),
    ("counting-monotonicity", counting_monotonicity),
];

pub struct Fixtures {
    triangle: FuchsianGroup,
    surface: FuchsianGroup,
}

/// Runs every suite in order.
pub fn run_selftest(opts: &SelftestOptions) -> Vec<SuiteOutcome> {
    let fixtures = Fixtures {
        triangle: build_group("triangle:3,3,4".parse().expect("valid spec")).expect("builds"),
        surface: build_group("surface:2".parse().expect("valid spec")).expect("builds"),
    };
    SUITES
        .iter()
        .map(|(id, f)| {
            let start = Instant::now();
            let (passed, detail) = f(&fixtures, opts);
            SuiteOutcome {
                id,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5e1f)
}

fn random_mobius(rng: &mut ChaCha8Rng) -> Mobius {
    let p = HPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0)).expect("upper half-plane");
    Mobius::moving_i_to(p) * Mobius::rotation_about(HPoint::I, rng.gen_range(0.0..6.3))
}

fn isometry_invariance(_: &Fixtures, _: &SelftestOptions) -> (bool, String) {
    let mut rng = rng();
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let g = random_mobius(&mut rng);
        let z = HPoint::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.05..4.0)).expect("point");
        let w = HPoint::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.05..4.0)).expect("point");
        let d = hyp_dist(z, w);
        let (Ok(gz), Ok(gw)) = (g.apply(z), g.apply(w)) else {
            return (false, "isometry left the half-plane".into());
        };
        worst = worst.max((hyp_dist(gz, gw) - d).abs() / (1.0 + d));
    }
    (worst < 1e-9, format!("max relative distance change {worst:.1e}"))
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> MatrixN {
    DMatrix::from_fn(n, n, |_, _| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn homomorphism_laws(_: &Fixtures, _: &SelftestOptions) -> (bool, String) {
    let mut rng = rng();
    let mut worst: f64 = 0.0;
    for n in 2..=4 {
        for k in 1..=3 {
            let (a, b) = (random_matrix(&mut rng, n), random_matrix(&mut rng, n));
            let scale = 1.0 + a.norm().powi(k as i32) * b.norm().powi(k as i32);
            let s = (sym_matrix(&(&a * &b), k) - sym_matrix(&a, k) * sym_matrix(&b, k)).norm();
            worst = worst.max(s / scale);
            if k <= n {
                let e = (ext_matrix(&(&a * &b), k) - ext_matrix(&a, k) * ext_matrix(&b, k)).norm();
                worst = worst.max(e / scale);
            }
        }
    }
    (worst < 1e-12, format!("max relative defect {worst:.1e}"))
}

fn corrupted(rep: &Representation, delta: Option<f64>) -> Representation {
    let Some(delta) = delta else { return rep.clone() };
    let gens: Vec<MatrixN> = rep
        .generators()
        .iter()
        .map(|g| {
            let mut g = g.clone();
            g[(0, 0)] += Cx::new(delta, 0.0);
            g
        })
        .collect();
    rep.with_generators(gens, rep.field()).unwrap_or_else(|_| rep.clone())
}

fn relation_residuals(fx: &Fixtures, opts: &SelftestOptions) -> (bool, String) {
    let mut reps = vec![fx.triangle.uniformizing_rep(), fx.surface.uniformizing_rep(), fx.triangle.trivial_rep(3)];
    if let Ok(cube) = fx.triangle.unitary_cube_rep() {
        reps.push(cube);
    }
    if let Ok(s2) = sym_power(&fx.triangle.uniformizing_rep(), 2) {
        reps.push(s2);
    }
    let mut worst: f64 = 0.0;
    for rep in &reps {
        let rep = corrupted(rep, opts.corrupt_generators);
        worst = worst.max(check_relations(&rep).max_residual);
    }
    (worst < RELATION_TOL, format!("max residual {worst:.1e} over {} reps", reps.len()))
}

fn coding_consistency(fx: &Fixtures, _: &SelftestOptions) -> (bool, String) {
    let mut rng = rng();
    let dom = &fx.triangle.domain;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let ut = UnitTangent::new(dom.sample_point(&mut rng), rng.gen_range(0.0..6.3));
        let t = 6.0;
        let Ok(stream) = code_geodesic(dom, ut, t) else {
            return (false, "coding failed".into());
        };
        let word = Word::new(stream.letters().map(|l| -l).collect());
        let g = eval_word_mobius(&fx.triangle.generators, &word);
        let end = geodesic_flow(ut, t).base;
        let Ok(unfolded) = g.apply(stream.final_state.base) else {
            return (false, "unfolding failed".into());
        };
        worst = worst.max(hyp_dist(unfolded, end));
        let Ok((back, _)) = pull_back(dom, end) else {
            return (false, "pull-back failed".into());
        };
        if !dom.contains(back) {
            return (false, "pull-back left the polygon".into());
        }
    }
    (worst < 1e-7, format!("max unfolded-endpoint gap {worst:.1e}"))
}

fn small_config(seed: u64, qr: usize) -> RunConfig {
    RunConfig {
        time: 60.0,
        samples: 8,
        seed,
        qr_interval: qr,
        ..RunConfig::default()
    }
}

fn qr_interval_invariance(fx: &Fixtures, _: &SelftestOptions) -> (bool, String) {
    let rep = fx.triangle.uniformizing_rep();
    let dom = &fx.triangle.domain;
    let (Ok(a), Ok(b)) = (
        estimate_spectrum(dom, &rep, &small_config(3, 1)),
        estimate_spectrum(dom, &rep, &small_config(3, 16)),
    ) else {
        return (false, "spectrum failed".into());
    };
    let gap = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    (gap < 1e-9, format!("max difference between intervals 1 and 16: {gap:.1e}"))
}

fn seed_determinism(fx: &Fixtures, _: &SelftestOptions) -> (bool, String) {
    let rep = fx.surface.uniformizing_rep();
    let dom = &fx.surface.domain;
    let run = |threads| {
        let cfg = RunConfig { threads: Some(threads), ..small_config(11, 8) };
        estimate_spectrum(dom, &rep, &cfg).map(|e| spectrum_csv(rep.label(), &e, cfg.time, cfg.seed))
    };
    match (run(1), run(3)) {
        (Ok(a), Ok(b)) if a == b => (true, "byte-identical CSV across thread counts".into()),
        (Ok(_), Ok(_)) => (false, "CSV differs between runs".into()),
        _ => (false, "spectrum failed".into()),
    }
}

fn ode_wronskian(_: &Fixtures, _: &SelftestOptions) -> (bool, String) {
    let phi: Phi = Arc::new(|z: Cx| (z * 0.4).cos() * 0.3);
    let mut path = vec![HPoint::I];
    let mut len = 0.0;
    let mut k = 0;
    while len < 10.0 {
        k += 1;
        let Ok(next) = HPoint::new((k as f64 * 0.9).sin(), 1.2 + 0.6 * (k as f64 * 0.5).cos()) else {
            return (false, "bad path".into());
        };
        len += hyp_dist(*path.last().expect("nonempty"), next);
        path.push(next);
    }
    match ode_develop(&phi, OdeDev::standard_frame(HPoint::I), &path) {
        Ok(out) => (
            out.wronskian_drift < WRONSKIAN_TOL,
            format!("drift {:.1e} over length {len:.1}", out.wronskian_drift),
        ),
        Err(e) => (false, e.to_string()),
    }
}

fn counting_monotonicity(fx: &Fixtures, _: &SelftestOptions) -> (bool, String) {
    let grid = uniform_grid(6.0, 120);
    let center = HPoint { x: 0.13, y: 1.21 };
    let orbit = orbit_count_function(&fx.triangle.domain, fx.triangle.domain.interior_point, center, &grid, ORBIT_BUDGET);
    let one = Cx::new(1.0, 0.0);
    let dev = veronese_dev(4, None);
    let u = Covector::from_polynomial(&[one, Cx::new(0.0, 2.0), Cx::new(-1.0, 0.5), one], 3);
    let (Ok(orbit), Ok(dev), Ok(u)) = (orbit, dev, u) else {
        return (false, "setup failed".into());
    };
    let bad = count_in_balls(Counted::Bad { dev: &dev, covector: &u }, HPoint::I, &grid);
    let Ok(bad) = bad else {
        return (false, "bad-locus count failed".into());
    };
    let mono = |c: &[u64]| c.windows(2).all(|w| w[0] <= w[1]);
    (
        mono(&orbit.counts) && mono(&bad.counts),
        format!("{} orbit points and {} bad points at t = 6", orbit.counts[119], bad.counts[119]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_build_passes() {
        let out = run_selftest(&SelftestOptions::default());
        for o in &out {
            assert!(o.passed, "{o}");
        }
        assert_eq!(out.len(), SUITES.len());
    }

    #[test]
    fn corruption_fails_only_the_relation_suite() {
        let out = run_selftest(&SelftestOptions { corrupt_generators: Some(1e-3) });
        let failed: Vec<&str> = out.iter().filter(|o| !o.passed).map(|o| o.id).collect();
        assert_eq!(failed, vec!["relation-residuals"]);
    }
}
