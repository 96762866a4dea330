use std::path::Path;
use std::sync::Arc;

use lyaplab::devmaps::{ode_dev, veronese_dev, Covector, DevKind, DevelopingMap, OdeDev, Phi};
use lyaplab::errterm::{count_in_balls, err_estimate, orbit_count_function, uniform_grid, Counted};
use lyaplab::fuchsian::ORBIT_BUDGET;
use lyaplab::hypgeo::HPoint;
use lyaplab::linrep::{check_relations, classify, write_rep, Cx};
use lyaplab::oseledets::estimate_spectrum;
use lyaplab::report::{err_csv, spectrum_csv, svg_from_csv, sweep_csv, PlotSpec, SweepRow};
use lyaplab::selftest::{run_selftest, SelftestOptions};

use crate::source::{self, bend, gate, parse_entries, parse_point, resolve, run_config};
use crate::{Command, Common, ErrArgs, Exit, Failure, OrbitArgs, SweepArgs};

pub fn run(cmd: Command) -> Result<Exit, Failure> {
    match cmd {
        Command::Spectrum(c) => spectrum(&c),
        Command::Sweep(s) => sweep(&s),
        Command::Err(e) => err(&e),
        Command::OrbitCount(o) => orbit_count(&o),
        Command::Rep(c) => rep(&c),
        Command::Selftest(s) => {
            let out = run_selftest(&SelftestOptions {
                corrupt_generators: s.corrupt_generators,
            });
            for o in &out {
                println!("{o}");
            }
            let failed: Vec<&str> = out.iter().filter(|o| !o.passed).map(|o| o.id).collect();
            if failed.is_empty() {
                Ok(Exit::Ok)
            } else {
                eprintln!("lyaplab: failing suites: {}", failed.join(", "));
                Ok(Exit::SelftestFailed)
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

/// Writes the CSV and, when asked, its plot.
fn emit(c: &Common, csv: &str) -> Result<Exit, Failure> {
    match &c.out {
        Some(p) => write_file(p, csv)?,
        None => print!("{csv}"),
    }
    if let Some(p) = &c.svg {
        let header = csv.lines().next().unwrap_or_default();
        let spec = PlotSpec::for_header(header).ok_or_else(|| Failure::refuse("no plot for this CSV"))?;
        let svg = svg_from_csv(csv, &spec).map_err(|e| Failure::refuse(e.to_string()))?;
        write_file(p, &svg)?;
    }
    Ok(Exit::Ok)
}

fn spectrum(c: &Common) -> Result<Exit, Failure> {
    let cfg = run_config(c)?;
    let (g, rep) = resolve(c)?;
    let est = estimate_spectrum(&g.domain, &rep, &cfg).map_err(|e| Failure::refuse(e.to_string()))?;
    for (i, msg) in &est.failures {
        eprintln!("lyaplab: sample {i} failed: {msg}");
    }
    emit(c, &spectrum_csv(rep.label(), &est, cfg.time, cfg.seed))
}

pub fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::refuse(format!("bad grid {s:?}"));
    let vals: Vec<f64> = if let [a, b, n] = s.split(':').collect::<Vec<_>>()[..] {
        let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        let n: usize = n.parse().map_err(|_| bad())?;
        match n {
            0 => return Err(bad()),
            1 => vec![a],
            _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
        }
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if vals.is_empty() || vals.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(vals)
}

fn sweep(s: &SweepArgs) -> Result<Exit, Failure> {
    let c = &s.common;
    let cfg = run_config(c)?;
    let (g, base) = resolve(c)?;
    source::splitting(&g)?;
    if base.n() != 2 {
        return Err(Failure::refuse("sweeps need a rank-2 base representation"));
    }
    let unit = match s.param.as_str() {
        "bend-re" => Cx::new(1.0, 0.0),
        "bend-im" => Cx::new(0.0, 1.0),
        p => return Err(Failure::refuse(format!("unknown sweep parameter {p:?}"))),
    };
    let rows: Vec<SweepRow> = parse_grid(&s.grid)?
        .into_iter()
        .map(|v| {
            let outcome = bend(&g, &base, unit * v)
                .and_then(|rep| gate(&rep).map(|_| rep))
                .map_err(|f| f.message)
                .and_then(|rep| estimate_spectrum(&g.domain, &rep, &cfg).map_err(|e| e.to_string()))
                .map(|est| (est.values[0], est.stderr[0]));
            if let Err(msg) = &outcome {
                eprintln!("lyaplab: sweep point {v} failed: {msg}");
            }
            SweepRow { s: v, outcome }
        })
        .collect();
    emit(c, &sweep_csv(&s.param, &rows))
}

fn developing_map(spec: &str) -> Result<DevelopingMap, Failure> {
    if spec == "identity" {
        return Ok(DevelopingMap { kind: DevKind::Identity, rep: None });
    }
    if let Some(n) = spec.strip_prefix("veronese:") {
        let n: usize = n.parse().map_err(|_| Failure::refuse(format!("bad degree in {spec:?}")))?;
        return veronese_dev(n, None).map_err(|e| Failure::refuse(e.to_string()));
    }
    if let Some(cs) = spec.strip_prefix("ode:") {
        let coeffs = parse_entries(cs)?;
        let phi: Phi = Arc::new(move |z: Cx| coeffs.iter().rev().fold(Cx::new(0.0, 0.0), |acc, &c| acc * z + c));
        return Ok(ode_dev(phi, HPoint::I, OdeDev::standard_frame(HPoint::I), None));
    }
    Err(Failure::refuse(format!("unknown developing map {spec:?}")))
}

fn covector(dev: &DevelopingMap, spec: &str) -> Result<Covector, Failure> {
    let u = match spec.strip_prefix("poly:") {
        Some(cs) => {
            let DevKind::Veronese(n) = dev.kind else {
                return Err(Failure::refuse("poly: covectors need a veronese map"));
            };
            Covector::from_polynomial(&parse_entries(cs)?, n - 1)
        }
        None => Covector::new(parse_entries(spec)?),
    };
    let u = u.map_err(|e| Failure::refuse(e.to_string()))?;
    if u.coords().len() != dev.target_len() {
        return Err(Failure::refuse(format!(
            "covector has {} coordinates, map needs {}",
            u.coords().len(),
            dev.target_len()
        )));
    }
    Ok(u)
}

fn err(e: &ErrArgs) -> Result<Exit, Failure> {
    let dev = developing_map(&e.dev)?;
    let u = covector(&dev, &e.covector)?;
    let center = parse_point(&e.center)?;
    check_horizon(e.t_max, e.nodes)?;
    let cf = count_in_balls(Counted::Bad { dev: &dev, covector: &u }, center, &uniform_grid(e.t_max, e.nodes))
        .map_err(|x| Failure::refuse(x.to_string()))?;
    let est = err_estimate(&cf, e.t_max).map_err(|x| Failure::refuse(x.to_string()))?;
    let flagged: u64 = cf.ambiguous.iter().sum();
    if flagged > 0 {
        eprintln!("lyaplab: {flagged} boundary-ambiguous counts");
    }
    emit(&e.common, &err_csv(&est))
}

fn check_horizon(t_max: f64, nodes: usize) -> Result<(), Failure> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Failure::refuse(format!("t-max must be positive, got {t_max}")));
    }
    if nodes == 0 {
        return Err(Failure::refuse("nodes must be positive"));
    }
    Ok(())
}

fn orbit_count(o: &OrbitArgs) -> Result<Exit, Failure> {
    let g = source::group(&o.common)?;
    let center = parse_point(&o.center)?;
    check_horizon(o.t_max, o.nodes)?;
    let z0 = g.domain.interior_point;
    let cf = orbit_count_function(&g.domain, z0, center, &uniform_grid(o.t_max, o.nodes), ORBIT_BUDGET)
        .map_err(|x| Failure::refuse(x.to_string()))?;
    let est = err_estimate(&cf, o.t_max).map_err(|x| Failure::refuse(x.to_string()))?;
    eprintln!(
        "lyaplab: estimate {:.4}, reference π/covol = {:.4}",
        est.value,
        std::f64::consts::PI / g.covolume()
    );
    emit(&o.common, &err_csv(&est))
}

fn rep(c: &Common) -> Result<Exit, Failure> {
    let (_, rep) = resolve(c)?;
    eprintln!(
        "lyaplab: {} n={} residual {:.2e} {}",
        rep.label(),
        rep.n(),
        check_relations(&rep).max_residual,
        classify(&rep, 6).as_str()
    );
    let text = write_rep(&rep);
    match &c.out {
        Some(p) => write_file(p, &text)?,
        None => print!("{text}"),
    }
    Ok(Exit::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:2:3").unwrap(), vec![0.0, 1.0, 2.0]);
        assert_eq!(parse_grid("4,8,16").unwrap(), vec![4.0, 8.0, 16.0]);
        assert_eq!(parse_grid("0:2:11").unwrap().len(), 11);
        for bad in ["", "0:1:0", "a,b", "1,nan"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn poly_covector_needs_veronese() {
        let id = developing_map("identity").unwrap();
        assert!(covector(&id, "poly:1,0,1").is_err());
        let v = developing_map("veronese:3").unwrap();
        assert_eq!(covector(&v, "poly:1,0,1").unwrap().coords().len(), 3);
        assert!(covector(&v, "1,2").is_err());
        assert!(covector(&id, "0,0").is_err());
    }
}
