//! Groups, representations and transforms named on the command line.

use lyaplab::fuchsian::{bend_representation_balanced, build_group, BendSplitting, FuchsianGroup, GroupSpec};
use lyaplab::linrep::{check_relations, ext_power, parse_entry, parse_rep, sym_power, Cx, Representation};
use lyaplab::oseledets::{Normalization, RunConfig};

use crate::{Common, Failure};

/// Scaled residual above which a representation is refused.
pub const RELATION_GATE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    Sym(usize),
    Ext(usize),
    Bend(Cx),
}

pub fn parse_transform(s: &str) -> Result<Transform, String> {
    let (kind, arg) = s.split_once(':').ok_or_else(|| format!("bad transform {s:?}"))?;
    let int = || {
        arg.parse::<usize>()
            .ok()
            .filter(|&k| k >= 1)
            .ok_or_else(|| format!("bad power in {s:?}"))
    };
    match kind {
        "sym" => Ok(Transform::Sym(int()?)),
        "ext" => Ok(Transform::Ext(int()?)),
        "bend" => {
            let (re, im) = arg.split_once(',').ok_or_else(|| format!("bend needs re,im in {s:?}"))?;
            let re: f64 = re.trim().parse().map_err(|_| format!("bad real part in {s:?}"))?;
            let im: f64 = im.trim().parse().map_err(|_| format!("bad imaginary part in {s:?}"))?;
            if !re.is_finite() || !im.is_finite() {
                return Err(format!("nonfinite bend parameter in {s:?}"));
            }
            Ok(Transform::Bend(Cx::new(re, im)))
        }
        _ => Err(format!("unknown transform {kind:?}")),
    }
}

pub fn group(c: &Common) -> Result<FuchsianGroup, Failure> {
    let spec: GroupSpec = c.group.parse().map_err(|e| Failure::refuse(format!("{e}")))?;
    build_group(spec).map_err(|e| Failure::refuse(e.to_string()))
}

pub fn splitting(g: &FuchsianGroup) -> Result<BendSplitting, Failure> {
    match g.spec {
        GroupSpec::Surface { genus } => Ok(BendSplitting::surface_default(genus)),
        _ => Err(Failure::refuse("bending needs a surface group")),
    }
}

pub fn bend(g: &FuchsianGroup, rep: &Representation, s: Cx) -> Result<Representation, Failure> {
    if rep.n() != 2 {
        return Err(Failure::refuse("bending needs a rank-2 representation"));
    }
    bend_representation_balanced(rep, &splitting(g)?, s).map_err(|e| Failure::refuse(e.to_string()))
}

/// The base representation before transforms.
pub fn base_rep(g: &FuchsianGroup, name: &str) -> Result<Representation, Failure> {
    let rep = match name {
        "builtin:fuchsian" => g.uniformizing_rep(),
        "builtin:unitary-cube" => g.unitary_cube_rep().map_err(|e| Failure::refuse(e.to_string()))?,
        _ if name.starts_with("builtin:trivial") => {
            let n = match name.strip_prefix("builtin:trivial") {
                Some("") => 2,
                Some(rest) => rest
                    .strip_prefix(':')
                    .and_then(|k| k.parse().ok())
                    .filter(|&k: &usize| k >= 1)
                    .ok_or_else(|| Failure::refuse(format!("bad trivial rank in {name:?}")))?,
                None => unreachable!(),
            };
            g.trivial_rep(n)
        }
        _ if name.starts_with("builtin:") => return Err(Failure::refuse(format!("unknown builtin {name:?}"))),
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read {path}: {e}")))?;
            let rep = parse_rep(&text).map_err(|e| Failure::refuse(format!("{path}: {e}")))?;
            if rep.generator_count() != g.generators.len() {
                return Err(Failure::refuse(format!(
                    "{path}: {} generators, group {} has {}",
                    rep.generator_count(),
                    g.spec,
                    g.generators.len()
                )));
            }
            // Also hold the file to the group's own relations.
            let against_group = Representation::new(
                rep.label(),
                rep.field(),
                rep.generators().to_vec(),
                g.relations.clone(),
                rep.projective(),
            )
            .map_err(|e| Failure::refuse(e.to_string()))?;
            gate(&against_group)?;
            rep
        }
    };
    Ok(rep)
}

pub fn apply(g: &FuchsianGroup, rep: Representation, t: &Transform) -> Result<Representation, Failure> {
    let out = match t {
        Transform::Sym(k) => sym_power(&rep, *k),
        Transform::Ext(k) => ext_power(&rep, *k),
        Transform::Bend(s) => return bend(g, &rep, *s),
    };
    out.map_err(|e| Failure::refuse(e.to_string()))
}

/// Refuses representations whose relations fail.
pub fn gate(rep: &Representation) -> Result<(), Failure> {
    let report = check_relations(rep);
    if report.passes_scaled(RELATION_GATE) {
        Ok(())
    } else {
        Err(Failure::refuse(format!(
            "relation check failed for {}: scaled residual {:.3e} > {RELATION_GATE:e}",
            rep.label(),
            report.max_scaled
        )))
    }
}

/// Group and fully transformed representation, checked.
pub fn resolve(c: &Common) -> Result<(FuchsianGroup, Representation), Failure> {
    let g = group(c)?;
    let mut rep = base_rep(&g, &c.rep)?;
    for t in &c.transforms {
        let t = parse_transform(t).map_err(Failure::refuse)?;
        rep = apply(&g, rep, &t)?;
    }
    gate(&rep)?;
    Ok((g, rep))
}

pub fn run_config(c: &Common) -> Result<RunConfig, Failure> {
    let normalization: Normalization = c
        .normalization
        .parse()
        .map_err(|e| Failure::refuse(format!("{e}")))?;
    let cfg = RunConfig {
        time: c.time,
        samples: c.samples,
        seed: c.seed,
        qr_interval: c.qr_interval,
        normalization,
        threads: c.threads,
        ..RunConfig::default()
    };
    cfg.validate().map_err(|e| Failure::refuse(e.to_string()))?;
    Ok(cfg)
}

pub fn parse_point(s: &str) -> Result<lyaplab::hypgeo::HPoint, Failure> {
    let bad = || Failure::refuse(format!("bad point {s:?}, expected x,y with y > 0"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    let x: f64 = x.trim().parse().map_err(|_| bad())?;
    let y: f64 = y.trim().parse().map_err(|_| bad())?;
    lyaplab::hypgeo::HPoint::new(x, y).map_err(|_| bad())
}

pub fn parse_entries(s: &str) -> Result<Vec<Cx>, Failure> {
    s.split(',')
        .map(|t| parse_entry(t.trim()).map_err(Failure::refuse))
        .collect()
}
