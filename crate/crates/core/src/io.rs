//! CSV files for measures, couplings, supports and potentials, and the
//! key-value model config.
//!
//! Numbers are written as `{:.16e}` (17 significant digits), which parses
//! back to the same `f64`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::measures::{
    AngularDensity, AngularPart, Atom, DiscreteMeasure, HomogeneousMeasure, Point,
};
use crate::monotone::{DiscretePotential, PotentialNode};
use crate::regvar::{RVModel, SlowlyVarying};
use crate::transport::{Endpoint, Entry, SupportSet, ZeroCoupling};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn axis_header(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (0..dim).map(move |k| format!("{prefix}{k}"))
}

fn expect_header(found: &csv::StringRecord, want: &[String]) -> Result<()> {
    if found.iter().ne(want.iter().map(String::as_str)) {
        return Err(Error::Parse(format!(
            "header {:?}, expected {:?}",
            found.iter().collect::<Vec<_>>(),
            want
        )));
    }
    Ok(())
}

/// Dimension implied by a header of `fixed + per_axis·d` columns.
fn header_dim(h: &csv::StringRecord, fixed: usize, per_axis: usize) -> Result<usize> {
    let n = h.len();
    if n <= fixed || (n - fixed) % per_axis != 0 {
        return Err(Error::Parse(format!("header with {n} columns")));
    }
    Ok((n - fixed) / per_axis)
}

/// `x0,…,x{d−1},w`.
pub fn write_measure<W: Write>(m: &DiscreteMeasure, w: W) -> Result<()> {
    let mut out = writer(w);
    let header: Vec<String> = axis_header("x", m.dim()).chain(["w".to_string()]).collect();
    out.write_record(&header)?;
    for a in m.atoms() {
        let row: Vec<String> = a
            .point
            .coords()
            .iter()
            .map(|&c| fmt_f64(c))
            .chain([fmt_f64(a.weight)])
            .collect();
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_measure<R: Read>(r: R) -> Result<DiscreteMeasure> {
    let mut rd = reader(r);
    let h = rd.headers()?.clone();
    let dim = header_dim(&h, 1, 1)?;
    expect_header(
        &h,
        &axis_header("x", dim)
            .chain(["w".to_string()])
            .collect::<Vec<_>>(),
    )?;
    let mut atoms = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let vals = rec.iter().map(parse_f64).collect::<Result<Vec<_>>>()?;
        let weight = vals[dim];
        atoms.push(Atom {
            point: Point::new(vals[..dim].to_vec())?,
            weight,
        });
    }
    DiscreteMeasure::new(dim, atoms)
}

fn fmt_endpoint(e: Endpoint) -> String {
    match e {
        Endpoint::Origin => "O".to_string(),
        Endpoint::Atom(i) => i.to_string(),
    }
}

fn parse_endpoint(s: &str) -> Result<Endpoint> {
    if s == "O" {
        Ok(Endpoint::Origin)
    } else {
        Ok(Endpoint::Atom(parse_usize(s)?))
    }
}

/// `src,dst,mass` with `O` for the origin.
pub fn write_coupling<W: Write>(g: &ZeroCoupling, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["src", "dst", "mass"])?;
    for e in g.entries() {
        out.write_record([fmt_endpoint(e.src), fmt_endpoint(e.dst), fmt_f64(e.mass)])?;
    }
    out.flush()?;
    Ok(())
}

/// Entries refer to atoms of `sources` and `targets`.
pub fn read_coupling<R: Read>(
    r: R,
    sources: &DiscreteMeasure,
    targets: &DiscreteMeasure,
) -> Result<ZeroCoupling> {
    let mut rd = reader(r);
    expect_header(rd.headers()?, &["src".into(), "dst".into(), "mass".into()])?;
    let mut entries = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Parse(format!(
                "coupling row with {} fields",
                rec.len()
            )));
        }
        entries.push(Entry {
            src: parse_endpoint(&rec[0])?,
            dst: parse_endpoint(&rec[1])?,
            mass: parse_f64(&rec[2])?,
        });
    }
    ZeroCoupling::new(sources.clone(), targets.clone(), entries)
}

/// `x0,…,x{d−1},y0,…,y{d−1}`.
pub fn write_support<W: Write>(s: &SupportSet, w: W) -> Result<()> {
    let mut out = writer(w);
    let header: Vec<String> = axis_header("x", s.dim())
        .chain(axis_header("y", s.dim()))
        .collect();
    out.write_record(&header)?;
    for (x, y) in s.pairs() {
        let row: Vec<String> = x
            .coords()
            .iter()
            .chain(y.coords())
            .map(|&c| fmt_f64(c))
            .collect();
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_support<R: Read>(r: R) -> Result<SupportSet> {
    let mut rd = reader(r);
    let h = rd.headers()?.clone();
    let dim = header_dim(&h, 0, 2)?;
    expect_header(
        &h,
        &axis_header("x", dim)
            .chain(axis_header("y", dim))
            .collect::<Vec<_>>(),
    )?;
    let mut pairs = Vec::new();
    for rec in rd.records() {
        let vals = rec?.iter().map(parse_f64).collect::<Result<Vec<_>>>()?;
        pairs.push((vals[..dim].to_vec(), vals[dim..].to_vec()));
    }
    SupportSet::from_coords(dim, pairs)
}

/// `x0,…,x{d−1},psi,g0,…,g{d−1}`.
pub fn write_potential<W: Write>(p: &DiscretePotential, w: W) -> Result<()> {
    let mut out = writer(w);
    let header: Vec<String> = axis_header("x", p.dim())
        .chain(["psi".to_string()])
        .chain(axis_header("g", p.dim()))
        .collect();
    out.write_record(&header)?;
    for n in p.nodes() {
        let row: Vec<String> =
            n.x.coords()
                .iter()
                .chain([&n.psi])
                .chain(n.grad.coords())
                .map(|&c| fmt_f64(c))
                .collect();
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// The base node is taken to be the first one with `psi = 0`.
pub fn read_potential<R: Read>(r: R) -> Result<DiscretePotential> {
    let mut rd = reader(r);
    let h = rd.headers()?.clone();
    let dim = header_dim(&h, 1, 2)?;
    let want: Vec<String> = axis_header("x", dim)
        .chain(["psi".to_string()])
        .chain(axis_header("g", dim))
        .collect();
    expect_header(&h, &want)?;
    let mut nodes = Vec::new();
    for rec in rd.records() {
        let vals = rec?.iter().map(parse_f64).collect::<Result<Vec<_>>>()?;
        nodes.push(PotentialNode {
            x: Point::new(vals[..dim].to_vec())?,
            psi: vals[dim],
            grad: Point::new(vals[dim + 1..].to_vec())?,
        });
    }
    let base = nodes.iter().position(|n| n.psi == 0.0).unwrap_or(0);
    DiscretePotential::new(dim, nodes, base)
}

/// Settings read from a key-value config file.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub measure: HomogeneousMeasure,
    pub slowly_varying: SlowlyVarying,
}

impl ModelConfig {
    pub fn model(&self) -> Result<RVModel> {
        RVModel::new(&self.measure, self.slowly_varying)
    }
}

/// Parses `key = value` lines; `#` starts a comment.
///
/// Keys: `dim`, `alpha`, `angular_kind` (`discrete` or `density`),
/// `angular_spec`, `angular_mass` (default 1), `smooth` (default true for
/// densities in d ≥ 2), `angular_resolution` (default 64) and
/// `radial_slowly_varying` (`none` or `log`, default `none`).
///
/// A density spec is one of `uniform`, `cos3_right`, `pushed_left` or
/// `arc:<center>:<half_width>`. A discrete spec lists `;`-separated atoms
/// `c0 c1 … : weight`, for example `1 0 : 0.5; -1 0 : 0.5`.
pub fn parse_config(text: &str) -> Result<ModelConfig> {
    let mut dim = None;
    let mut alpha = None;
    let mut kind = None;
    let mut spec = None;
    let mut mass = 1.0;
    let mut smooth = None;
    let mut resolution = 64;
    let mut slowly_varying = SlowlyVarying::None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
        let value = value.trim();
        match key.trim() {
            "dim" => dim = Some(parse_usize(value)?),
            "alpha" => alpha = Some(parse_f64(value)?),
            "angular_kind" => kind = Some(value.to_string()),
            "angular_spec" => spec = Some(value.to_string()),
            "angular_mass" => mass = parse_f64(value)?,
            "angular_resolution" => resolution = parse_usize(value)?,
            "smooth" => {
                smooth = Some(
                    value
                        .parse::<bool>()
                        .map_err(|e| Error::Parse(format!("smooth: {e}")))?,
                );
            }
            "radial_slowly_varying" => {
                slowly_varying = match value {
                    "none" => SlowlyVarying::None,
                    "log" => SlowlyVarying::Log,
                    other => return Err(Error::Parse(format!("radial_slowly_varying {other:?}"))),
                }
            }
            other => return Err(Error::Parse(format!("unknown key {other:?}"))),
        }
    }
    let missing = |k: &str| Error::Parse(format!("missing key {k}"));
    let dim = dim.ok_or_else(|| missing("dim"))?;
    let alpha = alpha.ok_or_else(|| missing("alpha"))?;
    let spec = spec.ok_or_else(|| missing("angular_spec"))?;
    let (angular, default_smooth) = match kind.as_deref().ok_or_else(|| missing("angular_kind"))? {
        "density" => (
            AngularPart::Density {
                density: parse_density(&spec)?,
                resolution,
            },
            dim >= 2,
        ),
        "discrete" => (AngularPart::Discrete(parse_discrete(&spec, dim)?), false),
        other => return Err(Error::Parse(format!("angular_kind {other:?}"))),
    };
    let measure =
        HomogeneousMeasure::new(dim, alpha, angular, mass, smooth.unwrap_or(default_smooth))?;
    Ok(ModelConfig {
        measure,
        slowly_varying,
    })
}

fn parse_density(spec: &str) -> Result<AngularDensity> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    match parts.as_slice() {
        ["uniform"] => Ok(AngularDensity::Uniform),
        ["cos3_right"] => Ok(AngularDensity::CosCubedRight),
        ["pushed_left"] => Ok(AngularDensity::PushedLeft),
        ["arc", c, h] => Ok(AngularDensity::Arc {
            center: parse_f64(c)?,
            half_width: parse_f64(h)?,
        }),
        _ => Err(Error::Parse(format!("angular density {spec:?}"))),
    }
}

fn parse_discrete(spec: &str, dim: usize) -> Result<Vec<(Point, f64)>> {
    spec.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|atom| {
            let (coords, w) = atom
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("angular atom {atom:?} needs ': weight'")))?;
            let c = coords
                .split_whitespace()
                .map(parse_f64)
                .collect::<Result<Vec<_>>>()?;
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.len(),
                });
            }
            Ok((Point::new(c)?, parse_f64(w)?))
        })
        .collect()
}
