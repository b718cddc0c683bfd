//! Experiment configuration: a TOML document with the sections `[domain]`,
//! `[kernel]` and `[run]`.
//!
//! ```toml
//! [domain]
//! dim = 2
//! holes = [{ shape = "box", lo = [0.25, 0.25], hi = [0.75, 0.75] }]
//!
//! [kernel]
//! shape = "ball"
//! radius = 0.25
//!
//! [run]
//! kind = "hhom-cell"
//! n = 16
//! ```
//!
//! Parsing reports every violation it finds, not only the first.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use toml::{Table, Value};

use crate::geometry::{DomainSpec, Shape, MAX_DIM};
use crate::kernel::{Kernel, KernelShape};
use crate::{Error, Result};

const SECTIONS: [&str; 3] = ["domain", "kernel", "run"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    HhomCell,
    HhomBoxSweep,
    ExtensionConstants,
    GammaSweep,
    PoincareSuite,
    PathSuite,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::HhomCell,
        ExperimentKind::HhomBoxSweep,
        ExperimentKind::ExtensionConstants,
        ExperimentKind::GammaSweep,
        ExperimentKind::PoincareSuite,
        ExperimentKind::PathSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::HhomCell => "hhom-cell",
            ExperimentKind::HhomBoxSweep => "hhom-box-sweep",
            ExperimentKind::ExtensionConstants => "extension-constants",
            ExperimentKind::GammaSweep => "gamma-sweep",
            ExperimentKind::PoincareSuite => "poincare-suite",
            ExperimentKind::PathSuite => "path-suite",
        }
    }

    fn needs_omega(self) -> bool {
        matches!(self, ExperimentKind::ExtensionConstants | ExperimentKind::GammaSweep)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            format!("unknown experiment kind {s:?} (expected one of {})", names.join(", "))
        })
    }
}

/// A validated experiment with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub domain: DomainSpec,
    pub kernel: KernelShape,
    /// Grid cells per unit-cell edge.
    pub n: usize,
    pub p: f64,
    pub xi: Vec<Vec<f64>>,
    pub eps: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Vec<f64>,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
    /// Extents of `Ω = (0, omega)`.
    pub omega: Option<Vec<f64>>,
    pub fields: usize,
    pub r: Option<f64>,
    pub collar: Option<f64>,
    pub band: Option<f64>,
    pub cases: usize,
    pub powers: Vec<f64>,
    pub pairs: usize,
    pub r1: Option<f64>,
    pub nu: f64,
}

impl ExperimentConfig {
    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::new(self.dim(), self.kernel.clone())
    }
}

pub fn default_resolution(dim: usize) -> usize {
    match dim {
        1 => 256,
        3 => 16,
        _ => 64,
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut errs = Vec::new();
    scan_sections(text, &mut errs);
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let doc: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
    for (key, v) in &doc {
        if !SECTIONS.contains(&key.as_str()) {
            errs.push(format!("unknown section [{key}]"));
        } else if !v.is_table() {
            errs.push(format!("{key} must be a section"));
        }
    }
    let empty = Table::new();
    let mut dom = section(&doc, &empty, "domain", &mut errs);
    if !dom.table.contains_key("dim") {
        errs.push("missing required key domain.dim".into());
    }
    let dim = dom.usize("dim", &mut errs, None);
    let dim = match dim {
        Some(d) if (1..=MAX_DIM).contains(&d) => Some(d),
        Some(d) => {
            errs.push(format!("domain.dim must be 1, 2 or 3, got {d}"));
            None
        }
        None => None,
    };
    let holes = dom.shapes("holes", &mut errs);
    let material = dom.shapes("material", &mut errs);
    dom.finish(&mut errs);
    let domain = dim.map(|dim| DomainSpec { dim, material, holes });
    if let Some(spec) = &domain {
        if let Err(e) = spec.validate() {
            errs.push(format!("domain: {}", bare(&e)));
        }
    }

    let mut ker = section(&doc, &empty, "kernel", &mut errs);
    let kernel = match ker.string("shape", &mut errs, true).as_deref() {
        Some("ball") => Some(KernelShape::Ball { radius: ker.f64("radius", &mut errs).unwrap_or(1.0) }),
        Some("gaussian") => {
            let sigma = ker.required_f64("sigma", &mut errs);
            let radius = ker.required_f64("radius", &mut errs);
            sigma.zip(radius).map(|(sigma, radius)| KernelShape::Gaussian { sigma, radius })
        }
        Some("table") => {
            let radii = ker.f64_list("radii", &mut errs, true);
            let values = ker.f64_list("values", &mut errs, true);
            radii.zip(values).map(|(radii, values)| KernelShape::Table { radii, values })
        }
        Some(other) => {
            errs.push(format!("kernel.shape must be ball, gaussian or table, got {other:?}"));
            None
        }
        None => None,
    };
    ker.finish(&mut errs);
    if let (Some(d), Some(shape)) = (dim, &kernel) {
        if let Err(e) = Kernel::new(d, shape.clone()) {
            errs.push(format!("kernel: {}", bare(&e)));
        }
    }

    let mut run = section(&doc, &empty, "run", &mut errs);
    let kind = run.string("kind", &mut errs, true).and_then(|s| match s.parse::<ExperimentKind>() {
        Ok(k) => Some(k),
        Err(m) => {
            errs.push(format!("run.kind: {m}"));
            None
        }
    });
    let n = run.usize("n", &mut errs, Some(8));
    let p = run.f64("p", &mut errs).unwrap_or(2.0);
    if !(p.is_finite() && p > 1.0) {
        errs.push(format!("run.p: p must exceed 1, got {p}"));
    }
    let xi = run.xi_list("xi", &mut errs);
    let eps = run.f64_list("eps", &mut errs, false).unwrap_or_else(|| vec![0.25, 0.125, 0.0625]);
    positive_list("run.eps", &eps, &mut errs);
    if eps.iter().any(|&e| e > 1.0) {
        errs.push("run.eps: every eps must be at most 1".into());
    }
    let t = run.f64_list("T", &mut errs, false).unwrap_or_else(|| vec![4.0, 8.0, 16.0]);
    positive_list("run.T", &t, &mut errs);
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        errs.push("run.T: values must be strictly increasing".into());
    }
    let seed = run.integer("seed", &mut errs, 0).map(|s| s as u64).unwrap_or(0);
    let out = run.string("out", &mut errs, false).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
    let omega = run.f64_list("omega", &mut errs, false);
    if let Some(om) = &omega {
        positive_list("run.omega", om, &mut errs);
    }
    let fields = run.usize("fields", &mut errs, Some(1)).unwrap_or(20);
    let r = run.f64("r", &mut errs);
    let collar = run.f64("collar", &mut errs);
    let band = run.f64("band", &mut errs);
    for (name, v) in [("r", r), ("collar", collar), ("band", band)] {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("run.{name} must be positive, got {v}"));
            }
        }
    }
    let cases = run.usize("cases", &mut errs, Some(1)).unwrap_or(100);
    let powers = run.f64_list("powers", &mut errs, false).unwrap_or_else(|| vec![1.5, 2.0, 3.0]);
    if powers.is_empty() || powers.iter().any(|q| !(q.is_finite() && *q > 1.0)) {
        errs.push("run.powers: every power must exceed 1".into());
    }
    let pairs = run.usize("pairs", &mut errs, Some(1)).unwrap_or(200);
    let r1 = run.f64("r1", &mut errs);
    if let Some(r1) = r1 {
        if !(r1.is_finite() && r1 > 0.0) {
            errs.push(format!("run.r1 must be positive, got {r1}"));
        }
    }
    let nu = run.f64("nu", &mut errs).unwrap_or(0.5);
    if !(nu > 0.0 && nu <= 1.0) {
        errs.push(format!("run.nu must lie in (0, 1], got {nu}"));
    }
    run.finish(&mut errs);

    if let Some(d) = dim {
        let xi = xi.as_deref().unwrap_or(&[]);
        for (i, v) in xi.iter().enumerate() {
            if v.len() != d {
                errs.push(format!("run.xi[{i}] has {} components, expected {d}", v.len()));
            }
        }
        if let Some(om) = &omega {
            if om.len() != d {
                errs.push(format!("run.omega has {} extents, expected {d}", om.len()));
            }
        }
    }
    if let Some(k) = kind {
        if k.needs_omega() && omega.is_none() {
            errs.push(format!("run.omega is required for kind = {k}"));
        }
    }

    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let (kind, domain, kernel, dim) = (kind.unwrap(), domain.unwrap(), kernel.unwrap(), dim.unwrap());
    let xi = xi.unwrap_or_else(|| vec![(0..dim).map(|a| if a == 0 { 1.0 } else { 0.0 }).collect()]);
    Ok(ExperimentConfig {
        kind,
        domain,
        kernel,
        n: n.unwrap_or_else(|| default_resolution(dim)),
        p,
        xi,
        eps,
        t,
        seed,
        out,
        omega,
        fields,
        r,
        collar,
        band,
        cases,
        powers,
        pairs,
        r1,
        nu,
    })
}

fn section<'a>(doc: &'a Table, empty: &'a Table, name: &'a str, errs: &mut Vec<String>) -> Section<'a> {
    match doc.get(name) {
        Some(Value::Table(t)) => Section::new(name, t),
        Some(_) => Section::new(name, empty),
        None => {
            errs.push(format!("missing section [{name}]"));
            Section::new(name, empty)
        }
    }
}

/// Header-level checks the TOML parser would report less clearly.
fn scan_sections(text: &str, errs: &mut Vec<String>) {
    let mut seen = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if !line.starts_with('[') || line.starts_with("[[") {
            continue;
        }
        let Some(end) = line.find(']') else { continue };
        let name = line[1..end].trim().to_string();
        if !seen.insert(name.clone()) {
            errs.push(format!("duplicate section [{name}] on line {}", lineno + 1));
        }
    }
}

fn positive_list(name: &str, v: &[f64], errs: &mut Vec<String>) {
    if v.is_empty() {
        errs.push(format!("{name} must not be empty"));
    }
    if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        errs.push(format!("{name}: every value must be positive"));
    }
}

/// Error text without the category prefix.
fn bare(e: &Error) -> String {
    match e {
        Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Key reader over one section that remembers which keys were consumed.
struct Section<'a> {
    name: &'a str,
    table: &'a Table,
    used: BTreeSet<&'a str>,
}

impl<'a> Section<'a> {
    fn new(name: &'a str, table: &'a Table) -> Self {
        Self { name, table, used: BTreeSet::new() }
    }

    fn get(&mut self, key: &'a str) -> Option<&'a Value> {
        self.used.insert(key);
        self.table.get(key)
    }

    fn finish(self, errs: &mut Vec<String>) {
        for key in self.table.keys() {
            if !self.used.contains(key.as_str()) {
                errs.push(format!("unknown key {}.{key}", self.name));
            }
        }
    }

    fn string(&mut self, key: &'a str, errs: &mut Vec<String>, required: bool) -> Option<String> {
        match self.get(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                errs.push(format!("{}.{key} must be a string", self.name));
                None
            }
            None => {
                if required {
                    errs.push(format!("missing required key {}.{key}", self.name));
                }
                None
            }
        }
    }

    fn f64(&mut self, key: &'a str, errs: &mut Vec<String>) -> Option<f64> {
        let name = self.name;
        self.get(key).and_then(|v| {
            let x = number(v);
            if x.is_none() {
                errs.push(format!("{name}.{key} must be a number"));
            }
            x
        })
    }

    fn required_f64(&mut self, key: &'a str, errs: &mut Vec<String>) -> Option<f64> {
        if !self.table.contains_key(key) {
            errs.push(format!("missing required key {}.{key}", self.name));
        }
        self.f64(key, errs)
    }

    fn integer(&mut self, key: &'a str, errs: &mut Vec<String>, min: i64) -> Option<i64> {
        let name = self.name;
        match self.get(key)? {
            Value::Integer(i) if *i >= min => Some(*i),
            Value::Integer(i) => {
                errs.push(format!("{name}.{key} must be at least {min}, got {i}"));
                None
            }
            _ => {
                errs.push(format!("{name}.{key} must be an integer"));
                None
            }
        }
    }

    fn usize(&mut self, key: &'a str, errs: &mut Vec<String>, min: Option<usize>) -> Option<usize> {
        self.integer(key, errs, min.unwrap_or(0) as i64).map(|i| i as usize)
    }

    fn f64_list(&mut self, key: &'a str, errs: &mut Vec<String>, required: bool) -> Option<Vec<f64>> {
        let name = self.name;
        match self.get(key) {
            Some(v) => {
                let list = v.as_array().and_then(|a| a.iter().map(number).collect::<Option<Vec<_>>>());
                if list.is_none() {
                    errs.push(format!("{name}.{key} must be an array of numbers"));
                }
                list
            }
            None => {
                if required {
                    errs.push(format!("missing required key {name}.{key}"));
                }
                None
            }
        }
    }

    fn xi_list(&mut self, key: &'a str, errs: &mut Vec<String>) -> Option<Vec<Vec<f64>>> {
        let name = self.name;
        let v = self.get(key)?;
        let list = v.as_array().and_then(|a| {
            a.iter()
                .map(|row| row.as_array().and_then(|r| r.iter().map(number).collect::<Option<Vec<_>>>()))
                .collect::<Option<Vec<_>>>()
        });
        match list {
            Some(l) if !l.is_empty() && l.iter().flatten().all(|x| x.is_finite()) => Some(l),
            _ => {
                errs.push(format!("{name}.{key} must be a nonempty array of vectors, e.g. [[1.0, 0.0]]"));
                None
            }
        }
    }

    fn shapes(&mut self, key: &'a str, errs: &mut Vec<String>) -> Vec<Shape> {
        let name = self.name;
        let Some(v) = self.get(key) else { return Vec::new() };
        let Some(items) = v.as_array() else {
            errs.push(format!("{name}.{key} must be an array of shapes"));
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let Some(t) = item.as_table() else {
                errs.push(format!("{name}.{key}[{i}] must be a table"));
                continue;
            };
            let label = format!("{name}.{key}[{i}]");
            let mut s = Section::new(&label, t);
            let shape = match s.string("shape", errs, false).as_deref() {
                Some("box") => {
                    let lo = s.f64_list("lo", errs, true);
                    let hi = s.f64_list("hi", errs, true);
                    lo.zip(hi).map(|(lo, hi)| Shape::Box { lo, hi })
                }
                Some("ball") => {
                    let center = s.f64_list("center", errs, true);
                    let radius = s.required_f64("radius", errs);
                    center.zip(radius).map(|(center, radius)| Shape::Ball { center, radius })
                }
                Some(other) => {
                    errs.push(format!("{label}.shape must be box or ball, got {other:?}"));
                    None
                }
                None => {
                    errs.push(format!("{label} needs shape = \"box\" or \"ball\""));
                    None
                }
            };
            s.finish(errs);
            out.extend(shape);
        }
        out
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}
