use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::{ExperimentConfig, ExperimentKind};
use crate::asymptotic::{gamma_experiment, t_sweep};
use crate::cell_problem::{solve, CellProblem};
use crate::dump::FieldDump;
use crate::energy::{poincare_defect, GridField};
use crate::extension::{build_plan, default_collar_width, estimate_sweep, scaled_extend};
use crate::geometry::{component_selection, rasterize_domain, BoxGrid, BoxRegion, ComponentMask, PathPlanner, PeriodicDomain};
use crate::kernel::Kernel;
use crate::random::{uniform_at, uniform_field};
use crate::{Error, Result};

/// Files written by a run, relative to the output directory, in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub summary: String,
}

/// Artifacts are collected in memory and written at the end by one writer.
struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    summary: Vec<String>,
    constants: serde_json::Map<String, serde_json::Value>,
}

impl Artifacts {
    fn new() -> Self {
        Self { files: Vec::new(), summary: Vec::new(), constants: serde_json::Map::new() }
    }

    fn line(&mut self, s: impl Into<String>) {
        self.summary.push(s.into());
    }

    fn constant(&mut self, key: &str, v: f64) {
        self.constants.insert(key.into(), json!(v));
        self.line(format!("{key} = {}", float(v)));
    }

    fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| Error::Format(format!("csv {name}: {e}"));
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv {name}: {e}")))?;
        self.files.push((name.into(), bytes));
        Ok(())
    }

    fn dump(&mut self, name: &str, d: &FieldDump) {
        self.files.push((name.into(), d.encode()));
    }
}

/// Fixed 17-significant-digit float formatting.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn vec_str(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|a| format!("{prefix}{a}")).collect()
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Runs the experiment and writes CSV tables, field dumps, `summary.txt` and
/// `manifest.json` into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    let dom = rasterize_domain(&cfg.domain, cfg.n)?;
    let comp = component_selection(&dom)?;
    let kernel = cfg.kernel()?;
    let mut art = Artifacts::new();
    art.line(format!("kind = {}", cfg.kind));
    art.line(format!("dim = {}", cfg.dim()));
    art.line(format!("n = {}", cfg.n));
    art.line(format!("p = {}", cfg.p));
    art.line(format!("volume_fraction = {}", float(dom.volume_fraction())));
    art.line(format!("k = {}", comp.k()));
    art.constants.insert("k".into(), json!(comp.k()));
    art.constant("C_tilde", comp.c_tilde());
    art.constant("k0", comp.k0());
    art.constant("R0", kernel.support());
    art.constant("r0", kernel.r0());

    match cfg.kind {
        ExperimentKind::HhomCell => hhom_cell(cfg, &dom, &kernel, &mut art)?,
        ExperimentKind::HhomBoxSweep => box_sweep(cfg, &dom, &kernel, &mut art)?,
        ExperimentKind::ExtensionConstants => extension_constants(cfg, &dom, &comp, &kernel, &mut art)?,
        ExperimentKind::GammaSweep => gamma_sweep(cfg, &dom, &comp, &kernel, &mut art)?,
        ExperimentKind::PoincareSuite => poincare_suite(cfg, &dom, &mut art)?,
        ExperimentKind::PathSuite => path_suite(cfg, &dom, &comp, &mut art)?,
    }
    write_all(cfg, art, out)
}

fn write_all(cfg: &ExperimentConfig, mut art: Artifacts, out: &Path) -> Result<RunReport> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut summary = art.summary.join("\n");
    summary.push('\n');
    art.files.push(("summary.txt".into(), summary.clone().into_bytes()));
    let mut files: Vec<String> = art.files.iter().map(|(n, _)| n.clone()).collect();
    files.push("manifest.json".into());
    let version = env!("CARGO_PKG_VERSION");
    let modules: serde_json::Map<String, serde_json::Value> =
        ["geometry", "kernel", "energy", "extension", "cell_problem", "asymptotic", "cli"]
            .iter()
            .map(|m| (m.to_string(), json!(version)))
            .collect();
    let manifest = json!({
        "tool": "nlhom",
        "version": version,
        "modules": modules,
        "config": cfg,
        "constants": art.constants,
        "files": files,
    });
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    art.files.push(("manifest.json".into(), text.into_bytes()));
    for (name, bytes) in &art.files {
        let path = out.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(RunReport { dir: out.to_path_buf(), files, summary })
}

fn cell_problem(cfg: &ExperimentConfig, dom: &PeriodicDomain, kernel: &Kernel, xi: &[f64]) -> Result<CellProblem> {
    CellProblem::new(dom.clone(), kernel.clone(), cfg.p, xi.to_vec())
}

fn hhom_cell(cfg: &ExperimentConfig, dom: &PeriodicDomain, kernel: &Kernel, art: &mut Artifacts) -> Result<()> {
    let d = cfg.dim();
    let mut head = names("xi", d);
    head.extend(header(&["p", "n", "value", "grad_norm", "iters"]));
    let cell_grid = BoxGrid::new(BoxRegion::cube(d, 1.0)?, 1.0 / cfg.n as f64)?;
    let mut rows = Vec::new();
    for (i, xi) in cfg.xi.iter().enumerate() {
        let sol = solve(&cell_problem(cfg, dom, kernel, xi)?)?;
        let mut row: Vec<String> = xi.iter().map(|&v| float(v)).collect();
        row.extend([float(cfg.p), cfg.n.to_string(), float(sol.value), float(sol.grad_norm), sol.iterations.to_string()]);
        rows.push(row);
        art.line(format!(
            "h_hom(xi = {}) = {} (grad_norm = {}, iterations = {})",
            vec_str(xi),
            float(sol.value),
            float(sol.grad_norm),
            sol.iterations
        ));
        let w = GridField::new(cell_grid.clone(), sol.corrector, dom.indicator().to_vec())?;
        art.dump(&format!("corrector_{i}.nlh1"), &FieldDump::from_field(&w));
    }
    art.csv("hhom.csv", &head, &rows)
}

fn box_sweep(cfg: &ExperimentConfig, dom: &PeriodicDomain, kernel: &Kernel, art: &mut Artifacts) -> Result<()> {
    let head = header(&["T", "box_pinned", "box_periodic", "cell", "gap_pinned", "gap_periodic"]);
    if let Some(b) = cfg.band {
        art.line(format!("band = {}", float(b)));
    }
    for (i, xi) in cfg.xi.iter().enumerate() {
        let sweep = t_sweep(&cell_problem(cfg, dom, kernel, xi)?, &cfg.t, cfg.band)?;
        let rows: Vec<Vec<String>> = sweep
            .iter()
            .map(|s| {
                vec![float(s.t), float(s.box_pinned), float(s.box_periodic), float(s.cell), float(s.gap_pinned), float(s.gap_periodic)]
            })
            .collect();
        if let Some(first) = sweep.first() {
            art.line(format!("h_hom(xi = {}) = {} (cell formula)", vec_str(xi), float(first.cell)));
        }
        for s in &sweep {
            art.line(format!(
                "  T = {}: box_pinned = {}, box_periodic = {}",
                s.t,
                float(s.box_pinned),
                float(s.box_periodic)
            ));
        }
        art.csv(&format!("box_sweep_{i}.csv"), &head, &rows)?;
    }
    Ok(())
}

fn omega_region(cfg: &ExperimentConfig) -> Result<BoxRegion> {
    let ext = cfg.omega.clone().ok_or_else(|| Error::Config(vec![format!("run.omega is required for kind = {}", cfg.kind)]))?;
    BoxRegion::new(vec![0.0; ext.len()], ext)
}

fn extension_constants(
    cfg: &ExperimentConfig,
    dom: &PeriodicDomain,
    comp: &ComponentMask,
    kernel: &Kernel,
    art: &mut Artifacts,
) -> Result<()> {
    let t = cfg.collar.unwrap_or_else(|| default_collar_width(dom));
    let plan = build_plan(dom, comp, t)?;
    let omega = omega_region(cfg)?;
    let r = cfg.r.unwrap_or(kernel.r0());
    art.constant("collar", t);
    art.constant("R", plan.r_est());
    art.line(format!("r = {}", float(r)));
    art.line(format!("fields = {}, seed = {}", cfg.fields, cfg.seed));
    let rows = estimate_sweep(&plan, dom, &omega, &cfg.eps, r, cfg.p, cfg.fields, cfg.seed)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|e| vec![float(e.eps), float(e.r), float(e.c1_hat), float(e.c2_hat), float(e.r_est), float(e.k0)])
        .collect();
    for e in &rows {
        art.line(format!("eps = {}: c1_hat = {}, c2_hat = {}", e.eps, float(e.c1_hat), float(e.c2_hat)));
    }
    let spread = |f: fn(&crate::extension::EstimateRow) -> f64| {
        let (lo, hi) = rows.iter().map(f).fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
        hi / lo
    };
    art.line(format!("c1_hat spread = {}", float(spread(|e| e.c1_hat))));
    art.line(format!("c2_hat spread = {}", float(spread(|e| e.c2_hat))));
    art.csv("estimates.csv", &header(&["eps", "r", "c1_hat", "c2_hat", "R", "k0"]), &table)?;

    // first corpus field and its extension at the coarsest eps
    let eps = cfg.eps[0];
    let grid = BoxGrid::new(omega, eps / cfg.n as f64)?;
    let mask = GridField::perforated_mask(&grid, dom, eps);
    let noise = uniform_field(cfg.seed, 0, grid.len());
    let values = noise.iter().zip(&mask).map(|(&z, &m)| if m { z } else { 0.0 }).collect();
    let u = GridField::new(grid, values, mask)?;
    let tu = scaled_extend(&plan, dom, &u, eps)?;
    art.dump("field_0.nlh1", &FieldDump::from_field(&u));
    art.dump("extended_0.nlh1", &FieldDump::from_field(&tu));
    Ok(())
}

fn gamma_sweep(
    cfg: &ExperimentConfig,
    dom: &PeriodicDomain,
    comp: &ComponentMask,
    kernel: &Kernel,
    art: &mut Artifacts,
) -> Result<()> {
    let omega = omega_region(cfg)?;
    for &eps in &cfg.eps {
        let lambda = eps * comp.k0();
        if !(lambda < 0.5 * omega.min_extent()) {
            return Err(Error::Margin(format!(
                "eps*k0 = {lambda} at eps = {eps} must stay below half the smallest extent of Omega ({})",
                0.5 * omega.min_extent()
            )));
        }
    }
    let head = header(&["eps", "F_recovery", "F_linear", "h_hom"]);
    for (i, xi) in cfg.xi.iter().enumerate() {
        let cell = cell_problem(cfg, dom, kernel, xi)?;
        let sol = solve(&cell)?;
        art.line(format!(
            "h_hom(xi = {}) = {} (grad_norm = {}, iterations = {})",
            vec_str(xi),
            float(sol.value),
            float(sol.grad_norm),
            sol.iterations
        ));
        let rows = gamma_experiment(&cell, &sol, &cfg.eps, &omega)?;
        for g in &rows {
            art.line(format!("  eps = {}: F_recovery = {}, F_linear = {}", g.eps, float(g.f_recovery), float(g.f_linear)));
        }
        let table: Vec<Vec<String>> =
            rows.iter().map(|g| vec![float(g.eps), float(g.f_recovery), float(g.f_linear), float(g.h_hom)]).collect();
        art.csv(&format!("gamma_{i}.csv"), &head, &table)?;
    }
    Ok(())
}

/// Random `(field, region, p)` triples on the unit cube at spacing `1/n`,
/// the field living on `E`. Regions have extents in `[1/4, 1/2)`.
fn poincare_suite(cfg: &ExperimentConfig, dom: &PeriodicDomain, art: &mut Artifacts) -> Result<()> {
    let d = cfg.dim();
    let grid = BoxGrid::new(BoxRegion::cube(d, 1.0)?, 1.0 / cfg.n as f64)?;
    let mask = GridField::perforated_mask(&grid, dom, 1.0);
    let unit = |stream: u64, i: usize| 0.5 * (uniform_at(cfg.seed, stream, i) + 1.0);
    let mut rows = Vec::with_capacity(cfg.cases);
    let mut worst = f64::NEG_INFINITY;
    for c in 0..cfg.cases {
        let p = cfg.powers[c % cfg.powers.len()];
        let noise = uniform_field(cfg.seed, c as u64, grid.len());
        let values = noise.iter().zip(&mask).map(|(&z, &m)| if m { z } else { 0.0 }).collect();
        let u = GridField::new(grid.clone(), values, mask.clone())?;
        let stream = (1u64 << 32) | c as u64;
        let mut found = None;
        for attempt in 0..64 {
            let mut lo = vec![0.0; d];
            let mut ext = vec![0.0; d];
            for a in 0..d {
                let k = (attempt * d + a) * 2;
                ext[a] = 0.25 + 0.25 * unit(stream, k);
                lo[a] = (1.0 - ext[a]) * unit(stream, k + 1);
            }
            let region = BoxRegion::new(lo, ext)?;
            match poincare_defect(&u, &region, p) {
                Ok(pd) => {
                    found = Some((region, pd));
                    break;
                }
                Err(Error::EmptyRegion(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        let (region, pd) = found.ok_or_else(|| Error::EmptyRegion(format!("no region of case {c} meets E")))?;
        let slack = pd.lhs - pd.rhs;
        worst = worst.max(if pd.rhs > 0.0 { pd.lhs / pd.rhs } else { 0.0 });
        let mut row = vec![c.to_string(), float(p)];
        row.extend(region.origin.iter().map(|&v| float(v)));
        row.extend(region.extent.iter().map(|&v| float(v)));
        row.extend([float(pd.lhs), float(pd.rhs), float(slack), (pd.lhs <= pd.rhs * (1.0 + 1e-9)).to_string()]);
        rows.push(row);
    }
    let holds = rows.iter().filter(|r| r.last().map(String::as_str) == Some("true")).count();
    art.line(format!("cases = {}, inequality holds in {holds}", cfg.cases));
    art.line(format!("max lhs/rhs = {}", float(worst)));
    let mut head = header(&["case", "p"]);
    head.extend(names("lo", d));
    head.extend(names("extent", d));
    head.extend(header(&["lhs", "rhs", "lhs_minus_rhs", "holds"]));
    art.csv("poincare.csv", &head, &rows)
}

/// Paths between cell centres of `3Q ∩ C` on a coarse sublattice (four
/// points per unit per axis), subsampled evenly to at most `pairs` pairs.
fn path_suite(cfg: &ExperimentConfig, dom: &PeriodicDomain, comp: &ComponentMask, art: &mut Artifacts) -> Result<()> {
    let d = cfg.dim();
    let r1 = cfg.r1.unwrap_or(4.0 * dom.spacing());
    let planner = PathPlanner::new(comp, r1, cfg.nu)?;
    let n_bar = planner.n_bar()?;
    let stride = (cfg.n / 4).max(1);
    let w = comp.window();
    let points: Vec<Vec<f64>> = (0..w.len())
        .filter(|&i| comp.mask()[i] && comp.in_subcube(i, 3))
        .filter(|&i| w.coords(i)[..d].iter().all(|c| c % stride == stride / 2))
        .map(|i| comp.cell_center(i)[..d].to_vec())
        .collect();
    let mut all = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            all.push((i, j));
        }
    }
    let take = cfg.pairs.min(all.len());
    let chosen: Vec<(usize, usize)> = (0..take).map(|s| all[s * all.len() / take]).collect();
    let mut rows = Vec::with_capacity(take);
    let mut max_n = 0;
    let mut within = true;
    for (s, &(i, j)) in chosen.iter().enumerate() {
        let path = planner.find(&points[i], &points[j])?;
        let n = path.interior_len();
        max_n = max_n.max(n);
        within &= n <= n_bar && path.max_step() <= r1 * (1.0 + 1e-12);
        let mut row = vec![s.to_string()];
        row.extend(points[i].iter().map(|&v| float(v)));
        row.extend(points[j].iter().map(|&v| float(v)));
        row.extend([n.to_string(), float(path.max_step())]);
        rows.push(row);
    }
    art.constant("r1", r1);
    art.constant("nu", cfg.nu);
    art.constants.insert("N_bar".into(), json!(n_bar));
    art.line(format!("N_bar = {n_bar}"));
    art.line(format!("pairs = {take} of {}, max N = {max_n}, all within bounds = {within}", all.len()));
    let mut head = header(&["pair"]);
    head.extend(names("a", d));
    head.extend(names("b", d));
    head.extend(header(&["N", "max_step"]));
    art.csv("paths.csv", &head, &rows)?;
    let dims = w.dims().to_vec();
    art.dump("component.nlh1", &FieldDump::from_mask(&dims, vec![0.0; d], dom.spacing(), comp.mask()));
    Ok(())
}
