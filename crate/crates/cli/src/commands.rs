use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use strip_anderson::green::{w_ergodic, w_estimate, ComplexEnergy};
use strip_anderson::ids::{feynman_kac_laplace, ids_table, IdsTable};
use strip_anderson::lyapunov::lyapunov_sweep;
use strip_anderson::model::{model2_preset, DisorderSpec};
use strip_anderson::regularity::{check_bounds, hoelder_exponent, rank_sweep};
use strip_anderson::thouless::{thouless_fit, EDGE_MARGIN};

use crate::args::*;
use crate::cache::{self, IdsCache};
use crate::error::{CliError, CliResult};
use crate::output::{manifest_path, num, version_string, write_json, RunManifest, Table};

pub const CACHE_ENV: &str = "STRIP_ANDERSON_CACHE";

/// Per-invocation state carried into the manifest.
pub struct Context {
    pub argv: Vec<String>,
    pub threads: usize,
    pub started: Instant,
}

/// What a subcommand produced, for the manifest.
#[derive(Default)]
struct Produced {
    outputs: Vec<PathBuf>,
    model: Option<DisorderSpec>,
    seed: Option<u64>,
    notes: Vec<String>,
}

pub fn execute(command: &Command, ctx: &Context) -> CliResult<()> {
    let produced = match command {
        Command::Lyapunov(a) => lyapunov(a)?,
        Command::Ids(a) => ids(a)?,
        Command::FkLaplace(a) => fk_laplace(a)?,
        Command::Wfunc(a) => wfunc(a)?,
        Command::Thouless(a) => thouless(a)?,
        Command::Hoelder(a) => hoelder(a)?,
        Command::Rank(a) => rank(a)?,
        Command::Bounds(a) => bounds(a)?,
        Command::Replay(_) => unreachable!("replay is dispatched before execute"),
    };
    write_manifests(command, ctx, produced)
}

fn write_manifests(command: &Command, ctx: &Context, produced: Produced) -> CliResult<()> {
    if produced.outputs.is_empty() {
        return Ok(());
    }
    let manifest = RunManifest {
        subcommand: command.name().to_string(),
        params: serde_json::to_value(command)?,
        model: produced.model.map(|m| serde_json::to_value(m.to_model_file())).transpose()?,
        seed: produced.seed,
        version: version_string(),
        argv: ctx.argv.clone(),
        cwd: std::env::current_dir()?,
        outputs: produced.outputs.clone(),
        threads: ctx.threads,
        notes: produced.notes,
        wall_time_seconds: ctx.started.elapsed().as_secs_f64(),
    };
    for out in &produced.outputs {
        write_json(&manifest, Some(&manifest_path(out)))?;
    }
    Ok(())
}

fn load_model(args: &ModelArgs) -> CliResult<DisorderSpec> {
    match &args.model {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::param(format!("cannot read model {}: {e}", path.display())))?;
            Ok(DisorderSpec::from_json(&text)?)
        }
        None => Ok(model2_preset()),
    }
}

fn uniform_grid(emin: Option<f64>, emax: Option<f64>, esteps: Option<usize>) -> CliResult<Vec<f64>> {
    let (Some(lo), Some(hi), Some(n)) = (emin, emax, esteps) else {
        return Err(CliError::param("an energy grid needs --emin, --emax and --esteps"));
    };
    if !(lo.is_finite() && hi.is_finite()) || n == 0 {
        return Err(CliError::param("energy grid bounds must be finite and --esteps positive"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    if hi <= lo {
        return Err(CliError::param(format!("--emax {hi} must exceed --emin {lo}")));
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

fn energies(grid: &EnergyGrid) -> CliResult<Vec<f64>> {
    match grid.energy {
        Some(e) => Ok(vec![e]),
        None => uniform_grid(grid.emin, grid.emax, grid.esteps),
    }
}

fn push_output(produced: &mut Produced, out: &Option<PathBuf>) {
    if let Some(p) = out {
        produced.outputs.push(p.clone());
    }
}

fn lyapunov(a: &LyapunovArgs) -> CliResult<Produced> {
    let spec = load_model(&a.model)?;
    let grid = energies(&a.grid)?;
    let spectra = lyapunov_sweep(&spec, &grid, a.cells, a.model.seed, a.renorm)?;
    let dim = 2 * spec.channels;
    let header = std::iter::once("energy".to_string())
        .chain((1..=dim).map(|i| format!("gamma_{i}")))
        .chain((1..=dim).map(|i| format!("se_{i}")))
        .chain(["cells".to_string(), "seed".to_string()]);
    let mut table = Table::new(header);
    for s in &spectra {
        let mut row = vec![num(s.energy)];
        row.extend(s.exponents.iter().map(|&g| num(g)));
        row.extend(s.standard_errors.iter().map(|&g| num(g)));
        row.push(s.cells_used.to_string());
        row.push(s.seed.to_string());
        table.push(row);
    }
    table.write(a.out.as_deref())?;
    let mut produced = Produced { model: Some(spec), seed: Some(a.model.seed), ..Default::default() };
    push_output(&mut produced, &a.out);
    Ok(produced)
}

/// Computes an IDS table, going through the cache when one is configured.
fn obtain_ids(spec: &DisorderSpec, seed: u64, p: &IdsParams, notes: &mut Vec<String>) -> CliResult<IdsTable> {
    let grid = uniform_grid(p.emin, p.emax, p.esteps)?;
    let dir = p.cache_dir.clone().or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from));
    let Some(dir) = dir else {
        return Ok(ids_table(spec, seed, p.box_length, p.mesh, &grid, p.boundary)?);
    };
    let cache = IdsCache::new(&dir)?;
    let key = cache::key(&spec.to_model_file(), p.box_length, p.mesh, p.boundary, &grid, seed);
    if let Some(table) = cache.load(&key) {
        notes.push(format!("ids cache hit {}", cache.path(&key).display()));
        return Ok(table);
    }
    let table = ids_table(spec, seed, p.box_length, p.mesh, &grid, p.boundary)?;
    cache.store(&key, &table)?;
    notes.push(format!("ids cache store {}", cache.path(&key).display()));
    Ok(table)
}

fn ids(a: &IdsArgs) -> CliResult<Produced> {
    let spec = load_model(&a.model)?;
    let mut notes = Vec::new();
    let t = obtain_ids(&spec, a.model.seed, &a.params, &mut notes)?;
    if !t.shifted.is_empty() {
        notes.push(format!("pivot breakdown shifted {} grid energies", t.shifted.len()));
    }
    let mut table = Table::new(["energy", "ids", "box_length", "mesh", "boundary", "seed"]);
    for (&e, &n) in t.energies.iter().zip(&t.counts_per_volume) {
        table.push(vec![
            num(e),
            num(n),
            t.box_length.to_string(),
            num(t.mesh),
            t.boundary.as_str().to_string(),
            t.seed.to_string(),
        ]);
    }
    table.write(a.out.as_deref())?;
    let mut produced = Produced { model: Some(spec), seed: Some(a.model.seed), notes, ..Default::default() };
    push_output(&mut produced, &a.out);
    Ok(produced)
}

fn fk_laplace(a: &FkArgs) -> CliResult<Produced> {
    let spec = load_model(&a.model)?;
    let mut table = Table::new(["t", "laplace", "se", "paths", "time_step", "seed"]);
    for &t in &a.times {
        let est = feynman_kac_laplace(&spec, t, a.paths, a.time_step, a.model.seed)?;
        table.push(vec![
            num(t),
            num(est.value),
            num(est.mc_standard_error),
            est.paths.to_string(),
            num(est.time_step),
            a.model.seed.to_string(),
        ]);
    }
    table.write(a.out.as_deref())?;
    let mut produced = Produced { model: Some(spec), seed: Some(a.model.seed), ..Default::default() };
    push_output(&mut produced, &a.out);
    Ok(produced)
}

fn wfunc(a: &WfuncArgs) -> CliResult<Produced> {
    let spec = load_model(&a.model)?;
    let grid = energies(&a.grid)?;
    let mut table = Table::new(["e", "a", "re_w", "im_w", "se_re", "se_im", "re_trG", "im_trG", "L_w", "realizations"]);
    let mut notes = Vec::new();
    if a.method == WMethod::Ergodic {
        notes.push("ergodic method: L_w holds the burn-in, realizations the number of chain points".into());
    }
    for &im in &a.imag {
        for &e in &grid {
            let z = ComplexEnergy::new(e, im)?;
            let row = match a.method {
                WMethod::Iid => {
                    let w = w_estimate(&spec, z, a.window, a.realizations, a.model.seed)?;
                    if w.herglotz_violations > 0 {
                        notes.push(format!("{} Herglotz violations at {e}+{im}i", w.herglotz_violations));
                    }
                    [w.w.re, w.w.im, w.w_se.0, w.w_se.1, w.green_trace.re, w.green_trace.im]
                        .map(num)
                        .into_iter()
                        .chain([w.truncation_length.to_string(), w.realizations.to_string()])
                        .collect::<Vec<_>>()
                }
                WMethod::Ergodic => {
                    let c = w_ergodic(&spec, z, a.cells, a.burn_in, a.offsets, a.model.seed)?;
                    [c.w.re, c.w.im, c.w_se.0, c.w_se.1, c.green_trace.re, c.green_trace.im]
                        .map(num)
                        .into_iter()
                        .chain([a.burn_in.to_string(), c.points.to_string()])
                        .collect()
                }
            };
            let mut full = vec![num(e), num(im)];
            full.extend(row);
            table.push(full);
        }
    }
    table.write(a.out.as_deref())?;
    let mut produced = Produced { model: Some(spec), seed: Some(a.model.seed), notes, ..Default::default() };
    push_output(&mut produced, &a.out);
    Ok(produced)
}

/// Numeric columns of a CSV file by header name.
struct Columns {
    path: PathBuf,
    headers: Vec<String>,
    data: HashMap<String, Vec<String>>,
}

impl Columns {
    fn read(path: &Path) -> CliResult<Self> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| CliError::param(format!("cannot read {}: {e}", path.display())))?;
        let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut data: HashMap<String, Vec<String>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
        for record in reader.records() {
            let record = record?;
            for (h, v) in headers.iter().zip(record.iter()) {
                data.get_mut(h).expect("header present").push(v.trim().to_string());
            }
        }
        Ok(Self { path: path.to_path_buf(), headers, data })
    }

    fn has(&self, name: &str) -> bool {
        self.data.contains_key(name)
    }

    fn floats(&self, name: &str) -> CliResult<Vec<f64>> {
        let col = self
            .data
            .get(name)
            .ok_or_else(|| CliError::param(format!("{} has no column '{name}'", self.path.display())))?;
        col.iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    CliError::param(format!("{}: '{s}' in column '{name}' is not a number", self.path.display()))
                })
            })
            .collect()
    }

    /// `gamma_sum`, or the sum of the top half of `gamma_k` columns of a lyapunov CSV.
    fn gamma_sums(&self) -> CliResult<Vec<f64>> {
        if self.has("gamma_sum") {
            return self.floats("gamma_sum");
        }
        let dim = self.headers.iter().filter(|h| h.starts_with("gamma_")).count();
        if dim == 0 || dim % 2 != 0 {
            return Err(CliError::param(format!(
                "{} has neither 'gamma_sum' nor an even set of 'gamma_k' columns",
                self.path.display()
            )));
        }
        let mut acc = vec![0.0; self.floats("energy")?.len()];
        for k in 1..=dim / 2 {
            for (a, g) in acc.iter_mut().zip(self.floats(&format!("gamma_{k}"))?) {
                *a += g;
            }
        }
        Ok(acc)
    }

    fn column(&self, name: &str) -> CliResult<Vec<f64>> {
        if name == "gamma_sum" {
            self.gamma_sums()
        } else {
            self.floats(name)
        }
    }
}

#[derive(Serialize)]
struct ThoulessSummary {
    alpha: f64,
    rms: f64,
    /// `α - Re w(i)`; null unless `--rew-cells` was given.
    alpha_vs_rew_i: Option<f64>,
    re_w_i: Option<f64>,
    re_w_i_se: Option<f64>,
    energies: usize,
    max_abs_residual: f64,
}

fn thouless(a: &ThoulessArgs) -> CliResult<Produced> {
    let spec = load_model(&a.model)?;
    let channels = a.channels.unwrap_or(spec.channels);
    let mut notes = Vec::new();
    let table = match &a.ids {
        Some(path) => {
            let cols = Columns::read(path)?;
            IdsTable::from_values(cols.floats("energy")?, cols.floats("ids")?, channels)?
        }
        None => {
            let mut t = obtain_ids(&spec, a.model.seed, &a.ids_params, &mut notes)?;
            t.channels = channels;
            t
        }
    };
    let gamma = Columns::read(&a.gamma)?;
    let k = table.energies.len();
    if k < 2 * EDGE_MARGIN + 1 {
        return Err(CliError::param("IDS table too short for the Thouless integral"));
    }
    let (lo, hi) = (table.energies[EDGE_MARGIN], table.energies[k - 1 - EDGE_MARGIN]);
    let (g_e, g_v): (Vec<f64>, Vec<f64>) =
        gamma.floats("energy")?.into_iter().zip(gamma.gamma_sums()?).filter(|(e, _)| *e >= lo && *e <= hi).unzip();
    let dropped = gamma.floats("energy")?.len() - g_e.len();
    if dropped > 0 {
        notes.push(format!("{dropped} γ energies outside [{lo}, {hi}] (table edge margin) were skipped"));
    }
    let fit = thouless_fit(&g_e, &g_v, &table)?;
    let rew = match a.rew_cells {
        Some(cells) => {
            let burn_in = (cells / 10).min(200);
            let c = w_ergodic(&spec, ComplexEnergy::new(0.0, 1.0)?, cells, burn_in, 8, a.model.seed)?;
            Some((c.w.re, c.w_se.0))
        }
        None => None,
    };
    let summary = ThoulessSummary {
        alpha: fit.alpha,
        rms: fit.rms,
        alpha_vs_rew_i: rew.map(|(re, _)| fit.alpha - re),
        re_w_i: rew.map(|r| r.0),
        re_w_i_se: rew.map(|r| r.1),
        energies: fit.energies.len(),
        max_abs_residual: fit.residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
    };
    write_json(&summary, Some(&a.out))?;
    let residual_path = a.residuals.clone().unwrap_or_else(|| a.out.with_extension("residuals.csv"));
    let mut rows = Table::new(["energy", "gamma_sum", "thouless_rhs", "residual"]);
    for i in 0..fit.energies.len() {
        rows.push(vec![num(fit.energies[i]), num(fit.gamma_sums[i]), num(fit.rhs[i]), num(fit.residuals[i])]);
    }
    rows.write(Some(&residual_path))?;
    Ok(Produced { outputs: vec![a.out.clone(), residual_path], model: Some(spec), seed: Some(a.model.seed), notes })
}

fn hoelder(a: &HoelderArgs) -> CliResult<Produced> {
    let mut notes = Vec::new();
    let spec = load_model(&a.model)?;
    let (energies, values) = match &a.input {
        Some(path) => {
            let cols = Columns::read(path)?;
            (cols.floats("energy")?, cols.column(&a.column)?)
        }
        None => {
            if a.column != "ids" {
                return Err(CliError::param("without --input only the 'ids' column can be computed"));
            }
            let t = obtain_ids(&spec, a.model.seed, &a.ids_params, &mut notes)?;
            (t.energies, t.counts_per_volume)
        }
    };
    let lo = a.from.unwrap_or(f64::NEG_INFINITY);
    let hi = a.to.unwrap_or(f64::INFINITY);
    let (e, v): (Vec<f64>, Vec<f64>) = energies.into_iter().zip(values).filter(|(e, _)| *e >= lo && *e <= hi).unzip();
    if e.len() < 2 {
        return Err(CliError::param("fewer than two samples in the selected energy range"));
    }
    let step = (e[e.len() - 1] - e[0]) / (e.len() - 1) as f64;
    if e.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0)) {
        return Err(CliError::param("Hölder estimation needs a uniform energy grid"));
    }
    let estimate = hoelder_exponent(&v, (e[0], e[e.len() - 1]))?;
    write_json(&estimate, a.out.as_deref())?;
    let mut produced = Produced { model: Some(spec), seed: Some(a.model.seed), notes, ..Default::default() };
    push_output(&mut produced, &a.out);
    Ok(produced)
}

fn rank(a: &RankArgs) -> CliResult<Produced> {
    let spec = load_model(&a.model)?;
    let grid = energies(&a.grid)?;
    let reports = rank_sweep(&spec, &grid, a.max_power, a.tol, a.model.seed)?;
    let mut table = Table::new(["energy", "rank", "n_generators", "min_power_used", "target", "inconclusive"]);
    for r in &reports {
        table.push(vec![
            num(r.energy),
            r.dimension.to_string(),
            r.generators.len().to_string(),
            r.min_power_used.map(|p| p.to_string()).unwrap_or_default(),
            r.target.to_string(),
            r.inconclusive.to_string(),
        ]);
    }
    table.write(a.out.as_deref())?;
    let mut produced = Produced { model: Some(spec), seed: Some(a.model.seed), ..Default::default() };
    push_output(&mut produced, &a.out);
    Ok(produced)
}

fn bounds(a: &BoundsArgs) -> CliResult<Produced> {
    let spec = load_model(&a.model)?;
    if a.emax.partial_cmp(&a.emin) != Some(std::cmp::Ordering::Greater) {
        return Err(CliError::param(format!("--emax {} must exceed --emin {}", a.emax, a.emin)));
    }
    let report = check_bounds(&spec, (a.emin, a.emax), a.samples, a.model.seed)?;
    write_json(&report, a.out.as_deref())?;
    let mut produced = Produced { model: Some(spec), seed: Some(a.model.seed), ..Default::default() };
    push_output(&mut produced, &a.out);
    Ok(produced)
}

/// Reads a manifest and returns its argument vector and working directory.
pub fn replay_target(path: &Path) -> CliResult<(Vec<String>, PathBuf)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::param(format!("cannot read manifest {}: {e}", path.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    if manifest.argv.get(1).map(String::as_str) == Some("replay") {
        return Err(CliError::param("manifest records a replay"));
    }
    Ok((manifest.argv, manifest.cwd))
}
