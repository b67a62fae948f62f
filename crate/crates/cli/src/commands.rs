//! The four subcommands.

use std::path::{Path, PathBuf};

use filterlab_core::filter::run_filter;
use filterlab_core::rng::Stream;
use filterlab_core::simulate::{
    fmt_real, simulate_many, simulate_model, CounterexamplePaths, HittingExit, TimeGrid,
};
use filterlab_core::stats::Estimate;
use filterlab_core::verify::{run_check, Verdict};

use crate::config::ScenarioConfig;
use crate::exit::CliError;
use crate::output::{sha256_hex, GridEntry, Manifest, OutputDir, MANIFEST_FORMAT};

/// A parsed config plus the command-line overrides.
pub struct Invocation {
    pub config: ScenarioConfig,
    pub config_sha256: String,
    pub seed: u64,
    pub seed_from_flag: bool,
    pub out: PathBuf,
}

impl Invocation {
    pub fn new(text: &str, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, CliError> {
        let config = ScenarioConfig::parse(text)?;
        let out = out
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(&config.name));
        Ok(Invocation {
            config_sha256: sha256_hex(text.as_bytes()),
            seed: seed.unwrap_or(config.seed),
            seed_from_flag: seed.is_some(),
            out,
            config,
        })
    }

    fn output(
        &self,
        command: &'static str,
        model: Option<&str>,
        grid: Option<&TimeGrid>,
    ) -> Result<OutputDir, CliError> {
        OutputDir::create(
            &self.out,
            Manifest {
                format: MANIFEST_FORMAT,
                version: env!("CARGO_PKG_VERSION"),
                command,
                scenario: self.config.name.clone(),
                config_sha256: self.config_sha256.clone(),
                seed: self.seed,
                seed_from_flag: self.seed_from_flag,
                model: model.map(str::to_string),
                grid: grid.map(|g| GridEntry {
                    horizon: g.horizon,
                    dt: g.dt,
                    n_steps: g.n_steps,
                }),
                files: Vec::new(),
            },
        )
    }

    /// Observation paths for `simulate` and `filter` come from the same
    /// substreams, so `filter` runs on `path_0000`.
    fn path_stream(&self) -> Stream {
        Stream::new(self.seed).tagged("simulate")
    }
}

fn csv_bytes(
    write: impl FnOnce(&mut Vec<u8>) -> filterlab_core::Result<()>,
) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

pub fn simulate(inv: &Invocation) -> Result<PathBuf, CliError> {
    let model = inv.config.model()?;
    let grid = inv.config.grid()?;
    let paths = simulate_many(&model, &grid, inv.config.n_paths, inv.path_stream())?;
    let mut out = inv.output("simulate", Some(model.name()), Some(&grid))?;
    for (i, p) in paths.iter().enumerate() {
        out.write(&format!("path_{i:04}.csv"), &csv_bytes(|b| p.write_csv(b))?)?;
        if p.r > 0 {
            out.write(
                &format!("jump_log_{i:04}.csv"),
                &csv_bytes(|b| p.write_jump_log_csv(b))?,
            )?;
        }
    }
    println!(
        "simulated {} path(s) of `{}` on {} steps",
        paths.len(),
        model.name(),
        grid.n_steps
    );
    out.finish()
}

pub fn filter(inv: &Invocation) -> Result<PathBuf, CliError> {
    let model = inv.config.model()?;
    let grid = inv.config.grid()?;
    let config = inv
        .config
        .filter(Stream::new(inv.seed).tagged("filter").key())?;
    let path = simulate_model(&model, &grid, inv.path_stream().child(0))?;
    let run = run_filter(
        &model,
        &path.observation(),
        &config,
        &model.default_battery(),
    )?;
    let mut out = inv.output("filter", Some(model.name()), Some(&grid))?;
    out.write("path.csv", &csv_bytes(|b| path.write_csv(b))?)?;
    out.write("filter.csv", run.to_csv().as_bytes())?;
    let resamples = run.rows.iter().filter(|r| r.resampled).count();
    println!(
        "filtered `{}` with {} particles: {} steps, {} resampling(s)",
        model.name(),
        config.n_particles,
        grid.n_steps,
        resamples
    );
    out.finish()
}

fn verdicts_csv(verdicts: &[Verdict]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record([
        "check",
        "scenario",
        "estimate",
        "se",
        "reference",
        "tolerance",
        "status",
        "detail",
    ])
    .map_err(io)?;
    for v in verdicts {
        w.write_record([
            v.check.clone(),
            v.scenario.clone(),
            fmt_real(v.estimate),
            fmt_real(v.se),
            fmt_real(v.reference),
            fmt_real(v.tolerance),
            v.status().to_string(),
            v.detail.clone(),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn verify(inv: &Invocation) -> Result<PathBuf, CliError> {
    let (checks, params) = inv.config.checks()?;
    let mut verdicts = Vec::new();
    let mut passed = 0;
    for name in &checks {
        let rows = run_check(name, &params, inv.seed)?;
        let ok = rows.iter().all(|v| v.pass);
        passed += usize::from(ok);
        for v in &rows {
            println!(
                "{:<16} {:<22} {:<44} estimate={:.6} reference={:.6} tolerance={:.3e}",
                v.status(),
                v.check,
                v.scenario,
                v.estimate,
                v.reference,
                v.tolerance
            );
        }
        verdicts.extend(rows);
    }
    let mut out = inv.output("verify", None, None)?;
    out.write("verdicts.csv", &verdicts_csv(&verdicts)?)?;
    let mut json =
        serde_json::to_string_pretty(&verdicts).map_err(|e| CliError::Io(e.to_string()))?;
    json.push('\n');
    out.write("verdicts.json", json.as_bytes())?;
    let dir = out.finish()?;
    println!("passed {passed}/{}", checks.len());
    if passed < checks.len() {
        let mut failed: Vec<&str> = verdicts
            .iter()
            .filter(|v| !v.pass)
            .map(|v| v.check.as_str())
            .collect();
        failed.dedup();
        return Err(CliError::CheckFailure(format!(
            "{} (results in {})",
            failed.join(", "),
            dir.display()
        )));
    }
    Ok(dir)
}

fn exit_name(e: HittingExit) -> &'static str {
    match e {
        HittingExit::Lower => "lower",
        HittingExit::Upper => "upper",
        HittingExit::Unresolved => "unresolved",
    }
}

pub fn counterexample(inv: &Invocation) -> Result<PathBuf, CliError> {
    let spec = inv.config.counterexample()?;
    let grid = inv.config.grid()?;
    let paths = spec.simulate(
        &grid,
        inv.config.n_paths,
        Stream::new(inv.seed).tagged("counterexample"),
    )?;
    let mut out = inv.output("counterexample", Some(spec.name()), Some(&grid))?;
    let mut csv = String::new();
    let summary = match &paths {
        CounterexamplePaths::RevuzYor(ps) => {
            csv.push_str("path,w_t,log_z_t,energy_t\n");
            let n = grid.n_steps;
            for (i, p) in ps.iter().enumerate() {
                csv.push_str(&format!(
                    "{i},{},{},{}\n",
                    fmt_real(p.w[n]),
                    fmt_real(p.log_z[n]),
                    fmt_real(p.energy[n])
                ));
            }
            let z: Vec<f64> = ps.iter().map(|p| p.log_z[n].exp()).collect();
            fmt_estimate("E[Z_t]", &z)
        }
        CounterexamplePaths::Dufresne(xs) => {
            csv.push_str("path,integral\n");
            for (i, x) in xs.iter().enumerate() {
                csv.push_str(&format!("{i},{}\n", fmt_real(*x)));
            }
            let below: Vec<f64> = xs.iter().map(|&x| f64::from(u8::from(x < 1.0))).collect();
            fmt_estimate("P(integral < 1)", &below)
        }
        CounterexamplePaths::Hitting(exits) => {
            csv.push_str("path,exit\n");
            for (i, e) in exits.iter().enumerate() {
                csv.push_str(&format!("{i},{}\n", exit_name(*e)));
            }
            let lower: Vec<f64> = exits
                .iter()
                .map(|&e| f64::from(u8::from(e == HittingExit::Lower)))
                .collect();
            fmt_estimate("P(exit at -1)", &lower)
        }
    };
    out.write("counterexample.csv", csv.as_bytes())?;
    println!(
        "{} with {} path(s): {summary}",
        spec.name(),
        inv.config.n_paths
    );
    out.finish()
}

fn fmt_estimate(label: &str, samples: &[f64]) -> String {
    if samples.len() < 2 {
        return format!(
            "{label} = {:.6}",
            samples.first().copied().unwrap_or(f64::NAN)
        );
    }
    let e = Estimate::from_samples(samples);
    format!("{label} = {:.6} ± {:.6}", e.value, e.se)
}

pub fn read_config(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("--config {}: {e}", path.display())))
}
