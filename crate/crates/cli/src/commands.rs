//! The five verbs. Each writes its files under `output.dir` with names
//! `<prefix>.<verb>.{csv,json}` and prints a short summary to stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use qkrylov::subspace::FilterGrid;
use qkrylov::workflows::{self, Candidate, ConvergenceTrace, ErrorReference, RunConfig, SweepRow};
use qkrylov::{oracle, SpectralPropagator};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;
use crate::CliError;

/// Reproducibility header shared by every output.
fn header(cfg: &Config, command: &str) -> Value {
    json!({
        "tool": "qkrylov",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": cfg.get("shots.seed"),
        "config": cfg.entries(),
    })
}

fn csv_header(cfg: &Config, command: &str) -> String {
    let mut out = format!("# qkrylov {} {command}\n", env!("CARGO_PKG_VERSION"));
    for (k, v) in cfg.entries() {
        let _ = writeln!(out, "# {k} = {v}");
    }
    out
}

fn write(cfg: &Config, name: &str, body: &str) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{}.{name}", cfg.prefix()));
    fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// `{"header": ..., "<stem>": payload}` written to `<prefix>.<stem>.json`.
fn write_json(cfg: &Config, command: &str, stem: &str, payload: impl Serialize) -> Result<PathBuf, CliError> {
    let doc = json!({ "header": header(cfg, command), stem: payload });
    let mut text = serde_json::to_string_pretty(&doc).expect("outputs serialize");
    text.push('\n');
    write(cfg, &format!("{stem}.json"), &text)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), |v| format!("{v:e}"))
}

fn trace_for(cfg: &Config, rc: &RunConfig) -> Result<ConvergenceTrace, CliError> {
    let h = cfg.hamiltonian()?;
    let phi = cfg.reference(&h)?;
    let prop = SpectralPropagator::new(&h)?;
    let reference = if cfg.error_reference_nearest()? { ErrorReference::Nearest } else { ErrorReference::Ground };
    Ok(workflows::run_with(rc, &h, &prop, &phi, reference)?)
}

pub fn run(cfg: &Config) -> Result<(), CliError> {
    let rc = cfg.run_config()?;
    let trace = trace_for(cfg, &rc)?;
    let csv = write(cfg, "trace.csv", &(csv_header(cfg, "run") + &trace.to_csv()))?;
    let json = write_json(cfg, "run", "trace", &trace)?;
    println!("wrote {} and {}", csv.display(), json.display());
    match (trace.final_energy(), trace.final_error()) {
        (Some(e), err) => {
            println!("{}: {} steps, energy {e:.10}, error {}", trace.method, trace.rows.len(), fmt_opt(err));
            Ok(())
        }
        (None, _) => {
            let why = trace.rows.iter().rev().find_map(|r| r.error.clone()).unwrap_or_default();
            Err(CliError::Numerical(format!("no step produced an energy: {why}")))
        }
    }
}

pub fn spectrum(cfg: &Config) -> Result<(), CliError> {
    let h = cfg.hamiltonian()?;
    let phi = cfg.reference(&h)?;
    let spec = oracle::diagonalize(&h)?;
    let levels: usize = cfg.get("spectrum.levels").parse().map_err(|e| CliError::Config(format!("spectrum.levels: {e}")))?;
    let shown: Vec<f64> = spec.energies.iter().copied().take(levels).collect();
    let payload = json!({
        "n_qubits": h.n_qubits(),
        "terms": h.len(),
        "identity_coefficient": h.identity_coefficient(),
        "spectral_radius_bound": h.spectral_radius_bound(),
        "reference_energy": phi.expectation(&h),
        "ground_energy": spec.ground_energy(),
        "levels": shown,
    });
    let mut csv = csv_header(cfg, "spectrum") + "level,energy\n";
    for (k, e) in shown.iter().enumerate() {
        let _ = writeln!(csv, "{k},{e:e}");
    }
    write(cfg, "spectrum.csv", &csv)?;
    let path = write_json(cfg, "spectrum", "spectrum", payload)?;
    println!("wrote {}; ground energy {:.10}", path.display(), spec.ground_energy());
    Ok(())
}

pub fn sweep(cfg: &Config) -> Result<(), CliError> {
    let rc = cfg.run_config()?;
    let (parameter, axis) = cfg.sweep_axis()?;
    let lib_err = |e: CliError| match e {
        CliError::Library(e) => e,
        other => qkrylov::Error::InvalidArgument(other.to_string()),
    };
    let rows: Vec<SweepRow> = if parameter == "tau" {
        axis.iter()
            .map(|&tau| {
                let point = RunConfig { tau, ..rc.clone() };
                workflows::sweep(&point, &[tau], |_| {
                    let h = cfg.hamiltonian().map_err(lib_err)?;
                    let phi = cfg.reference(&h).map_err(lib_err)?;
                    Ok((h, phi))
                })
                .remove(0)
            })
            .collect()
    } else {
        workflows::sweep(&rc, &axis, |v| {
            let c = cfg.with_value(&parameter, v).map_err(lib_err)?;
            let h = c.hamiltonian().map_err(lib_err)?;
            let phi = c.reference(&h).map_err(lib_err)?;
            Ok((h, phi))
        })
    };
    let mut csv = csv_header(cfg, "sweep") + &format!("{parameter},energy,exact,delta_e,steps,calls,error\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{:e},{},{},{},{},{},{}",
            r.value,
            fmt_opt(r.energy),
            fmt_opt(r.exact),
            fmt_opt(r.delta_e),
            r.steps,
            r.calls,
            r.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    write(cfg, "sweep.csv", &csv)?;
    let path = write_json(cfg, "sweep", "sweep", json!({ "parameter": parameter, "rows": rows }))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("wrote {}; {} points, {failed} failed", path.display(), rows.len());
    Ok(())
}

pub fn hyperopt(cfg: &Config) -> Result<(), CliError> {
    let mut rc = cfg.run_config()?;
    rc.method = rc.method.filtered();
    let h = cfg.hamiltonian()?;
    let phi = cfg.reference(&h)?;
    let e_ref = phi.expectation(&h);
    let candidates = match cfg.get("hyperopt.candidates") {
        "standard" => workflows::standard_candidates(e_ref),
        "dft" => {
            let shift = rc.shift_value(&h, &phi);
            vec![Candidate { label: "dft".into(), grid: FilterGrid::dft(rc.m_max, rc.tau, shift) }]
        }
        other => return Err(CliError::Config(format!("unknown hyperopt.candidates {other:?}"))),
    };
    let result = workflows::hyperopt(&rc, &h, &phi, &candidates)?;
    let mut csv = csv_header(cfg, "hyperopt") + "label,e_min,e_max,j,variance,energy,delta_e,kappa,retained_rank\n";
    for r in &result.table {
        let _ = writeln!(
            csv,
            "{},{:e},{:e},{},{},{},{},{:e},{}",
            r.label,
            r.e_min,
            r.e_max,
            r.j,
            fmt_opt(r.variance),
            fmt_opt(r.energy),
            fmt_opt(r.delta_e),
            r.kappa,
            r.retained_rank
        );
    }
    write(cfg, "hyperopt.csv", &csv)?;
    let path = write_json(cfg, "hyperopt", "hyperopt", &result)?;
    let best = result.best_row();
    println!("wrote {}; best {} (variance {})", path.display(), best.label, fmt_opt(best.variance));
    Ok(())
}

pub fn ledger(cfg: &Config) -> Result<(), CliError> {
    let path = cfg.output_dir().join(format!("{}.trace.json", cfg.prefix()));
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("missing run artifact {} ({e}); run `qkrylov run` first", path.display())))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let trace: ConvergenceTrace = serde_json::from_value(doc["trace"].clone())
        .map_err(|e| CliError::Io(format!("{}: not a trace ({e})", path.display())))?;
    // L and the measurement path come from the config the run was made with
    let mut run_cfg = Config::defaults();
    if let Some(entries) = doc["header"]["config"].as_object() {
        for (k, v) in entries {
            run_cfg.set(k, v.as_str().unwrap_or_default())?;
        }
    }
    let rc = run_cfg.run_config()?;
    let l = run_cfg.hamiltonian()?.len();
    let summary = workflows::ledger_summary(&trace, rc.h_path, l);
    let out = write_json(cfg, "ledger", "ledger", &summary)?;
    println!(
        "{} M={} L={}: calls {} (predicted {} + monitor {}), match {}; wrote {}",
        summary.method,
        summary.m,
        summary.l,
        summary.calls,
        summary.predicted,
        summary.monitor_calls,
        summary.matches,
        out.display()
    );
    Ok(())
}
