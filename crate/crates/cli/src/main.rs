//! `bouncer`: command-line front end.
//!
//! Every command reads an optional configuration file, writes CSV tables and
//! a `manifest.json` into the output directory, and prints a short summary.
//! Exit codes: 0 success, 1 solver or configuration error, 2 validation
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use bouncer_core::acceleration::accelerate_search;
use bouncer_core::coexistence::coexistence_report;
use bouncer_core::config::RunConfig;
use bouncer_core::dynamics::{
    globally_monotone, map_forward_with_tolerance, simulate_continuous, velocity_threshold, ImpactState,
};
use bouncer_core::extension::GridSpec;
use bouncer_core::mather::{
    alpha_star, anchor_pair, cantor_probe, heteroclinic, heteroclinic_sanity, minimize_periodic, reconstruct_orbit,
    ConnectionDirection,
};
use bouncer_core::output::{emit_outputs, Cell, RunOutput, Table};
use bouncer_core::validation::validate_all;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "BOUNCER_OUT";

#[derive(Parser)]
#[command(name = "bouncer", version, about = "Ball bouncing on a periodically moving racket")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (flat TOML); defaults are used for missing keys.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $BOUNCER_OUT or ./out/<command>].
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Override the seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the rotation number, as p/q.
    #[arg(long, global = true)]
    ratio: Option<String>,
    /// Override the multistart count.
    #[arg(long, global = true)]
    multistarts: Option<usize>,
    /// Override the number of impacts.
    #[arg(long, global = true)]
    bounces: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Event-driven orbit from (t0, w0), each impact re-checked by the map.
    #[command(after_help = "CSV orbit.csv: n,t,w,energy,map_step_defect\n\
        map_step_defect is empty where the map is not defined.")]
    Orbit,
    /// Generating function, its derivatives and the twist certificate on a grid.
    #[command(after_help = "CSV genfun.csv: t0,t1,h,d1h,d2h,d,d0,d1")]
    Genfun,
    /// Build the twisted extension and run its verification grid.
    #[command(after_help = "CSV extension.csv: check,max_defect,threshold,pass")]
    Extend {
        /// Use the doubled grid.
        #[arg(long)]
        refined: bool,
    },
    /// Minimal periodic configuration of the configured rotation number.
    #[command(after_help = "CSV mather.csv: i,t,gap,energy")]
    Mather,
    /// Connecting orbits between two neighbouring minimal configurations.
    #[command(after_help = "CSV hetero.csv: direction,n,index,t,lower,upper\n\
        Uses ratio (default 5/1) and window N from the configuration.")]
    Hetero,
    /// Maximal projected gaps of minimisers at continued-fraction convergents.
    #[command(after_help = "CSV cantor.csv: p,q,max_gap,action,note")]
    Cantor,
    /// Search for an accelerating orbit by phase locking.
    #[command(after_help = "CSV acceleration.csv: n,t,w\n\
        CSV candidates.csv: order,phase,resonance,w0,bounces,monotone_run,growth,failure")]
    Accelerate,
    /// Bounded periodic orbit and accelerating orbit for one forcing.
    #[command(after_help = "CSV bounded.csv: n,t,energy\nCSV accelerating.csv: n,t,w")]
    Coexist,
    /// Run the acceptance suite.
    #[command(after_help = "CSV validation.csv: criterion,name,check,measured,threshold,pass")]
    Validate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Orbit => "orbit",
            Command::Genfun => "genfun",
            Command::Extend { .. } => "extend",
            Command::Mather => "mather",
            Command::Hetero => "hetero",
            Command::Cantor => "cantor",
            Command::Accelerate => "accelerate",
            Command::Coexist => "coexist",
            Command::Validate => "validate",
        }
    }
}

/// A finished command: what to write and whether it counts as a failure.
struct Outcome {
    output: RunOutput,
    summary: Vec<String>,
    validation_failed: bool,
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(r) = &c.ratio {
        cfg.ratio = Some(r.clone());
    }
    if let Some(m) = c.multistarts {
        cfg.multistarts = m;
    }
    if let Some(b) = c.bounces {
        cfg.bounces = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output(command: &str, cfg: &RunConfig, tables: Vec<Table>, results: serde_json::Value) -> RunOutput {
    RunOutput {
        command: command.into(),
        config: cfg.clone(),
        tables,
        results,
        defects: json!({}),
    }
}

fn orbit(cfg: &RunConfig) -> Result<Outcome> {
    let f = cfg.forcing()?;
    let g = cfg.g;
    let s0 = ImpactState::new(cfg.t0, cfg.w0)?;
    let window = simulate_continuous(g, &f, s0, cfg.bounces)?;
    let states = window.states();
    let checkable = |s: &ImpactState| globally_monotone(g, &f) || s.w() > velocity_threshold(g, &f);
    let mut table = Table::new("orbit", &["n", "t", "w", "energy", "map_step_defect"]);
    let mut worst: f64 = 0.0;
    for (n, s) in states.iter().enumerate() {
        let defect = match n.checked_sub(1).map(|m| states[m]) {
            Some(prev) if checkable(&prev) => {
                let next = map_forward_with_tolerance(g, &f, &prev, cfg.root_tolerance)?;
                let d = (next.t() - s.t()).abs();
                worst = worst.max(d);
                Cell::Real(d)
            }
            _ => Cell::Text(String::new()),
        };
        table.push(vec![n.into(), s.t().into(), s.w().into(), s.energy().into(), defect]);
    }
    let mut out = output("orbit", cfg, vec![table], json!({ "impacts": states.len() }));
    out.defects = json!({ "max_map_step_defect": worst });
    Ok(Outcome {
        output: out,
        summary: vec![
            format!("{} impacts from t = {}, w = {}", cfg.bounces, cfg.t0, cfg.w0),
            format!("largest one-step discrepancy with the map: {worst:.3e}"),
        ],
        validation_failed: false,
    })
}

fn genfun(cfg: &RunConfig) -> Result<Outcome> {
    let ctx = cfg.generating_context()?;
    let k = ctx.cert().k;
    let mut table = Table::new("genfun", &["t0", "t1", "h", "d1h", "d2h", "d", "d0", "d1"]);
    let mut twist_max = f64::NEG_INFINITY;
    for i in 0..20 {
        let t0 = i as f64 / 20.0;
        for j in 0..=40 {
            let t1 = t0 + k + 20.0 * j as f64 / 40.0;
            let (p0, p1) = ctx.h_partials(t0, t1);
            let d = ctx.cross_derivative(t0, t1);
            let (d0, d1) = ctx.cross_partials(t0, t1);
            twist_max = twist_max.max(d);
            table.push(vec![
                t0.into(),
                t1.into(),
                ctx.h_value(t0, t1).into(),
                p0.into(),
                p1.into(),
                d.into(),
                d0.into(),
                d1.into(),
            ]);
        }
    }
    let cert = *ctx.cert();
    let results = json!({ "certificate": cert, "max_cross_derivative": twist_max });
    Ok(Outcome {
        output: output("genfun", cfg, vec![table], results),
        summary: vec![format!(
            "twist certificate k = {:.6}, eps = {:.6}; largest d on the grid {twist_max:.6}",
            cert.k, cert.epsilon
        )],
        validation_failed: false,
    })
}

fn extend(cfg: &RunConfig, refined: bool) -> Result<Outcome> {
    let ctx = cfg.extension_context()?;
    let grid = if refined { GridSpec::default().refined() } else { GridSpec::default() };
    let report = ctx.verify_extension(&grid)?;
    let mut table = Table::new("extension", &["check", "max_defect", "threshold", "pass"]);
    let mut summary = Vec::new();
    for row in &report.rows {
        table.push(vec![
            row.check.as_str().into(),
            row.max_defect.into(),
            row.threshold.into(),
            row.pass.into(),
        ]);
        summary.push(format!(
            "{:<24} {:.3e} (threshold {:.1e}) {}",
            row.check,
            row.max_defect,
            row.threshold,
            if row.pass { "ok" } else { "FAILED" }
        ));
    }
    let results = json!({ "constants": report.constants, "passed": report.passed() });
    Ok(Outcome {
        output: output("extend", cfg, vec![table], results),
        summary,
        validation_failed: !report.passed(),
    })
}

fn mather(cfg: &RunConfig) -> Result<Outcome> {
    let (p, q) = cfg.rotation()?.ok_or_else(|| anyhow!("mather needs a rotation number (ratio = \"p/q\")"))?;
    let ctx = cfg.extension_context()?;
    let c = minimize_periodic(&ctx, p, q, cfg.multistarts, cfg.seed)?;
    if c.el_residual >= cfg.el_tolerance {
        bail!("residual {:e} does not meet el_tolerance {:e}", c.el_residual, cfg.el_tolerance);
    }
    let orbit = reconstruct_orbit(&ctx, &c);
    let energies: Vec<Option<f64>> = match &orbit {
        Ok(o) => o.window.states().iter().map(|s| Some(s.energy())).collect(),
        Err(_) => vec![None; c.q as usize + 1],
    };
    let times = c.extended(0, c.q as i64 + 1);
    let mut table = Table::new("mather", &["i", "t", "gap", "energy"]);
    for i in 0..c.q as usize {
        table.push(vec![
            i.into(),
            times[i].into(),
            (times[i + 1] - times[i]).into(),
            energies[i].map(Cell::Real).unwrap_or(Cell::Text(String::new())),
        ]);
    }
    let mut summary = vec![format!(
        "{p}/{q}: action {:.12}, residual {:.2e}, alpha_* = {:.6}",
        c.action,
        c.el_residual,
        alpha_star(&ctx)
    )];
    let orbit_json = match &orbit {
        Ok(o) => {
            summary.push(format!(
                "graph bound {}, gap window {}, gaps > k {}, map reproduces orbit {} ({:.2e})",
                o.bounds.graph_bound, o.bounds.gap_window, o.bounds.gaps_exceed_k, o.map_reproduces, o.map_defect
            ));
            serde_json::to_value(o)?
        }
        Err(e) => {
            summary.push(format!("orbit not reconstructed: {e}"));
            json!({ "error": e.to_string() })
        }
    };
    let mut out = output("mather", cfg, vec![table], json!({ "configuration": c, "orbit": orbit_json }));
    out.defects = json!({ "el_residual": c.el_residual });
    Ok(Outcome {
        output: out,
        summary,
        validation_failed: false,
    })
}

fn hetero(cfg: &RunConfig) -> Result<Outcome> {
    let (p, q) = cfg.rotation()?.unwrap_or((5, 1));
    let ctx = cfg.extension_context()?;
    let mut table = Table::new("hetero", &["direction", "n", "index", "t", "lower", "upper"]);
    let mut summary = Vec::new();
    let mut windows = Vec::new();
    match anchor_pair(&ctx, p, q, cfg.multistarts, cfg.seed)? {
        Some((low, high)) => {
            summary.push(format!(
                "anchors at t0 = {:.9} and {:.9}, action {:.12}",
                low.times[0], high.times[0], low.action
            ));
            for direction in [ConnectionDirection::LowToHigh, ConnectionDirection::HighToLow] {
                for n in [cfg.window, 2 * cfg.window] {
                    let w = heteroclinic(&ctx, &low, &high, n, direction)?;
                    summary.push(format!(
                        "{direction:?} N = {n}: residual {:.2e}, tails {:.2e}/{:.2e}, transition at {:?}",
                        w.el_residual,
                        w.tail_defects.0,
                        w.tail_defects.1,
                        w.transition_index()
                    ));
                    for i in 0..w.times.len() {
                        table.push(vec![
                            format!("{direction:?}").into(),
                            n.into(),
                            w.indices[i].into(),
                            w.times[i].into(),
                            w.lower[i].into(),
                            w.upper[i].into(),
                        ]);
                    }
                    windows.push(w);
                }
            }
        }
        None => {
            summary.push("anchors not found; running the degenerate sanity mode".into());
            let best = minimize_periodic(&ctx, p, q, cfg.multistarts, cfg.seed)?;
            let w = heteroclinic_sanity(&ctx, &best, cfg.window)?;
            summary.push(format!("sanity residual {:.2e}", w.el_residual));
            for i in 0..w.times.len() {
                table.push(vec![
                    "Sanity".into(),
                    cfg.window.into(),
                    w.indices[i].into(),
                    w.times[i].into(),
                    w.lower[i].into(),
                    w.upper[i].into(),
                ]);
            }
            windows.push(w);
        }
    }
    let results = json!({ "anchors_found": windows.len() > 1, "windows": windows });
    Ok(Outcome {
        output: output("hetero", cfg, vec![table], results),
        summary,
        validation_failed: false,
    })
}

fn cantor(cfg: &RunConfig) -> Result<Outcome> {
    let ctx = cfg.extension_context()?;
    let report = cantor_probe(&ctx, cfg.alpha, cfg.depth, cfg.multistarts, cfg.seed)?;
    let mut table = Table::new("cantor", &["p", "q", "max_gap", "action", "note"]);
    for r in &report.records {
        let opt = |x: Option<f64>| x.map(Cell::Real).unwrap_or(Cell::Text(String::new()));
        table.push(vec![r.p.into(), r.q.into(), opt(r.max_gap), opt(r.action), r.note.as_str().into()]);
    }
    let summary = vec![format!(
        "alpha = {}: log-log slope {:?}, {}",
        report.alpha, report.log_slope, report.trend
    )];
    Ok(Outcome {
        output: output("cantor", cfg, vec![table], serde_json::to_value(&report)?),
        summary,
        validation_failed: false,
    })
}

fn velocity_table(name: &str, orbit: &[ImpactState]) -> Table {
    let mut t = Table::new(name, &["n", "t", "w"]);
    for (n, s) in orbit.iter().enumerate() {
        t.push(vec![n.into(), s.t().into(), s.w().into()]);
    }
    t
}

fn accelerate(cfg: &RunConfig) -> Result<Outcome> {
    let report = accelerate_search(cfg, cfg.candidates, cfg.bounces)?;
    let mut cands = Table::new(
        "candidates",
        &["order", "phase", "resonance", "w0", "bounces", "monotone_run", "growth", "failure"],
    );
    for c in &report.candidates {
        cands.push(vec![
            c.order.into(),
            c.phase.into(),
            c.resonance.into(),
            c.initial.w().into(),
            c.bounces.into(),
            c.monotone_run.into(),
            c.growth.into(),
            c.failure.clone().unwrap_or_default().into(),
        ]);
    }
    let summary = vec![format!("accelerating orbit {}: {}", report.label, report.note)];
    let mut results = serde_json::to_value(&report)?;
    if let Some(obj) = results.as_object_mut() {
        // the orbit and candidates live in the CSV files
        obj.remove("orbit");
        obj.remove("candidates");
    }
    let tables = vec![velocity_table("acceleration", &report.orbit), cands];
    let mut out = output("accelerate", cfg, tables, results);
    out.defects = json!({ "map_defect": report.map_defect });
    Ok(Outcome {
        output: out,
        summary,
        validation_failed: false,
    })
}

fn coexist(cfg: &RunConfig) -> Result<Outcome> {
    let report = coexistence_report(cfg)?;
    let mut bounded = Table::new("bounded", &["n", "t", "energy"]);
    if let Some(o) = &report.bounded.orbit {
        for (n, s) in o.window.states().iter().enumerate() {
            bounded.push(vec![n.into(), s.t().into(), s.energy().into()]);
        }
    }
    let acc_orbit = report.accelerating.as_ref().map(|a| a.orbit.clone()).unwrap_or_default();
    let b = &report.bounded;
    let mut summary = vec![format!(
        "bounded {}/{} orbit certified: {}{}",
        b.p,
        b.q,
        b.certified,
        b.error.as_ref().map(|e| format!(" ({e})")).unwrap_or_default()
    )];
    match &report.accelerating {
        Some(a) => summary.push(format!("accelerating orbit {}: {}", a.label, a.note)),
        None => summary.push(format!(
            "acceleration search failed: {}",
            report.acceleration_error.clone().unwrap_or_default()
        )),
    }
    summary.push(format!("both regimes shown: {}", report.coexist));
    let mut results = serde_json::to_value(&report)?;
    if let Some(acc) = results.get_mut("accelerating").and_then(|a| a.as_object_mut()) {
        acc.remove("orbit");
        acc.remove("candidates");
    }
    Ok(Outcome {
        output: output("coexist", cfg, vec![bounded, velocity_table("accelerating", &acc_orbit)], results),
        summary,
        validation_failed: false,
    })
}

fn validate(cfg: &RunConfig) -> Result<Outcome> {
    let suite = validate_all(cfg);
    let summary: Vec<String> = suite.criteria.iter().map(|c| c.summary_line()).collect();
    let defects = suite
        .criteria
        .iter()
        .map(|c| (format!("criterion_{}", c.id), json!(c.worst_usage())))
        .collect::<serde_json::Map<_, _>>();
    let passed = suite.passed();
    let mut results = serde_json::to_value(&suite)?;
    // wall times belong in the timing field only
    if let Some(list) = results.get_mut("criteria").and_then(|c| c.as_array_mut()) {
        for c in list {
            if let Some(obj) = c.as_object_mut() {
                obj.remove("seconds");
            }
        }
    }
    let mut out = output("validate", cfg, vec![suite.table()], json!({ "passed": passed, "suite": results }));
    out.defects = serde_json::Value::Object(defects);
    Ok(Outcome {
        output: out,
        summary,
        validation_failed: !passed,
    })
}

fn run(cli: Cli) -> Result<bool> {
    let start = Instant::now();
    let cfg = load_config(&cli.common)?;
    let name = cli.command.name();
    let outcome = match cli.command {
        Command::Orbit => orbit(&cfg),
        Command::Genfun => genfun(&cfg),
        Command::Extend { refined } => extend(&cfg, refined),
        Command::Mather => mather(&cfg),
        Command::Hetero => hetero(&cfg),
        Command::Cantor => cantor(&cfg),
        Command::Accelerate => accelerate(&cfg),
        Command::Coexist => coexist(&cfg),
        Command::Validate => validate(&cfg),
    }?;
    let dir = cli
        .common
        .out
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(name));
    emit_outputs(&dir, &outcome.output, start.elapsed().as_secs_f64())
        .with_context(|| format!("writing outputs for {name}"))?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("outputs written to {}", dir.display());
    Ok(!outcome.validation_failed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
