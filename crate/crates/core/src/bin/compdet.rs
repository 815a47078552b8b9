//! `compdet` command-line runner.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 for
//! numerical failures such as a background beyond the sensing tolerance.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use compdet::config::ExperimentConfig;
use compdet::experiment::{build_background, build_dictionary, draw_designed_plan, run_experiment};
use compdet::numerics::max_abs_diff;
use compdet::report::emit_plot_data;
use compdet::sensing::{check_background_tolerance, verify_distance_preservation};
use compdet::{Error, Matrix, RngStream};

#[derive(Parser)]
#[command(name = "compdet", version, about = "Compressive target and anomaly detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Config override `key.path=value`; may be repeated.
    #[arg(long = "set", value_name = "K=V")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured dictionary to `<out>/dictionary.json`.
    GenDict(Common),
    /// Run the configured experiment and write its reports.
    Run(Common),
    /// Turn the reports in a directory into plot-ready series.
    EmitPlots {
        /// Directory holding reports; defaults to `--out`.
        #[arg(long)]
        reports: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check dictionary, background and sensing-plan invariants, exporting
    /// one designed plan per K.
    Verify(Common),
}

fn load_config(c: &Common) -> compdet::Result<ExperimentConfig> {
    let mut overrides = c.set.clone();
    if let Some(seed) = c.seed {
        overrides.push(format!("seed={seed}"));
    }
    ExperimentConfig::load(c.config.as_deref(), &overrides)
}

fn write_meta(out: &Path, cfg: &ExperimentConfig, command: &str, files: &[String]) -> compdet::Result<()> {
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "unix_time": ts,
        "seed": cfg.seed,
        "files": files,
        "config": cfg,
    });
    std::fs::write(out.join("run_meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn gen_dict(c: &Common) -> compdet::Result<()> {
    let cfg = load_config(c)?;
    let dict = build_dictionary(&cfg.dictionary, cfg.n)?;
    std::fs::create_dir_all(&c.out)?;
    dict.save(&c.out.join("dictionary.json"))?;
    let s = dict.stats()?;
    println!(
        "dictionary: m={} n={} d_min={:.6} p_min={} p_max={}",
        dict.len(),
        dict.dim(),
        s.d_min,
        s.p_min,
        s.p_max
    );
    Ok(())
}

fn run(c: &Common) -> compdet::Result<()> {
    let cfg = load_config(c)?;
    let files = run_experiment(&cfg, &c.out)?;
    write_meta(&c.out, &cfg, "run", &files)?;
    for f in &files {
        println!("{}", c.out.join(f).display());
    }
    Ok(())
}

fn verify(c: &Common) -> compdet::Result<bool> {
    let cfg = load_config(c)?;
    let dict = build_dictionary(&cfg.dictionary, cfg.n)?;
    let stats = dict.stats()?;
    println!("dictionary ok: m={} d_min={:.6}", dict.len(), stats.d_min);
    let bg = build_background(&cfg)?;
    std::fs::create_dir_all(&c.out)?;

    let mut all_ok = true;
    let root = RngStream::new(cfg.seed);
    for (k_idx, &k) in cfg.k_values.iter().enumerate() {
        let plan = draw_designed_plan(k, &bg, &root.substream_path(&[1, k_idx as u64, 0, 0]))?;
        let check = check_background_tolerance(plan.a(), &bg)?;
        let phi = plan.phi();
        let w = plan.whitener().as_matrix();
        let cov = phi * bg.covariance().as_matrix() * phi.transpose()
            + Matrix::identity(k, k) * bg.sensor_variance();
        let r_a = max_abs_diff(&(w * phi), plan.a());
        let r_i = max_abs_diff(&(w * cov * w.transpose()), &Matrix::identity(k, k));

        let diffs: Vec<_> = (0..dict.len())
            .flat_map(|i| (i + 1..dict.len()).map(move |j| (i, j)))
            .map(|(i, j)| dict.target(i) - dict.target(j))
            .collect();
        let dp = verify_distance_preservation(plan.a(), &diffs, cfg.detector.bound_epsilon)?;
        let ok = r_a <= 1e-8 && r_i <= 1e-8;
        all_ok &= ok;
        println!(
            "K={k}: tolerance lambda_max={:.6e} < {:.6e}; |C*Phi - A|={r_a:.2e}; |C*G*C' - I|={r_i:.2e}; \
             distances eps={} {} [{:.4}, {:.4}] -> {}",
            check.lambda_max,
            check.threshold,
            cfg.detector.bound_epsilon,
            if dp.ok { "preserved" } else { "not preserved" },
            dp.worst_ratio_low,
            dp.worst_ratio_high,
            if ok { "ok" } else { "FAILED" }
        );
        std::fs::write(c.out.join(format!("plan_K{k}.json")), plan.to_json_string()?)?;
    }
    Ok(all_ok)
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_numerical() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenDict(c) => gen_dict(c).map(|_| true),
        Command::Run(c) => run(c).map(|_| true),
        Command::EmitPlots { reports, out } => {
            emit_plot_data(reports.as_deref().unwrap_or(out), out).map(|files| {
                for f in files {
                    println!("{}", out.join(f).display());
                }
                true
            })
        }
        Command::Verify(c) => verify(c),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => exit_for(&e),
    }
}
