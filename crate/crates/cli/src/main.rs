use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xpsram_core::energy::REFERENCE_ROWS;
use xpsram_core::scenario::{
    preset, run_scenario, sweep_csv, write_outputs, ScenarioConfig, ScenarioOutput, SweepSection,
};
use xpsram_core::{Error, OpKind, Result};

/// Photonic SRAM bitcell and WDM array simulator.
#[derive(Parser, Debug)]
#[command(name = "xpsram", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a bitcell script and write waveform CSV and energy JSON.
    Bitcell(Common),
    /// Run array XOR ops and write per-channel Z spectra.
    Array(Common),
    /// Tabulate resonance wavelength against ring-length offset.
    #[command(name = "sweep-dl")]
    SweepDl {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        start_nm: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        stop_nm: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        step_nm: Option<f64>,
    },
    /// Print per-op energy reports as JSON.
    Energy {
        #[command(flatten)]
        common: Common,
        /// Append reference figures for other XOR/memory designs.
        #[arg(long)]
        compare: bool,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario TOML file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario (fig3, fig4, fig5, fig6, table1, identity, random).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (default: the config's output.dir, else ./xpsram-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt_ps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self, default_preset: &str) -> Result<ScenarioConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ScenarioConfig::load(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => preset(default_preset)?,
        };
        if let Some(dt) = self.dt_ps {
            cfg.set_dt_ps(dt);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ScenarioConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("xpsram-out"))
    }
}

fn run_and_write(common: &Common, cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let out = run_scenario(cfg)?;
    for path in write_outputs(cfg, &out, &common.out_dir(cfg))? {
        eprintln!("wrote {}", path.display());
    }
    Ok(out)
}

fn cmd_bitcell(common: &Common) -> Result<()> {
    let cfg = common.load("fig3")?;
    let out = run_and_write(common, &cfg)?;
    for op in &out.ops {
        println!("{}", op.line());
    }
    let compute: Vec<_> = out.ops.iter().filter(|o| matches!(o.op, OpKind::Xor | OpKind::Xnor)).collect();
    if !compute.is_empty() {
        println!("truth table (stored input -> Z):");
        for o in compute {
            println!(
                "  {} {} {} -> {}",
                o.op.as_str(),
                o.stored.as_deref().unwrap_or("?"),
                o.input.as_deref().unwrap_or("?"),
                o.output.as_deref().unwrap_or("?")
            );
        }
    }
    Ok(())
}

fn cmd_array(common: &Common) -> Result<()> {
    let cfg = common.load("fig6")?;
    let out = run_and_write(common, &cfg)?;
    for op in out.ops.iter().filter(|o| o.op == OpKind::ArrayXor) {
        println!("stored={}", op.stored.as_deref().unwrap_or(""));
        println!("input={}", op.input.as_deref().unwrap_or(""));
        println!("Z={}", op.output.as_deref().unwrap_or(""));
        if let Some(c) = op.popcount {
            println!("popcount={c}");
        }
    }
    Ok(())
}

fn cmd_sweep(common: &Common, start: Option<f64>, stop: Option<f64>, step: Option<f64>) -> Result<()> {
    let mut cfg = common.load("fig5")?;
    let base = cfg.sweep.clone().unwrap_or(SweepSection { start_nm: 0.0, stop_nm: 272.0, step_nm: 34.0 });
    cfg.sweep = Some(SweepSection {
        start_nm: start.unwrap_or(base.start_nm),
        stop_nm: stop.unwrap_or(base.stop_nm),
        step_nm: step.unwrap_or(base.step_nm),
    });
    cfg.script.clear();
    let out = run_and_write(common, &cfg)?;
    let sweep = out.sweep.expect("sweep configured");
    print!("{}", sweep_csv(&sweep.points));
    match sweep.slope_nm_per_nm {
        Some(s) => eprintln!("slope = {s:.6} nm/nm"),
        None => eprintln!("slope = n/a (fewer than two points)"),
    }
    eprintln!("max crosstalk = {:.4}", sweep.crosstalk_max);
    Ok(())
}

fn cmd_energy(common: &Common, compare: bool) -> Result<()> {
    let cfg = common.load("table1")?;
    let out = run_and_write(common, &cfg)?;
    let reports = serde_json::to_value(&out.energy).expect("reports serialize");
    let doc = if compare {
        let rows: Vec<_> = REFERENCE_ROWS
            .iter()
            .map(|(method, latency_ns, e)| serde_json::json!({ "method": method, "latency_ns": latency_ns, "energy_fJ_per_bit": e }))
            .collect();
        serde_json::json!({ "reports": reports, "reference": rows })
    } else {
        reports
    };
    println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Diagnostic(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("XPSRAM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Bitcell(c) => cmd_bitcell(c),
        Command::Array(c) => cmd_array(c),
        Command::SweepDl { common, start_nm, stop_nm, step_nm } => cmd_sweep(common, *start_nm, *stop_nm, *step_nm),
        Command::Energy { common, compare } => cmd_energy(common, *compare),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
