use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wallflip_core::harness::export::{export_fields, export_fourier, export_marginals, export_pmf};
use wallflip_core::harness::simulate::run_simulation;
use wallflip_core::harness::{run_plan, ExperimentPlan, HarnessError, Suite};

#[derive(Parser)]
#[command(name = "wallflip", version, about = "Corner-flip interface above a hard wall: simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment plan; omitted keys take their defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, env = "WALLFLIP_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "WALLFLIP_PARALLELISM")]
    parallelism: Option<usize>,
    /// Override every replica count in the plan.
    #[arg(long)]
    replicas: Option<u64>,
    /// Output directory (default: the plan's `output`, else `./out`).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Validate and print the resolved plan without running anything.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the plan's `simulate` block and write raw logs.
    Simulate(Common),
    /// Run a verification suite and write its report.
    Verify {
        #[arg(value_parser = parse_suite)]
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
    /// Write plotting data.
    Export {
        what: ExportKind,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportKind {
    Pmf,
    Fourier,
    Marginals,
    Fields,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: HarnessError| e.to_string())
}

fn load_plan(c: &Common) -> Result<ExperimentPlan, HarnessError> {
    let mut plan = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| HarnessError::Plan(format!("cannot read {}: {e}", path.display())))?;
            ExperimentPlan::from_json(&text)?
        }
        None => ExperimentPlan::default(),
    };
    if let Some(seed) = c.seed {
        plan.seed = seed;
    }
    if c.parallelism.is_some() {
        plan.parallelism = c.parallelism;
    }
    if c.replicas.is_some() {
        plan.replicas = c.replicas;
    }
    Ok(plan)
}

fn out_dir(c: &Common, plan: &ExperimentPlan) -> PathBuf {
    c.out.clone().or_else(|| plan.output.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn print_plan(plan: &ExperimentPlan) {
    println!("{}", serde_json::to_string_pretty(plan).expect("plan serializes"));
    eprintln!("plan hash {}", plan.hash());
}

fn verify(suite: Suite, c: &Common) -> Result<bool, HarnessError> {
    let plan = load_plan(c)?;
    if c.dry_run {
        plan.validate(suite)?;
        print_plan(&plan);
        eprintln!("would run criteria {:?}", plan.enabled_criteria(suite));
        return Ok(true);
    }
    let report = run_plan(&plan, suite)?;
    let dir = out_dir(c, &plan);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(format!("report_{suite}.json")), report.to_json())?;
    report.write_checks_csv(fs::File::create(dir.join(format!("checks_{suite}.csv")))?)?;
    if report.bracket_table.is_some() {
        report.write_bracket_csv(fs::File::create(dir.join(format!("bracket_{suite}.csv")))?)?;
    }
    for criterion in &report.criteria {
        println!("{}", criterion.summary_line());
        for w in &criterion.warnings {
            println!("  warning: {w}");
        }
    }
    println!("suite {suite}: {}", if report.passed { "PASS" } else { "FAIL" });
    Ok(report.passed)
}

fn simulate(c: &Common) -> Result<bool, HarnessError> {
    let plan = load_plan(c)?;
    plan.validate_simulate()?;
    if c.dry_run {
        print_plan(&plan);
        return Ok(true);
    }
    let summary = run_simulation(&plan, &out_dir(c, &plan))?;
    for (r, (f, b)) in summary.flips.iter().zip(&summary.blocked).enumerate() {
        println!("replica {r}: {f} flips, {b} blocked rings");
    }
    println!("{} files written", summary.files.len());
    Ok(true)
}

fn export(what: ExportKind, c: &Common) -> Result<bool, HarnessError> {
    let plan = load_plan(c)?;
    if c.dry_run {
        print_plan(&plan);
        return Ok(true);
    }
    let dir = out_dir(c, &plan);
    let run: fn(&ExperimentPlan, &Path) -> Result<Vec<PathBuf>, HarnessError> = match what {
        ExportKind::Pmf => export_pmf,
        ExportKind::Fourier => export_fourier,
        ExportKind::Marginals => export_marginals,
        ExportKind::Fields => export_fields,
    };
    for f in run(&plan, &dir)? {
        println!("{}", f.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Verify { suite, common } => verify(*suite, common),
        Command::Export { what, common } => export(*what, common),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
