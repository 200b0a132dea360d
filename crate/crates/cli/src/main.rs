use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use voss_cli::{run_pipeline, CliError, CliResult, Command, Settings};

/// Voss nets on pseudospherical surfaces.
#[derive(Parser, Debug)]
#[command(name = "voss", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Bundled example: pseudosphere-helicoid, right-helicoid, dini-helicoid,
    /// koru, eared-screw, arch.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Grid as `x0,y0,dx,dy,nx,ny`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    grid: Option<String>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Tolerance override `name=value`; repeatable.
    #[arg(long, global = true)]
    tol: Vec<String>,

    /// Integration constants `c0,c1,...`.
    #[arg(long = "const", global = true, allow_hyphen_values = true)]
    constants: Option<String>,

    /// Any configuration key as `key=value`; repeatable.
    #[arg(long, global = true, allow_hyphen_values = true)]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Sample the surface and check its structure equations.
    Surface,
    /// Evaluate the configured symmetry and check the Moutard equation.
    Symmetry,
    /// Build the Voss net, its singular curves and the preset checks.
    Voss,
    /// Apply the inverse of R + Id and check the round trip.
    Inverse,
    /// Generate a Guichard sequence.
    Sequence,
    /// Dimension of the space of nets spanned by `members`.
    Dimension,
    /// Every stage that applies to the configuration.
    Verify,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Command {
        match s {
            Sub::Surface => Command::Surface,
            Sub::Symmetry => Command::Symmetry,
            Sub::Voss => Command::Voss,
            Sub::Inverse => Command::Inverse,
            Sub::Sequence => Command::Sequence,
            Sub::Dimension => Command::Dimension,
            Sub::Verify => Command::Verify,
        }
    }
}

fn settings(cli: &Cli) -> CliResult<Settings> {
    let mut s = Settings::new();
    if let Some(p) = &cli.config {
        s.load_file(p)?;
    }
    for a in &cli.set {
        s.set_assignment(a)?;
    }
    if let Some(p) = &cli.preset {
        s.set("preset", p);
    }
    if let Some(g) = &cli.grid {
        s.set("grid", g);
    }
    if let Some(o) = &cli.out {
        s.set("out", &o.display().to_string());
    }
    if let Some(c) = &cli.constants {
        s.set("const", c);
    }
    for t in &cli.tol {
        let (k, v) = t.split_once('=').ok_or_else(|| CliError::Config(format!("--tol expects name=value, got '{t}'")))?;
        s.set(&format!("tol.{}", k.trim()), v);
    }
    Ok(s)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let run = settings(&cli).and_then(|s| s.resolve()).and_then(|cfg| {
        let report = run_pipeline(&cfg, cli.command.into())?;
        Ok((cfg, report))
    });
    match run {
        Ok((cfg, report)) => {
            for c in &report.checks {
                println!("{:<4} {:<28} {:>12.3e}  (tol {:.1e})", if c.pass { "ok" } else { "FAIL" }, c.name, c.value, c.tolerance);
            }
            println!("report: {}", cfg.out.join("report.json").display());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("voss: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
