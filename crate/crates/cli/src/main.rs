use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sheaflens::cech::FieldKind;
use sheaflens_cli::commands::{load_problem, render};
use sheaflens_cli::{cmd_filtration, cmd_interleave, cmd_pointcloud, cmd_radius, configure_threads, load_cloud, CliError, Settings};

/// Consistency of local data on finite spaces: radii, filtrations and
/// persistent Čech cohomology.
///
/// Exit codes: 0 success, 1 numerical failure, 2 unreadable input or schema
/// error, 3 partial assignment without --extend, 4 size cap exceeded,
/// 5 problems on different spaces. Errors are reported as JSON on stderr.
/// SHEAFLENS_THREADS limits the number of worker threads.
#[derive(Parser)]
#[command(name = "sheaflens", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Consistency radius, diameter and critical thresholds of an assignment.
    Radius { file: PathBuf },
    /// Consistency filtration; add --persist for barcodes.
    Filtration { file: PathBuf },
    /// Barcodes of a point cloud (CSV or JSON) via the sheaf pipeline and the Čech complex.
    Pointcloud { file: PathBuf },
    /// Interleaving bound and bottleneck distances between two problems.
    Interleave { first: PathBuf, second: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldArg {
    F2,
    Q,
}

#[derive(Args)]
struct Flags {
    /// Fill in a partial assignment by minimizing its consistency radius.
    #[arg(long, global = true)]
    extend: bool,
    /// Add persistent Čech cohomology barcodes.
    #[arg(long, global = true)]
    persist: bool,
    /// Print barcodes as CSV (degree,birth,death,multiplicity).
    #[arg(long, global = true)]
    plot_data: bool,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    /// Print numbers as exact [numerator, denominator] pairs in JSON.
    #[arg(long, global = true)]
    exact: bool,
    /// Coefficient field for cohomology.
    #[arg(long, global = true, value_enum)]
    field: Option<FieldArg>,
    /// Solver tolerance for extensions.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Size cap: opens generated from a poset, or points of a cloud.
    #[arg(long, global = true)]
    cap: Option<usize>,
}

fn run(cli: Cli) -> Result<String, CliError> {
    configure_threads()?;
    let f = cli.flags;
    let settings = Settings {
        extend: f.extend,
        persist: f.persist,
        plot_data: f.plot_data,
        json: f.json,
        exact: f.exact,
        field: f.field.map(|k| match k {
            FieldArg::F2 => FieldKind::F2,
            FieldArg::Q => FieldKind::Q,
        }),
        tol: f.tol,
        cap: f.cap,
    };
    let fmt = settings.format();
    Ok(match cli.command {
        Command::Radius { file } => {
            let r = cmd_radius(&load_problem(&file)?, &settings)?;
            render(r.to_json(&fmt), r.to_text(), None, &settings)
        }
        Command::Filtration { file } => {
            let r = cmd_filtration(&load_problem(&file)?, &settings)?;
            render(r.to_json(&fmt), r.to_text(), r.barcode.as_ref(), &settings)
        }
        Command::Pointcloud { file } => {
            let r = cmd_pointcloud(&load_cloud(&file)?, &settings)?;
            render(r.to_json(&fmt), r.to_text(), Some(&r.pipeline), &settings)
        }
        Command::Interleave { first, second } => {
            let r = cmd_interleave(&load_problem(&first)?, &load_problem(&second)?, &settings)?;
            render(r.to_json(&fmt), r.to_text(), None, &settings)
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
