use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use genscatter_cli::commands::{self, CommandResult, Format, OutputArgs};
use genscatter_cli::config::{CliError, ConfigFile, Resolver};
use genscatter_cli::output;

/// Generalized scattering functions, deviation factors, and divergence-free
/// expansion coefficients.
#[derive(Debug, Parser)]
#[command(name = "genscatter", version, max_term_width = 100)]
struct Cli {
    /// Optional `key = value` config file; flags override its entries.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads (default: GENSCATTER_THREADS, else machine
    /// parallelism). Has no effect on the output bytes.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Closed-form Coulomb scattering functions over a momentum grid.
    CoulombTable(commands::CoulombTableArgs),
    /// Extract Schrodinger scattering functions by integrating to large R.
    RadialExtract(commands::RadialExtractArgs),
    /// Extract Dirac / Dirac-type scattering functions.
    DiracExtract(commands::DiracExtractArgs),
    /// Check the stationary/dynamical deviation-factor equality on a grid.
    ErgodicCheck(commands::ErgodicCheckArgs),
    /// Check block structure against the Dirac spectral projectors.
    DiracStructure(commands::DiracStructureArgs),
    /// Raw vs regularized first-order coefficients over a window sweep.
    DivergenceDemo(commands::DivergenceDemoArgs),
    /// Second-order coefficient of the rank-one example.
    #[command(name = "example82")]
    Example82(commands::Example82Args),
    /// Fit a divergence profile to samples and regularize them.
    RenormFit(commands::RenormFitArgs),
    /// Expansion coefficients of the time-ordered interaction series.
    Dyson(commands::DysonArgs),
}

impl Command {
    fn run(&self, resolver: &mut Resolver) -> Result<CommandResult, CliError> {
        match self {
            Command::CoulombTable(a) => commands::coulomb_table(a, resolver),
            Command::RadialExtract(a) => commands::radial_extract(a, resolver),
            Command::DiracExtract(a) => commands::dirac_extract(a, resolver),
            Command::ErgodicCheck(a) => commands::ergodic_check(a, resolver),
            Command::DiracStructure(a) => commands::dirac_structure(a, resolver),
            Command::DivergenceDemo(a) => commands::divergence_demo(a, resolver),
            Command::Example82(a) => commands::example82(a, resolver),
            Command::RenormFit(a) => commands::renorm_fit(a, resolver),
            Command::Dyson(a) => commands::dyson(a, resolver),
        }
    }

    fn output_args(&self) -> &OutputArgs {
        match self {
            Command::CoulombTable(a) => &a.out,
            Command::RadialExtract(a) => &a.out,
            Command::DiracExtract(a) => &a.out,
            Command::ErgodicCheck(a) => &a.out,
            Command::DiracStructure(a) => &a.out,
            Command::DivergenceDemo(a) => &a.out,
            Command::Example82(a) => &a.out,
            Command::RenormFit(a) => &a.out,
            Command::Dyson(a) => &a.out,
        }
    }

    /// Summary reports default to JSON; tabular sweeps to CSV.
    fn default_format(&self) -> &'static str {
        match self {
            Command::ErgodicCheck(_) => "json",
            _ => "csv",
        }
    }
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("GENSCATTER_THREADS") {
            Ok(s) => s
                .trim()
                .parse::<usize>()
                .map_err(|e| CliError::Config(format!("GENSCATTER_THREADS `{s}`: {e}")))?,
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    if n == 0 || n > 4096 {
        return Err(CliError::Config(format!("threads must be in 1..=4096, got {n}")));
    }
    Ok(n)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let mut resolver = Resolver::new(file);

    let threads = resolve_threads(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
    let result = pool.install(|| cli.command.run(&mut resolver))?;

    // Destination and format are looked up (so config files may set them)
    // but never recorded: the header and hash describe only the computation.
    let out_args = cli.command.output_args();
    let format: String = resolver.ephemeral(
        "format",
        out_args.format.clone(),
        Some(cli.command.default_format().to_string()),
    )?;
    let format = match format.as_str() {
        "csv" => Format::Csv,
        "json" => Format::Json,
        other => return Err(CliError::Config(format!("format `{other}` must be csv or json"))),
    };
    let path_flag = out_args.output.as_ref().and_then(|p| p.to_str()).map(str::to_string);
    let path = match resolver.ephemeral("output", path_flag, Some(String::new()))? {
        s if s.is_empty() => None,
        s => Some(s),
    };

    let mut meta = resolver.finalize(result.name)?;
    for (k, v) in result.extra_meta {
        meta.insert(k, v);
    }

    let mut buf = Vec::new();
    match format {
        Format::Csv => output::write_csv(&mut buf, &meta, &result.table)?,
        Format::Json => output::write_json(&mut buf, &meta, &result.table)?,
    }
    match path {
        Some(p) => std::fs::write(&p, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("genscatter: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
