use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rabi_blockade::dynamics::IntegrationSettings;
use rabi_blockade::output::{write_output, write_output_file, Format};
use rabi_blockade::params::{DEFAULT_DECAY, DEFAULT_DRIVE_RATIO};
use rabi_blockade::spectrum::detect_parity_crossing;
use rabi_blockade::sweep::{linspace, run_sweep_with, Execution, NumericalControls, SweepMode, SweepSpec, Transition};
use rabi_blockade::{FockTruncation, RabiParams, Result};

#[derive(Parser)]
#[command(name = "rabi-blockade", version, about = "Photon blockade sweeps of the driven-dissipative quantum Rabi model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase diagram over (g, omega_d).
    Grid {
        #[command(flatten)]
        g: GRange,
        #[command(flatten)]
        wd: WdRange,
        #[command(flatten)]
        common: Common,
    },
    /// Cut following a resonantly driven transition.
    Cut {
        #[command(flatten)]
        g: GRange,
        #[arg(long, value_enum, default_value_t = TransitionArg::Second)]
        transition: TransitionArg,
        #[command(flatten)]
        common: Common,
    },
    /// Frequency scan at fixed coupling.
    Freqscan {
        #[arg(long, default_value_t = 0.75)]
        g: f64,
        #[command(flatten)]
        wd: WdRange,
        #[command(flatten)]
        common: Common,
    },
    /// Dressed energies and parities versus g.
    Spectrum {
        #[command(flatten)]
        g: GRange,
        #[command(flatten)]
        common: Common,
    },
    /// Dressed transition rates versus g.
    Rates {
        #[command(flatten)]
        g: GRange,
        #[command(flatten)]
        common: Common,
    },
    /// Anharmonicity versus g.
    Anharm {
        #[command(flatten)]
        g: GRange,
        #[command(flatten)]
        common: Common,
    },
    /// Coupling where the second excited state changes parity.
    Gc {
        #[arg(long, default_value_t = 0.3)]
        g_min: f64,
        #[arg(long, default_value_t = 0.6)]
        g_max: f64,
        /// Bisection resolution in g.
        #[arg(long, default_value_t = 1e-3)]
        resolution: f64,
        #[arg(long)]
        n_fock: Option<usize>,
    },
}

#[derive(Args)]
struct GRange {
    /// Single coupling value; overrides the range.
    #[arg(long)]
    g: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    g_min: f64,
    #[arg(long, default_value_t = 3.0)]
    g_max: f64,
    #[arg(long, default_value_t = 60)]
    g_steps: usize,
}

impl GRange {
    fn values(&self) -> Vec<f64> {
        match self.g {
            Some(g) => vec![g],
            None => linspace(self.g_min, self.g_max, self.g_steps),
        }
    }
}

#[derive(Args)]
struct WdRange {
    #[arg(long, default_value_t = 0.2)]
    wd_min: f64,
    #[arg(long, default_value_t = 2.2)]
    wd_max: f64,
    #[arg(long, default_value_t = 60)]
    wd_steps: usize,
}

impl WdRange {
    fn values(&self) -> Vec<f64> {
        linspace(self.wd_min, self.wd_max, self.wd_steps)
    }
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = DEFAULT_DECAY)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_DECAY)]
    kappa: f64,
    /// Drive amplitude in units of gamma.
    #[arg(long, default_value_t = DEFAULT_DRIVE_RATIO)]
    drive_ratio: f64,
    #[arg(long)]
    n_fock: Option<usize>,
    #[arg(long, default_value_t = rabi_blockade::dissipator::DEFAULT_LEVELS_KEPT)]
    n_levels: usize,
    /// Relaxation time before averaging; defaults to 10 / min(gamma, kappa).
    #[arg(long)]
    t_relax: Option<f64>,
    #[arg(long, default_value_t = 10)]
    periods: usize,
    #[arg(long, default_value_t = 64)]
    samples_per_period: usize,
    /// Relative local error tolerance of the integrator.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Refine truncation and kept levels until results settle.
    #[arg(long)]
    auto_converge: bool,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs serially.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransitionArg {
    First,
    Second,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl Common {
    fn spec(&self, mode: SweepMode) -> SweepSpec {
        let params = RabiParams::default()
            .with_decay(self.gamma, self.kappa)
            .with_drive(self.drive_ratio * self.gamma, 1.0);
        let integration = IntegrationSettings {
            t_relax: self.t_relax,
            n_avg_periods: self.periods,
            samples_per_period: self.samples_per_period,
            integrator_tol: self.tol,
            ..IntegrationSettings::default()
        };
        SweepSpec {
            mode,
            params,
            controls: NumericalControls {
                n_fock: self.n_fock,
                n_levels: self.n_levels,
                integration,
                auto_converge: self.auto_converge,
            },
        }
    }

    fn execution(&self) -> Execution {
        match self.threads {
            Some(1) => Execution::Serial,
            Some(n) => Execution::ParallelThreads(n),
            None => Execution::Parallel,
        }
    }

    fn format(&self) -> Format {
        match self.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

fn run_mode(mode: SweepMode, common: &Common) -> Result<()> {
    let spec = common.spec(mode);
    let out = run_sweep_with(&spec, common.execution())?;
    match &common.out {
        Some(path) => write_output_file(&spec, &out, common.format(), path),
        None => write_output(&spec, &out, common.format(), std::io::stdout().lock()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Grid { g, wd, common } => run_mode(
            SweepMode::Grid {
                g: g.values(),
                omega_d: wd.values(),
            },
            &common,
        ),
        Command::Cut { g, transition, common } => {
            let which = match transition {
                TransitionArg::First => Transition::First,
                TransitionArg::Second => Transition::Second,
            };
            run_mode(SweepMode::cut(which, g.values()), &common)
        }
        Command::Freqscan { g, wd, common } => run_mode(
            SweepMode::FreqScan {
                g,
                omega_d: wd.values(),
            },
            &common,
        ),
        Command::Spectrum { g, common } => run_mode(SweepMode::SpectrumVsG { g: g.values() }, &common),
        Command::Rates { g, common } => run_mode(SweepMode::RatesVsG { g: g.values() }, &common),
        Command::Anharm { g, common } => run_mode(SweepMode::AnharmonicityVsG { g: g.values() }, &common),
        Command::Gc {
            g_min,
            g_max,
            resolution,
            n_fock,
        } => {
            let trunc = match n_fock {
                Some(n) => FockTruncation::new(n)?,
                None => FockTruncation::for_coupling(g_max),
            };
            let gc = detect_parity_crossing(&RabiParams::default(), trunc, g_min, g_max, resolution)?;
            println!("{gc}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
