//! Command-line front end: generate benchmark systems, sample transfer
//! functions, reduce (intrusive or data-driven), and simulate/compare.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use kpbt::balancing::{bt_reduce_from, cascade_gramians, clamp_orders, hankel_spectrum};
use kpbt::data_driven::{assemble_blocks, dd_reduce_complex};
use kpbt::examples::{build_benchmark, build_random_stable};
use kpbt::quadgrid::{required_tuples, GridSpec, MultiIndexMap, QuadGrid};
use kpbt::realify::{assemble_real_blocks, dd_reduce_real};
use kpbt::sim::{integrate, relative_error, InputSignal, Trajectory};
use kpbt::transfer::{batch_sample, canonical_freq, SampleSet, SampleSource};
use kpbt::KPowerSystem;

#[derive(Parser)]
#[command(
    name = "kpbt",
    version,
    about = "Balanced truncation for cascaded (K-power) bilinear systems"
)]
struct Cli {
    /// JSON config with defaults: gammas, lam_range, mu_range, dt, tfinal.
    /// Flags win over the config; the config wins over builtin defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExampleKind {
    Paper,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Bt,
    Dkbbt,
    DkbbtComplex,
}

#[derive(Subcommand)]
enum Command {
    /// Write a system manifest for a builtin example family.
    Gen {
        #[arg(long, value_enum)]
        example: ExampleKind,
        /// Subsystem order of the benchmark example.
        #[arg(long, default_value_t = 300)]
        n: usize,
        /// Comma-separated subsystem dimensions for the random example, e.g. 5,4.
        #[arg(long)]
        dims: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the k-th transfer function on the planning grid and write
    /// the sample CSV; this file alone suffices for a data-driven reduction.
    Sample {
        #[arg(long)]
        system: PathBuf,
        /// Grid spec JSON; defaults come from the config or builtin values.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Also write the resolved grid spec (handy for a later `reduce`).
        #[arg(long)]
        emit_grid: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce a system: intrusive BT from the manifest, or data-driven from
    /// samples + grid. Writes the reduced manifest plus a spectrum CSV.
    Reduce {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        system: Option<PathBuf>,
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Comma-separated subsystem orders, e.g. 25,25.
        #[arg(long)]
        orders: String,
        /// Cap the requested orders at the numerical rank instead of erroring.
        #[arg(long, default_value_t = false)]
        clamp_orders: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate a system and write the `t,y` trajectory CSV.
    Simulate {
        #[arg(long)]
        system: PathBuf,
        /// Builtin name (tcos, sindecay, step, zero) or an expression in t.
        #[arg(long, default_value = "tcos")]
        input: String,
        #[arg(long)]
        tfinal: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a full system against one or more reduced models and write
    /// trajectories plus pointwise relative errors in one CSV.
    Compare {
        #[arg(long)]
        system: PathBuf,
        /// Reduced manifest; repeat the flag for several models.
        #[arg(long = "reduced", required = true)]
        reduced: Vec<PathBuf>,
        #[arg(long, default_value = "tcos")]
        input: String,
        #[arg(long)]
        tfinal: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
struct Config {
    gammas: Option<Vec<usize>>,
    lam_range: Option<(f64, f64)>,
    mu_range: Option<(f64, f64)>,
    dt: Option<f64>,
    tfinal: Option<f64>,
}

impl Config {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    fn grid_spec(&self, k: usize) -> GridSpec {
        let mut spec = GridSpec::with_defaults(
            self.gammas.clone().unwrap_or_else(|| vec![40; k]),
        );
        if let Some(r) = self.lam_range {
            spec.lam_range = r;
        }
        if let Some(r) = self.mu_range {
            spec.mu_range = r;
        }
        spec
    }

    fn dt(&self, flag: Option<f64>) -> f64 {
        flag.or(self.dt).unwrap_or(1e-3)
    }

    fn tfinal(&self, flag: Option<f64>) -> f64 {
        flag.or(self.tfinal).unwrap_or(10.0)
    }
}

fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .with_context(|| format!("invalid {what} entry '{part}' in '{text}'"))
        })
        .collect()
}

fn resolve_grid(
    flag: Option<&Path>,
    config: &Config,
    k: usize,
) -> Result<(GridSpec, QuadGrid)> {
    let spec = match flag {
        Some(p) => GridSpec::load(p).with_context(|| format!("loading grid {}", p.display()))?,
        None => config.grid_spec(k),
    };
    if spec.gammas.len() != k {
        bail!(
            "grid has {} levels but the problem has k = {k}",
            spec.gammas.len()
        );
    }
    let grid = spec.build()?;
    Ok((spec, grid))
}

fn spectrum_path(out: &Path) -> PathBuf {
    out.with_extension("spectrum.csv")
}

fn write_spectra_csv(path: &Path, spectra: &[Vec<f64>]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "subsystem,index,sigma")?;
    for (j, s) in spectra.iter().enumerate() {
        for (i, v) in s.iter().enumerate() {
            writeln!(w, "{},{},{}", j + 1, i + 1, canonical_freq(*v))?;
        }
    }
    Ok(())
}

fn run_gen(
    example: ExampleKind,
    n: usize,
    dims: Option<&str>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let sys = match example {
        ExampleKind::Paper => build_benchmark(n)?,
        ExampleKind::Random => {
            let dims = parse_usize_list(
                dims.context("--dims is required for the random example")?,
                "dimension",
            )?;
            if dims.is_empty() || dims.contains(&0) {
                bail!("--dims needs positive entries");
            }
            build_random_stable(dims.len(), &dims, seed)?
        }
    };
    sys.save(out)?;
    eprintln!(
        "wrote {} (k = {}, n = {})",
        out.display(),
        sys.k(),
        sys.total_dim()
    );
    Ok(())
}

fn run_sample(
    config: &Config,
    system: &Path,
    grid_flag: Option<&Path>,
    emit_grid: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let sys = KPowerSystem::load(system)
        .with_context(|| format!("loading system {}", system.display()))?;
    let (spec, grid) = resolve_grid(grid_flag, config, sys.k())?;
    let tuples = required_tuples(&grid);
    let samples = batch_sample(SampleSource::System(&sys), &grid, &tuples)?;
    samples.save_csv(out)?;
    if let Some(p) = emit_grid {
        spec.save(p)?;
    }
    eprintln!("wrote {} ({} samples)", out.display(), samples.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_reduce(
    config: &Config,
    method: Method,
    system: Option<&Path>,
    samples_path: Option<&Path>,
    grid_flag: Option<&Path>,
    orders_text: &str,
    clamp: bool,
    out: &Path,
) -> Result<()> {
    let requested = parse_usize_list(orders_text, "order")?;

    if method == Method::Bt {
        let system = system.context("--method bt needs --system")?;
        let sys = KPowerSystem::load(system)
            .with_context(|| format!("loading system {}", system.display()))?;
        if requested.len() != sys.k() {
            bail!("--orders needs {} entries for this system", sys.k());
        }
        let grams = cascade_gramians(&sys)?;
        let spectrum = hankel_spectrum(&grams);
        write_spectra_csv(&spectrum_path(out), &spectrum.sigma)?;
        let orders = if clamp {
            clamp_orders(&requested, &spectrum.sigma)
        } else {
            requested
        };
        let (reduced, _) = bt_reduce_from(&sys, &grams, &orders)?;
        reduced.save(out)?;
        eprintln!(
            "wrote {} (orders {:?}); spectrum at {}",
            out.display(),
            orders,
            spectrum_path(out).display()
        );
        return Ok(());
    }

    // data-driven path: samples + grid suffice; the manifest is only used
    // to sample on the fly when no sample file is given
    let (grid, samples) = match samples_path {
        Some(sp) => {
            let imported = SampleSet::load_csv(sp)
                .with_context(|| format!("loading samples {}", sp.display()))?;
            let k = imported.k();
            let (_, grid) = resolve_grid(grid_flag, config, k)?;
            let tuples = required_tuples(&grid);
            let samples = batch_sample(SampleSource::Imported(&imported), &grid, &tuples)?;
            (grid, samples)
        }
        None => {
            let system = system.context("--method dkbbt needs --samples or --system")?;
            let sys = KPowerSystem::load(system)
                .with_context(|| format!("loading system {}", system.display()))?;
            let (_, grid) = resolve_grid(grid_flag, config, sys.k())?;
            let tuples = required_tuples(&grid);
            let samples = batch_sample(SampleSource::System(&sys), &grid, &tuples)?;
            (grid, samples)
        }
    };
    let k = grid.k();
    if requested.len() != k {
        bail!("--orders needs {k} entries for this grid");
    }
    let maps = MultiIndexMap::new(&grid);

    match method {
        Method::Dkbbt => {
            let blocks = assemble_real_blocks(&samples, &grid, &maps)?;
            let spectra: Vec<Vec<f64>> = blocks
                .loewner
                .iter()
                .map(|u| {
                    let mut s: Vec<f64> =
                        u.clone().svd(false, false).singular_values.iter().copied().collect();
                    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
                    s
                })
                .collect();
            write_spectra_csv(&spectrum_path(out), &spectra)?;
            let orders = if clamp {
                clamp_orders(&requested, &spectra)
            } else {
                requested
            };
            let (reduced, _) = dd_reduce_real(&blocks, &orders)?;
            reduced.save(out)?;
            eprintln!(
                "wrote {} (orders {:?}); spectrum at {}",
                out.display(),
                orders,
                spectrum_path(out).display()
            );
        }
        Method::DkbbtComplex => {
            let blocks = assemble_blocks(&samples, &grid, &maps)?;
            let spectra: Vec<Vec<f64>> = blocks
                .loewner
                .iter()
                .map(|u| {
                    let mut s: Vec<f64> =
                        u.clone().svd(false, false).singular_values.iter().copied().collect();
                    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
                    s
                })
                .collect();
            write_spectra_csv(&spectrum_path(out), &spectra)?;
            let orders = if clamp {
                clamp_orders(&requested, &spectra)
            } else {
                requested
            };
            let (reduced, _) = dd_reduce_complex(&blocks, &orders)?;
            reduced.save(out)?;
            eprintln!(
                "wrote {} (complex, orders {:?}); spectrum at {}",
                out.display(),
                orders,
                spectrum_path(out).display()
            );
        }
        Method::Bt => unreachable!(),
    }
    Ok(())
}

fn run_simulate(
    config: &Config,
    system: &Path,
    input: &str,
    tfinal: Option<f64>,
    dt: Option<f64>,
    out: &Path,
) -> Result<()> {
    let sys = KPowerSystem::load(system)
        .with_context(|| format!("loading system {}", system.display()))?;
    let signal = InputSignal::parse(input)?;
    let traj = integrate(&sys, &signal, config.tfinal(tfinal), config.dt(dt))?;
    let file = std::fs::File::create(out)?;
    traj.to_csv(std::io::BufWriter::new(file))?;
    eprintln!("wrote {} ({} samples)", out.display(), traj.times.len());
    Ok(())
}

fn run_compare(
    config: &Config,
    system: &Path,
    reduced: &[PathBuf],
    input: &str,
    tfinal: Option<f64>,
    dt: Option<f64>,
    out: &Path,
) -> Result<()> {
    let sys = KPowerSystem::load(system)
        .with_context(|| format!("loading system {}", system.display()))?;
    let signal = InputSignal::parse(input)?;
    let (tf, h) = (config.tfinal(tfinal), config.dt(dt));
    let y_full = integrate(&sys, &signal, tf, h)?;

    let mut trajectories: Vec<Trajectory> = Vec::new();
    let mut errors = Vec::new();
    for path in reduced {
        let red = KPowerSystem::load(path)
            .with_context(|| format!("loading reduced model {}", path.display()))?;
        let y = integrate(&red, &signal, tf, h)?;
        let e = relative_error(&y_full, &y)?;
        eprintln!(
            "{}: relative L2 error {:.6e}, max pointwise {:.6e}",
            path.display(),
            e.l2,
            e.max
        );
        trajectories.push(y);
        errors.push(e);
    }

    let mut w = std::io::BufWriter::new(std::fs::File::create(out)?);
    write!(w, "t,y_full")?;
    for i in 1..=trajectories.len() {
        write!(w, ",y_red{i}")?;
    }
    for i in 1..=trajectories.len() {
        write!(w, ",e_red{i}")?;
    }
    writeln!(w)?;
    for (m, t) in y_full.times.iter().enumerate() {
        write!(w, "{},{}", canonical_freq(*t), canonical_freq(y_full.outputs[m]))?;
        for traj in &trajectories {
            write!(w, ",{}", canonical_freq(traj.outputs[m]))?;
        }
        for e in &errors {
            write!(w, ",{}", canonical_freq(e.pointwise[m]))?;
        }
        writeln!(w)?;
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = Config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Gen {
            example,
            n,
            dims,
            seed,
            out,
        } => run_gen(*example, *n, dims.as_deref(), *seed, out),
        Command::Sample {
            system,
            grid,
            emit_grid,
            out,
        } => run_sample(&config, system, grid.as_deref(), emit_grid.as_deref(), out),
        Command::Reduce {
            method,
            system,
            samples,
            grid,
            orders,
            clamp_orders,
            out,
        } => run_reduce(
            &config,
            *method,
            system.as_deref(),
            samples.as_deref(),
            grid.as_deref(),
            orders,
            *clamp_orders,
            out,
        ),
        Command::Simulate {
            system,
            input,
            tfinal,
            dt,
            out,
        } => run_simulate(&config, system, input, *tfinal, *dt, out),
        Command::Compare {
            system,
            reduced,
            input,
            tfinal,
            dt,
            out,
        } => run_compare(&config, system, reduced, input, *tfinal, *dt, out),
    }
}
