//! `polint`: runs conservative-scheme experiments and writes CSV/JSON artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use polint_core::analysis::stability::{grid_taus, linspace};
use polint_core::analysis::{stability_report, stability_threshold, tau_max};
use polint_core::density::parse_density;
use polint_core::experiment::{self, ExperimentConfig, GridConfig, Reference, SweepParam, SCHEMA_VERSION};
use polint_core::integrators::SchemeKind;
use polint_core::polarisation::polarise;
use polint_core::Rational;

/// Writes a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "polint", version, about = "Conservative AVF / linearly implicit PAVF schemes on periodic grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write steps.csv and summary.json.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment over a list of Δt or θ values and write sweep.csv and summary.json.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Comma-separated Δt list.
        #[arg(long = "dts", value_delimiter = ',', conflicts_with = "thetas", required_unless_present = "thetas")]
        dts: Vec<f64>,
        /// Comma-separated θ list.
        #[arg(long = "thetas", value_delimiter = ',')]
        thetas: Vec<f64>,
        /// Comma-separated schemes for Δt sweeps (default: the configured one).
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<SchemeKind>,
        #[arg(long, value_enum, default_value_t = RefArg::Fine)]
        reference: RefArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Root moduli of the Airy stability polynomial.
    Stability {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        /// Explicit τ range; otherwise the modes of the Airy grid below are used.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
        tau_range: Option<Vec<f64>>,
        #[arg(long, default_value_t = 201)]
        samples: usize,
        #[arg(long, default_value_t = 64)]
        n_points: usize,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        length: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the polarisation of a density.
    Polarise {
        #[arg(long)]
        density: String,
        #[arg(long)]
        k: usize,
        /// Blend parameter as a fraction or decimal.
        #[arg(long, default_value = "1/2")]
        theta: String,
    },
    /// List the built-in presets.
    ListPresets,
    /// Print a preset as TOML, as a starting point for a config file.
    ShowPreset { name: String },
}

#[derive(Args)]
#[command(next_help_heading = "Experiment")]
struct Source {
    /// TOML or JSON experiment file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    scheme: Option<SchemeKind>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    log_every: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefArg {
    Fine,
    Analytic,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path)?,
            (None, Some(name)) => experiment::preset(name)?,
            (None, None) => bail!("either --config or --preset is required"),
        };
        if let Some(v) = self.theta {
            cfg.theta = v;
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.t_end {
            cfg.t_end = v;
        }
        if let Some(v) = self.k {
            cfg.k = Some(v);
        }
        if let Some(v) = self.scheme {
            cfg.scheme = v;
        }
        if let Some(n) = self.n_points {
            cfg.grid = GridConfig { n_points: n, ..cfg.grid };
        }
        if let Some(v) = self.log_every {
            cfg.log_every = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    Ok(cfg)
}

fn out_dir(explicit: Option<PathBuf>, cfg: &ExperimentConfig, fallback: &str) -> Result<PathBuf> {
    let dir = explicit.or_else(|| cfg.output.clone()).unwrap_or_else(|| {
        let name = if cfg.name.is_empty() { fallback } else { &cfg.name };
        PathBuf::from("out").join(name)
    });
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_csv<R: Serialize>(path: &Path, columns: &[&str], rows: &[R]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(columns)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Document<'a, S: Serialize> {
    kind: &'a str,
    config: &'a ExperimentConfig,
    artifacts: Vec<&'a str>,
    #[serde(flatten)]
    summary: S,
}

fn cmd_run(source: Source, out: Option<PathBuf>) -> Result<()> {
    let cfg = source.load()?;
    let dir = out_dir(out, &cfg, "run")?;
    let result = experiment::run_experiment(&cfg)?;
    write_csv(&dir.join("steps.csv"), &experiment::STEP_COLUMNS, &result.rows)?;
    write_json(&dir.join("config.json"), &cfg)?;
    let s = &result.summary;
    write_json(
        &dir.join("summary.json"),
        &Document { kind: "run", config: &cfg, artifacts: vec!["steps.csv"], summary: s },
    )?;
    say!("{} ({}) steps={} t={:.6} solves={}", cfg.name, cfg.scheme, s.steps, s.t_final, s.solve_count + s.bootstrap_solves);
    say!("max relative deviation of H_d: {:.3e}", s.max_rel_dev_hamiltonian);
    if let Some(p) = s.max_rel_dev_polarised {
        say!("max relative deviation of polarised H_d: {p:.3e}");
    }
    if let (Some(a), Some(b)) = (s.final_shape_err, s.final_distance_err) {
        say!("shape error {a:.3e}, distance error {b:.3e}");
    }
    if let Some(e) = s.final_exact_error {
        say!("sup error against the exact solution: {e:.3e}");
    }
    if let Some(step) = s.blow_up_step {
        say!("BLOW-UP at step {step} (sup norm {:.3e}, initially {:.3e})", s.max_sup, s.initial_sup);
    }
    if let Some(f) = &s.failure {
        say!("run stopped at step {}: {}", f.step, f.message);
    }
    say!("wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(
    source: Source,
    dts: Vec<f64>,
    thetas: Vec<f64>,
    schemes: Vec<SchemeKind>,
    reference: RefArg,
    out: Option<PathBuf>,
) -> Result<()> {
    let cfg = source.load()?;
    let param = if thetas.is_empty() { SweepParam::Dt(dts) } else { SweepParam::Theta(thetas) };
    let reference = match reference {
        RefArg::Fine => Reference::Fine,
        RefArg::Analytic => Reference::Analytic,
    };
    let dir = out_dir(out, &cfg, "sweep")?;
    let result = experiment::sweep(&cfg, &param, &schemes, reference)?;
    write_csv(&dir.join("sweep.csv"), &experiment::SWEEP_COLUMNS, &result.rows)?;
    write_json(
        &dir.join("summary.json"),
        &Document {
            kind: "sweep",
            config: &cfg,
            artifacts: vec!["sweep.csv"],
            summary: &result.summary,
        },
    )?;
    for r in &result.rows {
        let err = r.global_error.map(|e| format!("{e:.3e}")).unwrap_or_else(|| "-".into());
        let note = match (&r.error, r.blew_up) {
            (Some(e), _) => format!("  failed: {e}"),
            (None, true) => "  BLOW-UP".into(),
            _ => String::new(),
        };
        say!("{:<12} dt={:<10} theta={:<6} error={err:<10} solves={}{note}", r.scheme, r.dt, r.theta, r.total_solves);
    }
    if result.rows.iter().all(|r| r.error.is_some()) {
        bail!("every sweep row failed; see {}", dir.join("sweep.csv").display());
    }
    for s in &result.summary.convergence_slopes {
        if let Some(slope) = s.slope {
            say!("{} convergence slope {slope:.3}", s.scheme);
        }
    }
    say!("wrote {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct StabilityDoc {
    schema: u32,
    kind: &'static str,
    theta: f64,
    tau_max: Option<f64>,
    threshold_at_tau_max: Option<f64>,
    report: polint_core::analysis::StabilityReport,
}

#[allow(clippy::too_many_arguments)]
fn cmd_stability(
    theta: f64,
    tau_range: Option<Vec<f64>>,
    samples: usize,
    n_points: usize,
    length: f64,
    dt: f64,
    out: Option<PathBuf>,
) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        bail!("theta must lie in [0, 1], got {theta}");
    }
    let (taus, tmax) = match tau_range {
        Some(r) => (linspace(r[0], r[1], samples), None),
        None => {
            let grid = GridConfig { n_points, length, left: 0.0 }.build()?;
            (grid_taus(grid, dt), Some(tau_max(grid, dt)))
        }
    };
    let report = stability_report(theta, &taus)?;
    let threshold = tmax.filter(|t| *t != 0.0).map(stability_threshold).transpose()?;
    say!("theta={theta} max |zeta|={:.15} {}", report.max_modulus, if report.stable { "stable" } else { "UNSTABLE" });
    if let (Some(t), Some(th)) = (tmax, threshold) {
        say!("tau_max={t:.6} smallest stable theta={th:.6}");
    }
    let doc = StabilityDoc { schema: SCHEMA_VERSION, kind: "stability", theta, tau_max: tmax, threshold_at_tau_max: threshold, report };
    if let Some(dir) = out {
        fs::create_dir_all(&dir)?;
        write_json(&dir.join("stability.json"), &doc)?;
        say!("wrote {}", dir.display());
    }
    Ok(())
}

fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let (n, d): (i64, i64) = (n.trim().parse()?, d.trim().parse()?);
        if d == 0 {
            bail!("zero denominator in {text}");
        }
        return Ok(Rational::new(n, d));
    }
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    let denom = 10i64.checked_pow(frac.len() as u32).context("too many decimals")?;
    let digits: i64 = format!("{int}{frac}").parse().with_context(|| format!("not a number: {text}"))?;
    Ok(Rational::new(digits, denom))
}

fn cmd_polarise(density: &str, k: usize, theta: &str) -> Result<()> {
    let poly = parse_density::<Rational>(density)?;
    let pd = polarise(&poly, k, parse_rational(theta)?)?;
    say!("{}", serde_json::to_string_pretty(&pd.dump())?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { source, out } => cmd_run(source, out),
        Command::Sweep { source, dts, thetas, schemes, reference, out } => cmd_sweep(source, dts, thetas, schemes, reference, out),
        Command::Stability { theta, tau_range, samples, n_points, length, dt, out } => {
            cmd_stability(theta, tau_range, samples, n_points, length, dt, out)
        }
        Command::Polarise { density, k, theta } => cmd_polarise(&density, k, &theta),
        Command::ListPresets => {
            for name in experiment::PRESETS {
                say!("{name}");
            }
            Ok(())
        }
        Command::ShowPreset { name } => experiment::preset(&name)
            .map_err(anyhow::Error::from)
            .and_then(|cfg| Ok(toml::to_string_pretty(&cfg)?))
            .map(|text| say!("{}", text.trim_end())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
