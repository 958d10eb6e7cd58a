mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use su11_core::config::{load_config_with, InterferometerConfig};
use su11_core::dispersion::MaterialRegistry;
use su11_core::jsa::{build_jsa, build_single_crystal_jsa};
use su11_core::modes::{calibrate_coupling, reweight_amplitudes, schmidt_decompose, write_weights_csv, Arm};
use su11_core::observables::{convolve_spectrometer, Spectrum};
use su11_core::scenarios::{
    delay_waterfall_svg, find_constructive_phase, run_delay_scan, run_gain_study, run_gvd_sweep,
    run_spectrum_comparison, spectra_overlay_svg, sweep_svg, write_delay_csv, write_gain_csv, write_sweep_csv,
    PipelineResult, RunMetadata,
};
use su11_core::Error;

use manifest::OutputDir;

const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

#[derive(Debug, Parser)]
#[command(name = "su11", version, about = "Spectral engineering of a two-crystal nonlinear interferometer")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (the built-in default when omitted).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true, default_value = "out")]
    out: PathBuf,
    /// Per-mode parametric gain.
    #[arg(long, global = true)]
    gain: Option<f64>,
    /// Number of drift phases averaged per sweep row.
    #[arg(long, global = true)]
    phases: Option<usize>,
    /// Worker threads (0 uses every core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Signal spectrum of the single crystal and of the interferometer.
    Spectrum {
        #[arg(long)]
        single_crystal: bool,
        #[arg(long)]
        interferometer: bool,
        /// Also write spectra seen through the spectrometer response.
        #[arg(long)]
        convolve: bool,
        /// Interferometer drift phase in rad (constructive when omitted).
        #[arg(long, allow_hyphen_values = true)]
        phase: Option<f64>,
    },
    /// FWHM and g2 against gap dispersion for every rod set.
    SweepGvd {
        /// Also write the constructive-phase spectrum of every row.
        #[arg(long)]
        spectra: bool,
    },
    /// Spectra against pump path offset.
    DelayScan {
        /// Path offsets in mm, overriding the configuration.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        delays: Option<Vec<f64>>,
    },
    /// Effective mode number and g2 against gain at the constructive phase.
    GainStudy {
        /// Gains, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        gains: Option<Vec<f64>>,
    },
    /// Joint spectral amplitude on the grid.
    DumpJsa {
        #[arg(long)]
        single_crystal: bool,
        #[arg(long, allow_hyphen_values = true)]
        phase: Option<f64>,
    },
    /// Schmidt weights, high-gain weights and the leading mode functions.
    DumpModes {
        #[arg(long)]
        single_crystal: bool,
        #[arg(long, allow_hyphen_values = true)]
        phase: Option<f64>,
        /// Number of leading modes written per arm.
        #[arg(long, default_value_t = 4)]
        count: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::SweepGvd { .. } => "sweep-gvd",
            Command::DelayScan { .. } => "delay-scan",
            Command::GainStudy { .. } => "gain-study",
            Command::DumpJsa { .. } => "dump-jsa",
            Command::DumpModes { .. } => "dump-modes",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Core(Error::Numerical(format!("{}: {e}", path.display())))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                Error::ConfigNotFound(_)
                | Error::ConfigParse(_)
                | Error::InvalidField { .. }
                | Error::UnknownMaterial(_)
                | Error::MaterialData { .. }
                | Error::NoPhaseMatching { .. } => 2,
                _ => 1,
            },
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => {
                write!(f, "{e}")?;
                let mut source = std::error::Error::source(e);
                while let Some(s) = source {
                    write!(f, "\n  caused by: {s}")?;
                    source = s.source();
                }
                Ok(())
            }
        }
    }
}

/// Default config, then the file, then command-line flags.
fn load(common: &Common) -> Result<InterferometerConfig, CliError> {
    let registry = MaterialRegistry::from_env()?;
    let mut config = match &common.config {
        Some(path) => load_config_with(path, &registry)?,
        None => InterferometerConfig::parse(DEFAULT_CONFIG, &registry)?,
    };
    if let Some(g) = common.gain {
        config = config.with_gain(g)?;
    }
    if let Some(p) = common.phases {
        config = config.with_phase_count(p)?;
    }
    if let Some(j) = common.jobs {
        config = config.with_jobs(j);
    }
    Ok(config)
}

fn write_spectrum(out: &mut OutputDir, name: &str, meta: &RunMetadata, extra: &[(String, String)], s: &Spectrum) -> Result<(), CliError> {
    let mut header = meta.header();
    header.extend_from_slice(extra);
    out.write(name, |w| s.write_csv(&header, w))
}

fn summary_line(w: &mut impl Write, source: &str, r: &PipelineResult) -> std::io::Result<()> {
    writeln!(
        w,
        "{source},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
        r.drift_phase, r.coupling, r.coherence.k, r.coherence.g2, r.fwhm.width, r.schmidt_number, r.discarded_mass
    )
}

fn cmd_spectrum(
    config: &InterferometerConfig,
    out: &mut OutputDir,
    mut single: bool,
    mut interferometer: bool,
    convolve: bool,
    phase: Option<f64>,
) -> Result<(), CliError> {
    if !single && !interferometer {
        single = true;
        interferometer = true;
    }
    let meta = RunMetadata::new("spectrum", config);
    let cmp = run_spectrum_comparison(config, single, interferometer, phase)?;
    let runs: Vec<(&str, &PipelineResult)> = [("single_crystal", &cmp.single_crystal), ("interferometer", &cmp.interferometer)]
        .into_iter()
        .filter_map(|(n, r)| r.as_ref().map(|r| (n, r)))
        .collect();
    let mut plotted = Vec::new();
    for (name, r) in &runs {
        let extra = vec![("source".to_string(), name.to_string()), ("drift_phase_rad".to_string(), format!("{:.9}", r.drift_phase))];
        write_spectrum(out, &format!("spectrum_{name}.csv"), &meta, &extra, &r.spectrum)?;
        plotted.push((name.replace('_', " "), r.spectrum.clone()));
        if convolve {
            let c = convolve_spectrometer(&r.spectrum, config.resolution_nm())?;
            write_spectrum(out, &format!("spectrum_{name}_convolved.csv"), &meta, &extra, &c)?;
            plotted.push((format!("{} (spectrometer)", name.replace('_', " ")), c));
        }
    }
    out.write("summary.csv", |w| {
        writeln!(w, "source,drift_phase_rad,coupling,K,g2,fwhm_thz,schmidt_number,discarded_mass")?;
        for (name, r) in &runs {
            summary_line(w, name, r)?;
        }
        Ok(())
    })?;
    let refs: Vec<(String, &Spectrum)> = plotted.iter().map(|(l, s)| (l.clone(), s)).collect();
    out.write_text("spectrum.svg", &spectra_overlay_svg("Signal spectrum", &refs))?;
    for (name, r) in &runs {
        println!(
            "{name}: K = {:.4}, g2 = {:.4}, FWHM = {:.4} THz, drift phase = {:.4} rad",
            r.coherence.k, r.coherence.g2, r.fwhm.width, r.drift_phase
        );
    }
    Ok(())
}

fn cmd_sweep(config: &InterferometerConfig, out: &mut OutputDir, spectra: bool) -> Result<(), CliError> {
    if config.rod_sets().is_empty() {
        return Err(CliError::Usage("sweep-gvd needs a [sweep] table with rod_sets".into()));
    }
    let rows = run_gvd_sweep(config, config.rod_sets())?;
    out.write("sweep_gvd.csv", |w| write_sweep_csv(&rows, w))?;
    out.write_text("sweep_gvd.svg", &sweep_svg(&rows, config.phase_count()))?;
    for (k, row) in rows.iter().enumerate() {
        if let Some(cfg) = &row.config {
            out.write_text(&format!("rows/{k:02}_config.toml"), &cfg.serialize())?;
            if spectra {
                let meta = RunMetadata::new("sweep-gvd", cfg);
                let extra = vec![("label".to_string(), row.label.clone())];
                if let Some(s) = &row.spectrum {
                    write_spectrum(out, &format!("rows/{k:02}_spectrum.csv"), &meta, &extra, s)?;
                }
            }
        }
    }
    for r in &rows {
        match &r.error {
            None => println!(
                "{:<28} k''d = {:.4} ps^2  FWHM = {:.4} THz  g2 = {:.4}  mean FWHM = {:.3} +- {:.3}",
                r.label, r.k_double_prime_d, r.fwhm_constructive, r.g2_constructive, r.fwhm_mean, r.fwhm_std
            ),
            Some(e) => println!("{:<28} failed: {e}", r.label),
        }
    }
    Ok(())
}

fn cmd_delay(config: &InterferometerConfig, out: &mut OutputDir, delays: Option<Vec<f64>>) -> Result<(), CliError> {
    let delays = delays
        .or_else(|| config.spec().delay_scan.as_ref().map(|d| d.delays_mm.clone()))
        .ok_or_else(|| CliError::Usage("delay-scan needs --delays or a [delay_scan] table".into()))?;
    if delays.is_empty() {
        return Err(CliError::Usage("no delays given".into()));
    }
    let scan = run_delay_scan(config, &delays)?;
    out.write("delay_scan.csv", |w| write_delay_csv(&scan, w))?;
    out.write_text("delay_scan.svg", &delay_waterfall_svg(&scan))?;
    let meta = RunMetadata::new("delay-scan", config);
    for (k, row) in scan.rows.iter().enumerate() {
        let extra = vec![
            ("delta_L_p_mm".to_string(), format!("{:.6}", row.delta_l_p_mm)),
            ("drift_phase_rad".to_string(), format!("{:.9}", scan.constructive_phase)),
        ];
        write_spectrum(out, &format!("delays/{k:02}_spectrum.csv"), &meta, &extra, &row.spectrum)?;
        write_spectrum(out, &format!("delays/{k:02}_convolved.csv"), &meta, &extra, &row.convolved)?;
    }
    for row in &scan.rows {
        let peaks: Vec<String> = row.peaks.iter().map(|p| format!("{:.3}", p.frequency_thz)).collect();
        println!("dL_p = {:.3} mm  peaks (THz): {}  K = {:.3}", row.delta_l_p_mm, peaks.join(", "), row.k);
    }
    Ok(())
}

fn cmd_gain(config: &InterferometerConfig, out: &mut OutputDir, gains: Option<Vec<f64>>) -> Result<(), CliError> {
    let gains = gains
        .or_else(|| config.spec().gain_study.as_ref().map(|g| g.gains.clone()))
        .unwrap_or_else(|| vec![config.gain()]);
    if gains.is_empty() {
        return Err(CliError::Usage("no gains given".into()));
    }
    let rows = run_gain_study(config, &gains)?;
    out.write("gain_study.csv", |w| write_gain_csv(&rows, w))?;
    for r in &rows {
        println!("G = {:<8} K = {:.4}  g2 = {:.4}", r.gain, r.k, r.g2);
    }
    Ok(())
}

fn resolve_phase(config: &InterferometerConfig, single: bool, phase: Option<f64>) -> Result<InterferometerConfig, CliError> {
    Ok(match (single, phase) {
        (true, _) => config.clone(),
        (false, Some(p)) => config.clone().with_drift_phase(p),
        (false, None) => config.clone().with_drift_phase(find_constructive_phase(config)?.phase),
    })
}

fn cmd_dump_jsa(config: &InterferometerConfig, out: &mut OutputDir, single: bool, phase: Option<f64>) -> Result<(), CliError> {
    let cfg = resolve_phase(config, single, phase)?;
    let jsa = if single { build_single_crystal_jsa(&cfg)? } else { build_jsa(&cfg)? };
    out.write("jsa.csv", |w| jsa.write_text(w))?;
    println!("{0}x{0} grid, norm {1:.6e}", jsa.n(), jsa.norm());
    Ok(())
}

fn cmd_dump_modes(
    config: &InterferometerConfig,
    out: &mut OutputDir,
    single: bool,
    phase: Option<f64>,
    count: usize,
) -> Result<(), CliError> {
    let cfg = resolve_phase(config, single, phase)?;
    let jsa = if single { build_single_crystal_jsa(&cfg)? } else { build_jsa(&cfg)? };
    let d = schmidt_decompose(&jsa, cfg.rank_tolerance())?;
    let g = calibrate_coupling(d.weights(), cfg.gain())?;
    let x: Vec<f64> = d.weights().iter().map(|l| g * l.sqrt()).collect();
    let hg = reweight_amplitudes(&x)?;
    out.write("weights.csv", |w| write_weights_csv(d.weights(), &hg, w))?;
    for k in 0..count.min(d.truncation_rank()) {
        out.write(&format!("modes/signal_{k:02}.csv"), |w| d.write_mode_csv(Arm::Signal, k, w))?;
        out.write(&format!("modes/idler_{k:02}.csv"), |w| d.write_mode_csv(Arm::Idler, k, w))?;
    }
    println!("rank {}  Schmidt number {:.4}  discarded {:.3e}", d.truncation_rank(), d.schmidt_number(), d.discarded_mass());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = load(&cli.common)?;
    let name = cli.command.name();
    let mut out = OutputDir::create(&cli.common.out)?;
    match cli.command {
        Command::Spectrum {
            single_crystal,
            interferometer,
            convolve,
            phase,
        } => cmd_spectrum(&config, &mut out, single_crystal, interferometer, convolve, phase)?,
        Command::SweepGvd { spectra } => cmd_sweep(&config, &mut out, spectra)?,
        Command::DelayScan { delays } => cmd_delay(&config, &mut out, delays)?,
        Command::GainStudy { gains } => cmd_gain(&config, &mut out, gains)?,
        Command::DumpJsa { single_crystal, phase } => cmd_dump_jsa(&config, &mut out, single_crystal, phase)?,
        Command::DumpModes {
            single_crystal,
            phase,
            count,
        } => cmd_dump_modes(&config, &mut out, single_crystal, phase, count)?,
    }
    out.write_metadata(name, &config)?;
    let manifest = out.finish(name, cli.common.config.as_deref(), &config)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
