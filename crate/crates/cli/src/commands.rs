//! Subcommand implementations. Each resolves its settings (flags over
//! config file), runs the corresponding library operation to completion,
//! and only then writes any output files, so a failed run never leaves
//! partial artifacts.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;

use fracbat::{
    capacity_sweep, cross_validate, fit_capacity_curve_with_rs, fit_impedance_spectrum,
    fit_rs_intercept, log_grid, model_impedance, network_impedance, required_n_half,
    synthesize as synthesize_ladder, CapacityCurve, CircuitModel, CpeParams, DtPolicy,
    ImpedanceSpectrum, MorrisonNetwork, MorrisonSpec,
};

use crate::config::{self, load, need};
use crate::ingest::{ingest_log, InstrumentLog, DEFAULT_SEGMENT_THRESHOLD};
use crate::CliError;

#[derive(Args, Debug)]
pub struct SynthesizeArgs {
    /// TOML config supplying any of the other settings
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CPE exponent (0 < alpha <= 1)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// CPE coefficient, A s^alpha / V
    #[arg(long)]
    pub c_f: Option<f64>,
    /// Time-constant ratio between adjacent branches
    #[arg(long)]
    pub k_f: Option<f64>,
    /// Branches on each side of the center (2 n + 1 total); default is
    /// the minimum for the band plus 7 for edge headroom
    #[arg(long)]
    pub n_half: Option<usize>,
    /// Lower band edge, Hz
    #[arg(long)]
    pub f_min: Option<f64>,
    /// Upper band edge, Hz
    #[arg(long)]
    pub f_max: Option<f64>,
    /// Output file for the network table (stdout when omitted)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

const DEFAULT_K_F: f64 = 1.4;
const EDGE_HEADROOM: usize = 7;

fn resolve_network(
    model: &config::ModelConfig,
    network_flag: Option<&PathBuf>,
    alpha: Option<f64>,
    c_f: Option<f64>,
    k_f: Option<f64>,
    n_half: Option<usize>,
    f_min: Option<f64>,
    f_max: Option<f64>,
) -> Result<MorrisonNetwork, CliError> {
    if let Some(path) = network_flag.or(model.network.as_ref()) {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read network {}: {e}", path.display()))
        })?;
        return Ok(MorrisonNetwork::from_table_str(&text)?);
    }
    let alpha = need(alpha, model.alpha, "alpha")?;
    let c_f = need(c_f, model.c_f, "c_f")?;
    let f_min = need(f_min, model.f_min, "f_min")?;
    let f_max = need(f_max, model.f_max, "f_max")?;
    let k_f = k_f.or(model.k_f).unwrap_or(DEFAULT_K_F);
    let band = (f_min, f_max);
    let target = CpeParams::new(alpha, c_f)?;
    let n_half = n_half
        .or(model.n_half)
        .unwrap_or_else(|| required_n_half(band, k_f) + EDGE_HEADROOM);
    let spec = MorrisonSpec::new(target, n_half, k_f)?;
    Ok(synthesize_ladder(&spec, band)?)
}

pub fn synthesize_network(args: &SynthesizeArgs) -> Result<MorrisonNetwork, CliError> {
    let file = load(args.config.as_deref())?;
    resolve_network(
        &file.model,
        None,
        args.alpha,
        args.c_f,
        args.k_f,
        args.n_half,
        args.f_min,
        args.f_max,
    )
}

pub fn synthesize(args: SynthesizeArgs) -> Result<(), CliError> {
    let net = synthesize_network(&args)?;
    let table = net.to_table_string();
    match &args.output {
        Some(path) => std::fs::write(path, table)?,
        None => print!("{table}"),
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct CycleArgs {
    /// TOML config supplying any of the other settings
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Network table file (alternative to CPE parameters)
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub c_f: Option<f64>,
    #[arg(long)]
    pub k_f: Option<f64>,
    #[arg(long)]
    pub n_half: Option<usize>,
    #[arg(long)]
    pub f_min: Option<f64>,
    #[arg(long)]
    pub f_max: Option<f64>,
    /// Series resistance, ohm
    #[arg(long)]
    pub r_s: Option<f64>,
    /// Upper protocol voltage, V
    #[arg(long)]
    pub v_high: Option<f64>,
    /// Lower protocol voltage, V
    #[arg(long)]
    pub v_low: Option<f64>,
    /// Cycling currents in amperes, e.g. --currents 5,2,1,0.5
    #[arg(long, value_delimiter = ',')]
    pub currents: Option<Vec<f64>>,
    /// Cycles per current
    #[arg(long)]
    pub n_cycles: Option<usize>,
    /// Fixed time step override, s (default: a quarter of the fastest
    /// branch time constant)
    #[arg(long)]
    pub dt: Option<f64>,
    /// Directory for trace and capacity CSVs
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn cycle(args: CycleArgs) -> Result<(), CliError> {
    let file = load(args.config.as_deref())?;
    let net = resolve_network(
        &file.model,
        args.network.as_ref(),
        args.alpha,
        args.c_f,
        args.k_f,
        args.n_half,
        args.f_min,
        args.f_max,
    )?;
    let r_s = args.r_s.or(file.model.r_s).unwrap_or(0.0);
    let v_high = need(args.v_high, file.protocol.v_high, "v_high")?;
    let v_low = need(args.v_low, file.protocol.v_low, "v_low")?;
    let currents = need(args.currents, file.run.currents, "currents")?;
    let n_cycles = args.n_cycles.or(file.run.n_cycles).unwrap_or(1);
    let out_dir = need(args.out_dir, file.run.out_dir, "out_dir")?;
    let dt_policy = match args.dt.or(file.run.dt) {
        Some(dt) => DtPolicy::Fixed(dt),
        None => DtPolicy::FromTauMin,
    };

    let sweep = capacity_sweep(&net, r_s, v_high, v_low, &currents, n_cycles, dt_policy)?;

    std::fs::create_dir_all(&out_dir)?;
    for (current, result) in &sweep.runs {
        let mut text = String::from("t_s,v_V,i_A\n");
        for s in &result.trace {
            writeln!(text, "{},{},{}", s.t, s.v_terminal, s.i).unwrap();
        }
        std::fs::write(out_dir.join(format!("trace_{current}A.csv")), text)?;
    }
    std::fs::write(
        out_dir.join("capacity_curve.csv"),
        sweep.curve.to_csv_string(),
    )?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Capacity curve CSV (i_A,q_As)
    #[arg(long)]
    pub capacity: Option<PathBuf>,
    /// Protocol voltage window v_high - v_low for the capacity data, V
    #[arg(long)]
    pub delta_v: Option<f64>,
    /// Impedance spectrum CSV (f_Hz,re_ohm,im_ohm)
    #[arg(long)]
    pub impedance: Option<PathBuf>,
    /// Low-current points for the capacity fit
    #[arg(long, default_value_t = fracbat::fitting::DEFAULT_CAPACITY_POINTS)]
    pub cap_window: usize,
    /// High-current points for the series-resistance intercept
    #[arg(long, default_value_t = fracbat::fitting::DEFAULT_RS_POINTS)]
    pub rs_window: usize,
    /// Low-frequency points for the impedance fit
    #[arg(long, default_value_t = fracbat::fitting::DEFAULT_IMPEDANCE_POINTS)]
    pub imp_low: usize,
    /// High-frequency points for the R_s asymptote
    #[arg(long, default_value_t = 5)]
    pub imp_high: usize,
}

fn read_input(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    if args.capacity.is_none() && args.impedance.is_none() {
        return Err(CliError::Usage(
            "nothing to fit: give --capacity and/or --impedance".into(),
        ));
    }

    let cap_fit = match &args.capacity {
        Some(path) => {
            let delta_v = args.delta_v.ok_or_else(|| {
                CliError::Usage("--delta-v is required with --capacity".into())
            })?;
            let curve = CapacityCurve::from_csv_str(&read_input(path)?, delta_v)?;
            let r_s = match fit_rs_intercept(&curve, args.rs_window.min(curve.points().len())) {
                Ok(r_s) => r_s,
                Err(fracbat::Error::ExtrapolationInvalid(_)) => 0.0,
                Err(e) => return Err(e.into()),
            };
            let fit = fit_capacity_curve_with_rs(&curve, args.cap_window, r_s)?;
            println!("# capacity route ({})", path.display());
            print!("{fit}");
            Some(fit)
        }
        None => None,
    };

    let imp_fit = match &args.impedance {
        Some(path) => {
            let spectrum = ImpedanceSpectrum::from_csv_str(&read_input(path)?)?;
            let fit = fit_impedance_spectrum(&spectrum, args.imp_low, args.imp_high)?;
            println!("# impedance route ({})", path.display());
            print!("{fit}");
            Some(fit)
        }
        None => None,
    };

    if let (Some(cap), Some(imp)) = (cap_fit, imp_fit) {
        println!("# cross-validation");
        print!("{}", cross_validate(&cap, &imp));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Instrument log CSV (t_s,v_V,i_A)
    #[arg(long)]
    pub log: PathBuf,
    /// Upper protocol voltage, V
    #[arg(long)]
    pub v_high: f64,
    /// Lower protocol voltage (discharge cutoff), V
    #[arg(long)]
    pub v_low: f64,
    /// Relative current jump that starts a new segment
    #[arg(long, default_value_t = DEFAULT_SEGMENT_THRESHOLD)]
    pub threshold: f64,
    /// Output file for the capacity curve (stdout when omitted)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let log = InstrumentLog::from_csv_str(&read_input(&args.log)?)?;
    let report = ingest_log(&log, args.v_high, args.v_low, args.threshold)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut text = String::from("i_A,q_As\n");
    for p in &report.points {
        writeln!(text, "{},{}", p.current, p.capacity).unwrap();
    }
    match &args.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// TOML config supplying model settings
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Network table file (alternative to CPE parameters)
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub c_f: Option<f64>,
    /// Series resistance, ohm
    #[arg(long)]
    pub r_s: Option<f64>,
    /// Lower grid edge, Hz
    #[arg(long)]
    pub f_min: Option<f64>,
    /// Upper grid edge, Hz
    #[arg(long)]
    pub f_max: Option<f64>,
    /// Log-spaced grid points
    #[arg(long, default_value_t = 40)]
    pub points: usize,
    /// Directory for the three CSV tables
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn report(args: ReportArgs) -> Result<(), CliError> {
    let file = load(args.config.as_deref())?;
    let f_min = need(args.f_min, file.model.f_min, "f_min")?;
    let f_max = need(args.f_max, file.model.f_max, "f_max")?;
    if args.points < 2 {
        return Err(CliError::Usage("need at least 2 grid points".into()));
    }
    let grid = log_grid((f_min, f_max), args.points);

    let impedances: Vec<(f64, num_complex::Complex64)> =
        if let Some(path) = args.network.as_ref().or(file.model.network.as_ref()) {
            let net = MorrisonNetwork::from_table_str(&std::fs::read_to_string(path).map_err(
                |e| CliError::Usage(format!("cannot read network {}: {e}", path.display())),
            )?)?;
            let r_s = args.r_s.or(file.model.r_s).unwrap_or(0.0);
            grid.iter()
                .map(|&f| Ok((f, network_impedance(&net, f)? + r_s)))
                .collect::<Result<_, fracbat::Error>>()?
        } else {
            let alpha = need(args.alpha, file.model.alpha, "alpha")?;
            let c_f = need(args.c_f, file.model.c_f, "c_f")?;
            let r_s = args.r_s.or(file.model.r_s).unwrap_or(0.0);
            let model = CircuitModel::new(CpeParams::new(alpha, c_f)?, r_s)?;
            grid.iter()
                .map(|&f| Ok((f, model_impedance(&model, f)?)))
                .collect::<Result<_, fracbat::Error>>()?
        };

    let mut magnitude = String::from("f_Hz,mag_ohm\n");
    let mut phase = String::from("f_Hz,phase_deg\n");
    let mut nyquist = String::from("re_ohm,im_ohm\n");
    for (f, z) in &impedances {
        writeln!(magnitude, "{},{}", f, z.norm()).unwrap();
        writeln!(phase, "{},{}", f, z.arg().to_degrees()).unwrap();
        writeln!(nyquist, "{},{}", z.re, z.im).unwrap();
    }
    std::fs::create_dir_all(&args.out_dir)?;
    std::fs::write(args.out_dir.join("bode_magnitude.csv"), magnitude)?;
    std::fs::write(args.out_dir.join("bode_phase.csv"), phase)?;
    std::fs::write(args.out_dir.join("nyquist.csv"), nyquist)?;
    Ok(())
}
