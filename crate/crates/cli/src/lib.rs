//! Command-line front end: scenario loading, link budgets, pattern cuts,
//! optimizer runs, parameter sweeps and the built-in validation suite.
//!
//! Exit codes: 0 success, 1 domain error (reported on stderr with a
//! stable `error:` prefix), 2 usage error.

// `!(x >= y)`-style guards reject NaN inputs that a plain comparison
// would wave through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use clap::{Args, Parser, Subcommand, ValueEnum};
use star_ris_core::beamform::{
    self, conjugate_phases, exhaustive_search, greedy_multistart, greedy_optimize, pattern_sweep,
    quantized_conjugate, uniform_grid_deg, PhaseConfiguration, SteeringTarget,
    DEFAULT_SEARCH_BUDGET_BITS,
};
use star_ris_core::element::ElementState;
use star_ris_core::export::{export_pattern, ExportFormat};
use star_ris_core::geometry::Side;
use star_ris_core::link::{link_budget, min_path_loss, received_power, Scenario};
use star_ris_core::scenario::{load_env_calibration, parse_scenario, ParsedScenario, ScenarioFile};
use star_ris_core::validate;
use star_ris_core::{Error, Result};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "star-ris",
    version,
    about = "Active STAR-RIS link simulator and beamforming optimizer"
)]
struct Cli {
    /// Scenario file (key = value schema); the built-in reference scenario
    /// is used when omitted
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Worker thread count for sweeps and exhaustive search (0 = library
    /// default); results are identical at any setting
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Received powers, path losses and SNRs at both receivers
    Linkbudget {
        /// Phase configuration to evaluate
        #[arg(long, value_enum, default_value_t = ConfigChoice::Greedy)]
        config: ConfigChoice,
    },
    /// Radiation-pattern cut exported to CSV or JSON
    Pattern(PatternArgs),
    /// Run one optimizer and report achieved power against the bound
    Optimize(OptimizeArgs),
    /// Vary one parameter over a grid and tabulate received power
    Sweep(SweepArgs),
    /// Run the built-in acceptance suite and print one line per criterion
    Validate {
        /// Master seed for the randomized criteria
        #[arg(long, default_value_t = validate::DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct PatternArgs {
    /// Which face to sweep
    #[arg(long, value_enum)]
    side: SideChoice,
    /// Steering zenith for the optimizer (deg)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    steer_deg: f64,
    /// Steering azimuth (deg)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    steer_azimuth_deg: f64,
    /// Optimizer producing the configuration under test
    #[arg(long, value_enum, default_value_t = PatternMethod::Greedy)]
    method: PatternMethod,
    /// Sweep start (deg, signed scan angle)
    #[arg(long, default_value_t = -80.0, allow_negative_numbers = true)]
    from_deg: f64,
    /// Sweep end (deg)
    #[arg(long, default_value_t = 80.0, allow_negative_numbers = true)]
    to_deg: f64,
    /// Grid step (deg)
    #[arg(long, default_value_t = 0.5)]
    step_deg: f64,
    /// Azimuth of the cut plane (deg)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    cut_azimuth_deg: f64,
    /// Output file
    #[arg(long)]
    out: PathBuf,
    /// Output format
    #[arg(long, value_enum, default_value_t = FormatChoice::Csv)]
    format: FormatChoice,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    /// Optimizer to run
    #[arg(long, value_enum)]
    method: MethodChoice,
    /// Which face to optimize
    #[arg(long, value_enum)]
    side: SideChoice,
    /// Steering zenith (deg); the scenario's own receiver when omitted
    #[arg(long, allow_negative_numbers = true)]
    steer_deg: Option<f64>,
    /// Steering azimuth (deg)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    steer_azimuth_deg: f64,
    /// Greedy pass limit
    #[arg(long, default_value_t = 16)]
    max_passes: usize,
    /// Deterministic greedy restarts from perturbed seeds
    #[arg(long, default_value_t = false)]
    restarts: bool,
    /// Exhaustive-search budget in total code bits
    #[arg(long, default_value_t = DEFAULT_SEARCH_BUDGET_BITS)]
    budget_bits: u32,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Parameter to vary
    #[arg(long, value_enum)]
    param: SweepParam,
    /// Grid start
    #[arg(long, allow_negative_numbers = true)]
    from: f64,
    /// Grid end
    #[arg(long, allow_negative_numbers = true)]
    to: f64,
    /// Number of grid points (>= 2)
    #[arg(long)]
    steps: usize,
    /// Face for zenith sweeps
    #[arg(long, value_enum, default_value_t = SideChoice::T)]
    side: SideChoice,
    /// Optional CSV output path (stdout table otherwise)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum SideChoice {
    /// Transmission side (through the surface)
    T,
    /// Reflection side
    R,
}

impl From<SideChoice> for Side {
    fn from(c: SideChoice) -> Side {
        match c {
            SideChoice::T => Side::Transmit,
            SideChoice::R => Side::Reflect,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ConfigChoice {
    /// All phase codes at zero
    Zero,
    /// Quantized conjugate toward each receiver
    Quantized,
    /// Greedy descent toward each receiver
    Greedy,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PatternMethod {
    Quantized,
    Greedy,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodChoice {
    Conjugate,
    Quantized,
    Greedy,
    Exhaustive,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatChoice {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SweepParam {
    /// Amplifier supply current (mA)
    #[value(alias = "pa_ma")]
    PaMa,
    /// Varactor bias voltage (V)
    #[value(alias = "bias_v")]
    BiasV,
    /// Steering zenith (deg)
    Zenith,
}

/// Parse `argv` and execute; everything the command prints goes to the
/// given writers. Returns the process exit code.
pub fn run<W1: Write + Send, W2: Write>(argv: &[String], stdout: &mut W1, stderr: &mut W2) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; --help/--version land on stdout
            // with exit 0, genuine usage errors on stderr with exit 2
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                return 2;
            }
            let _ = write!(stdout, "{rendered}");
            return 0;
        }
    };
    let outcome = if cli.threads > 0 {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
        {
            Ok(pool) => pool.install(|| dispatch(&cli, stdout)),
            Err(e) => Err(Error::Configuration(format!("thread pool: {e}"))),
        }
    } else {
        dispatch(&cli, stdout)
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let prefix = match e {
                Error::Parse { .. } => "parse",
                Error::Io(_) => "io",
                Error::BudgetExceeded(_) => "budget",
                _ => "domain",
            };
            let _ = writeln!(stderr, "error: {prefix}: {e}");
            1
        }
    }
}

fn load(cli: &Cli) -> Result<ParsedScenario> {
    match &cli.scenario {
        Some(path) => parse_scenario(path),
        None => {
            let fallback = load_env_calibration()?;
            ScenarioFile::reference().build(fallback.as_ref())
        }
    }
}

fn dispatch<W: Write>(cli: &Cli, out: &mut W) -> Result<i32> {
    match &cli.command {
        Command::Linkbudget { config } => {
            let parsed = load(cli)?;
            linkbudget_cmd(&parsed, *config, out)
        }
        Command::Pattern(args) => {
            let parsed = load(cli)?;
            pattern_cmd(&parsed, args, out)
        }
        Command::Optimize(args) => {
            let parsed = load(cli)?;
            optimize_cmd(&parsed, args, out)
        }
        Command::Sweep(args) => {
            let parsed = load(cli)?;
            sweep_cmd(&parsed, args, out)
        }
        Command::Validate { seed } => {
            let (reports, rendered) = validate::run_full(*seed);
            write!(out, "{rendered}").map_err(Error::Io)?;
            Ok(if reports.iter().all(|r| r.passed) {
                0
            } else {
                1
            })
        }
    }
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

fn receiver_target(scenario: &Scenario, side: Side) -> SteeringTarget {
    SteeringTarget::Position {
        side,
        position: scenario.receiver(side).position,
    }
}

/// Optimize codes for `side` toward its actual receiver and write them
/// into the states.
fn apply_optimized(
    parsed: &ParsedScenario,
    states: &mut [ElementState],
    side: Side,
    greedy: bool,
) -> Result<()> {
    let target = receiver_target(&parsed.scenario, side);
    let bits = parsed.element_template.bits;
    let qc = quantized_conjugate(&parsed.scenario, &target, bits, states)?;
    let config = if greedy {
        greedy_optimize(&parsed.scenario, &target, bits, states, &qc.config, 16)?.config
    } else {
        qc.config
    };
    for (state, &code) in states.iter_mut().zip(config.codes(side)) {
        state.set_code(side, code);
    }
    Ok(())
}

fn linkbudget_cmd<W: Write>(
    parsed: &ParsedScenario,
    config: ConfigChoice,
    out: &mut W,
) -> Result<i32> {
    let scenario = &parsed.scenario;
    let mut states = parsed.states();
    match config {
        ConfigChoice::Zero => {}
        ConfigChoice::Quantized => {
            apply_optimized(parsed, &mut states, Side::Transmit, false)?;
            apply_optimized(parsed, &mut states, Side::Reflect, false)?;
        }
        ConfigChoice::Greedy => {
            apply_optimized(parsed, &mut states, Side::Transmit, true)?;
            apply_optimized(parsed, &mut states, Side::Reflect, true)?;
        }
    }
    let result = if parsed.jitter_deg > 0.0 {
        jittered_link_budget(parsed, &states)?
    } else {
        link_budget(scenario, &states)?
    };
    let bound_t = scenario.tx_power / min_path_loss(scenario, &states, Side::Transmit)?;
    let bound_r = scenario.tx_power / min_path_loss(scenario, &states, Side::Reflect)?;
    writeln!(
        out,
        "link budget: N={}, f={:.6e} Hz, P_t={:.6e} W",
        scenario.n_elements(),
        scenario.carrier_frequency,
        scenario.tx_power
    )?;
    writeln!(
        out,
        "  transmit: P_r={:.6e} W ({:.2} dBm), path loss {:.2} dB, SNR {:.2} dB, coherent bound {:.6e} W",
        result.p_rt,
        dbm(result.p_rt),
        db(result.pl_t),
        db(result.snr_t),
        bound_t,
    )?;
    writeln!(
        out,
        "  reflect:  P_r={:.6e} W ({:.2} dBm), path loss {:.2} dB, SNR {:.2} dB, coherent bound {:.6e} W",
        result.p_rr,
        dbm(result.p_rr),
        db(result.pl_r),
        db(result.snr_r),
        bound_r,
    )?;
    Ok(0)
}

/// Link budget with the scenario's hardware phase error applied: each
/// side's codebook phases get a reproducible uniform jitter drawn from
/// the scenario seed.
fn jittered_link_budget(
    parsed: &ParsedScenario,
    states: &[ElementState],
) -> Result<star_ris_core::link::LinkResult> {
    use star_ris_core::element::jittered_phases;
    use star_ris_core::link::{received_power_with_phases, snr, LinkResult};
    let scenario = &parsed.scenario;
    let side_power = |side: Side, seed: u64| -> Result<f64> {
        let phases: Vec<f64> = states.iter().map(|s| s.phase(side)).collect();
        let phases = jittered_phases(&phases, parsed.jitter_deg, seed);
        received_power_with_phases(scenario, states, side, &phases)
    };
    let p_rt = side_power(Side::Transmit, parsed.seed)?;
    let p_rr = side_power(Side::Reflect, parsed.seed.wrapping_add(1))?;
    let pl = |p: f64| {
        if p == 0.0 {
            f64::INFINITY
        } else {
            scenario.tx_power / p
        }
    };
    Ok(LinkResult {
        p_rt,
        p_rr,
        pl_t: pl(p_rt),
        pl_r: pl(p_rr),
        snr_t: snr(p_rt, scenario.noise_power_t)?,
        snr_r: snr(p_rr, scenario.noise_power_r)?,
    })
}

fn steering(side: Side, zenith_deg: f64, azimuth_deg: f64) -> SteeringTarget {
    SteeringTarget::Angles {
        side,
        zenith: zenith_deg.to_radians(),
        azimuth: azimuth_deg.to_radians(),
    }
}

fn pattern_cmd<W: Write>(parsed: &ParsedScenario, args: &PatternArgs, out: &mut W) -> Result<i32> {
    let scenario = &parsed.scenario;
    let states = parsed.states();
    let side: Side = args.side.into();
    let bits = parsed.element_template.bits;
    let target = steering(side, args.steer_deg, args.steer_azimuth_deg);
    let qc = quantized_conjugate(scenario, &target, bits, &states)?;
    let config = match args.method {
        PatternMethod::Quantized => qc.config,
        PatternMethod::Greedy => {
            greedy_optimize(scenario, &target, bits, &states, &qc.config, 16)?.config
        }
    };
    let grid = uniform_grid_deg(args.from_deg, args.to_deg, args.step_deg)?;
    let samples = pattern_sweep(
        scenario,
        &config,
        side,
        &grid,
        args.cut_azimuth_deg,
        &states,
    )?;
    let format = match args.format {
        FormatChoice::Csv => ExportFormat::Csv,
        FormatChoice::Json => ExportFormat::Json,
    };
    export_pattern(&samples, &args.out, format)?;
    let peak = samples
        .iter()
        .max_by(|a, b| a.power_w.total_cmp(&b.power_w))
        .expect("nonempty sweep");
    writeln!(
        out,
        "pattern: {} side, steered {:.2} deg, {} samples -> {}",
        side.label(),
        args.steer_deg,
        samples.len(),
        args.out.display()
    )?;
    writeln!(
        out,
        "  peak {:.6e} W at {:.2} deg{}",
        peak.power_w,
        peak.zenith_deg,
        match beamform::half_power_beamwidth_deg(&samples) {
            Some(w) => format!(", 3 dB beamwidth {w:.2} deg"),
            None => String::new(),
        }
    )?;
    Ok(0)
}

fn optimize_cmd<W: Write>(
    parsed: &ParsedScenario,
    args: &OptimizeArgs,
    out: &mut W,
) -> Result<i32> {
    let scenario = &parsed.scenario;
    let states = parsed.states();
    let side: Side = args.side.into();
    let bits = parsed.element_template.bits;
    let target = match args.steer_deg {
        Some(z) => steering(side, z, args.steer_azimuth_deg),
        None => receiver_target(scenario, side),
    };

    let (label, power, bound, config): (&str, f64, f64, Option<PhaseConfiguration>) = match args
        .method
    {
        MethodChoice::Conjugate => {
            let phases = conjugate_phases(scenario, &target)?;
            let steered = scenario.with_receiver_position(side, target.resolve(scenario)?);
            let power =
                star_ris_core::link::received_power_with_phases(&steered, &states, side, &phases)?;
            let bound = steered.tx_power / min_path_loss(&steered, &states, side)?;
            ("continuous conjugate", power, bound, None)
        }
        MethodChoice::Quantized => {
            let r = quantized_conjugate(scenario, &target, bits, &states)?;
            ("quantized conjugate", r.power, r.bound, Some(r.config))
        }
        MethodChoice::Greedy => {
            if args.restarts {
                let r = greedy_multistart(scenario, &target, bits, &states, args.max_passes)?;
                ("greedy (restarted)", r.power, r.bound, Some(r.config))
            } else {
                let qc = quantized_conjugate(scenario, &target, bits, &states)?;
                let r = greedy_optimize(
                    scenario,
                    &target,
                    bits,
                    &states,
                    &qc.config,
                    args.max_passes,
                )?;
                ("greedy", r.power, r.bound, Some(r.config))
            }
        }
        MethodChoice::Exhaustive => {
            let r = exhaustive_search(scenario, &target, bits, &states, args.budget_bits)?;
            ("exhaustive", r.power, r.bound, Some(r.config))
        }
    };

    writeln!(
        out,
        "optimize: {label}, {} side, N={}, {bits}-bit codes",
        side.label(),
        scenario.n_elements()
    )?;
    writeln!(
        out,
        "  achieved {:.6e} W ({:.2} dBm), coherent bound {:.6e} W, gap {:.3} dB",
        power,
        dbm(power),
        bound,
        db(bound / power),
    )?;
    if let Some(config) = config {
        let codes = config.codes(side);
        let cols = scenario.layout.n_cols();
        for (row_idx, row) in codes.chunks(cols).enumerate() {
            let rendered: Vec<String> = row.iter().map(|c| format!("{c:x}")).collect();
            writeln!(out, "  codes row {}: {}", row_idx + 1, rendered.join(""))?;
        }
    }
    Ok(0)
}

fn sweep_cmd<W: Write>(parsed: &ParsedScenario, args: &SweepArgs, out: &mut W) -> Result<i32> {
    if args.steps < 2 {
        return Err(Error::InvalidParameter(
            "sweep needs at least 2 steps".into(),
        ));
    }
    if !(args.to >= args.from) {
        return Err(Error::InvalidParameter(format!(
            "sweep end {} below start {}",
            args.to, args.from
        )));
    }
    let scenario = &parsed.scenario;
    let side: Side = args.side.into();
    let bits = parsed.element_template.bits;
    let grid: Vec<f64> = (0..args.steps)
        .map(|i| args.from + (args.to - args.from) * i as f64 / (args.steps - 1) as f64)
        .collect();

    let mut rows: Vec<(f64, f64, f64)> = Vec::with_capacity(grid.len());
    match args.param {
        SweepParam::PaMa | SweepParam::BiasV => {
            // fixed beamformed configuration; the swept parameter never
            // moves the conjugate phases, only the per-element response
            let mut states = parsed.states();
            apply_optimized(parsed, &mut states, Side::Transmit, false)?;
            apply_optimized(parsed, &mut states, Side::Reflect, false)?;
            for &v in &grid {
                for s in states.iter_mut() {
                    match args.param {
                        SweepParam::PaMa => s.pa_current_ma = v,
                        SweepParam::BiasV => s.bias_voltage = v,
                        SweepParam::Zenith => unreachable!(),
                    }
                }
                let p_t = received_power(scenario, &states, Side::Transmit)?;
                let p_r = received_power(scenario, &states, Side::Reflect)?;
                rows.push((v, p_t, p_r));
            }
        }
        SweepParam::Zenith => {
            let states = parsed.states();
            for &z in &grid {
                let target = steering(side, z, 0.0);
                let qc = quantized_conjugate(scenario, &target, bits, &states)?;
                rows.push((z, qc.power, qc.bound));
            }
        }
    }

    let header = match args.param {
        SweepParam::PaMa => "pa_ma,power_t_w,power_r_w",
        SweepParam::BiasV => "bias_v,power_t_w,power_r_w",
        SweepParam::Zenith => "zenith_deg,power_w,bound_w",
    };
    let mut table = String::from(header);
    table.push('\n');
    for (v, a, b) in &rows {
        table.push_str(&format!("{v:.8e},{a:.8e},{b:.8e}\n"));
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, &table)?;
            writeln!(out, "sweep: {} rows -> {}", rows.len(), path.display())?;
        }
        None => {
            write!(out, "{table}")?;
        }
    }
    Ok(0)
}
