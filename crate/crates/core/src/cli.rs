//! Command-line front end: argument model, input parsing and CSV output.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 acceptance failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    closed_form_mse, crossover, empirical_mse, henzinger_bound, leading_constant, optimal_k,
    random_bits,
};
use crate::digits::Variant;
use crate::error::Error;
use crate::lowerbound::{packing_experiment, LowerBoundConfig};
use crate::mechanisms::{natural_horizon, Mechanism, MechanismConfig};
use crate::noise::{
    calibrate_gaussian, calibrate_l2_laplace, calibrate_pure_laplace, epsilon_of_laplace,
    Precondition,
};

pub const SEED_ENV: &str = "DP_SEED";

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(
    name = "contcount",
    version,
    about = "Differentially private continual counting"
)]
pub struct RunSpec {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Release private prefix sums of a bit stream.
    Run(RunArgs),
    /// Compare Monte-Carlo MSE with the closed form.
    Bench(BenchArgs),
    /// Noise scales for pure, ℓ2-Laplace and Gaussian calibration.
    Calibrate(CalibrateArgs),
    /// Leading constants and the Laplace/Gaussian crossover.
    Analyze(AnalyzeArgs),
    /// Simulate the random-input packing construction.
    Lowerbound(LowerboundArgs),
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct MechanismArgs {
    /// plain, offset-odd or offset-even
    #[arg(long, default_value = "offset-odd", value_parser = parse_variant)]
    pub variant: Variant,
    /// Tree arity.
    #[arg(long, default_value_t = 19)]
    pub k: u32,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Force zero noise (exact, NOT private; for testing only).
    #[arg(long)]
    pub zero_noise: bool,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub mechanism: MechanismArgs,
    /// Stream length; inferred from the input when omitted.
    #[arg(long, visible_alias = "T")]
    pub horizon: Option<u64>,
    /// Input file of '0'/'1' tokens separated by newlines or commas; '-' is stdin.
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also emit the true prefix sums (NOT private; for testing only).
    #[arg(long)]
    pub with_true: bool,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub mechanism: MechanismArgs,
    /// Tree height; the stream length is the largest the tree supports.
    #[arg(long, conflicts_with = "horizon")]
    pub height: Option<u32>,
    #[arg(long, visible_alias = "T")]
    pub horizon: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct CalibrateArgs {
    /// ℓ1 sensitivity.
    #[arg(long)]
    pub delta1: Option<f64>,
    /// ℓ2 sensitivity.
    #[arg(long)]
    pub delta2: Option<f64>,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    pub mode: AnalyzeMode,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum AnalyzeMode {
    /// Leading constant for every admissible arity, plus the argmin.
    Constants {
        #[arg(long, default_value = "offset-odd", value_parser = parse_variant)]
        variant: Variant,
        #[arg(long)]
        k_min: Option<u32>,
        #[arg(long, default_value_t = 99)]
        k_max: u32,
    },
    /// Pure versus Gaussian leading terms at one stream length.
    Crossover {
        #[arg(long, default_value = "offset-odd", value_parser = parse_variant)]
        variant: Variant,
        #[arg(long, default_value_t = 19)]
        k: u32,
        #[arg(long, visible_alias = "T", default_value_t = 1 << 20)]
        horizon: u64,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct LowerboundArgs {
    /// Stream length; a perfect square whose root is divisible by 4.
    #[arg(long, visible_alias = "T")]
    pub horizon: u64,
    /// Number of flipped bits (even, at most √T/4).
    #[arg(long)]
    pub k: u32,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mechanism under test.
    #[arg(long, default_value = "offset-odd", value_parser = parse_variant)]
    pub variant: Variant,
    /// Arity of the mechanism under test.
    #[arg(long, default_value_t = 19)]
    pub arity: u32,
    #[arg(long)]
    pub zero_noise: bool,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Acceptance(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Acceptance(m) => write!(f, "acceptance failure: {m}"),
        }
    }
}

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

/// Formats a float so that parsing it back yields the same bits.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x.fract() == 0.0 && a < 1e15 {
        format!("{x:.0}")
    } else if (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Streams bits out of `0`/`1` tokens separated by newlines or commas.
pub struct BitReader<R> {
    reader: R,
    line: String,
    line_no: usize,
    pending: Vec<u8>,
    done: bool,
}

impl<R: BufRead> BitReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            reader,
            line: String::new(),
            line_no: 0,
            pending: Vec::new(),
            done: false,
        }
    }

    fn refill(&mut self) -> crate::Result<()> {
        while self.pending.is_empty() {
            self.line.clear();
            let n = self
                .reader
                .read_line(&mut self.line)
                .map_err(|e| Error::Parse {
                    line: self.line_no + 1,
                    msg: e.to_string(),
                })?;
            if n == 0 {
                self.done = true;
                return Ok(());
            }
            self.line_no += 1;
            for token in self.line.split(',') {
                match token.trim() {
                    "" => {}
                    "0" => self.pending.push(0),
                    "1" => self.pending.push(1),
                    other => {
                        return Err(Error::Parse {
                            line: self.line_no,
                            msg: format!("expected '0' or '1', found '{}'", other.escape_default()),
                        })
                    }
                }
            }
            self.pending.reverse();
        }
        Ok(())
    }
}

impl<R: BufRead> Iterator for BitReader<R> {
    type Item = crate::Result<u8>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pending.is_empty() && !self.done {
            if let Err(e) = self.refill() {
                self.done = true;
                self.pending.clear();
                return Some(Err(e));
            }
        }
        self.pending.pop().map(Ok)
    }
}

/// Parses a whole in-memory input.
pub fn parse_bits(input: &[u8]) -> crate::Result<Vec<u8>> {
    BitReader::new(input).collect()
}

/// `--seed` wins over `DP_SEED`, which wins over 0.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        None => Ok(0),
    }
}

/// Process environment handed to [`execute`].
pub struct Context<'a> {
    pub env_seed: Option<String>,
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
}

pub fn execute(spec: &RunSpec, ctx: &mut Context<'_>) -> Result<(), CliError> {
    let env_seed = ctx.env_seed.as_deref();
    match &spec.command {
        Command::Run(a) => cmd_run(a, env_seed, ctx.stdin, ctx.stdout),
        Command::Bench(a) => cmd_bench(a, env_seed, ctx.stdout),
        Command::Calibrate(a) => cmd_calibrate(a, ctx.stdout),
        Command::Analyze(a) => cmd_analyze(a, ctx.stdout),
        Command::Lowerbound(a) => cmd_lowerbound(a, env_seed, ctx.stdout),
    }
}

/// Parses `args` and runs the command against the real process streams.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let spec = match RunSpec::try_parse_from(args) {
        Ok(s) => s,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdin = io::stdin();
    let mut stdin = stdin.lock();
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    let mut ctx = Context {
        env_seed: std::env::var(SEED_ENV).ok(),
        stdin: &mut stdin,
        stdout: &mut stdout,
    };
    match execute(&spec, &mut ctx) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("contcount: {e}");
            e.exit_code()
        }
    }
}

fn write_row(out: &mut dyn Write, row: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    out.write_fmt(row)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(data)
}

fn mechanism_config(
    m: &MechanismArgs,
    horizon: u64,
    seed: u64,
) -> Result<MechanismConfig, CliError> {
    Ok(MechanismConfig::new(m.variant, m.k, horizon, m.epsilon)
        .map_err(usage)?
        .seed(seed)
        .zero_noise(m.zero_noise))
}

fn header_comments(out: &mut dyn Write, cfg: &MechanismConfig) -> Result<(), CliError> {
    write_row(out, format_args!("# seed={}", cfg.seed))?;
    write_row(
        out,
        format_args!(
            "# variant={} k={} h={} T={} epsilon={} scale={}",
            cfg.variant,
            cfg.k,
            cfg.height,
            cfg.horizon,
            fmt_f64(cfg.epsilon),
            fmt_f64(cfg.noise_scale())
        ),
    )?;
    if cfg.zero_noise {
        write_row(
            out,
            format_args!("# zero-noise: outputs are exact and NOT private"),
        )?;
    }
    Ok(())
}

pub fn cmd_run(
    args: &RunArgs,
    env_seed: Option<&str>,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let seed = resolve_seed(args.mechanism.seed, env_seed)?;
    let from_stdin = args.input.as_os_str() == "-";
    let open = || -> Result<BufReader<File>, CliError> {
        File::open(&args.input)
            .map(BufReader::new)
            .map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))
    };

    // Without --horizon the stream length has to be known up front: files are
    // counted in a first pass, stdin is buffered.
    let mut buffered: Option<Vec<u8>> = None;
    let horizon = match args.horizon {
        Some(t) => t,
        None if from_stdin => {
            let bits = BitReader::new(&mut *stdin)
                .collect::<crate::Result<Vec<u8>>>()
                .map_err(data)?;
            let n = bits.len() as u64;
            buffered = Some(bits);
            n
        }
        None => {
            let mut n = 0u64;
            for bit in BitReader::new(open()?) {
                bit.map_err(data)?;
                n += 1;
            }
            n
        }
    };
    if horizon == 0 {
        return Err(CliError::Data("input holds no bits".into()));
    }
    let cfg = mechanism_config(&args.mechanism, horizon, seed)?;
    let mut mech = Mechanism::new(cfg.clone()).map_err(usage)?;

    let mut file_out;
    let out: &mut dyn Write = match &args.output {
        Some(p) => {
            file_out =
                File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            &mut file_out
        }
        None => stdout,
    };
    header_comments(out, &cfg)?;
    if args.with_true {
        write_row(
            out,
            format_args!("# with-true: true prefix sums included, NOT private"),
        )?;
        write_row(out, format_args!("t,estimate,true"))?;
    } else {
        write_row(out, format_args!("t,estimate"))?;
    }

    let bits: Box<dyn Iterator<Item = crate::Result<u8>> + '_> = match buffered {
        Some(v) => Box::new(v.into_iter().map(Ok)),
        None if from_stdin => Box::new(BitReader::new(stdin)),
        None => Box::new(BitReader::new(open()?)),
    };
    let mut truth = 0u64;
    let mut t = 0u64;
    for bit in bits {
        let bit = bit.map_err(data)?;
        if t == horizon {
            return Err(CliError::Data(format!(
                "input holds more than T={horizon} bits"
            )));
        }
        let est = mech.feed(bit).map_err(data)?;
        t += 1;
        truth += bit as u64;
        if args.with_true {
            write_row(out, format_args!("{t},{},{truth}", fmt_f64(est)))?;
        } else {
            write_row(out, format_args!("{t},{}", fmt_f64(est)))?;
        }
        out.flush().map_err(data)?;
    }
    if t < horizon {
        return Err(CliError::Data(format!(
            "input ended after {t} of T={horizon} bits"
        )));
    }
    Ok(())
}

pub fn cmd_bench(
    args: &BenchArgs,
    env_seed: Option<&str>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let m = &args.mechanism;
    let seed = resolve_seed(m.seed, env_seed)?;
    let horizon = match (args.height, args.horizon) {
        (Some(h), None) => natural_horizon(m.variant, m.k, h).map_err(usage)?,
        (None, Some(t)) => t,
        _ => {
            return Err(CliError::Usage(
                "bench needs exactly one of --height or --horizon".into(),
            ))
        }
    };
    let cfg = mechanism_config(m, horizon, seed)?;
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let input = random_bits(horizon as usize, seed);
    let report = empirical_mse(&cfg, &input, args.trials, seed).map_err(usage)?;
    header_comments(out, &cfg)?;
    if natural_horizon(cfg.variant, cfg.k, cfg.height).map_err(usage)? != horizon {
        write_row(
            out,
            format_args!(
                "# closed_form refers to the full tree of height {}",
                cfg.height
            ),
        )?;
    }
    write_row(
        out,
        format_args!("variant,k,h,T,epsilon,trials,empirical_mse,se,closed_form"),
    )?;
    let emp = report.empirical_mse.unwrap_or(f64::NAN);
    let se = report.standard_error.unwrap_or(f64::NAN);
    write_row(
        out,
        format_args!(
            "{},{},{},{},{},{},{},{},{}",
            report.variant,
            report.k,
            report.h,
            report.horizon,
            fmt_f64(report.epsilon),
            report.trials,
            fmt_f64(emp),
            fmt_f64(se),
            fmt_f64(report.closed_form_mse)
        ),
    )?;
    if report.within_tolerance() {
        Ok(())
    } else {
        Err(CliError::Acceptance(format!(
            "empirical MSE {emp} differs from closed form {} by more than max(3 SE, 5%)",
            report.closed_form_mse
        )))
    }
}

pub fn cmd_calibrate(args: &CalibrateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    let pure = args
        .delta1
        .map(|d1| calibrate_pure_laplace(d1, args.epsilon))
        .transpose()
        .map_err(usage)?;
    if let Some(c) = pure {
        rows.push((
            "pure-laplace".to_string(),
            c.scale_or_sigma,
            c.epsilon,
            c.delta,
            c.variance(),
        ));
    }
    if let (Some(d2), Some(delta)) = (args.delta2, args.delta) {
        for c in [
            calibrate_l2_laplace(d2, args.epsilon, delta).map_err(usage)?,
            calibrate_gaussian(d2, args.epsilon, delta).map_err(usage)?,
        ] {
            rows.push((
                c.regime.name().to_string(),
                c.scale_or_sigma,
                c.epsilon,
                c.delta,
                c.variance(),
            ));
        }
    }
    if let (Some(c), Some(d1), Some(d2), Some(delta)) = (pure, args.delta1, args.delta2, args.delta)
    {
        let lam = c.scale_or_sigma;
        let e = epsilon_of_laplace(d1, d2, lam, delta, Precondition::Flag).map_err(usage)?;
        rows.push((
            format!("laplace-min-{}", e.branch.name()),
            lam,
            e.epsilon,
            delta,
            2.0 * lam * lam,
        ));
        if e.below_scale_floor {
            notes.push(format!(
                "# laplace-min: lambda={} <= delta1={d1}, outside the stated precondition",
                fmt_f64(lam)
            ));
        }
        if e.out_of_regime {
            notes.push("# laplace-min: epsilon >= 1, outside the covered regime".to_string());
        }
    }
    if rows.is_empty() {
        return Err(CliError::Usage(
            "calibrate needs --delta1, or --delta2 together with --delta".into(),
        ));
    }
    for n in &notes {
        write_row(out, format_args!("{n}"))?;
    }
    write_row(
        out,
        format_args!("regime,scale_or_sigma,epsilon,delta,variance"),
    )?;
    for (regime, s, e, d, v) in rows {
        write_row(
            out,
            format_args!(
                "{regime},{},{},{},{}",
                fmt_f64(s),
                fmt_f64(e),
                fmt_f64(d),
                fmt_f64(v)
            ),
        )?;
    }
    Ok(())
}

pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    match &args.mode {
        AnalyzeMode::Constants {
            variant,
            k_min,
            k_max,
        } => {
            let k_min = k_min.unwrap_or(variant.min_base());
            let (best, best_c) = optimal_k(*variant, k_min, *k_max).map_err(usage)?;
            write_row(
                out,
                format_args!("# argmin k={best} constant={}", fmt_f64(best_c)),
            )?;
            write_row(out, format_args!("variant,k,constant,argmin"))?;
            for k in (k_min..=*k_max).filter(|&k| variant.admits(k)) {
                let c = leading_constant(*variant, k).map_err(usage)?;
                write_row(
                    out,
                    format_args!("{variant},{k},{},{}", fmt_f64(c), (k == best) as u8),
                )?;
            }
        }
        AnalyzeMode::Crossover {
            variant,
            k,
            horizon,
            epsilon,
            delta,
        } => {
            let r = crossover(*variant, *k).map_err(usage)?;
            let t = *horizon as f64;
            let hz = henzinger_bound(t, *epsilon, *delta).map_err(usage)?;
            let cfg = MechanismConfig::new(*variant, *k, *horizon, *epsilon).map_err(usage)?;
            let closed = closed_form_mse(*variant, *k, cfg.height, *epsilon).map_err(usage)?;
            write_row(
                out,
                format_args!("variant,k,B_eps,B_eps_delta,exponent,T,delta_threshold,henzinger_bound,pure_leading,pure_closed_form"),
            )?;
            write_row(
                out,
                format_args!(
                    "{variant},{k},{},{},{},{horizon},{},{},{},{}",
                    fmt_f64(r.b_eps),
                    fmt_f64(r.b_eps_delta),
                    fmt_f64(r.exponent),
                    fmt_f64(r.delta_threshold(t)),
                    fmt_f64(hz),
                    fmt_f64(r.pure_leading(t, *epsilon)),
                    fmt_f64(closed)
                ),
            )?;
        }
    }
    Ok(())
}

pub fn cmd_lowerbound(
    args: &LowerboundArgs,
    env_seed: Option<&str>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed, env_seed)?;
    let cfg = LowerBoundConfig::new(args.horizon, args.k, args.epsilon, args.trials, seed)
        .map_err(usage)?;
    let (variant, arity, horizon, eps, zero) = (
        args.variant,
        args.arity,
        args.horizon,
        args.epsilon,
        args.zero_noise,
    );
    // fail early on a bad mechanism configuration rather than inside the workers
    MechanismConfig::new(variant, arity, horizon, eps).map_err(usage)?;
    let factory = move |s: u64| {
        Mechanism::new(
            MechanismConfig::new(variant, arity, horizon, eps)?
                .seed(s)
                .zero_noise(zero),
        )
    };
    let r = packing_experiment(&cfg, &factory).map_err(data)?;

    write_row(out, format_args!("# seed={seed}"))?;
    write_row(
        out,
        format_args!(
            "# T={} B={} m={} k={} alpha={} epsilon={} trials={} mechanism={variant} arity={arity}",
            cfg.horizon,
            cfg.block,
            cfg.blocks,
            cfg.flips,
            fmt_f64(cfg.alpha),
            fmt_f64(cfg.epsilon),
            cfg.trials
        ),
    )?;
    if zero {
        write_row(
            out,
            format_args!("# zero-noise: mechanism is exact and NOT private"),
        )?;
    }
    write_row(
        out,
        format_args!(
            "# finite-T bounds asserted only for T >= 400 (this run: {})",
            if cfg.horizon >= 400 {
                "inside"
            } else {
                "outside"
            }
        ),
    )?;
    write_row(
        out,
        format_args!("# pr_err_within_alpha={}", fmt_f64(r.pr_err_within_alpha)),
    )?;
    write_row(
        out,
        format_args!(
            "# base_tv_bound={} derived_tv_bound={}",
            fmt_f64(r.base_tv_bound),
            fmt_f64(r.derived_tv_bound)
        ),
    )?;
    write_row(
        out,
        format_args!(
            "# packing m*exp(-k*eps)/2={} k_threshold=ln(m/2)/eps={}",
            fmt_f64(r.packing_value),
            fmt_f64(r.flips_threshold)
        ),
    )?;
    write_row(
        out,
        format_args!("i,pr_Ei,se,sum_Ej_null,tv_exact,tv_bound"),
    )?;
    for b in &r.per_block {
        write_row(
            out,
            format_args!(
                "{},{},{},{},{},{}",
                b.block,
                fmt_f64(b.pr_event),
                fmt_f64(b.se),
                fmt_f64(r.sum_null),
                fmt_f64(r.tv_exact),
                fmt_f64(r.tv_bound)
            ),
        )?;
    }
    Ok(())
}
