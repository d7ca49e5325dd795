//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification or model failure, 2 usage error.

use std::fs;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{encode_nonsystematic, encode_systematic, CoinFlip, ScDecoder, SoftWord};
use crate::construction::{
    brick_wall, verify_column_weights, verify_corollary2, verify_gp_equivalence, verify_theorem1,
    ChannelDesign, CheckReport, PolarCode,
};
use crate::error::PolarError;
use crate::error_model::{
    build_composite, default_beta, exact_ber_small, first_error_histogram, gamma_monte_carlo,
    Boundary, GainReport, ModelWarning, GAIN_CSV_HEADER,
};
use crate::gf2::BitWord;
use crate::sim::{run_ber_point, ChannelSpec, Codecs, SimConfig, BER_CSV_HEADER};

/// Largest `n` accepted by the exact oracle subcommand.
pub const ORACLE_MAX_N: u32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "syspolar",
    version,
    about = "Systematic and non-systematic polar codes",
    args_override_self = true
)]
pub struct Cli {
    /// key=value file whose entries act as defaults for the subcommand flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a code and print its information set.
    Construct(ConstructArgs),
    /// Encode information bits.
    Encode(EncodeArgs),
    /// Decode one observation.
    Decode(DecodeArgs),
    /// Monte Carlo BER over a channel sweep.
    Simulate(SimulateArgs),
    /// Composite-model systematic gain.
    Gain(GainArgs),
    /// Histogram of the first wrong information bit.
    FirstError(FirstErrorArgs),
    /// Structural checks over a grid of codes.
    Verify(VerifyArgs),
    /// Exact BER by exhaustive enumeration.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct CodeArgs {
    /// Code file written by `construct --out`.
    #[arg(long, value_name = "PATH")]
    pub code: Option<PathBuf>,
    /// log2 of the block length.
    #[arg(long)]
    pub n: Option<u32>,
    /// Code rate; K = round(rate·N).
    #[arg(long, conflicts_with = "k")]
    pub rate: Option<f64>,
    /// Number of information bits.
    #[arg(long)]
    pub k: Option<usize>,
    /// Design channel, `bec:EPS` or `awgn:SNRDB`.
    #[arg(long, value_name = "KIND:PARAM")]
    pub channel: Option<ChannelDesign>,
    /// Shorthand for `--channel bec:EPS`.
    #[arg(long, conflicts_with = "channel")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CodecArg {
    Nonsys,
    Sys,
    Both,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub alpha: f64,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    /// Information bits as a 0/1 string of length K.
    #[arg(long)]
    pub info: String,
    /// Frozen bits as a 0/1 string of length N − K; zeros when omitted.
    #[arg(long)]
    pub frozen: Option<String>,
    #[arg(long, value_enum, default_value_t = CodecArg::Nonsys)]
    pub codec: CodecArg,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    /// Observation: `0`/`1`/`?` symbols or whitespace-separated LLRs. Read
    /// from stdin when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub obs: Option<String>,
    #[arg(long)]
    pub frozen: Option<String>,
    #[arg(long, value_enum, default_value_t = CodecArg::Nonsys)]
    pub codec: CodecArg,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    /// `KIND:START:STOP:STEP` or `KIND:V1,V2,...`.
    #[arg(long, allow_hyphen_values = true)]
    pub sweep: String,
    #[arg(long, default_value_t = 20_000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = CodecArg::Both)]
    pub codec: CodecArg,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GainArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    /// Coupling coefficient; defaults to 0.3 on bad channels and 0.5 otherwise.
    #[arg(long, conflicts_with = "use_bhattacharyya_boundary")]
    pub beta: Option<f64>,
    /// End the independent region at the last position with Z > alpha.
    #[arg(long)]
    pub use_bhattacharyya_boundary: bool,
    #[arg(long, default_value_t = 0.5)]
    pub p0: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10)]
    pub realizations: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FirstErrorArgs {
    #[command(flatten)]
    pub code: CodeArgs,
    /// Transmission channel; defaults to the design channel.
    #[arg(long, value_name = "KIND:PARAM")]
    pub transmit: Option<ChannelDesign>,
    #[arg(long, default_value_t = 20_000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub alpha: f64,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Range `LO..HI` (inclusive) or a single value.
    #[arg(long, default_value = "0..10")]
    pub n: String,
    #[arg(long, default_value = "0.25,0.5,0.75")]
    pub rates: String,
    /// Sweep syntax, BEC only.
    #[arg(long, default_value = "bec:0.1,0.2,0.3,0.4,0.5")]
    pub channel_grid: String,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub code: CodeArgs,
}

/// Failure categories mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl From<PolarError> for CliError {
    fn from(e: PolarError) -> Self {
        match e {
            PolarError::EmptyBrickWall { .. }
            | PolarError::ZeroDenominator
            | PolarError::ContradictoryObservation { .. }
            | PolarError::Io(_) => CliError::Failure(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code. Diagnostics go to `err`.
pub fn run<W: Write, E: Write>(args: Vec<String>, out: &mut W, err: &mut E) -> i32 {
    let args = match apply_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {}", message(&e));
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", message(&e));
            e.exit_code()
        }
    }
}

fn message(e: &CliError) -> &str {
    match e {
        CliError::Usage(m) | CliError::Failure(m) => m,
    }
}

/// Moves `--config PATH` out of `args` and inserts its entries as flags right
/// after the subcommand name, so flags given on the command line win.
pub fn apply_config(args: Vec<String>) -> CliResult<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        if a == "--config" {
            path = Some(iter.next().ok_or_else(|| usage("--config needs a path"))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text =
        fs::read_to_string(&path).map_err(|e| usage(format!("cannot read config {path}: {e}")))?;
    let Some(sub_at) = rest
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|p| p + 1)
    else {
        return Ok(rest);
    };
    let command = Cli::command();
    let sub = command
        .find_subcommand(&rest[sub_at])
        .ok_or_else(|| usage(format!("unknown subcommand `{}`", rest[sub_at])))?;
    let mut injected = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{path}:{}: expected key=value", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| usage(format!("{path}:{}: unknown key `{key}`", lineno + 1)))?;
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}={value}"));
        } else {
            match value {
                "true" | "1" | "yes" => injected.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                other => {
                    return Err(usage(format!(
                        "{path}:{}: `{key}` expects true/false, got `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
    }
    rest.splice(sub_at + 1..sub_at + 1, injected);
    Ok(rest)
}

fn dispatch<W: Write, E: Write>(command: Command, out: &mut W, err: &mut E) -> CliResult<i32> {
    match command {
        Command::Construct(a) => construct(a, out),
        Command::Encode(a) => encode(a, out),
        Command::Decode(a) => decode(a, out, err),
        Command::Simulate(a) => simulate(a, out, err),
        Command::Gain(a) => gain(a, out, err),
        Command::FirstError(a) => first_error(a, out, err),
        Command::Verify(a) => verify(a, out),
        Command::Oracle(a) => oracle(a, out),
    }
}

impl CodeArgs {
    fn design(&self) -> Option<ChannelDesign> {
        self.channel.or(self.eps.map(ChannelDesign::Bec))
    }

    fn info_length(&self, n: u32) -> CliResult<usize> {
        let len = 1usize << n;
        match (self.k, self.rate) {
            (Some(k), _) => Ok(k),
            (None, Some(rate)) => {
                if !(rate > 0.0 && rate <= 1.0) {
                    return Err(usage(format!("rate {rate} outside (0, 1]")));
                }
                Ok(((len as f64 * rate).round() as usize).max(1))
            }
            (None, None) => Err(usage("give --rate or --k")),
        }
    }

    /// The code from `--code`, or built from `--n`, `--rate`/`--k` and the
    /// design channel (`fallback` when none was given).
    fn resolve(&self, fallback: Option<ChannelDesign>) -> CliResult<PolarCode> {
        if let Some(path) = &self.code {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Failure(format!("cannot read code file {}: {e}", path.display()))
            })?;
            return Ok(PolarCode::from_text(&text)?);
        }
        let n = self.n.ok_or_else(|| usage("give --code or --n"))?;
        if n > 30 {
            return Err(usage(format!("n = {n} is too large")));
        }
        let k = self.info_length(n)?;
        let design = self
            .design()
            .or(fallback)
            .ok_or_else(|| usage("give --channel or --eps"))?;
        Ok(design.build(n, k)?)
    }
}

fn open_output(path: &Option<PathBuf>) -> CliResult<Option<fs::File>> {
    path.as_ref()
        .map(|p| {
            fs::File::create(p)
                .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", p.display())))
        })
        .transpose()
}

fn emit<W: Write>(path: &Option<PathBuf>, out: &mut W, text: &str) -> CliResult {
    match open_output(path)? {
        Some(mut f) => f.write_all(text.as_bytes())?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn resolve_seed<E: Write>(seed: Option<u64>, err: &mut E) -> CliResult<u64> {
    Ok(match seed {
        Some(s) => s,
        None => {
            let s = rand::rng().random::<u64>();
            writeln!(err, "seed: {s}")?;
            s
        }
    })
}

fn resolve_workers(workers: Option<usize>) -> CliResult<usize> {
    match workers {
        Some(0) => Err(usage("--workers must be at least 1")),
        Some(w) => Ok(w),
        None => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}

fn join(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn construct<W: Write>(a: ConstructArgs, out: &mut W) -> CliResult<i32> {
    let code = a.code.resolve(None)?;
    if let Some(path) = &a.out {
        fs::write(path, code.to_text())
            .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
    }
    writeln!(out, "N = {}", code.len())?;
    writeln!(out, "K = {}", code.k())?;
    writeln!(out, "design = {}", code.design())?;
    writeln!(out, "A = {}", join(code.info_set()))?;
    match brick_wall(&code, a.alpha) {
        Ok(wall) => {
            writeln!(out, "I_1 = {}", wall.first())?;
            writeln!(out, "|I| = {}", wall.len())?;
        }
        Err(PolarError::EmptyBrickWall { .. }) => {
            writeln!(out, "I_1 = none")?;
            writeln!(out, "|I| = 0")?;
        }
        Err(e) => return Err(e.into()),
    }
    Ok(0)
}

fn frozen_bits(code: &PolarCode, frozen: &Option<String>) -> CliResult<BitWord> {
    let bits = match frozen {
        Some(s) => BitWord::parse(s)?,
        None => BitWord::zeros(code.len() - code.k()),
    };
    if bits.len() != code.len() - code.k() {
        return Err(usage(format!(
            "frozen bits need length {}",
            code.len() - code.k()
        )));
    }
    Ok(bits)
}

fn encode<W: Write>(a: EncodeArgs, out: &mut W) -> CliResult<i32> {
    let code = a.code.resolve(None)?;
    let info = BitWord::parse(&a.info)?;
    let frozen = frozen_bits(&code, &a.frozen)?;
    let x = match a.codec {
        CodecArg::Nonsys => encode_nonsystematic(&code, &info, &frozen)?,
        CodecArg::Sys => encode_systematic(&code, &info, &frozen)?,
        CodecArg::Both => return Err(usage("encode takes --codec nonsys or sys")),
    };
    writeln!(out, "{x}")?;
    Ok(0)
}

fn decode<W: Write, E: Write>(a: DecodeArgs, out: &mut W, err: &mut E) -> CliResult<i32> {
    let code = a.code.resolve(None)?;
    let text = match a.obs {
        Some(t) => t,
        None => {
            let mut t = String::new();
            std::io::stdin().read_to_string(&mut t)?;
            t
        }
    };
    let obs = SoftWord::parse(&text)?;
    let frozen = frozen_bits(&code, &a.frozen)?;
    let seed = resolve_seed(a.seed, err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut decoder = ScDecoder::new(&code);
    let result = match a.codec {
        CodecArg::Nonsys => decoder.decode(&obs, &frozen, &mut CoinFlip(&mut rng))?,
        CodecArg::Sys => decoder.decode_systematic(&obs, &frozen, &mut CoinFlip(&mut rng))?,
        CodecArg::Both => return Err(usage("decode takes --codec nonsys or sys")),
    };
    writeln!(out, "{}", result.info_bits)?;
    writeln!(err, "guesses: {}", result.guess_count)?;
    Ok(0)
}

/// One point of a channel sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepPoint {
    Bec(f64),
    Awgn(f64),
}

impl SweepPoint {
    fn design(self) -> ChannelDesign {
        match self {
            SweepPoint::Bec(e) => ChannelDesign::Bec(e),
            SweepPoint::Awgn(s) => ChannelDesign::Awgn(s),
        }
    }

    fn channel(self, rate: f64) -> CliResult<ChannelSpec> {
        Ok(match self {
            SweepPoint::Bec(e) => ChannelSpec::bec(e)?,
            SweepPoint::Awgn(s) => ChannelSpec::awgn(s, rate)?,
        })
    }
}

/// Parses `KIND:START:STOP:STEP` (inclusive) or `KIND:V1,V2,...`.
pub fn parse_sweep(text: &str) -> CliResult<Vec<SweepPoint>> {
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| usage(format!("malformed sweep `{text}`")))?;
    let make: fn(f64) -> SweepPoint = match kind.to_ascii_lowercase().as_str() {
        "bec" => SweepPoint::Bec,
        "awgn" | "biawgn" => SweepPoint::Awgn,
        other => return Err(usage(format!("unknown channel kind `{other}` in sweep"))),
    };
    let number = |s: &str| -> CliResult<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| usage(format!("malformed sweep value `{s}`")))
    };
    let values: Vec<f64> = if rest.contains(':') {
        let parts: Vec<&str> = rest.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(usage(format!(
                "range sweep needs START:STOP:STEP, got `{rest}`"
            )));
        };
        let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
        if step <= 0.0 || stop < start {
            return Err(usage(format!("empty or backwards sweep `{text}`")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        rest.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(number)
            .collect::<CliResult<_>>()?
    };
    if values.is_empty() {
        return Err(usage(format!("sweep `{text}` has no points")));
    }
    Ok(values.into_iter().map(make).collect())
}

fn simulate<W: Write, E: Write>(a: SimulateArgs, out: &mut W, err: &mut E) -> CliResult<i32> {
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let points = parse_sweep(&a.sweep)?;
    let fixed = match &a.code.code {
        Some(_) => Some(a.code.resolve(None)?),
        None => None,
    };
    let workers = resolve_workers(a.workers)?;
    let seed = resolve_seed(a.seed, err)?;
    let config = SimConfig {
        trials: a.trials,
        master_seed: seed,
        workers,
        codecs: match a.codec {
            CodecArg::Nonsys => Codecs::NonSystematic,
            CodecArg::Sys => Codecs::Systematic,
            CodecArg::Both => Codecs::Both,
        },
    };
    let mut text = format!(
        "# schema=1 seed={seed} trials={}\n{BER_CSV_HEADER}\n",
        a.trials
    );
    for point in points {
        let code = match &fixed {
            Some(c) => c.clone(),
            None => a.code.resolve(Some(point.design()))?,
        };
        let record = run_ber_point(&code, point.channel(code.rate())?, &config)?;
        text.push_str(&record.csv_row());
        text.push('\n');
    }
    emit(&a.out, out, &text)?;
    Ok(0)
}

fn gain<W: Write, E: Write>(a: GainArgs, out: &mut W, err: &mut E) -> CliResult<i32> {
    let code = a.code.resolve(None)?;
    let boundary = if a.use_bhattacharyya_boundary {
        Boundary::Bhattacharyya
    } else {
        Boundary::Coupling(a.beta.unwrap_or_else(|| default_beta(code.design())))
    };
    let model = build_composite(&code, a.alpha, boundary, a.p0)?;
    let seed = resolve_seed(a.seed, err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma_mc = gamma_monte_carlo(&model, &code, a.realizations, &mut rng)?;
    let report = GainReport::new(&code, &model, gamma_mc);
    emit(
        &a.out,
        out,
        &format!(
            "# schema=1 seed={seed}\n{GAIN_CSV_HEADER}\n{}\n",
            report.csv_row()
        ),
    )?;
    for w in &model.warnings {
        let text = match w {
            ModelWarning::AllCoupled => "S1 is empty; every bit of S is coupled and gamma = |S2|",
            ModelWarning::NoCoupledRegion => "S2 is empty; the model predicts gamma < 1",
        };
        writeln!(err, "warning: degenerate composite model: {text}")?;
    }
    Ok(if model.is_degenerate() { 1 } else { 0 })
}

fn first_error<W: Write, E: Write>(a: FirstErrorArgs, out: &mut W, err: &mut E) -> CliResult<i32> {
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let code = a.code.resolve(None)?;
    let channel = match a.transmit.or(a.code.design()) {
        Some(ChannelDesign::Bec(e)) => ChannelSpec::bec(e)?,
        Some(ChannelDesign::Awgn(s)) => ChannelSpec::awgn(s, code.rate())?,
        None => match code.design() {
            crate::construction::Design::Bec { eps } => ChannelSpec::bec(eps)?,
            crate::construction::Design::Awgn { snr_db, .. } => {
                ChannelSpec::awgn(snr_db, code.rate())?
            }
        },
    };
    let workers = resolve_workers(a.workers)?;
    let seed = resolve_seed(a.seed, err)?;
    let report = first_error_histogram(&code, channel, a.trials, seed, workers)?;
    let mut text = format!(
        "# schema=1 seed={seed} trials={} no_error={}\nrank,position,z,count,frequency\n",
        a.trials, report.distribution.no_error
    );
    let probs = report.distribution.probs();
    for (rank, ((&pos, &z), (&count, &p))) in report
        .positions
        .iter()
        .zip(&report.z_values)
        .zip(report.distribution.counts.iter().zip(&probs))
        .enumerate()
    {
        text.push_str(&format!("{},{pos},{z:.6e},{count},{p:.6e}\n", rank + 1));
    }
    emit(&a.out, out, &text)?;
    writeln!(
        err,
        "mass on Z > {}: {:.4}",
        a.alpha,
        report.mass_above(a.alpha)
    )?;
    writeln!(
        err,
        "rank correlation with Z: {:.4}",
        report.rank_correlation()
    )?;
    Ok(0)
}

/// Parses `LO..HI` (inclusive) or a single integer.
pub fn parse_n_range(text: &str) -> CliResult<Vec<u32>> {
    let bad = || usage(format!("malformed n range `{text}`"));
    let (lo, hi) = match text.split_once("..") {
        Some((lo, hi)) => (
            lo.trim().parse::<u32>().map_err(|_| bad())?,
            hi.trim()
                .trim_start_matches('=')
                .parse::<u32>()
                .map_err(|_| bad())?,
        ),
        None => {
            let v = text.trim().parse::<u32>().map_err(|_| bad())?;
            (v, v)
        }
    };
    if hi < lo {
        return Err(usage(format!("empty n range `{text}`")));
    }
    if hi > 20 {
        return Err(usage(format!("n range `{text}` exceeds 20")));
    }
    Ok((lo..=hi).collect())
}

fn verify<W: Write>(a: VerifyArgs, out: &mut W) -> CliResult<i32> {
    let ns = parse_n_range(&a.n)?;
    let rates: Vec<f64> = a
        .rates
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|r| *r > 0.0 && *r <= 1.0)
                .ok_or_else(|| usage(format!("malformed rate `{s}`")))
        })
        .collect::<CliResult<_>>()?;
    if rates.is_empty() {
        return Err(usage("no rates given"));
    }
    let grid = parse_sweep(&a.channel_grid)?;
    let eps: Vec<f64> = grid
        .iter()
        .map(|p| match p {
            SweepPoint::Bec(e) => Ok(*e),
            SweepPoint::Awgn(_) => Err(usage("verify takes a BEC channel grid")),
        })
        .collect::<CliResult<_>>()?;

    let mut failures = 0;
    let mut totals: Vec<(&'static str, usize, usize)> = Vec::new();
    let mut tally = |report: CheckReport, out: &mut W| -> CliResult {
        match totals.iter_mut().find(|t| t.0 == report.name) {
            Some(t) => {
                t.1 += 1;
                t.2 += report.checked;
            }
            None => totals.push((report.name, 1, report.checked)),
        }
        if !report.passed() {
            failures += 1;
            writeln!(out, "FAIL {report}")?;
        }
        Ok(())
    };
    for &n in &ns {
        tally(verify_column_weights(n)?, out)?;
        for &rate in &rates {
            let k = (((1usize << n) as f64 * rate).round() as usize).max(1);
            for &e in &eps {
                let code = PolarCode::bec(n, e, k)?;
                tally(verify_theorem1(&code), out)?;
                tally(verify_corollary2(&code), out)?;
                tally(verify_gp_equivalence(n, code.info_set())?, out)?;
            }
        }
    }
    for (name, runs, checked) in &totals {
        writeln!(out, "{name}: {runs} runs, {checked} entries checked")?;
    }
    if failures == 0 {
        writeln!(out, "all checks passed")?;
        Ok(0)
    } else {
        writeln!(out, "{failures} checks failed")?;
        Ok(1)
    }
}

fn oracle<W: Write>(a: OracleArgs, out: &mut W) -> CliResult<i32> {
    if let Some(n) = a.code.n {
        if n > ORACLE_MAX_N {
            return Err(usage(format!("oracle is limited to n <= {ORACLE_MAX_N}")));
        }
    }
    let code = a.code.resolve(None)?;
    if code.n() > ORACLE_MAX_N {
        return Err(usage(format!("oracle is limited to n <= {ORACLE_MAX_N}")));
    }
    let eps = match (a.code.design(), code.design()) {
        (Some(ChannelDesign::Bec(e)), _) => e,
        (None, crate::construction::Design::Bec { eps }) => eps,
        _ => return Err(usage("oracle needs a BEC channel")),
    };
    let (pb, psys) = exact_ber_small(&code, eps)?;
    writeln!(out, "# schema=1\nN,K,eps,p_b,p_sys_b")?;
    writeln!(out, "{},{},{eps},{pb:.12},{psys:.12}", code.len(), code.k())?;
    Ok(0)
}
