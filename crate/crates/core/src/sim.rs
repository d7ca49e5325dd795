//! Monte Carlo BER simulation with per-trial deterministic random streams.
//!
//! Trial `t` under master seed `s` draws everything from ChaCha8 seeded with
//! `mix64(s ^ t)`; channel noise, message bits and each decoder's coin flips
//! use separate streams of that generator. Results are independent of the
//! worker count.

use std::fmt;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::codec::{
    encode_nonsystematic, encode_systematic, CoinFlip, ScDecoder, SoftWord, Ternary,
};
use crate::construction::PolarCode;
use crate::error::{PolarError, Result};
use crate::error_model::{build_composite, gamma_closed_form, random_bits, Boundary};
use crate::gf2::BitWord;

const CHUNK: u64 = 64;

/// Transmission channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelSpec {
    Bec {
        eps: f64,
    },
    /// BPSK over AWGN at `snr_db` (Eb/N0) with noise standard deviation `sigma`.
    Awgn {
        snr_db: f64,
        sigma: f64,
    },
}

impl ChannelSpec {
    pub fn bec(eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(PolarError::ErasureOutOfRange(eps));
        }
        Ok(ChannelSpec::Bec { eps })
    }

    /// `σ² = 1 / (2·R·Eb/N0)`.
    pub fn awgn(snr_db: f64, rate: f64) -> Result<Self> {
        if !snr_db.is_finite() || !(rate > 0.0 && rate <= 1.0) {
            return Err(PolarError::InvalidParameter(format!(
                "AWGN needs finite SNR and rate in (0, 1], got {snr_db} dB and {rate}"
            )));
        }
        let ebn0 = 10f64.powf(snr_db / 10.0);
        let sigma = (1.0 / (2.0 * rate * ebn0)).sqrt();
        Ok(ChannelSpec::Awgn { snr_db, sigma })
    }

    /// Erasure probability or SNR in dB.
    pub fn param(&self) -> f64 {
        match *self {
            ChannelSpec::Bec { eps } => eps,
            ChannelSpec::Awgn { snr_db, .. } => snr_db,
        }
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelSpec::Bec { eps } => write!(f, "bec:{eps}"),
            ChannelSpec::Awgn { snr_db, .. } => write!(f, "awgn:{snr_db}"),
        }
    }
}

/// One channel realisation, applicable to any codeword of the right length.
#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    Erasures(Vec<bool>),
    /// Scaled Gaussian samples `σ·n`.
    Gaussian {
        samples: Vec<f64>,
        sigma: f64,
    },
}

pub fn draw_noise<R: Rng + ?Sized>(channel: ChannelSpec, len: usize, rng: &mut R) -> Noise {
    match channel {
        ChannelSpec::Bec { eps } => {
            Noise::Erasures((0..len).map(|_| rng.random::<f64>() < eps).collect())
        }
        ChannelSpec::Awgn { sigma, .. } => Noise::Gaussian {
            samples: (0..len)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            sigma,
        },
    }
}

impl Noise {
    pub fn len(&self) -> usize {
        match self {
            Noise::Erasures(e) => e.len(),
            Noise::Gaussian { samples, .. } => samples.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Channel output for codeword `x`. BPSK maps 0 to +1; `LLR = 2y/σ²`.
    pub fn apply(&self, x: &BitWord) -> Result<SoftWord> {
        if x.len() != self.len() {
            return Err(PolarError::LengthMismatch {
                expected: self.len(),
                actual: x.len(),
            });
        }
        Ok(match self {
            Noise::Erasures(erased) => SoftWord::Erasure(
                x.as_slice()
                    .iter()
                    .zip(erased)
                    .map(|(&b, &e)| {
                        if e {
                            Ternary::Erased
                        } else {
                            Ternary::known(b)
                        }
                    })
                    .collect(),
            ),
            Noise::Gaussian { samples, sigma } => {
                let scale = 2.0 / (sigma * sigma);
                SoftWord::Llr(
                    x.as_slice()
                        .iter()
                        .zip(samples)
                        .map(|(&b, &n)| scale * (1.0 - 2.0 * b as f64 + n))
                        .collect(),
                )
            }
        })
    }
}

pub fn transmit<R: Rng + ?Sized>(
    channel: ChannelSpec,
    x: &BitWord,
    rng: &mut R,
) -> Result<SoftWord> {
    draw_noise(channel, x.len(), rng).apply(x)
}

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent random streams within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Channel = 0,
    NonSystematicDecoder = 1,
    SystematicDecoder = 2,
    Message = 3,
}

pub fn trial_stream(master_seed: u64, trial: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(master_seed ^ trial));
    rng.set_stream(stream as u64);
    rng
}

pub(crate) fn trial_chunks(trials: u64) -> Vec<Range<u64>> {
    (0..trials.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(trials))
        .collect()
}

pub(crate) fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(PolarError::InvalidParameter(
            "workers must be at least 1".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PolarError::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Codecs {
    NonSystematic,
    Systematic,
    Both,
}

impl Codecs {
    fn nonsys(self) -> bool {
        self != Codecs::Systematic
    }

    fn sys(self) -> bool {
        self != Codecs::NonSystematic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub trials: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub codecs: Codecs,
}

impl SimConfig {
    pub fn new(trials: u64, master_seed: u64, workers: usize) -> Self {
        SimConfig {
            trials,
            master_seed,
            workers,
            codecs: Codecs::Both,
        }
    }
}

/// Error counts at one channel parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerRecord {
    pub channel_param: f64,
    pub trials: u64,
    pub k: usize,
    pub bit_errors_nonsys: u64,
    pub bit_errors_sys: u64,
    pub block_errors_nonsys: u64,
    pub block_errors_sys: u64,
}

pub const BER_CSV_HEADER: &str = "channel_param,trials,bit_errors_nonsys,bit_errors_sys,block_errors_nonsys,block_errors_sys,ber_nonsys,ber_sys,observed_gain";

impl BerRecord {
    fn bits(&self) -> f64 {
        self.trials as f64 * self.k as f64
    }

    pub fn ber_nonsys(&self) -> f64 {
        self.bit_errors_nonsys as f64 / self.bits()
    }

    pub fn ber_sys(&self) -> f64 {
        self.bit_errors_sys as f64 / self.bits()
    }

    /// `ber_nonsys / ber_sys`, undefined when the systematic side saw no errors.
    pub fn observed_gain(&self) -> Option<f64> {
        (self.bit_errors_sys > 0).then(|| self.ber_nonsys() / self.ber_sys())
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6e},{:.6e},{}",
            self.channel_param,
            self.trials,
            self.bit_errors_nonsys,
            self.bit_errors_sys,
            self.block_errors_nonsys,
            self.block_errors_sys,
            self.ber_nonsys(),
            self.ber_sys(),
            self.observed_gain()
                .map(|g| format!("{g:.6}"))
                .unwrap_or_default()
        )
    }
}

/// One parsed row of a BER CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub channel_param: f64,
    pub trials: u64,
    pub bit_errors_nonsys: u64,
    pub bit_errors_sys: u64,
    pub block_errors_nonsys: u64,
    pub block_errors_sys: u64,
    pub ber_nonsys: f64,
    pub ber_sys: f64,
    pub observed_gain: Option<f64>,
}

/// Reads CSV written by `simulate`. Rejects files without a `# schema=1` line.
pub fn read_ber_csv(text: &str) -> Result<Vec<BerRow>> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    let schema = first
        .strip_prefix('#')
        .and_then(|c| c.split_whitespace().find_map(|t| t.strip_prefix("schema=")))
        .ok_or_else(|| PolarError::Parse("missing `# schema=` line".into()))?;
    if schema != "1" {
        return Err(PolarError::Parse(format!(
            "unsupported schema version {schema}"
        )));
    }
    if lines.next() != Some(BER_CSV_HEADER) {
        return Err(PolarError::Parse("unexpected CSV header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(PolarError::Parse(format!("expected 9 fields in `{line}`")));
            }
            let real = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| PolarError::Parse(format!("bad number `{s}`")))
            };
            let int = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| PolarError::Parse(format!("bad count `{s}`")))
            };
            Ok(BerRow {
                channel_param: real(f[0])?,
                trials: int(f[1])?,
                bit_errors_nonsys: int(f[2])?,
                bit_errors_sys: int(f[3])?,
                block_errors_nonsys: int(f[4])?,
                block_errors_sys: int(f[5])?,
                ber_nonsys: real(f[6])?,
                ber_sys: real(f[7])?,
                observed_gain: if f[8].is_empty() {
                    None
                } else {
                    Some(real(f[8])?)
                },
            })
        })
        .collect()
}

#[derive(Default)]
struct Counts {
    bit_nonsys: u64,
    bit_sys: u64,
    block_nonsys: u64,
    block_sys: u64,
}

/// Simulates `config.trials` blocks with random messages and all-zero frozen
/// bits. Both codecs see the same channel realisation in each trial.
pub fn run_ber_point(
    code: &PolarCode,
    channel: ChannelSpec,
    config: &SimConfig,
) -> Result<BerRecord> {
    if config.trials == 0 {
        return Err(PolarError::InvalidParameter(
            "trials must be at least 1".into(),
        ));
    }
    let k = code.k();
    let frozen = BitWord::zeros(code.len() - k);
    let chunks = trial_chunks(config.trials);
    let seed = config.master_seed;
    let codecs = config.codecs;
    let partials: Vec<Result<Counts>> = with_pool(config.workers, || {
        chunks
            .par_iter()
            .map(|range| {
                let mut decoder = ScDecoder::new(code);
                let mut counts = Counts::default();
                for t in range.clone() {
                    let info = random_bits(&mut trial_stream(seed, t, Stream::Message), k);
                    let noise = draw_noise(
                        channel,
                        code.len(),
                        &mut trial_stream(seed, t, Stream::Channel),
                    );
                    if codecs.nonsys() {
                        let x = encode_nonsystematic(code, &info, &frozen)?;
                        let mut rng = trial_stream(seed, t, Stream::NonSystematicDecoder);
                        let r =
                            decoder.decode(&noise.apply(&x)?, &frozen, &mut CoinFlip(&mut rng))?;
                        let errors = r.info_bits.distance(&info) as u64;
                        counts.bit_nonsys += errors;
                        counts.block_nonsys += u64::from(errors > 0);
                    }
                    if codecs.sys() {
                        let x = encode_systematic(code, &info, &frozen)?;
                        let mut rng = trial_stream(seed, t, Stream::SystematicDecoder);
                        let r = decoder.decode_systematic(
                            &noise.apply(&x)?,
                            &frozen,
                            &mut CoinFlip(&mut rng),
                        )?;
                        let errors = r.info_bits.distance(&info) as u64;
                        counts.bit_sys += errors;
                        counts.block_sys += u64::from(errors > 0);
                    }
                }
                Ok(counts)
            })
            .collect()
    })?;
    let mut record = BerRecord {
        channel_param: channel.param(),
        trials: config.trials,
        k,
        bit_errors_nonsys: 0,
        bit_errors_sys: 0,
        block_errors_nonsys: 0,
        block_errors_sys: 0,
    };
    for part in partials {
        let c = part?;
        record.bit_errors_nonsys += c.bit_nonsys;
        record.bit_errors_sys += c.bit_sys;
        record.block_errors_nonsys += c.block_nonsys;
        record.block_errors_sys += c.block_sys;
    }
    Ok(record)
}

/// Observed and modelled gain at one block length.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPoint {
    pub n: u32,
    pub record: BerRecord,
    pub gamma_closed: f64,
}

/// Runs a BEC(`eps`) simulation at rate `rate` for each `n` and pairs the
/// observed gain with the composite-model prediction.
pub fn run_gain_sweep(
    ns: &[u32],
    rate: f64,
    eps: f64,
    alpha: f64,
    beta: f64,
    p0: f64,
    config: &SimConfig,
) -> Result<Vec<GainPoint>> {
    let channel = ChannelSpec::bec(eps)?;
    ns.iter()
        .map(|&n| {
            let len = 1usize << n;
            let k = ((len as f64) * rate).round() as usize;
            let code = PolarCode::bec(n, eps, k)?;
            let model = build_composite(&code, alpha, Boundary::Coupling(beta), p0)?;
            Ok(GainPoint {
                n,
                record: run_ber_point(&code, channel, config)?,
                gamma_closed: gamma_closed_form(&model),
            })
        })
        .collect()
}
