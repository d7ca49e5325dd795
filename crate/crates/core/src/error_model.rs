//! Error propagation through re-encoding, the exact small-block oracle,
//! first-error statistics, and the composite model for the systematic gain.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codec::{
    encode_nonsystematic, encode_systematic, ScDecoder, ScriptedGuesses, SoftWord, Ternary,
};
use crate::construction::{brick_wall, Design, PolarCode};
use crate::error::{PolarError, Result};
use crate::gf2::BitWord;
use crate::sim::{self, ChannelSpec, Stream};

/// Default probability of an independent error inside the first region.
pub const DEFAULT_P0: f64 = 0.5;
/// Default threshold below which a Bhattacharyya value counts as negligible.
pub const DEFAULT_ALPHA: f64 = 1e-3;
/// Largest block length `exact_ber_small` will enumerate.
pub const EXACT_LIMIT: usize = 16;

/// `q = v·G`: systematic-side errors caused by source-side errors `v`.
///
/// `v` may only be nonzero on information positions.
pub fn propagate_errors(code: &PolarCode, v: &BitWord) -> Result<BitWord> {
    if v.len() != code.len() {
        return Err(PolarError::LengthMismatch {
            expected: code.len(),
            actual: v.len(),
        });
    }
    if let Some(&p) = v.support().iter().find(|&&p| !code.is_info(p)) {
        return Err(PolarError::SupportOutsideInfoSet(p));
    }
    code.spec().transform(v)
}

/// Error vector with ones at the given 1-based positions.
pub fn error_vector(code: &PolarCode, positions: &[usize]) -> Result<BitWord> {
    let mut v = BitWord::zeros(code.len());
    for &p in positions {
        if p == 0 || p > code.len() {
            return Err(PolarError::IndexOutOfRange {
                index: p,
                len: code.len(),
            });
        }
        v.set(p, true);
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialCase {
    /// Every information bit wrong after SC.
    AllError,
    /// Only information bit `e` wrong after SC.
    OneError(usize),
}

/// `(P_b, P_sys,b)` conditioned on one deterministic error event.
///
/// `P_b = |A_t| / K` and `P_sys,b = w_H((v·G)_A) / K`. For one error at `e`
/// this is `1/K` against `w_H((G_{e,:})_A) / K`.
pub fn special_case_ber(code: &PolarCode, case: SpecialCase) -> Result<(f64, f64)> {
    let positions: Vec<usize> = match case {
        SpecialCase::AllError => code.info_set().to_vec(),
        SpecialCase::OneError(e) => {
            if e == 0 || e > code.len() || !code.is_info(e) {
                return Err(PolarError::NotInfoPosition(e));
            }
            vec![e]
        }
    };
    let v = error_vector(code, &positions)?;
    let q = propagate_errors(code, &v)?;
    let k = code.k() as f64;
    let sys = q.gather(code.info_set()).weight() as f64;
    Ok((positions.len() as f64 / k, sys / k))
}

/// Exact `(P_b, P_sys,b)` on a BEC(`eps`) for the all-zero message.
///
/// Every erasure pattern is enumerated with probability
/// `eps^e (1 − eps)^(N − e)`, and within it every coin-flip branch of the SC
/// decoder with weight `2^(−guesses)`. The decoder is equivariant under adding
/// a codeword, so the all-zero message gives the average over messages.
pub fn exact_ber_small(code: &PolarCode, eps: f64) -> Result<(f64, f64)> {
    exact_ber_for_message(code, eps, &BitWord::zeros(code.k()))
}

/// As [`exact_ber_small`] but for a specific message, encoding it once
/// non-systematically and once systematically.
pub fn exact_ber_for_message(code: &PolarCode, eps: f64, info: &BitWord) -> Result<(f64, f64)> {
    let len = code.len();
    if len > EXACT_LIMIT {
        return Err(PolarError::TooLargeForEnumeration {
            len,
            limit: EXACT_LIMIT,
        });
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(PolarError::ErasureOutOfRange(eps));
    }
    let frozen = BitWord::zeros(len - code.k());
    let x_nonsys = encode_nonsystematic(code, info, &frozen)?;
    let x_sys = encode_systematic(code, info, &frozen)?;
    let mut decoder = ScDecoder::new(code);
    let mut expected_nonsys = 0.0;
    let mut expected_sys = 0.0;
    for pattern in 0u32..(1u32 << len) {
        let erased = pattern.count_ones() as i32;
        let weight = eps.powi(erased) * (1.0 - eps).powi(len as i32 - erased);
        if weight == 0.0 {
            continue;
        }
        let observe = |x: &BitWord| -> Vec<Ternary> {
            (0..len)
                .map(|p| {
                    if pattern >> p & 1 == 1 {
                        Ternary::Erased
                    } else {
                        Ternary::known(x.as_slice()[p])
                    }
                })
                .collect()
        };
        let obs = SoftWord::Erasure(observe(&x_nonsys));
        expected_nonsys += weight
            * enumerate_branches(&mut decoder, &obs, &frozen, false, |r| {
                r.info_bits.distance(info)
            })?;
        let obs = SoftWord::Erasure(observe(&x_sys));
        expected_sys += weight
            * enumerate_branches(&mut decoder, &obs, &frozen, true, |r| {
                r.info_bits.distance(info)
            })?;
    }
    let k = code.k() as f64;
    Ok((expected_nonsys / k, expected_sys / k))
}

/// Expected value of `metric` over all coin-flip branches of one decode.
fn enumerate_branches(
    decoder: &mut ScDecoder<'_>,
    obs: &SoftWord,
    frozen: &BitWord,
    systematic: bool,
    metric: impl Fn(&crate::codec::DecodeResult) -> usize,
) -> Result<f64> {
    let mut total = 0.0;
    let mut stack = vec![Vec::<u8>::new()];
    while let Some(script) = stack.pop() {
        let mut guesses = ScriptedGuesses::new(script.clone());
        let result = if systematic {
            decoder.decode_systematic(obs, frozen, &mut guesses)?
        } else {
            decoder.decode(obs, frozen, &mut guesses)?
        };
        if guesses.requested() > script.len() {
            for bit in [0, 1] {
                let mut next = script.clone();
                next.push(bit);
                stack.push(next);
            }
            continue;
        }
        total += metric(&result) as f64 * 0.5f64.powi(script.len() as i32);
    }
    Ok(total)
}

/// First-error statistics over the sorted information set.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstErrorDistribution {
    /// `counts[i]` is how often the first wrong information bit was the
    /// `i`-th element of `A` (0-based rank).
    pub counts: Vec<u64>,
    pub no_error: u64,
    pub trials: u64,
}

impl FirstErrorDistribution {
    /// Distribution given directly by probabilities. Counts are left empty.
    pub fn from_probs(probs: &[f64]) -> Self {
        // Scaled integer counts with a large denominator keep `probs()` exact
        // enough for analysis inputs.
        const SCALE: f64 = 1e12;
        let counts: Vec<u64> = probs.iter().map(|p| (p * SCALE).round() as u64).collect();
        let used: u64 = counts.iter().sum();
        let trials = SCALE as u64;
        FirstErrorDistribution {
            no_error: trials.saturating_sub(used),
            counts,
            trials,
        }
    }

    pub fn probs(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.trials as f64)
            .collect()
    }

    pub fn error_trials(&self) -> u64 {
        self.trials - self.no_error
    }
}

/// First-error histogram together with the Bhattacharyya values over `A`.
#[derive(Debug, Clone)]
pub struct FirstErrorReport {
    pub distribution: FirstErrorDistribution,
    /// Information positions, ascending.
    pub positions: Vec<usize>,
    /// `Z` of each information position.
    pub z_values: Vec<f64>,
}

impl FirstErrorReport {
    /// Share of first errors landing on positions with `Z > alpha`.
    pub fn mass_above(&self, alpha: f64) -> f64 {
        let errors = self.distribution.error_trials();
        if errors == 0 {
            return 0.0;
        }
        let above: u64 = self
            .distribution
            .counts
            .iter()
            .zip(&self.z_values)
            .filter(|(_, &z)| z > alpha)
            .map(|(&c, _)| c)
            .sum();
        above as f64 / errors as f64
    }

    /// Spearman rank correlation between first-error frequency and `Z`.
    pub fn rank_correlation(&self) -> f64 {
        let freq: Vec<f64> = self.distribution.counts.iter().map(|&c| c as f64).collect();
        spearman(&freq, &self.z_values)
    }
}

/// SC-decodes `trials` blocks and records the first wrong information bit.
pub fn first_error_histogram(
    code: &PolarCode,
    channel: ChannelSpec,
    trials: u64,
    master_seed: u64,
    workers: usize,
) -> Result<FirstErrorReport> {
    if trials == 0 {
        return Err(PolarError::InvalidParameter(
            "trials must be at least 1".into(),
        ));
    }
    let k = code.k();
    let chunks = sim::trial_chunks(trials);
    let frozen = BitWord::zeros(code.len() - k);
    let partials: Vec<Result<(Vec<u64>, u64)>> = sim::with_pool(workers, || {
        chunks
            .par_iter()
            .map(|range| {
                let mut decoder = ScDecoder::new(code);
                let mut counts = vec![0u64; k];
                let mut none = 0u64;
                for t in range.clone() {
                    let mut message_rng = sim::trial_stream(master_seed, t, Stream::Message);
                    let info = random_bits(&mut message_rng, k);
                    let x = encode_nonsystematic(code, &info, &frozen)?;
                    let mut channel_rng = sim::trial_stream(master_seed, t, Stream::Channel);
                    let obs = sim::transmit(channel, &x, &mut channel_rng)?;
                    let mut decoder_rng =
                        sim::trial_stream(master_seed, t, Stream::NonSystematicDecoder);
                    let r = decoder.decode(
                        &obs,
                        &frozen,
                        &mut crate::codec::CoinFlip(&mut decoder_rng),
                    )?;
                    match r
                        .info_bits
                        .as_slice()
                        .iter()
                        .zip(info.as_slice())
                        .position(|(a, b)| a != b)
                    {
                        Some(rank) => counts[rank] += 1,
                        None => none += 1,
                    }
                }
                Ok((counts, none))
            })
            .collect()
    })?;
    let mut counts = vec![0u64; k];
    let mut no_error = 0;
    for part in partials {
        let (c, none) = part?;
        for (total, add) in counts.iter_mut().zip(c) {
            *total += add;
        }
        no_error += none;
    }
    Ok(FirstErrorReport {
        distribution: FirstErrorDistribution {
            counts,
            no_error,
            trials,
        },
        positions: code.info_set().to_vec(),
        z_values: code.info_set().iter().map(|&i| code.z(i)).collect(),
    })
}

pub(crate) fn random_bits(rng: &mut ChaCha8Rng, len: usize) -> BitWord {
    BitWord::from_bools((0..len).map(|_| rng.random::<bool>()))
}

/// `Pr{v_i = 1}` over the sorted information set.
///
/// For ranks `i ≤ K_I`: `p_i + p · Σ_{j<i} p_j`; beyond `K_I`:
/// `p · Σ_{j≤K_I} p_j`.
pub fn bit_error_profile(
    first_errors: &FirstErrorDistribution,
    coupling: f64,
    k_i: usize,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&coupling) {
        return Err(PolarError::InvalidParameter(format!(
            "coupling probability {coupling} outside [0, 1]"
        )));
    }
    let probs = first_errors.probs();
    if k_i > probs.len() {
        return Err(PolarError::InvalidParameter(format!(
            "K_I = {k_i} exceeds K = {}",
            probs.len()
        )));
    }
    let mut profile = Vec::with_capacity(probs.len());
    let mut before = 0.0;
    for (i, &p_i) in probs.iter().enumerate() {
        if i < k_i {
            profile.push(p_i + coupling * before);
            before += p_i;
        } else {
            profile.push(coupling * before);
        }
    }
    Ok(profile)
}

/// Where the independent region ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Last information position with `Z > alpha`.
    Bhattacharyya,
    /// Position `⌊|S|·(1 − beta)⌋` of `S` for coupling coefficient `beta`.
    Coupling(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelWarning {
    /// `S₁` is empty; every bit of `S` is treated as coupled.
    AllCoupled,
    /// `S₂` is empty; the gain falls below one.
    NoCoupledRegion,
}

/// Composite error model: bits of `S₁` fail independently with probability
/// `p0`, bits of `S₂` always fail.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeModel {
    pub s: Vec<usize>,
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub p0: f64,
    pub alpha: f64,
    pub boundary: Boundary,
    pub warnings: Vec<ModelWarning>,
}

impl CompositeModel {
    pub fn beta(&self) -> Option<f64> {
        match self.boundary {
            Boundary::Coupling(b) => Some(b),
            Boundary::Bhattacharyya => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !self.warnings.is_empty()
    }
}

pub fn build_composite(
    code: &PolarCode,
    alpha: f64,
    boundary: Boundary,
    p0: f64,
) -> Result<CompositeModel> {
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(PolarError::InvalidParameter(format!(
            "p0 {p0} outside (0, 1]"
        )));
    }
    if let Boundary::Coupling(beta) = boundary {
        if !(0.0..=1.0).contains(&beta) {
            return Err(PolarError::InvalidParameter(format!(
                "beta {beta} outside [0, 1]"
            )));
        }
    }
    let wall = brick_wall(code, alpha)?;
    let s: Vec<usize> = code
        .info_set()
        .iter()
        .copied()
        .filter(|&a| a >= wall.first())
        .collect();
    let split = match boundary {
        Boundary::Bhattacharyya => s.partition_point(|&a| a <= wall.last()),
        // Guard against products such as 10 × 0.7 landing just under an integer.
        Boundary::Coupling(beta) => (s.len() as f64 * (1.0 - beta) + 1e-9).floor() as usize,
    };
    let (s1, s2) = s.split_at(split.min(s.len()));
    let mut warnings = Vec::new();
    if s1.is_empty() {
        warnings.push(ModelWarning::AllCoupled);
    }
    if s2.is_empty() {
        warnings.push(ModelWarning::NoCoupledRegion);
    }
    Ok(CompositeModel {
        s1: s1.to_vec(),
        s2: s2.to_vec(),
        s,
        p0,
        alpha,
        boundary,
        warnings,
    })
}

/// `γ = (p0·|S₁| + |S₂|) / (1 + p0·|S₁|)`.
pub fn gamma_closed_form(model: &CompositeModel) -> f64 {
    let s1 = model.p0 * model.s1.len() as f64;
    (s1 + model.s2.len() as f64) / (1.0 + s1)
}

/// Large-`|S₁|` approximation `γ ≈ 1 + |S₂| / (p0·|S₁|)`.
pub fn gamma_approximation(model: &CompositeModel) -> f64 {
    1.0 + model.s2.len() as f64 / (model.p0 * model.s1.len() as f64)
}

/// `E[w_H(v)] / E[w_H((v·G)_A)]` over sampled composite error vectors.
pub fn gamma_monte_carlo<R: Rng + ?Sized>(
    model: &CompositeModel,
    code: &PolarCode,
    realizations: usize,
    rng: &mut R,
) -> Result<f64> {
    if realizations == 0 {
        return Err(PolarError::InvalidParameter(
            "realizations must be at least 1".into(),
        ));
    }
    let mut source_weight = 0usize;
    let mut reencoded_weight = 0usize;
    for _ in 0..realizations {
        let mut v = BitWord::zeros(code.len());
        for &a in &model.s2 {
            v.set(a, true);
        }
        for &a in &model.s1 {
            if rng.random_bool(model.p0) {
                v.set(a, true);
            }
        }
        source_weight += v.weight();
        let q = propagate_errors(code, &v)?;
        reencoded_weight += q.gather(code.info_set()).weight();
    }
    if reencoded_weight == 0 {
        return Err(PolarError::ZeroDenominator);
    }
    Ok(source_weight as f64 / reencoded_weight as f64)
}

/// Strict bounds `1/K < γ < K`.
pub fn gamma_bounds_check(gamma: f64, k: usize) -> bool {
    let k = k as f64;
    gamma > 1.0 / k && gamma < k
}

/// Coupling coefficient schedule: 0.3 for bad channels, 0.5 for good ones.
///
/// BEC is bad above eps = 0.45; AWGN is bad below −1.5 dB.
pub fn default_beta(design: Design) -> f64 {
    match design {
        Design::Bec { eps } if eps > 0.45 => 0.3,
        Design::Awgn { snr_db, .. } if snr_db < -1.5 => 0.3,
        _ => 0.5,
    }
}

/// One row of the gain report.
#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub len: usize,
    pub k: usize,
    pub channel_param: f64,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub p0: f64,
    pub s: usize,
    pub s1: usize,
    pub s2: usize,
    pub gamma_closed: f64,
    pub gamma_mc: f64,
}

pub const GAIN_CSV_HEADER: &str = "N,K,eps_or_snr,alpha,beta,p0,S,S1,S2,gamma_closed,gamma_mc";

impl GainReport {
    pub fn new(code: &PolarCode, model: &CompositeModel, gamma_mc: f64) -> Self {
        GainReport {
            len: code.len(),
            k: code.k(),
            channel_param: code.design().param(),
            alpha: model.alpha,
            beta: model.beta(),
            p0: model.p0,
            s: model.s.len(),
            s1: model.s1.len(),
            s2: model.s2.len(),
            gamma_closed: gamma_closed_form(model),
            gamma_mc,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.6},{:.6}",
            self.len,
            self.k,
            self.channel_param,
            self.alpha,
            self.beta.map(|b| b.to_string()).unwrap_or_default(),
            self.p0,
            self.s,
            self.s1,
            self.s2,
            self.gamma_closed,
            self.gamma_mc
        )
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = ranks(a);
    let rb = ranks(b);
    pearson(&ra, &rb)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end - 1) as f64 / 2.0 + 1.0;
        for &i in &order[start..end] {
            out[i] = rank;
        }
        start = end;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}
