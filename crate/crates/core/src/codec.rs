//! Encoders and successive-cancellation decoders.
//!
//! Encoding uses `G = F^{⊗n}` directly and the decoder walks the source bits
//! in natural order `u₁, u₂, …, u_N` through the `(u ⊕ v, v)` recursion of
//! `F^{⊗n}`. This is the same schedule as decoding `B·F^{⊗n}` after undoing
//! the bit-reversal, so the systematic positions coincide with `A`.

use std::fmt;

use rand::Rng;

use crate::construction::PolarCode;
use crate::error::{PolarError, Result};
use crate::gf2::{butterfly_in_place, BitWord};

/// LLR magnitudes are clamped to this before check-node and variable-node updates.
pub const LLR_CLAMP: f64 = 40.0;

/// Ternary erasure-channel symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ternary {
    Zero,
    One,
    Erased,
}

impl Ternary {
    pub fn known(bit: u8) -> Self {
        if bit == 0 {
            Ternary::Zero
        } else {
            Ternary::One
        }
    }

    pub fn is_erased(self) -> bool {
        self == Ternary::Erased
    }

    fn flip_by(self, bit: u8) -> Self {
        match (self, bit) {
            (Ternary::Erased, _) | (_, 0) => self,
            (Ternary::Zero, _) => Ternary::One,
            (Ternary::One, _) => Ternary::Zero,
        }
    }

    fn as_char(self) -> char {
        match self {
            Ternary::Zero => '0',
            Ternary::One => '1',
            Ternary::Erased => '?',
        }
    }
}

/// Channel observations for one block.
#[derive(Debug, Clone, PartialEq)]
pub enum SoftWord {
    /// Erasure-channel output, `LR ∈ {∞, 1, 0}` written as known-0, erased, known-1.
    Erasure(Vec<Ternary>),
    /// Natural-log likelihood ratios `ln P(y|0)/P(y|1)`; positive favours 0.
    Llr(Vec<f64>),
}

impl SoftWord {
    pub fn len(&self) -> usize {
        match self {
            SoftWord::Erasure(s) => s.len(),
            SoftWord::Llr(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Noiseless erasure observation of `x`.
    pub fn clean_erasure(x: &BitWord) -> Self {
        SoftWord::Erasure(x.as_slice().iter().map(|&b| Ternary::known(b)).collect())
    }

    /// Noiseless LLR observation of `x` (infinite magnitude).
    pub fn clean_llr(x: &BitWord) -> Self {
        SoftWord::Llr(
            x.as_slice()
                .iter()
                .map(|&b| {
                    if b == 0 {
                        f64::INFINITY
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect(),
        )
    }

    /// Parses `0`/`1`/`?` characters as erasure symbols, or whitespace-separated
    /// reals as LLRs when the text contains anything else.
    pub fn parse(text: &str) -> Result<Self> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if !compact.is_empty() && compact.chars().all(|c| matches!(c, '0' | '1' | '?')) {
            return Ok(SoftWord::Erasure(
                compact
                    .chars()
                    .map(|c| match c {
                        '0' => Ternary::Zero,
                        '1' => Ternary::One,
                        _ => Ternary::Erased,
                    })
                    .collect(),
            ));
        }
        text.split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| !v.is_nan())
                    .ok_or_else(|| PolarError::Parse(format!("invalid LLR `{t}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(SoftWord::Llr)
    }
}

impl fmt::Display for SoftWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SoftWord::Erasure(s) => s.iter().try_for_each(|t| write!(f, "{}", t.as_char())),
            SoftWord::Llr(s) => {
                for (i, v) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

/// Decoder output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    /// Estimated source word, frozen positions set to their known values.
    pub u_hat: BitWord,
    /// Re-encoded estimate `û·G`, present for SC-EN.
    pub x_hat: Option<BitWord>,
    /// `û_A` for SC, `x̂_A` for SC-EN.
    pub info_bits: BitWord,
    /// Number of information decisions taken by coin flip.
    pub guess_count: usize,
    /// Erasure kind only: erased values produced at each stage of the decoding
    /// graph, stage 0 being the channel and stage `n` the source-bit beliefs.
    pub stage_erasures: Option<Vec<usize>>,
}

/// Source of decisions for information bits whose belief is uncertain.
pub trait Guesser {
    fn guess(&mut self, position: usize) -> u8;
}

/// Fair coin flips drawn from a caller-owned random stream.
pub struct CoinFlip<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> Guesser for CoinFlip<'_, R> {
    fn guess(&mut self, _position: usize) -> u8 {
        u8::from(self.0.random::<bool>())
    }
}

/// Replays a fixed sequence of guesses, then answers 0. Counts every request.
#[derive(Debug, Clone, Default)]
pub struct ScriptedGuesses {
    script: Vec<u8>,
    requested: usize,
}

impl ScriptedGuesses {
    pub fn new(script: Vec<u8>) -> Self {
        ScriptedGuesses {
            script,
            requested: 0,
        }
    }

    pub fn requested(&self) -> usize {
        self.requested
    }
}

impl Guesser for ScriptedGuesses {
    fn guess(&mut self, _position: usize) -> u8 {
        let bit = self.script.get(self.requested).copied().unwrap_or(0);
        self.requested += 1;
        bit
    }
}

/// `x = u·G` with `u_A = info` and `u_Ā = frozen`.
pub fn encode_nonsystematic(code: &PolarCode, info: &BitWord, frozen: &BitWord) -> Result<BitWord> {
    let u = assemble_source(code, info, frozen)?;
    code.spec().transform(&u)
}

/// Systematic codeword with `x_A = info`.
///
/// For codes with `G[Ā, A] = 0` the source part is `u_A = info · G_AA⁻¹`, and
/// `G_AA⁻¹ = G_AA` because `G` is its own inverse over GF(2). Any other
/// information set falls back to back-substitution against
/// `info ⊕ u_Ā·G[Ā, A]`.
pub fn encode_systematic(code: &PolarCode, info: &BitWord, frozen: &BitWord) -> Result<BitWord> {
    let u = systematic_source(code, info, frozen)?;
    code.spec().transform(&u)
}

/// Source word `u` whose image under `G` is the systematic codeword.
pub fn systematic_source(code: &PolarCode, info: &BitWord, frozen: &BitWord) -> Result<BitWord> {
    check_lengths(code, info, frozen)?;
    let u_a = if code.is_domination_closed() {
        let mut t = BitWord::zeros(code.len());
        t.scatter(code.info_set(), info)?;
        butterfly_in_place(t.as_mut_slice());
        t.gather(code.info_set())
    } else {
        let frozen_part =
            code.spec()
                .restricted_product(frozen, code.frozen_set(), code.info_set())?;
        let target = info.xor(&frozen_part)?;
        code.spec().lower_tri_solve(code.info_set(), &target)?
    };
    assemble_source(code, &u_a, frozen)
}

fn assemble_source(code: &PolarCode, info: &BitWord, frozen: &BitWord) -> Result<BitWord> {
    check_lengths(code, info, frozen)?;
    let mut u = BitWord::zeros(code.len());
    u.scatter(code.info_set(), info)?;
    u.scatter(code.frozen_set(), frozen)?;
    Ok(u)
}

fn check_lengths(code: &PolarCode, info: &BitWord, frozen: &BitWord) -> Result<()> {
    if info.len() != code.k() {
        return Err(PolarError::LengthMismatch {
            expected: code.k(),
            actual: info.len(),
        });
    }
    if frozen.len() != code.len() - code.k() {
        return Err(PolarError::LengthMismatch {
            expected: code.len() - code.k(),
            actual: frozen.len(),
        });
    }
    Ok(())
}

/// SC decoding with coin flips from `rng` for uncertain information bits.
pub fn decode_sc<R: Rng + ?Sized>(
    code: &PolarCode,
    obs: &SoftWord,
    frozen: &BitWord,
    rng: &mut R,
) -> Result<DecodeResult> {
    ScDecoder::new(code).decode(obs, frozen, &mut CoinFlip(rng))
}

/// SC decoding followed by re-encoding; information is read from `x̂_A`.
pub fn decode_sc_en<R: Rng + ?Sized>(
    code: &PolarCode,
    obs: &SoftWord,
    frozen: &BitWord,
    rng: &mut R,
) -> Result<DecodeResult> {
    ScDecoder::new(code).decode_systematic(obs, frozen, &mut CoinFlip(rng))
}

/// Reusable SC decoder bound to one code. Holds per-call scratch buffers.
pub struct ScDecoder<'a> {
    code: &'a PolarCode,
    ternary_scratch: Vec<Vec<Ternary>>,
    llr_scratch: Vec<Vec<f64>>,
    codeword: Vec<u8>,
}

impl<'a> ScDecoder<'a> {
    pub fn new(code: &'a PolarCode) -> Self {
        let levels = code.n() as usize;
        let widths = (1..=levels).map(|d| code.len() >> d);
        ScDecoder {
            code,
            ternary_scratch: widths.clone().map(|w| vec![Ternary::Erased; w]).collect(),
            llr_scratch: widths.map(|w| vec![0.0; w]).collect(),
            codeword: vec![0; code.len()],
        }
    }

    pub fn code(&self) -> &PolarCode {
        self.code
    }

    pub fn decode<G: Guesser>(
        &mut self,
        obs: &SoftWord,
        frozen: &BitWord,
        guesser: &mut G,
    ) -> Result<DecodeResult> {
        let (u_hat, guess_count, stage_erasures) = self.run(obs, frozen, guesser, None)?;
        let info_bits = u_hat.gather(self.code.info_set());
        Ok(DecodeResult {
            u_hat,
            x_hat: None,
            info_bits,
            guess_count,
            stage_erasures,
        })
    }

    pub fn decode_systematic<G: Guesser>(
        &mut self,
        obs: &SoftWord,
        frozen: &BitWord,
        guesser: &mut G,
    ) -> Result<DecodeResult> {
        let (u_hat, guess_count, stage_erasures) = self.run(obs, frozen, guesser, None)?;
        let x_hat = self.code.spec().transform(&u_hat)?;
        let info_bits = x_hat.gather(self.code.info_set());
        Ok(DecodeResult {
            u_hat,
            x_hat: Some(x_hat),
            info_bits,
            guess_count,
            stage_erasures,
        })
    }

    /// SC decoding of an erasure observation that also returns the belief
    /// each source bit had at the moment it was decided.
    pub fn decode_traced<G: Guesser>(
        &mut self,
        obs: &[Ternary],
        frozen: &BitWord,
        guesser: &mut G,
    ) -> Result<(DecodeResult, Vec<Ternary>)> {
        let mut trace = vec![Ternary::Erased; self.code.len()];
        let (u_hat, guess_count, stage_erasures) = self.run(
            &SoftWord::Erasure(obs.to_vec()),
            frozen,
            guesser,
            Some(&mut trace),
        )?;
        let info_bits = u_hat.gather(self.code.info_set());
        Ok((
            DecodeResult {
                u_hat,
                x_hat: None,
                info_bits,
                guess_count,
                stage_erasures,
            },
            trace,
        ))
    }

    fn run<G: Guesser>(
        &mut self,
        obs: &SoftWord,
        frozen: &BitWord,
        guesser: &mut G,
        trace: Option<&mut [Ternary]>,
    ) -> Result<(BitWord, usize, Option<Vec<usize>>)> {
        let code = self.code;
        let len = code.len();
        if obs.len() != len {
            return Err(PolarError::LengthMismatch {
                expected: len,
                actual: obs.len(),
            });
        }
        if frozen.len() != len - code.k() {
            return Err(PolarError::LengthMismatch {
                expected: len - code.k(),
                actual: frozen.len(),
            });
        }
        let mut frozen_full = vec![0u8; len];
        for (&p, &b) in code.frozen_set().iter().zip(frozen.as_slice()) {
            frozen_full[p - 1] = b;
        }
        let mut state = DecodeState {
            is_info: code.info_mask(),
            frozen: &frozen_full,
            u_hat: vec![0u8; len],
            guesses: 0,
            guesser,
            stage_counts: vec![0; code.n() as usize + 1],
            trace,
        };
        let codeword = &mut self.codeword;
        let counts = match obs {
            SoftWord::Erasure(symbols) => {
                state.stage_counts[0] = symbols.iter().filter(|s| s.is_erased()).count();
                recurse(
                    &mut state,
                    symbols,
                    1,
                    0,
                    codeword,
                    &mut self.ternary_scratch,
                )?;
                Some(std::mem::take(&mut state.stage_counts))
            }
            SoftWord::Llr(values) => {
                let clamped: Vec<f64> = values.iter().map(|&v| clamp_llr(v)).collect();
                if clamped.iter().any(|v| v.is_nan()) {
                    return Err(PolarError::InvalidParameter("NaN LLR".into()));
                }
                recurse(&mut state, &clamped, 1, 0, codeword, &mut self.llr_scratch)?;
                None
            }
        };
        Ok((BitWord::from_bits(state.u_hat)?, state.guesses, counts))
    }
}

/// What a decoder node carries: a ternary erasure symbol or an LLR.
trait Belief: Copy {
    /// Belief about `a ⊕ b`.
    fn check(a: Self, b: Self) -> Self;
    /// Combined belief about `b` given `a ⊕ b` (from `top`) with `a` decided as
    /// `partial`, and `b` (from `bottom`). `None` on contradiction.
    fn variable(top: Self, bottom: Self, partial: u8) -> Option<Self>;
    /// Replacement for a contradictory combination.
    fn unresolved() -> Self;
    /// `Some(bit)` when the belief decides the bit, `None` when uncertain.
    fn hard(self) -> Option<u8>;
    /// `Some(bit)` only when the belief rules out the other value entirely.
    fn certain(self) -> Option<u8>;
    fn is_erased(self) -> bool;
    fn as_ternary(self) -> Ternary;
}

impl Belief for Ternary {
    fn check(a: Self, b: Self) -> Self {
        match (a, b) {
            (Ternary::Erased, _) | (_, Ternary::Erased) => Ternary::Erased,
            (x, y) => Ternary::known(u8::from(x != y)),
        }
    }

    fn variable(top: Self, bottom: Self, partial: u8) -> Option<Self> {
        match (top.flip_by(partial), bottom) {
            (Ternary::Erased, y) => Some(y),
            (x, Ternary::Erased) => Some(x),
            (x, y) if x == y => Some(x),
            _ => None,
        }
    }

    fn unresolved() -> Self {
        Ternary::Erased
    }

    fn hard(self) -> Option<u8> {
        match self {
            Ternary::Zero => Some(0),
            Ternary::One => Some(1),
            Ternary::Erased => None,
        }
    }

    fn certain(self) -> Option<u8> {
        self.hard()
    }

    fn is_erased(self) -> bool {
        self == Ternary::Erased
    }

    fn as_ternary(self) -> Ternary {
        self
    }
}

impl Belief for f64 {
    fn check(a: Self, b: Self) -> Self {
        clamp_llr(boxplus(a, b))
    }

    fn variable(top: Self, bottom: Self, partial: u8) -> Option<Self> {
        let signed = if partial == 0 { top } else { -top };
        Some(clamp_llr(bottom + signed))
    }

    fn unresolved() -> Self {
        0.0
    }

    fn hard(self) -> Option<u8> {
        if self > 0.0 {
            Some(0)
        } else if self < 0.0 {
            Some(1)
        } else {
            None
        }
    }

    fn certain(self) -> Option<u8> {
        None
    }

    fn is_erased(self) -> bool {
        self == 0.0
    }

    fn as_ternary(self) -> Ternary {
        self.hard().map_or(Ternary::Erased, Ternary::known)
    }
}

fn clamp_llr(v: f64) -> f64 {
    v.clamp(-LLR_CLAMP, LLR_CLAMP)
}

/// `2·atanh(tanh(a/2)·tanh(b/2))` in a form that does not overflow.
pub fn boxplus(a: f64, b: f64) -> f64 {
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    let min = a.abs().min(b.abs());
    sign * min + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

struct DecodeState<'s, G> {
    is_info: &'s [bool],
    frozen: &'s [u8],
    u_hat: Vec<u8>,
    guesses: usize,
    guesser: &'s mut G,
    stage_counts: Vec<usize>,
    trace: Option<&'s mut [Ternary]>,
}

/// Decodes the sub-code of length `input.len()` whose first source bit is at
/// 0-based `base`, writing its codeword into `out`.
fn recurse<B: Belief, G: Guesser>(
    state: &mut DecodeState<'_, G>,
    input: &[B],
    stage: usize,
    base: usize,
    out: &mut [u8],
    scratch: &mut [Vec<B>],
) -> Result<()> {
    let len = input.len();
    if len == 1 {
        out[0] = decide(state, input[0], base)?;
        return Ok(());
    }
    let half = len / 2;
    let (buf, deeper) = scratch
        .split_first_mut()
        .expect("scratch depth matches block length");
    let buf = &mut buf[..half];
    let (top, bottom) = input.split_at(half);
    let (out_top, out_bottom) = out.split_at_mut(half);

    for ((slot, &a), &b) in buf.iter_mut().zip(top).zip(bottom) {
        *slot = B::check(a, b);
    }
    let mut erased = buf.iter().filter(|v| v.is_erased()).count();
    recurse(state, buf, stage + 1, base, out_top, deeper)?;

    for k in 0..half {
        buf[k] = match B::variable(top[k], bottom[k], out_top[k]) {
            Some(v) => v,
            None if state.guesses == 0 => {
                return Err(PolarError::ContradictoryObservation {
                    bit: base + half + 1,
                })
            }
            None => B::unresolved(),
        };
    }
    erased += buf.iter().filter(|v| v.is_erased()).count();
    state.stage_counts[stage] += erased;
    recurse(state, buf, stage + 1, base + half, out_bottom, deeper)?;

    for (a, &b) in out_top.iter_mut().zip(out_bottom.iter()) {
        *a ^= b;
    }
    Ok(())
}

fn decide<B: Belief, G: Guesser>(
    state: &mut DecodeState<'_, G>,
    belief: B,
    index: usize,
) -> Result<u8> {
    if let Some(trace) = state.trace.as_deref_mut() {
        trace[index] = belief.as_ternary();
    }
    let bit = if state.is_info[index] {
        match belief.hard() {
            Some(bit) => bit,
            None => {
                state.guesses += 1;
                state.guesser.guess(index + 1) & 1
            }
        }
    } else {
        let value = state.frozen[index];
        if state.guesses == 0 && belief.certain().is_some_and(|b| b != value) {
            return Err(PolarError::ContradictoryObservation { bit: index + 1 });
        }
        value
    };
    state.u_hat[index] = bit;
    Ok(bit)
}

/// Decision on `u₁` and `u₂` of a single Z-section from likelihood ratios
/// `LR(x₁)` and `LR(x₂)`, where `LR = P(y|0)/P(y|1)`.
///
/// `u₁` uses `(1 + L₁L₂)/(L₁ + L₂)`; `u₂` uses `L₂ · L₁^(1 − 2û₁)`.
pub fn z_section_decisions(lr_x1: f64, lr_x2: f64) -> (u8, u8) {
    let lr_u1 = (1.0 + lr_x1 * lr_x2) / (lr_x1 + lr_x2);
    let u1 = u8::from(lr_u1 < 1.0);
    let exponent = 1.0 - 2.0 * f64::from(u1);
    let lr_u2 = lr_x2 * lr_x1.powf(exponent);
    (u1, u8::from(lr_u2 < 1.0))
}

/// One case of the inverted-`x₁` Z-section check.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternCase {
    pub u1: u8,
    pub u2: u8,
    pub magnitude_x1: f64,
    pub magnitude_x2: f64,
    pub inverted: bool,
    pub decided: (u8, u8),
    pub passed: bool,
}

/// Runs a Z-section with `LR(x₁)` pointing at the wrong value and `LR(x₂)`
/// correct. Expects `û₁ = u₁ ⊕ 1` and `û₂ = u₂`. Control cases with both
/// ratios correct expect `(û₁, û₂) = (u₁, u₂)`.
pub fn appendix_pattern_e_check(magnitudes: &[f64]) -> Vec<PatternCase> {
    let lr_for = |bit: u8, magnitude: f64| if bit == 0 { magnitude } else { 1.0 / magnitude };
    let mut cases = Vec::new();
    for u1 in 0..=1u8 {
        for u2 in 0..=1u8 {
            let x1 = u1 ^ u2;
            let x2 = u2;
            for &m1 in magnitudes {
                for &m2 in magnitudes {
                    for inverted in [true, false] {
                        let lr_x1 = lr_for(if inverted { x1 ^ 1 } else { x1 }, m1);
                        let decided = z_section_decisions(lr_x1, lr_for(x2, m2));
                        let expected = if inverted { (u1 ^ 1, u2) } else { (u1, u2) };
                        cases.push(PatternCase {
                            u1,
                            u2,
                            magnitude_x1: m1,
                            magnitude_x2: m2,
                            inverted,
                            decided,
                            passed: decided == expected,
                        });
                    }
                }
            }
        }
    }
    cases
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{bhattacharyya_bec, Design};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_code() -> PolarCode {
        PolarCode::bec(4, 0.4, 8).unwrap()
    }

    fn bits_of(value: u64, len: usize) -> BitWord {
        BitWord::from_bools((0..len).map(|k| value >> k & 1 == 1))
    }

    /// Answers every guess with the true source bit.
    struct Genie<'a>(&'a BitWord);

    impl Guesser for Genie<'_> {
        fn guess(&mut self, position: usize) -> u8 {
            self.0.at(position)
        }
    }

    #[test]
    fn nonsystematic_examples() {
        let code = example_code();
        let zero_frozen = BitWord::zeros(8);
        assert_eq!(
            encode_nonsystematic(&code, &BitWord::zeros(8), &zero_frozen).unwrap(),
            BitWord::zeros(16)
        );
        // u with only u16 = 1; position 16 is the last information bit.
        let info = BitWord::unit(8, 8).unwrap();
        assert_eq!(
            encode_nonsystematic(&code, &info, &zero_frozen).unwrap(),
            BitWord::ones(16)
        );
        assert!(encode_nonsystematic(&code, &BitWord::zeros(7), &zero_frozen).is_err());
        assert!(encode_nonsystematic(&code, &BitWord::zeros(8), &BitWord::zeros(9)).is_err());
    }

    #[test]
    fn systematic_examples() {
        let code = example_code();
        let frozen = BitWord::zeros(8);
        assert_eq!(
            encode_systematic(&code, &BitWord::zeros(8), &frozen).unwrap(),
            BitWord::zeros(16)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let info = BitWord::from_bools((0..8).map(|_| rng.random::<bool>()));
            let x = encode_systematic(&code, &info, &frozen).unwrap();
            assert_eq!(x.gather(code.info_set()), info);
            let u = systematic_source(&code, &info, &frozen).unwrap();
            assert_eq!(code.spec().transform(&u).unwrap(), x);
            // Independent route: back-substitution on G_AA.
            let u_a = code.spec().lower_tri_solve(code.info_set(), &info).unwrap();
            assert_eq!(u.gather(code.info_set()), u_a);
        }
    }

    #[test]
    fn systematic_info_part_ignores_frozen_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=8u32 {
            let code = PolarCode::bec(n, 0.3, 1 << (n - 1)).unwrap();
            let nf = code.len() - code.k();
            for _ in 0..10 {
                let info = BitWord::from_bools((0..code.k()).map(|_| rng.random::<bool>()));
                let f1 = BitWord::from_bools((0..nf).map(|_| rng.random::<bool>()));
                let f2 = BitWord::from_bools((0..nf).map(|_| rng.random::<bool>()));
                let u1 = systematic_source(&code, &info, &f1).unwrap();
                let u2 = systematic_source(&code, &info, &f2).unwrap();
                assert_eq!(u1.gather(code.info_set()), u2.gather(code.info_set()));
                let x1 = encode_systematic(&code, &info, &f1).unwrap();
                let x2 = encode_systematic(&code, &info, &f2).unwrap();
                assert_eq!(x1.gather(code.info_set()), x2.gather(code.info_set()));
            }
        }
    }

    #[test]
    fn systematic_on_unordered_info_set() {
        // A = {1, 3} at N = 4 has G[2][1] = 1 with 2 frozen, so u_A depends on u_Ā.
        let z = bhattacharyya_bec(2, 0.5).unwrap();
        let code = PolarCode::from_info_set(2, vec![1, 3], z, Design::Bec { eps: 0.5 }).unwrap();
        assert!(!code.is_domination_closed());
        for info in 0..4 {
            for frozen in 0..4 {
                let info = bits_of(info, 2);
                let frozen = bits_of(frozen, 2);
                let x = encode_systematic(&code, &info, &frozen).unwrap();
                assert_eq!(x.gather(code.info_set()), info);
                let u = systematic_source(&code, &info, &frozen).unwrap();
                assert_eq!(u.gather(code.frozen_set()), frozen);
            }
        }
    }

    #[test]
    fn noiseless_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 0..=9u32 {
            for k in [1usize, (1usize << n) / 2, 1 << n]
                .into_iter()
                .filter(|&k| k > 0)
            {
                let code = PolarCode::bec(n, 0.35, k).unwrap();
                let nf = code.len() - code.k();
                let info = BitWord::from_bools((0..k).map(|_| rng.random::<bool>()));
                let frozen = BitWord::from_bools((0..nf).map(|_| rng.random::<bool>()));
                let x = encode_nonsystematic(&code, &info, &frozen).unwrap();
                let xs = encode_systematic(&code, &info, &frozen).unwrap();
                for obs in [SoftWord::clean_erasure(&x), SoftWord::clean_llr(&x)] {
                    let r = decode_sc(&code, &obs, &frozen, &mut rng).unwrap();
                    assert_eq!(r.info_bits, info);
                    assert_eq!(r.guess_count, 0);
                }
                for obs in [SoftWord::clean_erasure(&xs), SoftWord::clean_llr(&xs)] {
                    let r = decode_sc_en(&code, &obs, &frozen, &mut rng).unwrap();
                    assert_eq!(r.info_bits, info);
                    assert_eq!(r.x_hat.as_ref(), Some(&xs));
                    assert_eq!(r.u_hat.gather(code.frozen_set()), frozen);
                    assert_eq!(r.guess_count, 0);
                }
            }
        }
    }

    #[test]
    fn all_erased_bits_are_coin_flips() {
        let code = example_code();
        let frozen = BitWord::zeros(8);
        let obs = SoftWord::Erasure(vec![Ternary::Erased; 16]);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let trials = 10_000;
        let mut errors = 0usize;
        let mut decoder = ScDecoder::new(&code);
        for _ in 0..trials {
            let r = decoder
                .decode(&obs, &frozen, &mut CoinFlip(&mut rng))
                .unwrap();
            assert_eq!(r.guess_count, 8);
            errors += r.info_bits.weight();
        }
        let bits = (trials * 8) as f64;
        let rate = errors as f64 / bits;
        let sigma = (0.25 / bits).sqrt();
        assert!((rate - 0.5).abs() < 3.0 * sigma, "rate {rate}");
    }

    #[test]
    fn llr_sign_convention() {
        let code = PolarCode::bec(0, 0.5, 1).unwrap();
        let none = BitWord::zeros(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = decode_sc(&code, &SoftWord::Llr(vec![2.5]), &none, &mut rng).unwrap();
        assert_eq!(r.info_bits.as_slice(), &[0]);
        let r = decode_sc(&code, &SoftWord::Llr(vec![-0.1]), &none, &mut rng).unwrap();
        assert_eq!(r.info_bits.as_slice(), &[1]);
        let r = decode_sc(&code, &SoftWord::Llr(vec![0.0]), &none, &mut rng).unwrap();
        assert_eq!(r.guess_count, 1);
        let mut ones = 0;
        for _ in 0..2000 {
            ones += decode_sc(&code, &SoftWord::Llr(vec![0.0]), &none, &mut rng)
                .unwrap()
                .info_bits
                .weight();
        }
        assert!((800..1200).contains(&ones));
    }

    #[test]
    fn boxplus_matches_tanh_rule() {
        let direct = |a: f64, b: f64| 2.0 * ((a / 2.0).tanh() * (b / 2.0).tanh()).atanh();
        for &a in &[-8.0, -3.0, -0.7, -0.01, 0.0, 0.2, 1.0, 4.5, 9.0] {
            for &b in &[-6.0, -1.3, -0.2, 0.0, 0.05, 0.9, 2.0, 7.5] {
                assert!((boxplus(a, b) - direct(a, b)).abs() < 1e-9, "({a}, {b})");
            }
        }
        // Equal large inputs lose ln 2; saturated and moderate inputs give the moderate one.
        assert!((boxplus(40.0, 40.0) - (40.0 - 2f64.ln())).abs() < 1e-9);
        assert!((boxplus(40.0, -3.0) + 3.0).abs() < 1e-9);
    }

    #[test]
    fn sc_en_reencoding_cancels_full_error_vector() {
        // All-erased block: every information bit is a guess, so the script sets v_A directly.
        let code = example_code();
        let frozen = BitWord::zeros(8);
        let info = BitWord::parse("01101001").unwrap();
        let u = systematic_source(&code, &info, &frozen).unwrap();
        let u_a = u.gather(code.info_set());
        let obs = SoftWord::Erasure(vec![Ternary::Erased; 16]);
        let mut decoder = ScDecoder::new(&code);

        let flipped: Vec<u8> = u_a.as_slice().iter().map(|b| b ^ 1).collect();
        let r = decoder
            .decode_systematic(&obs, &frozen, &mut ScriptedGuesses::new(flipped))
            .unwrap();
        let wrong = r.info_bits.xor(&info).unwrap();
        // Info position 8 of A is index 16.
        assert_eq!(wrong.support(), vec![8]);

        let mut last_only = u_a.as_slice().to_vec();
        last_only[7] ^= 1;
        let r = decoder
            .decode_systematic(&obs, &frozen, &mut ScriptedGuesses::new(last_only))
            .unwrap();
        assert_eq!(r.info_bits.xor(&info).unwrap(), BitWord::ones(8));
    }

    #[test]
    fn contradiction_before_any_guess_is_an_error() {
        // N = 2, A = {2}: codewords are 00 and 11.
        let code = PolarCode::bec(1, 0.5, 1).unwrap();
        assert_eq!(code.info_set(), &[2]);
        let obs = SoftWord::Erasure(vec![Ternary::One, Ternary::Zero]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            decode_sc(&code, &obs, &BitWord::zeros(1), &mut rng),
            Err(PolarError::ContradictoryObservation { .. })
        ));
        // N = 2, A = {1, 2}: any observation is consistent, but inconsistent
        // partial sums can only come from corrupted input.
        let full = PolarCode::bec(1, 0.5, 2).unwrap();
        assert!(decode_sc(&full, &obs, &BitWord::zeros(0), &mut rng).is_ok());
        assert!(decode_sc(
            &code,
            &SoftWord::Llr(vec![-3.0, 3.0]),
            &BitWord::zeros(1),
            &mut rng
        )
        .is_ok());
    }

    #[test]
    fn length_errors() {
        let code = example_code();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let short = SoftWord::Erasure(vec![Ternary::Erased; 8]);
        assert!(decode_sc(&code, &short, &BitWord::zeros(8), &mut rng).is_err());
        let obs = SoftWord::Erasure(vec![Ternary::Erased; 16]);
        assert!(decode_sc(&code, &obs, &BitWord::zeros(3), &mut rng).is_err());
    }

    #[test]
    fn erasures_are_conserved_per_stage() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=8u32 {
            let code = PolarCode::bec(n, 0.4, 1 << (n - 1)).unwrap();
            let nf = code.len() - code.k();
            let mut decoder = ScDecoder::new(&code);
            for _ in 0..40 {
                let info = BitWord::from_bools((0..code.k()).map(|_| rng.random::<bool>()));
                let frozen = BitWord::from_bools((0..nf).map(|_| rng.random::<bool>()));
                let u = assemble_source(&code, &info, &frozen).unwrap();
                let x = code.spec().transform(&u).unwrap();
                let obs: Vec<Ternary> = x
                    .as_slice()
                    .iter()
                    .map(|&b| {
                        if rng.random_bool(0.4) {
                            Ternary::Erased
                        } else {
                            Ternary::known(b)
                        }
                    })
                    .collect();
                let (r, trace) = decoder
                    .decode_traced(&obs, &frozen, &mut Genie(&u))
                    .unwrap();
                assert_eq!(r.u_hat, u);
                let counts = r.stage_erasures.unwrap();
                assert!(counts.iter().all(|&c| c == counts[0]), "n={n} {counts:?}");
                assert_eq!(trace.iter().filter(|t| t.is_erased()).count(), counts[0]);
            }
        }
    }

    #[test]
    fn first_error_is_always_a_guess() {
        let code = PolarCode::bec(6, 0.45, 32).unwrap();
        let frozen = BitWord::zeros(32);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut decoder = ScDecoder::new(&code);
        for _ in 0..300 {
            let obs: Vec<Ternary> = (0..64)
                .map(|_| {
                    if rng.random_bool(0.45) {
                        Ternary::Erased
                    } else {
                        Ternary::Zero
                    }
                })
                .collect();
            let (r, trace) = decoder
                .decode_traced(&obs, &frozen, &mut CoinFlip(&mut rng))
                .unwrap();
            if let Some(first) = r.u_hat.support().first() {
                assert!(trace[first - 1].is_erased());
            }
        }
    }

    /// Ternary belief of `u_i` from exhaustive enumeration of every source
    /// word with the given prefix. `None` when no such word is consistent with
    /// the observation.
    fn reference_belief(len: usize, obs: &[Ternary], prefix: &[u8]) -> Option<Ternary> {
        let spec = crate::gf2::GeneratorSpec::for_len(len).unwrap();
        let i = prefix.len();
        let mut seen = [false; 2];
        for tail in 0u64..(1 << (len - i)) {
            let mut u = prefix.to_vec();
            u.extend((0..len - i).map(|k| (tail >> k & 1) as u8));
            let x = spec
                .transform(&BitWord::from_bits(u.clone()).unwrap())
                .unwrap();
            let consistent = obs
                .iter()
                .zip(x.as_slice())
                .all(|(o, &b)| o.is_erased() || *o == Ternary::known(b));
            if consistent {
                seen[u[i] as usize] = true;
            }
        }
        match seen {
            [false, false] => None,
            [true, false] => Some(Ternary::Zero),
            [false, true] => Some(Ternary::One),
            [true, true] => Some(Ternary::Erased),
        }
    }

    #[test]
    fn ternary_decoder_matches_brute_force_reference() {
        for n in 1..=3u32 {
            let len = 1usize << n;
            for k in 1..=len {
                let code = PolarCode::bec(n, 0.4, k).unwrap();
                let nf = len - k;
                let mut decoder = ScDecoder::new(&code);
                let full = (1u64 << k) - 1;
                for msg in [0, full, 0x5555_5555 & full, 0x3333_3333 & full] {
                    let info = bits_of(msg, k);
                    let frozen = BitWord::zeros(nf);
                    let x = encode_nonsystematic(&code, &info, &frozen).unwrap();
                    for pattern in 0u64..(1 << len) {
                        let obs: Vec<Ternary> = (0..len)
                            .map(|p| {
                                if pattern >> p & 1 == 1 {
                                    Ternary::Erased
                                } else {
                                    Ternary::known(x.as_slice()[p])
                                }
                            })
                            .collect();
                        // Every guess branch, enumerated by script.
                        let mut stack = vec![Vec::<u8>::new()];
                        while let Some(script) = stack.pop() {
                            let mut guesses = ScriptedGuesses::new(script.clone());
                            let (r, trace) =
                                decoder.decode_traced(&obs, &frozen, &mut guesses).unwrap();
                            if guesses.requested() > script.len() {
                                let mut a = script.clone();
                                a.push(0);
                                let mut b = script;
                                b.push(1);
                                stack.push(a);
                                stack.push(b);
                                continue;
                            }
                            let u_hat = r.u_hat.as_slice();
                            for i in 0..len {
                                match reference_belief(len, &obs, &u_hat[..i]) {
                                    Some(expected) => assert_eq!(
                                        trace[i],
                                        expected,
                                        "n={n} k={k} msg={msg} pattern={pattern:b} bit={}",
                                        i + 1
                                    ),
                                    None => break,
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pattern_e_inverted_first_symbol() {
        let cases = appendix_pattern_e_check(&[2.0, 10.0, 1e6]);
        assert_eq!(cases.len(), 4 * 9 * 2);
        assert!(
            cases.iter().all(|c| c.passed),
            "{:?}",
            cases.iter().find(|c| !c.passed)
        );
        let first = cases
            .iter()
            .find(|c| c.u1 == 0 && c.u2 == 0 && c.inverted)
            .unwrap();
        assert_eq!(first.decided, (1, 0));
        let last = cases
            .iter()
            .find(|c| c.u1 == 1 && c.u2 == 1 && c.inverted)
            .unwrap();
        assert_eq!(last.decided, (0, 1));
    }

    #[test]
    fn z_section_agrees_with_llr_decoder() {
        // A rate-one N = 2 code decodes exactly one Z-section.
        let code = PolarCode::bec(1, 0.5, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for &(l1, l2) in &[(2.0f64, 10.0f64), (0.5, 3.0), (0.1, 0.3), (7.0, 0.2)] {
            let (u1, u2) = z_section_decisions(l1, l2);
            let r = decode_sc(
                &code,
                &SoftWord::Llr(vec![l1.ln(), l2.ln()]),
                &BitWord::zeros(0),
                &mut rng,
            )
            .unwrap();
            assert_eq!(r.u_hat.as_slice(), &[u1, u2], "LR ({l1}, {l2})");
        }
    }

    #[test]
    fn soft_word_parsing() {
        assert_eq!(
            SoftWord::parse("01?1").unwrap(),
            SoftWord::Erasure(vec![
                Ternary::Zero,
                Ternary::One,
                Ternary::Erased,
                Ternary::One
            ])
        );
        assert_eq!(
            SoftWord::parse("1.5 -2 inf").unwrap(),
            SoftWord::Llr(vec![1.5, -2.0, f64::INFINITY])
        );
        assert!(SoftWord::parse("1.5 x").is_err());
        let w = SoftWord::Erasure(vec![Ternary::Zero, Ternary::Erased]);
        assert_eq!(SoftWord::parse(&w.to_string()).unwrap(), w);
    }
}
