//! Code construction: Bhattacharyya parameters, information-set selection,
//! brick-wall sets, and structural checks on the resulting codes.

use std::fmt;
use std::str::FromStr;

use crate::error::{PolarError, Result};
use crate::gf2::{bit_reversal_perm, check_ascending, entry_unchecked, GeneratorSpec};

/// Channel description a code was designed for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Design {
    /// Binary erasure channel with erasure probability `eps`.
    Bec { eps: f64 },
    /// BPSK over AWGN at `snr_db` (Eb/N0). The erasure recursion is seeded with `z0`.
    Awgn { snr_db: f64, z0: f64 },
}

impl Design {
    /// Seed of the Bhattacharyya recursion.
    pub fn seed(&self) -> f64 {
        match *self {
            Design::Bec { eps } => eps,
            Design::Awgn { z0, .. } => z0,
        }
    }

    /// Erasure probability or Eb/N0 in dB, whichever the design is parameterised by.
    pub fn param(&self) -> f64 {
        match *self {
            Design::Bec { eps } => eps,
            Design::Awgn { snr_db, .. } => snr_db,
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Design::Bec { eps } => write!(f, "bec:{eps}"),
            Design::Awgn { snr_db, .. } => write!(f, "awgn:{snr_db}"),
        }
    }
}

/// Immutable description of a polar code.
///
/// Information positions are 1-based and sorted ascending by index value.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarCode {
    spec: GeneratorSpec,
    info_set: Vec<usize>,
    frozen_set: Vec<usize>,
    is_info: Vec<bool>,
    z_values: Vec<f64>,
    design: Design,
    domination_closed: bool,
}

impl PolarCode {
    /// Code for a BEC(`eps`) with `k` information bits and block length `2^n`.
    pub fn bec(n: u32, eps: f64, k: usize) -> Result<Self> {
        let z = bhattacharyya_bec(n, eps)?;
        select_info_set(z, k, Design::Bec { eps })
    }

    /// Code for BPSK/AWGN at `snr_db` using the erasure recursion as design rule.
    pub fn awgn(n: u32, snr_db: f64, k: usize) -> Result<Self> {
        let len = 1usize << n;
        check_k(k, len)?;
        let z0 = awgn_design_z(snr_db, k as f64 / len as f64)?;
        let z = bhattacharyya_bec(n, z0)?;
        select_info_set(z, k, Design::Awgn { snr_db, z0 })
    }

    /// Code with an explicit information set. No ordering property is assumed.
    pub fn from_info_set(
        n: u32,
        info_set: Vec<usize>,
        z_values: Vec<f64>,
        design: Design,
    ) -> Result<Self> {
        let spec = GeneratorSpec::new(n)?;
        let len = spec.len();
        if z_values.len() != len {
            return Err(PolarError::LengthMismatch {
                expected: len,
                actual: z_values.len(),
            });
        }
        if let Some(z) = z_values.iter().find(|z| !(0.0..=1.0).contains(*z)) {
            return Err(PolarError::InvalidParameter(format!(
                "Bhattacharyya value {z} outside [0, 1]"
            )));
        }
        check_ascending(&info_set, len)?;
        let mut is_info = vec![false; len];
        for &a in &info_set {
            is_info[a - 1] = true;
        }
        let frozen_set = (1..=len).filter(|&i| !is_info[i - 1]).collect();
        let domination_closed = is_domination_closed(&is_info);
        Ok(PolarCode {
            spec,
            info_set,
            frozen_set,
            is_info,
            z_values,
            design,
            domination_closed,
        })
    }

    pub fn spec(&self) -> GeneratorSpec {
        self.spec
    }

    pub fn n(&self) -> u32 {
        self.spec.n()
    }

    /// Block length `N`.
    pub fn len(&self) -> usize {
        self.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of information bits `K`.
    pub fn k(&self) -> usize {
        self.info_set.len()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.len() as f64
    }

    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn frozen_set(&self) -> &[usize] {
        &self.frozen_set
    }

    /// True when 1-based `pos` is an information position.
    pub fn is_info(&self, pos: usize) -> bool {
        self.is_info[pos - 1]
    }

    pub(crate) fn info_mask(&self) -> &[bool] {
        &self.is_info
    }

    /// Bhattacharyya value of bit channel `i` lives at `z_values()[i - 1]`.
    pub fn z_values(&self) -> &[f64] {
        &self.z_values
    }

    pub fn z(&self, pos: usize) -> f64 {
        self.z_values[pos - 1]
    }

    pub fn design(&self) -> Design {
        self.design
    }

    /// True when every row of `G` that hits a column in `A` is itself in `A`,
    /// i.e. `G[Ā, A] = 0`.
    pub fn is_domination_closed(&self) -> bool {
        self.domination_closed
    }

    /// Writes the plain-text code file.
    ///
    /// ```text
    /// # syspolar-code schema=1 design=bec:0.4
    /// 16 8 0.4
    /// 8
    /// 10
    /// ...
    /// ```
    ///
    /// The header holds `N K seed`; the seed is the erasure probability that
    /// starts the Bhattacharyya recursion.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# syspolar-code schema=1 design={}\n{} {} {}\n",
            self.design,
            self.len(),
            self.k(),
            self.design.seed()
        );
        for a in &self.info_set {
            out.push_str(&a.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut design_tag: Option<String> = None;
        let mut lines = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for token in comment.split_whitespace() {
                    if let Some(v) = token.strip_prefix("schema=") {
                        if v != "1" {
                            return Err(PolarError::Parse(format!("unsupported code schema {v}")));
                        }
                    } else if let Some(v) = token.strip_prefix("design=") {
                        design_tag = Some(v.to_string());
                    }
                }
                continue;
            }
            lines.push(line);
        }
        let (header, body) = lines
            .split_first()
            .ok_or_else(|| PolarError::Parse("empty code file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(PolarError::Parse(format!(
                "expected header `N K eps`, got `{header}`"
            )));
        }
        let len: usize = parse_field(fields[0], "N")?;
        let k: usize = parse_field(fields[1], "K")?;
        let seed: f64 = parse_field(fields[2], "eps")?;
        let spec = GeneratorSpec::for_len(len)?;
        if body.len() != k {
            return Err(PolarError::Parse(format!(
                "header declares K = {k} but {} indices follow",
                body.len()
            )));
        }
        let info_set = body
            .iter()
            .map(|l| parse_field::<usize>(l, "info index"))
            .collect::<Result<Vec<_>>>()?;
        let design = match design_tag.as_deref().map(ChannelDesign::from_str) {
            Some(Ok(ChannelDesign::Awgn(snr_db))) => Design::Awgn { snr_db, z0: seed },
            None | Some(Ok(ChannelDesign::Bec(_))) => Design::Bec { eps: seed },
            Some(Err(e)) => return Err(e),
        };
        let z = bhattacharyya_bec(spec.n(), seed)?;
        Self::from_info_set(spec.n(), info_set, z, design)
    }
}

/// `--channel` style design argument: `bec:EPS` or `awgn:SNRDB`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelDesign {
    Bec(f64),
    Awgn(f64),
}

impl FromStr for ChannelDesign {
    type Err = PolarError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s.split_once(':').ok_or_else(|| {
            PolarError::Parse(format!("expected bec:EPS or awgn:SNRDB, got `{s}`"))
        })?;
        let value: f64 = parse_field(value, "channel parameter")?;
        match kind.to_ascii_lowercase().as_str() {
            "bec" => Ok(ChannelDesign::Bec(value)),
            "awgn" | "biawgn" => Ok(ChannelDesign::Awgn(value)),
            other => Err(PolarError::Parse(format!("unknown channel kind `{other}`"))),
        }
    }
}

impl ChannelDesign {
    /// Builds the code for this design with `k` information bits.
    pub fn build(self, n: u32, k: usize) -> Result<PolarCode> {
        match self {
            ChannelDesign::Bec(eps) => PolarCode::bec(n, eps, k),
            ChannelDesign::Awgn(snr) => PolarCode::awgn(n, snr, k),
        }
    }
}

fn parse_field<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| PolarError::Parse(format!("invalid {what}: `{s}`")))
}

fn check_k(k: usize, len: usize) -> Result<()> {
    if k == 0 || k > len {
        Err(PolarError::InfoLengthOutOfRange { k, len })
    } else {
        Ok(())
    }
}

/// `G[Ā, A] = 0` holds iff the set bits of every info index can be extended
/// by any one more bit and stay inside `A`.
fn is_domination_closed(is_info: &[bool]) -> bool {
    let len = is_info.len();
    (0..len).filter(|&j| is_info[j]).all(|j| {
        let mut bit = 1;
        while bit < len {
            if j & bit == 0 && !is_info[j | bit] {
                return false;
            }
            bit <<= 1;
        }
        true
    })
}

/// Bhattacharyya parameters of the `2^n` bit channels of a BEC(`eps`).
///
/// Bit channel `i` follows the branch labels given by the binary expansion of
/// `i − 1`, most significant bit at the root: label 0 maps `Z ↦ 2Z − Z²`,
/// label 1 maps `Z ↦ Z²`.
pub fn bhattacharyya_bec(n: u32, eps: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(PolarError::ErasureOutOfRange(eps));
    }
    GeneratorSpec::new(n)?;
    let mut z = vec![eps];
    for _ in 0..n {
        // Appending the next label as the new least significant bit.
        let mut next = Vec::with_capacity(z.len() * 2);
        for &v in &z {
            next.push((2.0 * v - v * v).clamp(0.0, 1.0));
            next.push((v * v).clamp(0.0, 1.0));
        }
        z = next;
    }
    Ok(z)
}

/// Picks the `k` bit channels with the smallest Bhattacharyya values.
///
/// Equal values prefer the larger index. The result is sorted by index.
pub fn select_info_set(z_values: Vec<f64>, k: usize, design: Design) -> Result<PolarCode> {
    let spec = GeneratorSpec::for_len(z_values.len())?;
    check_k(k, spec.len())?;
    let mut order: Vec<usize> = (1..=spec.len()).collect();
    order.sort_by(|&a, &b| z_values[a - 1].total_cmp(&z_values[b - 1]).then(b.cmp(&a)));
    let mut info: Vec<usize> = order[..k].to_vec();
    info.sort_unstable();
    PolarCode::from_info_set(spec.n(), info, z_values, design)
}

/// Seed `Z₀ = exp(−Es/N₀)` for BPSK at Eb/N0 = `snr_db`, with `Es = rate · Eb`.
pub fn awgn_design_z(snr_db: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(PolarError::InvalidParameter(format!(
            "rate {rate} outside (0, 1]"
        )));
    }
    let es_n0 = rate * 10f64.powf(snr_db / 10.0);
    Ok((-es_n0).exp())
}

/// Information positions whose Bhattacharyya value exceeds a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct BrickWallSets {
    pub alpha: f64,
    /// Ascending positions `{i ∈ A : Z_i > alpha}`, never empty.
    pub positions: Vec<usize>,
}

impl BrickWallSets {
    /// Smallest position `I₁`.
    pub fn first(&self) -> usize {
        self.positions[0]
    }

    /// Largest position `I_m`.
    pub fn last(&self) -> usize {
        *self.positions.last().expect("brick wall is never empty")
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

pub fn brick_wall(code: &PolarCode, alpha: f64) -> Result<BrickWallSets> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PolarError::InvalidParameter(format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    let positions: Vec<usize> = code
        .info_set()
        .iter()
        .copied()
        .filter(|&i| code.z(i) > alpha)
        .collect();
    if positions.is_empty() {
        return Err(PolarError::EmptyBrickWall { alpha });
    }
    Ok(BrickWallSets { alpha, positions })
}

/// Outcome of a structural check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    pub name: &'static str,
    /// Number of entries or pairs examined.
    pub checked: usize,
    /// First violation found, if any.
    pub violation: Option<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.violation {
            None => write!(f, "{}: pass ({} checked)", self.name, self.checked),
            Some(v) => write!(f, "{}: FAIL after {} checked: {v}", self.name, self.checked),
        }
    }
}

/// `G[i][j] = 0` for every frozen row `i` and information column `j`.
pub fn verify_theorem1(code: &PolarCode) -> CheckReport {
    let mut checked = 0;
    for &j in code.info_set() {
        for &i in code.frozen_set() {
            checked += 1;
            if entry_unchecked(i, j) == 1 {
                return CheckReport {
                    name: "frozen-rows-miss-info-columns",
                    checked,
                    violation: Some(format!(
                        "G[{i}][{j}] = 1 with {i} frozen and {j} information"
                    )),
                };
            }
        }
    }
    CheckReport {
        name: "frozen-rows-miss-info-columns",
        checked,
        violation: None,
    }
}

/// For information positions `i, j` with `G[i][j] = 1`: `Z_i ≤ Z_j`.
pub fn verify_corollary2(code: &PolarCode) -> CheckReport {
    let mut checked = 0;
    for &j in code.info_set() {
        for &i in code.info_set().iter().filter(|&&i| i >= j) {
            if entry_unchecked(i, j) == 0 {
                continue;
            }
            checked += 1;
            if code.z(i) > code.z(j) {
                return CheckReport {
                    name: "intersecting-rows-are-better",
                    checked,
                    violation: Some(format!(
                        "G[{i}][{j}] = 1 but Z_{i} = {} > Z_{j} = {}",
                        code.z(i),
                        code.z(j)
                    )),
                };
            }
        }
    }
    CheckReport {
        name: "intersecting-rows-are-better",
        checked,
        violation: None,
    }
}

/// `(B·F^{⊗n})[A, b] = F^{⊗n}[A, A]` where `b` is the bit-reversed image of `A`.
pub fn verify_gp_equivalence(n: u32, info_set: &[usize]) -> Result<CheckReport> {
    let spec = GeneratorSpec::new(n)?;
    check_ascending(info_set, spec.len())?;
    let perm = bit_reversal_perm(n);
    let image: Vec<usize> = info_set.iter().map(|&a| perm[a - 1]).collect();
    // Row i of B·F^{⊗n} is row perm(i) of F^{⊗n}.
    let permuted_entry = |i: usize, j: usize| entry_unchecked(perm[i - 1], j);
    let mut checked = 0;
    for &r in info_set {
        for (c, &b) in image.iter().enumerate() {
            checked += 1;
            let a = info_set[c];
            if permuted_entry(r, b) != entry_unchecked(r, a) {
                return Ok(CheckReport {
                    name: "permuted-generator-equivalence",
                    checked,
                    violation: Some(format!("(BG)[{r}][{b}] != G[{r}][{a}]")),
                });
            }
        }
    }
    Ok(CheckReport {
        name: "permuted-generator-equivalence",
        checked,
        violation: None,
    })
}

/// Column weights against brute-force column sums, for every column of `G`.
pub fn verify_column_weights(n: u32) -> Result<CheckReport> {
    let spec = GeneratorSpec::new(n)?;
    let len = spec.len();
    for j in 1..=len {
        let sum: usize = (j..=len).map(|i| entry_unchecked(i, j) as usize).sum();
        if sum != spec.column_weight(j)? {
            return Ok(CheckReport {
                name: "column-weights",
                checked: j,
                violation: Some(format!(
                    "column {j}: sum {sum} != 2^zeros = {}",
                    spec.column_weight(j)?
                )),
            });
        }
    }
    Ok(CheckReport {
        name: "column-weights",
        checked: len,
        violation: None,
    })
}
