//! Systematic Reed-Solomon sliding network code (RS-SNC).
//!
//! Block `i` of the coded stream is `[s_i | sum_{l=0..L} P_l^T s_{i-l}]`: the `k`
//! source packets followed by `n - k` parity packets mixing the current block and
//! the previous `L` blocks. The parity matrices `P_0..P_L` are disjoint column
//! groups of one Vandermonde matrix.
//!
//! Packets are rows of a [`Matrix`]; a block of `k` source packets of `w`
//! symbols each is a `k x w` matrix.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galois::{self, FieldElem, GaloisError, GaloisField, Matrix};

/// Largest `(L+1) n` accepted by the exhaustive MDP checker.
pub const MDP_CHECK_BUDGET: usize = 20;

/// Largest `(L+1) n` at which [`build_generators`] verifies each candidate.
pub const GENERATOR_VERIFY_LIMIT: usize = 12;

/// Number of consecutive seeds [`build_generators`] tries before giving up.
pub const GENERATOR_MAX_RETRIES: u64 = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("invalid code parameters: {0}")]
    InvalidParams(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("exhaustive check needs (L+1)n <= {MDP_CHECK_BUDGET}, got {0}")]
    BudgetExceeded(usize),
    #[error("no MDP generator set found for seeds {first}..{last}")]
    NoMdpGenerators { first: u64, last: u64 },
    #[error(transparent)]
    Field(#[from] GaloisError),
}

/// The `(n, k, L, q)` tuple of an RS-SNC instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeParams {
    n: usize,
    k: usize,
    memory: usize,
    field_order: usize,
}

impl CodeParams {
    pub fn new(n: usize, k: usize, memory: usize, field_order: usize) -> Result<Self, CodeError> {
        if k == 0 || k > n {
            return Err(CodeError::InvalidParams(format!("need 1 <= k <= n, got n={n} k={k}")));
        }
        GaloisField::with_order(field_order)?;
        let needed = (memory + 1) * n + 1;
        if field_order < needed {
            return Err(CodeError::InvalidParams(format!(
                "GF({field_order}) has too few points for (L+1)n+1 = {needed}"
            )));
        }
        Ok(CodeParams {
            n,
            k,
            memory,
            field_order,
        })
    }

    /// Parameters over GF(256).
    pub fn over_gf256(n: usize, k: usize, memory: usize) -> Result<Self, CodeError> {
        Self::new(n, k, memory, 256)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Memory length `L`.
    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn field_order(&self) -> usize {
        self.field_order
    }

    /// Parity packets per block, `n - k`.
    pub fn redundancy(&self) -> usize {
        self.n - self.k
    }

    /// Number of blocks in the largest decoding window, `L + 1`.
    pub fn window_blocks(&self) -> usize {
        self.memory + 1
    }

    pub fn field(&self) -> &'static GaloisField {
        GaloisField::with_order(self.field_order).expect("validated at construction")
    }
}

/// Parity matrices `P_0..P_L` of a systematic RS-SNC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    params: CodeParams,
    seed: u64,
    parity: Vec<Matrix>,
    points: Vec<FieldElem>,
}

/// JSON form of a [`GeneratorSet`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorArchive {
    pub params: CodeParams,
    pub seed: u64,
    pub points: Vec<u8>,
    /// `parity[l][row][col]`, each `k x (n-k)`.
    pub parity: Vec<Vec<Vec<u8>>>,
}

impl GeneratorSet {
    /// Assembles a generator set from explicit parity matrices. No MDP check is
    /// made; use [`is_mdp`] for that.
    pub fn from_parity(
        params: CodeParams,
        parity: Vec<Matrix>,
        points: Vec<FieldElem>,
        seed: u64,
    ) -> Result<Self, CodeError> {
        if parity.len() != params.window_blocks() {
            return Err(CodeError::Shape(format!(
                "expected {} parity matrices, got {}",
                params.window_blocks(),
                parity.len()
            )));
        }
        let field = params.field();
        for (l, p) in parity.iter().enumerate() {
            if p.rows() != params.k || p.cols() != params.redundancy() {
                return Err(CodeError::Shape(format!(
                    "P_{l} is {}x{}, expected {}x{}",
                    p.rows(),
                    p.cols(),
                    params.k,
                    params.redundancy()
                )));
            }
            if p.field().bits() != field.bits() {
                return Err(GaloisError::FieldMismatch.into());
            }
        }
        Ok(GeneratorSet {
            params,
            seed,
            parity,
            points,
        })
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    /// Seed whose point permutation produced this set.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `P_l` for `l` in `0..=L`.
    pub fn parity(&self, l: usize) -> &Matrix {
        &self.parity[l]
    }

    /// Evaluation points, `n - k` consecutive ones per `P_l`.
    pub fn points(&self) -> &[FieldElem] {
        &self.points
    }

    /// `G_l`: `[I_k | P_0]` for `l = 0`, `[0 | P_l]` otherwise.
    pub fn generator(&self, l: usize) -> Matrix {
        let (n, k) = (self.params.n, self.params.k);
        let mut g = Matrix::zeros(self.params.field(), k, n);
        for r in 0..k {
            if l == 0 {
                g.set(r, r, FieldElem::ONE);
            }
            for c in 0..n - k {
                g.set(r, k + c, self.parity[l].get(r, c));
            }
        }
        g
    }

    pub fn to_archive(&self) -> GeneratorArchive {
        GeneratorArchive {
            params: self.params,
            seed: self.seed,
            points: self.points.iter().map(|p| p.value()).collect(),
            parity: self.parity.iter().map(Matrix::to_rows).collect(),
        }
    }

    pub fn from_archive(archive: &GeneratorArchive) -> Result<Self, CodeError> {
        let params = CodeParams::new(
            archive.params.n,
            archive.params.k,
            archive.params.memory,
            archive.params.field_order,
        )?;
        let field = params.field();
        let parity = archive
            .parity
            .iter()
            .map(|rows| {
                let rows: Vec<Vec<u32>> = rows
                    .iter()
                    .map(|r| r.iter().map(|&v| v as u32).collect())
                    .collect();
                if rows.is_empty() {
                    Ok(Matrix::zeros(field, 0, params.redundancy()))
                } else {
                    Matrix::from_rows(field, &rows)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let points = archive
            .points
            .iter()
            .map(|&v| field.elem(v as u32))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_parity(params, parity, points, archive.seed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_archive()).expect("archive serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, CodeError> {
        let archive: GeneratorArchive = serde_json::from_str(json)
            .map_err(|e| CodeError::InvalidParams(format!("generator archive: {e}")))?;
        Self::from_archive(&archive)
    }
}

/// Generator set for one seed, without any MDP verification.
///
/// The nonzero field elements are shuffled by a seeded ChaCha stream; `P_l`
/// takes points `l(n-k)..(l+1)(n-k)` of that order and uses rows `1..=k` of the
/// `(k+1)`-row Vandermonde matrix over them, i.e. `P_l[i][j] = x_j^(i+1)`.
pub fn generators_from_seed(params: CodeParams, seed: u64) -> Result<GeneratorSet, CodeError> {
    let field = params.field();
    let r = params.redundancy();
    let needed = params.window_blocks() * r;
    let mut pool: Vec<FieldElem> = field.elements().skip(1).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let points: Vec<FieldElem> = pool[..needed].to_vec();

    let parity = if r == 0 {
        vec![Matrix::zeros(field, params.k, 0); params.window_blocks()]
    } else {
        let v = galois::vandermonde(field, &points, params.k + 1)?;
        (0..params.window_blocks())
            .map(|l| v.row_range(1, params.k + 1).col_range(l * r, (l + 1) * r))
            .collect()
    };
    GeneratorSet::from_parity(params, parity, points, seed)
}

/// Deterministic systematic generator set for `params`.
///
/// When `(L+1) n <= GENERATOR_VERIFY_LIMIT` each candidate is checked with
/// [`is_mdp`] and the next seed is tried on failure; the accepted seed is
/// available from [`GeneratorSet::seed`]. Larger codes are returned unverified.
pub fn build_generators(params: CodeParams, point_seed: u64) -> Result<GeneratorSet, CodeError> {
    let window = params.window_blocks() * params.n;
    if window > GENERATOR_VERIFY_LIMIT || params.redundancy() == 0 {
        return generators_from_seed(params, point_seed);
    }
    for offset in 0..GENERATOR_MAX_RETRIES {
        let seed = point_seed.wrapping_add(offset);
        let gens = generators_from_seed(params, seed)?;
        if is_mdp(&gens)?.is_mdp() {
            return Ok(gens);
        }
    }
    Err(CodeError::NoMdpGenerators {
        first: point_seed,
        last: point_seed.wrapping_add(GENERATOR_MAX_RETRIES - 1),
    })
}

/// Encodes the current block. `history[0]` is the current source block,
/// `history[l]` is `l` blocks back; missing entries are zero blocks.
///
/// Returns the `n x w` coded block.
pub fn encode_block(history: &[Matrix], gens: &GeneratorSet) -> Result<Matrix, CodeError> {
    let p = &gens.params;
    let current = history
        .first()
        .ok_or_else(|| CodeError::Shape("history must contain the current block".into()))?;
    if history.len() > p.window_blocks() {
        return Err(CodeError::Shape(format!(
            "history has {} blocks, memory allows {}",
            history.len(),
            p.window_blocks()
        )));
    }
    let width = current.cols();
    for (l, s) in history.iter().enumerate() {
        if s.rows() != p.k || s.cols() != width {
            return Err(CodeError::Shape(format!(
                "history[{l}] is {}x{}, expected {}x{width}",
                s.rows(),
                s.cols(),
                p.k
            )));
        }
    }
    let field = p.field();
    let mut parity = Matrix::zeros(field, p.redundancy(), width);
    for (l, s) in history.iter().enumerate() {
        let term = gens.parity[l].transpose().mul(s)?;
        parity = parity.add(&term)?;
    }
    let mut coded = Matrix::zeros(field, p.n, width);
    for r in 0..p.k {
        coded.row_mut(r).copy_from_slice(current.row(r));
    }
    for r in 0..p.redundancy() {
        coded.row_mut(p.k + r).copy_from_slice(parity.row(r));
    }
    Ok(coded)
}

/// Erasure masks over consecutive blocks of a window, target block first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ErasurePattern {
    n: usize,
    masks: Vec<Vec<bool>>,
}

impl ErasurePattern {
    pub fn new(n: usize, masks: Vec<Vec<bool>>) -> Result<Self, CodeError> {
        if let Some(bad) = masks.iter().find(|m| m.len() != n) {
            return Err(CodeError::Shape(format!("mask of length {} for n = {n}", bad.len())));
        }
        Ok(ErasurePattern { n, masks })
    }

    /// Pattern from the low `blocks * n` bits of `bits`; bit `j*n + i` erases
    /// packet `i` of block `j`.
    pub fn from_bits(n: usize, blocks: usize, bits: u64) -> Self {
        let masks = (0..blocks)
            .map(|j| (0..n).map(|i| bits >> (j * n + i) & 1 == 1).collect())
            .collect();
        ErasurePattern { n, masks }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> usize {
        self.masks.len()
    }

    pub fn is_erased(&self, block: usize, packet: usize) -> bool {
        self.masks[block][packet]
    }

    pub fn mask(&self, block: usize) -> &[bool] {
        &self.masks[block]
    }

    /// Erasure counts `delta_0..delta_l`.
    pub fn counts(&self) -> Vec<usize> {
        self.masks.iter().map(|m| m.iter().filter(|&&e| e).count()).collect()
    }
}

/// Outcome of a decoding attempt on the target block of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Recovery {
    /// Recovered using the first `l + 1` blocks of the window.
    Window(usize),
    Undecodable,
}

impl Recovery {
    pub fn is_decoded(self) -> bool {
        matches!(self, Recovery::Window(_))
    }
}

/// Smallest window over which the per-block surpluses (received packets minus
/// `k`) accumulate to a nonnegative total.
///
/// With `n` packets sent per block the surplus is `n - k - delta_j`, and this is
/// the count rule of [`decodable_by_count`]; blocks of varying length (after
/// retransmission) use the same rule.
pub fn first_recovering_window<I>(surpluses: I) -> Recovery
where
    I: IntoIterator<Item = i64>,
{
    let mut total = 0i64;
    for (l, s) in surpluses.into_iter().enumerate() {
        total += s;
        if total >= 0 {
            return Recovery::Window(l);
        }
    }
    Recovery::Undecodable
}

/// Count rule: the smallest `l` with `sum_{j<=l} delta_j <= (l+1)(n-k)`, looking
/// at no more than `L + 1` blocks.
pub fn decodable_by_count(counts: &[usize], params: &CodeParams) -> Recovery {
    debug_assert!(counts.iter().all(|&d| d <= params.n));
    let r = params.redundancy() as i64;
    first_recovering_window(
        counts
            .iter()
            .take(params.window_blocks())
            .map(|&d| r - d as i64),
    )
}

/// Everything the decoder sees for one target block.
#[derive(Debug, Clone, Copy)]
pub struct ReceivedWindow<'a> {
    /// Source blocks before the target, most recent first. These are known
    /// (first-block convention); fewer than `L` entries means stream start.
    pub known_history: &'a [Matrix],
    /// Coded `n x w` blocks starting at the target. Entries at erased
    /// positions are ignored.
    pub blocks: &'a [Matrix],
    pub erasures: &'a ErasurePattern,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeOutcome {
    Decoded { window: usize, block: Matrix },
    /// No window up to the available length determines the target block.
    Failure,
}

impl DecodeOutcome {
    pub fn window(&self) -> Recovery {
        match self {
            DecodeOutcome::Decoded { window, .. } => Recovery::Window(*window),
            DecodeOutcome::Failure => Recovery::Undecodable,
        }
    }
}

/// Recovers the `k` source packets of the target block (block 0 of the window)
/// by Gaussian elimination, growing the window one block at a time.
pub fn window_decode(rx: &ReceivedWindow<'_>, gens: &GeneratorSet) -> Result<DecodeOutcome, CodeError> {
    let p = &gens.params;
    let (n, k, memory) = (p.n, p.k, p.memory);
    if rx.blocks.is_empty() {
        return Err(CodeError::Shape("window has no blocks".into()));
    }
    if rx.blocks.len() > p.window_blocks() || rx.erasures.blocks() < rx.blocks.len() {
        return Err(CodeError::Shape(format!(
            "{} blocks with {} erasure masks, memory allows {}",
            rx.blocks.len(),
            rx.erasures.blocks(),
            p.window_blocks()
        )));
    }
    if rx.erasures.n() != n {
        return Err(CodeError::Shape(format!("erasure masks for n = {}", rx.erasures.n())));
    }
    if rx.known_history.len() > memory {
        return Err(CodeError::Shape(format!(
            "{} history blocks for memory {memory}",
            rx.known_history.len()
        )));
    }
    let width = rx.blocks[0].cols();
    for b in rx.blocks {
        if b.rows() != n || b.cols() != width {
            return Err(CodeError::Shape(format!("coded block is {}x{}", b.rows(), b.cols())));
        }
    }
    for h in rx.known_history {
        if h.rows() != k || h.cols() != width {
            return Err(CodeError::Shape(format!("history block is {}x{}", h.rows(), h.cols())));
        }
    }

    let field = p.field();
    let target_lost: Vec<usize> = (0..k).filter(|&a| rx.erasures.is_erased(0, a)).collect();
    if target_lost.is_empty() {
        return Ok(DecodeOutcome::Decoded {
            window: 0,
            block: rx.blocks[0].row_range(0, k),
        });
    }

    for l in 0..rx.blocks.len() {
        // Unknowns: erased systematic packets of blocks 0..=l, target block first.
        let unknowns: Vec<(usize, usize)> = (0..=l)
            .flat_map(|j| (0..k).map(move |a| (j, a)))
            .filter(|&(j, a)| rx.erasures.is_erased(j, a))
            .collect();
        let unknown_index = |j: usize, a: usize| unknowns.iter().position(|&u| u == (j, a));

        let mut rows: Vec<Vec<FieldElem>> = Vec::new();
        let mut rhs: Vec<Vec<FieldElem>> = Vec::new();
        for j in 0..=l {
            for c in 0..p.redundancy() {
                if rx.erasures.is_erased(j, k + c) {
                    continue;
                }
                let mut coeffs = vec![FieldElem::ZERO; unknowns.len()];
                let mut value = rx.blocks[j].row(k + c).to_vec();
                for t in 0..=memory {
                    let pt = &gens.parity[t];
                    if t <= j {
                        let src = j - t;
                        for a in 0..k {
                            let coef = pt.get(a, c);
                            if coef.is_zero() {
                                continue;
                            }
                            if let Some(u) = unknown_index(src, a) {
                                coeffs[u] = field.add(coeffs[u], coef);
                            } else {
                                let known = rx.blocks[src].row(a);
                                for (v, &s) in value.iter_mut().zip(known) {
                                    *v = field.sub(*v, field.mul(coef, s));
                                }
                            }
                        }
                    } else if let Some(h) = rx.known_history.get(t - j - 1) {
                        for a in 0..k {
                            let coef = pt.get(a, c);
                            for (v, &s) in value.iter_mut().zip(h.row(a)) {
                                *v = field.sub(*v, field.mul(coef, s));
                            }
                        }
                    }
                }
                rows.push(coeffs);
                rhs.push(value);
            }
        }
        if rows.len() < target_lost.len() {
            continue;
        }
        let a = Matrix::from_elems(field, rows.len(), unknowns.len(), rows.concat())?;
        let b = Matrix::from_elems(field, rhs.len(), width, rhs.concat())?;
        let targets: Vec<usize> = (0..target_lost.len()).collect();
        if let Some(values) = galois::solve_for_unknowns(&a, &b, &targets)? {
            let mut block = rx.blocks[0].row_range(0, k);
            for (i, &pos) in target_lost.iter().enumerate() {
                block.row_mut(pos).copy_from_slice(values.row(i));
            }
            return Ok(DecodeOutcome::Decoded { window: l, block });
        }
    }
    Ok(DecodeOutcome::Failure)
}

/// One erasure pattern on which the count rule and the algebraic decoder differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disagreement {
    pub pattern: ErasurePattern,
    pub by_count: Recovery,
    pub by_decoder: Recovery,
    /// The decoder claimed success but returned wrong data.
    pub wrong_data: bool,
}

/// Exhaustive comparison of [`decodable_by_count`] against [`window_decode`]
/// over all `2^((L+1)n)` erasure patterns of a full window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementReport {
    pub patterns: u64,
    pub decodable_by_count: u64,
    pub decodable_by_decoder: u64,
    pub disagreements: Vec<Disagreement>,
}

impl AgreementReport {
    /// Patterns the count rule accepts but the decoder cannot recover.
    pub fn mdp_violations(&self) -> impl Iterator<Item = &Disagreement> {
        self.disagreements
            .iter()
            .filter(|d| d.wrong_data || (d.by_count.is_decoded() && !d.by_decoder.is_decoded()))
    }
}

/// Runs the decoder on every erasure pattern of a full `(L+1)`-block window.
pub fn check_decoder_agreement(gens: &GeneratorSet) -> Result<AgreementReport, CodeError> {
    let p = gens.params;
    let blocks = p.window_blocks();
    let total_bits = blocks * p.n;
    if total_bits > MDP_CHECK_BUDGET {
        return Err(CodeError::BudgetExceeded(total_bits));
    }
    let field = p.field();
    let width = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_da7a);
    let mut random_block = |rows: usize| {
        let order = field.order() as u32;
        let data = (0..rows * width)
            .map(|_| FieldElem(rand::Rng::gen_range(&mut rng, 0..order) as u8))
            .collect();
        Matrix::from_elems(field, rows, width, data).expect("shape matches")
    };
    // Source stream: L known blocks followed by the L+1 window blocks.
    let history: Vec<Matrix> = (0..p.memory).map(|_| random_block(p.k)).collect();
    let window_src: Vec<Matrix> = (0..blocks).map(|_| random_block(p.k)).collect();
    let mut stream: Vec<Matrix> = history.iter().rev().cloned().collect();
    stream.extend(window_src.iter().cloned());
    let coded: Vec<Matrix> = (0..blocks)
        .map(|j| {
            let pos = p.memory + j;
            let hist: Vec<Matrix> = (0..=p.memory).map(|t| stream[pos - t].clone()).collect();
            encode_block(&hist, gens)
        })
        .collect::<Result<_, _>>()?;

    let mut report = AgreementReport {
        patterns: 0,
        decodable_by_count: 0,
        decodable_by_decoder: 0,
        disagreements: Vec::new(),
    };
    for bits in 0..(1u64 << total_bits) {
        let pattern = ErasurePattern::from_bits(p.n, blocks, bits);
        let by_count = decodable_by_count(&pattern.counts(), &p);
        let rx = ReceivedWindow {
            known_history: &history,
            blocks: &coded,
            erasures: &pattern,
        };
        let outcome = window_decode(&rx, gens)?;
        let wrong_data = matches!(&outcome, DecodeOutcome::Decoded { block, .. } if *block != window_src[0]);
        let by_decoder = outcome.window();
        report.patterns += 1;
        report.decodable_by_count += by_count.is_decoded() as u64;
        report.decodable_by_decoder += by_decoder.is_decoded() as u64;
        if by_count != by_decoder || wrong_data {
            report.disagreements.push(Disagreement {
                pattern,
                by_count,
                by_decoder,
                wrong_data,
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MdpVerdict {
    Mdp,
    /// A pattern accepted by the count rule that the decoder cannot recover.
    Counterexample(Disagreement),
}

impl MdpVerdict {
    pub fn is_mdp(&self) -> bool {
        matches!(self, MdpVerdict::Mdp)
    }
}

/// Exhaustive MDP check: every pattern the count rule accepts at window `l`
/// must be recovered by the algebraic decoder.
pub fn is_mdp(gens: &GeneratorSet) -> Result<MdpVerdict, CodeError> {
    let report = check_decoder_agreement(gens)?;
    let first = report.mdp_violations().next().cloned();
    Ok(match first {
        Some(d) => MdpVerdict::Counterexample(d),
        None => MdpVerdict::Mdp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf16_params(n: usize, k: usize, l: usize) -> CodeParams {
        CodeParams::new(n, k, l, 16).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(CodeParams::new(3, 0, 1, 16).is_err());
        assert!(CodeParams::new(3, 4, 1, 16).is_err());
        assert!(CodeParams::new(3, 2, 1, 12).is_err());
        // (L+1)n + 1 = 16 fits, 19 does not.
        assert!(CodeParams::new(5, 2, 2, 16).is_ok());
        assert!(CodeParams::new(6, 2, 2, 16).is_err());
        let p = CodeParams::over_gf256(12, 8, 2).unwrap();
        assert_eq!((p.redundancy(), p.window_blocks()), (4, 3));
    }

    #[test]
    fn rate_one_code_has_empty_parity() {
        let p = gf16_params(3, 3, 2);
        let g = build_generators(p, 7).unwrap();
        for l in 0..=2 {
            assert_eq!(g.parity(l).cols(), 0);
        }
        let f = p.field();
        let s = Matrix::from_rows(f, &[vec![1], vec![2], vec![3]]).unwrap();
        assert_eq!(encode_block(std::slice::from_ref(&s), &g).unwrap(), s);
    }

    #[test]
    fn generators_are_deterministic_and_systematic() {
        let p = gf16_params(3, 2, 1);
        let a = build_generators(p, 0).unwrap();
        let b = build_generators(p, 0).unwrap();
        assert_eq!(a, b);
        let g0 = a.generator(0);
        let g1 = a.generator(1);
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(g0.get(r, c), if r == c { FieldElem::ONE } else { FieldElem::ZERO });
                assert_eq!(g1.get(r, c), FieldElem::ZERO);
            }
        }
        let mut pts: Vec<u8> = a.points().iter().map(|p| p.value()).collect();
        pts.sort_unstable();
        pts.dedup();
        assert_eq!(pts.len(), a.points().len(), "points must not overlap");
        assert!(is_mdp(&a).unwrap().is_mdp());
    }

    #[test]
    fn encode_zero_history_is_zero() {
        let p = gf16_params(3, 2, 1);
        let g = build_generators(p, 0).unwrap();
        let z = Matrix::zeros(p.field(), 2, 4);
        assert!(encode_block(&[z.clone(), z], &g).unwrap().is_zero());
    }

    #[test]
    fn encode_memory_zero_is_block_code() {
        let p = gf16_params(4, 2, 0);
        let g = build_generators(p, 3).unwrap();
        let f = p.field();
        let s = Matrix::from_rows(f, &[vec![9, 1], vec![4, 13]]).unwrap();
        let coded = encode_block(std::slice::from_ref(&s), &g).unwrap();
        let parity = g.parity(0).transpose().mul(&s).unwrap();
        assert_eq!(coded.row_range(0, 2), s);
        assert_eq!(coded.row_range(2, 4), parity);
    }

    #[test]
    fn encode_by_hand_3_2_1() {
        let p = gf16_params(3, 2, 1);
        let g = build_generators(p, 0).unwrap();
        let f = p.field();
        let cur = Matrix::from_rows(f, &[vec![5], vec![11]]).unwrap();
        let prev = Matrix::from_rows(f, &[vec![7], vec![2]]).unwrap();
        let coded = encode_block(&[cur.clone(), prev.clone()], &g).unwrap();
        // parity = s_i . P_0 + s_{i-1} . P_1, written out scalar by scalar
        let (p0, p1) = (g.parity(0), g.parity(1));
        let mut expect = FieldElem::ZERO;
        for a in 0..2 {
            expect = f.add(expect, f.mul(cur.get(a, 0), p0.get(a, 0)));
            expect = f.add(expect, f.mul(prev.get(a, 0), p1.get(a, 0)));
        }
        assert_eq!(coded.get(0, 0), FieldElem(5));
        assert_eq!(coded.get(1, 0), FieldElem(11));
        assert_eq!(coded.get(2, 0), expect);
    }

    #[test]
    fn encode_rejects_bad_shapes() {
        let p = gf16_params(3, 2, 1);
        let g = build_generators(p, 0).unwrap();
        let f = p.field();
        assert!(encode_block(&[], &g).is_err());
        let wrong = Matrix::zeros(f, 3, 1);
        assert!(encode_block(&[wrong], &g).is_err());
        let ok = Matrix::zeros(f, 2, 1);
        assert!(encode_block(&[ok.clone(), ok.clone(), ok], &g).is_err());
    }

    #[test]
    fn count_rule_examples() {
        let p = gf16_params(3, 2, 1);
        assert_eq!(decodable_by_count(&[0], &p), Recovery::Window(0));
        assert_eq!(decodable_by_count(&[1, 3], &p), Recovery::Window(0));
        assert_eq!(decodable_by_count(&[2, 0], &p), Recovery::Window(1));
        assert_eq!(decodable_by_count(&[2, 1], &p), Recovery::Undecodable);
        assert_eq!(decodable_by_count(&[3, 0], &p), Recovery::Undecodable);
        // Counts past L+1 blocks are ignored.
        assert_eq!(decodable_by_count(&[2, 1, 0], &p), Recovery::Undecodable);
    }

    #[test]
    fn systematic_shortcut() {
        let p = gf16_params(3, 2, 1);
        let g = build_generators(p, 0).unwrap();
        let f = p.field();
        let s = Matrix::from_rows(f, &[vec![3], vec![4]]).unwrap();
        let coded = encode_block(std::slice::from_ref(&s), &g).unwrap();
        // Parity erased only: no solve needed.
        let pat = ErasurePattern::new(3, vec![vec![false, false, true]]).unwrap();
        let out = window_decode(
            &ReceivedWindow {
                known_history: &[],
                blocks: &[coded],
                erasures: &pat,
            },
            &g,
        )
        .unwrap();
        assert_eq!(out, DecodeOutcome::Decoded { window: 0, block: s });
    }

    #[test]
    fn whole_block_lost_fails_with_single_parity() {
        let p = gf16_params(3, 2, 1);
        let g = build_generators(p, 0).unwrap();
        let report = check_decoder_agreement(&g).unwrap();
        assert_eq!(report.patterns, 64);
        // block 0 fully erased, block 1 intact
        let bits = 0b000_111;
        let pat = ErasurePattern::from_bits(3, 2, bits);
        assert_eq!(decodable_by_count(&pat.counts(), &p), Recovery::Undecodable);
        assert!(report.disagreements.iter().all(|d| d.pattern != pat));
    }

    #[test]
    fn agreement_3_2_1_exhaustive() {
        let g = build_generators(gf16_params(3, 2, 1), 0).unwrap();
        let report = check_decoder_agreement(&g).unwrap();
        assert!(report.disagreements.is_empty(), "{:?}", report.disagreements);
        assert_eq!(report.decodable_by_count, report.decodable_by_decoder);
    }

    #[test]
    fn agreement_3_2_2_exhaustive() {
        let g = build_generators(gf16_params(3, 2, 2), 0).unwrap();
        let report = check_decoder_agreement(&g).unwrap();
        assert_eq!(report.patterns, 512);
        assert!(report.disagreements.is_empty(), "{:?}", report.disagreements);
    }

    #[test]
    fn memory_zero_vandermonde_is_mds() {
        // A single parity column of nonzero powers is MDS for every draw.
        for seed in 0..8 {
            let g = generators_from_seed(gf16_params(5, 4, 0), seed).unwrap();
            assert!(is_mdp(&g).unwrap().is_mdp());
        }
        for (n, k) in [(3, 2), (4, 2), (5, 3), (6, 4)] {
            let g = build_generators(gf16_params(n, k, 0), 11).unwrap();
            assert!(is_mdp(&g).unwrap().is_mdp(), "({n},{k})");
        }
    }

    #[test]
    fn repeated_parity_matrix_yields_counterexample() {
        let p = gf16_params(3, 2, 1);
        let good = build_generators(p, 0).unwrap();
        let tampered = GeneratorSet::from_parity(
            p,
            vec![good.parity(0).clone(), good.parity(0).clone()],
            good.points().to_vec(),
            good.seed(),
        )
        .unwrap();
        match is_mdp(&tampered).unwrap() {
            MdpVerdict::Counterexample(d) => {
                assert!(d.by_count.is_decoded());
                assert!(!d.by_decoder.is_decoded());
            }
            MdpVerdict::Mdp => panic!("P_1 = P_0 must not pass"),
        }
    }

    #[test]
    fn mdp_budget_enforced() {
        let p = CodeParams::over_gf256(12, 8, 1).unwrap();
        let g = build_generators(p, 0).unwrap();
        assert_eq!(is_mdp(&g), Err(CodeError::BudgetExceeded(24)));
    }

    #[test]
    fn archive_round_trip() {
        let g = build_generators(gf16_params(3, 2, 2), 5).unwrap();
        let back = GeneratorSet::from_json(&g.to_json()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn decode_with_nonzero_history() {
        let p = gf16_params(4, 2, 1);
        let g = build_generators(p, 1).unwrap();
        let f = p.field();
        let prev = Matrix::from_rows(f, &[vec![1, 2], vec![3, 4]]).unwrap();
        let cur = Matrix::from_rows(f, &[vec![5, 6], vec![7, 8]]).unwrap();
        let next = Matrix::from_rows(f, &[vec![9, 10], vec![11, 12]]).unwrap();
        let c0 = encode_block(&[cur.clone(), prev.clone()], &g).unwrap();
        let c1 = encode_block(&[next, cur.clone()], &g).unwrap();
        // Target loses both data packets and one parity (3 > 2), next block intact.
        let pat = ErasurePattern::new(4, vec![vec![true, true, true, false], vec![false; 4]]).unwrap();
        let out = window_decode(
            &ReceivedWindow {
                known_history: &[prev],
                blocks: &[c0, c1],
                erasures: &pat,
            },
            &g,
        )
        .unwrap();
        assert_eq!(out, DecodeOutcome::Decoded { window: 1, block: cur });
    }
}
