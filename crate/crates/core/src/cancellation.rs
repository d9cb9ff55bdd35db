//! Cancellation structures of `a b = 0` for `a = 1 + alpha1 g1 + alpha2 g2`.
//!
//! Index the support of `b` as `g'_1, ..., g'_n`. Every element of
//! `supp(b) ∪ supp(g1 b) ∪ supp(g2 b)` lies in at least two of the three
//! supports, which sorts it into one of four blocks:
//!
//! | block | lies in            | identity                       | count |
//! |-------|--------------------|--------------------------------|-------|
//! | 1     | `b`, `g1 b`        | `g'_f(i) = g1 g'_phi(i)`       | `k_c` |
//! | 2     | `b`, `g1 b`, `g2 b`| also `g'_f(i) = g2 g'_tau(i)`  | `k_p` |
//! | 3     | `b`, `g2 b`        | `g'_f(k_c+k_p+i) = g2 g'_tau(i)` | `k_c` |
//! | 4     | `g1 b`, `g2 b`     | `g'_phi(i) = lambda g'_tau(i)` | `k_c` |
//!
//! with `lambda = g1^-1 g2`. Reading the identities as pairs of indices gives
//! the sets `B` (multipliers `g1`, `g2`) and `M` (multipliers `g2^-1`,
//! `lambda^-1`). In both sets each index occurs exactly once as a first
//! coordinate, so following "second coordinate = next first coordinate" is a
//! function on `{1..n}`; each of its cycles multiplies out to a relation
//! between `g1` and `g2`.

use std::collections::BTreeSet;
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::algebra::{AlgebraElement, SupportTriple};
use crate::groups::{FormalWord, GroupElement, Letter};
use crate::wordeq::{CoeffEquation, CoeffTag, Edge, EquationSystem};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CancellationError {
    #[error("invalid cancellation structure: {}", join(.0))]
    InvalidStructure(Vec<Violation>),
    #[error("permutation has fixed point {0}")]
    FixedPointPresent(usize),
    #[error("not a permutation: {0:?}")]
    NotAPermutation(Vec<usize>),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecoverError {
    #[error("a and b live in different algebras")]
    Mismatch,
    #[error("b is zero")]
    ZeroB,
    #[error("a*b is not zero")]
    NotAnnihilating,
    #[error("internal inconsistency while classifying supports: {0}")]
    InternalInconsistency(String),
}

/// A permutation of `{0..n}` (rendered 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm(Vec<usize>);

impl Perm {
    pub fn identity(n: usize) -> Self {
        Perm((0..n).collect())
    }

    pub fn from_zero_based(images: Vec<usize>) -> Result<Self, CancellationError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(CancellationError::NotAPermutation(images));
            }
        }
        Ok(Perm(images))
    }

    pub fn from_one_based(images: &[usize]) -> Result<Self, CancellationError> {
        if images.contains(&0) {
            return Err(CancellationError::NotAPermutation(images.to_vec()));
        }
        Perm::from_zero_based(images.iter().map(|&i| i - 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Image of the 0-based index `i`.
    pub fn at(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    /// `sigma ∘ self`.
    pub fn then(&self, sigma: &Perm) -> Perm {
        Perm(self.0.iter().map(|&i| sigma.0[i]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Perm(inv)
    }

    /// Orbit of `i`, starting at `i`.
    pub fn cycle_of(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut j = self.0[i];
        while j != i {
            out.push(j);
            j = self.0[j];
        }
        out
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let imgs: Vec<String> = self.one_based().iter().map(ToString::to_string).collect();
        write!(f, "[{}]", imgs.join(" "))
    }
}

impl Serialize for Perm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

/// `(n, k_c, k_p, f, phi, tau)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CancellationStructure {
    pub n: usize,
    pub k_c: usize,
    pub k_p: usize,
    pub f: Perm,
    pub phi: Perm,
    pub tau: Perm,
}

/// A failed validity clause; indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Length { which: &'static str, len: usize, n: usize },
    Counting { n: usize, k_c: usize, k_p: usize },
    NoCancellation,
    /// `f(i) = phi(i)` for `i <= k_c + k_p`.
    FEqualsPhi { i: usize },
    /// `tau(k_c+i)` equals `f(k_c+i)` or `phi(k_c+i)`.
    MergedTau { i: usize, equals: &'static str },
    /// `f(k_c+k_p+i) = tau(i)`.
    BlockThree { i: usize },
    /// `phi(k_c+k_p+i) = tau(k_c+k_p+i)`.
    BlockFour { i: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Length { which, len, n } => write!(f, "{which} has length {len}, expected {n}"),
            Violation::Counting { n, k_c, k_p } => {
                write!(f, "counting: 2*{k_c} + {k_p} != {n}")
            }
            Violation::NoCancellation => write!(f, "k_c must be at least 1"),
            Violation::FEqualsPhi { i } => write!(f, "f({i}) = phi({i})"),
            Violation::MergedTau { i, equals } => {
                write!(f, "tau(k_c+{i}) = {equals}(k_c+{i})")
            }
            Violation::BlockThree { i } => write!(f, "f(k_c+k_p+{i}) = tau({i})"),
            Violation::BlockFour { i } => write!(f, "phi(k_c+k_p+{i}) = tau(k_c+k_p+{i})"),
        }
    }
}

impl CancellationStructure {
    pub fn new(k_c: usize, k_p: usize, f: Perm, phi: Perm, tau: Perm) -> Self {
        CancellationStructure { n: f.len(), k_c, k_p, f, phi, tau }
    }

    /// Builds from 1-based image lists.
    pub fn from_one_based(
        k_c: usize,
        k_p: usize,
        f: &[usize],
        phi: &[usize],
        tau: &[usize],
    ) -> Result<Self, CancellationError> {
        Ok(CancellationStructure::new(
            k_c,
            k_p,
            Perm::from_one_based(f)?,
            Perm::from_one_based(phi)?,
            Perm::from_one_based(tau)?,
        ))
    }

    /// Every violated clause; empty when the structure is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.n;
        for (which, p) in [("f", &self.f), ("phi", &self.phi), ("tau", &self.tau)] {
            if p.len() != n {
                out.push(Violation::Length { which, len: p.len(), n });
            }
        }
        if !out.is_empty() {
            return out;
        }
        let (kc, kp) = (self.k_c, self.k_p);
        if 2 * kc + kp != n {
            out.push(Violation::Counting { n, k_c: kc, k_p: kp });
        }
        if kc == 0 {
            out.push(Violation::NoCancellation);
        }
        let (f, phi, tau) = (&self.f, &self.phi, &self.tau);
        for i in 0..(kc + kp).min(n) {
            if f.at(i) == phi.at(i) {
                out.push(Violation::FEqualsPhi { i: i + 1 });
            }
        }
        for i in 0..kp {
            let j = kc + i;
            if j >= n {
                break;
            }
            if tau.at(j) == f.at(j) {
                out.push(Violation::MergedTau { i: i + 1, equals: "f" });
            }
            if tau.at(j) == phi.at(j) {
                out.push(Violation::MergedTau { i: i + 1, equals: "phi" });
            }
        }
        for i in 0..kc {
            let j = kc + kp + i;
            if j >= n {
                break;
            }
            if f.at(j) == tau.at(i) {
                out.push(Violation::BlockThree { i: i + 1 });
            }
            if phi.at(j) == tau.at(j) {
                out.push(Violation::BlockFour { i: i + 1 });
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    fn ensure_valid(&self) -> Result<(), CancellationError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CancellationError::InvalidStructure(v))
        }
    }

    /// Relabels unknowns by `sigma`: `(f, phi, tau) -> (sigma f, sigma phi, sigma tau)`.
    pub fn relabel(&self, sigma: &Perm) -> CancellationStructure {
        CancellationStructure {
            n: self.n,
            k_c: self.k_c,
            k_p: self.k_p,
            f: self.f.then(sigma),
            phi: self.phi.then(sigma),
            tau: self.tau.then(sigma),
        }
    }
}

/// Multiplier attached to a pair `(x, y)`, read as `g'_x = t g'_y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Multiplier {
    G1,
    G2,
    G2Inv,
    LambdaInv,
}

impl Multiplier {
    /// As a word in `X1`, `X2`; `lambda^-1 = X2^-1 X1`.
    pub fn word(self) -> FormalWord {
        match self {
            Multiplier::G1 => FormalWord::x1(),
            Multiplier::G2 => FormalWord::x2(),
            Multiplier::G2Inv => FormalWord::letter(Letter::X2, -1),
            Multiplier::LambdaInv => FormalWord::from_syllables([(Letter::X2, -1), (Letter::X1, 1)]),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Multiplier::G1 => "g1",
            Multiplier::G2 => "g2",
            Multiplier::G2Inv => "g2^-1",
            Multiplier::LambdaInv => "lambda^-1",
        }
    }
}

impl Serialize for Multiplier {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Pair `(from, to)` of 0-based unknown indices with its block and multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaggedPair {
    pub from: usize,
    pub to: usize,
    pub block: u8,
    pub letter: Multiplier,
}

impl Serialize for TaggedPair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("TaggedPair", 3)?;
        st.serialize_field("pair", &[self.from + 1, self.to + 1])?;
        st.serialize_field("block", &self.block)?;
        st.serialize_field("letter", &self.letter)?;
        st.end()
    }
}

impl fmt::Display for TaggedPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})@{}", self.from + 1, self.to + 1, self.letter.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Which {
    B,
    M,
}

/// The sets `B = B1 ∪ B2 ∪ B3` and `M = M1 ∪ M2 ∪ M3`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairSets {
    pub n: usize,
    pub b: Vec<TaggedPair>,
    pub m: Vec<TaggedPair>,
    #[serde(skip)]
    b_by_first: Vec<usize>,
    #[serde(skip)]
    m_by_first: Vec<usize>,
}

impl PairSets {
    pub fn pairs(&self, which: Which) -> &[TaggedPair] {
        match which {
            Which::B => &self.b,
            Which::M => &self.m,
        }
    }

    /// The unique pair whose first coordinate is `from`.
    pub fn pair_from(&self, which: Which, from: usize) -> &TaggedPair {
        match which {
            Which::B => &self.b[self.b_by_first[from]],
            Which::M => &self.m[self.m_by_first[from]],
        }
    }

    /// Every cycle of the successor map, each rotated to start at its
    /// smallest first coordinate, ordered by that coordinate.
    pub fn cycles(&self, which: Which) -> Vec<ChainTrace> {
        let n = self.n;
        // 0 = unseen, 1 = on current walk, 2 = done
        let mut state = vec![0u8; n];
        let mut out = Vec::new();
        for start in 0..n {
            if state[start] != 0 {
                continue;
            }
            let mut walk = Vec::new();
            let mut x = start;
            while state[x] == 0 {
                state[x] = 1;
                walk.push(x);
                x = self.pair_from(which, x).to;
            }
            if state[x] == 1 {
                let pos = walk.iter().position(|&y| y == x).expect("on walk");
                let mut cyc: Vec<usize> = walk[pos..].to_vec();
                let min_pos = cyc
                    .iter()
                    .enumerate()
                    .min_by_key(|&(_, &v)| v)
                    .map(|(i, _)| i)
                    .expect("nonempty");
                cyc.rotate_left(min_pos);
                let visited: Vec<TaggedPair> =
                    cyc.iter().map(|&v| *self.pair_from(which, v)).collect();
                out.push(ChainTrace::closed(which, visited));
            }
            for &y in &walk {
                state[y] = 2;
            }
        }
        out.sort_by_key(|c| c.visited[0].from);
        out
    }
}

/// A walk through `B` or `M` up to the first repeated pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainTrace {
    pub which: Which,
    pub visited: Vec<TaggedPair>,
    /// Position of the pair the walk returns to (`r` or `u`).
    pub cycle_start: usize,
    /// Position of the last pair before the return (`s` or `v`).
    pub cycle_end: usize,
    pub letters: Vec<Multiplier>,
}

impl ChainTrace {
    fn closed(which: Which, visited: Vec<TaggedPair>) -> Self {
        let letters = visited.iter().map(|p| p.letter).collect();
        let end = visited.len() - 1;
        ChainTrace { which, visited, cycle_start: 0, cycle_end: end, letters }
    }

    pub fn cycle(&self) -> &[TaggedPair] {
        &self.visited[self.cycle_start..=self.cycle_end]
    }

    pub fn cycle_len(&self) -> usize {
        self.cycle_end - self.cycle_start + 1
    }

    /// Product of the multipliers around the cycle.
    pub fn relation(&self) -> Relation {
        Relation::from_letters(self.letters[self.cycle_start..=self.cycle_end].to_vec())
    }
}

/// A relation `t_r ... t_s = e`: the raw multiplier sequence and its reduced word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Relation {
    pub letters: Vec<Multiplier>,
    pub word: FormalWord,
}

impl Relation {
    pub fn from_letters(letters: Vec<Multiplier>) -> Self {
        let word = letters
            .iter()
            .fold(FormalWord::empty(), |acc, l| acc.mul(&l.word()));
        Relation { letters, word }
    }

    pub fn raw(&self) -> String {
        self.letters.iter().map(|l| l.name()).collect::<Vec<_>>().join("·")
    }
}

/// Builds `B` and `M` with their block and multiplier tags.
pub fn build_pair_sets(cs: &CancellationStructure) -> Result<PairSets, CancellationError> {
    cs.ensure_valid()?;
    let (kc, kp, n) = (cs.k_c, cs.k_p, cs.n);
    let (f, phi, tau) = (&cs.f, &cs.phi, &cs.tau);
    let pair = |from, to, block, letter| TaggedPair { from, to, block, letter };
    let mut b = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    for i in 0..kc {
        b.push(pair(f.at(i), phi.at(i), 1, Multiplier::G1));
    }
    for i in kc..kc + kp {
        b.push(pair(f.at(i), tau.at(i), 2, Multiplier::G2));
    }
    for i in 0..kc {
        b.push(pair(f.at(kc + kp + i), tau.at(i), 3, Multiplier::G2));
    }
    for i in 0..kc {
        m.push(pair(tau.at(i), f.at(kc + kp + i), 1, Multiplier::G2Inv));
    }
    for i in kc..kc + kp {
        m.push(pair(tau.at(i), phi.at(i), 2, Multiplier::LambdaInv));
    }
    for i in kc + kp..n {
        m.push(pair(tau.at(i), phi.at(i), 3, Multiplier::LambdaInv));
    }
    let index = |pairs: &[TaggedPair]| {
        let mut idx = vec![usize::MAX; n];
        for (k, p) in pairs.iter().enumerate() {
            idx[p.from] = k;
        }
        debug_assert!(idx.iter().all(|&k| k != usize::MAX));
        idx
    };
    let b_by_first = index(&b);
    let m_by_first = index(&m);
    Ok(PairSets { n, b, m, b_by_first, m_by_first })
}

/// Walks from the pair with first coordinate `start` (0-based) until a pair repeats.
pub fn follow_chain(ps: &PairSets, which: Which, start: usize) -> ChainTrace {
    let mut visited: Vec<TaggedPair> = Vec::new();
    let mut position = vec![usize::MAX; ps.n];
    let mut x = start;
    loop {
        if position[x] != usize::MAX {
            let letters = visited.iter().map(|p| p.letter).collect();
            let end = visited.len() - 1;
            return ChainTrace { which, cycle_start: position[x], cycle_end: end, visited, letters };
        }
        position[x] = visited.len();
        let p = *ps.pair_from(which, x);
        visited.push(p);
        x = p.to;
    }
}

/// `t_r ... t_s` along the `B`-chain starting at first coordinate `f(1)`.
pub fn extract_relation_b(cs: &CancellationStructure) -> Result<Relation, CancellationError> {
    let ps = build_pair_sets(cs)?;
    Ok(follow_chain(&ps, Which::B, cs.f.at(0)).relation())
}

/// `s_u ... s_v` along the `M`-chain starting at first coordinate `tau(1)`.
pub fn extract_relation_m(cs: &CancellationStructure) -> Result<Relation, CancellationError> {
    let ps = build_pair_sets(cs)?;
    Ok(follow_chain(&ps, Which::M, cs.tau.at(0)).relation())
}

/// `X1^r` for the cycle of `h` through the first index.
pub fn extract_cycle_relation(h: &Perm) -> Result<FormalWord, CancellationError> {
    if let Some(i) = (0..h.len()).find(|&i| h.at(i) == i) {
        return Err(CancellationError::FixedPointPresent(i + 1));
    }
    if h.is_empty() {
        return Err(CancellationError::NotAPermutation(Vec::new()));
    }
    Ok(FormalWord::letter(Letter::X1, h.cycle_of(0).len() as i64))
}

/// Word equations and coefficient constraints of the four blocks.
pub fn build_equation_system(cs: &CancellationStructure) -> Result<EquationSystem, CancellationError> {
    cs.ensure_valid()?;
    let (kc, kp, n) = (cs.k_c, cs.k_p, cs.n);
    let (f, phi, tau) = (&cs.f, &cs.phi, &cs.tau);
    let lambda = FormalWord::from_syllables([(Letter::X1, -1), (Letter::X2, 1)]);
    let mut edges = Vec::new();
    let mut coefficients = Vec::new();
    let eq = |block, terms: Vec<(CoeffTag, usize)>| CoeffEquation { block, terms };
    for i in 0..kc {
        edges.push(Edge::new(f.at(i), phi.at(i), FormalWord::x1()));
        coefficients.push(eq(1, vec![(CoeffTag::One, f.at(i)), (CoeffTag::Alpha1, phi.at(i))]));
    }
    for i in kc..kc + kp {
        edges.push(Edge::new(f.at(i), phi.at(i), FormalWord::x1()));
        edges.push(Edge::new(f.at(i), tau.at(i), FormalWord::x2()));
        coefficients.push(eq(
            2,
            vec![(CoeffTag::One, f.at(i)), (CoeffTag::Alpha1, phi.at(i)), (CoeffTag::Alpha2, tau.at(i))],
        ));
    }
    for i in 0..kc {
        edges.push(Edge::new(f.at(kc + kp + i), tau.at(i), FormalWord::x2()));
        coefficients.push(eq(3, vec![(CoeffTag::One, f.at(kc + kp + i)), (CoeffTag::Alpha2, tau.at(i))]));
    }
    for i in kc + kp..n {
        edges.push(Edge::new(phi.at(i), tau.at(i), lambda.clone()));
        coefficients.push(eq(4, vec![(CoeffTag::Alpha1, phi.at(i)), (CoeffTag::Alpha2, tau.at(i))]));
    }
    Ok(EquationSystem { n, edges, coefficients })
}

/// One element of `supp(b) ∪ supp(g1 b) ∪ supp(g2 b)` and where it comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockEntry {
    pub element: GroupElement,
    pub block: u8,
    /// 0-based `j` with the element equal to `g'_j`, `g1 g'_j`, `g2 g'_j`.
    pub in_b: Option<usize>,
    pub in_g1b: Option<usize>,
    pub in_g2b: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Recovered {
    Structure {
        structure: CancellationStructure,
        blocks: Vec<BlockEntry>,
    },
    /// No cancellation between `b` and `g1 b`: `g'_i = g1 g'_h(i)`.
    Cycle { h: Perm },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveredInstance {
    /// `g'_1, ..., g'_n` in canonical order.
    pub index_map: Vec<GroupElement>,
    pub betas: Vec<crate::scalars::Scalar>,
    pub kind: Recovered,
}

/// Reads the cancellation structure off a concrete annihilation `a b = 0`.
pub fn recover_structure(
    a: &SupportTriple,
    b: &AlgebraElement,
) -> Result<RecoveredInstance, RecoverError> {
    if *b.group() != a.group || b.field() != a.field {
        return Err(RecoverError::Mismatch);
    }
    if b.is_zero() {
        return Err(RecoverError::ZeroB);
    }
    let a_el = a.to_element();
    if !a_el.mul(b).map_err(|_| RecoverError::Mismatch)?.is_zero() {
        return Err(RecoverError::NotAnnihilating);
    }
    let group = &a.group;
    let index_map: Vec<GroupElement> = b.support().cloned().collect();
    let betas: Vec<_> = index_map.iter().map(|g| b.coeff(g)).collect();
    let n = index_map.len();
    let index_of = |g: &GroupElement| index_map.binary_search(g).ok();
    let g1_inv = group.inv_unchecked(&a.g1);
    let g2_inv = group.inv_unchecked(&a.g2);

    let mut union: BTreeSet<GroupElement> = index_map.iter().cloned().collect();
    for g in &index_map {
        union.insert(group.mul_unchecked(&a.g1, g));
        union.insert(group.mul_unchecked(&a.g2, g));
    }
    let inconsistent = |msg: String| Err(RecoverError::InternalInconsistency(msg));
    let mut blocks = Vec::with_capacity(union.len());
    for x in union {
        let s0 = index_of(&x);
        let s1 = index_of(&group.mul_unchecked(&g1_inv, &x));
        let s2 = index_of(&group.mul_unchecked(&g2_inv, &x));
        let block = match (s0, s1, s2) {
            (Some(_), Some(_), None) => 1,
            (Some(_), Some(_), Some(_)) => 2,
            (Some(_), None, Some(_)) => 3,
            (None, Some(_), Some(_)) => 4,
            _ => return inconsistent(format!("{} lies in a single support", group.render(&x))),
        };
        let term = |s: Option<usize>, alpha: Option<&crate::scalars::Scalar>| match (s, alpha) {
            (Some(j), None) => betas[j].clone(),
            (Some(j), Some(al)) => al * &betas[j],
            (None, _) => a.field.zero(),
        };
        let c0 = term(s0, None);
        let c1 = term(s1, Some(&a.alpha1));
        let c2 = term(s2, Some(&a.alpha2));
        if !(&(&c0 + &c1) + &c2).is_zero() {
            return inconsistent(format!("coefficient of {} does not vanish", group.render(&x)));
        }
        if block == 2 && (&c0 + &c1).is_zero() {
            return inconsistent(format!("{}: merged term cancels without g2 b", group.render(&x)));
        }
        blocks.push(BlockEntry { element: x, block, in_b: s0, in_g1b: s1, in_g2b: s2 });
    }

    let of = |k: u8| blocks.iter().filter(move |e| e.block == k);
    let k_c = of(1).count();
    let k_p = of(2).count();
    if k_c == 0 {
        if of(3).count() + of(4).count() != 0 {
            return inconsistent("blocks 3/4 present without cancellation".into());
        }
        let h: Vec<usize> = index_map
            .iter()
            .map(|g| index_of(&group.mul_unchecked(&g1_inv, g)).expect("supp(b) = supp(g1 b)"))
            .collect();
        let h = Perm::from_zero_based(h).map_err(|e| RecoverError::InternalInconsistency(e.to_string()))?;
        return Ok(RecoveredInstance { index_map, betas, kind: Recovered::Cycle { h } });
    }
    if of(3).count() != k_c || of(4).count() != k_c || 2 * k_c + k_p != n {
        return inconsistent(format!(
            "block sizes {k_c}/{k_p}/{}/{} do not match n = {n}",
            of(3).count(),
            of(4).count()
        ));
    }
    let mut f = vec![0; n];
    let mut phi = vec![0; n];
    let mut tau = vec![0; n];
    for (i, e) in of(1).enumerate() {
        f[i] = e.in_b.unwrap();
        phi[i] = e.in_g1b.unwrap();
    }
    for (i, e) in of(2).enumerate() {
        f[k_c + i] = e.in_b.unwrap();
        phi[k_c + i] = e.in_g1b.unwrap();
        tau[k_c + i] = e.in_g2b.unwrap();
    }
    for (i, e) in of(3).enumerate() {
        f[k_c + k_p + i] = e.in_b.unwrap();
        tau[i] = e.in_g2b.unwrap();
    }
    for (i, e) in of(4).enumerate() {
        phi[k_c + k_p + i] = e.in_g1b.unwrap();
        tau[k_c + k_p + i] = e.in_g2b.unwrap();
    }
    let perm = |v: Vec<usize>| {
        Perm::from_zero_based(v).map_err(|e| RecoverError::InternalInconsistency(e.to_string()))
    };
    let structure = CancellationStructure::new(k_c, k_p, perm(f)?, perm(phi)?, perm(tau)?);
    let violations = structure.validate();
    if !violations.is_empty() {
        return inconsistent(join(&violations));
    }
    Ok(RecoveredInstance { index_map, betas, kind: Recovered::Structure { structure, blocks } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{eval_word, GroupSpec};
    use crate::scalars::FieldSpec;

    fn cs(kc: usize, kp: usize, f: &[usize], phi: &[usize], tau: &[usize]) -> CancellationStructure {
        CancellationStructure::from_one_based(kc, kp, f, phi, tau).unwrap()
    }

    fn canonical() -> CancellationStructure {
        cs(1, 0, &[2, 1], &[1, 2], &[2, 1])
    }

    fn instance(group: &str, a: &str, b: &str) -> (SupportTriple, AlgebraElement) {
        let g: GroupSpec = group.parse().unwrap();
        let a = AlgebraElement::parse(&g, FieldSpec::Rationals, a).unwrap();
        let b = AlgebraElement::parse(&g, FieldSpec::Rationals, b).unwrap();
        (a.as_support_triple().unwrap(), b)
    }

    #[test]
    fn validation_clauses() {
        // f(1)=2≠phi(1)=1; f(2)=1≠tau(1)=2; phi(2)=2≠tau(2)=1
        assert!(canonical().validate().is_empty());
        let bad = cs(1, 0, &[2, 1], &[2, 1], &[2, 1]);
        assert!(bad.validate().contains(&Violation::FEqualsPhi { i: 1 }));
        let counting = cs(1, 0, &[2, 3, 1], &[1, 2, 3], &[3, 1, 2]);
        assert!(counting.validate().contains(&Violation::Counting { n: 3, k_c: 1, k_p: 0 }));
        let merged = cs(1, 1, &[1, 2, 3], &[2, 3, 1], &[3, 2, 1]);
        assert!(merged.validate().contains(&Violation::MergedTau { i: 1, equals: "f" }));
        let zero = cs(0, 2, &[1, 2], &[2, 1], &[2, 1]);
        assert!(zero.validate().contains(&Violation::NoCancellation));
    }

    #[test]
    fn recover_canonical_instance() {
        let (a, b) = instance("cyclic:3", "1 + a + a^2", "1 - a");
        let rec = recover_structure(&a, &b).unwrap();
        assert_eq!(rec.index_map, vec![GroupElement::Cyclic(0), GroupElement::Cyclic(1)]);
        match rec.kind {
            Recovered::Structure { structure, blocks } => {
                assert_eq!(structure, canonical());
                assert_eq!(blocks.iter().map(|e| e.block).collect::<Vec<_>>(), vec![3, 1, 4]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn recover_in_sym3_matches_cyclic_case() {
        let (a, b) = instance("sym:3", "1 + b + b^2", "1 - b");
        let rec = recover_structure(&a, &b).unwrap();
        let Recovered::Structure { structure, .. } = rec.kind else { panic!() };
        assert_eq!((structure.n, structure.k_c, structure.k_p), (2, 1, 0));
        assert!(structure.is_valid());
    }

    #[test]
    fn recover_rejects_non_annihilating() {
        let (a, b) = instance("cyclic:3", "1 + a + a^2", "1 + a");
        assert_eq!(recover_structure(&a, &b), Err(RecoverError::NotAnnihilating));
        let (a, _) = instance("cyclic:3", "1 + a + a^2", "1");
        let zero = AlgebraElement::zero(&a.group, a.field);
        assert_eq!(recover_structure(&a, &zero), Err(RecoverError::ZeroB));
    }

    #[test]
    fn cycle_case() {
        let (a, b) = instance("cyclic:4", "1 + a - 2*a^2", "1 + a + a^2 + a^3");
        let rec = recover_structure(&a, &b).unwrap();
        let Recovered::Cycle { h } = rec.kind else { panic!("expected cycle case") };
        // g'_i = g g'_h(i): h(1) = index of g^-1 = g^3
        assert_eq!(h.one_based(), vec![4, 1, 2, 3]);
        assert_eq!(extract_cycle_relation(&h).unwrap().to_string(), "X1^4");
        let h2 = Perm::from_one_based(&[2, 1, 4, 3]).unwrap();
        assert_eq!(extract_cycle_relation(&h2).unwrap().to_string(), "X1^2");
        assert_eq!(
            extract_cycle_relation(&Perm::identity(3)),
            Err(CancellationError::FixedPointPresent(1))
        );
    }

    #[test]
    fn pair_sets_and_chains() {
        let ps = build_pair_sets(&canonical()).unwrap();
        let show = |v: &[TaggedPair]| v.iter().map(ToString::to_string).collect::<Vec<_>>();
        assert_eq!(show(&ps.b), vec!["(2,1)@g1", "(1,2)@g2"]);
        assert_eq!(show(&ps.m), vec!["(2,1)@g2^-1", "(1,2)@lambda^-1"]);
        let chain = follow_chain(&ps, Which::B, 1);
        assert_eq!(show(&chain.visited), vec!["(2,1)@g1", "(1,2)@g2"]);
        assert_eq!((chain.cycle_start, chain.cycle_end), (0, 1));
        assert_eq!(extract_relation_b(&canonical()).unwrap().word.to_string(), "X1·X2");
        let m = extract_relation_m(&canonical()).unwrap();
        assert_eq!(m.word.to_string(), "X2^-2·X1");
        assert_eq!(m.raw(), "g2^-1·lambda^-1");
        let c3: GroupSpec = "cyclic:3".parse().unwrap();
        let (g, g2) = (GroupElement::Cyclic(1), GroupElement::Cyclic(2));
        assert_eq!(eval_word(&c3, &m.word, &g, &g2).unwrap(), c3.identity());
    }

    #[test]
    fn equation_system_counts() {
        let sys = build_equation_system(&canonical()).unwrap();
        assert_eq!(sys.edges.len(), 3);
        assert_eq!(sys.coefficients.len(), 3);
        assert!(sys.coefficients.iter().all(|c| c.block != 2));
        let rendered: Vec<String> = sys.edges.iter().map(|e| e.to_string()).collect();
        assert_eq!(rendered, vec!["g'2 = X1·g'1", "g'1 = X2·g'2", "g'2 = X1^-1·X2·g'1"]);
    }

    #[test]
    fn pure_block_one_cycle_is_power_of_x1() {
        // k_c = 3, k_p = 0: f = id, phi rotates 1 -> 2 -> 3 so block 1 closes a 3-cycle
        let s = cs(3, 0, &[1, 2, 3, 4, 5, 6], &[2, 3, 1, 4, 5, 6], &[5, 6, 4, 1, 2, 3]);
        assert!(s.is_valid(), "{:?}", s.validate());
        let ps = build_pair_sets(&s).unwrap();
        let cycles = ps.cycles(Which::B);
        assert!(cycles.iter().any(|c| c.relation().word.to_string() == "X1^3"));
    }

    #[test]
    fn relabeling_preserves_validity() {
        let sigma = Perm::from_one_based(&[2, 1]).unwrap();
        let r = canonical().relabel(&sigma);
        assert!(r.is_valid());
        assert_eq!(r.f, Perm::identity(2));
    }
}
