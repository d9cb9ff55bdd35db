//! Realizability of a cancellation structure in a concrete group.
//!
//! The unknowns are the support elements `g'_1..g'_n` and their coefficients
//! `beta_1..beta_n`. Word equations all have the shape `g'_i = w(g1, g2) g'_j`,
//! so they are solved by propagation along a spanning forest; coefficient
//! equations are homogeneous linear and need a solution with no zero entry.

use std::collections::BTreeSet;
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::algebra::{AlgebraElement, SupportTriple};
use crate::cancellation::{build_equation_system, CancellationError, CancellationStructure};
use crate::groups::{eval_word_unchecked, FormalWord, GroupElement, GroupSpec};
use crate::linalg::{nowhere_zero, nullspace, NowhereZero};
use crate::scalars::{FieldSpec, Scalar};

/// `g'_lhs = word(g1, g2) g'_rhs` (0-based unknowns).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub lhs: usize,
    pub rhs: usize,
    pub word: FormalWord,
}

impl Edge {
    pub fn new(lhs: usize, rhs: usize, word: FormalWord) -> Self {
        Edge { lhs, rhs, word }
    }

    /// Same equation written with `lhs <= rhs`.
    pub fn oriented(&self) -> Edge {
        if self.lhs <= self.rhs {
            self.clone()
        } else {
            Edge::new(self.rhs, self.lhs, self.word.inv())
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            write!(f, "g'{} = g'{}", self.lhs + 1, self.rhs + 1)
        } else {
            write!(f, "g'{} = {}·g'{}", self.lhs + 1, self.word, self.rhs + 1)
        }
    }
}

impl Serialize for Edge {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoeffTag {
    One,
    Alpha1,
    Alpha2,
}

/// `sum c_k beta_{j_k} = 0` with `c_k` in `{1, alpha1, alpha2}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoeffEquation {
    pub block: u8,
    pub terms: Vec<(CoeffTag, usize)>,
}

impl CoeffEquation {
    pub fn row(&self, n: usize, field: FieldSpec, alpha1: &Scalar, alpha2: &Scalar) -> Vec<Scalar> {
        let mut row = vec![field.zero(); n];
        for &(tag, j) in &self.terms {
            let c = match tag {
                CoeffTag::One => field.one(),
                CoeffTag::Alpha1 => alpha1.clone(),
                CoeffTag::Alpha2 => alpha2.clone(),
            };
            row[j] = &row[j] + &c;
        }
        row
    }
}

impl fmt::Display for CoeffEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (tag, j)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            match tag {
                CoeffTag::One => write!(f, "b{}", j + 1)?,
                CoeffTag::Alpha1 => write!(f, "alpha1*b{}", j + 1)?,
                CoeffTag::Alpha2 => write!(f, "alpha2*b{}", j + 1)?,
            }
        }
        f.write_str(" = 0")
    }
}

impl Serialize for CoeffEquation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquationSystem {
    pub n: usize,
    pub edges: Vec<Edge>,
    pub coefficients: Vec<CoeffEquation>,
}

impl EquationSystem {
    /// Drops repeated word equations (up to orientation), keeping first occurrences.
    pub fn deduplicated(&self) -> EquationSystem {
        let mut seen = BTreeSet::new();
        let edges = self
            .edges
            .iter()
            .filter(|e| seen.insert(e.oriented()))
            .cloned()
            .collect();
        EquationSystem { n: self.n, edges, coefficients: self.coefficients.clone() }
    }

    /// Coefficient matrix for fixed `alpha1`, `alpha2`, identical rows removed.
    pub fn coefficient_rows(&self, field: FieldSpec, alpha1: &Scalar, alpha2: &Scalar) -> Vec<Vec<Scalar>> {
        let mut rows: Vec<Vec<Scalar>> = Vec::new();
        for eq in &self.coefficients {
            let r = eq.row(self.n, field, alpha1, alpha2);
            if !rows.contains(&r) {
                rows.push(r);
            }
        }
        rows
    }

    /// Whether concrete supports and coefficients satisfy every equation.
    pub fn holds_for(
        &self,
        a: &SupportTriple,
        values: &[GroupElement],
        betas: &[Scalar],
    ) -> bool {
        let spec = &a.group;
        let words_hold = self.edges.iter().all(|e| {
            let w = eval_word_unchecked(spec, &e.word, &a.g1, &a.g2);
            values[e.lhs] == spec.mul_unchecked(&w, &values[e.rhs])
        });
        let coeffs_hold = self.coefficient_rows(a.field, &a.alpha1, &a.alpha2).iter().all(|row| {
            row.iter()
                .zip(betas)
                .fold(a.field.zero(), |acc, (c, b)| &acc + &(c * b))
                .is_zero()
        });
        words_hold && coeffs_hold
    }
}

/// Each unknown as `relative[i] * g'_root` within its component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub component: Vec<usize>,
    /// Root unknown of each component, in component order.
    pub roots: Vec<usize>,
    pub relative: Vec<FormalWord>,
    /// `relative[i]` evaluated at `(g1, g2)`.
    pub values: Vec<GroupElement>,
}

impl Assignment {
    /// First pair of unknowns in one component with equal values.
    pub fn first_collision(&self) -> Option<(usize, usize)> {
        let n = self.values.len();
        for i in 0..n {
            for j in i + 1..n {
                if self.component[i] == self.component[j] && self.values[i] == self.values[j] {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Propagation {
    Consistent(Assignment),
    /// A cycle of equations whose product is not the identity.
    Inconsistent { cycle_word: FormalWord, edge: Edge },
}

/// Solves the word equations by substitution along a spanning forest and
/// checks every remaining equation.
pub fn propagate(
    sys: &EquationSystem,
    spec: &GroupSpec,
    g1: &GroupElement,
    g2: &GroupElement,
) -> Propagation {
    let n = sys.n;
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, e) in sys.edges.iter().enumerate() {
        adjacency[e.lhs].push(k);
        adjacency[e.rhs].push(k);
    }
    let edge_values: Vec<GroupElement> = sys
        .edges
        .iter()
        .map(|e| eval_word_unchecked(spec, &e.word, g1, g2))
        .collect();
    let mut component = vec![usize::MAX; n];
    let mut relative = vec![FormalWord::empty(); n];
    let mut values = vec![spec.identity(); n];
    let mut tree_edge = vec![false; sys.edges.len()];
    let mut roots = Vec::new();
    for root in 0..n {
        if component[root] != usize::MAX {
            continue;
        }
        let c = roots.len();
        roots.push(root);
        component[root] = c;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for &k in &adjacency[x] {
                let e = &sys.edges[k];
                let y = if e.lhs == x { e.rhs } else { e.lhs };
                if component[y] != usize::MAX {
                    continue;
                }
                component[y] = c;
                tree_edge[k] = true;
                if e.lhs == x {
                    // g'_x = w g'_y  =>  g'_y = w^-1 g'_x
                    relative[y] = e.word.inv().mul(&relative[x]);
                    values[y] = spec.mul_unchecked(&spec.inv_unchecked(&edge_values[k]), &values[x]);
                } else {
                    relative[y] = e.word.mul(&relative[x]);
                    values[y] = spec.mul_unchecked(&edge_values[k], &values[x]);
                }
                queue.push_back(y);
            }
        }
    }
    for (k, e) in sys.edges.iter().enumerate() {
        if tree_edge[k] {
            continue;
        }
        let rhs = spec.mul_unchecked(&edge_values[k], &values[e.rhs]);
        if values[e.lhs] != rhs {
            let cycle_word = relative[e.lhs].inv().mul(&e.word).mul(&relative[e.rhs]);
            return Propagation::Inconsistent { cycle_word, edge: e.clone() };
        }
    }
    Propagation::Consistent(Assignment { component, roots, relative, values })
}

/// Distinctness of the support elements within each component.
pub fn check_distinctness(assignment: &Assignment) -> bool {
    assignment.first_collision().is_none()
}

/// Whether the coefficient equations admit a nowhere-zero solution.
pub fn solve_coefficients(
    sys: &EquationSystem,
    field: FieldSpec,
    alpha1: &Scalar,
    alpha2: &Scalar,
    seed: u64,
) -> NowhereZero {
    let rows = sys.coefficient_rows(field, alpha1, alpha2);
    let basis = nullspace(&rows, sys.n, field);
    nowhere_zero(&basis, sys.n, field, seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecideError {
    #[error(transparent)]
    Structure(#[from] CancellationError),
    #[error("witness failed verification: {0}")]
    WitnessVerificationFailed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    WordInconsistent { cycle_word: FormalWord },
    /// Two support elements are forced to coincide (or no distinct roots exist).
    NotDistinct { first: usize, second: Option<usize> },
    /// `trials` is set when the answer comes from random sampling.
    CoeffInconsistent { trials: Option<u64> },
    Feasible { witness: AlgebraElement, trials: Option<u64> },
}

impl Verdict {
    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::WordInconsistent { .. } => "word",
            Verdict::NotDistinct { .. } => "distinct",
            Verdict::CoeffInconsistent { .. } => "coeff",
            Verdict::Feasible { .. } => "feasible",
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Verdict::Feasible { .. })
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("verdict", self.kind())?;
        match self {
            Verdict::WordInconsistent { cycle_word } => m.serialize_entry("cycle_word", cycle_word)?,
            Verdict::NotDistinct { first, second } => {
                let pair: Vec<usize> = std::iter::once(first + 1).chain(second.map(|j| j + 1)).collect();
                m.serialize_entry("pair", &pair)?
            }
            Verdict::CoeffInconsistent { trials } => {
                if let Some(t) = trials {
                    m.serialize_entry("trials", t)?
                }
            }
            Verdict::Feasible { witness, trials } => {
                m.serialize_entry("witness", &witness.to_json())?;
                if let Some(t) = trials {
                    m.serialize_entry("trials", t)?
                }
            }
        }
        m.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecideOptions {
    /// Seed for randomized coefficient search over large prime fields.
    pub seed: u64,
}

fn structure_seed(cs: &CancellationStructure, seed: u64) -> u64 {
    // FNV-1a over the permutations, so the seed does not depend on scheduling
    let mut h: u64 = 0xcbf29ce484222325 ^ seed;
    for v in cs.f.images().iter().chain(cs.phi.images()).chain(cs.tau.images()) {
        h ^= *v as u64 + 1;
        h = h.wrapping_mul(0x100000001b3);
    }
    h ^ (cs.k_c as u64) << 32
}

/// Root candidates: identity first, then growing balls.
fn root_candidates(spec: &GroupSpec, wanted: usize) -> Vec<GroupElement> {
    let mut out = vec![spec.identity()];
    let mut seen: BTreeSet<GroupElement> = out.iter().cloned().collect();
    for radius in 1.. {
        let before = out.len();
        for g in spec.ball(radius) {
            if seen.insert(g.clone()) {
                out.push(g);
            }
        }
        if out.len() >= wanted || (spec.is_finite() && out.len() == before) || radius > 64 {
            break;
        }
        if spec.is_finite() {
            break;
        }
    }
    out
}

/// Words, then distinctness, then coefficients; a feasible verdict carries a
/// witness `b` that has been checked to satisfy `a b = 0`.
pub fn decide(
    cs: &CancellationStructure,
    a: &SupportTriple,
    opts: &DecideOptions,
) -> Result<Verdict, DecideError> {
    let sys = build_equation_system(cs)?.deduplicated();
    let spec = &a.group;
    let assignment = match propagate(&sys, spec, &a.g1, &a.g2) {
        Propagation::Inconsistent { cycle_word, .. } => {
            return Ok(Verdict::WordInconsistent { cycle_word })
        }
        Propagation::Consistent(asg) => asg,
    };
    if let Some((i, j)) = assignment.first_collision() {
        return Ok(Verdict::NotDistinct { first: i, second: Some(j) });
    }
    let (betas, trials) = match solve_coefficients(&sys, a.field, &a.alpha1, &a.alpha2, structure_seed(cs, opts.seed)) {
        NowhereZero::Found { vector, trials } => (vector, trials),
        NowhereZero::None => return Ok(Verdict::CoeffInconsistent { trials: None }),
        NowhereZero::NotFoundSampled { trials } => {
            return Ok(Verdict::CoeffInconsistent { trials: Some(trials) })
        }
    };

    // pick component roots so that all support elements are distinct
    let n = cs.n;
    let budget = 10 * n * n;
    let candidates = root_candidates(spec, budget);
    let mut used: BTreeSet<GroupElement> = BTreeSet::new();
    let mut support = vec![spec.identity(); n];
    let mut attempts = 0usize;
    for (c, &root) in assignment.roots.iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&i| assignment.component[i] == c).collect();
        let mut placed = false;
        for r in &candidates {
            if attempts >= budget {
                break;
            }
            attempts += 1;
            let vals: Vec<GroupElement> = members
                .iter()
                .map(|&i| spec.mul_unchecked(&assignment.values[i], r))
                .collect();
            if vals.iter().all(|v| !used.contains(v)) {
                for (&i, v) in members.iter().zip(vals) {
                    used.insert(v.clone());
                    support[i] = v;
                }
                placed = true;
                break;
            }
        }
        if !placed {
            return Ok(Verdict::NotDistinct { first: root, second: None });
        }
    }
    let witness = AlgebraElement::from_terms(spec, a.field, support.iter().cloned().zip(betas.iter().cloned()))
        .map_err(|e| DecideError::WitnessVerificationFailed(e.to_string()))?;
    if witness.support_size() != n {
        return Err(DecideError::WitnessVerificationFailed("support collapsed".into()));
    }
    let product = a
        .to_element()
        .mul(&witness)
        .map_err(|e| DecideError::WitnessVerificationFailed(e.to_string()))?;
    if !product.is_zero() {
        return Err(DecideError::WitnessVerificationFailed(format!("a*b = {product}")));
    }
    Ok(Verdict::Feasible { witness, trials })
}
