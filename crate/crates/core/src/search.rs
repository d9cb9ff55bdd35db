//! Enumeration of cancellation structures, the small-support scan, direct
//! annihilator search and torsion instances with known annihilators.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{AlgebraElement, AlgebraError, SupportTriple};
use crate::cancellation::{CancellationStructure, Perm};
use crate::exec::ordered_map;
use crate::groups::{GroupElement, GroupSpec};
use crate::linalg::{nowhere_zero, nullspace, NowhereZero};
use crate::scalars::{FieldSpec, Scalar};
use crate::wordeq::{decide, DecideError, DecideOptions, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    /// One representative per relabeling orbit: `f` is the identity.
    #[default]
    FixFIdentity,
    Full,
}

/// Restricts the generated structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureFilter {
    KC(usize),
    KP(usize),
}

impl StructureFilter {
    fn admits_split(self, k_c: usize, k_p: usize) -> bool {
        match self {
            StructureFilter::KC(k) => k == k_c,
            StructureFilter::KP(k) => k == k_p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationPlan {
    pub n: usize,
    pub symmetry: Symmetry,
    pub filters: Vec<StructureFilter>,
}

impl EnumerationPlan {
    pub fn new(n: usize, symmetry: Symmetry) -> Self {
        EnumerationPlan { n, symmetry, filters: Vec::new() }
    }

    /// `(k_c, k_p)` with `2 k_c + k_p = n`, `k_c >= 1`, largest `k_c` first.
    pub fn splits(&self) -> Vec<(usize, usize)> {
        (1..=self.n / 2)
            .rev()
            .map(|kc| (kc, self.n - 2 * kc))
            .filter(|&(kc, kp)| self.filters.iter().all(|f| f.admits_split(kc, kp)))
            .collect()
    }

    /// Number of `(f, phi, tau)` candidates before the validity clauses.
    pub fn candidate_count(&self) -> u64 {
        let fact: u64 = (1..=self.n as u64).product();
        let per_split = match self.symmetry {
            Symmetry::FixFIdentity => fact * fact,
            Symmetry::Full => fact * fact * fact,
        };
        per_split * self.splits().len() as u64
    }
}

/// A disjoint subtree of the enumeration: fixed split, `f` and `phi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkUnit {
    pub k_c: usize,
    pub k_p: usize,
    pub f: Perm,
    pub phi: Perm,
}

/// Permutations of `0..n` in lexicographic order with `forbid(pos, value)`
/// pruned as soon as a position is filled.
fn permutations_avoiding(n: usize, forbid: &dyn Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    fn go(
        n: usize,
        forbid: &dyn Fn(usize, usize) -> bool,
        cur: &mut Vec<usize>,
        used: &mut [bool],
        out: &mut Vec<Vec<usize>>,
    ) {
        let pos = cur.len();
        if pos == n {
            out.push(cur.clone());
            return;
        }
        for v in 0..n {
            if used[v] || forbid(pos, v) {
                continue;
            }
            used[v] = true;
            cur.push(v);
            go(n, forbid, cur, used, out);
            cur.pop();
            used[v] = false;
        }
    }
    let mut out = Vec::new();
    go(n, forbid, &mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Work units in canonical order: split, then `f`, then `phi`.
pub fn work_units(plan: &EnumerationPlan) -> Vec<WorkUnit> {
    let n = plan.n;
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let fs: Vec<Vec<usize>> = match plan.symmetry {
        Symmetry::FixFIdentity => vec![(0..n).collect()],
        Symmetry::Full => permutations_avoiding(n, &|_, _| false),
    };
    for (kc, kp) in plan.splits() {
        for f in &fs {
            for phi in permutations_avoiding(n, &|j, v| j < kc + kp && f[j] == v) {
                out.push(WorkUnit {
                    k_c: kc,
                    k_p: kp,
                    f: Perm::from_zero_based(f.clone()).expect("permutation"),
                    phi: Perm::from_zero_based(phi).expect("permutation"),
                });
            }
        }
    }
    out
}

impl WorkUnit {
    /// Every valid structure in this subtree, `tau` in lexicographic order.
    pub fn structures(&self) -> Vec<CancellationStructure> {
        let n = self.f.len();
        let (kc, kp) = (self.k_c, self.k_p);
        let (f, phi) = (self.f.images(), self.phi.images());
        let forbid = |j: usize, v: usize| {
            if j < kc {
                f[kc + kp + j] == v
            } else if j < kc + kp {
                f[j] == v || phi[j] == v
            } else {
                phi[j] == v
            }
        };
        permutations_avoiding(n, &forbid)
            .into_iter()
            .map(|tau| {
                let cs = CancellationStructure::new(
                    kc,
                    kp,
                    self.f.clone(),
                    self.phi.clone(),
                    Perm::from_zero_based(tau).expect("permutation"),
                );
                debug_assert!(cs.is_valid());
                cs
            })
            .collect()
    }
}

/// Every valid structure of the plan in canonical order.
pub fn enumerate_structures(plan: &EnumerationPlan) -> impl Iterator<Item = CancellationStructure> {
    work_units(plan).into_iter().flat_map(|u| u.structures())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructureVerdict {
    pub structure: CancellationStructure,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanReport {
    pub n: usize,
    pub structures_total: u64,
    pub structures_valid: u64,
    pub word_killed: u64,
    pub distinct_killed: u64,
    pub coeff_killed: u64,
    pub feasible_count: u64,
    /// Kept out of serialized output so reports are reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<Vec<StructureVerdict>>,
    /// First feasible structure in canonical order, with its verified witness.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<StructureVerdict>,
}

impl ScanReport {
    pub fn is_balanced(&self) -> bool {
        self.word_killed + self.distinct_killed + self.coeff_killed + self.feasible_count
            == self.structures_valid
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanOptions {
    pub symmetry: Symmetry,
    pub workers: usize,
    pub keep_verdicts: bool,
    pub seed: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { symmetry: Symmetry::FixFIdentity, workers: 1, keep_verdicts: false, seed: 0 }
    }
}

/// Runs `decide` on every valid structure of support size `n`.
pub fn scan_support(a: &SupportTriple, n: usize, opts: &ScanOptions) -> Result<ScanReport, DecideError> {
    let start = Instant::now();
    let plan = EnumerationPlan::new(n, opts.symmetry);
    let units = work_units(&plan);
    let decide_opts = DecideOptions { seed: opts.seed };
    let per_unit = ordered_map(&units, opts.workers, |u| {
        u.structures()
            .into_iter()
            .map(|cs| decide(&cs, a, &decide_opts).map(|v| StructureVerdict { structure: cs, verdict: v }))
            .collect::<Result<Vec<_>, _>>()
    });
    let mut report = ScanReport {
        n,
        structures_total: if n < 2 { 0 } else { plan.candidate_count() },
        structures_valid: 0,
        word_killed: 0,
        distinct_killed: 0,
        coeff_killed: 0,
        feasible_count: 0,
        wall_time: Duration::ZERO,
        verdicts: opts.keep_verdicts.then(Vec::new),
        witness: None,
    };
    for unit in per_unit {
        for sv in unit? {
            report.structures_valid += 1;
            match &sv.verdict {
                Verdict::WordInconsistent { .. } => report.word_killed += 1,
                Verdict::NotDistinct { .. } => report.distinct_killed += 1,
                Verdict::CoeffInconsistent { .. } => report.coeff_killed += 1,
                Verdict::Feasible { .. } => {
                    report.feasible_count += 1;
                    if report.witness.is_none() {
                        report.witness = Some(sv.clone());
                    }
                }
            }
            if let Some(v) = report.verdicts.as_mut() {
                v.push(sv);
            }
        }
    }
    report.wall_time = start.elapsed();
    Ok(report)
}

/// One report per `n` in `2..=n_max`.
pub fn scan_small_supports(
    a: &SupportTriple,
    n_max: usize,
    opts: &ScanOptions,
) -> Result<Vec<ScanReport>, DecideError> {
    (2..=n_max).map(|n| scan_support(a, n, opts)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectSearchReport {
    pub supports_checked: u64,
    pub witness: Option<AlgebraElement>,
}

/// Looks for `b` with `a b = 0` supported on `e` plus at most `n_max - 1`
/// further elements of the ball. Supports are tried by size, then in
/// canonical order, so the first witness has minimal support.
pub fn search_annihilator_direct(a: &AlgebraElement, n_max: usize, radius: u32) -> DirectSearchReport {
    let group = a.group();
    let field = a.field();
    let e = group.identity();
    let pool: Vec<GroupElement> = group.ball(radius).into_iter().filter(|g| *g != e).collect();
    let mut checked = 0u64;
    if a.is_zero() {
        return DirectSearchReport { supports_checked: 0, witness: None };
    }
    for extra in 0..n_max {
        for rest in pool.iter().combinations(extra) {
            checked += 1;
            let support: Vec<&GroupElement> = std::iter::once(&e).chain(rest).collect();
            if let Some(b) = annihilator_on(a, &support, field) {
                return DirectSearchReport { supports_checked: checked, witness: Some(b) };
            }
        }
    }
    DirectSearchReport { supports_checked: checked, witness: None }
}

/// A verified `b` with exactly this support and `a b = 0`, if one exists.
fn annihilator_on(a: &AlgebraElement, support: &[&GroupElement], field: FieldSpec) -> Option<AlgebraElement> {
    let group = a.group();
    let k = support.len();
    let mut rows: BTreeMap<GroupElement, Vec<Scalar>> = BTreeMap::new();
    for (x, ax) in a.terms() {
        for (j, s) in support.iter().enumerate() {
            let h = group.mul(x, s).ok()?;
            let row = rows.entry(h).or_insert_with(|| vec![field.zero(); k]);
            row[j] = &row[j] + ax;
        }
    }
    let rows: Vec<Vec<Scalar>> = rows.into_values().collect();
    let basis = nullspace(&rows, k, field);
    let NowhereZero::Found { vector, .. } = nowhere_zero(&basis, k, field, 0) else {
        return None;
    };
    let b = AlgebraElement::from_terms(group, field, support.iter().map(|g| (*g).clone()).zip(vector)).ok()?;
    let product = a.mul(&b).ok()?;
    assert!(product.is_zero(), "direct search produced an unverified annihilator");
    Some(b)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("group {0} has no standard element of order three")]
    NoOrderThree(String),
    #[error("(1 - h) c vanishes; retry with another c")]
    DegenerateC,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorsionInstance {
    pub h: GroupElement,
    pub a: AlgebraElement,
    pub b: AlgebraElement,
}

/// `a = 1 + h + h^2` and `b = (1 - h) c` for an element `h` of order three.
pub fn make_torsion_instance(
    spec: &GroupSpec,
    field: FieldSpec,
    c: &AlgebraElement,
) -> Result<TorsionInstance, SearchError> {
    let h = spec
        .element_of_order_three()
        .ok_or_else(|| SearchError::NoOrderThree(spec.to_string()))?;
    let h2 = spec.mul_unchecked(&h, &h);
    let one = AlgebraElement::one(spec, field);
    let a = AlgebraElement::from_terms(
        spec,
        field,
        [(spec.identity(), field.one()), (h.clone(), field.one()), (h2, field.one())],
    )?;
    let one_minus_h = one.sub(&AlgebraElement::monomial(spec, field.one(), h.clone())?)?;
    let b = one_minus_h.mul(c)?;
    if b.is_zero() {
        return Err(SearchError::DegenerateC);
    }
    debug_assert!(a.mul(&b)?.is_zero());
    Ok(TorsionInstance { h, a, b })
}

/// Torsion instance with random `c` of at most `terms` terms, retrying on
/// degenerate draws.
pub fn random_torsion_instance<R: Rng + ?Sized>(
    spec: &GroupSpec,
    field: FieldSpec,
    rng: &mut R,
    terms: usize,
    size: u32,
) -> Result<TorsionInstance, SearchError> {
    loop {
        let c = AlgebraElement::random(spec, field, rng, terms.max(1), size);
        match make_torsion_instance(spec, field, &c) {
            Err(SearchError::DegenerateC) => continue,
            other => return other,
        }
    }
}
