//! Randomized axiom and round-trip suites shipped with the library.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::AlgebraElement;
use crate::cancellation::{
    extract_cycle_relation, extract_relation_b, extract_relation_m, recover_structure, Recovered,
};
use crate::exec::ordered_map;
use crate::groups::{eval_word, FormalWord, GroupElement, GroupSpec};
use crate::scalars::{FieldSpec, Scalar};
use crate::search::random_torsion_instance;

/// Cases per randomized suite.
pub const CASES: u64 = 1000;

pub fn shipped_groups() -> Vec<GroupSpec> {
    ["free:2", "abelian:2", "cyclic:3", "cyclic:4", "heisenberg", "sym:3", "product(cyclic:3,abelian:1)"]
        .iter()
        .map(|s| s.parse().expect("shipped group"))
        .collect()
}

pub fn shipped_fields() -> Vec<FieldSpec> {
    vec![FieldSpec::Rationals, FieldSpec::PrimeField(2), FieldSpec::PrimeField(7)]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub cases: u64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
enum Suite {
    Scalars(FieldSpec),
    Group(GroupSpec),
    Ring(GroupSpec, FieldSpec),
    TorsionRoundTrip(GroupSpec),
}

impl Suite {
    fn name(&self) -> String {
        match self {
            Suite::Scalars(f) => format!("scalars[{f}]"),
            Suite::Group(g) => format!("group[{g}]"),
            Suite::Ring(g, f) => format!("ring[{g}, {f}]"),
            Suite::TorsionRoundTrip(g) => format!("torsion-round-trip[{g}]"),
        }
    }
}

fn all_suites() -> Vec<Suite> {
    let mut out: Vec<Suite> = shipped_fields().into_iter().map(Suite::Scalars).collect();
    out.push(Suite::Scalars(FieldSpec::PrimeField(2147483647)));
    out.extend(shipped_groups().into_iter().map(Suite::Group));
    for g in shipped_groups() {
        for f in shipped_fields() {
            out.push(Suite::Ring(g.clone(), f));
        }
    }
    for g in ["cyclic:3", "sym:3", "product(cyclic:3,abelian:1)"] {
        out.push(Suite::TorsionRoundTrip(g.parse().expect("shipped group")));
    }
    out
}

fn suite_seed(seed: u64, name: &str) -> u64 {
    name.bytes().fold(0xcbf29ce484222325 ^ seed, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

type Check = Result<(), String>;

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn scalar_case(field: FieldSpec, rng: &mut ChaCha8Rng) -> Check {
    let x = field.random(rng, 50);
    let y = field.random(rng, 50);
    let z = field.random(rng, 50);
    let ctx = || format!("x = {x}, y = {y}, z = {z}");
    ensure(&(&x + &y) + &z == &x + &(&y + &z), || format!("additive associativity: {}", ctx()))?;
    ensure(&(&x * &y) * &z == &x * &(&y * &z), || format!("multiplicative associativity: {}", ctx()))?;
    ensure(&x * &y == &y * &x, || format!("commutativity: {}", ctx()))?;
    ensure(&x * &(&y + &z) == &(&x * &y) + &(&x * &z), || format!("distributivity: {}", ctx()))?;
    ensure((&x + &x.neg()).is_zero(), || format!("additive inverse: {}", ctx()))?;
    if !x.is_zero() {
        let inv = x.inv().map_err(|e| e.to_string())?;
        ensure((&x * &inv).is_one(), || format!("multiplicative inverse: {}", ctx()))?;
    }
    let back = Scalar::parse(&x.to_string(), field).map_err(|e| e.to_string())?;
    ensure(back == x, || format!("render/parse: {}", ctx()))
}

fn group_case(spec: &GroupSpec, rng: &mut ChaCha8Rng) -> Check {
    let x = spec.random_element(rng, 3);
    let y = spec.random_element(rng, 3);
    let z = spec.random_element(rng, 3);
    let m = |p: &GroupElement, q: &GroupElement| spec.mul(p, q).map_err(|e| e.to_string());
    let ctx = || format!("{}, {}, {}", spec.render(&x), spec.render(&y), spec.render(&z));
    ensure(m(&m(&x, &y)?, &z)? == m(&x, &m(&y, &z)?)?, || format!("associativity: {}", ctx()))?;
    let e = spec.identity();
    ensure(m(&x, &e)? == x && m(&e, &x)? == x, || format!("identity: {}", ctx()))?;
    let xi = spec.inv(&x).map_err(|e| e.to_string())?;
    ensure(spec.is_identity(&m(&x, &xi)?) && spec.is_identity(&m(&xi, &x)?), || {
        format!("inverse: {}", ctx())
    })?;
    let back = spec.parse_element(&spec.render(&x)).map_err(|e| e.to_string())?;
    ensure(back == x, || format!("render/parse: {}", ctx()))?;
    let w: FormalWord = "X1·X2^-1·X1^2".parse().map_err(|e: crate::text::ParseError| e.to_string())?;
    let lhs = eval_word(spec, &w, &x, &y).map_err(|e| e.to_string())?;
    let rhs = m(&m(&m(&x, &spec.inv(&y).map_err(|e| e.to_string())?)?, &x)?, &x)?;
    ensure(lhs == rhs, || format!("word evaluation: {}", ctx()))
}

fn ring_case(spec: &GroupSpec, field: FieldSpec, rng: &mut ChaCha8Rng) -> Check {
    let mut r = || {
        let terms = rng.gen_range(0..=4);
        AlgebraElement::random(spec, field, rng, terms, 2)
    };
    let (x, y, z) = (r(), r(), r());
    let err = |e: crate::algebra::AlgebraError| e.to_string();
    let ctx = || format!("x = {x}, y = {y}, z = {z}");
    let xy = x.mul(&y).map_err(err)?;
    ensure(xy.mul(&z).map_err(err)? == x.mul(&y.mul(&z).map_err(err)?).map_err(err)?, || {
        format!("associativity: {}", ctx())
    })?;
    let left = x.mul(&y.add(&z).map_err(err)?).map_err(err)?;
    let right = xy.add(&x.mul(&z).map_err(err)?).map_err(err)?;
    ensure(left == right, || format!("left distributivity: {}", ctx()))?;
    let left = x.add(&y).map_err(err)?.mul(&z).map_err(err)?;
    let right = x.mul(&z).map_err(err)?.add(&y.mul(&z).map_err(err)?).map_err(err)?;
    ensure(left == right, || format!("right distributivity: {}", ctx()))?;
    let one = AlgebraElement::one(spec, field);
    ensure(x.mul(&one).map_err(err)? == x && one.mul(&x).map_err(err)? == x, || {
        format!("unit: {}", ctx())
    })?;
    ensure(x.sub(&x).map_err(err)?.is_zero(), || format!("additive inverse: {}", ctx()))?;
    let back = AlgebraElement::parse(spec, field, &x.to_string()).map_err(err)?;
    ensure(back == x, || format!("render/parse: {}", ctx()))
}

fn torsion_case(spec: &GroupSpec, rng: &mut ChaCha8Rng) -> Check {
    let field = FieldSpec::Rationals;
    let terms = rng.gen_range(1..=4);
    let inst = random_torsion_instance(spec, field, rng, terms, 2).map_err(|e| e.to_string())?;
    let a = inst.a.as_support_triple().map_err(|e| e.to_string())?;
    let rec = recover_structure(&a, &inst.b).map_err(|e| format!("b = {}: {e}", inst.b))?;
    let words = match rec.kind {
        Recovered::Structure { structure, .. } => {
            ensure(structure.is_valid(), || format!("b = {}: invalid structure", inst.b))?;
            let e = |x: crate::cancellation::CancellationError| x.to_string();
            vec![extract_relation_b(&structure).map_err(e)?.word, extract_relation_m(&structure).map_err(e)?.word]
        }
        Recovered::Cycle { h } => vec![extract_cycle_relation(&h).map_err(|x| x.to_string())?],
    };
    for w in words {
        let v = eval_word(spec, &w, &a.g1, &a.g2).map_err(|e| e.to_string())?;
        ensure(spec.is_identity(&v), || format!("b = {}: relation {w} does not evaluate to e", inst.b))?;
    }
    Ok(())
}

fn run_suite(suite: &Suite, seed: u64) -> SuiteResult {
    let name = suite.name();
    let mut rng = ChaCha8Rng::seed_from_u64(suite_seed(seed, &name));
    let cases = match suite {
        Suite::TorsionRoundTrip(_) => CASES / 5,
        _ => CASES,
    };
    for case in 0..cases {
        let outcome = match suite {
            Suite::Scalars(f) => scalar_case(*f, &mut rng),
            Suite::Group(g) => group_case(g, &mut rng),
            Suite::Ring(g, f) => ring_case(g, *f, &mut rng),
            Suite::TorsionRoundTrip(g) => torsion_case(g, &mut rng),
        };
        if let Err(msg) = outcome {
            return SuiteResult { suite: name, cases: case + 1, passed: false, failure: Some(msg) };
        }
    }
    SuiteResult { suite: name, cases, passed: true, failure: None }
}

/// Runs every suite; results are in a fixed order independent of `workers`.
pub fn run_selftest(seed: u64, workers: usize) -> Vec<SuiteResult> {
    ordered_map(&all_suites(), workers, |s| run_suite(s, seed))
}
