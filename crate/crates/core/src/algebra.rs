//! Group-algebra elements `F[G]` with exact convolution.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::groups::{GroupElement, GroupError, GroupSpec};
use crate::scalars::{FieldSpec, Scalar, ScalarError};
use crate::text::{Cursor, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("group mismatch: {0} vs {1}")]
    GroupMismatch(GroupSpec, GroupSpec),
    #[error("field mismatch: {0} vs {1}")]
    FieldMismatch(FieldSpec, FieldSpec),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("support has {0} elements, expected 3")]
    SupportNotThree(usize),
    #[error("identity is not in the support; {hint}")]
    IdentityNotInSupport { hint: String },
}

impl AlgebraError {
    /// 1-based column for text errors.
    pub fn column(&self) -> Option<usize> {
        match self {
            AlgebraError::Parse(p) => Some(p.column),
            AlgebraError::Group(g) => g.column(),
            _ => None,
        }
    }
}

/// A finitely supported map `G -> F` with no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgebraElement {
    group: GroupSpec,
    field: FieldSpec,
    terms: BTreeMap<GroupElement, Scalar>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TermJson {
    pub term: String,
    pub coeff: String,
}

impl AlgebraElement {
    pub fn zero(group: &GroupSpec, field: FieldSpec) -> Self {
        AlgebraElement {
            group: group.clone(),
            field,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(group: &GroupSpec, field: FieldSpec) -> Self {
        AlgebraElement::monomial(group, field.one(), group.identity())
            .expect("identity conforms")
    }

    pub fn monomial(
        group: &GroupSpec,
        coeff: Scalar,
        g: GroupElement,
    ) -> Result<Self, AlgebraError> {
        let field = coeff.field();
        AlgebraElement::from_terms(group, field, [(g, coeff)])
    }

    /// Sums the given terms, combining like group elements and dropping zeros.
    pub fn from_terms(
        group: &GroupSpec,
        field: FieldSpec,
        terms: impl IntoIterator<Item = (GroupElement, Scalar)>,
    ) -> Result<Self, AlgebraError> {
        let mut out = AlgebraElement::zero(group, field);
        for (g, c) in terms {
            group.check(&g)?;
            if c.field() != field {
                return Err(AlgebraError::FieldMismatch(field, c.field()));
            }
            out.accumulate(g, &c);
        }
        Ok(out)
    }

    fn accumulate(&mut self, g: GroupElement, c: &Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(g) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `|supp|`.
    pub fn support_size(&self) -> usize {
        self.terms.len()
    }

    /// Support in canonical order.
    pub fn support(&self) -> impl Iterator<Item = &GroupElement> {
        self.terms.keys()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&GroupElement, &Scalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, g: &GroupElement) -> Scalar {
        self.terms.get(g).cloned().unwrap_or_else(|| self.field.zero())
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.terms.contains_key(g)
    }

    fn compatible(&self, other: &AlgebraElement) -> Result<(), AlgebraError> {
        if self.group != other.group {
            return Err(AlgebraError::GroupMismatch(self.group.clone(), other.group.clone()));
        }
        if self.field != other.field {
            return Err(AlgebraError::FieldMismatch(self.field, other.field));
        }
        Ok(())
    }

    pub fn add(&self, other: &AlgebraElement) -> Result<AlgebraElement, AlgebraError> {
        self.compatible(other)?;
        let mut out = self.clone();
        for (g, c) in &other.terms {
            out.accumulate(g.clone(), c);
        }
        Ok(out)
    }

    pub fn neg(&self) -> AlgebraElement {
        AlgebraElement {
            group: self.group.clone(),
            field: self.field,
            terms: self.terms.iter().map(|(g, c)| (g.clone(), c.neg())).collect(),
        }
    }

    pub fn sub(&self, other: &AlgebraElement) -> Result<AlgebraElement, AlgebraError> {
        self.add(&other.neg())
    }

    /// Convolution product.
    pub fn mul(&self, other: &AlgebraElement) -> Result<AlgebraElement, AlgebraError> {
        self.compatible(other)?;
        let mut out = AlgebraElement::zero(&self.group, self.field);
        for (g, c) in &self.terms {
            for (h, d) in &other.terms {
                out.accumulate(self.group.mul_unchecked(g, h), &(c * d));
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: &Scalar) -> Result<AlgebraElement, AlgebraError> {
        if s.field() != self.field {
            return Err(AlgebraError::FieldMismatch(self.field, s.field()));
        }
        let mut out = AlgebraElement::zero(&self.group, self.field);
        if s.is_zero() {
            return Ok(out);
        }
        out.terms = self.terms.iter().map(|(g, c)| (g.clone(), c * s)).collect();
        Ok(out)
    }

    /// `g * x`: supports move by `h -> g h`, coefficients unchanged.
    pub fn left_translate(&self, g: &GroupElement) -> Result<AlgebraElement, AlgebraError> {
        self.group.check(g)?;
        Ok(AlgebraElement {
            group: self.group.clone(),
            field: self.field,
            terms: self
                .terms
                .iter()
                .map(|(h, c)| (self.group.mul_unchecked(g, h), c.clone()))
                .collect(),
        })
    }

    /// `x * g`.
    pub fn right_translate(&self, g: &GroupElement) -> Result<AlgebraElement, AlgebraError> {
        self.group.check(g)?;
        Ok(AlgebraElement {
            group: self.group.clone(),
            field: self.field,
            terms: self
                .terms
                .iter()
                .map(|(h, c)| (self.group.mul_unchecked(h, g), c.clone()))
                .collect(),
        })
    }

    /// Parses `term (('+'|'-') term)*` with `term := [scalar '*'] word | scalar`.
    pub fn parse(group: &GroupSpec, field: FieldSpec, text: &str) -> Result<Self, AlgebraError> {
        let mut cur = Cursor::new(text);
        let mut out = AlgebraElement::zero(group, field);
        let mut first = true;
        loop {
            cur.skip_ws();
            let negative = match cur.peek() {
                None if first => return Err(cur.error("empty expression").into()),
                None => break,
                Some('+') => {
                    cur.bump();
                    false
                }
                Some(c) if Cursor::is_minus(c) => {
                    cur.bump();
                    true
                }
                Some(_) if first => false,
                Some(c) => return Err(cur.error(format!("expected `+` or `-`, found `{c}`")).into()),
            };
            first = false;
            cur.skip_ws();
            let (coeff, g) = parse_term(group, field, &mut cur)?;
            let coeff = if negative { coeff.neg() } else { coeff };
            out.accumulate(g, &coeff);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Vec<TermJson> {
        self.terms
            .iter()
            .map(|(g, c)| TermJson {
                term: self.group.render(g),
                coeff: c.to_string(),
            })
            .collect()
    }

    /// Normalizes a three-term element with `e` in its support to
    /// `1 + alpha1 g1 + alpha2 g2`.
    pub fn as_support_triple(&self) -> Result<SupportTriple, AlgebraError> {
        if self.support_size() != 3 {
            return Err(AlgebraError::SupportNotThree(self.support_size()));
        }
        let e = self.group.identity();
        let Some(c0) = self.terms.get(&e) else {
            let g = self.terms.keys().next().expect("nonempty");
            let g_inv = self.group.inv_unchecked(g);
            return Err(AlgebraError::IdentityNotInSupport {
                hint: format!("left-translate by {}", self.group.render(&g_inv)),
            });
        };
        let c0_inv = c0.inv()?;
        let mut rest = self.terms.iter().filter(|(g, _)| **g != e);
        let (g1, a1) = rest.next().expect("three terms");
        let (g2, a2) = rest.next().expect("three terms");
        Ok(SupportTriple {
            group: self.group.clone(),
            field: self.field,
            alpha1: a1 * &c0_inv,
            g1: g1.clone(),
            alpha2: a2 * &c0_inv,
            g2: g2.clone(),
        })
    }

    /// Random element with at most `terms` terms drawn from `random_element(size)`.
    pub fn random<R: Rng + ?Sized>(
        group: &GroupSpec,
        field: FieldSpec,
        rng: &mut R,
        terms: usize,
        size: u32,
    ) -> Self {
        let mut out = AlgebraElement::zero(group, field);
        for _ in 0..terms {
            let g = group.random_element(rng, size);
            out.accumulate(g, &field.random_nonzero(rng, 4));
        }
        out
    }
}

fn parse_term(
    group: &GroupSpec,
    field: FieldSpec,
    cur: &mut Cursor<'_>,
) -> Result<(Scalar, GroupElement), AlgebraError> {
    let stop = |c: char| c == '+' || Cursor::is_minus(c);
    if cur.peek().is_some_and(|c| c.is_ascii_digit()) {
        let start = cur.pos();
        let mut text = cur.digits().expect("digit present");
        let save = cur.clone();
        cur.skip_ws();
        if cur.eat('/') {
            cur.skip_ws();
            let den = cur
                .digits()
                .ok_or_else(|| cur.error("expected denominator"))?;
            text = format!("{text}/{den}");
        } else {
            *cur = save;
        }
        let coeff = Scalar::parse(&text, field).map_err(|e| match e {
            ScalarError::ZeroDenominator(_) => {
                AlgebraError::Parse(cur.error_at(start, "zero denominator"))
            }
            other => AlgebraError::Scalar(other),
        })?;
        cur.skip_ws();
        if cur.eat('*') {
            cur.skip_ws();
            let g = group.parse_word(cur, &stop)?;
            return Ok((coeff, g));
        }
        match cur.peek() {
            None => {}
            Some(c) if stop(c) => {}
            Some(c) => {
                return Err(cur
                    .error(format!("expected `*`, `+` or `-` after coefficient, found `{c}`"))
                    .into())
            }
        }
        return Ok((coeff, group.identity()));
    }
    let g = group.parse_word(cur, &stop)?;
    Ok((field.one(), g))
}

impl fmt::Display for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (g, c)) in self.terms.iter().enumerate() {
            let negative = c.is_negative();
            let mag = if negative { c.neg() } else { c.clone() };
            if i == 0 {
                if negative {
                    f.write_str("-")?;
                }
            } else if negative {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            let is_e = self.group.is_identity(g);
            match (is_e, mag.is_one()) {
                (true, _) => write!(f, "{mag}")?,
                (false, true) => write!(f, "{}", self.group.render(g))?,
                (false, false) => write!(f, "{mag}*{}", self.group.render(g))?,
            }
        }
        Ok(())
    }
}

/// `a = 1 + alpha1 g1 + alpha2 g2` with `|supp(a)| = 3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportTriple {
    pub group: GroupSpec,
    pub field: FieldSpec,
    pub alpha1: Scalar,
    pub g1: GroupElement,
    pub alpha2: Scalar,
    pub g2: GroupElement,
}

impl SupportTriple {
    pub fn new(
        group: &GroupSpec,
        alpha1: Scalar,
        g1: GroupElement,
        alpha2: Scalar,
        g2: GroupElement,
    ) -> Result<Self, AlgebraError> {
        let field = alpha1.field();
        let a = AlgebraElement::from_terms(
            group,
            field,
            [(group.identity(), field.one()), (g1.clone(), alpha1.clone()), (g2.clone(), alpha2.clone())],
        )?;
        if a.support_size() != 3 {
            return Err(AlgebraError::SupportNotThree(a.support_size()));
        }
        Ok(SupportTriple {
            group: group.clone(),
            field,
            alpha1,
            g1,
            alpha2,
            g2,
        })
    }

    /// `lambda = g1^-1 g2`.
    pub fn lambda(&self) -> GroupElement {
        self.group
            .mul_unchecked(&self.group.inv_unchecked(&self.g1), &self.g2)
    }

    pub fn to_element(&self) -> AlgebraElement {
        AlgebraElement::from_terms(
            &self.group,
            self.field,
            [
                (self.group.identity(), self.field.one()),
                (self.g1.clone(), self.alpha1.clone()),
                (self.g2.clone(), self.alpha2.clone()),
            ],
        )
        .expect("triple conforms")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(g: &str, f: &str) -> (GroupSpec, FieldSpec) {
        (g.parse().unwrap(), f.parse().unwrap())
    }

    fn p(g: &GroupSpec, f: FieldSpec, s: &str) -> AlgebraElement {
        AlgebraElement::parse(g, f, s).unwrap()
    }

    #[test]
    fn addition() {
        let (c3, q) = setup("cyclic:3", "Q");
        let x = p(&c3, q, "1 + a").add(&p(&c3, q, "-a")).unwrap();
        assert_eq!(x, AlgebraElement::one(&c3, q));
        let y = p(&c3, q, "1 + a + 1/2*a^2");
        assert!(y.add(&y.neg()).unwrap().is_zero());
        let gf3: FieldSpec = "GF:3".parse().unwrap();
        let z = p(&c3, gf3, "1 + 2*a").add(&p(&c3, gf3, "1 + a")).unwrap();
        assert_eq!(z.to_string(), "2");
    }

    #[test]
    fn torsion_product_vanishes() {
        let (c3, q) = setup("cyclic:3", "Q");
        let a = p(&c3, q, "1 - a");
        let b = p(&c3, q, "1 + a + a^2");
        assert!(a.mul(&b).unwrap().is_zero());
        assert!(b.mul(&a).unwrap().is_zero());
    }

    #[test]
    fn free_product_has_no_cancellation() {
        let (f2, q) = setup("free:2", "Q");
        let prod = p(&f2, q, "1 + a").mul(&p(&f2, q, "1 + b")).unwrap();
        assert_eq!(prod, p(&f2, q, "1 + a + b + a b"));
        assert_eq!(prod.support_size(), 4);
    }

    #[test]
    fn translations() {
        let (c3, q) = setup("cyclic:3", "Q");
        let g = c3.parse_element("a").unwrap();
        assert_eq!(p(&c3, q, "1 + a").left_translate(&g).unwrap(), p(&c3, q, "a + a^2"));
        let x = p(&c3, q, "2 - a");
        assert_eq!(x.left_translate(&c3.identity()).unwrap(), x);
        let (f1, _) = setup("free:1", "Q");
        let a = f1.parse_element("a").unwrap();
        assert_eq!(p(&f1, q, "1 + a^-1").left_translate(&a).unwrap(), p(&f1, q, "a + 1"));
    }

    #[test]
    fn parsing_and_rendering() {
        let (c3, q) = setup("cyclic:3", "Q");
        let x = p(&c3, q, "1 + a + a^2");
        assert_eq!(x.support_size(), 3);
        assert!(x.terms().all(|(_, c)| c.is_one()));
        assert!(p(&c3, q, "a - a").is_zero());
        assert_eq!(p(&c3, q, "a - a").to_string(), "0");
        let (f2, _) = setup("free:2", "Q");
        let y = p(&f2, q, "2*a*b^-1 + 1/2");
        assert_eq!(y.support_size(), 2);
        assert_eq!(y.to_string(), "1/2 + 2*a b^-1");
        assert_eq!(p(&f2, q, &y.to_string()), y);
        assert_eq!(p(&f2, q, "-a + 3 - 2/4*b").to_string(), "3 - a - 1/2*b");
        let err = AlgebraElement::parse(&f2, q, "1 + a + ?").unwrap_err();
        assert_eq!(err.column(), Some(9));
        let err = AlgebraElement::parse(&f2, q, "1 + z").unwrap_err();
        assert!(matches!(err, AlgebraError::Group(GroupError::UnknownGenerator { name: 'z', column: 5 })));
        assert!(AlgebraElement::parse(&f2, q, "1/0*a").is_err());
        assert!(AlgebraElement::parse(&f2, q, "").is_err());
        assert!(AlgebraElement::parse(&f2, q, "1 +").is_err());
    }

    #[test]
    fn json_terms() {
        let (c3, q) = setup("cyclic:3", "Q");
        let json = serde_json::to_string(&p(&c3, q, "1 - a").to_json()).unwrap();
        assert_eq!(json, r#"[{"term":"1","coeff":"1"},{"term":"a","coeff":"-1"}]"#);
    }

    #[test]
    fn support_triples() {
        let (c7, q) = setup("cyclic:7", "Q");
        let t = p(&c7, q, "2 + 4*a + 6*a^2").as_support_triple().unwrap();
        assert_eq!(t.alpha1, Scalar::parse("2", q).unwrap());
        assert_eq!(t.g1, GroupElement::Cyclic(1));
        assert_eq!(t.alpha2, Scalar::parse("3", q).unwrap());
        assert_eq!(t.g2, GroupElement::Cyclic(2));
        assert_eq!(t.lambda(), GroupElement::Cyclic(1));
        let (f2, _) = setup("free:2", "Q");
        let t = p(&f2, q, "1 + a + b").as_support_triple().unwrap();
        assert_eq!(f2.render(&t.g1), "a");
        assert_eq!(f2.render(&t.g2), "b");
        assert!(t.alpha1.is_one() && t.alpha2.is_one());
        let err = p(&c7, q, "a + a^2 + a^3").as_support_triple().unwrap_err();
        match err {
            AlgebraError::IdentityNotInSupport { hint } => assert!(hint.contains("a^6")),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            p(&c7, q, "1 + a").as_support_triple().unwrap_err(),
            AlgebraError::SupportNotThree(2)
        );
    }

    #[test]
    fn mismatches() {
        let (c3, q) = setup("cyclic:3", "Q");
        let (c4, _) = setup("cyclic:4", "Q");
        let gf: FieldSpec = "GF:3".parse().unwrap();
        assert!(matches!(
            p(&c3, q, "a").mul(&p(&c4, q, "a")),
            Err(AlgebraError::GroupMismatch(..))
        ));
        assert!(matches!(
            p(&c3, q, "a").add(&p(&c3, gf, "a")),
            Err(AlgebraError::FieldMismatch(..))
        ));
    }

    proptest! {
        #[test]
        fn ring_laws(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (g, f) in [("cyclic:3", "Q"), ("free:2", "GF:2"), ("heisenberg", "GF:5"), ("sym:3", "Q")] {
                let (g, f) = setup(g, f);
                let x = AlgebraElement::random(&g, f, &mut rng, 3, 2);
                let y = AlgebraElement::random(&g, f, &mut rng, 3, 2);
                let z = AlgebraElement::random(&g, f, &mut rng, 3, 2);
                let xy = x.mul(&y).unwrap();
                prop_assert!(xy.support_size() <= x.support_size() * y.support_size());
                prop_assert_eq!(xy.mul(&z).unwrap(), x.mul(&y.mul(&z).unwrap()).unwrap());
                prop_assert_eq!(x.mul(&y.add(&z).unwrap()).unwrap(), xy.add(&x.mul(&z).unwrap()).unwrap());
                prop_assert_eq!(AlgebraElement::parse(&g, f, &x.to_string()).unwrap(), x);
            }
        }

        #[test]
        fn annihilation_survives_left_translation(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (g, q) = setup("product(sym:3,abelian:1)", "Q");
            let h = g.element_of_order_three().unwrap();
            let a = AlgebraElement::from_terms(&g, q, [
                (g.identity(), q.one()), (h.clone(), q.one()), (g.mul(&h, &h).unwrap(), q.one()),
            ]).unwrap();
            let one_minus_h = AlgebraElement::from_terms(&g, q, [(g.identity(), q.one()), (h, q.from_i64(-1))]).unwrap();
            let c = AlgebraElement::random(&g, q, &mut rng, 3, 2);
            let b = one_minus_h.mul(&c).unwrap();
            prop_assert!(a.mul(&b).unwrap().is_zero());
            let t = g.random_element(&mut rng, 3);
            prop_assert!(a.left_translate(&t).unwrap().mul(&b).unwrap().is_zero());
        }

        #[test]
        fn domains_have_no_zero_divisors_at_random(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for g in ["free:2", "abelian:2"] {
                let (g, q) = setup(g, "Q");
                let x = AlgebraElement::random(&g, q, &mut rng, 4, 2);
                let y = AlgebraElement::random(&g, q, &mut rng, 4, 2);
                if !x.is_zero() && !y.is_zero() {
                    prop_assert!(!x.mul(&y).unwrap().is_zero());
                }
            }
        }
    }
}
