//! Computable groups with canonical normal forms.
//!
//! Every family here has a cheap, unconditionally decidable word problem:
//! equality of [`GroupElement`]s is structural equality of normal forms.
//!
//! Generators are named `a`, `b`, `c`, ... in declaration order. In a product
//! the names continue across the factors, so `product(free:1,cyclic:3)` has the
//! free generator `a` and the cyclic generator `b`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{Cursor, ParseError};

/// Largest symmetric-group degree accepted.
pub const MAX_SYM_DEGREE: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("element {element} does not belong to {spec}")]
    SpecMismatch { spec: String, element: String },
    #[error("column {column}: unknown generator `{name}`")]
    UnknownGenerator { name: char, column: usize },
    #[error("{0}")]
    Parse(ParseError),
    #[error("invalid group spec: {0}")]
    InvalidSpec(String),
}

impl From<ParseError> for GroupError {
    fn from(e: ParseError) -> Self {
        GroupError::Parse(e)
    }
}

impl GroupError {
    /// 1-based column of a text error, when there is one.
    pub fn column(&self) -> Option<usize> {
        match self {
            GroupError::UnknownGenerator { column, .. } => Some(*column),
            GroupError::Parse(p) => Some(p.column),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroupSpec {
    Free(u32),
    FreeAbelian(u32),
    Cyclic(u64),
    /// Integer Heisenberg group: `(x,y,z)(x',y',z') = (x+x', y+y', z+z'+x*y')`.
    Heisenberg,
    Symmetric(u32),
    /// Flat, nonempty direct product.
    Product(Vec<GroupSpec>),
}

/// Normal form of a group element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupElement {
    /// Freely reduced syllables `(generator, exponent)`; adjacent generators differ.
    Free(Vec<(u32, i64)>),
    Abelian(Vec<i64>),
    Cyclic(u64),
    Heisenberg([i64; 3]),
    /// Images of `0..k`; products compose right to left.
    Perm(Vec<u8>),
    Tuple(Vec<GroupElement>),
}

/// Appends `gen^exp` to a freely reduced syllable list, keeping it reduced.
pub(crate) fn push_syllable<T: Copy + Eq>(word: &mut Vec<(T, i64)>, gen: T, exp: i64) {
    if exp == 0 {
        return;
    }
    match word.last_mut() {
        Some((g, e)) if *g == gen => {
            *e += exp;
            if *e == 0 {
                word.pop();
            }
        }
        _ => word.push((gen, exp)),
    }
}

fn gen_name(index: usize) -> char {
    (b'a' + index as u8) as char
}

fn render_syllables<T: Copy>(
    f: &mut fmt::Formatter<'_>,
    syllables: &[(T, i64)],
    name: impl Fn(T) -> String,
    sep: &str,
) -> fmt::Result {
    for (i, (g, e)) in syllables.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        if *e == 1 {
            write!(f, "{}", name(*g))?;
        } else {
            write!(f, "{}^{}", name(*g), e)?;
        }
    }
    Ok(())
}

impl GroupSpec {
    pub fn free(rank: u32) -> Result<Self, GroupError> {
        if rank == 0 {
            return Err(GroupError::InvalidSpec("free rank must be at least 1".into()));
        }
        GroupSpec::Free(rank).checked()
    }

    pub fn free_abelian(dim: u32) -> Result<Self, GroupError> {
        if dim == 0 {
            return Err(GroupError::InvalidSpec("abelian dimension must be at least 1".into()));
        }
        GroupSpec::FreeAbelian(dim).checked()
    }

    pub fn cyclic(modulus: u64) -> Result<Self, GroupError> {
        if modulus < 2 {
            return Err(GroupError::InvalidSpec("cyclic modulus must be at least 2".into()));
        }
        Ok(GroupSpec::Cyclic(modulus))
    }

    pub fn symmetric(k: u32) -> Result<Self, GroupError> {
        if !(2..=MAX_SYM_DEGREE).contains(&k) {
            return Err(GroupError::InvalidSpec(format!(
                "symmetric degree must be in 2..={MAX_SYM_DEGREE}"
            )));
        }
        Ok(GroupSpec::Symmetric(k))
    }

    /// Direct product; nested products are flattened.
    pub fn product(parts: Vec<GroupSpec>) -> Result<Self, GroupError> {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                GroupSpec::Product(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.is_empty() {
            return Err(GroupError::InvalidSpec("empty product".into()));
        }
        GroupSpec::Product(flat).checked()
    }

    fn checked(self) -> Result<Self, GroupError> {
        if self.generator_count() > 26 {
            return Err(GroupError::InvalidSpec(
                "at most 26 named generators are supported".into(),
            ));
        }
        Ok(self)
    }

    pub fn is_torsion_free(&self) -> bool {
        match self {
            GroupSpec::Free(_) | GroupSpec::FreeAbelian(_) | GroupSpec::Heisenberg => true,
            GroupSpec::Cyclic(_) | GroupSpec::Symmetric(_) => false,
            GroupSpec::Product(parts) => parts.iter().all(GroupSpec::is_torsion_free),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            GroupSpec::Cyclic(_) | GroupSpec::Symmetric(_) => true,
            GroupSpec::Free(_) | GroupSpec::FreeAbelian(_) | GroupSpec::Heisenberg => false,
            GroupSpec::Product(parts) => parts.iter().all(GroupSpec::is_finite),
        }
    }

    /// Number of named generators.
    pub fn generator_count(&self) -> usize {
        match self {
            GroupSpec::Free(r) => *r as usize,
            GroupSpec::FreeAbelian(d) => *d as usize,
            GroupSpec::Cyclic(_) => 1,
            GroupSpec::Heisenberg => 3,
            GroupSpec::Symmetric(_) => 2,
            GroupSpec::Product(parts) => parts.iter().map(GroupSpec::generator_count).sum(),
        }
    }

    /// Generator number `index` (0-based, global across product factors).
    pub fn generator(&self, index: usize) -> Option<GroupElement> {
        if index >= self.generator_count() {
            return None;
        }
        Some(match self {
            GroupSpec::Free(_) => GroupElement::Free(vec![(index as u32, 1)]),
            GroupSpec::FreeAbelian(d) => {
                let mut v = vec![0; *d as usize];
                v[index] = 1;
                GroupElement::Abelian(v)
            }
            GroupSpec::Cyclic(_) => GroupElement::Cyclic(1),
            GroupSpec::Heisenberg => {
                let mut v = [0; 3];
                v[index] = 1;
                GroupElement::Heisenberg(v)
            }
            GroupSpec::Symmetric(k) => {
                let k = *k as usize;
                let perm: Vec<u8> = if index == 0 {
                    // transposition (1 2)
                    let mut p: Vec<u8> = (0..k as u8).collect();
                    p.swap(0, 1);
                    p
                } else {
                    // k-cycle (1 2 ... k)
                    (0..k).map(|i| ((i + 1) % k) as u8).collect()
                };
                GroupElement::Perm(perm)
            }
            GroupSpec::Product(parts) => {
                let mut offset = index;
                let mut comps: Vec<GroupElement> = parts.iter().map(GroupSpec::identity).collect();
                for (j, part) in parts.iter().enumerate() {
                    let c = part.generator_count();
                    if offset < c {
                        comps[j] = part.generator(offset)?;
                        break;
                    }
                    offset -= c;
                }
                GroupElement::Tuple(comps)
            }
        })
    }

    pub fn generators(&self) -> Vec<GroupElement> {
        (0..self.generator_count())
            .map(|i| self.generator(i).expect("index in range"))
            .collect()
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            GroupSpec::Free(_) => GroupElement::Free(Vec::new()),
            GroupSpec::FreeAbelian(d) => GroupElement::Abelian(vec![0; *d as usize]),
            GroupSpec::Cyclic(_) => GroupElement::Cyclic(0),
            GroupSpec::Heisenberg => GroupElement::Heisenberg([0; 3]),
            GroupSpec::Symmetric(k) => GroupElement::Perm((0..*k as u8).collect()),
            GroupSpec::Product(parts) => {
                GroupElement::Tuple(parts.iter().map(GroupSpec::identity).collect())
            }
        }
    }

    pub fn is_identity(&self, x: &GroupElement) -> bool {
        *x == self.identity()
    }

    /// Whether `x` is a well-formed normal form for this group.
    pub fn conforms(&self, x: &GroupElement) -> bool {
        match (self, x) {
            (GroupSpec::Free(r), GroupElement::Free(w)) => {
                w.iter().all(|&(g, e)| g < *r && e != 0)
                    && w.windows(2).all(|p| p[0].0 != p[1].0)
            }
            (GroupSpec::FreeAbelian(d), GroupElement::Abelian(v)) => v.len() == *d as usize,
            (GroupSpec::Cyclic(m), GroupElement::Cyclic(r)) => r < m,
            (GroupSpec::Heisenberg, GroupElement::Heisenberg(_)) => true,
            (GroupSpec::Symmetric(k), GroupElement::Perm(p)) => {
                let k = *k as usize;
                let mut seen = vec![false; k];
                p.len() == k
                    && p.iter().all(|&i| {
                        let i = i as usize;
                        i < k && !std::mem::replace(&mut seen[i], true)
                    })
            }
            (GroupSpec::Product(parts), GroupElement::Tuple(comps)) => {
                parts.len() == comps.len()
                    && parts.iter().zip(comps).all(|(p, c)| p.conforms(c))
            }
            _ => false,
        }
    }

    pub fn check(&self, x: &GroupElement) -> Result<(), GroupError> {
        if self.conforms(x) {
            Ok(())
        } else {
            Err(GroupError::SpecMismatch {
                spec: self.to_string(),
                element: format!("{x:?}"),
            })
        }
    }

    /// Product of normal forms.
    pub fn mul(&self, x: &GroupElement, y: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.mul_unchecked(x, y))
    }

    pub fn inv(&self, x: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(x)?;
        Ok(self.inv_unchecked(x))
    }

    pub fn pow(&self, x: &GroupElement, k: i64) -> Result<GroupElement, GroupError> {
        self.check(x)?;
        Ok(self.pow_unchecked(x, k))
    }

    /// Multiplication of elements already known to conform.
    pub(crate) fn mul_unchecked(&self, x: &GroupElement, y: &GroupElement) -> GroupElement {
        match (self, x, y) {
            (GroupSpec::Free(_), GroupElement::Free(a), GroupElement::Free(b)) => {
                let mut w = a.clone();
                for &(g, e) in b {
                    push_syllable(&mut w, g, e);
                }
                GroupElement::Free(w)
            }
            (GroupSpec::FreeAbelian(_), GroupElement::Abelian(a), GroupElement::Abelian(b)) => {
                GroupElement::Abelian(a.iter().zip(b).map(|(p, q)| p + q).collect())
            }
            (GroupSpec::Cyclic(m), GroupElement::Cyclic(a), GroupElement::Cyclic(b)) => {
                GroupElement::Cyclic((a + b) % m)
            }
            (GroupSpec::Heisenberg, GroupElement::Heisenberg(a), GroupElement::Heisenberg(b)) => {
                GroupElement::Heisenberg([a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1]])
            }
            (GroupSpec::Symmetric(_), GroupElement::Perm(a), GroupElement::Perm(b)) => {
                GroupElement::Perm(b.iter().map(|&i| a[i as usize]).collect())
            }
            (GroupSpec::Product(parts), GroupElement::Tuple(a), GroupElement::Tuple(b)) => {
                GroupElement::Tuple(
                    parts
                        .iter()
                        .zip(a.iter().zip(b))
                        .map(|(p, (s, t))| p.mul_unchecked(s, t))
                        .collect(),
                )
            }
            _ => panic!("group element does not match spec {self}"),
        }
    }

    pub(crate) fn inv_unchecked(&self, x: &GroupElement) -> GroupElement {
        match (self, x) {
            (GroupSpec::Free(_), GroupElement::Free(w)) => {
                GroupElement::Free(w.iter().rev().map(|&(g, e)| (g, -e)).collect())
            }
            (GroupSpec::FreeAbelian(_), GroupElement::Abelian(v)) => {
                GroupElement::Abelian(v.iter().map(|c| -c).collect())
            }
            (GroupSpec::Cyclic(m), GroupElement::Cyclic(r)) => GroupElement::Cyclic((m - r) % m),
            (GroupSpec::Heisenberg, GroupElement::Heisenberg([x, y, z])) => {
                GroupElement::Heisenberg([-x, -y, x * y - z])
            }
            (GroupSpec::Symmetric(_), GroupElement::Perm(p)) => {
                let mut inv = vec![0u8; p.len()];
                for (i, &j) in p.iter().enumerate() {
                    inv[j as usize] = i as u8;
                }
                GroupElement::Perm(inv)
            }
            (GroupSpec::Product(parts), GroupElement::Tuple(c)) => GroupElement::Tuple(
                parts.iter().zip(c).map(|(p, x)| p.inv_unchecked(x)).collect(),
            ),
            _ => panic!("group element does not match spec {self}"),
        }
    }

    pub(crate) fn pow_unchecked(&self, x: &GroupElement, k: i64) -> GroupElement {
        let mut base = if k < 0 { self.inv_unchecked(x) } else { x.clone() };
        let mut n = k.unsigned_abs();
        let mut acc = self.identity();
        while n > 0 {
            if n & 1 == 1 {
                acc = self.mul_unchecked(&acc, &base);
            }
            n >>= 1;
            if n > 0 {
                base = self.mul_unchecked(&base, &base);
            }
        }
        acc
    }

    /// Smallest `k` in `1..=bound` with `x^k = e`.
    pub fn order_of(&self, x: &GroupElement, bound: u64) -> Option<u64> {
        let e = self.identity();
        let mut acc = x.clone();
        for k in 1..=bound {
            if acc == e {
                return Some(k);
            }
            acc = self.mul_unchecked(&acc, x);
        }
        None
    }

    /// Some element of order exactly three, if the group has one among its
    /// standard candidates.
    pub fn element_of_order_three(&self) -> Option<GroupElement> {
        match self {
            GroupSpec::Cyclic(m) if m % 3 == 0 => Some(GroupElement::Cyclic(m / 3)),
            GroupSpec::Symmetric(k) if *k >= 3 => {
                let mut p: Vec<u8> = (0..*k as u8).collect();
                p[0] = 1;
                p[1] = 2;
                p[2] = 0;
                Some(GroupElement::Perm(p))
            }
            GroupSpec::Product(parts) => {
                let (j, h) = parts
                    .iter()
                    .enumerate()
                    .find_map(|(j, p)| p.element_of_order_three().map(|h| (j, h)))?;
                let mut comps: Vec<GroupElement> = parts.iter().map(GroupSpec::identity).collect();
                comps[j] = h;
                Some(GroupElement::Tuple(comps))
            }
            _ => None,
        }
    }

    /// All elements of a finite group in canonical order.
    pub fn elements(&self) -> Option<Vec<GroupElement>> {
        let mut out = match self {
            GroupSpec::Cyclic(m) => (0..*m).map(GroupElement::Cyclic).collect(),
            GroupSpec::Symmetric(k) => {
                if *k > 8 {
                    return None;
                }
                let mut perms = Vec::new();
                let mut p: Vec<u8> = (0..*k as u8).collect();
                permutations(&mut p, 0, &mut perms);
                perms.into_iter().map(GroupElement::Perm).collect()
            }
            GroupSpec::Product(parts) => {
                let lists = parts
                    .iter()
                    .map(GroupSpec::elements)
                    .collect::<Option<Vec<_>>>()?;
                cartesian(&lists)
            }
            _ => return None,
        };
        out.sort();
        Some(out)
    }

    /// Elements of the natural ball of the given radius: word length for
    /// free groups, max-abs coordinate for free abelian and Heisenberg groups,
    /// the whole group for finite families.
    pub fn ball(&self, radius: u32) -> Vec<GroupElement> {
        let r = radius as i64;
        let mut out = match self {
            GroupSpec::Free(rank) => {
                let mut all = vec![Vec::new()];
                let mut frontier: Vec<Vec<(u32, i64)>> = vec![Vec::new()];
                for _ in 0..radius {
                    let mut next = Vec::new();
                    for w in &frontier {
                        for g in 0..*rank {
                            for s in [1i64, -1] {
                                if let Some(&(lg, le)) = w.last() {
                                    if lg == g && le.signum() != s {
                                        continue;
                                    }
                                }
                                let mut w2 = w.clone();
                                push_syllable(&mut w2, g, s);
                                next.push(w2);
                            }
                        }
                    }
                    all.extend(next.iter().cloned());
                    frontier = next;
                }
                all.into_iter().map(GroupElement::Free).collect()
            }
            GroupSpec::FreeAbelian(d) => {
                let mut vecs: Vec<Vec<i64>> = vec![Vec::new()];
                for _ in 0..*d {
                    vecs = vecs
                        .into_iter()
                        .flat_map(|v| {
                            (-r..=r).map(move |c| {
                                let mut v2 = v.clone();
                                v2.push(c);
                                v2
                            })
                        })
                        .collect();
                }
                vecs.into_iter().map(GroupElement::Abelian).collect()
            }
            GroupSpec::Heisenberg => {
                let mut v = Vec::new();
                for x in -r..=r {
                    for y in -r..=r {
                        for z in -r..=r {
                            v.push(GroupElement::Heisenberg([x, y, z]));
                        }
                    }
                }
                v
            }
            GroupSpec::Cyclic(_) | GroupSpec::Symmetric(_) => {
                self.elements().expect("finite family")
            }
            GroupSpec::Product(parts) => {
                let lists: Vec<Vec<GroupElement>> = parts.iter().map(|p| p.ball(radius)).collect();
                cartesian(&lists)
            }
        };
        out.sort();
        out
    }

    /// A random element of moderate size.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R, size: u32) -> GroupElement {
        let s = size as i64;
        match self {
            GroupSpec::Free(rank) => {
                let len = rng.gen_range(0..=size);
                let mut w = Vec::new();
                for _ in 0..len {
                    let g = rng.gen_range(0..*rank);
                    let e = if rng.gen_bool(0.5) { 1 } else { -1 };
                    push_syllable(&mut w, g, e);
                }
                GroupElement::Free(w)
            }
            GroupSpec::FreeAbelian(d) => {
                GroupElement::Abelian((0..*d).map(|_| rng.gen_range(-s..=s)).collect())
            }
            GroupSpec::Cyclic(m) => GroupElement::Cyclic(rng.gen_range(0..*m)),
            GroupSpec::Heisenberg => GroupElement::Heisenberg([
                rng.gen_range(-s..=s),
                rng.gen_range(-s..=s),
                rng.gen_range(-s..=s),
            ]),
            GroupSpec::Symmetric(k) => {
                let mut p: Vec<u8> = (0..*k as u8).collect();
                p.shuffle(rng);
                GroupElement::Perm(p)
            }
            GroupSpec::Product(parts) => {
                GroupElement::Tuple(parts.iter().map(|p| p.random_element(rng, size)).collect())
            }
        }
    }

    /// Parses generator text: `a b^-1 a`, `a*b`, `1`; `(1 2 3)` cycles in
    /// symmetric groups; `(x, y)` component tuples in products.
    pub fn parse_element(&self, text: &str) -> Result<GroupElement, GroupError> {
        let mut cur = Cursor::new(text);
        let x = self.parse_word(&mut cur, &|_| false)?;
        cur.skip_ws();
        if !cur.at_end() {
            return Err(cur.error("unexpected trailing input").into());
        }
        Ok(x)
    }

    /// Parses a word until end of input or a character accepted by `stop`
    /// (stop characters are only checked where a new factor could begin).
    pub(crate) fn parse_word(
        &self,
        cur: &mut Cursor<'_>,
        stop: &dyn Fn(char) -> bool,
    ) -> Result<GroupElement, GroupError> {
        let mut acc = self.identity();
        let mut factors = 0usize;
        loop {
            cur.skip_ws();
            let Some(c) = cur.peek() else { break };
            if stop(c) {
                break;
            }
            let start = cur.pos();
            let factor = if c == '*' && factors > 0 {
                cur.bump();
                continue;
            } else if c.is_ascii_lowercase() {
                cur.bump();
                let index = (c as u8 - b'a') as usize;
                self.generator(index).ok_or(GroupError::UnknownGenerator {
                    name: c,
                    column: cur.column() - 1,
                })?
            } else if c == '1' {
                cur.bump();
                if cur.peek().is_some_and(|d| d.is_ascii_digit()) {
                    return Err(cur.error_at(start, "expected group element").into());
                }
                self.identity()
            } else if c == '(' {
                match self {
                    GroupSpec::Symmetric(k) => parse_cycle(*k, cur)?,
                    GroupSpec::Product(parts) => parse_tuple(parts, cur)?,
                    _ => return Err(cur.error("unexpected `(`").into()),
                }
            } else {
                return Err(cur.error(format!("unexpected `{c}`")).into());
            };
            cur.skip_ws();
            let factor = if cur.eat('^') {
                cur.skip_ws();
                let k = cur.signed_int()?;
                self.pow_unchecked(&factor, k)
            } else {
                factor
            };
            acc = self.mul_unchecked(&acc, &factor);
            factors += 1;
        }
        if factors == 0 {
            return Err(cur.error("expected group element").into());
        }
        Ok(acc)
    }

    /// Canonical text; `parse_element(render(x)) == x`.
    pub fn render(&self, x: &GroupElement) -> String {
        Rendered(self, x).to_string()
    }
}

struct Rendered<'a>(&'a GroupSpec, &'a GroupElement);

impl fmt::Display for Rendered<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Rendered(spec, x) = *self;
        if spec.is_identity(x) {
            return f.write_str("1");
        }
        match x {
            GroupElement::Free(w) => {
                render_syllables(f, w, |g| gen_name(g as usize).to_string(), " ")
            }
            GroupElement::Abelian(v) => {
                let syl: Vec<(usize, i64)> =
                    v.iter().enumerate().filter(|(_, &c)| c != 0).map(|(i, &c)| (i, c)).collect();
                render_syllables(f, &syl, |g| gen_name(g).to_string(), " ")
            }
            GroupElement::Cyclic(r) => render_syllables(f, &[(0usize, *r as i64)], |_| "a".into(), " "),
            GroupElement::Heisenberg([x, y, z]) => {
                // (x,y,z) = a^x b^y c^(z - xy)
                let syl: Vec<(usize, i64)> = [(0, *x), (1, *y), (2, z - x * y)]
                    .into_iter()
                    .filter(|&(_, e)| e != 0)
                    .collect();
                render_syllables(f, &syl, |g| gen_name(g).to_string(), " ")
            }
            GroupElement::Perm(p) => {
                let mut seen = vec![false; p.len()];
                for start in 0..p.len() {
                    if seen[start] || p[start] as usize == start {
                        continue;
                    }
                    f.write_str("(")?;
                    let mut i = start;
                    let mut first = true;
                    while !seen[i] {
                        seen[i] = true;
                        if !first {
                            f.write_str(" ")?;
                        }
                        write!(f, "{}", i + 1)?;
                        first = false;
                        i = p[i] as usize;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
            GroupElement::Tuple(comps) => {
                let GroupSpec::Product(parts) = spec else {
                    return Err(fmt::Error);
                };
                f.write_str("(")?;
                for (i, (p, c)) in parts.iter().zip(comps).enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", Rendered(p, c))?;
                }
                f.write_str(")")
            }
        }
    }
}

fn parse_cycle(k: u32, cur: &mut Cursor<'_>) -> Result<GroupElement, GroupError> {
    let open = cur.pos();
    cur.bump();
    let mut points: Vec<usize> = Vec::new();
    loop {
        cur.skip_ws();
        if cur.eat(')') {
            break;
        }
        if !points.is_empty() {
            cur.eat(',');
            cur.skip_ws();
        }
        let at = cur.pos();
        let d = cur
            .digits()
            .ok_or_else(|| cur.error("expected point or `)` in cycle"))?;
        let v: usize = d.parse().map_err(|_| cur.error_at(at, "point out of range"))?;
        if v == 0 || v > k as usize {
            return Err(cur.error_at(at, format!("point {v} outside 1..={k}")).into());
        }
        if points.contains(&(v - 1)) {
            return Err(cur.error_at(at, format!("point {v} repeated in cycle")).into());
        }
        points.push(v - 1);
        if cur.at_end() {
            return Err(cur.error_at(open, "unclosed cycle").into());
        }
    }
    let mut p: Vec<u8> = (0..k as u8).collect();
    for (i, &pt) in points.iter().enumerate() {
        p[pt] = points[(i + 1) % points.len()] as u8;
    }
    Ok(GroupElement::Perm(p))
}

fn parse_tuple(parts: &[GroupSpec], cur: &mut Cursor<'_>) -> Result<GroupElement, GroupError> {
    cur.bump();
    let mut comps = Vec::with_capacity(parts.len());
    for (i, p) in parts.iter().enumerate() {
        let c = p.parse_word(cur, &|c| c == ',' || c == ')')?;
        comps.push(c);
        cur.skip_ws();
        let expected = if i + 1 == parts.len() { ')' } else { ',' };
        if !cur.eat(expected) {
            return Err(cur
                .error(format!("expected `{expected}` in component tuple"))
                .into());
        }
    }
    Ok(GroupElement::Tuple(comps))
}

fn permutations(p: &mut Vec<u8>, k: usize, out: &mut Vec<Vec<u8>>) {
    if k == p.len() {
        out.push(p.clone());
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, out);
        p.swap(k, i);
    }
}

fn cartesian(lists: &[Vec<GroupElement>]) -> Vec<GroupElement> {
    let mut acc: Vec<Vec<GroupElement>> = vec![Vec::new()];
    for list in lists {
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                list.iter().map(move |x| {
                    let mut v = prefix.clone();
                    v.push(x.clone());
                    v
                })
            })
            .collect();
    }
    acc.into_iter().map(GroupElement::Tuple).collect()
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Free(r) => write!(f, "free:{r}"),
            GroupSpec::FreeAbelian(d) => write!(f, "abelian:{d}"),
            GroupSpec::Cyclic(m) => write!(f, "cyclic:{m}"),
            GroupSpec::Heisenberg => write!(f, "heisenberg"),
            GroupSpec::Symmetric(k) => write!(f, "sym:{k}"),
            GroupSpec::Product(parts) => {
                f.write_str("product(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for GroupSpec {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || GroupError::InvalidSpec(format!("cannot parse group spec `{t}`"));
        if t == "heisenberg" {
            return Ok(GroupSpec::Heisenberg);
        }
        if let Some(inner) = t.strip_prefix("product(").and_then(|r| r.strip_suffix(')')) {
            // split on top-level commas
            let mut parts = Vec::new();
            let mut depth = 0usize;
            let mut start = 0usize;
            for (i, c) in inner.char_indices() {
                match c {
                    '(' => depth += 1,
                    ')' => depth = depth.checked_sub(1).ok_or_else(bad)?,
                    ',' if depth == 0 => {
                        parts.push(inner[start..i].parse()?);
                        start = i + 1;
                    }
                    _ => {}
                }
            }
            parts.push(inner[start..].parse()?);
            return GroupSpec::product(parts);
        }
        let (kind, arg) = t.split_once(':').ok_or_else(bad)?;
        let n: u64 = arg.trim().parse().map_err(|_| bad())?;
        let small = || u32::try_from(n).map_err(|_| bad());
        match kind.trim() {
            "free" => GroupSpec::free(small()?),
            "abelian" => GroupSpec::free_abelian(small()?),
            "cyclic" => GroupSpec::cyclic(n),
            "sym" => GroupSpec::symmetric(small()?),
            _ => Err(bad()),
        }
    }
}

impl Serialize for GroupSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroupSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The two abstract letters of a relation word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    X1,
    X2,
}

/// A freely reduced word in `X1^±1`, `X2^±1`; the empty word is the formal identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FormalWord {
    syllables: Vec<(Letter, i64)>,
}

impl FormalWord {
    pub fn empty() -> Self {
        FormalWord::default()
    }

    pub fn letter(l: Letter, exp: i64) -> Self {
        let mut w = FormalWord::empty();
        push_syllable(&mut w.syllables, l, exp);
        w
    }

    pub fn x1() -> Self {
        FormalWord::letter(Letter::X1, 1)
    }

    pub fn x2() -> Self {
        FormalWord::letter(Letter::X2, 1)
    }

    /// Builds a reduced word from arbitrary syllables.
    pub fn from_syllables(syllables: impl IntoIterator<Item = (Letter, i64)>) -> Self {
        let mut w = FormalWord::empty();
        for (l, e) in syllables {
            push_syllable(&mut w.syllables, l, e);
        }
        w
    }

    pub fn syllables(&self) -> &[(Letter, i64)] {
        &self.syllables
    }

    pub fn is_empty(&self) -> bool {
        self.syllables.is_empty()
    }

    /// Number of letters `X^±1`.
    pub fn len(&self) -> usize {
        self.syllables.iter().map(|(_, e)| e.unsigned_abs() as usize).sum()
    }

    /// True when every exponent is positive (and the word is nonempty).
    pub fn is_positive(&self) -> bool {
        !self.is_empty() && self.syllables.iter().all(|&(_, e)| e > 0)
    }

    pub fn mul(&self, other: &FormalWord) -> FormalWord {
        let mut w = self.clone();
        for &(l, e) in &other.syllables {
            push_syllable(&mut w.syllables, l, e);
        }
        w
    }

    pub fn inv(&self) -> FormalWord {
        FormalWord {
            syllables: self.syllables.iter().rev().map(|&(l, e)| (l, -e)).collect(),
        }
    }

    pub fn pow(&self, k: i64) -> FormalWord {
        let base = if k < 0 { self.inv() } else { self.clone() };
        (0..k.unsigned_abs()).fold(FormalWord::empty(), |acc, _| acc.mul(&base))
    }

    fn unit_letters(&self) -> Vec<(Letter, i64)> {
        self.syllables
            .iter()
            .flat_map(|&(l, e)| std::iter::repeat_n((l, e.signum()), e.unsigned_abs() as usize))
            .collect()
    }

    /// Letters of the cyclic reduction (conjugacy-class representative up to rotation).
    pub fn cyclically_reduced_letters(&self) -> Vec<(Letter, i64)> {
        let mut v = self.unit_letters();
        while v.len() >= 2 {
            let (f, l) = (v[0], v[v.len() - 1]);
            if f.0 == l.0 && f.1 == -l.1 {
                v.pop();
                v.remove(0);
            } else {
                break;
            }
        }
        v
    }

    /// Equal up to cyclic rotation after cyclic reduction.
    pub fn cyclically_equivalent(&self, other: &FormalWord) -> bool {
        let a = self.cyclically_reduced_letters();
        let b = other.cyclically_reduced_letters();
        if a.len() != b.len() {
            return false;
        }
        if a.is_empty() {
            return true;
        }
        (0..a.len()).any(|r| a.iter().cycle().skip(r).take(a.len()).eq(b.iter()))
    }
}

impl fmt::Display for FormalWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("e");
        }
        render_syllables(
            f,
            &self.syllables,
            |l| match l {
                Letter::X1 => "X1".into(),
                Letter::X2 => "X2".into(),
            },
            "·",
        )
    }
}

impl FromStr for FormalWord {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cur = Cursor::new(s);
        let mut w = FormalWord::empty();
        cur.skip_ws();
        if cur.eat('e') {
            cur.skip_ws();
            return if cur.at_end() { Ok(w) } else { Err(cur.error("unexpected input after `e`")) };
        }
        loop {
            cur.skip_ws();
            match cur.peek() {
                None => break,
                Some('·') | Some('*') if !w.is_empty() => {
                    cur.bump();
                    continue;
                }
                Some('X') => {
                    cur.bump();
                    let l = match cur.bump() {
                        Some('1') => Letter::X1,
                        Some('2') => Letter::X2,
                        _ => return Err(cur.error("expected X1 or X2")),
                    };
                    cur.skip_ws();
                    let e = if cur.eat('^') { cur.signed_int()? } else { 1 };
                    push_syllable(&mut w.syllables, l, e);
                }
                Some(c) => return Err(cur.error(format!("unexpected `{c}`"))),
            }
        }
        Ok(w)
    }
}

impl Serialize for FormalWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Substitutes `g1` for `X1` and `g2` for `X2` and multiplies out.
pub fn eval_word(
    spec: &GroupSpec,
    w: &FormalWord,
    g1: &GroupElement,
    g2: &GroupElement,
) -> Result<GroupElement, GroupError> {
    spec.check(g1)?;
    spec.check(g2)?;
    Ok(eval_word_unchecked(spec, w, g1, g2))
}

pub(crate) fn eval_word_unchecked(
    spec: &GroupSpec,
    w: &FormalWord,
    g1: &GroupElement,
    g2: &GroupElement,
) -> GroupElement {
    w.syllables.iter().fold(spec.identity(), |acc, &(l, e)| {
        let g = match l {
            Letter::X1 => g1,
            Letter::X2 => g2,
        };
        spec.mul_unchecked(&acc, &spec.pow_unchecked(g, e))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(s: &str) -> GroupSpec {
        s.parse().unwrap()
    }

    fn el(g: &GroupSpec, s: &str) -> GroupElement {
        g.parse_element(s).unwrap()
    }

    #[test]
    fn free_reduction() {
        let g = spec("free:2");
        let a = el(&g, "a");
        assert_eq!(g.mul(&a, &g.inv(&a).unwrap()).unwrap(), g.identity());
        assert_eq!(el(&g, "a b^-1 b a"), el(&g, "a^2"));
        assert_eq!(g.inv(&el(&g, "a b^2")).unwrap(), el(&g, "b^-2 a^-1"));
        assert_eq!(g.render(&el(&g, "a b^-1 b a")), "a^2");
    }

    #[test]
    fn heisenberg_rule() {
        let h = GroupSpec::Heisenberg;
        let x = GroupElement::Heisenberg([1, 0, 0]);
        let y = GroupElement::Heisenberg([0, 1, 0]);
        assert_eq!(h.mul(&x, &y).unwrap(), GroupElement::Heisenberg([1, 1, 1]));
        // oracle: solve (1,1,0)(a,b,c) = (0,0,0) componentwise
        let t = GroupElement::Heisenberg([1, 1, 0]);
        let (a, b) = (-1i64, -1i64);
        // c = x y - z with x = y = 1, z = 0
        let c = -b;
        assert_eq!(h.inv(&t).unwrap(), GroupElement::Heisenberg([a, b, c]));
        assert_eq!(h.inv(&t).unwrap(), GroupElement::Heisenberg([-1, -1, 1]));
        assert_eq!(h.inv(&h.identity()).unwrap(), h.identity());
        // commutator of the generators is central c
        let comm = h
            .mul(&h.mul(&x, &y).unwrap(), &h.mul(&h.inv(&x).unwrap(), &h.inv(&y).unwrap()).unwrap())
            .unwrap();
        assert_eq!(comm, el(&h, "c"));
    }

    #[test]
    fn cyclic_and_parse() {
        let c3 = spec("cyclic:3");
        let g2 = el(&c3, "a^2");
        assert_eq!(c3.mul(&g2, &g2).unwrap(), el(&c3, "a"));
        assert_eq!(el(&spec("cyclic:4"), "a^7"), GroupElement::Cyclic(3));
        assert_eq!(
            spec("free:2").parse_element("z"),
            Err(GroupError::UnknownGenerator { name: 'z', column: 1 })
        );
        assert!(matches!(
            spec("free:2").parse_element("a^x"),
            Err(GroupError::Parse(_))
        ));
        assert!(matches!(spec("free:2").parse_element("c"), Err(GroupError::UnknownGenerator { .. })));
    }

    #[test]
    fn torsion_flags() {
        assert!(spec("free:2").is_torsion_free());
        assert!(!spec("cyclic:6").is_torsion_free());
        assert!(!spec("product(abelian:1,cyclic:3)").is_torsion_free());
        assert!(spec("product(heisenberg,abelian:2)").is_torsion_free());
        assert!(!spec("sym:3").is_torsion_free());
    }

    #[test]
    fn spec_text() {
        for s in ["free:2", "abelian:3", "cyclic:6", "heisenberg", "sym:3", "product(free:1,cyclic:3)"] {
            assert_eq!(spec(s).to_string(), s);
        }
        assert_eq!(
            spec("product(product(free:1,cyclic:3),sym:3)"),
            spec("product(free:1,cyclic:3,sym:3)")
        );
        for bad in ["free:0", "cyclic:1", "sym:1", "product()", "torus:2", "free:27"] {
            assert!(bad.parse::<GroupSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn sym_and_product_text() {
        let s3 = spec("sym:3");
        let r = el(&s3, "(1 2 3)");
        assert_eq!(r, el(&s3, "b"));
        assert_eq!(s3.order_of(&r, 10), Some(3));
        assert_eq!(s3.render(&el(&s3, "a b")), s3.render(&s3.mul(&el(&s3, "a"), &r).unwrap()));
        let p = spec("product(free:1,cyclic:3)");
        assert_eq!(el(&p, "a^2 b"), el(&p, "(a^2, a)"));
        assert_eq!(p.render(&el(&p, "b a^2")), "(a^2, a)");
        assert_eq!(p.render(&p.identity()), "1");
        let ps = spec("product(sym:3,abelian:1)");
        let x = el(&ps, "((1 2)(2 3), a^-2)");
        assert_eq!(ps.parse_element(&ps.render(&x)).unwrap(), x);
    }

    #[test]
    fn eval_word_examples() {
        let c3 = spec("cyclic:3");
        let g = el(&c3, "a");
        let g2 = el(&c3, "a^2");
        let w: FormalWord = "X1·X2".parse().unwrap();
        assert_eq!(eval_word(&c3, &w, &g, &g2).unwrap(), c3.identity());
        assert_eq!(eval_word(&c3, &FormalWord::empty(), &g, &g2).unwrap(), c3.identity());
        let f2 = spec("free:2");
        let a = el(&f2, "a");
        let x13 = FormalWord::letter(Letter::X1, 3);
        assert_ne!(eval_word(&f2, &x13, &a, &el(&f2, "b")).unwrap(), f2.identity());
    }

    #[test]
    fn formal_word_basics() {
        let w: FormalWord = "X2^-1·X2^-1·X1".parse().unwrap();
        assert_eq!(w.to_string(), "X2^-2·X1");
        assert_eq!(FormalWord::x1().mul(&FormalWord::x1().inv()), FormalWord::empty());
        assert!("X1·X2".parse::<FormalWord>().unwrap().is_positive());
        let a: FormalWord = "X1·X2".parse().unwrap();
        let b: FormalWord = "X2·X1".parse().unwrap();
        assert!(a.cyclically_equivalent(&b));
        assert!(!a.cyclically_equivalent(&FormalWord::x1()));
        let conj: FormalWord = "X2^-1·X1·X2·X2".parse().unwrap();
        assert!(conj.cyclically_equivalent(&a));
    }

    #[test]
    fn balls() {
        assert_eq!(spec("free:2").ball(2).len(), 1 + 4 + 12);
        assert_eq!(spec("abelian:2").ball(1).len(), 9);
        assert_eq!(spec("sym:3").ball(0).len(), 6);
        assert_eq!(spec("product(cyclic:3,abelian:1)").ball(1).len(), 9);
    }

    fn families() -> Vec<GroupSpec> {
        ["free:2", "abelian:2", "cyclic:6", "heisenberg", "sym:4", "product(free:1,cyclic:3)", "product(sym:3,heisenberg)"]
            .iter()
            .map(|s| spec(s))
            .collect()
    }

    proptest! {
        #[test]
        fn axioms_and_rendering(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for g in families() {
                let x = g.random_element(&mut rng, 4);
                let y = g.random_element(&mut rng, 4);
                let z = g.random_element(&mut rng, 4);
                prop_assert!(g.conforms(&x));
                let xy_z = g.mul(&g.mul(&x, &y).unwrap(), &z).unwrap();
                let x_yz = g.mul(&x, &g.mul(&y, &z).unwrap()).unwrap();
                prop_assert_eq!(xy_z, x_yz);
                prop_assert_eq!(g.mul(&x, &g.inv(&x).unwrap()).unwrap(), g.identity());
                prop_assert_eq!(g.mul(&g.identity(), &x).unwrap(), x.clone());
                prop_assert_eq!(g.parse_element(&g.render(&x)).unwrap(), x.clone());
                if g.is_torsion_free() && !g.is_identity(&x) {
                    for k in 1..=20 {
                        prop_assert_ne!(g.pow(&x, k).unwrap(), g.identity());
                    }
                }
            }
        }

        #[test]
        fn eval_is_homomorphism(seed in any::<u64>(), s1 in proptest::collection::vec((0u8..2, -3i64..4), 0..6), s2 in proptest::collection::vec((0u8..2, -3i64..4), 0..6)) {
            let to_word = |s: &[(u8, i64)]| FormalWord::from_syllables(s.iter().map(|&(l, e)| (if l == 0 { Letter::X1 } else { Letter::X2 }, e)));
            let (w1, w2) = (to_word(&s1), to_word(&s2));
            prop_assert_eq!(FormalWord::from_syllables(w1.syllables().iter().copied()), w1.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for g in families() {
                let g1 = g.random_element(&mut rng, 3);
                let g2 = g.random_element(&mut rng, 3);
                let lhs = eval_word(&g, &w1.mul(&w2), &g1, &g2).unwrap();
                let rhs = g.mul(&eval_word(&g, &w1, &g1, &g2).unwrap(), &eval_word(&g, &w2, &g1, &g2).unwrap()).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
