//! Exact nullspaces over `Q` and `GF(p)`, and search for nowhere-zero
//! vectors in them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalars::{FieldSpec, Scalar};

/// Enumerate the whole solution space over `GF(p)` up to this many vectors.
pub const ENUMERATION_LIMIT: u64 = 1 << 16;
/// Random combinations tried when the space is too big to enumerate.
pub const SAMPLE_TRIALS: u64 = 10_000;

/// Reduced row echelon form in place; returns pivot columns.
pub fn rref(rows: &mut [Vec<Scalar>], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        if r >= rows.len() {
            break;
        }
        let Some(found) = (r..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(r, found);
        let inv = rows[r][col].inv().expect("nonzero pivot");
        for x in rows[r].iter_mut() {
            *x = &*x * &inv;
        }
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (x, p) in row.iter_mut().zip(&pivot) {
                *x = &*x - &(&factor * p);
            }
        }
        pivots.push(col);
        r += 1;
    }
    pivots
}

/// Basis of `{x : A x = 0}` for the `rows` (each of length `ncols`).
pub fn nullspace(rows: &[Vec<Scalar>], ncols: usize, field: FieldSpec) -> Vec<Vec<Scalar>> {
    let mut a = rows.to_vec();
    let pivots = rref(&mut a, ncols);
    let mut is_pivot = vec![false; ncols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    (0..ncols)
        .filter(|&c| !is_pivot[c])
        .map(|free| {
            let mut v = vec![field.zero(); ncols];
            v[free] = field.one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = a[row][free].neg();
            }
            v
        })
        .collect()
}

/// Outcome of looking for a solution with every coordinate nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NowhereZero {
    /// Normalized so the first coordinate is 1.
    Found { vector: Vec<Scalar>, trials: Option<u64> },
    /// No such vector exists (decided exactly).
    None,
    /// Random sampling failed; the answer is not certain.
    NotFoundSampled { trials: u64 },
}

fn combine(basis: &[Vec<Scalar>], coeffs: &[Scalar], field: FieldSpec) -> Vec<Scalar> {
    let n = basis.first().map_or(0, Vec::len);
    let mut v = vec![field.zero(); n];
    for (b, c) in basis.iter().zip(coeffs) {
        if c.is_zero() {
            continue;
        }
        for (x, y) in v.iter_mut().zip(b) {
            *x = &*x + &(c * y);
        }
    }
    v
}

fn normalized(v: Vec<Scalar>) -> Vec<Scalar> {
    let inv = v[0].inv().expect("nowhere-zero");
    v.into_iter().map(|x| &x * &inv).collect()
}

/// Finds a vector in `span(basis)` (vectors of length `n`) with no zero
/// coordinate. Exact over `Q`; over `GF(p)` exact when the span has at most
/// [`ENUMERATION_LIMIT`] elements, otherwise sampled with `seed`.
pub fn nowhere_zero(basis: &[Vec<Scalar>], n: usize, field: FieldSpec, seed: u64) -> NowhereZero {
    if basis.is_empty() || n == 0 {
        return NowhereZero::None;
    }
    // a coordinate vanishing on every basis vector vanishes on the span
    if (0..n).any(|j| basis.iter().all(|b| b[j].is_zero())) {
        return NowhereZero::None;
    }
    let d = basis.len();
    match field {
        FieldSpec::Rationals => {
            // points on the moment curve (1, t, t^2, ...): each coordinate is a
            // nonzero polynomial of degree < d in t, so some t <= n*(d-1)+1 works
            for t in 1..=(n * d.saturating_sub(1) + 1) as i64 {
                let mut coeffs = Vec::with_capacity(d);
                let mut pw = field.one();
                for _ in 0..d {
                    coeffs.push(pw.clone());
                    pw = &pw * &field.from_i64(t);
                }
                let v = combine(basis, &coeffs, field);
                if v.iter().all(|x| !x.is_zero()) {
                    return NowhereZero::Found { vector: normalized(v), trials: None };
                }
            }
            unreachable!("moment-curve bound exceeded")
        }
        FieldSpec::PrimeField(p) => {
            let p = p as u64;
            let size = (0..d).try_fold(1u64, |acc, _| acc.checked_mul(p));
            match size {
                Some(total) if total <= ENUMERATION_LIMIT => {
                    let mut digits = vec![0u64; d];
                    for _ in 0..total {
                        let coeffs: Vec<Scalar> = digits.iter().map(|&x| field.residue(x)).collect();
                        let v = combine(basis, &coeffs, field);
                        if v.iter().all(|x| !x.is_zero()) {
                            return NowhereZero::Found { vector: normalized(v), trials: None };
                        }
                        for digit in digits.iter_mut() {
                            *digit += 1;
                            if *digit < p {
                                break;
                            }
                            *digit = 0;
                        }
                    }
                    NowhereZero::None
                }
                _ => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    for trial in 1..=SAMPLE_TRIALS {
                        let coeffs: Vec<Scalar> =
                            (0..d).map(|_| field.residue(rng.gen_range(0..p))).collect();
                        let v = combine(basis, &coeffs, field);
                        if v.iter().all(|x| !x.is_zero()) {
                            return NowhereZero::Found { vector: normalized(v), trials: Some(trial) };
                        }
                    }
                    NowhereZero::NotFoundSampled { trials: SAMPLE_TRIALS }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(field: FieldSpec, v: &[i64]) -> Vec<Scalar> {
        v.iter().map(|&x| field.from_i64(x)).collect()
    }

    fn apply(rows: &[Vec<Scalar>], v: &[Scalar]) -> bool {
        rows.iter().all(|r| {
            r.iter()
                .zip(v)
                .fold(r[0].field().zero(), |acc, (a, b)| &acc + &(a * b))
                .is_zero()
        })
    }

    #[test]
    fn nullspace_of_small_systems() {
        let q = FieldSpec::Rationals;
        // beta2 + beta1 = 0 (three times)
        let rows = vec![row(q, &[1, 1]), row(q, &[1, 1]), row(q, &[1, 1])];
        let ns = nullspace(&rows, 2, q);
        assert_eq!(ns, vec![row(q, &[-1, 1])]);
        match nowhere_zero(&ns, 2, q, 0) {
            NowhereZero::Found { vector, .. } => assert_eq!(vector, row(q, &[1, -1])),
            other => panic!("{other:?}"),
        }
        let full = vec![row(q, &[1, 0]), row(q, &[0, 1])];
        assert!(nullspace(&full, 2, q).is_empty());
        assert_eq!(nowhere_zero(&[], 2, q, 0), NowhereZero::None);
        // beta1 = 0 kills every nowhere-zero solution
        let ns = nullspace(&[row(q, &[1, 0, 0])], 3, q);
        assert_eq!(ns.len(), 2);
        assert_eq!(nowhere_zero(&ns, 3, q, 0), NowhereZero::None);
    }

    #[test]
    fn gf2_needs_enumeration() {
        let f = FieldSpec::PrimeField(2);
        // span{(1,1,0),(0,1,1)} over GF(2) has no nowhere-zero vector even
        // though no coordinate vanishes identically
        let basis = vec![row(f, &[1, 1, 0]), row(f, &[0, 1, 1])];
        assert_eq!(nowhere_zero(&basis, 3, f, 0), NowhereZero::None);
        let basis = vec![row(f, &[1, 0, 1]), row(f, &[0, 1, 0])];
        assert!(matches!(nowhere_zero(&basis, 3, f, 0), NowhereZero::Found { .. }));
    }

    #[test]
    fn large_prime_sampling() {
        let f = FieldSpec::PrimeField(2147483647);
        let basis = vec![row(f, &[1, 0, 1]), row(f, &[0, 1, 1])];
        match nowhere_zero(&basis, 3, f, 7) {
            NowhereZero::Found { vector, trials } => {
                assert!(trials.is_some());
                assert!(vector.iter().all(|x| !x.is_zero()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rref_solutions_satisfy_system() {
        let q = FieldSpec::Rationals;
        let rows = vec![row(q, &[1, 2, 3, 4]), row(q, &[2, 4, 7, 9]), row(q, &[0, 0, 1, 1])];
        let ns = nullspace(&rows, 4, q);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!(apply(&rows, v));
        }
    }
}
