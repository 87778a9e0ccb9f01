//! Finite tables of functions `Vⁿ → U` and the ultrametric on them.
//!
//! Tables are stored in lexicographic tuple order, matching `construct::power`.
//! Comparisons walk the canonical enumeration instead: tuples ordered by their
//! largest coordinate, then lexicographically. Growing `V` only appends to that
//! enumeration, so agreement indices are stable under growth.

use std::cmp::Ordering;
use std::fmt;

use crate::construct::{power, tuple_index};
use crate::error::{Error, Result};
use crate::morph::{self, Kind};
use crate::relcore::{Elem, Structure, Tuple, Q};

/// All tuples of `0..size` of length `n`, by maximum coordinate, then lex.
pub fn canonical_tuples(size: usize, n: usize) -> Vec<Tuple> {
    let mut out = Vec::with_capacity(size.pow(n as u32));
    if n == 0 {
        out.push(Vec::new());
        return out;
    }
    for m in 0..size {
        // Lex walk of (0..=m)^n keeping the tuples that reach m.
        let mut t = vec![0; n];
        loop {
            if t.contains(&m) {
                out.push(t.clone());
            }
            let mut j = n;
            loop {
                if j == 0 {
                    break;
                }
                j -= 1;
                t[j] += 1;
                if t[j] <= m {
                    break;
                }
                t[j] = 0;
            }
            if j == 0 && t[0] == 0 {
                break;
            }
        }
    }
    out
}

/// Position of `t` in `canonical_tuples(size, n)` for any `size` above its
/// maximum.
pub fn canonical_position(t: &[Elem]) -> usize {
    let n = t.len();
    let Some(&m) = t.iter().max() else {
        return 0;
    };
    // Tuples with smaller maximum come first.
    let before = m.pow(n as u32);
    // Among (0..=m)^n those before t in lex order, minus those avoiding m.
    let mut rank = 0;
    let mut seen_m = false;
    for (i, &x) in t.iter().enumerate() {
        let rest = (n - i - 1) as u32;
        for y in 0..x {
            if seen_m || y == m {
                rank += (m + 1).pow(rest);
            } else {
                rank += (m + 1).pow(rest) - m.pow(rest);
            }
        }
        seen_m |= x == m;
    }
    before + rank
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionTable {
    arity: usize,
    domain: Structure,
    codomain: Structure,
    table: Vec<Elem>,
    polymorphism: bool,
}

impl FunctionTable {
    /// `table[i]` is the value on the `i`-th tuple of `domainⁿ` in lex order.
    pub fn new(arity: usize, domain: Structure, codomain: Structure, table: Vec<Elem>) -> Result<Self> {
        if arity == 0 {
            return Err(Error::Arity("function tables need arity at least 1".into()));
        }
        let want = domain.size().pow(arity as u32);
        if table.len() != want {
            return Err(Error::Arity(format!("table has {} entries, domain^{arity} has {want}", table.len())));
        }
        if let Some(&y) = table.iter().find(|&&y| y >= codomain.size()) {
            return Err(Error::IndexOutOfRange(y));
        }
        Ok(FunctionTable {
            arity,
            domain,
            codomain,
            table,
            polymorphism: false,
        })
    }

    pub fn from_fn<F: Fn(&[Elem]) -> Elem>(arity: usize, domain: Structure, codomain: Structure, f: F) -> Result<Self> {
        let table = crate::construct::all_tuples(domain.size(), arity).iter().map(|t| f(t)).collect();
        FunctionTable::new(arity, domain, codomain, table)
    }

    /// Checks that the table is a homomorphism `domainⁿ → codomain` and
    /// records the result.
    pub fn flag_polymorphism(mut self) -> Result<Self> {
        let p = power(&self.domain, self.arity);
        if let Some(v) = morph::check(&p, &self.codomain, &self.table, Kind::Hom)? {
            return Err(Error::PartialViolates {
                kind: "hom".into(),
                violation: v.to_string(),
            });
        }
        self.polymorphism = true;
        Ok(self)
    }

    pub fn is_polymorphism(&self) -> bool {
        self.polymorphism
    }

    pub fn verify_polymorphism(&self) -> Result<bool> {
        Ok(morph::check(&power(&self.domain, self.arity), &self.codomain, &self.table, Kind::Hom)?.is_none())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn domain(&self) -> &Structure {
        &self.domain
    }

    pub fn codomain(&self) -> &Structure {
        &self.codomain
    }

    pub fn table(&self) -> &[Elem] {
        &self.table
    }

    pub fn value(&self, t: &[Elem]) -> Elem {
        self.table[tuple_index(self.domain.size(), t)]
    }

    /// Values in canonical order.
    pub fn canonical_values(&self) -> Vec<Elem> {
        canonical_tuples(self.domain.size(), self.arity)
            .iter()
            .map(|t| self.value(t))
            .collect()
    }
}

/// `π_i: Vⁿ → V`, with `i` counted from 1.
pub fn projection(n: usize, i: usize, v: &Structure) -> Result<FunctionTable> {
    if i == 0 || i > n {
        return Err(Error::Arity(format!("projection index {i} outside 1..={n}")));
    }
    FunctionTable::from_fn(n, v.clone(), v.clone(), |t| t[i - 1])?.flag_polymorphism()
}

/// `f(g_1, …, g_n)`: each `g_i: Wᵐ → V`, `f: Vⁿ → U`.
pub fn superpose(f: &FunctionTable, gs: &[FunctionTable]) -> Result<FunctionTable> {
    if gs.len() != f.arity {
        return Err(Error::Arity(format!("{} inner functions for an outer arity of {}", gs.len(), f.arity)));
    }
    let Some(first) = gs.first() else {
        return Err(Error::Arity("nothing to superpose".into()));
    };
    for g in gs {
        if g.arity != first.arity || g.domain != first.domain {
            return Err(Error::Arity("inner functions differ in arity or domain".into()));
        }
        if g.codomain != f.domain {
            return Err(Error::SignatureMismatch("inner codomain is not the outer domain".into()));
        }
    }
    let v = f.domain.size();
    let table: Vec<Elem> = (0..first.table.len())
        .map(|i| {
            let idx = gs.iter().fold(0, |acc, g| acc * v + g.table[i]);
            f.table[idx]
        })
        .collect();
    let out = FunctionTable::new(first.arity, first.domain.clone(), f.codomain.clone(), table)?;
    if f.polymorphism && gs.iter().all(|g| g.polymorphism) {
        out.flag_polymorphism()
    } else {
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Agreement {
    /// First disagreement in canonical order.
    At(usize),
    Equal,
}

/// Where two tables of equal arity first disagree.
///
/// Domains may be truncations of one another: past the shorter enumeration
/// the tables count as disagreeing.
pub fn agreement_index(f: &FunctionTable, g: &FunctionTable) -> Result<Agreement> {
    if f.arity != g.arity {
        return Err(Error::Arity(format!("arities {} and {} differ", f.arity, g.arity)));
    }
    let small = f.domain.size().min(g.domain.size());
    for (i, t) in canonical_tuples(small, f.arity).iter().enumerate() {
        if f.value(t) != g.value(t) {
            return Ok(Agreement::At(i));
        }
    }
    if f.domain.size() == g.domain.size() {
        Ok(Agreement::Equal)
    } else {
        Ok(Agreement::At(small.pow(f.arity as u32)))
    }
}

/// A value `0` or `2^-k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic(Option<u32>);

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic(None);
    pub const ONE: Dyadic = Dyadic(Some(0));

    pub fn pow2_neg(k: u32) -> Self {
        Dyadic(Some(k))
    }

    pub fn exponent(self) -> Option<u32> {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0.is_none()
    }

    /// Exact value; `None` when `2^k` overflows `i64`.
    pub fn to_q(self) -> Option<Q> {
        match self.0 {
            None => Some(Q::from_integer(0)),
            Some(k) if k < 63 => Some(Q::new(1, 1i64 << k)),
            Some(_) => None,
        }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0, other.0) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(a), Some(b)) => b.cmp(&a),
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            None => f.write_str("0"),
            Some(0) => f.write_str("1"),
            Some(k) => write!(f, "2^-{k}"),
        }
    }
}

/// `1` for different arities, `0` for equal tables, else `2^-i` with `i` the
/// agreement index.
pub fn distance(f: &FunctionTable, g: &FunctionTable) -> Dyadic {
    if f.arity != g.arity {
        return Dyadic::ONE;
    }
    match agreement_index(f, g) {
        Ok(Agreement::Equal) => Dyadic::ZERO,
        Ok(Agreement::At(i)) => Dyadic::pow2_neg(u32::try_from(i).unwrap_or(u32::MAX)),
        Err(_) => Dyadic::ONE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relcore::Signature;

    fn chain(k: usize) -> Structure {
        let labels: Vec<String> = (0..k).map(|i| format!("p{i}")).collect();
        let mut t = Vec::new();
        for x in 0..k {
            for y in x..k {
                t.push(vec![x, y]);
            }
        }
        Structure::new(Signature::binary("le"), labels, vec![t]).unwrap()
    }

    #[test]
    fn canonical_order_small() {
        let got = canonical_tuples(3, 2);
        assert_eq!(&got[..4], &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(got.len(), 9);
        for (i, t) in got.iter().enumerate() {
            assert_eq!(canonical_position(t), i);
        }
        assert_eq!(canonical_tuples(2, 3), canonical_tuples(4, 3)[..8].to_vec());
    }

    #[test]
    fn projections_are_polymorphisms() {
        let c = chain(3);
        let p = projection(2, 2, &c).unwrap();
        assert!(p.is_polymorphism());
        assert_eq!(p.value(&[0, 2]), 2);
        assert!(projection(2, 3, &c).is_err());
    }

    #[test]
    fn min_is_a_chain_polymorphism_and_superposes() {
        let c = chain(3);
        let min = FunctionTable::from_fn(2, c.clone(), c.clone(), |t| t[0].min(t[1]))
            .unwrap()
            .flag_polymorphism()
            .unwrap();
        let p1 = projection(2, 1, &c).unwrap();
        let p2 = projection(2, 2, &c).unwrap();
        let s = superpose(&min, &[p2.clone(), p1.clone()]).unwrap();
        assert_eq!(distance(&s, &min), Dyadic::ZERO);
        assert_eq!(superpose(&p1, &[p1.clone(), p2.clone()]).unwrap(), p1);
        let bad = FunctionTable::from_fn(2, c.clone(), c.clone(), |t| 2 - t[0]).unwrap();
        assert!(bad.flag_polymorphism().is_err());
    }

    #[test]
    fn distance_values() {
        let c = chain(2);
        let p1 = projection(2, 1, &c).unwrap();
        let p2 = projection(2, 2, &c).unwrap();
        // Canonical order: 00 01 10 11; first difference at 01.
        assert_eq!(agreement_index(&p1, &p2).unwrap(), Agreement::At(1));
        assert_eq!(distance(&p1, &p2), Dyadic::pow2_neg(1));
        assert_eq!(distance(&p1, &projection(1, 1, &c).unwrap()), Dyadic::ONE);
        assert!(Dyadic::pow2_neg(3) < Dyadic::pow2_neg(1));
        assert_eq!(Dyadic::pow2_neg(3).to_q(), Some(Q::new(1, 8)));
    }
}
