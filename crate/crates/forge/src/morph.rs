//! Homomorphisms, embeddings and isomorphisms: verification and backtracking search.

use std::fmt;

use crate::error::{Error, Result};
use crate::par;
use crate::relcore::{Elem, Structure, Tuple};

const UNSET: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Hom,
    Embedding,
    Iso,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Hom => "hom",
            Kind::Embedding => "embedding",
            Kind::Iso => "iso",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        match s {
            "hom" => Some(Kind::Hom),
            "embedding" => Some(Kind::Embedding),
            "iso" | "isomorphism" => Some(Kind::Iso),
            _ => None,
        }
    }

    fn injective(self) -> bool {
        self != Kind::Hom
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A total map between carriers, tagged with the conditions it claims.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Morphism {
    pub map: Vec<Elem>,
    pub kind: Kind,
}

impl Morphism {
    pub fn new(map: Vec<Elem>, kind: Kind) -> Self {
        Morphism { map, kind }
    }

    pub fn identity(n: usize, kind: Kind) -> Self {
        Morphism {
            map: (0..n).collect(),
            kind,
        }
    }

    pub fn apply(&self, x: Elem) -> Elem {
        self.map[x]
    }
}

/// First reason a map fails its kind's conditions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NotTotal { expected: usize, got: usize },
    OutOfRange(Elem),
    /// A source tuple whose image is missing in the target.
    NotPreserved { symbol: String, tuple: Tuple },
    NotInjective(Elem, Elem),
    /// A target tuple inside the image whose preimage is missing in the source.
    NotReflected { symbol: String, tuple: Tuple },
    NotSurjective(Elem),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotTotal { expected, got } => write!(f, "map has {got} entries, source has {expected}"),
            Violation::OutOfRange(x) => write!(f, "image index {x} outside the target"),
            Violation::NotPreserved { symbol, tuple } => write!(f, "{symbol}{tuple:?} is not preserved"),
            Violation::NotInjective(a, b) => write!(f, "elements {a} and {b} share an image"),
            Violation::NotReflected { symbol, tuple } => write!(f, "target tuple {symbol}{tuple:?} is not reflected"),
            Violation::NotSurjective(t) => write!(f, "target element {t} is not hit"),
        }
    }
}

/// Checks `map` against `kind`; `Ok(None)` means it passes.
pub fn check(src: &Structure, tgt: &Structure, map: &[Elem], kind: Kind) -> Result<Option<Violation>> {
    if src.signature() != tgt.signature() {
        return Err(Error::SignatureMismatch("source and target of a morphism".into()));
    }
    if map.len() != src.size() {
        return Ok(Some(Violation::NotTotal {
            expected: src.size(),
            got: map.len(),
        }));
    }
    if let Some(&x) = map.iter().find(|&&x| x >= tgt.size()) {
        return Ok(Some(Violation::OutOfRange(x)));
    }
    let sig = src.signature();
    for (sym, rel) in src.relations().iter().enumerate() {
        for t in rel.iter() {
            let img: Tuple = t.iter().map(|&x| map[x]).collect();
            if !tgt.holds(sym, &img) {
                return Ok(Some(Violation::NotPreserved {
                    symbol: sig.symbols()[sym].name.clone(),
                    tuple: t.clone(),
                }));
            }
        }
    }
    if !kind.injective() {
        return Ok(None);
    }
    let mut inv = vec![UNSET; tgt.size()];
    for (x, &y) in map.iter().enumerate() {
        if inv[y] != UNSET {
            return Ok(Some(Violation::NotInjective(inv[y], x)));
        }
        inv[y] = x;
    }
    for (sym, rel) in tgt.relations().iter().enumerate() {
        for t in rel.iter() {
            if t.iter().all(|&y| inv[y] != UNSET) {
                let pre: Tuple = t.iter().map(|&y| inv[y]).collect();
                if !src.holds(sym, &pre) {
                    return Ok(Some(Violation::NotReflected {
                        symbol: sig.symbols()[sym].name.clone(),
                        tuple: t.clone(),
                    }));
                }
            }
        }
    }
    if kind == Kind::Iso {
        if let Some(t) = inv.iter().position(|&x| x == UNSET) {
            return Ok(Some(Violation::NotSurjective(t)));
        }
    }
    Ok(None)
}

pub fn verify(src: &Structure, tgt: &Structure, m: &Morphism) -> Result<Option<Violation>> {
    check(src, tgt, &m.map, m.kind)
}

pub fn is_valid(src: &Structure, tgt: &Structure, map: &[Elem], kind: Kind) -> bool {
    matches!(check(src, tgt, map, kind), Ok(None))
}

/// `second ∘ first`.
pub fn compose(first: &[Elem], second: &[Elem]) -> Vec<Elem> {
    first.iter().map(|&x| second[x]).collect()
}

/// Extra per-assignment constraint used by [`search`]. It receives the current
/// assignment (unassigned entries are `usize::MAX`) and the element just set.
pub trait Constraint: Sync {
    fn accept(&self, assignment: &[Elem], just_set: Elem) -> bool;
}

/// The trivial constraint.
pub struct NoConstraint;

impl Constraint for NoConstraint {
    fn accept(&self, _: &[Elem], _: Elem) -> bool {
        true
    }
}

impl<F: Fn(&[Elem], Elem) -> bool + Sync> Constraint for F {
    fn accept(&self, assignment: &[Elem], just_set: Elem) -> bool {
        self(assignment, just_set)
    }
}

struct Plan<'a> {
    src: &'a Structure,
    tgt: &'a Structure,
    kind: Kind,
    order: Vec<Elem>,
    /// Source tuples closed at each depth: (symbol, tuple).
    closes: Vec<Vec<(usize, &'a Tuple)>>,
    /// Target tuples containing each target element.
    tgt_inc: Vec<Vec<(usize, &'a Tuple)>>,
    cands: Vec<Vec<Elem>>,
    pinned: usize,
}

struct State {
    asg: Vec<Elem>,
    inv: Vec<Elem>,
}

impl<'a> Plan<'a> {
    fn new(src: &'a Structure, tgt: &'a Structure, kind: Kind, partial: &[Option<Elem>], allowed: Option<&[Vec<Elem>]>) -> Self {
        let n = src.size();
        let mut pinned: Vec<Elem> = (0..n).filter(|&x| partial.get(x).copied().flatten().is_some()).collect();
        let mut rest: Vec<Elem> = (0..n).filter(|&x| partial.get(x).copied().flatten().is_none()).collect();
        let deg: Vec<usize> = (0..n).map(|x| src.degree(x)).collect();
        rest.sort_by_key(|&x| (std::cmp::Reverse(deg[x]), x));
        let n_pinned = pinned.len();
        pinned.extend(rest);
        let order = pinned;
        let mut pos = vec![0; n];
        for (k, &x) in order.iter().enumerate() {
            pos[x] = k;
        }
        let mut closes = vec![Vec::new(); n];
        // Which (symbol, position) slots each element occupies, for pruning.
        let k = src.signature().len();
        let mut occupies = vec![Vec::new(); n];
        for sym in 0..k {
            for t in src.relation(sym).iter() {
                if let Some(last) = t.iter().map(|&x| pos[x]).max() {
                    closes[last].push((sym, t));
                }
                for (p, &x) in t.iter().enumerate() {
                    occupies[x].push((sym, p));
                }
            }
        }
        let mut tgt_inc = vec![Vec::new(); tgt.size()];
        let mut tgt_slots = vec![Vec::new(); tgt.size()];
        for sym in 0..k {
            for t in tgt.relation(sym).iter() {
                for (p, &y) in t.iter().enumerate() {
                    tgt_slots[y].push((sym, p));
                    if !tgt_inc[y].iter().any(|&(s, u): &(usize, &Tuple)| s == sym && std::ptr::eq(u, t)) {
                        tgt_inc[y].push((sym, t));
                    }
                }
            }
        }
        for slots in occupies.iter_mut().chain(tgt_slots.iter_mut()) {
            slots.sort_unstable();
            slots.dedup();
        }
        let cands = (0..n)
            .map(|x| {
                let base: Vec<Elem> = match allowed {
                    Some(a) => a[x].clone(),
                    None => (0..tgt.size()).collect(),
                };
                base.into_iter()
                    .filter(|&y| y < tgt.size())
                    .filter(|&y| occupies[x].iter().all(|s| tgt_slots[y].binary_search(s).is_ok()))
                    .collect()
            })
            .collect();
        Plan {
            src,
            tgt,
            kind,
            order,
            closes,
            tgt_inc,
            cands,
            pinned: n_pinned,
        }
    }

    fn fresh_state(&self) -> State {
        State {
            asg: vec![UNSET; self.src.size()],
            inv: vec![UNSET; self.tgt.size()],
        }
    }

    /// Tries `x := y` at `depth`, returning the first violation.
    fn place(&self, st: &mut State, depth: usize, y: Elem) -> Option<Violation> {
        let x = self.order[depth];
        if y >= self.tgt.size() {
            return Some(Violation::OutOfRange(y));
        }
        if self.kind.injective() && st.inv[y] != UNSET {
            return Some(Violation::NotInjective(st.inv[y], x));
        }
        st.asg[x] = y;
        let sig = self.src.signature();
        for &(sym, t) in &self.closes[depth] {
            let img: Tuple = t.iter().map(|&z| st.asg[z]).collect();
            if !self.tgt.holds(sym, &img) {
                st.asg[x] = UNSET;
                return Some(Violation::NotPreserved {
                    symbol: sig.symbols()[sym].name.clone(),
                    tuple: t.clone(),
                });
            }
        }
        if self.kind.injective() {
            st.inv[y] = x;
            for &(sym, t) in &self.tgt_inc[y] {
                if t.iter().all(|&z| st.inv[z] != UNSET) {
                    let pre: Tuple = t.iter().map(|&z| st.inv[z]).collect();
                    if !self.src.holds(sym, &pre) {
                        st.inv[y] = UNSET;
                        st.asg[x] = UNSET;
                        return Some(Violation::NotReflected {
                            symbol: sig.symbols()[sym].name.clone(),
                            tuple: t.clone(),
                        });
                    }
                }
            }
        }
        None
    }

    fn unplace(&self, st: &mut State, depth: usize) {
        let x = self.order[depth];
        let y = st.asg[x];
        if self.kind.injective() && y != UNSET {
            st.inv[y] = UNSET;
        }
        st.asg[x] = UNSET;
    }

    fn dfs<C: Constraint + ?Sized>(&self, st: &mut State, depth: usize, limit: usize, extra: &C, out: &mut Vec<Vec<Elem>>) {
        if out.len() >= limit {
            return;
        }
        if depth == self.order.len() {
            out.push(st.asg.clone());
            return;
        }
        let x = self.order[depth];
        for &y in &self.cands[x] {
            if self.place(st, depth, y).is_some() {
                continue;
            }
            if extra.accept(&st.asg, x) {
                self.dfs(st, depth + 1, limit, extra, out);
            }
            self.unplace(st, depth);
            if out.len() >= limit {
                return;
            }
        }
    }
}

/// General search: all maps extending `partial` that satisfy `kind` and `extra`,
/// restricted to `allowed` candidates per source element when given.
///
/// With a limit, the first `limit` solutions in search order are kept. The
/// returned list is sorted lexicographically.
pub fn search<C: Constraint + ?Sized>(
    src: &Structure,
    tgt: &Structure,
    kind: Kind,
    partial: &[Option<Elem>],
    allowed: Option<&[Vec<Elem>]>,
    limit: Option<usize>,
    extra: &C,
) -> Result<Vec<Vec<Elem>>> {
    if src.signature() != tgt.signature() {
        return Err(Error::SignatureMismatch("source and target of a search".into()));
    }
    let limit = limit.unwrap_or(usize::MAX);
    if limit == 0 {
        return Ok(Vec::new());
    }
    let plan = Plan::new(src, tgt, kind, partial, allowed);
    let mut st = plan.fresh_state();
    for depth in 0..plan.pinned {
        let x = plan.order[depth];
        let y = partial[x].unwrap_or(UNSET);
        if let Some(v) = plan.place(&mut st, depth, y) {
            return Err(Error::PartialViolates {
                kind: kind.to_string(),
                violation: v.to_string(),
            });
        }
        if !extra.accept(&st.asg, x) {
            return Err(Error::PartialViolates {
                kind: kind.to_string(),
                violation: format!("side constraint rejects element {x}"),
            });
        }
    }
    if kind == Kind::Iso && src.size() != tgt.size() {
        return Ok(Vec::new());
    }
    if kind.injective() && src.size() > tgt.size() {
        return Ok(Vec::new());
    }
    let mut found = if plan.pinned == plan.order.len() {
        vec![st.asg.clone()]
    } else {
        let depth = plan.pinned;
        let x = plan.order[depth];
        let branches = &plan.cands[x];
        let run = |&y: &Elem| {
            let mut local = State {
                asg: st.asg.clone(),
                inv: st.inv.clone(),
            };
            let mut out = Vec::new();
            if plan.place(&mut local, depth, y).is_none() && extra.accept(&local.asg, x) {
                plan.dfs(&mut local, depth + 1, limit, extra, &mut out);
            }
            out
        };
        let per_branch: Vec<Vec<Vec<Elem>>> = if limit == usize::MAX || branches.len() > 1 {
            par::map(branches, run)
        } else {
            branches.iter().map(run).collect()
        };
        let mut all = Vec::new();
        for b in per_branch {
            for m in b {
                if all.len() < limit {
                    all.push(m);
                }
            }
        }
        all
    };
    found.sort_unstable();
    Ok(found)
}

/// All morphisms of the given kind, up to `limit`, in lexicographic order.
pub fn enumerate_homs(a: &Structure, b: &Structure, kind: Kind, limit: Option<usize>) -> Result<Vec<Morphism>> {
    Ok(search(a, b, kind, &[], None, limit, &NoConstraint)?
        .into_iter()
        .map(|map| Morphism { map, kind })
        .collect())
}

/// Completions of a partial map. Reports a partial map that already fails as an
/// error, distinct from an empty list.
pub fn enumerate_extensions(
    a: &Structure,
    b: &Structure,
    partial: &[Option<Elem>],
    kind: Kind,
    limit: Option<usize>,
) -> Result<Vec<Morphism>> {
    if partial.len() > a.size() {
        return Err(Error::Precondition("partial map longer than the source carrier".into()));
    }
    Ok(search(a, b, kind, partial, None, limit, &NoConstraint)?
        .into_iter()
        .map(|map| Morphism { map, kind })
        .collect())
}

/// The "exists?" query.
pub fn find(a: &Structure, b: &Structure, kind: Kind) -> Result<Option<Morphism>> {
    Ok(enumerate_homs(a, b, kind, Some(1))?.into_iter().next())
}

pub fn automorphisms(s: &Structure) -> Vec<Morphism> {
    enumerate_homs(s, s, Kind::Iso, None).unwrap_or_default()
}

pub fn are_isomorphic(a: &Structure, b: &Structure) -> bool {
    a.size() == b.size() && matches!(find(a, b, Kind::Iso), Ok(Some(_)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relcore::Signature;

    fn k2() -> Structure {
        Structure::build(Signature::binary("E"), &["a", "u"], &[("E", &["a", "u"]), ("E", &["u", "a"])]).unwrap()
    }

    fn chain2() -> Structure {
        Structure::build(
            Signature::binary("le"),
            &["0", "1"],
            &[("le", &["0", "0"]), ("le", &["1", "1"]), ("le", &["0", "1"])],
        )
        .unwrap()
    }

    #[test]
    fn identity_is_iso() {
        let s = k2();
        assert_eq!(verify(&s, &s, &Morphism::identity(2, Kind::Iso)).unwrap(), None);
    }

    #[test]
    fn constant_map_on_edge_fails_with_the_edge() {
        let s = k2();
        let v = check(&s, &s, &[0, 0], Kind::Hom).unwrap();
        assert_eq!(
            v,
            Some(Violation::NotPreserved {
                symbol: "E".into(),
                tuple: vec![0, 1]
            })
        );
    }

    #[test]
    fn swap_is_iso() {
        let s = k2();
        assert!(is_valid(&s, &s, &[1, 0], Kind::Iso));
    }

    #[test]
    fn k2_to_k2_has_two_homs() {
        let s = k2();
        let hs = enumerate_homs(&s, &s, Kind::Hom, None).unwrap();
        assert_eq!(hs.iter().map(|m| m.map.clone()).collect::<Vec<_>>(), vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn point_maps_anywhere() {
        let p = Structure::build(Signature::binary("E"), &["p"], &[]).unwrap();
        let b = Structure::build(Signature::binary("E"), &["x", "y", "z"], &[("E", &["x", "y"])]).unwrap();
        assert_eq!(enumerate_homs(&p, &b, Kind::Hom, None).unwrap().len(), 3);
    }

    #[test]
    fn monotone_maps_of_two_chain() {
        let c = chain2();
        assert_eq!(enumerate_homs(&c, &c, Kind::Hom, None).unwrap().len(), 3);
    }

    #[test]
    fn extension_of_total_map_is_singleton() {
        let s = k2();
        let all = enumerate_extensions(&s, &s, &[Some(1), Some(0)], Kind::Hom, None).unwrap();
        assert_eq!(all.len(), 1);
        let empty = enumerate_extensions(&s, &s, &[], Kind::Hom, None).unwrap();
        assert_eq!(empty, enumerate_homs(&s, &s, Kind::Hom, None).unwrap());
    }

    #[test]
    fn violating_partial_is_an_error() {
        let s = k2();
        let e = enumerate_extensions(&s, &s, &[Some(0), Some(0)], Kind::Hom, None);
        assert!(matches!(e, Err(Error::PartialViolates { .. })));
        let e = enumerate_extensions(&s, &s, &[Some(0), Some(0)], Kind::Embedding, None);
        assert!(matches!(e, Err(Error::PartialViolates { .. })));
    }

    #[test]
    fn embedding_reflects_non_edges() {
        let two = Structure::build(Signature::binary("E"), &["p", "q"], &[]).unwrap();
        assert!(enumerate_homs(&two, &k2(), Kind::Embedding, None).unwrap().is_empty());
        assert_eq!(enumerate_homs(&two, &k2(), Kind::Hom, None).unwrap().len(), 4);
    }

    #[test]
    fn limit_caps_output() {
        let p = Structure::build(Signature::binary("E"), &["p", "q"], &[]).unwrap();
        let b = Structure::build(Signature::binary("E"), &["x", "y", "z"], &[]).unwrap();
        assert_eq!(enumerate_homs(&p, &b, Kind::Hom, Some(4)).unwrap().len(), 4);
        assert_eq!(enumerate_homs(&p, &b, Kind::Hom, None).unwrap().len(), 9);
    }
}
