//! Signatures, finite structures and the metric encoding.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use num_rational::Rational64;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};

/// Dense index of a carrier element.
pub type Elem = usize;
pub type Tuple = Vec<Elem>;
/// Exact rational used for metric distances.
pub type Q = Rational64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Signature {
    symbols: Vec<Symbol>,
}

impl Signature {
    pub fn new<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (name, arity) in symbols {
            let name = name.into();
            if arity == 0 {
                return Err(Error::ZeroArity(name));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::DuplicateSymbol(name));
            }
            out.push(Symbol { name, arity });
        }
        Ok(Signature { symbols: out })
    }

    /// Single binary symbol, the common case.
    pub fn binary(name: &str) -> Self {
        Signature {
            symbols: vec![Symbol {
                name: name.to_string(),
                arity: 2,
            }],
        }
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s.name == name)
    }

    pub fn arity(&self, sym: usize) -> usize {
        self.symbols[sym].arity
    }
}

/// A sorted, deduplicated set of tuples.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Relation {
    tuples: Vec<Tuple>,
}

impl Relation {
    pub fn new(mut tuples: Vec<Tuple>) -> Self {
        tuples.sort_unstable();
        tuples.dedup();
        Relation { tuples }
    }

    pub fn contains(&self, t: &[Elem]) -> bool {
        self.tuples
            .binary_search_by(|x| x.as_slice().cmp(t))
            .is_ok()
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Tuple> {
        self.tuples.iter()
    }

    pub fn is_subset(&self, other: &Relation) -> bool {
        self.tuples.iter().all(|t| other.contains(t))
    }
}

/// Literal code of a structure: the relation tuple lists in signature order.
pub type Code = Vec<Vec<Tuple>>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Structure {
    signature: Signature,
    labels: Vec<String>,
    relations: Vec<Relation>,
}

impl Structure {
    pub fn new(signature: Signature, labels: Vec<String>, relations: Vec<Vec<Tuple>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        if relations.len() != signature.len() {
            return Err(Error::SignatureMismatch(format!(
                "{} relations for {} symbols",
                relations.len(),
                signature.len()
            )));
        }
        let n = labels.len();
        for (sym, tuples) in signature.symbols().iter().zip(&relations) {
            for t in tuples {
                if t.len() != sym.arity {
                    return Err(Error::TupleArity {
                        symbol: sym.name.clone(),
                        len: t.len(),
                        arity: sym.arity,
                    });
                }
                if let Some(&bad) = t.iter().find(|&&x| x >= n) {
                    return Err(Error::IndexOutOfRange(bad));
                }
            }
        }
        Ok(Self::from_parts(
            signature,
            labels,
            relations.into_iter().map(Relation::new).collect(),
        ))
    }

    /// Label-based constructor: `tuples` pairs a symbol name with element labels.
    pub fn build<L: AsRef<str>>(signature: Signature, labels: &[L], tuples: &[(&str, &[&str])]) -> Result<Self> {
        let labels: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
        let mut rels = vec![Vec::new(); signature.len()];
        for (name, ls) in tuples {
            let sym = signature
                .position(name)
                .ok_or_else(|| Error::UnknownSymbol(name.to_string()))?;
            let mut t = Vec::with_capacity(ls.len());
            for l in ls.iter() {
                let i = labels
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| Error::UnknownElement(l.to_string()))?;
                t.push(i);
            }
            rels[sym].push(t);
        }
        Structure::new(signature, labels, rels)
    }

    pub(crate) fn from_parts(signature: Signature, labels: Vec<String>, relations: Vec<Relation>) -> Self {
        Structure {
            signature,
            labels,
            relations,
        }
    }

    pub fn empty(signature: Signature) -> Self {
        let k = signature.len();
        Structure {
            signature,
            labels: Vec::new(),
            relations: vec![Relation::default(); k],
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, x: Elem) -> &str {
        &self.labels[x]
    }

    pub fn index_of(&self, label: &str) -> Option<Elem> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn relation(&self, sym: usize) -> &Relation {
        &self.relations[sym]
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn holds(&self, sym: usize, t: &[Elem]) -> bool {
        self.relations[sym].contains(t)
    }

    pub fn code(&self) -> Code {
        self.relations.iter().map(|r| r.tuples.clone()).collect()
    }

    /// Same structure with new labels (must stay unique).
    pub fn with_labels(&self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.size() {
            return Err(Error::Precondition("label count differs from carrier size".into()));
        }
        Structure::new(self.signature.clone(), labels, self.code())
    }

    /// Image of the structure under a bijection `perm: old -> new`.
    pub fn permuted(&self, perm: &[Elem]) -> Self {
        let mut labels = vec![String::new(); self.size()];
        for (old, &new) in perm.iter().enumerate() {
            labels[new] = self.labels[old].clone();
        }
        let relations = self
            .relations
            .iter()
            .map(|r| Relation::new(r.iter().map(|t| t.iter().map(|&x| perm[x]).collect()).collect()))
            .collect();
        Structure::from_parts(self.signature.clone(), labels, relations)
    }

    /// Induced substructure on element indices; carrier order is inherited.
    pub fn induced(&self, subset: &[Elem]) -> Self {
        let keep: BTreeSet<Elem> = subset.iter().copied().filter(|&x| x < self.size()).collect();
        let mut new_index = vec![usize::MAX; self.size()];
        let mut labels = Vec::with_capacity(keep.len());
        for (i, &x) in keep.iter().enumerate() {
            new_index[x] = i;
            labels.push(self.labels[x].clone());
        }
        let relations = self
            .relations
            .iter()
            .map(|r| {
                Relation::new(
                    r.iter()
                        .filter(|t| t.iter().all(|&x| new_index[x] != usize::MAX))
                        .map(|t| t.iter().map(|&x| new_index[x]).collect())
                        .collect(),
                )
            })
            .collect();
        Structure::from_parts(self.signature.clone(), labels, relations)
    }

    /// Number of tuple positions occupied by `x`.
    pub fn degree(&self, x: Elem) -> usize {
        self.relations
            .iter()
            .flat_map(|r| r.iter())
            .map(|t| t.iter().filter(|&&y| y == x).count())
            .sum()
    }

    /// Neighbours in the Gaifman graph (co-occurrence in some tuple).
    pub fn gaifman_neighbours(&self) -> Vec<BTreeSet<Elem>> {
        let mut nb = vec![BTreeSet::new(); self.size()];
        for r in &self.relations {
            for t in r.iter() {
                for &x in t {
                    for &y in t {
                        if x != y {
                            nb[x].insert(y);
                        }
                    }
                }
            }
        }
        nb
    }

    /// Smallest literal code over all relabellings; an isomorphism invariant.
    pub fn canonical_code(&self) -> Code {
        let n = self.size();
        let mut perm: Vec<Elem> = (0..n).collect();
        let mut best: Option<Code> = None;
        loop {
            let code: Code = self
                .relations
                .iter()
                .map(|r| {
                    let mut ts: Vec<Tuple> = r.iter().map(|t| t.iter().map(|&x| perm[x]).collect()).collect();
                    ts.sort_unstable();
                    ts
                })
                .collect();
            if best.as_ref().is_none_or(|b| code < *b) {
                best = Some(code);
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        best.unwrap_or_default()
    }

    /// Tuple-wise union with `other` on the same carrier and signature.
    pub(crate) fn union_relations(&self, extra: &[Vec<Tuple>]) -> Self {
        let relations = self
            .relations
            .iter()
            .zip(extra)
            .map(|(r, e)| {
                let mut ts = r.tuples.clone();
                ts.extend(e.iter().cloned());
                Relation::new(ts)
            })
            .collect();
        Structure::from_parts(self.signature.clone(), self.labels.clone(), relations)
    }
}

/// Lexicographic successor; false once the last permutation is reached.
pub(crate) fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Label-based induced substructure.
pub fn induced_substructure<L: AsRef<str>>(s: &Structure, subset: &[L]) -> Result<Structure> {
    let mut idx = Vec::with_capacity(subset.len());
    for l in subset {
        let l = l.as_ref();
        idx.push(s.index_of(l).ok_or_else(|| Error::UnknownElement(l.to_string()))?);
    }
    Ok(s.induced(&idx))
}

/// Common carrier for two label sets glued along index pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gluing {
    pub labels: Vec<String>,
    /// left index -> common index (identity on `0..left.len()`)
    pub left: Vec<Elem>,
    /// right index -> common index
    pub right: Vec<Elem>,
}

/// Left elements keep their positions; unglued right elements follow in order.
/// Clashing right labels get primes appended.
pub fn glue(left: &[String], right: &[String], pairs: &[(Elem, Elem)]) -> Gluing {
    let mut labels: Vec<String> = left.to_vec();
    let mut used: HashSet<String> = labels.iter().cloned().collect();
    let mut right_map = vec![usize::MAX; right.len()];
    for &(l, r) in pairs {
        right_map[r] = l;
    }
    for (r, slot) in right_map.iter_mut().enumerate() {
        if *slot == usize::MAX {
            let mut name = right[r].clone();
            while used.contains(&name) {
                name.push('\'');
            }
            used.insert(name.clone());
            *slot = labels.len();
            labels.push(name);
        }
    }
    Gluing {
        right: right_map,
        left: (0..left.len()).collect(),
        labels,
    }
}

/// Two structures relabelled over a common carrier.
#[derive(Clone, Debug)]
pub struct AlignedPair {
    pub carrier: Vec<String>,
    pub left: Structure,
    pub right: Structure,
    pub gluing: Gluing,
}

/// Relabels so that exactly the `shared` labels coincide.
pub fn disjoint_union_carrier<L: AsRef<str>>(s1: &Structure, s2: &Structure, shared: &[L]) -> Result<AlignedPair> {
    if s1.signature() != s2.signature() {
        return Err(Error::SignatureMismatch("structures to align".into()));
    }
    let mut pairs = Vec::new();
    for l in shared {
        let l = l.as_ref();
        let a = s1.index_of(l).ok_or_else(|| Error::UnknownElement(l.to_string()))?;
        let b = s2.index_of(l).ok_or_else(|| Error::UnknownElement(l.to_string()))?;
        pairs.push((a, b));
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut to_left = vec![usize::MAX; s2.size()];
    let mut shared_left = vec![false; s1.size()];
    for &(a, b) in &pairs {
        to_left[b] = a;
        shared_left[a] = true;
    }
    for (sym, (r1, r2)) in s1.relations().iter().zip(s2.relations()).enumerate() {
        let inside_left = r1.iter().filter(|t| t.iter().all(|&x| shared_left[x])).count();
        let mut inside_right = 0;
        for t in r2.iter() {
            if t.iter().all(|&y| to_left[y] != usize::MAX) {
                inside_right += 1;
                let mapped: Tuple = t.iter().map(|&y| to_left[y]).collect();
                if !r1.contains(&mapped) {
                    inside_right = usize::MAX;
                    break;
                }
            }
        }
        if inside_left != inside_right {
            return Err(Error::SharedMismatch(format!(
                "relation `{}` differs on the shared labels",
                s1.signature().symbols()[sym].name
            )));
        }
    }
    let gluing = glue(s1.labels(), s2.labels(), &pairs);
    let left = s1.with_labels(gluing.left.iter().map(|&i| gluing.labels[i].clone()).collect())?;
    let right = s2.with_labels(gluing.right.iter().map(|&i| gluing.labels[i].clone()).collect())?;
    Ok(AlignedPair {
        carrier: gluing.labels.clone(),
        left,
        right,
        gluing,
    })
}

/// A finite metric space with exact rational distances.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricSpace {
    labels: Vec<String>,
    dist: Vec<Vec<Q>>,
}

impl MetricSpace {
    pub fn new(labels: Vec<String>, dist: Vec<Vec<Q>>) -> Result<Self> {
        let n = labels.len();
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        if dist.len() != n || dist.iter().any(|r| r.len() != n) {
            return Err(Error::Metric("distance matrix is not square over the points".into()));
        }
        for x in 0..n {
            if !dist[x][x].is_zero() {
                return Err(Error::Metric(format!("d({0},{0}) is not 0", labels[x])));
            }
            for y in 0..n {
                let d = dist[x][y];
                if d.is_negative() {
                    return Err(Error::Metric(format!("negative distance between {} and {}", labels[x], labels[y])));
                }
                if d != dist[y][x] {
                    return Err(Error::Metric(format!("asymmetric distance between {} and {}", labels[x], labels[y])));
                }
                if x != y && d.is_zero() {
                    return Err(Error::Metric(format!("distinct points {} and {} at distance 0", labels[x], labels[y])));
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if dist[x][z] > dist[x][y] + dist[y][z] {
                        return Err(Error::Metric(format!(
                            "triangle inequality fails for {}, {}, {}",
                            labels[x], labels[y], labels[z]
                        )));
                    }
                }
            }
        }
        Ok(MetricSpace { labels, dist })
    }

    /// Builds from an explicit list of unordered pairs; every pair must appear.
    pub fn from_pairs<L: AsRef<str>>(labels: &[L], pairs: &[(&str, &str, Q)]) -> Result<Self> {
        let labels: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
        let n = labels.len();
        let mut dist: Vec<Vec<Option<Q>>> = vec![vec![None; n]; n];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = Some(Q::zero());
        }
        let find = |l: &str| labels.iter().position(|x| x == l).ok_or_else(|| Error::UnknownElement(l.to_string()));
        for &(a, b, d) in pairs {
            let (i, j) = (find(a)?, find(b)?);
            dist[i][j] = Some(d);
            dist[j][i] = Some(d);
        }
        let mut full = vec![vec![Q::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                full[i][j] = dist[i][j]
                    .ok_or_else(|| Error::Metric(format!("missing distance between {} and {}", labels[i], labels[j])))?;
            }
        }
        MetricSpace::new(labels, full)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<Elem> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn d(&self, x: Elem, y: Elem) -> Q {
        self.dist[x][y]
    }

    /// Distance by label.
    pub fn dist(&self, x: &str, y: &str) -> Result<Q> {
        let i = self.index_of(x).ok_or_else(|| Error::UnknownElement(x.to_string()))?;
        let j = self.index_of(y).ok_or_else(|| Error::UnknownElement(y.to_string()))?;
        Ok(self.dist[i][j])
    }

    pub fn induced(&self, subset: &[Elem]) -> Self {
        let keep: BTreeSet<Elem> = subset.iter().copied().collect();
        let keep: Vec<Elem> = keep.into_iter().collect();
        MetricSpace {
            labels: keep.iter().map(|&i| self.labels[i].clone()).collect(),
            dist: keep.iter().map(|&i| keep.iter().map(|&j| self.dist[i][j]).collect()).collect(),
        }
    }

    /// Sorted non-zero distances.
    pub fn distance_set(&self) -> Vec<Q> {
        let mut s: BTreeSet<Q> = BTreeSet::new();
        for (i, row) in self.dist.iter().enumerate() {
            for &d in &row[i + 1..] {
                s.insert(d);
            }
        }
        s.into_iter().collect()
    }
}

impl fmt::Display for MetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for i in 0..self.size() {
            for j in i + 1..self.size() {
                if !first {
                    write!(f, ", ")?;
                }
                first = false;
                write!(f, "d({},{})={}", self.labels[i], self.labels[j], self.dist[i][j])?;
            }
        }
        write!(f, "}}")
    }
}

/// Symbol name for the threshold relation `d(x,y) < r`.
pub fn threshold_symbol(r: Q) -> String {
    format!("d<{r}")
}

pub fn parse_threshold(name: &str) -> Option<Q> {
    let body = name.strip_prefix("d<")?;
    match body.split_once('/') {
        Some((p, q)) => {
            let (p, q): (i64, i64) = (p.parse().ok()?, q.parse().ok()?);
            (q != 0).then(|| Q::new(p, q))
        }
        None => body.parse::<i64>().ok().map(Q::from_integer),
    }
}

/// One binary symbol per threshold `r`, holding the pairs at distance `< r`.
/// A zero threshold is kept as the diagonal only.
pub fn encode_metric(m: &MetricSpace, thresholds: &[Q]) -> Result<Structure> {
    if thresholds.is_empty() {
        return Err(Error::Metric("threshold set is empty".into()));
    }
    if thresholds.iter().any(|r| r.is_negative()) {
        return Err(Error::Metric("negative threshold".into()));
    }
    let ts: BTreeSet<Q> = thresholds.iter().copied().collect();
    let sig = Signature::new(ts.iter().map(|&r| (threshold_symbol(r), 2)))?;
    let n = m.size();
    let rels = ts
        .iter()
        .map(|&r| {
            let mut out = Vec::new();
            for x in 0..n {
                for y in 0..n {
                    let inside = if r.is_zero() { x == y } else { m.d(x, y) < r };
                    if inside {
                        out.push(vec![x, y]);
                    }
                }
            }
            out
        })
        .collect();
    Structure::new(sig, m.labels().to_vec(), rels)
}

/// Recovers distances from a threshold encoding: the distance of a pair is the
/// largest recorded threshold that does not contain it.
pub fn decode_metric(s: &Structure) -> Result<MetricSpace> {
    let mut ths: Vec<(Q, usize)> = Vec::new();
    for (i, sym) in s.signature().symbols().iter().enumerate() {
        let r = parse_threshold(&sym.name)
            .ok_or_else(|| Error::Metric(format!("symbol `{}` is not a threshold relation", sym.name)))?;
        if sym.arity != 2 {
            return Err(Error::Metric(format!("threshold symbol `{}` is not binary", sym.name)));
        }
        ths.push((r, i));
    }
    ths.sort();
    let n = s.size();
    for &(r, i) in &ths {
        let rel = s.relation(i);
        for t in rel.iter() {
            if !rel.contains(&[t[1], t[0]]) {
                return Err(Error::Metric(format!("relation for threshold {r} is not symmetric")));
            }
        }
        for x in 0..n {
            if !rel.contains(&[x, x]) {
                return Err(Error::Metric(format!("relation for threshold {r} is not reflexive")));
            }
        }
        if r.is_zero() && rel.len() != n {
            return Err(Error::Metric("zero threshold must be the diagonal".into()));
        }
    }
    for w in ths.windows(2) {
        if !s.relation(w[0].1).is_subset(s.relation(w[1].1)) {
            return Err(Error::Metric(format!(
                "threshold {} is not contained in threshold {}",
                w[0].0, w[1].0
            )));
        }
    }
    let mut dist = vec![vec![Q::zero(); n]; n];
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let below = ths
                .iter()
                .rev()
                .find(|&&(_, i)| !s.holds(i, &[x, y]))
                .map(|&(r, _)| r);
            dist[x][y] = below.ok_or_else(|| {
                Error::Metric(format!(
                    "distance between {} and {} lies below every recorded threshold",
                    s.label(x),
                    s.label(y)
                ))
            })?;
        }
    }
    MetricSpace::new(s.labels().to_vec(), dist)
}

/// Thresholds that make an encoding of distances in `grid` invertible.
pub fn grid_thresholds(grid: &[Q]) -> Vec<Q> {
    let mut t: BTreeSet<Q> = grid.iter().copied().filter(|r| !r.is_zero()).collect();
    if let Some(&max) = t.iter().next_back() {
        t.insert(max + Q::from_integer(1));
    }
    t.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Q {
        Q::from_integer(n)
    }

    fn path() -> Structure {
        Structure::build(
            Signature::binary("E"),
            &["u", "a", "v"],
            &[("E", &["u", "a"]), ("E", &["a", "u"]), ("E", &["a", "v"]), ("E", &["v", "a"])],
        )
        .unwrap()
    }

    #[test]
    fn induced_path_ends_have_no_edge() {
        let s = induced_substructure(&path(), &["u", "v"]).unwrap();
        assert_eq!(s.labels(), ["u", "v"]);
        assert!(s.relation(0).is_empty());
    }

    #[test]
    fn induced_full_and_empty() {
        let p = path();
        assert_eq!(induced_substructure(&p, p.labels()).unwrap(), p);
        let e = induced_substructure::<&str>(&p, &[]).unwrap();
        assert_eq!(e.size(), 0);
        assert!(induced_substructure(&p, &["zz"]).is_err());
    }

    #[test]
    fn signature_rejects_duplicates_and_nullary() {
        assert!(matches!(Signature::new([("E", 2), ("E", 1)]), Err(Error::DuplicateSymbol(_))));
        assert!(matches!(Signature::new([("P", 0)]), Err(Error::ZeroArity(_))));
    }

    #[test]
    fn structure_rejects_bad_tuples() {
        let sig = Signature::binary("E");
        assert!(Structure::new(sig.clone(), vec!["a".into()], vec![vec![vec![0]]]).is_err());
        assert!(Structure::new(sig.clone(), vec!["a".into()], vec![vec![vec![0, 1]]]).is_err());
        assert!(Structure::new(sig, vec!["a".into(), "a".into()], vec![vec![]]).is_err());
    }

    #[test]
    fn encode_two_points_at_distance_one() {
        let m = MetricSpace::from_pairs(&["a", "u"], &[("a", "u", q(1))]).unwrap();
        let s = encode_metric(&m, &[q(1), q(2)]).unwrap();
        assert_eq!(s.relation(0).tuples(), &[vec![0, 0], vec![1, 1]]);
        assert_eq!(s.relation(1).len(), 4);
    }

    #[test]
    fn strict_threshold_excludes_equal_distance() {
        let m = MetricSpace::from_pairs(&["a", "v"], &[("a", "v", q(10))]).unwrap();
        let s = encode_metric(&m, &[q(10)]).unwrap();
        assert!(!s.holds(0, &[0, 1]));
        assert_eq!(s.relation(0).len(), 2);
    }

    #[test]
    fn one_point_encodes_diagonal() {
        let m = MetricSpace::from_pairs(&["p"], &[]).unwrap();
        let s = encode_metric(&m, &[q(1), Q::new(1, 2)]).unwrap();
        assert!(s.relations().iter().all(|r| r.tuples() == [vec![0, 0]]));
        assert_eq!(decode_metric(&s).unwrap(), m);
    }

    #[test]
    fn decode_round_trip() {
        let m = MetricSpace::from_pairs(
            &["a", "b", "c"],
            &[("a", "b", q(3)), ("b", "c", Q::new(5, 2)), ("a", "c", q(4))],
        )
        .unwrap();
        let mut ts = m.distance_set();
        ts.extend(m.distance_set().iter().map(|d| d + q(1)));
        assert_eq!(decode_metric(&encode_metric(&m, &ts).unwrap()).unwrap(), m);
    }

    #[test]
    fn decode_rejects_antimonotone() {
        let sig = Signature::new([("d<1", 2), ("d<2", 2)]).unwrap();
        let s = Structure::new(
            sig,
            vec!["a".into(), "b".into()],
            vec![
                vec![vec![0, 0], vec![1, 1], vec![0, 1], vec![1, 0]],
                vec![vec![0, 0], vec![1, 1]],
            ],
        )
        .unwrap();
        assert!(decode_metric(&s).is_err());
    }

    #[test]
    fn metric_missing_pair_is_error() {
        assert!(MetricSpace::from_pairs(&["a", "b", "c"], &[("a", "b", q(1))]).is_err());
    }

    #[test]
    fn align_edges_over_shared_point() {
        let sig = Signature::binary("E");
        let s1 = Structure::build(sig.clone(), &["a", "u"], &[("E", &["a", "u"]), ("E", &["u", "a"])]).unwrap();
        let s2 = Structure::build(sig, &["a", "v"], &[("E", &["a", "v"]), ("E", &["v", "a"])]).unwrap();
        let p = disjoint_union_carrier(&s1, &s2, &["a"]).unwrap();
        assert_eq!(p.carrier, ["a", "u", "v"]);
        let same = disjoint_union_carrier(&s1, &s1, s1.labels()).unwrap();
        assert_eq!(same.carrier, ["a", "u"]);
    }

    #[test]
    fn align_renames_clashing_private_labels() {
        let sig = Signature::binary("E");
        let s1 = Structure::build(sig.clone(), &["a", "x"], &[]).unwrap();
        let s2 = Structure::build(sig, &["a", "x"], &[]).unwrap();
        let p = disjoint_union_carrier(&s1, &s2, &["a"]).unwrap();
        assert_eq!(p.carrier, ["a", "x", "x'"]);
        assert_eq!(p.right.labels(), ["a", "x'"]);
    }

    #[test]
    fn align_rejects_disagreeing_shared_part() {
        let sig = Signature::binary("E");
        let s1 = Structure::build(sig.clone(), &["a", "b"], &[("E", &["a", "b"]), ("E", &["b", "a"])]).unwrap();
        let s2 = Structure::build(sig, &["a", "b"], &[]).unwrap();
        assert!(matches!(
            disjoint_union_carrier(&s1, &s2, &["a", "b"]),
            Err(Error::SharedMismatch(_))
        ));
    }

    #[test]
    fn canonical_code_is_invariant() {
        let p = path();
        let q = p.permuted(&[2, 0, 1]);
        assert_eq!(p.canonical_code(), q.canonical_code());
    }

    #[test]
    fn threshold_names_parse() {
        assert_eq!(parse_threshold(&threshold_symbol(Q::new(3, 4))), Some(Q::new(3, 4)));
        assert_eq!(parse_threshold("d<11"), Some(q(11)));
        assert_eq!(parse_threshold("E"), None);
    }
}
