//! Products, powers and amalgamated free sums.

use std::collections::BTreeSet;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::morph::{self, Kind, Morphism, Violation};
use crate::relcore::{self, Elem, MetricSpace, Structure, Tuple, Q};

/// Index of `t` in the lexicographic listing of `size`-element tuples.
pub fn tuple_index(size: usize, t: &[Elem]) -> usize {
    t.iter().fold(0, |acc, &x| acc * size + x)
}

pub fn index_tuple(size: usize, n: usize, mut idx: usize) -> Tuple {
    let mut t = vec![0; n];
    for slot in t.iter_mut().rev() {
        *slot = idx % size;
        idx /= size;
    }
    t
}

/// All `n`-tuples over `0..size` in lexicographic order.
pub fn all_tuples(size: usize, n: usize) -> Vec<Tuple> {
    let count = size.checked_pow(n as u32).unwrap_or(0);
    (0..count).map(|i| index_tuple(size, n, i)).collect()
}

fn tuple_label(parts: &[&str]) -> String {
    format!("({})", parts.join(","))
}

/// Componentwise product. Carrier is `S1 × S2` in lexicographic order.
pub fn product(s1: &Structure, s2: &Structure) -> Result<Structure> {
    if s1.signature() != s2.signature() {
        return Err(Error::SignatureMismatch("factors of a product".into()));
    }
    let m = s2.size();
    let mut labels = Vec::with_capacity(s1.size() * m);
    for x in 0..s1.size() {
        for y in 0..m {
            labels.push(tuple_label(&[s1.label(x), s2.label(y)]));
        }
    }
    let rels = s1
        .relations()
        .iter()
        .zip(s2.relations())
        .map(|(r1, r2)| {
            let mut out = Vec::with_capacity(r1.len() * r2.len());
            for t1 in r1.iter() {
                for t2 in r2.iter() {
                    out.push(t1.iter().zip(t2).map(|(&x, &y)| x * m + y).collect());
                }
            }
            out
        })
        .collect();
    Structure::new(s1.signature().clone(), labels, rels)
}

/// `n`-th power; element `i` is the `i`-th tuple in lexicographic order.
pub fn power(s: &Structure, n: usize) -> Structure {
    let size = s.size();
    let labels = all_tuples(size, n)
        .iter()
        .map(|t| tuple_label(&t.iter().map(|&x| s.label(x)).collect::<Vec<_>>()))
        .collect();
    let rels: Vec<Vec<Tuple>> = s
        .relations()
        .iter()
        .enumerate()
        .map(|(sym, r)| {
            let arity = s.signature().arity(sym);
            let ts = r.tuples();
            let mut out = Vec::new();
            if ts.is_empty() {
                return out;
            }
            // Odometer over one relation tuple per coordinate.
            let mut pick = vec![0usize; n];
            loop {
                let t: Tuple = (0..arity)
                    .map(|p| pick.iter().fold(0, |acc, &k| acc * size + ts[k][p]))
                    .collect();
                out.push(t);
                let mut j = n;
                loop {
                    if j == 0 {
                        return out;
                    }
                    j -= 1;
                    pick[j] += 1;
                    if pick[j] < ts.len() {
                        break;
                    }
                    pick[j] = 0;
                }
            }
        })
        .collect();
    Structure::from_parts(
        s.signature().clone(),
        labels,
        rels.into_iter().map(relcore::Relation::new).collect(),
    )
}

/// `fⁿ` on lexicographic tuple indices.
pub fn power_map(f: &[Elem], src_size: usize, tgt_size: usize, n: usize) -> Vec<Elem> {
    all_tuples(src_size, n)
        .iter()
        .map(|t| t.iter().fold(0, |acc, &x| acc * tgt_size + f[x]))
        .collect()
}

/// `f × g` on product indices.
pub fn product_map(f: &[Elem], g: &[Elem], tgt2_size: usize) -> Vec<Elem> {
    let mut out = Vec::with_capacity(f.len() * g.len());
    for &x in f {
        for &y in g {
            out.push(x * tgt2_size + y);
        }
    }
    out
}

/// Two embeddings out of a common structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmalgamInstance {
    pub a: Structure,
    pub b1: Structure,
    pub b2: Structure,
    pub f1: Vec<Elem>,
    pub f2: Vec<Elem>,
}

impl AmalgamInstance {
    pub fn new(a: Structure, b1: Structure, b2: Structure, f1: Vec<Elem>, f2: Vec<Elem>) -> Result<Self> {
        for (name, b, f) in [("f1", &b1, &f1), ("f2", &b2, &f2)] {
            if let Some(v) = morph::check(&a, b, f, Kind::Embedding)? {
                return Err(Error::Precondition(format!("{name} is not an embedding: {v}")));
            }
        }
        Ok(AmalgamInstance { a, b1, b2, f1, f2 })
    }

    /// Instance whose embeddings identify elements by label; `A` is induced
    /// on `shared` inside `b1`.
    pub fn over_shared<L: AsRef<str>>(b1: Structure, b2: Structure, shared: &[L]) -> Result<Self> {
        let a = relcore::induced_substructure(&b1, shared)?;
        let lookup = |b: &Structure| -> Result<Vec<Elem>> {
            a.labels()
                .iter()
                .map(|l| b.index_of(l).ok_or_else(|| Error::UnknownElement(l.clone())))
                .collect()
        };
        let f1 = lookup(&b1)?;
        let f2 = lookup(&b2)?;
        AmalgamInstance::new(a, b1, b2, f1, f2)
    }

    /// The instance `(Aⁿ, B1ⁿ, B2ⁿ, f1ⁿ, f2ⁿ)`.
    pub fn power(&self, n: usize) -> AmalgamInstance {
        AmalgamInstance {
            a: power(&self.a, n),
            b1: power(&self.b1, n),
            b2: power(&self.b2, n),
            f1: power_map(&self.f1, self.a.size(), self.b1.size(), n),
            f2: power_map(&self.f2, self.a.size(), self.b2.size(), n),
        }
    }

    /// Componentwise product of two instances.
    pub fn product(&self, other: &AmalgamInstance) -> Result<AmalgamInstance> {
        Ok(AmalgamInstance {
            a: product(&self.a, &other.a)?,
            b1: product(&self.b1, &other.b1)?,
            b2: product(&self.b2, &other.b2)?,
            f1: product_map(&self.f1, &other.f1, other.b1.size()),
            f2: product_map(&self.f2, &other.f2, other.b2.size()),
        })
    }

    fn pairs(&self) -> Vec<(Elem, Elem)> {
        self.f1.iter().copied().zip(self.f2.iter().copied()).collect()
    }

    /// Elements of `B2` outside the image of `f2`.
    fn b2_fresh(&self) -> Vec<bool> {
        let mut fresh = vec![true; self.b2.size()];
        for &y in &self.f2 {
            fresh[y] = false;
        }
        fresh
    }

    fn b1_fresh(&self) -> Vec<bool> {
        let mut fresh = vec![true; self.b1.size()];
        for &y in &self.f1 {
            fresh[y] = false;
        }
        fresh
    }
}

/// A cocone `g1: B1 → C`, `g2: B2 → C` with `g1∘f1 = g2∘f2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PushoutResult {
    pub c: Structure,
    pub g1: Vec<Elem>,
    pub g2: Vec<Elem>,
}

impl PushoutResult {
    /// Checks the square and that both legs are embeddings.
    pub fn check(&self, inst: &AmalgamInstance) -> Result<Option<String>> {
        if morph::compose(&inst.f1, &self.g1) != morph::compose(&inst.f2, &self.g2) {
            return Ok(Some("g1∘f1 differs from g2∘f2".into()));
        }
        for (name, b, g) in [("g1", &inst.b1, &self.g1), ("g2", &inst.b2, &self.g2)] {
            if let Some(v) = morph::check(b, &self.c, g, Kind::Embedding)? {
                return Ok(Some(format!("{name}: {v}")));
            }
        }
        Ok(None)
    }
}

/// Carrier `B1 ⊔_A B2` and the legs, with no relations yet.
fn glued_carrier(inst: &AmalgamInstance) -> (Vec<String>, Vec<Elem>, Vec<Elem>) {
    let g = relcore::glue(inst.b1.labels(), inst.b2.labels(), &inst.pairs());
    (g.labels, g.left, g.right)
}

fn image_relations(s: &Structure, map: &[Elem]) -> Vec<Vec<Tuple>> {
    s.relations()
        .iter()
        .map(|r| r.iter().map(|t| t.iter().map(|&x| map[x]).collect()).collect())
        .collect()
}

fn union_rels(mut a: Vec<Vec<Tuple>>, b: Vec<Vec<Tuple>>) -> Vec<Vec<Tuple>> {
    for (x, y) in a.iter_mut().zip(b) {
        x.extend(y);
    }
    a
}

/// Free amalgam: relations are exactly the images of the two sides.
pub fn free_amalgam(inst: &AmalgamInstance) -> Result<PushoutResult> {
    let (labels, g1, g2) = glued_carrier(inst);
    let rels = union_rels(image_relations(&inst.b1, &g1), image_relations(&inst.b2, &g2));
    let c = Structure::new(inst.b1.signature().clone(), labels, rels)?;
    Ok(PushoutResult { c, g1, g2 })
}

fn single_binary(s: &Structure, what: &str) -> Result<()> {
    let sig = s.signature();
    if sig.len() != 1 || sig.arity(0) != 2 {
        return Err(Error::SignatureMismatch(format!("{what} needs exactly one binary symbol")));
    }
    Ok(())
}

/// Checks reflexivity, antisymmetry and transitivity of symbol 0.
pub fn poset_violation(s: &Structure) -> Option<String> {
    let n = s.size();
    let le = |x, y| s.holds(0, &[x, y]);
    for x in 0..n {
        if !le(x, x) {
            return Some(format!("{} is not below itself", s.label(x)));
        }
    }
    for x in 0..n {
        for y in 0..n {
            if x != y && le(x, y) && le(y, x) {
                return Some(format!("{} and {} are below each other", s.label(x), s.label(y)));
            }
            if le(x, y) {
                for z in 0..n {
                    if le(y, z) && !le(x, z) {
                        return Some(format!(
                            "{} ≤ {} ≤ {} without {} ≤ {}",
                            s.label(x),
                            s.label(y),
                            s.label(z),
                            s.label(x),
                            s.label(z)
                        ));
                    }
                }
            }
        }
    }
    None
}

/// Poset amalgam: both orders plus the pairs routed through a common point.
pub fn poset_amalgam(inst: &AmalgamInstance) -> Result<PushoutResult> {
    single_binary(&inst.b1, "poset amalgam")?;
    let (labels, g1, g2) = glued_carrier(inst);
    let mut le: BTreeSet<(Elem, Elem)> = BTreeSet::new();
    for t in inst.b1.relation(0).iter() {
        le.insert((g1[t[0]], g1[t[1]]));
    }
    for t in inst.b2.relation(0).iter() {
        le.insert((g2[t[0]], g2[t[1]]));
    }
    // σ: b1 ≤ a ≤ b2, τ: b2 ≤ a ≤ b1.
    for a in 0..inst.a.size() {
        let (a1, a2) = (inst.f1[a], inst.f2[a]);
        for x in 0..inst.b1.size() {
            for y in 0..inst.b2.size() {
                if inst.b1.holds(0, &[x, a1]) && inst.b2.holds(0, &[a2, y]) {
                    le.insert((g1[x], g2[y]));
                }
                if inst.b2.holds(0, &[y, a2]) && inst.b1.holds(0, &[a1, x]) {
                    le.insert((g2[y], g1[x]));
                }
            }
        }
    }
    let c = Structure::new(
        inst.b1.signature().clone(),
        labels,
        vec![le.into_iter().map(|(x, y)| vec![x, y]).collect()],
    )?;
    if let Some(why) = poset_violation(&c) {
        return Err(Error::Amalgam(format!("poset amalgam is not a poset: {why}")));
    }
    Ok(PushoutResult { c, g1, g2 })
}

/// Reflexive linear orders on symbol 0: merges the two orders, placing points
/// of `B1` below points of `B2` inside each gap of `A`.
pub fn chain_amalgam(inst: &AmalgamInstance) -> Result<PushoutResult> {
    single_binary(&inst.b1, "chain amalgam")?;
    let sorted = |b: &Structure| {
        let mut v: Vec<Elem> = (0..b.size()).collect();
        v.sort_by_key(|&x| (0..b.size()).filter(|&y| b.holds(0, &[y, x])).count());
        v
    };
    let (o1, o2) = (sorted(&inst.b1), sorted(&inst.b2));
    let (fresh1, fresh2) = (inst.b1_fresh(), inst.b2_fresh());
    let (labels, g1, g2) = glued_carrier(inst);
    let mut merged: Vec<Elem> = Vec::with_capacity(labels.len());
    let (mut i, mut j) = (0, 0);
    while i < o1.len() || j < o2.len() {
        if i < o1.len() && fresh1[o1[i]] {
            merged.push(g1[o1[i]]);
            i += 1;
        } else if j < o2.len() && fresh2[o2[j]] {
            merged.push(g2[o2[j]]);
            j += 1;
        } else if i < o1.len() && j < o2.len() {
            if g1[o1[i]] != g2[o2[j]] {
                return Err(Error::Amalgam("the chains order the shared part differently".into()));
            }
            merged.push(g1[o1[i]]);
            i += 1;
            j += 1;
        } else {
            return Err(Error::Amalgam("shared part is not common to both chains".into()));
        }
    }
    let mut le = Vec::new();
    for (p, &x) in merged.iter().enumerate() {
        for &y in &merged[p..] {
            le.push(vec![x, y]);
        }
    }
    let c = Structure::new(inst.b1.signature().clone(), labels, vec![le])?;
    Ok(PushoutResult { c, g1, g2 })
}

/// Tournament amalgam: cross pairs point from `B1 ∖ A` to `B2 ∖ A`.
pub fn tournament_amalgam(inst: &AmalgamInstance) -> Result<PushoutResult> {
    single_binary(&inst.b1, "tournament amalgam")?;
    let base = free_amalgam(inst)?;
    let (fresh1, fresh2) = (inst.b1_fresh(), inst.b2_fresh());
    let mut cross = Vec::new();
    for x in (0..inst.b1.size()).filter(|&x| fresh1[x]) {
        for y in (0..inst.b2.size()).filter(|&y| fresh2[y]) {
            cross.push(vec![base.g1[x], base.g2[y]]);
        }
    }
    Ok(PushoutResult {
        c: base.c.union_relations(&[cross]),
        ..base
    })
}

/// Metric amalgam over the labels the two spaces share. Cross distances are
/// the shortest two-leg path through the shared part.
pub fn metric_amalgam(a: &MetricSpace, b1: &MetricSpace, b2: &MetricSpace) -> Result<MetricSpace> {
    let mut pairs = Vec::new();
    for l in a.labels() {
        let x = b1.index_of(l).ok_or_else(|| Error::UnknownElement(l.clone()))?;
        let y = b2.index_of(l).ok_or_else(|| Error::UnknownElement(l.clone()))?;
        pairs.push((x, y));
    }
    for &(x, y) in &pairs {
        for &(x2, y2) in &pairs {
            if b1.d(x, x2) != b2.d(y, y2) || a.dist(b1.labels()[x].as_str(), b1.labels()[x2].as_str())? != b1.d(x, x2) {
                return Err(Error::SharedMismatch("distances on the shared part differ".into()));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Amalgam("metric amalgam needs a non-empty shared part".into()));
    }
    Ok(metric_glue(b1, b2, &pairs, None)?.0)
}

/// Metric gluing along index pairs; when `cap` is given, cross distances are
/// capped by it, and it is the cross distance of a gluing over nothing.
pub fn metric_glue(
    b1: &MetricSpace,
    b2: &MetricSpace,
    pairs: &[(Elem, Elem)],
    cap: Option<Q>,
) -> Result<(MetricSpace, Vec<Elem>, Vec<Elem>)> {
    let g = relcore::glue(b1.labels(), b2.labels(), pairs);
    let n = g.labels.len();
    let mut dist = vec![vec![Q::zero(); n]; n];
    for x in 0..b1.size() {
        for x2 in 0..b1.size() {
            dist[g.left[x]][g.left[x2]] = b1.d(x, x2);
        }
    }
    for y in 0..b2.size() {
        for y2 in 0..b2.size() {
            dist[g.right[y]][g.right[y2]] = b2.d(y, y2);
        }
    }
    let mut shared2 = vec![false; b2.size()];
    for &(_, y) in pairs {
        shared2[y] = true;
    }
    for x in 0..b1.size() {
        for y in (0..b2.size()).filter(|&y| !shared2[y]) {
            let through = pairs.iter().map(|&(z1, z2)| b1.d(x, z1) + b2.d(z2, y)).min();
            let d = match (through, cap) {
                (Some(d), Some(c)) => d.min(c),
                (Some(d), None) => d,
                (None, Some(c)) => c,
                (None, None) => return Err(Error::Amalgam("metric gluing over nothing needs a cap".into())),
            };
            let (p, q) = (g.left[x], g.right[y]);
            dist[p][q] = d;
            dist[q][p] = d;
        }
    }
    Ok((MetricSpace::new(g.labels, dist)?, g.left, g.right))
}

/// Metric amalgam on threshold encodings with cross distances capped at `cap`.
pub fn encoded_metric_amalgam(inst: &AmalgamInstance, thresholds: &[Q], cap: Q) -> Result<PushoutResult> {
    let m1 = relcore::decode_metric(&inst.b1)?;
    let m2 = relcore::decode_metric(&inst.b2)?;
    let (m, g1, g2) = metric_glue(&m1, &m2, &inst.pairs(), Some(cap))?;
    let c = relcore::encode_metric(&m, thresholds)?;
    if c.signature() != inst.b1.signature() {
        return Err(Error::SignatureMismatch("threshold set of the amalgam".into()));
    }
    Ok(PushoutResult { c, g1, g2 })
}

/// The map `r: C → D` with `r∘g1 = p` and `r∘g2 = q`.
pub fn mediating_map(po: &PushoutResult, p: &[Elem], q: &[Elem]) -> Result<Vec<Elem>> {
    let mut r = vec![usize::MAX; po.c.size()];
    for (leg, vals) in [(&po.g1, p), (&po.g2, q)] {
        for (x, &cx) in leg.iter().enumerate() {
            if r[cx] != usize::MAX && r[cx] != vals[x] {
                return Err(Error::Precondition("cocone legs disagree on the shared part".into()));
            }
            r[cx] = vals[x];
        }
    }
    if r.contains(&usize::MAX) {
        return Err(Error::Precondition("amalgam has points outside both legs".into()));
    }
    Ok(r)
}

/// Which defining case of the weak-pushout map a tuple of `Cⁿ` falls into (1 to 4).
pub fn weak_pushout_case(c: &PushoutResult, t: &[Elem]) -> u8 {
    let (inv1, inv2) = (inverse(&c.g1, c.c.size()), inverse(&c.g2, c.c.size()));
    case_of(&inv1, &inv2, t).0
}

fn inverse(map: &[Elem], size: usize) -> Vec<Option<Elem>> {
    let mut inv = vec![None; size];
    for (x, &y) in map.iter().enumerate() {
        inv[y] = Some(x);
    }
    inv
}

fn case_of(inv1: &[Option<Elem>], inv2: &[Option<Elem>], t: &[Elem]) -> (u8, Tuple) {
    if let Some(u) = t.iter().map(|&x| inv1[x]).collect::<Option<Tuple>>() {
        return (1, u);
    }
    if let Some(v) = t.iter().map(|&x| inv2[x]).collect::<Option<Tuple>>() {
        return (2, v);
    }
    match (inv1[t[0]], inv2[t[0]]) {
        (Some(u), _) => (3, vec![u; t.len()]),
        (None, Some(v)) => (4, vec![v; t.len()]),
        (None, None) => (0, Vec::new()),
    }
}

/// The four-case map `h: Cⁿ → Ĉ` built from a pushout `C` of the instance and a
/// pushout `Ĉ` of its `n`-th power. Returned unverified.
pub fn weak_pushout_map(inst: &AmalgamInstance, n: usize, c: &PushoutResult, chat: &PushoutResult) -> Result<Morphism> {
    if n == 0 {
        return Err(Error::Arity("power exponent must be positive".into()));
    }
    if let Some(why) = c.check(inst)? {
        return Err(Error::Precondition(format!("C is not an amalgam of the instance: {why}")));
    }
    let (b1n, b2n) = (inst.b1.size().pow(n as u32), inst.b2.size().pow(n as u32));
    if chat.g1.len() != b1n || chat.g2.len() != b2n {
        return Err(Error::Precondition("Ĉ legs do not start at B1ⁿ and B2ⁿ".into()));
    }
    let p1 = power_map(&inst.f1, inst.a.size(), inst.b1.size(), n);
    let p2 = power_map(&inst.f2, inst.a.size(), inst.b2.size(), n);
    if morph::compose(&p1, &chat.g1) != morph::compose(&p2, &chat.g2) {
        return Err(Error::Precondition("Ĉ legs disagree on Aⁿ".into()));
    }
    let size = c.c.size();
    let (inv1, inv2) = (inverse(&c.g1, size), inverse(&c.g2, size));
    let mut map = Vec::with_capacity(size.pow(n as u32));
    for t in all_tuples(size, n) {
        let (case, pre) = case_of(&inv1, &inv2, &t);
        let y = match case {
            1 | 3 => chat.g1[tuple_index(inst.b1.size(), &pre)],
            2 | 4 => chat.g2[tuple_index(inst.b2.size(), &pre)],
            _ => return Err(Error::Precondition("C has a point outside both legs".into())),
        };
        map.push(y);
    }
    Ok(Morphism::new(map, Kind::Hom))
}

/// Outcome of a well-behavedness test on one pair of squares.
#[derive(Clone, Debug)]
pub struct WellBehaved {
    pub holds: bool,
    /// The free sum of the products.
    pub d: Structure,
    /// The product of the free sums.
    pub target: Structure,
    pub map: Vec<Elem>,
    pub violation: Option<Violation>,
}

/// Builds the mediating map from the free sum of the products into the product
/// of the free sums and tests whether it is an embedding.
pub fn well_behaved_check<F>(amalgam: F, sq1: &AmalgamInstance, sq2: &AmalgamInstance) -> Result<WellBehaved>
where
    F: Fn(&AmalgamInstance) -> Result<PushoutResult>,
{
    let p1 = amalgam(sq1)?;
    let p2 = amalgam(sq2)?;
    let prod = sq1.product(sq2)?;
    let d = amalgam(&prod)?;
    let target = product(&p1.c, &p2.c)?;
    let m = p2.c.size();
    let left = product_map(&p1.g1, &p2.g1, m);
    let right = product_map(&p1.g2, &p2.g2, m);
    let map = mediating_map(&d, &left, &right)?;
    let violation = morph::check(&d.c, &target, &map, Kind::Embedding)?;
    Ok(WellBehaved {
        holds: violation.is_none(),
        d: d.c,
        target,
        map,
        violation,
    })
}

/// Pushout of a homomorphism `f: A → B` along an embedding `g: A ↪ C`, on the
/// carrier `B ⊔ (C ∖ g(A))`. Returns `(D, f̂: C → D, ĝ: B → D)`.
pub fn hom_pushout(a: &Structure, b: &Structure, f: &[Elem], c: &Structure, g: &[Elem]) -> Result<(Structure, Vec<Elem>, Vec<Elem>)> {
    if a.signature() != b.signature() || a.signature() != c.signature() {
        return Err(Error::SignatureMismatch("hom pushout".into()));
    }
    let pairs: Vec<(Elem, Elem)> = (0..a.size()).map(|x| (f[x], g[x])).collect();
    let gl = relcore::glue(b.labels(), c.labels(), &pairs);
    let rels = union_rels(image_relations(b, &gl.left), image_relations(c, &gl.right));
    let d = Structure::new(b.signature().clone(), gl.labels, rels)?;
    Ok((d, gl.right, gl.left))
}

/// Reflexive-transitive closure of symbol 0 followed by collapsing cycles.
/// Returns the quotient poset and the quotient map.
pub fn poset_collapse(s: &Structure) -> Result<(Structure, Vec<Elem>)> {
    single_binary(s, "poset closure")?;
    let n = s.size();
    let mut le = vec![vec![false; n]; n];
    for (x, row) in le.iter_mut().enumerate() {
        row[x] = true;
    }
    for t in s.relation(0).iter() {
        le[t[0]][t[1]] = true;
    }
    for k in 0..n {
        for x in 0..n {
            if le[x][k] {
                for y in 0..n {
                    if le[k][y] {
                        le[x][y] = true;
                    }
                }
            }
        }
    }
    let mut class = vec![usize::MAX; n];
    let mut reps = Vec::new();
    for x in 0..n {
        if class[x] == usize::MAX {
            let id = reps.len();
            reps.push(x);
            for y in x..n {
                if le[x][y] && le[y][x] {
                    class[y] = id;
                }
            }
        }
    }
    let labels = reps.iter().map(|&x| s.label(x).to_string()).collect();
    let mut rel = Vec::new();
    for (i, &x) in reps.iter().enumerate() {
        for (j, &y) in reps.iter().enumerate() {
            if le[x][y] {
                rel.push(vec![i, j]);
            }
        }
    }
    Ok((Structure::new(s.signature().clone(), labels, vec![rel])?, class))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relcore::Signature;

    fn edge(x: &str, y: &str) -> Structure {
        Structure::build(Signature::binary("E"), &[x, y], &[("E", &[x, y]), ("E", &[y, x])]).unwrap()
    }

    fn chain(sym: &str, elems: &[&str], strict: bool) -> Structure {
        let mut ts: Vec<(&str, Vec<&str>)> = Vec::new();
        for (i, &x) in elems.iter().enumerate() {
            for &y in &elems[i..] {
                if !(strict && x == y) {
                    ts.push((sym, vec![x, y]));
                }
            }
        }
        let ts: Vec<(&str, &[&str])> = ts.iter().map(|(s, v)| (*s, v.as_slice())).collect();
        Structure::build(Signature::binary(sym), elems, &ts).unwrap()
    }

    fn q(n: i64) -> Q {
        Q::from_integer(n)
    }

    #[test]
    fn tuple_indices_round_trip() {
        for i in 0..27 {
            assert_eq!(tuple_index(3, &index_tuple(3, 3, i)), i);
        }
        assert_eq!(index_tuple(2, 2, 2), vec![1, 0]);
    }

    #[test]
    fn k2_squared() {
        let k = edge("a", "u");
        let p = product(&k, &k).unwrap();
        assert_eq!(p.size(), 4);
        assert_eq!(p.relation(0).len(), 4);
        for t in p.relation(0).iter() {
            let (x, y) = (index_tuple(2, 2, t[0]), index_tuple(2, 2, t[1]));
            assert!(x[0] != y[0] && x[1] != y[1]);
        }
        assert_eq!(p, power(&k, 2));
        assert_eq!(p.labels()[1], "(a,u)");
    }

    #[test]
    fn projections_are_homs() {
        let k = edge("a", "u");
        let p = power(&k, 3);
        for i in 0..3 {
            let proj: Vec<Elem> = all_tuples(2, 3).iter().map(|t| t[i]).collect();
            assert!(morph::is_valid(&p, &k, &proj, Kind::Hom));
        }
    }

    #[test]
    fn product_with_looped_point() {
        let k = edge("a", "u");
        let pt = Structure::build(Signature::binary("E"), &["o"], &[("E", &["o", "o"])]).unwrap();
        assert!(morph::are_isomorphic(&product(&k, &pt).unwrap(), &k));
    }

    #[test]
    fn metric_product_pair_below_eleven() {
        let b1 = MetricSpace::from_pairs(&["a", "u"], &[("a", "u", q(1))]).unwrap();
        let b2 = MetricSpace::from_pairs(&["a", "v"], &[("a", "v", q(10))]).unwrap();
        let e1 = relcore::encode_metric(&b1, &[q(11)]).unwrap();
        let e2 = relcore::encode_metric(&b2, &[q(11)]).unwrap();
        let p = product(&e1, &e2).unwrap();
        let ua = p.index_of("(u,a)").unwrap();
        let av = p.index_of("(a,v)").unwrap();
        assert!(p.holds(0, &[ua, av]));
    }

    #[test]
    fn free_amalgam_of_two_edges_is_a_path() {
        let inst = AmalgamInstance::over_shared(edge("a", "u"), edge("a", "v"), &["a"]).unwrap();
        let po = free_amalgam(&inst).unwrap();
        assert_eq!(po.check(&inst).unwrap(), None);
        let (u, v) = (po.c.index_of("u").unwrap(), po.c.index_of("v").unwrap());
        assert!(!po.c.holds(0, &[u, v]));
        assert_eq!(po.c.relation(0).len(), 4);
    }

    #[test]
    fn free_amalgam_degenerate_cases() {
        let e = edge("a", "u");
        let inst = AmalgamInstance::over_shared(e.clone(), e.clone(), &["a", "u"]).unwrap();
        assert_eq!(free_amalgam(&inst).unwrap().c, e);
        let inst = AmalgamInstance::over_shared(e.clone(), edge("x", "y"), &[] as &[&str]).unwrap();
        let c = free_amalgam(&inst).unwrap().c;
        assert_eq!((c.size(), c.relation(0).len()), (4, 4));
    }

    #[test]
    fn poset_amalgam_examples() {
        let inst = AmalgamInstance::over_shared(chain("le", &["a", "u"], false), chain("le", &["a", "v"], false), &["a"]).unwrap();
        let po = poset_amalgam(&inst).unwrap();
        let (u, v) = (po.c.index_of("u").unwrap(), po.c.index_of("v").unwrap());
        assert!(!po.c.holds(0, &[u, v]) && !po.c.holds(0, &[v, u]));

        let inst = AmalgamInstance::over_shared(chain("le", &["x", "a"], false), chain("le", &["a", "y"], false), &["a"]).unwrap();
        let po = poset_amalgam(&inst).unwrap();
        let (x, y) = (po.c.index_of("x").unwrap(), po.c.index_of("y").unwrap());
        assert!(po.c.holds(0, &[x, y]));
        assert_eq!(po.check(&inst).unwrap(), None);
    }

    #[test]
    fn chain_amalgam_interleaves() {
        let inst = AmalgamInstance::over_shared(chain("le", &["a", "u"], false), chain("le", &["a", "v"], false), &["a"]).unwrap();
        let po = chain_amalgam(&inst).unwrap();
        assert_eq!(po.check(&inst).unwrap(), None);
        let (u, v) = (po.c.index_of("u").unwrap(), po.c.index_of("v").unwrap());
        assert!(po.c.holds(0, &[u, v]));
    }

    #[test]
    fn metric_amalgam_examples() {
        let a = MetricSpace::from_pairs(&["a"], &[]).unwrap();
        let b1 = MetricSpace::from_pairs(&["a", "u"], &[("a", "u", q(1))]).unwrap();
        let b2 = MetricSpace::from_pairs(&["a", "v"], &[("a", "v", q(10))]).unwrap();
        assert_eq!(metric_amalgam(&a, &b1, &b2).unwrap().dist("u", "v").unwrap(), q(11));

        let a = MetricSpace::from_pairs(&["a", "b"], &[("a", "b", q(3))]).unwrap();
        let b1 = MetricSpace::from_pairs(&["a", "b", "u"], &[("a", "b", q(3)), ("u", "a", q(1)), ("u", "b", q(4))]).unwrap();
        let b2 = MetricSpace::from_pairs(&["a", "b", "v"], &[("a", "b", q(3)), ("v", "a", q(5)), ("v", "b", q(2))]).unwrap();
        assert_eq!(metric_amalgam(&a, &b1, &b2).unwrap().dist("u", "v").unwrap(), q(6));
        assert_eq!(metric_amalgam(&a, &a, &a).unwrap(), a);

        let empty = MetricSpace::from_pairs::<&str>(&[], &[]).unwrap();
        assert!(matches!(metric_amalgam(&empty, &b1, &b2), Err(Error::Amalgam(_))));
    }

    #[test]
    fn weak_pushout_cases_on_the_path() {
        let inst = AmalgamInstance::over_shared(edge("a", "u"), edge("a", "v"), &["a"]).unwrap();
        let c = free_amalgam(&inst).unwrap();
        let chat = free_amalgam(&inst.power(2)).unwrap();
        let h = weak_pushout_map(&inst, 2, &c, &chat).unwrap();
        let (a, u, v) = (0, c.c.index_of("u").unwrap(), c.c.index_of("v").unwrap());
        assert_eq!(weak_pushout_case(&c, &[u, v]), 3);
        let uu = chat.g1[tuple_index(2, &[1, 1])];
        assert_eq!(h.map[tuple_index(3, &[u, v])], uu);
        // (a,a) is covered by both of the first two cases.
        let via1 = chat.g1[tuple_index(2, &[0, 0])];
        let via2 = chat.g2[tuple_index(2, &[0, 0])];
        assert_eq!(via1, via2);
        assert_eq!(h.map[tuple_index(3, &[a, a])], via1);
    }

    #[test]
    fn weak_pushout_for_n1_is_an_isomorphism() {
        let inst = AmalgamInstance::over_shared(edge("a", "u"), edge("a", "v"), &["a"]).unwrap();
        let c = free_amalgam(&inst).unwrap();
        let chat = free_amalgam(&inst.power(1)).unwrap();
        let h = weak_pushout_map(&inst, 1, &c, &chat).unwrap();
        assert!(morph::is_valid(&power(&c.c, 1), &chat.c, &h.map, Kind::Iso));
    }

    #[test]
    fn weak_pushout_is_not_a_hom_over_a_shared_point() {
        // (u,a) ~ (a,v) in C², but their images sit on different sides of Ĉ.
        let inst = AmalgamInstance::over_shared(edge("a", "u"), edge("a", "v"), &["a"]).unwrap();
        let c = free_amalgam(&inst).unwrap();
        let chat = free_amalgam(&inst.power(2)).unwrap();
        let h = weak_pushout_map(&inst, 2, &c, &chat).unwrap();
        let v = morph::check(&power(&c.c, 2), &chat.c, &h.map, Kind::Hom).unwrap();
        assert!(matches!(v, Some(Violation::NotPreserved { .. })));
    }

    #[test]
    fn weak_pushout_over_nothing_is_a_hom() {
        let inst = AmalgamInstance::over_shared(edge("a", "u"), edge("b", "v"), &[] as &[&str]).unwrap();
        let c = free_amalgam(&inst).unwrap();
        let chat = free_amalgam(&inst.power(2)).unwrap();
        let h = weak_pushout_map(&inst, 2, &c, &chat).unwrap();
        assert!(morph::is_valid(&power(&c.c, 2), &chat.c, &h.map, Kind::Hom));
    }

    #[test]
    fn graphs_are_not_well_behaved_on_the_path() {
        let sq = AmalgamInstance::over_shared(edge("a", "u"), edge("a", "v"), &["a"]).unwrap();
        let wb = well_behaved_check(free_amalgam, &sq, &sq).unwrap();
        assert!(!wb.holds);
    }

    #[test]
    fn posets_well_behaved_on_two_chains() {
        let sq = AmalgamInstance::over_shared(chain("le", &["a", "u"], false), chain("le", &["a", "v"], false), &["a"]).unwrap();
        let wb = well_behaved_check(poset_amalgam, &sq, &sq).unwrap();
        assert!(wb.holds, "{:?}", wb.violation);
        let deg = AmalgamInstance::over_shared(chain("le", &["a"], false), chain("le", &["a"], false), &["a"]).unwrap();
        let wb = well_behaved_check(poset_amalgam, &deg, &deg).unwrap();
        assert!(wb.holds);
        assert!(morph::is_valid(&wb.d, &wb.target, &wb.map, Kind::Iso));
    }

    #[test]
    fn hom_pushout_collapsing_two_points() {
        let a = Structure::build(Signature::binary("E"), &["p", "q"], &[]).unwrap();
        let b = Structure::build(Signature::binary("E"), &["o"], &[]).unwrap();
        let c = Structure::build(
            Signature::binary("E"),
            &["p", "q", "r"],
            &[("E", &["p", "r"]), ("E", &["r", "p"])],
        )
        .unwrap();
        let (d, fhat, ghat) = hom_pushout(&a, &b, &[0, 0], &c, &[0, 1]).unwrap();
        assert_eq!(d.size(), 2);
        assert!(morph::is_valid(&c, &d, &fhat, Kind::Hom));
        assert!(morph::is_valid(&b, &d, &ghat, Kind::Embedding));
    }

    #[test]
    fn collapse_merges_cycles() {
        let s = Structure::build(
            Signature::binary("le"),
            &["x", "y", "z"],
            &[("le", &["x", "y"]), ("le", &["y", "x"]), ("le", &["y", "z"])],
        )
        .unwrap();
        let (p, cls) = poset_collapse(&s).unwrap();
        assert_eq!(p.size(), 2);
        assert_eq!(cls, vec![0, 0, 1]);
        assert_eq!(poset_violation(&p), None);
    }
}
