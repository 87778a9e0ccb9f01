//! Built-in classes of finite structures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::construct::{self, AmalgamInstance, PushoutResult};
use crate::error::{Error, Result};
use crate::morph::{self, Kind};
use crate::relcore::{self, Code, Elem, MetricSpace, Signature, Structure, Tuple, Q};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AgeKind {
    SimpleGraphs,
    GraphsWithAllLoops,
    /// Loopless directed graphs.
    Digraphs,
    /// Each tuple has distinct entries; relation closed under permutations.
    KUniformHypergraphs(usize),
    Posets,
    Chains,
    Tournaments,
    /// Metric spaces with non-zero distances in the grid, threshold-encoded.
    RationalMetricSpaces(Vec<Q>),
    /// Structures omitting every listed structure; free amalgamation is assumed.
    ForbiddenSubstructures(Vec<Structure>),
}

/// A hereditary class of finite structures over a fixed signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgeDescriptor {
    name: String,
    kind: AgeKind,
    signature: Signature,
}

impl fmt::Display for AgeDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub const DEFAULT_GRID_MAX: i64 = 10;

pub fn integer_grid(max: i64) -> Vec<Q> {
    (1..=max).map(Q::from_integer).collect()
}

impl AgeDescriptor {
    pub fn new(kind: AgeKind) -> Result<Self> {
        let (name, signature) = match &kind {
            AgeKind::SimpleGraphs => ("graphs".to_string(), Signature::binary("E")),
            AgeKind::GraphsWithAllLoops => ("graphs-with-loops".to_string(), Signature::binary("E")),
            AgeKind::Digraphs => ("digraphs".to_string(), Signature::binary("E")),
            AgeKind::KUniformHypergraphs(k) => {
                if *k < 2 {
                    return Err(Error::Arity("hypergraph edges need at least two vertices".into()));
                }
                (format!("hypergraphs-{k}"), Signature::new([("R".to_string(), *k)])?)
            }
            AgeKind::Posets => ("posets".to_string(), Signature::binary("le")),
            AgeKind::Chains => ("chains".to_string(), Signature::binary("le")),
            AgeKind::Tournaments => ("tournaments".to_string(), Signature::binary("E")),
            AgeKind::RationalMetricSpaces(grid) => {
                if grid.is_empty() || grid.iter().any(|r| *r <= Q::zero()) {
                    return Err(Error::Metric("grid must be a non-empty set of positive distances".into()));
                }
                let ths = relcore::grid_thresholds(grid);
                let name = match integer_max(grid) {
                    Some(m) if m == DEFAULT_GRID_MAX => "metric".to_string(),
                    Some(m) => format!("metric-{m}"),
                    None => "metric-grid".to_string(),
                };
                (name, Signature::new(ths.iter().map(|&r| (relcore::threshold_symbol(r), 2)))?)
            }
            AgeKind::ForbiddenSubstructures(list) => {
                let sig = list
                    .first()
                    .map(|s| s.signature().clone())
                    .ok_or_else(|| Error::Precondition("forbidden list is empty".into()))?;
                if list.iter().any(|s| s.signature() != &sig) {
                    return Err(Error::SignatureMismatch("forbidden structures".into()));
                }
                ("forbidden".to_string(), sig)
            }
        };
        let kind = match kind {
            AgeKind::RationalMetricSpaces(grid) => {
                AgeKind::RationalMetricSpaces(grid.into_iter().collect::<BTreeSet<_>>().into_iter().collect())
            }
            k => k,
        };
        Ok(AgeDescriptor { name, kind, signature })
    }

    pub fn simple_graphs() -> Self {
        Self::builtin(AgeKind::SimpleGraphs)
    }

    pub fn graphs_with_all_loops() -> Self {
        Self::builtin(AgeKind::GraphsWithAllLoops)
    }

    pub fn digraphs() -> Self {
        Self::builtin(AgeKind::Digraphs)
    }

    pub fn hypergraphs(k: usize) -> Result<Self> {
        Self::new(AgeKind::KUniformHypergraphs(k))
    }

    pub fn posets() -> Self {
        Self::builtin(AgeKind::Posets)
    }

    pub fn chains() -> Self {
        Self::builtin(AgeKind::Chains)
    }

    pub fn tournaments() -> Self {
        Self::builtin(AgeKind::Tournaments)
    }

    pub fn metric(grid: Vec<Q>) -> Result<Self> {
        Self::new(AgeKind::RationalMetricSpaces(grid))
    }

    pub fn forbidden(list: Vec<Structure>) -> Result<Self> {
        Self::new(AgeKind::ForbiddenSubstructures(list))
    }

    fn builtin(kind: AgeKind) -> Self {
        Self::new(kind).unwrap_or_else(|e| unreachable!("builtin class: {e}"))
    }

    /// Resolves CLI names such as `graphs`, `posets`, `hypergraphs-3`, `metric-11`.
    pub fn by_name(name: &str) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        let known = match lower.as_str() {
            "graphs" | "simple-graphs" | "rado" => Some(Self::simple_graphs()),
            "graphs-with-loops" | "loops" | "looped-graphs" => Some(Self::graphs_with_all_loops()),
            "digraphs" => Some(Self::digraphs()),
            "posets" => Some(Self::posets()),
            "chains" | "rationals" => Some(Self::chains()),
            "tournaments" => Some(Self::tournaments()),
            "metric" | "urysohn" => Some(Self::metric(integer_grid(DEFAULT_GRID_MAX))?),
            "hypergraphs" | "3-uniform-hypergraphs" => Some(Self::hypergraphs(3)?),
            _ => None,
        };
        if let Some(c) = known {
            return Ok(c);
        }
        let num = |prefix: &str| lower.strip_prefix(prefix).and_then(|r| r.parse::<i64>().ok());
        if let Some(k) = num("hypergraphs-") {
            if k >= 2 {
                return Self::hypergraphs(k as usize);
            }
        }
        if let Some(m) = num("metric-") {
            if m >= 1 {
                return Self::metric(integer_grid(m));
            }
        }
        Err(Error::UnknownAge(name.to_string()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &AgeKind {
        &self.kind
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn grid(&self) -> Option<&[Q]> {
        match &self.kind {
            AgeKind::RationalMetricSpaces(g) => Some(g),
            _ => None,
        }
    }

    pub fn thresholds(&self) -> Option<Vec<Q>> {
        self.grid().map(relcore::grid_thresholds)
    }

    /// Largest grid distance; cross distances of metric amalgams are capped by it.
    pub fn grid_cap(&self) -> Option<Q> {
        self.grid().and_then(|g| g.last().copied())
    }

    /// Free amalgamation (relations of an amalgam are the union of the parts).
    pub fn is_free(&self) -> bool {
        matches!(
            self.kind,
            AgeKind::SimpleGraphs
                | AgeKind::GraphsWithAllLoops
                | AgeKind::Digraphs
                | AgeKind::KUniformHypergraphs(_)
                | AgeKind::ForbiddenSubstructures(_)
        )
    }

    /// Amalgams are pushouts in the homomorphism category.
    pub fn is_strict(&self) -> bool {
        self.is_free() || self.kind == AgeKind::Posets
    }

    pub fn product_closed(&self) -> bool {
        !matches!(
            self.kind,
            AgeKind::Chains | AgeKind::Tournaments | AgeKind::ForbiddenSubstructures(_)
        )
    }

    /// Classes whose HAP witness is a hom-pushout followed by [`Self::close`].
    pub fn hap_constructive(&self) -> bool {
        self.is_strict()
    }

    /// Removing a symmetry orbit of tuples never leaves the class, so the
    /// least relation set containing the forced tuples is the best candidate.
    pub fn tuple_monotone(&self) -> bool {
        matches!(
            self.kind,
            AgeKind::SimpleGraphs | AgeKind::Digraphs | AgeKind::KUniformHypergraphs(_) | AgeKind::ForbiddenSubstructures(_)
        )
    }

    /// Known obstruction to polymorphism stages: `urysohn` or `chains`.
    pub fn obstruction(&self) -> Option<&'static str> {
        match self.kind {
            AgeKind::Chains => Some("chains"),
            AgeKind::RationalMetricSpaces(_) => Some("urysohn"),
            _ => None,
        }
    }

    /// Relations are closed under permuting tuple entries.
    pub fn symmetric(&self) -> bool {
        matches!(
            self.kind,
            AgeKind::SimpleGraphs | AgeKind::GraphsWithAllLoops | AgeKind::KUniformHypergraphs(_)
        )
    }

    pub fn contains(&self, s: &Structure) -> bool {
        self.membership(s).is_ok()
    }

    /// Ok, or the reason `s` is not a member.
    pub fn membership(&self, s: &Structure) -> Result<()> {
        if s.signature() != &self.signature {
            return Err(Error::not_in(&self.name, "signature differs"));
        }
        let fail = |why: String| Err(Error::not_in(&self.name, why));
        let n = s.size();
        let lbl = |x: Elem| s.label(x).to_string();
        match &self.kind {
            AgeKind::SimpleGraphs | AgeKind::GraphsWithAllLoops => {
                for t in s.relation(0).iter() {
                    if !s.holds(0, &[t[1], t[0]]) {
                        return fail(format!("edge {}→{} has no reverse", lbl(t[0]), lbl(t[1])));
                    }
                }
                let loops = self.kind == AgeKind::GraphsWithAllLoops;
                for x in 0..n {
                    if s.holds(0, &[x, x]) != loops {
                        return fail(format!("loop condition fails at {}", lbl(x)));
                    }
                }
            }
            AgeKind::Digraphs => {
                if let Some(x) = (0..n).find(|&x| s.holds(0, &[x, x])) {
                    return fail(format!("loop at {}", lbl(x)));
                }
            }
            AgeKind::Tournaments => {
                for x in 0..n {
                    if s.holds(0, &[x, x]) {
                        return fail(format!("loop at {}", lbl(x)));
                    }
                    for y in x + 1..n {
                        if s.holds(0, &[x, y]) == s.holds(0, &[y, x]) {
                            return fail(format!("pair {},{} is not oriented exactly once", lbl(x), lbl(y)));
                        }
                    }
                }
            }
            AgeKind::KUniformHypergraphs(_) => {
                for t in s.relation(0).iter() {
                    let distinct: BTreeSet<_> = t.iter().collect();
                    if distinct.len() != t.len() {
                        return fail(format!("hyperedge {t:?} repeats a vertex"));
                    }
                    let mut p = t.clone();
                    p.sort_unstable();
                    loop {
                        if !s.holds(0, &p) {
                            return fail(format!("hyperedge {t:?} is not closed under permutations"));
                        }
                        if !relcore::next_permutation(&mut p) {
                            break;
                        }
                    }
                }
            }
            AgeKind::Posets | AgeKind::Chains => {
                if let Some(why) = construct::poset_violation(s) {
                    return fail(why);
                }
                if self.kind == AgeKind::Chains {
                    for x in 0..n {
                        for y in x + 1..n {
                            if !s.holds(0, &[x, y]) && !s.holds(0, &[y, x]) {
                                return fail(format!("{} and {} are incomparable", lbl(x), lbl(y)));
                            }
                        }
                    }
                }
            }
            AgeKind::RationalMetricSpaces(grid) => {
                let m = relcore::decode_metric(s).map_err(|e| Error::not_in(&self.name, e.to_string()))?;
                for x in 0..n {
                    for y in x + 1..n {
                        if grid.binary_search(&m.d(x, y)).is_err() {
                            return fail(format!("distance {} off the grid", m.d(x, y)));
                        }
                    }
                }
                let ths = relcore::grid_thresholds(grid);
                if relcore::encode_metric(&m, &ths)? != *s {
                    return fail("threshold relations are not those of a metric".into());
                }
            }
            AgeKind::ForbiddenSubstructures(list) => {
                for (i, f) in list.iter().enumerate() {
                    if morph::find(f, s, Kind::Embedding)?.is_some() {
                        return fail(format!("contains forbidden structure #{i}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether an image tuple could ever occur in a member.
    pub fn local_tuple_ok(&self, t: &[Elem]) -> bool {
        match self.kind {
            AgeKind::SimpleGraphs | AgeKind::Digraphs | AgeKind::Tournaments => t[0] != t[1],
            AgeKind::KUniformHypergraphs(_) => t.iter().collect::<BTreeSet<_>>().len() == t.len(),
            _ => true,
        }
    }

    /// The class's amalgam of an instance.
    pub fn amalgam(&self, inst: &AmalgamInstance) -> Result<PushoutResult> {
        let po = match &self.kind {
            AgeKind::Posets => construct::poset_amalgam(inst)?,
            AgeKind::Chains => construct::chain_amalgam(inst)?,
            AgeKind::Tournaments => construct::tournament_amalgam(inst)?,
            AgeKind::RationalMetricSpaces(grid) => {
                let cap = *grid.last().ok_or_else(|| Error::Metric("empty grid".into()))?;
                construct::encoded_metric_amalgam(inst, &relcore::grid_thresholds(grid), cap)?
            }
            _ => construct::free_amalgam(inst)?,
        };
        self.membership(&po.c)
            .map_err(|e| Error::Amalgam(format!("{} amalgam left the class: {e}", self.name)))?;
        Ok(po)
    }

    /// Class closure of a relation set: order closure with collapse for
    /// posets and chains, identity otherwise. Returns the quotient map.
    pub fn close(&self, s: &Structure) -> Result<(Structure, Vec<Elem>)> {
        match self.kind {
            AgeKind::Posets | AgeKind::Chains => construct::poset_collapse(s),
            _ => Ok((s.clone(), (0..s.size()).collect())),
        }
    }

    pub fn empty(&self) -> Structure {
        Structure::empty(self.signature.clone())
    }

    fn metric_of(&self, s: &Structure) -> Result<MetricSpace> {
        relcore::decode_metric(s)
    }

    fn encode(&self, m: &MetricSpace) -> Result<Structure> {
        relcore::encode_metric(m, &self.thresholds().unwrap_or_default())
    }

    /// Every member extending `s` by one point, appended last with a fresh
    /// label. Deterministic order.
    pub fn one_point_extensions(&self, s: &Structure) -> Result<Vec<Structure>> {
        let n = s.size();
        let label = fresh_label(s);
        let mut labels = s.labels().to_vec();
        labels.push(label);
        let mut out = Vec::new();
        let mut push = |extra: Vec<Tuple>| -> Result<()> {
            let mut rels = s.code();
            rels[0].extend(extra);
            let t = Structure::new(self.signature.clone(), labels.clone(), rels)?;
            if self.contains(&t) {
                out.push(t);
            }
            Ok(())
        };
        let p = n;
        match &self.kind {
            AgeKind::SimpleGraphs | AgeKind::GraphsWithAllLoops => {
                let looped = self.kind == AgeKind::GraphsWithAllLoops;
                for mask in 0u64..(1 << n) {
                    let mut extra: Vec<Tuple> = Vec::new();
                    if looped {
                        extra.push(vec![p, p]);
                    }
                    for x in (0..n).filter(|x| mask >> x & 1 == 1) {
                        extra.push(vec![x, p]);
                        extra.push(vec![p, x]);
                    }
                    push(extra)?;
                }
            }
            AgeKind::Digraphs | AgeKind::Tournaments => {
                let choices: &[u8] = if self.kind == AgeKind::Tournaments { &[1, 2] } else { &[0, 1, 2, 3] };
                let mut pick = vec![0usize; n];
                loop {
                    let mut extra = Vec::new();
                    for (x, &c) in pick.iter().enumerate() {
                        let c = choices[c];
                        if c & 1 == 1 {
                            extra.push(vec![x, p]);
                        }
                        if c & 2 == 2 {
                            extra.push(vec![p, x]);
                        }
                    }
                    push(extra)?;
                    if !odometer(&mut pick, choices.len()) {
                        break;
                    }
                }
            }
            AgeKind::KUniformHypergraphs(k) => {
                let faces = subsets_of_size(n, k - 1);
                for mask in 0u64..(1 << faces.len()) {
                    let mut extra = Vec::new();
                    for (i, f) in faces.iter().enumerate() {
                        if mask >> i & 1 == 1 {
                            let mut e = f.clone();
                            e.push(p);
                            extra.extend(permutations(&e));
                        }
                    }
                    push(extra)?;
                }
            }
            AgeKind::Posets | AgeKind::Chains => {
                for down in 0u64..(1 << n) {
                    for up in 0u64..(1 << n) {
                        if down & up != 0 {
                            continue;
                        }
                        let mut extra = vec![vec![p, p]];
                        for x in 0..n {
                            if down >> x & 1 == 1 {
                                extra.push(vec![x, p]);
                            }
                            if up >> x & 1 == 1 {
                                extra.push(vec![p, x]);
                            }
                        }
                        push(extra)?;
                    }
                }
            }
            AgeKind::RationalMetricSpaces(grid) => {
                let m = self.metric_of(s)?;
                let mut pick = vec![0usize; n];
                loop {
                    let ds: Vec<Q> = pick.iter().map(|&i| grid[i]).collect();
                    if let Some(ext) = extend_metric(&m, &ds, &labels[n]) {
                        out.push(self.encode(&ext)?);
                    }
                    if !odometer(&mut pick, grid.len()) {
                        break;
                    }
                }
            }
            AgeKind::ForbiddenSubstructures(_) => {
                let slots = tuples_through(&self.signature, n + 1, p);
                if slots.len() > 20 {
                    return Err(Error::Precondition("too many tuple slots for a one-point extension".into()));
                }
                for mask in 0u64..(1 << slots.len()) {
                    let mut rels = s.code();
                    for (i, (sym, t)) in slots.iter().enumerate() {
                        if mask >> i & 1 == 1 {
                            rels[*sym].push(t.clone());
                        }
                    }
                    let t = Structure::new(self.signature.clone(), labels.clone(), rels)?;
                    if self.contains(&t) {
                        out.push(t);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Members up to iso with at most `max` elements, grouped by size; each
    /// list is sorted by canonical code.
    pub fn members(&self, max: usize) -> Result<Vec<Vec<Structure>>> {
        let mut levels = vec![vec![self.empty()]];
        for _ in 0..max {
            let mut next: BTreeMap<Code, Structure> = BTreeMap::new();
            for s in levels.last().into_iter().flatten() {
                for e in self.one_point_extensions(s)? {
                    let labels = (0..e.size()).map(|i| format!("x{i}")).collect();
                    let e = e.with_labels(labels)?;
                    next.entry(e.canonical_code()).or_insert(e);
                }
            }
            levels.push(next.into_values().collect());
        }
        Ok(levels)
    }

    /// A random member extending `u` by one point `p`, whose relations with the
    /// elements `over` are copied from `pattern` (an extension of
    /// `u.induced(over)` in the same element order, with the new point last).
    pub fn random_extension<R: Rng + ?Sized>(&self, u: &Structure, over: &[Elem], pattern: &Structure, rng: &mut R) -> Result<Structure> {
        let n = u.size();
        let k = over.len();
        if pattern.size() != k + 1 {
            return Err(Error::Precondition("pattern must add exactly one point".into()));
        }
        let mut in_a = vec![None; n];
        for (i, &x) in over.iter().enumerate() {
            in_a[x] = Some(i);
        }
        let mut labels = u.labels().to_vec();
        let mut label = pattern.label(k).to_string();
        while labels.contains(&label) {
            label = format!("{label}'");
        }
        labels.push(label.clone());
        let p = n;
        // Relations of the pattern that touch the new point, moved onto U.
        let lift = |x: Elem| if x == k { p } else { over[x] };
        let mut forced: Vec<Vec<Tuple>> = vec![Vec::new(); self.signature.len()];
        for (sym, rel) in pattern.relations().iter().enumerate() {
            for t in rel.iter().filter(|t| t.contains(&k)) {
                forced[sym].push(t.iter().map(|&x| lift(x)).collect());
            }
        }
        let others: Vec<Elem> = (0..n).filter(|&x| in_a[x].is_none()).collect();
        let build = |extra: Vec<Vec<Tuple>>| -> Result<Structure> {
            let mut rels = u.code();
            for (r, e) in rels.iter_mut().zip(extra) {
                r.extend(e);
            }
            Structure::new(self.signature.clone(), labels.clone(), rels)
        };
        let result = match &self.kind {
            AgeKind::SimpleGraphs | AgeKind::GraphsWithAllLoops | AgeKind::Digraphs | AgeKind::Tournaments => {
                let mut extra = forced;
                for &x in &others {
                    match self.kind {
                        AgeKind::Digraphs => {
                            if rng.gen_bool(0.5) {
                                extra[0].push(vec![x, p]);
                            }
                            if rng.gen_bool(0.5) {
                                extra[0].push(vec![p, x]);
                            }
                        }
                        AgeKind::Tournaments => {
                            if rng.gen_bool(0.5) {
                                extra[0].push(vec![x, p]);
                            } else {
                                extra[0].push(vec![p, x]);
                            }
                        }
                        _ => {
                            if rng.gen_bool(0.5) {
                                extra[0].push(vec![x, p]);
                                extra[0].push(vec![p, x]);
                            }
                        }
                    }
                }
                build(extra)?
            }
            AgeKind::KUniformHypergraphs(arity) => {
                let mut extra = forced;
                for face in subsets_of_size(n, arity - 1) {
                    if face.iter().any(|&x| in_a[x].is_none()) && rng.gen_bool(0.5) {
                        let mut e = face;
                        e.push(p);
                        extra[0].extend(permutations(&e));
                    }
                }
                build(extra)?
            }
            AgeKind::Posets => {
                let le = |x: Elem, y: Elem| u.holds(0, &[x, y]);
                let below_p = |x: Elem| forced[0].contains(&vec![x, p]);
                let above_p = |x: Elem| forced[0].contains(&vec![p, x]);
                let mut down: BTreeSet<Elem> = (0..n).filter(|&x| over.iter().any(|&a| below_p(a) && le(x, a))).collect();
                let mut up: BTreeSet<Elem> = (0..n).filter(|&x| over.iter().any(|&a| above_p(a) && le(a, x))).collect();
                let mut order = others.clone();
                order.shuffle(rng);
                for x in order {
                    if down.contains(&x) || up.contains(&x) {
                        continue;
                    }
                    match rng.gen_range(0..3) {
                        0 => {
                            let cone: Vec<Elem> = (0..n).filter(|&y| le(y, x)).collect();
                            let ok = up.iter().all(|&w| le(x, w))
                                && cone.iter().all(|&y| in_a[y].is_none_or(|_| below_p(y)));
                            if ok {
                                down.extend(cone);
                            }
                        }
                        1 => {
                            let cone: Vec<Elem> = (0..n).filter(|&y| le(x, y)).collect();
                            let ok = down.iter().all(|&w| le(w, x))
                                && cone.iter().all(|&y| in_a[y].is_none_or(|_| above_p(y)));
                            if ok {
                                up.extend(cone);
                            }
                        }
                        _ => {}
                    }
                }
                let mut extra = vec![vec![vec![p, p]]];
                extra[0].extend(down.iter().map(|&x| vec![x, p]));
                extra[0].extend(up.iter().map(|&x| vec![p, x]));
                build(extra)?
            }
            AgeKind::Chains => {
                // Rank of the gap in U; the pattern fixes which elements of A lie below.
                let mut sorted: Vec<Elem> = (0..n).collect();
                sorted.sort_by_key(|&x| (0..n).filter(|&y| u.holds(0, &[y, x])).count());
                let below_a: Vec<bool> = over.iter().map(|&a| forced[0].contains(&vec![a, p])).collect();
                let valid: Vec<usize> = (0..=n)
                    .filter(|&cut| {
                        over.iter()
                            .zip(&below_a)
                            .all(|(&a, &b)| sorted[..cut].contains(&a) == b)
                    })
                    .collect();
                let &cut = valid
                    .as_slice()
                    .choose(rng)
                    .ok_or_else(|| Error::Amalgam("pattern does not fit the chain".into()))?;
                let mut extra = vec![vec![vec![p, p]]];
                extra[0].extend(sorted[..cut].iter().map(|&x| vec![x, p]));
                extra[0].extend(sorted[cut..].iter().map(|&x| vec![p, x]));
                build(extra)?
            }
            AgeKind::RationalMetricSpaces(grid) => {
                let mu = self.metric_of(u)?;
                let mp = self.metric_of(pattern)?;
                let mut d: Vec<Option<Q>> = vec![None; n];
                for (i, &a) in over.iter().enumerate() {
                    d[a] = Some(mp.d(i, k));
                }
                let mut order = others.clone();
                order.shuffle(rng);
                for x in order {
                    let (mut lo, mut hi) = (Q::zero(), *grid.last().unwrap_or(&Q::zero()));
                    for (y, dy) in d.iter().enumerate() {
                        if let Some(dy) = dy {
                            let dxy = mu.d(x, y);
                            lo = lo.max(if *dy > dxy { *dy - dxy } else { dxy - *dy });
                            hi = hi.min(*dy + dxy);
                        }
                    }
                    let fits: Vec<Q> = grid.iter().copied().filter(|&r| r >= lo && r <= hi).collect();
                    let &r = fits
                        .as_slice()
                        .choose(rng)
                        .ok_or_else(|| Error::Amalgam(format!("no grid distance fits between {lo} and {hi}")))?;
                    d[x] = Some(r);
                }
                let ds: Vec<Q> = d.into_iter().map(|v| v.unwrap_or_default()).collect();
                let ext = extend_metric(&mu, &ds, &label)
                    .ok_or_else(|| Error::Amalgam("random metric extension is not a metric".into()))?;
                self.encode(&ext)?
            }
            AgeKind::ForbiddenSubstructures(_) => build(forced)?,
        };
        self.membership(&result)
            .map_err(|e| Error::Amalgam(format!("random extension left the class: {e}")))?;
        if result.induced(&(0..n).collect::<Vec<_>>()) != *u {
            return Err(Error::Amalgam("random extension changed the old part".into()));
        }
        Ok(result)
    }

    /// A random member on `size` points, built by one-point extensions over nothing.
    pub fn random_member<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Structure> {
        let mut s = self.empty();
        let point = self
            .one_point_extensions(&self.empty())?
            .into_iter()
            .next()
            .ok_or_else(|| Error::Precondition(format!("{} has no one-point member", self.name)))?;
        for i in 0..size {
            let pattern = point.with_labels(vec![format!("x{i}")])?;
            s = self.random_extension(&s, &[], &pattern, rng)?;
        }
        Ok(s)
    }
}

fn integer_max(grid: &[Q]) -> Option<i64> {
    let max = grid.iter().max()?;
    let ints = integer_grid(*max.numer());
    (max.is_integer() && grid == ints.as_slice()).then(|| *max.numer())
}

pub(crate) fn fresh_label(s: &Structure) -> String {
    let mut i = s.size();
    loop {
        let l = format!("x{i}");
        if s.index_of(&l).is_none() {
            return l;
        }
        i += 1;
    }
}

fn odometer(pick: &mut [usize], base: usize) -> bool {
    for slot in pick.iter_mut().rev() {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}

pub(crate) fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<Elem>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<Elem>, out: &mut Vec<Vec<Elem>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in start..n {
            cur.push(x);
            rec(x + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

pub(crate) fn permutations(t: &[Elem]) -> Vec<Tuple> {
    let mut p = t.to_vec();
    p.sort_unstable();
    let mut out = vec![p.clone()];
    while relcore::next_permutation(&mut p) {
        out.push(p.clone());
    }
    out
}

/// All (symbol, tuple) over `0..size` that mention `p`.
fn tuples_through(sig: &Signature, size: usize, p: Elem) -> Vec<(usize, Tuple)> {
    let mut out = Vec::new();
    for sym in 0..sig.len() {
        for t in construct::all_tuples(size, sig.arity(sym)) {
            if t.contains(&p) {
                out.push((sym, t));
            }
        }
    }
    out
}

/// `m` plus one point at the given distances, if that is a metric.
fn extend_metric(m: &MetricSpace, ds: &[Q], label: &str) -> Option<MetricSpace> {
    let n = m.size();
    let mut dist = vec![vec![Q::zero(); n + 1]; n + 1];
    for x in 0..n {
        for y in 0..n {
            dist[x][y] = m.d(x, y);
        }
        dist[x][n] = ds[x];
        dist[n][x] = ds[x];
    }
    let mut labels = m.labels().to_vec();
    labels.push(label.to_string());
    MetricSpace::new(labels, dist).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn counts(c: &AgeDescriptor, max: usize) -> Vec<usize> {
        c.members(max).unwrap().iter().map(|l| l.len()).collect()
    }

    #[test]
    fn member_counts_match_known_sequences() {
        assert_eq!(counts(&AgeDescriptor::simple_graphs(), 4), vec![1, 1, 2, 4, 11]);
        assert_eq!(counts(&AgeDescriptor::posets(), 4), vec![1, 1, 2, 5, 16]);
        assert_eq!(counts(&AgeDescriptor::chains(), 3), vec![1, 1, 1, 1]);
        assert_eq!(counts(&AgeDescriptor::tournaments(), 4), vec![1, 1, 1, 2, 4]);
        assert_eq!(counts(&AgeDescriptor::digraphs(), 3), vec![1, 1, 3, 16]);
        assert_eq!(counts(&AgeDescriptor::graphs_with_all_loops(), 3), vec![1, 1, 2, 4]);
        assert_eq!(counts(&AgeDescriptor::hypergraphs(3).unwrap(), 4), vec![1, 1, 1, 2, 5]);
    }

    #[test]
    fn metric_members_on_small_grid() {
        let c = AgeDescriptor::metric(integer_grid(2)).unwrap();
        // Triangles with sides in {1,2}: 111, 112, 122, 222.
        assert_eq!(counts(&c, 3), vec![1, 1, 2, 4]);
    }

    #[test]
    fn names_resolve() {
        for n in ["graphs", "graphs-with-loops", "posets", "chains", "metric", "hypergraphs-3", "metric-11", "tournaments", "digraphs"] {
            assert!(AgeDescriptor::by_name(n).is_ok(), "{n}");
        }
        assert!(matches!(AgeDescriptor::by_name("nope"), Err(Error::UnknownAge(_))));
        assert_eq!(AgeDescriptor::by_name("metric-11").unwrap().grid_cap(), Some(Q::from_integer(11)));
    }

    #[test]
    fn members_are_hereditary() {
        for c in [AgeDescriptor::simple_graphs(), AgeDescriptor::posets(), AgeDescriptor::tournaments()] {
            for level in c.members(4).unwrap() {
                for s in level {
                    assert!(c.contains(&s));
                    for drop in 0..s.size() {
                        let keep: Vec<Elem> = (0..s.size()).filter(|&x| x != drop).collect();
                        assert!(c.contains(&s.induced(&keep)));
                    }
                }
            }
        }
    }

    #[test]
    fn random_members_are_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for c in [
            AgeDescriptor::simple_graphs(),
            AgeDescriptor::graphs_with_all_loops(),
            AgeDescriptor::digraphs(),
            AgeDescriptor::hypergraphs(3).unwrap(),
            AgeDescriptor::posets(),
            AgeDescriptor::chains(),
            AgeDescriptor::tournaments(),
            AgeDescriptor::metric(integer_grid(10)).unwrap(),
        ] {
            for size in 0..6 {
                let s = c.random_member(size, &mut rng).unwrap();
                assert_eq!(s.size(), size);
                assert!(c.contains(&s), "{c}: {s:?}");
            }
        }
    }

    #[test]
    fn forbidden_triangle_class() {
        let tri = Structure::build(
            Signature::binary("E"),
            &["a", "b", "c"],
            &[("E", &["a", "b"]), ("E", &["b", "c"]), ("E", &["a", "c"])],
        )
        .unwrap();
        let c = AgeDescriptor::forbidden(vec![tri.clone()]).unwrap();
        assert!(!c.contains(&tri));
        assert!(c.contains(&tri.induced(&[0, 1])));
    }
}
