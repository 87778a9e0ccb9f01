//! Bounded witness search: extending a partial map into a grown target, and
//! completing glued carriers to class members.

use std::collections::BTreeSet;

use num_traits::Zero;

use super::age::{permutations, AgeDescriptor, AgeKind};
use crate::error::{Error, Result};
use crate::morph::{self, Kind};
use crate::relcore::{self, Elem, MetricSpace, Structure, Tuple, Q};

/// Cap on the number of free tuple orbits a completion may range over.
pub const MAX_COMPLETION_SLOTS: usize = 16;

/// Resource limits shared by the searches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    /// Largest amalgam carrier.
    pub max_c: usize,
    /// Largest grown target.
    pub max_t: usize,
    /// Search nodes per extension problem.
    pub nodes: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_c: 4,
            max_t: 30,
            nodes: 2_000_000,
        }
    }
}

/// A grown target `T' ⊇ T` with `h: src → T'` and the inclusion `k: T ↪ T'`.
#[derive(Clone, Debug)]
pub struct Extension {
    pub t: Structure,
    pub h: Vec<Elem>,
    pub k: Vec<Elem>,
}

#[derive(Clone, Debug)]
pub enum ExtendOutcome {
    Found(Extension),
    /// The prescribed values already break a tuple inside the target.
    FixedNotHom { symbol: String, tuple: Vec<String> },
    Exhausted { nodes: u64 },
    BudgetHit { nodes: u64 },
}

struct Engine<'a> {
    class: &'a AgeDescriptor,
    src: &'a Structure,
    tgt: &'a Structure,
    order: Vec<Elem>,
    closes: Vec<Vec<(usize, &'a Tuple)>>,
    max_fresh: usize,
    node_budget: u64,
    nodes: u64,
    hit_budget: bool,
}

impl<'a> Engine<'a> {
    fn close_ok(&self, asg: &[Elem], depth: usize) -> bool {
        let nt = self.tgt.size();
        self.closes[depth].iter().all(|&(sym, t)| {
            let img: Tuple = t.iter().map(|&x| asg[x]).collect();
            if img.iter().all(|&y| y < nt) {
                self.tgt.holds(sym, &img)
            } else {
                self.class.local_tuple_ok(&img)
            }
        })
    }

    fn dfs(&mut self, asg: &mut Vec<Elem>, fresh: usize, depth: usize) -> Option<Extension> {
        if self.nodes >= self.node_budget {
            self.hit_budget = true;
            return None;
        }
        self.nodes += 1;
        if depth == self.order.len() {
            return self.finish(asg, fresh);
        }
        let x = self.order[depth];
        let nt = self.tgt.size();
        let mut values: Vec<(Elem, usize)> = Vec::with_capacity(nt + fresh + 1);
        if fresh < self.max_fresh {
            values.push((nt + fresh, fresh + 1));
        }
        values.extend((0..fresh).map(|i| (nt + i, fresh)));
        values.extend((0..nt).map(|y| (y, fresh)));
        for (y, f) in values {
            asg[x] = y;
            if self.close_ok(asg, depth + 1) {
                if let Some(e) = self.dfs(asg, f, depth + 1) {
                    return Some(e);
                }
                if self.hit_budget {
                    return None;
                }
            }
        }
        asg[x] = usize::MAX;
        None
    }

    fn finish(&mut self, asg: &[Elem], fresh: usize) -> Option<Extension> {
        let nt = self.tgt.size();
        let mut labels = self.tgt.labels().to_vec();
        let mut used: BTreeSet<String> = labels.iter().cloned().collect();
        for i in 0..fresh {
            let x = asg.iter().position(|&y| y == nt + i).unwrap_or(0);
            let mut l = format!("[{}]", self.src.label(x));
            while used.contains(&l) {
                l.push('\'');
            }
            used.insert(l.clone());
            labels.push(l);
        }
        let mut rels = self.tgt.code();
        for (sym, r) in self.src.relations().iter().enumerate() {
            rels[sym].extend(r.iter().map(|t| t.iter().map(|&x| asg[x]).collect::<Tuple>()));
        }
        let raw = Structure::new(self.tgt.signature().clone(), labels, rels).ok()?;
        let (closed, q) = self.class.close(&raw).ok()?;
        let k: Vec<Elem> = (0..nt).map(|y| q[y]).collect();
        if !morph::is_valid(self.tgt, &closed, &k, Kind::Embedding) {
            return None;
        }
        let h: Vec<Elem> = asg.iter().map(|&y| q[y]).collect();
        let fresh_points: Vec<Elem> = (0..closed.size()).filter(|p| !k.contains(p)).collect();
        if self.class.contains(&closed) {
            return Some(Extension { t: closed, h, k });
        }
        if self.class.tuple_monotone() || matches!(self.class.kind(), AgeKind::Posets | AgeKind::GraphsWithAllLoops) {
            return None;
        }
        let touches = |t: &Tuple| t.iter().any(|x| fresh_points.contains(x));
        let done = completions(self.class, &closed, &touches, None).ok()?;
        let t = done.into_iter().find(|t| morph::is_valid(self.tgt, t, &k, Kind::Embedding))?;
        if !morph::is_valid(self.src, &t, &h, Kind::Hom) {
            return None;
        }
        Some(Extension { t, h, k })
    }
}

/// Finds `T' ⊇ T` (at most `max_size` points) and a hom `h: src → T'`
/// extending `fixed`, with `T` an induced substructure of `T'`.
///
/// Unfixed points try a new point first, then earlier new points, then
/// points of `T`. `T'` carries the least relations containing `T` and the
/// image of `src`, closed in the class; classes where that is not already a
/// member get their free tuples completed.
pub fn extend_into(
    class: &AgeDescriptor,
    src: &Structure,
    fixed: &[Option<Elem>],
    tgt: &Structure,
    max_size: usize,
    node_budget: u64,
) -> Result<ExtendOutcome> {
    if src.signature() != tgt.signature() {
        return Err(Error::SignatureMismatch("extension problem".into()));
    }
    let n = src.size();
    let mut asg = vec![usize::MAX; n];
    for (x, v) in fixed.iter().enumerate().take(n) {
        if let Some(y) = v {
            if *y >= tgt.size() {
                return Err(Error::IndexOutOfRange(*y));
            }
            asg[x] = *y;
        }
    }
    let is_fixed: Vec<bool> = asg.iter().map(|&y| y != usize::MAX).collect();
    for (sym, r) in src.relations().iter().enumerate() {
        for t in r.iter().filter(|t| t.iter().all(|&x| is_fixed[x])) {
            let img: Tuple = t.iter().map(|&x| asg[x]).collect();
            if !tgt.holds(sym, &img) {
                return Ok(ExtendOutcome::FixedNotHom {
                    symbol: src.signature().symbols()[sym].name.clone(),
                    tuple: t.iter().map(|&x| src.label(x).to_string()).collect(),
                });
            }
        }
    }
    let mut order: Vec<Elem> = (0..n).filter(|&x| !is_fixed[x]).collect();
    let deg: Vec<usize> = (0..n).map(|x| src.degree(x)).collect();
    order.sort_by_key(|&x| (std::cmp::Reverse(deg[x]), x));
    let mut pos = vec![0usize; n];
    for (d, &x) in order.iter().enumerate() {
        pos[x] = d + 1;
    }
    let mut closes = vec![Vec::new(); order.len() + 1];
    for (sym, r) in src.relations().iter().enumerate() {
        for t in r.iter() {
            let last = t.iter().map(|&x| pos[x]).max().unwrap_or(0);
            if last > 0 {
                closes[last].push((sym, t));
            }
        }
    }
    let mut eng = Engine {
        class,
        src,
        tgt,
        order,
        closes,
        max_fresh: max_size.saturating_sub(tgt.size()),
        node_budget,
        nodes: 0,
        hit_budget: false,
    };
    let found = eng.dfs(&mut asg, 0, 0);
    Ok(match found {
        Some(e) => ExtendOutcome::Found(e),
        None if eng.hit_budget => ExtendOutcome::BudgetHit { nodes: eng.nodes },
        None => ExtendOutcome::Exhausted { nodes: eng.nodes },
    })
}

/// Members obtained from `base` by adding tuples for which `free` holds, in
/// order of the added set (the empty addition first). For metric classes the
/// free pairs are the pairs whose distance is still open.
pub fn completions(
    class: &AgeDescriptor,
    base: &Structure,
    free: &dyn Fn(&Tuple) -> bool,
    limit: Option<usize>,
) -> Result<Vec<Structure>> {
    if let AgeKind::RationalMetricSpaces(grid) = class.kind() {
        return metric_completions(class, grid, base, free, limit);
    }
    let mut slots: Vec<(usize, Vec<Tuple>)> = Vec::new();
    let mut seen: BTreeSet<(usize, Tuple)> = BTreeSet::new();
    for sym in 0..base.signature().len() {
        let ar = base.signature().arity(sym);
        for t in crate::construct::all_tuples(base.size(), ar) {
            if !free(&t) || base.holds(sym, &t) || seen.contains(&(sym, t.clone())) || !class.local_tuple_ok(&t) {
                continue;
            }
            let orbit: Vec<Tuple> = if class.symmetric() {
                let mut o = permutations(&t);
                o.dedup();
                o
            } else {
                vec![t.clone()]
            };
            for u in &orbit {
                seen.insert((sym, u.clone()));
            }
            slots.push((sym, orbit));
        }
    }
    if slots.len() > MAX_COMPLETION_SLOTS {
        return Err(Error::Precondition(format!(
            "{} free tuple orbits exceed the completion cap {MAX_COMPLETION_SLOTS}",
            slots.len()
        )));
    }
    let limit = limit.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    let mut masks: Vec<u32> = (0..1u32 << slots.len()).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for mask in masks {
        if out.len() >= limit {
            break;
        }
        let mut rels = base.code();
        for (i, (sym, orbit)) in slots.iter().enumerate() {
            if mask >> i & 1 == 1 {
                rels[*sym].extend(orbit.iter().cloned());
            }
        }
        let s = Structure::new(base.signature().clone(), base.labels().to_vec(), rels)?;
        if class.contains(&s) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Metric version: known distances are read off `base` on pairs that are not
/// free; tuples of `base` on free pairs act as strict upper bounds.
fn metric_completions(
    class: &AgeDescriptor,
    grid: &[Q],
    base: &Structure,
    free: &dyn Fn(&Tuple) -> bool,
    limit: Option<usize>,
) -> Result<Vec<Structure>> {
    let n = base.size();
    let ths: Vec<(Q, usize)> = base
        .signature()
        .symbols()
        .iter()
        .enumerate()
        .filter_map(|(i, s)| relcore::parse_threshold(&s.name).map(|r| (r, i)))
        .collect();
    let below = |x: Elem, y: Elem| -> Option<Q> {
        ths.iter()
            .filter(|&&(_, i)| base.holds(i, &[x, y]))
            .map(|&(r, _)| r)
            .min()
    };
    let known = |x: Elem, y: Elem| -> Option<Q> {
        ths.iter()
            .filter(|&&(_, i)| !base.holds(i, &[x, y]))
            .map(|&(r, _)| r)
            .max()
    };
    let mut open: Vec<(Elem, Elem, Vec<Q>)> = Vec::new();
    let mut dist = vec![vec![Q::zero(); n]; n];
    for x in 0..n {
        for y in x + 1..n {
            if free(&vec![x, y]) || free(&vec![y, x]) {
                let cap = below(x, y);
                let vals: Vec<Q> = grid.iter().copied().filter(|&r| cap.is_none_or(|c| r < c)).collect();
                open.push((x, y, vals));
            } else {
                let d = known(x, y).ok_or_else(|| Error::Metric("pair below every threshold".into()))?;
                dist[x][y] = d;
                dist[y][x] = d;
            }
        }
    }
    let combos: u128 = open.iter().map(|(_, _, v)| v.len() as u128).product();
    if combos > 200_000 {
        return Err(Error::Precondition(format!("{combos} metric completions exceed the cap")));
    }
    let limit = limit.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    let mut pick = vec![0usize; open.len()];
    if open.iter().any(|(_, _, v)| v.is_empty()) {
        return Ok(out);
    }
    let ths_all = class.thresholds().unwrap_or_default();
    loop {
        for (i, (x, y, vals)) in open.iter().enumerate() {
            dist[*x][*y] = vals[pick[i]];
            dist[*y][*x] = vals[pick[i]];
        }
        if let Ok(m) = MetricSpace::new(base.labels().to_vec(), dist.clone()) {
            let s = relcore::encode_metric(&m, &ths_all)?;
            if class.contains(&s) {
                out.push(s);
                if out.len() >= limit {
                    break;
                }
            }
        }
        let mut j = pick.len();
        let mut carry = true;
        while carry && j > 0 {
            j -= 1;
            pick[j] += 1;
            if pick[j] < open[j].2.len() {
                carry = false;
            } else {
                pick[j] = 0;
            }
        }
        if carry {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relcore::Signature;

    fn edge() -> Structure {
        Structure::build(Signature::binary("E"), &["x", "y"], &[("E", &["x", "y"]), ("E", &["y", "x"])]).unwrap()
    }

    #[test]
    fn edge_into_point_needs_a_new_point() {
        let graphs = AgeDescriptor::simple_graphs();
        let pt = Structure::build(Signature::binary("E"), &["o"], &[]).unwrap();
        let out = extend_into(&graphs, &edge(), &[Some(0), None], &pt, 2, 1000).unwrap();
        let ExtendOutcome::Found(e) = out else { panic!("{out:?}") };
        assert_eq!(e.t.size(), 2);
        assert!(morph::is_valid(&edge(), &e.t, &e.h, Kind::Hom));
        let out = extend_into(&graphs, &edge(), &[Some(0), None], &pt, 1, 1000).unwrap();
        assert!(matches!(out, ExtendOutcome::Exhausted { .. }));
    }

    #[test]
    fn fixed_part_breaking_target_is_reported() {
        let graphs = AgeDescriptor::simple_graphs();
        let two = Structure::build(Signature::binary("E"), &["p", "q"], &[]).unwrap();
        let out = extend_into(&graphs, &edge(), &[Some(0), Some(1)], &two, 4, 1000).unwrap();
        assert!(matches!(out, ExtendOutcome::FixedNotHom { .. }));
    }

    #[test]
    fn graph_completions_of_two_points() {
        let graphs = AgeDescriptor::simple_graphs();
        let two = Structure::build(Signature::binary("E"), &["p", "q"], &[]).unwrap();
        let all = completions(&graphs, &two, &|_| true, None).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0], two);
    }

    #[test]
    fn tournament_completion_orients_each_pair() {
        let t = AgeDescriptor::tournaments();
        let three = Structure::build(Signature::binary("E"), &["p", "q", "r"], &[("E", &["p", "q"])]).unwrap();
        let all = completions(&t, &three, &|_| true, None).unwrap();
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn metric_completion_respects_triangles() {
        let c = AgeDescriptor::metric(super::super::age::integer_grid(3)).unwrap();
        let m = MetricSpace::from_pairs(&["a", "u", "v"], &[("a", "u", Q::from_integer(1)), ("a", "v", Q::from_integer(1)), ("u", "v", Q::from_integer(1))]).unwrap();
        let s = relcore::encode_metric(&m, &c.thresholds().unwrap()).unwrap();
        let (u, v) = (1, 2);
        let open = |t: &Tuple| (t[0] == u && t[1] == v) || (t[0] == v && t[1] == u);
        // Strip the u-v pair down to "unknown" by keeping the base tuples; d(u,v) ∈ {1,2}.
        let all = completions(&c, &s, &open, None).unwrap();
        assert!(!all.is_empty());
        for t in &all {
            let d = relcore::decode_metric(t).unwrap().d(u, v);
            assert!(d <= Q::from_integer(2));
        }
    }
}
