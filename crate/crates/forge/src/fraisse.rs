//! Finite approximations of Fraïssé limits.
//!
//! A builder keeps the unsatisfied one-point extension tasks of its current
//! structure `U` in dovetailing order `(|A|, A, code of B)` and repairs the
//! first one per step by a randomized amalgam of `U` and `B` over `A`. The
//! old carrier is always a prefix of the new one.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::ageprops::age::{subsets_of_size, AgeDescriptor};
use crate::construct::AmalgamInstance;
use crate::error::{Error, Result};
use crate::morph::{self, Kind};
use crate::par;
use crate::relcore::{Code, Elem, Structure, Tuple};

pub const DEFAULT_MAX_TASK: usize = 2;

/// A subset `A` of the current carrier and a one-point extension `B` of
/// `U[A]`, whose last point is the new one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionTask {
    pub a: Vec<Elem>,
    pub b: Structure,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct TaskKey {
    size: usize,
    a: Vec<Elem>,
    code: Code,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EntryKind {
    Extend,
    Realize,
    Absorb,
}

impl EntryKind {
    fn as_str(&self) -> &'static str {
        match self {
            EntryKind::Extend => "extend",
            EntryKind::Realize => "realize",
            EntryKind::Absorb => "absorb",
        }
    }
}

/// One growth event of `U`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub step: u64,
    pub kind: EntryKind,
    /// Labels of `A` for an extension step.
    pub over: Vec<String>,
    pub added: Vec<String>,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied(TranscriptEntry),
    /// Every task up to the size bound is satisfied.
    Idle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certification {
    pub k: usize,
    pub holds: bool,
    pub failing: Option<ExtensionTask>,
    pub checked: u64,
}

#[derive(Clone, Debug)]
pub struct LimitBuilder {
    class: AgeDescriptor,
    u: Structure,
    seed: u64,
    rng: ChaCha8Rng,
    max_task: usize,
    pending: BTreeMap<TaskKey, Structure>,
    covered: usize,
    seeded: bool,
    extensions: BTreeMap<(usize, Code), Vec<Structure>>,
    transcript: Vec<TranscriptEntry>,
    steps: u64,
    idle_steps: u64,
}

impl LimitBuilder {
    /// Builder starting from the empty structure.
    pub fn new(class: AgeDescriptor, seed: u64) -> Result<Self> {
        let u = class.empty();
        Self::from_member(class, u, seed)
    }

    /// Builder starting from any member of the class.
    pub fn from_member(class: AgeDescriptor, u: Structure, seed: u64) -> Result<Self> {
        class.membership(&u)?;
        let mut b = LimitBuilder {
            class,
            u,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_task: DEFAULT_MAX_TASK,
            pending: BTreeMap::new(),
            covered: 0,
            seeded: false,
            extensions: BTreeMap::new(),
            transcript: Vec::new(),
            steps: 0,
            idle_steps: 0,
        };
        b.refresh()?;
        Ok(b)
    }

    /// Bounds `|A|` for the dovetailed tasks; `k - 1` suffices for the
    /// `k`-extension property.
    pub fn with_max_task(mut self, max_task: usize) -> Result<Self> {
        self.max_task = max_task;
        self.pending.clear();
        self.covered = 0;
        self.seeded = false;
        self.refresh()?;
        Ok(self)
    }

    pub fn class(&self) -> &AgeDescriptor {
        &self.class
    }

    pub fn current(&self) -> &Structure {
        &self.u
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_task(&self) -> usize {
        self.max_task
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn idle_steps(&self) -> u64 {
        self.idle_steps
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// The next task in dovetailing order, if any.
    pub fn next_task(&self) -> Option<ExtensionTask> {
        self.pending.iter().next().map(|(k, b)| ExtensionTask {
            a: k.a.clone(),
            b: b.clone(),
        })
    }

    fn extensions_of(&mut self, a: &[Elem]) -> Result<Vec<Structure>> {
        let s = self.u.induced(a);
        let code = (a.len(), s.code());
        if let Some(v) = self.extensions.get(&code) {
            return Ok(v.clone());
        }
        let v = self.class.one_point_extensions(&s)?;
        self.extensions.insert(code, v.clone());
        Ok(v)
    }

    /// Whether `y` realizes `b` over `a`: every tuple through the new point agrees.
    fn realizes(u: &Structure, a: &[Elem], b: &Structure, y: Elem) -> bool {
        if a.contains(&y) {
            return false;
        }
        let s = a.len();
        let lift = |i: Elem| if i == s { y } else { a[i] };
        for sym in 0..b.signature().len() {
            let ar = b.signature().arity(sym);
            for t in crate::construct::all_tuples(s + 1, ar) {
                if !t.contains(&s) {
                    continue;
                }
                let img: Tuple = t.iter().map(|&i| lift(i)).collect();
                if b.holds(sym, &t) != u.holds(sym, &img) {
                    return false;
                }
            }
        }
        true
    }

    /// Brings the pending set up to date with points added since the last call.
    fn refresh(&mut self) -> Result<()> {
        if self.covered == 0 && !self.seeded {
            for b in self.extensions_of(&[])? {
                self.pending.insert(TaskKey { size: 0, a: Vec::new(), code: b.code() }, b);
            }
            self.seeded = true;
        }
        while self.covered < self.u.size() {
            let p = self.covered;
            let u = &self.u;
            self.pending.retain(|k, b| !Self::realizes(u, &k.a, b, p));
            for size in 1..=self.max_task.min(p + 1) {
                for rest in subsets_of_size(p, size - 1) {
                    let mut a = rest;
                    a.push(p);
                    for b in self.extensions_of(&a)? {
                        let u = &self.u;
                        if !(0..=p).any(|y| Self::realizes(u, &a, &b, y)) {
                            self.pending.insert(TaskKey { size, a: a.clone(), code: b.code() }, b);
                        }
                    }
                }
            }
            self.covered += 1;
        }
        Ok(())
    }

    /// Applies the next pending task, or idles once none is left.
    pub fn step(&mut self) -> Result<StepOutcome> {
        self.steps += 1;
        let Some((key, b)) = self.pending.iter().next().map(|(k, b)| (k.clone(), b.clone())) else {
            self.idle_steps += 1;
            return Ok(StepOutcome::Idle);
        };
        let n = self.u.size();
        let mut labels = b.labels().to_vec();
        labels[key.size] = crate::ageprops::age::fresh_label(&self.u);
        let pattern = b.with_labels(labels)?;
        let next = self.class.random_extension(&self.u, &key.a, &pattern, &mut self.rng)?;
        debug_assert!(Self::realizes(&next, &key.a, &b, n));
        self.u = next;
        self.refresh()?;
        let entry = TranscriptEntry {
            step: self.steps,
            kind: EntryKind::Extend,
            over: key.a.iter().map(|&x| self.u.label(x).to_string()).collect(),
            added: vec![self.u.label(n).to_string()],
            size: self.u.size(),
        };
        self.transcript.push(entry.clone());
        Ok(StepOutcome::Applied(entry))
    }

    /// Runs `count` steps; returns how many applied an amalgam.
    pub fn run(&mut self, count: u64) -> Result<u64> {
        let mut applied = 0;
        for _ in 0..count {
            if let StepOutcome::Applied(_) = self.step()? {
                applied += 1;
            }
        }
        Ok(applied)
    }

    /// Runs until idle or `max_steps`; returns whether it saturated.
    pub fn saturate(&mut self, max_steps: u64) -> Result<bool> {
        for _ in 0..max_steps {
            if self.pending.is_empty() {
                return Ok(true);
            }
            self.step()?;
        }
        Ok(self.pending.is_empty())
    }

    /// An embedding of `s` into `U`, growing `U` by a joint embedding over
    /// the empty structure when there is none yet.
    pub fn realize(&mut self, s: &Structure) -> Result<Vec<Elem>> {
        self.realize_over(s, &[])
    }

    /// As [`Self::realize`], with `s`-points in `shared` pinned to `U`-points.
    pub fn realize_over(&mut self, s: &Structure, shared: &[(Elem, Elem)]) -> Result<Vec<Elem>> {
        self.class.membership(s)?;
        let mut partial = vec![None; s.size()];
        for &(x, y) in shared {
            if x >= s.size() || y >= self.u.size() {
                return Err(Error::IndexOutOfRange(x.max(y)));
            }
            partial[x] = Some(y);
        }
        match morph::enumerate_extensions(s, &self.u, &partial, Kind::Embedding, Some(1)) {
            Ok(found) => {
                if let Some(m) = found.into_iter().next() {
                    return Ok(m.map);
                }
            }
            Err(Error::PartialViolates { violation, .. }) => {
                return Err(Error::Precondition(format!("shared part does not embed: {violation}")));
            }
            Err(e) => return Err(e),
        }
        let s_pts: Vec<Elem> = shared.iter().map(|&(x, _)| x).collect();
        let u_pts: Vec<Elem> = shared.iter().map(|&(_, y)| y).collect();
        let a = s.induced(&s_pts);
        let inst = AmalgamInstance::new(a, self.u.clone(), s.clone(), u_pts, s_pts)?;
        let po = self.class.amalgam(&inst)?;
        let old = self.u.size();
        let (t, q) = self.prefix_order(&po.c, &po.g1)?;
        self.install(t, old, EntryKind::Realize, Vec::new())?;
        Ok(po.g2.iter().map(|&x| q[x]).collect())
    }

    /// Replaces `U` by `t`, given an embedding `k: U ↪ t`. Points of `t`
    /// are renumbered so that `k` becomes the identity on the old prefix;
    /// the renumbering `t → U'` is returned.
    pub fn absorb(&mut self, t: &Structure, k: &[Elem]) -> Result<Vec<Elem>> {
        self.class.membership(t)?;
        if let Some(v) = morph::check(&self.u, t, k, Kind::Embedding)? {
            return Err(Error::Precondition(format!("U does not embed: {v}")));
        }
        let old = self.u.size();
        let (next, q) = self.prefix_order(t, k)?;
        self.install(next, old, EntryKind::Absorb, Vec::new())?;
        Ok(q)
    }

    fn prefix_order(&self, t: &Structure, k: &[Elem]) -> Result<(Structure, Vec<Elem>)> {
        let n = t.size();
        let mut order: Vec<Elem> = k.to_vec();
        let mut in_k = vec![false; n];
        for &x in k {
            in_k[x] = true;
        }
        order.extend((0..n).filter(|&x| !in_k[x]));
        let mut q = vec![0; n];
        for (i, &x) in order.iter().enumerate() {
            q[x] = i;
        }
        let reordered = t.induced(&order);
        let mut used: BTreeSet<String> = self.u.labels().iter().cloned().collect();
        let mut labels = self.u.labels().to_vec();
        for &x in &order[k.len()..] {
            let mut l = t.label(x).to_string();
            let mut i = used.len();
            while used.contains(&l) {
                l = format!("x{i}");
                i += 1;
            }
            used.insert(l.clone());
            labels.push(l);
        }
        Ok((reordered.with_labels(labels)?, q))
    }

    fn install(&mut self, t: Structure, old: usize, kind: EntryKind, over: Vec<String>) -> Result<()> {
        if t.induced(&(0..old).collect::<Vec<_>>()) != self.u {
            return Err(Error::Precondition("growth changed the old part of U".into()));
        }
        self.u = t;
        self.refresh()?;
        if self.u.size() > old {
            self.transcript.push(TranscriptEntry {
                step: self.steps,
                kind,
                over,
                added: (old..self.u.size()).map(|x| self.u.label(x).to_string()).collect(),
                size: self.u.size(),
            });
        }
        Ok(())
    }

    /// Whether every one-point extension of every `U[A]` with `|A| < k` is
    /// realized over `A` in `U`; reports the first failure in task order.
    pub fn certify_extension_property(&self, k: usize) -> Certification {
        certify(&self.class, &self.u, k)
    }

    /// JSON transcript; identical for identical class, seed and step count.
    pub fn transcript_json(&self) -> Value {
        let steps: Vec<Value> = self
            .transcript
            .iter()
            .map(|e| {
                json!({
                    "step": e.step,
                    "kind": e.kind.as_str(),
                    "over": e.over,
                    "added": e.added,
                    "size": e.size,
                })
            })
            .collect();
        json!({
            "class": self.class.name(),
            "seed": self.seed,
            "max_task": self.max_task,
            "steps": self.steps,
            "idle_steps": self.idle_steps,
            "size": self.u.size(),
            "transcript": steps,
        })
    }
}

/// Extension-property check by embedding search, independent of the builder's
/// bookkeeping.
pub fn certify(class: &AgeDescriptor, u: &Structure, k: usize) -> Certification {
    let mut checked = 0;
    for size in 0..k.min(u.size() + 1) {
        let subsets = subsets_of_size(u.size(), size);
        let per: Vec<(u64, Option<ExtensionTask>)> = par::map(&subsets, |a| {
            let mut n = 0;
            let exts = class.one_point_extensions(&u.induced(a)).unwrap_or_default();
            let mut exts: Vec<Structure> = exts;
            exts.sort_by_key(|b| b.code());
            for b in exts {
                n += 1;
                let mut partial: Vec<Option<Elem>> = a.iter().map(|&x| Some(x)).collect();
                partial.push(None);
                let ok = morph::enumerate_extensions(&b, u, &partial, Kind::Embedding, Some(1))
                    .map(|v| !v.is_empty())
                    .unwrap_or(false);
                if !ok {
                    return (n, Some(ExtensionTask { a: a.clone(), b }));
                }
            }
            (n, None)
        });
        for (n, fail) in per {
            checked += n;
            if fail.is_some() {
                return Certification {
                    k,
                    holds: false,
                    failing: fail,
                    checked,
                };
            }
        }
    }
    Certification {
        k,
        holds: k >= 1 || u.size() > 0,
        failing: None,
        checked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_graph_step_adds_isolated_vertex() {
        let mut b = LimitBuilder::new(AgeDescriptor::simple_graphs(), 7).unwrap();
        assert!(matches!(b.step().unwrap(), StepOutcome::Applied(_)));
        assert_eq!(b.current().size(), 1);
        assert!(b.current().relation(0).is_empty());
    }

    #[test]
    fn fresh_builder_fails_k2() {
        let b = LimitBuilder::new(AgeDescriptor::simple_graphs(), 0).unwrap();
        let c = b.certify_extension_property(2);
        assert!(!c.holds);
        assert!(c.failing.unwrap().a.is_empty());
    }

    #[test]
    fn graphs_saturate_to_three_extension() {
        let mut b = LimitBuilder::new(AgeDescriptor::simple_graphs(), 1).unwrap();
        assert!(b.saturate(5000).unwrap());
        assert!(b.certify_extension_property(3).holds);
        assert!(matches!(b.step().unwrap(), StepOutcome::Idle));
    }

    #[test]
    fn loops_on_every_new_vertex() {
        let mut b = LimitBuilder::new(AgeDescriptor::graphs_with_all_loops(), 3).unwrap();
        b.run(10).unwrap();
        for x in 0..b.current().size() {
            assert!(b.current().holds(0, &[x, x]));
        }
    }

    #[test]
    fn old_part_is_kept() {
        let mut b = LimitBuilder::new(AgeDescriptor::posets(), 5).unwrap();
        let mut prev = b.current().clone();
        for _ in 0..20 {
            b.step().unwrap();
            let n = prev.size();
            assert_eq!(b.current().induced(&(0..n).collect::<Vec<_>>()), prev);
            prev = b.current().clone();
        }
    }

    #[test]
    fn same_seed_same_transcript() {
        let run = |seed| {
            let mut b = LimitBuilder::new(AgeDescriptor::posets(), seed).unwrap();
            b.run(30).unwrap();
            b.transcript_json().to_string()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn realize_seven_chain() {
        let mut b = LimitBuilder::new(AgeDescriptor::chains(), 2).unwrap();
        b.run(3).unwrap();
        let labels: Vec<String> = (0..7).map(|i| format!("t{i}")).collect();
        let mut t = Vec::new();
        for i in 0..7 {
            for j in i..7 {
                t.push(vec![labels[i].as_str(), labels[j].as_str()]);
            }
        }
        let refs: Vec<(&str, &[&str])> = t.iter().map(|v| ("le", v.as_slice())).collect();
        let chain = Structure::build(crate::relcore::Signature::binary("le"), &labels, &refs).unwrap();
        let e = b.realize(&chain).unwrap();
        assert!(morph::is_valid(&chain, b.current(), &e, Kind::Embedding));
        let again = b.current().size();
        b.realize(&chain).unwrap();
        assert_eq!(b.current().size(), again);
    }

    #[test]
    fn realize_empty_is_identity() {
        let mut b = LimitBuilder::new(AgeDescriptor::simple_graphs(), 2).unwrap();
        b.run(2).unwrap();
        let n = b.current().size();
        assert!(b.realize(&AgeDescriptor::simple_graphs().empty()).unwrap().is_empty());
        assert_eq!(b.current().size(), n);
    }
}
