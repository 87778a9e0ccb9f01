//! Stagewise construction of a universal homogeneous polymorphism
//! `u: Vⁿ → U` by dovetailing universality and saturation tasks.
//!
//! Each stage keeps `V`, `U` and `u` as finite objects. Every resolved task
//! extends all three: `V` and `U` grow by embeddings that fix the old points
//! as a prefix, and `u` keeps its old values.

use serde_json::{json, Value};

use crate::ageprops::age::AgeDescriptor;
use crate::ageprops::checks::{aepn_constructive, aepn_search, AepInstance, SearchStats};
use crate::ageprops::search::Budget;
use crate::construct::{all_tuples, power, power_map, tuple_index, AmalgamInstance};
use crate::error::{Error, Result};
use crate::fraisse::LimitBuilder;
use crate::funspace::{agreement_index, Agreement, FunctionTable};
use crate::morph::{self, Kind, NoConstraint};
use crate::relcore::{Elem, Structure};

pub const DEFAULT_TASK_SIZE: usize = 1;
/// Cap on the homomorphisms `Bⁿ → U` listed per saturation pattern.
pub const DEFAULT_MAP_CAP: usize = 20_000;

#[derive(Clone, Debug)]
pub struct StageConfig {
    pub universality_size: usize,
    pub saturation_size: usize,
    pub budget: Budget,
    pub map_cap: usize,
}

impl StageConfig {
    pub fn with_task_size(size: usize) -> Self {
        StageConfig {
            universality_size: size,
            saturation_size: size,
            ..StageConfig::default()
        }
    }
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            universality_size: DEFAULT_TASK_SIZE,
            saturation_size: DEFAULT_TASK_SIZE,
            budget: Budget {
                max_c: 4,
                max_t: usize::MAX,
                nodes: 200_000,
            },
            map_cap: DEFAULT_MAP_CAP,
        }
    }
}

/// `b: Bⁿ ↠ T` surjective. Satisfied when some `ι: B ↪ V` and `κ: T ↪ U`
/// have `κ∘b = u∘ιⁿ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniversalityTask {
    pub b: Structure,
    pub t: Structure,
    pub map: Vec<Elem>,
}

/// `A = B[sub]`, `m: A ↪ V`, `map: Bⁿ → U` agreeing with `u∘mⁿ` on `Aⁿ`.
/// Satisfied when some `m̂: B ↪ V` extends `m` with `u∘m̂ⁿ = map`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SaturationTask {
    pub b: Structure,
    pub sub: Vec<Elem>,
    pub m: Vec<Elem>,
    pub map: Vec<Elem>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Task {
    Universality(UniversalityTask),
    Saturation(SaturationTask),
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Universality(_) => "universality",
            Task::Saturation(_) => "saturation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageEntry {
    pub step: u64,
    pub task: &'static str,
    pub b_size: usize,
    pub a_size: usize,
    pub v_added: Vec<String>,
    pub u_size: usize,
    pub how: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StageOutcome {
    Resolved(StageEntry),
    Idle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Audit {
    pub holds: bool,
    pub checked: usize,
    pub failing: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateRow {
    pub j: usize,
    /// Agreement index of `g_j` with `u`.
    pub g_agreement: usize,
    /// Agreement index of `ι_j` with the final `ι`.
    pub iota_agreement: usize,
    pub anchored: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateDemo {
    pub rows: Vec<GateRow>,
    pub unbounded: bool,
}

#[derive(Clone, Debug)]
pub struct StageState {
    class: AgeDescriptor,
    n: usize,
    cfg: StageConfig,
    v: Structure,
    u: Vec<Elem>,
    builder: LimitBuilder,
    universality: Vec<UniversalityTask>,
    /// Tasks already witnessed; stages only grow, so witnesses persist.
    witnessed: Vec<bool>,
    transcript: Vec<StageEntry>,
    steps: u64,
    idle: u64,
}

fn v_label(i: usize) -> String {
    format!("v{i}")
}

fn relabel_v(s: &Structure) -> Result<Structure> {
    s.with_labels((0..s.size()).map(v_label).collect())
}

/// Surjective homomorphisms `Bⁿ ↠ T` up to automorphisms of `T`, for all
/// members `B` with `1 ≤ |B| ≤ size` and `T` with `|T| ≤ |B|ⁿ`.
pub fn universality_tasks(class: &AgeDescriptor, n: usize, size: usize) -> Result<Vec<UniversalityTask>> {
    let levels = class.members(size)?;
    let mut out = Vec::new();
    let mut t_levels = class.members(0)?;
    for b in levels.iter().skip(1).flatten() {
        let bn = power(b, n);
        if t_levels.len() <= bn.size() {
            t_levels = class.members(bn.size())?;
        }
        for t in t_levels.iter().take(bn.size() + 1).skip(1).flatten() {
            let autos = morph::automorphisms(t);
            for h in morph::enumerate_homs(&bn, t, Kind::Hom, None)? {
                let mut hit = vec![false; t.size()];
                h.map.iter().for_each(|&y| hit[y] = true);
                if hit.contains(&false) {
                    continue;
                }
                let minimal = autos.iter().all(|a| morph::compose(&h.map, &a.map) >= h.map);
                if minimal {
                    out.push(UniversalityTask {
                        b: b.clone(),
                        t: t.clone(),
                        map: h.map,
                    });
                }
            }
        }
    }
    Ok(out)
}

impl StageState {
    pub fn new(class: AgeDescriptor, n: usize, seed: u64, cfg: StageConfig) -> Result<Self> {
        if n == 0 {
            return Err(Error::Arity("polymorphism arity must be positive".into()));
        }
        if let Some(obs) = class.obstruction() {
            return Err(Error::StageAbort(format!(
                "{} fails AEP{n}; see `counterexample {obs}`",
                class.name()
            )));
        }
        if !class.product_closed() {
            return Err(Error::StageAbort(format!("{} is not closed under products", class.name())));
        }
        let universality = universality_tasks(&class, n, cfg.universality_size)?;
        let builder = LimitBuilder::new(class.clone(), seed)?;
        Ok(StageState {
            witnessed: vec![false; universality.len()],
            v: class.empty(),
            class,
            n,
            cfg,
            u: Vec::new(),
            builder,
            universality,
            transcript: Vec::new(),
            steps: 0,
            idle: 0,
        })
    }

    pub fn class(&self) -> &AgeDescriptor {
        &self.class
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn config(&self) -> &StageConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.builder.seed()
    }

    pub fn v(&self) -> &Structure {
        &self.v
    }

    pub fn u_structure(&self) -> &Structure {
        self.builder.current()
    }

    /// `u` in lexicographic order of `Vⁿ`.
    pub fn u_values(&self) -> &[Elem] {
        &self.u
    }

    pub fn u_table(&self) -> Result<FunctionTable> {
        FunctionTable::new(self.n, self.v.clone(), self.u_structure().clone(), self.u.clone())
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn idle_steps(&self) -> u64 {
        self.idle
    }

    pub fn transcript(&self) -> &[StageEntry] {
        &self.transcript
    }

    pub fn universality_task_count(&self) -> usize {
        self.universality.len()
    }

    fn u_at(&self, t: &[Elem]) -> Elem {
        self.u[tuple_index(self.v.size(), t)]
    }

    /// Embeddings `ι: d ↪ V` extending `partial` with `u∘ιⁿ = want`.
    fn u_factors(&self, d: &Structure, partial: &[Option<Elem>], want: &[Elem], limit: Option<usize>) -> Result<Vec<Vec<Elem>>> {
        let tuples = all_tuples(d.size(), self.n);
        let mut touching: Vec<Vec<usize>> = vec![Vec::new(); d.size()];
        for (i, t) in tuples.iter().enumerate() {
            let mut seen = t.clone();
            seen.sort_unstable();
            seen.dedup();
            for x in seen {
                touching[x].push(i);
            }
        }
        let check = |asg: &[Elem], x: Elem| {
            touching[x].iter().all(|&i| {
                let t = &tuples[i];
                if t.iter().any(|&y| asg[y] == usize::MAX) {
                    return true;
                }
                let img: Vec<Elem> = t.iter().map(|&y| asg[y]).collect();
                self.u_at(&img) == want[i]
            })
        };
        match morph::search(d, &self.v, Kind::Embedding, partial, None, limit, &check) {
            Err(Error::PartialViolates { .. }) => Ok(Vec::new()),
            other => other,
        }
    }

    fn universality_witness(&self, task: &UniversalityTask) -> Result<Option<(Vec<Elem>, Vec<Elem>)>> {
        let u_struct = self.u_structure();
        let b_size = task.b.size();
        for iota in morph::enumerate_homs(&task.b, &self.v, Kind::Embedding, None)? {
            let idx = power_map(&iota.map, b_size, self.v.size(), self.n);
            let mut kappa = vec![usize::MAX; task.t.size()];
            let mut ok = true;
            for (i, &y) in task.map.iter().enumerate() {
                let w = self.u[idx[i]];
                if kappa[y] != usize::MAX && kappa[y] != w {
                    ok = false;
                    break;
                }
                kappa[y] = w;
            }
            if ok && morph::is_valid(&task.t, u_struct, &kappa, Kind::Embedding) {
                return Ok(Some((iota.map, kappa)));
            }
        }
        Ok(None)
    }

    fn saturation_satisfied(&self, task: &SaturationTask) -> Result<bool> {
        let mut partial = vec![None; task.b.size()];
        for (i, &x) in task.sub.iter().enumerate() {
            partial[x] = Some(task.m[i]);
        }
        Ok(!self.u_factors(&task.b, &partial, &task.map, Some(1))?.is_empty())
    }

    /// First unsatisfied saturation task in the order (B, A, m, map).
    fn next_saturation(&self) -> Result<Option<SaturationTask>> {
        let levels = self.class.members(self.cfg.saturation_size)?;
        let u_struct = self.u_structure();
        for b in levels.iter().skip(1).flatten() {
            let bn = power(b, self.n);
            let bs = b.size();
            for k in 0..bs {
                for sub in crate::ageprops::age::subsets_of_size(bs, k) {
                    let a = b.induced(&sub);
                    for m in morph::enumerate_homs(&a, &self.v, Kind::Embedding, None)? {
                        let mut partial = vec![None; bn.size()];
                        for t in all_tuples(k, self.n) {
                            let bt: Vec<Elem> = t.iter().map(|&x| sub[x]).collect();
                            let vt: Vec<Elem> = t.iter().map(|&x| m.map[x]).collect();
                            partial[tuple_index(bs, &bt)] = Some(self.u_at(&vt));
                        }
                        let maps = match morph::search(&bn, u_struct, Kind::Hom, &partial, None, Some(self.cfg.map_cap), &NoConstraint) {
                            Err(Error::PartialViolates { .. }) => continue,
                            other => other?,
                        };
                        for map in maps {
                            let task = SaturationTask {
                                b: b.clone(),
                                sub: sub.clone(),
                                m: m.map.clone(),
                                map,
                            };
                            if !self.saturation_satisfied(&task)? {
                                return Ok(Some(task));
                            }
                        }
                    }
                }
            }
        }
        Ok(None)
    }

    pub fn next_task(&self) -> Result<Option<Task>> {
        for (t, _) in self.universality.iter().zip(&self.witnessed).filter(|(_, &w)| !w) {
            if self.universality_witness(t)?.is_none() {
                return Ok(Some(Task::Universality(t.clone())));
            }
        }
        Ok(self.next_saturation()?.map(Task::Saturation))
    }

    fn mark_witnessed(&mut self) -> Result<()> {
        for i in 0..self.universality.len() {
            if !self.witnessed[i] {
                if self.universality_witness(&self.universality[i])?.is_none() {
                    break;
                }
                self.witnessed[i] = true;
            }
        }
        Ok(())
    }

    /// Resolves the first unsatisfied task. On error the state is unchanged.
    pub fn step(&mut self) -> Result<StageOutcome> {
        self.mark_witnessed()?;
        let Some(task) = self.next_task()? else {
            self.steps += 1;
            self.idle += 1;
            return Ok(StageOutcome::Idle);
        };
        self.resolve_task(&task).map(StageOutcome::Resolved)
    }

    /// Resolves `task` whether or not it is already satisfied. Atomic: on
    /// error, including `StageAbort`, the state is unchanged.
    pub fn resolve_task(&mut self, task: &Task) -> Result<StageEntry> {
        let mut next = self.clone();
        let how = match task {
            Task::Universality(t) => {
                let kappa = next.builder.realize(&t.t)?;
                let sat = SaturationTask {
                    b: t.b.clone(),
                    sub: Vec::new(),
                    m: Vec::new(),
                    map: t.map.iter().map(|&y| kappa[y]).collect(),
                };
                next.resolve(&sat)?
            }
            Task::Saturation(s) => next.resolve(s)?,
        };
        let (b, a_size) = match task {
            Task::Universality(t) => (&t.b, 0),
            Task::Saturation(s) => (&s.b, s.sub.len()),
        };
        let entry = StageEntry {
            step: self.steps,
            task: task.kind(),
            b_size: b.size(),
            a_size,
            v_added: (self.v.size()..next.v.size()).map(v_label).collect(),
            u_size: next.u_structure().size(),
            how,
        };
        next.steps += 1;
        next.transcript.push(entry.clone());
        *self = next;
        Ok(entry)
    }

    /// Runs `count` steps; returns how many resolved a task.
    pub fn run(&mut self, count: u64) -> Result<u64> {
        let mut done = 0;
        for _ in 0..count {
            if let StageOutcome::Resolved(_) = self.step()? {
                done += 1;
            }
        }
        Ok(done)
    }

    /// Steps until a step is idle or `max_steps` are used.
    pub fn saturate(&mut self, max_steps: u64) -> Result<bool> {
        for _ in 0..max_steps {
            if self.step()? == StageOutcome::Idle {
                return Ok(true);
            }
        }
        Ok(self.next_task()?.is_none())
    }

    /// Grows `V` by `B` over `A` and extends `u` through an AEPⁿ witness
    /// with target `U`.
    fn resolve(&mut self, task: &SaturationTask) -> Result<String> {
        let a = task.b.induced(&task.sub);
        let am = AmalgamInstance::new(a, self.v.clone(), task.b.clone(), task.m.clone(), task.sub.clone())?;
        let inst = AepInstance {
            amalgam: am,
            t: self.u_structure().clone(),
            h1: self.u.clone(),
            h2: task.map.clone(),
        };
        let mut log = Vec::new();
        let mut found = aepn_constructive(&self.class, self.n, &inst, &self.cfg.budget, &mut log)?;
        if found.is_none() {
            let mut stats = SearchStats::default();
            found = aepn_search(&self.class, self.n, &inst, &self.cfg.budget, &mut stats)?;
            if found.is_none() {
                log.push(format!(
                    "candidate search: {} amalgams, {} carriers skipped",
                    stats.candidates, stats.skipped_carriers
                ));
            }
        }
        let Some(w) = found else {
            return Err(Error::StageAbort(format!(
                "no AEP{} witness for a saturation task with |A| = {}, |B| = {}: {}",
                self.n,
                task.sub.len(),
                task.b.size(),
                log.join("; ")
            )));
        };
        let old_v = self.v.size();
        if w.po.g1 != (0..old_v).collect::<Vec<_>>() {
            return Err(Error::StageAbort("amalgam reordered V".into()));
        }
        let q = self.builder.absorb(&w.t2, &w.k)?;
        let u_next = morph::compose(&w.h, &q);
        let v_next = relabel_v(&w.po.c)?;
        for t in all_tuples(old_v, self.n) {
            if u_next[tuple_index(v_next.size(), &t)] != self.u_at(&t) {
                return Err(Error::StageAbort("extension changed an old value of u".into()));
            }
        }
        let table = FunctionTable::new(self.n, v_next, self.u_structure().clone(), u_next)?;
        if !table.verify_polymorphism()? {
            return Err(Error::StageAbort("extended u is not a homomorphism".into()));
        }
        self.v = table.domain().clone();
        self.u = table.table().to_vec();
        Ok(w.how)
    }

    /// Whether this state extends `older`: `V`, `U` and `u` only grew.
    pub fn extends(&self, older: &StageState) -> bool {
        let (ov, ou) = (older.v.size(), older.u_structure().size());
        if ov > self.v.size() || ou > self.u_structure().size() {
            return false;
        }
        if self.v.induced(&(0..ov).collect::<Vec<_>>()) != older.v
            || self.u_structure().induced(&(0..ou).collect::<Vec<_>>()) != *older.u_structure()
        {
            return false;
        }
        all_tuples(ov, self.n).iter().all(|t| self.u_at(t) == older.u_at(t))
    }

    /// Every universality task with `|B| ≤ s` has a witness in this stage.
    pub fn universality_audit(&self, s: usize) -> Result<Audit> {
        let tasks = if s <= self.cfg.universality_size {
            self.universality.iter().filter(|t| t.b.size() <= s).cloned().collect()
        } else {
            universality_tasks(&self.class, self.n, s)?
        };
        for (i, t) in tasks.iter().enumerate() {
            if self.universality_witness(t)?.is_none() {
                return Ok(Audit {
                    holds: false,
                    checked: i + 1,
                    failing: Some(format!(
                        "no ι: B ↪ V, κ: T ↪ U with κ∘b = u∘ιⁿ for |B| = {}, |T| = {}, b = {:?}",
                        t.b.size(),
                        t.t.size(),
                        t.map
                    )),
                });
            }
        }
        Ok(Audit {
            holds: true,
            checked: tasks.len(),
            failing: None,
        })
    }

    /// Literal check against the current `U`: every hom `f: Bⁿ → U` with
    /// `|B| ≤ s` equals `u∘ιⁿ` for an embedding `ι`. Usually false at a finite
    /// stage, since new points of `U` have no preimages yet.
    pub fn concrete_universality_audit(&self, s: usize) -> Result<Audit> {
        let mut checked = 0;
        for b in self.class.members(s)?.iter().skip(1).flatten() {
            let bn = power(b, self.n);
            for f in morph::enumerate_homs(&bn, self.u_structure(), Kind::Hom, Some(self.cfg.map_cap))? {
                checked += 1;
                if self.u_factors(b, &[], &f.map, Some(1))?.is_empty() {
                    return Ok(Audit {
                        holds: false,
                        checked,
                        failing: Some(format!("f = {:?} on |B| = {} has no factorization", f.map, b.size())),
                    });
                }
            }
        }
        Ok(Audit {
            holds: true,
            checked,
            failing: None,
        })
    }

    /// For each `S ⊆ V` with `|S| ≤ s` and embedding `e: V[S] ↪ V` with
    /// `u∘eⁿ = u` on `Sⁿ`, looks for an extension of `e` to the Gaifman ball
    /// of radius `radius` around `S` that still preserves `u`.
    pub fn homogeneity_audit(&self, s: usize, radius: usize) -> Result<Audit> {
        let nb = self.v.gaifman_neighbours();
        let mut checked = 0;
        for k in 1..=s.min(self.v.size()) {
            for sub in crate::ageprops::age::subsets_of_size(self.v.size(), k) {
                let mut ball = sub.clone();
                let mut frontier = sub.clone();
                for _ in 0..radius {
                    let mut next = Vec::new();
                    for &x in &frontier {
                        for &y in &nb[x] {
                            if !ball.contains(&y) {
                                ball.push(y);
                                next.push(y);
                            }
                        }
                    }
                    frontier = next;
                }
                ball.sort_unstable();
                let region = self.v.induced(&ball);
                let want: Vec<Elem> = all_tuples(ball.len(), self.n)
                    .iter()
                    .map(|t| self.u_at(&t.iter().map(|&x| ball[x]).collect::<Vec<_>>()))
                    .collect();
                let small = self.v.induced(&sub);
                let small_want: Vec<Elem> = all_tuples(k, self.n)
                    .iter()
                    .map(|t| self.u_at(&t.iter().map(|&x| sub[x]).collect::<Vec<_>>()))
                    .collect();
                for e in self.u_factors(&small, &[], &small_want, None)? {
                    checked += 1;
                    let mut partial = vec![None; ball.len()];
                    for (i, &x) in sub.iter().enumerate() {
                        let pos = ball.binary_search(&x).unwrap_or_default();
                        partial[pos] = Some(e[i]);
                    }
                    if self.u_factors(&region, &partial, &want, Some(1))?.is_empty() {
                        return Ok(Audit {
                            holds: false,
                            checked,
                            failing: Some(format!(
                                "{:?} ↦ {:?} does not extend to the radius-{radius} ball",
                                sub.iter().map(|&x| v_label(x)).collect::<Vec<_>>(),
                                e.iter().map(|&x| v_label(x)).collect::<Vec<_>>()
                            )),
                        });
                    }
                }
            }
        }
        Ok(Audit {
            holds: true,
            checked,
            failing: None,
        })
    }

    /// An embedding `ι: D ↪ V` with `g = u∘ιⁿ`, agreeing with `reference` on
    /// `anchor` when given. `g`'s codomain must be a prefix of `U`.
    pub fn factorize(&self, g: &FunctionTable, anchor: &[Elem], reference: Option<&[Elem]>) -> Result<Vec<Elem>> {
        let partial = self.factor_partial(g, anchor, reference)?;
        self.u_factors(g.domain(), &partial, g.table(), Some(1))?
            .into_iter()
            .next()
            .ok_or_else(|| {
                Error::NoFactorization(format!(
                    "no embedding of a {}-point domain{}",
                    g.domain().size(),
                    if reference.is_some() { " agreeing on the anchor" } else { "" }
                ))
            })
    }

    /// Every embedding `ι` with `g = u∘ιⁿ`, in search order, up to `limit`.
    pub fn factorizations(&self, g: &FunctionTable, limit: Option<usize>) -> Result<Vec<Vec<Elem>>> {
        let partial = self.factor_partial(g, &[], None)?;
        self.u_factors(g.domain(), &partial, g.table(), limit)
    }

    fn factor_partial(&self, g: &FunctionTable, anchor: &[Elem], reference: Option<&[Elem]>) -> Result<Vec<Option<Elem>>> {
        if g.arity() != self.n {
            return Err(Error::Arity(format!("table arity {} but u has arity {}", g.arity(), self.n)));
        }
        let u = self.u_structure();
        let cs = g.codomain().size();
        if cs > u.size() || u.induced(&(0..cs).collect::<Vec<_>>()) != *g.codomain() {
            return Err(Error::Precondition("table codomain is not a prefix of U".into()));
        }
        let d = g.domain();
        let mut partial = vec![None; d.size()];
        if let Some(r) = reference {
            for &x in anchor {
                let y = *r.get(x).ok_or(Error::IndexOutOfRange(x))?;
                if x >= d.size() || y >= self.v.size() {
                    return Err(Error::IndexOutOfRange(x.max(y)));
                }
                partial[x] = Some(y);
            }
        }
        Ok(partial)
    }

    /// Factorizes the restrictions `g_j` of `u` to the first `j` points of `V`,
    /// anchoring each `ι_j` on the previous one.
    pub fn gate_demo(&self) -> Result<GateDemo> {
        let n = self.n;
        let full = FunctionTable::new(n, self.v.clone(), self.u_structure().clone(), self.u.clone())?;
        let mut iotas: Vec<(Vec<Elem>, bool)> = Vec::new();
        let mut gs = Vec::new();
        for j in 1..=self.v.size() {
            let pts: Vec<Elem> = (0..j).collect();
            let d = self.v.induced(&pts);
            let table = all_tuples(j, n).iter().map(|t| self.u_at(t)).collect();
            let g = FunctionTable::new(n, d, self.u_structure().clone(), table)?;
            let prev = iotas.last().map(|(i, _)| i.clone());
            let anchor: Vec<Elem> = (0..j - 1).collect();
            let (iota, anchored) = match self.factorize(&g, &anchor, prev.as_deref()) {
                Ok(i) => (i, prev.is_some()),
                Err(Error::NoFactorization(_)) => (self.factorize(&g, &[], None)?, false),
                Err(e) => return Err(e),
            };
            iotas.push((iota, anchored));
            gs.push(g);
        }
        let last = iotas.last().map(|(i, _)| i.clone()).unwrap_or_default();
        let rows: Vec<GateRow> = iotas
            .iter()
            .zip(&gs)
            .enumerate()
            .map(|(idx, ((iota, anchored), g))| {
                let g_agreement = match agreement_index(g, &full) {
                    Ok(Agreement::At(i)) => i,
                    _ => full.table().len(),
                };
                let iota_agreement = iota.iter().zip(&last).take_while(|(a, b)| a == b).count();
                GateRow {
                    j: idx + 1,
                    g_agreement,
                    iota_agreement,
                    anchored: *anchored || idx == 0,
                }
            })
            .collect();
        let unbounded = !rows.is_empty() && rows.iter().all(|r| r.anchored && r.iota_agreement == r.j);
        Ok(GateDemo { rows, unbounded })
    }

    pub fn transcript_json(&self) -> Value {
        let steps: Vec<Value> = self
            .transcript
            .iter()
            .map(|e| {
                json!({
                    "step": e.step,
                    "task": e.task,
                    "b_size": e.b_size,
                    "a_size": e.a_size,
                    "v_added": e.v_added,
                    "u_size": e.u_size,
                    "how": e.how,
                })
            })
            .collect();
        json!({
            "class": self.class.name(),
            "arity": self.n,
            "seed": self.seed(),
            "universality_size": self.cfg.universality_size,
            "saturation_size": self.cfg.saturation_size,
            "steps": self.steps,
            "idle_steps": self.idle,
            "v_size": self.v.size(),
            "u_size": self.u_structure().size(),
            "transcript": steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_state_is_not_universal() {
        let st = StageState::new(AgeDescriptor::graphs_with_all_loops(), 2, 0, StageConfig::default()).unwrap();
        assert!(!st.universality_audit(1).unwrap().holds);
        assert!(st.universality_audit(0).unwrap().holds);
    }

    #[test]
    fn loops_one_point_task() {
        let mut st = StageState::new(AgeDescriptor::graphs_with_all_loops(), 2, 0, StageConfig::default()).unwrap();
        assert_eq!(st.universality_task_count(), 1);
        let StageOutcome::Resolved(e) = st.step().unwrap() else {
            panic!("expected a task");
        };
        assert_eq!(e.task, "universality");
        assert_eq!(st.v().size(), 1);
        assert!(st.universality_audit(1).unwrap().holds);
        assert!(st.saturate(20).unwrap());
        assert!(st.u_table().unwrap().verify_polymorphism().unwrap());
    }

    #[test]
    fn obstructed_classes_abort() {
        for c in [AgeDescriptor::chains(), AgeDescriptor::tournaments()] {
            assert!(matches!(
                StageState::new(c, 2, 0, StageConfig::default()),
                Err(Error::StageAbort(_))
            ));
        }
    }

    #[test]
    fn steps_extend_and_factorize() {
        let cfg = StageConfig {
            universality_size: 2,
            ..StageConfig::default()
        };
        let mut st = StageState::new(AgeDescriptor::posets(), 2, 3, cfg).unwrap();
        let before = st.clone();
        st.run(6).unwrap();
        assert!(st.extends(&before));
        let g = st.u_table().unwrap();
        let iota = st.factorize(&g, &[], None).unwrap();
        let again = construct_table(&st, &iota);
        assert_eq!(again, g.table());
    }

    fn looped(labels: &[&str], edges: &[(&str, &str)]) -> Structure {
        let mut t: Vec<(&str, Vec<&str>)> = labels.iter().map(|&l| ("E", vec![l, l])).collect();
        for &(x, y) in edges {
            t.push(("E", vec![x, y]));
            t.push(("E", vec![y, x]));
        }
        let refs: Vec<(&str, &[&str])> = t.iter().map(|(s, v)| (*s, v.as_slice())).collect();
        Structure::build(crate::relcore::Signature::binary("E"), labels, &refs).unwrap()
    }

    #[test]
    fn loops_edge_task_over_a_point_aborts() {
        let class = AgeDescriptor::graphs_with_all_loops();
        let mut st = StageState::new(class.clone(), 2, 0, StageConfig::default()).unwrap();
        st.v = relabel_v(&looped(&["x", "a"], &[("x", "a")])).unwrap();
        st.builder = LimitBuilder::from_member(class, looped(&["x", "a", "y"], &[("x", "a"), ("a", "y")]), 0).unwrap();
        st.u = all_tuples(2, 2).iter().map(|t| t[0]).collect();
        assert!(st.u_table().unwrap().verify_polymorphism().unwrap());
        // m(a') = a; b sends (a',a') to a and the rest to y, which misses x.
        let task = SaturationTask {
            b: looped(&["a'", "v'"], &[("a'", "v'")]),
            sub: vec![0],
            m: vec![1],
            map: vec![1, 2, 2, 2],
        };
        let before = st.clone();
        assert!(!st.saturation_satisfied(&task).unwrap());
        let err = st.resolve_task(&Task::Saturation(task)).unwrap_err();
        assert!(matches!(err, Error::StageAbort(_)), "{err}");
        assert_eq!(st.v(), before.v());
        assert_eq!(st.u_values(), before.u_values());
        assert_eq!(st.steps(), before.steps());
    }

    fn construct_table(st: &StageState, iota: &[Elem]) -> Vec<Elem> {
        let vs = st.v().size();
        all_tuples(vs, 2)
            .iter()
            .map(|t| st.u_values()[tuple_index(vs, &t.iter().map(|&x| iota[x]).collect::<Vec<_>>())])
            .collect()
    }
}
