//! AP, HAP, HAPⁿ and AEPⁿ checks on concrete instances.

use super::age::AgeDescriptor;
use super::cert::{Certificate, Fact, Verdict};
use super::search::{completions, extend_into, Budget, ExtendOutcome};
use crate::construct::{self, power, power_map, AmalgamInstance, PushoutResult};
use crate::error::{Error, Result};
use crate::morph::{self, Kind};
use crate::par;
use crate::relcore::{self, Elem, Structure, Tuple};

/// `f: A → B` a homomorphism, `g: A ↪ C` an embedding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HapInstance {
    pub a: Structure,
    pub b: Structure,
    pub c: Structure,
    pub f: Vec<Elem>,
    pub g: Vec<Elem>,
}

/// `g: A ↪ B` an embedding and `a_map: Aⁿ → T1` a homomorphism.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HapnInstance {
    pub a: Structure,
    pub b: Structure,
    pub t1: Structure,
    pub g: Vec<Elem>,
    pub a_map: Vec<Elem>,
}

/// An amalgamation instance with `h1: B1ⁿ → T`, `h2: B2ⁿ → T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AepInstance {
    pub amalgam: AmalgamInstance,
    pub t: Structure,
    pub h1: Vec<Elem>,
    pub h2: Vec<Elem>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Strategy {
    /// Constructive recipe first, then search.
    #[default]
    Auto,
    Constructive,
    Search,
}

fn need_member(class: &AgeDescriptor, what: &str, s: &Structure) -> Result<()> {
    class
        .membership(s)
        .map_err(|e| Error::not_in(class.name(), format!("{what}: {e}")))
}

fn need_map(src: &Structure, tgt: &Structure, map: &[Elem], kind: Kind, name: &str) -> Result<()> {
    match morph::check(src, tgt, map, kind)? {
        None => Ok(()),
        Some(v) => Err(Error::Precondition(format!("{name} is not a {kind}: {v}"))),
    }
}

fn image_relations(s: &Structure, map: &[Elem]) -> Vec<Vec<Tuple>> {
    s.relations()
        .iter()
        .map(|r| r.iter().map(|t| t.iter().map(|&x| map[x]).collect()).collect())
        .collect()
}

/// Candidate amalgams of an instance in canonical order: partial matchings of
/// the two fresh parts (fewest identifications first), each completed over the
/// tuples that lie in neither image. The second value counts carriers whose
/// completion space exceeded the cap.
pub fn amalgam_candidates(class: &AgeDescriptor, inst: &AmalgamInstance, max_c: usize) -> Result<(Vec<PushoutResult>, u64)> {
    let in1: Vec<bool> = (0..inst.b1.size()).map(|x| !inst.f1.contains(&x)).collect();
    let in2: Vec<bool> = (0..inst.b2.size()).map(|y| !inst.f2.contains(&y)).collect();
    let p: Vec<Elem> = (0..inst.b1.size()).filter(|&x| in1[x]).collect();
    let q: Vec<Elem> = (0..inst.b2.size()).filter(|&y| in2[y]).collect();
    let mut matchings: Vec<Vec<(Elem, Elem)>> = Vec::new();
    fn rec(i: usize, p: &[Elem], q: &[Elem], used: &mut Vec<bool>, cur: &mut Vec<(Elem, Elem)>, out: &mut Vec<Vec<(Elem, Elem)>>) {
        if i == p.len() {
            out.push(cur.clone());
            return;
        }
        rec(i + 1, p, q, used, cur, out);
        for (j, &y) in q.iter().enumerate() {
            if !used[j] {
                used[j] = true;
                cur.push((p[i], y));
                rec(i + 1, p, q, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    rec(0, &p, &q, &mut vec![false; q.len()], &mut Vec::new(), &mut matchings);
    matchings.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    let mut out = Vec::new();
    let mut skipped = 0;
    for m in matchings {
        let mut pairs: Vec<(Elem, Elem)> = inst.f1.iter().copied().zip(inst.f2.iter().copied()).collect();
        pairs.extend(m);
        let gl = relcore::glue(inst.b1.labels(), inst.b2.labels(), &pairs);
        if gl.labels.len() > max_c {
            continue;
        }
        let mut rels = image_relations(&inst.b1, &gl.left);
        for (r, extra) in rels.iter_mut().zip(image_relations(&inst.b2, &gl.right)) {
            r.extend(extra);
        }
        let base = Structure::new(inst.b1.signature().clone(), gl.labels, rels)?;
        if !morph::is_valid(&inst.b1, &base, &gl.left, Kind::Embedding)
            || !morph::is_valid(&inst.b2, &base, &gl.right, Kind::Embedding)
        {
            continue;
        }
        let mut side = vec![(false, false); base.size()];
        for &x in &gl.left {
            side[x].0 = true;
        }
        for &y in &gl.right {
            side[y].1 = true;
        }
        let free = |t: &Tuple| !t.iter().all(|&x| side[x].0) && !t.iter().all(|&x| side[x].1);
        match completions(class, &base, &free, None) {
            Ok(cs) => {
                for c in cs {
                    if morph::is_valid(&inst.b1, &c, &gl.left, Kind::Embedding)
                        && morph::is_valid(&inst.b2, &c, &gl.right, Kind::Embedding)
                    {
                        out.push(PushoutResult {
                            c,
                            g1: gl.left.clone(),
                            g2: gl.right.clone(),
                        });
                    }
                }
            }
            Err(Error::Precondition(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, skipped))
}

fn ap_certificate(inst: &AmalgamInstance, class: &AgeDescriptor, po: &PushoutResult) -> Certificate {
    let mut cert = Certificate::new("AP", class.name(), Verdict::Witness);
    cert.witness = Some("C".into());
    cert.add_structure("A", inst.a.clone());
    cert.add_structure("B1", inst.b1.clone());
    cert.add_structure("B2", inst.b2.clone());
    cert.add_structure("C", po.c.clone());
    cert.add_map("f1", "A", "B1", Kind::Embedding, inst.f1.clone());
    cert.add_map("f2", "A", "B2", Kind::Embedding, inst.f2.clone());
    cert.add_map("g1", "B1", "C", Kind::Embedding, po.g1.clone());
    cert.add_map("g2", "B2", "C", Kind::Embedding, po.g2.clone());
    cert.equal(&["f1", "g1"], &["f2", "g2"]);
    cert
}

/// Amalgamation property on one instance; `max_c` bounds a searched amalgam.
pub fn check_ap(class: &AgeDescriptor, inst: &AmalgamInstance, max_c: usize) -> Result<Certificate> {
    need_member(class, "A", &inst.a)?;
    need_member(class, "B1", &inst.b1)?;
    need_member(class, "B2", &inst.b2)?;
    match class.amalgam(inst) {
        Ok(po) if po.check(inst)?.is_none() => {
            let mut cert = ap_certificate(inst, class, &po);
            cert.note(format!("{} amalgam", class.name()));
            cert.replay_or_err()?;
            return Ok(cert);
        }
        _ => {}
    }
    let (cands, skipped) = amalgam_candidates(class, inst, max_c)?;
    if let Some(po) = cands.first() {
        let mut cert = ap_certificate(inst, class, po);
        cert.note("first searched amalgam");
        cert.replay_or_err()?;
        return Ok(cert);
    }
    let mut cert = Certificate::new("AP", class.name(), Verdict::NoWitnessUpToBudget);
    cert.note(format!("no amalgam with at most {max_c} points; non-conclusive"));
    cert.count("max_c", max_c as u64);
    cert.count("skipped_carriers", skipped);
    Ok(cert)
}

/// A HAP square: `D`, `fhat: C → D` and the embedding `ghat: B ↪ D`.
#[derive(Clone, Debug)]
pub(crate) struct HapSquare {
    pub d: Structure,
    pub fhat: Vec<Elem>,
    pub ghat: Vec<Elem>,
}

pub(crate) enum HapOutcome {
    Found(HapSquare, &'static str),
    NotFound { reason: String, nodes: u64 },
}

/// HAP core without membership checks on `A` and `C`.
pub(crate) fn hap_core(
    class: &AgeDescriptor,
    a: &Structure,
    b: &Structure,
    f: &[Elem],
    c: &Structure,
    g: &[Elem],
    budget: &Budget,
) -> Result<HapOutcome> {
    let mut reason = String::new();
    if class.hap_constructive() {
        let (d, fhat, ghat) = construct::hom_pushout(a, b, f, c, g)?;
        let (d, q) = class.close(&d)?;
        let fhat = morph::compose(&fhat, &q);
        let ghat = morph::compose(&ghat, &q);
        if d.size() > budget.max_t {
            reason = format!("hom-pushout has {} points, over the budget {}", d.size(), budget.max_t);
        } else if let Err(e) = class.membership(&d) {
            reason = format!("hom-pushout left the class: {e}");
        } else if !morph::is_valid(b, &d, &ghat, Kind::Embedding) {
            reason = "hom-pushout does not embed B".into();
        } else {
            return Ok(HapOutcome::Found(HapSquare { d, fhat, ghat }, "hom-pushout"));
        }
    }
    let mut fixed = vec![None; c.size()];
    for (x, &y) in g.iter().enumerate() {
        fixed[y] = Some(f[x]);
    }
    Ok(match extend_into(class, c, &fixed, b, budget.max_t, budget.nodes)? {
        ExtendOutcome::Found(e) => HapOutcome::Found(
            HapSquare {
                d: e.t,
                fhat: e.h,
                ghat: e.k,
            },
            "extension search",
        ),
        ExtendOutcome::FixedNotHom { symbol, tuple } => HapOutcome::NotFound {
            reason: format!("{reason}; prescribed part breaks {symbol}({})", tuple.join(",")),
            nodes: 0,
        },
        ExtendOutcome::Exhausted { nodes } => HapOutcome::NotFound {
            reason: join(&reason, &format!("search exhausted after {nodes} nodes")),
            nodes,
        },
        ExtendOutcome::BudgetHit { nodes } => HapOutcome::NotFound {
            reason: join(&reason, &format!("node budget hit after {nodes} nodes")),
            nodes,
        },
    })
}

fn join(a: &str, b: &str) -> String {
    if a.is_empty() {
        b.to_string()
    } else {
        format!("{a}; {b}")
    }
}

/// Homo-amalgamation property on one instance.
pub fn check_hap(class: &AgeDescriptor, inst: &HapInstance, budget: &Budget) -> Result<Certificate> {
    need_map(&inst.a, &inst.b, &inst.f, Kind::Hom, "f")?;
    need_map(&inst.a, &inst.c, &inst.g, Kind::Embedding, "g")?;
    for (w, s) in [("A", &inst.a), ("B", &inst.b), ("C", &inst.c)] {
        need_member(class, w, s)?;
    }
    let out = hap_core(class, &inst.a, &inst.b, &inst.f, &inst.c, &inst.g, budget)?;
    let mut cert = match out {
        HapOutcome::Found(sq, how) => {
            let mut cert = Certificate::new("HAP", class.name(), Verdict::Witness);
            cert.witness = Some("D".into());
            cert.add_structure("A", inst.a.clone());
            cert.add_structure("B", inst.b.clone());
            cert.add_structure("C", inst.c.clone());
            cert.add_structure("D", sq.d);
            cert.add_map("f", "A", "B", Kind::Hom, inst.f.clone());
            cert.add_map("g", "A", "C", Kind::Embedding, inst.g.clone());
            cert.add_map("fhat", "C", "D", Kind::Hom, sq.fhat);
            cert.add_map("ghat", "B", "D", Kind::Embedding, sq.ghat);
            cert.equal(&["f", "ghat"], &["g", "fhat"]);
            cert.note(how);
            cert.replay_or_err()?;
            cert
        }
        HapOutcome::NotFound { reason, nodes } => {
            let mut cert = Certificate::new("HAP", class.name(), Verdict::NoWitnessUpToBudget);
            cert.note(format!("{reason}; non-conclusive"));
            cert.count("nodes", nodes);
            cert
        }
    };
    cert.count("max_t", budget.max_t as u64);
    Ok(cert)
}

/// HAPⁿ: the HAP core on `(Aⁿ, T1, a, Bⁿ, gⁿ)`. For product-closed classes
/// this is exactly HAP on the powered instance.
pub fn check_hapn(class: &AgeDescriptor, n: usize, inst: &HapnInstance, budget: &Budget) -> Result<Certificate> {
    if n == 0 {
        return Err(Error::Arity("power exponent must be positive".into()));
    }
    need_map(&inst.a, &inst.b, &inst.g, Kind::Embedding, "g")?;
    for (w, s) in [("A", &inst.a), ("B", &inst.b), ("T1", &inst.t1)] {
        need_member(class, w, s)?;
    }
    let an = power(&inst.a, n);
    let bn = power(&inst.b, n);
    need_map(&an, &inst.t1, &inst.a_map, Kind::Hom, "a")?;
    let gn = power_map(&inst.g, inst.a.size(), inst.b.size(), n);
    let property = format!("HAP{n}");
    let mut cert = match hap_core(class, &an, &inst.t1, &inst.a_map, &bn, &gn, budget)? {
        HapOutcome::Found(sq, how) => {
            let mut cert = Certificate::new(&property, class.name(), Verdict::Witness);
            cert.witness = Some("T2".into());
            cert.add_structure("A", inst.a.clone());
            cert.add_structure("B", inst.b.clone());
            cert.add_structure("T1", inst.t1.clone());
            cert.add_structure("An", an);
            cert.add_structure("Bn", bn);
            cert.add_structure("T2", sq.d);
            cert.add_map("g", "A", "B", Kind::Embedding, inst.g.clone());
            cert.add_map("gn", "An", "Bn", Kind::Embedding, gn);
            cert.add_map("a", "An", "T1", Kind::Hom, inst.a_map.clone());
            cert.add_map("b", "Bn", "T2", Kind::Hom, sq.fhat);
            cert.add_map("h", "T1", "T2", Kind::Embedding, sq.ghat);
            cert.equal(&["a", "h"], &["gn", "b"]);
            cert.facts.push(Fact::PowerOf {
                map: "gn".into(),
                base: "g".into(),
                n,
            });
            for (s, base) in [("An", "A"), ("Bn", "B")] {
                cert.facts.push(Fact::IsPower {
                    structure: s.into(),
                    base: base.into(),
                    n,
                });
            }
            cert.note(how);
            cert.replay_or_err()?;
            cert
        }
        HapOutcome::NotFound { reason, nodes } => {
            let mut cert = Certificate::new(&property, class.name(), Verdict::NoWitnessUpToBudget);
            cert.note(format!("{reason}; non-conclusive"));
            cert.count("nodes", nodes);
            cert
        }
    };
    cert.count("max_t", budget.max_t as u64);
    Ok(cert)
}

/// `C`, `T'`, `h: Cⁿ → T'` and `k: T ↪ T'`.
#[derive(Clone, Debug)]
pub(crate) struct AepWitness {
    pub po: PushoutResult,
    pub t2: Structure,
    pub h: Vec<Elem>,
    pub k: Vec<Elem>,
    pub how: String,
}

fn checked_power_legs(inst: &AepInstance, po: &PushoutResult, n: usize) -> (Structure, Vec<Elem>, Vec<Elem>) {
    let am = &inst.amalgam;
    let cs = po.c.size();
    (
        power(&po.c, n),
        power_map(&po.g1, am.b1.size(), cs, n),
        power_map(&po.g2, am.b2.size(), cs, n),
    )
}

/// Amalgamate, map `Cⁿ` through the amalgam of the powers, and repair with HAP
/// when the weak-pushout map is not a homomorphism.
pub(crate) fn aepn_constructive(class: &AgeDescriptor, n: usize, inst: &AepInstance, budget: &Budget, log: &mut Vec<String>) -> Result<Option<AepWitness>> {
    let am = &inst.amalgam;
    let c = match class.amalgam(am) {
        Ok(c) => c,
        Err(e) => {
            log.push(format!("no class amalgam: {e}"));
            return Ok(None);
        }
    };
    let chat = match class.amalgam(&am.power(n)) {
        Ok(c) => c,
        Err(e) => {
            log.push(format!("no amalgam of the powers: {e}"));
            return Ok(None);
        }
    };
    let m = construct::mediating_map(&chat, &inst.h1, &inst.h2)?;
    if let Some(v) = morph::check(&chat.c, &inst.t, &m, Kind::Hom)? {
        log.push(format!("mediating map from the amalgam of the powers into T is not a hom: {v}"));
        return Ok(None);
    }
    let (cn, g1n, g2n) = checked_power_legs(inst, &c, n);
    let w = construct::weak_pushout_map(am, n, &c, &chat)?;
    match morph::check(&cn, &chat.c, &w.map, Kind::Hom)? {
        None => {
            return Ok(Some(AepWitness {
                h: morph::compose(&w.map, &m),
                k: (0..inst.t.size()).collect(),
                t2: inst.t.clone(),
                po: c,
                how: "class amalgam and weak-pushout map".into(),
            }));
        }
        Some(v) => log.push(format!("weak-pushout map is not a hom: {v}")),
    }
    let kappa = construct::mediating_map(&chat, &g1n, &g2n)?;
    let mut on_cn: Vec<Option<Elem>> = vec![None; cn.size()];
    for (z, &x) in kappa.iter().enumerate() {
        match on_cn[x] {
            Some(y) if y != m[z] => {
                log.push("T-values clash on a point of Cⁿ".into());
                return Ok(None);
            }
            _ => on_cn[x] = Some(m[z]),
        }
    }
    let e: Vec<Elem> = (0..cn.size()).filter(|&x| on_cn[x].is_some()).collect();
    let sub = cn.induced(&e);
    let p: Vec<Elem> = e.iter().map(|&x| on_cn[x].unwrap_or_default()).collect();
    if let Some(v) = morph::check(&sub, &inst.t, &p, Kind::Hom)? {
        log.push(format!("prescribed values on the images of the powers are not a hom: {v}"));
        return Ok(None);
    }
    match hap_core(class, &sub, &inst.t, &p, &cn, &e, budget)? {
        HapOutcome::Found(sq, how) => Ok(Some(AepWitness {
            po: c,
            t2: sq.d,
            h: sq.fhat,
            k: sq.ghat,
            how: format!("class amalgam, then HAP by {how}"),
        })),
        HapOutcome::NotFound { reason, .. } => {
            log.push(format!("HAP step failed: {reason}"));
            Ok(None)
        }
    }
}

enum CandidateOutcome {
    Found(AepWitness),
    Rejected,
    Searched { nodes: u64, budget_hit: bool },
}

fn aepn_try_candidate(class: &AgeDescriptor, n: usize, inst: &AepInstance, po: &PushoutResult, budget: &Budget) -> Result<CandidateOutcome> {
    let (cn, g1n, g2n) = checked_power_legs(inst, po, n);
    let mut fixed: Vec<Option<Elem>> = vec![None; cn.size()];
    for (leg, h) in [(&g1n, &inst.h1), (&g2n, &inst.h2)] {
        for (x, &cx) in leg.iter().enumerate() {
            match fixed[cx] {
                Some(y) if y != h[x] => return Ok(CandidateOutcome::Rejected),
                _ => fixed[cx] = Some(h[x]),
            }
        }
    }
    Ok(match extend_into(class, &cn, &fixed, &inst.t, budget.max_t, budget.nodes)? {
        ExtendOutcome::Found(e) => CandidateOutcome::Found(AepWitness {
            po: po.clone(),
            t2: e.t,
            h: e.h,
            k: e.k,
            how: "candidate search".into(),
        }),
        ExtendOutcome::FixedNotHom { .. } => CandidateOutcome::Rejected,
        ExtendOutcome::Exhausted { nodes } => CandidateOutcome::Searched { nodes, budget_hit: false },
        ExtendOutcome::BudgetHit { nodes } => CandidateOutcome::Searched { nodes, budget_hit: true },
    })
}

#[derive(Default)]
pub(crate) struct SearchStats {
    pub candidates: u64,
    pub tried: u64,
    pub rejected: u64,
    pub nodes: u64,
    pub budget_hits: u64,
    pub skipped_carriers: u64,
}

pub(crate) fn aepn_search(class: &AgeDescriptor, n: usize, inst: &AepInstance, budget: &Budget, stats: &mut SearchStats) -> Result<Option<AepWitness>> {
    let (cands, skipped) = amalgam_candidates(class, &inst.amalgam, budget.max_c)?;
    stats.candidates = cands.len() as u64;
    stats.skipped_carriers = skipped;
    let chunk = (par::num_threads() * 2).max(1);
    for block in cands.chunks(chunk) {
        let outs = par::map(block, |po| aepn_try_candidate(class, n, inst, po, budget));
        for out in outs {
            stats.tried += 1;
            match out? {
                CandidateOutcome::Found(w) => return Ok(Some(w)),
                CandidateOutcome::Rejected => stats.rejected += 1,
                CandidateOutcome::Searched { nodes, budget_hit } => {
                    stats.nodes += nodes;
                    stats.budget_hits += budget_hit as u64;
                }
            }
        }
    }
    Ok(None)
}

/// Verifies the AEPⁿ preconditions: embeddings, homs and `h1∘f1ⁿ = h2∘f2ⁿ`.
pub fn validate_aepn(class: &AgeDescriptor, n: usize, inst: &AepInstance) -> Result<()> {
    if n == 0 {
        return Err(Error::Arity("power exponent must be positive".into()));
    }
    let am = &inst.amalgam;
    need_map(&am.a, &am.b1, &am.f1, Kind::Embedding, "f1")?;
    need_map(&am.a, &am.b2, &am.f2, Kind::Embedding, "f2")?;
    for (w, s) in [("A", &am.a), ("B1", &am.b1), ("B2", &am.b2), ("T", &inst.t)] {
        need_member(class, w, s)?;
    }
    need_map(&power(&am.b1, n), &inst.t, &inst.h1, Kind::Hom, "h1")?;
    need_map(&power(&am.b2, n), &inst.t, &inst.h2, Kind::Hom, "h2")?;
    let f1n = power_map(&am.f1, am.a.size(), am.b1.size(), n);
    let f2n = power_map(&am.f2, am.a.size(), am.b2.size(), n);
    if morph::compose(&f1n, &inst.h1) != morph::compose(&f2n, &inst.h2) {
        return Err(Error::Precondition("h1∘f1ⁿ differs from h2∘f2ⁿ".into()));
    }
    Ok(())
}

pub fn check_aepn(class: &AgeDescriptor, n: usize, inst: &AepInstance, budget: &Budget) -> Result<Certificate> {
    check_aepn_with(class, n, inst, budget, Strategy::Auto)
}

pub fn check_aepn_with(class: &AgeDescriptor, n: usize, inst: &AepInstance, budget: &Budget, strategy: Strategy) -> Result<Certificate> {
    validate_aepn(class, n, inst)?;
    let property = format!("AEP{n}");
    let mut log = Vec::new();
    let mut stats = SearchStats::default();
    let mut found = None;
    if strategy != Strategy::Search {
        found = aepn_constructive(class, n, inst, budget, &mut log)?;
    }
    if found.is_none() && strategy != Strategy::Constructive {
        found = aepn_search(class, n, inst, budget, &mut stats)?;
    }
    let Some(w) = found else {
        let mut cert = Certificate::new(&property, class.name(), Verdict::NoWitnessUpToBudget);
        cert.trace = log;
        if strategy != Strategy::Constructive {
            cert.note(format!(
                "no witness among {} candidate amalgams with at most {} points and targets with at most {} points",
                stats.candidates, budget.max_c, budget.max_t
            ));
        }
        cert.note("non-conclusive");
        push_stats(&mut cert, &stats, budget);
        return Ok(cert);
    };
    let cert = aepn_certificate(class, n, inst, &w, log, &stats, budget)?;
    Ok(cert)
}

fn push_stats(cert: &mut Certificate, s: &SearchStats, budget: &Budget) {
    cert.count("candidates", s.candidates);
    cert.count("tried", s.tried);
    cert.count("rejected", s.rejected);
    cert.count("nodes", s.nodes);
    cert.count("budget_hits", s.budget_hits);
    cert.count("skipped_carriers", s.skipped_carriers);
    cert.count("max_c", budget.max_c as u64);
    cert.count("max_t", budget.max_t as u64);
}

fn aepn_certificate(
    class: &AgeDescriptor,
    n: usize,
    inst: &AepInstance,
    w: &AepWitness,
    log: Vec<String>,
    stats: &SearchStats,
    budget: &Budget,
) -> Result<Certificate> {
    let am = &inst.amalgam;
    let mut cert = Certificate::new(format!("AEP{n}"), class.name(), Verdict::Witness);
    cert.witness = Some("T'".into());
    let (cn, g1n, g2n) = checked_power_legs(inst, &w.po, n);
    for (name, s) in [
        ("A", am.a.clone()),
        ("B1", am.b1.clone()),
        ("B2", am.b2.clone()),
        ("T", inst.t.clone()),
        ("C", w.po.c.clone()),
        ("T'", w.t2.clone()),
        ("An", power(&am.a, n)),
        ("B1n", power(&am.b1, n)),
        ("B2n", power(&am.b2, n)),
        ("Cn", cn),
    ] {
        cert.add_structure(name, s);
    }
    let a = am.a.size();
    cert.add_map("f1", "A", "B1", Kind::Embedding, am.f1.clone());
    cert.add_map("f2", "A", "B2", Kind::Embedding, am.f2.clone());
    cert.add_map("g1", "B1", "C", Kind::Embedding, w.po.g1.clone());
    cert.add_map("g2", "B2", "C", Kind::Embedding, w.po.g2.clone());
    cert.add_map("f1n", "An", "B1n", Kind::Embedding, power_map(&am.f1, a, am.b1.size(), n));
    cert.add_map("f2n", "An", "B2n", Kind::Embedding, power_map(&am.f2, a, am.b2.size(), n));
    cert.add_map("g1n", "B1n", "Cn", Kind::Embedding, g1n);
    cert.add_map("g2n", "B2n", "Cn", Kind::Embedding, g2n);
    cert.add_map("h1", "B1n", "T", Kind::Hom, inst.h1.clone());
    cert.add_map("h2", "B2n", "T", Kind::Hom, inst.h2.clone());
    cert.add_map("h", "Cn", "T'", Kind::Hom, w.h.clone());
    cert.add_map("k", "T", "T'", Kind::Embedding, w.k.clone());
    cert.equal(&["f1", "g1"], &["f2", "g2"]);
    cert.equal(&["f1n", "h1"], &["f2n", "h2"]);
    cert.equal(&["g1n", "h"], &["h1", "k"]);
    cert.equal(&["g2n", "h"], &["h2", "k"]);
    for (m, base) in [("f1n", "f1"), ("f2n", "f2"), ("g1n", "g1"), ("g2n", "g2")] {
        cert.facts.push(Fact::PowerOf {
            map: m.into(),
            base: base.into(),
            n,
        });
    }
    for (s, base) in [("An", "A"), ("B1n", "B1"), ("B2n", "B2"), ("Cn", "C")] {
        cert.facts.push(Fact::IsPower {
            structure: s.into(),
            base: base.into(),
            n,
        });
    }
    cert.trace = log;
    cert.note(w.how.clone());
    push_stats(&mut cert, stats, budget);
    cert.replay_or_err()?;
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relcore::Signature;

    fn g(labels: &[&str], edges: &[(&str, &str)]) -> Structure {
        let mut t: Vec<(&str, Vec<&str>)> = Vec::new();
        for &(x, y) in edges {
            t.push(("E", vec![x, y]));
            t.push(("E", vec![y, x]));
        }
        let refs: Vec<(&str, &[&str])> = t.iter().map(|(s, v)| (*s, v.as_slice())).collect();
        Structure::build(Signature::binary("E"), labels, &refs).unwrap()
    }

    fn le(labels: &[&str], pairs: &[(&str, &str)]) -> Structure {
        let mut t: Vec<Vec<&str>> = labels.iter().map(|&x| vec![x, x]).collect();
        t.extend(pairs.iter().map(|&(x, y)| vec![x, y]));
        let refs: Vec<(&str, &[&str])> = t.iter().map(|v| ("le", v.as_slice())).collect();
        Structure::build(Signature::binary("le"), labels, &refs).unwrap()
    }

    #[test]
    fn graph_ap_is_free_amalgam() {
        let inst = AmalgamInstance::over_shared(g(&["a", "u"], &[("a", "u")]), g(&["a", "v"], &[("a", "v")]), &["a"]).unwrap();
        let cert = check_ap(&AgeDescriptor::simple_graphs(), &inst, 4).unwrap();
        assert_eq!(cert.verdict, Verdict::Witness);
        assert_eq!(cert.structure("C").unwrap().size(), 3);
        assert_eq!(cert.replay_status(), "ok");
    }

    #[test]
    fn graph_candidates_of_path() {
        let inst = AmalgamInstance::over_shared(g(&["a", "u"], &[("a", "u")]), g(&["a", "v"], &[("a", "v")]), &["a"]).unwrap();
        let (c, skipped) = amalgam_candidates(&AgeDescriptor::simple_graphs(), &inst, 4).unwrap();
        // u≠v with and without the edge uv, and u=v.
        assert_eq!(c.len(), 3);
        assert_eq!(skipped, 0);
        assert_eq!(c[0].c.relation(0).len(), 4);
    }

    #[test]
    fn graph_hap_collapsing_non_adjacent() {
        let a = g(&["x", "y"], &[]);
        let b = g(&["p"], &[]);
        let c = g(&["x", "y", "z"], &[("x", "z"), ("y", "z")]);
        let inst = HapInstance { a, b, c, f: vec![0, 0], g: vec![0, 1] };
        let cert = check_hap(&AgeDescriptor::simple_graphs(), &inst, &Budget::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::Witness);
        assert_eq!(cert.structure("D").unwrap().size(), 2);
    }

    #[test]
    fn hapn_identity_case() {
        let a = le(&["p", "q"], &[("p", "q")]);
        let t1 = power(&a, 2);
        let inst = HapnInstance {
            b: a.clone(),
            g: vec![0, 1],
            a_map: (0..4).collect(),
            t1,
            a,
        };
        let cert = check_hapn(&AgeDescriptor::posets(), 2, &inst, &Budget::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::Witness);
        assert_eq!(cert.structure("T2").unwrap().size(), 4);
    }

    #[test]
    fn aepn_trivial_instance() {
        let a = le(&["p"], &[]);
        let am = AmalgamInstance::new(a.clone(), a.clone(), a.clone(), vec![0], vec![0]).unwrap();
        let inst = AepInstance {
            amalgam: am,
            t: a,
            h1: vec![0],
            h2: vec![0],
        };
        for s in [Strategy::Constructive, Strategy::Search] {
            let cert = check_aepn_with(&AgeDescriptor::posets(), 2, &inst, &Budget::default(), s).unwrap();
            assert_eq!(cert.verdict, Verdict::Witness);
            assert_eq!(cert.structure("C").unwrap().size(), 1);
        }
    }

    fn hard_graph_instance() -> AepInstance {
        let am = AmalgamInstance::over_shared(g(&["a", "u"], &[("a", "u")]), g(&["a", "v"], &[("a", "v")]), &["a"]).unwrap();
        let chat = construct::free_amalgam(&am.power(2)).unwrap();
        AepInstance {
            amalgam: am,
            t: chat.c,
            h1: chat.g1,
            h2: chat.g2,
        }
    }

    #[test]
    fn graphs_edge_instance_has_no_witness() {
        let inst = hard_graph_instance();
        for s in [Strategy::Constructive, Strategy::Search] {
            let cert = check_aepn_with(&AgeDescriptor::simple_graphs(), 2, &inst, &Budget::default(), s).unwrap();
            assert_eq!(cert.verdict, Verdict::NoWitnessUpToBudget, "{s:?}: {:?}", cert.trace);
        }
    }

    #[test]
    fn graphs_over_empty_base_have_witness() {
        let am = AmalgamInstance::over_shared(g(&["u", "w"], &[("u", "w")]), g(&["v"], &[]), &[] as &[&str]).unwrap();
        let chat = construct::free_amalgam(&am.power(2)).unwrap();
        let inst = AepInstance {
            amalgam: am,
            t: chat.c,
            h1: chat.g1,
            h2: chat.g2,
        };
        for s in [Strategy::Constructive, Strategy::Search] {
            let cert = check_aepn_with(&AgeDescriptor::simple_graphs(), 2, &inst, &Budget::default(), s).unwrap();
            assert_eq!(cert.verdict, Verdict::Witness, "{s:?}: {:?}", cert.trace);
        }
    }

    #[test]
    fn poset_aepn_constructive() {
        let am = AmalgamInstance::over_shared(le(&["a", "u"], &[("a", "u")]), le(&["a", "v"], &[("v", "a")]), &["a"]).unwrap();
        let chat = construct::poset_amalgam(&am.power(2)).unwrap();
        let inst = AepInstance {
            amalgam: am,
            t: chat.c,
            h1: chat.g1,
            h2: chat.g2,
        };
        let cert = check_aepn_with(&AgeDescriptor::posets(), 2, &inst, &Budget::default(), Strategy::Constructive).unwrap();
        assert_eq!(cert.verdict, Verdict::Witness, "{:?}", cert.trace);
        assert_eq!(cert.replay_status(), "ok");
    }

    #[test]
    fn bad_precondition_is_error() {
        let mut inst = hard_graph_instance();
        inst.h2 = vec![0; inst.h2.len()];
        assert!(validate_aepn(&AgeDescriptor::simple_graphs(), 2, &inst).is_err());
    }
}
