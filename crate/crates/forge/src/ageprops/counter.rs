//! The two AEPⁿ failures with budget-independent arguments: rational metric
//! spaces and chains.

use std::cmp::Ordering;

use num_traits::Zero;

use super::age::{integer_grid, AgeDescriptor};
use super::cert::{Certificate, Fact, Verdict};
use super::checks::{check_aepn_with, AepInstance, Strategy};
use super::search::Budget;
use crate::construct::{self, power, power_map, tuple_index, AmalgamInstance};
use crate::error::{Error, Result};
use crate::morph::Kind;
use crate::relcore::{self, Elem, MetricSpace, Signature, Structure, Q};

fn q(n: i64) -> Q {
    Q::from_integer(n)
}

fn need_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Arity(format!("the counterexample needs n ≥ 2, got {n}")));
    }
    Ok(())
}

/// Grid used by the metric counterexample: both legs and their sum fit.
pub const URYSOHN_GRID_MAX: i64 = 11;

/// The inequality chain behind the metric counterexample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UrysohnChain {
    /// Labels of `x̄ = (a,u,…,u)` and `ȳ = (v,a,…,a)`.
    pub x: String,
    pub y: String,
    pub d_b1: Q,
    pub d_b2: Q,
    /// `d_T(h1(x̄), h2(ȳ))`, preserved by the embedding `k`.
    pub d_t: Q,
    /// Upper bound on `d_Cⁿ(g1ⁿ(x̄), g2ⁿ(ȳ))` for every amalgam `C`.
    pub bound_cn: Q,
}

impl UrysohnChain {
    pub fn contradicts(&self) -> bool {
        self.bound_cn < self.d_t
    }
}

/// Exhaustive scan statistics: every metric space on at most `max_points`
/// points with distances in the grid, and every pair of embeddings of the two legs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UrysohnScan {
    pub spaces: u64,
    pub embedding_pairs: u64,
    pub max_distance: Q,
}

fn tuple_label(parts: &[&str]) -> String {
    format!("({})", parts.join(","))
}

/// The instance `(A={a}, B1={a,u}, B2={a,v}, T, h1, h2)` with `T` the glued
/// power metric over `Aⁿ`.
pub fn urysohn_instance(n: usize) -> Result<(AgeDescriptor, AepInstance)> {
    need_n(n)?;
    let class = AgeDescriptor::metric(integer_grid(URYSOHN_GRID_MAX))?;
    let ths = class.thresholds().unwrap_or_default();
    let a = relcore::encode_metric(&MetricSpace::from_pairs(&["a"], &[])?, &ths)?;
    let b1 = relcore::encode_metric(&MetricSpace::from_pairs(&["a", "u"], &[("a", "u", q(1))])?, &ths)?;
    let b2 = relcore::encode_metric(&MetricSpace::from_pairs(&["a", "v"], &[("a", "v", q(10))])?, &ths)?;
    let am = AmalgamInstance::new(a, b1, b2, vec![0], vec![0])?;
    let m1 = relcore::decode_metric(&power(&am.b1, n))?;
    let m2 = relcore::decode_metric(&power(&am.b2, n))?;
    let f1n = power_map(&am.f1, 1, 2, n);
    let f2n = power_map(&am.f2, 1, 2, n);
    let pairs: Vec<(Elem, Elem)> = f1n.iter().copied().zip(f2n.iter().copied()).collect();
    let (tm, h1, h2) = construct::metric_glue(&m1, &m2, &pairs, None)?;
    let t = relcore::encode_metric(&tm, &ths)?;
    Ok((class, AepInstance { amalgam: am, t, h1, h2 }))
}

fn xy(n: usize) -> (Vec<Elem>, Vec<Elem>) {
    let mut x = vec![1; n];
    x[0] = 0;
    let mut y = vec![0; n];
    y[0] = 1;
    (x, y)
}

pub fn urysohn_chain(n: usize) -> Result<UrysohnChain> {
    let (_, inst) = urysohn_instance(n)?;
    let (x, y) = xy(n);
    let am = &inst.amalgam;
    let mt = relcore::decode_metric(&inst.t)?;
    let m1 = relcore::decode_metric(&power(&am.b1, n))?;
    let m2 = relcore::decode_metric(&power(&am.b2, n))?;
    let (xi, yi, ai) = (tuple_index(2, &x), tuple_index(2, &y), 0);
    let d_b1 = m1.d(xi, ai);
    let d_b2 = m2.d(ai, yi);
    // Coordinatewise: d(a,v) on the first coordinate, d(u,a) on the rest, in any C.
    let bound_cn = d_b2.max(d_b1);
    Ok(UrysohnChain {
        x: power(&am.b1, n).label(xi).to_string(),
        y: power(&am.b2, n).label(yi).to_string(),
        d_b1,
        d_b2,
        d_t: mt.d(inst.h1[xi], inst.h2[yi]),
        bound_cn,
    })
}

/// Every metric space on 2 or 3 points over the grid, every isometric copy
/// of the two legs sharing `a`, and the largest `d_Cⁿ(g1ⁿ(x̄), g2ⁿ(ȳ))` seen.
pub fn urysohn_scan(n: usize, max_points: usize) -> Result<UrysohnScan> {
    need_n(n)?;
    let grid = integer_grid(URYSOHN_GRID_MAX);
    let mut scan = UrysohnScan::default();
    for size in 1..=max_points {
        let pairs: Vec<(usize, usize)> = (0..size).flat_map(|i| (i + 1..size).map(move |j| (i, j))).collect();
        let mut pick = vec![0usize; pairs.len()];
        loop {
            let mut d = vec![vec![Q::zero(); size]; size];
            for (k, &(i, j)) in pairs.iter().enumerate() {
                d[i][j] = grid[pick[k]];
                d[j][i] = grid[pick[k]];
            }
            let labels = (0..size).map(|i| format!("c{i}")).collect();
            if let Ok(m) = MetricSpace::new(labels, d) {
                scan.spaces += 1;
                for p in 0..size {
                    for u in 0..size {
                        for v in 0..size {
                            if m.d(p, u) != q(1) || m.d(p, v) != q(10) {
                                continue;
                            }
                            scan.embedding_pairs += 1;
                            // g1ⁿ(x̄) = (p,u,…,u), g2ⁿ(ȳ) = (v,p,…,p); product metric is the max.
                            let dist = m.d(p, v).max(m.d(u, p));
                            scan.max_distance = scan.max_distance.max(dist);
                        }
                    }
                }
            }
            let mut j = pick.len();
            loop {
                if j == 0 {
                    break;
                }
                j -= 1;
                pick[j] += 1;
                if pick[j] < grid.len() {
                    break;
                }
                pick[j] = 0;
            }
            if pick.iter().all(|&k| k == 0) {
                break;
            }
        }
    }
    Ok(scan)
}

/// Certificate of failure of AEPⁿ for rational metric spaces, `n ≥ 2`.
pub fn urysohn_counterexample(n: usize) -> Result<Certificate> {
    let (class, inst) = urysohn_instance(n)?;
    let chain = urysohn_chain(n)?;
    let am = &inst.amalgam;
    let mut cert = Certificate::new(format!("AEP{n}"), class.name(), Verdict::ProofOfFailure);
    let c = class.amalgam(am)?;
    let cn = power(&c.c, n);
    for (name, s) in [
        ("A", am.a.clone()),
        ("B1", am.b1.clone()),
        ("B2", am.b2.clone()),
        ("T", inst.t.clone()),
        ("An", power(&am.a, n)),
        ("B1n", power(&am.b1, n)),
        ("B2n", power(&am.b2, n)),
        ("C", c.c.clone()),
        ("Cn", cn.clone()),
    ] {
        cert.add_structure(name, s);
    }
    cert.add_map("f1", "A", "B1", Kind::Embedding, am.f1.clone());
    cert.add_map("f2", "A", "B2", Kind::Embedding, am.f2.clone());
    cert.add_map("f1n", "An", "B1n", Kind::Embedding, power_map(&am.f1, 1, 2, n));
    cert.add_map("f2n", "An", "B2n", Kind::Embedding, power_map(&am.f2, 1, 2, n));
    cert.add_map("h1", "B1n", "T", Kind::Embedding, inst.h1.clone());
    cert.add_map("h2", "B2n", "T", Kind::Embedding, inst.h2.clone());
    cert.add_map("g1", "B1", "C", Kind::Embedding, c.g1.clone());
    cert.add_map("g2", "B2", "C", Kind::Embedding, c.g2.clone());
    let cs = c.c.size();
    cert.add_map("g1n", "B1n", "Cn", Kind::Embedding, power_map(&c.g1, 2, cs, n));
    cert.add_map("g2n", "B2n", "Cn", Kind::Embedding, power_map(&c.g2, 2, cs, n));
    cert.equal(&["f1", "g1"], &["f2", "g2"]);
    cert.equal(&["f1n", "h1"], &["f2n", "h2"]);
    for (m, base) in [("f1n", "f1"), ("f2n", "f2"), ("g1n", "g1"), ("g2n", "g2")] {
        cert.facts.push(Fact::PowerOf { map: m.into(), base: base.into(), n });
    }
    for (s, base) in [("An", "A"), ("B1n", "B1"), ("B2n", "B2"), ("Cn", "C")] {
        cert.facts.push(Fact::IsPower { structure: s.into(), base: base.into(), n });
    }
    let (x, y) = xy(n);
    let in_t = |leg: &[Elem], t: &[Elem]| inst.t.label(leg[tuple_index(2, t)]).to_string();
    let tx = in_t(&inst.h1, &x);
    let ty = in_t(&inst.h2, &y);
    let abar = tuple_label(&vec!["a"; n]);
    let cx = cn.label(tuple_index(cs, &x.iter().map(|&i| c.g1[i]).collect::<Vec<_>>())).to_string();
    let cy = cn.label(tuple_index(cs, &y.iter().map(|&i| c.g2[i]).collect::<Vec<_>>())).to_string();
    let lt11 = relcore::threshold_symbol(chain.d_t);
    cert.facts.extend([
        Fact::Sends { map: "h1".into(), x: chain.x.clone(), y: tx.clone() },
        Fact::Sends { map: "h2".into(), x: chain.y.clone(), y: ty.clone() },
        Fact::Distance { structure: "B1n".into(), x: chain.x.clone(), y: abar.clone(), value: chain.d_b1 },
        Fact::Distance { structure: "B2n".into(), x: abar, y: chain.y.clone(), value: chain.d_b2 },
        Fact::Distance { structure: "T".into(), x: tx.clone(), y: ty.clone(), value: chain.d_t },
        Fact::Distance { structure: "Cn".into(), x: cx.clone(), y: cy.clone(), value: chain.bound_cn },
        Fact::Holds { structure: "Cn".into(), symbol: lt11.clone(), tuple: vec![cx, cy], expected: true },
        Fact::Holds { structure: "T".into(), symbol: lt11, tuple: vec![tx, ty], expected: false },
    ]);
    cert.note(format!("x̄ = {}, ȳ = {}", chain.x, chain.y));
    cert.note(format!(
        "d_T(h1(x̄), h2(ȳ)) = {} + {} = {}; k is an embedding, so the same distance holds in T'",
        chain.d_b1, chain.d_b2, chain.d_t
    ));
    cert.note(format!(
        "in any amalgam C, d_Cⁿ(g1ⁿ(x̄), g2ⁿ(ȳ)) = max(d(a,v), d(u,a)) = max({}, {}) = {}",
        chain.d_b2, chain.d_b1, chain.bound_cn
    ));
    cert.note(format!(
        "h ∘ g1ⁿ = k ∘ h1 and h ∘ g2ⁿ = k ∘ h2 force a non-expansive h to shrink {} to at most {}: {} < {}",
        chain.d_t, chain.bound_cn, chain.bound_cn, chain.d_t
    ));
    let scan = urysohn_scan(n, 3)?;
    cert.note(format!(
        "exhaustive scan: {} spaces with at most 3 points, {} embedding pairs, largest d_Cⁿ = {}",
        scan.spaces, scan.embedding_pairs, scan.max_distance
    ));
    cert.count("scan_spaces", scan.spaces);
    cert.count("scan_embedding_pairs", scan.embedding_pairs);
    cert.count("scan_max_distance", scan.max_distance.to_integer() as u64);
    let budget = Budget {
        max_c: 3,
        ..Budget::default()
    };
    let search = check_aepn_with(&class, n, &inst, &budget, Strategy::Search)?;
    cert.note(format!("search corroboration with |C| ≤ 3: {}", search.verdict));
    for (k, v) in &search.stats {
        cert.count(&format!("search_{k}"), *v);
    }
    if !chain.contradicts() || scan.max_distance >= chain.d_t || search.verdict != Verdict::NoWitnessUpToBudget {
        return Err(Error::Precondition("metric counterexample did not reproduce".into()));
    }
    cert.replay_or_err()?;
    Ok(cert)
}

/// One case of the chain argument. `forced` is how `g1ⁿ(ū)` compares with
/// `g2ⁿ(v̄)` in `Cⁿ`; `relation` is how `left = h1(ū)` compares with
/// `right = h2(v̄)` in `T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainsCase {
    /// Order of `u` and `v` in `C`.
    pub order: Ordering,
    pub u_bar: Vec<String>,
    pub v_bar: Vec<String>,
    pub left: String,
    pub right: String,
    pub forced: Ordering,
    pub relation: Ordering,
}

impl ChainsCase {
    /// `k` preserves and reflects the order, so `relation` must agree with `forced`.
    pub fn contradicts(&self) -> bool {
        match self.forced {
            Ordering::Equal => self.relation != Ordering::Equal,
            Ordering::Less => self.relation == Ordering::Greater,
            Ordering::Greater => self.relation == Ordering::Less,
        }
    }
}

/// The seven-element chain as listed from the bottom.
pub const CHAIN_T: [&str; 7] = ["aa", "au", "av", "va", "vv", "ua", "uu"];

fn chain(labels: &[&str]) -> Structure {
    let mut t = Vec::new();
    for i in 0..labels.len() {
        for j in i..labels.len() {
            t.push(vec![labels[i], labels[j]]);
        }
    }
    let refs: Vec<(&str, &[&str])> = t.iter().map(|v| ("le", v.as_slice())).collect();
    Structure::build(Signature::binary("le"), labels, &refs).unwrap_or_else(|e| unreachable!("chain: {e}"))
}

pub fn chains_instance(n: usize) -> Result<(AgeDescriptor, AepInstance)> {
    need_n(n)?;
    let class = AgeDescriptor::chains();
    let am = AmalgamInstance::new(chain(&["a"]), chain(&["a", "u"]), chain(&["a", "v"]), vec![0], vec![0])?;
    let t = chain(&CHAIN_T);
    let leg = |b: &Structure| -> Result<Vec<Elem>> {
        construct::all_tuples(2, n)
            .iter()
            .map(|x| {
                let l = format!("{}{}", b.label(x[0]), b.label(x[1]));
                t.index_of(&l).ok_or_else(|| Error::UnknownElement(l))
            })
            .collect()
    };
    let h1 = leg(&am.b1)?;
    let h2 = leg(&am.b2)?;
    Ok((class, AepInstance { amalgam: am, t, h1, h2 }))
}

/// The three cases of how `u` and `v` sit in an amalgam chain.
pub fn chains_cases(n: usize) -> Result<Vec<ChainsCase>> {
    let (_, inst) = chains_instance(n)?;
    let t = &inst.t;
    let rank = |l: &str| t.index_of(l).unwrap_or(usize::MAX);
    let mut out = Vec::new();
    for order in [Ordering::Less, Ordering::Equal, Ordering::Greater] {
        let (u_bar, v_bar, forced) = match order {
            Ordering::Greater => {
                let mut u = vec![1; n];
                let mut v = vec![1; n];
                u[0] = 0;
                v[0] = 0;
                (u, v, Ordering::Greater)
            }
            o => (vec![1; n], vec![1; n], o),
        };
        let left = t.label(inst.h1[tuple_index(2, &u_bar)]).to_string();
        let right = t.label(inst.h2[tuple_index(2, &v_bar)]).to_string();
        out.push(ChainsCase {
            order,
            u_bar: u_bar.iter().map(|&i| inst.amalgam.b1.label(i).to_string()).collect(),
            v_bar: v_bar.iter().map(|&i| inst.amalgam.b2.label(i).to_string()).collect(),
            relation: rank(&left).cmp(&rank(&right)),
            left,
            right,
            forced,
        });
    }
    Ok(out)
}

fn symbol(o: Ordering) -> &'static str {
    match o {
        Ordering::Less => "<",
        Ordering::Equal => "=",
        Ordering::Greater => ">",
    }
}

/// Certificate of failure of AEPⁿ for chains, `n ≥ 2`.
pub fn chains_counterexample(n: usize) -> Result<Certificate> {
    let (class, inst) = chains_instance(n)?;
    let cases = chains_cases(n)?;
    let am = &inst.amalgam;
    let mut cert = Certificate::new(format!("AEP{n}"), class.name(), Verdict::ProofOfFailure);
    for (name, s) in [
        ("A", am.a.clone()),
        ("B1", am.b1.clone()),
        ("B2", am.b2.clone()),
        ("T", inst.t.clone()),
        ("An", power(&am.a, n)),
        ("B1n", power(&am.b1, n)),
        ("B2n", power(&am.b2, n)),
    ] {
        cert.add_structure(name, s);
    }
    cert.add_map("f1", "A", "B1", Kind::Embedding, am.f1.clone());
    cert.add_map("f2", "A", "B2", Kind::Embedding, am.f2.clone());
    cert.add_map("f1n", "An", "B1n", Kind::Embedding, power_map(&am.f1, 1, 2, n));
    cert.add_map("f2n", "An", "B2n", Kind::Embedding, power_map(&am.f2, 1, 2, n));
    cert.add_map("h1", "B1n", "T", Kind::Hom, inst.h1.clone());
    cert.add_map("h2", "B2n", "T", Kind::Hom, inst.h2.clone());
    cert.equal(&["f1n", "h1"], &["f2n", "h2"]);
    cert.note(format!("T: {}", CHAIN_T.join(" < ")));
    cert.note("h1, h2 send (x1,…,xn) to x1x2");
    let b1n = power(&am.b1, n);
    let b2n = power(&am.b2, n);
    for case in &cases {
        let tag = match case.order {
            Ordering::Less => "lt",
            Ordering::Equal => "eq",
            Ordering::Greater => "gt",
        };
        // Representative chain for the case; the argument uses only the order of u and v.
        let (labels, g2): (Vec<&str>, Vec<Elem>) = match case.order {
            Ordering::Less => (vec!["a", "u", "v"], vec![0, 2]),
            Ordering::Equal => (vec!["a", "u"], vec![0, 1]),
            Ordering::Greater => (vec!["a", "v", "u"], vec![0, 1]),
        };
        let c = chain(&labels);
        let g1: Vec<Elem> = match case.order {
            Ordering::Greater => vec![0, 2],
            _ => vec![0, 1],
        };
        let cs = c.size();
        let cn = power(&c, n);
        let (cname, cnname) = (format!("C_{tag}"), format!("Cn_{tag}"));
        let (g1n_name, g2n_name) = (format!("g1n_{tag}"), format!("g2n_{tag}"));
        let g1n = power_map(&g1, 2, cs, n);
        let g2n = power_map(&g2, 2, cs, n);
        let ui = tuple_index(2, &case.u_bar.iter().map(|l| am.b1.index_of(l).unwrap_or(0)).collect::<Vec<_>>());
        let vi = tuple_index(2, &case.v_bar.iter().map(|l| am.b2.index_of(l).unwrap_or(0)).collect::<Vec<_>>());
        let (cu, cv) = (cn.label(g1n[ui]).to_string(), cn.label(g2n[vi]).to_string());
        cert.add_structure(&cname, c);
        cert.add_structure(&cnname, cn);
        cert.add_map(&format!("g1_{tag}"), "B1", &cname, Kind::Embedding, g1);
        cert.add_map(&format!("g2_{tag}"), "B2", &cname, Kind::Embedding, g2);
        cert.add_map(&g1n_name, "B1n", &cnname, Kind::Embedding, g1n);
        cert.add_map(&g2n_name, "B2n", &cnname, Kind::Embedding, g2n);
        cert.equal(&["f1", &format!("g1_{tag}")], &["f2", &format!("g2_{tag}")]);
        cert.facts.push(Fact::PowerOf { map: g1n_name.clone(), base: format!("g1_{tag}"), n });
        cert.facts.push(Fact::PowerOf { map: g2n_name.clone(), base: format!("g2_{tag}"), n });
        cert.facts.push(Fact::IsPower { structure: cnname.clone(), base: cname.clone(), n });
        let (ubl, vbl) = (b1n.label(ui).to_string(), b2n.label(vi).to_string());
        cert.facts.push(Fact::Sends { map: "h1".into(), x: ubl.clone(), y: case.left.clone() });
        cert.facts.push(Fact::Sends { map: "h2".into(), x: vbl.clone(), y: case.right.clone() });
        match case.forced {
            Ordering::Equal => {
                cert.facts.push(Fact::Sends { map: g1n_name, x: ubl.clone(), y: cu.clone() });
                cert.facts.push(Fact::Sends { map: g2n_name, x: vbl.clone(), y: cu });
            }
            Ordering::Less => {
                cert.facts.push(Fact::Holds { structure: cnname.clone(), symbol: "le".into(), tuple: vec![cu, cv], expected: true });
            }
            Ordering::Greater => {
                cert.facts.push(Fact::Holds { structure: cnname.clone(), symbol: "le".into(), tuple: vec![cv, cu], expected: true });
            }
        }
        let (lo, hi) = match case.relation {
            Ordering::Greater => (&case.right, &case.left),
            _ => (&case.left, &case.right),
        };
        if case.relation != Ordering::Equal {
            cert.facts.push(Fact::Holds { structure: "T".into(), symbol: "le".into(), tuple: vec![hi.clone(), lo.clone()], expected: false });
        }
        let line = match case.order {
            Ordering::Less => format!(
                "u < v: ū = {ubl}, v̄ = {vbl}; g1ⁿ(ū) ≤ g2ⁿ(v̄) in Cⁿ forces k({}) ≤ k({}), but {} {} {} in T",
                case.left, case.right, case.left, symbol(case.relation), case.right
            ),
            Ordering::Equal => format!(
                "u = v: ū = {ubl}, v̄ = {vbl}; g1ⁿ(ū) = g2ⁿ(v̄) forces k({}) = k({}), but {} ≠ {}",
                case.left, case.right, case.left, case.right
            ),
            Ordering::Greater => format!(
                "u > v: ū = {ubl}, v̄ = {vbl}; g1ⁿ(ū) ≥ g2ⁿ(v̄) in Cⁿ forces k({}) ≥ k({}), but {} {} {} in T",
                case.left, case.right, case.left, symbol(case.relation), case.right
            ),
        };
        cert.note(line);
        if !case.contradicts() {
            return Err(Error::Precondition(format!("chain case {tag} did not reproduce")));
        }
    }
    let budget = Budget {
        max_c: 3,
        ..Budget::default()
    };
    let search = check_aepn_with(&class, n, &inst, &budget, Strategy::Search)?;
    cert.note(format!("search corroboration with |C| ≤ 3: {}", search.verdict));
    for (k, v) in &search.stats {
        cert.count(&format!("search_{k}"), *v);
    }
    if search.verdict != Verdict::NoWitnessUpToBudget {
        return Err(Error::Precondition("chain search found a witness".into()));
    }
    cert.replay_or_err()?;
    Ok(cert)
}
