//! JSON forms of structures, metrics, maps, function tables and certificates.
//! Parse errors carry the path of the offending key.

use serde_json::{json, Map, Value};

use crate::ageprops::cert::{Certificate, Equality, Fact, NamedMap, Verdict};
use crate::error::{Error, Result};
use crate::funspace::FunctionTable;
use crate::morph::{Kind, Morphism};
use crate::relcore::{Elem, MetricSpace, Signature, Structure, Tuple, Q};

fn err(path: &str, msg: impl Into<String>) -> Error {
    Error::json(path, msg)
}

fn field<'a>(v: &'a Value, path: &str, key: &str) -> Result<&'a Value> {
    v.as_object()
        .ok_or_else(|| err(path, "expected an object"))?
        .get(key)
        .ok_or_else(|| err(&format!("{path}.{key}"), "missing"))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| err(path, "expected an array"))
}

fn string<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| err(path, "expected a string"))
}

fn uint(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| err(path, "expected a non-negative integer"))
}

fn strings(v: &Value, path: &str) -> Result<Vec<String>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| string(x, &format!("{path}[{i}]")).map(str::to_string))
        .collect()
}

pub fn q_to_string(q: Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn parse_q(s: &str) -> Option<Q> {
    let (p, d) = match s.split_once('/') {
        Some((p, d)) => (p.trim().parse::<i64>().ok()?, d.trim().parse::<i64>().ok()?),
        None => (s.trim().parse::<i64>().ok()?, 1),
    };
    (d != 0).then(|| Q::new(p, d))
}

pub fn structure_to_json(s: &Structure) -> Value {
    let sig: Vec<Value> = s
        .signature()
        .symbols()
        .iter()
        .map(|sym| json!({"name": sym.name, "arity": sym.arity}))
        .collect();
    let mut rels = Map::new();
    for (i, sym) in s.signature().symbols().iter().enumerate() {
        let ts: Vec<Value> = s
            .relation(i)
            .iter()
            .map(|t| Value::from(t.iter().map(|&x| s.label(x)).collect::<Vec<_>>()))
            .collect();
        rels.insert(sym.name.clone(), Value::Array(ts));
    }
    json!({"signature": sig, "carrier": s.labels(), "relations": rels})
}

pub fn structure_from_json(v: &Value, path: &str) -> Result<Structure> {
    let sig_path = format!("{path}.signature");
    let mut syms = Vec::new();
    for (i, sym) in array(field(v, path, "signature")?, &sig_path)?.iter().enumerate() {
        let p = format!("{sig_path}[{i}]");
        let name = string(field(sym, &p, "name")?, &format!("{p}.name"))?;
        let arity = uint(field(sym, &p, "arity")?, &format!("{p}.arity"))?;
        syms.push((name.to_string(), arity));
    }
    let signature = Signature::new(syms).map_err(|e| err(&sig_path, e.to_string()))?;
    let carrier_path = format!("{path}.carrier");
    let labels = strings(field(v, path, "carrier")?, &carrier_path)?;
    let rel_path = format!("{path}.relations");
    let rels_v = field(v, path, "relations")?
        .as_object()
        .ok_or_else(|| err(&rel_path, "expected an object"))?;
    if let Some(k) = rels_v.keys().find(|k| signature.position(k).is_none()) {
        return Err(err(&format!("{rel_path}.{k}"), "symbol not in the signature"));
    }
    let mut rels: Vec<Vec<Tuple>> = vec![Vec::new(); signature.len()];
    for (sym, slot) in rels.iter_mut().enumerate() {
        let name = &signature.symbols()[sym].name;
        let p = format!("{rel_path}.{name}");
        let Some(ts) = rels_v.get(name) else {
            continue;
        };
        for (j, t) in array(ts, &p)?.iter().enumerate() {
            let tp = format!("{p}[{j}]");
            let ls = strings(t, &tp)?;
            if ls.len() != signature.arity(sym) {
                return Err(err(&tp, format!("tuple of length {} for arity {}", ls.len(), signature.arity(sym))));
            }
            let mut tuple = Vec::with_capacity(ls.len());
            for l in &ls {
                let x = labels
                    .iter()
                    .position(|c| c == l)
                    .ok_or_else(|| err(&tp, format!("`{l}` is not in the carrier")))?;
                tuple.push(x);
            }
            slot.push(tuple);
        }
    }
    Structure::new(signature, labels, rels).map_err(|e| err(path, e.to_string()))
}

pub fn metric_to_json(m: &MetricSpace) -> Value {
    let mut d = Vec::new();
    for x in 0..m.size() {
        for y in x + 1..m.size() {
            d.push(json!([m.labels()[x], m.labels()[y], q_to_string(m.d(x, y))]));
        }
    }
    json!({"points": m.labels(), "distances": d})
}

pub fn metric_from_json(v: &Value, path: &str) -> Result<MetricSpace> {
    let points = strings(field(v, path, "points")?, &format!("{path}.points"))?;
    let dp = format!("{path}.distances");
    let n = points.len();
    let mut dist: Vec<Vec<Option<Q>>> = vec![vec![None; n]; n];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = Some(Q::from_integer(0));
    }
    for (j, e) in array(field(v, path, "distances")?, &dp)?.iter().enumerate() {
        let ep = format!("{dp}[{j}]");
        let parts = array(e, &ep)?;
        if parts.len() != 3 {
            return Err(err(&ep, "expected [x, y, \"p/q\"]"));
        }
        let idx = |k: usize| -> Result<Elem> {
            let l = string(&parts[k], &format!("{ep}[{k}]"))?;
            points
                .iter()
                .position(|p| p == l)
                .ok_or_else(|| err(&format!("{ep}[{k}]"), format!("`{l}` is not a point")))
        };
        let (x, y) = (idx(0)?, idx(1)?);
        let s = string(&parts[2], &format!("{ep}[2]"))?;
        let q = parse_q(s).ok_or_else(|| err(&format!("{ep}[2]"), format!("`{s}` is not a rational")))?;
        dist[x][y] = Some(q);
        dist[y][x] = Some(q);
    }
    let mut full = vec![vec![Q::from_integer(0); n]; n];
    for x in 0..n {
        for y in 0..n {
            full[x][y] = dist[x][y]
                .ok_or_else(|| err(&dp, format!("distance {}–{} missing", points[x], points[y])))?;
        }
    }
    MetricSpace::new(points, full).map_err(|e| err(path, e.to_string()))
}

/// A structure given either in structure form or, for metric ages, in metric
/// form encoded with `thresholds`.
pub fn member_from_json(v: &Value, path: &str, thresholds: Option<&[Q]>) -> Result<Structure> {
    if v.get("points").is_some() {
        let Some(ths) = thresholds else {
            return Err(err(path, "metric form given for a non-metric age"));
        };
        let m = metric_from_json(v, path)?;
        return crate::relcore::encode_metric(&m, ths).map_err(|e| err(path, e.to_string()));
    }
    structure_from_json(v, path)
}

pub fn label_map_to_json(src: &Structure, tgt: &Structure, map: &[Elem]) -> Value {
    let mut m = Map::new();
    for (x, &y) in map.iter().enumerate() {
        m.insert(src.label(x).to_string(), Value::from(tgt.label(y)));
    }
    Value::Object(m)
}

/// A label map `{"a": "x", …}` that must cover `src`.
pub fn label_map_from_json(v: &Value, path: &str, src: &Structure, tgt: &Structure) -> Result<Vec<Elem>> {
    let obj = v.as_object().ok_or_else(|| err(path, "expected an object"))?;
    let mut map = vec![usize::MAX; src.size()];
    for (k, y) in obj {
        let kp = format!("{path}.{k}");
        let x = src.index_of(k).ok_or_else(|| err(&kp, "not in the source"))?;
        let l = string(y, &kp)?;
        map[x] = tgt.index_of(l).ok_or_else(|| err(&kp, format!("`{l}` is not in the target")))?;
    }
    if let Some(x) = map.iter().position(|&y| y == usize::MAX) {
        return Err(err(path, format!("no image for `{}`", src.label(x))));
    }
    Ok(map)
}

pub fn morphism_to_json(src: &Structure, tgt: &Structure, m: &Morphism) -> Value {
    json!({"map": label_map_to_json(src, tgt, &m.map), "kind": m.kind.as_str()})
}

pub fn morphism_from_json(v: &Value, path: &str, src: &Structure, tgt: &Structure) -> Result<Morphism> {
    let kp = format!("{path}.kind");
    let k = string(field(v, path, "kind")?, &kp)?;
    let kind = Kind::parse(k).ok_or_else(|| err(&kp, format!("unknown kind `{k}`")))?;
    let map = label_map_from_json(field(v, path, "map")?, &format!("{path}.map"), src, tgt)?;
    Ok(Morphism::new(map, kind))
}

pub fn table_to_json(f: &FunctionTable) -> Value {
    let rows: Vec<Value> = crate::construct::all_tuples(f.domain().size(), f.arity())
        .iter()
        .map(|t| {
            let mut row: Vec<&str> = t.iter().map(|&x| f.domain().label(x)).collect();
            row.push(f.codomain().label(f.value(t)));
            Value::from(row)
        })
        .collect();
    json!({"arity": f.arity(), "table": rows})
}

/// Rows `[x_1, …, x_n, y]`; the domain is `domain_of` induced on the
/// argument labels in order of first appearance, and every tuple must occur.
pub fn table_from_json(v: &Value, path: &str, domain_of: &Structure, codomain: &Structure) -> Result<FunctionTable> {
    let n = uint(field(v, path, "arity")?, &format!("{path}.arity"))?;
    if n == 0 {
        return Err(err(&format!("{path}.arity"), "must be positive"));
    }
    let tp = format!("{path}.table");
    let mut rows = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    for (i, r) in array(field(v, path, "table")?, &tp)?.iter().enumerate() {
        let rp = format!("{tp}[{i}]");
        let ls = strings(r, &rp)?;
        if ls.len() != n + 1 {
            return Err(err(&rp, format!("expected {} labels", n + 1)));
        }
        for l in &ls[..n] {
            if domain_of.index_of(l).is_none() {
                return Err(err(&rp, format!("`{l}` is not in V")));
            }
            if !seen.contains(l) {
                seen.push(l.clone());
            }
        }
        let y = codomain
            .index_of(&ls[n])
            .ok_or_else(|| err(&rp, format!("`{}` is not in U", ls[n])))?;
        rows.push((ls, y, rp));
    }
    let d = crate::relcore::induced_substructure(domain_of, &seen).map_err(|e| err(path, e.to_string()))?;
    let size = d.size();
    let mut table = vec![usize::MAX; size.pow(n as u32)];
    for (ls, y, rp) in rows {
        let t: Vec<Elem> = ls[..n].iter().map(|l| d.index_of(l).unwrap_or_default()).collect();
        let idx = crate::construct::tuple_index(size, &t);
        if table[idx] != usize::MAX && table[idx] != y {
            return Err(err(&rp, "conflicting value for a repeated tuple"));
        }
        table[idx] = y;
    }
    if table.contains(&usize::MAX) {
        return Err(err(&tp, "table does not cover every tuple"));
    }
    FunctionTable::new(n, d, codomain.clone(), table).map_err(|e| err(path, e.to_string()))
}

fn fact_to_json(f: &Fact) -> Value {
    match f {
        Fact::Holds {
            structure,
            symbol,
            tuple,
            expected,
        } => json!({"holds": {"structure": structure, "symbol": symbol, "tuple": tuple, "expected": expected}}),
        Fact::Distance { structure, x, y, value } => {
            json!({"distance": {"structure": structure, "x": x, "y": y, "value": q_to_string(*value)}})
        }
        Fact::Sends { map, x, y } => json!({"sends": {"map": map, "x": x, "y": y}}),
        Fact::PowerOf { map, base, n } => json!({"power_of": {"map": map, "base": base, "n": n}}),
        Fact::IsPower { structure, base, n } => json!({"is_power": {"structure": structure, "base": base, "n": n}}),
    }
}

fn fact_from_json(v: &Value, path: &str) -> Result<Fact> {
    let obj = v.as_object().ok_or_else(|| err(path, "expected an object"))?;
    let (tag, body) = obj.iter().next().ok_or_else(|| err(path, "empty fact"))?;
    let p = format!("{path}.{tag}");
    let s = |k: &str| -> Result<String> { Ok(string(field(body, &p, k)?, &format!("{p}.{k}"))?.to_string()) };
    Ok(match tag.as_str() {
        "holds" => Fact::Holds {
            structure: s("structure")?,
            symbol: s("symbol")?,
            tuple: strings(field(body, &p, "tuple")?, &format!("{p}.tuple"))?,
            expected: field(body, &p, "expected")?
                .as_bool()
                .ok_or_else(|| err(&format!("{p}.expected"), "expected a boolean"))?,
        },
        "distance" => {
            let raw = s("value")?;
            Fact::Distance {
                structure: s("structure")?,
                x: s("x")?,
                y: s("y")?,
                value: parse_q(&raw).ok_or_else(|| err(&format!("{p}.value"), "not a rational"))?,
            }
        }
        "sends" => Fact::Sends {
            map: s("map")?,
            x: s("x")?,
            y: s("y")?,
        },
        "power_of" => Fact::PowerOf {
            map: s("map")?,
            base: s("base")?,
            n: uint(field(body, &p, "n")?, &format!("{p}.n"))?,
        },
        "is_power" => Fact::IsPower {
            structure: s("structure")?,
            base: s("base")?,
            n: uint(field(body, &p, "n")?, &format!("{p}.n"))?,
        },
        other => return Err(err(path, format!("unknown fact `{other}`"))),
    })
}

/// Certificate JSON; the witness structure also appears under its own name
/// at top level.
pub fn certificate_to_json(c: &Certificate, seed: Option<u64>) -> Value {
    let mut out = Map::new();
    out.insert("property".into(), Value::from(c.property.clone()));
    out.insert("class".into(), Value::from(c.class.clone()));
    if let Some(s) = seed {
        out.insert("seed".into(), Value::from(s));
    }
    out.insert("verdict".into(), Value::from(c.verdict.as_str()));
    if let Some(w) = &c.witness {
        out.insert("witness".into(), Value::from(w.clone()));
        if let Some(s) = c.structure(w) {
            out.insert(w.clone(), structure_to_json(s));
        }
    }
    let mut structures = Map::new();
    for (name, s) in &c.structures {
        structures.insert(name.clone(), structure_to_json(s));
    }
    out.insert("structures".into(), Value::Object(structures));
    let mut maps = Map::new();
    for m in &c.maps {
        let body = match (c.structure(&m.from), c.structure(&m.to)) {
            (Some(src), Some(tgt)) => label_map_to_json(src, tgt, &m.map),
            _ => Value::from(m.map.clone()),
        };
        maps.insert(
            m.name.clone(),
            json!({"from": m.from, "to": m.to, "kind": m.kind.as_str(), "map": body}),
        );
    }
    out.insert("maps".into(), Value::Object(maps));
    let eqs: Vec<Value> = c
        .equalities
        .iter()
        .map(|e| json!({"left": e.left, "right": e.right}))
        .collect();
    out.insert("equalities".into(), Value::from(eqs));
    out.insert("facts".into(), Value::from(c.facts.iter().map(fact_to_json).collect::<Vec<_>>()));
    out.insert("trace".into(), Value::from(c.trace.clone()));
    let mut stats = Map::new();
    for (k, v) in &c.stats {
        stats.insert(k.clone(), Value::from(*v));
    }
    out.insert("stats".into(), Value::Object(stats));
    out.insert("replay".into(), Value::from(c.replay_status()));
    Value::Object(out)
}

pub fn certificate_from_json(v: &Value) -> Result<Certificate> {
    let p = "$";
    let text = |k: &str| -> Result<String> { Ok(string(field(v, p, k)?, &format!("$.{k}"))?.to_string()) };
    let vs = text("verdict")?;
    let verdict = Verdict::parse(&vs).ok_or_else(|| err("$.verdict", format!("unknown verdict `{vs}`")))?;
    let mut c = Certificate::new(text("property")?, text("class")?, verdict);
    c.witness = v.get("witness").and_then(Value::as_str).map(str::to_string);
    let sp = "$.structures";
    let structs = field(v, p, "structures")?
        .as_object()
        .ok_or_else(|| err(sp, "expected an object"))?;
    for (name, s) in structs {
        c.structures.push((name.clone(), structure_from_json(s, &format!("{sp}.{name}"))?));
    }
    let mp = "$.maps";
    let maps = field(v, p, "maps")?.as_object().ok_or_else(|| err(mp, "expected an object"))?;
    for (name, m) in maps {
        let np = format!("{mp}.{name}");
        let from = string(field(m, &np, "from")?, &format!("{np}.from"))?.to_string();
        let to = string(field(m, &np, "to")?, &format!("{np}.to"))?.to_string();
        let ks = string(field(m, &np, "kind")?, &format!("{np}.kind"))?;
        let kind = Kind::parse(ks).ok_or_else(|| err(&format!("{np}.kind"), format!("unknown kind `{ks}`")))?;
        let src = c
            .structure(&from)
            .ok_or_else(|| err(&format!("{np}.from"), format!("structure `{from}` missing")))?;
        let tgt = c
            .structure(&to)
            .ok_or_else(|| err(&format!("{np}.to"), format!("structure `{to}` missing")))?;
        let map = label_map_from_json(field(m, &np, "map")?, &format!("{np}.map"), src, tgt)?;
        c.maps.push(NamedMap {
            name: name.clone(),
            from,
            to,
            kind,
            map,
        });
    }
    if let Some(eqs) = v.get("equalities") {
        for (i, e) in array(eqs, "$.equalities")?.iter().enumerate() {
            let ep = format!("$.equalities[{i}]");
            c.equalities.push(Equality {
                left: strings(field(e, &ep, "left")?, &format!("{ep}.left"))?,
                right: strings(field(e, &ep, "right")?, &format!("{ep}.right"))?,
            });
        }
    }
    if let Some(fs) = v.get("facts") {
        for (i, f) in array(fs, "$.facts")?.iter().enumerate() {
            c.facts.push(fact_from_json(f, &format!("$.facts[{i}]"))?);
        }
    }
    if let Some(t) = v.get("trace") {
        c.trace = strings(t, "$.trace")?;
    }
    if let Some(s) = v.get("stats").and_then(Value::as_object) {
        for (k, x) in s {
            c.stats.push((k.clone(), x.as_u64().unwrap_or_default()));
        }
    }
    Ok(c)
}
