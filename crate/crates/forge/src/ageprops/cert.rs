//! Certificates and their replay.

use std::fmt;

use crate::construct;
use crate::error::{Error, Result};
use crate::morph::{self, Kind};
use crate::relcore::{self, Elem, Structure, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Witness,
    /// Non-conclusive: nothing found within the stated budget.
    NoWitnessUpToBudget,
    ProofOfFailure,
    PropertyHolds,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Witness => "Witness",
            Verdict::NoWitnessUpToBudget => "NoWitnessUpToBudget",
            Verdict::ProofOfFailure => "ProofOfFailure",
            Verdict::PropertyHolds => "PropertyHolds",
        }
    }

    pub fn parse(s: &str) -> Option<Verdict> {
        [Verdict::Witness, Verdict::NoWitnessUpToBudget, Verdict::ProofOfFailure, Verdict::PropertyHolds]
            .into_iter()
            .find(|v| v.as_str() == s)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedMap {
    pub name: String,
    pub from: String,
    pub to: String,
    pub kind: Kind,
    pub map: Vec<Elem>,
}

/// Two composites that must agree; each lists map names in application order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equality {
    pub left: Vec<String>,
    pub right: Vec<String>,
}

impl Equality {
    pub fn new(left: &[&str], right: &[&str]) -> Self {
        Equality {
            left: left.iter().map(|s| s.to_string()).collect(),
            right: right.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// A checkable claim about named structures or maps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Fact {
    Holds {
        structure: String,
        symbol: String,
        tuple: Vec<String>,
        expected: bool,
    },
    Distance {
        structure: String,
        x: String,
        y: String,
        value: Q,
    },
    /// `map` sends `x` to `y`.
    Sends { map: String, x: String, y: String },
    /// `map` is the `n`-th power of `base`.
    PowerOf { map: String, base: String, n: usize },
    /// `structure` is the `n`-th power of `base`.
    IsPower { structure: String, base: String, n: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub property: String,
    pub class: String,
    pub verdict: Verdict,
    /// Name of the structure the verdict is about, when there is one.
    pub witness: Option<String>,
    pub structures: Vec<(String, Structure)>,
    pub maps: Vec<NamedMap>,
    pub equalities: Vec<Equality>,
    pub facts: Vec<Fact>,
    pub trace: Vec<String>,
    pub stats: Vec<(String, u64)>,
}

impl Certificate {
    pub fn new(property: impl Into<String>, class: impl Into<String>, verdict: Verdict) -> Self {
        Certificate {
            property: property.into(),
            class: class.into(),
            verdict,
            witness: None,
            structures: Vec::new(),
            maps: Vec::new(),
            equalities: Vec::new(),
            facts: Vec::new(),
            trace: Vec::new(),
            stats: Vec::new(),
        }
    }

    pub fn structure(&self, name: &str) -> Option<&Structure> {
        self.structures.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn map(&self, name: &str) -> Option<&NamedMap> {
        self.maps.iter().find(|m| m.name == name)
    }

    pub fn stat(&self, name: &str) -> Option<u64> {
        self.stats.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub(crate) fn add_structure(&mut self, name: &str, s: Structure) {
        if let Some(slot) = self.structures.iter_mut().find(|(n, _)| n == name) {
            slot.1 = s;
        } else {
            self.structures.push((name.to_string(), s));
        }
    }

    pub(crate) fn add_map(&mut self, name: &str, from: &str, to: &str, kind: Kind, map: Vec<Elem>) {
        self.maps.push(NamedMap {
            name: name.to_string(),
            from: from.to_string(),
            to: to.to_string(),
            kind,
            map,
        });
    }

    pub(crate) fn equal(&mut self, left: &[&str], right: &[&str]) {
        self.equalities.push(Equality::new(left, right));
    }

    pub(crate) fn note(&mut self, line: impl Into<String>) {
        self.trace.push(line.into());
    }

    pub(crate) fn count(&mut self, name: &str, v: u64) {
        self.stats.push((name.to_string(), v));
    }

    fn need(&self, name: &str) -> std::result::Result<&Structure, String> {
        self.structure(name).ok_or_else(|| format!("structure `{name}` missing"))
    }

    fn composite(&self, path: &[String]) -> std::result::Result<(String, String, Vec<Elem>), String> {
        let first = path.first().ok_or("empty composite")?;
        let m = self.map(first).ok_or_else(|| format!("map `{first}` missing"))?;
        let (from, mut to, mut acc) = (m.from.clone(), m.to.clone(), m.map.clone());
        for name in &path[1..] {
            let m = self.map(name).ok_or_else(|| format!("map `{name}` missing"))?;
            if m.from != to {
                return Err(format!("`{name}` starts at {} but the composite ends at {to}", m.from));
            }
            acc = morph::compose(&acc, &m.map);
            to = m.to.clone();
        }
        Ok((from, to, acc))
    }

    /// Re-checks every map, equality and fact. `Ok(())` means "replay ok".
    pub fn replay(&self) -> std::result::Result<(), String> {
        for m in &self.maps {
            let src = self.need(&m.from)?;
            let tgt = self.need(&m.to)?;
            match morph::check(src, tgt, &m.map, m.kind) {
                Ok(None) => {}
                Ok(Some(v)) => return Err(format!("map `{}` is not a{} {}: {v}", m.name, article(m.kind), m.kind)),
                Err(e) => return Err(format!("map `{}`: {e}", m.name)),
            }
        }
        for eq in &self.equalities {
            let l = self.composite(&eq.left)?;
            let r = self.composite(&eq.right)?;
            if l.0 != r.0 || l.1 != r.1 {
                return Err(format!("{} and {} have different ends", eq.left.join(";"), eq.right.join(";")));
            }
            if l.2 != r.2 {
                return Err(format!("{} differs from {}", eq.left.join(";"), eq.right.join(";")));
            }
        }
        for f in &self.facts {
            self.check_fact(f)?;
        }
        Ok(())
    }

    fn check_fact(&self, f: &Fact) -> std::result::Result<(), String> {
        match f {
            Fact::Holds {
                structure,
                symbol,
                tuple,
                expected,
            } => {
                let s = self.need(structure)?;
                let sym = s
                    .signature()
                    .position(symbol)
                    .ok_or_else(|| format!("symbol `{symbol}` unknown in {structure}"))?;
                let t: Vec<Elem> = tuple
                    .iter()
                    .map(|l| s.index_of(l).ok_or_else(|| format!("`{l}` not in {structure}")))
                    .collect::<std::result::Result<_, _>>()?;
                if s.holds(sym, &t) != *expected {
                    return Err(format!(
                        "{symbol}({}) in {structure} should be {expected}",
                        tuple.join(",")
                    ));
                }
            }
            Fact::Distance { structure, x, y, value } => {
                let m = relcore::decode_metric(self.need(structure)?).map_err(|e| e.to_string())?;
                let d = m.dist(x, y).map_err(|e| e.to_string())?;
                if d != *value {
                    return Err(format!("d({x},{y}) in {structure} is {d}, not {value}"));
                }
            }
            Fact::Sends { map, x, y } => {
                let m = self.map(map).ok_or_else(|| format!("map `{map}` missing"))?;
                let (src, tgt) = (self.need(&m.from)?, self.need(&m.to)?);
                let xi = src.index_of(x).ok_or_else(|| format!("`{x}` not in {}", m.from))?;
                if tgt.label(m.map[xi]) != y {
                    return Err(format!("{map}({x}) is {}, not {y}", tgt.label(m.map[xi])));
                }
            }
            Fact::PowerOf { map, base, n } => {
                let m = self.map(map).ok_or_else(|| format!("map `{map}` missing"))?;
                let b = self.map(base).ok_or_else(|| format!("map `{base}` missing"))?;
                let (bs, bt) = (self.need(&b.from)?, self.need(&b.to)?);
                if construct::power_map(&b.map, bs.size(), bt.size(), *n) != m.map {
                    return Err(format!("`{map}` is not {base}^{n}"));
                }
            }
            Fact::IsPower { structure, base, n } => {
                if construct::power(self.need(base)?, *n) != *self.need(structure)? {
                    return Err(format!("`{structure}` is not {base}^{n}"));
                }
            }
        }
        Ok(())
    }

    pub fn replay_status(&self) -> String {
        match self.replay() {
            Ok(()) => "ok".to_string(),
            Err(e) => format!("failed: {e}"),
        }
    }

    pub(crate) fn replay_or_err(&self) -> Result<()> {
        self.replay()
            .map_err(|e| Error::Precondition(format!("certificate does not replay: {e}")))
    }
}

fn article(k: Kind) -> &'static str {
    match k {
        Kind::Embedding | Kind::Iso => "n",
        Kind::Hom => "",
    }
}
