//! Plain-text renderings for `--format text`.

use std::fmt::Write;

use fraisse_forge::ageprops::Certificate;
use fraisse_forge::fraisse::{Certification, ExtensionTask, LimitBuilder};
use fraisse_forge::upoly::StageState;
use fraisse_forge::{Elem, Structure};

pub fn structure_text(name: &str, s: &Structure) -> String {
    let mut out = format!("{name} = {{{}}}\n", s.labels().join(", "));
    for (i, sym) in s.signature().symbols().iter().enumerate() {
        let tuples: Vec<String> = s
            .relation(i)
            .iter()
            .map(|t| format!("({})", t.iter().map(|&x| s.label(x)).collect::<Vec<_>>().join(",")))
            .collect();
        if !tuples.is_empty() {
            let _ = writeln!(out, "  {}: {}", sym.name, tuples.join(" "));
        }
    }
    out
}

pub fn map_text(name: &str, src: &Structure, tgt: &Structure, map: &[Elem]) -> String {
    let width = src.labels().iter().map(String::len).max().unwrap_or(0);
    let mut out = format!("{name}:\n");
    for (x, &y) in map.iter().enumerate() {
        let _ = writeln!(out, "  {:>width$} -> {}", src.label(x), tgt.label(y));
    }
    out
}

pub fn certificate_text(c: &Certificate, seed: u64) -> String {
    let mut out = format!("{} for {}: {} (seed {seed})\n", c.property, c.class, c.verdict);
    if let Some(w) = &c.witness {
        let _ = writeln!(out, "witness: {w}");
    }
    for line in &c.trace {
        let _ = writeln!(out, "  {line}");
    }
    for (name, s) in &c.structures {
        if s.size() <= 16 {
            out.push_str(&structure_text(name, s));
        } else {
            let _ = writeln!(out, "{name}: {} points", s.size());
        }
    }
    for m in &c.maps {
        match (c.structure(&m.from), c.structure(&m.to)) {
            (Some(s), Some(t)) if m.map.len() <= 32 => out.push_str(&map_text(&format!("{} ({})", m.name, m.kind), s, t, &m.map)),
            _ => {
                let _ = writeln!(out, "{}: {} -> {} ({})", m.name, m.from, m.to, m.kind);
            }
        }
    }
    let _ = write!(out, "replay: {}", c.replay_status());
    out
}

pub fn task_text(u: &Structure, t: &ExtensionTask) -> String {
    let over: Vec<&str> = t.a.iter().map(|&x| u.label(x)).collect();
    format!("one-point extension over {{{}}}", over.join(","))
}

pub fn limit_text(b: &LimitBuilder, cert: Option<&Certification>) -> String {
    let u = b.current();
    let mut out = format!(
        "{} approximation, seed {}: {} points after {} steps ({} idle)\n",
        b.class().name(),
        b.seed(),
        u.size(),
        b.steps(),
        b.idle_steps()
    );
    if u.size() <= 16 {
        out.push_str(&structure_text("U", u));
    }
    if let Some(c) = cert {
        let _ = write!(out, "extension property up to {}: ", c.k);
        match &c.failing {
            None => {
                let _ = write!(out, "holds ({} tasks)", c.checked);
            }
            Some(t) => {
                let _ = write!(out, "fails at {}", task_text(u, t));
            }
        }
    }
    out.trim_end().to_string()
}

pub fn stage_text(st: &StageState) -> String {
    let (v, u) = (st.v(), st.u_structure());
    let mut out = format!(
        "{} stage of arity {}, seed {}: |V| = {}, |U| = {} after {} steps\n",
        st.class().name(),
        st.arity(),
        st.seed(),
        v.size(),
        u.size(),
        st.steps()
    );
    for e in st.transcript() {
        let _ = writeln!(out, "  step {}: {} (|B| = {}, |A| = {}) by {}", e.step, e.task, e.b_size, e.a_size, e.how);
    }
    if let Ok(t) = st.u_table() {
        if t.table().len() <= 64 {
            let _ = writeln!(out, "u:");
            let n = st.arity();
            for (tuple, &y) in fraisse_forge::construct::all_tuples(v.size(), n).iter().zip(t.table()) {
                let args: Vec<&str> = tuple.iter().map(|&x| v.label(x)).collect();
                let _ = writeln!(out, "  u({}) = {}", args.join(","), u.label(y));
            }
        }
    }
    out.trim_end().to_string()
}
