use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fraisse_forge::ageprops::{
    chains_counterexample, check_aepn, check_ap, check_hap, check_hapn, urysohn_counterexample, AepInstance,
    AgeDescriptor, Budget, Certificate, HapInstance, HapnInstance, Verdict,
};
use fraisse_forge::construct::{power, AmalgamInstance};
use fraisse_forge::fraisse::LimitBuilder;
use fraisse_forge::json as fj;
use fraisse_forge::upoly::{StageConfig, StageState};
use fraisse_forge::{Elem, Error, Structure};

mod report;

const EXIT_USAGE: u8 = 1;
const EXIT_NO_WITNESS: u8 = 2;
const EXIT_FAILURE_PROOF: u8 = 3;
const EXIT_STAGE_ABORT: u8 = 4;

#[derive(Parser)]
#[command(name = "fraisse-forge", version, about = "Amalgamation checks, Fraïssé approximations and polymorphism stages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Args, Clone)]
struct Output {
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Check AP, HAP, HAPn or AEPn on an instance.
    Check(CheckArgs),
    /// Fraïssé approximations.
    Limit {
        #[command(subcommand)]
        cmd: LimitCmd,
    },
    /// Universal homogeneous polymorphism stages.
    Upoly {
        #[command(subcommand)]
        cmd: UpolyCmd,
    },
    /// Reproduce a built-in AEPⁿ failure.
    Counterexample {
        #[arg(value_enum)]
        which: Builtin,
        #[arg(long, default_value_t = 2)]
        arity: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Re-verify a certificate file.
    Replay { file: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Builtin {
    Urysohn,
    Chains,
}

#[derive(Args)]
struct CheckArgs {
    /// AP, HAP, HAPn or AEPn; a trailing number sets the arity.
    #[arg(long)]
    property: String,
    #[arg(long)]
    age: String,
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "instance")]
    builtin_instance: Option<Builtin>,
    #[arg(long)]
    arity: Option<usize>,
    /// Largest candidate amalgam size.
    #[arg(long)]
    budget: Option<usize>,
    /// Largest target size in extension searches.
    #[arg(long)]
    max_t: Option<usize>,
    #[arg(long)]
    nodes: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Subcommand)]
enum LimitCmd {
    Build {
        #[arg(long)]
        age: String,
        #[arg(long, default_value_t = 100)]
        steps: u64,
        #[arg(long)]
        verify_k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest base of the extension tasks; defaults to max(2, verify-k - 1).
        #[arg(long)]
        max_task: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args, Clone)]
struct StageArgs {
    #[arg(long)]
    age: String,
    #[arg(long, default_value_t = 2)]
    arity: usize,
    #[arg(long, default_value_t = 50)]
    steps: u64,
    /// Sets both task sizes.
    #[arg(long, default_value_t = 1)]
    task_size: usize,
    #[arg(long)]
    universality_size: Option<usize>,
    #[arg(long)]
    saturation_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum UpolyCmd {
    /// Grow a stage and print V, U and the table of u.
    Build {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long)]
        audit_universality: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Grow a stage and audit universality up to a task size.
    Audit {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long)]
        universality: usize,
        /// Also run the bounded homogeneity audit with this Gaifman radius.
        #[arg(long)]
        homogeneity_radius: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Factor a table through u by an embedding into V.
    Factorize {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long)]
        table: PathBuf,
        /// Comma-separated domain labels pinned to themselves.
        #[arg(long, value_delimiter = ',')]
        anchor: Vec<String>,
        #[command(flatten)]
        output: Output,
    },
}

/// A failed command: exit code and message.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::StageAbort(_) => EXIT_STAGE_ABORT,
            _ => EXIT_USAGE,
        };
        Failure(code, e.to_string())
    }
}

type CmdResult = Result<u8, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: malformed JSON: {e}", path.display())))
}

fn emit(output: &Output, value: &Value, text: impl FnOnce() -> String) -> Result<(), Failure> {
    let body = match output.format {
        Format::Json => serde_json::to_string_pretty(value).map_err(|e| usage(e.to_string()))?,
        Format::Text => text(),
    };
    match &output.out {
        Some(p) => fs::write(p, body + "\n").map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            say(&body);
            Ok(())
        }
    }
}

/// Writes a line to stdout; a closed pipe is not an error.
fn say(line: &str) {
    let _ = writeln!(io::stdout().lock(), "{line}");
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Witness | Verdict::PropertyHolds => 0,
        Verdict::NoWitnessUpToBudget => EXIT_NO_WITNESS,
        Verdict::ProofOfFailure => EXIT_FAILURE_PROOF,
    }
}

fn emit_certificate(output: &Output, cert: &Certificate, seed: u64) -> CmdResult {
    let value = fj::certificate_to_json(cert, Some(seed));
    emit(output, &value, || report::certificate_text(cert, seed))?;
    Ok(verdict_code(cert.verdict))
}

fn parse_property(p: &str, arity: Option<usize>) -> Result<(String, usize), Failure> {
    let upper = p.to_ascii_uppercase();
    let (base, rest) = match upper.find(|c: char| c.is_ascii_digit() || c == 'N') {
        Some(i) if upper != "AP" => upper.split_at(i),
        _ => (upper.as_str(), ""),
    };
    let n = match rest {
        "" | "N" => arity.unwrap_or(2),
        digits => digits.parse().map_err(|_| usage(format!("bad property `{p}`")))?,
    };
    match base {
        "AP" | "HAP" if rest.is_empty() => Ok((base.to_string(), 1)),
        "HAP" => Ok(("HAPN".into(), n)),
        "AEP" => Ok(("AEPN".into(), n)),
        _ => Err(usage(format!("unknown property `{p}`; expected AP, HAP, HAPn or AEPn"))),
    }
}

struct InstanceReader<'a> {
    v: &'a Value,
    thresholds: Option<Vec<fraisse_forge::Q>>,
}

impl InstanceReader<'_> {
    fn structure(&self, key: &str) -> Result<Structure, Failure> {
        let v = self.v.get(key).ok_or_else(|| usage(format!("json at $.{key}: missing")))?;
        Ok(fj::member_from_json(v, &format!("$.{key}"), self.thresholds.as_deref())?)
    }

    fn map(&self, key: &str, src: &Structure, tgt: &Structure) -> Result<Vec<Elem>, Failure> {
        let v = self.v.get(key).ok_or_else(|| usage(format!("json at $.{key}: missing")))?;
        let path = format!("$.{key}");
        Ok(match v.get("map") {
            Some(_) if v.get("kind").is_some() => fj::morphism_from_json(v, &path, src, tgt)?.map,
            _ => fj::label_map_from_json(v, &path, src, tgt)?,
        })
    }

    fn amalgam(&self) -> Result<AmalgamInstance, Failure> {
        let (a, b1, b2) = (self.structure("A")?, self.structure("B1")?, self.structure("B2")?);
        let f1 = self.map("f1", &a, &b1)?;
        let f2 = self.map("f2", &a, &b2)?;
        Ok(AmalgamInstance::new(a, b1, b2, f1, f2)?)
    }
}

fn cmd_check(args: &CheckArgs) -> CmdResult {
    let class = AgeDescriptor::by_name(&args.age)?;
    let (prop, n) = parse_property(&args.property, args.arity)?;
    let mut budget = Budget::default();
    if let Some(c) = args.budget {
        budget.max_c = c;
    }
    if let Some(t) = args.max_t {
        budget.max_t = t;
    }
    if let Some(k) = args.nodes {
        budget.nodes = k;
    }
    if budget.max_c == 0 || budget.max_t == 0 || budget.nodes == 0 {
        return Err(usage("budgets must be positive"));
    }
    if let Some(b) = args.builtin_instance {
        if prop != "AEPN" {
            return Err(usage("built-in instances are AEPn instances"));
        }
        let cert = match b {
            Builtin::Urysohn => urysohn_counterexample(n)?,
            Builtin::Chains => chains_counterexample(n)?,
        };
        return emit_certificate(&args.output, &cert, args.seed);
    }
    let path = args
        .instance
        .as_ref()
        .ok_or_else(|| usage("one of --instance or --builtin-instance is required"))?;
    let v = read_json(path)?;
    let r = InstanceReader {
        v: &v,
        thresholds: class.thresholds(),
    };
    let cert = match prop.as_str() {
        "AP" => check_ap(&class, &r.amalgam()?, budget.max_c)?,
        "HAP" => {
            let (a, b, c) = (r.structure("A")?, r.structure("B")?, r.structure("C")?);
            let f = r.map("f", &a, &b)?;
            let g = r.map("g", &a, &c)?;
            check_hap(&class, &HapInstance { a, b, c, f, g }, &budget)?
        }
        "HAPN" => {
            let (a, b, t1) = (r.structure("A")?, r.structure("B")?, r.structure("T1")?);
            let g = r.map("g", &a, &b)?;
            let a_map = r.map("a", &power(&a, n), &t1)?;
            check_hapn(&class, n, &HapnInstance { a, b, t1, g, a_map }, &budget)?
        }
        _ => {
            let amalgam = r.amalgam()?;
            let t = r.structure("T")?;
            let h1 = r.map("h1", &power(&amalgam.b1, n), &t)?;
            let h2 = r.map("h2", &power(&amalgam.b2, n), &t)?;
            check_aepn(&class, n, &AepInstance { amalgam, t, h1, h2 }, &budget)?
        }
    };
    emit_certificate(&args.output, &cert, args.seed)
}

fn cmd_limit(cmd: &LimitCmd) -> CmdResult {
    let LimitCmd::Build {
        age,
        steps,
        verify_k,
        seed,
        max_task,
        output,
    } = cmd;
    let class = AgeDescriptor::by_name(age)?;
    let task = max_task.unwrap_or_else(|| verify_k.map_or(2, |k| k.saturating_sub(1).max(2)));
    let mut b = LimitBuilder::new(class, *seed)?.with_max_task(task)?;
    b.run(*steps)?;
    let cert = verify_k.map(|k| b.certify_extension_property(k));
    let mut value = json!({
        "seed": seed,
        "class": b.class().name(),
        "structure": fj::structure_to_json(b.current()),
        "transcript": b.transcript_json(),
    });
    if let Some(c) = &cert {
        value["extension_property"] = json!({
            "k": c.k,
            "holds": c.holds,
            "checked": c.checked,
            "failing": c.failing.as_ref().map(|t| report::task_text(b.current(), t)),
        });
    }
    emit(output, &value, || report::limit_text(&b, cert.as_ref()))?;
    Ok(match cert {
        Some(c) if !c.holds => EXIT_NO_WITNESS,
        _ => 0,
    })
}

fn build_stage(a: &StageArgs) -> Result<StageState, Failure> {
    let class = AgeDescriptor::by_name(&a.age)?;
    let mut cfg = StageConfig::with_task_size(a.task_size);
    if let Some(s) = a.universality_size {
        cfg.universality_size = s;
    }
    if let Some(s) = a.saturation_size {
        cfg.saturation_size = s;
    }
    let mut st = StageState::new(class, a.arity, a.seed, cfg)?;
    st.run(a.steps)?;
    Ok(st)
}

fn stage_json(st: &StageState) -> Result<Value, Failure> {
    Ok(json!({
        "seed": st.seed(),
        "class": st.class().name(),
        "arity": st.arity(),
        "V": fj::structure_to_json(st.v()),
        "U": fj::structure_to_json(st.u_structure()),
        "u": fj::table_to_json(&st.u_table()?),
        "transcript": st.transcript_json(),
    }))
}

fn cmd_upoly(cmd: &UpolyCmd) -> CmdResult {
    match cmd {
        UpolyCmd::Build {
            stage,
            audit_universality,
            output,
        } => {
            let st = build_stage(stage)?;
            let mut value = stage_json(&st)?;
            let mut code = 0;
            if let Some(s) = audit_universality {
                let a = st.universality_audit(*s)?;
                code = if a.holds { 0 } else { EXIT_NO_WITNESS };
                value["universality_audit"] = json!({"size": s, "holds": a.holds, "checked": a.checked, "failing": a.failing});
            }
            emit(output, &value, || report::stage_text(&st))?;
            Ok(code)
        }
        UpolyCmd::Audit {
            stage,
            universality,
            homogeneity_radius,
            output,
        } => {
            let st = build_stage(stage)?;
            let a = st.universality_audit(*universality)?;
            let mut value = json!({
                "seed": st.seed(),
                "class": st.class().name(),
                "steps": st.steps(),
                "universality": {"size": universality, "holds": a.holds, "checked": a.checked, "failing": a.failing},
            });
            if let Some(r) = homogeneity_radius {
                let h = st.homogeneity_audit(*universality, *r)?;
                value["homogeneity"] = json!({
                    "radius": r,
                    "holds": h.holds,
                    "checked": h.checked,
                    "failing": h.failing,
                    "note": "bounded audit; non-conclusive at a finite stage",
                });
            }
            let text = format!(
                "{} stage after {} steps: universality audit at size {}: {} ({} tasks checked)",
                st.class().name(),
                st.steps(),
                universality,
                if a.holds { "holds" } else { "fails" },
                a.checked
            );
            emit(output, &value, || text)?;
            Ok(if a.holds { 0 } else { EXIT_NO_WITNESS })
        }
        UpolyCmd::Factorize {
            stage,
            table,
            anchor,
            output,
        } => {
            let st = build_stage(stage)?;
            let v = read_json(table)?;
            let g = fj::table_from_json(&v, "$", st.v(), st.u_structure())?;
            let d = g.domain();
            let mut anchor_ix = Vec::new();
            for l in anchor.iter().filter(|l| !l.is_empty()) {
                anchor_ix.push(d.index_of(l).ok_or_else(|| usage(format!("anchor `{l}` is not in the table's domain")))?);
            }
            let inclusion: Vec<Elem> = (0..d.size()).map(|x| st.v().index_of(d.label(x)).unwrap_or_default()).collect();
            let reference = (!anchor_ix.is_empty()).then_some(inclusion.as_slice());
            match st.factorize(&g, &anchor_ix, reference) {
                Ok(iota) => {
                    let value = json!({
                        "seed": st.seed(),
                        "iota": fj::label_map_to_json(d, st.v(), &iota),
                        "kind": "embedding",
                    });
                    let text = report::map_text("iota", d, st.v(), &iota);
                    emit(output, &value, || text)?;
                    Ok(0)
                }
                Err(Error::NoFactorization(msg)) => {
                    let value = json!({"seed": st.seed(), "iota": null, "reason": msg});
                    emit(output, &value, || format!("no factorization: {msg}"))?;
                    Ok(EXIT_NO_WITNESS)
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn cmd_replay(file: &Path) -> CmdResult {
    let v = read_json(file)?;
    let cert = fj::certificate_from_json(&v)?;
    match cert.replay() {
        Ok(()) => {
            say(&format!("replay ok: {} {} ({})", cert.property, cert.verdict, cert.class));
            Ok(0)
        }
        Err(e) => {
            say(&format!("replay failed: {e}"));
            Ok(EXIT_NO_WITNESS)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Limit { cmd } => cmd_limit(cmd),
        Command::Upoly { cmd } => cmd_upoly(cmd),
        Command::Counterexample { which, arity, output } => {
            let cert = match which {
                Builtin::Urysohn => urysohn_counterexample(*arity)?,
                Builtin::Chains => chains_counterexample(*arity)?,
            };
            emit_certificate(output, &cert, 0)
        }
        Command::Replay { file } => cmd_replay(file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
