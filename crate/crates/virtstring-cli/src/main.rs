//! Command-line front end: invariant reports, classification, homotopy
//! queries, cobracket and knot polynomial computation, and SVG chord
//! diagram emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use virtstring::filling::{
    lagrangian_scan, sigma_certificate, slice_obstruction, FillingError, LagrangianScan,
};
use virtstring::lie::{cobracket, iterated_cobracket, FormalSum};
use virtstring::matrix::{genus, rho, BasedMatrix};
use virtstring::moves::{bfs_equal, classify_rank, normalize, BfsStatus, StringClassKey};
use virtstring::poly::{higher_u, realize_u, u};
use virtstring::skein::{nabla, nabla_ut};
use virtstring::string::Role;
use virtstring::{ArrowDiagram, IntPoly, VirtualString};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "virtstring", version, about = "Invariants of virtual strings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonFlags {
    /// Emit machine-readable JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the full invariant report of a closed string.
    Invariants {
        /// String code, or a path to a file containing one.
        input: String,
        #[arg(long, default_value_t = 14)]
        max_filling_size: usize,
        #[arg(long, default_value_t = 20)]
        coeff_bound: i64,
        #[arg(long, default_value_t = 3)]
        cover_depth: u64,
        #[arg(long, default_value_t = 3)]
        r_max: u64,
        /// Node budget for the mod-2 Lagrangian scan; 0 skips the scan.
        #[arg(long, default_value_t = 0)]
        lagrangian_budget: u64,
        #[arg(long, default_value_t = 100_000)]
        node_budget: u64,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Group all strings of one rank into homotopy classes.
    Classify {
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value_t = 1)]
        rank_cap_slack: usize,
        #[arg(long, default_value_t = 100_000)]
        node_budget: u64,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Decide whether two closed strings are homotopic within a budget.
    HomotopyEqual {
        a: String,
        b: String,
        #[arg(long, default_value_t = 6)]
        rank_cap: usize,
        #[arg(long, default_value_t = 100_000)]
        node_budget: u64,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Compute the Lie cobracket of a closed string.
    Cobracket {
        input: String,
        /// Number of cobracket applications.
        #[arg(long, default_value_t = 1)]
        iterate: usize,
        #[arg(long, default_value_t = 100_000)]
        node_budget: u64,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Virtual knot computations on signed arrow diagrams.
    Knot {
        #[command(subcommand)]
        command: KnotCommand,
    },
    /// Render a string or diagram as an SVG chord picture.
    Svg {
        input: String,
        out: PathBuf,
    },
    /// Construct a string with a prescribed u-polynomial.
    RealizeU {
        /// Polynomial in the text form "2t^4-4t^2".
        poly: String,
        #[command(flatten)]
        common: CommonFlags,
    },
}

#[derive(Subcommand)]
enum KnotCommand {
    /// The string-valued knot polynomial, or its two-variable image.
    Nabla {
        /// Diagram code with sign suffixes, or a path to a file.
        input: String,
        /// Project every string class to its u-polynomial in t.
        #[arg(long)]
        ut: bool,
        /// Replace the diagram by its r-fold covering first.
        #[arg(long, default_value_t = 1)]
        cover: u64,
        #[arg(long, default_value_t = 100_000)]
        node_budget: u64,
        #[command(flatten)]
        common: CommonFlags,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

/// Reads the argument as a file when one exists at that path, otherwise
/// treats it as literal code text.
fn read_input(input: &str) -> Result<String, String> {
    if Path::new(input).is_file() {
        fs::read_to_string(input).map_err(|e| format!("cannot read {input}: {e}"))
    } else {
        Ok(input.to_string())
    }
}

fn parse_string(input: &str) -> Result<VirtualString, ExitCode> {
    let text = match read_input(input) {
        Ok(text) => text,
        Err(message) => {
            eprintln!("error: {message}");
            return Err(ExitCode::from(1));
        }
    };
    match VirtualString::parse(text.trim()) {
        Ok(s) => Ok(s),
        Err(e) => {
            eprintln!("parse error: {e}");
            Err(ExitCode::from(2))
        }
    }
}

fn parse_diagram(input: &str) -> Result<ArrowDiagram, ExitCode> {
    let text = match read_input(input) {
        Ok(text) => text,
        Err(message) => {
            eprintln!("error: {message}");
            return Err(ExitCode::from(1));
        }
    };
    match ArrowDiagram::parse(text.trim()) {
        Ok(d) => Ok(d),
        Err(e) => {
            eprintln!("parse error: {e}");
            Err(ExitCode::from(2))
        }
    }
}

fn poly_json(p: &IntPoly) -> Value {
    Value::Array(
        p.to_pairs()
            .into_iter()
            .map(|(e, c)| json!([e, c]))
            .collect(),
    )
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Invariants {
            input,
            max_filling_size,
            coeff_bound,
            cover_depth,
            r_max,
            lagrangian_budget,
            node_budget,
            common,
        } => {
            let s = match parse_string(&input) {
                Ok(s) => s,
                Err(code) => return Ok(code),
            };
            let report = invariants_report(
                &s,
                max_filling_size,
                coeff_bound,
                cover_depth,
                r_max,
                lagrangian_budget,
                node_budget,
            );
            if common.json {
                println!("{}", serde_json::to_string_pretty(&report).unwrap());
            } else {
                print_report_text(&report);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Classify {
            rank,
            rank_cap_slack,
            node_budget,
            common,
        } => {
            let classification = classify_rank(rank, rank_cap_slack, node_budget)
                .map_err(|e| e.to_string())?;
            let classes: Vec<Value> = classification
                .classes
                .iter()
                .map(|bucket| {
                    json!({
                        "key": class_key_json(&bucket.key),
                        "members": bucket.members.iter().map(|c| c.key()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let out = json!({
                "schema": SCHEMA_VERSION,
                "rank": rank,
                "classes": classes,
                "unknown_pairs": classification.unknown_pairs,
            });
            if common.json {
                println!("{}", serde_json::to_string_pretty(&out).unwrap());
            } else {
                println!(
                    "rank {rank}: {} homotopy classes",
                    classification.classes.len()
                );
                for (i, bucket) in classification.classes.iter().enumerate() {
                    let name = match &bucket.key {
                        StringClassKey::Zero => "trivial".to_string(),
                        StringClassKey::Code(code) => code.key(),
                    };
                    println!("  class {i} [{name}]: {} members", bucket.members.len());
                }
                if !classification.unknown_pairs.is_empty() {
                    println!("  unresolved pairs: {:?}", classification.unknown_pairs);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::HomotopyEqual {
            a,
            b,
            rank_cap,
            node_budget,
            common,
        } => {
            let (sa, sb) = match (parse_string(&a), parse_string(&b)) {
                (Ok(sa), Ok(sb)) => (sa, sb),
                (Err(code), _) | (_, Err(code)) => return Ok(code),
            };
            let verdict = bfs_equal(&sa, &sb, rank_cap, node_budget);
            let (status, witness, path_length) = match &verdict.status {
                BfsStatus::Equal { path_length } => ("Equal", Value::Null, json!(path_length)),
                BfsStatus::Distinct { invariant } => {
                    ("Distinct", json!(invariant), Value::Null)
                }
                BfsStatus::Unknown => ("Unknown", Value::Null, Value::Null),
            };
            let out = json!({
                "schema": SCHEMA_VERSION,
                "a": sa.serialize(),
                "b": sb.serialize(),
                "verdict": status,
                "witness": witness,
                "path_length": path_length,
                "nodes": verdict.nodes,
                "rank_cap": verdict.rank_cap,
            });
            if common.json {
                println!("{}", serde_json::to_string_pretty(&out).unwrap());
            } else {
                match &verdict.status {
                    BfsStatus::Equal { path_length } => {
                        println!("Equal (path length {path_length})")
                    }
                    BfsStatus::Distinct { invariant } => {
                        println!("Distinct (witness: {invariant})")
                    }
                    BfsStatus::Unknown => println!(
                        "Unknown (budget exhausted after {} nodes)",
                        verdict.nodes
                    ),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Cobracket {
            input,
            iterate,
            node_budget,
            common,
        } => {
            let s = match parse_string(&input) {
                Ok(s) => s,
                Err(code) => return Ok(code),
            };
            let value = if iterate <= 1 {
                cobracket(&s, node_budget)
            } else {
                iterated_cobracket(&s, iterate, node_budget)
            };
            if common.json {
                let out = json!({
                    "schema": SCHEMA_VERSION,
                    "input": s.serialize(),
                    "iterate": iterate.max(1),
                    "value": value.to_json(),
                });
                println!("{}", serde_json::to_string_pretty(&out).unwrap());
            } else {
                println!("{}", formal_sum_text(&value));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Knot {
            command:
                KnotCommand::Nabla {
                    input,
                    ut,
                    cover,
                    node_budget,
                    common,
                },
        } => {
            let d = match parse_diagram(&input) {
                Ok(d) => d,
                Err(code) => return Ok(code),
            };
            if cover == 0 {
                return Err("--cover must be at least 1".into());
            }
            let d = d.knot_covering(cover);
            if ut {
                let value = nabla_ut(&d, node_budget);
                if common.json {
                    let terms: Vec<Value> = value
                        .terms()
                        .iter()
                        .map(|(&(z, t), c)| json!([z, t, format!("{}/{}", c.numer(), c.denom())]))
                        .collect();
                    let out = json!({
                        "schema": SCHEMA_VERSION,
                        "input": d.serialize(),
                        "nabla_ut": terms,
                    });
                    println!("{}", serde_json::to_string_pretty(&out).unwrap());
                } else {
                    println!("{}", value.to_text());
                }
            } else {
                let value = nabla(&d, node_budget);
                if common.json {
                    let out = json!({
                        "schema": SCHEMA_VERSION,
                        "input": d.serialize(),
                        "nabla": value.to_json(),
                    });
                    println!("{}", serde_json::to_string_pretty(&out).unwrap());
                } else {
                    println!("{}", formal_sum_text(&value));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Svg { input, out } => {
            let text = read_input(&input)?;
            let trimmed = text.trim();
            let svg = if trimmed.contains('+') || trimmed.contains('-') {
                match ArrowDiagram::parse(trimmed) {
                    Ok(d) => render_svg(d.underlying(), Some(d.signs())),
                    Err(e) => {
                        eprintln!("parse error: {e}");
                        return Ok(ExitCode::from(2));
                    }
                }
            } else {
                match VirtualString::parse(trimmed) {
                    Ok(s) => render_svg(&s, None),
                    Err(e) => {
                        eprintln!("parse error: {e}");
                        return Ok(ExitCode::from(2));
                    }
                }
            };
            fs::write(&out, svg).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::RealizeU { poly, common } => {
            let p = match parse_poly(&poly) {
                Ok(p) => p,
                Err(message) => {
                    eprintln!("parse error: {message}");
                    return Ok(ExitCode::from(2));
                }
            };
            match realize_u(&p) {
                Ok(s) => {
                    if common.json {
                        let out = json!({
                            "schema": SCHEMA_VERSION,
                            "poly": poly_json(&p),
                            "string": s.serialize(),
                            "check": poly_json(&u(&s)),
                        });
                        println!("{}", serde_json::to_string_pretty(&out).unwrap());
                    } else {
                        println!("{}", s.serialize());
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => Err(e.to_string()),
            }
        }
    }
}

fn class_key_json(key: &StringClassKey) -> Value {
    match key {
        StringClassKey::Zero => Value::Null,
        StringClassKey::Code(code) => json!(code.key()),
    }
}

fn formal_sum_text(value: &FormalSum) -> String {
    if value.is_zero() {
        return "0".to_string();
    }
    let mut parts = Vec::new();
    for (mono, coeff) in value.terms() {
        let coeff_text = if *coeff.denom() == 1 {
            format!("{}", coeff.numer())
        } else {
            format!("{}/{}", coeff.numer(), coeff.denom())
        };
        let mut piece = coeff_text;
        if mono.z > 0 {
            piece.push_str(&if mono.z == 1 {
                " z".to_string()
            } else {
                format!(" z^{}", mono.z)
            });
        }
        let sep = if mono.tensor { " (x) " } else { " * " };
        for factor in &mono.factors {
            piece.push_str(&format!("{sep}<{factor}>"));
        }
        parts.push(piece);
    }
    parts.join("  +  ")
}

fn invariants_report(
    s: &VirtualString,
    max_filling_size: usize,
    coeff_bound: i64,
    cover_depth: u64,
    r_max: u64,
    lagrangian_budget: u64,
    node_budget: u64,
) -> Value {
    let start = Instant::now();
    let t = BasedMatrix::from_string(s);
    let primitive = t.primitive_reduce();
    let mut higher: Vec<Value> = Vec::new();
    for r1 in 2..=r_max {
        higher.push(json!({
            "rs": [r1],
            "poly": higher_u(s, &[r1]).to_text(),
        }));
        for r2 in 2..=r_max {
            higher.push(json!({
                "rs": [r1, r2],
                "poly": higher_u(s, &[r1, r2]).to_text(),
            }));
        }
    }
    let (sigma_value, hyperbolic) = match sigma_certificate(&primitive, max_filling_size) {
        Ok((value, _)) => (json!(value), json!(value == 0)),
        Err(FillingError::SizeCapExceeded { .. }) => (json!("Unknown"), json!("Unknown")),
        Err(e) => (json!(format!("Unknown ({e})")), json!("Unknown")),
    };
    let slice = match slice_obstruction(s, cover_depth, r_max, max_filling_size) {
        Ok(report) => report.to_json(),
        Err(e) => json!({ "verdict": format!("Unknown ({e})") }),
    };
    let lagrangian = if lagrangian_budget > 0 {
        match lagrangian_scan(s, 2, lagrangian_budget) {
            LagrangianScan::NotSlice => json!({ "verdict": "NotSlice" }),
            LagrangianScan::NoObstructionFound => json!({ "verdict": "NoObstructionFound" }),
            LagrangianScan::BudgetExceeded => json!({ "verdict": "Unknown" }),
        }
    } else {
        Value::Null
    };
    let cobracket_value = cobracket(s, node_budget);
    let trivial_class = matches!(normalize(s, node_budget), StringClassKey::Zero);
    json!({
        "schema": SCHEMA_VERSION,
        "input": s.serialize(),
        "rank": s.rank(),
        "u": u(s).to_text(),
        "higher_u": higher,
        "rho": rho(s),
        "genus": genus(s),
        "matrix": serde_json::from_str::<Value>(&t.to_json()).unwrap(),
        "primitive_matrix": serde_json::from_str::<Value>(&primitive.to_json()).unwrap(),
        "sigma": sigma_value,
        "hyperbolic": hyperbolic,
        "ribbon": s.is_ribbon(),
        "cobracket": cobracket_value.to_json(),
        "cobracket_zero": cobracket_value.is_zero(),
        "reduces_to_trivial": trivial_class,
        "slice": slice,
        "lagrangian_mod2": lagrangian,
        "caps": {
            "max_filling_size": max_filling_size,
            "coeff_bound": coeff_bound,
            "cover_depth": cover_depth,
            "r_max": r_max,
            "lagrangian_budget": lagrangian_budget,
            "node_budget": node_budget,
        },
        "elapsed_ms": start.elapsed().as_millis() as u64,
    })
}

fn print_report_text(report: &Value) {
    let field = |name: &str| report.get(name).cloned().unwrap_or(Value::Null);
    println!("input:     {}", field("input").as_str().unwrap_or(""));
    println!("rank:      {}", field("rank"));
    println!("u:         {}", field("u").as_str().unwrap_or(""));
    println!("rho:       {}", field("rho"));
    println!("genus:     {}", field("genus"));
    println!("sigma:     {}", field("sigma"));
    println!("hyperbolic: {}", field("hyperbolic"));
    println!("ribbon:    {}", field("ribbon"));
    println!("cobracket zero: {}", field("cobracket_zero"));
    println!("reduces to trivial: {}", field("reduces_to_trivial"));
    let slice = field("slice");
    if let Some(verdict) = slice
        .get("report")
        .and_then(|r| r.get("verdict"))
        .or_else(|| slice.get("verdict"))
    {
        println!("slice:     {}", verdict.as_str().unwrap_or("Unknown"));
    }
    println!("elapsed:   {} ms", field("elapsed_ms"));
}

fn parse_poly(text: &str) -> Result<IntPoly, String> {
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if cleaned.is_empty() || cleaned == "0" {
        return Ok(IntPoly::zero());
    }
    let mut out = IntPoly::zero();
    let mut rest = cleaned.as_str();
    while !rest.is_empty() {
        let sign = if let Some(r) = rest.strip_prefix('-') {
            rest = r;
            -1
        } else {
            rest = rest.strip_prefix('+').unwrap_or(rest);
            1
        };
        let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
        rest = &rest[digits.len()..];
        let coeff: i64 = if digits.is_empty() {
            1
        } else {
            digits
                .parse()
                .map_err(|_| format!("bad coefficient {digits:?}"))?
        };
        let exp: u32 = if let Some(r) = rest.strip_prefix('t') {
            if let Some(r2) = r.strip_prefix('^') {
                let ds: String = r2.chars().take_while(|c| c.is_ascii_digit()).collect();
                if ds.is_empty() {
                    return Err("missing exponent after '^'".into());
                }
                rest = &r2[ds.len()..];
                ds.parse().map_err(|_| format!("bad exponent {ds:?}"))?
            } else {
                rest = r;
                1
            }
        } else {
            if digits.is_empty() {
                return Err(format!("unexpected token at {rest:?}"));
            }
            0
        };
        out.add_term(exp, sign * coeff);
    }
    Ok(out)
}

fn render_svg(s: &VirtualString, signs: Option<&[i8]>) -> String {
    let size = 420.0;
    let center = size / 2.0;
    let radius = 160.0;
    let code = s.code();
    let n = code.len();
    let point = |k: usize| {
        let angle = -std::f64::consts::FRAC_PI_2
            + 2.0 * std::f64::consts::PI * (k as f64) / (n.max(1) as f64);
        (center + radius * angle.cos(), center + radius * angle.sin())
    };
    let mut body = String::new();
    body.push_str(&format!(
        "  <circle cx=\"{center}\" cy=\"{center}\" r=\"{radius}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n"
    ));
    let (tails, heads) = s.endpoints();
    for e in 0..s.rank() {
        let (x1, y1) = point(tails[e]);
        let (x2, y2) = point(heads[e]);
        body.push_str(&format!(
            "  <line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"steelblue\" stroke-width=\"1.2\" marker-end=\"url(#head)\"/>\n"
        ));
    }
    for (k, &(id, role)) in code.iter().enumerate() {
        let (x, y) = point(k);
        let dx = x - center;
        let dy = y - center;
        let norm = (dx * dx + dy * dy).sqrt().max(1.0);
        let (lx, ly) = (center + dx / norm * (radius + 18.0), center + dy / norm * (radius + 18.0));
        let mut label = format!("{}", (b'a' + (id % 26) as u8) as char);
        if id >= 26 {
            label.push_str(&format!("{}", id / 26));
        }
        if role == Role::Head {
            label.push('\'');
        } else if let Some(signs) = signs {
            label.push(if signs[id] > 0 { '+' } else { '-' });
        }
        body.push_str(&format!(
            "  <text x=\"{lx:.2}\" y=\"{ly:.2}\" font-size=\"13\" text-anchor=\"middle\" dominant-baseline=\"middle\">{label}</text>\n"
        ));
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n\
         <defs>\n  <marker id=\"head\" markerWidth=\"8\" markerHeight=\"8\" refX=\"6\" refY=\"3\" orient=\"auto\">\n    <path d=\"M0,0 L6,3 L0,6 z\" fill=\"steelblue\"/>\n  </marker>\n</defs>\n{body}</svg>\n"
    )
}
