//! `gasket`: harmonic extension, bottom-edge norms, extension maps and the
//! experiment suite from the command line.
//!
//! Exit codes: 0 success, 1 experiment failure, 2 parse error, 3 domain
//! error, 4 input-contract error.

mod error;
mod formats;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gasket::address::{check_level, embed_in_cell, vertex_count, PairIndex};
use gasket::extension::{build_corrector, reflect_corrector, CorrectorRole, ExtensionKind, ExtensionPlan};
use gasket::scalar::{entry_mode, Rational, Scalar, ScalarMode};
use gasket::traceops::{norm, restrict, CriticalConstants, Space};
use gasket::verify::{run_suite, select, SuiteConfig};
use gasket::{Execution, HarmonicFunction, LineFunction};
use serde::Serialize;

use crate::error::CliError;
use crate::formats::*;

#[derive(Parser)]
#[command(name = "gasket", version, about = "Trace and extension toolkit for the Sierpinski gasket")]
struct Cli {
    /// Run every kernel on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Float,
}

#[derive(Subcommand)]
enum Command {
    /// Harmonic function with boundary values (a, b, c) on q0, q1, q2.
    Harmonic {
        #[arg(short = 'a', allow_hyphen_values = true)]
        a: String,
        #[arg(short = 'b', allow_hyphen_values = true)]
        b: String,
        #[arg(short = 'c', allow_hyphen_values = true)]
        c: String,
        #[arg(short = 'm', long = "level")]
        level: usize,
        /// Scalar mode; by default exact unless an entry is a decimal.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Norms of a bottom-edge function (besov:ALPHA, ttilde:SIGMA, t:SIGMA, tinf).
    TraceNorm {
        input: PathBuf,
        #[arg(long = "space", required = true)]
        spaces: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also plot each partial-sum trajectory.
        #[arg(long)]
        svg: bool,
    },
    /// Extend a bottom-edge function to the gasket (tilde, full, partial:M).
    Extend {
        input: PathBuf,
        #[arg(long)]
        map: String,
        #[arg(short = 'm', long = "level")]
        level: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run experiments: `all`, one id, or a comma-separated list.
    Verify {
        #[arg(default_value = "all")]
        selector: String,
        #[arg(long, default_value_t = 10)]
        max_level: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "verify-report")]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Bottom-edge trace of a gasket function file.
    Restrict {
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the critical constants.
    Constants,
}

/// A JSON document with the format version alongside its fields.
#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    format: u32,
    #[serde(flatten)]
    inner: &'a T,
}

fn versioned<T: Serialize>(inner: &T) -> Versioned<'_, T> {
    Versioned { format: FORMAT, inner }
}

fn file_stem(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
            out.push(c);
        } else if !out.is_empty() && !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_end_matches('_').to_string()
}

fn cmd_harmonic(a: &str, b: &str, c: &str, level: usize, mode: Option<Mode>, out: &Path) -> Result<(), CliError> {
    let texts = [a, b, c];
    let float = match mode {
        Some(Mode::Float) => true,
        Some(Mode::Exact) => false,
        None => texts.iter().any(|t| entry_mode(t) == Some(ScalarMode::Float)),
    };
    fn run<S: Scalar>(texts: [&str; 3], level: usize, out: &Path) -> Result<(), CliError> {
        let parse = |t: &str| S::parse(t).map_err(|e| CliError::Parse(format!("invalid boundary value {t:?}: {e}")));
        let h = HarmonicFunction { boundary: [parse(texts[0])?, parse(texts[1])?, parse(texts[2])?] };
        check_level(level)?;
        let u = h.on_level(level)?;
        let csv = trace_csv(&restrict(&u)?);
        write_json(&out.join("harmonic.json"), &GraphDoc::encode(&u))?;
        write_json(&out.join("harmonic_trace.json"), &LineDoc::encode(&restrict(&u)?))?;
        write_atomic(&out.join("harmonic_trace.csv"), &csv)?;
        print!("{csv}");
        Ok(())
    }
    if float {
        run::<f64>(texts, level, out)
    } else {
        run::<Rational>(texts, level, out)
    }
}

fn cmd_restrict(input: &Path, out: &Path) -> Result<(), CliError> {
    let doc: GraphDoc = read_json(input)?;
    let (line, csv) = match doc.decode()? {
        AnyGraph::Exact(u) => {
            let f = restrict(&u)?;
            (LineDoc::encode(&f), trace_csv(&f))
        }
        AnyGraph::Float(u) => {
            let f = restrict(&u)?;
            (LineDoc::encode(&f), trace_csv(&f))
        }
    };
    write_json(&out.join("trace.json"), &line)?;
    write_atomic(&out.join("trace.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

#[derive(Serialize)]
struct NormBundle {
    input: String,
    reports: Vec<gasket::NormReport>,
}

fn cmd_trace_norm(input: &Path, specs: &[String], out: &Path, svg: bool, exec: Execution) -> Result<(), CliError> {
    let spaces = specs
        .iter()
        .map(|s| s.parse::<Space>().map_err(|e| CliError::Parse(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    for s in &spaces {
        s.validate()?;
    }
    let doc: LineDoc = read_json(input)?;
    let line = doc.decode()?;
    let mut reports = Vec::new();
    for space in spaces {
        let r = match &line {
            AnyLine::Exact(f) => norm(f, space, exec)?,
            AnyLine::Float(f) => norm(f, space, exec)?,
        };
        let stem = format!("norm_{}", file_stem(&space.to_string()));
        let mut csv = String::from("level,term,partial,ratio\n");
        for (i, ((l, t), p)) in r.levels.iter().zip(&r.terms).zip(&r.partials).enumerate() {
            let ratio = if i == 0 { String::new() } else { format!("{:e}", t / r.terms[i - 1]) };
            csv.push_str(&format!("{l},{t:e},{p:e},{ratio}\n"));
        }
        write_atomic(&out.join(format!("{stem}.csv")), &csv)?;
        if svg {
            let plot = log_plot_svg(&format!("{space} partial sums"), &r.levels, &r.partials);
            write_atomic(&out.join(format!("{stem}.svg")), &plot)?;
        }
        println!("{space}: value {:.12e} (base {:.6e}, levels {}..={})", r.value, r.base,
            r.levels.first().copied().unwrap_or(0), r.levels.last().copied().unwrap_or(0));
        reports.push(r);
    }
    let bundle = NormBundle { input: input.display().to_string(), reports };
    write_json(&out.join("norm.json"), &versioned(&bundle))
}

/// Extension plus its restriction check.
fn extend_with<S: Scalar>(f: &LineFunction<S>, kind: ExtensionKind, level: usize) -> Result<GraphDoc, CliError> {
    check_level(level)?;
    let plan = ExtensionPlan::new(f)?;
    let correctors = match kind {
        ExtensionKind::Tilde => None,
        _ => {
            let v0 = build_corrector::<S>(CorrectorRole::V0, level.saturating_sub(2).max(4))?;
            let v2 = reflect_corrector(&v0);
            Some((v0, v2))
        }
    };
    let u = plan.extend(kind, level, correctors.as_ref().map(|c| &c.0), correctors.as_ref().map(|c| &c.1))?;

    let m = f.level();
    let tr = restrict(&u)?;
    let mut worst = S::zero();
    for j in 0..=1usize << m {
        let d = (tr.sample(m, j)? - f.sample(m, j)?).abs();
        if d > worst {
            worst = d;
        }
    }
    let (cells, baseline) = match kind {
        ExtensionKind::Tilde => (Vec::new(), None),
        ExtensionKind::Full => (plan.corrector_cells(m), Some(plan.tilde(level)?)),
        ExtensionKind::Partial(p) => {
            let mut cells = plan.corrector_cells(p);
            for k in 1..(1usize << p) {
                cells.push((p + 1, PairIndex::new(p + 1, 2 * k)?.cell_index()));
            }
            (cells, Some(plan.tents(p, level)?))
        }
    };
    let corrected = match &baseline {
        None => 0,
        Some(b) => {
            let diff = u.minus(b)?;
            cells
                .iter()
                .filter(|&&(cl, cell)| {
                    (0..vertex_count(level - cl)).any(|local| !diff.at(embed_in_cell(cl, cell, local)).is_zero())
                })
                .count()
        }
    };
    let mut doc = GraphDoc::encode(&u);
    doc.verification = Some(Verification {
        map: kind.to_string(),
        source_level: m,
        output_level: level,
        max_restriction_error: worst.encode(),
        restriction_matches: worst.is_zero(),
        corrector_cells: cells,
        corrected_cells: corrected,
    });
    Ok(doc)
}

fn cmd_extend(input: &Path, map: &str, level: usize, out: &Path) -> Result<(), CliError> {
    let kind: ExtensionKind = map.parse().map_err(|e: gasket::Error| CliError::Parse(e.to_string()))?;
    let doc: LineDoc = read_json(input)?;
    let g = match doc.decode()? {
        AnyLine::Exact(f) => extend_with(&f, kind, level)?,
        AnyLine::Float(f) => extend_with(&f, kind, level)?,
    };
    let v = g.verification.as_ref().expect("set by extend_with");
    println!(
        "{} extension to level {}: max restriction error {} on the level-{} grid ({})",
        v.map,
        v.output_level,
        v.max_restriction_error,
        v.source_level,
        if v.restriction_matches { "exact match" } else { "MISMATCH" }
    );
    if !v.corrector_cells.is_empty() {
        println!("corrector layers in {} of {} cells", v.corrected_cells, v.corrector_cells.len());
    }
    write_json(&out.join("extension.json"), &g)
}

#[derive(Serialize)]
struct SuiteEntry {
    id: String,
    pass: bool,
    skipped: bool,
    summary: String,
    elapsed_ms: u64,
}

#[derive(Serialize)]
struct SuiteSummary {
    max_level: usize,
    seed: u64,
    pass: bool,
    experiments: Vec<SuiteEntry>,
}

fn cmd_verify(selector: &str, max_level: usize, seed: u64, out: &Path, svg: bool, exec: Execution) -> Result<(), CliError> {
    let ids = select(selector).map_err(|e| CliError::Parse(e.to_string()))?;
    check_level(max_level)?;
    let reports = run_suite(&ids, SuiteConfig { max_level, seed }, exec);
    let mut failed = Vec::new();
    let mut entries = Vec::new();
    for r in &reports {
        write_json(&out.join(format!("{}.json", r.id)), &versioned(r))?;
        for s in &r.series {
            let stem = format!("{}.{}", r.id, file_stem(&s.name));
            write_atomic(&out.join(format!("{stem}.csv")), &s.to_csv())?;
            if svg {
                write_atomic(&out.join(format!("{stem}.svg")), &log_plot_svg(&format!("{} {}", r.id, s.name), &s.levels, &s.values))?;
            }
        }
        println!("{} [{} ms]", r.summary, r.elapsed_ms);
        if !r.pass {
            failed.push(r.id.clone());
        }
        entries.push(SuiteEntry {
            id: r.id.clone(),
            pass: r.pass,
            skipped: r.skipped,
            summary: r.summary.clone(),
            elapsed_ms: r.elapsed_ms,
        });
    }
    let summary = SuiteSummary { max_level, seed, pass: failed.is_empty(), experiments: entries };
    write_json(&out.join("summary.json"), &versioned(&summary))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(failed))
    }
}

fn cmd_constants() {
    let c = CriticalConstants::get();
    let alpha = CriticalConstants::alpha;
    let rows: Vec<(String, f64)> = vec![
        ("b1 = log3/log5".into(), c.b1),
        ("b2".into(), c.b2),
        ("2 - log3/log5".into(), c.expansion_limit),
        ("lambda+ = (17+sqrt73)/50".into(), c.lambda_plus),
        ("lambda- = (17-sqrt73)/50".into(), c.lambda_minus),
        ("log6/log5".into(), c.linear_threshold),
        ("alpha(b1)".into(), alpha(c.b1)),
        ("alpha(1)".into(), alpha(1.0)),
        ("alpha(log6/log5)".into(), alpha(c.linear_threshold)),
        ("alpha(b2)".into(), alpha(c.b2)),
    ];
    for (name, v) in rows {
        println!("{name:<26} {v:.12}");
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    gasket::configure_from_env().map_err(|e| CliError::Parse(e.to_string()))?;
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    match cli.command {
        Command::Harmonic { a, b, c, level, mode, out } => cmd_harmonic(&a, &b, &c, level, mode, &out),
        Command::TraceNorm { input, spaces, out, svg } => cmd_trace_norm(&input, &spaces, &out, svg, exec),
        Command::Extend { input, map, level, out } => cmd_extend(&input, &map, level, &out),
        Command::Verify { selector, max_level, seed, out, svg } => cmd_verify(&selector, max_level, seed, &out, svg, exec),
        Command::Restrict { input, out } => cmd_restrict(&input, &out),
        Command::Constants => {
            cmd_constants();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // clap reports usage errors with exit code 2.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}

