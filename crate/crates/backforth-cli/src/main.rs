//! Command-line front end. Structures and trees come in as JSON files,
//! linear-order terms as plain text arguments; every subcommand has a
//! machine-readable mode behind the global --json flag. Output is
//! byte-deterministic for fixed inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use backforth::bf::{scott_rank, BfError};
use backforth::ef::{
    ef_equiv, ef_type, format_type, game_solver, EfError, TypeArena, DEFAULT_MAX_ROUNDS,
};
use backforth::formula::{css, eval, EvalError, FormulaError, FormulaPool};
use backforth::normal::{normalize, term_equal_in, DistinctWitness, TermVerdict};
use backforth::sexpr::{parse_sexpr, to_sexpr, SexprError};
use backforth::structure::{
    brute_force_iso, random_structure, Signature, Structure, StructureError,
};
use backforth::terms::{harrison, parse_term, TermError};
use backforth::trees::{FiniteTree, TreeError};
use clap::{Parser, Subcommand};
use rand_core::{RngCore, SeedableRng};
use serde_json::json;
use thiserror::Error;

/// The full back-and-forth table enumerates injective tuples, which grows
/// factorially; eight elements is the point where a run still finishes in
/// seconds.
const MAX_SCOTT_SIZE: usize = 8;
/// Scott sentence construction enumerates extension tuples with repeats,
/// which grows exponentially in the domain size.
const MAX_CSS_SIZE: usize = 5;

#[derive(Debug, Error)]
enum CliError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Bf(#[from] BfError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sexpr(#[from] SexprError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Ef(#[from] EfError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("{0}")]
    Domain(String),
}

#[derive(Parser)]
#[command(name = "backforth", version, about = "Scott analysis, Kleene-Brouwer orders, and a linear-order term calculus at desk scale")]
struct Cli {
    /// Emit machine-readable JSON instead of plain text
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scott rank report for a structure file (JSON output always)
    Scott {
        /// Structure file (JSON)
        file: PathBuf,
    },
    /// Canonical Scott sentence of a structure file, as an s-expression
    Css {
        /// Structure file (JSON)
        file: PathBuf,
    },
    /// Evaluate a sentence file against a structure file
    Sat {
        /// Sentence file (s-expression)
        formula: PathBuf,
        /// Structure file (JSON)
        structure: PathBuf,
    },
    /// Compare two linear-order terms
    Ef {
        /// First term, e.g. "w^2*(1+eta)+3"
        t1: String,
        /// Second term
        t2: String,
        /// Check a single round instead of running the full verdict engine
        #[arg(long)]
        rounds: Option<u32>,
        /// Round budget for the verdict engine's refutation search
        #[arg(long, conflicts_with = "rounds")]
        max_rounds: Option<u32>,
        /// Cross-check with the explicit game solver (finite orders only)
        #[arg(long, requires = "rounds")]
        game: bool,
        /// Dump both round types as indented split trees
        #[arg(long, requires = "rounds")]
        dump: bool,
    },
    /// Normalize a term to its canonical form
    Norm {
        /// Term text
        term: String,
        /// Normalize A*(1+eta) for the given term A instead of the term itself
        #[arg(long)]
        harrison: bool,
    },
    /// Kleene-Brouwer ordering of a tree file, ascending
    Kb {
        /// Tree file (JSON node list)
        #[arg(long)]
        tree: PathBuf,
        /// Close the node list under prefixes instead of requiring closure
        #[arg(long)]
        close: bool,
        /// Also write the order as a structure file
        #[arg(long, value_name = "OUT")]
        as_structure: Option<PathBuf>,
    },
    /// Tree to Kleene-Brouwer order to times-omega normal form
    Classify {
        /// Tree file (JSON node list)
        #[arg(long)]
        tree: PathBuf,
    },
    /// Batch operations over a directory of structure files
    Corpus {
        #[command(subcommand)]
        cmd: CorpusCmd,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Cross-check Scott sentence satisfaction against brute-force isomorphism
    /// over every ordered pair in a directory
    CssIso {
        /// Directory of structure files (*.json)
        dir: PathBuf,
    },
    /// Generate seeded random structures into a directory
    Gen {
        /// Output directory (created if missing)
        dir: PathBuf,
        /// Seed for the generator
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// How many structures to write
        #[arg(long, default_value_t = 8)]
        count: u32,
        /// Domain size of each structure
        #[arg(long, default_value_t = 3)]
        size: usize,
        /// Edge density in [0,1]
        #[arg(long, default_value_t = 0.5)]
        density: f64,
    },
}

/// Line to stdout, dying quietly if the read end of a pipe went away
/// (`backforth ... | head` must not panic).
fn write_stdout(args: std::fmt::Arguments) -> Result<(), CliError> {
    use std::io::Write;
    let mut so = std::io::stdout().lock();
    match so.write_fmt(args).and_then(|()| so.write_all(b"\n")) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(e) => Err(CliError::Io(e)),
    }
}

macro_rules! outln {
    ($($arg:tt)*) => {
        write_stdout(format_args!($($arg)*))?
    };
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Scott { file } => cmd_scott(&file),
        Cmd::Css { file } => cmd_css(&file, cli.json),
        Cmd::Sat { formula, structure } => cmd_sat(&formula, &structure, cli.json),
        Cmd::Ef { t1, t2, rounds, max_rounds, game, dump } => {
            cmd_ef(&t1, &t2, rounds, max_rounds, game, dump, cli.json)
        }
        Cmd::Norm { term, harrison } => cmd_norm(&term, harrison, cli.json),
        Cmd::Kb { tree, close, as_structure } => {
            cmd_kb(&tree, close, as_structure.as_deref(), cli.json)
        }
        Cmd::Classify { tree } => cmd_classify(&tree, cli.json),
        Cmd::Corpus { cmd } => match cmd {
            CorpusCmd::CssIso { dir } => cmd_corpus_css_iso(&dir, cli.json),
            CorpusCmd::Gen { dir, seed, count, size, density } => {
                cmd_corpus_gen(&dir, seed, count, size, density, cli.json)
            }
        },
    }
}

fn load_structure(path: &Path) -> Result<Structure, CliError> {
    Ok(Structure::from_json(&fs::read_to_string(path)?)?)
}

fn cmd_scott(file: &Path) -> Result<(), CliError> {
    let m = load_structure(file)?;
    if m.size() > MAX_SCOTT_SIZE {
        return Err(CliError::Domain(format!(
            "structure has {} elements; scott handles at most {MAX_SCOTT_SIZE}",
            m.size()
        )));
    }
    let report = scott_rank(&m)?;
    outln!("{}", report.to_json());
    Ok(())
}

fn cmd_css(file: &Path, as_json: bool) -> Result<(), CliError> {
    let m = load_structure(file)?;
    if m.size() > MAX_CSS_SIZE {
        return Err(CliError::Domain(format!(
            "structure has {} elements; css handles at most {MAX_CSS_SIZE}",
            m.size()
        )));
    }
    let mut pool = FormulaPool::new();
    let sentence = css(&mut pool, &m)?;
    let text = to_sexpr(&pool, sentence);
    if as_json {
        outln!("{}", json!({ "sexpr": text, "qr": pool.qr(sentence) }));
    } else {
        outln!("{text}");
    }
    Ok(())
}

fn cmd_sat(formula: &Path, structure: &Path, as_json: bool) -> Result<(), CliError> {
    let m = load_structure(structure)?;
    let mut pool = FormulaPool::new();
    let f = parse_sexpr(&mut pool, &fs::read_to_string(formula)?)?;
    let holds = eval(&m, &pool, f, &BTreeMap::new())?;
    if as_json {
        outln!("{}", json!({ "sat": holds }));
    } else {
        outln!("{holds}");
    }
    Ok(())
}

fn cmd_ef(
    t1: &str,
    t2: &str,
    rounds: Option<u32>,
    max_rounds: Option<u32>,
    game: bool,
    dump: bool,
    as_json: bool,
) -> Result<(), CliError> {
    let a = parse_term(t1)?;
    let b = parse_term(t2)?;
    let mut arena = TypeArena::new();
    if let Some(n) = rounds {
        let ta = ef_type(&mut arena, &a, n)?;
        let tb = ef_type(&mut arena, &b, n)?;
        let same = ef_equiv(&ta, &tb);
        let mut payload = json!({
            "verdict": if same { "equivalent" } else { "distinguishable" },
            "rounds": n,
        });
        let mut lines = vec![if same { "equivalent" } else { "distinguishable" }.to_string()];
        if game {
            let (p, q) = match (a.eval_finite(), b.eval_finite()) {
                (Some(p), Some(q)) => (p, q),
                _ => {
                    return Err(CliError::Domain(
                        "the game solver handles finite orders only".into(),
                    ))
                }
            };
            let g = game_solver(p, q, n)?;
            payload["game"] = json!(if g { "equivalent" } else { "distinguishable" });
            lines.push(format!(
                "game: {}",
                if g { "equivalent" } else { "distinguishable" }
            ));
        }
        if dump {
            let da = format_type(&arena, &ta);
            let db = format_type(&arena, &tb);
            payload["types"] = json!([da, db]);
            lines.push(format!(
                "--- {t1} at round {n}\n{da}\n--- {t2} at round {n}\n{db}"
            ));
        }
        if as_json {
            outln!("{payload}");
        } else {
            outln!("{}", lines.join("\n"));
        }
        return Ok(());
    }
    let budget = max_rounds.unwrap_or(DEFAULT_MAX_ROUNDS);
    let verdict = term_equal_in(&mut arena, &a, &b, budget);
    let (line, payload) = match verdict {
        TermVerdict::Equal => ("equal".to_string(), json!({ "verdict": "equal" })),
        TermVerdict::Distinct(DistinctWitness::Round(n)) => (
            format!("distinct (round {n} separates them)"),
            json!({ "verdict": "distinct", "witness": "round", "round": n }),
        ),
        TermVerdict::Distinct(DistinctWitness::OrdinalCnf) => (
            "distinct (ordinal normal forms differ)".to_string(),
            json!({ "verdict": "distinct", "witness": "ordinal-cnf" }),
        ),
        TermVerdict::Unknown => (
            format!("unknown (no rewrite applies; rounds up to {budget} do not separate)"),
            json!({ "verdict": "unknown", "max_rounds": budget }),
        ),
    };
    if as_json {
        outln!("{payload}");
    } else {
        outln!("{line}");
    }
    Ok(())
}

fn cmd_norm(term: &str, as_harrison: bool, as_json: bool) -> Result<(), CliError> {
    let t = parse_term(term)?;
    let t = if as_harrison { harrison(&t)? } else { t };
    let nf = normalize(&t);
    if as_json {
        outln!(
            "{}",
            json!({
                "input": t.to_string(),
                "normal": nf.to_string(),
                "pure_ordinal": nf.is_pure_ordinal(),
            })
        );
    } else {
        outln!("{nf}");
    }
    Ok(())
}

fn cmd_kb(
    tree: &Path,
    close: bool,
    as_structure: Option<&Path>,
    as_json: bool,
) -> Result<(), CliError> {
    let text = fs::read_to_string(tree)?;
    let t = if close {
        FiniteTree::from_json_closed(&text)?
    } else {
        FiniteTree::from_json(&text)?
    };
    let order = t.kb_order();
    if let Some(out) = as_structure {
        fs::write(out, t.kb_as_structure()?.to_json())?;
    }
    if as_json {
        outln!("{}", json!({ "order": order }));
    } else {
        for node in &order {
            outln!("{}", serde_json::to_string(node).expect("node list"));
        }
    }
    Ok(())
}

fn cmd_classify(tree: &Path, as_json: bool) -> Result<(), CliError> {
    let t = FiniteTree::from_json(&fs::read_to_string(tree)?)?;
    let nf = t.classify_pipeline();
    if as_json {
        outln!("{}", json!({ "term": nf.to_string() }));
    } else {
        outln!("{nf}");
    }
    Ok(())
}

fn cmd_corpus_css_iso(dir: &Path, as_json: bool) -> Result<(), CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Domain(format!(
            "no *.json structure files in {}",
            dir.display()
        )));
    }
    let mut names = Vec::new();
    let mut structures = Vec::new();
    for path in &files {
        let m = load_structure(path)?;
        if m.size() > MAX_CSS_SIZE {
            return Err(CliError::Domain(format!(
                "{}: {} elements; css handles at most {MAX_CSS_SIZE}",
                path.display(),
                m.size()
            )));
        }
        names.push(
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        );
        structures.push(m);
    }
    let mut rows = Vec::new();
    let mut agree = 0usize;
    for (i, m) in structures.iter().enumerate() {
        let mut pool = FormulaPool::new();
        let sentence = css(&mut pool, m)?;
        let sat = backforth::formula::mod_check(&pool, sentence, &structures)?;
        for (j, n) in structures.iter().enumerate() {
            let iso = brute_force_iso(m, n).is_some();
            if sat[j] == iso {
                agree += 1;
            }
            rows.push((i, j, sat[j], iso));
        }
    }
    let total = rows.len();
    if as_json {
        let pairs: Vec<_> = rows
            .iter()
            .map(|&(i, j, sat, iso)| {
                json!({ "a": names[i], "b": names[j], "css": sat, "iso": iso })
            })
            .collect();
        outln!(
            "{}",
            json!({ "pairs": pairs, "total": total, "agree": agree })
        );
    } else {
        for &(i, j, sat, iso) in &rows {
            outln!(
                "{} vs {}: css={} iso={} {}",
                names[i],
                names[j],
                sat,
                iso,
                if sat == iso { "ok" } else { "MISMATCH" }
            );
        }
        outln!("{} structures, {total} ordered pairs, {agree} agree", names.len());
    }
    Ok(())
}

fn cmd_corpus_gen(
    dir: &Path,
    seed: u64,
    count: u32,
    size: usize,
    density: f64,
    as_json: bool,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let sig = Signature::binary("E");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut written = Vec::new();
    for i in 0..count {
        let m = random_structure(rng.next_u64(), size, &sig, density)?;
        let path = dir.join(format!("s{i:03}.json"));
        fs::write(&path, m.to_json())?;
        written.push(path.display().to_string());
    }
    if as_json {
        outln!("{}", json!({ "files": written }));
    } else {
        for path in &written {
            outln!("{path}");
        }
    }
    Ok(())
}
