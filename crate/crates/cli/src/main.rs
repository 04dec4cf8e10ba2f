use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use hornlab::exactmath::{fmt_rat, parse_rat, IntMatrix, Rat};
use hornlab::families::{
    appendix_a_check, appendix_a_sweep, check_m_2d, horn_2d, horn_3d, pair_2d, strict_linear_precision_check,
    tree_2d, tree_3d, Family2DParams, PrismatoidParams, TreeVariant, CATALOG,
};
use hornlab::horn::{horn_eval, minimize, validate_horn_pair, HornPair};
use hornlab::polytope::{hull_in_span, ldm_at, matrix_m_at, normal_fan, primitive_collections};
use hornlab::stagedtree::{
    appendix_b_identity_tests, is_balanced, model_invariant_generators, property_star, rational_mle,
    simpleness_via_tree, stages_equal_primitive_collections, tree_horn_pair, vanishing_check, StagedTree,
};

#[derive(Parser)]
#[command(name = "hornlab", version, about = "Horn pairs, lattice polytopes and staged tree models in exact arithmetic")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    /// Seed for every random sample.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of random samples used by checks.
    #[arg(long, global = true, default_value_t = 100)]
    samples: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// The trapezoid family T_{a,b,d}.
    Family2d {
        #[arg(long)]
        a: u32,
        #[arg(long)]
        b: u32,
        #[arg(long)]
        d: u32,
        #[arg(value_enum)]
        action: Family2dAction,
        /// Tree shape for `tree`.
        #[arg(long, value_enum, default_value_t = Variant2d::Trapezoid)]
        variant: Variant2d,
    },
    /// The prismatoid family.
    Prismatoid {
        #[arg(long)]
        a: u32,
        /// a'
        #[arg(long)]
        a2: u32,
        #[arg(long)]
        b: u32,
        /// b'
        #[arg(long)]
        b2: u32,
        #[arg(long)]
        d: u32,
        #[arg(long, default_value_t = 1)]
        l: u32,
        #[arg(value_enum)]
        action: PrismAction,
        /// Tree shape for `tree`.
        #[arg(long, value_enum, default_value_t = Variant3d::A1)]
        variant: Variant3d,
    },
    /// Operations on a staged tree read from JSON.
    Tree {
        #[arg(value_enum)]
        action: TreeAction,
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON integer array of counts, for `mle`.
        #[arg(long)]
        counts: Option<PathBuf>,
        /// Node whose floret is tested by `appendixB`.
        #[arg(long, default_value_t = 0)]
        node: usize,
    },
    /// Operations on the convex hull of a JSON point list.
    Polytope {
        #[arg(value_enum)]
        action: PolytopeAction,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Operations on a Horn pair read from JSON.
    Horn {
        #[arg(value_enum)]
        action: HornAction,
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON array of counts, for `eval`.
        #[arg(long)]
        u: Option<PathBuf>,
    },
    /// Sweep reports.
    Report {
        #[arg(value_enum)]
        kind: ReportKind,
        #[arg(long, default_value_t = 2)]
        max_param: u32,
        /// File receiving one line per parameter tuple.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family2dAction {
    Horn,
    Tree,
    CheckStrict,
    #[value(name = "check-M")]
    CheckM,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant2d {
    Trapezoid,
    Simplex,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrismAction {
    Horn,
    Tree,
    Catalog,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant3d {
    A1,
    A2,
    A3,
    A4,
    Minimal,
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeAction {
    Horn,
    Mle,
    Balanced,
    Invariants,
    Star,
    Simple,
    Collections,
    #[value(name = "appendixB")]
    AppendixB,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolytopeAction {
    Ldm,
    Primitive,
    #[value(name = "M")]
    M,
}

#[derive(Clone, Copy, ValueEnum)]
enum HornAction {
    Validate,
    Minimize,
    Eval,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    #[value(name = "appendixA")]
    AppendixA,
}

/// Printed output and whether every check passed.
struct Outcome {
    text: String,
    ok: bool,
}

impl Outcome {
    fn pass(text: String) -> Self {
        Self { text, ok: true }
    }
}

type Res = Result<Outcome, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.text);
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn json_text<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn rats(v: &[Rat]) -> Vec<String> {
    v.iter().map(fmt_rat).collect()
}

fn tsv_row<I: IntoIterator<Item = S>, S: AsRef<str>>(out: &mut String, label: &str, cells: I) {
    out.push_str(label);
    for c in cells {
        out.push('\t');
        out.push_str(c.as_ref());
    }
    out.push('\n');
}

fn matrix_tsv(m: &IntMatrix, labels: &[String]) -> String {
    let mut out = String::new();
    for (label, row) in labels.iter().zip(m.rows()) {
        tsv_row(&mut out, label, row.iter().map(|x| x.to_string()));
    }
    out
}

fn horn_out(cli: &Cli, pair: &HornPair) -> String {
    match cli.format {
        Format::Tsv => pair.to_tsv(),
        Format::Json => json_text(&pair.to_json_value()),
    }
}

/// Key/value report: TSV lines or a JSON object.
fn report<T: Serialize>(cli: &Cli, value: &T) -> String {
    match cli.format {
        Format::Json => json_text(value),
        Format::Tsv => {
            let v = serde_json::to_value(value).expect("serializable");
            let mut out = String::new();
            match v {
                Value::Object(map) => {
                    for (k, v) in map {
                        let cell = match v {
                            Value::String(s) => s,
                            other => other.to_string(),
                        };
                        tsv_row(&mut out, &k, [cell]);
                    }
                }
                other => {
                    out.push_str(&other.to_string());
                    out.push('\n');
                }
            }
            out
        }
    }
}

fn run(cli: &Cli) -> Res {
    match &cli.command {
        Command::Family2d { a, b, d, action, variant } => family2d(cli, Family2DParams::new(*a, *b, *d), *action, *variant),
        Command::Prismatoid { a, a2, b, b2, d, l, action, variant } => {
            let p = PrismatoidParams::new(*a, *a2, *b, *b2, *d, *l).map_err(err)?;
            prismatoid(cli, p, *action, *variant)
        }
        Command::Tree { action, input, counts, node } => {
            let tree = StagedTree::from_json_str(&read(input)?).map_err(err)?;
            tree_cmd(cli, &tree, *action, counts.as_deref(), *node)
        }
        Command::Polytope { action, input } => polytope_cmd(cli, &read(input)?, *action),
        Command::Horn { action, input, u } => {
            let pair = HornPair::from_json_str(&read(input)?)?;
            horn_cmd(cli, &pair, *action, u.as_deref())
        }
        Command::Report { kind: ReportKind::AppendixA, max_param, out } => appendix_a_report(cli, *max_param, out.as_deref()),
    }
}

fn family2d(cli: &Cli, p: Family2DParams, action: Family2dAction, variant: Variant2d) -> Res {
    match action {
        Family2dAction::Horn => Ok(Outcome::pass(horn_out(cli, &horn_2d(p)))),
        Family2dAction::Tree => {
            let v = match variant {
                Variant2d::Trapezoid => TreeVariant::Trapezoid,
                Variant2d::Simplex => TreeVariant::Simplex,
            };
            let tree = tree_2d(p, v).map_err(err)?;
            Ok(Outcome::pass(json_text(&tree.to_json())))
        }
        Family2dAction::CheckStrict => {
            let check = strict_linear_precision_check(&pair_2d(p).map_err(err)?);
            let ok = check.is_strict();
            Ok(Outcome { text: report(cli, &check), ok })
        }
        Family2dAction::CheckM => {
            let check = check_m_2d(p, cli.samples, cli.seed).map_err(err)?;
            let ok = check.passed();
            Ok(Outcome { text: report(cli, &check), ok })
        }
    }
}

fn prismatoid(cli: &Cli, p: PrismatoidParams, action: PrismAction, variant: Variant3d) -> Res {
    match action {
        PrismAction::Horn => Ok(Outcome::pass(horn_out(cli, &horn_3d(p)))),
        PrismAction::Tree => {
            let v = match variant {
                Variant3d::A1 => TreeVariant::A1,
                Variant3d::A2 => TreeVariant::A2,
                Variant3d::A3 => TreeVariant::A3,
                Variant3d::A4 => TreeVariant::A4,
                Variant3d::Minimal => TreeVariant::Minimal,
            };
            let tree = tree_3d(p, v).map_err(err)?;
            Ok(Outcome::pass(json_text(&tree.to_json())))
        }
        PrismAction::Catalog => {
            let check = appendix_a_check(p).map_err(err)?;
            let ok = check.matched;
            let text = match cli.format {
                Format::Json => json_text(&check),
                Format::Tsv => catalog_line(&check),
            };
            Ok(Outcome { text, ok })
        }
    }
}

fn catalog_line(c: &hornlab::families::CatalogCheck) -> String {
    let p = c.params;
    format!(
        "{}\t{}\t{}x{}\t{} {} {} {} {} {}\n",
        c.subfamily,
        if c.matched { "pass" } else { "fail" },
        c.rows,
        c.cols,
        p.a,
        p.a_prime,
        p.b,
        p.b_prime,
        p.d,
        p.l
    )
}

fn read_counts(path: Option<&Path>) -> Result<Vec<u64>, String> {
    let path = path.ok_or("--counts is required")?;
    serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn tree_cmd(cli: &Cli, tree: &StagedTree, action: TreeAction, counts: Option<&Path>, node: usize) -> Res {
    match action {
        TreeAction::Horn => Ok(Outcome::pass(horn_out(cli, &tree_horn_pair(tree)))),
        TreeAction::Mle => {
            let u = read_counts(counts)?;
            let m = rational_mle(tree, &u).map_err(err)?;
            let text = match cli.format {
                Format::Json => json_text(&json!({"theta": rats(&m.theta), "p": rats(&m.p), "boundary": m.boundary})),
                Format::Tsv => {
                    let mut out = String::new();
                    tsv_row(&mut out, "theta", rats(&m.theta));
                    tsv_row(&mut out, "p", rats(&m.p));
                    tsv_row(&mut out, "boundary", [m.boundary.to_string()]);
                    out
                }
            };
            Ok(Outcome::pass(text))
        }
        TreeAction::Balanced => {
            let b = is_balanced(tree).map_err(err)?;
            let ok = b.balanced;
            Ok(Outcome { text: report(cli, &b), ok })
        }
        TreeAction::Invariants => {
            let inv = model_invariant_generators(tree);
            let check = vanishing_check(&inv.all(), tree, cli.samples, cli.seed);
            let text = match cli.format {
                Format::Json => json_text(&json!({
                    "stages": inv.stages.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                    "vertices": inv.vertices.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                    "sum_to_one": inv.sum_to_one.to_string(),
                    "vanish": check,
                })),
                Format::Tsv => {
                    let mut out = String::new();
                    for p in &inv.stages {
                        tsv_row(&mut out, "stage", [p.to_string()]);
                    }
                    for p in &inv.vertices {
                        tsv_row(&mut out, "vertex", [p.to_string()]);
                    }
                    tsv_row(&mut out, "sum", [inv.sum_to_one.to_string()]);
                    tsv_row(&mut out, "vanish", [check.all_zero.to_string()]);
                    out
                }
            };
            Ok(Outcome { text, ok: check.all_zero })
        }
        TreeAction::Star => {
            let s = property_star(tree).map_err(err)?;
            let ok = s.holds();
            Ok(Outcome { text: report(cli, &s), ok })
        }
        TreeAction::Simple => {
            let s = simpleness_via_tree(tree).map_err(err)?;
            let ok = s.via_tree == s.direct;
            Ok(Outcome { text: report(cli, &s), ok })
        }
        TreeAction::Collections => {
            let c = stages_equal_primitive_collections(tree).map_err(err)?;
            let ok = c.equal && c.minimal_equals_m;
            Ok(Outcome { text: report(cli, &c), ok })
        }
        TreeAction::AppendixB => {
            let r = appendix_b_identity_tests(tree, node, cli.samples, cli.seed).map_err(err)?;
            let ok = r.all_hold();
            Ok(Outcome { text: report(cli, &r), ok })
        }
    }
}

#[derive(serde::Deserialize)]
struct PointsJson {
    points: Vec<Vec<i64>>,
}

fn collection_label(c: &[usize]) -> String {
    let parts: Vec<String> = c.iter().map(|i| format!("h{}", i + 1)).collect();
    format!("-({})", parts.join("+"))
}

fn polytope_cmd(cli: &Cli, text: &str, action: PolytopeAction) -> Res {
    let input: PointsJson = serde_json::from_str(text).map_err(err)?;
    let (poly, map) = hull_in_span(&input.points).map_err(err)?;
    let pts: Vec<Vec<i64>> = if map.rank == map.ambient {
        input.points.clone()
    } else {
        input.points.iter().map(|x| map.project(x)).collect()
    };
    let h_labels: Vec<String> = (1..=poly.facets.len()).map(|i| format!("h{i}")).collect();
    match action {
        PolytopeAction::Ldm => {
            let m = ldm_at(&poly, &pts);
            let text = match cli.format {
                Format::Json => json_text(&json!({"labels": h_labels, "matrix": m})),
                Format::Tsv => matrix_tsv(&m, &h_labels),
            };
            Ok(Outcome::pass(text))
        }
        PolytopeAction::Primitive => {
            let fan = normal_fan(&poly);
            let cols = primitive_collections(&fan);
            let text = match cli.format {
                Format::Json => json_text(&json!({"rays": fan.rays, "collections": cols})),
                Format::Tsv => {
                    let mut out = String::new();
                    for c in &cols {
                        tsv_row(&mut out, "collection", c.iter().map(|i| format!("n{}", i + 1)));
                    }
                    out
                }
            };
            Ok(Outcome::pass(text))
        }
        PolytopeAction::M => {
            let m = matrix_m_at(&poly, &pts);
            let mut labels = h_labels;
            labels.extend(m.collections.iter().map(|c| collection_label(c)));
            let text = match cli.format {
                Format::Json => json_text(&json!({"labels": labels, "matrix": m.matrix, "is_horn": m.is_horn})),
                Format::Tsv => {
                    let mut out = matrix_tsv(&m.matrix, &labels);
                    tsv_row(&mut out, "is_horn", [m.is_horn.to_string()]);
                    out
                }
            };
            Ok(Outcome { text, ok: m.is_horn })
        }
    }
}

fn read_u(path: Option<&Path>) -> Result<Vec<Rat>, String> {
    let path = path.ok_or("--u is required")?;
    let v: Vec<Value> = serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    v.iter()
        .map(|x| match x {
            Value::Number(n) => parse_rat(&n.to_string()).map_err(err),
            Value::String(s) => parse_rat(s).map_err(err),
            other => Err(format!("not a count: {other}")),
        })
        .collect()
}

fn horn_cmd(cli: &Cli, pair: &HornPair, action: HornAction, u: Option<&Path>) -> Res {
    match action {
        HornAction::Validate => {
            let v = validate_horn_pair(pair, cli.samples, cli.seed);
            let ok = v.passed();
            let text = match cli.format {
                Format::Json => json_text(&v),
                Format::Tsv => {
                    let mut out = String::new();
                    tsv_row(&mut out, "samples", [v.samples.to_string()]);
                    tsv_row(&mut out, "passed", [ok.to_string()]);
                    if let Some(c) = &v.counterexample {
                        tsv_row(&mut out, "counterexample", c.u.iter().map(|x| x.to_string()));
                        let mut f = String::new();
                        let _ = write!(f, "{:?}", c.failure);
                        tsv_row(&mut out, "failure", [f]);
                    }
                    out
                }
            };
            Ok(Outcome { text, ok })
        }
        HornAction::Minimize => {
            let m = minimize(pair).map_err(err)?;
            Ok(Outcome::pass(horn_out(cli, &m)))
        }
        HornAction::Eval => {
            let u = read_u(u)?;
            let p = horn_eval(pair, &u).map_err(err)?;
            let text = match cli.format {
                Format::Json => json_text(&rats(&p)),
                Format::Tsv => {
                    let mut out = String::new();
                    tsv_row(&mut out, "p", rats(&p));
                    out
                }
            };
            Ok(Outcome::pass(text))
        }
    }
}

fn appendix_a_report(cli: &Cli, k: u32, out: Option<&Path>) -> Res {
    let checks = appendix_a_sweep(k);
    if let Some(path) = out {
        let mut lines = String::new();
        for c in &checks {
            lines.push_str(&catalog_line(c));
        }
        std::fs::write(path, lines).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let mut ok = true;
    let mut rows = Vec::new();
    for e in CATALOG.iter() {
        let mine: Vec<_> = checks.iter().filter(|c| c.subfamily == e.name).collect();
        let matched = mine.iter().filter(|c| c.matched).count();
        let status = if mine.is_empty() {
            "untested"
        } else if matched == mine.len() {
            "pass"
        } else {
            ok = false;
            "fail"
        };
        rows.push((e.name, status, matched, mine.len()));
    }
    let text = match cli.format {
        Format::Json => json_text(
            &rows
                .iter()
                .map(|(n, s, m, t)| json!({"subfamily": n, "status": s, "matched": m, "tested": t}))
                .collect::<Vec<_>>(),
        ),
        Format::Tsv => {
            let mut s = String::new();
            for (n, st, m, t) in &rows {
                let _ = writeln!(s, "{n}\t{st}\t{m}/{t}");
            }
            s
        }
    };
    Ok(Outcome { text, ok })
}
