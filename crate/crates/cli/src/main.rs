//! Command-line front end: resolve, check, lower and translate dependency
//! documents.
//!
//! Exit status is 0 on success, 1 when there is no resolution (or the given
//! resolution is invalid, or the build graph has a cycle), and 2 on input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pkgcalc::buildgraph::build_graph;
use pkgcalc::frontends::json::{emit_resolution, parse_query, parse_resolution, ResolutionDocument};
use pkgcalc::frontends::Dialect;
use pkgcalc::pipeline::translate::translate_instance;
use pkgcalc::pipeline::{
    lift_stack, lower_stack, validate_extended, ExtendedInstance, ExtendedResolution, ExtensionStack, ExtensionTag,
    LoweredBundle,
};
use pkgcalc::restricted::{multiversion_greedy_resolve, mvs_resolve, MinBoundDependency, MvsPolicy};
use pkgcalc::sat::{gen_from_3cnf, parse_dimacs, resolve};
use pkgcalc::{maximal_resolutions, Oracle, Outcome, Resolution};
use serde_json::json;

#[derive(Parser)]
#[command(name = "pkgcalc", version, about = "Dependency resolution over a small package calculus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Repository document.
    #[arg(long)]
    repo: PathBuf,
    /// Query document; replaces the repository's root with one that depends on the query.
    #[arg(long)]
    query: Option<PathBuf>,
    /// Document dialect; guessed from the file extension when absent.
    #[arg(long, value_parser = parse_dialect)]
    format: Option<Dialect>,
    /// Comma-separated lowering passes; the instance's default stack when absent.
    #[arg(long)]
    stack: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Sat,
    Brute,
    Mvs,
    Greedy,
}

#[derive(Subcommand)]
enum Command {
    /// Find one resolution.
    Resolve {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "sat")]
        solver: Solver,
        /// Prefer newer versions (sat and brute solvers).
        #[arg(long)]
        prefer_fresh: bool,
    },
    /// Check a resolution document against the instance.
    Validate {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        resolution: PathBuf,
    },
    /// List every resolution by brute force.
    Enumerate {
        #[command(flatten)]
        input: Input,
        /// Largest number of resolutions to list before giving up.
        #[arg(long, default_value_t = 1000)]
        limit: usize,
        /// Largest lowered repository to search.
        #[arg(long, default_value_t = pkgcalc::oracle::DEFAULT_BOUND)]
        bound: usize,
    },
    /// Print the lowered core instance.
    Lower {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_parser = parse_dialect, default_value = "json")]
        to: Dialect,
    },
    /// Lift a resolution of the lowered instance back to the extended instance.
    Lift {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        resolution: PathBuf,
    },
    /// Rewrite a document in another dialect.
    Translate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_dialect)]
        from: Option<Dialect>,
        #[arg(long, value_parser = parse_dialect)]
        to: Dialect,
        /// Fail instead of writing synthetic packages.
        #[arg(long)]
        strict: bool,
    },
    #[command(name = "gen-3sat")]
    /// Build the instance whose resolvability is the satisfiability of a 3-CNF formula.
    Gen3sat {
        #[arg(long)]
        dimacs: PathBuf,
        #[arg(long, value_parser = parse_dialect, default_value = "json")]
        to: Dialect,
    },
    /// Build graph of a resolution.
    Graph {
        #[command(flatten)]
        input: Input,
        /// Resolution document; resolved with the SAT solver when absent.
        #[arg(long)]
        resolution: Option<PathBuf>,
        /// Print a build order (or the cycle preventing one).
        #[arg(long, conflicts_with = "dot")]
        build_order: bool,
        /// Print Graphviz text.
        #[arg(long)]
        dot: bool,
        #[arg(long)]
        include_root_edges: bool,
    },
}

enum Failure {
    /// No resolution; the output is still printed.
    Unresolvable { output: String, reason: String },
    Input(String),
}

impl From<pkgcalc::Error> for Failure {
    fn from(e: pkgcalc::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Run = Result<String, Failure>;

fn parse_dialect(s: &str) -> Result<Dialect, String> {
    s.parse().map_err(|e: pkgcalc::Error| e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn guess_dialect(path: &Path) -> Dialect {
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml" | "cargo") => Dialect::Cargo,
        Some("debctl" | "control") => Dialect::Debian,
        _ => Dialect::Json,
    }
}

struct Loaded {
    inst: ExtendedInstance,
    bundle: LoweredBundle,
}

fn load(input: &Input) -> Result<Loaded, Failure> {
    let dialect = input.format.unwrap_or_else(|| guess_dialect(&input.repo));
    let mut inst = dialect.parse(&read(&input.repo)?)?;
    if let Some(q) = &input.query {
        inst = inst.with_query(parse_query(&read(q)?)?.items()?);
    }
    let stack = match &input.stack {
        Some(s) => s.parse::<ExtensionStack>()?,
        None => inst.default_stack(),
    };
    let bundle = lower_stack(&inst, &stack)?;
    Ok(Loaded { inst, bundle })
}

/// Solvers without search work on core instances only.
fn require_core(bundle: &LoweredBundle, solver: &str) -> Result<(), Failure> {
    use ExtensionTag::*;
    match bundle.stack.tags().iter().find(|t| !matches!(t, VersionFormulae | Optional | Singular)) {
        Some(t) => Err(Failure::Input(format!("the {solver} solver does not handle {t}"))),
        None => Ok(()),
    }
}

fn resolution_text(r: &ExtendedResolution) -> Run {
    Ok(emit_resolution(&ResolutionDocument::from_extended(r))?)
}

fn unresolvable(reason: String) -> Failure {
    let output = emit_resolution(&ResolutionDocument::unresolvable()).unwrap_or_default();
    Failure::Unresolvable { output, reason }
}

fn lifted(outcome: Outcome<Resolution>, bundle: &LoweredBundle) -> Run {
    match outcome {
        Outcome::Resolved(s) => resolution_text(&lift_stack(&s, bundle)?),
        Outcome::Unresolvable(reason) => Err(unresolvable(reason)),
    }
}

fn min_bounds(bundle: &LoweredBundle) -> Result<Vec<MinBoundDependency>, Failure> {
    let repo = bundle.core.repo();
    bundle
        .core
        .deps()
        .iter()
        .map(|d| {
            let lowest = d
                .versions
                .iter()
                .filter_map(|v| v.as_numeric().map(|n| (n, v)))
                .min_by(|a, b| a.0.cmp(b.0))
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Failure::Input(format!("{d} has no numeric lower bound")))?;
            let m = MinBoundDependency::new(d.from.clone(), d.on.clone(), lowest);
            if m.to_dependency(repo).versions != d.versions {
                return Err(Failure::Input(format!("{d} is not a lower-bound dependency")));
            }
            Ok(m)
        })
        .collect()
}

fn resolve_cmd(input: &Input, solver: Solver, prefer_fresh: bool) -> Run {
    let Loaded { bundle, .. } = load(input)?;
    let core = &bundle.core;
    let outcome = match solver {
        Solver::Sat => resolve(core, prefer_fresh)?,
        Solver::Brute => {
            let all = Oracle::default().enumerate(core)?;
            let pick = if prefer_fresh { maximal_resolutions(&all)? } else { all };
            match pick.into_iter().next() {
                Some(s) => Outcome::Resolved(s),
                None => Outcome::Unresolvable("unresolvable: no subset of the repository is a resolution".into()),
            }
        }
        Solver::Mvs => {
            require_core(&bundle, "mvs")?;
            mvs_resolve(core.repo(), &min_bounds(&bundle)?, core.root(), MvsPolicy::Minimum)?
        }
        Solver::Greedy => {
            require_core(&bundle, "greedy")?;
            // The greedy solver may select several versions of a name; its
            // result is printed as is.
            return match multiversion_greedy_resolve(core) {
                Outcome::Resolved(s) => Ok(emit_resolution(&ResolutionDocument::from_selected(&s))?),
                Outcome::Unresolvable(reason) => Err(unresolvable(reason)),
            };
        }
    };
    lifted(outcome, &bundle)
}

fn validate_cmd(input: &Input, resolution: &Path) -> Run {
    let Loaded { bundle, .. } = load(input)?;
    let r = parse_resolution(&read(resolution)?)?.to_extended()?;
    let report = validate_extended(&bundle, &r)?;
    let violations: Vec<_> = report
        .violations
        .iter()
        .map(|v| {
            json!({
                "detail": v.detail,
                "packages": v.packages.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "rule": v.rule.label(),
            })
        })
        .collect();
    let output = pretty(&json!({ "valid": report.is_valid(), "violations": violations }));
    if report.is_valid() {
        Ok(output)
    } else {
        Err(Failure::Unresolvable { output, reason: format!("invalid resolution: {report}") })
    }
}

fn pretty(value: &serde_json::Value) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("JSON values serialize");
    out.push('\n');
    out
}

fn enumerate_cmd(input: &Input, limit: usize, bound: usize) -> Run {
    let Loaded { bundle, .. } = load(input)?;
    let all = Oracle { bound, limit }.enumerate(&bundle.core)?;
    let mut docs = Vec::new();
    for s in &all {
        let doc = serde_json::to_value(ResolutionDocument::from_extended(&lift_stack(s, &bundle)?))
            .expect("documents serialize");
        if !docs.contains(&doc) {
            docs.push(doc);
        }
    }
    docs.sort_by_key(|d| d.to_string());
    let output = pretty(&serde_json::Value::Array(docs));
    if all.is_empty() {
        return Err(Failure::Unresolvable { output, reason: "unresolvable: no resolutions".into() });
    }
    Ok(output)
}

fn lift_cmd(input: &Input, resolution: &Path) -> Run {
    let Loaded { bundle, .. } = load(input)?;
    let s = parse_resolution(&read(resolution)?)?.selected()?;
    resolution_text(&lift_stack(&s, &bundle)?)
}

fn translate_cmd(input: &Path, from: Option<Dialect>, to: Dialect, strict: bool) -> Run {
    let from = from.unwrap_or_else(|| guess_dialect(input));
    let inst = from.parse(&read(input)?)?;
    if from == to {
        return Ok(to.emit(&inst)?);
    }
    Ok(translate_instance(&inst, to, !strict)?.text)
}

fn graph_cmd(input: &Input, resolution: Option<&Path>, build_order: bool, dot: bool, include_root: bool) -> Run {
    let Loaded { inst, bundle } = load(input)?;
    require_core(&bundle, "graph")?;
    let s = match resolution {
        Some(path) => parse_resolution(&read(path)?)?.selected()?,
        None => match resolve(&bundle.core, false)? {
            Outcome::Resolved(s) => s,
            Outcome::Unresolvable(reason) => return Err(unresolvable(reason)),
        },
    };
    let graph = build_graph(&bundle.core, &inst.optional, &s, include_root)?;
    if dot {
        return Ok(graph.to_dot());
    }
    if build_order {
        let order = graph.topo_order();
        let cycle = order.as_ref().err().map(ToString::to_string);
        let output = emit_resolution(&ResolutionDocument::from_selected(&s).with_build_order(order))?;
        return match cycle {
            Some(reason) => Err(Failure::Unresolvable { output, reason }),
            None => Ok(output),
        };
    }
    let edges: Vec<[String; 2]> = graph.edges().iter().map(|(p, q)| [p.to_string(), q.to_string()]).collect();
    let vertices: Vec<String> = graph.vertices().iter().map(ToString::to_string).collect();
    Ok(pretty(&json!({ "edges": edges, "vertices": vertices })))
}

fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Resolve { input, solver, prefer_fresh } => resolve_cmd(&input, solver, prefer_fresh),
        Command::Validate { input, resolution } => validate_cmd(&input, &resolution),
        Command::Enumerate { input, limit, bound } => enumerate_cmd(&input, limit, bound),
        Command::Lower { input, to } => {
            let Loaded { bundle, .. } = load(&input)?;
            Ok(to.emit(&ExtendedInstance::from_core(&bundle.core))?)
        }
        Command::Lift { input, resolution } => lift_cmd(&input, &resolution),
        Command::Translate { input, from, to, strict } => translate_cmd(&input, from, to, strict),
        Command::Gen3sat { dimacs, to } => {
            let inst = gen_from_3cnf(&parse_dimacs(&read(&dimacs)?)?)?;
            Ok(to.emit(&ExtendedInstance::from_core(&inst))?)
        }
        Command::Graph { input, resolution, build_order, dot, include_root_edges } => {
            graph_cmd(&input, resolution.as_deref(), build_order, dot, include_root_edges)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(output) => {
            print!("{output}");
            ExitCode::SUCCESS
        }
        Err(Failure::Unresolvable { output, reason }) => {
            print!("{output}");
            eprintln!("{reason}");
            ExitCode::from(1)
        }
        Err(Failure::Input(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
