use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use twqe::benchgen::{gen_properties_check, generate, GenConfig};
use twqe::formula::{LinearAtom, QuantFormula, Relation, Var};
use twqe::graph::{build_primal, Graph};
use twqe::pace::{read_gr, read_td, vertex_count, write_gr, write_td};
use twqe::parse::{parse_formula, print_formula};
use twqe::pipeline::{choose_order, compare, run_fme, run_project, RunOptions, Strategy};
use twqe::stats::{CountPolicy, StatsRecord};
use twqe::treedecomp::{validate_td, TdStrategy, TreeDecomp};

#[derive(Parser)]
#[command(name = "twqe", version, about = "Quantifier elimination guided by tree decompositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance whose primal graph lies in a k-tree
    Gen(GenArgs),
    /// Print the primal graph in PACE .gr format
    Graph { formula: PathBuf },
    /// Compute or import a tree decomposition
    Td(TdArgs),
    /// Print an elimination order as JSON
    Order(OrderArgs),
    /// Fourier-Motzkin elimination of the quantified variables
    Fme(RunArgs),
    /// McCallum projection of the quantified variables
    Project(RunArgs),
    /// Run several strategies on one instance or a directory of instances
    Compare(CompareArgs),
    /// Check a PACE decomposition against a PACE graph
    Validate {
        #[arg(long)]
        td: PathBuf,
        #[arg(long)]
        gr: PathBuf,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 15)]
    vars: usize,
    /// Total atom count; defaults to one per bag
    #[arg(long)]
    atoms: Option<usize>,
    #[arg(long, default_value_t = 1)]
    maxdeg: u32,
    /// Number of quantified variables; defaults to all
    #[arg(long)]
    elim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    include_prob: f64,
    /// Writes the formula here and a JSON sidecar next to it
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TdArgs {
    /// A formula, or a PACE graph if the name ends in .gr
    input: PathBuf,
    #[arg(long, default_value = "min-fill")]
    strategy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Validate and report on this decomposition instead of computing one
    #[arg(long)]
    import: Option<PathBuf>,
}

#[derive(Args)]
struct OrderArgs {
    formula: PathBuf,
    #[arg(long, default_value = "td")]
    strategy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    raw_count: bool,
}

#[derive(Args)]
struct RunArgs {
    formula: PathBuf,
    #[arg(long, default_value = "td", conflicts_with_all = ["order", "td"])]
    strategy: String,
    /// Explicit order, comma separated
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<String>>,
    /// PACE decomposition of the primal graph to take the order from
    #[arg(long)]
    td: Option<PathBuf>,
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Count every generated inequality instead of canonical atoms
    #[arg(long)]
    raw_count: bool,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CompareArgs {
    /// A formula file or a directory of .qf files
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "td,greedy,random:5")]
    strategies: Vec<String>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    raw_count: bool,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Core(twqe::Error),
    Io(PathBuf, io::Error),
    Usage(String),
    Violation(String),
}

impl From<twqe::Error> for Failure {
    fn from(e: twqe::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        use twqe::Error as E;
        match self {
            Failure::Core(E::Parse { .. } | E::Pace { .. }) => 2,
            Failure::Core(
                E::MixedMode | E::InvalidDecomposition(_) | E::DeclaredWidthMismatch { .. } | E::DisconnectedGraph,
            )
            | Failure::Violation(_) => 3,
            Failure::Core(E::Config(_)) | Failure::Io(..) | Failure::Usage(_) => 4,
            Failure::Core(_) => 10,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Io(p, e) => format!("{}: {e}", p.display()),
            Failure::Usage(m) => m.clone(),
            Failure::Violation(m) => format!("violation: {m}"),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn write(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn load_formula(path: &Path) -> Result<QuantFormula, Failure> {
    Ok(parse_formula(&read(path)?)?)
}

fn td_strategy(name: &str) -> Result<TdStrategy, Failure> {
    match name {
        "min-fill" => Ok(TdStrategy::MinFill),
        "min-degree" => Ok(TdStrategy::MinDegree),
        _ => Err(Failure::Usage(format!("unknown decomposition strategy '{name}'"))),
    }
}

fn counting(raw: bool) -> CountPolicy {
    if raw {
        CountPolicy::Raw
    } else {
        CountPolicy::Canonical
    }
}

/// PACE vertex `i` stands for the `i`-th quantified variable in index order.
fn pace_vertices(f: &QuantFormula) -> Vec<Var> {
    f.quantified_set().into_iter().collect()
}

fn to_pace_graph(g: &Graph, vs: &[Var]) -> Graph {
    let pos = |v: &Var| Var(vs.binary_search(v).unwrap() as u32);
    let edges: Vec<(Var, Var)> = g.edges().iter().map(|(a, b)| (pos(a), pos(b))).collect();
    Graph::from_edges((0..vs.len() as u32).map(Var), &edges)
}

fn map_td(t: &TreeDecomp, map: impl Fn(Var) -> Result<Var, Failure>) -> Result<TreeDecomp, Failure> {
    let bags = t
        .bags()
        .iter()
        .map(|b| b.iter().map(|&v| map(v)).collect::<Result<_, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TreeDecomp::new(bags, t.parents().to_vec())?)
}

fn pace_legend(f: &QuantFormula, vs: &[Var]) -> String {
    let mut out = String::new();
    for (i, v) in vs.iter().enumerate() {
        let _ = writeln!(out, "c vertex {} {}", i + 1, f.vars().name(*v));
    }
    out
}

/// Reads a PACE decomposition of the formula's primal graph.
fn import_td(f: &QuantFormula, path: &Path) -> Result<TreeDecomp, Failure> {
    let vs = pace_vertices(f);
    let t = read_td(&read(path)?)?;
    map_td(&t, |v| {
        vs.get(v.index())
            .copied()
            .ok_or_else(|| Failure::Violation(format!("vertex {} is not a quantified variable", v.index() + 1)))
    })
}

fn cmd_gen(a: GenArgs) -> Outcome {
    let cfg = GenConfig {
        k: a.k,
        n_vars: a.vars,
        max_deg: a.maxdeg,
        include_prob: a.include_prob,
        seed: a.seed,
        n_atoms: a.atoms,
        n_elim: a.elim,
        ..Default::default()
    };
    let (kt, g) = generate(&cfg)?;
    let report = gen_properties_check(&g, &kt);
    let text = print_formula(&g.formula);
    let Some(out) = a.out else {
        print!("{text}");
        return Ok(());
    };
    write(&out, &text)?;
    let bags: Vec<Vec<String>> = kt
        .bags
        .iter()
        .map(|b| b.iter().map(|v| g.formula.vars().name(*v).to_string()).collect())
        .collect();
    let sidecar = json!({
        "config": cfg,
        "report": report,
        "ktree_bags": bags,
        "ktree_parents": kt.parents,
        "atom_bags": g.atom_bags,
        "regenerations": g.regenerations,
        "forced": g.forced,
    });
    let mut side = out.clone().into_os_string();
    side.push(".json");
    write(Path::new(&side), &serde_json::to_string_pretty(&sidecar).expect("serializable"))
}

fn cmd_graph(path: &Path) -> Outcome {
    let f = load_formula(path)?;
    let vs = pace_vertices(&f);
    print!("{}{}", pace_legend(&f, &vs), write_gr(&to_pace_graph(&build_primal(&f), &vs)));
    Ok(())
}

fn cmd_td(a: TdArgs) -> Outcome {
    let strategy = td_strategy(&a.strategy)?;
    let is_gr = a.input.extension().is_some_and(|e| e == "gr");
    let (g, legend) = if is_gr {
        (read_gr(&read(&a.input)?)?, String::new())
    } else {
        let f = load_formula(&a.input)?;
        let vs = pace_vertices(&f);
        (to_pace_graph(&build_primal(&f), &vs), pace_legend(&f, &vs))
    };
    let t = match &a.import {
        Some(p) => {
            let t = read_td(&read(p)?)?;
            validate_td(&g, &t).map_err(|v| Failure::Violation(v.to_string()))?;
            t
        }
        None => {
            let t = twqe::treedecomp::decompose_graph(&g, strategy, a.seed);
            let root = twqe::treedecomp::choose_root(&t);
            t.rerooted(root)
        }
    };
    print!("c width {}\nc height {}\n{legend}{}", t.width(), t.height(), write_td(&t, vertex_count(&g)));
    Ok(())
}

fn cmd_order(a: OrderArgs) -> Outcome {
    let f = load_formula(&a.formula)?;
    let strategy: Strategy = a.strategy.parse()?;
    let opts = RunOptions { seed: a.seed, counting: counting(a.raw_count), ..Default::default() };
    let order = choose_order(&f, &strategy, &opts)?;
    let names: Vec<&str> = order.vars.iter().map(|v| f.vars().name(*v)).collect();
    let out = json!({ "strategy": strategy.to_string(), "provenance": order.provenance, "order": names });
    println!("{}", serde_json::to_string(&out).expect("serializable"));
    Ok(())
}

fn run_setup(a: &RunArgs, f: &QuantFormula) -> Result<(Strategy, RunOptions), Failure> {
    let mut opts = RunOptions { seed: a.seed, cap: a.cap, counting: counting(a.raw_count), ..Default::default() };
    let strategy = if let Some(names) = &a.order {
        Strategy::Given(names.clone())
    } else if let Some(p) = &a.td {
        opts.td = Some(import_td(f, p)?);
        Strategy::Td
    } else {
        a.strategy.parse()?
    };
    Ok((strategy, opts))
}

fn emit_stats(path: &Option<PathBuf>, rec: &StatsRecord) -> Outcome {
    let text = serde_json::to_string_pretty(rec).expect("serializable");
    match path {
        Some(p) => write(p, &(text + "\n")),
        None => {
            eprintln!("{text}");
            Ok(())
        }
    }
}

fn instance_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn cmd_fme(a: RunArgs) -> Outcome {
    let f = load_formula(&a.formula)?;
    let (strategy, opts) = run_setup(&a, &f)?;
    let (result, rec) = run_fme(&instance_name(&a.formula), &f, &strategy, &opts)?;
    if rec.cap_exceeded && rec.verdict.is_none() {
        emit_stats(&a.stats, &rec)?;
        return Err(Failure::Core(twqe::Error::CapExceeded { cap: a.cap.unwrap_or(0) }));
    }
    let mut out = String::from("# quantifier-free result\n");
    if result.is_false() {
        let _ = writeln!(out, "{}", LinearAtom::new([], 0.into(), Relation::Lt).display(f.vars()));
    }
    for atom in result.atoms() {
        let _ = writeln!(out, "{}", atom.display(f.vars()));
    }
    print!("{out}");
    emit_stats(&a.stats, &rec)
}

fn cmd_project(a: RunArgs) -> Outcome {
    let f = load_formula(&a.formula)?;
    let (strategy, opts) = run_setup(&a, &f)?;
    let (result, rec) = run_project(&instance_name(&a.formula), &f, &strategy, &opts)?;
    let mut out = format!("# {} projection polynomials\n", result.len());
    for p in result.iter() {
        let _ = writeln!(out, "{}", p.display(f.vars()));
    }
    print!("{out}");
    emit_stats(&a.stats, &rec)
}

fn compare_inputs(path: &Path) -> Result<Vec<PathBuf>, Failure> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = fs::read_dir(path).map_err(|e| Failure::Io(path.to_path_buf(), e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "qf"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::Usage(format!("no .qf files in {}", path.display())));
    }
    Ok(files)
}

fn cmd_compare(a: CompareArgs) -> Outcome {
    let strategies = a.strategies.iter().map(|s| s.parse()).collect::<Result<Vec<Strategy>, _>>()?;
    let opts = RunOptions { seed: a.seed, cap: a.cap, counting: counting(a.raw_count), ..Default::default() };
    let mut records = Vec::new();
    for path in compare_inputs(&a.input)? {
        let f = load_formula(&path)?;
        records.extend(compare(&instance_name(&path), &f, &strategies, &opts)?);
    }
    println!("{:<24} {:<12} {:>12} {:>12} {:>10}  note", "instance", "strategy", "final", "peak", "ms");
    for r in &records {
        let note = if r.cap_exceeded { "cap exceeded" } else { "" };
        println!(
            "{:<24} {:<12} {:>12} {:>12} {:>10}  {note}",
            r.instance, r.strategy, r.final_count, r.peak, r.elapsed_ms
        );
    }
    for s in &strategies {
        let name = s.to_string();
        let done: Vec<&StatsRecord> = records.iter().filter(|r| r.strategy == name && r.verdict.is_some()).collect();
        if done.is_empty() {
            println!("mean {name:<12} n/a");
        } else {
            let mean = done.iter().map(|r| r.final_count as f64).sum::<f64>() / done.len() as f64;
            println!("mean {name:<12} {mean:.1} over {} instances", done.len());
        }
    }
    if let Some(p) = &a.json {
        write(p, &(serde_json::to_string_pretty(&records).expect("serializable") + "\n"))?;
    }
    Ok(())
}

fn cmd_validate(td: &Path, gr: &Path) -> Outcome {
    let g = read_gr(&read(gr)?)?;
    let t = read_td(&read(td)?)?;
    validate_td(&g, &t).map_err(|v| Failure::Violation(v.to_string()))?;
    println!("Ok (width {}, {} bags)", t.width(), t.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Graph { formula } => cmd_graph(&formula),
        Command::Td(a) => cmd_td(a),
        Command::Order(a) => cmd_order(a),
        Command::Fme(a) => cmd_fme(a),
        Command::Project(a) => cmd_project(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Validate { td, gr } => cmd_validate(&td, &gr),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
