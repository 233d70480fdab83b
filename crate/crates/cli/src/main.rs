use std::collections::HashSet;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use tripart::decomposer::{
    approx_decompose_oriented, decompose_directed, verify_packing, Decomposition, DirectedOptions, OrientedOptions,
    PackingCertificate,
};
use tripart::expansion::{class_union_hints, find_non_expansion_witness, is_robust_outexpander_exact, ExpansionParams};
use tripart::factorization::{merge_into_few_cycles, one_factorization, FactorTargets};
use tripart::forests::{
    balanced_covers, clean_forests, cover_exceptional_c3, cover_exceptional_gbeta, partition_host, path_cover,
    BalancedCoverInput, ForestFamily, ParamOverrides, PipelineParams,
};
use tripart::generators::{
    blowup_c3, gen_gbeta, gen_random_regular_tournament, gen_random_regular_tripartite_digraph, gen_t_triangle, GBetaModel,
};
use tripart::hamiltonicity::{ghouila_houri_hamilton, GhOptions};
use tripart::io::{parse_graph, to_json, GraphDoc};
use tripart::matching::hopcroft_karp;
use tripart::oracle::{enumerate_hamilton_cycles, exact_expansion_check, exact_nearest_gbeta, is_hamiltonian, max_hamilton_packing_exact};
use tripart::rational::{parse_rational, Rational};
use tripart::structure::nearest_gbeta;
use tripart::{Digraph, Seed, TripartiteDigraph, TripartiteTournament};

const EXIT_SOFT: u8 = 1;
const EXIT_HARD: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "tripart", version, about = "Hamilton cycle packings of regular tripartite digraphs")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph as JSON.
    Gen {
        #[command(subcommand)]
        family: GenFamily,
    },
    /// Expansion and structure reports.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCmd,
    },
    /// 1-factorization, or a cycle cover with few cycles (`--merge`).
    Factorize {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long)]
        merge: bool,
        #[arg(long, required_if_eq("merge", "true"))]
        seed: Option<u64>,
    },
    /// Forest procedures of the packing pipeline.
    Forests {
        #[command(subcommand)]
        what: ForestCmd,
    },
    /// Pack edge-disjoint Hamilton cycles and emit a verified certificate.
    Decompose(DecomposeArgs),
    /// Re-check a certificate against a graph.
    Verify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        cert: PathBuf,
    },
    /// Exact brute-force referees.
    Oracle {
        #[command(subcommand)]
        what: OracleCmd,
    },
    /// Time search, matching and flow kernels; CSV on stdout.
    Bench {
        #[arg(long, value_enum, default_value = "all")]
        kernel: Kernel,
        /// Comma-separated sizes.
        #[arg(long, default_value = "8,16,32")]
        sizes: String,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum GenFamily {
    /// Blow-up C3(n).
    C3 {
        #[arg(long)]
        n: usize,
    },
    /// Seeded member of the β-family.
    Gbeta {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        beta: String,
        #[arg(long)]
        seed: u64,
    },
    /// C3(n) with one triangle reversed.
    Ttriangle {
        #[arg(long)]
        n: usize,
    },
    /// Random regular tripartite tournament.
    RandomTournament {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Random d-regular balanced tripartite digraph.
    RandomDigraph {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Args)]
struct GraphInput {
    /// Graph JSON file (default: stdin).
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    Expansion {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long)]
        nu: String,
        #[arg(long)]
        tau: String,
        /// Exhaustive decision (small graphs only).
        #[arg(long, conflicts_with = "budget")]
        exact: bool,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, required_unless_present = "exact")]
        seed: Option<u64>,
    },
    Structure {
        #[command(flatten)]
        input: GraphInput,
    },
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long, default_value = "1/3")]
    delta: String,
    /// JSON file with optional gamma, eta, k, ell, tolerance.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
}

#[derive(Subcommand)]
enum ForestCmd {
    /// Exceptional-vertex covers followed by the cleaner.
    Cover(PipelineArgs),
    /// Random host partition.
    Partition(PipelineArgs),
    /// Edge-disjoint linear forests by repeated 1-factor extraction.
    PathCover {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Bidirectionally balanced forests inside the nearest model.
    Balanced {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value = "1/100")]
        eps: String,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DecomposeMode {
    Directed,
    Oriented,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long, value_enum)]
    mode: DecomposeMode,
    #[arg(long, default_value = "0")]
    delta: String,
    /// Degree slack audited by the directed mode: d ≥ (1+eps)n.
    #[arg(long, default_value = "1/10")]
    eps: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    params: Option<PathBuf>,
    /// Write the stage trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Search nodes for the extraction engine.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Subcommand)]
enum OracleCmd {
    Hamiltonian {
        #[command(flatten)]
        input: GraphInput,
    },
    Enumerate {
        #[command(flatten)]
        input: GraphInput,
    },
    MaxPacking {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long)]
        cap: Option<usize>,
    },
    NearestGbeta {
        #[command(flatten)]
        input: GraphInput,
    },
    Expansion {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long)]
        nu: String,
        #[arg(long)]
        tau: String,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kernel {
    Gh,
    Matching,
    Flow,
    All,
}

/// Outcome of a subcommand: JSON for stdout, a one-line summary for
/// stderr, and the exit status.
struct Outcome {
    json: Option<Value>,
    raw: Option<String>,
    summary: String,
    code: u8,
}

impl Outcome {
    fn ok(json: Value, summary: impl Into<String>) -> Self {
        Outcome { json: Some(json), raw: None, summary: summary.into(), code: 0 }
    }

    fn with_code(mut self, code: u8) -> Self {
        self.code = code;
        self
    }
}

fn rational(s: &str, name: &str) -> Result<Rational> {
    parse_rational(s).map_err(|e| anyhow!("--{name}: {}", e.0))
}

fn read_input(input: &GraphInput) -> Result<GraphDoc> {
    let text = match &input.graph {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
            s
        }
    };
    Ok(parse_graph(&text)?)
}

fn digraph_of(doc: &GraphDoc) -> Result<TripartiteDigraph> {
    Ok(doc.to_tripartite()?)
}

fn tournament_of(doc: &GraphDoc) -> Result<TripartiteTournament> {
    Ok(doc.to_tournament()?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    gamma: Option<String>,
    eta: Option<String>,
    k: Option<usize>,
    ell: Option<usize>,
    tolerance: Option<f64>,
}

fn load_overrides(path: &Option<PathBuf>) -> Result<ParamOverrides> {
    let Some(p) = path else { return Ok(ParamOverrides::default()) };
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    let f: ParamsFile = serde_json::from_str(&text).context("parsing params file")?;
    Ok(ParamOverrides {
        gamma: f.gamma.as_deref().map(|s| rational(s, "params.gamma")).transpose()?,
        eta: f.eta.as_deref().map(|s| rational(s, "params.eta")).transpose()?,
        k: f.k,
        ell: f.ell,
        tolerance: f.tolerance,
    })
}

fn emit_graph(g: &Digraph, n: usize, what: &str) -> Outcome {
    Outcome { json: None, raw: Some(to_json(g, n)), summary: format!("{what}: {} vertices, {} edges", g.vertex_count(), g.edge_count()), code: 0 }
}

fn gen(family: &GenFamily) -> Result<Outcome> {
    Ok(match *family {
        GenFamily::C3 { n } => emit_graph(blowup_c3(n).graph(), n, "C3 blow-up"),
        GenFamily::Ttriangle { n } => emit_graph(gen_t_triangle(n).graph(), n, "reversed-triangle blow-up"),
        GenFamily::Gbeta { n, ref beta, seed } => {
            let (_, t) = gen_gbeta(n, rational(beta, "beta")?, Seed(seed))?;
            emit_graph(t.graph(), n, "beta-family member")
        }
        GenFamily::RandomTournament { n, seed, steps } => {
            let t = gen_random_regular_tournament(n, Seed(seed), steps.unwrap_or(20 * n * n));
            emit_graph(t.graph(), n, "random regular tournament")
        }
        GenFamily::RandomDigraph { n, d, seed } => {
            let g = gen_random_regular_tripartite_digraph(n, d, Seed(seed))?;
            emit_graph(g.graph(), n, "random regular digraph")
        }
    })
}

fn analyze(what: &AnalyzeCmd) -> Result<Outcome> {
    match what {
        AnalyzeCmd::Expansion { input, nu, tau, exact, budget, seed } => {
            let doc = read_input(input)?;
            let g = digraph_of(&doc)?;
            let p = ExpansionParams::new(rational(nu, "nu")?, rational(tau, "tau")?)?;
            let m = g.graph().vertex_count();
            let (lo, hi) = p.window(m);
            let base = json!({"threshold": p.threshold(m), "window": [lo, hi]});
            if *exact {
                let d = is_robust_outexpander_exact(g.graph(), &p)?;
                let witness = d.witness().cloned();
                let slack = witness.as_ref().map(|w| w.deficiency);
                let summary = if d.is_expander() { "robust outexpander (exact)".into() } else { "not a robust outexpander (exact)".to_string() };
                return Ok(Outcome::ok(json!({"decision": d, "witness": witness, "slacks": {"deficiency": slack, "bounds": base}}), summary));
            }
            let seed = seed.ok_or_else(|| anyhow!("--seed is required without --exact"))?;
            let w = find_non_expansion_witness(g.graph(), &p, budget.unwrap_or(20_000), &class_union_hints(doc.n), Seed(seed));
            let summary = if w.is_some() { "non-expansion witness found" } else { "no witness found (inconclusive)" };
            Ok(Outcome::ok(
                json!({"decision": if w.is_some() { "non_expander" } else { "inconclusive" }, "witness": w, "slacks": {"deficiency": w.as_ref().map(|w| w.deficiency), "bounds": base}}),
                summary,
            ))
        }
        AnalyzeCmd::Structure { input } => {
            let t = tournament_of(&read_input(input)?)?;
            let r = nearest_gbeta(&t);
            let summary = format!("distance {} to the nearest model (beta = {})", r.distance, r.model.beta());
            Ok(Outcome::ok(serde_json::to_value(r.to_doc())?, summary))
        }
    }
}

fn factorize(input: &GraphInput, merge: bool, seed: Option<u64>) -> Result<Outcome> {
    let g = digraph_of(&read_input(input)?)?;
    if merge {
        let seed = seed.ok_or_else(|| anyhow!("--seed is required with --merge"))?;
        let c = merge_into_few_cycles(g.graph(), FactorTargets { seed: Seed(seed), ..Default::default() })?;
        let soft = !(c.report.count_pass && c.report.min_length_pass);
        let summary = format!("{} cycles, shortest {}", c.report.cycle_count, c.report.min_length);
        return Ok(Outcome::ok(serde_json::to_value(&c)?, summary).with_code(if soft { EXIT_SOFT } else { 0 }));
    }
    let fs = one_factorization(g.graph())?;
    let cycles: Vec<Vec<Vec<usize>>> = fs.iter().map(|f| f.cycles()).collect();
    Ok(Outcome::ok(json!({"factors": cycles}), format!("{} 1-factors", fs.len())))
}

fn family_json(fam: &ForestFamily) -> Value {
    serde_json::to_value(fam).unwrap_or(Value::Null)
}

fn family_code(fams: &[&ForestFamily]) -> u8 {
    if fams.iter().any(|f| !f.hard_pass()) {
        EXIT_HARD
    } else if fams.iter().any(|f| !f.soft_pass() || f.shortfall > 0) {
        EXIT_SOFT
    } else {
        0
    }
}

/// Role-coordinate copy of `t` with the model and default constants.
fn pipeline_setup(args: &PipelineArgs) -> Result<(TripartiteTournament, GBetaModel, PipelineParams, bool)> {
    let t = tournament_of(&read_input(&args.input)?)?;
    let n = t.n();
    let delta = rational(&args.delta, "delta")?;
    let report = nearest_gbeta(&t);
    let tr = report.relabel(&t);
    let eps = report.epsilon;
    let c3 = report.model.beta_n() == 0 || tripart::rational::to_f64(report.model.beta()) < 8.0 * tripart::rational::to_f64(eps).powf(0.25);
    let (model, eps_used, beta) = if c3 {
        (GBetaModel::c3(n), (eps + report.model.beta()).min(Rational::from_integer(1)), Rational::from_integer(0))
    } else {
        (report.model.clone(), eps, report.model.beta())
    };
    let p = load_overrides(&args.params)?.apply(PipelineParams::desk(n, delta, eps_used, beta));
    Ok((tr, model, p, c3))
}

fn forests(what: &ForestCmd) -> Result<Outcome> {
    match what {
        ForestCmd::Cover(args) => {
            let (tr, model, p, c3) = pipeline_setup(args)?;
            let seed = Seed(args.seed);
            let (fam, u) = if c3 { cover_exceptional_c3(&tr, &p, seed)? } else { cover_exceptional_gbeta(&tr, &model, &p, seed)? };
            let (clean, ustar) = clean_forests(&tr, &model, &fam, &p)?;
            let code = family_code(&[&fam, &clean]);
            let summary = format!("{} forests, |U| = {}, |U*| = {}", clean.forests.len(), u.len(), ustar.len());
            Ok(Outcome::ok(
                json!({"coordinates": "role", "route": if c3 { "beta = 0" } else { "beta > 0" }, "exceptional": u, "covers": family_json(&fam), "ustar": ustar, "cleaned": family_json(&clean)}),
                summary,
            )
            .with_code(code))
        }
        ForestCmd::Partition(args) => {
            let (tr, _, p, _) = pipeline_setup(args)?;
            let hp = partition_host(tr.graph(), tr.n(), &p, Seed(args.seed))?;
            let hard = hp.audit.iter().flatten().any(|c| c.hard && !c.pass);
            let soft = hp.audit.iter().flatten().any(|c| !c.pass);
            let summary = format!("{} hosts, {} collision edges", hp.hosts.len(), hp.collisions.len());
            let code = if hard { EXIT_HARD } else if soft { EXIT_SOFT } else { 0 };
            Ok(Outcome::ok(serde_json::to_value(&hp)?, summary).with_code(code))
        }
        ForestCmd::PathCover { input, count, seed } => {
            let g = digraph_of(&read_input(input)?)?;
            let r = g.graph().regular_degree().unwrap_or_else(|| g.graph().min_semidegree());
            let fam = path_cover(g.graph(), r, *count, Seed(*seed));
            let summary = format!("{} forests, {} short", fam.forests.len(), fam.shortfall);
            Ok(Outcome::ok(family_json(&fam), summary).with_code(family_code(&[&fam])))
        }
        ForestCmd::Balanced { input, count, eps, seed } => {
            let t = tournament_of(&read_input(input)?)?;
            let report = nearest_gbeta(&t);
            let tr = report.relabel(&t);
            let vprime: Vec<usize> = (0..3 * t.n()).collect();
            let forbidden = vec![Vec::new(); *count];
            let reserved = HashSet::new();
            let fam = balanced_covers(&BalancedCoverInput {
                h: tr.graph(),
                t: &tr,
                model: &report.model,
                vprime: &vprime,
                forbidden: &forbidden,
                ustar: &[],
                reserved: &reserved,
                eps: rational(eps, "eps")?,
                tolerance: 1.0,
                seed: Seed(*seed),
            });
            let summary = format!("{} balanced forests", fam.forests.len());
            Ok(Outcome::ok(json!({"coordinates": "role", "family": family_json(&fam)}), summary).with_code(family_code(&[&fam])))
        }
    }
}

fn decompose(a: &DecomposeArgs) -> Result<Outcome> {
    let doc = read_input(&a.input)?;
    let delta = rational(&a.delta, "delta")?;
    let d: Decomposition = match a.mode {
        DecomposeMode::Directed => {
            let g = digraph_of(&doc)?;
            let mut opts = DirectedOptions { seed: Seed(a.seed), ..Default::default() };
            if let Some(b) = a.budget {
                opts.budget = b;
            }
            decompose_directed(&g, rational(&a.eps, "eps")?, &opts)?
        }
        DecomposeMode::Oriented => {
            let t = tournament_of(&doc)?;
            let mut opts = OrientedOptions { seed: Seed(a.seed), overrides: load_overrides(&a.params)?, ..Default::default() };
            if let Some(b) = a.budget {
                opts.extraction_budget = b;
            }
            approx_decompose_oriented(&t, delta, &opts)?
        }
    };
    if let Some(p) = &a.trace {
        std::fs::write(p, serde_json::to_string_pretty(&d.trace)?).with_context(|| format!("writing {}", p.display()))?;
    }
    let summary = format!(
        "{} verified Hamilton cycles (target {}), {} leftover edges, {:?}",
        d.certificate.cycles.len(),
        d.target,
        d.report.leftover_edges,
        d.certificate.label
    );
    let code = if d.success && d.hard_audits_pass != Some(false) { 0 } else { EXIT_SOFT };
    Ok(Outcome::ok(serde_json::to_value(&d.certificate)?, summary).with_code(code))
}

fn verify(graph: &PathBuf, cert: &PathBuf) -> Result<Outcome> {
    let doc = parse_graph(&std::fs::read_to_string(graph).with_context(|| format!("reading {}", graph.display()))?)?;
    let g = digraph_of(&doc)?;
    let c: PackingCertificate =
        serde_json::from_str(&std::fs::read_to_string(cert).with_context(|| format!("reading {}", cert.display()))?).context("parsing certificate")?;
    let r = verify_packing(g.graph(), doc.n, &c);
    let summary = match &r.violation {
        None => format!("pass: {} cycles, {} leftover edges", r.count, r.leftover_edges),
        Some(v) => format!("fail: {v:?}"),
    };
    let code = if r.pass { 0 } else { EXIT_HARD };
    Ok(Outcome::ok(serde_json::to_value(&r)?, summary).with_code(code))
}

fn oracle(what: &OracleCmd) -> Result<Outcome> {
    Ok(match what {
        OracleCmd::Hamiltonian { input } => {
            let g = digraph_of(&read_input(input)?)?;
            let h = is_hamiltonian(g.graph())?;
            Outcome::ok(json!({"hamiltonian": h}), format!("hamiltonian: {h}"))
        }
        OracleCmd::Enumerate { input } => {
            let g = digraph_of(&read_input(input)?)?;
            let cs = enumerate_hamilton_cycles(g.graph())?;
            Outcome::ok(json!({"count": cs.len(), "cycles": cs}), format!("{} Hamilton cycles", cs.len()))
        }
        OracleCmd::MaxPacking { input, cap } => {
            let g = digraph_of(&read_input(input)?)?;
            let cap = cap.unwrap_or_else(|| g.graph().max_semidegree());
            let (k, cs) = max_hamilton_packing_exact(g.graph(), cap)?;
            Outcome::ok(json!({"k": k, "cycles": cs}), format!("maximum packing {k}"))
        }
        OracleCmd::NearestGbeta { input } => {
            let t = tournament_of(&read_input(input)?)?;
            let d = exact_nearest_gbeta(&t)?;
            Outcome::ok(json!({"distance": d}), format!("exact distance {d}"))
        }
        OracleCmd::Expansion { input, nu, tau } => {
            let g = digraph_of(&read_input(input)?)?;
            let e = exact_expansion_check(g.graph(), rational(nu, "nu")?, rational(tau, "tau")?)?;
            Outcome::ok(json!({"expander": e}), format!("expander: {e}"))
        }
    })
}

fn time_ms(f: impl FnOnce()) -> f64 {
    let t = Instant::now();
    f();
    t.elapsed().as_secs_f64() * 1e3
}

fn bench(kernel: Kernel, sizes: &str, reps: usize, seed: u64) -> Result<Outcome> {
    let sizes: Vec<usize> = sizes.split(',').map(|s| s.trim().parse().with_context(|| format!("bad size {s:?}"))).collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kernel", "n", "rep", "millis", "result"])?;
    for &n in &sizes {
        for rep in 0..reps {
            let s = Seed(seed).derive((n * 1000 + rep) as u64);
            if matches!(kernel, Kernel::Gh | Kernel::All) {
                let g = gen_random_regular_tripartite_digraph(n, (3 * n).div_ceil(2).min(2 * n), s)?;
                let mut ok = false;
                let ms = time_ms(|| ok = ghouila_houri_hamilton(g.graph(), &GhOptions { seed: s, ..Default::default() }).is_ok());
                w.write_record(["gh", &n.to_string(), &rep.to_string(), &format!("{ms:.3}"), &ok.to_string()])?;
            }
            if matches!(kernel, Kernel::Matching | Kernel::All) {
                let g = gen_random_regular_tripartite_digraph(n, n, s)?;
                let adj: Vec<Vec<usize>> = (0..3 * n).map(|v| g.graph().out_neighbors(v).to_vec()).collect();
                let mut size = 0;
                let ms = time_ms(|| size = hopcroft_karp(&adj, 3 * n).size);
                w.write_record(["matching", &n.to_string(), &rep.to_string(), &format!("{ms:.3}"), &size.to_string()])?;
            }
            if matches!(kernel, Kernel::Flow | Kernel::All) {
                let (_, t) = gen_gbeta(n, Rational::from_integer(0), s)?;
                let g = t.graph();
                let k = n / 2;
                let mut cost = 0;
                let ms = time_ms(|| cost = tripart::flow::min_cost_regular_bipartite(n, k, |c, b| i64::from(!g.has_edge(2 * n + c, n + b))).1);
                w.write_record(["flow", &n.to_string(), &rep.to_string(), &format!("{ms:.3}"), &cost.to_string()])?;
            }
        }
    }
    let raw = String::from_utf8(w.into_inner()?)?;
    Ok(Outcome { json: None, raw: Some(raw), summary: format!("benchmarked {} sizes", sizes.len()), code: 0 })
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring thread pool")?;
    }
    match &cli.command {
        Command::Gen { family } => gen(family),
        Command::Analyze { what } => analyze(what),
        Command::Factorize { input, merge, seed } => factorize(input, *merge, *seed),
        Command::Forests { what } => forests(what),
        Command::Decompose(a) => decompose(a),
        Command::Verify { graph, cert } => verify(graph, cert),
        Command::Oracle { what } => oracle(what),
        Command::Bench { kernel, sizes, reps, seed } => bench(*kernel, sizes, *reps, *seed),
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
        Ok(out) => {
            if let Some(raw) = out.raw {
                print!("{raw}");
                if !raw.ends_with('\n') {
                    println!();
                }
            }
            if let Some(j) = out.json {
                println!("{}", serde_json::to_string(&j).expect("report serializes"));
            }
            eprintln!("{}", out.summary);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            println!("{}", json!({"error": format!("{e:#}")}));
            ExitCode::from(EXIT_HARD)
        }
    }
}
