//! Command-line front end. [`run`] does all the work so it can be tested
//! without spawning a process.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Number, Value};

use wfa_mps::grid2d::{
    dense_grid_operator, enumerate_accepted, sparse_grid_operator, Env2d, GridOperator, Peps, MAX_DENSE_GRID_SITES,
};
use wfa_mps::mps::expectation_counted;
use wfa_mps::oracle::{dense_operator, dense_state, digits, enumerate_words, exact_ground, kron_chain};
use wfa_mps::variational::{sweep_with, SweepOptions};
use wfa_mps::{
    compile_grid, inner, parse_spec, unroll, unroll_periodic, Boundary, Error, Execution, MatrixProductDiagram,
    MatrixProductState, SignalingAgent, Spec, SymbolKind, WeightedAutomaton, C64,
};

/// Tolerance for `--verify` comparisons against the dense references.
pub const VERIFY_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "wfa-mps", version, about = "Compile weighted automata to tensor networks and evaluate them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print one JSON object with fields command, inputs and results.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Debug, Args)]
struct Chain {
    /// Number of sites.
    #[arg(long)]
    sites: usize,
    /// Close the chain into a ring.
    #[arg(long)]
    periodic: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Unroll an automaton into a chain and report its bond structure.
    Compile {
        spec: PathBuf,
        #[command(flatten)]
        chain: Chain,
        /// Print every amplitude (states) or nonzero matrix element (operators).
        #[arg(long)]
        dense: bool,
    },
    /// Expectation value of an operator automaton in a state automaton.
    Expect {
        operator: PathBuf,
        state: PathBuf,
        #[command(flatten)]
        chain: Chain,
        /// Compare against the dense reference.
        #[arg(long)]
        verify: bool,
    },
    /// Variational ground state of an operator automaton.
    Dmrg {
        spec: PathBuf,
        #[arg(long)]
        sites: usize,
        #[arg(long, default_value_t = 8)]
        bond: usize,
        #[arg(long, default_value_t = 20)]
        sweeps: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Compare against exact diagonalization.
        #[arg(long)]
        verify: bool,
    },
    /// Check the compiled chain of an automaton against brute-force enumeration.
    Verify {
        spec: PathBuf,
        #[command(flatten)]
        chain: Chain,
    },
    /// Compile a signaling agent onto a grid.
    Grid {
        spec: PathBuf,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        /// List every accepted symbol grid.
        #[arg(long)]
        enumerate: bool,
        /// Print the nonzero matrix elements of the grid operator.
        #[arg(long)]
        dense: bool,
        /// Compare a cached environment expectation against the dense operator.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// GraphViz DOT rendering of an automaton.
    Dot { spec: PathBuf },
}

/// Exit code and captured streams of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum Failure {
    Domain(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

type CmdResult = Result<Report, Failure>;

/// Output of a command in both renderings.
struct Report {
    inputs: Map<String, Value>,
    results: Map<String, Value>,
    text: Vec<String>,
    /// Set when `--verify` ran and the comparison failed.
    verify_failed: bool,
}

impl Report {
    fn new(inputs: Value) -> Self {
        let inputs = match inputs {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        Self { inputs, results: Map::new(), text: Vec::new(), verify_failed: false }
    }

    fn put(&mut self, key: &str, v: Value) {
        self.results.insert(key.to_string(), v);
    }

    fn line(&mut self, s: impl Into<String>) {
        self.text.push(s.into());
    }
}

/// A float with 17 significant digits.
fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let s = format!("{x:.16e}");
    serde_json::from_str::<Number>(&s).map(Value::Number).unwrap_or(Value::Null)
}

fn cnum(z: C64) -> Value {
    json!({ "re": num(z.re), "im": num(z.im) })
}

fn ctext(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

fn load(path: &PathBuf) -> Result<Spec, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
    parse_spec(&text).map_err(|e| Failure::Domain(format!("{}:{e}", path.display())))
}

fn load_automaton(path: &PathBuf) -> Result<WeightedAutomaton, Failure> {
    match load(path)? {
        Spec::Automaton(a) => Ok(a),
        Spec::Agent(_) => Err(Failure::Domain(format!("{} is an agent; use `grid`", path.display()))),
    }
}

fn load_agent(path: &PathBuf) -> Result<SignalingAgent, Failure> {
    match load(path)? {
        Spec::Agent(a) => Ok(a),
        Spec::Automaton(_) => Err(Failure::Domain(format!("{} is an automaton, not an agent", path.display()))),
    }
}

fn diagram(a: &WeightedAutomaton, chain: &Chain) -> Result<MatrixProductDiagram, Failure> {
    Ok(if chain.periodic { unroll_periodic(a, chain.sites)? } else { unroll(a, chain.sites)? })
}

fn boundary_name(periodic: bool) -> &'static str {
    if periodic {
        "periodic"
    } else {
        "open"
    }
}

fn basis_word(index: usize, d: usize, n: usize) -> String {
    let ds = digits(index, d, n);
    let sep = if d > 10 { " " } else { "" };
    ds.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

fn compile(spec: &PathBuf, chain: &Chain, dense: bool) -> CmdResult {
    let a = load_automaton(spec)?;
    let diag = diagram(&a, chain)?;
    let mut r = Report::new(json!({
        "spec": spec.display().to_string(),
        "sites": chain.sites,
        "boundary": boundary_name(chain.periodic),
        "dense": dense,
    }));
    let kind = match a.symbols().kind() {
        SymbolKind::State => "state",
        SymbolKind::Operator => "operator",
    };
    let entries: Vec<usize> = (0..diag.len()).map(|k| diag.site_entries(k).len()).collect();
    r.put("kind", json!(kind));
    r.put("states", json!(a.num_states()));
    r.put("bond_extents", json!(diag.bond_extents()));
    r.put("site_entries", json!(entries));
    r.line(format!("{kind} chain, {} sites, {} boundary", diag.len(), boundary_name(chain.periodic)));
    r.line(format!("bond extents: {:?}", diag.bond_extents()));
    r.line(format!("nonzero entries per site: {entries:?}"));
    if dense {
        let d = a.symbols().dim();
        let n = diag.len();
        match a.symbols().kind() {
            SymbolKind::State => {
                let v = dense_state(&diag.to_mps()?)?;
                let mut amps = Vec::with_capacity(v.len());
                for (k, z) in v.iter().enumerate() {
                    let w = basis_word(k, d, n);
                    r.line(format!("{w} {}", ctext(*z)));
                    amps.push(json!({ "word": w, "amplitude": cnum(*z) }));
                }
                r.put("amplitudes", Value::Array(amps));
            }
            SymbolKind::Operator => {
                let m = dense_operator(&diag.to_mpo()?)?;
                let mut elems = Vec::new();
                for row in 0..m.nrows() {
                    for col in 0..m.ncols() {
                        let z = m[(row, col)];
                        if z != C64::new(0.0, 0.0) {
                            let (rw, cw) = (basis_word(row, d, n), basis_word(col, d, n));
                            r.line(format!("{rw} {cw} {}", ctext(z)));
                            elems.push(json!({ "row": rw, "col": cw, "value": cnum(z) }));
                        }
                    }
                }
                r.put("elements", Value::Array(elems));
            }
        }
    }
    Ok(r)
}

fn expect(operator: &PathBuf, state: &PathBuf, chain: &Chain, verify: bool) -> CmdResult {
    let (op, st) = (load_automaton(operator)?, load_automaton(state)?);
    let h = diagram(&op, chain)?.to_mpo()?;
    let s = diagram(&st, chain)?.to_mps()?;
    let (value, cost) = expectation_counted(&s, &h, &s)?;
    let norm = inner(&s, &s)?;
    let mut r = Report::new(json!({
        "operator": operator.display().to_string(),
        "state": state.display().to_string(),
        "sites": chain.sites,
        "boundary": boundary_name(chain.periodic),
        "verify": verify,
    }));
    r.put("expectation", cnum(value));
    r.put("norm_squared", cnum(norm));
    r.put("multiply_adds", json!(cost));
    r.line(format!("<s|H|s> = {}", ctext(value)));
    r.line(format!("<s|s> = {}", ctext(norm)));
    r.line(format!("multiply-adds: {cost}"));
    if verify {
        let v = dense_state(&s)?;
        let m = dense_operator(&h)?;
        let oracle = (v.adjoint() * m * &v)[(0, 0)];
        let diff = (oracle - value).norm();
        r.put("dense_expectation", cnum(oracle));
        r.put("difference", num(diff));
        r.line(format!("dense reference: {}  difference: {diff:e}", ctext(oracle)));
        r.verify_failed = diff > VERIFY_TOL * oracle.norm().max(1.0);
    }
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
fn dmrg(spec: &PathBuf, sites: usize, bond: usize, sweeps: usize, tol: f64, seed: u64, verify: bool) -> CmdResult {
    let a = load_automaton(spec)?;
    let h = unroll(&a, sites)?.to_mpo()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s0 = MatrixProductState::random(sites, h.d(), bond, Boundary::Open, &mut rng)?;
    let opts = SweepOptions { max_sweeps: sweeps, tol, verify, ..SweepOptions::default() };
    let (_, report) = sweep_with(&h, &s0, &opts)?;
    let mut r = Report::new(json!({
        "spec": spec.display().to_string(),
        "sites": sites,
        "bond": bond,
        "sweeps": sweeps,
        "tol": num(tol),
        "seed": seed,
        "verify": verify,
    }));
    for (k, (e, g)) in report.energies.iter().zip(&report.global_energies).enumerate() {
        r.line(format!("sweep {k}: energy {e:.17e}  (state energy {g:.17e})"));
    }
    let energy = report.final_energy().unwrap_or(f64::NAN);
    r.line(format!("converged: {}", report.converged));
    r.line(format!("setup absorptions: {}", report.setup_absorptions));
    for w in &report.warnings {
        r.line(format!("warning: {w}"));
    }
    r.put("energies", Value::Array(report.energies.iter().map(|&e| num(e)).collect()));
    r.put("state_energies", Value::Array(report.global_energies.iter().map(|&e| num(e)).collect()));
    r.put("energy", num(energy));
    r.put("converged", json!(report.converged));
    r.put("setup_absorptions", json!(report.setup_absorptions));
    r.put("step_absorptions", json!(report.steps.iter().map(|s| s.absorptions).collect::<Vec<_>>()));
    r.put("warnings", json!(report.warnings));
    if verify {
        let (exact, _) = exact_ground(&dense_operator(&h)?)?;
        let diff = (energy - exact).abs();
        r.put("exact_energy", num(exact));
        r.put("difference", num(diff));
        r.line(format!("dense exact energy: {exact:.17e}  difference: {diff:e}"));
        r.verify_failed = diff > VERIFY_TOL;
    }
    Ok(r)
}

fn verify_chain(spec: &PathBuf, chain: &Chain) -> CmdResult {
    let a = load_automaton(spec)?;
    let diag = diagram(&a, chain)?;
    let n = chain.sites;
    let eval = |w: &[usize]| if chain.periodic { a.evaluate_periodic(w) } else { a.evaluate(w) };
    let base = a.symbols().len();
    let words = enumerate_words(&a, n)?.len();
    let mut worst = 0.0f64;
    for k in 0..words {
        let w = digits(k, base, n);
        worst = worst.max((diag.amplitude(&w)? - eval(&w)?).norm());
    }
    let dense_dev = match a.symbols().kind() {
        SymbolKind::State => {
            // the word index and the basis index coincide only for basis kets,
            // so compare against the superposition of realized kets
            let v = dense_state(&diag.to_mps()?)?;
            let mut oracle = nalgebra::DVector::<C64>::zeros(v.len());
            for k in 0..words {
                let w = digits(k, base, n);
                let f = eval(&w)?;
                if f != C64::new(0.0, 0.0) {
                    let kets: Vec<_> = w.iter().map(|&s| a.symbols().value(s).clone()).collect();
                    oracle += kron_chain(&kets).column(0) * f;
                }
            }
            (v - oracle).camax()
        }
        SymbolKind::Operator => {
            let m = dense_operator(&diag.to_mpo()?)?;
            let mut oracle = nalgebra::DMatrix::<C64>::zeros(m.nrows(), m.ncols());
            for k in 0..words {
                let w = digits(k, base, n);
                let f = eval(&w)?;
                if f != C64::new(0.0, 0.0) {
                    let ops: Vec<_> = w.iter().map(|&s| a.symbols().value(s).clone()).collect();
                    oracle += kron_chain(&ops) * f;
                }
            }
            (m - oracle).camax()
        }
    };
    let mut r = Report::new(json!({
        "spec": spec.display().to_string(),
        "sites": n,
        "boundary": boundary_name(chain.periodic),
    }));
    r.put("words", json!(words));
    r.put("amplitude_deviation", num(worst));
    r.put("dense_deviation", num(dense_dev));
    r.line(format!("{words} words: max amplitude deviation {worst:e}"));
    r.line(format!("dense form vs Kronecker sum: max deviation {dense_dev:e}"));
    r.verify_failed = worst > 1e-12 || dense_dev > 1e-12;
    r.put("ok", json!(!r.verify_failed));
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
fn grid(spec: &PathBuf, rows: usize, cols: usize, enumerate: bool, dense: bool, verify: bool, seed: u64) -> CmdResult {
    let agent = load_agent(spec)?;
    let g = compile_grid(&agent, rows, cols)?;
    let mut r = Report::new(json!({
        "spec": spec.display().to_string(),
        "rows": rows,
        "cols": cols,
        "enumerate": enumerate,
        "dense": dense,
        "verify": verify,
        "seed": seed,
    }));
    let counts: Vec<Vec<usize>> =
        (0..rows).map(|i| (0..cols).map(|j| g.entries(i, j).len()).collect()).collect();
    r.put("signals", json!(agent.signals()));
    r.put("vertex_entries", json!(counts));
    r.line(format!("{rows}×{cols} grid, {} signals: {}", agent.signals().len(), agent.signals().join(", ")));
    for row in &counts {
        r.line(format!("entries: {row:?}"));
    }
    if enumerate {
        let accepted = enumerate_accepted(&g, Execution::default())?;
        r.line(format!("{} accepted configurations", accepted.len()));
        let mut list = Vec::new();
        for (cfg, w) in &accepted {
            let text = g.format_config(cfg);
            r.line(format!("{text} {}", ctext(*w)));
            list.push(json!({ "grid": text, "weight": cnum(*w) }));
        }
        r.put("accepted", Value::Array(list));
    }
    if dense {
        let elems = sparse_grid_operator(&g, Execution::default())?;
        r.line(format!("{} nonzero matrix elements", elems.len()));
        let d = g.d();
        let n = rows * cols;
        let mut list = Vec::new();
        for ((row, col), z) in &elems {
            let (rw, cw) = (basis_word(*row, d, n), basis_word(*col, d, n));
            r.line(format!("{rw} {cw} {}", ctext(*z)));
            list.push(json!({ "row": rw, "col": cw, "value": cnum(*z) }));
        }
        r.put("elements", Value::Array(list));
    }
    if verify {
        verify_grid(&g, seed, &mut r)?;
    }
    Ok(r)
}

fn verify_grid(g: &GridOperator, seed: u64, r: &mut Report) -> Result<(), Failure> {
    if g.rows() * g.cols() > MAX_DENSE_GRID_SITES {
        return Err(Failure::Domain(format!(
            "--verify needs at most {MAX_DENSE_GRID_SITES} vertices for the dense reference"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = Peps::random(g.rows(), g.cols(), g.d(), 1, &mut rng)?;
    let v = p.dense()?;
    let oracle = (v.adjoint() * dense_grid_operator(g)? * &v)[(0, 0)];
    let mut env = Env2d::new(g, p.clone(), p)?;
    let value = env.expectation()?;
    let diff = (value - oracle).norm();
    r.put("environment_expectation", cnum(value));
    r.put("dense_expectation", cnum(oracle));
    r.put("difference", num(diff));
    r.line(format!("random product state: environment {}  dense {}  difference {diff:e}", ctext(value), ctext(oracle)));
    r.verify_failed = diff > VERIFY_TOL * oracle.norm().max(1.0);
    Ok(())
}

fn dot(spec: &PathBuf) -> CmdResult {
    let a = load_automaton(spec)?;
    let text = a.to_dot();
    let mut r = Report::new(json!({ "spec": spec.display().to_string() }));
    r.put("dot", json!(text));
    r.text.extend(text.lines().map(str::to_string));
    Ok(r)
}

fn dispatch(cmd: &Command) -> (&'static str, CmdResult) {
    match cmd {
        Command::Compile { spec, chain, dense } => ("compile", compile(spec, chain, *dense)),
        Command::Expect { operator, state, chain, verify } => ("expect", expect(operator, state, chain, *verify)),
        Command::Dmrg { spec, sites, bond, sweeps, tol, seed, verify } => {
            let r = if *sites == 0 || *bond == 0 {
                Err(Failure::Usage("--sites and --bond must be positive".into()))
            } else {
                dmrg(spec, *sites, *bond, *sweeps, *tol, *seed, *verify)
            };
            ("dmrg", r)
        }
        Command::Verify { spec, chain } => ("verify", verify_chain(spec, chain)),
        Command::Grid { spec, rows, cols, enumerate, dense, verify, seed } => {
            ("grid", grid(spec, *rows, *cols, *enumerate, *dense, *verify, *seed))
        }
        Command::Dot { spec } => ("dot", dot(spec)),
    }
}

/// Parses `args` (program name first) and runs the command.
///
/// Exit codes: 0 on success, 1 on a domain error or failed `--verify`,
/// 2 on a usage error.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let (stdout, stderr) = if code == 0 { (text, String::new()) } else { (String::new(), text) };
            return Outcome { code, stdout, stderr };
        }
    };
    let (name, result) = dispatch(&cli.command);
    match result {
        Ok(report) => {
            let code = if report.verify_failed { 1 } else { 0 };
            let stdout = if cli.json {
                let obj = json!({
                    "command": name,
                    "inputs": Value::Object(report.inputs),
                    "results": Value::Object(report.results),
                });
                format!("{}\n", serde_json::to_string_pretty(&obj).expect("serializable"))
            } else {
                let mut s = report.text.join("\n");
                s.push('\n');
                s
            };
            let stderr = if code == 1 { "verification failed\n".to_string() } else { String::new() };
            Outcome { code, stdout, stderr }
        }
        Err(Failure::Domain(msg)) => Outcome { code: 1, stdout: String::new(), stderr: format!("error: {msg}\n") },
        Err(Failure::Usage(msg)) => Outcome { code: 2, stdout: String::new(), stderr: format!("usage error: {msg}\n") },
    }
}
