//! `pst`: basis dumps, Hamiltonian synthesis, time evolution, parameter
//! fitting and verification from the command line.
//!
//! Exit codes: 0 success, 2 usage or specification error, 3 no solution.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use pst_core::dynamics::{format_sig, trace_probabilities, transfer_fidelity, uniform_grid, StateVector, TimeSeries, TraceTargets};
use pst_core::fock_basis::{Basis, BasisSpec, DoubleOccupancy, Statistics, SubspacePartition};
use pst_core::inverse_design::{
    append_catalog, block_indices, chain_problem, evaluate, evaluate_chain_row, fit, inverse_distance_problem,
    inverse_distance_published, BlockKind, FitOutcome, FitProblem, FitResult, ObjectiveKind, DEFAULT_SEED,
};
use pst_core::lattice_model::{build_hamiltonian, ModelParams};
use pst_core::permutation_targets::{TargetJson, TargetTransform};
use pst_core::presets;
use pst_core::spectral_synthesis::{
    effective_focusing_hamiltonian, focusing_target, synthesize, verify_pst, FocusingVariant, HermitianOperator,
    OperatorJson, PstReport, SpectralPlan,
};
use pst_core::PstError;

const CSV_DIGITS: usize = 9;
/// Restarts used by `--reproduce table1` and `--reproduce table2-refit`.
const CHAIN_RESTARTS: usize = 200;
const INVERSE_DISTANCE_RESTARTS: usize = 64;

#[derive(Parser)]
#[command(name = "pst", version, about = "Perfect state transfer design and verification")]
struct Cli {
    /// Seed for multistart fits. Defaults to 7; a problem file's own seed
    /// is kept unless this flag is given.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write data here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Run a bundled reproduction preset instead of reading input files.
    #[arg(long, global = true, value_enum)]
    reproduce: Option<Preset>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    Table1,
    Table2Verify,
    Table2Refit,
    Fig2a,
    Fig2b,
    Fig3,
    Focusing,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate a basis and its ordering blocks.
    Basis(BasisArgs),
    /// Build a Hamiltonian realizing a target transform.
    Synthesize(SynthesizeArgs),
    /// Time traces of transfer probabilities or site occupations.
    Simulate(SimulateArgs),
    /// Multistart parameter fit.
    Fit(FitArgs),
    /// Compare exp(-iH tau) with a target transform.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct BasisArgs {
    #[arg(long)]
    sites: usize,
    /// Defaults to the number of labels.
    #[arg(long)]
    excitations: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "mu")]
    labels: Vec<String>,
    #[arg(long)]
    fermion: bool,
    #[arg(long)]
    no_double_occupancy: bool,
    /// Let labels repeat even when there is one excitation per label.
    #[arg(long)]
    any_labels: bool,
}

#[derive(Args)]
struct SynthesizeArgs {
    /// Target transform JSON.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Spectral plan JSON.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Effective focusing Hamiltonian instead of a target/plan pair.
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
    xplus: i64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
    xminus: i64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    SpinPair,
    BosonPair,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation JSON (basis, model, block, initial, targets, grid).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Initial basis state, e.g. `1,mu;2,nu`. Overrides the file.
    #[arg(long)]
    initial: Option<String>,
    /// Target basis state; repeat for several. Overrides the file.
    #[arg(long)]
    target: Vec<String>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    /// Fit problem JSON.
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long)]
    multistart: Option<usize>,
    /// JSON-lines results catalog the solved problem is appended to.
    #[arg(long, default_value = "pst-catalog.jsonl")]
    catalog: PathBuf,
    #[arg(long)]
    no_catalog: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Hamiltonian JSON, either an operator or `synthesize` output.
    #[arg(long)]
    hamiltonian: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
}

enum Failure {
    Usage(String),
    NoSolution(String),
    Io(String),
}

impl From<PstError> for Failure {
    fn from(e: PstError) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Outcome<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn sig(x: f64) -> String {
    format_sig(x, CSV_DIGITS)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

// --- basis ---

#[derive(Serialize)]
struct BasisOutput {
    spec: BasisSpec,
    count: usize,
    states: pst_core::fock_basis::BasisDump,
    #[serde(skip_serializing_if = "Option::is_none")]
    partition: Option<SubspacePartition>,
}

fn cmd_basis(cli: &Cli, a: &BasisArgs) -> Outcome<String> {
    if cli.reproduce.is_some() {
        return usage("basis has no reproduction presets");
    }
    let labels: Vec<&str> = a.labels.iter().map(String::as_str).collect();
    let n = a.excitations.unwrap_or(labels.len());
    let mut spec = if n == labels.len() && n >= 2 && !a.any_labels {
        BasisSpec::distinguishable(a.sites, &labels)
    } else {
        BasisSpec::new(a.sites, n, &labels)
    };
    if a.fermion {
        spec = spec.with_statistics(Statistics::Fermion);
    }
    if a.no_double_occupancy {
        spec = spec.with_double_occupancy(DoubleOccupancy::Forbidden);
    }
    let basis = Basis::new(spec.clone())?;
    let partition = match (n, labels.first(), labels.last()) {
        (2, Some(first), Some(last)) => basis.partition((*first, *last)).ok(),
        _ => None,
    };
    match cli.format {
        Format::Json => Ok(to_json(&BasisOutput { spec, count: basis.len(), states: basis.dump(), partition })),
        Format::Csv => {
            let mut out = String::from("index,ket,block\n");
            for k in 0..basis.len() {
                let block = match &partition {
                    Some(p) if p.less.contains(&k) => "less",
                    Some(p) if p.equal.contains(&k) => "equal",
                    Some(_) => "greater",
                    None => "",
                };
                writeln!(out, "{k},{},{block}", csv_field(&basis.ket(k))).unwrap();
            }
            Ok(out)
        }
    }
}

// --- synthesize / verify ---

#[derive(Serialize)]
struct SynthesisOutput {
    hamiltonian: OperatorJson,
    report: PstReport,
}

#[derive(Serialize)]
struct FocusingOutput {
    variant: FocusingVariant,
    xplus: i64,
    xminus: i64,
    tau: f64,
    kets: Vec<String>,
    e22: f64,
    j2: f64,
    hamiltonian: OperatorJson,
    report: PstReport,
}

fn operator_csv(h: &HermitianOperator) -> String {
    let mut out = String::from("row,col,re,im\n");
    for r in 0..h.dim() {
        for c in 0..h.dim() {
            let z = h.entry(r, c);
            writeln!(out, "{r},{c},{},{}", sig(z.re), sig(z.im)).unwrap();
        }
    }
    out
}

fn report_csv(r: &PstReport) -> String {
    let mut out = String::from("pair,fidelity\n");
    for (k, f) in r.fidelities.iter().enumerate() {
        writeln!(out, "{k},{}", sig(*f)).unwrap();
    }
    writeln!(out, "operator_distance,{}", sig(r.operator_distance)).unwrap();
    writeln!(out, "global_phase,{}", sig(r.global_phase)).unwrap();
    out
}

fn cmd_synthesize(cli: &Cli, a: &SynthesizeArgs) -> Outcome<String> {
    let focusing = match cli.reproduce {
        Some(Preset::Focusing) => Some((FocusingVariant::SpinPair, 1, 1, 1.0)),
        Some(_) => return usage("synthesize only reproduces the focusing preset"),
        None => a.variant.map(|v| {
            let v = match v {
                Variant::SpinPair => FocusingVariant::SpinPair,
                Variant::BosonPair => FocusingVariant::BosonPair,
            };
            (v, a.xplus, a.xminus, a.tau)
        }),
    };
    if let Some((variant, xplus, xminus, tau)) = focusing {
        let f = effective_focusing_hamiltonian(xplus, xminus, tau, variant)?;
        let report = verify_pst(&f.operator, &focusing_target(variant)?, tau)?;
        return Ok(match cli.format {
            Format::Json => to_json(&FocusingOutput {
                variant,
                xplus,
                xminus,
                tau,
                kets: f.kets,
                e22: f.e22,
                j2: f.j2,
                hamiltonian: f.operator.to_json(),
                report,
            }),
            Format::Csv => {
                let mut out = format!("quantity,value\ne22,{}\nj2,{}\n", sig(f.e22), sig(f.j2));
                for (k, f) in report.fidelities.iter().enumerate() {
                    writeln!(out, "fidelity{k},{}", sig(*f)).unwrap();
                }
                writeln!(out, "operator_distance,{}", sig(report.operator_distance)).unwrap();
                out
            }
        });
    }
    let (Some(target), Some(plan)) = (&a.target, &a.plan) else {
        return usage("synthesize needs --target and --plan, or --variant");
    };
    let target = TargetTransform::from_json(&read_json::<TargetJson>(target)?)?;
    let plan: SpectralPlan = read_json(plan)?;
    let h = synthesize(&target, &plan)?;
    let report = verify_pst(&h, &target, plan.tau)?;
    Ok(match cli.format {
        Format::Json => to_json(&SynthesisOutput { hamiltonian: h.to_json(), report }),
        Format::Csv => operator_csv(&h),
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum HamiltonianFile {
    Wrapped { hamiltonian: OperatorJson },
    Bare(OperatorJson),
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> Outcome<String> {
    match cli.reproduce {
        Some(Preset::Table1) => return chain_rows_report(cli.format),
        Some(Preset::Table2Verify) => return inverse_distance_report(cli.format),
        Some(_) => return usage("verify reproduces table1 and table2-verify"),
        None => {}
    }
    let (Some(hp), Some(tp)) = (&a.hamiltonian, &a.target) else {
        return usage("verify needs --hamiltonian and --target");
    };
    let json = match read_json::<HamiltonianFile>(hp)? {
        HamiltonianFile::Wrapped { hamiltonian } => hamiltonian,
        HamiltonianFile::Bare(op) => op,
    };
    let h = HermitianOperator::from_json(&json)?;
    let target = TargetTransform::from_json(&read_json::<TargetJson>(tp)?)?;
    let report = verify_pst(&h, &target, a.tau)?;
    Ok(match cli.format {
        Format::Json => to_json(&report),
        Format::Csv => report_csv(&report),
    })
}

// --- simulate ---

/// Input of `simulate --model`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Simulation {
    basis: BasisSpec,
    model: ModelParams,
    #[serde(default = "full_block")]
    block: BlockKind,
    #[serde(default)]
    initial: Option<String>,
    /// Basis states whose probabilities are traced; site occupations when empty.
    #[serde(default)]
    targets: Vec<String>,
    #[serde(default = "unit")]
    t_max: f64,
    #[serde(default = "default_points")]
    points: usize,
}

fn full_block() -> BlockKind {
    BlockKind::Full
}

fn unit() -> f64 {
    1.0
}

fn default_points() -> usize {
    201
}

fn local_index(basis: &Basis, block: &[usize], ket: &str) -> Outcome<usize> {
    let g = basis.parse_state(ket)?;
    block
        .iter()
        .position(|&x| x == g)
        .ok_or_else(|| Failure::Usage(format!("state |{ket}> is outside the simulated block")))
}

fn series_output(ts: &TimeSeries, format: Format) -> String {
    match format {
        Format::Csv => ts.to_csv(),
        Format::Json => {
            let mut s = ts.to_json();
            s.push('\n');
            s
        }
    }
}

fn chain_basis() -> Outcome<(Basis, Vec<usize>)> {
    let basis = Basis::new(BasisSpec::distinguishable(5, &["mu", "nu"]).hard_core())?;
    let less = block_indices(&basis, BlockKind::Less)?;
    Ok((basis, less))
}

fn reproduce_occupations(case_b: bool, format: Format) -> Outcome<String> {
    let cfg = presets::occupation_traces()?;
    let row = presets::chain_table()?.rows[cfg.row];
    let case = if case_b { &cfg.b } else { &cfg.a };
    let problem = chain_problem(ObjectiveKind::PropagatorMatch, 1, DEFAULT_SEED)?;
    let h = problem.hamiltonian(&[row.w, row.j12, row.j23])?;
    let (basis, less) = chain_basis()?;
    let psi0 = StateVector::basis_state(less.len(), local_index(&basis, &less, &case.initial)?)?;
    let grid = uniform_grid(cfg.tau, cfg.points)?;
    let ts = trace_probabilities(&h, &psi0, &TraceTargets::Sites { basis: &basis, block: &less }, &grid)?;
    Ok(series_output(&ts, format))
}

fn reproduce_inverse_distance_traces(format: Format) -> Outcome<String> {
    let set = presets::inverse_distance_set()?;
    let problem = inverse_distance_problem(1, DEFAULT_SEED)?;
    let theta = inverse_distance_published()?;
    let (basis, odd, _) = problem.setting()?;
    let h = problem.hamiltonian(&theta)?;
    let grid = uniform_grid(set.tau, 201)?;
    let mut series: Option<TimeSeries> = None;
    for pair in &set.pairs {
        let psi0 = StateVector::basis_state(odd.len(), local_index(&basis, &odd, &pair.initial)?)?;
        let target = StateVector::basis_state(odd.len(), local_index(&basis, &odd, &pair.target)?)?;
        let label = format!("{}->{}", pair.initial, pair.target);
        let ts = trace_probabilities(&h, &psi0, &TraceTargets::States(vec![(label, target)]), &grid)?;
        series = Some(match series {
            None => ts,
            Some(mut acc) => {
                acc.labels.extend(ts.labels);
                acc.values.extend(ts.values);
                acc
            }
        });
    }
    let ts = series.ok_or_else(|| Failure::Usage("preset has no transfer pairs".into()))?;
    Ok(series_output(&ts, format))
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Outcome<String> {
    match cli.reproduce {
        Some(Preset::Fig2a) => return reproduce_occupations(false, cli.format),
        Some(Preset::Fig2b) => return reproduce_occupations(true, cli.format),
        Some(Preset::Fig3) => return reproduce_inverse_distance_traces(cli.format),
        Some(_) => return usage("simulate reproduces fig2a, fig2b and fig3"),
        None => {}
    }
    let Some(path) = &a.model else {
        return usage("simulate needs --model");
    };
    let sim: Simulation = read_json(path)?;
    let basis = Basis::new(sim.basis)?;
    let block = block_indices(&basis, sim.block)?;
    let h = build_hamiltonian(&sim.model, &basis, Some(&block))?;
    let Some(initial) = a.initial.clone().or(sim.initial) else {
        return usage("no initial state given");
    };
    let psi0 = StateVector::basis_state(block.len(), local_index(&basis, &block, &initial)?)?;
    let grid = uniform_grid(a.t_max.unwrap_or(sim.t_max), a.points.unwrap_or(sim.points))?;
    let names = if a.target.is_empty() { sim.targets } else { a.target.clone() };
    let ts = if names.is_empty() {
        trace_probabilities(&h, &psi0, &TraceTargets::Sites { basis: &basis, block: &block }, &grid)?
    } else {
        let mut states = Vec::new();
        for name in names {
            let k = local_index(&basis, &block, &name)?;
            states.push((name, StateVector::basis_state(block.len(), k)?));
        }
        trace_probabilities(&h, &psi0, &TraceTargets::States(states), &grid)?
    };
    Ok(series_output(&ts, cli.format))
}

// --- fit ---

#[derive(Serialize)]
struct FitOutput {
    seed: u64,
    outcome: FitOutcome,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    published: Vec<FitResult>,
}

fn results_csv(results: &[FitResult], tag: &str) -> String {
    let mut out = String::new();
    if let Some(first) = results.first() {
        writeln!(out, "set,{},objective,min_fidelity,operator_distance,multiplicity", first.names.join(",")).unwrap();
    }
    for r in results {
        let params: Vec<String> = r.params.iter().map(|&x| sig(x)).collect();
        writeln!(
            out,
            "{tag},{},{},{},{},{}",
            params.join(","),
            sig(r.objective),
            sig(r.min_fidelity()),
            sig(r.operator_distance),
            r.multiplicity
        )
        .unwrap();
    }
    out
}

fn chain_rows() -> Outcome<Vec<FitResult>> {
    let table = presets::chain_table()?;
    table.rows.iter().map(|row| evaluate_chain_row(row).map_err(Failure::from)).collect()
}

fn chain_rows_report(format: Format) -> Outcome<String> {
    let rows = chain_rows()?;
    Ok(match format {
        Format::Json => to_json(&rows),
        Format::Csv => results_csv(&rows, "published"),
    })
}

#[derive(Serialize)]
struct PairReport {
    initial: String,
    target: String,
    /// Transfer probability at `tau` within the odd-parity block.
    block: f64,
    /// Same transfer with all two-excitation states coupled.
    all_states: f64,
}

#[derive(Serialize)]
struct InverseDistanceReport {
    evaluation: FitResult,
    pairs: Vec<PairReport>,
}

fn inverse_distance_report(format: Format) -> Outcome<String> {
    let set = presets::inverse_distance_set()?;
    let problem = inverse_distance_problem(1, DEFAULT_SEED)?;
    let theta = inverse_distance_published()?;
    let (basis, odd, _) = problem.setting()?;
    let h_odd = problem.hamiltonian(&theta)?;
    let h_all = build_hamiltonian(&problem.model(&theta)?, &basis, None)?;
    let all = basis.all_indices();
    let mut pairs = Vec::new();
    for pair in &set.pairs {
        let prob = |h: &HermitianOperator, block: &[usize]| -> Outcome<f64> {
            let s = StateVector::basis_state(block.len(), local_index(&basis, block, &pair.initial)?)?;
            let t = StateVector::basis_state(block.len(), local_index(&basis, block, &pair.target)?)?;
            Ok(transfer_fidelity(h, &s, &t, set.tau)?)
        };
        pairs.push(PairReport {
            initial: pair.initial.clone(),
            target: pair.target.clone(),
            block: prob(&h_odd, &odd)?,
            all_states: prob(&h_all, &all)?,
        });
    }
    let report = InverseDistanceReport { evaluation: evaluate(&problem, &theta)?, pairs };
    Ok(match format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut out = String::from("initial,target,block,all_states\n");
            for p in &report.pairs {
                writeln!(out, "{},{},{},{}", csv_field(&p.initial), csv_field(&p.target), sig(p.block), sig(p.all_states))
                    .unwrap();
            }
            out
        }
    })
}

fn cmd_fit(cli: &Cli, a: &FitArgs) -> Outcome<String> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let (mut problem, published) = match cli.reproduce {
        Some(Preset::Table1) => (chain_problem(ObjectiveKind::PropagatorMatch, CHAIN_RESTARTS, seed)?, chain_rows()?),
        Some(Preset::Table2Verify) => return inverse_distance_report(cli.format),
        Some(Preset::Table2Refit) => (inverse_distance_problem(INVERSE_DISTANCE_RESTARTS, seed)?, Vec::new()),
        Some(_) => return usage("fit reproduces table1, table2-verify and table2-refit"),
        None => {
            let Some(path) = &a.problem else {
                return usage("fit needs --problem or --reproduce");
            };
            let mut p: FitProblem = read_json(path)?;
            if let Some(s) = cli.seed {
                p.seed = s;
            }
            (p, Vec::new())
        }
    };
    if let Some(m) = a.multistart {
        problem.multistart = m;
    }
    let outcome = fit(&problem)?;
    if !a.no_catalog {
        append_catalog(&a.catalog, &problem, &outcome)
            .map_err(|e| Failure::Io(format!("{}: {e}", a.catalog.display())))?;
    }
    if outcome.solutions.is_empty() {
        return Err(Failure::NoSolution(format!(
            "no solution below {:e} in {} restarts (best objective {:e})",
            problem.accept_below, outcome.restarts, outcome.best_objective
        )));
    }
    Ok(match cli.format {
        Format::Json => to_json(&FitOutput { seed: problem.seed, outcome, published }),
        Format::Csv => {
            let mut out = results_csv(&outcome.solutions, "fit");
            let rows = results_csv(&published, "published");
            out.extend(rows.lines().skip(1).map(|l| format!("{l}\n")));
            out
        }
    })
}

fn run(cli: &Cli) -> Outcome<String> {
    match &cli.command {
        Command::Basis(a) => cmd_basis(cli, a),
        Command::Synthesize(a) => cmd_synthesize(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Fit(a) => cmd_fit(cli, a),
        Command::Verify(a) => cmd_verify(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|data| match &cli.output {
        Some(path) => std::fs::write(path, data).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{data}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::NoSolution(msg)) => {
            eprintln!("no solution: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
