//! `arithlab` runs the laboratory's experiments from the command line and
//! writes one machine-readable artifact per invocation.
//!
//! Exit codes: 0 on success, 1 when a computation budget is exceeded, 2 for
//! usage errors (including bad grammar in any flag).

mod grammar;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use arithlab::characters::CharacterError;
use arithlab::combinatorics::{
    find_ipk, linear_forms_density, validate_ipk, CombinatoricsError, LinearFormSystem,
};
use arithlab::ergodic::{
    default_uniformity_degree, partial_summation_check, recurrence_scan, restricted_vs_scaled,
    structured_weight_average, uniformity_bound_experiment, weighted_average, ErgodicError,
};
use arithlab::fourier::{CyclicSignal, FourierError};
use arithlab::gowers::{
    gowers_uniform_profile, linf_l1_bound_check, restricted_norm, u2_via_spectrum, u_norm,
    GowersError,
};
use arithlab::pretentious::{
    classify, halasz_distance_trace, triangle_residuals, ClassifyOptions, PretentiousError,
};
use arithlab::sets::SetError;
use arithlab::sieve::{FactorTable, SieveError};
use arithlab::structure::{
    decompose, kernel_signal, major_arc_fourier_trace, major_arcs, KernelParams, StructureError,
};

use grammar::{
    default_obs_spec, parse_beta, parse_members, parse_observables, parse_polys, parse_rule,
    parse_set, parse_system, parse_u64, parse_u64_list, WeightSpec,
};
use output::{Cell, Format, Report};

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Format {
        match f {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "arithlab",
    version,
    about = "Numerical experiments on multiplicative weights, uniformity norms, and finite ergodic averages"
)]
struct Cli {
    /// Output format for the artifact file.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Output file; defaults to arithlab_<command>.<ext> under
    /// $ARITHLAB_OUT_DIR (or the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel kernels; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every randomized ingredient (random weights/observables).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor-table summary: prime counts and omega residue densities.
    Sieve {
        /// Table size (supports 2^k syntax).
        #[arg(long)]
        n_max: String,
        /// Moduli for omega residue-class densities.
        #[arg(long, default_value = "2,3,4,5,6")]
        moduli: String,
    },
    /// Gowers norms of a weight: windowed in Z_(factor*N) or fully cyclic.
    Norm {
        /// Weight spec (rule name, set:..., centered:..., ones, random).
        #[arg(long)]
        weight: String,
        #[arg(long, default_value_t = 2)]
        s: u32,
        /// Comma-separated truncation points (2^k allowed).
        #[arg(long)]
        n_list: String,
        /// Cyclic modulus = factor * N on the windowed path.
        #[arg(long, default_value_t = 2)]
        modulus_factor: u64,
        /// Treat the weight as a full cyclic signal of length N.
        #[arg(long)]
        cyclic: bool,
        /// Also compute the spectral U^2 value (requires --cyclic, s = 2).
        #[arg(long)]
        dual: bool,
    },
    /// Centered-indicator uniformity profile of an arithmetic set.
    Profile {
        #[arg(long)]
        set: String,
        #[arg(long, default_value_t = 2)]
        s: u32,
        #[arg(long)]
        n_list: String,
    },
    /// Structured/uniform decomposition of a weight over [1, N].
    Decompose {
        #[arg(long)]
        weight: String,
        #[arg(long)]
        n: String,
        #[arg(long, default_value_t = 2)]
        q: u64,
        #[arg(long, default_value_t = 3)]
        v: u64,
    },
    /// Pretentious distance trace D^2(f, g; P) over prime cutoffs.
    Distance {
        #[arg(long)]
        f: String,
        #[arg(long, default_value = "one")]
        g: String,
        #[arg(long)]
        cutoffs: String,
    },
    /// Pretentiousness / aperiodicity verdict for a multiplicative rule.
    Classify {
        #[arg(long)]
        f: String,
        #[arg(long, allow_hyphen_values = true)]
        t_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        t_max: Option<f64>,
        #[arg(long)]
        t_step: Option<f64>,
        #[arg(long)]
        q_max: Option<u64>,
        #[arg(long)]
        prime_cutoff: Option<String>,
    },
    /// Weighted ergodic averages and their comparison experiments.
    Simulate {
        #[arg(long, value_enum, default_value_t = Experiment::Average)]
        experiment: Experiment,
        /// System spec: rotation:MODS:ROW[;ROW..] or skew:M:A.
        #[arg(long)]
        system: String,
        /// Polynomial exponent matrix, e.g. "n,n^2;2n,n".
        #[arg(long, default_value = "n")]
        polys: String,
        /// Observables (one | random | indicator:... | coord:AXIS:FREQ).
        #[arg(long)]
        obs: Option<String>,
        #[arg(long, default_value = "ones")]
        weight: String,
        /// Arithmetic set for the restricted experiment.
        #[arg(long)]
        set: Option<String>,
        #[arg(long)]
        n_list: String,
        /// Kernel parameters for the structured experiment.
        #[arg(long, default_value_t = 2)]
        q: u64,
        #[arg(long, default_value_t = 3)]
        v: u64,
        /// Gowers degree for the uniformity experiment (defaults by table).
        #[arg(long)]
        s: Option<u32>,
    },
    /// Scan for recurrence times inside an arithmetic set.
    Recurrence {
        #[arg(long)]
        system: String,
        #[arg(long, default_value = "n")]
        polys: String,
        /// Point indices of the base set A.
        #[arg(long)]
        a: String,
        #[arg(long, default_value = "all")]
        set: String,
        #[arg(long)]
        n: String,
        /// Emit every good time instead of the first ten.
        #[arg(long)]
        list_good: bool,
    },
    /// Exact density of points where all linear forms land in a set.
    Density {
        /// Forms as coefficient rows, e.g. "1,1;1,2".
        #[arg(long, allow_hyphen_values = true)]
        forms: String,
        #[arg(long)]
        set: String,
        #[arg(long)]
        n: String,
    },
    /// Depth-first search for IP_k generators inside a set.
    Ipk {
        #[arg(long)]
        set: String,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        bound: String,
    },
    /// First arithmetic progression in E with common difference in S.
    ApSearch {
        #[arg(long)]
        n: String,
        /// Ground set E: all | evens | set:SPEC | list:A+B+C.
        #[arg(long, default_value = "all")]
        members: String,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        set: String,
    },
    /// Numeric checks of the supporting lemmas.
    LemmaCheck {
        #[arg(long, value_enum)]
        lemma: Lemma,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        /// Rational beta as NUM/DEN.
        #[arg(long)]
        beta: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        weight: Option<String>,
        #[arg(long)]
        q: Option<u64>,
        #[arg(long)]
        p: Option<u64>,
        #[arg(long, allow_hyphen_values = true)]
        xi: Option<i64>,
        #[arg(long)]
        n_list: Option<String>,
        #[arg(long)]
        s: Option<u32>,
        #[arg(long)]
        f1: Option<String>,
        #[arg(long)]
        f2: Option<String>,
        #[arg(long)]
        g1: Option<String>,
        #[arg(long)]
        g2: Option<String>,
        #[arg(long)]
        p_cutoff: Option<String>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum Experiment {
    Average,
    Restricted,
    Structured,
    Uniformity,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum Lemma {
    PartialSummation,
    FourierTrace,
    LinfL1,
    Triangle,
}

enum CliError {
    Usage(String),
    Budget(String),
}

impl From<String> for CliError {
    fn from(msg: String) -> Self {
        CliError::Usage(msg)
    }
}

impl From<SieveError> for CliError {
    fn from(e: SieveError) -> Self {
        match e {
            SieveError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SetError> for CliError {
    fn from(e: SetError) -> Self {
        match e {
            SetError::Sieve(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<GowersError> for CliError {
    fn from(e: GowersError) -> Self {
        match e {
            GowersError::DegreeTooLarge { .. } => CliError::Budget(e.to_string()),
            GowersError::Set(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<StructureError> for CliError {
    fn from(e: StructureError) -> Self {
        match e {
            StructureError::Set(inner) => inner.into(),
            StructureError::Sieve(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PretentiousError> for CliError {
    fn from(e: PretentiousError) -> Self {
        match e {
            PretentiousError::Sieve(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ErgodicError> for CliError {
    fn from(e: ErgodicError) -> Self {
        match e {
            ErgodicError::PointBudget { .. } => CliError::Budget(e.to_string()),
            ErgodicError::Set(inner) => inner.into(),
            ErgodicError::Sieve(inner) => inner.into(),
            ErgodicError::Gowers(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<CombinatoricsError> for CliError {
    fn from(e: CombinatoricsError) -> Self {
        match e {
            CombinatoricsError::GridTooLarge { .. } => CliError::Budget(e.to_string()),
            CombinatoricsError::Sieve(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<CharacterError> for CliError {
    fn from(e: CharacterError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<grammar::SystemParseError> for CliError {
    fn from(e: grammar::SystemParseError) -> Self {
        match e {
            grammar::SystemParseError::Grammar(msg) => CliError::Usage(msg),
            grammar::SystemParseError::Build(err) => err.into(),
        }
    }
}

impl From<FourierError> for CliError {
    fn from(e: FourierError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let format: Format = cli.format.into();
    let out_path = resolve_out_path(&cli, format);

    match run(&cli) {
        Ok(mut report) => {
            report.param("seed", cli.seed);
            report.param("format", format.extension());
            if let Err(err) = report.write(&out_path, format) {
                eprintln!("error: cannot write {}: {err}", out_path.display());
                return ExitCode::from(2);
            }
            println!("{}", out_path.display());
            ExitCode::SUCCESS
        }
        Err(CliError::Budget(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Sieve { .. } => "sieve",
        Command::Norm { .. } => "norm",
        Command::Profile { .. } => "profile",
        Command::Decompose { .. } => "decompose",
        Command::Distance { .. } => "distance",
        Command::Classify { .. } => "classify",
        Command::Simulate { .. } => "simulate",
        Command::Recurrence { .. } => "recurrence",
        Command::Density { .. } => "density",
        Command::Ipk { .. } => "ipk",
        Command::ApSearch { .. } => "ap-search",
        Command::LemmaCheck { .. } => "lemma-check",
    }
}

fn resolve_out_path(cli: &Cli, format: Format) -> PathBuf {
    if let Some(path) = &cli.out {
        return path.clone();
    }
    let dir = std::env::var_os("ARITHLAB_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    dir.join(format!(
        "arithlab_{}.{}",
        command_name(&cli.command),
        format.extension()
    ))
}

/// Builds a table that covers `need`, never smaller than a small floor so
/// trivial experiments still construct successfully.
fn build_table(need: u64) -> Result<FactorTable, CliError> {
    Ok(FactorTable::build(need.max(64))?)
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Sieve { n_max, moduli } => run_sieve(n_max, moduli),
        Command::Norm {
            weight,
            s,
            n_list,
            modulus_factor,
            cyclic,
            dual,
        } => run_norm(weight, *s, n_list, *modulus_factor, *cyclic, *dual, cli.seed),
        Command::Profile { set, s, n_list } => run_profile(set, *s, n_list),
        Command::Decompose { weight, n, q, v } => run_decompose(weight, n, *q, *v, cli.seed),
        Command::Distance { f, g, cutoffs } => run_distance(f, g, cutoffs),
        Command::Classify {
            f,
            t_min,
            t_max,
            t_step,
            q_max,
            prime_cutoff,
        } => run_classify(f, *t_min, *t_max, *t_step, *q_max, prime_cutoff.as_deref()),
        Command::Simulate {
            experiment,
            system,
            polys,
            obs,
            weight,
            set,
            n_list,
            q,
            v,
            s,
        } => run_simulate(
            *experiment,
            system,
            polys,
            obs.as_deref(),
            weight,
            set.as_deref(),
            n_list,
            *q,
            *v,
            *s,
            cli.seed,
        ),
        Command::Recurrence {
            system,
            polys,
            a,
            set,
            n,
            list_good,
        } => run_recurrence(system, polys, a, set, n, *list_good),
        Command::Density { forms, set, n } => run_density(forms, set, n),
        Command::Ipk { set, k, bound } => run_ipk(set, *k, bound),
        Command::ApSearch { n, members, k, set } => run_ap_search(n, members, *k, set),
        Command::LemmaCheck { .. } => run_lemma_check(&cli.command, cli.seed),
    }
}

fn run_sieve(n_max: &str, moduli: &str) -> Result<Report, CliError> {
    let n_max = parse_u64(n_max)?;
    let moduli = parse_u64_list(moduli)?;
    if moduli.iter().any(|&b| b == 0 || b > 32) {
        return Err(CliError::Usage("moduli must lie in 1..=32".to_string()));
    }
    let table = build_table(n_max)?;
    let sample = n_max.min(1_000_000).max(1);

    let mut report = Report::new("sieve", &["metric", "a", "b", "value"]);
    report.param("n_max", n_max);
    report.param("moduli", moduli.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(","));
    report.param("sample", sample);

    let prime_count = table.primes().count() as u64;
    report.row(vec!["prime_count".into(), "".into(), "".into(), Cell::Uint(prime_count)]);

    let max_b = *moduli.iter().max().unwrap() as usize;
    let mut counts = vec![vec![0u64; max_b]; moduli.len()];
    let mut squarefree = 0u64;
    for m in 1..=sample {
        let w = table.omega(m)? as usize;
        for (slot, &b) in counts.iter_mut().zip(&moduli) {
            slot[w % b as usize] += 1;
        }
        if table.is_squarefree(m)? {
            squarefree += 1;
        }
    }
    report.row(vec![
        "squarefree_density".into(),
        "".into(),
        "".into(),
        Cell::Float(squarefree as f64 / sample as f64),
    ]);
    for (slot, &b) in counts.iter().zip(&moduli) {
        for a in 0..b {
            report.row(vec![
                "omega_density".into(),
                Cell::Uint(a),
                Cell::Uint(b),
                Cell::Float(slot[a as usize] as f64 / sample as f64),
            ]);
        }
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_norm(
    weight: &str,
    s: u32,
    n_list: &str,
    modulus_factor: u64,
    cyclic: bool,
    dual: bool,
    seed: u64,
) -> Result<Report, CliError> {
    if dual && (!cyclic || s != 2) {
        return Err(CliError::Usage(
            "--dual needs --cyclic and s = 2 (the spectral identity is a U^2 statement)"
                .to_string(),
        ));
    }
    if modulus_factor == 0 {
        return Err(CliError::Usage("--modulus-factor must be positive".to_string()));
    }
    let spec = WeightSpec::parse(weight)?;
    let n_list = parse_u64_list(n_list)?;
    let max_n = *n_list.iter().max().unwrap();
    let table = build_table(spec.table_need(max_n))?;

    let columns: &[&str] = if dual { &["n", "norm", "norm_spectral"] } else { &["n", "norm"] };
    let mut report = Report::new("norm", columns);
    report.param("weight", spec.describe());
    report.param("s", s);
    report.param("n_list", join_u64(&n_list));
    report.param("cyclic", cyclic);
    if !cyclic {
        report.param("modulus_factor", modulus_factor);
    }

    for &n in &n_list {
        let w = spec.realize(&table, n, seed)?;
        if cyclic {
            let signal = CyclicSignal::new(w.values().to_vec())?;
            let norm = u_norm(&signal, s)?;
            if dual {
                report.row(vec![
                    Cell::Uint(n),
                    Cell::Float(norm),
                    Cell::Float(u2_via_spectrum(&signal)),
                ]);
            } else {
                report.row(vec![Cell::Uint(n), Cell::Float(norm)]);
            }
        } else {
            let modulus = modulus_factor
                .checked_mul(n)
                .ok_or_else(|| CliError::Usage("modulus overflows".to_string()))?;
            let norm = restricted_norm(&w, s, modulus)?;
            report.row(vec![Cell::Uint(n), Cell::Float(norm)]);
        }
    }
    Ok(report)
}

fn run_profile(set: &str, s: u32, n_list: &str) -> Result<Report, CliError> {
    let set = parse_set(set)?;
    let n_list = parse_u64_list(n_list)?;
    let max_n = *n_list.iter().max().unwrap();
    let table = build_table(max_n)?;
    let profile = gowers_uniform_profile(&set, s, &n_list, &table)?;

    let mut report = Report::new("profile", &["n", "norm"]);
    report.param("set", set.label());
    report.param("s", s);
    report.param("n_list", join_u64(&n_list));
    for (n, norm) in profile {
        report.row(vec![Cell::Uint(n), Cell::Float(norm)]);
    }
    Ok(report)
}

fn run_decompose(weight: &str, n: &str, q: u64, v: u64, seed: u64) -> Result<Report, CliError> {
    let spec = WeightSpec::parse(weight)?;
    let n = parse_u64(n)?;
    let table = build_table(spec.table_need(n))?;
    let w = spec.realize(&table, n, seed)?;
    let params = KernelParams::new(q, v)?;
    let dec = decompose(&w, &params)?;
    let kernel = kernel_signal(n, &params)?;
    let arcs = major_arcs(n, &params)?;

    let mut report = Report::new("decompose", &["metric", "value"]);
    report.param("weight", spec.describe());
    report.param("n", n);
    report.param("q", q);
    report.param("v", v);
    report.row(vec!["reconstruction_residual".into(), Cell::Float(dec.reconstruction_residual())]);
    report.row(vec!["max_structured".into(), Cell::Float(dec.max_structured_modulus())]);
    report.row(vec!["max_uniform".into(), Cell::Float(dec.max_uniform_modulus())]);
    report.row(vec!["spectral_leakage".into(), Cell::Float(dec.spectral_leakage())]);
    report.row(vec!["arc_count".into(), Cell::Uint(arcs.len() as u64)]);
    report.row(vec!["kernel_min_real".into(), Cell::Float(kernel.min_real)]);
    report.row(vec!["kernel_max_imag".into(), Cell::Float(kernel.max_imag_abs)]);
    Ok(report)
}

fn run_distance(f: &str, g: &str, cutoffs: &str) -> Result<Report, CliError> {
    let f = parse_rule(f)?;
    let g = parse_rule(g)?;
    let cutoffs = parse_u64_list(cutoffs)?;
    let max_p = *cutoffs.iter().max().unwrap();
    let table = build_table(max_p)?;
    let trace = halasz_distance_trace(&f, &g, &cutoffs, &table)?;

    let mut report = Report::new("distance", &["p_cutoff", "distance_sq"]);
    report.param("f", f.label());
    report.param("g", g.label());
    report.param("cutoffs", join_u64(&cutoffs));
    for (p, d2) in trace.cutoffs.iter().zip(&trace.partial_sums) {
        report.row(vec![Cell::Uint(*p), Cell::Float(*d2)]);
    }
    Ok(report)
}

fn run_classify(
    f: &str,
    t_min: Option<f64>,
    t_max: Option<f64>,
    t_step: Option<f64>,
    q_max: Option<u64>,
    prime_cutoff: Option<&str>,
) -> Result<Report, CliError> {
    let rule = parse_rule(f)?;
    let mut options = ClassifyOptions::default();
    if let Some(v) = t_min {
        options.t_min = v;
    }
    if let Some(v) = t_max {
        options.t_max = v;
    }
    if let Some(v) = t_step {
        options.t_step = v;
    }
    if let Some(v) = q_max {
        options.q_max = v;
    }
    if let Some(v) = prime_cutoff {
        options.prime_cutoff = parse_u64(v)?;
    }
    let table = build_table(options.prime_cutoff)?;
    let result = classify(&rule, &table, &options)?;

    let mut report = Report::new("classify", &["metric", "value"]);
    report.param("f", rule.label());
    report.param("t_min", options.t_min);
    report.param("t_max", options.t_max);
    report.param("t_step", options.t_step);
    report.param("q_max", options.q_max);
    report.param("prime_cutoff", options.prime_cutoff);
    report.row(vec!["verdict".into(), result.verdict.to_string().into()]);
    report.row(vec!["min_distance_sq".into(), Cell::Float(result.min_distance_sq)]);
    report.row(vec!["best_t".into(), Cell::Float(result.best_t)]);
    report.row(vec!["best_character".into(), result.best_character.clone().into()]);
    report.row(vec![
        "pretentious_threshold".into(),
        Cell::Float(result.pretentious_threshold),
    ]);
    report.row(vec![
        "divergence_threshold".into(),
        Cell::Float(result.divergence_threshold),
    ]);
    report.row(vec![
        "two_power_condition".into(),
        match result.two_power_condition {
            Some(b) => Cell::Bool(b),
            None => "not-evaluated".into(),
        },
    ]);
    report.row(vec!["grid_points".into(), Cell::Uint(result.grid_points)]);
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_simulate(
    experiment: Experiment,
    system: &str,
    polys: &str,
    obs: Option<&str>,
    weight: &str,
    set: Option<&str>,
    n_list: &str,
    q: u64,
    v: u64,
    s: Option<u32>,
    seed: u64,
) -> Result<Report, CliError> {
    let sys = parse_system(system)?;
    let polys = parse_polys(polys)?;
    let obs_spec = obs
        .map(str::to_string)
        .unwrap_or_else(|| default_obs_spec(&sys));
    let observables = parse_observables(&obs_spec, &sys, polys.num_cols(), seed)?;
    let weight_spec = WeightSpec::parse(weight)?;
    let n_list = parse_u64_list(n_list)?;
    let max_n = *n_list.iter().max().unwrap();

    let mut table_need = weight_spec.table_need(max_n);
    let parsed_set = match (experiment, set) {
        (Experiment::Restricted, Some(spec)) => {
            table_need = table_need.max(max_n);
            Some(parse_set(spec)?)
        }
        (Experiment::Restricted, None) => {
            return Err(CliError::Usage(
                "--experiment restricted needs --set".to_string(),
            ))
        }
        _ => None,
    };
    let table = build_table(table_need)?;

    let mut report = Report::new(
        "simulate",
        match experiment {
            Experiment::Average | Experiment::Structured => {
                &["n", "mean_re", "mean_im", "l2_norm"][..]
            }
            Experiment::Restricted => &["n", "gap"][..],
            Experiment::Uniformity => &["n", "average_l2", "restricted_gowers"][..],
        },
    );
    report.param("experiment", format!("{experiment:?}").to_lowercase());
    report.param("system", system.trim());
    report.param("polys", polys_echo(&polys));
    report.param("obs", obs_spec.trim());
    report.param("n_list", join_u64(&n_list));

    match experiment {
        Experiment::Average => {
            report.param("weight", weight_spec.describe());
            let w = weight_spec.realize(&table, max_n, seed)?;
            for &n in &n_list {
                let avg = weighted_average(&sys, &polys, &observables, &w, n)?;
                report.row(vec![
                    Cell::Uint(n),
                    Cell::Float(avg.mean().re),
                    Cell::Float(avg.mean().im),
                    Cell::Float(avg.l2_norm()),
                ]);
            }
        }
        Experiment::Restricted => {
            let set = parsed_set.unwrap();
            report.param("set", set.label());
            for &n in &n_list {
                let gap = restricted_vs_scaled(&sys, &polys, &observables, &set, &table, n)?;
                report.row(vec![Cell::Uint(n), Cell::Float(gap)]);
            }
        }
        Experiment::Structured => {
            report.param("weight", weight_spec.describe());
            report.param("q", q);
            report.param("v", v);
            let w = weight_spec.realize(&table, max_n, seed)?;
            let dec = decompose(&w, &KernelParams::new(q, v)?)?;
            let trace = structured_weight_average(&sys, &polys, &observables, &dec, &n_list)?;
            for (&n, avg) in trace.n_list().iter().zip(trace.averages()) {
                report.row(vec![
                    Cell::Uint(n),
                    Cell::Float(avg.mean().re),
                    Cell::Float(avg.mean().im),
                    Cell::Float(avg.l2_norm()),
                ]);
            }
        }
        Experiment::Uniformity => {
            report.param("weight", weight_spec.describe());
            let degree = s.unwrap_or_else(|| default_uniformity_degree(&polys));
            report.param("s", degree);
            let w = weight_spec.realize(&table, max_n, seed)?;
            for &n in &n_list {
                let (lhs, rhs) =
                    uniformity_bound_experiment(&sys, &polys, &observables, &w, degree, n)?;
                report.row(vec![Cell::Uint(n), Cell::Float(lhs), Cell::Float(rhs)]);
            }
        }
    }
    Ok(report)
}

fn run_recurrence(
    system: &str,
    polys: &str,
    a: &str,
    set: &str,
    n: &str,
    list_good: bool,
) -> Result<Report, CliError> {
    let sys = parse_system(system)?;
    let polys = parse_polys(polys)?;
    let a_points: Vec<usize> = parse_u64_list(a)?.into_iter().map(|p| p as usize).collect();
    let set = parse_set(set)?;
    let n = parse_u64(n)?;
    let table = build_table(n)?;
    let scan = recurrence_scan(&sys, &polys, &a_points, &set, &table, n)?;

    let mut report = Report::new("recurrence", &["metric", "value"]);
    report.param("system", system.trim());
    report.param("polys", polys_echo(&polys));
    report.param("a", a.trim());
    report.param("set", set.label());
    report.param("n", n);
    report.row(vec!["base_measure".into(), Cell::Float(scan.base_measure())]);
    report.row(vec!["good_count".into(), Cell::Uint(scan.good().len() as u64)]);
    report.row(vec!["density".into(), Cell::Float(scan.density())]);
    report.row(vec!["lower_density".into(), Cell::Float(scan.lower_density())]);
    let shown: &[u64] = if list_good {
        scan.good()
    } else {
        &scan.good()[..scan.good().len().min(10)]
    };
    for (i, &g) in shown.iter().enumerate() {
        report.row(vec![format!("good_{i}").into(), Cell::Uint(g)]);
    }
    Ok(report)
}

fn run_density(forms: &str, set: &str, n: &str) -> Result<Report, CliError> {
    let rows: Vec<Vec<i64>> = forms
        .split(';')
        .map(grammar::parse_i64_list)
        .collect::<Result<Vec<_>, _>>()?;
    let arity = rows.first().map(|r| r.len()).unwrap_or(0);
    let system = LinearFormSystem::new(arity, rows).map_err(CliError::from)?;
    let set = parse_set(set)?;
    let n = parse_u64(n)?;

    // The table must cover the largest positive value any form reaches.
    let need = system
        .forms()
        .iter()
        .map(|form| {
            form.iter()
                .map(|&c| (c as i128 * n as i128).max(c as i128))
                .sum::<i128>()
                .max(0) as u64
        })
        .max()
        .unwrap_or(0)
        .max(n);
    let table = build_table(need)?;
    let density = linear_forms_density(&system, &set, &table, n)?;

    let mut report = Report::new("density", &["n", "density"]);
    report.param("forms", forms.trim());
    report.param("set", set.label());
    report.param("arity", system.arity() as u64);
    report.param("num_forms", system.num_forms() as u64);
    report.row(vec![Cell::Uint(n), Cell::Float(density)]);
    Ok(report)
}

fn run_ipk(set: &str, k: u32, bound: &str) -> Result<Report, CliError> {
    let set = parse_set(set)?;
    let bound = parse_u64(bound)?;
    let need = bound.saturating_mul(k.max(1) as u64);
    let table = build_table(need)?;
    let witness = find_ipk(&set, k, bound, &table)?;

    let mut report = Report::new("ipk", &["metric", "value"]);
    report.param("set", set.label());
    report.param("k", k);
    report.param("bound", bound);
    match witness {
        Some(generators) => {
            let validated = validate_ipk(&set, &generators, &table)?;
            report.row(vec!["found".into(), Cell::Bool(true)]);
            report.row(vec![
                "generators".into(),
                generators
                    .iter()
                    .map(|g| g.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
                    .into(),
            ]);
            report.row(vec!["validated".into(), Cell::Bool(validated)]);
        }
        None => {
            report.row(vec!["found".into(), Cell::Bool(false)]);
        }
    }
    Ok(report)
}

fn run_ap_search(n: &str, members: &str, k: u32, set: &str) -> Result<Report, CliError> {
    let n = parse_u64(n)?;
    let set = parse_set(set)?;
    let table = build_table(n)?;
    let member_mask = parse_members(members, n, &table)?;
    let result = arithlab::combinatorics::ap_search(&member_mask, k, &set, &table)?;

    let mut report = Report::new("ap-search", &["metric", "value"]);
    report.param("n", n);
    report.param("members", members.trim());
    report.param("k", k);
    report.param("set", set.label());
    match result {
        Some((start, diff)) => {
            report.row(vec!["found".into(), Cell::Bool(true)]);
            report.row(vec!["start".into(), Cell::Uint(start)]);
            report.row(vec!["difference".into(), Cell::Uint(diff)]);
            let in_e = (0..k as u64).all(|j| member_mask[(start + j * diff - 1) as usize]);
            let diff_in_s = set.indicator(&table, diff)?;
            report.row(vec!["validated".into(), Cell::Bool(in_e && diff_in_s)]);
        }
        None => {
            report.row(vec!["found".into(), Cell::Bool(false)]);
        }
    }
    Ok(report)
}

fn run_lemma_check(command: &Command, seed: u64) -> Result<Report, CliError> {
    let Command::LemmaCheck {
        lemma,
        alpha,
        beta,
        n,
        weight,
        q,
        p,
        xi,
        n_list,
        s,
        f1,
        f2,
        g1,
        g2,
        p_cutoff,
    } = command
    else {
        unreachable!("dispatched from run");
    };
    let mut report = Report::new("lemma-check", &["metric", "value"]);
    match lemma {
        Lemma::PartialSummation => {
            let alpha = alpha.ok_or_else(|| missing("--alpha"))?;
            let (num, den) = parse_beta(beta.as_deref().ok_or_else(|| missing("--beta"))?)?;
            let n = parse_u64(n.as_deref().ok_or_else(|| missing("--n"))?)?;
            let (mean, predicted) = partial_summation_check(alpha, num, den, n)?;
            report.param("lemma", "partial-summation");
            report.param("alpha", alpha);
            report.param("beta", format!("{num}/{den}"));
            report.param("n", n);
            report.row(vec!["mean_re".into(), Cell::Float(mean.re)]);
            report.row(vec!["mean_im".into(), Cell::Float(mean.im)]);
            report.row(vec!["predicted_re".into(), Cell::Float(predicted.re)]);
            report.row(vec!["predicted_im".into(), Cell::Float(predicted.im)]);
            report.row(vec!["deviation".into(), Cell::Float((mean - predicted).norm())]);
        }
        Lemma::FourierTrace => {
            let rule = parse_rule(weight.as_deref().ok_or_else(|| missing("--weight"))?)?;
            let q = q.ok_or_else(|| missing("--q"))?;
            let p = p.ok_or_else(|| missing("--p"))?;
            let xi = xi.ok_or_else(|| missing("--xi"))?;
            let n_list = parse_u64_list(n_list.as_deref().ok_or_else(|| missing("--n-list"))?)?;
            let table = build_table(*n_list.iter().max().unwrap())?;
            let trace = major_arc_fourier_trace(&rule, q, p, xi, &n_list, &table)?;
            report = Report::new("lemma-check", &["n", "value_re", "value_im", "value_abs"]);
            report.param("lemma", "fourier-trace");
            report.param("weight", rule.label());
            report.param("q", q);
            report.param("p", p);
            report.param("xi", xi);
            report.param("n_list", join_u64(&n_list));
            for (n, value) in trace {
                report.row(vec![
                    Cell::Uint(n),
                    Cell::Float(value.re),
                    Cell::Float(value.im),
                    Cell::Float(value.norm()),
                ]);
            }
        }
        Lemma::LinfL1 => {
            let spec = WeightSpec::parse(weight.as_deref().ok_or_else(|| missing("--weight"))?)?;
            let n = parse_u64(n.as_deref().ok_or_else(|| missing("--n"))?)?;
            let s = s.ok_or_else(|| missing("--s"))?;
            let table = build_table(spec.table_need(n))?;
            let w = spec.realize(&table, n, seed)?;
            let signal = CyclicSignal::new(w.values().to_vec())?;
            let (lhs, rhs) = linf_l1_bound_check(&signal, s)?;
            report.param("lemma", "linf-l1");
            report.param("weight", spec.describe());
            report.param("n", n);
            report.param("s", s);
            report.row(vec!["norm_power".into(), Cell::Float(lhs)]);
            report.row(vec!["linf_l1_bound".into(), Cell::Float(rhs)]);
            report.row(vec!["holds".into(), Cell::Bool(lhs <= rhs + 1e-12)]);
        }
        Lemma::Triangle => {
            let f1 = parse_rule(f1.as_deref().ok_or_else(|| missing("--f1"))?)?;
            let f2 = parse_rule(f2.as_deref().ok_or_else(|| missing("--f2"))?)?;
            let g1 = parse_rule(g1.as_deref().ok_or_else(|| missing("--g1"))?)?;
            let g2 = parse_rule(g2.as_deref().ok_or_else(|| missing("--g2"))?)?;
            let p_cutoff = parse_u64(p_cutoff.as_deref().ok_or_else(|| missing("--p-cutoff"))?)?;
            let table = build_table(p_cutoff)?;
            let (lhs, rhs) = triangle_residuals(&f1, &f2, &g1, &g2, p_cutoff, &table)?;
            report.param("lemma", "triangle");
            report.param("f1", f1.label());
            report.param("f2", f2.label());
            report.param("g1", g1.label());
            report.param("g2", g2.label());
            report.param("p_cutoff", p_cutoff);
            report.row(vec!["product_distance".into(), Cell::Float(lhs)]);
            report.row(vec!["distance_sum".into(), Cell::Float(rhs)]);
            report.row(vec!["holds".into(), Cell::Bool(lhs <= rhs + 1e-9)]);
        }
    }
    Ok(report)
}

fn polys_echo(polys: &arithlab::ergodic::PolynomialMatrix) -> String {
    (0..polys.num_rows())
        .map(|i| {
            (0..polys.num_cols())
                .map(|j| {
                    let coeffs = polys.get(i, j).coefficients();
                    if coeffs.is_empty() {
                        "0".to_string()
                    } else {
                        coeffs
                            .iter()
                            .enumerate()
                            .map(|(d, c)| format!("{c}n^{d}"))
                            .collect::<Vec<_>>()
                            .join("+")
                    }
                })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn join_u64(list: &[u64]) -> String {
    list.iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn missing(flag: &str) -> CliError {
    CliError::Usage(format!("{flag} is required for this lemma"))
}
