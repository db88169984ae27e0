//! Command-line front end: game ingestion, equilibrium analysis, stochastic
//! and ODE simulation drivers, and figure-data exporters.
//!
//! Exit codes: 0 success, 2 malformed game file or arguments, 3 solver
//! pathology, 4 heteroclinic tracing requested on a game that is not in the
//! three-equilibrium case.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use routing_dynamics::game::uniqueness_bound;
use routing_dynamics::mean_field::{find_rest_points, integrate, TerminalFlag};
use routing_dynamics::stability::analyze_rest_point;
use routing_dynamics::stochastic::{empirical_limit_classification, simulate, StepSchedule};
use routing_dynamics::two_by_two::{
    enumerate_fixed_points, heteroclinic_trace, reduce, symmetric_analysis, symmetric_boundary,
    synthesize_symmetric_game, FixedPointCase, PointStability,
};
use routing_dynamics::{EstimateProfile, TrafficGame};

const EXIT_BAD_INPUT: u8 = 2;
const EXIT_PATHOLOGY: u8 = 3;
const EXIT_NOT_CASE_C: u8 = 4;

#[derive(Parser)]
#[command(
    name = "routing-dynamics",
    about = "Adaptive learning dynamics in congestion games: equilibria, stability, simulation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the game JSON file
    #[arg(long)]
    game: PathBuf,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Convergence tolerance override
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate rest points and classify their stability
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of solver starts on the general (non-2x2) path
        #[arg(long, default_value_t = 200)]
        starts: usize,
    },
    /// Run the discrete stochastic learning process
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of days to simulate
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        /// Step-size schedule: harmonic:a,b or power:a,b,p
        #[arg(long, default_value = "harmonic:1,1")]
        schedule: String,
        /// Independent replications (seeds seed..seed+K-1)
        #[arg(long, default_value_t = 1)]
        replications: usize,
        /// Initial estimates, comma separated (defaults to all zeros)
        #[arg(long)]
        x0: Option<String>,
        /// Classification radius around rest points
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        /// Write snapshot CSV here (single replication only)
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Integrate the mean-field ODE and write the trajectory as CSV
    Ode {
        #[command(flatten)]
        common: CommonArgs,
        /// Initial estimates, comma separated
        #[arg(long, conflicts_with = "random_x0")]
        x0: Option<String>,
        /// Draw the initial estimates at random
        #[arg(long)]
        random_x0: bool,
        #[arg(long, default_value_t = 1e4)]
        t_max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Record every n-th integration step
        #[arg(long, default_value_t = 100)]
        stride: usize,
    },
    /// Scan a stability region and emit CSV data
    Region {
        /// Path to the game JSON file (fig1 mode only)
        #[arg(long)]
        game: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: RegionMode,
        /// Grid resolution, e.g. 101x101
        #[arg(long, default_value = "101x101")]
        grid: String,
        /// mu range a:b (fig4)
        #[arg(long, default_value = "1:12")]
        mu_range: String,
        /// q range a:b (fig4)
        #[arg(long, default_value = "-1.5:1.5", allow_hyphen_values = true)]
        q_range: String,
    },
    /// Trace the two heteroclinic orbits of a three-equilibrium game
    Heteroclinic {
        #[command(flatten)]
        common: CommonArgs,
        /// Perturbation size along the unstable eigenvector
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionMode {
    Fig1,
    Fig4,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze { common, starts } => cmd_analyze(&common, starts),
        Command::Simulate {
            common,
            steps,
            schedule,
            replications,
            x0,
            radius,
            snapshots,
        } => cmd_simulate(&common, steps, &schedule, replications, x0.as_deref(), radius, snapshots),
        Command::Ode {
            common,
            x0,
            random_x0,
            t_max,
            step,
            stride,
        } => cmd_ode(&common, x0.as_deref(), random_x0, t_max, step, stride),
        Command::Region {
            game,
            out,
            mode,
            grid,
            mu_range,
            q_range,
        } => cmd_region(game, out, mode, &grid, &mu_range, &q_range),
        Command::Heteroclinic { common, epsilon } => cmd_heteroclinic(&common, epsilon),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

fn bad_input(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_BAD_INPUT,
        message: message.into(),
    }
}

fn pathology(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_PATHOLOGY,
        message: message.into(),
    }
}

fn load_game(path: &PathBuf) -> Result<TrafficGame, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| bad_input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| bad_input(format!("malformed game file {}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| pathology(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn parse_profile(game: &TrafficGame, text: &str) -> Result<EstimateProfile, CliError> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|v| v.trim().parse()).collect();
    let values = values.map_err(|e| bad_input(format!("bad x0 value: {e}")))?;
    EstimateProfile::new(game.num_players(), game.num_routes(), values)
        .map_err(|e| bad_input(e.to_string()))
}

fn random_profile(game: &TrafficGame, rng: &mut ChaCha12Rng) -> EstimateProfile {
    let mut x = EstimateProfile::zeros(game.num_players(), game.num_routes());
    for i in 0..game.num_players() {
        for r in 0..game.num_routes() {
            x.set(i, r, rng.gen_range(game.min_cost(r) - 1.0..game.max_cost(r) + 1.0));
        }
    }
    x
}

#[derive(Serialize)]
struct AnalyzePoint2x2 {
    w1: f64,
    w2: f64,
    psi_prime: f64,
    x: EstimateProfile,
    a2: f64,
    a3: f64,
    a4: f64,
    stable: bool,
    marginal: bool,
}

#[derive(Serialize)]
struct Analyze2x2Output {
    case: FixedPointCase,
    points: Vec<AnalyzePoint2x2>,
    uniqueness_product: f64,
    unique_guaranteed: bool,
}

fn cmd_analyze(common: &CommonArgs, starts: usize) -> Result<(), CliError> {
    let game = load_game(&common.game)?;
    let bound = uniqueness_bound(&game);
    let content = if game.is_two_by_two() {
        let red = reduce(&game).map_err(|e| pathology(e.to_string()))?;
        let report = enumerate_fixed_points(&red).map_err(|e| pathology(e.to_string()))?;
        let output = Analyze2x2Output {
            case: report.case,
            points: report
                .points
                .iter()
                .map(|p| AnalyzePoint2x2 {
                    w1: p.w1,
                    w2: p.w2,
                    psi_prime: p.psi_prime,
                    x: p.x.clone(),
                    a2: p.a2,
                    a3: p.a3,
                    a4: p.a4,
                    stable: p.stability == PointStability::Stable,
                    marginal: p.stability == PointStability::Marginal,
                })
                .collect(),
            uniqueness_product: bound.product,
            unique_guaranteed: bound.unique_guaranteed,
        };
        serde_json::to_string_pretty(&output).expect("serialize")
    } else {
        let points = find_rest_points(&game, starts, common.seed);
        if points.is_empty() {
            return Err(pathology("no rest points found from any start"));
        }
        let reports: Result<Vec<_>, _> = points
            .iter()
            .map(|p| analyze_rest_point(&game, p))
            .collect();
        let reports = reports.map_err(|e| pathology(e.to_string()))?;
        serde_json::to_string_pretty(&reports).expect("serialize")
    };
    emit(&common.out, &(content + "\n"))
}

fn parse_schedule(text: &str) -> Result<StepSchedule, CliError> {
    let (kind, params) = text
        .split_once(':')
        .ok_or_else(|| bad_input(format!("bad schedule '{text}', expected kind:params")))?;
    let values: Result<Vec<f64>, _> = params.split(',').map(|v| v.trim().parse()).collect();
    let values = values.map_err(|e| bad_input(format!("bad schedule parameter: {e}")))?;
    let schedule = match (kind, values.as_slice()) {
        ("harmonic", [a, b]) => StepSchedule::Harmonic { a: *a, b: *b },
        ("power", [a, b, p]) => StepSchedule::Power {
            a: *a,
            b: *b,
            p: *p,
        },
        _ => return Err(bad_input(format!("bad schedule '{text}'"))),
    };
    schedule.validate().map_err(|e| bad_input(e.to_string()))?;
    Ok(schedule)
}

#[derive(Serialize)]
struct SimulationOutput {
    seed: u64,
    steps: usize,
    final_state: EstimateProfile,
    classified_limit: Option<usize>,
    route_counts: Vec<Vec<u64>>,
}

fn rest_point_profiles(game: &TrafficGame, seed: u64) -> Result<Vec<routing_dynamics::RestPoint>, CliError> {
    if game.is_two_by_two() {
        let red = reduce(game).map_err(|e| pathology(e.to_string()))?;
        let report = enumerate_fixed_points(&red).map_err(|e| pathology(e.to_string()))?;
        Ok(report
            .points
            .into_iter()
            .map(|p| routing_dynamics::RestPoint {
                residual: 0.0,
                x: p.x,
            })
            .collect())
    } else {
        Ok(find_rest_points(game, 200, seed))
    }
}

fn cmd_simulate(
    common: &CommonArgs,
    steps: usize,
    schedule: &str,
    replications: usize,
    x0: Option<&str>,
    radius: f64,
    snapshots: Option<PathBuf>,
) -> Result<(), CliError> {
    let game = load_game(&common.game)?;
    let schedule = parse_schedule(schedule)?;
    if replications < 1 {
        return Err(bad_input("replications must be >= 1"));
    }
    let x0 = match x0 {
        Some(text) => parse_profile(&game, text)?,
        None => EstimateProfile::zeros(game.num_players(), game.num_routes()),
    };
    let rest_points = rest_point_profiles(&game, common.seed)?;
    let mut outputs = Vec::with_capacity(replications);
    for k in 0..replications {
        let seed = common.seed + k as u64;
        let keep = snapshots.is_some() && replications == 1;
        let run = simulate(&game, &x0, &schedule, steps, seed, keep)
            .map_err(|e| bad_input(e.to_string()))?;
        let classified_limit = empirical_limit_classification(&run, &rest_points, radius)
            .map_err(|e| pathology(e.to_string()))?;
        if let (Some(path), Some(snaps)) = (&snapshots, &run.snapshots) {
            let mut csv = String::from("t");
            for i in 0..game.num_players() {
                for r in 0..game.num_routes() {
                    csv.push_str(&format!(",x_{}_{}", i + 1, r + 1));
                }
            }
            csv.push('\n');
            for (step, state) in snaps {
                csv.push_str(&format!("{step}"));
                for v in state.as_slice() {
                    csv.push_str(&format!(",{v}"));
                }
                csv.push('\n');
            }
            fs::write(path, csv)
                .map_err(|e| pathology(format!("cannot write {}: {e}", path.display())))?;
        }
        outputs.push(SimulationOutput {
            seed,
            steps,
            final_state: run.final_state,
            classified_limit,
            route_counts: run.route_counts,
        });
    }
    let content = serde_json::to_string_pretty(&outputs).expect("serialize");
    emit(&common.out, &(content + "\n"))
}

#[derive(Serialize)]
struct OdeSummary {
    terminal_flag: TerminalFlag,
    t_final: f64,
    final_state: EstimateProfile,
}

fn cmd_ode(
    common: &CommonArgs,
    x0: Option<&str>,
    random_x0: bool,
    t_max: f64,
    step: f64,
    stride: usize,
) -> Result<(), CliError> {
    let game = load_game(&common.game)?;
    let x0 = match (x0, random_x0) {
        (Some(text), _) => parse_profile(&game, text)?,
        (None, true) => {
            let mut rng = ChaCha12Rng::seed_from_u64(common.seed);
            random_profile(&game, &mut rng)
        }
        (None, false) => return Err(bad_input("provide --x0 or --random-x0")),
    };
    if step <= 0.0 || t_max <= 0.0 {
        return Err(bad_input("step and t-max must be positive"));
    }
    let traj = integrate(&game, &x0, step, t_max, common.tol, stride);
    let summary = OdeSummary {
        terminal_flag: traj.terminal_flag,
        t_final: *traj.times.last().unwrap(),
        final_state: traj.final_state().clone(),
    };
    emit(&common.out, &traj.to_csv())?;
    if common.out.is_some() {
        println!("{}", serde_json::to_string(&summary).expect("serialize"));
    } else {
        eprintln!("{}", serde_json::to_string(&summary).expect("serialize"));
    }
    Ok(())
}

fn parse_grid(text: &str) -> Result<(usize, usize), CliError> {
    let (a, b) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| bad_input(format!("bad grid '{text}', expected NxM")))?;
    let rows = a.trim().parse().map_err(|e| bad_input(format!("bad grid: {e}")))?;
    let cols = b.trim().parse().map_err(|e| bad_input(format!("bad grid: {e}")))?;
    if rows < 2 || cols < 2 {
        return Err(bad_input("grid resolution must be at least 2x2"));
    }
    Ok((rows, cols))
}

fn parse_range(text: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| bad_input(format!("bad range '{text}', expected a:b")))?;
    let lo = a.trim().parse().map_err(|e| bad_input(format!("bad range: {e}")))?;
    let hi = b.trim().parse().map_err(|e| bad_input(format!("bad range: {e}")))?;
    if !(lo < hi) {
        return Err(bad_input(format!("empty range '{text}'")));
    }
    Ok((lo, hi))
}

fn cmd_region(
    game: Option<PathBuf>,
    out: Option<PathBuf>,
    mode: RegionMode,
    grid: &str,
    mu_range: &str,
    q_range: &str,
) -> Result<(), CliError> {
    let (rows, cols) = parse_grid(grid)?;
    let content = match mode {
        RegionMode::Fig1 => {
            let game_path = game.ok_or_else(|| bad_input("--game is required for fig1"))?;
            let game = load_game(&game_path)?;
            let red = reduce(&game).map_err(|e| bad_input(e.to_string()))?;
            let nu_delta_sq = red.nu * red.delta * red.delta;
            let mut csv = String::from("pi_1a,pi_2a,f,stable\n");
            for i in 1..=rows {
                for j in 1..=cols {
                    let x = i as f64 / (rows + 1) as f64;
                    let y = j as f64 / (cols + 1) as f64;
                    let f = x * (1.0 - x) * y * (1.0 - y);
                    let stable = if nu_delta_sq > 0.0 {
                        u8::from(f < 1.0 / nu_delta_sq)
                    } else {
                        1
                    };
                    csv.push_str(&format!("{x},{y},{f},{stable}\n"));
                }
            }
            csv
        }
        RegionMode::Fig4 => {
            let (mu_lo, mu_hi) = parse_range(mu_range)?;
            let (q_lo, q_hi) = parse_range(q_range)?;
            let mut csv = String::from("mu,q,num_equilibria,psi_prime_at_symmetric,h_boundary\n");
            for i in 0..rows {
                for j in 0..cols {
                    let mu = mu_lo + (mu_hi - mu_lo) * i as f64 / (rows - 1) as f64;
                    let q = q_lo + (q_hi - q_lo) * j as f64 / (cols - 1) as f64;
                    let game = synthesize_symmetric_game(mu, q)
                        .map_err(|e| bad_input(e.to_string()))?;
                    let red = reduce(&game).map_err(|e| pathology(e.to_string()))?;
                    let rep = symmetric_analysis(&red).map_err(|e| pathology(e.to_string()))?;
                    let boundary = symmetric_boundary(mu).map(|h| h.to_string()).unwrap_or_default();
                    csv.push_str(&format!(
                        "{mu},{q},{},{},{boundary}\n",
                        rep.report.points.len(),
                        rep.psi_prime_at_w_bar
                    ));
                }
            }
            csv
        }
    };
    emit(&out, &content)
}

#[derive(Serialize)]
struct MonotonicityAudit {
    pairs_checked: usize,
    violations: usize,
    s_sign: [i8; 4],
}

fn cmd_heteroclinic(common: &CommonArgs, epsilon: f64) -> Result<(), CliError> {
    let game = load_game(&common.game)?;
    let not_case_c = |message: String| CliError {
        code: EXIT_NOT_CASE_C,
        message,
    };
    let red = reduce(&game).map_err(|e| not_case_c(e.to_string()))?;
    let report = enumerate_fixed_points(&red).map_err(|e| pathology(e.to_string()))?;
    if report.case != FixedPointCase::C {
        return Err(not_case_c(format!(
            "game is in case ({}), heteroclinic orbits need case (c)",
            report.case.letter()
        )));
    }
    let (plus, minus) = heteroclinic_trace(&game, &report, epsilon)
        .map_err(|e| pathology(e.to_string()))?;
    let prefix = common
        .out
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "heteroclinic".to_string());
    fs::write(format!("{prefix}_plus.csv"), plus.to_csv())
        .map_err(|e| pathology(format!("cannot write orbit: {e}")))?;
    fs::write(format!("{prefix}_minus.csv"), minus.to_csv())
        .map_err(|e| pathology(format!("cannot write orbit: {e}")))?;
    let mut pairs_checked = 0;
    let mut violations = 0;
    let sign = routing_dynamics::mean_field::SIGN_2X2;
    for traj in [&plus, &minus] {
        let increasing = std::ptr::eq(traj, &plus);
        for a in 0..traj.states.len() {
            for b in (a + 1)..traj.states.len() {
                pairs_checked += 1;
                let ordered = if increasing {
                    routing_dynamics::mean_field::order_leq_s(&traj.states[a], &traj.states[b], &sign)
                } else {
                    routing_dynamics::mean_field::order_leq_s(&traj.states[b], &traj.states[a], &sign)
                };
                if !ordered.unwrap_or(false) {
                    violations += 1;
                }
            }
        }
    }
    let audit = MonotonicityAudit {
        pairs_checked,
        violations,
        s_sign: sign,
    };
    println!("{}", serde_json::to_string_pretty(&audit).expect("serialize"));
    if violations > 0 {
        return Err(pathology(format!("{violations} monotonicity violations")));
    }
    Ok(())
}
