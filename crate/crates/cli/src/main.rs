use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use invmargin::fixtures::{goldens, random_instance};
use invmargin::instance::{load_instance, load_solution, save_solution, Instance, Kind, Structure};
use invmargin::inverse::OptSense;
use invmargin::learn::{load_stream, save_log, train_epochs, Loss, RoundStatus};
use invmargin::oracle::{oracle_objective, verify_delta_optimal, verify_with, Semantics};
use invmargin::qp::QpSettings;
use invmargin::Error;

#[derive(Parser)]
#[command(name = "invmargin", version, about = "Margin-constrained inverse optimization")]
struct Cli {
    /// Absolute and relative QP tolerance.
    #[arg(long, global = true)]
    qp_tol: Option<f64>,
    #[arg(long, global = true)]
    qp_max_iters: Option<usize>,
    /// Seed for the randomized instances of `selftest`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// TOML file with a `[qp]` table of solver settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SenseArg {
    Max,
    Min,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the inverse problem and write a solution document.
    Inverse {
        kind: Kind,
        #[arg(long)]
        input: PathBuf,
        /// Margin; defaults to the one in the instance document.
        #[arg(long)]
        delta: Option<f64>,
        /// Objective sense of an arborescence instance.
        #[arg(long, value_enum)]
        sense: Option<SenseArg>,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check by enumeration that the designated solution wins by the margin.
    Verify {
        #[arg(long)]
        input: PathBuf,
        /// Solution document or bare JSON array of weights.
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Print the objective of the enumerated-competitor program.
    Oracle {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the online learner over a JSON-lines example stream.
    Train {
        #[arg(long)]
        stream: PathBuf,
        #[arg(long, default_value_t = Loss::Hamming)]
        loss: Loss,
        #[arg(long)]
        log: PathBuf,
        /// Passes over the stream; stops early after a pass without updates.
        #[arg(long, default_value_t = 1)]
        epochs: usize,
    },
    /// Solve the closed-form cases and a batch of random instances.
    Selftest,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    #[serde(default)]
    qp: QpSettings,
}

enum Failure {
    Input(String),
    Solver(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver(_) | Error::Infeasible(_) => Failure::Solver(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    fs::write(path, bytes).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn settings(cli: &Cli) -> Result<QpSettings, Failure> {
    let mut s = match &cli.config {
        Some(path) => {
            let text = String::from_utf8(read(path)?).map_err(|e| Failure::Input(e.to_string()))?;
            toml::from_str::<Config>(&text).map_err(|e| Failure::Input(format!("bad config: {e}")))?.qp
        }
        None => QpSettings::default(),
    };
    if let Some(tol) = cli.qp_tol {
        if tol.is_nan() || tol <= 0.0 {
            return Err(Failure::Input(format!("--qp-tol must be positive, got {tol}")));
        }
        s.eps_abs = tol;
        s.eps_rel = tol;
    }
    if let Some(iters) = cli.qp_max_iters {
        s.max_iter = iters;
    }
    Ok(s)
}

fn load(path: &Path) -> Result<Instance, Failure> {
    Ok(load_instance(&read(path)?)?)
}

fn inverse(
    cli: &Cli,
    kind: Kind,
    input: &Path,
    delta: Option<f64>,
    sense: Option<SenseArg>,
    output: Option<&Path>,
) -> Outcome {
    let mut inst = load(input)?;
    if inst.kind() != kind {
        return Err(Failure::Input(format!("input is a {} instance, not {kind}", inst.kind())));
    }
    if let Some(sense) = sense {
        let sense = match sense {
            SenseArg::Max => OptSense::Max,
            SenseArg::Min => OptSense::Min,
        };
        let fixed = inst.sense();
        match &mut inst.structure {
            Structure::Arborescence { sense: s, .. } => *s = sense,
            _ if fixed == sense => {}
            _ => return Err(Failure::Input(format!("{kind} instances only support the {fixed:?} sense"))),
        }
    }
    if let Some(delta) = delta {
        inst = inst.with_delta(delta)?;
    }
    inst.validate()?;
    let sol = inst.solve(&settings(cli)?)?;
    let bytes = save_solution(&inst, &sol);
    match output {
        Some(path) => write(path, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    if !sol.is_optimal() {
        return Err(Failure::Solver(format!("solver ended with status {}", sol.status.as_str())));
    }
    Ok(())
}

fn weights_from(bytes: &[u8]) -> Result<Vec<f64>, Failure> {
    if let Ok(w) = serde_json::from_slice::<Vec<f64>>(bytes) {
        return Ok(w);
    }
    let doc = load_solution(bytes)?;
    doc.weights.ok_or_else(|| Failure::Input(format!("solution document has status {}", doc.status.as_str())))
}

#[derive(Serialize)]
struct VerdictDoc {
    ok: bool,
    /// `null` when there is no competitor.
    margin: Option<f64>,
    worst_competitor: Option<Vec<usize>>,
}

fn verify(input: &Path, weights: &Path, tol: f64) -> Outcome {
    let inst = load(input)?;
    let w = weights_from(&read(weights)?)?;
    let v = verify_delta_optimal(&inst, &w, tol)?;
    let doc =
        VerdictDoc { ok: v.ok, margin: v.margin.is_finite().then_some(v.margin), worst_competitor: v.worst_competitor };
    println!("{}", serde_json::to_string_pretty(&doc).expect("verdicts serialize"));
    if v.ok {
        Ok(())
    } else {
        Err(Failure::Verification(format!("margin {} is below delta {}", v.margin, inst.delta)))
    }
}

fn oracle(cli: &Cli, input: &Path) -> Outcome {
    let inst = load(input)?;
    let obj = oracle_objective(&inst, &settings(cli)?)?;
    println!("{}", serde_json::to_string(&obj).expect("numbers serialize"));
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    theta: Vec<f64>,
    rounds: usize,
    updates: usize,
    flagged: usize,
    cumulative_loss: f64,
    cumulative_hinge: f64,
}

fn train(cli: &Cli, stream: &Path, loss: Loss, log: &Path, epochs: usize) -> Outcome {
    let text = String::from_utf8(read(stream)?).map_err(|e| Failure::Input(e.to_string()))?;
    let examples = load_stream(&text)?;
    if examples.is_empty() {
        return Err(Failure::Input("stream has no examples".into()));
    }
    let (model, records) = train_epochs(&examples, loss, &settings(cli)?, epochs.max(1))?;
    write(log, save_log(&records).as_bytes())?;
    let summary = TrainSummary {
        theta: model.theta,
        rounds: records.len(),
        updates: records.iter().filter(|r| r.status != RoundStatus::Skipped).count(),
        flagged: records.iter().filter(|r| r.flagged).count(),
        cumulative_loss: records.iter().map(|r| r.loss).sum(),
        cumulative_hinge: records.iter().map(|r| r.hinge).sum(),
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("summaries serialize"));
    Ok(())
}

const SELFTEST_PER_KIND: usize = 5;

fn selftest(cli: &Cli) -> Outcome {
    let s = settings(cli)?;
    let mut failed = 0;
    for g in goldens() {
        let sol = g.instance.solve(&s)?;
        let ok = sol.is_optimal()
            && (sol.objective - g.objective).abs() <= 1e-6
            && sol.weights.iter().zip(&g.weights).all(|(a, b)| (a - b).abs() <= 1e-6);
        println!("{} {}: objective {}", if ok { "ok  " } else { "FAIL" }, g.name, sol.objective);
        failed += usize::from(!ok);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    for kind in Kind::ALL {
        let mut bad = 0;
        for _ in 0..SELFTEST_PER_KIND {
            let inst = random_instance(&mut rng, kind);
            let sol = inst.solve(&s)?;
            let ok = sol.is_optimal() && verify_with(&inst, &sol.weights, 1e-5, Semantics::Formulation)?.ok;
            bad += usize::from(!ok);
        }
        println!(
            "{} random {kind}: {}/{SELFTEST_PER_KIND}",
            if bad == 0 { "ok  " } else { "FAIL" },
            SELFTEST_PER_KIND - bad
        );
        failed += bad;
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Verification(format!("{failed} selftest cases failed")))
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Inverse { kind, input, delta, sense, output } => {
            inverse(cli, *kind, input, *delta, *sense, output.as_deref())
        }
        Command::Verify { input, weights, tol } => verify(input, weights, *tol),
        Command::Oracle { input } => oracle(cli, input),
        Command::Train { stream, loss, log, epochs } => train(cli, stream, *loss, log, *epochs),
        Command::Selftest => selftest(cli),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
