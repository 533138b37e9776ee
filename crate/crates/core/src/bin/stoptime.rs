use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use stoptime::factorization::{diagonalize_d, FactorError, FactorOptions};
use stoptime::game::{run_rep_game, verify_transcript, Adversary, RandomAdversary, ReplayAdversary};
use stoptime::ramsey::{find_monochromatic_subtree, Coloring};
use stoptime::spaces::{dual_norm_b, dual_norm_d, norm_b_report, norm_s_report, CoeffVector, SpaceTag};
use stoptime::verify::{run_suite, Suite};
use stoptime::{BaseNorm, OperatorMatrix};

const EXIT_INPUT: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;
const EXIT_FAILURE: u8 = 4;

#[derive(Parser)]
#[command(name = "stoptime", version, about = "Stopping-time spaces on truncated dyadic trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a norm of a coefficient vector.
    Norm {
        file: PathBuf,
        #[arg(long, value_enum)]
        space: SpaceArg,
        #[arg(long, default_value = "lp:1")]
        base: String,
        /// Include the attaining antichain, branch or support.
        #[arg(long)]
        witness: bool,
    },
    /// Factor the identity through an operator on a D space.
    Factorize {
        file: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        out_depth: u8,
        /// Largest residual accepted as success.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
        /// Write the certificate here instead of into the report.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Play the reproducibility game and verify the transcript.
    Game {
        /// Replay adversary moves (or a transcript) from this file.
        #[arg(long)]
        moves: Option<PathBuf>,
        /// Seed of the random adversary; required without `--moves`.
        #[arg(long, required_unless_present = "moves")]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 2)]
        play_depth: u8,
        #[arg(long, default_value_t = 10)]
        host_depth: u8,
        #[arg(long, value_enum, default_value = "s")]
        space: SpaceArg,
        #[arg(long, default_value = "lp:1")]
        base: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search a two-colouring for a monochromatic subtree.
    Ramsey {
        /// Colouring file; a random colouring is drawn when absent.
        file: Option<PathBuf>,
        #[arg(long, required_unless_present = "file")]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        host_depth: u8,
        /// Target depth of the embedded subtree.
        #[arg(long)]
        depth: u8,
    },
    /// Run the self-check suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SpaceArg {
    #[value(alias = "S")]
    S,
    #[value(alias = "B")]
    B,
    #[value(alias = "D")]
    D,
    #[value(alias = "BDual", alias = "bdual")]
    BDual,
}

impl SpaceArg {
    fn tag(self, base: BaseNorm) -> SpaceTag {
        match self {
            SpaceArg::S => SpaceTag::S { base },
            SpaceArg::B => SpaceTag::B { base },
            SpaceArg::D => SpaceTag::D { base },
            SpaceArg::BDual => SpaceTag::BDual { base },
        }
    }
}

#[derive(Serialize)]
struct RunReport {
    command: String,
    inputs: Value,
    inputs_digest: String,
    outputs: Value,
    timings: Value,
    seed: Option<u64>,
    version: String,
}

struct Failure {
    code: u8,
    message: String,
    detail: Value,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure { code: EXIT_INPUT, message: message.to_string(), detail: Value::Null }
    }
}

struct Run {
    inputs: Value,
    files: Vec<(String, Vec<u8>)>,
    seed: Option<u64>,
}

impl Run {
    fn new(inputs: Value, seed: Option<u64>) -> Self {
        Run { inputs, files: Vec::new(), seed }
    }

    fn read(&mut self, path: &Path) -> Result<Vec<u8>, Failure> {
        let bytes = fs::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        self.files.push((path.display().to_string(), bytes.clone()));
        Ok(bytes)
    }

    fn parse<T: serde::de::DeserializeOwned>(&mut self, path: &Path) -> Result<T, Failure> {
        let bytes = self.read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }

    fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.inputs).unwrap_or_default());
        for (_, bytes) in &self.files {
            h.update(Sha256::digest(bytes));
        }
        hex(&h.finalize())
    }

    fn inputs_json(&self) -> Value {
        let files: Vec<Value> = self
            .files
            .iter()
            .map(|(p, b)| json!({ "path": p, "sha256": hex(&Sha256::digest(b)) }))
            .collect();
        json!({ "args": self.inputs, "files": files })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_base(s: &str) -> Result<BaseNorm, Failure> {
    s.parse::<BaseNorm>().map_err(Failure::input)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure { code: 1, message: e.to_string(), detail: Value::Null })?;
    fs::write(path, text + "\n").map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn cmd_norm(run: &mut Run, file: &Path, space: SpaceArg, base: &str, witness: bool) -> Result<Value, Failure> {
    let base = parse_base(base)?;
    let x: CoeffVector = run.parse(file)?;
    let report = match space {
        SpaceArg::S => norm_s_report(&x, &base),
        SpaceArg::B => Ok(norm_b_report(&x, &base)),
        SpaceArg::D => dual_norm_d(&x, &base),
        SpaceArg::BDual => dual_norm_b(&x, &base),
    }
    .map_err(Failure::input)?;
    let mut out = json!({
        "space": space.tag(base).label(),
        "depth": x.depth(),
        "value": report.value,
        "gap": report.gap,
    });
    if witness {
        out["witness"] = json!(report.witness);
        if let Some(m) = &report.maximizer {
            out["maximizer"] = json!(m);
        }
    }
    Ok(out)
}

fn factor_failure(e: FactorError) -> Failure {
    let detail = match &e {
        FactorError::DiagonalBelowDelta { node, value, delta } => json!({ "node": node, "value": value, "delta": delta }),
        FactorError::ZeroDiagonal(node) => json!({ "node": node }),
        FactorError::Comparable(a, b) => json!({ "nodes": [a, b] }),
        _ => Value::Null,
    };
    let code = match e {
        FactorError::NotSquare | FactorError::WrongSpace(_) | FactorError::Parameters(_) => EXIT_INPUT,
        _ => EXIT_PRECONDITION,
    };
    Failure { code, message: e.to_string(), detail }
}

#[allow(clippy::too_many_arguments)]
fn cmd_factorize(
    run: &mut Run,
    file: &Path,
    delta: f64,
    eta: f64,
    out_depth: u8,
    tolerance: f64,
    out: Option<&Path>,
    seed: u64,
) -> Result<Value, Failure> {
    if !(tolerance >= 0.0) {
        return Err(Failure::input(format!("tolerance must be non-negative, got {tolerance}")));
    }
    let t: OperatorMatrix = run.parse(file)?;
    let mut opts = FactorOptions::new(delta, eta, out_depth);
    opts.seed = seed;
    let cert = diagonalize_d(&t, &opts).map_err(factor_failure)?;
    let ok = cert.residual <= tolerance;
    let mut summary = json!({
        "residual": cert.residual,
        "residual_exact": cert.residual_exact,
        "norm_product_bound": cert.norm_product_bound,
        "norm_product_certified": cert.norm_product_certified,
        "output_depth": cert.output_depth,
        "exhausted": cert.exhausted,
        "tolerance": tolerance,
        "within_tolerance": ok,
    });
    match out {
        Some(p) => {
            write_json(p, &cert)?;
            summary["certificate"] = json!(p.display().to_string());
        }
        None => summary["certificate"] = json!(cert),
    }
    if ok {
        Ok(summary)
    } else {
        Err(Failure {
            code: EXIT_FAILURE,
            message: format!("residual {:e} exceeds tolerance {tolerance:e}", cert.residual),
            detail: summary,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_game(
    run: &mut Run,
    moves: Option<&Path>,
    seed: Option<u64>,
    eta: f64,
    play_depth: u8,
    host_depth: u8,
    space: SpaceArg,
    base: &str,
    out: Option<&Path>,
) -> Result<Value, Failure> {
    let tag = space.tag(parse_base(base)?);
    let mut adversary: Box<dyn Adversary> = match moves {
        Some(p) => {
            let bytes = run.read(p)?;
            let text = String::from_utf8(bytes).map_err(Failure::input)?;
            Box::new(ReplayAdversary::from_json(&text).map_err(Failure::input)?)
        }
        None => Box::new(RandomAdversary::new(eta, seed.unwrap_or(0))),
    };
    let mut tr = run_rep_game(adversary.as_mut(), play_depth, host_depth, &tag).map_err(Failure::input)?;
    let report = verify_transcript(&tr, 1.0, None).map_err(Failure::input)?;
    tr.verification = Some(report.clone());
    let failed_turns = tr.turns.iter().filter(|t| t.failed).count();
    let mut summary = json!({
        "space": tr.space.label(),
        "turns": tr.turns.len(),
        "failed_turns": failed_turns,
        "images": tr.images(),
        "verification": report,
    });
    match out {
        Some(p) => {
            write_json(p, &tr)?;
            summary["transcript"] = json!(p.display().to_string());
        }
        None => summary["transcript"] = json!(tr),
    }
    if report.passed && failed_turns == 0 {
        Ok(summary)
    } else {
        Err(Failure { code: EXIT_FAILURE, message: "transcript verification failed".into(), detail: summary })
    }
}

fn cmd_ramsey(run: &mut Run, file: Option<&Path>, seed: Option<u64>, host_depth: u8, depth: u8) -> Result<Value, Failure> {
    let coloring: Coloring = match file {
        Some(p) => run.parse(p)?,
        None => Coloring::random(host_depth, seed.unwrap_or(0)),
    };
    let found = find_monochromatic_subtree(&coloring, depth);
    let verified = found.embedding.verify().passed;
    let summary = json!({
        "host_depth": coloring.depth(),
        "result": found,
        "verified": verified,
    });
    if verified {
        Ok(summary)
    } else {
        Err(Failure { code: EXIT_FAILURE, message: "embedding failed verification".into(), detail: summary })
    }
}

fn cmd_verify(suite: Suite, seed: u64) -> Result<Value, Failure> {
    let report = run_suite(suite, seed);
    for c in &report.criteria {
        eprintln!("{} {:>2} {} ({:.1}s)", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.seconds);
    }
    let value = json!(report);
    if report.passed {
        Ok(value)
    } else {
        Err(Failure { code: EXIT_FAILURE, message: "suite failed".into(), detail: value })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let (name, mut run, result) = match &cli.command {
        Command::Norm { file, space, base, witness } => {
            let mut run = Run::new(json!({ "space": space, "base": base, "witness": witness }), None);
            let r = cmd_norm(&mut run, file, *space, base, *witness);
            ("norm", run, r)
        }
        Command::Factorize { file, delta, eta, out_depth, tolerance, out, seed } => {
            let mut run = Run::new(
                json!({ "delta": delta, "eta": eta, "out_depth": out_depth, "tolerance": tolerance }),
                Some(*seed),
            );
            let r = cmd_factorize(&mut run, file, *delta, *eta, *out_depth, *tolerance, out.as_deref(), *seed);
            ("factorize", run, r)
        }
        Command::Game { moves, seed, eta, play_depth, host_depth, space, base, out } => {
            let mut run = Run::new(
                json!({ "eta": eta, "play_depth": play_depth, "host_depth": host_depth, "space": space, "base": base }),
                *seed,
            );
            let r = cmd_game(&mut run, moves.as_deref(), *seed, *eta, *play_depth, *host_depth, *space, base, out.as_deref());
            ("game", run, r)
        }
        Command::Ramsey { file, seed, host_depth, depth } => {
            let mut run = Run::new(json!({ "host_depth": host_depth, "depth": depth }), *seed);
            let r = cmd_ramsey(&mut run, file.as_deref(), *seed, *host_depth, *depth);
            ("ramsey", run, r)
        }
        Command::Verify { suite, seed } => {
            let run = Run::new(json!({ "suite": suite }), Some(*seed));
            ("verify", run, cmd_verify(*suite, *seed))
        }
    };
    let (outputs, code) = match result {
        Ok(v) => (v, 0),
        Err(f) => {
            eprintln!("error: {}", f.message);
            (json!({ "error": f.message, "detail": f.detail }), f.code)
        }
    };
    let report = RunReport {
        command: name.to_string(),
        inputs: run.inputs_json(),
        inputs_digest: run.digest(),
        outputs,
        timings: json!({ "total_seconds": start.elapsed().as_secs_f64() }),
        seed: run.seed.take(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    match serde_json::to_string_pretty(&report) {
        Ok(s) => {
            let _ = writeln!(std::io::stdout().lock(), "{s}");
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    ExitCode::from(code)
}
