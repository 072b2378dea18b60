use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ehcoop::baselines::{constant_power, BaselineKind};
use ehcoop::harness::{
    load_scenario, load_sweep, run_sweep, save_sweep_csv, write_json, write_sweep_csv, ReportFile,
    ScenarioFile, SweepMeta,
};
use ehcoop::model::{
    check_feasible, check_partially_procrastinating, check_procrastinating, nats_to_bits,
    objective, Cooperation,
};
use ehcoop::oracle::{dp_solve, grid_transfer_max, DpConfig};
use ehcoop::waterfill::solve;
use ehcoop::Error;

const EXIT_INPUT: u8 = 1;
const EXIT_NONCONVERGED: u8 = 2;
const EXIT_VERIFY: u8 = 3;

/// Offline throughput maximization with energy cooperation.
#[derive(Parser)]
#[command(name = "ehcoop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write the JSON report.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "bi")]
        mode: Mode,
        /// Report path; the report goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the objective in bits rather than nats.
        #[arg(long)]
        bits: bool,
    },
    /// Run a parameter sweep and write the CSV table. With --out, the
    /// generator and spec are recorded next to it in `<out>.meta.json`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check a solution against the brute-force oracle and the policy invariants.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Battery grid resolution of the dynamic-programming oracle.
        #[arg(long, default_value_t = 40)]
        grid_points: usize,
    },
    /// Evaluate a constant-power reference policy.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        bits: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Bi,
    Uni12,
    Uni21,
    None,
}

impl From<Mode> for Cooperation {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Bi => Cooperation::Bidirectional,
            Mode::Uni12 => Cooperation::Uni12,
            Mode::Uni21 => Cooperation::Uni21,
            Mode::None => Cooperation::NoCooperation,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    ConstNone,
    ConstCoop,
}

impl From<Kind> for BaselineKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::ConstNone => BaselineKind::ConstantPowerNoCoop,
            Kind::ConstCoop => BaselineKind::ConstantPowerWithCoop,
        }
    }
}

/// Failure with the exit code it maps to.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Solver(_) => EXIT_NONCONVERGED,
            Error::Invariant(_) | Error::Infeasible(_) => EXIT_VERIFY,
            _ => EXIT_INPUT,
        };
        Failure(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve {
            config,
            mode,
            out,
            bits,
        } => run_solve(&config, mode.into(), out.as_deref(), bits),
        Command::Sweep { config, out } => run_sweep_cmd(&config, out.as_deref()),
        Command::Verify {
            config,
            grid_points,
        } => run_verify(&config, grid_points),
        Command::Baseline {
            config,
            kind,
            out,
            bits,
        } => run_baseline(&config, kind.into(), out.as_deref(), bits),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn print_objective(nats: f64, bits: bool) {
    if bits {
        println!("objective: {} bits", nats_to_bits(nats));
    } else {
        println!("objective: {nats} nats");
    }
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => write_json(value, p)?,
        None => {
            let text = serde_json::to_string_pretty(value)
                .map_err(|e| Failure(EXIT_INPUT, e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn run_solve(
    config: &Path,
    mode: Cooperation,
    out: Option<&Path>,
    bits: bool,
) -> Result<(), Failure> {
    let sc = load_scenario(config)?;
    let r = solve(&sc, mode)?;
    emit_json(&ReportFile::new(&sc, &r), out)?;
    if out.is_some() {
        print_objective(r.objective_nats, bits);
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    if !r.converged {
        return Err(Failure(
            EXIT_NONCONVERGED,
            format!(
                "solver did not converge (level residual {:.3e})",
                r.level_residual
            ),
        ));
    }
    Ok(())
}

fn run_sweep_cmd(config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let spec = load_sweep(config)?;
    let rows = run_sweep(&spec)?;
    match out {
        Some(p) => {
            save_sweep_csv(&rows, p)?;
            let mut meta = p.as_os_str().to_owned();
            meta.push(".meta.json");
            write_json(&SweepMeta::new(&spec), PathBuf::from(meta))?;
        }
        None => write_sweep_csv(&rows, io::stdout().lock())
            .map_err(|e| Failure(EXIT_INPUT, e.to_string()))?,
    }
    let flagged: usize = rows.iter().map(|r| r.nonconverged).sum();
    if flagged > 0 {
        return Err(Failure(
            EXIT_NONCONVERGED,
            format!("{flagged} trial solves did not converge"),
        ));
    }
    Ok(())
}

fn run_baseline(
    config: &Path,
    kind: BaselineKind,
    out: Option<&Path>,
    bits: bool,
) -> Result<(), Failure> {
    let sc = load_scenario(config)?;
    let policy = constant_power(&sc, kind)?;
    let nats = objective(&policy, &sc)?;
    let report = serde_json::json!({
        "tool": ehcoop::harness::TOOL_VERSION,
        "scenario": ScenarioFile::from(&sc),
        "baseline": kind,
        "objective_nats": nats,
        "objective_bits": nats_to_bits(nats),
        "transmit": policy,
    });
    emit_json(&report, out)?;
    if out.is_some() {
        print_objective(nats, bits);
    }
    Ok(())
}

struct Checks {
    failed: usize,
    out: io::StdoutLock<'static>,
}

impl Checks {
    fn record(&mut self, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        let tag = if ok { "PASS" } else { "FAIL" };
        if detail.is_empty() {
            let _ = writeln!(self.out, "{tag} {name}");
        } else {
            let _ = writeln!(self.out, "{tag} {name}: {detail}");
        }
    }

    fn skip(&mut self, name: &str, detail: String) {
        let _ = writeln!(self.out, "SKIP {name}: {detail}");
    }
}

fn run_verify(config: &Path, grid_points: usize) -> Result<(), Failure> {
    let sc = load_scenario(config)?;
    let mut c = Checks {
        failed: 0,
        out: io::stdout().lock(),
    };
    let bi = solve(&sc, Cooperation::Bidirectional)?;
    c.record(
        "convergence",
        bi.converged,
        format!(
            "{} iterations, level residual {:.2e}",
            bi.bcd_iterations, bi.level_residual
        ),
    );
    let rep = check_feasible(&bi.transmit, &sc);
    c.record("feasibility", rep.feasible, rep.to_string());
    if sc.all_infinite() {
        c.record(
            "procrastination",
            check_procrastinating(&bi.transmit, &sc),
            String::new(),
        );
    } else {
        c.record(
            "partial procrastination",
            check_partially_procrastinating(&bi.policy, &sc),
            String::new(),
        );
    }

    let tol = 1e-9 * bi.objective_nats.abs().max(1.0);
    let mut values = Vec::new();
    for mode in [
        Cooperation::Uni12,
        Cooperation::Uni21,
        Cooperation::NoCooperation,
    ] {
        values.push((mode, solve(&sc, mode)?.objective_nats));
    }
    let none = values[2].1;
    let nested = values[..2]
        .iter()
        .all(|&(_, u)| bi.objective_nats >= u - tol && u >= none - tol);
    let listing: Vec<String> = values.iter().map(|(m, v)| format!("{m} {v:.6}")).collect();
    c.record(
        "mode nesting",
        nested,
        format!("bi {:.6}, {}", bi.objective_nats, listing.join(", ")),
    );

    let mut worst = 0.0f64;
    for i in 0..sc.n_slots() {
        let (p1, p2) = (bi.policy.consumed[0][i], bi.policy.consumed[1][i]);
        let (_, grid) = grid_transfer_max(sc.model(), p1, p2, &sc, 1000)?;
        let closed = sc.slot_model().slot_rate([p1, p2]);
        worst = worst.max(grid - closed);
    }
    c.record(
        "per-slot transfers",
        worst <= 1e-6,
        format!("grid search gains at most {worst:.2e} nats"),
    );

    let cfg = DpConfig {
        grid_points,
        ..DpConfig::default()
    };
    match dp_solve(&sc, &cfg) {
        Ok(dp) => {
            let gap = bi.objective_nats - dp.objective_lower_bound;
            c.record(
                "oracle bound",
                gap >= -1e-9,
                format!("solver exceeds oracle by {gap:.3e} nats"),
            );
        }
        Err(e @ Error::StateExplosion { .. }) => c.skip("oracle bound", e.to_string()),
        Err(e) => return Err(e.into()),
    }
    drop(c.out);
    if c.failed > 0 {
        return Err(Failure(
            EXIT_VERIFY,
            format!("{} check(s) failed", c.failed),
        ));
    }
    Ok(())
}
