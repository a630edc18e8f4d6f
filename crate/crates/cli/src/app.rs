//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::output::{write_report, write_trajectory};
use crate::scenario::{Overrides, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass,
    CheckFailed,
    Usage,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Pass => 0,
            ExitStatus::CheckFailed => 1,
            ExitStatus::Usage => 2,
        }
    }

    fn from_pass(ok: bool) -> Self {
        if ok {
            ExitStatus::Pass
        } else {
            ExitStatus::CheckFailed
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nisynth", version, about = "Negative-imaginary state-feedback synthesis and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the equivalence hypotheses on A11.
    Analyze(Common),
    /// Build the storage function and emit the feedback laws.
    Synthesize(Common),
    /// Simulate the closed loop, or the interconnection when an uncertainty is given.
    Simulate(Common),
    /// Check the dissipation inequalities, W decrease and storage positivity.
    Verify(Common),
    /// Run the full pipeline on the bundled example (or --scenario).
    ReproduceExample(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory for reports and trajectories.
    #[arg(long, default_value = "nisynth-out")]
    out: PathBuf,
    /// Integration step.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulation horizon; verification runs keep `verification.t_end`.
    #[arg(long)]
    t_end: Option<f64>,
    /// Seed for input phases and sampling offsets.
    #[arg(long)]
    seed: Option<u64>,
    /// Dissipation residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads for independent verification runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            dt: self.dt,
            t_end: self.t_end,
            seed: self.seed,
            tol: self.tol,
        }
    }

    fn load(&self, bundled_default: bool) -> Result<Scenario> {
        let mut s = match (&self.scenario, bundled_default) {
            (Some(p), _) => Scenario::load(p)?,
            (None, true) => Scenario::bundled(),
            (None, false) => anyhow::bail!("--scenario is required"),
        };
        s.apply(&self.overrides())?;
        Ok(s)
    }
}

/// Parse `args` (including the program name), run, and report the status.
/// Usage and scenario errors map to [`ExitStatus::Usage`].
pub fn run<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::Usage } else { ExitStatus::Pass };
        }
    };
    match dispatch(cli.command) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitStatus::Usage
        }
    }
}

fn dispatch(command: Command) -> Result<ExitStatus> {
    match command {
        Command::Analyze(c) => analyze(&c.load(false)?, &c.out),
        Command::Synthesize(c) => synthesize(&c.load(false)?, &c.out),
        Command::Simulate(c) => simulate(&c.load(false)?, &c.out),
        Command::Verify(c) => verify(&c.load(false)?, &c.out, c.jobs),
        Command::ReproduceExample(c) => reproduce(&c.load(true)?, &c.out, c.jobs),
    }
}

fn analyze(s: &Scenario, out: &Path) -> Result<ExitStatus> {
    let r = commands::analyze(s)?;
    println!("{:?}: A11 is {:?}", r.verdict, r.classification);
    for h in &r.hypotheses {
        println!("  {:<24} {}", h.name, if h.holds { "holds" } else { "fails" });
    }
    write_report(out, "analyze", r.passed(), &r)?;
    Ok(ExitStatus::from_pass(r.passed()))
}

fn synthesize(s: &Scenario, out: &Path) -> Result<ExitStatus> {
    let r = commands::synthesize(s)?;
    match &r.laws {
        Some(l) => {
            println!("epsilon = {}", l.epsilon);
            for (i, u) in l.u1.iter().enumerate() {
                println!("u1[{}] = v1[{}] + {u}", i + 1, i + 1);
            }
            for (i, u) in l.u2.iter().enumerate() {
                println!("u2[{}] = v2[{}] + {u}", i + 1, i + 1);
            }
            if !l.v2_check.passed() {
                println!("V2 is not positive definite on the sampling box: {:?}", l.v2_check);
            }
        }
        None => println!("{:?}: no laws synthesized", r.analysis.verdict),
    }
    if let Some(c) = &r.reference {
        println!("reference laws: {:?} (max relative error {:.3e})", c.verdict, c.max_rel_error);
    }
    write_report(out, "synthesize", r.passed(), &r)?;
    Ok(ExitStatus::from_pass(r.passed()))
}

fn simulate(s: &Scenario, out: &Path) -> Result<ExitStatus> {
    let (r, traj) = commands::simulate(s)?;
    write_trajectory(out, "trajectory.csv", &traj)?;
    write_report(out, "simulate", r.passed(), &r)?;
    match &r.divergence {
        Some(d) => println!("aborted at step {} (t = {}): {}", d.step, d.t, d.message),
        None => println!(
            "{} steps, |x(t_end)| = {:.4e}",
            r.steps, r.convergence.final_norm
        ),
    }
    Ok(ExitStatus::from_pass(r.passed()))
}

fn verify(s: &Scenario, out: &Path, jobs: usize) -> Result<ExitStatus> {
    let r = commands::verify(s, jobs)?;
    for run in &r.closed_loop {
        println!("closed loop, {:<20} {:?}", run.input.label(), run.verdict);
    }
    for run in r.uncertainty.iter().flatten() {
        println!("uncertainty, {:<20} {:?}", run.input.label(), run.verdict);
    }
    if let Some(w) = &r.w_decrease {
        println!("W decrease                        {:?}", w.verdict);
    }
    write_report(out, "verify", r.passed(), &r)?;
    Ok(ExitStatus::from_pass(r.passed()))
}

fn reproduce(s: &Scenario, out: &Path, jobs: usize) -> Result<ExitStatus> {
    let r = commands::reproduce(s, jobs)?;
    write_report(out, "analyze", r.analysis.passed(), &r.analysis)?;
    if let Some(syn) = &r.synthesis {
        write_report(out, "synthesize", syn.passed(), syn)?;
    }
    if let Some(v) = &r.verification {
        write_report(out, "verify", v.passed(), v)?;
    }
    if let Some(sim) = &r.simulation {
        write_report(out, "simulate", sim.passed(), sim)?;
    }
    if let Some(t) = &r.trajectory {
        write_trajectory(out, "trajectory.csv", t)?;
    }
    s.save(&out.join("scenario.toml"))?;
    write_report(out, "reproduce-example", r.passed(), &r)?;
    for c in &r.checks {
        println!("{} {:<32} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(ExitStatus::from_pass(r.passed()))
}
