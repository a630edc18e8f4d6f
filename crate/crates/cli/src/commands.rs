//! The subcommands as library functions. Each returns a serializable report
//! with a `passed` flag; writing files is left to [`crate::output`].

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Result;
use nisynth_core::expr::{NamedValues, Expr};
use nisynth_core::lyapunov::{
    classify_stability, default_tolerance, sampled_positive_definite, Classification, PdVerdict, StabilityVerdict,
};
use nisynth_core::sim::{
    check_dissipation, check_w_decrease, convergence_metrics, convergence_metrics_of, integrate_with, Channel,
    ConvergenceMetrics, DissipationReport, Dynamics, Signal, SignalSpec, SimError, Trajectory, Verdict,
    WDecreaseReport,
};
use nisynth_core::synthesis::{ClosedLoopSystem, GeneralFormClosedLoop, LawMutation, Target};
use nisynth_core::uncertainty::{Interconnection, OsniUncertainty};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::scenario::{CertificateSource, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Equivalence {
    Equivalent,
    NotEquivalent,
}

#[derive(Debug, Clone, Serialize)]
pub struct Hypothesis {
    pub name: &'static str,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub verdict: Equivalence,
    pub hypotheses: Vec<Hypothesis>,
    pub classification: Classification,
    pub stability: StabilityVerdict,
}

impl AnalyzeReport {
    pub fn passed(&self) -> bool {
        self.verdict == Equivalence::Equivalent
    }
}

/// Equivalence holds iff `A11` is nonsingular and Lyapunov stable.
pub fn analyze(scenario: &Scenario) -> Result<AnalyzeReport> {
    let plant = scenario.build_plant()?;
    let a = plant.a11();
    let stability = classify_stability(a, default_tolerance(a))?;
    let stable = stability.is_lyapunov_stable();
    let hypotheses = vec![
        Hypothesis {
            name: "det A11 != 0",
            holds: stability.det_nonzero,
        },
        Hypothesis {
            name: "A11 is Lyapunov stable",
            holds: stable,
        },
    ];
    let verdict = if stability.det_nonzero && stable {
        Equivalence::Equivalent
    } else {
        Equivalence::NotEquivalent
    };
    Ok(AnalyzeReport {
        verdict,
        hypotheses,
        classification: stability.classification,
        stability,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub source: CertificateSource,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Laws {
    pub target: Target,
    pub lambda: f64,
    pub epsilon: f64,
    pub certificate: Certificate,
    pub v2: String,
    pub v2_check: PdVerdict,
    pub storage: String,
    pub u1: Vec<String>,
    pub u2: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceComparison {
    pub points: usize,
    pub rel_tol: f64,
    /// `max |u - u_ref| / max(1, |u_ref|)` over the points and channels.
    pub max_rel_error: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesizeReport {
    pub analysis: AnalyzeReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub laws: Option<Laws>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceComparison>,
}

impl SynthesizeReport {
    pub fn passed(&self) -> bool {
        self.analysis.passed()
            && self.laws.as_ref().is_some_and(|l| l.v2_check.passed())
            && self.reference.as_ref().is_none_or(|r| r.verdict.passed())
    }
}

/// Build `V`, emit the laws and, when the scenario carries reference laws,
/// compare them by evaluation.
pub fn synthesize(scenario: &Scenario) -> Result<SynthesizeReport> {
    let analysis = analyze(scenario)?;
    if !analysis.passed() {
        return Ok(SynthesizeReport {
            analysis,
            laws: None,
            reference: None,
        });
    }
    let (cl, source) = scenario.build_closed_loop()?;
    let ver = &scenario.verification;
    let v2_check = cl
        .spec()
        .check_v2(cl.plant(), ver.box_half_width, ver.samples, scenario.simulation.seed)?;
    let (u1, u2) = cl.synthesize_feedback();
    let reference = match scenario.reference_laws(cl.plant())? {
        Some((r1, r2)) => {
            let r = scenario.reference.as_ref().expect("reference block present");
            let laws: Vec<Expr> = u1.iter().chain(&u2).cloned().collect();
            let refs: Vec<Expr> = r1.into_iter().chain(r2).collect();
            let err = max_relative_error(&cl, &laws, &refs, r.points, ver.box_half_width, scenario.simulation.seed)?;
            Some(ReferenceComparison {
                points: r.points,
                rel_tol: r.rel_tol,
                max_rel_error: err,
                verdict: Verdict::from_pass(err <= r.rel_tol),
            })
        }
        None => None,
    };
    let laws = Laws {
        target: cl.spec().target(),
        lambda: cl.spec().lambda(),
        epsilon: cl.epsilon(),
        certificate: Certificate {
            source,
            p: cl.spec().p().to_rows(),
        },
        v2: cl.spec().v2().to_string(),
        v2_check,
        storage: cl.storage_expr().to_string(),
        u1: u1.iter().map(ToString::to_string).collect(),
        u2: u2.iter().map(ToString::to_string).collect(),
    };
    Ok(SynthesizeReport {
        analysis,
        laws: Some(laws),
        reference,
    })
}

fn max_relative_error(
    cl: &ClosedLoopSystem,
    laws: &[Expr],
    refs: &[Expr],
    points: usize,
    half_width: f64,
    seed: u64,
) -> Result<f64> {
    let names = cl.plant().state_names();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x: Vec<f64> = (0..names.len()).map(|_| rng.random_range(-half_width..half_width)).collect();
        let at = NamedValues {
            names: &names,
            values: &x,
        };
        for (law, r) in laws.iter().zip(refs) {
            let (a, b) = (law.eval(&at)?, r.eval(&at)?);
            let e = (a - b).abs() / b.abs().max(1.0);
            worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
        }
    }
    Ok(worst)
}

/// Which vector field a run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    ClosedLoop,
    GeneralForm,
    Interconnection,
}

#[derive(Debug, Clone, Serialize)]
pub struct Divergence {
    pub step: usize,
    pub t: f64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub system: SystemKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub steps: usize,
    pub state_names: Vec<String>,
    pub final_state: Vec<f64>,
    /// Norm of the full (joint) state.
    pub convergence: ConvergenceMetrics,
    /// Norm of the plant state alone, when an uncertainty is attached.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plant_convergence: Option<ConvergenceMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<Divergence>,
}

impl SimulateReport {
    /// The run completed without blowing up.
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

fn divergence(e: &SimError) -> Divergence {
    let (step, t) = match e {
        SimError::NonFinite { step, t, .. } | SimError::Diverged { step, t, .. } | SimError::Rhs { step, t, .. } => {
            (*step, *t)
        }
        _ => (0, 0.0),
    };
    Divergence {
        step,
        t,
        message: e.to_string(),
    }
}

/// Integrate; an aborted run yields its recorded prefix and the reason.
fn run(
    sys: &dyn Dynamics,
    x0: &[f64],
    scenario: &Scenario,
    t_end: f64,
    input: &Signal,
) -> Result<(Trajectory, Option<Divergence>)> {
    let sim = &scenario.simulation;
    match integrate_with(sys, x0, t_end, sim.dt, input, sim.blowup) {
        Ok(t) => Ok((t, None)),
        Err(e) => {
            let d = divergence(&e);
            match e.partial() {
                Some(p) if !p.is_empty() => Ok((p.clone(), Some(d))),
                _ => Err(e.into()),
            }
        }
    }
}

/// The closed loop, realized through the general form when one is given.
fn closed_loop_dynamics(scenario: &Scenario, cl: &ClosedLoopSystem) -> Result<Box<dyn Dynamics>> {
    Ok(match scenario.build_general_form(cl.plant())? {
        Some(form) => Box::new(GeneralFormClosedLoop::new(cl.clone(), form)),
        None => Box::new(cl.clone()),
    })
}

/// Simulate the interconnection when an uncertainty is present, otherwise the
/// closed loop driven by the scenario input.
pub fn simulate(scenario: &Scenario) -> Result<(SimulateReport, Trajectory)> {
    let (cl, _) = scenario.build_closed_loop()?;
    let sim = &scenario.simulation;
    let ver = &scenario.verification;
    let (system, input, traj, div, plant_range) = match scenario.build_interconnection(&cl)? {
        Some(ic) => {
            let (mut t, d) = run(&ic, &scenario.joint_x0(), scenario, sim.t_end, &Signal::zero(0))?;
            let (pr, sr) = (ic.plant_range(), ic.sigma_range());
            t.record_channel(Channel::V, |x| cl.storage_v(&x[pr.clone()]));
            t.record_channel(Channel::Vsigma, |x| ic.uncertainty().storage(&x[sr.clone()]));
            t.record_channel(Channel::W, |x| ic.composite_w(x));
            (SystemKind::Interconnection, None, t, d, Some(pr))
        }
        None => {
            let dynamics = closed_loop_dynamics(scenario, &cl)?;
            let kind = if scenario.general_form.is_some() {
                SystemKind::GeneralForm
            } else {
                SystemKind::ClosedLoop
            };
            let signal = sim.input.realize(cl.plant().output_dim(), sim.seed)?;
            let (mut t, d) = run(dynamics.as_ref(), &sim.x0, scenario, sim.t_end, &signal)?;
            t.record_channel(Channel::V, |x| cl.storage_v(x));
            (kind, Some(sim.input.label().to_string()), t, d, None)
        }
    };
    let convergence = convergence_metrics(&traj, ver.convergence_threshold, ver.convergence_window);
    let plant_convergence =
        plant_range.map(|r| convergence_metrics_of(&traj, r, ver.convergence_threshold, ver.convergence_window));
    let report = SimulateReport {
        system,
        input,
        dt: sim.dt,
        t_end: sim.t_end,
        seed: sim.seed,
        steps: traj.len() - 1,
        state_names: traj.state_names().to_vec(),
        final_state: traj.final_state().to_vec(),
        convergence,
        plant_convergence,
        divergence: div,
    };
    Ok((report, traj))
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRun {
    pub input: SignalSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<DissipationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<Divergence>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct WRun {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<WDecreaseReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<Divergence>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct Positivity {
    pub half_width: f64,
    pub samples: usize,
    pub result: PdVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutation: Option<LawMutation>,
    pub t_end: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub closed_loop: Vec<InputRun>,
    pub v_positive_definite: Positivity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<Vec<InputRun>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_decrease: Option<WRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_positive_definite: Option<Positivity>,
}

impl VerifyReport {
    pub fn closed_loop_passed(&self) -> bool {
        self.closed_loop.iter().all(|r| r.verdict.passed())
    }

    pub fn uncertainty_passed(&self) -> bool {
        self.uncertainty.iter().flatten().all(|r| r.verdict.passed())
    }

    pub fn passed(&self) -> bool {
        self.closed_loop_passed()
            && self.uncertainty_passed()
            && self.v_positive_definite.result.passed()
            && self.w_decrease.as_ref().is_none_or(|w| w.verdict.passed())
            && self.w_positive_definite.as_ref().is_none_or(|w| w.result.passed())
    }
}

/// Run `tasks` on up to `jobs` scoped threads; results keep the task order.
pub fn run_parallel<T: Send>(jobs: usize, tasks: Vec<Box<dyn FnOnce() -> T + Send + '_>>) -> Vec<T> {
    let n = tasks.len();
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        return tasks.into_iter().map(|t| t()).collect();
    }
    let queue: Vec<Mutex<Option<Box<dyn FnOnce() -> T + Send + '_>>>> =
        tasks.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let results: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= n {
                    break;
                }
                let task = queue[k].lock().unwrap().take().expect("each task runs once");
                let out = task();
                *results[k].lock().unwrap() = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.into_inner().unwrap().expect("every task completed"))
        .collect()
}

fn dissipation_run(
    sys: &dyn Dynamics,
    x0: &[f64],
    scenario: &Scenario,
    input: &SignalSpec,
    storage: &dyn Fn(&[f64]) -> f64,
    epsilon: f64,
) -> Result<InputRun> {
    let signal = input.realize(sys.input_dim(), scenario.simulation.seed)?;
    let (traj, divergence) = run(sys, x0, scenario, scenario.verification_horizon(), &signal)?;
    let report = if traj.len() >= 3 {
        Some(check_dissipation(&traj, storage, epsilon, scenario.verification.tol)?)
    } else {
        None
    };
    let verdict = match (&report, &divergence) {
        (Some(r), None) => r.verdict(),
        _ => Verdict::Fail,
    };
    Ok(InputRun {
        input: input.clone(),
        report,
        divergence,
        verdict,
    })
}

/// The closed loop, with the scenario's mutation applied if any.
pub fn verified_closed_loop(scenario: &Scenario) -> Result<ClosedLoopSystem> {
    let (cl, _) = scenario.build_closed_loop()?;
    Ok(match scenario.verification.mutation {
        Some(m) => cl.mutated(m)?,
        None => cl,
    })
}

/// Dissipation runs of the closed loop over the input catalog.
pub fn verify_closed_loop(scenario: &Scenario, cl: &ClosedLoopSystem, jobs: usize) -> Result<Vec<InputRun>> {
    let dynamics = closed_loop_dynamics(scenario, cl)?;
    let dynamics = dynamics.as_ref();
    let storage = |x: &[f64]| cl.storage_v(x);
    let tasks: Vec<Box<dyn FnOnce() -> Result<InputRun> + Send + '_>> = scenario
        .verification
        .inputs
        .iter()
        .map(|input| {
            let storage = &storage;
            Box::new(move || dissipation_run(dynamics, &scenario.simulation.x0, scenario, input, storage, cl.epsilon()))
                as Box<dyn FnOnce() -> Result<InputRun> + Send + '_>
        })
        .collect();
    run_parallel(jobs, tasks).into_iter().collect()
}

/// Dissipation runs of the uncertainty alone over the input catalog.
pub fn verify_uncertainty(scenario: &Scenario, unc: &OsniUncertainty, x0: &[f64], jobs: usize) -> Result<Vec<InputRun>> {
    let storage = |x: &[f64]| unc.storage(x);
    let tasks: Vec<Box<dyn FnOnce() -> Result<InputRun> + Send + '_>> = scenario
        .verification
        .inputs
        .iter()
        .map(|input| {
            let storage = &storage;
            Box::new(move || dissipation_run(unc, x0, scenario, input, storage, unc.epsilon()))
                as Box<dyn FnOnce() -> Result<InputRun> + Send + '_>
        })
        .collect();
    run_parallel(jobs, tasks).into_iter().collect()
}

pub fn verify_w(scenario: &Scenario, ic: &Interconnection) -> Result<WRun> {
    let (traj, divergence) =
        run(ic, &scenario.joint_x0(), scenario, scenario.verification_horizon(), &Signal::zero(0))?;
    let report = if traj.len() >= 3 {
        Some(check_w_decrease(&traj, ic, scenario.w_tol())?)
    } else {
        None
    };
    let verdict = match (&report, &divergence) {
        (Some(r), None) => r.verdict,
        _ => Verdict::Fail,
    };
    Ok(WRun {
        report,
        divergence,
        verdict,
    })
}

fn positivity(scenario: &Scenario, dim: usize, f: impl Fn(&[f64]) -> f64) -> Result<Positivity> {
    let ver = &scenario.verification;
    let hw = ver.box_half_width;
    let result = sampled_positive_definite(f, &vec![(-hw, hw); dim], ver.samples, scenario.simulation.seed)?;
    Ok(Positivity {
        half_width: hw,
        samples: ver.samples,
        result,
    })
}

/// Dissipation of the closed loop and the uncertainty over the input catalog,
/// decrease of `W` along the interconnection, and sampled positivity of `V`
/// and `W`.
pub fn verify(scenario: &Scenario, jobs: usize) -> Result<VerifyReport> {
    let cl = verified_closed_loop(scenario)?;
    let closed_loop = verify_closed_loop(scenario, &cl, jobs)?;
    let v_positive_definite = positivity(scenario, cl.plant().state_dim(), |x| cl.storage_v(x))?;
    let (uncertainty, w_decrease, w_positive_definite) = match scenario.build_interconnection(&cl)? {
        Some(ic) => {
            let x0 = &scenario.uncertainty.as_ref().expect("uncertainty block present").x0;
            let runs = verify_uncertainty(scenario, ic.uncertainty(), x0, jobs)?;
            let w = verify_w(scenario, &ic)?;
            let pd = positivity(scenario, ic.state_dim(), |x| ic.composite_w(x))?;
            (Some(runs), Some(w), Some(pd))
        }
        None => (None, None, None),
    };
    Ok(VerifyReport {
        mutation: scenario.verification.mutation,
        t_end: scenario.verification_horizon(),
        epsilon: cl.epsilon(),
        tol: scenario.verification.tol,
        closed_loop,
        v_positive_definite,
        uncertainty,
        w_decrease,
        w_positive_definite,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MutationReport {
    pub mutation: LawMutation,
    pub runs: Vec<InputRun>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproduceReport {
    pub checks: Vec<Check>,
    pub analysis: AnalyzeReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesizeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerifyReport>,
    pub mutations: Vec<MutationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulateReport>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

impl ReproduceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn worst_residual(runs: &[InputRun], ni: bool) -> f64 {
    runs.iter()
        .filter_map(|r| r.report.as_ref())
        .map(|r| if ni { r.max_residual_ni } else { r.max_residual })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// analyze, synthesize, verify (with both law mutations as negative
/// controls) and simulate; every stage contributes named checks.
pub fn reproduce(scenario: &Scenario, jobs: usize) -> Result<ReproduceReport> {
    let analysis = analyze(scenario)?;
    let mut checks = vec![Check {
        name: "equivalence",
        passed: analysis.passed(),
        detail: format!("{:?}, A11 {:?}", analysis.verdict, analysis.classification),
    }];
    let mut report = ReproduceReport {
        checks: Vec::new(),
        analysis: analysis.clone(),
        synthesis: None,
        verification: None,
        mutations: Vec::new(),
        simulation: None,
        trajectory: None,
    };
    if !analysis.passed() {
        report.checks = checks;
        return Ok(report);
    }

    let synthesis = synthesize(scenario)?;
    let v2_ok = synthesis.laws.as_ref().is_some_and(|l| l.v2_check.passed());
    checks.push(Check {
        name: "v2_positive_definite",
        passed: v2_ok,
        detail: format!("{} samples", scenario.verification.samples),
    });
    checks.push(match &synthesis.reference {
        Some(r) => Check {
            name: "laws_match_reference",
            passed: r.verdict.passed(),
            detail: format!("max relative error {:.3e} at {} points (tol {:.0e})", r.max_rel_error, r.points, r.rel_tol),
        },
        None => Check {
            name: "laws_match_reference",
            passed: false,
            detail: "scenario has no reference block".into(),
        },
    });
    report.synthesis = Some(synthesis);

    let verification = verify(scenario, jobs)?;
    checks.push(Check {
        name: "closed_loop_dissipation",
        passed: verification.closed_loop_passed(),
        detail: format!(
            "epsilon {}, worst residual {:.3e} over {} inputs (tol {:.0e})",
            verification.epsilon,
            worst_residual(&verification.closed_loop, verification.epsilon == 0.0),
            verification.closed_loop.len(),
            verification.tol
        ),
    });
    checks.push(Check {
        name: "v_positive_definite",
        passed: verification.v_positive_definite.result.passed(),
        detail: pd_detail(&verification.v_positive_definite),
    });
    match (&verification.uncertainty, &verification.w_decrease, &verification.w_positive_definite) {
        (Some(unc), Some(w), Some(wpd)) => {
            checks.push(Check {
                name: "uncertainty_dissipation",
                passed: verification.uncertainty_passed(),
                detail: format!("worst residual {:.3e} over {} inputs", worst_residual(unc, false), unc.len()),
            });
            checks.push(Check {
                name: "w_decrease",
                passed: w.verdict.passed(),
                detail: match (&w.report, &w.divergence) {
                    (_, Some(d)) => d.message.clone(),
                    (Some(r), None) => format!(
                        "max dW/dt {:.3e} (tol {:.0e}), W {:.4} -> {:.3e}",
                        r.max_dw, r.tol, r.w_start, r.w_end
                    ),
                    (None, None) => "trajectory too short".into(),
                },
            });
            checks.push(Check {
                name: "w_positive_definite",
                passed: wpd.result.passed(),
                detail: pd_detail(wpd),
            });
        }
        _ => checks.push(Check {
            name: "interconnection",
            passed: false,
            detail: "scenario has no uncertainty block".into(),
        }),
    }
    report.verification = Some(verification);

    // negative controls: each defect must be caught
    let (cl, _) = scenario.build_closed_loop()?;
    let eps = cl.epsilon();
    for mutation in [LawMutation::DropDamping, LawMutation::FlipU1Gradient] {
        let runs = verify_closed_loop(scenario, &cl.mutated(mutation)?, jobs)?;
        let osni_fails = runs.iter().any(|r| r.report.as_ref().is_some_and(|d| d.osni == Some(Verdict::Fail)));
        let ni_passes = runs.iter().all(|r| r.divergence.is_none() && r.report.as_ref().is_some_and(|d| d.ni.passed()));
        let ni_fails = runs.iter().any(|r| r.report.as_ref().is_some_and(|d| !d.ni.passed()));
        let (name, passed, detail) = match mutation {
            LawMutation::DropDamping => (
                "mutation_drop_damping_detected",
                eps > 0.0 && osni_fails && ni_passes,
                format!(
                    "worst residual {:.3e} at epsilon {eps}, {:.3e} at epsilon 0",
                    worst_residual(&runs, false),
                    worst_residual(&runs, true)
                ),
            ),
            LawMutation::FlipU1Gradient => (
                "mutation_flip_u1_detected",
                ni_fails,
                format!("worst residual {:.3e} at epsilon 0", worst_residual(&runs, true)),
            ),
        };
        checks.push(Check { name, passed, detail });
        report.mutations.push(MutationReport { mutation, runs });
    }

    let (simulation, traj) = simulate(scenario)?;
    let c = &simulation.convergence;
    checks.push(Check {
        name: "convergence",
        passed: simulation.passed() && c.converged(),
        detail: format!(
            "|x({})| = {:.4e} (threshold {}), settled at {}",
            simulation.t_end,
            c.final_norm,
            c.threshold,
            c.settled_time.map_or("never".to_string(), |t| format!("{t:.3} s"))
        ),
    });
    report.simulation = Some(simulation);
    report.trajectory = Some(traj);
    report.checks = checks;
    Ok(report)
}

fn pd_detail(p: &Positivity) -> String {
    match &p.result {
        PdVerdict::PassedSampling { points, min_value } => {
            format!("{points} points on [-{0}, {0}]^n, min value {min_value:.3e}", p.half_width)
        }
        PdVerdict::FailedAt { point, value } => format!("value {value:.3e} at {point:?}"),
    }
}
