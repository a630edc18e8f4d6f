//! Scenario files: a TOML document with named blocks describing the plant, the
//! synthesis choices, an optional uncertainty, and how to simulate and verify.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use nisynth_core::expr::{parse_expr, Expr};
use nisynth_core::lyapunov::SquareMatrix;
use nisynth_core::sim::{SignalSpec, DEFAULT_BLOWUP};
use nisynth_core::synthesis::{
    auto_certificate, ClosedLoopSystem, GeneralForm, LawMutation, NormalFormPlant, SynthesisSpec, Target,
};
use nisynth_core::uncertainty::{Interconnection, OsniUncertainty};
use serde::{Deserialize, Serialize};

/// The scenario shipped with the binary: the two-output example plant with
/// the cubic/linear uncertainty.
pub const BUNDLED_EXAMPLE: &str = include_str!("../scenarios/normal_form_example.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub plant: PlantBlock,
    pub spec: SpecBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub general_form: Option<GeneralFormBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintyBlock>,
    pub simulation: SimulationBlock,
    #[serde(default)]
    pub verification: VerificationBlock,
    /// Expected control laws, compared by evaluation against the synthesized
    /// ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantBlock {
    pub p1: usize,
    pub p2: usize,
    pub a11: Vec<Vec<f64>>,
    /// One expression per internal state, over the outputs.
    pub p: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefaultKeyword {
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CertificateChoice {
    Auto(Auto),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum V2Choice {
    Default(DefaultKeyword),
    Expr(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecBlock {
    /// `"auto"` or a symmetric positive definite matrix.
    #[serde(rename = "P")]
    pub p: CertificateChoice,
    /// `"default"` (sum of squared outputs) or an expression over the outputs.
    pub v2: V2Choice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralFormBlock {
    pub j1: Vec<String>,
    pub j2: Vec<String>,
    pub l1: Vec<Vec<String>>,
    pub l2: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyBlock {
    /// Over states `xs1..` and inputs `us1..`.
    pub f: Vec<String>,
    pub h: Vec<String>,
    pub v: String,
    pub epsilon: f64,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub x0: Vec<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_blowup")]
    pub blowup: f64,
    #[serde(default = "default_input")]
    pub input: SignalSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationBlock {
    /// Horizon of the dissipation and `W` runs; the simulation horizon when
    /// absent. `--t-end` leaves it alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// `W' <= w_tol_per_dt * dt` along the interconnection.
    #[serde(default = "default_w_tol_per_dt")]
    pub w_tol_per_dt: f64,
    #[serde(default = "default_half_width")]
    pub box_half_width: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_threshold")]
    pub convergence_threshold: f64,
    #[serde(default = "default_window")]
    pub convergence_window: f64,
    #[serde(default = "default_catalog")]
    pub inputs: Vec<SignalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<LawMutation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceBlock {
    pub u1: Vec<String>,
    pub u2: Vec<String>,
    #[serde(default = "default_reference_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_reference_points")]
    pub points: usize,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_t_end() -> f64 {
    10.0
}
fn default_blowup() -> f64 {
    DEFAULT_BLOWUP
}
fn default_input() -> SignalSpec {
    SignalSpec::Zero
}
fn default_tol() -> f64 {
    1e-3
}
fn default_w_tol_per_dt() -> f64 {
    10.0
}
fn default_half_width() -> f64 {
    2.0
}
fn default_samples() -> usize {
    100_000
}
fn default_threshold() -> f64 {
    0.05
}
fn default_window() -> f64 {
    1.0
}
fn default_reference_tol() -> f64 {
    1e-9
}
fn default_reference_points() -> usize {
    100
}

/// Zero, a constant step and a two-tone multisine, broadcast to every channel.
pub fn default_catalog() -> Vec<SignalSpec> {
    vec![
        SignalSpec::Zero,
        SignalSpec::Step {
            amplitude: vec![0.5],
            start: 0.0,
        },
        SignalSpec::Multisine {
            amplitudes: vec![vec![0.5, 0.25]],
            frequencies: vec![vec![1.0, 2.7]],
        },
    ]
}

impl Default for VerificationBlock {
    fn default() -> Self {
        Self {
            t_end: None,
            tol: default_tol(),
            w_tol_per_dt: default_w_tol_per_dt(),
            box_half_width: default_half_width(),
            samples: default_samples(),
            convergence_threshold: default_threshold(),
            convergence_window: default_window(),
            inputs: default_catalog(),
            mutation: None,
        }
    }
}

/// Command line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

/// Where the storage certificate `P` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateSource {
    Auto,
    Scenario,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).context("malformed scenario")?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_EXAMPLE).expect("bundled scenario is valid")
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(dt) = o.dt {
            self.simulation.dt = dt;
        }
        if let Some(t) = o.t_end {
            self.simulation.t_end = t;
        }
        if let Some(seed) = o.seed {
            self.simulation.seed = seed;
        }
        if let Some(tol) = o.tol {
            self.verification.tol = tol;
        }
        self.validate()
    }

    /// Dimension bookkeeping across blocks; expressions are checked when built.
    pub fn validate(&self) -> Result<()> {
        let pl = &self.plant;
        let m = pl.a11.len();
        ensure!(m > 0, "plant.a11 must be non-empty");
        ensure!(pl.a11.iter().all(|r| r.len() == m), "plant.a11 must be square");
        ensure!(pl.p.len() == m, "plant.p has {} entries, a11 has order {m}", pl.p.len());
        let out = pl.p1 + pl.p2;
        ensure!(out > 0, "plant needs at least one output (p1 + p2 > 0)");
        let n = m + pl.p1 + 2 * pl.p2;
        if let CertificateChoice::Matrix(rows) = &self.spec.p {
            ensure!(
                rows.len() == m && rows.iter().all(|r| r.len() == m),
                "spec.P must be {m}x{m}"
            );
        }
        if let Some(g) = &self.general_form {
            ensure!(g.j1.len() == pl.p1 && g.l1.len() == pl.p1, "general_form j1/l1 need {} rows", pl.p1);
            ensure!(g.j2.len() == pl.p2 && g.l2.len() == pl.p2, "general_form j2/l2 need {} rows", pl.p2);
            ensure!(
                g.l1.iter().chain(&g.l2).all(|r| r.len() == out),
                "general_form l1/l2 rows need {out} entries"
            );
        }
        if let Some(u) = &self.uncertainty {
            ensure!(u.h.len() == out, "uncertainty.h has {} outputs, plant has {out}", u.h.len());
            ensure!(
                u.x0.len() == u.f.len(),
                "uncertainty.x0 has {} entries for {} states",
                u.x0.len(),
                u.f.len()
            );
        }
        let sim = &self.simulation;
        ensure!(sim.x0.len() == n, "simulation.x0 has {} entries, plant has {n} states", sim.x0.len());
        ensure!(sim.dt > 0.0 && sim.dt.is_finite(), "simulation.dt must be > 0");
        ensure!(sim.t_end >= sim.dt && sim.t_end.is_finite(), "simulation.t_end must be >= dt");
        ensure!(sim.blowup > 0.0, "simulation.blowup must be > 0");
        let v = &self.verification;
        if let Some(t) = v.t_end {
            ensure!(t >= sim.dt && t.is_finite(), "verification.t_end must be >= dt");
        }
        ensure!(v.tol >= 0.0 && v.tol.is_finite(), "verification.tol must be finite and >= 0");
        ensure!(v.w_tol_per_dt >= 0.0 && v.w_tol_per_dt.is_finite(), "verification.w_tol_per_dt must be >= 0");
        ensure!(v.box_half_width > 0.0, "verification.box_half_width must be > 0");
        ensure!(v.convergence_threshold > 0.0, "verification.convergence_threshold must be > 0");
        ensure!(v.convergence_window >= 0.0, "verification.convergence_window must be >= 0");
        if let Some(r) = &self.reference {
            ensure!(r.u1.len() == pl.p1 && r.u2.len() == pl.p2, "reference laws must have {} and {} entries", pl.p1, pl.p2);
        }
        Ok(())
    }

    pub fn build_plant(&self) -> Result<NormalFormPlant> {
        let pl = &self.plant;
        let a11 = SquareMatrix::from_rows(&pl.a11)?;
        let p: Vec<&str> = pl.p.iter().map(String::as_str).collect();
        Ok(NormalFormPlant::parse(a11, &p, pl.p1, pl.p2).context("plant block")?)
    }

    /// The certificate matrix and whether it was constructed automatically.
    pub fn certificate(&self, plant: &NormalFormPlant) -> Result<(SquareMatrix, CertificateSource)> {
        Ok(match &self.spec.p {
            CertificateChoice::Auto(_) => (auto_certificate(plant)?, CertificateSource::Auto),
            CertificateChoice::Matrix(rows) => (SquareMatrix::from_rows(rows)?, CertificateSource::Scenario),
        })
    }

    pub fn build_spec(&self, plant: &NormalFormPlant, p: SquareMatrix) -> Result<SynthesisSpec> {
        let target = self.spec.target;
        let v2 = match &self.spec.v2 {
            V2Choice::Default(_) => Expr::sum(plant.output_names().iter().map(|n| Expr::var(n).powi(2))),
            V2Choice::Expr(text) => parse_expr(text, &plant.output_names()).context("spec.v2")?,
        };
        let lambda = self.spec.lambda.unwrap_or(target.default_lambda());
        Ok(SynthesisSpec::new(p, v2, lambda, target)?)
    }

    /// Plant, certificate source and synthesized closed loop.
    pub fn build_closed_loop(&self) -> Result<(ClosedLoopSystem, CertificateSource)> {
        let plant = self.build_plant()?;
        let (p, source) = self.certificate(&plant)?;
        let spec = self.build_spec(&plant, p)?;
        Ok((ClosedLoopSystem::new(plant, spec)?, source))
    }

    pub fn build_general_form(&self, plant: &NormalFormPlant) -> Result<Option<GeneralForm>> {
        let Some(g) = &self.general_form else {
            return Ok(None);
        };
        let names = plant.state_names();
        let parse = |t: &String| parse_expr(t, &names).context("general_form");
        let row = |r: &Vec<String>| r.iter().map(parse).collect::<Result<Vec<_>>>();
        let j1 = g.j1.iter().map(parse).collect::<Result<Vec<_>>>()?;
        let j2 = g.j2.iter().map(parse).collect::<Result<Vec<_>>>()?;
        let l1 = g.l1.iter().map(row).collect::<Result<Vec<_>>>()?;
        let l2 = g.l2.iter().map(row).collect::<Result<Vec<_>>>()?;
        Ok(Some(GeneralForm::new(plant, j1, j2, l1, l2)?))
    }

    pub fn build_uncertainty(&self) -> Result<Option<OsniUncertainty>> {
        let Some(u) = &self.uncertainty else {
            return Ok(None);
        };
        let f: Vec<&str> = u.f.iter().map(String::as_str).collect();
        let h: Vec<&str> = u.h.iter().map(String::as_str).collect();
        Ok(Some(OsniUncertainty::parse(&f, &h, &u.v, u.epsilon).context("uncertainty block")?))
    }

    pub fn build_interconnection(&self, cl: &ClosedLoopSystem) -> Result<Option<Interconnection>> {
        match self.build_uncertainty()? {
            Some(unc) => Ok(Some(Interconnection::new(cl.clone(), unc)?)),
            None => Ok(None),
        }
    }

    /// Plant state followed by the uncertainty state, if any.
    pub fn joint_x0(&self) -> Vec<f64> {
        let mut x = self.simulation.x0.clone();
        if let Some(u) = &self.uncertainty {
            x.extend_from_slice(&u.x0);
        }
        x
    }

    pub fn verification_horizon(&self) -> f64 {
        self.verification.t_end.unwrap_or(self.simulation.t_end)
    }

    /// `C dt`, the allowance on the estimated `W'`.
    pub fn w_tol(&self) -> f64 {
        self.verification.w_tol_per_dt * self.simulation.dt
    }

    pub fn reference_laws(&self, plant: &NormalFormPlant) -> Result<Option<(Vec<Expr>, Vec<Expr>)>> {
        let Some(r) = &self.reference else {
            return Ok(None);
        };
        let names = plant.state_names();
        let parse = |t: &String| parse_expr(t, &names).context("reference law");
        let u1 = r.u1.iter().map(parse).collect::<Result<Vec<_>>>()?;
        let u2 = r.u2.iter().map(parse).collect::<Result<Vec<_>>>()?;
        Ok(Some((u1, u2)))
    }
}
