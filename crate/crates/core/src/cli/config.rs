use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::kinetics::ModelSpec;
use crate::spatial::WeightPolicy;
use crate::spiral::{NewtonOptions, Window};
use crate::wavetrain::RingSimulation;
use crate::{Error, Result, C64};

const REPRO: &str = include_str!("../../presets/repro.json");
const FIGURES: &str = include_str!("../../presets/figures.json");

/// Names of the shipped presets.
pub const PRESETS: [&str; 2] = ["repro", "figures"];

pub fn preset(name: &str) -> Result<RunConfig> {
    match name {
        "repro" => RunConfig::from_json(REPRO),
        "figures" => RunConfig::from_json(FIGURES),
        other => Err(Error::Config(format!("unknown preset '{other}', expected one of {PRESETS:?}"))),
    }
}

fn c0() -> C64 {
    C64::new(0.0, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "RunConfig::default_workers")]
    pub workers: usize,
    #[serde(default = "RunConfig::default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub weight: WeightConfig,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

impl RunConfig {
    fn default_workers() -> usize {
        1
    }

    fn default_output() -> PathBuf {
        PathBuf::from("out")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn task(&self, kind: TaskKind) -> Option<&Task> {
        self.tasks.iter().find(|t| t.kind() == kind)
    }

    /// Structural checks that need no computation.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        self.model.build()?;
        let mut seen = BTreeSet::new();
        for t in &self.tasks {
            if !seen.insert(t.kind()) {
                return bad(format!("task '{}' listed twice", t.kind().name()));
            }
        }
        if let WeightPolicy::SafetyFraction { theta, .. } = self.weight.policy {
            if !(0.0..1.0).contains(&theta) {
                return bad(format!("safety fraction {theta} outside [0, 1)"));
            }
        }
        for t in &self.tasks {
            for dep in t.requires() {
                if !seen.contains(&dep) {
                    return bad(format!("task '{}' needs task '{}'", t.kind().name(), dep.name()));
                }
            }
            if t.uses_selected_weight() && !seen.contains(&TaskKind::Curves) {
                return bad(format!("task '{}' uses the selected weight, which needs task 'curves'", t.kind().name()));
            }
            t.validate()?;
        }
        Ok(())
    }

    /// Keeps the named tasks and everything they depend on.
    pub fn filtered(&self, names: &[String]) -> Result<Self> {
        if names.is_empty() {
            return Ok(self.clone());
        }
        let mut keep = BTreeSet::new();
        for n in names {
            let kind = TaskKind::from_name(n)?;
            if self.task(kind).is_none() {
                return Err(Error::Config(format!("task '{n}' is not in the config")));
            }
            keep.insert(kind);
        }
        loop {
            let before = keep.len();
            for t in &self.tasks {
                if keep.contains(&t.kind()) {
                    keep.extend(t.requires());
                    if self.task(TaskKind::Curves).is_some() && t.reads_curves() {
                        keep.insert(TaskKind::Curves);
                    }
                }
            }
            if keep.len() == before {
                break;
            }
        }
        let mut out = self.clone();
        out.tasks.retain(|t| keep.contains(&t.kind()));
        Ok(out)
    }
}

/// Spectral parameter at which the weight is selected, and how.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub lambda: C64,
    #[serde(default)]
    pub policy: WeightPolicy,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { lambda: C64::new(-1.0, 0.5), policy: WeightPolicy::Midpoint }
    }
}

/// A weight given directly, or as a multiple of the selected one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightChoice {
    Fixed(f64),
    Selected { selected: f64 },
}

impl WeightChoice {
    pub fn resolve(&self, selected: Option<f64>) -> Result<f64> {
        match *self {
            WeightChoice::Fixed(eta) => Ok(eta),
            WeightChoice::Selected { selected: scale } => selected
                .map(|eta| scale * eta)
                .ok_or_else(|| Error::Config("selected weight requested but none was selected".into())),
        }
    }

    fn is_selected(&self) -> bool {
        matches!(self, WeightChoice::Selected { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskKind {
    ConvDiff,
    WaveTrain,
    SpiralSolve,
    Curves,
    SpiralEigs,
    SpiralCond,
    SpiralPseudo,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::ConvDiff,
        TaskKind::WaveTrain,
        TaskKind::SpiralSolve,
        TaskKind::Curves,
        TaskKind::SpiralEigs,
        TaskKind::SpiralCond,
        TaskKind::SpiralPseudo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::ConvDiff => "convdiff",
            TaskKind::WaveTrain => "wavetrain",
            TaskKind::SpiralSolve => "spiral.solve",
            TaskKind::Curves => "curves",
            TaskKind::SpiralEigs => "spiral.eigs",
            TaskKind::SpiralCond => "spiral.cond",
            TaskKind::SpiralPseudo => "spiral.pseudo",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown task '{name}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task")]
pub enum Task {
    #[serde(rename = "convdiff")]
    ConvDiff(ConvDiffTask),
    #[serde(rename = "wavetrain")]
    WaveTrain(WaveTrainTask),
    #[serde(rename = "spiral.solve")]
    SpiralSolve(SpiralSolveTask),
    #[serde(rename = "curves")]
    Curves(CurvesTask),
    #[serde(rename = "spiral.eigs")]
    SpiralEigs(SpiralEigsTask),
    #[serde(rename = "spiral.cond")]
    SpiralCond(SpiralCondTask),
    #[serde(rename = "spiral.pseudo")]
    SpiralPseudo(SpiralPseudoTask),
}

impl Task {
    pub fn kind(&self) -> TaskKind {
        match self {
            Task::ConvDiff(_) => TaskKind::ConvDiff,
            Task::WaveTrain(_) => TaskKind::WaveTrain,
            Task::SpiralSolve(_) => TaskKind::SpiralSolve,
            Task::Curves(_) => TaskKind::Curves,
            Task::SpiralEigs(_) => TaskKind::SpiralEigs,
            Task::SpiralCond(_) => TaskKind::SpiralCond,
            Task::SpiralPseudo(_) => TaskKind::SpiralPseudo,
        }
    }

    /// Hard dependencies.
    pub fn requires(&self) -> Vec<TaskKind> {
        match self {
            Task::ConvDiff(_) | Task::WaveTrain(_) | Task::SpiralSolve(_) => vec![],
            Task::Curves(c) => match c.source {
                CurveSource::WaveTrain => vec![TaskKind::WaveTrain],
                CurveSource::Spiral => vec![TaskKind::SpiralSolve],
            },
            Task::SpiralEigs(_) | Task::SpiralCond(_) | Task::SpiralPseudo(_) => vec![TaskKind::SpiralSolve],
        }
    }

    /// Spiral tasks annotate with the traced curves whenever they exist.
    pub fn reads_curves(&self) -> bool {
        matches!(self, Task::SpiralEigs(_) | Task::SpiralCond(_) | Task::SpiralPseudo(_))
    }

    fn uses_selected_weight(&self) -> bool {
        match self {
            Task::Curves(c) => c.fredholm.as_ref().is_some_and(|f| f.etas.iter().any(WeightChoice::is_selected)),
            Task::SpiralEigs(e) => e.runs.iter().any(|r| r.eta.is_selected()),
            Task::SpiralCond(c) => c.etas.iter().any(WeightChoice::is_selected),
            Task::SpiralPseudo(p) => p.eta.is_selected(),
            _ => false,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.kind().name())));
        let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        match self {
            Task::ConvDiff(t) => {
                if !(t.c > 0.0 && t.h > 0.0) {
                    return bad("c and h must be positive".into());
                }
                if t.spectra.iter().any(|s| s.k == 0 || !(s.radius > 0.0)) {
                    return bad("spectra need k > 0 and R > 0".into());
                }
                if let Some(r) = &t.resolvent {
                    if r.radii.len() < 2 || !positive(&r.radii) {
                        return bad("resolvent sweep needs at least two positive radii".into());
                    }
                }
            }
            Task::WaveTrain(t) => {
                if !(t.k > 0.0 && t.dk > 0.0 && t.dk < t.k) {
                    return bad("need 0 < dk < k".into());
                }
            }
            Task::SpiralSolve(t) => {
                if t.radii.is_empty() || !positive(&t.radii) || t.radii.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("radii must be positive and increasing".into());
                }
                if !(t.h_r > 0.0 && t.bootstrap.h_r >= t.h_r && t.bootstrap.dt > 0.0) || t.n_theta < 8 {
                    return bad("grid spacings, time step or angle count out of range".into());
                }
            }
            Task::Curves(t) => {
                if let Some(a) = &t.abs {
                    if a.re_lines.is_empty() || !(a.im_step > 0.0) || a.im_periods[0] >= a.im_periods[1] {
                        return bad("absolute-spectrum scan needs lines, a positive step and an increasing range".into());
                    }
                }
                if let Some(f) = &t.fredholm {
                    if f.samples < 2 || f.branches == 0 || !(f.periods > 0.0) {
                        return bad("Fredholm sampling needs two samples, one branch and a positive range".into());
                    }
                }
            }
            Task::SpiralEigs(t) => {
                if t.runs.iter().any(|r| r.k == 0 || !(r.tol > 0.0)) {
                    return bad("eigs runs need k > 0 and tol > 0".into());
                }
                if let Some(s) = &t.similarity {
                    if s.k < 2 || s.compare == 0 || s.compare > s.k || !(s.radius > 0.0) {
                        return bad("similarity check needs 0 < compare <= k and R > 0".into());
                    }
                }
            }
            Task::SpiralCond(t) => {
                if t.etas.is_empty() || t.lambdas.is_empty() {
                    return bad("need at least one weight and one lambda".into());
                }
            }
            Task::SpiralPseudo(t) => {
                if let Some(w) = &t.window {
                    w.validate().map_err(|e| Error::Config(e.to_string()))?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvDiffTask {
    #[serde(default = "ConvDiffTask::default_c")]
    pub c: f64,
    #[serde(default = "ConvDiffTask::default_h")]
    pub h: f64,
    #[serde(default)]
    pub spectra: Vec<CdSpectrum>,
    #[serde(default)]
    pub resolvent: Option<CdResolvent>,
    #[serde(default)]
    pub similarity: Option<CdSimilarity>,
}

impl ConvDiffTask {
    fn default_c() -> f64 {
        1.0
    }

    fn default_h() -> f64 {
        0.05
    }
}

fn default_k() -> usize {
    20
}

fn default_cd_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdSpectrum {
    #[serde(rename = "R")]
    pub radius: f64,
    pub eta: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "c0")]
    pub shift: C64,
    #[serde(default = "default_cd_tol")]
    pub tol: f64,
}

/// `sigma_min(L_{R,eta} - lambda)` over a sweep of `R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdResolvent {
    pub lambda: C64,
    pub radii: Vec<f64>,
    pub etas: Vec<f64>,
}

/// Spectra of `L_R` and of its diagonal conjugate `S L_R S^{-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdSimilarity {
    #[serde(rename = "R")]
    pub radius: f64,
    pub etas: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveTrainTask {
    pub k: f64,
    #[serde(default)]
    pub ring: RingSimulation,
    /// Step of the centered difference for the group velocity.
    #[serde(default = "WaveTrainTask::default_dk")]
    pub dk: f64,
    /// Positive real `lambda` where no spatial eigenvalue may be imaginary.
    #[serde(default = "WaveTrainTask::default_probes")]
    pub probes: Vec<f64>,
    #[serde(default)]
    pub dispersion: Option<DispersionConfig>,
}

impl WaveTrainTask {
    fn default_dk() -> f64 {
        2e-3
    }

    fn default_probes() -> Vec<f64> {
        vec![0.1, 0.5, 1.0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    pub k_min: f64,
    pub k_max: f64,
    pub ds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiralSolveTask {
    /// Solved in order; each later disk starts from the previous solution.
    pub radii: Vec<f64>,
    #[serde(default = "SpiralSolveTask::default_h")]
    pub h_r: f64,
    #[serde(default = "SpiralSolveTask::default_nt")]
    pub n_theta: usize,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub newton: NewtonOptions,
    /// Also dump every profile as CSV next to its JSON header.
    #[serde(default = "yes")]
    pub fields: bool,
}

fn yes() -> bool {
    true
}

impl SpiralSolveTask {
    fn default_h() -> f64 {
        0.05
    }

    fn default_nt() -> usize {
        64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub h_r: f64,
    pub steps: usize,
    pub dt: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { h_r: 0.1, steps: 6000, dt: 0.01 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSource {
    /// The train of the `wavetrain` task.
    WaveTrain,
    /// The train at the frequency of the largest solved spiral.
    Spiral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvesTask {
    pub source: CurveSource,
    /// Fourier modes of the coarse context used for scanning.
    #[serde(default = "CurvesTask::default_coarse")]
    pub m_coarse: usize,
    #[serde(default)]
    pub abs: Option<AbsConfig>,
    #[serde(default)]
    pub fredholm: Option<FredholmConfig>,
}

impl CurvesTask {
    fn default_coarse() -> usize {
        64
    }
}

/// Scan lines and trace window; imaginary ranges are in units of `omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsConfig {
    pub re_lines: Vec<f64>,
    pub im_periods: [f64; 2],
    pub im_step: f64,
    pub re_window: [f64; 2],
    /// Extra room beyond `im_periods` for the trace, in units of `omega`.
    #[serde(default = "AbsConfig::default_margin")]
    pub margin: f64,
    #[serde(default = "AbsConfig::default_steps")]
    pub steps: usize,
    #[serde(default = "AbsConfig::default_max_step")]
    pub max_step: f64,
}

impl AbsConfig {
    fn default_margin() -> f64 {
        0.1
    }

    fn default_steps() -> usize {
        400
    }

    fn default_max_step() -> f64 {
        0.04
    }
}

/// `gamma` runs over `periods` wavenumbers centered at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FredholmConfig {
    pub etas: Vec<WeightChoice>,
    pub periods: f64,
    pub samples: usize,
    pub branches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiralEigsTask {
    #[serde(default)]
    pub runs: Vec<EigsRun>,
    #[serde(default)]
    pub similarity: Option<SpiralSimilarity>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigsRun {
    /// Defaults to every solved radius.
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    pub eta: WeightChoice,
    pub k: usize,
    /// Defaults to the weight-selection `lambda`.
    #[serde(default)]
    pub shift: Option<C64>,
    pub tol: f64,
    #[serde(default)]
    pub vectors: usize,
}

/// Base state of the smallest spiral cut down to radius `R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiralSimilarity {
    #[serde(rename = "R")]
    pub radius: f64,
    pub etas: Vec<f64>,
    pub k: usize,
    /// Leading eigenvalues compared; the tail of a `k`-set can differ.
    pub compare: usize,
    #[serde(default = "c0")]
    pub shift: C64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiralCondTask {
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    pub etas: Vec<WeightChoice>,
    pub lambdas: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiralPseudoTask {
    /// Defaults to the largest solved radius.
    #[serde(default)]
    pub radius: Option<f64>,
    pub eta: WeightChoice,
    /// Defaults to one vertical period around the real axis.
    #[serde(default)]
    pub window: Option<Window>,
    #[serde(default = "SpiralPseudoTask::default_levels")]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub condition: bool,
}

impl SpiralPseudoTask {
    fn default_levels() -> Vec<f64> {
        vec![-1.0, -2.0, -4.0, -6.0, -8.0]
    }
}
