//! JSON run configuration: problem description, task selection, and task
//! parameters. Analytic data is given as expressions over `x1`, `x2`;
//! tabulated data as CSV paths (validated at parse time).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use nsoc_core::grid::{boundary_field_from_csv, build_grid, field_from_csv, BoundaryField, Field, Grid};
use nsoc_core::nonsmooth::{Branch, Pc1Function};
use nsoc_core::objective::{Bound, BoundaryBound, ProblemSpec};
use nsoc_core::operator::{ControlPair, KinkSide};
use nsoc_core::optimize::OptimizeConfig;
use nsoc_core::pde::SolverConfig;
use nsoc_core::stationarity::Tolerances;

use crate::expr::Expr;
use crate::CliError;

/// Scalar data on the grid: a constant, an expression in `x1`, `x2`, or a
/// CSV file produced by this tool.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Constant(f64),
    Expression(String),
    Csv { csv: PathBuf },
}

impl FieldSpec {
    pub fn zero() -> FieldSpec {
        FieldSpec::Constant(0.0)
    }

    fn validate(&self, path: &str, base: &Path) -> Result<(), CliError> {
        match self {
            FieldSpec::Constant(c) => {
                if !c.is_finite() {
                    return Err(CliError::Config(format!("{path}: non-finite constant")));
                }
            }
            FieldSpec::Expression(s) => {
                Expr::parse(s)
                    .map_err(|e| CliError::Config(format!("{path}: bad expression: {e}")))?;
            }
            FieldSpec::Csv { csv } => {
                let full = resolve(base, csv);
                if !full.is_file() {
                    return Err(CliError::Config(format!(
                        "{path}: file not found: {}",
                        full.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sample_field(&self, grid: &Arc<Grid>, base: &Path) -> Result<Field, CliError> {
        Ok(match self {
            FieldSpec::Constant(c) => Field::constant(grid.clone(), *c),
            FieldSpec::Expression(s) => {
                let e = Expr::parse(s).map_err(|e| CliError::Config(e.to_string()))?;
                Field::from_fn(grid.clone(), |x, y| e.eval(x, y))
            }
            FieldSpec::Csv { csv } => {
                let text = std::fs::read_to_string(resolve(base, csv))?;
                field_from_csv(grid.clone(), &text)?
            }
        })
    }

    pub fn sample_boundary(&self, grid: &Arc<Grid>, base: &Path) -> Result<BoundaryField, CliError> {
        Ok(match self {
            FieldSpec::Constant(c) => BoundaryField::constant(grid.clone(), *c),
            FieldSpec::Expression(s) => {
                let e = Expr::parse(s).map_err(|e| CliError::Config(e.to_string()))?;
                BoundaryField::from_fn(grid.clone(), |x, y| e.eval(x, y))
            }
            FieldSpec::Csv { csv } => {
                let text = std::fs::read_to_string(resolve(base, csv))?;
                boundary_field_from_csv(grid.clone(), &text)?
            }
        })
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    /// `[x0, y0, lx, ly]`.
    #[serde(default = "unit_rect")]
    pub rect: [f64; 4],
}

fn unit_rect() -> [f64; 4] {
    [0.0, 0.0, 1.0, 1.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Pc1Config {
    Max0,
    Smooth,
    Kink { s1: f64, s2: f64, t_bar: f64 },
    Custom { t_bar: f64, d1: Branch, d2: Branch },
}

impl Pc1Config {
    pub fn build(&self) -> Result<Pc1Function, CliError> {
        Ok(match self {
            Pc1Config::Max0 => Pc1Function::max0(),
            Pc1Config::Smooth => Pc1Function::smooth(),
            Pc1Config::Kink { s1, s2, t_bar } => Pc1Function::kink(*s1, *s2, *t_bar)?,
            Pc1Config::Custom { t_bar, d1, d2 } => Pc1Function::new(*t_bar, *d1, *d2)?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub grid: GridConfig,
    pub pc1: Pc1Config,
    #[serde(default = "FieldSpec::zero")]
    pub y_omega: FieldSpec,
    #[serde(default = "FieldSpec::zero")]
    pub y_gamma: FieldSpec,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "one")]
    pub kappa_omega: f64,
    #[serde(default = "one")]
    pub kappa_gamma: f64,
    #[serde(default = "FieldSpec::one")]
    pub b: FieldSpec,
    /// Upper bound for the distributed control; absent means unconstrained.
    #[serde(default)]
    pub u_bound: Option<FieldSpec>,
    #[serde(default)]
    pub v_bound: Option<FieldSpec>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub delta_level_rel: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl FieldSpec {
    fn one() -> FieldSpec {
        FieldSpec::Constant(1.0)
    }
}

impl ProblemConfig {
    fn validate(&self, base: &Path) -> Result<(), CliError> {
        if self.grid.nx < 3 || self.grid.ny < 3 {
            return Err(CliError::Config(format!(
                "problem.grid: need at least 3 nodes per axis, got {} x {}",
                self.grid.nx, self.grid.ny
            )));
        }
        if !(self.grid.rect[2] > 0.0 && self.grid.rect[3] > 0.0) {
            return Err(CliError::Config(
                "problem.grid.rect: side lengths must be positive".into(),
            ));
        }
        if self.alpha < 0.0 {
            return Err(CliError::Config(
                "problem.alpha: the boundary tracking weight must be nonnegative".into(),
            ));
        }
        if !(self.kappa_omega > 0.0) || !(self.kappa_gamma > 0.0) {
            return Err(CliError::Config(
                "problem.kappa_omega / kappa_gamma: control cost weights must be positive".into(),
            ));
        }
        self.pc1.build()?;
        self.y_omega.validate("problem.y_omega", base)?;
        self.y_gamma.validate("problem.y_gamma", base)?;
        self.b.validate("problem.b", base)?;
        if let Some(ub) = &self.u_bound {
            ub.validate("problem.u_bound", base)?;
        }
        if let Some(vb) = &self.v_bound {
            vb.validate("problem.v_bound", base)?;
        }
        if let Some(s) = &self.solver {
            s.validate()?;
        }
        if let Some(d) = self.delta_level_rel {
            if !(d > 0.0) {
                return Err(CliError::Config(
                    "problem.delta_level_rel must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn build(&self, base: &Path) -> Result<ProblemSpec, CliError> {
        let grid = build_grid(self.grid.nx, self.grid.ny, self.grid.rect)?;
        let pc1 = self.pc1.build()?;
        let y_omega = self.y_omega.sample_field(&grid, base)?;
        let y_gamma = self.y_gamma.sample_boundary(&grid, base)?;
        let b = self.b.sample_boundary(&grid, base)?;
        let u_bound = match &self.u_bound {
            Some(s) => Bound::Field(s.sample_field(&grid, base)?),
            None => Bound::Infinite,
        };
        let v_bound = match &self.v_bound {
            Some(s) => BoundaryBound::Field(s.sample_boundary(&grid, base)?),
            None => BoundaryBound::Infinite,
        };
        let mut spec = ProblemSpec::new(
            grid,
            pc1,
            y_omega,
            y_gamma,
            self.alpha,
            self.kappa_omega,
            self.kappa_gamma,
            b,
            u_bound,
            v_bound,
            self.solver.clone().unwrap_or_default(),
        )?;
        if let Some(d) = self.delta_level_rel {
            spec.delta_level_rel = d;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    SolveState,
    Optimize,
    Verify,
    BouligandLimit,
    WsetLimit,
    ConvergenceStudy,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::SolveState => "solve-state",
            TaskKind::Optimize => "optimize",
            TaskKind::Verify => "verify",
            TaskKind::BouligandLimit => "bouligand-limit",
            TaskKind::WsetLimit => "wset-limit",
            TaskKind::ConvergenceStudy => "convergence-study",
        }
    }

    /// Tasks that draw random probes require an explicit seed.
    pub fn randomized(self) -> bool {
        matches!(self, TaskKind::Verify | TaskKind::BouligandLimit)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveStateParams {
    #[serde(default = "FieldSpec::zero")]
    pub u: FieldSpec,
    #[serde(default = "FieldSpec::zero")]
    pub v: FieldSpec,
    #[serde(default)]
    pub vtk: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeParams {
    #[serde(flatten)]
    pub config: OptimizeConfig,
    pub start_u: Option<FieldSpec>,
    pub start_v: Option<FieldSpec>,
    /// Probes of the terminal B-stationarity sample check.
    pub check_probes: usize,
}

impl Default for OptimizeParams {
    fn default() -> Self {
        OptimizeParams {
            config: OptimizeConfig::default(),
            start_u: None,
            start_v: None,
            check_probes: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyParams {
    pub u: FieldSpec,
    pub v: FieldSpec,
    pub n_probes: usize,
    pub probe_radius: f64,
    pub tolerances: Tolerances,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            u: FieldSpec::zero(),
            v: FieldSpec::zero(),
            n_probes: 200,
            probe_radius: 1.0,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BouligandLimitParams {
    pub u: FieldSpec,
    pub v: FieldSpec,
    pub side: KinkSide,
    pub sigma: f64,
    pub k_lo: i32,
    pub k_hi: i32,
    pub n_probes: usize,
}

impl Default for BouligandLimitParams {
    fn default() -> Self {
        BouligandLimitParams {
            u: FieldSpec::zero(),
            v: FieldSpec::zero(),
            side: KinkSide::Minus,
            sigma: 0.0,
            k_lo: 3,
            k_hi: 10,
            n_probes: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WsetLimitParams {
    pub u: FieldSpec,
    pub v: FieldSpec,
    pub side: KinkSide,
    pub sigma: f64,
    pub k_lo: i32,
    pub k_hi: i32,
    pub f: FieldSpec,
    pub h: FieldSpec,
}

impl Default for WsetLimitParams {
    fn default() -> Self {
        WsetLimitParams {
            u: FieldSpec::zero(),
            v: FieldSpec::zero(),
            side: KinkSide::Minus,
            sigma: 0.0,
            k_lo: 3,
            k_hi: 10,
            f: FieldSpec::Constant(1.0),
            h: FieldSpec::Constant(1.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceStudyParams {
    pub nx_list: Vec<usize>,
}

impl Default for ConvergenceStudyParams {
    fn default() -> Self {
        ConvergenceStudyParams { nx_list: vec![17, 33, 65] }
    }
}

#[derive(Debug, Clone)]
pub enum TaskParams {
    SolveState(SolveStateParams),
    Optimize(OptimizeParams),
    Verify(VerifyParams),
    BouligandLimit(BouligandLimitParams),
    WsetLimit(WsetLimitParams),
    ConvergenceStudy(ConvergenceStudyParams),
}

/// Parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: TaskKind,
    pub problem: ProblemConfig,
    pub params: TaskParams,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    /// Directory of the config file; CSV paths resolve relative to it.
    pub base_dir: PathBuf,
    /// The raw document, echoed into the run manifest.
    pub raw: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    task: TaskKind,
    problem: ProblemConfig,
    #[serde(default)]
    params: Value,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    seed: Option<u64>,
}

/// Parse and validate a config file. Schema violations and invariant
/// violations are reported with their location.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let raw_value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let raw: RawConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base_dir = path
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."));
    raw.problem.validate(&base_dir)?;

    let pv = raw.params.clone();
    let params = match raw.task {
        TaskKind::SolveState => TaskParams::SolveState(parse_params(pv)?),
        TaskKind::Optimize => TaskParams::Optimize(parse_params(pv)?),
        TaskKind::Verify => TaskParams::Verify(parse_params(pv)?),
        TaskKind::BouligandLimit => TaskParams::BouligandLimit(parse_params(pv)?),
        TaskKind::WsetLimit => TaskParams::WsetLimit(parse_params(pv)?),
        TaskKind::ConvergenceStudy => TaskParams::ConvergenceStudy(parse_params(pv)?),
    };
    validate_params(&params, &base_dir)?;

    if raw.task.randomized() && raw.seed.is_none() {
        return Err(CliError::Config(format!(
            "seed: required for the randomized task '{}'",
            raw.task.name()
        )));
    }

    Ok(RunConfig {
        task: raw.task,
        problem: raw.problem,
        params,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        seed: raw.seed,
        base_dir,
        raw: raw_value,
    })
}

fn parse_params<T: Default + for<'de> Deserialize<'de>>(v: Value) -> Result<T, CliError> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v).map_err(|e| CliError::Config(format!("params: {e}")))
}

fn validate_params(params: &TaskParams, base: &Path) -> Result<(), CliError> {
    match params {
        TaskParams::SolveState(p) => {
            p.u.validate("params.u", base)?;
            p.v.validate("params.v", base)?;
        }
        TaskParams::Optimize(p) => {
            p.config.validate()?;
            if let Some(u) = &p.start_u {
                u.validate("params.start_u", base)?;
            }
            if let Some(v) = &p.start_v {
                v.validate("params.start_v", base)?;
            }
        }
        TaskParams::Verify(p) => {
            p.u.validate("params.u", base)?;
            p.v.validate("params.v", base)?;
            if p.n_probes == 0 {
                return Err(CliError::Config("params.n_probes must be positive".into()));
            }
        }
        TaskParams::BouligandLimit(p) => {
            p.u.validate("params.u", base)?;
            p.v.validate("params.v", base)?;
            if p.k_lo > p.k_hi {
                return Err(CliError::Config("params: k_lo must be <= k_hi".into()));
            }
            if p.sigma < 0.0 {
                return Err(CliError::Config("params.sigma must be nonnegative".into()));
            }
        }
        TaskParams::WsetLimit(p) => {
            p.u.validate("params.u", base)?;
            p.v.validate("params.v", base)?;
            p.f.validate("params.f", base)?;
            p.h.validate("params.h", base)?;
            if p.k_lo > p.k_hi {
                return Err(CliError::Config("params: k_lo must be <= k_hi".into()));
            }
        }
        TaskParams::ConvergenceStudy(p) => {
            if p.nx_list.len() < 2 {
                return Err(CliError::Config(
                    "params.nx_list needs at least two grid sizes".into(),
                ));
            }
            if p.nx_list.iter().any(|&n| n < 3) {
                return Err(CliError::Config("params.nx_list entries must be >= 3".into()));
            }
        }
    }
    Ok(())
}

/// Load a control pair from field specs.
pub fn load_control(
    spec: &ProblemSpec,
    u: &FieldSpec,
    v: &FieldSpec,
    base: &Path,
) -> Result<ControlPair, CliError> {
    Ok(ControlPair {
        u: u.sample_field(spec.grid(), base)?,
        v: v.sample_boundary(spec.grid(), base)?,
    })
}
