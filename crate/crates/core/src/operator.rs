//! The control-to-state map `S`, its one-sided derivative, the left/right
//! Bouligand generalized derivatives `G∓`, the adjoint solve, ε-perturbed
//! control sequences, and the limit diagnostics that probe membership of
//! `G∓` in the generalized differential of `S`.
//!
//! The two coefficient fields select branch slopes on the kink band of the
//! state:
//!
//! ```text
//!   a_-  = d1'(y) on {y <= t_bar + δ},   d2'(y) on {y > t_bar + δ},
//!   a_+  = d1'(y) on {y < t_bar - δ},    d2'(y) on {y >= t_bar - δ},
//! ```
//!
//! and `G∓(f, h)` solves the linearized Robin problem with the matching
//! coefficient. Off the band the two coincide with `d'(y)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::grid::{
    inner_gamma, inner_omega, level_set_measure, norm_h1, trace, BoundaryField, Field,
};
use crate::objective::{Bound, BoundaryBound, ProblemSpec};
use crate::pde::{solve_directional, solve_linear, solve_state, SolveReport};
use crate::{Error, Result};

/// A distributed/boundary control pair `(u, v)`.
#[derive(Debug, Clone)]
pub struct ControlPair {
    pub u: Field,
    pub v: BoundaryField,
}

impl ControlPair {
    pub fn zeros(grid: std::sync::Arc<crate::grid::Grid>) -> ControlPair {
        ControlPair { u: Field::zeros(grid.clone()), v: BoundaryField::zeros(grid) }
    }

    pub fn axpy(&self, s: f64, other: &ControlPair) -> ControlPair {
        ControlPair { u: self.u.axpy(s, &other.u), v: self.v.axpy(s, &other.v) }
    }

    /// `sqrt(||u||²_Ω + ||v||²_Γ)`.
    pub fn norm(&self) -> f64 {
        (inner_omega(&self.u, &self.u).expect("same grid")
            + inner_gamma(&self.v, &self.v).expect("same grid"))
        .sqrt()
    }
}

/// Left (minus) or right (plus) side of the kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KinkSide {
    Minus,
    Plus,
}

/// Branch-slope coefficient fields of a state, with the kink-band mask.
#[derive(Debug, Clone)]
pub struct CoefficientPair {
    pub a_minus: Field,
    pub a_plus: Field,
    /// Nodes with `|y - t_bar| <= delta`.
    pub kink_mask: Vec<bool>,
}

impl CoefficientPair {
    pub fn side(&self, side: KinkSide) -> &Field {
        match side {
            KinkSide::Minus => &self.a_minus,
            KinkSide::Plus => &self.a_plus,
        }
    }
}

/// ε-sequence and the induced ρ rule for the limit diagnostics:
/// `ρ_k = ε_k / σ` for `σ > 0`, `ρ_k = sqrt(ε_k)` for `σ = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BouligandLimitConfig {
    pub epsilons: Vec<f64>,
    pub sigma: f64,
}

impl BouligandLimitConfig {
    /// Default sequence `ε_k = 2^{-k}`, `k = 3..=10`.
    pub fn new(sigma: f64) -> BouligandLimitConfig {
        BouligandLimitConfig {
            epsilons: (3..=10).map(|k| 0.5f64.powi(k)).collect(),
            sigma,
        }
    }

    pub fn with_k_range(sigma: f64, k_lo: i32, k_hi: i32) -> BouligandLimitConfig {
        BouligandLimitConfig {
            epsilons: (k_lo..=k_hi).map(|k| 0.5f64.powi(k)).collect(),
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 {
            return Err(Error::InvalidData("sigma must be nonnegative".into()));
        }
        if self.epsilons.is_empty() {
            return Err(Error::InvalidData("epsilon sequence is empty".into()));
        }
        for w in self.epsilons.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::InvalidData(
                    "epsilon sequence must be strictly decreasing".into(),
                ));
            }
        }
        if !(self.epsilons[0] < 1.0) || !(self.epsilons[self.epsilons.len() - 1] > 0.0) {
            return Err(Error::InvalidData("epsilons must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn rho(&self, eps: f64) -> f64 {
        if self.sigma > 0.0 {
            eps / self.sigma
        } else {
            eps.sqrt()
        }
    }
}

/// The control-to-state map: solve the nonlinear state equation.
pub fn control_to_state(spec: &ProblemSpec, w: &ControlPair) -> Result<Field> {
    Ok(control_to_state_report(spec, w)?.0)
}

pub fn control_to_state_report(spec: &ProblemSpec, w: &ControlPair) -> Result<(Field, SolveReport)> {
    solve_state(spec.robin(), &spec.pc1, &w.u, &w.v, &spec.solver)
}

/// Branch-slope coefficient fields of the state `y` with band half-width
/// `delta_level`.
pub fn coefficients(spec: &ProblemSpec, y: &Field, delta_level: f64) -> CoefficientPair {
    let d = &spec.pc1;
    let t_bar = d.t_bar;
    let n = y.values.len();
    let mut a_minus = Vec::with_capacity(n);
    let mut a_plus = Vec::with_capacity(n);
    let mut kink_mask = Vec::with_capacity(n);
    for &t in &y.values {
        let s1 = d.d1.deriv(t);
        let s2 = d.d2.deriv(t);
        a_minus.push(if t <= t_bar + delta_level { s1 } else { s2 });
        a_plus.push(if t < t_bar - delta_level { s1 } else { s2 });
        kink_mask.push((t - t_bar).abs() <= delta_level);
    }
    CoefficientPair {
        a_minus: Field::new(y.grid().clone(), a_minus).expect("finite slopes"),
        a_plus: Field::new(y.grid().clone(), a_plus).expect("finite slopes"),
        kink_mask,
    }
}

/// One-sided derivative `S'(u, v; f, h)` of the control-to-state map at the
/// state `y`.
pub fn dir_deriv(spec: &ProblemSpec, y: &Field, f: &Field, h: &BoundaryField) -> Result<Field> {
    solve_directional(
        spec.robin(),
        &spec.pc1,
        y,
        f,
        h,
        spec.delta_level(y),
        &spec.solver,
    )
}

/// Left Bouligand generalized derivative: linear solve with coefficient `a_-`.
pub fn g_minus(spec: &ProblemSpec, y: &Field, f: &Field, h: &BoundaryField) -> Result<Field> {
    let c = coefficients(spec, y, spec.delta_level(y));
    solve_linear(spec.robin(), &c.a_minus, f, h, &spec.solver)
}

/// Right Bouligand generalized derivative: linear solve with coefficient `a_+`.
pub fn g_plus(spec: &ProblemSpec, y: &Field, f: &Field, h: &BoundaryField) -> Result<Field> {
    let c = coefficients(spec, y, spec.delta_level(y));
    solve_linear(spec.robin(), &c.a_plus, f, h, &spec.solver)
}

/// Apply the generalized derivative with an explicit coefficient field.
pub fn g_with_coefficient(
    spec: &ProblemSpec,
    a: &Field,
    f: &Field,
    h: &BoundaryField,
) -> Result<Field> {
    solve_linear(spec.robin(), a, f, h, &spec.solver)
}

/// Adjoint of the generalized derivative with coefficient `a`: solve with
/// interior source `phi` and zero boundary source, return the solution and
/// its trace.
pub fn g_adjoint(
    spec: &ProblemSpec,
    a: &Field,
    phi: &Field,
) -> Result<(Field, BoundaryField)> {
    let zeta = solve_linear(
        spec.robin(),
        a,
        phi,
        &BoundaryField::zeros(spec.grid().clone()),
        &spec.solver,
    )?;
    let tr = trace(&zeta);
    Ok((zeta, tr))
}

/// ε-perturbed control: the minus side shifts both controls down by ε, the
/// plus side moves them toward finite bounds by the factor ε (or up by ε
/// under infinite bounds). Admissibility is preserved.
pub fn perturb_controls(
    spec: &ProblemSpec,
    w: &ControlPair,
    eps: f64,
    side: KinkSide,
) -> Result<ControlPair> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidPerturbation(format!(
            "epsilon must lie in (0, 1), got {eps}"
        )));
    }
    match side {
        KinkSide::Minus => Ok(ControlPair {
            u: w.u.map(|u| u - eps),
            v: w.v.map(|v| v - eps),
        }),
        KinkSide::Plus => {
            if spec.bounds_finite() && spec.at_bounds(w) {
                return Err(Error::InvalidPerturbation(
                    "plus-side perturbation requires a control different from the bounds".into(),
                ));
            }
            let u = match &spec.u_bound {
                Bound::Field(ub) => Field::new(
                    w.u.grid().clone(),
                    w.u.values
                        .iter()
                        .zip(&ub.values)
                        .map(|(u, b)| u + eps * (b - u))
                        .collect(),
                )?,
                Bound::Infinite => w.u.map(|u| u + eps),
            };
            let v = match &spec.v_bound {
                BoundaryBound::Field(vb) => BoundaryField::new(
                    w.v.grid().clone(),
                    w.v.values
                        .iter()
                        .zip(&vb.values)
                        .map(|(v, b)| v + eps * (b - v))
                        .collect(),
                )?,
                BoundaryBound::Infinite => w.v.map(|v| v + eps),
            };
            Ok(ControlPair { u, v })
        }
    }
}

/// Gâteaux defect of a state: `|d1'(t_bar) - d2'(t_bar)|` times the band
/// measure of `{|y - t_bar| <= delta_level}`. Zero iff the discrete Gâteaux
/// characterization holds.
pub fn gateaux_defect_state(spec: &ProblemSpec, y: &Field) -> f64 {
    spec.pc1.slope_jump().abs() * level_set_measure(y, spec.pc1.t_bar, spec.delta_level(y))
}

/// Gâteaux defect of a control (solves for the state).
pub fn gateaux_defect(spec: &ProblemSpec, w: &ControlPair) -> Result<f64> {
    Ok(gateaux_defect_state(spec, &control_to_state(spec, w)?))
}

/// The nonnegative perturbation directions of the two sides: minus is the
/// constant pair `(1, 1)`, plus is `(u_b - u, v_b - v)` under finite bounds
/// and `(1, 1)` otherwise.
pub fn variational_funcs(
    spec: &ProblemSpec,
    w: &ControlPair,
    side: KinkSide,
) -> (Field, BoundaryField) {
    match side {
        KinkSide::Minus => (
            Field::constant(spec.grid().clone(), 1.0),
            BoundaryField::constant(spec.grid().clone(), 1.0),
        ),
        KinkSide::Plus => {
            let u = match &spec.u_bound {
                Bound::Field(ub) => ub.axpy(-1.0, &w.u),
                Bound::Infinite => Field::constant(spec.grid().clone(), 1.0),
            };
            let v = match &spec.v_bound {
                BoundaryBound::Field(vb) => vb.axpy(-1.0, &w.v),
                BoundaryBound::Infinite => BoundaryField::constant(spec.grid().clone(), 1.0),
            };
            (u, v)
        }
    }
}

/// One row of a limit-diagnostic convergence table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitRow {
    pub eps: f64,
    pub rho: f64,
    pub probe_id: usize,
    pub err_h1: f64,
    pub err_max: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<LimitRow>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,rho,probe_id,err_h1,err_max,degenerate_flag\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{},{:.16e},{:.16e},{}",
                r.eps, r.rho, r.probe_id, r.err_h1, r.err_max, u8::from(r.degenerate)
            );
        }
        s
    }

    /// Errors of one probe, in ε order.
    pub fn probe_errors(&self, probe_id: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.probe_id == probe_id)
            .map(|r| r.err_h1)
            .collect()
    }
}

/// Resample ε away from degenerate values (states with positive band
/// measure), nudging by the factor `1 + 1e-3` up to five times. Returns the
/// perturbed control, its state, the ε actually used, and the degeneracy
/// flag of the final attempt.
fn perturbed_gateaux_point(
    spec: &ProblemSpec,
    w: &ControlPair,
    eps0: f64,
    side: KinkSide,
) -> Result<(ControlPair, Field, f64, bool)> {
    let mut eps = eps0;
    let mut last = None;
    for _ in 0..=5 {
        let wk = perturb_controls(spec, w, eps, side)?;
        let yk = control_to_state(spec, &wk)?;
        let defect = gateaux_defect_state(spec, &yk);
        if defect == 0.0 {
            return Ok((wk, yk, eps, false));
        }
        last = Some((wk, yk, eps));
        eps *= 1.0 + 1e-3;
    }
    let (wk, yk, eps) = last.expect("at least one attempt");
    Ok((wk, yk, eps, true))
}

/// Probe the strong-operator convergence `S'(w_ε) -> G_side(w)`: for each
/// `ε_k`, perturb the control, verify the perturbed state is a Gâteaux point
/// (resampling degenerate ε), and measure
/// `||S'(w_k)(f, h) - G_side(w)(f, h)||` per probe in the discrete H¹ and
/// max norms.
pub fn bouligand_limit_test(
    spec: &ProblemSpec,
    w: &ControlPair,
    cfg: &BouligandLimitConfig,
    side: KinkSide,
    probes: &[(Field, BoundaryField)],
) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let y = control_to_state(spec, w)?;
    let refs: Vec<Field> = probes
        .iter()
        .map(|(f, h)| match side {
            KinkSide::Minus => g_minus(spec, &y, f, h),
            KinkSide::Plus => g_plus(spec, &y, f, h),
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &eps0 in &cfg.epsilons {
        let (wk, yk, eps, degenerate) = perturbed_gateaux_point(spec, w, eps0, side)?;
        let _ = wk;
        for (probe_id, ((f, h), reference)) in probes.iter().zip(&refs).enumerate() {
            let zk = dir_deriv(spec, &yk, f, h)?;
            let diff = zk.axpy(-1.0, reference);
            rows.push(LimitRow {
                eps,
                rho: cfg.rho(eps),
                probe_id,
                err_h1: norm_h1(&diff),
                err_max: diff.norm_max(),
                degenerate,
            });
        }
    }
    Ok(ConvergenceTable { rows })
}

/// Result of the second-order limit diagnostic for the sets identifying the
/// gap between directional and Bouligand generalized derivatives.
#[derive(Debug, Clone)]
pub struct WsetResult {
    /// Final difference-quotient approximation `η_k / ρ_k`.
    pub e_numeric: Field,
    /// Closed-form limit element.
    pub e_formula: Field,
    pub table: ConvergenceTable,
}

/// Probe the characterization of the limit sets: for each `ε_k` with
/// `ρ_k` by the configured rule, compute
/// `η_k = S(w_k + ρ_k (f,h)) - S(w_k) - ρ_k S'(w_k)(f,h)` at the perturbed
/// Gâteaux points `w_k` and compare `η_k / ρ_k` with the closed-form element
/// `S'(w; f ∓ σ ũ, h ∓ σ ṽ) - G∓(w)(f ∓ σ ũ, h ∓ σ ṽ)`.
pub fn wset_limit_test(
    spec: &ProblemSpec,
    w: &ControlPair,
    cfg: &BouligandLimitConfig,
    side: KinkSide,
    f: &Field,
    h: &BoundaryField,
) -> Result<WsetResult> {
    cfg.validate()?;
    if side == KinkSide::Plus && spec.bounds_finite() && spec.at_bounds(w) {
        return Err(Error::InvalidPerturbation(
            "plus-side limit requires a control different from the bounds".into(),
        ));
    }
    let y = control_to_state(spec, w)?;
    let (ut, vt) = variational_funcs(spec, w, side);
    let sign = match side {
        KinkSide::Minus => -1.0,
        KinkSide::Plus => 1.0,
    };
    let fa = f.axpy(sign * cfg.sigma, &ut);
    let ha = h.axpy(sign * cfg.sigma, &vt);
    let e_formula = {
        let sp = dir_deriv(spec, &y, &fa, &ha)?;
        let gv = match side {
            KinkSide::Minus => g_minus(spec, &y, &fa, &ha)?,
            KinkSide::Plus => g_plus(spec, &y, &fa, &ha)?,
        };
        sp.axpy(-1.0, &gv)
    };

    let mut rows = Vec::new();
    let mut e_numeric = Field::zeros(spec.grid().clone());
    for &eps0 in &cfg.epsilons {
        let (wk, yk, eps, degenerate) = perturbed_gateaux_point(spec, w, eps0, side)?;
        let rho = cfg.rho(eps);
        let zk = dir_deriv(spec, &yk, f, h)?;
        let w_shift = ControlPair { u: wk.u.axpy(rho, f), v: wk.v.axpy(rho, h) };
        let yk_fh = control_to_state(spec, &w_shift)?;
        // eta_k / rho_k
        let e_num = Field::new(
            spec.grid().clone(),
            yk_fh
                .values
                .iter()
                .zip(&yk.values)
                .zip(&zk.values)
                .map(|((a, b), z)| (a - b) / rho - z)
                .collect(),
        )?;
        let diff = e_num.axpy(-1.0, &e_formula);
        rows.push(LimitRow {
            eps,
            rho,
            probe_id: 0,
            err_h1: norm_h1(&diff),
            err_max: diff.norm_max(),
            degenerate,
        });
        e_numeric = e_num;
    }
    Ok(WsetResult { e_numeric, e_formula, table: ConvergenceTable { rows } })
}

/// Discrete objective pairing of the adjoint identity, used by tests:
/// `<phi, G(f, h)>_Ω` against `<zeta, f>_Ω + <trace zeta, h>_Γ`.
pub fn adjoint_pairing_gap(
    spec: &ProblemSpec,
    a: &Field,
    phi: &Field,
    f: &Field,
    h: &BoundaryField,
) -> Result<f64> {
    let z = g_with_coefficient(spec, a, f, h)?;
    let (zeta, zeta_tr) = g_adjoint(spec, a, phi)?;
    let lhs = inner_omega(phi, &z)?;
    let rhs = inner_omega(&zeta, f)? + inner_gamma(&zeta_tr, h)?;
    Ok((lhs - rhs).abs())
}

// Re-exported for the CLI: band mask used in reports.
pub use crate::grid::level_set_mask;
