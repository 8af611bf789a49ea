//! Problem data and the tracking objective.
//!
//! [`ProblemSpec`] collects everything that defines one control problem:
//! grid, nonlinearity, targets `y_Ω`, `y_Γ`, weights `α >= 0`,
//! `κ_Ω, κ_Γ > 0`, the Robin coefficient `b >= b0 > 0`, and the unilateral
//! upper bounds (each a field or infinite). The cost functional is
//!
//! ```text
//!   J(u, v) = 1/2 ||y - y_Ω||²_Ω + α/2 ||y - y_Γ||²_Γ
//!           + κ_Ω/2 ||u||²_Ω + κ_Γ/2 ||v||²_Γ,     y = S(u, v),
//! ```
//!
//! together with its directional derivative, the exact difference identity,
//! and the adjoint-based reduced gradient at Gâteaux points.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::{
    assemble_robin, inner_gamma, inner_omega, trace, BoundaryField, Field, Grid, RobinOperator,
};
use crate::nonsmooth::Pc1Function;
use crate::operator::{self, ControlPair};
use crate::pde::{solve_linear, SolverConfig};
use crate::{Error, Result};

/// Upper bound for the distributed control: a field or `+∞` (no constraint).
#[derive(Debug, Clone)]
pub enum Bound {
    Field(Field),
    Infinite,
}

/// Upper bound for the boundary control.
#[derive(Debug, Clone)]
pub enum BoundaryBound {
    Field(BoundaryField),
    Infinite,
}

impl Bound {
    pub fn is_finite(&self) -> bool {
        matches!(self, Bound::Field(_))
    }

    pub fn as_field(&self) -> Option<&Field> {
        match self {
            Bound::Field(f) => Some(f),
            Bound::Infinite => None,
        }
    }
}

impl BoundaryBound {
    pub fn is_finite(&self) -> bool {
        matches!(self, BoundaryBound::Field(_))
    }

    pub fn as_field(&self) -> Option<&BoundaryField> {
        match self {
            BoundaryBound::Field(f) => Some(f),
            BoundaryBound::Infinite => None,
        }
    }
}

/// All data of one control problem, with the assembled Robin operator.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    grid: Arc<Grid>,
    pub pc1: Pc1Function,
    pub y_omega: Field,
    pub y_gamma: BoundaryField,
    pub alpha: f64,
    pub kappa_omega: f64,
    pub kappa_gamma: f64,
    pub b: BoundaryField,
    pub u_bound: Bound,
    pub v_bound: BoundaryBound,
    pub solver: SolverConfig,
    /// Relative half-width of the algebraic kink band:
    /// `delta = delta_level_rel * range(y)`.
    pub delta_level_rel: f64,
    robin: RobinOperator,
}

impl ProblemSpec {
    /// Validated constructor; assembles the Robin operator.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: Arc<Grid>,
        pc1: Pc1Function,
        y_omega: Field,
        y_gamma: BoundaryField,
        alpha: f64,
        kappa_omega: f64,
        kappa_gamma: f64,
        b: BoundaryField,
        u_bound: Bound,
        v_bound: BoundaryBound,
        solver: SolverConfig,
    ) -> Result<ProblemSpec> {
        if !(alpha >= 0.0) {
            return Err(Error::InvalidData(format!(
                "alpha must be nonnegative, got {alpha}"
            )));
        }
        if !(kappa_omega > 0.0) || !(kappa_gamma > 0.0) {
            return Err(Error::InvalidData(format!(
                "control cost weights must be positive, got kappa_omega = {kappa_omega}, kappa_gamma = {kappa_gamma}"
            )));
        }
        solver.validate()?;
        let robin = assemble_robin(&grid, &b)?;
        Ok(ProblemSpec {
            grid,
            pc1,
            y_omega,
            y_gamma,
            alpha,
            kappa_omega,
            kappa_gamma,
            b,
            u_bound,
            v_bound,
            solver,
            delta_level_rel: 1e-8,
            robin,
        })
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn robin(&self) -> &RobinOperator {
        &self.robin
    }

    /// Half-width of the algebraic kink band for a given state.
    pub fn delta_level(&self, y: &Field) -> f64 {
        self.delta_level_rel * y.range()
    }

    /// Both bounds are finite fields.
    pub fn bounds_finite(&self) -> bool {
        self.u_bound.is_finite() && self.v_bound.is_finite()
    }

    /// Active-set tolerance `1e-8 * (1 + ||u_b||_max)`.
    pub fn active_tol_omega(&self) -> f64 {
        match &self.u_bound {
            Bound::Field(ub) => 1e-8 * (1.0 + ub.norm_max()),
            Bound::Infinite => 0.0,
        }
    }

    pub fn active_tol_gamma(&self) -> f64 {
        match &self.v_bound {
            BoundaryBound::Field(vb) => 1e-8 * (1.0 + vb.norm_max()),
            BoundaryBound::Infinite => 0.0,
        }
    }

    /// Nodewise admissibility `u <= u_b`, `v <= v_b`.
    pub fn is_admissible(&self, w: &ControlPair) -> bool {
        let u_ok = match &self.u_bound {
            Bound::Field(ub) => w.u.values.iter().zip(&ub.values).all(|(u, b)| u <= b),
            Bound::Infinite => true,
        };
        let v_ok = match &self.v_bound {
            BoundaryBound::Field(vb) => w.v.values.iter().zip(&vb.values).all(|(v, b)| v <= b),
            BoundaryBound::Infinite => true,
        };
        u_ok && v_ok
    }

    /// True when `w` equals `(u_b, v_b)` nodewise (within the active-set
    /// tolerance); vacuously false with an infinite bound.
    pub fn at_bounds(&self, w: &ControlPair) -> bool {
        let (ub, vb) = match (&self.u_bound, &self.v_bound) {
            (Bound::Field(ub), BoundaryBound::Field(vb)) => (ub, vb),
            _ => return false,
        };
        let tol_u = self.active_tol_omega();
        let tol_v = self.active_tol_gamma();
        w.u.values
            .iter()
            .zip(&ub.values)
            .all(|(u, b)| (u - b).abs() <= tol_u)
            && w.v.values
                .iter()
                .zip(&vb.values)
                .all(|(v, b)| (v - b).abs() <= tol_v)
    }
}

/// Evaluate the cost functional (solves the state equation).
pub fn objective(spec: &ProblemSpec, w: &ControlPair) -> Result<f64> {
    let y = operator::control_to_state(spec, w)?;
    Ok(objective_with_state(spec, w, &y))
}

/// Evaluate the cost functional for an already computed state.
pub fn objective_with_state(spec: &ProblemSpec, w: &ControlPair, y: &Field) -> f64 {
    let dy = y.axpy(-1.0, &spec.y_omega);
    let dyg = trace(y).axpy(-1.0, &spec.y_gamma);
    0.5 * inner_omega(&dy, &dy).expect("same grid")
        + 0.5 * spec.alpha * inner_gamma(&dyg, &dyg).expect("same grid")
        + 0.5 * spec.kappa_omega * inner_omega(&w.u, &w.u).expect("same grid")
        + 0.5 * spec.kappa_gamma * inner_gamma(&w.v, &w.v).expect("same grid")
}

/// Directional derivative of the reduced objective in direction `(f, h)`,
/// using the true one-sided derivative of the control-to-state map.
pub fn objective_dir_deriv(
    spec: &ProblemSpec,
    w: &ControlPair,
    f: &Field,
    h: &BoundaryField,
) -> Result<f64> {
    let y = operator::control_to_state(spec, w)?;
    objective_dir_deriv_with_state(spec, w, &y, f, h)
}

pub fn objective_dir_deriv_with_state(
    spec: &ProblemSpec,
    w: &ControlPair,
    y: &Field,
    f: &Field,
    h: &BoundaryField,
) -> Result<f64> {
    let delta = operator::dir_deriv(spec, y, f, h)?;
    let dy = y.axpy(-1.0, &spec.y_omega);
    let dyg = trace(y).axpy(-1.0, &spec.y_gamma);
    Ok(inner_omega(&dy, &delta)?
        + spec.alpha * inner_gamma(&dyg, &trace(&delta))?
        + spec.kappa_omega * inner_omega(&w.u, f)?
        + spec.kappa_gamma * inner_gamma(&w.v, h)?)
}

/// Both sides of the exact algebraic identity for `J(w1) - J(w2)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveDifference {
    /// `J(w1) - J(w2)` evaluated directly.
    pub lhs: f64,
    /// The expanded right-hand side (squared differences plus cross terms).
    pub rhs: f64,
    pub gap: f64,
}

/// Evaluate both sides of the identity
/// `J(w1) - J(w2) = 1/2 ||y1-y2||²_Ω + α/2 ||y1-y2||²_Γ + κ_Ω/2 ||u1-u2||²_Ω
/// + κ_Γ/2 ||v1-v2||²_Γ + <y2-y_Ω, y1-y2>_Ω + α <y2-y_Γ, y1-y2>_Γ
/// + κ_Ω <u2, u1-u2>_Ω + κ_Γ <v2, v1-v2>_Γ` and report the gap.
pub fn objective_difference(
    spec: &ProblemSpec,
    w1: &ControlPair,
    w2: &ControlPair,
) -> Result<ObjectiveDifference> {
    let y1 = operator::control_to_state(spec, w1)?;
    let y2 = operator::control_to_state(spec, w2)?;
    let j1 = objective_with_state(spec, w1, &y1);
    let j2 = objective_with_state(spec, w2, &y2);

    let dy = y1.axpy(-1.0, &y2);
    let dyg = trace(&y1).axpy(-1.0, &trace(&y2));
    let du = w1.u.axpy(-1.0, &w2.u);
    let dv = w1.v.axpy(-1.0, &w2.v);
    let y2d = y2.axpy(-1.0, &spec.y_omega);
    let y2g = trace(&y2).axpy(-1.0, &spec.y_gamma);

    let rhs = 0.5 * inner_omega(&dy, &dy)?
        + 0.5 * spec.alpha * inner_gamma(&dyg, &dyg)?
        + 0.5 * spec.kappa_omega * inner_omega(&du, &du)?
        + 0.5 * spec.kappa_gamma * inner_gamma(&dv, &dv)?
        + inner_omega(&y2d, &dy)?
        + spec.alpha * inner_gamma(&y2g, &dyg)?
        + spec.kappa_omega * inner_omega(&w2.u, &du)?
        + spec.kappa_gamma * inner_gamma(&w2.v, &dv)?;

    let lhs = j1 - j2;
    Ok(ObjectiveDifference { lhs, rhs, gap: (lhs - rhs).abs() })
}

/// Adjoint-based reduced gradient.
#[derive(Debug, Clone)]
pub struct ReducedGradient {
    pub gu: Field,
    pub gv: BoundaryField,
    /// Adjoint state.
    pub phi: Field,
    /// True when the state misses the kink band, so the gradient is exact;
    /// otherwise `gu`, `gv` are the left-branch descent surrogate.
    pub gateaux: bool,
    /// Gâteaux defect of the state (zero at Gâteaux points).
    pub defect: f64,
}

/// Reduced gradient at `w`: the adjoint `φ` solves the linearized system
/// with the left-branch coefficient, sources `y - y_Ω` in Ω and
/// `α (y - y_Γ)` on Γ; then `gu = φ + κ_Ω u`, `gv = trace(φ) + κ_Γ v`.
///
/// At Gâteaux points the band is empty, the coefficient equals `d'(y)`, and
/// the pairing `J'(w)(f, h) = <gu, f>_Ω + <gv, h>_Γ` is exact. Off Gâteaux
/// points the same formula is returned as a descent surrogate with
/// `gateaux = false`.
pub fn reduced_gradient(spec: &ProblemSpec, w: &ControlPair) -> Result<ReducedGradient> {
    let y = operator::control_to_state(spec, w)?;
    reduced_gradient_with_state(spec, w, &y)
}

pub fn reduced_gradient_with_state(
    spec: &ProblemSpec,
    w: &ControlPair,
    y: &Field,
) -> Result<ReducedGradient> {
    let defect = operator::gateaux_defect_state(spec, y);
    let coeff = operator::coefficients(spec, y, spec.delta_level(y));
    let src_omega = y.axpy(-1.0, &spec.y_omega);
    let src_gamma = trace(y).axpy(-1.0, &spec.y_gamma).scale(spec.alpha);
    let phi = solve_linear(spec.robin(), &coeff.a_minus, &src_omega, &src_gamma, &spec.solver)?;
    let gu = phi.axpy(spec.kappa_omega, &w.u);
    let gv = trace(&phi).axpy(spec.kappa_gamma, &w.v);
    Ok(ReducedGradient { gu, gv, phi, gateaux: defect == 0.0, defect })
}
