//! Fidelity susceptibility, quantum Fisher information and the classical
//! Fisher information of a computational-basis (σ^z product) measurement,
//! all evaluated on the sector ground state.
//!
//! For normalised real states `2(1 − |⟨a|b⟩|) = ‖a − s b‖²` with
//! `s = sign⟨a|b⟩`; the right-hand side is used because it does not cancel
//! catastrophically when the two states are nearly identical.

use serde::{Deserialize, Serialize};

use crate::eigensolve::{self, dot, GroundSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::hamiltonian::{ProbeParams, SectorOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherOptions {
    pub solver: SolverOptions,
    /// Accept a step when `χ(δ)` and `χ(δ/2)` differ by less than this (relative).
    pub accept_rel: f64,
    /// Give up once the step falls below this.
    pub min_step: f64,
    pub with_cfi: bool,
    /// First step tried; `None` uses [`initial_step`].
    pub step_seed: Option<f64>,
    /// Outcome probabilities below this are dropped from the CFI sum.
    pub probability_floor: f64,
}

impl Default for FisherOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions {
                tol: 1e-12,
                ..SolverOptions::default()
            },
            accept_rel: 1e-3,
            min_step: 1e-12,
            with_cfi: true,
            step_seed: None,
            probability_floor: 1e-14,
        }
    }
}

/// Fisher information of the ground state at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherPoint {
    pub params: ProbeParams,
    pub qfi: f64,
    pub cfi: Option<f64>,
    /// Accepted finite-difference step.
    pub delta_h: f64,
    /// Estimated discretisation error of `qfi`.
    pub richardson_err: f64,
    pub valid: bool,
    pub energy0: f64,
    pub gap: Option<f64>,
    pub residual: f64,
}

/// Seed step `max(1e-6, 1e-4·max(h, 1e-3))`.
pub fn initial_step(field: f64) -> f64 {
    (1e-4 * field.abs().max(1e-3)).max(1e-6)
}

/// `2(1 − |⟨a|b⟩|)/δ²` for unit vectors `a`, `b`, computed as `‖a − s b‖²/δ²`.
pub fn susceptibility_from_states(a: &[f64], b: &[f64], delta_h: f64) -> f64 {
    let s = if dot(a, b) < 0.0 { -1.0 } else { 1.0 };
    let dist2: f64 = a.iter().zip(b).map(|(x, y)| (x - s * y).powi(2)).sum();
    dist2 / (delta_h * delta_h)
}

/// `Σ_i (∂p_i)²/p_i` with `∂p_i ≈ (p_i(h+δ/2) − p_i(h−δ/2))/δ` and `p_i = ψ_i²`.
pub fn cfi_from_states(
    center: &[f64],
    minus: &[f64],
    plus: &[f64],
    delta_h: f64,
    floor: f64,
) -> f64 {
    center
        .iter()
        .zip(minus.iter().zip(plus))
        .filter_map(|(c, (m, p))| {
            let p0 = c * c;
            if p0 < floor {
                return None;
            }
            let dp = (p * p - m * m) / delta_h;
            Some(dp * dp / p0)
        })
        .sum()
}

/// Ground state at `h` plus the machinery to get nearby ground states that
/// start from it.
struct Probe<'a> {
    op: SectorOperator,
    center: GroundSolution,
    opts: &'a FisherOptions,
}

impl<'a> Probe<'a> {
    fn with_operator(op: SectorOperator, opts: &'a FisherOptions) -> Result<Self> {
        let want_gap = op.dim() >= 2;
        let center = eigensolve::ground_state(&op, &opts.solver, want_gap)?;
        Ok(Self { op, center, opts })
    }

    fn new(params: &ProbeParams, opts: &'a FisherOptions) -> Result<Self> {
        Self::with_operator(SectorOperator::build(*params)?, opts)
    }

    fn require_unique(&self) -> Result<()> {
        if self.center.degenerate {
            return Err(Error::DegenerateGroundState {
                gap: self.center.gap().unwrap_or(0.0),
            });
        }
        Ok(())
    }

    fn field(&self) -> f64 {
        self.op.params().field
    }

    fn state_at(&self, field: f64) -> Result<Vec<f64>> {
        let shifted = self.op.at_field(field);
        let sol = eigensolve::ground_state_from(
            &shifted,
            &self.center.vector0,
            &self.opts.solver,
            false,
        )?;
        Ok(sol.vector0)
    }

    fn symmetric_pair(&self, delta_h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let h = self.field();
        Ok((
            self.state_at(h - 0.5 * delta_h)?,
            self.state_at(h + 0.5 * delta_h)?,
        ))
    }
}

fn check_step(delta_h: f64) -> Result<()> {
    if !(delta_h > 0.0 && delta_h.is_finite()) {
        return Err(Error::InvalidArguments(format!(
            "delta_h must be positive, got {delta_h}"
        )));
    }
    Ok(())
}

/// Forward-difference fidelity susceptibility between `h` and `h + δ`.
pub fn fidelity_susceptibility(
    params: &ProbeParams,
    delta_h: f64,
    opts: &FisherOptions,
) -> Result<f64> {
    check_step(delta_h)?;
    let probe = Probe::new(params, opts)?;
    probe.require_unique()?;
    let ahead = probe.state_at(params.field + delta_h)?;
    Ok(susceptibility_from_states(
        &probe.center.vector0,
        &ahead,
        delta_h,
    ))
}

/// Symmetric variant between `h − δ/2` and `h + δ/2`.
pub fn fidelity_susceptibility_symmetric(
    params: &ProbeParams,
    delta_h: f64,
    opts: &FisherOptions,
) -> Result<f64> {
    check_step(delta_h)?;
    let probe = Probe::new(params, opts)?;
    probe.require_unique()?;
    let (minus, plus) = probe.symmetric_pair(delta_h)?;
    Ok(susceptibility_from_states(&minus, &plus, delta_h))
}

/// Computational-basis CFI with a central difference of step `δ`.
pub fn cfi_computational(params: &ProbeParams, delta_h: f64, opts: &FisherOptions) -> Result<f64> {
    check_step(delta_h)?;
    let probe = Probe::new(params, opts)?;
    probe.require_unique()?;
    let (minus, plus) = probe.symmetric_pair(delta_h)?;
    Ok(cfi_from_states(
        &probe.center.vector0,
        &minus,
        &plus,
        delta_h,
        opts.probability_floor,
    ))
}

/// QFI `F_Q = 4χ` with an adaptive symmetric step.
///
/// `χ` is evaluated at `δ` and `δ/2`; the step is accepted once the two agree
/// to `accept_rel`, otherwise halved. The returned value is the Richardson
/// extrapolation `(4χ(δ/2) − χ(δ))/3` and `richardson_err` the size of that
/// correction. The CFI, when requested, is extrapolated from the same states.
pub fn qfi(params: &ProbeParams, opts: &FisherOptions) -> Result<FisherPoint> {
    params.validate()?;
    qfi_with_operator(&SectorOperator::build(*params)?, params.field, opts)
}

/// [`qfi`] reusing an already built operator (only its field is changed).
pub fn qfi_with_operator(
    op: &SectorOperator,
    field: f64,
    opts: &FisherOptions,
) -> Result<FisherPoint> {
    let op = if op.params().field == field {
        op.clone()
    } else {
        op.at_field(field)
    };
    let params = *op.params();
    let probe = Probe::with_operator(op, opts)?;
    let center = &probe.center;
    let valid = !center.degenerate;

    let base = FisherPoint {
        params,
        qfi: 0.0,
        cfi: opts.with_cfi.then_some(0.0),
        delta_h: opts.step_seed.unwrap_or_else(|| initial_step(field)),
        richardson_err: 0.0,
        valid,
        energy0: center.energy0,
        gap: center.gap(),
        residual: center.residual,
    };
    if probe.op.dim() == 1 {
        return Ok(base);
    }

    let mut delta = opts.step_seed.unwrap_or_else(|| initial_step(field));
    let mut coarse = probe.symmetric_pair(delta)?;
    let mut chi_coarse = susceptibility_from_states(&coarse.0, &coarse.1, delta);
    loop {
        let half = 0.5 * delta;
        if half < opts.min_step {
            return Err(Error::StepUnderflow { delta_h: half });
        }
        let fine = probe.symmetric_pair(half)?;
        let chi_fine = susceptibility_from_states(&fine.0, &fine.1, half);
        let diff = (chi_fine - chi_coarse).abs();
        let scale = chi_fine.abs().max(chi_coarse.abs());
        if diff <= opts.accept_rel * scale || scale == 0.0 {
            let chi = (4.0 * chi_fine - chi_coarse) / 3.0;
            let cfi = opts.with_cfi.then(|| {
                let f = opts.probability_floor;
                let c_coarse = cfi_from_states(&center.vector0, &coarse.0, &coarse.1, delta, f);
                let c_fine = cfi_from_states(&center.vector0, &fine.0, &fine.1, half, f);
                ((4.0 * c_fine - c_coarse) / 3.0).max(0.0)
            });
            return Ok(FisherPoint {
                qfi: (4.0 * chi).max(0.0),
                cfi,
                delta_h: delta,
                richardson_err: 4.0 * diff / 3.0,
                ..base
            });
        }
        delta = half;
        coarse = fine;
        chi_coarse = chi_fine;
    }
}

/// Closed-form two-level (`L = 2`, `N = 1`) QFI `4J²/(4J² + h²)²`.
pub fn two_level_qfi(exchange: f64, field: f64) -> f64 {
    let j2 = 4.0 * exchange * exchange;
    j2 / (j2 + field * field).powi(2)
}
