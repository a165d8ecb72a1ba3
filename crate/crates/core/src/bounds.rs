//! Coarse-grid solution plus Hermite interpolation against the fine-grid
//! solution, and the a-priori bounds on their difference.
//!
//! With fine step `h`, coarsening factor `s`, CFL number `lambda = v dt / h`
//! and initial roughness `M0 = max |u0_{j+1} - u0_j|`, the difference between
//! the interpolated coarse solution and the fine solution after `N` steps is
//! bounded by
//!
//! ```text
//! (A + B s) M0 sum_{i=0}^{N} (lambda / 2)^i
//! ```
//!
//! and, for `lambda < 2`, by the limit of the series `2 (A + B s) M0 / (2 - lambda)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, GridRole, Result};
use crate::hermite::{
    batch_coefficients, build_global_basis, evaluate_batch, evaluation_matrix, HermiteBatch,
};
use crate::lf::{
    cfl_number, restrict, Boundary, Equation, LfStepper, ScalarField1D, TimeSpec, CFL_SLACK,
};

/// The two constants of the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub a: f64,
    pub b: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self { a: 8.0, b: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    a_const: f64,
    b_const: f64,
    s: usize,
    lambda_v: f64,
    n_steps: usize,
}

impl BoundParams {
    pub fn new(
        a_const: f64,
        b_const: f64,
        s: usize,
        lambda_v: f64,
        n_steps: usize,
    ) -> Result<Self> {
        if !(a_const > 0.0 && a_const.is_finite()) || !(b_const > 0.0 && b_const.is_finite()) {
            return Err(Error::domain(format!(
                "bound constants must be positive, got A = {a_const}, B = {b_const}"
            )));
        }
        if s == 0 {
            return Err(Error::domain("coarsening factor s must be at least 1"));
        }
        if !(lambda_v >= 0.0 && lambda_v.is_finite()) {
            return Err(Error::domain(format!(
                "CFL number must be non-negative, got {lambda_v}"
            )));
        }
        Ok(Self {
            a_const,
            b_const,
            s,
            lambda_v,
            n_steps,
        })
    }

    pub fn a_const(&self) -> f64 {
        self.a_const
    }

    pub fn b_const(&self) -> f64 {
        self.b_const
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn lambda_v(&self) -> f64 {
        self.lambda_v
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    fn prefactor(&self, m0: f64) -> f64 {
        (self.a_const + self.b_const * self.s as f64) * m0
    }
}

/// Largest absolute difference between adjacent values.
pub fn initial_roughness(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::domain("roughness needs at least 2 nodes"));
    }
    Ok(values
        .windows(2)
        .fold(0.0_f64, |m, w| m.max((w[1] - w[0]).abs())))
}

fn check_m0(m0: f64) -> Result<()> {
    if m0 > 0.0 && m0.is_finite() {
        Ok(())
    } else {
        Err(Error::hypothesis(format!(
            "the bound requires M0 > 0, got {m0}"
        )))
    }
}

/// `(A + B s) M0 sum_{i=0}^{N} (lambda / 2)^i`, summed from `i = 0` upwards.
pub fn theorem_bound(params: &BoundParams, m0: f64) -> Result<f64> {
    check_m0(m0)?;
    let q = params.lambda_v / 2.0;
    let mut sum = 0.0;
    let mut term = 1.0;
    for _ in 0..=params.n_steps {
        sum += term;
        term *= q;
        if term == 0.0 {
            break;
        }
    }
    // Rounding must not push a partial sum past the series limit.
    if let Some(limit) = series_limit(params.lambda_v) {
        sum = sum.min(limit);
    }
    Ok(params.prefactor(m0) * sum)
}

/// `2 (A + B s) M0 / (2 - lambda)`, valid for `lambda < 2`.
pub fn corollary_bound(params: &BoundParams, m0: f64) -> Result<f64> {
    if params.lambda_v >= 2.0 {
        return Err(Error::hypothesis(format!(
            "the series bound requires a CFL number below 2, got {}",
            params.lambda_v
        )));
    }
    check_m0(m0)?;
    let limit = series_limit(params.lambda_v).expect("checked above");
    Ok(params.prefactor(m0) * limit)
}

/// `sum_{i>=0} (lambda / 2)^i = 2 / (2 - lambda)` for `lambda < 2`.
fn series_limit(lambda_v: f64) -> Option<f64> {
    (lambda_v < 2.0).then(|| 2.0 / (2.0 - lambda_v))
}

/// Cubic Hermite tangents at coarse nodes, in coarse-index units.
///
/// Central differences inside; one-sided at the ends for Dirichlet and
/// wrapped around for periodic grids.
pub fn coarse_tangents(w: &[f64], boundary: Boundary) -> Vec<f64> {
    let n = w.len();
    let mut t = vec![0.0; n];
    match boundary {
        Boundary::Periodic => {
            let m = n - 1;
            for j in 0..m {
                t[j] = (w[(j + 1) % m] - w[(j + m - 1) % m]) / 2.0;
            }
            t[m] = t[0];
        }
        Boundary::Dirichlet => {
            t[0] = w[1] - w[0];
            t[n - 1] = w[n - 1] - w[n - 2];
            for j in 1..n - 1 {
                t[j] = (w[j + 1] - w[j - 1]) / 2.0;
            }
        }
    }
    t
}

/// Interpolate a coarse field onto the grid refined by `s`, with one Hermite
/// cubic per coarse interval evaluated at `s + 1` ticks.
pub fn interpolate_coarse_to_fine(
    w: &ScalarField1D,
    s: usize,
    boundary: Boundary,
) -> Result<ScalarField1D> {
    let fine_grid = w.grid().refine(s)?;
    let values = w.values();
    let segments = values.len() - 1;
    let tangents = coarse_tangents(values, boundary);

    let mut p = Vec::with_capacity(4 * segments);
    for m in 0..segments {
        p.extend_from_slice(&[values[m], values[m + 1], tangents[m], tangents[m + 1]]);
    }
    let basis = build_global_basis(segments)?;
    let batch = HermiteBatch::from_flat(&batch_coefficients(&basis, &p)?)?;
    let table = evaluate_batch(&batch, &evaluation_matrix(s)?);

    let mut fine = Vec::with_capacity(fine_grid.n_nodes());
    for m in 0..segments {
        fine.extend_from_slice(&table.row(m)[..s]);
    }
    fine.push(values[segments]);
    ScalarField1D::new(fine_grid, fine)
}

/// Where a comparison run enforces the CFL limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CflGate {
    /// Every step on both grids.
    #[default]
    EveryStep,
    /// The initial data only, where the bound's `lambda` is defined. Burgers
    /// states can outgrow their initial maximum; the largest per-step CFL
    /// number is reported instead of rejected.
    InitialData,
}

/// One comparison experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonSetup {
    pub s: usize,
    pub time: TimeSpec,
    pub equation: Equation,
    pub boundary: Boundary,
    pub constants: BoundConstants,
    /// Compare every this many steps (the initial and final levels are always compared).
    pub compare_every: usize,
    pub gate: CflGate,
}

/// Per-node values at the compared instant with the largest error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeError {
    pub node: usize,
    pub x: f64,
    pub u: f64,
    pub v: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub m0: f64,
    pub params: BoundParams,
    pub bound_theorem: f64,
    pub bound_corollary: Option<f64>,
    pub max_error: f64,
    /// `max_error` over the corollary bound when it exists, else over the theorem bound.
    pub margin_ratio: f64,
    /// Time step at which `max_error` was observed.
    pub worst_step: usize,
    /// Node errors at `worst_step`; their maximum is `max_error`.
    pub error_profile: Vec<NodeError>,
    pub compared_levels: usize,
    /// Largest fine-grid CFL number over all steps taken.
    pub peak_cfl: f64,
}

/// Scalar part of an [`ErrorReport`], as serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub m0: f64,
    pub lambda_v: f64,
    pub s: usize,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub n_steps: usize,
    pub bound_theorem: f64,
    pub bound_corollary: Option<f64>,
    pub max_error: f64,
    pub margin_ratio: f64,
    pub worst_step: usize,
    pub peak_cfl: f64,
}

impl ErrorReport {
    pub fn summary(&self) -> ErrorSummary {
        ErrorSummary {
            m0: self.m0,
            lambda_v: self.params.lambda_v,
            s: self.params.s,
            a: self.params.a_const,
            b: self.params.b_const,
            n_steps: self.params.n_steps,
            bound_theorem: self.bound_theorem,
            bound_corollary: self.bound_corollary,
            max_error: self.max_error,
            margin_ratio: self.margin_ratio,
            worst_step: self.worst_step,
            peak_cfl: self.peak_cfl,
        }
    }

    pub fn within_bound(&self) -> bool {
        self.max_error <= self.bound_corollary.unwrap_or(self.bound_theorem)
    }
}

/// Run the fine solution `u` and the coarse solution `w` (same `dt`, step
/// `s h`) side by side, interpolate `w` back to the fine grid and record the
/// largest `|v - u|` over all fine nodes and compared instants.
pub fn run_comparison(u0: &ScalarField1D, setup: &ComparisonSetup) -> Result<ErrorReport> {
    if setup.compare_every == 0 {
        return Err(Error::domain("compare_every must be at least 1"));
    }
    let s = setup.s;
    let w0 = restrict(u0, s)?;
    let m0 = initial_roughness(u0.values())?;
    let dt = setup.time.dt();
    let n_steps = setup.time.n_steps();
    let lambda_v = cfl_number(setup.equation.max_speed(u0.values()), dt, u0.grid().h());
    let params = BoundParams::new(setup.constants.a, setup.constants.b, s, lambda_v, n_steps)?;
    let bound_theorem = theorem_bound(&params, m0)?;
    let bound_corollary = if lambda_v < 2.0 {
        Some(corollary_bound(&params, m0)?)
    } else {
        None
    };

    let limit = setup.time.cfl_constant();
    let step_limit = match setup.gate {
        CflGate::EveryStep => limit,
        CflGate::InitialData => {
            if lambda_v > limit * (1.0 + CFL_SLACK) {
                let err = Error::Cfl {
                    cfl: lambda_v,
                    limit,
                    step: Some(0),
                };
                return Err(err.on_grid(GridRole::Fine));
            }
            f64::INFINITY
        }
    };
    let stepper = LfStepper::new(setup.equation, setup.boundary).with_cfl_limit(step_limit);
    let fine_grid = *u0.grid();
    let coarse_grid = *w0.grid();

    let mut u = u0.values().to_vec();
    let mut u_next = vec![0.0; u.len()];
    let mut w = w0.values().to_vec();
    let mut w_next = vec![0.0; w.len()];

    let mut max_error = 0.0_f64;
    let mut worst_step = 0;
    let mut worst: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut compared_levels = 0;

    let mut compare = |step: usize, u: &[f64], w: &[f64]| -> Result<()> {
        let coarse =
            ScalarField1D::new(coarse_grid, w.to_vec()).map_err(|e| e.on_grid(GridRole::Coarse))?;
        let v = interpolate_coarse_to_fine(&coarse, s, setup.boundary)?.into_values();
        let level_max = v
            .iter()
            .zip(u)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        compared_levels += 1;
        if worst.is_none() || level_max > max_error {
            max_error = level_max;
            worst_step = step;
            worst = Some((u.to_vec(), v));
        }
        Ok(())
    };

    compare(0, &u, &w)?;
    let mut peak_cfl = 0.0_f64;
    for n in 1..=n_steps {
        peak_cfl = peak_cfl.max(cfl_number(setup.equation.max_speed(&u), dt, fine_grid.h()));
        stepper
            .step(&u, &mut u_next, dt, fine_grid.h())
            .map_err(|e| e.at_step(n).on_grid(GridRole::Fine))?;
        stepper
            .step(&w, &mut w_next, dt, coarse_grid.h())
            .map_err(|e| e.at_step(n).on_grid(GridRole::Coarse))?;
        std::mem::swap(&mut u, &mut u_next);
        std::mem::swap(&mut w, &mut w_next);
        if n % setup.compare_every == 0 || n == n_steps {
            compare(n, &u, &w)?;
        }
    }

    let (u_worst, v_worst) = worst.expect("initial level is always compared");
    let error_profile = u_worst
        .iter()
        .zip(&v_worst)
        .enumerate()
        .map(|(node, (&u, &v))| NodeError {
            node,
            x: fine_grid.x(node),
            u,
            v,
            abs_error: (v - u).abs(),
        })
        .collect();
    let margin_ratio = max_error / bound_corollary.unwrap_or(bound_theorem);

    Ok(ErrorReport {
        m0,
        params,
        bound_theorem,
        bound_corollary,
        max_error,
        margin_ratio,
        worst_step,
        error_profile,
        compared_levels,
        peak_cfl,
    })
}
