//! Explicit Lax-Friedrichs time stepping on uniform 1D grids.
//!
//! The scheme replaces `u_j` by the three-point mean of `u_{j-1}, u_j, u_{j+1}`
//! before applying a centered spatial difference:
//!
//! ```text
//! u_j^{n+1} = (u_{j+1} + u_j + u_{j-1}) / 3 - (a dt / 2h) (u_{j+1} - u_{j-1})
//! ```
//!
//! where `a` is the constant speed for linear advection, or `u_j` itself for the
//! inviscid Burgers equation in advective form.
//!
//! Periodic grids are endpoint-inclusive: the last node is the image of the
//! first one (`x_{n-1} = x_0 + L`), so an `n`-node periodic grid has `n - 1`
//! distinct unknowns. The last value is overwritten with the first after every
//! step. This keeps `restrict` consistent: coarsening an `(n - 1)`-interval
//! periodic grid by `s` again yields a periodic grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack accepted by the CFL gate, so that a time step computed as
/// `c h / v` is not rejected for rounding in the last bit.
pub const CFL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec1D {
    x0: f64,
    h: f64,
    n_nodes: usize,
}

impl GridSpec1D {
    pub fn new(x0: f64, h: f64, n_nodes: usize) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::domain("grid origin must be finite"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::domain(format!(
                "grid step must be positive, got {h}"
            )));
        }
        if n_nodes < 3 {
            return Err(Error::domain(format!(
                "grid needs at least 3 nodes for the 3-point stencil, got {n_nodes}"
            )));
        }
        Ok(Self { x0, h, n_nodes })
    }

    /// Grid covering `[x0, x0 + length]` with `intervals` equal steps.
    pub fn spanning(x0: f64, length: f64, intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::domain("grid needs at least one interval"));
        }
        Self::new(x0, length / intervals as f64, intervals + 1)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.h
    }

    pub fn length(&self) -> f64 {
        self.h * (self.n_nodes - 1) as f64
    }

    /// Grid with step `s h` over the same nodes-every-`s` subset.
    pub fn coarsen(&self, s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::domain("coarsening factor must be at least 1"));
        }
        if !(self.n_nodes - 1).is_multiple_of(s) {
            return Err(Error::domain(format!(
                "{} intervals are not divisible by coarsening factor {s}",
                self.n_nodes - 1
            )));
        }
        Self::new(self.x0, self.h * s as f64, (self.n_nodes - 1) / s + 1)
    }

    /// Grid refined by `s`: step `h / s`, `(n - 1) s + 1` nodes.
    pub fn refine(&self, s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::domain("refinement factor must be at least 1"));
        }
        Self::new(self.x0, self.h / s as f64, (self.n_nodes - 1) * s + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpec {
    dt: f64,
    n_steps: usize,
    cfl_constant: f64,
}

impl TimeSpec {
    pub fn new(dt: f64, n_steps: usize, cfl_constant: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if !(cfl_constant > 0.0 && cfl_constant <= 1.0) {
            return Err(Error::domain(format!(
                "CFL constant must lie in (0, 1], got {cfl_constant}"
            )));
        }
        Ok(Self {
            dt,
            n_steps,
            cfl_constant,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn cfl_constant(&self) -> f64 {
        self.cfl_constant
    }
}

/// A discrete solution on a uniform grid at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField1D {
    grid: GridSpec1D,
    values: Vec<f64>,
}

impl ScalarField1D {
    pub fn new(grid: GridSpec1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::domain(format!(
                "field has {} values for {} grid nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "field value at node {j} is not finite"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.n_nodes()).map(|j| f(grid.x(j))).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: GridSpec1D, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.n_nodes()])
    }

    pub fn grid(&self) -> &GridSpec1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }
}

pub(crate) fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// The scaled norm `K sup_j |u_j|` with `0 < K <= 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityNorm {
    k_constant: f64,
}

impl StabilityNorm {
    pub fn new(k_constant: f64) -> Result<Self> {
        if !(k_constant > 0.0 && k_constant <= 0.5) {
            return Err(Error::domain(format!(
                "norm constant K must lie in (0, 1/2], got {k_constant}"
            )));
        }
        Ok(Self { k_constant })
    }

    pub fn k_constant(&self) -> f64 {
        self.k_constant
    }

    pub fn of(&self, u: &ScalarField1D) -> f64 {
        self.k_constant * u.sup_norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    /// Boundary nodes keep their initial values.
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    /// `u_t + speed u_x = 0`.
    Advection { speed: f64 },
    /// Inviscid Burgers `u_t + u u_x = 0`.
    Burgers,
}

impl Equation {
    /// Largest characteristic speed for the given state.
    pub fn max_speed(&self, values: &[f64]) -> f64 {
        match *self {
            Equation::Advection { speed } => speed.abs(),
            Equation::Burgers => sup_norm(values),
        }
    }
}

/// Largest admissible time step `c h / v`.
pub fn cfl_max_dt(h: f64, v_max: f64, c: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!(
            "grid step must be positive, got {h}"
        )));
    }
    if !(v_max > 0.0 && v_max.is_finite()) {
        return Err(Error::domain(format!(
            "maximum speed must be positive, got {v_max}"
        )));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::domain(format!(
            "CFL constant must lie in (0, 1], got {c}"
        )));
    }
    Ok(c * h / v_max)
}

/// `|v| dt / h`.
pub fn cfl_number(speed: f64, dt: f64, h: f64) -> f64 {
    speed.abs() * dt / h
}

fn check_cfl(cfl: f64, limit: f64) -> Result<()> {
    // NaN must not slip through.
    if cfl <= limit * (1.0 + CFL_SLACK) {
        Ok(())
    } else {
        Err(Error::Cfl {
            cfl,
            limit,
            step: None,
        })
    }
}

/// Allocation-free stepping kernel shared by the field-level operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfStepper {
    pub equation: Equation,
    pub boundary: Boundary,
    /// CFL limit enforced on every step.
    pub cfl_limit: f64,
}

impl LfStepper {
    pub fn new(equation: Equation, boundary: Boundary) -> Self {
        Self {
            equation,
            boundary,
            cfl_limit: 1.0,
        }
    }

    pub fn with_cfl_limit(mut self, limit: f64) -> Self {
        self.cfl_limit = limit;
        self
    }

    /// Advance `src` by one step into `dst`. Both slices have the grid length.
    pub fn step(&self, src: &[f64], dst: &mut [f64], dt: f64, h: f64) -> Result<()> {
        let n = src.len();
        if dst.len() != n {
            return Err(Error::domain(format!(
                "output buffer has {} nodes, input has {n}",
                dst.len()
            )));
        }
        if n < 3 {
            return Err(Error::domain("stepping needs at least 3 nodes"));
        }
        check_cfl(
            cfl_number(self.equation.max_speed(src), dt, h),
            self.cfl_limit,
        )?;

        let ratio = dt / (2.0 * h);
        let update = |um: f64, u: f64, up: f64| -> f64 {
            // Written as a correction of u_j so constants are reproduced exactly.
            let mean = u + ((up - u) + (um - u)) / 3.0;
            let a = match self.equation {
                Equation::Advection { speed } => speed,
                Equation::Burgers => u,
            };
            mean - ratio * a * (up - um)
        };

        match self.boundary {
            Boundary::Periodic => {
                let last = n - 2;
                for j in 0..=last {
                    let jm = if j == 0 { last } else { j - 1 };
                    let jp = if j == last { 0 } else { j + 1 };
                    dst[j] = update(src[jm], src[j], src[jp]);
                }
                dst[n - 1] = dst[0];
            }
            Boundary::Dirichlet => {
                dst[0] = src[0];
                dst[n - 1] = src[n - 1];
                for j in 1..n - 1 {
                    dst[j] = update(src[j - 1], src[j], src[j + 1]);
                }
            }
        }

        if dst.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: 0 });
        }
        Ok(())
    }
}

fn step_field(u: &ScalarField1D, dt: f64, stepper: LfStepper) -> Result<ScalarField1D> {
    let mut out = vec![0.0; u.values.len()];
    stepper.step(&u.values, &mut out, dt, u.grid.h())?;
    Ok(ScalarField1D {
        grid: u.grid,
        values: out,
    })
}

/// One step of linear advection at constant `speed`.
pub fn lf_step_advection(
    u: &ScalarField1D,
    dt: f64,
    speed: f64,
    boundary: Boundary,
) -> Result<ScalarField1D> {
    step_field(
        u,
        dt,
        LfStepper::new(Equation::Advection { speed }, boundary),
    )
}

/// One step of inviscid Burgers in advective form.
pub fn lf_step_burgers(u: &ScalarField1D, dt: f64, boundary: Boundary) -> Result<ScalarField1D> {
    step_field(u, dt, LfStepper::new(Equation::Burgers, boundary))
}

#[derive(Debug, Clone)]
pub struct SolutionHistory {
    fields: Vec<ScalarField1D>,
    steps: Vec<usize>,
    time_spec: TimeSpec,
    norm_history: Vec<f64>,
}

impl SolutionHistory {
    pub fn fields(&self) -> &[ScalarField1D] {
        &self.fields
    }

    /// Time-step index of each stored level.
    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn time_spec(&self) -> &TimeSpec {
        &self.time_spec
    }

    pub fn norm_history(&self) -> &[f64] {
        &self.norm_history
    }

    pub fn last(&self) -> &ScalarField1D {
        self.fields
            .last()
            .expect("history always holds the initial level")
    }

    fn push(&mut self, step: usize, field: ScalarField1D) {
        self.norm_history.push(field.sup_norm());
        self.steps.push(step);
        self.fields.push(field);
    }
}

/// Run `time_spec.n_steps()` steps, storing the initial level and every
/// `store_every`-th level after it.
pub fn run(
    initial: &ScalarField1D,
    time_spec: TimeSpec,
    equation: Equation,
    boundary: Boundary,
    store_every: usize,
) -> Result<SolutionHistory> {
    if store_every == 0 {
        return Err(Error::domain("store_every must be at least 1"));
    }
    let stepper = LfStepper::new(equation, boundary).with_cfl_limit(time_spec.cfl_constant());
    let h = initial.grid.h();
    let dt = time_spec.dt();

    let mut history = SolutionHistory {
        fields: Vec::with_capacity(time_spec.n_steps() / store_every + 1),
        steps: Vec::new(),
        time_spec,
        norm_history: Vec::new(),
    };
    history.push(0, initial.clone());

    let mut current = initial.values.clone();
    let mut next = vec![0.0; current.len()];
    for n in 1..=time_spec.n_steps() {
        stepper
            .step(&current, &mut next, dt, h)
            .map_err(|e| e.at_step(n))?;
        std::mem::swap(&mut current, &mut next);
        if n % store_every == 0 {
            history.push(
                n,
                ScalarField1D {
                    grid: initial.grid,
                    values: current.clone(),
                },
            );
        }
    }
    Ok(history)
}

/// Every `s`-th sample of a fine field, on grid step `s h`.
pub fn restrict(fine_initial: &ScalarField1D, s: usize) -> Result<ScalarField1D> {
    let grid = fine_initial.grid.coarsen(s)?;
    let values = fine_initial.values.iter().step_by(s).copied().collect();
    Ok(ScalarField1D { grid, values })
}
