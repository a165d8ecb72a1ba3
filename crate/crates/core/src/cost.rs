//! Order-of-magnitude cost models for grid solves and spline products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lf::cfl_max_dt;

/// Counts that land within `1e-9` of an integer are taken as that integer
/// before rounding up, so `1000 / 0.5` is 2000 cells and not 2001.
fn ceil_count(q: f64) -> u64 {
    let r = q.round();
    if (q - r).abs() <= 1e-9 * r.max(1.0) {
        r as u64
    } else {
        q.ceil() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub domain_extents: [f64; 3],
    pub h: f64,
    pub v_max: f64,
    /// Simulated seconds.
    pub duration: f64,
    pub cfl_constant: f64,
    pub flops_per_cell_update: f64,
}

pub const DEFAULT_FLOPS_PER_CELL_UPDATE: f64 = 10.0;

impl CostModel {
    pub fn new(
        domain_extents: [f64; 3],
        h: f64,
        v_max: f64,
        duration: f64,
        cfl_constant: f64,
        flops_per_cell_update: f64,
    ) -> Result<Self> {
        let model = Self {
            domain_extents,
            h,
            v_max,
            duration,
            cfl_constant,
            flops_per_cell_update,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !self.domain_extents.iter().all(|&e| positive(e)) {
            return Err(Error::domain("domain extents must be positive"));
        }
        if !positive(self.flops_per_cell_update) {
            return Err(Error::domain("flops per cell update must be positive"));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::domain("duration must be non-negative"));
        }
        cfl_max_dt(self.h, self.v_max, self.cfl_constant)?;
        Ok(())
    }

    /// 10 x 10 x 1000 cm channel, h = 0.5 cm, 50 cm/s, one simulated minute.
    pub fn reference_fine() -> Self {
        Self {
            domain_extents: [10.0, 10.0, 1000.0],
            h: 0.5,
            v_max: 50.0,
            duration: 60.0,
            cfl_constant: 1.0,
            flops_per_cell_update: DEFAULT_FLOPS_PER_CELL_UPDATE,
        }
    }

    /// The reference channel at h = 5 cm (at most 10 snapshots per second).
    pub fn reference_coarse() -> Self {
        Self {
            h: 5.0,
            ..Self::reference_fine()
        }
    }

    pub fn dt(&self) -> f64 {
        self.cfl_constant * self.h / self.v_max
    }

    pub fn cells(&self) -> u64 {
        self.domain_extents
            .iter()
            .map(|&e| ceil_count(e / self.h))
            .product()
    }

    pub fn steps(&self) -> u64 {
        if self.duration == 0.0 {
            0
        } else {
            ceil_count(self.duration / self.dt())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopsEstimate {
    pub flops: f64,
    pub steps: u64,
    pub cells: u64,
}

/// `k * cells * steps` with `steps = duration / (c h / v)`.
pub fn flops_estimate(model: &CostModel) -> FlopsEstimate {
    let cells = model.cells();
    let steps = model.steps();
    FlopsEstimate {
        flops: model.flops_per_cell_update * cells as f64 * steps as f64,
        steps,
        cells,
    }
}

/// Bytes for `fields_per_cell` doubles per cell, `snapshots_resident` times.
pub fn memory_estimate(
    model: &CostModel,
    fields_per_cell: u64,
    snapshots_resident: u64,
) -> Result<u64> {
    if fields_per_cell == 0 || snapshots_resident == 0 {
        return Err(Error::domain(
            "field and snapshot counts must be at least 1",
        ));
    }
    Ok(model.cells() * fields_per_cell * 8 * snapshots_resident)
}

/// Smallest number of resident snapshots whose memory reaches `target_bytes`.
pub fn snapshots_for_memory(
    model: &CostModel,
    fields_per_cell: u64,
    target_bytes: u64,
) -> Result<u64> {
    let one = memory_estimate(model, fields_per_cell, 1)?;
    Ok(target_bytes.div_ceil(one).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplineMode {
    /// Coefficients via a dense `4M x 4M` product per segment.
    DenseCoefficients,
    /// Coefficients via the block-diagonal product (16 mul + 12 add per block).
    SparseCoefficients,
    /// Values via `C R`: a 4-term dot product per trajectory and tick.
    Evaluation,
}

/// Total flops over `n_segments` segment products.
pub fn spline_flops_estimate(m: u64, n_segments: u64, r: u64, mode: SplineMode) -> Result<f64> {
    if m == 0 || n_segments == 0 || r == 0 {
        return Err(Error::domain("M, N_segments and r must be at least 1"));
    }
    let (m, n, r) = (m as f64, n_segments as f64, r as f64);
    Ok(match mode {
        SplineMode::DenseCoefficients => 10.0 * m * m * n,
        SplineMode::SparseCoefficients => 28.0 * m * n,
        SplineMode::Evaluation => 8.0 * m * (r + 1.0) * n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_fine_case() {
        let est = flops_estimate(&CostModel::reference_fine());
        assert_eq!(est.steps, 6000);
        assert_eq!(est.cells, 800_000);
        assert_eq!(est.flops, 4.8e10);
    }

    #[test]
    fn reference_coarse_case() {
        let est = flops_estimate(&CostModel::reference_coarse());
        assert_eq!(est.steps, 600);
        assert_eq!(est.cells, 800);
        assert_eq!(est.flops, 4.8e6);
    }

    #[test]
    fn zero_duration_costs_nothing() {
        let model = CostModel {
            duration: 0.0,
            ..CostModel::reference_fine()
        };
        assert_eq!(flops_estimate(&model).flops, 0.0);
    }

    #[test]
    fn partial_cells_round_up() {
        let model = CostModel::new([1.2, 1.0, 1.0], 0.5, 1.0, 1.0, 1.0, 10.0).unwrap();
        assert_eq!(model.cells(), 3 * 2 * 2);
    }

    #[test]
    fn memory_examples() {
        let unit = CostModel::new([1.0; 3], 1.0, 1.0, 1.0, 1.0, 10.0).unwrap();
        assert_eq!(memory_estimate(&unit, 1, 1).unwrap(), 8);
        let fine = CostModel::reference_fine();
        assert_eq!(memory_estimate(&fine, 3, 1).unwrap(), 19_200_000);
        assert_eq!(snapshots_for_memory(&fine, 3, 1_000_000_000).unwrap(), 53);
        assert!(memory_estimate(&fine, 0, 1).is_err());
    }

    #[test]
    fn spline_flop_examples() {
        assert_eq!(
            spline_flops_estimate(10_000, 1000, 10, SplineMode::DenseCoefficients).unwrap(),
            1e12
        );
        assert_eq!(
            spline_flops_estimate(1, 1, 1, SplineMode::Evaluation).unwrap(),
            16.0
        );
        assert_eq!(
            spline_flops_estimate(10_000, 1, 10, SplineMode::Evaluation).unwrap(),
            8.8e5
        );
        assert!(spline_flops_estimate(0, 1, 1, SplineMode::Evaluation).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(CostModel::new([0.0, 1.0, 1.0], 1.0, 1.0, 1.0, 1.0, 10.0).is_err());
        assert!(CostModel::new([1.0; 3], 1.0, 0.0, 1.0, 1.0, 10.0).is_err());
        assert!(CostModel::new([1.0; 3], 1.0, 1.0, -1.0, 1.0, 10.0).is_err());
        assert!(CostModel::new([1.0; 3], 1.0, 1.0, 1.0, 1.2, 10.0).is_err());
    }
}
