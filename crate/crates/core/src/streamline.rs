//! Particle trajectories and their densification with Hermite cubics.
//!
//! Trajectories are pathlines of a velocity sampler, recorded every
//! `segment_dt`. For steady samplers they coincide with streamlines. A segment
//! between consecutive points is parametrized by `t in [0, 1]`, so physical
//! velocities are multiplied by `segment_dt` to become parameter tangents
//! (unless [`TangentMode::Raw`] is requested).

use std::thread;

use crate::error::{Error, Result};
use crate::hermite::{
    batch_coefficients, build_global_basis, evaluate_batch, evaluate_batch_derivative,
    evaluate_batch_partitioned, evaluation_matrix, EvaluationGrid, HermiteBatch,
};

pub const MAX_DIMS: usize = 3;

/// How point velocities become cubic tangents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TangentMode {
    /// Tangent = velocity * segment_dt.
    #[default]
    Scaled,
    /// Tangent = velocity, as if each segment lasted one time unit.
    Raw,
}

impl TangentMode {
    fn scale(self, segment_dt: f64) -> f64 {
        match self {
            TangentMode::Scaled => segment_dt,
            TangentMode::Raw => 1.0,
        }
    }
}

/// `M` trajectories of `S` points each, with positions and velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamlineSet {
    m_trajectories: usize,
    s_points: usize,
    dims: usize,
    // M x S x dims
    positions: Vec<f64>,
    velocities: Vec<f64>,
    segment_dt: f64,
}

impl StreamlineSet {
    pub fn new(
        m_trajectories: usize,
        s_points: usize,
        dims: usize,
        positions: Vec<f64>,
        velocities: Vec<f64>,
        segment_dt: f64,
    ) -> Result<Self> {
        if !(1..=MAX_DIMS).contains(&dims) {
            return Err(Error::domain(format!(
                "dimension must be 1 to 3, got {dims}"
            )));
        }
        if m_trajectories == 0 {
            return Err(Error::domain("need at least one trajectory"));
        }
        if s_points < 2 {
            return Err(Error::domain("each trajectory needs at least 2 points"));
        }
        if !(segment_dt > 0.0 && segment_dt.is_finite()) {
            return Err(Error::domain(format!(
                "segment_dt must be positive, got {segment_dt}"
            )));
        }
        let len = m_trajectories * s_points * dims;
        if positions.len() != len || velocities.len() != len {
            return Err(Error::domain(format!(
                "expected {len} position and velocity entries, got {} and {}",
                positions.len(),
                velocities.len()
            )));
        }
        if positions.iter().chain(&velocities).any(|v| !v.is_finite()) {
            return Err(Error::domain("trajectory data must be finite"));
        }
        Ok(Self {
            m_trajectories,
            s_points,
            dims,
            positions,
            velocities,
            segment_dt,
        })
    }

    pub fn m_trajectories(&self) -> usize {
        self.m_trajectories
    }

    pub fn s_points(&self) -> usize {
        self.s_points
    }

    pub fn n_segments(&self) -> usize {
        self.s_points - 1
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn segment_dt(&self) -> f64 {
        self.segment_dt
    }

    fn offset(&self, traj: usize, point: usize) -> usize {
        (traj * self.s_points + point) * self.dims
    }

    pub fn position(&self, traj: usize, point: usize) -> &[f64] {
        let o = self.offset(traj, point);
        &self.positions[o..o + self.dims]
    }

    pub fn velocity(&self, traj: usize, point: usize) -> &[f64] {
        let o = self.offset(traj, point);
        &self.velocities[o..o + self.dims]
    }
}

/// Explicit-Euler pathlines `P_{k+1} = P_k + dt v(P_k)` from each seed.
///
/// `velocity(pos, out)` writes the velocity at `pos` into `out`; both slices
/// have the seed dimension.
pub fn trace_pathlines<F>(
    velocity: F,
    seeds: &[Vec<f64>],
    segment_dt: f64,
    n_segments: usize,
) -> Result<StreamlineSet>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    trace_pathlines_with_workers(velocity, seeds, segment_dt, n_segments, 1)
}

/// [`trace_pathlines`] with the seeds split over `workers` threads.
pub fn trace_pathlines_with_workers<F>(
    velocity: F,
    seeds: &[Vec<f64>],
    segment_dt: f64,
    n_segments: usize,
    workers: usize,
) -> Result<StreamlineSet>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    if !(segment_dt > 0.0 && segment_dt.is_finite()) {
        return Err(Error::domain(format!(
            "segment_dt must be positive, got {segment_dt}"
        )));
    }
    if n_segments == 0 {
        return Err(Error::domain("need at least one segment"));
    }
    if workers == 0 {
        return Err(Error::domain("worker count must be at least 1"));
    }
    let dims = seeds.first().map_or(0, Vec::len);
    if seeds.iter().any(|s| s.len() != dims) {
        return Err(Error::domain("all seeds must have the same dimension"));
    }
    let s_points = n_segments + 1;
    let stride = s_points * dims;
    let mut positions = vec![0.0; seeds.len() * stride];
    let mut velocities = vec![0.0; seeds.len() * stride];

    let trace_one = |traj: usize, seed: &[f64], pos: &mut [f64], vel: &mut [f64]| -> Result<()> {
        pos[..dims].copy_from_slice(seed);
        for k in 0..s_points {
            let (done, rest) = pos.split_at_mut((k + 1) * dims);
            let here = &done[k * dims..];
            let v = &mut vel[k * dims..(k + 1) * dims];
            velocity(here, v);
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Trace {
                    trajectory: traj,
                    segment: k,
                });
            }
            if k + 1 < s_points {
                for d in 0..dims {
                    rest[d] = here[d] + segment_dt * v[d];
                }
            }
        }
        Ok(())
    };

    let chunk = seeds.len().div_ceil(workers).max(1);
    let results: Vec<Result<()>> = thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .zip(positions.chunks_mut(chunk * stride))
            .zip(velocities.chunks_mut(chunk * stride))
            .enumerate()
            .map(|(c, ((seeds, pos), vel))| {
                let trace_one = &trace_one;
                scope.spawn(move || {
                    for (i, seed) in seeds.iter().enumerate() {
                        let range = i * stride..(i + 1) * stride;
                        trace_one(
                            c * chunk + i,
                            seed,
                            &mut pos[range.clone()],
                            &mut vel[range],
                        )?;
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("tracer thread panicked"))
            .collect()
    });
    for r in results {
        r?;
    }
    StreamlineSet::new(
        seeds.len(),
        s_points,
        dims,
        positions,
        velocities,
        segment_dt,
    )
}

/// Trajectory-major blocks `(p_k, p_{k+1}, v_k dt, v_{k+1} dt)` for one
/// segment index and one component, ready for the product `G p`.
pub fn pack_segment(
    set: &StreamlineSet,
    k: usize,
    component: usize,
    mode: TangentMode,
) -> Result<Vec<f64>> {
    if k >= set.n_segments() {
        return Err(Error::domain(format!(
            "segment {k} out of range for {} segments",
            set.n_segments()
        )));
    }
    if component >= set.dims {
        return Err(Error::domain(format!(
            "component {component} out of range for dimension {}",
            set.dims
        )));
    }
    let scale = mode.scale(set.segment_dt);
    let mut p = Vec::with_capacity(4 * set.m_trajectories);
    for i in 0..set.m_trajectories {
        let a = set.offset(i, k) + component;
        let b = set.offset(i, k + 1) + component;
        p.extend_from_slice(&[
            set.positions[a],
            set.positions[b],
            set.velocities[a] * scale,
            set.velocities[b] * scale,
        ]);
    }
    Ok(p)
}

/// Endpoint data of one trajectory's segment in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentEndpoints {
    pub start: f64,
    pub end: f64,
    pub v_start: f64,
    pub v_end: f64,
}

/// Inverse of [`pack_segment`].
pub fn unpack_segment(
    packed: &[f64],
    segment_dt: f64,
    mode: TangentMode,
) -> Result<Vec<SegmentEndpoints>> {
    if !packed.len().is_multiple_of(4) {
        return Err(Error::domain(
            "packed segment length must be a multiple of 4",
        ));
    }
    let scale = mode.scale(segment_dt);
    Ok(packed
        .chunks_exact(4)
        .map(|b| SegmentEndpoints {
            start: b[0],
            end: b[1],
            v_start: b[2] / scale,
            v_end: b[3] / scale,
        })
        .collect())
}

/// Densified trajectories: `N r + 1` points per trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrajectorySet {
    m_trajectories: usize,
    ticks_per_segment: usize,
    dims: usize,
    n_points: usize,
    // M x n_points x dims
    positions: Vec<f64>,
    velocities: Vec<f64>,
    t_param: Vec<f64>,
}

impl DenseTrajectorySet {
    pub fn m_trajectories(&self) -> usize {
        self.m_trajectories
    }

    pub fn ticks_per_segment(&self) -> usize {
        self.ticks_per_segment
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Global parameter of each point: segment index plus local tick.
    pub fn t_param(&self) -> &[f64] {
        &self.t_param
    }

    pub fn position(&self, traj: usize, point: usize) -> &[f64] {
        let o = (traj * self.n_points + point) * self.dims;
        &self.positions[o..o + self.dims]
    }

    /// Velocity in physical units (or parameter units under raw tangents).
    pub fn velocity(&self, traj: usize, point: usize) -> &[f64] {
        let o = (traj * self.n_points + point) * self.dims;
        &self.velocities[o..o + self.dims]
    }
}

/// Densification settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Densifier {
    pub tangents: TangentMode,
    /// Threads used for the `C R` products; must divide `M`.
    pub workers: usize,
}

impl Default for Densifier {
    fn default() -> Self {
        Self {
            tangents: TangentMode::Scaled,
            workers: 1,
        }
    }
}

impl Densifier {
    /// Coefficients per segment and component via `G p`, values via `C R`.
    ///
    /// Each segment contributes ticks `0..r`; the tick at `t = 0` equals the
    /// original point exactly, so joints pass through the original data. The
    /// final point of every trajectory is copied from the input.
    pub fn densify(&self, set: &StreamlineSet, r: usize) -> Result<DenseTrajectorySet> {
        let grid = evaluation_matrix(r)?;
        let basis = build_global_basis(set.m_trajectories)?;
        let m = set.m_trajectories;
        let dims = set.dims;
        let n_seg = set.n_segments();
        let n_points = n_seg * r + 1;
        let vel_scale = self.tangents.scale(set.segment_dt);

        let mut positions = vec![0.0; m * n_points * dims];
        let mut velocities = vec![0.0; m * n_points * dims];
        let at = |traj: usize, point: usize, comp: usize| (traj * n_points + point) * dims + comp;

        for k in 0..n_seg {
            for comp in 0..dims {
                let p = pack_segment(set, k, comp, self.tangents)?;
                let batch = HermiteBatch::from_flat(&batch_coefficients(&basis, &p)?)?;
                let values = evaluate_batch_partitioned(&batch, &grid, self.workers)?;
                let slopes = evaluate_batch_derivative(&batch, &grid);
                for i in 0..m {
                    for j in 0..r {
                        let idx = at(i, k * r + j, comp);
                        positions[idx] = values.get(i, j);
                        velocities[idx] = slopes.get(i, j) / vel_scale;
                    }
                }
            }
        }
        for i in 0..m {
            for comp in 0..dims {
                let idx = at(i, n_seg * r, comp);
                let src = set.offset(i, n_seg) + comp;
                positions[idx] = set.positions[src];
                velocities[idx] = set.velocities[src];
            }
        }
        let t_param = (0..n_points)
            .map(|q| (q / r) as f64 + (q % r) as f64 / r as f64)
            .collect();
        Ok(DenseTrajectorySet {
            m_trajectories: m,
            ticks_per_segment: r,
            dims,
            n_points,
            positions,
            velocities,
            t_param,
        })
    }
}

/// [`Densifier::densify`] with scaled tangents on one thread.
pub fn densify(set: &StreamlineSet, r: usize) -> Result<DenseTrajectorySet> {
    Densifier::default().densify(set, r)
}

/// Positions and velocities of all particles at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dims: usize,
    /// M x dims
    pub positions: Vec<f64>,
    /// M x dims, physical units under scaled tangents
    pub velocities: Vec<f64>,
}

impl Snapshot {
    pub fn position(&self, traj: usize) -> &[f64] {
        &self.positions[traj * self.dims..(traj + 1) * self.dims]
    }

    pub fn velocity(&self, traj: usize) -> &[f64] {
        &self.velocities[traj * self.dims..(traj + 1) * self.dims]
    }
}

/// All particles of segment `k` at the tick `t0 = j / r` of `grid`: one
/// column of `C R` per component.
pub fn eulerian_snapshot(
    set: &StreamlineSet,
    k: usize,
    t0: f64,
    grid: &EvaluationGrid,
    mode: TangentMode,
) -> Result<Snapshot> {
    let col = grid.tick_index(t0).ok_or_else(|| {
        Error::domain(format!(
            "t0 = {t0} is not a tick of the grid (r = {})",
            grid.r()
        ))
    })?;
    let basis = build_global_basis(set.m_trajectories)?;
    let m = set.m_trajectories;
    let dims = set.dims;
    let scale = mode.scale(set.segment_dt);
    let mut positions = vec![0.0; m * dims];
    let mut velocities = vec![0.0; m * dims];
    for comp in 0..dims {
        let p = pack_segment(set, k, comp, mode)?;
        let batch = HermiteBatch::from_flat(&batch_coefficients(&basis, &p)?)?;
        let values = evaluate_batch(&batch, grid);
        let slopes = evaluate_batch_derivative(&batch, grid);
        for i in 0..m {
            positions[i * dims + comp] = values.get(i, col);
            velocities[i * dims + comp] = slopes.get(i, col) / scale;
        }
    }
    Ok(Snapshot {
        dims,
        positions,
        velocities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(_: &[f64], v: &mut [f64]) {
        v.copy_from_slice(&[1.0, 0.0, 0.0]);
    }

    fn line_set() -> StreamlineSet {
        trace_pathlines(uniform, &[vec![0.0, 0.0, 0.0]], 1.0, 3).unwrap()
    }

    #[test]
    fn uniform_field_trace() {
        let set = line_set();
        assert_eq!(set.s_points(), 4);
        for k in 0..4 {
            assert_eq!(set.position(0, k), &[k as f64, 0.0, 0.0]);
            assert_eq!(set.velocity(0, k), &[1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn zero_field_keeps_seeds() {
        let seeds = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        let set = trace_pathlines(|_, v| v.fill(0.0), &seeds, 0.1, 5).unwrap();
        for (i, seed) in seeds.iter().enumerate() {
            for k in 0..6 {
                assert_eq!(set.position(i, k), seed.as_slice());
            }
        }
    }

    #[test]
    fn trace_reports_non_finite_sample() {
        let seeds = vec![vec![0.0], vec![0.0], vec![5.0]];
        let err = trace_pathlines(
            |x, v| v[0] = if x[0] > 6.5 { f64::NAN } else { 1.0 },
            &seeds,
            1.0,
            4,
        )
        .unwrap_err();
        // Seed 5 reaches 7 after two segments.
        assert!(
            matches!(
                err,
                Error::Trace {
                    trajectory: 2,
                    segment: 2
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn trace_argument_checks() {
        let seeds = vec![vec![0.0]];
        assert!(trace_pathlines(|_, v| v[0] = 1.0, &seeds, 0.0, 2).is_err());
        assert!(trace_pathlines(|_, v| v[0] = 1.0, &seeds, 1.0, 0).is_err());
        let ragged = vec![vec![0.0], vec![0.0, 1.0]];
        assert!(trace_pathlines(|_, v| v.fill(1.0), &ragged, 1.0, 2).is_err());
    }

    #[test]
    fn parallel_trace_is_identical() {
        let seeds: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.3, 1.0]).collect();
        let rot = |x: &[f64], v: &mut [f64]| {
            v[0] = -x[1];
            v[1] = x[0];
        };
        let a = trace_pathlines_with_workers(rot, &seeds, 0.01, 50, 1).unwrap();
        let b = trace_pathlines_with_workers(rot, &seeds, 0.01, 50, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pack_examples() {
        let set = trace_pathlines(|_, v| v[0] = 1.0, &[vec![0.0]], 1.0, 3).unwrap();
        assert_eq!(
            pack_segment(&set, 0, 0, TangentMode::Scaled).unwrap(),
            vec![0.0, 1.0, 1.0, 1.0]
        );
        assert!(pack_segment(&set, 3, 0, TangentMode::Scaled).is_err());
        assert!(pack_segment(&set, 0, 1, TangentMode::Scaled).is_err());

        let still = trace_pathlines(|_, v| v.fill(0.0), &[vec![2.0, 3.0]], 0.5, 2).unwrap();
        assert_eq!(
            pack_segment(&still, 1, 1, TangentMode::Scaled).unwrap(),
            vec![3.0, 3.0, 0.0, 0.0]
        );
    }

    #[test]
    fn raw_tangents_skip_scaling() {
        let set = trace_pathlines(|_, v| v[0] = 2.0, &[vec![0.0]], 0.25, 2).unwrap();
        assert_eq!(
            pack_segment(&set, 0, 0, TangentMode::Scaled).unwrap(),
            vec![0.0, 0.5, 0.5, 0.5]
        );
        assert_eq!(
            pack_segment(&set, 0, 0, TangentMode::Raw).unwrap(),
            vec![0.0, 0.5, 2.0, 2.0]
        );
    }

    #[test]
    fn densify_r1_returns_original_points() {
        let seeds: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 0.5 * i as f64]).collect();
        let set = trace_pathlines(
            |x, v| {
                v[0] = x[1].sin();
                v[1] = -x[0].cos();
            },
            &seeds,
            0.3,
            6,
        )
        .unwrap();
        let dense = densify(&set, 1).unwrap();
        assert_eq!(dense.n_points(), set.s_points());
        for i in 0..4 {
            for k in 0..set.s_points() {
                assert_eq!(dense.position(i, k), set.position(i, k));
            }
        }
    }

    #[test]
    fn densify_line_is_equally_spaced() {
        let dense = densify(&line_set(), 4).unwrap();
        assert_eq!(dense.n_points(), 13);
        for q in 0..13 {
            let expect = q as f64 / 4.0;
            let p = dense.position(0, q);
            assert!((p[0] - expect).abs() < 1e-14, "{q}: {p:?}");
            assert_eq!(&p[1..], &[0.0, 0.0]);
            assert!((dense.velocity(0, q)[0] - 1.0).abs() < 1e-14);
            assert!((dense.t_param()[q] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn densify_with_workers_must_divide() {
        let seeds: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let set = trace_pathlines(|_, v| v[0] = 1.0, &seeds, 1.0, 2).unwrap();
        let d = Densifier {
            workers: 4,
            ..Densifier::default()
        };
        assert!(d.densify(&set, 3).is_err());
        let d3 = Densifier {
            workers: 3,
            ..Densifier::default()
        };
        assert_eq!(d3.densify(&set, 3).unwrap(), densify(&set, 3).unwrap());
        assert!(densify(&set, 0).is_err());
    }

    #[test]
    fn snapshot_examples() {
        let set = line_set();
        let grid = evaluation_matrix(2).unwrap();
        let s0 = eulerian_snapshot(&set, 0, 0.0, &grid, TangentMode::Scaled).unwrap();
        assert_eq!(s0.position(0), set.position(0, 0));
        let s1 = eulerian_snapshot(&set, 1, 1.0, &grid, TangentMode::Scaled).unwrap();
        assert!((s1.position(0)[0] - 2.0).abs() < 1e-15);
        let mid = eulerian_snapshot(&set, 0, 0.5, &grid, TangentMode::Scaled).unwrap();
        assert_eq!(mid.position(0), &[0.5, 0.0, 0.0]);
        assert_eq!(mid.velocity(0), &[1.0, 0.0, 0.0]);
        assert!(eulerian_snapshot(&set, 0, 0.3, &grid, TangentMode::Scaled).is_err());
        assert!(eulerian_snapshot(&set, 3, 0.0, &grid, TangentMode::Scaled).is_err());
    }

    #[test]
    fn set_validation() {
        assert!(StreamlineSet::new(1, 2, 4, vec![0.0; 8], vec![0.0; 8], 1.0).is_err());
        assert!(StreamlineSet::new(1, 1, 1, vec![0.0], vec![0.0], 1.0).is_err());
        assert!(StreamlineSet::new(1, 2, 1, vec![0.0; 2], vec![0.0; 2], 0.0).is_err());
        assert!(StreamlineSet::new(1, 2, 1, vec![0.0; 3], vec![0.0; 2], 1.0).is_err());
        assert!(StreamlineSet::new(1, 2, 1, vec![0.0, f64::INFINITY], vec![0.0; 2], 1.0).is_err());
    }
}
