//! Timing harness for the spline products and the coarse-versus-fine race.
//!
//! Every measurement runs one excluded warm-up round, then `repetitions`
//! timed rounds; the median is the reported figure. Inputs are drawn from a
//! seeded generator and each timed output is checked against a reference
//! before it is accepted.

use std::cell::RefCell;
use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cost::{spline_flops_estimate, SplineMode};
use crate::error::{Error, Result};
use crate::hermite::{
    build_global_basis, evaluate_batch_partitioned, evaluation_matrix, hermite_coefficients,
    EvaluationGrid, HermiteBatch, SegmentData, Table,
};
use crate::lf::{cfl_max_dt, Boundary, Equation, LfStepper};

pub const MIN_REPETITIONS: usize = 3;

/// Each timed round repeats the operation until it lasts at least this long.
const MIN_ROUND: Duration = Duration::from_millis(2);
const MAX_INNER: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub op: String,
    pub m: usize,
    pub n_segments: usize,
    pub r: usize,
    pub workers: usize,
    pub repetitions: usize,
    /// Seconds per operation, one entry per timed repetition.
    pub wall_seconds: Vec<f64>,
    pub flops_est: f64,
    pub workset_bytes: usize,
    pub seed: u64,
}

impl BenchResult {
    pub fn median_seconds(&self) -> f64 {
        median(&self.wall_seconds)
    }

    /// Estimated flop rate at the median time.
    pub fn gflops(&self) -> f64 {
        self.flops_est / self.median_seconds() / 1e9
    }
}

pub fn median(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn try_vec(len: usize, what: &str) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    v.try_reserve_exact(len).map_err(|_| Error::Resource {
        what: what.to_string(),
        bytes: len.saturating_mul(8),
    })?;
    v.resize(len, 0.0);
    Ok(v)
}

/// Time `op` per call: warm-up, calibrate an inner loop, then `repetitions`
/// rounds. `check` runs after every round.
fn time_rounds(
    repetitions: usize,
    mut op: impl FnMut() -> Result<()>,
    mut check: impl FnMut() -> Result<()>,
) -> Result<Vec<f64>> {
    let start = Instant::now();
    op()?;
    let once = start.elapsed().max(Duration::from_nanos(1));
    check()?;
    let inner =
        ((MIN_ROUND.as_secs_f64() / once.as_secs_f64()).ceil() as usize).clamp(1, MAX_INNER);

    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        for _ in 0..inner {
            op()?;
        }
        let elapsed = start.elapsed().max(Duration::from_nanos(1));
        check()?;
        samples.push(elapsed.as_secs_f64() / inner as f64);
    }
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductKind {
    /// Coefficients for all trajectories: `G p`.
    Gp,
    /// Values at all ticks: `C R`.
    Cr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductBench {
    pub kind: ProductKind,
    pub m: usize,
    pub r: usize,
    pub workers: usize,
    pub repetitions: usize,
    pub seed: u64,
}

/// Median timing of one `G p` or `C R` product.
pub fn bench_product(cfg: &ProductBench) -> Result<BenchResult> {
    if cfg.repetitions < MIN_REPETITIONS {
        return Err(Error::domain(format!(
            "need at least {MIN_REPETITIONS} repetitions, got {}",
            cfg.repetitions
        )));
    }
    if cfg.m == 0 || cfg.r == 0 || cfg.workers == 0 {
        return Err(Error::domain("M, r and workers must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = cfg.m;
    match cfg.kind {
        ProductKind::Gp => {
            let basis = build_global_basis(m)?;
            let mut p = try_vec(4 * m, "segment vector p")?;
            p.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
            let out = RefCell::new(try_vec(4 * m, "coefficient vector Gp")?);
            let wall_seconds = time_rounds(
                cfg.repetitions,
                || basis.apply_into(black_box(&p), black_box(&mut out.borrow_mut()[..])),
                || verify_gp(&p, &out.borrow()),
            )?;
            Ok(BenchResult {
                op: "gp".into(),
                m,
                n_segments: 1,
                r: cfg.r,
                workers: 1,
                repetitions: cfg.repetitions,
                wall_seconds,
                flops_est: spline_flops_estimate(
                    m as u64,
                    1,
                    cfg.r as u64,
                    SplineMode::SparseCoefficients,
                )?,
                workset_bytes: basis.storage_bytes() + 2 * 4 * m * 8,
                seed: cfg.seed,
            })
        }
        ProductKind::Cr => {
            if !m.is_multiple_of(cfg.workers) {
                return Err(Error::domain(format!(
                    "{m} trajectories cannot be split evenly over {} workers",
                    cfg.workers
                )));
            }
            let grid = evaluation_matrix(cfg.r)?;
            let rows: Vec<[f64; 4]> = (0..m)
                .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
                .collect();
            let batch = HermiteBatch::from_rows(rows);
            // Probe the table size so an impossible request fails as a resource error.
            drop(try_vec(m * grid.cols(), "value table CR")?);
            let out = RefCell::new(None);
            let wall_seconds = time_rounds(
                cfg.repetitions,
                || {
                    let table = evaluate_batch_partitioned(black_box(&batch), &grid, cfg.workers)?;
                    *out.borrow_mut() = Some(table);
                    Ok(())
                },
                || match out.borrow().as_ref() {
                    Some(table) => verify_cr(&batch, &grid, table),
                    None => Err(Error::Verification("no product computed".into())),
                },
            )?;
            Ok(BenchResult {
                op: "cr".into(),
                m,
                n_segments: 1,
                r: cfg.r,
                workers: cfg.workers,
                repetitions: cfg.repetitions,
                wall_seconds,
                flops_est: spline_flops_estimate(
                    m as u64,
                    1,
                    cfg.r as u64,
                    SplineMode::Evaluation,
                )?,
                workset_bytes: (4 * m + 4 * grid.cols() + m * grid.cols()) * 8,
                seed: cfg.seed,
            })
        }
    }
}

fn verify_gp(p: &[f64], out: &[f64]) -> Result<()> {
    for (i, (x, y)) in p.chunks_exact(4).zip(out.chunks_exact(4)).enumerate() {
        let expect = hermite_coefficients(SegmentData::new(x[0], x[1], x[2], x[3])).to_array();
        if expect != [y[0], y[1], y[2], y[3]] {
            return Err(Error::Verification(format!(
                "Gp block {i} differs from the per-segment solve"
            )));
        }
    }
    Ok(())
}

fn verify_cr(batch: &HermiteBatch, grid: &EvaluationGrid, table: &Table) -> Result<()> {
    for i in 0..batch.m_trajectories() {
        let cubic = batch.cubic(i);
        for k in 0..grid.cols() {
            let expect = cubic.eval(grid.tick(k));
            if (table.get(i, k) - expect).abs() > 1e-12 {
                return Err(Error::Verification(format!(
                    "CR entry ({i}, {k}) differs from Horner"
                )));
            }
        }
    }
    Ok(())
}

/// Flow through a channel of length `length` at speeds up to `v_max`.
///
/// Each of the `m` trajectories is a particle riding its own 1D axial
/// velocity profile, advected at `v_max` with periodic ends. The coarse grid
/// has `n_segments` intervals; the fine grid has `n_segments * r`, so its step
/// equals the densified resolution `length / (r n_segments)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RaceScenario {
    pub length: f64,
    pub v_max: f64,
    pub m: usize,
    pub r: usize,
    pub duration: f64,
    pub n_segments: usize,
    pub cfl_constant: f64,
    pub workers: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl RaceScenario {
    /// 1 m channel, 10 cm/s, 10^3 trajectories, r = 10, 10 simulated seconds (cm units).
    pub fn desk() -> Self {
        Self {
            length: 100.0,
            v_max: 10.0,
            m: 1000,
            r: 10,
            duration: 10.0,
            n_segments: 10,
            cfl_constant: 0.5,
            workers: 1,
            repetitions: MIN_REPETITIONS,
            seed: 0x5eed,
        }
    }

    /// 10^4 trajectories over one simulated minute.
    pub fn full_scale() -> Self {
        Self {
            m: 10_000,
            duration: 60.0,
            ..Self::desk()
        }
    }

    fn plan(&self) -> Result<RacePlan> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::domain("channel length must be positive"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::domain("duration must be positive"));
        }
        if self.m == 0 || self.r == 0 {
            return Err(Error::domain("M and r must be at least 1"));
        }
        if self.n_segments < 2 {
            return Err(Error::domain("the coarse grid needs at least 2 intervals"));
        }
        if self.repetitions < MIN_REPETITIONS {
            return Err(Error::domain(format!(
                "need at least {MIN_REPETITIONS} repetitions"
            )));
        }
        if self.workers == 0 || !self.m.is_multiple_of(self.workers) {
            return Err(Error::domain(format!(
                "{} trajectories cannot be split evenly over {} workers",
                self.m, self.workers
            )));
        }
        let h_coarse = self.length / self.n_segments as f64;
        let dt_coarse = cfl_max_dt(h_coarse, self.v_max, self.cfl_constant)?;
        let q = self.duration / dt_coarse;
        let steps_coarse = if (q - q.round()).abs() <= 1e-9 * q.round() {
            q.round() as usize
        } else {
            q.ceil() as usize
        };
        Ok(RacePlan {
            h_coarse,
            h_fine: h_coarse / self.r as f64,
            dt_coarse,
            dt_fine: dt_coarse / self.r as f64,
            nodes_coarse: self.n_segments + 1,
            nodes_fine: self.n_segments * self.r + 1,
            steps_coarse,
            steps_fine: steps_coarse * self.r,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct RacePlan {
    h_coarse: f64,
    h_fine: f64,
    dt_coarse: f64,
    dt_fine: f64,
    nodes_coarse: usize,
    nodes_fine: usize,
    steps_coarse: usize,
    steps_fine: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaceResult {
    pub fine: BenchResult,
    pub coarse: BenchResult,
    /// Fine median time over coarse median time.
    pub ratio: f64,
    pub points_per_trajectory: usize,
    /// Largest distance between the final particle positions of the two methods.
    pub final_position_gap: f64,
}

/// Per-trajectory initial data shared by both methods.
struct Lines {
    phases: Vec<f64>,
    seeds: Vec<f64>,
}

impl Lines {
    fn new(s: &RaceScenario) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let phases = (0..s.m).map(|_| rng.gen_range(0.0..1.0)).collect();
        let seeds = (0..s.m)
            .map(|i| s.length * (i as f64 + 0.5) / s.m as f64)
            .collect();
        Self { phases, seeds }
    }

    fn profile(
        &self,
        s: &RaceScenario,
        i: usize,
        nodes: usize,
        h: f64,
    ) -> impl Iterator<Item = f64> + '_ {
        let (len, v, phase) = (s.length, s.v_max, self.phases[i]);
        (0..nodes).map(move |j| {
            let x = j as f64 * h;
            v * (0.5 + 0.5 * (2.0 * std::f64::consts::PI * (x / len + phase)).sin())
        })
    }
}

/// Linear interpolation on an endpoint-inclusive periodic grid.
fn sample_periodic(values: &[f64], h: f64, length: f64, x: f64) -> f64 {
    let cells = values.len() - 1;
    let xi = x.rem_euclid(length) / h;
    let j = (xi.floor() as usize).min(cells - 1);
    let f = xi - j as f64;
    (1.0 - f) * values[j] + f * values[j + 1]
}

#[derive(Default)]
struct Sink {
    checksum: f64,
    points: usize,
}

impl Sink {
    fn push(&mut self, x: f64) {
        self.checksum += x;
        self.points += 1;
    }
}

fn race_fine(s: &RaceScenario, plan: &RacePlan, lines: &Lines) -> Result<(Sink, Vec<f64>)> {
    let stepper = LfStepper::new(Equation::Advection { speed: s.v_max }, Boundary::Periodic)
        .with_cfl_limit(s.cfl_constant);
    let nodes = plan.nodes_fine;
    let mut fields = try_vec(s.m * nodes, "fine velocity fields")?;
    for (i, f) in fields.chunks_exact_mut(nodes).enumerate() {
        f.iter_mut()
            .zip(lines.profile(s, i, nodes, plan.h_fine))
            .for_each(|(a, b)| *a = b);
    }
    let mut scratch = vec![0.0; nodes];
    let mut pos = lines.seeds.clone();
    let mut sink = Sink::default();
    for n in 0..=plan.steps_fine {
        for (x, field) in pos.iter_mut().zip(fields.chunks_exact_mut(nodes)) {
            sink.push(*x);
            if n < plan.steps_fine {
                let v = sample_periodic(field, plan.h_fine, s.length, *x);
                *x += plan.dt_fine * v;
                stepper.step(field, &mut scratch, plan.dt_fine, plan.h_fine)?;
                field.copy_from_slice(&scratch);
            }
        }
    }
    Ok((sink, pos))
}

fn race_coarse(s: &RaceScenario, plan: &RacePlan, lines: &Lines) -> Result<(Sink, Vec<f64>)> {
    let stepper = LfStepper::new(Equation::Advection { speed: s.v_max }, Boundary::Periodic)
        .with_cfl_limit(s.cfl_constant);
    let nodes = plan.nodes_coarse;
    let m = s.m;
    let mut fields = try_vec(m * nodes, "coarse velocity fields")?;
    for (i, f) in fields.chunks_exact_mut(nodes).enumerate() {
        f.iter_mut()
            .zip(lines.profile(s, i, nodes, plan.h_coarse))
            .for_each(|(a, b)| *a = b);
    }
    let basis = build_global_basis(m)?;
    let grid = evaluation_matrix(s.r)?;
    let mut scratch = vec![0.0; nodes];
    let mut pos = lines.seeds.clone();
    let mut vel = vec![0.0; m];
    let mut prev_pos = vec![0.0; m];
    let mut prev_vel = vec![0.0; m];
    let mut p = vec![0.0; 4 * m];
    let mut coefficients = vec![0.0; 4 * m];
    let mut sink = Sink::default();

    for n in 0..=plan.steps_coarse {
        for ((x, v), field) in pos
            .iter()
            .zip(vel.iter_mut())
            .zip(fields.chunks_exact(nodes))
        {
            *v = sample_periodic(field, plan.h_coarse, s.length, *x);
        }
        if n > 0 {
            for i in 0..m {
                p[4 * i..4 * i + 4].copy_from_slice(&[
                    prev_pos[i],
                    pos[i],
                    prev_vel[i] * plan.dt_coarse,
                    vel[i] * plan.dt_coarse,
                ]);
            }
            basis.apply_into(&p, &mut coefficients)?;
            let table = evaluate_batch_partitioned(
                &HermiteBatch::from_flat(&coefficients)?,
                &grid,
                s.workers,
            )?;
            for i in 0..m {
                for &x in &table.row(i)[..s.r] {
                    sink.push(x);
                }
            }
        }
        if n == plan.steps_coarse {
            pos.iter().for_each(|&x| sink.push(x));
            break;
        }
        prev_pos.copy_from_slice(&pos);
        prev_vel.copy_from_slice(&vel);
        for ((x, v), field) in pos.iter_mut().zip(&vel).zip(fields.chunks_exact_mut(nodes)) {
            *x += plan.dt_coarse * v;
            stepper.step(field, &mut scratch, plan.dt_coarse, plan.h_coarse)?;
            field.copy_from_slice(&scratch);
        }
    }
    Ok((sink, pos))
}

fn time_method(
    repetitions: usize,
    mut method: impl FnMut() -> Result<(Sink, Vec<f64>)>,
) -> Result<(Vec<f64>, Sink, Vec<f64>)> {
    let (sink, pos) = method()?;
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let (again, _) = black_box(method()?);
        samples.push(start.elapsed().as_secs_f64().max(1e-9));
        if again.points != sink.points || again.checksum.to_bits() != sink.checksum.to_bits() {
            return Err(Error::Verification(
                "race method is not reproducible".into(),
            ));
        }
    }
    Ok((samples, sink, pos))
}

/// Fine-grid LF at step `h / r` against coarse LF plus densification by `r`,
/// both producing `steps_fine + 1` points per trajectory.
pub fn race_two_methods(s: &RaceScenario) -> Result<RaceResult> {
    let plan = s.plan()?;
    let lines = Lines::new(s);

    let (fine_t, fine_sink, fine_pos) = time_method(s.repetitions, || race_fine(s, &plan, &lines))?;
    let (coarse_t, coarse_sink, coarse_pos) =
        time_method(s.repetitions, || race_coarse(s, &plan, &lines))?;
    if fine_sink.points != coarse_sink.points {
        return Err(Error::Verification(format!(
            "methods produced {} and {} points",
            fine_sink.points, coarse_sink.points
        )));
    }

    let m = s.m as f64;
    let fine_flops = 10.0 * m * plan.nodes_fine as f64 * plan.steps_fine as f64;
    let coarse_flops = 10.0 * m * plan.nodes_coarse as f64 * plan.steps_coarse as f64
        + spline_flops_estimate(
            s.m as u64,
            plan.steps_coarse.max(1) as u64,
            s.r as u64,
            SplineMode::SparseCoefficients,
        )?
        + spline_flops_estimate(
            s.m as u64,
            plan.steps_coarse.max(1) as u64,
            s.r as u64,
            SplineMode::Evaluation,
        )?;
    let fine = BenchResult {
        op: "race_fine_lf".into(),
        m: s.m,
        n_segments: s.n_segments,
        r: s.r,
        workers: 1,
        repetitions: s.repetitions,
        wall_seconds: fine_t,
        flops_est: fine_flops,
        workset_bytes: (s.m * plan.nodes_fine + plan.nodes_fine + s.m) * 8,
        seed: s.seed,
    };
    let coarse = BenchResult {
        op: "race_coarse_lf_densify".into(),
        m: s.m,
        n_segments: s.n_segments,
        r: s.r,
        workers: s.workers,
        repetitions: s.repetitions,
        wall_seconds: coarse_t,
        flops_est: coarse_flops,
        workset_bytes: (s.m * plan.nodes_coarse + plan.nodes_coarse + 13 * s.m + s.m * (s.r + 1))
            * 8,
        seed: s.seed,
    };
    let final_position_gap = fine_pos
        .iter()
        .zip(&coarse_pos)
        .fold(0.0_f64, |g, (a, b)| g.max((a - b).abs()));
    Ok(RaceResult {
        ratio: fine.median_seconds() / coarse.median_seconds(),
        fine,
        coarse,
        points_per_trajectory: fine_sink.points / s.m,
        final_position_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn periodic_sampler_interpolates_and_wraps() {
        let v = [0.0, 1.0, 2.0, 0.0];
        assert_eq!(sample_periodic(&v, 1.0, 3.0, 0.5), 0.5);
        assert_eq!(sample_periodic(&v, 1.0, 3.0, 3.5), 0.5);
        assert_eq!(sample_periodic(&v, 1.0, 3.0, -0.5), 1.0);
        assert_eq!(sample_periodic(&v, 1.0, 3.0, 2.5), 1.0);
    }

    #[test]
    fn cr_smoke_case() {
        let res = bench_product(&ProductBench {
            kind: ProductKind::Cr,
            m: 1,
            r: 1,
            workers: 1,
            repetitions: 3,
            seed: 1,
        })
        .unwrap();
        assert_eq!(res.wall_seconds.len(), 3);
        assert!(res.wall_seconds.iter().all(|&t| t > 0.0));
        assert_eq!(res.flops_est, 16.0);
    }

    #[test]
    fn bench_rejects_bad_config() {
        let base = ProductBench {
            kind: ProductKind::Gp,
            m: 8,
            r: 4,
            workers: 1,
            repetitions: 2,
            seed: 0,
        };
        assert!(bench_product(&base).is_err());
        let uneven = ProductBench {
            kind: ProductKind::Cr,
            workers: 3,
            repetitions: 3,
            ..base
        };
        assert!(bench_product(&uneven).is_err());
    }

    #[test]
    fn race_point_counts_match() {
        let s = RaceScenario {
            m: 8,
            r: 4,
            duration: 2.0,
            n_segments: 5,
            ..RaceScenario::desk()
        };
        let res = race_two_methods(&s).unwrap();
        let plan = s.plan().unwrap();
        assert_eq!(res.points_per_trajectory, plan.steps_fine + 1);
        assert_eq!(plan.steps_coarse, 2);
        assert!(res.ratio > 0.0);
        assert!(res.final_position_gap.is_finite());
    }

    #[test]
    fn race_validation() {
        let bad = RaceScenario {
            n_segments: 1,
            ..RaceScenario::desk()
        };
        assert!(race_two_methods(&bad).is_err());
        let uneven = RaceScenario {
            workers: 3,
            ..RaceScenario::desk()
        };
        assert!(race_two_methods(&uneven).is_err());
    }
}
