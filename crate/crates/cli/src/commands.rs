use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use coarseflow::cost::snapshots_for_memory;
use coarseflow::io::{
    write_bench_header, write_bench_rows, write_error_report_json, write_node_errors_csv,
    write_solution_csv, write_trajectories_csv,
};
use coarseflow::streamline::trace_pathlines_with_workers;
use coarseflow::{
    bench_product, cfl_max_dt, flops_estimate, memory_estimate, race_two_methods, run,
    run_comparison, spline_flops_estimate, BoundConstants, CflGate, ComparisonSetup, CostModel,
    Densifier, Equation, Error, GridSpec1D, ProductBench, ProductKind, RaceScenario, ScalarField1D,
    SplineMode, TangentMode, TimeSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::scenario::{BenchOp, EquationKind, ScenarioArgs};

const DEFAULT_SEED: u64 = 2004;
/// Doubles per cell in the memory model: the three velocity components.
const FIELDS_PER_CELL: u64 = 3;
const ONE_GB: u64 = 1_000_000_000;

fn write_output(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> coarseflow::Result<()>,
) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    f(&mut out)?;
    out.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// One period of `sin(2 pi x / L)` on `[0, L]`, `L = h (nodes - 1)`.
fn sine_profile(a: &ScenarioArgs) -> anyhow::Result<ScalarField1D> {
    let nodes = a.nodes.unwrap_or(101);
    if nodes < 3 {
        return Err(Error::Domain(format!("need at least 3 nodes, got {nodes}")).into());
    }
    let h = a.grid_h.unwrap_or(1.0 / (nodes - 1) as f64);
    let grid = GridSpec1D::new(0.0, h, nodes)?;
    let length = grid.length();
    Ok(ScalarField1D::from_fn(grid, |x| {
        (2.0 * PI * x / length).sin()
    })?)
}

/// `--dt`, or the largest step the CFL constant admits for the initial data.
fn time_step(a: &ScenarioArgs, equation: &Equation, u0: &ScalarField1D) -> anyhow::Result<f64> {
    match a.dt {
        Some(dt) => Ok(dt),
        None => Ok(cfl_max_dt(
            u0.grid().h(),
            equation.max_speed(u0.values()),
            a.cfl_c(),
        )?),
    }
}

pub fn simulate(a: ScenarioArgs) -> anyhow::Result<()> {
    let u0 = sine_profile(&a)?;
    let equation = a.equation_or(EquationKind::Advection);
    let dt = time_step(&a, &equation, &u0)?;
    let steps = a.steps.unwrap_or(100);
    let time = TimeSpec::new(dt, steps, a.cfl_c())?;
    let history = run(
        &u0,
        time,
        equation,
        a.boundary(),
        a.store_every.unwrap_or(1),
    )?;

    write_output(&a.out_dir(), "solution.csv", |w| {
        write_solution_csv(w, &history)
    })?;
    println!(
        "{} nodes, h = {:e}, dt = {:e}, {steps} steps; sup norm {:.6e} -> {:.6e}",
        u0.grid().n_nodes(),
        u0.grid().h(),
        dt,
        u0.sup_norm(),
        history.last().sup_norm()
    );
    Ok(())
}

/// Steady flow through a 10 x 10 duct along z: parabolic axial profile with
/// peak `v_max` on the axis, plus solid-body swirl about the axis.
fn duct_flow(v_max: f64) -> impl Fn(&[f64], &mut [f64]) + Sync {
    const HALF: f64 = 5.0;
    const SWIRL: f64 = 0.2;
    move |p, v| {
        let (x, y) = (p[0] - HALF, p[1] - HALF);
        let xi = (x / HALF).clamp(-1.0, 1.0);
        let eta = (y / HALF).clamp(-1.0, 1.0);
        v[0] = -SWIRL * y;
        v[1] = SWIRL * x;
        v[2] = v_max * (1.0 - xi * xi) * (1.0 - eta * eta);
    }
}

pub fn densify(a: ScenarioArgs) -> anyhow::Result<()> {
    let m = a.trajectories.unwrap_or(100);
    let n_segments = a.steps.unwrap_or(50);
    let segment_dt = a.dt.unwrap_or(0.1);
    let r = a.ticks_r.unwrap_or(10);
    let workers = a.workers.unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(DEFAULT_SEED));
    let seeds: Vec<Vec<f64>> = (0..m)
        .map(|_| vec![rng.gen_range(1.0..9.0), rng.gen_range(1.0..9.0), 0.0])
        .collect();

    let set = trace_pathlines_with_workers(
        duct_flow(a.speed.unwrap_or(10.0)),
        &seeds,
        segment_dt,
        n_segments,
        workers,
    )?;
    let tangents = if a.raw_tangents {
        TangentMode::Raw
    } else {
        TangentMode::Scaled
    };
    let dense = Densifier { tangents, workers }.densify(&set, r)?;

    write_output(&a.out_dir(), "trajectories.csv", |w| {
        write_trajectories_csv(w, &dense)
    })?;
    println!(
        "{m} trajectories, {n_segments} segments of {segment_dt} s, r = {r}: {} points each",
        dense.n_points()
    );
    Ok(())
}

pub fn compare(a: ScenarioArgs) -> anyhow::Result<()> {
    let u0 = sine_profile(&a)?;
    let equation = a.equation_or(EquationKind::Burgers);
    let dt = time_step(&a, &equation, &u0)?;
    let default_steps = if a.paper_scale { 100_000 } else { 10_000 };
    let setup = ComparisonSetup {
        s: a.coarsen_s.unwrap_or(10),
        time: TimeSpec::new(dt, a.steps.unwrap_or(default_steps), a.cfl_c())?,
        equation,
        boundary: a.boundary(),
        constants: BoundConstants {
            a: a.bound_a.unwrap_or(8.0),
            b: a.bound_b.unwrap_or(2.0),
        },
        compare_every: a.store_every.unwrap_or(1),
        gate: CflGate::InitialData,
    };
    let report = run_comparison(&u0, &setup)?;

    let dir = a.out_dir();
    write_output(&dir, "report.json", |w| write_error_report_json(w, &report))?;
    write_output(&dir, "errors.csv", |w| write_node_errors_csv(w, &report))?;
    let bound = report.bound_corollary.unwrap_or(report.bound_theorem);
    println!(
        "lambda_v = {:.6}, N = {}, M0 = {:.6e}: max error {:.6e} at step {} vs bound {:.6e} (margin ratio {:.4}); peak step CFL {:.4}",
        report.params.lambda_v(),
        report.params.n_steps(),
        report.m0,
        report.max_error,
        report.worst_step,
        bound,
        report.margin_ratio,
        report.peak_cfl
    );
    if !report.within_bound() {
        return Err(Error::Verification(format!(
            "measured error {:e} exceeds the bound {bound:e}",
            report.max_error
        ))
        .into());
    }
    Ok(())
}

pub fn bench(a: ScenarioArgs) -> anyhow::Result<()> {
    let op = a.op.unwrap_or(BenchOp::All);
    let repetitions = a.reps.unwrap_or(5);
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let workers = a.workers.unwrap_or(1);
    let r = a.ticks_r.unwrap_or(10);
    let mut results = Vec::new();

    for (kind, wanted) in [
        (ProductKind::Gp, BenchOp::Gp),
        (ProductKind::Cr, BenchOp::Cr),
    ] {
        if op == wanted || op == BenchOp::All {
            results.push(bench_product(&ProductBench {
                kind,
                m: a.trajectories.unwrap_or(10_000),
                r,
                workers,
                repetitions,
                seed,
            })?);
        }
    }
    let mut race = None;
    if op == BenchOp::Race || op == BenchOp::All {
        let base = if a.paper_scale {
            RaceScenario::full_scale()
        } else {
            RaceScenario::desk()
        };
        let scenario = RaceScenario {
            m: a.trajectories.unwrap_or(base.m),
            r: a.ticks_r.unwrap_or(base.r),
            v_max: a.speed.unwrap_or(base.v_max),
            duration: a.duration.unwrap_or(base.duration),
            cfl_constant: a.cfl_c.unwrap_or(base.cfl_constant),
            workers,
            repetitions,
            seed,
            ..base
        };
        let res = race_two_methods(&scenario)?;
        results.push(res.fine.clone());
        results.push(res.coarse.clone());
        race = Some(res);
    }

    write_output(&a.out_dir(), "bench.csv", |w| {
        write_bench_header(&mut *w)?;
        results
            .iter()
            .try_for_each(|res| write_bench_rows(&mut *w, res))
    })?;
    for res in &results {
        println!(
            "{:<24} M = {:<6} workers = {} median {:.4e} s ({:.3} GFLOP/s est.)",
            res.op,
            res.m,
            res.workers,
            res.median_seconds(),
            res.gflops()
        );
    }
    if let Some(res) = race {
        println!(
            "race: fine / coarse time ratio {:.2}, {} points per trajectory, final position gap {:.3e}",
            res.ratio, res.points_per_trajectory, res.final_position_gap
        );
    }
    Ok(())
}

fn grid_summary(model: &CostModel) -> anyhow::Result<serde_json::Value> {
    let est = flops_estimate(model);
    Ok(json!({
        "model": model,
        "dt": model.dt(),
        "steps": est.steps,
        "cells": est.cells,
        "flops": est.flops,
        "bytes_per_snapshot": memory_estimate(model, FIELDS_PER_CELL, 1)?,
        "snapshots_for_1GB": snapshots_for_memory(model, FIELDS_PER_CELL, ONE_GB)?,
    }))
}

pub fn model(a: ScenarioArgs) -> anyhow::Result<()> {
    let reference = CostModel::reference_fine();
    let fine = CostModel::new(
        reference.domain_extents,
        a.grid_h.unwrap_or(reference.h),
        a.speed.unwrap_or(reference.v_max),
        a.duration.unwrap_or(reference.duration),
        a.cfl_c(),
        reference.flops_per_cell_update,
    )?;
    let s = a.coarsen_s.unwrap_or(10);
    if s == 0 {
        return Err(Error::Domain("coarsening factor must be at least 1".into()).into());
    }
    let coarse = CostModel {
        h: fine.h * s as f64,
        ..fine
    };

    let m = a.trajectories.unwrap_or(10_000) as u64;
    let n = a.steps.unwrap_or(1000) as u64;
    let r = a.ticks_r.unwrap_or(10) as u64;
    let dense = spline_flops_estimate(m, n, r, SplineMode::DenseCoefficients)?;
    let sparse = spline_flops_estimate(m, n, r, SplineMode::SparseCoefficients)?;
    let evaluation = spline_flops_estimate(m, n, r, SplineMode::Evaluation)?;
    let fine_flops = flops_estimate(&fine).flops;
    let coarse_flops = flops_estimate(&coarse).flops;

    let summary = json!({
        "fine": grid_summary(&fine)?,
        "coarse": grid_summary(&coarse)?,
        "coarsen_s": s,
        "grid_gain": fine_flops / coarse_flops,
        "spline": {
            "M": m,
            "N_segments": n,
            "r": r,
            "dense_coefficients": dense,
            "sparse_coefficients": sparse,
            "evaluation": evaluation,
            "dense_over_sparse": dense / sparse,
        },
    });
    write_output(&a.out_dir(), "model.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w)?;
        Ok(())
    })?;
    println!(
        "fine h = {}: {fine_flops:e} flops; coarse h = {}: {coarse_flops:e} flops; gain {:.0}",
        fine.h,
        coarse.h,
        fine_flops / coarse_flops
    );
    println!("splines M = {m}, N = {n}, r = {r}: dense {dense:e}, sparse {sparse:e}, evaluation {evaluation:e}");
    Ok(())
}
