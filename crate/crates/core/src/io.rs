//! CSV and JSON writers for solutions, trajectories, reports and benchmarks.
//!
//! Floating-point columns use 17 significant digits, which round-trips every
//! `f64`.

use std::io::Write;

use crate::bounds::ErrorReport;
use crate::error::Result;
use crate::lf::SolutionHistory;
use crate::perf::BenchResult;
use crate::streamline::DenseTrajectorySet;

pub const SOLUTION_HEADER: &str = "step,node,x,value";
pub const TRAJECTORY_HEADER: &str = "traj,point,t_param,x,y,z,vx,vy,vz";
pub const NODE_ERROR_HEADER: &str = "node,x,u,v,abs_error";
pub const BENCH_HEADER: &str = "op,M,N_segments,r,workers,rep,wall_seconds,flops_est,workset_bytes";

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_solution_csv<W: Write>(mut out: W, history: &SolutionHistory) -> Result<()> {
    writeln!(out, "{SOLUTION_HEADER}")?;
    for (field, step) in history.fields().iter().zip(history.steps()) {
        let grid = field.grid();
        for (j, v) in field.values().iter().enumerate() {
            writeln!(out, "{step},{j},{},{}", fmt_f64(grid.x(j)), fmt_f64(*v))?;
        }
    }
    Ok(())
}

/// Dense trajectories; components beyond the set's dimension are written as 0.
pub fn write_trajectories_csv<W: Write>(mut out: W, dense: &DenseTrajectorySet) -> Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    let dims = dense.dims();
    for traj in 0..dense.m_trajectories() {
        for (point, t) in dense.t_param().iter().enumerate() {
            let mut pos = [0.0; 3];
            let mut vel = [0.0; 3];
            pos[..dims].copy_from_slice(dense.position(traj, point));
            vel[..dims].copy_from_slice(dense.velocity(traj, point));
            write!(out, "{traj},{point},{}", fmt_f64(*t))?;
            for v in pos.iter().chain(&vel) {
                write!(out, ",{}", fmt_f64(*v))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn write_error_report_json<W: Write>(mut out: W, report: &ErrorReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &report.summary())?;
    writeln!(out)?;
    Ok(())
}

pub fn write_node_errors_csv<W: Write>(mut out: W, report: &ErrorReport) -> Result<()> {
    writeln!(out, "{NODE_ERROR_HEADER}")?;
    for e in &report.error_profile {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.node,
            fmt_f64(e.x),
            fmt_f64(e.u),
            fmt_f64(e.v),
            fmt_f64(e.abs_error)
        )?;
    }
    Ok(())
}

pub fn write_bench_header<W: Write>(mut out: W) -> Result<()> {
    writeln!(out, "{BENCH_HEADER}")?;
    Ok(())
}

/// One row per timed repetition.
pub fn write_bench_rows<W: Write>(mut out: W, result: &BenchResult) -> Result<()> {
    for (rep, secs) in result.wall_seconds.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{rep},{},{},{}",
            result.op,
            result.m,
            result.n_segments,
            result.r,
            result.workers,
            fmt_f64(*secs),
            fmt_f64(result.flops_est),
            result.workset_bytes
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lf::{run, Boundary, Equation, GridSpec1D, ScalarField1D, TimeSpec};

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn solution_csv_layout() {
        let g = GridSpec1D::spanning(0.0, 1.0, 4).unwrap();
        let u = ScalarField1D::from_fn(g, |x| x).unwrap();
        let ts = TimeSpec::new(0.1, 2, 1.0).unwrap();
        let h = run(
            &u,
            ts,
            Equation::Advection { speed: 1.0 },
            Boundary::Dirichlet,
            2,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_solution_csv(&mut buf, &h).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SOLUTION_HEADER);
        assert_eq!(lines.len(), 1 + 2 * 5);
        assert!(lines[6].starts_with("2,0,"));
    }
}
