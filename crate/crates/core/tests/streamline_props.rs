use coarseflow::streamline::unpack_segment;
use coarseflow::{
    densify, eulerian_snapshot, evaluation_matrix, hermite_coefficients, pack_segment,
    trace_pathlines, Densifier, Error, SegmentData, StreamlineSet, TangentMode,
};
use proptest::prelude::*;

/// Random trajectories: `m` lines of `s` points in `dims` dimensions.
fn random_set() -> impl Strategy<Value = StreamlineSet> {
    (1usize..6, 2usize..7, 1usize..=3, 0.01..2.0f64).prop_flat_map(|(m, s, dims, dt)| {
        let len = m * s * dims;
        (
            prop::collection::vec(-50.0..50.0f64, len),
            prop::collection::vec(-20.0..20.0f64, len),
        )
            .prop_map(move |(pos, vel)| StreamlineSet::new(m, s, dims, pos, vel, dt).unwrap())
    })
}

fn cubic_for(
    set: &StreamlineSet,
    i: usize,
    k: usize,
    comp: usize,
    mode: TangentMode,
) -> SegmentData {
    let p = pack_segment(set, k, comp, mode).unwrap();
    SegmentData::new(p[4 * i], p[4 * i + 1], p[4 * i + 2], p[4 * i + 3])
}

fn rotation(p: &[f64], v: &mut [f64]) {
    v[0] = -p[1];
    v[1] = p[0];
}

proptest! {
    #[test]
    fn dense_counts(set in random_set(), r in 1usize..9) {
        let dense = densify(&set, r).unwrap();
        prop_assert_eq!(dense.n_points(), set.n_segments() * r + 1);
        prop_assert_eq!(dense.t_param().len(), dense.n_points());
        prop_assert_eq!(dense.m_trajectories(), set.m_trajectories());
        for (q, t) in dense.t_param().iter().enumerate() {
            prop_assert!((t - q as f64 / r as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_path_interpolates_original_points(set in random_set(), r in 1usize..9) {
        let dense = densify(&set, r).unwrap();
        for i in 0..set.m_trajectories() {
            for k in 0..set.s_points() {
                let q = k * r;
                for d in 0..set.dims() {
                    let orig = set.position(i, k)[d];
                    let got = dense.position(i, q)[d];
                    prop_assert!((got - orig).abs() <= 1e-12 * (1.0 + orig.abs()));
                    let v = set.velocity(i, k)[d];
                    let dv = dense.velocity(i, q)[d];
                    prop_assert!((dv - v).abs() <= 1e-10 * (1.0 + v.abs()));
                }
            }
        }
    }

    #[test]
    fn joints_are_c1(set in random_set(), raw in any::<bool>()) {
        let mode = if raw { TangentMode::Raw } else { TangentMode::Scaled };
        for i in 0..set.m_trajectories() {
            for comp in 0..set.dims() {
                for k in 1..set.n_segments() {
                    let left = hermite_coefficients(cubic_for(&set, i, k - 1, comp, mode));
                    let right = hermite_coefficients(cubic_for(&set, i, k, comp, mode));
                    let scale = 1.0 + left.eval(1.0).abs();
                    prop_assert!((left.eval(1.0) - right.eval(0.0)).abs() <= 1e-10 * scale);
                    let dscale = 1.0 + left.derivative(1.0).abs();
                    prop_assert!((left.derivative(1.0) - right.derivative(0.0)).abs() <= 1e-10 * dscale);
                }
            }
        }
    }

    #[test]
    fn pack_unpack_round_trip(set in random_set(), raw in any::<bool>()) {
        let mode = if raw { TangentMode::Raw } else { TangentMode::Scaled };
        for k in 0..set.n_segments() {
            for comp in 0..set.dims() {
                let p = pack_segment(&set, k, comp, mode).unwrap();
                let back = unpack_segment(&p, set.segment_dt(), mode).unwrap();
                for (i, e) in back.iter().enumerate() {
                    prop_assert_eq!(e.start, set.position(i, k)[comp]);
                    prop_assert_eq!(e.end, set.position(i, k + 1)[comp]);
                    let v = set.velocity(i, k)[comp];
                    prop_assert!((e.v_start - v).abs() <= 1e-14 * (1.0 + v.abs()));
                    let v = set.velocity(i, k + 1)[comp];
                    prop_assert!((e.v_end - v).abs() <= 1e-14 * (1.0 + v.abs()));
                }
            }
        }
    }

    #[test]
    fn components_are_independent(set in random_set(), r in 1usize..6, bump in -100.0..100.0f64) {
        prop_assume!(set.dims() >= 2);
        let dims = set.dims();
        let (m, s) = (set.m_trajectories(), set.s_points());
        let mut pos = Vec::new();
        let mut vel = Vec::new();
        for i in 0..m {
            for k in 0..s {
                let p = set.position(i, k);
                let v = set.velocity(i, k);
                for d in 0..dims {
                    pos.push(if d == 0 { p[d] + bump } else { p[d] });
                    vel.push(if d == 0 { v[d] * 2.0 } else { v[d] });
                }
            }
        }
        let edited = StreamlineSet::new(m, s, dims, pos, vel, set.segment_dt()).unwrap();
        let a = densify(&set, r).unwrap();
        let b = densify(&edited, r).unwrap();
        for i in 0..m {
            for q in 0..a.n_points() {
                for d in 1..dims {
                    prop_assert_eq!(a.position(i, q)[d].to_bits(), b.position(i, q)[d].to_bits());
                }
            }
        }
    }

    #[test]
    fn snapshot_is_a_column_of_the_dense_set(set in random_set(), r in 1usize..8, j in 0usize..8) {
        let j = j % r;
        let grid = evaluation_matrix(r).unwrap();
        let dense = densify(&set, r).unwrap();
        for k in 0..set.n_segments() {
            let snap = eulerian_snapshot(&set, k, j as f64 / r as f64, &grid, TangentMode::Scaled).unwrap();
            for i in 0..set.m_trajectories() {
                prop_assert_eq!(snap.position(i), dense.position(i, k * r + j));
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_output(set in random_set(), r in 1usize..8) {
        let m = set.m_trajectories();
        let serial = densify(&set, r).unwrap();
        let par = Densifier { workers: m, ..Densifier::default() }.densify(&set, r).unwrap();
        prop_assert_eq!(serial, par);
    }
}

#[test]
fn euler_on_solid_rotation_drifts_outward() {
    let seeds = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
    let dt = 0.05;
    let set = trace_pathlines(rotation, &seeds, dt, 200).unwrap();
    for (i, seed) in seeds.iter().enumerate() {
        let r0 = seed.iter().map(|x| x * x).sum::<f64>();
        let mut prev = r0;
        for k in 1..set.s_points() {
            let p = set.position(i, k);
            let rr = p[0] * p[0] + p[1] * p[1];
            // |P + dt v|^2 = |P|^2 (1 + dt^2) for a rotation.
            assert!((rr - prev * (1.0 + dt * dt)).abs() <= 1e-9 * rr);
            assert!(rr > prev);
            prev = rr;
        }
    }
}

#[test]
fn uniform_flow_densifies_to_straight_lines() {
    let seeds = vec![vec![0.0, 1.0, -1.0]];
    let set = trace_pathlines(|_, v| v.copy_from_slice(&[1.0, -2.0, 0.5]), &seeds, 0.1, 4).unwrap();
    let dense = densify(&set, 5).unwrap();
    for q in 0..dense.n_points() {
        let t = 0.1 * dense.t_param()[q];
        let p = dense.position(0, q);
        let expected = [t, 1.0 - 2.0 * t, -1.0 + 0.5 * t];
        for d in 0..3 {
            assert!((p[d] - expected[d]).abs() < 1e-12);
        }
        assert!((dense.velocity(0, q)[1] + 2.0).abs() < 1e-12);
    }
}

#[test]
fn non_finite_velocity_is_reported_with_location() {
    let seeds = vec![vec![0.0], vec![1.0]];
    let err = trace_pathlines(
        |p, v| v[0] = if p[0] > 1.25 { f64::NAN } else { 1.0 },
        &seeds,
        0.1,
        10,
    )
    .unwrap_err();
    assert!(
        matches!(
            err,
            Error::Trace {
                trajectory: 1,
                segment: 3
            }
        ),
        "{err:?}"
    );
    assert!(err.is_blow_up());
}

#[test]
fn off_grid_snapshot_is_rejected() {
    let set = StreamlineSet::new(1, 2, 1, vec![0.0, 1.0], vec![1.0, 1.0], 1.0).unwrap();
    let grid = evaluation_matrix(4).unwrap();
    assert!(eulerian_snapshot(&set, 0, 0.3, &grid, TangentMode::Scaled).is_err());
    assert!(eulerian_snapshot(&set, 0, 0.25, &grid, TangentMode::Scaled).is_ok());
    assert!(eulerian_snapshot(&set, 1, 0.25, &grid, TangentMode::Scaled).is_err());
}
