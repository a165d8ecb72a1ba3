use std::fs::File;
use std::io::{BufRead, BufReader};

use coarseflow::io::{write_trajectories_csv, TRAJECTORY_HEADER};
use coarseflow::{densify, StreamlineSet};

#[test]
fn trajectories_round_trip_through_a_file() {
    let set = StreamlineSet::new(
        2,
        3,
        2,
        vec![0.0, 0.0, 1.0, 0.5, 2.0, 1.5, 1.0, 1.0, 0.0, 2.0, -1.0, 3.0],
        vec![
            1.0, 0.5, 1.0, 1.0, 1.0, 0.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0,
        ],
        1.0,
    )
    .unwrap();
    let dense = densify(&set, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trajectories.csv");
    write_trajectories_csv(File::create(&path).unwrap(), &dense).unwrap();

    let lines: Vec<String> = BufReader::new(File::open(&path).unwrap())
        .lines()
        .map(Result::unwrap)
        .collect();
    assert_eq!(lines[0], TRAJECTORY_HEADER);
    assert_eq!(lines.len(), 1 + 2 * dense.n_points());
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 9);
        let traj: usize = cols[0].parse().unwrap();
        let point: usize = cols[1].parse().unwrap();
        let x: f64 = cols[3].parse().unwrap();
        let z: f64 = cols[5].parse().unwrap();
        assert_eq!(x, dense.position(traj, point)[0]);
        assert_eq!(z, 0.0);
    }
}
