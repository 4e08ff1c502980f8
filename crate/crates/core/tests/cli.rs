use std::process::{Command, Output};

fn dualpress(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualpress"))
        .args(args)
        .env_remove("DUALPRESS_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn beam_table_shape_and_rates() {
    let o = dualpress(&["beam", "--levels", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let t = rows(&stdout(&o));
    assert_eq!(t.len(), 5);
    assert_eq!(
        t[0].join(","),
        "level,n_elems,h,err_u_L2,err_u_H1,err_p_L2,rate_u_L2,rate_u_H1,rate_p_L2"
    );
    assert!(t[1][6].is_empty());
    let final_h1: f64 = t[4][7].parse().unwrap();
    assert!((0.9..=1.1).contains(&final_h1), "{final_h1}");
    // twelve significant digits
    assert_eq!(t[2][3].split('e').next().unwrap().len(), 13);
}

#[test]
fn beam_both_modes_doubles_the_columns() {
    let o = dualpress(&["beam", "--levels", "2", "--nu", "0.3", "--mode", "both"]);
    assert_eq!(o.status.code(), Some(0));
    let t = rows(&stdout(&o));
    assert_eq!(t[0].len(), 15);
    assert!(t[0].contains(&"err_u_H1_mixed".to_string()));
    assert!(t[0].contains(&"err_u_H1_standard".to_string()));
    assert!(t.iter().all(|r| r.len() == 15));
}

#[test]
fn cook_table_shows_locking() {
    let o = dualpress(&["cook", "--levels", "5", "--mode", "both"]);
    assert_eq!(o.status.code(), Some(0));
    let t = rows(&stdout(&o));
    assert_eq!(t[0].join(","), "level,n,n_elems,h,tip_mixed,tip_standard");
    assert_eq!(t.len(), 6);
    let mixed: Vec<f64> = t[1..].iter().map(|r| r[4].parse().unwrap()).collect();
    let standard: Vec<f64> = t[1..].iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(mixed.windows(2).all(|w| w[1] > w[0]));
    assert!(standard[0] < 0.5 * mixed[4]);
    let ns: Vec<&str> = t[1..].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(ns, ["2", "4", "8", "16", "32"]);
}

#[test]
fn cook_midedge_tip_differs_from_corner() {
    let a = rows(&stdout(&dualpress(&["cook", "--levels", "2"])));
    let b = rows(&stdout(&dualpress(&["cook", "--levels", "2", "--tip", "midedge"])));
    assert_ne!(a[2][4], b[2][4]);
}

#[test]
fn patch_2d_passes_and_reports_counts() {
    let o = dualpress(&["patch", "--dim", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    for line in ["gradient_rank=8", "gradient_kernel=1", "plain_rank=7", "plain_kernel=2", "pressures=9"] {
        assert!(s.lines().any(|l| l == line), "missing {line}");
    }
}

#[test]
fn patch_3d_exit_code_tracks_the_kernel_assertion() {
    let o = dualpress(&["patch", "--dim", "3"]);
    let s = stdout(&o);
    assert!(s.contains("gradient_rank="));
    let kernel: usize = s
        .lines()
        .find_map(|l| l.strip_prefix("gradient_kernel="))
        .unwrap()
        .parse()
        .unwrap();
    let expected = if kernel == 1 { 0 } else { 1 };
    assert_eq!(o.status.code(), Some(expected));
}

#[test]
fn infsup_reports_each_level() {
    let o = dualpress(&["infsup", "--levels", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let t = rows(&stdout(&o));
    assert_eq!(t[0].join(","), "level,h,beta_h");
    assert_eq!(t.len(), 4);
    for r in &t[1..] {
        let b: f64 = r[2].parse().unwrap();
        assert!(b > 0.0 && b <= 2f64.sqrt());
    }
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["beam", "--nu", "0.7"][..],
        &["beam", "--levels", "1"],
        &["beam", "--mode", "fancy"],
        &["cook", "--tip", "nowhere"],
        &["patch", "--dim", "4"],
        &["beam", "--bogus"],
        &[],
    ] {
        let o = dualpress(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = dualpress(&["beam", "--E", "-3"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--E"));
}

#[test]
fn thread_cap_is_validated_and_does_not_change_output() {
    let bin = env!("CARGO_BIN_EXE_dualpress");
    let bad = Command::new(bin)
        .args(["beam", "--levels", "2"])
        .env("DUALPRESS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let one = Command::new(bin)
        .args(["beam", "--levels", "3"])
        .env("DUALPRESS_THREADS", "1")
        .output()
        .unwrap();
    let many = dualpress(&["beam", "--levels", "3"]);
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn files_are_written() {
    let dir = std::env::temp_dir().join(format!("dualpress-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("beam.csv");
    let svg = dir.join("beam.svg");
    let vtk = dir.join("beam.vtk");
    let o = dualpress(&[
        "beam",
        "--levels",
        "2",
        "--out",
        csv.to_str().unwrap(),
        "--plot",
        svg.to_str().unwrap(),
        "--vtk",
        vtk.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
    let plot = std::fs::read_to_string(&svg).unwrap();
    assert!(plot.starts_with("<svg") && plot.contains("<polyline"));
    let mesh = std::fs::read_to_string(&vtk).unwrap();
    assert!(mesh.contains("POINTS 45 double"));
    assert!(mesh.contains("VECTORS displacement") && mesh.contains("SCALARS pressure"));
    std::fs::remove_dir_all(&dir).unwrap();
}
