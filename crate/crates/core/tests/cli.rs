use std::path::PathBuf;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magnetofisher"))
        .args(args)
        .env_remove("MAGNETOFISHER_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    dir.join(format!("{}-{name}", std::process::id()))
}

#[test]
fn sweep_writes_header_and_rows() {
    let o = bin(&["sweep-bz", "--grid", "list:0,1e5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# magnetofisher v"));
    assert!(lines[0].ends_with("mode=sweep-bz"));
    assert!(lines[1].starts_with("h_z[1/s],kappa1_x[1/s],"));
    assert!(lines[1].ends_with(",error"));
    assert_eq!(lines.len(), 4);
    let width = lines[1].split(',').count();
    assert!(lines[2..].iter().all(|l| l.split(',').count() == width && l.ends_with(',')));
}

#[test]
fn columns_select_a_subset() {
    let o = bin(&["sweep-bz", "--grid", "list:0", "--columns", "qfi,snr"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().nth(1), Some("h_z[1/s],qfi[s^2],snr[s^2],error"));
}

#[test]
fn out_file_matches_stdout() {
    let path = scratch("sweep.csv");
    let o = bin(&["sweep-bz", "--grid", "lin:-1e6:1e6:5", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(written, stdout(&bin(&["sweep-bz", "--grid", "lin:-1e6:1e6:5"])));
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let args = ["sweep-pump", "--grid", "log:1e3:1e7:6", "--model", "collective-mf"];
    let one = Command::new(env!("CARGO_BIN_EXE_magnetofisher")).args(args).env("MAGNETOFISHER_THREADS", "1").output().unwrap();
    let many = Command::new(env!("CARGO_BIN_EXE_magnetofisher")).args(args).env("MAGNETOFISHER_THREADS", "4").output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn config_errors_exit_two() {
    let cases: [&[&str]; 4] = [
        &["bogus"],
        &["sweep-kappa", "--model", "semiclassical-2lvl", "--grid", "list:1"],
        &["sweep-bz", "--grid", "list:0", "--columns", "nope"],
        &["sweep-bz", "--grid", "lin:0:1"],
    ];
    for args in cases {
        let o = bin(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty());
        assert!(stderr(&o).starts_with("magnetofisher: "));
    }
}

#[test]
fn unknown_config_key_exits_two() {
    let path = scratch("bad.conf");
    std::fs::write(&path, "h_x = 1\nwat = 3\n").unwrap();
    let o = bin(&["sweep-bz", "--config", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("wat"));
}

#[test]
fn bad_thread_count_exits_two() {
    let o = Command::new(env!("CARGO_BIN_EXE_magnetofisher"))
        .args(["sweep-bz", "--grid", "list:0"])
        .env("MAGNETOFISHER_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_rows_are_kept_and_exit_one() {
    let o = bin(&["sweep-n", "--model", "semiclassical-2lvl", "--grid", "list:1e8,1e20"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ends_with(','));
    assert!(rows[1].contains("overflow guard"));
    assert!(rows[1].contains(",,"));
    assert!(stderr(&o).contains("1 row(s) failed"));
}
