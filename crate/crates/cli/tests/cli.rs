use std::io::Write;
use std::process::{Command, Output};

fn cimmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cimmap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn table_shows_cnn8_totals() {
    let o = cimmap(&["--network", "cnn8", "--mapper", "vw-sdk,tetris", "--oracle"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let total = out.lines().find(|l| l.starts_with("total cycles")).unwrap();
    assert!(total.contains("128") && total.contains("116"), "{total}");
    assert!(out.contains("5x6x17x32, 6x6x14x32 (-1 ch)"));
}

#[test]
fn csv_output_has_fixed_header_and_records() {
    let o = cimmap(&["--network", "cnn8", "--format", "csv", "--grid-search", "--macros", "4"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "record,layer,ifm,kernel,mapper,groups,windows,cycles,utilization,pruned,rows,cols,active,bits,macros,baseline,ratio"
    );
    for kind in ["array,", "layer,", "total,", "speedup,", "grid,", "edap,"] {
        assert!(out.lines().any(|l| l.starts_with(kind)), "no {kind} record");
    }
    let parsed = cimmap::report::parse_csv_report(&out).unwrap();
    assert_eq!(parsed.layers.len(), 6);
}

#[test]
fn json_output_parses() {
    let o = cimmap(&["--network", "inception", "--format", "json"]);
    assert!(o.status.success());
    let r: cimmap::report::CostReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.total(cimmap::Mapper::VwSdk), Some(676));
}

#[test]
fn reads_network_file() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "# small\nname,I_h,I_w,K,IC,OC\na,8,8,3,4,4\nb,6,6,3,8,8,2").unwrap();
    let o = cimmap(&["--network", f.path().to_str().unwrap(), "--array", "64x64", "--oracle"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("a ")) && out.lines().any(|l| l.starts_with("b ")));
}

#[test]
fn bad_input_is_an_error() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "a,8,8,9,4,4").unwrap();
    let o = cimmap(&["--network", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kernel exceeds IFM"));

    let o = cimmap(&["--network", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    let o = cimmap(&["--network", "cnn8", "--mapper", "magic"]);
    assert!(!o.status.success());
}

#[test]
fn group_sweep_uses_accuracy_table() {
    let mut t = tempfile::NamedTempFile::new().unwrap();
    writeln!(t, "layer,G,delta\n3,2,-0.2\n3,4,-0.9").unwrap();
    let o = cimmap(&[
        "--network",
        "cnn8",
        "--mapper",
        "tetrisg",
        "--group",
        "sweep",
        "--accuracy-table",
        t.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: cimmap::report::CostReport = serde_json::from_str(&stdout(&o)).unwrap();
    let groups: Vec<u32> = r.layers.iter().map(|l| l.cells[0].groups).collect();
    // Only layer 3 has admissible entries; the rest fall back to G=1.
    assert_eq!(groups, vec![1, 2, 1, 1, 1, 1]);
}
