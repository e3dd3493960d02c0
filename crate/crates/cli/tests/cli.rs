use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "gt,theta,Pe,Re_Ceg,Im_Ceg,E_Q,E_C,S_Q,S_C,S_QC,I_QC,p_eff_Q,nbar_eff_C,Eth_Q,Eth_C,Q_C,W_C,Q_Q,W_Q,sigma_Q,demon_lhs,demon_rhs,Re_mean_a,Im_mean_a,abs_cross_trace,branch_overlap";

fn jcdemon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jcdemon")).args(args).output().expect("spawn jcdemon")
}

fn small_run(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec!["run", "--scenario", "custom", "--n0", "9", "--steps", "7", "--gt-max", "4", "--out", out];
    args.extend_from_slice(extra);
    jcdemon(&args)
}

#[test]
fn csv_header_and_number_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let o = small_run(&path, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), 8);
    for row in &lines[1..] {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 26);
        for c in cells {
            let mantissa = c.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{c}");
            c.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(small_run(&a, &["--init", "0.2,-0.4,0.5"]).status.success());
    assert!(small_run(&b, &["--init", "0.2,-0.4,0.5"]).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out.csv");
    fs::write(&cfg, format!("# small demo\nscenario = fig4\nn0 = 4\nsteps = 3\ngt_max = 1.0\nout = {}\n", out.display())).unwrap();
    let o = jcdemon(&["run", "--config", cfg.to_str().unwrap(), "--steps", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 6);
    // fig4 starts maximally mixed
    let first: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((first[7] - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn configuration_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = out.to_str().unwrap();
    for args in [
        vec!["run", "--scenario", "fig9", "--out", out],
        vec!["run", "--scenario", "custom", "--steps", "1", "--out", out],
        vec!["run", "--scenario", "custom", "--init", "1,1,0", "--out", out],
        vec!["run", "--scenario", "custom", "--method", "sparse", "--out", out],
        vec!["run", "--scenario", "custom", "--n0", "-4", "--out", out],
        vec!["run", "--scenario", "custom", "--config", "/nonexistent/file.cfg", "--out", out],
        vec!["run", "--scenario", "custom"],
        vec!["run", "--frobnicate"],
        vec!["compare", "--out", out],
    ] {
        let o = jcdemon(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!Path::new(out).exists());
}

#[test]
fn undersized_truncation_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = jcdemon(&["run", "--n0", "100", "--nph", "40", "--steps", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn compare_writes_scaling_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp.csv");
    let o = jcdemon(&["compare", "--n0-list", "16,64", "--steps", "31", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n0,column,max_abs_dev,ratio_vs_prev");
    let pe: Vec<&str> = lines.filter(|l| l.split(',').nth(1) == Some("Pe")).collect();
    assert_eq!(pe.len(), 2);
    assert!(pe[0].ends_with(",NaN"));
    let ratio: f64 = pe[1].split(',').nth(3).unwrap().parse().unwrap();
    assert!(ratio >= 8.0, "{ratio}");
}
