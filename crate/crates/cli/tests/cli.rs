use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn twqe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twqe")).args(args).output().expect("spawn twqe")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_without_timing(text: &str) -> serde_json::Value {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(m) => {
                m.remove("elapsed_ms");
                m.values_mut().for_each(strip);
            }
            serde_json::Value::Array(a) => a.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut v: serde_json::Value = serde_json::from_str(text).expect("valid JSON");
    strip(&mut v);
    v
}

#[test]
fn validate_reference_decomposition() {
    let o = twqe(&["validate", "--td", data("running_example.td").to_str().unwrap(), "--gr", data("running_example.gr").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("Ok (width 2, 6 bags)"));
}

#[test]
fn validate_reports_violation() {
    let dir = tempfile::tempdir().unwrap();
    let td = dir.path().join("bad.td");
    // misses edge 1-2 of the graph
    std::fs::write(&td, "s td 2 2 3\nb 1 1 3\nb 2 2 3\n1 2\n").unwrap();
    let gr = dir.path().join("g.gr");
    std::fs::write(&gr, "p tw 3 2\n1 2\n2 3\n").unwrap();
    let o = twqe(&["validate", "--td", td.to_str().unwrap(), "--gr", gr.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn parse_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.qf");
    std::fs::write(&f, "exists x\nx + <= 1\n").unwrap();
    let o = twqe(&["fme", f.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("2:"));
}

#[test]
fn usage_errors_exit_4() {
    let f = data("running_example.qf");
    assert_eq!(code(&twqe(&["fme", f.to_str().unwrap(), "--strategy", "nope"])), 4);
    assert_eq!(code(&twqe(&["bogus"])), 4);
    assert_eq!(code(&twqe(&["fme", "/nonexistent/file.qf"])), 4);
}

#[test]
fn nonlinear_input_to_fme_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("nl.qf");
    std::fs::write(&f, "exists x\nx^2 < 1\n").unwrap();
    assert_eq!(code(&twqe(&["fme", f.to_str().unwrap()])), 3);
}

fn fme_stats(strategy: &str) -> serde_json::Value {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("s.json");
    let f = data("running_example.qf");
    let o = twqe(&["fme", f.to_str().unwrap(), "--strategy", strategy, "--raw-count", "--stats", stats.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("# quantifier-free result"));
    serde_json::from_str(&std::fs::read_to_string(stats).unwrap()).unwrap()
}

#[test]
fn running_example_td_beats_greedy() {
    let greedy = fme_stats("greedy");
    let td = fme_stats("td");
    assert_eq!(greedy["order"], serde_json::json!(["x1", "x4", "x3", "x2", "x5"]));
    assert_eq!(greedy["final_count"], 3684);
    assert_eq!(greedy["counting"], "raw");
    assert!(td["final_count"].as_u64().unwrap() < greedy["final_count"].as_u64().unwrap());
    assert_eq!(td["verdict"], "false");
}

#[test]
fn explicit_order_reproduces_reference_count() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("s.json");
    let f = data("running_example.qf");
    let o = twqe(&[
        "fme",
        f.to_str().unwrap(),
        "--order",
        "x1,x3,x4,x5,x2",
        "--raw-count",
        "--stats",
        stats.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(stats).unwrap()).unwrap();
    assert_eq!(s["final_count"], 1680);
}

#[test]
fn td_output_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let f = data("running_example.qf");
    let o = twqe(&["td", f.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("c width 2"));
    let td = dir.path().join("x.td");
    std::fs::write(&td, stdout(&o)).unwrap();
    let g = twqe(&["graph", f.to_str().unwrap()]);
    assert_eq!(code(&g), 0);
    let gr = dir.path().join("x.gr");
    std::fs::write(&gr, stdout(&g)).unwrap();
    let v = twqe(&["validate", "--td", td.to_str().unwrap(), "--gr", gr.to_str().unwrap()]);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stdout));
}

#[test]
fn gen_writes_formula_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("inst.qf");
    let o = twqe(&["gen", "--k", "2", "--vars", "12", "--elim", "6", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("exists"));
    let sidecar = dir.path().join("inst.qf.json");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar).unwrap()).unwrap();
    assert!(meta.is_object());

    // same seed, same instance
    let again = dir.path().join("again.qf");
    twqe(&["gen", "--k", "2", "--vars", "12", "--elim", "6", "--seed", "7", "--out", again.to_str().unwrap()]);
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());

    let f = twqe(&["fme", out.to_str().unwrap()]);
    assert_eq!(code(&f), 0);
}

#[test]
fn compare_json_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("a.qf");
    twqe(&["gen", "--vars", "10", "--elim", "5", "--seed", "3", "--out", inst.to_str().unwrap()]);
    let run = |name: &str| {
        let j = dir.path().join(name);
        let o = twqe(&["compare", inst.to_str().unwrap(), "--json", j.to_str().unwrap(), "--seed", "11"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        json_without_timing(&std::fs::read_to_string(j).unwrap())
    };
    assert_eq!(run("1.json"), run("2.json"));
}

#[test]
fn project_reports_degree() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("nl.qf");
    std::fs::write(&f, "exists x y\nx^2 + y^2 < 1\nx*y > z\n").unwrap();
    let stats = dir.path().join("s.json");
    let o = twqe(&["project", f.to_str().unwrap(), "--stats", stats.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("projection polynomials"));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(stats).unwrap()).unwrap();
    assert_eq!(s["mode"], "cad");
    assert!(s["max_combined_degree"].as_u64().unwrap() >= 2);
}

#[test]
fn order_prints_json() {
    let f = data("running_example.qf");
    let o = twqe(&["order", f.to_str().unwrap(), "--strategy", "td"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["order"].as_array().unwrap().len(), 5);
}
