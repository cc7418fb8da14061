use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn msrpa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msrpa"))
        .args(args)
        .current_dir(dir)
        .env_remove("MSRPA_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn strict_run_succeeds_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = msrpa(dir.path(), &["run", "sim1", "--strict"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let trace = fs::read_to_string(dir.path().join("msrpa-out/sim1/trace.csv")).unwrap();
    assert!(trace.starts_with("t,agent_id,role,behavior,x,u,in_c,accepted_value\n"));
    assert_eq!(trace.lines().count(), 1 + 401 * 14);
    for f in ["messages.csv", "metrics.csv"] {
        assert!(dir.path().join("msrpa-out/sim1").join(f).is_file());
    }
}

#[test]
fn strict_run_rejects_low_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = msrpa(dir.path(), &["run", "sim1", "--eta", "9", "--strict"]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.contains("[FAIL] eta > |S_f|"), "{text}");
    assert!(!dir.path().join("msrpa-out").exists());
}

#[test]
fn non_strict_run_proceeds_despite_failed_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let o = msrpa(dir.path(), &["run", "neg_cluster", "--check-theorems"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("[FAIL] misbehaving set is F-local"), "{text}");
    assert!(text.contains("unbounded tracking: FAIL"), "{text}");
}

#[test]
fn bounded_theorem_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = msrpa(
        dir.path(),
        &["run", "sim2", "--check-theorems", "--out", "res"],
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let line = |prefix: &str| {
        text.lines()
            .find(|l| l.starts_with(prefix))
            .unwrap_or_else(|| panic!("missing {prefix:?} in\n{text}"))
            .to_string()
    };
    let t_line = line("T = ");
    let periods: i64 = t_line[4..]
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    let conv: i64 = line("observed convergence time ")
        .rsplit(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(conv <= periods * 10, "{text}");
    assert!(text.contains("bounded tracking: pass"), "{text}");
    assert!(dir.path().join("res/sim2/metrics.csv").is_file());
}

#[test]
fn env_var_sets_default_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_msrpa"))
        .args(["run", "sim1", "--horizon", "20"])
        .current_dir(dir.path())
        .env("MSRPA_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("from-env/sim1/trace.csv").is_file());
}

#[test]
fn parallel_jobs_match_sequential_output() {
    let dir = tempfile::tempdir().unwrap();
    let names = ["sim1", "sim2", "neg_eta", "neg_cluster"];
    let mut seq = vec!["run", "--out", "seq"];
    seq.extend(names);
    let mut par = vec!["run", "--out", "par", "--jobs", "4"];
    par.extend(names);
    let a = msrpa(dir.path(), &seq);
    let b = msrpa(dir.path(), &par);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(
        stdout(&a).replace("seq/", ""),
        stdout(&b).replace("par/", "")
    );
    for name in names {
        for f in ["trace.csv", "messages.csv", "metrics.csv"] {
            let x = fs::read(dir.path().join("seq").join(name).join(f)).unwrap();
            let y = fs::read(dir.path().join("par").join(name).join(f)).unwrap();
            assert!(x == y, "{name}/{f} differs");
        }
    }
}

#[test]
fn duplicate_scenarios_get_private_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = msrpa(
        dir.path(),
        &[
            "run",
            "sim1",
            "sim1",
            "--seed",
            "3",
            "--horizon",
            "30",
            "--jobs",
            "2",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("msrpa-out/sim1/trace.csv").is_file());
    assert!(dir.path().join("msrpa-out/sim1-2/trace.csv").is_file());
}

#[test]
fn validate_command_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        msrpa(dir.path(), &["validate", "sim1", "sim2"])
            .status
            .code(),
        Some(0)
    );
    let o = msrpa(dir.path(), &["validate", "neg_eta"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("[FAIL] eta > |S_f|"));
}

#[test]
fn missing_or_malformed_scenarios_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = msrpa(dir.path(), &["run", "no-such-scenario"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("no-such-scenario"));

    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios/sim1.toml"),
    )
    .unwrap()
    .replace("horizon = 400", "horizon = 400\ncolour = \"red\"");
    fs::write(&bad, text).unwrap();
    let o = msrpa(dir.path(), &["run", "bad.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("colour"), "{}", stdout(&o));

    assert_eq!(msrpa(dir.path(), &["run"]).status.code(), Some(1));
    assert_eq!(msrpa(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn edge_list_scenario_resolves_relative_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let sim1 = fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios/sim1.toml"),
    )
    .unwrap();
    let mut edges = String::new();
    for i in 0..14usize {
        for d in 1..=5 {
            edges.push_str(&format!("{} {i}\n", (i + 14 - d) % 14));
            edges.push_str(&format!("{} {i}\n", (i + d) % 14));
        }
    }
    fs::create_dir(dir.path().join("nets")).unwrap();
    fs::write(dir.path().join("nets/c14.txt"), edges).unwrap();
    let text = sim1.replace(
        "kind = \"circulant\"\nn = 14\nk = 5\nundirected = true",
        "kind = \"edge_list\"\npath = \"c14.txt\"",
    );
    assert_ne!(text, sim1);
    fs::write(dir.path().join("nets/custom.toml"), text).unwrap();
    let o = msrpa(
        dir.path(),
        &["run", "nets/custom.toml", "--strict", "--out", "a"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    msrpa(dir.path(), &["run", "sim1", "--out", "b"]);
    let a = fs::read(dir.path().join("a/sim1/trace.csv")).unwrap();
    let b = fs::read(dir.path().join("b/sim1/trace.csv")).unwrap();
    assert!(a == b);
}

#[test]
fn robustness_examples() {
    let dir = tempfile::tempdir().unwrap();
    let circ = [
        "robustness",
        "--circulant",
        "14,5",
        "--undirected",
        "--s",
        "1,2,3,4,5",
        "--index-base",
        "1",
    ];

    let mut args = circ.to_vec();
    args.extend(["--r", "5", "--bruteforce"]);
    let o = msrpa(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("holds: true"), "{text}");
    assert!(text.contains("bruteforce: agrees"), "{text}");

    let mut args = circ.to_vec();
    args.extend(["--r", "6", "--bruteforce"]);
    let text = stdout(&msrpa(dir.path(), &args));
    assert!(text.contains("holds: false"), "{text}");
    assert!(
        text.contains("witness: {6, 7, 8, 9, 10, 11, 12, 13, 14}"),
        "{text}"
    );
    assert!(text.contains("bruteforce: agrees"), "{text}");

    let text = stdout(&msrpa(
        dir.path(),
        &["robustness", "--path", "5", "--s", "0", "--r", "1"],
    ));
    assert!(text.contains("holds: true"), "{text}");
    assert!(text.contains("round 4: {4}"), "{text}");
}

#[test]
fn robustness_bruteforce_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let o = msrpa(
        dir.path(),
        &[
            "robustness",
            "--complete",
            "30",
            "--s",
            "0",
            "--r",
            "1",
            "--bruteforce",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("holds: true"));
}

#[test]
fn robustness_from_edge_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.txt"), "# triangle fan\n1 3\n2 3\n1 2\n").unwrap();
    let o = msrpa(
        dir.path(),
        &[
            "robustness",
            "--edges",
            "g.txt",
            "--index-base",
            "1",
            "--s",
            "1",
            "--r",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("graph: 3 agents, 3 edges"), "{text}");
    assert!(text.contains("holds: true"), "{text}");
}

#[test]
fn list_names_bundled_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&msrpa(dir.path(), &["list"]));
    assert_eq!(
        text.lines().collect::<Vec<_>>(),
        ["sim1", "sim2", "neg_eta", "neg_cluster"]
    );
}
