//! Black-box checks of the command-line binary: determinism, the exit-code
//! contract, and bit-exact round-trips for the three model formats.

use relent::game::GameMatrix;
use relent::markov::MarkovProcess;
use relent::reaction::ReactionNetwork;
use std::path::PathBuf;
use std::process::{Command, Output};

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .and_then(|p| p.parent())
        .expect("workspace root exists")
        .join("models")
}

fn model(name: &str) -> String {
    models_dir().join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relent")).args(args).output().expect("binary launches")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("terminated by exit, not signal")
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("relent-cli-test-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).expect("temp file is writable");
    path
}

#[test]
fn simulate_is_byte_deterministic() {
    let rps = model("rps.mat");
    let args = [
        "simulate",
        "--model",
        &rps,
        "--dynamics",
        "replicator",
        "--initial",
        "0.5,0.3,0.2",
        "--t-end",
        "10",
        "--ref",
        "0.2,0.5,0.3",
        "--seed",
        "7",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout, "trajectory bytes must not vary between runs");
    assert_eq!(first.stderr, second.stderr, "run report bytes must not vary between runs");
    assert!(first.stdout.starts_with(b"t,"), "trajectory starts with a CSV header");

    let report = String::from_utf8(first.stderr).unwrap();
    assert!(report.contains("sha256="), "report names the model content hash:\n{report}");
    assert!(report.contains("exit: 0"), "report states the exit code:\n{report}");
    assert!(report.contains("channel I(ref,state):"), "report covers each channel:\n{report}");

    let json_args = {
        let mut v = args.to_vec();
        v.extend(["--format", "json"]);
        v
    };
    let first = run(&json_args);
    let second = run(&json_args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
    assert!(first.stdout.starts_with(b"{"), "json output is an object");
}

#[test]
fn analyze_is_byte_deterministic() {
    let hd = model("hawk_dove.mat");
    let args = [
        "analyze",
        "game",
        "--matrix",
        &hd,
        "--strategy",
        "0.6666666666666666,0.3333333333333334",
        "--check",
        "ess",
        "--format",
        "json",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first.stderr, second.stderr);
}

#[test]
fn verdicts_and_failures_map_to_exit_codes() {
    // 0: the check holds.
    let pd = model("pd.mat");
    let out = run(&["analyze", "game", "--matrix", &pd, "--strategy", "0,1", "--check", "dominant"]);
    assert_eq!(code(&out), 0, "stdout: {}", String::from_utf8_lossy(&out.stdout));

    // 1: the check fails.
    let out = run(&["analyze", "game", "--matrix", &pd, "--strategy", "1,0", "--check", "nash"]);
    assert_eq!(code(&out), 1);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("status: fails"), "{text}");
    assert!(text.contains("witness:"), "{text}");

    // 1: unbalanced point.
    let ab = model("ab.rn");
    let out = run(&["analyze", "complex-balance", "--model", &ab, "--point", "1,1"]);
    assert_eq!(code(&out), 1);

    // 0: balanced point.
    let out = run(&["analyze", "complex-balance", "--model", &ab, "--point", "2,1"]);
    assert_eq!(code(&out), 0);

    // 4: the exact face walk does not apply past twelve strategies, and for
    // a convex slack with no negative samples the checker must admit it
    // cannot decide.
    let n = 13;
    let mut rows = vec![vec![0.0f64; n]; n];
    rows[0][0] = -1.0;
    rows[0][1] = 1.0;
    rows[1][0] = 1.0;
    rows[1][1] = -1.0;
    let mut text = format!("{n}\n");
    for row in &rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        text.push_str(&cells.join(" "));
        text.push('\n');
    }
    let big = temp_file("big.mat", &text);
    let uniform = vec!["0.07692307692307693"; n].join(",");
    let out = run(&[
        "analyze",
        "game",
        "--matrix",
        big.to_str().unwrap(),
        "--strategy",
        &uniform,
        "--check",
        "dominant",
    ]);
    assert_eq!(code(&out), 4, "stdout: {}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("inconclusive"));
}

#[test]
fn usage_and_parse_errors_exit_with_two() {
    let rps = model("rps.mat");

    let out = run(&["simulate", "--model", &rps]);
    assert_eq!(code(&out), 2, "missing required flags");

    let out = run(&["analyze", "game", "--matrix", "/nonexistent/x.mat", "--strategy", "1", "--check", "nash"]);
    assert_eq!(code(&out), 2, "unreadable model file");

    let out = run(&[
        "simulate", "--model", &rps, "--dynamics", "master", "--initial", "0.5,0.3,0.2", "--t-end", "1",
    ]);
    assert_eq!(code(&out), 2, "dynamics incompatible with the model kind");
    assert!(String::from_utf8_lossy(&out.stderr).contains("payoff matrix"));

    let out = run(&[
        "simulate", "--model", &rps, "--dynamics", "replicator", "--initial", "0.5,0.5", "--t-end", "1",
    ]);
    assert_eq!(code(&out), 2, "dimension mismatch in --initial");

    let bad = temp_file("bad.mat", "not a matrix\n");
    let out = run(&[
        "simulate", "--model", bad.to_str().unwrap(), "--dynamics", "replicator",
        "--initial", "1", "--t-end", "1",
    ]);
    assert_eq!(code(&out), 2, "malformed model file");
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("line 1"), "parse errors carry a position: {err}");

    let out = run(&["analyze", "game", "--matrix", &rps, "--strategy", "0.4,0.4,0.2", "--check", "nash", "--tol", "-1"]);
    assert_eq!(code(&out), 2, "negative tolerance");

    let out = run(&["no-such-command"]);
    assert_eq!(code(&out), 2);

    let out = run(&["--help"]);
    assert_eq!(code(&out), 0, "help is not an error");
}

#[test]
fn monotone_violations_exit_with_three() {
    let rps = model("rps.mat");
    // Divergence measured from a non-stationary reference oscillates along
    // the cycling orbit, so demanding decay must fail.
    let out = run(&[
        "simulate", "--model", &rps, "--dynamics", "replicator",
        "--initial", "0.4,0.4,0.2", "--t-end", "5", "--ref", "0.2,0.5,0.3",
        "--monotone", "I(state,ref)",
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("monotone=increasing"));

    // Measured from the stationary uniform strategy the divergence is
    // conserved, which passes a decay demand within the slack. The reverse
    // channel still oscillates, so only the conserved one is requested.
    let third = "0.3333333333333333";
    let uniform = format!("{third},{third},{third}");
    let out = run(&[
        "simulate", "--model", &rps, "--dynamics", "replicator",
        "--initial", "0.4,0.4,0.2", "--t-end", "5", "--ref", &uniform,
        "--monotone", "I(ref,state)",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn kind_override_replaces_extension_detection() {
    let text = std::fs::read_to_string(models_dir().join("rps.mat")).unwrap();
    let odd = temp_file("payoffs.txt", &text);
    let out = run(&[
        "simulate", "--model", odd.to_str().unwrap(), "--dynamics", "replicator",
        "--initial", "0.5,0.3,0.2", "--t-end", "1",
    ]);
    assert_eq!(code(&out), 2, "unknown extension without --kind");

    let out = run(&[
        "simulate", "--model", odd.to_str().unwrap(), "--kind", "mat", "--dynamics", "replicator",
        "--initial", "0.5,0.3,0.2", "--t-end", "1",
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn model_formats_round_trip_bit_exactly() {
    for name in ["rps.mat", "pd.mat", "hawk_dove.mat"] {
        let text = std::fs::read_to_string(models_dir().join(name)).unwrap();
        let once = GameMatrix::parse(&text).unwrap().serialize();
        let twice = GameMatrix::parse(&once).unwrap().serialize();
        assert_eq!(once, twice, "canonical form of {name} must be a fixed point");
    }
    for name in ["two_state.mk", "chain.mk"] {
        let text = std::fs::read_to_string(models_dir().join(name)).unwrap();
        let once = MarkovProcess::parse(&text).unwrap().serialize();
        let twice = MarkovProcess::parse(&once).unwrap().serialize();
        assert_eq!(once, twice, "canonical form of {name} must be a fixed point");
    }
    for name in ["ab.rn", "mm.rn", "hiv.rn", "predator_prey.rn"] {
        let text = std::fs::read_to_string(models_dir().join(name)).unwrap();
        let parsed = ReactionNetwork::parse(&text).unwrap();
        assert!(parsed.warnings.is_empty(), "{name} should parse cleanly: {:?}", parsed.warnings);
        let once = parsed.network.serialize();
        let twice = ReactionNetwork::parse(&once).unwrap().network.serialize();
        assert_eq!(once, twice, "canonical form of {name} must be a fixed point");
    }
}

#[test]
fn steady_state_and_energy_analyses_agree_with_closed_forms() {
    let two_state = model("two_state.mk");
    let out = run(&["analyze", "steady-states", "--model", &two_state, "--format", "json"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("0.6666666666666666") || text.contains("0.6666666666666667"),
        "two-state steady state should be (2/3, 1/3): {text}"
    );

    let out = run(&["analyze", "energies", "--model", &two_state, "--beta", "1", "--ground", "up"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("state up: energy=0 "), "ground energy pinned at zero: {text}");

    // A chain has its steady state on the absorbing end; energies relative
    // to it are infinite, which the analysis must reject.
    let chain = model("chain.mk");
    let out = run(&["analyze", "energies", "--model", &chain, "--beta", "1"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}
