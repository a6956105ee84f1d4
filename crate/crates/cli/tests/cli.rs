use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dbnet::corpus::{bonus_desk, shopping_cart, CartParams};
use dbnet::dsl::{parse_cpn, parse_dbnet, print_dbnet};
use dbnet_cli::{run, EXIT_CHECK, EXIT_USAGE};

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn dbnet(args: &[&str]) -> Out {
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let argv = std::iter::once("dbnet").chain(args.iter().copied());
    let code = run(argv, &mut o, &mut e);
    Out { code, stdout: String::from_utf8(o).unwrap(), stderr: String::from_utf8(e).unwrap() }
}

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn certify_small_cart_by_file_stem() {
    let o = dbnet(&["certify", "shopping-cart.dbn", "--users", "1", "--fresh", "bounded:1"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.starts_with("verdict bisimilar\n"));
    assert!(o.stdout.contains("dbnet_states 19\n") && o.stdout.contains("cpn_states 327\n"), "{}", o.stdout);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_dbnet");
    let ok = Command::new(bin).args(["validate", "builtin:bonus-desk"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(bin).args(["frobnicate"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
    let cut = Command::new(bin).args(["statespace", "builtin:shopping-cart", "--max-states", "10"]).output().unwrap();
    assert_eq!(cut.status.code(), Some(EXIT_CHECK));
}

#[test]
fn non_ucq_query_blocks_translation() {
    let d = tempfile::tempdir().unwrap();
    let src = write(d.path(), "x.dbn", "dbnet x;\nrelation R(a: int);\nquery Q(x: int) := R(x), !R(x);\n");
    let out = d.path().join("x.cpn");
    let o = dbnet(&["translate", &src, "-o", out.to_str().unwrap()]);
    assert_ne!(o.code, 0);
    assert!(o.stderr.contains("x.dbn:3:26") && o.stderr.contains("UCQ"), "{}", o.stderr);
    assert!(!out.exists());
}

#[test]
fn statespace_truncation_is_reported() {
    let o = dbnet(&["statespace", "builtin:shopping-cart", "--max-states", "10"]);
    assert_eq!(o.code, EXIT_CHECK);
    assert!(o.stderr.contains("states: 10\n") && o.stderr.contains("truncated: true"), "{}", o.stderr);
    assert!(o.stdout.ends_with("TRUNCATED\n"));
}

#[test]
fn statespace_of_translated_net() {
    let o = dbnet(&["statespace", "builtin:shopping-cart", "--translated"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stderr.contains("states: 327\n"), "{}", o.stderr);
    assert_eq!(o.stdout.lines().filter(|l| l.starts_with("STATE ")).count(), 327);
}

#[test]
fn translate_writes_net_graph_and_provenance() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("bd.cpn");
    let o = dbnet(&["translate", "builtin:bonus-desk", "-o", out.to_str().unwrap()]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let cpn = parse_cpn(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(cpn.place("sys.Lock").is_some());
    assert!(fs::read_to_string(d.path().join("bd.dot")).unwrap().starts_with("digraph"));
    let prov = fs::read_to_string(d.path().join("bd.provenance.jsonl")).unwrap();
    assert_eq!(prov.lines().count(), cpn.places.len() + cpn.transitions.len());
    assert_eq!(dbnet(&["validate", out.to_str().unwrap()]).code, 0);
}

#[test]
fn shipped_models_match_builtins() {
    let cart = fs::read_to_string(models_dir().join("shopping-cart.dbn")).unwrap();
    let desk = fs::read_to_string(models_dir().join("bonus-desk.dbn")).unwrap();
    assert_eq!(parse_dbnet(&cart).unwrap(), shopping_cart(CartParams::default()));
    assert_eq!(parse_dbnet(&desk).unwrap(), bonus_desk());
    assert_eq!(print_dbnet(&parse_dbnet(&cart).unwrap()), cart);
}

#[test]
fn print_then_parse_is_stable_for_files() {
    let path = models_dir().join("bonus-desk.dbn");
    let once = dbnet(&["print", path.to_str().unwrap()]);
    let d = tempfile::tempdir().unwrap();
    let again = write(d.path(), "again.dbn", &once.stdout);
    assert_eq!(dbnet(&["print", &again]).stdout, once.stdout);
}

#[test]
fn validate_reports_initial_violations() {
    let d = tempfile::tempdir().unwrap();
    let src = write(
        d.path(),
        "bad.dbn",
        "dbnet bad;\nrelation R(a: int key);\nrelation S(b: int);\nforeign key S(b) references R(a);\nplace P: ();\ninitial { fact S(3); token P(); }\n",
    );
    let o = dbnet(&["validate", &src]);
    assert_eq!(o.code, EXIT_CHECK);
    assert!(o.stdout.contains("violates fk"), "{}", o.stdout);
    assert_eq!(dbnet(&["certify", &src]).code, EXIT_CHECK);
}

#[test]
fn simulate_is_seeded() {
    let a = dbnet(&["simulate", "builtin:bonus-desk", "--steps", "12", "--seed", "3"]);
    let b = dbnet(&["simulate", "builtin:bonus-desk", "--steps", "12", "--seed", "3"]);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout.lines().filter(|l| l.starts_with("STEP ")).count(), 12);
    let others: Vec<String> = (4..10).map(|s| dbnet(&["simulate", "builtin:bonus-desk", "--steps", "12", "--seed", &s.to_string()]).stdout).collect();
    assert!(others.iter().any(|o| *o != a.stdout));
}

#[test]
fn failed_certification_writes_trace() {
    let d = tempfile::tempdir().unwrap();
    let prefix = d.path().join("m");
    let o = dbnet(&["certify", "builtin:bonus-desk", "--mutate", "forget-cancel-lock-return", "-o", prefix.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_CHECK, "{}", o.stderr);
    assert!(o.stdout.starts_with("verdict not-bisimilar\n"));
    let trace = fs::read_to_string(d.path().join("m.trace")).unwrap();
    assert!(trace.starts_with("PAIR\n") && trace.contains("REASON"), "{trace}");
    for ext in ["result", "dbnet.lts", "cpn.lts"] {
        assert!(d.path().join(format!("m.{ext}")).exists(), "{ext}");
    }
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(dbnet(&["certify", "builtin:bonus-desk", "--fresh", "sometimes"]).code, EXIT_USAGE);
    assert_eq!(dbnet(&["certify", "builtin:bonus-desk", "--mutate", "nope"]).code, EXIT_USAGE);
    assert_eq!(dbnet(&["certify", "builtin:bonus-desk", "--users", "2"]).code, EXIT_USAGE);
    assert_eq!(dbnet(&["validate", "/nonexistent/model.dbn"]).code, EXIT_USAGE);
    assert_eq!(dbnet(&["translate", "builtin:nope"]).code, EXIT_USAGE);
}

#[test]
fn export_dot_variants() {
    for extra in [&[][..], &["--translated"], &["--lts"], &["--translated", "--lts"]] {
        let mut args = vec!["export-dot", "builtin:shopping-cart"];
        args.extend_from_slice(extra);
        let o = dbnet(&args);
        assert_eq!(o.code, 0, "{extra:?}: {}", o.stderr);
        assert!(o.stdout.starts_with("digraph"), "{extra:?}");
    }
}
