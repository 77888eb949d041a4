use std::path::{Path, PathBuf};
use std::process::Command;

use boxlab::boxes::{pr_box, q_box, Alphabets, DenseBox, InputDist, Predicate, SymBox};
use boxlab::definetti::{tau_chsh, ConvexFamily};
use boxlab::numerics::{rat, Field, QSqrt2};
use boxlab_cli::format::{self, LoadedBox};
use boxlab_cli::report::REPORT_HEADER;
use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }
}

fn boxlab_with(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_boxlab"));
    cmd.args(args).env_remove("BOXLAB_PATTERN_CAP");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn boxlab(args: &[&str]) -> Run {
    boxlab_with(args, &[])
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, v: &impl serde::Serialize) -> PathBuf {
    let p = dir.path().join(name);
    format::write_json(&p, v).unwrap();
    p
}

fn write_symbox<F: Field>(dir: &TempDir, name: &str, b: &SymBox<F>) -> PathBuf {
    write(dir, name, &format::symbox_doc(b))
}

fn write_box<F: Field>(dir: &TempDir, name: &str, b: &DenseBox<F>) -> PathBuf {
    write(dir, name, &format::box_doc(b))
}

#[test]
fn tau_one_round() {
    let r = boxlab(&["tau", "--n", "1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["format"], "boxlab/symbox-v1");
    assert_eq!(v["p"], serde_json::json!(["1/2", "1/2"]));

    let dense = boxlab(&["tau", "--n", "1", "--dense"]).json();
    assert_eq!(dense["scalar"], "rational");
    let entries = dense["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 16);
    assert!(entries.iter().all(|e| e == "1/4"));
}

#[test]
fn tau_rejects_zero_rounds() {
    let r = boxlab(&["tau", "--n", "0"]);
    assert_eq!(r.code, 2);
    assert!(r.stdout.is_empty());
}

#[test]
fn tau_file_round_trips() {
    let dir = TempDir::new().unwrap();
    for n in [2, 5, 9] {
        let p = dir.path().join(format!("tau{n}.json"));
        assert_eq!(boxlab(&["tau", "--n", &n.to_string(), "-o", s(&p)]).code, 0);
        assert_eq!(
            format::load_box(&p).unwrap(),
            LoadedBox::Sym(tau_chsh(n).unwrap())
        );
    }
    let p = dir.path().join("dense.json");
    assert_eq!(boxlab(&["tau", "--n", "2", "--dense", "-o", s(&p)]).code, 0);
    let dense = format::load_box(&p).unwrap();
    assert_eq!(dense.to_symbox().unwrap(), tau_chsh(2).unwrap());
}

#[test]
fn cert1_on_tau_passes_with_report() {
    let dir = TempDir::new().unwrap();
    let input = write_symbox(&dir, "tau.json", &tau_chsh(6).unwrap());
    let report = dir.path().join("r.csv");
    let r = boxlab(&["cert1", "-i", s(&input), "--report", s(&report)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["pass"], true);
    let text = std::fs::read_to_string(&report).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(REPORT_HEADER));
    assert_eq!(
        lines.next(),
        Some("k,lhs,lhs_decimal,rhs,rhs_decimal,slack,slack_decimal")
    );
    assert_eq!(lines.count(), 7);
}

#[test]
fn cert1_on_pr_box_fails_the_threshold_premise() {
    let dir = TempDir::new().unwrap();
    let sym = write_symbox(
        &dir,
        "pr.json",
        &SymBox::<QSqrt2>::point_mass(1, 1).unwrap(),
    );
    let r = boxlab(&["cert1", "-i", s(&sym)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("threshold premise"), "{}", r.stderr);
    let dense = write_box(&dir, "pr_dense.json", &pr_box::<QSqrt2>());
    assert_eq!(boxlab(&["cert1", "-i", s(&dense)]).code, 2);
}

#[test]
fn cert1_rejects_asymmetric_boxes() {
    let dir = TempDir::new().unwrap();
    let b = q_box(&rat(3, 4)).unwrap();
    let skew = DenseBox::mix(
        &[b.clone(), DenseBox::uniform(1, Alphabets::chsh()).unwrap()],
        &[rat(1, 2), rat(1, 2)],
    )
    .unwrap();
    let mut entries = skew.entries().to_vec();
    entries.swap(0, 1);
    let asym = DenseBox::new(1, Alphabets::chsh(), entries).unwrap();
    let p = write_box(&dir, "asym.json", &asym);
    let r = boxlab(&["cert1", "-i", s(&p)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("not CHSH symmetric"), "{}", r.stderr);
}

#[test]
fn cert2_on_quantum_iid_box() {
    let dir = TempDir::new().unwrap();
    let p = write_symbox(&dir, "q12.json", &SymBox::iid(12, &rat(3, 4)).unwrap());
    let report = dir.path().join("r.csv");
    let r = boxlab(&["cert2", "-i", s(&p), "--k", "2", "--report", s(&report)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["pass"], true);
    assert_eq!(std::fs::read_to_string(report).unwrap().lines().count(), 3);
    assert_eq!(boxlab(&["cert2", "-i", s(&p), "--k", "13"]).code, 2);
}

#[test]
fn threshold_and_dfcheck() {
    let dir = TempDir::new().unwrap();
    let tau = write_symbox(&dir, "tau.json", &tau_chsh(8).unwrap());
    assert_eq!(boxlab(&["threshold", "-i", s(&tau)]).code, 0);
    let df = boxlab(&["dfcheck", "-i", s(&tau), "--k", "3"]);
    assert_eq!(df.code, 0, "{}", df.stderr);
    assert_eq!(df.json()["rhs"]["exact"], "3/2");
    assert_eq!(boxlab(&["dfcheck", "-i", s(&tau), "--k", "0"]).code, 2);

    let pr = write_symbox(
        &dir,
        "pr.json",
        &SymBox::<QSqrt2>::point_mass(8, 8).unwrap(),
    );
    let r = boxlab(&["threshold", "-i", s(&pr)]);
    assert_eq!(r.code, 1);
    assert_eq!(r.json()["first_failure"]["kind"], "upper");
}

fn channels_doc(n: usize, same: bool) -> Value {
    let kernel = |flip: bool| -> Vec<String> {
        let mut out = Vec::new();
        for x in 0..4 {
            for a in 0..4 {
                let hit = (a ^ x) % 2 == 0;
                let r0 = if hit != flip { "1/1" } else { "0/1" };
                let r1 = if hit != flip { "0/1" } else { "1/1" };
                out.push(r0.to_string());
                out.push(r1.to_string());
            }
        }
        out
    };
    serde_json::json!({
        "format": "boxlab/channels-v1",
        "n": n,
        "interfaces": [{"in": 2, "out": 2}, {"in": 2, "out": 2}],
        "results": 2,
        "PX": ["1/4", "1/4", "1/4", "1/4"],
        "PE_R|AX": kernel(false),
        "PF_R|AX": kernel(!same),
    })
}

#[test]
fn diamond_of_identical_channels_is_zero() {
    let dir = TempDir::new().unwrap();
    let ch = write(&dir, "same.json", &channels_doc(1, true));
    let r = boxlab(&[
        "diamond",
        "--channels",
        s(&ch),
        "--polytope",
        "ns",
        "--n",
        "1",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["value"]["exact"], "0/1");
}

#[test]
fn diamond_over_round_ns_and_ns() {
    let dir = TempDir::new().unwrap();
    let ch = dir.path().join("ce.json");
    let r = boxlab(&[
        "counterexample",
        "--n",
        "3",
        "--m",
        "2",
        "--channels-out",
        s(&ch),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let round = boxlab(&[
        "diamond",
        "--channels",
        s(&ch),
        "--polytope",
        "roundns",
        "--n",
        "3",
    ]);
    assert_eq!(round.code, 0, "{}", round.stderr);
    assert_eq!(round.json()["value"]["exact"], "0/1");
    let witness = dir.path().join("w.json");
    let ns = boxlab(&[
        "diamond",
        "--channels",
        s(&ch),
        "--polytope",
        "ns",
        "--n",
        "3",
        "--witness",
        s(&witness),
    ]);
    assert_eq!(ns.code, 0, "{}", ns.stderr);
    let v = ns.json();
    assert_ne!(v["value"]["exact"], "0/1");
    assert!(
        v["value"]["decimal"]
            .as_str()
            .unwrap()
            .parse::<f64>()
            .unwrap()
            > 0.0
    );
    assert_eq!(v["witness_feasible"], true);
    assert!(matches!(
        format::load_box(&witness).unwrap(),
        LoadedBox::Dense(_)
    ));
    assert_eq!(
        boxlab(&[
            "diamond",
            "--channels",
            s(&ch),
            "--polytope",
            "ns",
            "--n",
            "2"
        ])
        .code,
        2
    );
}

#[test]
fn diamond_over_the_extension_polytope() {
    let dir = TempDir::new().unwrap();
    let ch = write(&dir, "xor.json", &channels_doc(1, false));
    let tau = write_symbox(&dir, "tau.json", &tau_chsh(1).unwrap());
    let spec = format!("ext:{}", s(&tau));
    let r = boxlab(&[
        "diamond",
        "--channels",
        s(&ch),
        "--polytope",
        &spec,
        "--n",
        "1",
        "--eve-in",
        "2",
        "--eve-out",
        "2",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["patterns"], "64");
    assert_eq!(v["witness_feasible"], true);
}

#[test]
fn pattern_cap_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let ch = write(&dir, "xor.json", &channels_doc(1, false));
    let args = [
        "diamond",
        "--channels",
        s(&ch),
        "--polytope",
        "ns",
        "--n",
        "1",
        "--eve-in",
        "2",
        "--eve-out",
        "2",
    ];
    let r = boxlab_with(&args, &[("BOXLAB_PATTERN_CAP", "8")]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("exceed the cap of 8"), "{}", r.stderr);
    assert_eq!(
        boxlab_with(&args, &[("BOXLAB_PATTERN_CAP", "lots")]).code,
        2
    );
}

#[test]
fn counterexample_reports() {
    let r = boxlab(&["counterexample", "--n", "3", "--m", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["roundns_value"], "0/1");
    assert_ne!(v["q_value"], "0/1");
    assert!(!v["q_value"].as_str().unwrap().starts_with('-'));
    assert!(v.get("delta").is_none());
    assert!(v["runtime"].as_f64().is_some());

    assert_eq!(boxlab(&["counterexample", "--n", "2", "--m", "2"]).code, 2);

    let full = boxlab(&["counterexample", "--n", "4", "--m", "3", "--full"]).json();
    assert_eq!(full["delta"].as_array().unwrap().len(), 8);
    assert_eq!(full["roundns_value"], "0/1");
}

struct GeneralFiles {
    _dir: TempDir,
    family: PathBuf,
    pred: PathBuf,
    mu: PathBuf,
}

fn general_files(
    family: &ConvexFamily<QSqrt2>,
    pred: &Predicate,
    mu: &InputDist<QSqrt2>,
) -> GeneralFiles {
    let dir = TempDir::new().unwrap();
    GeneralFiles {
        family: write(&dir, "family.json", &format::family_doc(family)),
        pred: write(&dir, "pred.json", &format::predicate_doc(pred)),
        mu: write(&dir, "mu.json", &format::input_dist_doc(mu)),
        _dir: dir,
    }
}

fn general(files: &GeneralFiles, input: &Path, c: &str, grid: &str, extra: &[&str]) -> Run {
    let mut args = vec![
        "general",
        "--family",
        s(&files.family),
        "--pred",
        s(&files.pred),
        "--mu",
        s(&files.mu),
        "-i",
        s(input),
        "--C",
        c,
        "--grid",
        grid,
    ];
    args.extend_from_slice(extra);
    boxlab(&args)
}

#[test]
fn general_chsh_family_reproduces_cert1() {
    let files = general_files(
        &ConvexFamily::chsh(),
        &Predicate::chsh(),
        &InputDist::uniform(4),
    );
    let dir = TempDir::new().unwrap();
    let boxes: Vec<(String, SymBox<QSqrt2>)> = vec![
        ("tau".into(), tau_chsh(5).unwrap()),
        (
            "iid".into(),
            SymBox::iid(5, &QSqrt2::from(rat(7, 10))).unwrap(),
        ),
        ("pr".into(), SymBox::point_mass(5, 5).unwrap()),
        (
            "adv".into(),
            boxlab::threshold::adversarial_symbox(5).unwrap(),
        ),
    ];
    for (name, b) in &boxes {
        let p = write_symbox(&dir, &format!("{name}.json"), b);
        let cert1 = boxlab(&["cert1", "-i", s(&p)]);
        let report = dir.path().join(format!("{name}.csv"));
        let gen = general(&files, &p, "1", "1024", &["--report", s(&report)]);
        assert_eq!(
            gen.code, cert1.code,
            "{name}: {} / {}",
            gen.stderr, cert1.stderr
        );
        if gen.code == 0 {
            let v = gen.json();
            assert_eq!(v["prefactor"]["exact"], "36/1");
            assert_eq!(v["entry"]["pass"], true);
            let text = std::fs::read_to_string(&report).unwrap();
            assert_eq!(text.lines().count(), 2 + 6);
            assert!(text.lines().nth(2).unwrap().starts_with("0;5,"));
        }
    }
}

#[test]
fn general_singleton_family_with_iid_box() {
    let q = q_box(&QSqrt2::from(rat(3, 4))).unwrap();
    let files = general_files(
        &ConvexFamily::singleton(&q).unwrap(),
        &Predicate::chsh(),
        &InputDist::uniform(4),
    );
    let dir = TempDir::new().unwrap();
    let p = write_box(&dir, "iid.json", &q.iid_power(2).unwrap());
    let r = general(&files, &p, "1", "8", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["pass"], true);
    assert_eq!(v["prefactor"]["exact"], "3/1");
}

#[test]
fn general_rejects_malformed_predicates() {
    let files = general_files(
        &ConvexFamily::chsh(),
        &Predicate::chsh(),
        &InputDist::uniform(4),
    );
    let dir = TempDir::new().unwrap();
    let p = write_symbox(&dir, "tau.json", &tau_chsh(2).unwrap());
    for table in [
        serde_json::json!([[1, 2, 3, 1]]),
        serde_json::json!([[1, 2], [1]]),
        serde_json::json!([[0, 1, 1, 1], [1, 1, 1, 1], [1, 1, 1, 1], [1, 1, 1, 1]]),
    ] {
        std::fs::write(
            &files.pred,
            serde_json::json!({"format": "boxlab/predicate-v1", "d": 2, "table": table})
                .to_string(),
        )
        .unwrap();
        let r = general(&files, &p, "1", "16", &[]);
        assert_eq!(r.code, 2, "{table}: {}", r.stderr);
    }
    assert_eq!(general(&files, &p, "one", "16", &[]).code, 2);
}

#[test]
fn error_curve_is_decreasing() {
    let r = boxlab(&[
        "error-curve",
        "--k",
        "4",
        "--min-exp",
        "4",
        "--max-exp",
        "12",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let mut lines = r.stdout.lines();
    assert_eq!(lines.next(), Some(REPORT_HEADER));
    assert_eq!(lines.next(), Some("n,k,rhs,beta_star,c_prime"));
    let rhs: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rhs.len(), 9);
    assert!(rhs.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(boxlab(&["error-curve", "--k", "0"]).code, 2);
}

#[test]
fn corpus_is_seeded() {
    let a = boxlab(&["corpus", "--seed", "3", "--count", "20", "--max-n", "6"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(
        a.stdout,
        boxlab(&["corpus", "--seed", "3", "--count", "20", "--max-n", "6"]).stdout
    );
    assert_eq!(a.json()["boxes"], 20);
}

#[test]
fn unreadable_input_exits_with_precondition_code() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        boxlab(&["cert1", "-i", s(&dir.path().join("missing.json"))]).code,
        2
    );
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"format":"boxlab/symbox-v1","n":1,"p":[0.5,0.5]}"#).unwrap();
    let r = boxlab(&["cert1", "-i", s(&bad)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("malformed scalar"), "{}", r.stderr);
}
