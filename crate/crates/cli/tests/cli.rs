use std::path::PathBuf;
use std::process::{Command, Output};

use powerq_core::periodic::ConstructionState;
use powerq_core::LargenessCertificate;
use serde_json::Value;

fn powerq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_powerq"))
        .args(args)
        .env_remove("POWERQ_CONFIG")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("powerq-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn certificate_for_a_squared() {
    let out = powerq(&["certify-large", "-r", "2", "-g", "a", "-q", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["verdict"], "certified-large");
    assert_eq!(doc["counts"]["j"], 4);
    assert_eq!(doc["counts"]["gens"], 5);
    assert_eq!(doc["counts"]["rels"], 2);
    assert_eq!(doc["counts"]["deficiency"], 3);
    assert_eq!(doc["seed"], 0);
}

#[test]
fn element_order_in_the_verbal_quotient() {
    let out = powerq(&["gamma", "--primes", "2,3", "--rank", "2", "--depth", "2", "--order", "a"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["element_order"]["order"]["decimal"], 6);
    assert_eq!(doc["order"]["decimal"], 972);

    let out = powerq(&["gamma", "--primes", "2,3", "--rank", "2", "--depth", "2", "--member", "a^6"]);
    assert_eq!(json(&out)["member"]["member"], true);
}

#[test]
fn tampered_certificate_is_rejected() {
    let out = powerq(&["certify-large", "-r", "2", "-g", "a", "-q", "2"]);
    let mut doc = json(&out);
    let path = scratch("good.json");
    std::fs::write(&path, &out.stdout).unwrap();
    let ok = powerq(&["verify", path.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["ok"], true);

    doc["counts"]["rels"] = Value::from(1);
    let bad_path = scratch("tampered.json");
    std::fs::write(&bad_path, serde_json::to_string(&doc).unwrap()).unwrap();
    let bad = powerq(&["verify", bad_path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    let report = json(&bad);
    assert_eq!(report["ok"], false);
    assert!(!report["mismatches"].as_array().unwrap().is_empty());
}

#[test]
fn user_witness_that_fails_the_preconditions() {
    // (Z/2)^2 kills a, so a cannot keep order 3 there
    let witness = r#"{"kind":"abelian","rank":2,"params":{"moduli":[2,2]},"gen_images":[[1,0],[0,1]]}"#;
    let path = scratch("witness.json");
    std::fs::write(&path, witness).unwrap();
    let out = powerq(&["certify-large", "-r", "2", "-g", "a,b", "-q", "2", "--witness", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let doc = json(&out);
    assert_eq!(doc["verdict"], "not-certified");
    let reason = doc["reason"].as_str().unwrap();
    assert!(reason.contains("g_1") && reason.contains("g_2"), "{reason}");
}

#[test]
fn witness_taken_from_a_certificate() {
    let out = powerq(&["certify-large", "-r", "2", "-g", "a", "-q", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let path = scratch("cert3.json");
    std::fs::write(&path, &out.stdout).unwrap();
    let again = powerq(&["certify-large", "-r", "2", "-g", "a", "-q", "6", "--witness", path.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(json(&again)["witness"], json(&out)["witness"]);
}

#[test]
fn identical_runs_are_byte_identical() {
    for args in [
        &["--seed", "7", "certify-large", "-r", "2", "-g", "a,b", "-q", "3"][..],
        &["--seed", "7", "construct-periodic", "--primes", "2,3,5,7", "--steps", "1"][..],
        &["--seed", "7", "lemma-fi", "-g", "abAB", "-m", "2"][..],
    ] {
        let a = powerq(args);
        let b = powerq(args);
        assert_eq!(a.status.code(), b.status.code());
        assert_eq!(a.stdout, b.stdout);
        assert!(String::from_utf8_lossy(&a.stdout).contains("\"seed\":7") || json(&a)["seed"] == 7);
    }
}

#[test]
fn documents_round_trip() {
    for args in [
        &["certify-large", "-r", "2", "-g", "a", "-q", "2"][..],
        &["magnus", "-w", "abAB", "-p", "3", "-l", "4"][..],
        &["magnus", "-w", "aab", "-p", "Z", "-l", "3"][..],
        &["gamma", "--primes", "2,3", "--rank", "2", "--depth", "2"][..],
        &["levi", "--set", "a,abAB", "--primes", "2,3"][..],
        &["lemma-fi", "-g", "a,b", "-m", "1"][..],
    ] {
        let out = powerq(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        let value = json(&out);
        let again: Value = serde_json::from_str(&serde_json::to_string(&value).unwrap()).unwrap();
        assert_eq!(again, value, "{args:?}");
    }
}

#[test]
fn typed_documents_round_trip() {
    let out = powerq(&["certify-large", "-r", "2", "-g", "a,b", "-q", "3"]);
    let mut value = json(&out);
    value.as_object_mut().unwrap().remove("seed");
    let cert: LargenessCertificate = serde_json::from_value(value.clone()).unwrap();
    assert_eq!(serde_json::to_value(&cert).unwrap(), value);

    let out = powerq(&["construct-periodic", "--primes", "2,3,5,7", "--steps", "1"]);
    let mut value: Value = serde_json::from_slice(&out.stdout).unwrap();
    value.as_object_mut().unwrap().remove("seed");
    let state: ConstructionState = serde_json::from_value(value.clone()).unwrap();
    assert_eq!(serde_json::to_value(&state).unwrap(), value);
}

#[test]
fn construction_lines() {
    let out = powerq(&["construct-periodic", "--primes", "2,3,5,7", "--steps", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["relators"][0]["exponent"], 6);

    // level 4 of the series is out of reach, so the second step stops
    let out = powerq(&["construct-periodic", "--primes", "2,3,5,7", "--steps", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    let last: Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert!(last["halted"].is_string());
}

#[test]
fn magnus_images() {
    let out = powerq(&["magnus", "-w", "abAB", "-p", "3", "-l", "3"]);
    let doc = json(&out);
    assert_eq!(doc["series"], "1 + x1x2 + 2·x2x1");
    assert_eq!(doc["unit_order"]["decimal"], 3);
    let out = powerq(&["magnus", "-w", "abAB", "-p", "Z", "-l", "2"]);
    let doc = json(&out);
    assert_eq!(doc["trivial"], true);
    assert!(doc.get("unit_order").is_none());
}

#[test]
fn exit_codes() {
    assert_eq!(powerq(&["bogus"]).status.code(), Some(1));
    assert_eq!(powerq(&["--help"]).status.code(), Some(0));
    assert_eq!(powerq(&["certify-large", "-r", "2", "-g", "a%", "-q", "2"]).status.code(), Some(1));
    assert_eq!(
        powerq(&["gamma", "--primes", "2,3", "--rank", "2", "--depth", "1", "--member", "a", "--order", "a"])
            .status
            .code(),
        Some(1)
    );
    // commutators survive no abelian quotient and 2 is below the threshold
    let out = powerq(&["certify-large", "-r", "2", "-g", "abAB", "-q", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["verdict"], "not-certified");
    // a cap breach
    let out = powerq(&["--enumeration-cap", "3", "certify-large", "-r", "2", "-g", "a", "-q", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_from_the_environment() {
    let path = scratch("powerq.conf");
    std::fs::write(&path, "# tiny caps\nenumeration = 3\nseed = 11\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_powerq"))
        .args(["certify-large", "-r", "2", "-g", "a", "-q", "2"])
        .env("POWERQ_CONFIG", &path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["seed"], 11);

    // flags beat the file
    let out = Command::new(env!("CARGO_BIN_EXE_powerq"))
        .args(["--enumeration-cap", "100", "--seed", "5", "certify-large", "-r", "2", "-g", "a", "-q", "2"])
        .env("POWERQ_CONFIG", &path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["seed"], 5);

    std::fs::write(&path, "depth = 0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_powerq"))
        .args(["levi", "--set", "a", "--primes", "2"])
        .env("POWERQ_CONFIG", &path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_file() {
    let path = scratch("out.json");
    let out = powerq(&["-o", path.to_str().unwrap(), "magnus", "-w", "a", "-p", "2", "-l", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["series"], "1 + x1");
}
