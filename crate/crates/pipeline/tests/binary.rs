use std::process::Command;

fn hlad() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hlad"));
    c.env("HLAD_WORKERS", "1").env("RUST_LOG", "warn");
    c
}

#[test]
fn gen_writes_the_requested_count_with_the_expected_size() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ssld");
    let st = hlad()
        .args(["gen", "--count", "1000", "--domain", "target_emulated", "--seed", "3", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(st.success());
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"SSLD");
    assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 1000);
    let record = 4 * (2 * 8 * 257 * 9) + 4 * 24 * 24 + 17;
    assert_eq!(bytes.len(), 84 + 1000 * record);

    let unlabeled = dir.path().join("u.ssld");
    assert!(hlad().args(["gen", "--count", "10", "--unlabeled", "--out"]).arg(&unlabeled).status().unwrap().success());
    assert_eq!(std::fs::metadata(&unlabeled).unwrap().len() as usize, 84 + 10 * 4 * (2 * 8 * 257 * 9) + 12 + 10 * 17);
}

#[test]
fn bad_inputs_fail_with_useful_messages() {
    let dir = tempfile::tempdir().unwrap();
    let out = hlad().args(["gen", "--domain", "real", "--out"]).arg(dir.path().join("x")).output().unwrap();
    assert!(!out.status.success());

    let m = dir.path().join("m.json");
    std::fs::write(&m, "{\n  \"methods\": [\"S\", \"GRmid\"],\n  \"datasets\": {\"validation\": \"v.ssld\"}\n}").unwrap();
    let out = hlad().arg("train").arg(&m).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("m.json:2:"), "{err}");
    assert!(err.contains("GRmid"), "{err}");
}

#[test]
fn eval_replay_prints_perfect_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.ssld");
    assert!(hlad().args(["gen", "--count", "8", "--unlabeled", "--out"]).arg(&path).status().unwrap().success());
    let out = hlad().args(["eval", "--replay-labels", "--dataset"]).arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["metrics"]["f1"], 1.0);
    assert_eq!(v["metrics"]["rmse"], 0.0);
    assert_eq!(v["records"], 8);
}
