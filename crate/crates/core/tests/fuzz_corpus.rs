//! Replays the checked-in fuzz seeds through the same entry points the fuzz
//! targets exercise.

use std::fs;
use std::path::PathBuf;

use fdpkit::learning::{model_from_json_str, LearnResult};
use fdpkit::{AttackDataset, FdpInstance, PlanResult, ScoreModel};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(data: &[u8]) -> &str {
    std::str::from_utf8(data).unwrap()
}

#[test]
fn instance_seeds() {
    let mut parsed = 0;
    for (name, data) in seeds("instance_json") {
        if let Ok(inst) = FdpInstance::from_json_str(text(&data)) {
            let back = FdpInstance::from_json_str(&inst.to_json_string().unwrap()).unwrap();
            assert_eq!(back, inst, "{name}");
            parsed += 1;
        }
    }
    assert!(parsed >= 3);
}

#[test]
fn model_seeds() {
    for (name, data) in seeds("model_json") {
        let s = text(&data);
        match ScoreModel::from_json_str(s) {
            Ok(model) => assert_eq!(ScoreModel::from_json_str(&model.to_json_string().unwrap()).unwrap(), model),
            Err(_) => assert_eq!(name, "empty_weights"),
        }
        let _ = model_from_json_str(s);
    }
}

#[test]
fn dataset_seeds() {
    for (name, data) in seeds("dataset_csv") {
        let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
        let (configs, rest) = data.split_at(split);
        let result = AttackDataset::read_csv(configs, rest.get(1..).unwrap_or(&[]), None);
        match result {
            Ok(ds) => {
                let (mut c, mut o) = (Vec::new(), Vec::new());
                ds.write_csv(&mut c, &mut o).unwrap();
                assert_eq!(AttackDataset::read_csv(&c[..], &o[..], None).unwrap(), ds, "{name}");
            }
            Err(_) => assert_eq!(name, "duplicate"),
        }
    }
}

#[test]
fn plan_and_learn_seeds() {
    for (_, data) in seeds("plan_json") {
        PlanResult::from_json_str(text(&data)).unwrap();
    }
    for (_, data) in seeds("learn_result_json") {
        LearnResult::from_json_str(text(&data)).unwrap();
    }
}
