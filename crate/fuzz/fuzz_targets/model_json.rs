#![no_main]
use fdpkit::ScoreModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(model) = ScoreModel::from_json_str(s) {
        let text = model.to_json_string().unwrap();
        assert_eq!(ScoreModel::from_json_str(&text).unwrap(), model);
    }
    let _ = fdpkit::learning::model_from_json_str(s);
});
