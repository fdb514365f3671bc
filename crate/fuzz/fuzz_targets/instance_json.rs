#![no_main]
use fdpkit::FdpInstance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = FdpInstance::from_json_str(s) {
        let text = inst.to_json_string().expect("valid instance serializes");
        let back = FdpInstance::from_json_str(&text).expect("serialized instance parses");
        assert_eq!(back, inst);
        let _ = fdpkit::instance::check_feasibility(&inst, inst.actual());
    }
});
