#![no_main]
use fdpkit::AttackDataset;
use libfuzzer_sys::fuzz_target;

// configs and observations files separated by a NUL byte
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let (configs, rest) = data.split_at(split);
    let observations = rest.get(1..).unwrap_or(&[]);
    if let Ok(ds) = AttackDataset::read_csv(configs, observations, None) {
        let (mut c, mut o) = (Vec::new(), Vec::new());
        ds.write_csv(&mut c, &mut o).unwrap();
        assert_eq!(AttackDataset::read_csv(&c[..], &o[..], None).unwrap(), ds);
    }
});
