use abstain_core::datagen::{
    lambda_bar_from_taus, make_lecam_spec, quadrant_mixture_spec, read_feature_csv, sample_process, write_oracle_csv,
    LeCamSpec, ThresholdInstance,
};
use abstain_core::types::{Region, RngSeed};

#[test]
fn oracle_csv_round_trips_for_every_family() {
    let processes = [
        ThresholdInstance::with_lambda_bar(0.3).build().unwrap().to_process().unwrap(),
        quadrant_mixture_spec(0.4, 0.5).unwrap(),
        make_lecam_spec(
            &LeCamSpec {
                d: 6,
                alpha: 0.3,
                lambda_bar: 0.4,
                epsilon: 0.1,
                sigma: None,
            },
            RngSeed(5),
        )
        .unwrap(),
    ];
    for p in &processes {
        let data = sample_process(p, 300, RngSeed(2)).unwrap();
        let mut buf = Vec::new();
        write_oracle_csv(&mut buf, &data).unwrap();
        let back = read_feature_csv(buf.as_slice()).unwrap().to_oracle().unwrap();
        assert_eq!(back, data);
    }
}

#[test]
fn region_mass_matches_alpha() {
    let p = quadrant_mixture_spec(0.3, 0.5).unwrap();
    let data = sample_process(&p, 50_000, RngSeed(8)).unwrap();
    let frac = data.iter().filter(|o| o.region == Region::Informative).count() as f64 / data.len() as f64;
    assert!((frac - 0.3).abs() < 0.01, "{frac}");
}

#[test]
fn tau_pairs_outside_the_mapping_are_rejected() {
    assert!(lambda_bar_from_taus(0.3, 0.5).is_err());
    assert!((lambda_bar_from_taus(0.0, 0.9).unwrap() - 0.5).abs() < 1e-12);
}
