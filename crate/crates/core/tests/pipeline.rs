use std::path::Path;

use mnarx::dynamics::{build_ed, build_validation_set, SimConfig, SpringMassParams};
use mnarx::io::{load_manifold, read_ed, read_plan, save_manifold, write_ed};
use mnarx::manifold::{predict_manifold, train_manifold, ChannelSource, ManifoldData, StageInits};

#[test]
fn plan_file_to_reloaded_predictions() {
    let cfg = SimConfig {
        duration: 5.0,
        ..SimConfig::default()
    };
    let params = SpringMassParams::default();
    let dir = tempfile::tempdir().unwrap();
    let ed_dir = dir.path().join("ed");
    write_ed(&ed_dir, 3, &params, &cfg, &build_ed(3, 3, &params, &cfg).unwrap()).unwrap();
    let (_, runs) = read_ed(&ed_dir).unwrap();
    let data: Vec<ManifoldData> = runs.into_iter().map(|(_, s)| ManifoldData::from_series(s)).collect();

    let plan = read_plan(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../plans/spring_mass_mnarx.json")).unwrap();
    let tm = train_manifold(&plan, &data, 0).unwrap();
    assert_eq!(tm.final_model().coefficients().len(), 8);
    assert_eq!(tm.training_log()[1].consumed[1], ("y1".to_string(), ChannelSource::GroundTruth));

    let model_dir = dir.path().join("model");
    save_manifold(&model_dir, &tm).unwrap();
    let loaded = load_manifold(&model_dir).unwrap();
    assert_eq!(loaded.models(), tm.models());

    let val = build_validation_set(2, 3, &params, &cfg).unwrap();
    for run in val {
        let inits = StageInits::from_truth(&tm, &run.series).unwrap();
        let input = ManifoldData::from_series(run.series.select(&["x"]).unwrap());
        let a = predict_manifold(&tm, &input, &inits).unwrap();
        let b = predict_manifold(&loaded, &input, &inits).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.log[1].consumed[1], ("y1".to_string(), ChannelSource::Predicted));
    }
}
