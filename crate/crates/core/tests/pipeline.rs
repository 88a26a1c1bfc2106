use gaborboost::dataio::{load_dataset, read_feature_table, write_feature_table};
use gaborboost::ebm::{explain_global, load_ensemble, save_ensemble, EbmConfig};
use gaborboost::features::{tabularize, TabularizeConfig};
use gaborboost::harness::{fit_full, run_cv, select, CvConfig, FeatureSet};
use gaborboost::synthgen::{generate, write_output, SynthSpec, GROUND_TRUTH_FILE};
use gaborboost::Execution;

fn small_spec() -> SynthSpec {
    SynthSpec { counts: [30, 20, 10], seed: 3, ..SynthSpec::default() }
}

#[test]
fn written_dataset_loads_back() {
    let out = generate(&small_spec(), Execution::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_output(&out, dir.path()).unwrap();
    assert!(dir.path().join(GROUND_TRUTH_FILE).exists());
    let ds = load_dataset(dir.path(), Execution::Parallel).unwrap();
    assert_eq!(ds.len(), out.dataset.len());
    assert_eq!(ds.labels(), out.dataset.labels());
    assert_eq!(ds.classes(), out.dataset.classes());
    for (a, b) in ds.images().iter().zip(out.dataset.images()) {
        assert_eq!((a.width(), a.height()), (b.width(), b.height()));
        // 16-bit quantization.
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| (x - y).abs() <= 0.5 / 65535.0 + 1e-12));
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn features_track_generator_truth() {
    let spec = SynthSpec { counts: [30, 20, 30], seed: 3, ..SynthSpec::default() };
    let out = generate(&spec, Execution::Parallel).unwrap();
    let tab = tabularize(&out.dataset, &TabularizeConfig::default(), Execution::Parallel).unwrap();
    let h = spec.height as f64;
    let (mut long_bl_br, mut vortex_bl_br) = (Vec::new(), Vec::new());
    for (row, t) in tab.rows.iter().zip(&out.truth) {
        match t.label.as_str() {
            "longitudinal" => {
                assert!((row.x_star - t.dip_column).abs() <= 1.0, "{}: x* {} vs {}", row.id, row.x_star, t.dip_column);
                assert!((row.egf_tl_tr - 1.0).abs() <= 0.1 && (row.egf_bl_br - 1.0).abs() <= 0.1, "{}", row.id);
                long_bl_br.push(row.egf_bl_br);
            }
            "partial" => assert!(row.y_star < h / 2.0, "{}: y* {}", row.id, row.y_star),
            _ => vortex_bl_br.push(row.egf_bl_br),
        }
    }
    assert!((0.9..=1.1).contains(&median(long_bl_br)));
    assert!(median(vortex_bl_br) < 1.0);
}

#[test]
fn table_cv_and_model_round_trip() {
    let out = generate(&small_spec(), Execution::Parallel).unwrap();
    let cfg = TabularizeConfig { with_pf: true, ..TabularizeConfig::default() };
    let tab = tabularize(&out.dataset, &cfg, Execution::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    write_feature_table(&tab.rows, &path).unwrap();
    let back = read_feature_table(&path).unwrap();
    assert_eq!(back.len(), tab.rows.len());
    for (a, b) in back.iter().zip(&tab.rows) {
        assert_eq!((&a.id, &a.label), (&b.id, &b.label));
        for (x, y) in a.numeric_base().iter().zip(b.numeric_base()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    let ebm = EbmConfig { max_rounds: 200, ..EbmConfig::default() };
    for fs in FeatureSet::ALL {
        let cv = CvConfig { feature_set: fs, repeats: 2, k: 3, seed: 1, ebm: ebm.clone() };
        let report = run_cv(&back, &cv, Execution::Parallel).unwrap();
        assert_eq!(report.cells.len(), 6);
        assert!((0.0..=100.0).contains(&report.accuracy.mean));
        assert!(report.text_table().contains(&fs.to_string()));
    }

    let ens = fit_full(&back, FeatureSet::GfEgf, &ebm, Execution::Parallel).unwrap();
    let model_path = dir.path().join("model.json");
    save_ensemble(&ens, &model_path).unwrap();
    let loaded = load_ensemble(&model_path).unwrap();
    let sel = select(&back, FeatureSet::GfEgf).unwrap();
    for row in &sel.rows {
        assert_eq!(loaded.predict(row), ens.predict(row));
    }
    let bundle = explain_global(&loaded);
    assert_eq!(bundle.explanations.len(), 3);
}
