//! Trains the four classifiers on a labeled synthetic dataset, saves one
//! model and reloads it.

use botflow::classifiers::{fit, ModelFile, ModelKind, ModelSpec};
use botflow::dataset::{train_test_split, FeatureTable};
use botflow::flow::{ingest_reader, MeterConfig};
use botflow::labeling::{label_flows, RuleSet};
use botflow::synth::{generate_synthetic_capture, scenario_dataset, Scenario};

fn main() -> botflow::Result<()> {
    let ds = scenario_dataset(Scenario::Ddos, 200, 200, 5);
    let bytes = generate_synthetic_capture(&ds.blueprints, 5)?;
    let flows = ingest_reader(bytes.as_slice(), &MeterConfig::default())?.flows;
    let (rows, _) = label_flows(&flows, &RuleSet::new(ds.rules), "Normal");
    let cols: Vec<String> = ["Packet Length Mean", "Flow Bytes/s", "SYN Flag Count", "Down/Up Ratio"]
        .map(String::from)
        .to_vec();
    let table = FeatureTable::from_labeled(&rows, "Normal").select(&cols)?;
    let (train, test) = train_test_split(&table, 0.8, 5)?;

    for kind in ModelKind::ALL {
        let model = fit(&ModelSpec::default_for(kind, 5), &train.rows, train.labels()?)?;
        let pred = model.predict(&test.rows)?;
        let hits = pred.iter().zip(test.labels()?).filter(|(p, y)| p == y).count();
        println!("{kind:>3}: {hits}/{} correct", pred.len());
        if kind == ModelKind::RF {
            let path = std::env::temp_dir().join("botflow-rf.json");
            ModelFile::new(model, cols.clone()).save(&path)?;
            ModelFile::load(&path)?;
            println!("     saved to and reloaded from {}", path.display());
        }
    }
    Ok(())
}
