//! Run the pipeline on tabular CSV data instead of the synthetic sinusoid:
//! write a small CSV, point the config at it, and fit + evaluate. Features
//! are standardized from train-split statistics only.
//!
//! ```bash
//! cargo run --release --example tabular_csv
//! ```

use std::io::Write;

use stochattn::pipeline::config::DatasetConfig;
use stochattn::pipeline::{cmd_evaluate, cmd_fit, RunConfig};
use stochattn::rng::{domain, substream};

use rand::Rng;

fn main() {
    let dir = std::env::temp_dir().join("stochattn_tabular");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();

    // A synthetic tabular regression task written as a plain CSV.
    let csv_path = dir.join("toy.csv");
    let mut file = std::fs::File::create(&csv_path).unwrap();
    writeln!(file, "x1,x2,x3,y").unwrap();
    for i in 0..400u64 {
        let mut rng = substream(99, domain::DATA, &[i]);
        let x1: f64 = rng.random::<f64>() * 4.0 - 2.0;
        let x2: f64 = rng.random::<f64>() * 4.0 - 2.0;
        let x3: f64 = rng.random::<f64>() * 4.0 - 2.0;
        let noise: f64 = (rng.random::<f64>() - 0.5) * 1.2;
        let y = (x1 * 1.3).sin() + 0.5 * x2 * x3 + noise;
        writeln!(file, "{x1},{x2},{x3},{y}").unwrap();
    }

    let mut config = RunConfig::default();
    config.dataset = DatasetConfig::Csv {
        path: csv_path.clone(),
        target_column: "y".into(),
        feature_columns: vec!["x1".into(), "x2".into(), "x3".into()],
        standardize: true,
    };
    config.sa.m = 100;

    let fit = cmd_fit(&config, &dir).unwrap();
    println!(
        "fit on {}: test rmse {:.4}, mae {:.4}",
        csv_path.display(),
        fit.test_rmse,
        fit.test_mae
    );

    let eval = cmd_evaluate(&config, &dir.join("model.json"), 64, &dir).unwrap();
    println!("\nnative calibration at nu = 64:");
    for (method, m) in &eval.methods {
        println!("  {method:>13}: W1 {:.4}", m.native_w1);
    }
}
