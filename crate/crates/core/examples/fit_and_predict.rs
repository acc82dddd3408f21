//! Fit the frozen-encoder regressor on a noisy sinusoid and report its point
//! accuracy: random encoder, closed-form ridge readout, no backprop.
//!
//! ```bash
//! cargo run --example fit_and_predict
//! ```

use stochattn::backbone::{fit_readout, forward_deterministic, init_encoder, EncoderConfig};
use stochattn::data::{make_sinusoid, split, SplitSpec};
use stochattn::metrics::point_accuracy;

fn main() {
    let noise_sigma = 0.3;
    let dataset = make_sinusoid(400, (-3.0, 3.0), 2.0, 1.5, noise_sigma, 5).unwrap();
    let spec = SplitSpec {
        train_frac: 0.8,
        cal_frac: 0.1,
        test_frac: 0.1,
        seed: 1,
    };
    let (train, _, test) = split(&dataset, &spec).unwrap();

    let config = EncoderConfig {
        n_layers: 2,
        n_heads: 2,
        d_model: 24,
        d_ff: 48,
        n_tokens: 4,
        seed: 9,
    };
    let model = fit_readout(&init_encoder(&config).unwrap(), &train.cases, 1e-3).unwrap();

    let predictions: Vec<f64> = test
        .cases
        .iter()
        .map(|c| forward_deterministic(&model, c).unwrap())
        .collect();
    let targets: Vec<f64> = test.cases.iter().map(|c| c.target.unwrap()).collect();
    let (rmse, mae) = point_accuracy(&predictions, &targets).unwrap();

    println!("train/test sizes : {}/{}", train.cases.len(), test.cases.len());
    println!("noise sigma      : {noise_sigma}");
    println!("test rmse        : {rmse:.4}   (noise floor ~ {noise_sigma})");
    println!("test mae         : {mae:.4}\n");
    println!("{:>8} {:>10} {:>10}", "x", "target", "prediction");
    for case in test.cases.iter().take(8) {
        println!(
            "{:>8.3} {:>10.4} {:>10.4}",
            case.features[0],
            case.target.unwrap(),
            forward_deterministic(&model, case).unwrap()
        );
    }
}
