//! Turn repeated stochastic passes into a predictive distribution: draw an
//! ensemble, read its CDF, and extract central intervals at several levels.
//!
//! ```bash
//! cargo run --example predictive_ensembles
//! ```

use stochattn::attention::ConcentrationParam;
use stochattn::backbone::{fit_readout, init_encoder, EncoderConfig, InputCase};
use stochattn::data::{make_sinusoid, split, SplitSpec};
use stochattn::ensemble::{central_interval, draw_ensemble, empirical_cdf};

fn main() {
    let dataset = make_sinusoid(400, (-3.0, 3.0), 2.0, 1.5, 0.38, 5).unwrap();
    let spec = SplitSpec {
        train_frac: 0.8,
        cal_frac: 0.1,
        test_frac: 0.1,
        seed: 1,
    };
    let (train, _, _) = split(&dataset, &spec).unwrap();
    let config = EncoderConfig {
        n_layers: 2,
        n_heads: 2,
        d_model: 24,
        d_ff: 48,
        n_tokens: 4,
        seed: 9,
    };
    let model = fit_readout(&init_encoder(&config).unwrap(), &train.cases, 1e-3)
        .unwrap()
        .with_all_layers_stochastic();

    let input = InputCase::new(vec![0.8], None);
    let nu = ConcentrationParam::new(512).unwrap();
    let ensemble = draw_ensemble(&model, &input, nu, 500, 123).unwrap();

    println!("method           : {} ({})", ensemble.meta.method, ensemble.meta.params);
    println!("samples          : {}", ensemble.len());
    println!("deterministic    : {:.4}", ensemble.deterministic_value);
    println!("ensemble mean    : {:.4}", ensemble.mean());

    println!("\nempirical CDF around the deterministic value:");
    for delta in [-0.6, -0.3, 0.0, 0.3, 0.6] {
        let point = ensemble.deterministic_value + delta;
        println!(
            "  F({point:>7.4}) = {:.3}",
            empirical_cdf(&ensemble, point)
        );
    }

    println!("\ncentral intervals (type-7 quantiles):");
    for level in [0.5, 0.8, 0.95] {
        let (lo, hi) = central_interval(&ensemble, level);
        println!("  {:>4.0}%: [{lo:>8.4}, {hi:>8.4}]  width {:.4}", level * 100.0, hi - lo);
    }
}
