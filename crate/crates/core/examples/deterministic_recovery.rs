//! Watch the stochastic forward pass collapse onto the deterministic one as
//! the concentration parameter grows: the output deviation shrinks at the
//! canonical 1/sqrt(nu) rate.
//!
//! ```bash
//! cargo run --example deterministic_recovery
//! ```

use stochattn::attention::ConcentrationParam;
use stochattn::backbone::{
    fit_readout, forward_deterministic, forward_stochastic, init_encoder, EncoderConfig,
    InputCase,
};

fn main() {
    let config = EncoderConfig {
        n_layers: 2,
        n_heads: 2,
        d_model: 16,
        d_ff: 32,
        n_tokens: 4,
        seed: 11,
    };
    let train: Vec<InputCase> = (0..60)
        .map(|i| {
            let x = i as f64 * 0.1 - 3.0;
            InputCase::new(vec![x], Some(2.0 * (1.5 * x).sin()))
        })
        .collect();
    let model = fit_readout(&init_encoder(&config).unwrap(), &train, 1e-3)
        .unwrap()
        .with_all_layers_stochastic();

    let input = InputCase::new(vec![0.4], None);
    let det = forward_deterministic(&model, &input).unwrap();
    println!("deterministic output: {det:.6}\n");
    println!("{:>10}  {:>12}  {:>12}", "nu", "median |dev|", "x sqrt(nu)");

    for nu_val in [1u64, 10, 100, 1_000, 10_000] {
        let nu = ConcentrationParam::new(nu_val).unwrap();
        let mut devs: Vec<f64> = (0..1000u64)
            .map(|pass| {
                let y = forward_stochastic(&model, &input, nu, pass, 77).unwrap();
                (y - det).abs()
            })
            .collect();
        devs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (devs[499] + devs[500]);
        println!(
            "{nu_val:>10}  {median:>12.6}  {:>12.4}",
            median * (nu_val as f64).sqrt()
        );
    }
    println!("\nthe last column is roughly constant: deviation ~ c / sqrt(nu).");
}
