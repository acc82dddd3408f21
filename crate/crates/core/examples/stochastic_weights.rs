//! Sample stochastic attention weights at several concentration levels and
//! check the two moment laws against their closed forms: the sample mean
//! stays on the deterministic weights, and the covariance shrinks as 1/nu.
//!
//! ```bash
//! cargo run --example stochastic_weights
//! ```

use stochattn::attention::{
    sample_stochastic_weights, softmax_weights, stochastic_weight_covariance,
    ConcentrationParam, ScoreVector,
};
use stochattn::rng::{domain, substream};

fn main() {
    let scores = ScoreVector::unmasked(vec![1.2, 0.3, -0.4]);
    let pi = softmax_weights(&scores).unwrap();
    println!("deterministic weights: {:?}\n", rounded(pi.weights()));

    let n_draws = 200_000u64;
    for nu_val in [1u64, 4, 16, 64] {
        let nu = ConcentrationParam::new(nu_val).unwrap();
        let mut mean = vec![0.0; 3];
        let mut second = vec![vec![0.0; 3]; 3];
        for i in 0..n_draws {
            let mut rng = substream(42, domain::ATTENTION_ROW, &[nu_val, i]);
            let sample = sample_stochastic_weights(&pi, nu, &mut rng);
            for (a, &w) in sample.weights().iter().enumerate() {
                mean[a] += w;
                for (b, &v) in sample.weights().iter().enumerate() {
                    second[a][b] += w * v;
                }
            }
        }
        for m in &mut mean {
            *m /= n_draws as f64;
        }
        let analytic = stochastic_weight_covariance(&pi, nu);
        println!("nu = {nu_val}");
        println!("  sample mean        : {:?}", rounded(&mean));
        let emp_var: Vec<f64> = (0..3)
            .map(|a| second[a][a] / n_draws as f64 - mean[a] * mean[a])
            .collect();
        let ana_var: Vec<f64> = (0..3).map(|a| analytic[a][a]).collect();
        println!("  empirical variance : {:?}", rounded(&emp_var));
        println!("  (1/nu) closed form : {:?}\n", rounded(&ana_var));
    }
    println!("covariance entries scale as 1/nu; the mean never moves.");
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e5).round() / 1e5).collect()
}
