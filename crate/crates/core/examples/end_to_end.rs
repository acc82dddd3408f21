//! The full pipeline through the library API: fit, calibrate, evaluate,
//! sweep, report — identical to running the `stochattn` binary's
//! subcommands, writing every artifact into one run directory.
//!
//! ```bash
//! cargo run --release --example end_to_end
//! ```

use stochattn::pipeline::{
    cmd_calibrate, cmd_evaluate, cmd_fit, cmd_report, cmd_sweep_nu, RunConfig,
};

fn main() {
    let mut config = RunConfig::default();
    // Trimmed budgets so the demo finishes quickly.
    config.sa.k = 10;
    config.sa.m = 100;

    let dir = std::env::temp_dir().join("stochattn_end_to_end");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    println!("run directory: {}\n", dir.display());

    let fit = cmd_fit(&config, &dir).unwrap();
    println!(
        "[fit]       test rmse {:.4}, mae {:.4} ({} train cases)",
        fit.test_rmse, fit.test_mae, fit.n_train
    );

    let model_path = dir.join("model.json");
    let cal = cmd_calibrate(&config, &model_path, &dir).unwrap();
    println!(
        "[calibrate] nu* = {} after {} BO iterations (s0 = {:.4})",
        cal.nu_star, cal.iterations, cal.s0
    );

    let eval = cmd_evaluate(&config, &model_path, cal.nu_star, &dir).unwrap();
    println!("[evaluate]  native W1 per method:");
    for (method, m) in &eval.methods {
        println!(
            "              {method:>13}: {:.4} native, {:.4} scaled (tau {:.2})",
            m.native_w1, m.scaled_w1, m.tau
        );
    }

    let sweep_nus: Vec<u64> = vec![1, 4, 16, 64, 256, 1024];
    cmd_sweep_nu(&config, &model_path, &sweep_nus, &dir).unwrap();
    println!("[sweep-nu]  wrote sweep_nu.csv over {sweep_nus:?}");

    cmd_report(&config, &dir.join("calibration_trace.jsonl"), &dir).unwrap();
    println!("[report]    wrote surrogate_landscape.csv\n");

    println!("artifacts:");
    let manifest = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    for (path, _) in parsed["artifacts"].as_object().unwrap() {
        println!("  {path}");
    }
}
