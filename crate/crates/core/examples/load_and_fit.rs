//! Read a survey-style CSV with custom column names, fit osRPC and print
//! the modal pattern of each retained cluster.
//!
//! cargo run --release --example load_and_fit -- [input.csv]

use std::path::PathBuf;

use osrpc::data::{load_csv, CsvSchema};
use osrpc::simulate::{simulate_replicate, SimulationCase, SimulationConfig};
use osrpc::{analyze, fit, ChainRng, Hyperparameters, SamplerConfig};

fn main() -> osrpc::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            // No input given: write a small simulated file and read it back.
            let (data, _) = simulate_replicate(
                &SimulationConfig {
                    case: SimulationCase::GlobalLocalHybrid,
                    n_per_subpop: 150,
                    p: 20,
                    seed: 3,
                    ..Default::default()
                },
                0,
            )?;
            let path = std::env::temp_dir().join("osrpc_example.csv");
            data.write_csv(&path)?;
            path
        }
    };
    let data = load_csv(&path, &CsvSchema::default())?;
    println!(
        "{}: n = {}, p = {}, {} subpopulations, {} outcome levels",
        path.display(),
        data.n(),
        data.p(),
        data.n_subpops(),
        data.n_outcomes()
    );

    let config = SamplerConfig {
        adaptive_iters: 1000,
        adaptive_burnin: 500,
        fixed_iters: 2000,
        fixed_burnin: 1000,
        thin: 5,
        seed: 1,
        ..Default::default()
    };
    let hyper = Hyperparameters {
        k0: 20,
        ks: 20,
        ..Default::default()
    };
    let fitted = fit(&data, &config, &hyper, ChainRng::new(config.seed, 0, 0))?;
    let (_, summary) = analyze(&fitted.trace, &data, fitted.k_active)?;
    println!("retained {} clusters, DIC {:.1}", summary.k, summary.dic);
    for (h, pattern) in summary.modal_patterns.iter().enumerate() {
        let levels: String = pattern.iter().map(|r| (r + 1).to_string()).collect();
        let share = summary.c_hat.iter().filter(|&&c| c == h).count() as f64 / data.n() as f64;
        println!("cluster {} ({:4.1}%): {levels}", h + 1, 100.0 * share);
    }
    Ok(())
}
