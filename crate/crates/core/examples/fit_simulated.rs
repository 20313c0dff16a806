//! Simulate one replicate, fit osRPC and osLCM with a shortened schedule and
//! score both against the truth.
//!
//! cargo run --release --example fit_simulated -- [A|B] [n_per_subpop] [seed]

use std::time::Instant;

use osrpc::simulate::{simulate_replicate, SimulationCase, SimulationConfig};
use osrpc::study::fit_and_summarize;
use osrpc::{evaluate, Hyperparameters, Mode, SamplerConfig};

fn main() -> osrpc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let case: SimulationCase = args.first().map_or("B", String::as_str).parse()?;
    let n_per_subpop = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);

    let sim = SimulationConfig {
        case,
        n_per_subpop,
        seed,
        ..Default::default()
    };
    let (data, truth) = simulate_replicate(&sim, 0)?;
    println!("case {}: n = {}, p = {}", case.tag(), data.n(), data.p());

    for mode in [Mode::OsLcm, Mode::OsRpc] {
        let config = SamplerConfig {
            mode,
            seed,
            adaptive_iters: 2000,
            adaptive_burnin: 1000,
            fixed_iters: 5000,
            fixed_burnin: 3000,
            thin: 5,
            ..Default::default()
        };
        let start = Instant::now();
        let (fit, summary) = fit_and_summarize(&data, &config, &Hyperparameters::default(), 0)?;
        let m = evaluate(&summary, &truth, &data)?;
        println!(
            "{:6} K = {} ({:.1}s)  classification {:?}  P(Y) MSE {:.4}  Y_ord {:.3}  nu MSE {}  DIC {:.0}",
            mode.name(),
            fit.k_active,
            start.elapsed().as_secs_f64(),
            m.pattern_classification
                .iter()
                .map(|r| format!("{r:.3}"))
                .collect::<Vec<_>>(),
            m.p_y_mse,
            m.y_ord,
            m.nu_mse.map_or("-".into(), |v| format!("{v:.4}")),
            m.dic,
        );
    }
    Ok(())
}
