//! Stop a fixed-phase chain halfway, checkpoint it to disk, resume it and
//! check that the trace matches an uninterrupted run.
//!
//! cargo run --release --example checkpoint_resume

use osrpc::simulate::{simulate_replicate, SimulationConfig};
use osrpc::{run_adaptive, ChainRng, FixedSampler, Hyperparameters, Mode, SamplerConfig};

fn main() -> osrpc::Result<()> {
    let (data, _) = simulate_replicate(
        &SimulationConfig {
            n_per_subpop: 60,
            p: 20,
            seed: 4,
            ..Default::default()
        },
        0,
    )?;
    let config = SamplerConfig {
        mode: Mode::OsRpc,
        adaptive_iters: 300,
        adaptive_burnin: 150,
        fixed_iters: 400,
        fixed_burnin: 100,
        thin: 5,
        seed: 4,
        ..Default::default()
    };
    let hyper = Hyperparameters {
        k0: 10,
        ks: 10,
        ..Default::default()
    };
    let mut rng = ChainRng::new(config.seed, 0, 0);
    let adaptive = run_adaptive(&data, &config, &hyper, &mut rng)?;
    println!("adaptive phase kept K = {}", adaptive.k_active);

    let mut straight = FixedSampler::new(adaptive.state.clone(), rng.clone(), config.clone(), hyper.clone())?;
    straight.run_until(&data, config.fixed_iters)?;

    let path = std::env::temp_dir().join("osrpc_checkpoint.json");
    let mut first = FixedSampler::new(adaptive.state, rng, config.clone(), hyper)?;
    first.run_until(&data, 173)?;
    first.save_checkpoint(&path)?;
    drop(first);
    let mut resumed = FixedSampler::load_checkpoint(&path)?;
    println!("resumed at iteration {}", resumed.iteration);
    resumed.run_until(&data, config.fixed_iters)?;

    let (a, b) = (straight.finish(&data), resumed.finish(&data));
    println!("{} draws each, identical: {}", a.len(), a == b);
    Ok(())
}
