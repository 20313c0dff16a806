//! A miniature comparison study: a few replicates of both scenarios, both
//! models, aggregated into the comparison table.
//!
//! cargo run --release --example small_study -- [replicates]

use osrpc::simulate::{SimulationCase, SimulationConfig};
use osrpc::study::{aggregate, run_study_replicate, TABLE_COLUMNS, column_name};
use osrpc::{Hyperparameters, Mode, SamplerConfig};

fn main() -> osrpc::Result<()> {
    let replicates = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let sampler = SamplerConfig {
        adaptive_iters: 600,
        adaptive_burnin: 300,
        fixed_iters: 1000,
        fixed_burnin: 500,
        thin: 5,
        seed: 9,
        ..Default::default()
    };
    let hyper = Hyperparameters {
        k0: 15,
        ks: 15,
        ..Default::default()
    };
    let mut results = Vec::new();
    for case in [SimulationCase::GlobalOnly, SimulationCase::GlobalLocalHybrid] {
        let sim = SimulationConfig {
            case,
            n_per_subpop: 100,
            p: 30,
            n_replicates: replicates,
            seed: 9,
            ..Default::default()
        };
        for k in 0..replicates {
            results.extend(run_study_replicate(&sim, &[Mode::OsLcm, Mode::OsRpc], &sampler, &hyper, k)?);
            eprintln!("case {} replicate {} done", case.tag(), k + 1);
        }
    }
    let table = aggregate(&results);
    print!("{:28}", "metric");
    for &(mode, case) in &TABLE_COLUMNS {
        print!("{:>10}", column_name(mode, case));
    }
    println!();
    for (name, cells) in &table.rows {
        print!("{name:28}");
        for cell in cells {
            match cell {
                Some(v) => print!("{v:>10.4}"),
                None => print!("{:>10}", "-"),
            }
        }
        println!();
    }
    Ok(())
}
