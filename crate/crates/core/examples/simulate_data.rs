//! Simulate one replicate of each scenario, write the CSV and truth files
//! and print a few marginal checks.
//!
//! cargo run --example simulate_data -- [out_dir] [seed]

use std::path::PathBuf;

use osrpc::simulate::{simulate_replicate, SimulationCase, SimulationConfig};

fn main() -> osrpc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.first().map_or("simulated", String::as_str));
    let seed = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    std::fs::create_dir_all(&out).map_err(|e| osrpc::Error::io(&out, e))?;

    for case in [SimulationCase::GlobalOnly, SimulationCase::GlobalLocalHybrid] {
        let config = SimulationConfig {
            case,
            n_per_subpop: 300,
            seed,
            ..Default::default()
        };
        let (data, truth) = simulate_replicate(&config, 0)?;
        let csv = out.join(format!("rep1_{}.csv", case.tag()));
        data.write_csv(&csv)?;
        truth.write_json(&out.join(format!("rep1_{}.truth.json", case.tag())))?;

        let sizes: Vec<usize> = (0..truth.n_patterns())
            .map(|t| truth.true_c.iter().filter(|&&c| c == t).count())
            .collect();
        let local = truth.true_g.iter().flatten().filter(|&&g| !g).count();
        println!("case {}: wrote {}", case.tag(), csv.display());
        println!("  pattern sizes {sizes:?}, local (variable, subpop) cells {local}");
        for s in 0..data.n_subpops() {
            let top = (0..data.n())
                .filter(|&i| data.subpop(i) == s && data.outcome(i) == 2)
                .count() as f64
                / data.subpop_sizes()[s] as f64;
            println!("  subpop {}: Pr(y = 3) = {top:.3}", s + 1);
        }
    }
    Ok(())
}
