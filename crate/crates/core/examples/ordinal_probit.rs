//! The probit block on its own: generate ordinal outcomes from known
//! coefficients and recover them by data augmentation.
//!
//! cargo run --release --example ordinal_probit

use nalgebra::DMatrix;
use osrpc::data::DesignMatrix;
use osrpc::probit::{draw_z, initial_delta, update_delta, update_xi, ProbitState};
use osrpc::stats::{sample_truncnorm, RngStream, TruncationBounds};
use rand::Rng;

fn main() -> osrpc::Result<()> {
    let mut rng = RngStream::new(11, 0);
    let (n, q) = (3000, 3);
    let true_xi = [-0.5, 0.4, 1.2];
    let true_delta = [0.0, 0.8];

    // Three groups, one indicator column each.
    let groups: Vec<usize> = (0..n).map(|_| rng.random_range(0..q)).collect();
    let mut w = vec![0.0; n * q];
    groups.iter().enumerate().for_each(|(i, &g)| w[i * q + g] = 1.0);
    let design = DesignMatrix::from_dense(n, q, q, w)?;
    let y: Vec<usize> = groups
        .iter()
        .map(|&g| {
            let z = sample_truncnorm(true_xi[g], 1.0, TruncationBounds::unbounded(), &mut rng).unwrap();
            true_delta.iter().filter(|&&d| z > d).count()
        })
        .collect();

    let mut probit = ProbitState {
        z: vec![0.0; n],
        xi: vec![0.0; q],
        delta: initial_delta(&y, 3),
        s0: 1.0,
    };
    let sigma0 = DMatrix::identity(q, q) * 10.0;
    let (burn, keep) = (1000, 4000);
    let mut sums = vec![0.0; q + 2];
    for t in 0..burn + keep {
        draw_z(&mut probit, &design, &y, &mut rng)?;
        update_xi(&mut probit, &design, &[0.0; 3], &sigma0, &mut rng)?;
        update_delta(&mut probit, &y, &mut rng)?;
        if t >= burn {
            // Only differences to the first boundary are identified.
            let shift = probit.delta[0];
            for (sum, xi) in sums.iter_mut().zip(&probit.xi) {
                *sum += xi - shift;
            }
            sums[q] += probit.delta[1] - shift;
        }
    }
    println!("coefficient  truth  posterior mean (relative to the first boundary)");
    for c in 0..q {
        println!("xi{}         {:5.2}  {:5.2}", c + 1, true_xi[c], sums[c] / keep as f64);
    }
    println!("delta2       {:5.2}  {:5.2}", true_delta[1], sums[q] / keep as f64);
    Ok(())
}
