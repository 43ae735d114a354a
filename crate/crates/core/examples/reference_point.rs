//! Prints per-objective minima of PointWalker over random policies.
//!
//! `cargo run --release -p moqd-core --example reference_point [samples] [seed]`

use moqd_core::envs::{EnvConfig, Task};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), moqd_core::Error> {
    let mut args = std::env::args().skip(1);
    let samples: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10_000);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let task = Task::from_config(&EnvConfig::pointwalker())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = vec![f64::INFINITY; task.num_objectives()];
    let mut hi = vec![f64::NEG_INFINITY; task.num_objectives()];
    for _ in 0..samples {
        let r = task.evaluate(&task.random_genotype(&mut rng))?;
        for (j, s) in r.scores.iter().enumerate() {
            lo[j] = lo[j].min(*s);
            hi[j] = hi[j].max(*s);
        }
    }
    println!("samples {samples}");
    println!("min {lo:?}");
    println!("max {hi:?}");
    Ok(())
}
