//! Solves a few assignment problems with both solvers and checks them
//! against exhaustive search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tripleset::assignment::{brute_force_assignment, hungarian, hungarian_line_cover, CostMatrix};

fn main() -> tripleset::Result<()> {
    let c = CostMatrix::new(vec![
        vec![4.0, 1.0, 3.0],
        vec![2.0, 0.0, 5.0],
        vec![3.0, 2.0, 2.0],
    ])?;
    let a = hungarian(&c);
    println!("permutation {:?}, cost {}", a.permutation, a.total_cost);

    // Ties resolve to the lexicographically smallest optimal permutation.
    let ties = CostMatrix::from_flat(3, vec![0.0; 9])?;
    println!("all-zero matrix -> {:?}", hungarian(&ties).permutation);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for m in 1..=8 {
        let c = CostMatrix::from_flat(m, (0..m * m).map(|_| rng.random_range(-10.0..10.0)).collect())?;
        let best = brute_force_assignment(&c)?.total_cost;
        worst = worst
            .max((hungarian(&c).total_cost - best).abs())
            .max((hungarian_line_cover(&c).total_cost - best).abs());
    }
    println!("largest gap to brute force for m = 1..=8: {worst:e}");
    Ok(())
}
