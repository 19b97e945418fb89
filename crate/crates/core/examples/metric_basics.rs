//! Registering points, distances and fractional connection costs.

use anyhow::Result;
use olkm::{FractionalSolution, MetricRegistry};

fn main() -> Result<()> {
    let mut reg = MetricRegistry::euclidean(2);
    let a = reg.insert(&[0.0, 0.0])?;
    let b = reg.insert(&[3.0, 4.0])?;
    let c = reg.insert(&[6.0, 0.0])?;
    // inserting the same coordinates again returns the existing id
    assert_eq!(reg.insert(&[3.0, 4.0])?, b);

    println!("d(a, b) = {}", reg.distance(a, b)?);
    println!("aspect ratio = {:.3}", reg.aspect_ratio()?);

    let y = FractionalSolution::new(1, vec![a, c], vec![0.5, 0.5]);
    let fa = reg.fractional_assignment(&y, b)?;
    println!(
        "D(y, b) = {} with threshold {} via {:?}",
        fa.cost, fa.threshold, fa.alpha
    );

    let explicit = MetricRegistry::from_matrix(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]])?;
    println!("explicit metric with {} points", explicit.len());
    Ok(())
}
