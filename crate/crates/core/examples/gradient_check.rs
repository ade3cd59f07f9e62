//! Compares the analytic NT-Xent gradient with central differences.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use sadcluster::contrastive::{nt_xent, nt_xent_loss};
use sadcluster::rng::StreamRng;

fn main() -> sadcluster::Result<()> {
    let mut rng = StreamRng::seed_from_u64(0);
    let h = 1e-5;
    for (pairs, dim, tau) in [(2, 3, 0.1), (3, 8, 0.5), (4, 8, 1.0)] {
        let x = Array2::from_shape_fn((2 * pairs, dim), |_| rng.random_range(-1.0..1.0));
        let (loss, grad) = nt_xent(&x, tau)?;
        let mut worst = 0.0f64;
        for idx in 0..x.len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus.as_slice_mut().unwrap()[idx] += h;
            minus.as_slice_mut().unwrap()[idx] -= h;
            let numeric = (nt_xent_loss(&plus, tau)? - nt_xent_loss(&minus, tau)?) / (2.0 * h);
            worst = worst.max((numeric - grad.as_slice().unwrap()[idx]).abs());
        }
        println!("B={pairs} d={dim} tau={tau}: loss {loss:.6}, max abs gradient error {worst:.2e}");
    }
    Ok(())
}
