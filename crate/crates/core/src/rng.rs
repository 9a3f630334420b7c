//! Seeded randomness. Every random quantity in the library is drawn from
//! ChaCha8 seeded through `SeedableRng::seed_from_u64`, so a seed fully
//! determines instances, initial points and probe vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::{norm, scale, DenseMatrix, DenseVector};

pub type Prng = ChaCha8Rng;

pub fn prng(seed: u64) -> Prng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(rng: &mut Prng, d: usize) -> DenseVector {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_matrix(rng: &mut Prng, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::from_row_major(rows, cols, data).expect("sizes agree by construction")
}

/// Uniformly distributed point on the unit sphere.
pub fn unit_vector(rng: &mut Prng, d: usize) -> DenseVector {
    loop {
        let v = gaussian_vector(rng, d);
        let n = norm(&v);
        if n > 1e-12 {
            return scale(&v, 1.0 / n);
        }
    }
}

pub fn uniform(rng: &mut Prng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Random orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
pub fn orthogonal_matrix(rng: &mut Prng, d: usize) -> DenseMatrix {
    let g = gaussian_matrix(rng, d, d);
    let mut q: Vec<DenseVector> = Vec::with_capacity(d);
    for i in 0..d {
        let mut v = g.row(i).to_vec();
        for _ in 0..2 {
            for u in &q {
                let c = crate::numerics::dot(&v, u);
                crate::numerics::axpy(&mut v, -c, u);
            }
        }
        let n = norm(&v);
        q.push(scale(&v, 1.0 / n));
    }
    DenseMatrix::from_rows(&q).expect("square by construction")
}
