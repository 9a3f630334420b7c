//! Shared fixtures for the benchmarks.

use haldual::operators::{nonexpansive_from_monotone, ouyang_xu, random_linear_monotone};
use haldual::rng::{prng, unit_vector};
use haldual::{DenseVector, NonexpansiveMap, SaddleProblem};

/// Worst-case bilinear instance of size `n` with a seeded unit start.
pub fn bilinear_fixture(n: usize) -> (SaddleProblem, DenseVector) {
    let p = ouyang_xu(n, 0.0).expect("valid size");
    let x0 = unit_vector(&mut prng(1), p.dim());
    (p, x0)
}

/// `T = 2 J_A - I` for a random affine monotone `A` of dimension `d`, with a seeded unit start.
pub fn fixed_point_fixture(d: usize) -> (SaddleProblem, NonexpansiveMap, DenseVector) {
    let p = random_linear_monotone(d, 7, 0.0, true).expect("valid size");
    let t = nonexpansive_from_monotone(&p.grad, 1.0).expect("affine map has a resolvent");
    let y0 = unit_vector(&mut prng(1), d);
    (p, t, y0)
}
