use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::numkit::Array;

/// Uniform Xavier initialisation.
pub(crate) fn init_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Array::new(vec![rows, cols], data).unwrap()
}

pub(crate) fn ones(len: usize) -> Array {
    Array::new(vec![len], vec![1.0; len]).unwrap()
}
