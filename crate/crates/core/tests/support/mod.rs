//! Oracles, fixtures and check bodies shared by the test suites and the
//! acceptance run. Checks panic on violation and return what they measured.
#![allow(dead_code)]

pub mod animator;
pub mod checks;
pub mod gradients;
pub mod oracles;

use sedtalker_core::numeric::{RngStream, Tensor};

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut RngStream) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| scale * rng.normal()).collect()).unwrap()
}

pub fn rand_tensor(rng: &mut RngStream, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.normal()).collect()).unwrap()
}
