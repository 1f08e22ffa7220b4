//! Shared fixtures for the benchmarks.

use sedtalker_core::animator::VertexSequence;
use sedtalker_core::numeric::{RngStream, Tensor};

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = RngStream::new(seed);
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).expect("shape matches data")
}

/// Values in (0, 1), as the scan decays and gates expect.
pub fn random_gates(rows: usize, cols: usize, seed: u64) -> Tensor {
    random_matrix(rows, cols, seed).map(|v| 1.0 / (1.0 + (-v).exp()))
}

pub fn random_mesh(frames: usize, vertices: usize, seed: u64) -> VertexSequence {
    let flat = random_matrix(frames, 3 * vertices, seed);
    VertexSequence::from_flat(30.0, flat).expect("T×3N layout")
}

/// Frame labels that agree with the truth about 80% of the time.
pub fn noisy_labels(frames: usize, classes: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = RngStream::new(seed);
    let truth: Vec<usize> = (0..frames).map(|_| rng.below(classes)).collect();
    let pred = truth.iter().map(|&t| if rng.next_f64() < 0.8 { t } else { rng.below(classes) }).collect();
    (pred, truth)
}
