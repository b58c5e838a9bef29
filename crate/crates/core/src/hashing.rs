//! Content hashes used to tie output files to their inputs.

use sha2::{Digest, Sha256};

use crate::linalg::ComplexMatrix;
use crate::quadrature::QuadratureRule;

fn finish(h: Sha256) -> String {
    hex::encode(h.finalize())
}

pub fn bytes_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    finish(h)
}

/// Hash of shape and exact bit patterns of a matrix.
pub fn matrix_hash(m: &ComplexMatrix) -> String {
    let mut h = Sha256::new();
    h.update((m.rows() as u64).to_le_bytes());
    h.update((m.cols() as u64).to_le_bytes());
    for z in m.as_slice() {
        h.update(z.re.to_bits().to_le_bytes());
        h.update(z.im.to_bits().to_le_bytes());
    }
    finish(h)
}

pub fn rule_hash(rule: &QuadratureRule) -> String {
    bytes_hash(rule.to_csv().as_bytes())
}
