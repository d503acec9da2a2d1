//! In-place Walsh-Hadamard butterflies over `2^L` arrays.
//!
//! Unnormalized: `out[z] = sum_m in[m] (-1)^{popcount(z & m)}`. Applying it
//! twice multiplies by the array length.

use num_complex::Complex64;
use std::ops::{Add, Sub};

fn transform<T: Copy + Add<Output = T> + Sub<Output = T>>(data: &mut [T]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "length must be a power of two");
    let mut half = 1;
    while half < n {
        for block in data.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half <<= 1;
    }
}

pub fn fwht_real(data: &mut [f64]) {
    transform(data)
}

pub fn fwht_complex(data: &mut [Complex64]) {
    transform(data)
}
