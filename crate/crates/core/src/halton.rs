//! Halton low-discrepancy sequence.

/// Radical inverse of `index` in the given prime `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// 2D Halton point (bases 2 and 3). Index 0 maps to the origin, so callers
/// usually start at 1.
pub fn halton2(index: u64) -> [f64; 2] {
    [radical_inverse(index, 2), radical_inverse(index, 3)]
}
