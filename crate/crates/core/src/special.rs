//! Special functions.

use std::f64::consts::PI;

const SERIES_CUTOFF: f64 = 15.0;

/// Exponentially scaled modified Bessel function `e^{-x} I_0(x)`, `x >= 0`.
///
/// Below `x = 15` the power series `sum (x^2/4)^k / (k!)^2` is summed (all
/// terms positive, no cancellation) and scaled. Above it the large-argument
/// expansion `(2 pi x)^{-1/2} sum_k ((2k-1)!!)^2 / (k! (8x)^k)` is summed
/// until its terms stop decreasing; at `x = 15` the smallest term is below
/// `1e-12` relative.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    assert!(x >= 0.0, "bessel_i0_scaled needs x >= 0, got {x}");
    if x < SERIES_CUTOFF {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        let inv = 1.0 / (8.0 * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            let odd = (2 * k - 1) as f64;
            let next = term * odd * odd * inv / k as f64;
            if next >= term {
                break;
            }
            term = next;
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        sum / (2.0 * PI * x).sqrt()
    }
}
