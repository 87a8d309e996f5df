//! Bessel functions of the first kind for the sideband weights of a
//! frequency-modulated emitter.

/// `J_n(x)` for integer order, via the ascending power series.
///
/// Accurate to ~1e-14 for |x| ≲ 20, which covers every modulation index the
/// toolkit deals with (χ = g/ω_SAW < 2).
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let order = n.unsigned_abs();
    // J_{-n}(x) = (-1)^n J_n(x)
    let sign = if n < 0 && order % 2 == 1 { -1.0 } else { 1.0 };
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=order {
        term *= half / k as f64;
    }
    let mut sum = term;
    let q = -half * half;
    for k in 1..200u32 {
        term *= q / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sign * sum
}
