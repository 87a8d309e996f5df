//! Unit conversions. Internally every frequency is an angular frequency in
//! rad/s and every time is in seconds; files and the CLI use GHz (ω/2π) and ns.

use std::f64::consts::TAU;

/// ω/2π in GHz → rad/s.
pub fn ghz(f: f64) -> f64 {
    TAU * f * 1e9
}

/// ω/2π in MHz → rad/s.
pub fn mhz(f: f64) -> f64 {
    TAU * f * 1e6
}

/// rad/s → ω/2π in GHz.
pub fn to_ghz(omega: f64) -> f64 {
    omega / (TAU * 1e9)
}

pub fn ns(t: f64) -> f64 {
    t * 1e-9
}

pub fn ps(t: f64) -> f64 {
    t * 1e-12
}

pub fn to_ns(t: f64) -> f64 {
    t * 1e9
}

pub fn to_ps(t: f64) -> f64 {
    t * 1e12
}

/// Microwave power in dBm → watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
