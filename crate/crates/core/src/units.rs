//! Boundary conversions between ordinary frequency (GHz) and angular
//! frequency (rad/ns).

use std::f64::consts::PI;

pub fn ghz_to_rad_ns(f_ghz: f64) -> f64 {
    2.0 * PI * f_ghz
}

pub fn rad_ns_to_ghz(w: f64) -> f64 {
    w / (2.0 * PI)
}

pub fn ps_to_ns(t_ps: f64) -> f64 {
    t_ps * 1e-3
}

pub fn ns_to_ps(t_ns: f64) -> f64 {
    t_ns * 1e3
}
