//! Thin wrappers over libm so numeric results are identical with and
//! without the `std` feature.

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Round half away from zero (used to snap trace offsets to samples).
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}
