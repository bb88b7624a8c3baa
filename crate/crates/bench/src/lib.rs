//! Shared fixtures for the benchmarks.

use qpc_core::localization::centered_energy;
use qpc_core::{Frequency, TrigPolynomial};

pub fn golden() -> f64 {
    Frequency::golden().to_f64()
}

/// A degree-two potential with complex coefficients.
pub fn two_mode() -> TrigPolynomial {
    use qpc_core::Complex64 as C;
    TrigPolynomial::from_nonneg(&[C::new(0.3, 0.0), C::new(0.4, 0.1), C::new(0.7, -0.2)]).unwrap()
}

/// AMO λ = 1/2 energy with an eigenvector centred at the origin for θ = 0.3.
pub fn amo_energy() -> f64 {
    centered_energy(&TrigPolynomial::amo(0.5), golden(), 0.3, 0.0, 2.0, 150).unwrap()
}
