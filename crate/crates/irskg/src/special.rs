//! Scalar special functions used by the channel model.

use std::f64::consts::PI;

/// Normalized sinc: `sin(pi x) / (pi x)`, with `sinc(0) = 1`.
///
/// This is the convention of the spatial correlation kernel: it vanishes at
/// every nonzero integer, so half-wavelength element spacing gives exactly
/// uncorrelated axis-aligned neighbours.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let px = PI * x;
    px.sin() / px
}

/// Bessel function of the first kind, order zero.
///
/// Used for the inter-node spatial correlation coefficient
/// `rho_ij = J0(2 pi d_ij / lambda)`.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Direct series evaluation of J0, independent of the libm path:
    /// J0(x) = sum_k (-1)^k (x/2)^(2k) / (k!)^2.  Converges quickly for
    /// moderate |x|; used as the oracle for the small-argument table.
    fn j0_series(x: f64) -> f64 {
        let q = x * x / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= -q / ((k * k) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1.0) {
                break;
            }
        }
        sum
    }

    #[test]
    fn sinc_at_zero_and_integers() {
        assert_eq!(sinc(0.0), 1.0);
        for k in 1..=8 {
            assert!(sinc(k as f64).abs() < 1e-15);
            assert!(sinc(-(k as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn sinc_half_is_two_over_pi() {
        // independent value: sin(pi/2)/(pi/2) = 2/pi
        assert_relative_eq!(sinc(0.5), 2.0 / PI, max_relative = 1e-15);
        assert_relative_eq!(sinc(0.5), 0.6366197723675814, max_relative = 1e-15);
    }

    #[test]
    fn j0_matches_series_for_small_arguments() {
        for &x in &[0.0, 0.5, 1.0, 2.0, 3.0, 3.1437, 5.0, 8.0, 12.0] {
            assert_relative_eq!(bessel_j0(x), j0_series(x), epsilon = 1e-12, max_relative = 1e-10);
        }
    }

    #[test]
    fn j0_reference_table() {
        // High-precision reference values (50-digit arithmetic, frozen).
        let table = [
            (0.5, 0.9384698072408129),
            (1.0, 0.76519768655796655),
            (2.0, 0.22389077914123567),
            (2.404825557695773, -6.1087652597367304e-17), // first zero
            (3.1437, -0.30484108384327664),
            (5.520078110286311, -2.7522649432621831e-17), // second zero
            (10.0, -0.24593576445134834),
            (50.0, 0.055812327669251815),
            (100.0, 0.019985850304223122),
            (1467.289, -0.016949755507090694),
        ];
        for (x, want) in table {
            assert_relative_eq!(bessel_j0(x), want, epsilon = 1e-13, max_relative = 1e-9);
        }
    }

    #[test]
    fn j0_even_and_bounded() {
        for i in 0..200 {
            let x = i as f64 * 0.37;
            assert_eq!(bessel_j0(x), bessel_j0(-x));
            assert!(bessel_j0(x).abs() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn j0_asymptotic_envelope() {
        // |J0(x)| <= sqrt(2/(pi x)) (1 + o(1)); allow 5% slack at large x.
        for &x in &[100.0, 500.0, 1467.289, 5000.0] {
            let env = (2.0 / (PI * x)).sqrt();
            assert!(bessel_j0(x).abs() <= env * 1.05);
        }
    }
}
