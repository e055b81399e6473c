use crate::error::{Error, Result};

use super::scaling::standardize;

/// Orientation for `(precipitation, signed freezing index)`: wetter winters
/// and colder winters (more negative freezing index) score positive.
pub const FLOOD_FAVORABLE: [f64; 2] = [1.0, -1.0];

/// First principal component of two series.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalComponent {
    pub scores: Vec<f64>,
    /// Unit loading vector on the standardized inputs.
    pub loading: [f64; 2],
    /// Sample Pearson correlation of the inputs.
    pub correlation: f64,
    /// Eigenvalues of the correlation matrix, largest first.
    pub eigenvalues: [f64; 2],
    /// Share of total variance carried by the first component.
    pub variance_share: f64,
}

/// First principal component of two series from the eigen-decomposition of
/// their 2×2 correlation matrix `[[1, r], [r, 1]]`.
///
/// The eigenvalues are `1 ± |r|` with leading eigenvector
/// `(1, sign r) / √2`. The sign of the loading is chosen so that
/// `loading · orientation > 0`; when that product is zero the first
/// component of the loading is made positive.
pub fn first_pc(x1: &[f64], x2: &[f64], orientation: [f64; 2]) -> Result<PrincipalComponent> {
    if x1.len() != x2.len() {
        return Err(Error::LengthMismatch { expected: x1.len(), got: x2.len() });
    }
    if x1.len() < 3 {
        return Err(Error::InvalidArgument("first_pc needs at least 3 observations".into()));
    }
    let z1 = standardize(x1, x1)?;
    let z2 = standardize(x2, x2)?;
    let n = z1.len() as f64;
    let r = (z1.iter().zip(&z2).map(|(a, b)| a * b).sum::<f64>() / (n - 1.0)).clamp(-1.0, 1.0);

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut loading = [h, if r < 0.0 { -h } else { h }];
    let dot = loading[0] * orientation[0] + loading[1] * orientation[1];
    if dot < 0.0 || (dot == 0.0 && loading[0] < 0.0) {
        loading = [-loading[0], -loading[1]];
    }

    let scores = z1.iter().zip(&z2).map(|(a, b)| loading[0] * a + loading[1] * b).collect();
    Ok(PrincipalComponent {
        scores,
        loading,
        correlation: r,
        eigenvalues: [1.0 + r.abs(), 1.0 - r.abs()],
        variance_share: (1.0 + r.abs()) / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pair with sample correlation exactly `r`: z2 = r z1 + sqrt(1 - r²) u
    /// with u orthogonal to z1 and both standardized.
    fn pair_with_correlation(r: f64) -> (Vec<f64>, Vec<f64>) {
        let a = [1.0, -1.0, 0.0, 2.0, -2.0, 0.5, -0.5];
        let b = [0.3, 0.8, -1.1, -0.2, 0.4, 1.3, -1.5];
        let za = standardize(&a, &a).unwrap();
        let zb0 = standardize(&b, &b).unwrap();
        let n = za.len() as f64;
        let c = za.iter().zip(&zb0).map(|(x, y)| x * y).sum::<f64>() / (n - 1.0);
        let u: Vec<f64> = zb0.iter().zip(&za).map(|(y, x)| y - c * x).collect();
        let zu = standardize(&u, &u).unwrap();
        let s = (1.0 - r * r).sqrt();
        let z2 = za.iter().zip(&zu).map(|(x, y)| r * x + s * y).collect();
        (za, z2)
    }

    #[test]
    fn correlation_minus_point_six_gives_eighty_percent() {
        let (x1, x2) = pair_with_correlation(-0.60);
        let pc = first_pc(&x1, &x2, FLOOD_FAVORABLE).unwrap();
        assert!((pc.correlation + 0.60).abs() < 1e-12);
        assert!((pc.variance_share - 0.80).abs() < 1e-12);
        // wet + cold direction is positive
        assert!(pc.loading[0] > 0.0 && pc.loading[1] < 0.0);
    }

    #[test]
    fn uncorrelated_gives_half() {
        let (x1, x2) = pair_with_correlation(0.0);
        let pc = first_pc(&x1, &x2, FLOOD_FAVORABLE).unwrap();
        assert!((pc.variance_share - 0.5).abs() < 1e-12);
        assert!(pc.loading[0] > 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            first_pc(&[1.0, 2.0, 3.0], &[1.0, 2.0], FLOOD_FAVORABLE),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn pc1_variance_matches_characteristic_polynomial() {
        let x1 = [3.1, 2.2, 5.0, 4.4, 1.0, 2.8, 3.9, 4.1, 0.5, 2.0];
        let x2 = [-1.0, -0.2, -2.5, -1.1, 0.9, -0.4, -1.7, -2.2, 1.4, 0.1];
        let pc = first_pc(&x1, &x2, FLOOD_FAVORABLE).unwrap();

        // covariance matrix of the standardized data, then
        // λ = (tr ± sqrt(tr² - 4 det)) / 2
        let z1 = standardize(&x1, &x1).unwrap();
        let z2 = standardize(&x2, &x2).unwrap();
        let n = z1.len() as f64;
        let cov = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (n - 1.0);
        let (a, b, c) = (cov(&z1, &z1), cov(&z1, &z2), cov(&z2, &z2));
        let tr = a + c;
        let det = a * c - b * b;
        let lmax = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;

        let mean = pc.scores.iter().sum::<f64>() / n;
        let var = pc.scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - lmax).abs() < 1e-12, "{var} vs {lmax}");
        assert!((pc.eigenvalues[0] - lmax).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pc_invariants(
            x1 in prop::collection::vec(-5f64..5.0, 5..40),
            noise in prop::collection::vec(-5f64..5.0, 40),
            mix in -1f64..1.0,
        ) {
            let x2: Vec<f64> = x1.iter().zip(&noise).map(|(a, e)| mix * a + e).collect();
            prop_assume!(standardize(&x1, &x1).is_ok() && standardize(&x2, &x2).is_ok());
            let pc = first_pc(&x1, &x2, FLOOD_FAVORABLE).unwrap();
            let norm = (pc.loading[0].powi(2) + pc.loading[1].powi(2)).sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            prop_assert!((pc.eigenvalues[0] + pc.eigenvalues[1] - 2.0).abs() < 1e-12);
            prop_assert!((0.5..=1.0).contains(&pc.variance_share));
            let mean = pc.scores.iter().sum::<f64>() / pc.scores.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((pc.variance_share - (1.0 + pc.correlation.abs()) / 2.0).abs() < 1e-12);
        }
    }
}
