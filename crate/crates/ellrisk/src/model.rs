//! The distribution object (location, scale matrix, family), SPD matrix
//! square roots, marginal densities/CDFs/quantiles, band standardization,
//! and normal-family maximum likelihood fitting.

use crate::error::{EllError, Result};
use crate::generator::{FamilyKind, GeneratorFamily, GeneratorKind};
use crate::quad;
use crate::special;
use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

/// Per-component probability band; `p = 0` and `q = 1` are explicit limit
/// markers for infinite bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationBand {
    p: Vec<f64>,
    q: Vec<f64>,
}

impl TruncationBand {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() || p.is_empty() {
            return Err(EllError::InvalidBand(
                "p and q must be non-empty, equal length".into(),
            ));
        }
        for (k, (&pk, &qk)) in p.iter().zip(&q).enumerate() {
            if !(0.0..1.0).contains(&pk) || !(qk > 0.0 && qk <= 1.0) {
                return Err(EllError::InvalidBand(format!(
                    "component {k}: need p in [0,1) and q in (0,1], got ({pk}, {qk})"
                )));
            }
            if pk >= qk {
                return Err(EllError::InvalidBand(format!(
                    "component {k}: need p < q, got ({pk}, {qk})"
                )));
            }
        }
        Ok(Self { p, q })
    }

    /// Same probability pair in every component.
    pub fn broadcast(p: f64, q: f64, n: usize) -> Result<Self> {
        Self::new(vec![p; n], vec![q; n])
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// The reflected band (1-q, 1-p).
    pub fn reflected(&self) -> Self {
        Self {
            p: self.q.iter().map(|&q| 1.0 - q).collect(),
            q: self.p.iter().map(|&p| 1.0 - p).collect(),
        }
    }
}

/// Standardized image of a truncation band: per-component bounds for the
/// spherical representative, with infinite entries for limit markers.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardizedBand {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl StandardizedBand {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(EllError::InvalidBand(
                "bounds must be non-empty, equal length".into(),
            ));
        }
        for (k, (&a, &b)) in lower.iter().zip(&upper).enumerate() {
            if !(a < b) {
                return Err(EllError::BandInvertedAfterStandardization(k));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
}

/// Symmetric principal square root of an SPD matrix via eigendecomposition.
pub fn sqrt_spd(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_power(sigma, 0.5)
}

/// Inverse symmetric square root of an SPD matrix.
pub fn inv_sqrt_spd(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_power(sigma, -0.5)
}

fn spd_power(sigma: &DMatrix<f64>, power: f64) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if n == 0 || sigma.ncols() != n {
        return Err(EllError::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let scale = sigma.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                return Err(EllError::Domain(format!(
                    "matrix not symmetric at ({i},{j}) within 1e-12"
                )));
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(sigma.clone());
    let max_ev = eig
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if !(max_ev > 0.0) {
        return Err(EllError::NotPositiveDefinite);
    }
    for &ev in eig.eigenvalues.iter() {
        if ev <= 1e-12 * max_ev {
            return Err(EllError::NotPositiveDefinite);
        }
    }
    let powered = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&ev| ev.powf(power)));
    let q = &eig.eigenvectors;
    let result = q * DMatrix::from_diagonal(&powered) * q.transpose();
    // enforce exact symmetry against roundoff
    Ok((&result + result.transpose()) * 0.5)
}

/// The standardized (location 0, scale 1) one-dimensional marginal of an
/// n-dimensional spherical member of a family.
///
/// For the normal and Student-t families the marginal keeps the family; for
/// Pearson VII the marginal is Pearson VII with exponent reduced by (n-1)/2,
/// which maps onto a rescaled Student-t. Logistic and Laplace marginals have
/// no closed form for n >= 2 and go through the radial reduction
/// f(y) = c_n S_(n-2) int_0^inf r^(n-2) g_n((y^2+r^2)/2) dr.
#[derive(Clone, Debug)]
pub struct StandardMarginal {
    family: GeneratorFamily,
    n: usize,
}

impl StandardMarginal {
    pub fn new(family: GeneratorFamily, n: usize) -> Result<Self> {
        family.check_norm(GeneratorKind::Density, n)?;
        Ok(Self { family, n })
    }

    /// For Pearson VII: degrees of freedom of the Student-t image of the
    /// 1-d marginal (m = 2t - n, shared by every marginal of the joint law).
    fn pvii_t_dof(&self) -> f64 {
        2.0 * self.family.shape.unwrap() - self.n as f64
    }

    pub fn density(&self, y: f64) -> f64 {
        match self.family.kind {
            FamilyKind::Normal => special::norm_pdf(y),
            FamilyKind::StudentT => special::t_pdf(y, self.family.shape.unwrap()),
            FamilyKind::PearsonVii => {
                let m = self.pvii_t_dof();
                let s = m.sqrt();
                s * special::t_pdf(y * s, m)
            }
            FamilyKind::Logistic | FamilyKind::Laplace => self.density_radial(y),
        }
    }

    fn density_radial(&self, y: f64) -> f64 {
        let n = self.n;
        let fam = &self.family;
        let c_n = fam
            .norm_const(GeneratorKind::Density, n)
            .expect("density constant");
        match n {
            1 => {
                let g = fam.profile(GeneratorKind::Density, 1).expect("profile");
                c_n * g.eval(0.5 * y * y)
            }
            3 => {
                // integrating two coordinates leaves 2 pi c_3 times the
                // cumulative generator at y^2/2
                let gbar = fam.profile(GeneratorKind::Cumulative, 3).expect("profile");
                2.0 * std::f64::consts::PI * c_n * gbar.eval(0.5 * y * y)
            }
            _ => {
                let g = fam.profile(GeneratorKind::Density, n).expect("profile");
                let surface = 2.0 * std::f64::consts::PI.powf((n as f64 - 1.0) / 2.0)
                    / (ln_gamma((n as f64 - 1.0) / 2.0)).exp();
                let y2 = 0.5 * y * y;
                let pow = n as f64 - 2.0;
                let integral = quad::integrate_semi_inf(
                    |r: f64| r.powf(pow) * g.eval(y2 + 0.5 * r * r),
                    0.0,
                    1e-300,
                    1e-11,
                );
                c_n * surface * integral.value
            }
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y.is_infinite() {
            return if y > 0.0 { 1.0 } else { 0.0 };
        }
        match self.family.kind {
            FamilyKind::Normal => special::norm_cdf(y),
            FamilyKind::StudentT => special::t_cdf(y, self.family.shape.unwrap()),
            FamilyKind::PearsonVii => {
                let m = self.pvii_t_dof();
                special::t_cdf(y * m.sqrt(), m)
            }
            FamilyKind::Laplace if self.n == 1 => {
                // 1-d profile is the classic double exponential
                if y < 0.0 {
                    0.5 * y.exp()
                } else {
                    1.0 - 0.5 * (-y).exp()
                }
            }
            _ => {
                let half = quad::integrate(|t| self.density(t), 0.0, y.abs(), 1e-13, 1e-11).value;
                if y >= 0.0 {
                    (0.5 + half).min(1.0)
                } else {
                    (0.5 - half).max(0.0)
                }
            }
        }
    }

    /// Quantile of the standardized marginal; solves cdf = level to 1e-10.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        if !(level > 0.0 && level < 1.0) {
            return Err(EllError::Domain(format!(
                "quantile needs level in (0,1), got {level}"
            )));
        }
        match self.family.kind {
            FamilyKind::Normal => special::norm_quantile(level),
            FamilyKind::StudentT => special::t_quantile(level, self.family.shape.unwrap()),
            FamilyKind::PearsonVii => {
                let m = self.pvii_t_dof();
                Ok(special::t_quantile(level, m)? / m.sqrt())
            }
            FamilyKind::Laplace if self.n == 1 => Ok(if level < 0.5 {
                (2.0 * level).ln()
            } else {
                -(2.0 * (1.0 - level)).ln()
            }),
            _ => {
                // symmetric law: solve on the positive half for level >= 1/2
                let (lv, sign) = if level >= 0.5 {
                    (level, 1.0)
                } else {
                    (1.0 - level, -1.0)
                };
                let mut hi = 1.0;
                while self.cdf(hi) < lv && hi < 40.0 {
                    hi *= 2.0;
                }
                let root = quad::brent_root(|x| self.cdf(x) - lv, 0.0, hi.min(40.0), 1e-13, 200)
                    .ok_or(EllError::RootNotBracketed)?;
                Ok(sign * root)
            }
        }
    }
}

/// An elliptical distribution: location vector, SPD scale matrix, and a
/// density-generator family. The symmetric principal root of the scale
/// matrix and its inverse are precomputed at construction.
#[derive(Clone, Debug)]
pub struct EllipticalDist {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    family: GeneratorFamily,
    sqrt_sigma: DMatrix<f64>,
    inv_sqrt_sigma: DMatrix<f64>,
}

impl EllipticalDist {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, family: GeneratorFamily) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(EllError::DimensionMismatch(
                "location vector is empty".into(),
            ));
        }
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(EllError::DimensionMismatch(format!(
                "scale matrix {}x{} does not match location dim {n}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        family.check_norm(GeneratorKind::Density, n)?;
        let sqrt_sigma = sqrt_spd(&sigma)?;
        let inv_sqrt_sigma = inv_sqrt_spd(&sigma)?;
        Ok(Self {
            mu,
            sigma,
            family,
            sqrt_sigma,
            inv_sqrt_sigma,
        })
    }

    /// Spherical representative: location 0, identity scale.
    pub fn standard(family: GeneratorFamily, n: usize) -> Result<Self> {
        Self::new(DVector::zeros(n), DMatrix::identity(n, n), family)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn family(&self) -> &GeneratorFamily {
        &self.family
    }

    pub fn sqrt_sigma(&self) -> &DMatrix<f64> {
        &self.sqrt_sigma
    }

    pub fn inv_sqrt_sigma(&self) -> &DMatrix<f64> {
        &self.inv_sqrt_sigma
    }

    pub fn standard_marginal(&self) -> Result<StandardMarginal> {
        StandardMarginal::new(self.family, self.dim())
    }

    fn check_component(&self, k: usize) -> Result<()> {
        if k >= self.dim() {
            return Err(EllError::DimensionMismatch(format!(
                "component {k} out of range for dim {}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// Density of the k-th marginal at x.
    pub fn marginal_density(&self, k: usize, x: f64) -> Result<f64> {
        self.check_component(k)?;
        let s = self.sigma[(k, k)].sqrt();
        Ok(self.standard_marginal()?.density((x - self.mu[k]) / s) / s)
    }

    /// CDF of the k-th marginal at x.
    pub fn marginal_cdf(&self, k: usize, x: f64) -> Result<f64> {
        self.check_component(k)?;
        let s = self.sigma[(k, k)].sqrt();
        Ok(self.standard_marginal()?.cdf((x - self.mu[k]) / s))
    }

    /// Value-at-risk: the `level`-quantile of the k-th marginal.
    pub fn var_quantile(&self, k: usize, level: f64) -> Result<f64> {
        self.check_component(k)?;
        let s = self.sigma[(k, k)].sqrt();
        Ok(self.mu[k] + s * self.standard_marginal()?.quantile(level)?)
    }

    /// Standardized image of the band: per-component bounds of the spherical
    /// representative whose quantile levels match the band, with limit
    /// markers mapped to infinite faces. For diagonal scale matrices this is
    /// exactly the componentwise map of the VaR bounds through the inverse
    /// root of the scale matrix.
    pub fn standardize_band(&self, band: &TruncationBand) -> Result<StandardizedBand> {
        if band.dim() != self.dim() {
            return Err(EllError::DimensionMismatch(format!(
                "band dim {} vs dist dim {}",
                band.dim(),
                self.dim()
            )));
        }
        let marginal = self.standard_marginal()?;
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let pk = band.p()[k];
            let qk = band.q()[k];
            lower.push(if pk == 0.0 {
                f64::NEG_INFINITY
            } else {
                marginal.quantile(pk)?
            });
            upper.push(if qk == 1.0 {
                f64::INFINITY
            } else {
                marginal.quantile(qk)?
            });
        }
        StandardizedBand::new(lower, upper)
    }

    /// Maximum likelihood fit of the normal family: sample mean and the
    /// 1/N covariance. `samples` holds one observation per row.
    pub fn fit_normal_mle(samples: &DMatrix<f64>) -> Result<Self> {
        let n_obs = samples.nrows();
        let dim = samples.ncols();
        if dim == 0 {
            return Err(EllError::InsufficientData("no columns".into()));
        }
        if n_obs < dim + 1 {
            return Err(EllError::InsufficientData(format!(
                "need at least {} observations for dim {dim}, got {n_obs}",
                dim + 1
            )));
        }
        let mut mean = DVector::zeros(dim);
        for i in 0..n_obs {
            mean += samples.row(i).transpose();
        }
        mean /= n_obs as f64;
        let mut cov = DMatrix::zeros(dim, dim);
        for i in 0..n_obs {
            let d = samples.row(i).transpose() - &mean;
            cov += &d * d.transpose();
        }
        cov /= n_obs as f64;
        match Self::new(mean, cov, GeneratorFamily::normal()) {
            Ok(d) => Ok(d),
            Err(EllError::NotPositiveDefinite) => Err(EllError::SingularCovariance),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn section6_sigma() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            3,
            3,
            &[1.33, -0.067, 2.63, -0.067, 0.25, -0.50, 2.63, -0.50, 5.76],
        )
    }

    #[test]
    fn sqrt_spd_trivial_cases() {
        let id = DMatrix::identity(3, 3);
        let s = sqrt_spd(&id).unwrap();
        assert_relative_eq!((s - &id).norm(), 0.0, epsilon = 1e-14);

        let d = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let s = sqrt_spd(&d).unwrap();
        assert_abs_diff_eq!(s[(0, 0)], 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(s[(1, 1)], 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(s[(0, 1)], 0.0, epsilon = 1e-13);
    }

    #[test]
    fn sqrt_spd_reconstructs_dense_matrix() {
        let sigma = section6_sigma();
        let s = sqrt_spd(&sigma).unwrap();
        let err = (&s * &s - &sigma).amax();
        assert!(err < 1e-10 * sigma.amax(), "reconstruction error {err}");
        // symmetric output, inverse root is a two-sided inverse of the root
        assert_relative_eq!((&s - s.transpose()).norm(), 0.0, epsilon = 1e-12);
        let si = inv_sqrt_spd(&sigma).unwrap();
        let id = DMatrix::identity(3, 3);
        assert!((&s * &si - &id).amax() < 1e-9);
    }

    #[test]
    fn sqrt_spd_rejects_bad_input() {
        let not_sym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.1, 1.0]);
        assert!(sqrt_spd(&not_sym).is_err());
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            sqrt_spd(&not_pd),
            Err(EllError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn normal_marginals_are_normal() {
        let dist = EllipticalDist::new(
            DVector::from_vec(vec![1.2, 0.7, 3.0]),
            section6_sigma(),
            GeneratorFamily::normal(),
        )
        .unwrap();
        for &x in &[-1.0, 0.4, 1.2, 2.7] {
            let expected = special::norm_pdf((x - 1.2) / 1.33f64.sqrt()) / 1.33f64.sqrt();
            assert_relative_eq!(
                dist.marginal_density(0, x).unwrap(),
                expected,
                max_relative = 1e-12
            );
        }
        assert_relative_eq!(dist.var_quantile(0, 0.5).unwrap(), 1.2, epsilon = 1e-10);
        let q95 = dist.var_quantile(0, 0.95).unwrap();
        assert_relative_eq!(
            q95,
            1.2 + 1.33f64.sqrt() * 1.6448536269514722,
            max_relative = 1e-9
        );
    }

    #[test]
    fn student_marginals_preserve_dof() {
        // 3-d Student-t marginal equals the 1-d t density with the same dof
        let fam = GeneratorFamily::student_t(5.0).unwrap();
        let m = StandardMarginal::new(fam, 3).unwrap();
        for &y in &[0.0, 0.7, 2.2] {
            assert_relative_eq!(m.density(y), special::t_pdf(y, 5.0), max_relative = 1e-12);
        }
        // and agrees with the generic radial reduction
        let radial = m.density_radial(0.7);
        assert_relative_eq!(radial, special::t_pdf(0.7, 5.0), max_relative = 1e-9);
    }

    #[test]
    fn pvii_marginal_reduces_exponent() {
        // marginal of PVII(t) at dim n is PVII with t' = t - (n-1)/2;
        // cross-check against the generic radial reduction
        let fam = GeneratorFamily::pearson_vii(5.0).unwrap();
        let m = StandardMarginal::new(fam, 3).unwrap();
        for &y in &[0.0, 0.5, 1.8] {
            assert_relative_eq!(m.density(y), m.density_radial(y), max_relative = 1e-9);
        }
    }

    #[test]
    fn laplace_marginal_matches_joint_density_quadrature() {
        // brute-force oracle: integrate the 2-d joint density over the
        // second coordinate, independently of the marginal machinery
        let fam = GeneratorFamily::laplace();
        let m = StandardMarginal::new(fam, 2).unwrap();
        let c2 = fam.norm_const(GeneratorKind::Density, 2).unwrap();
        let g2 = fam.profile(GeneratorKind::Density, 2).unwrap();
        for &x in &[0.0, 0.6, 1.7] {
            let brute = 2.0
                * quad::integrate(
                    |y| c2 * g2.eval(0.5 * (x * x + y * y)),
                    0.0,
                    60.0,
                    1e-13,
                    1e-11,
                )
                .value;
            assert_relative_eq!(m.density(x), brute, max_relative = 1e-8);
        }
    }

    #[test]
    fn heavy_marginals_integrate_to_one() {
        for (fam, n) in [
            (GeneratorFamily::logistic(), 2),
            (GeneratorFamily::logistic(), 3),
            (GeneratorFamily::laplace(), 2),
            (GeneratorFamily::laplace(), 3),
        ] {
            let m = StandardMarginal::new(fam, n).unwrap();
            let total = 2.0 * quad::integrate(|y| m.density(y), 0.0, 60.0, 1e-10, 1e-9).value;
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn laplace_1d_quantile_closed_form() {
        let m = StandardMarginal::new(GeneratorFamily::laplace(), 1).unwrap();
        // F(y) = 1 - exp(-y)/2 for y > 0, so the 0.9 quantile is ln 5
        assert_relative_eq!(m.quantile(0.9).unwrap(), 5.0f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(
            m.quantile(0.1).unwrap(),
            -(5.0f64.ln()),
            max_relative = 1e-12
        );
    }

    #[test]
    fn quantile_cdf_roundtrip_all_families() {
        let fams = [
            GeneratorFamily::normal(),
            GeneratorFamily::student_t(5.0).unwrap(),
            GeneratorFamily::logistic(),
            GeneratorFamily::laplace(),
            GeneratorFamily::pearson_vii(5.0).unwrap(),
        ];
        for fam in fams {
            for n in [2usize, 3] {
                let m = StandardMarginal::new(fam, n).unwrap();
                let mut prev = f64::NEG_INFINITY;
                for i in 1..20 {
                    let level = i as f64 / 20.0;
                    let x = m.quantile(level).unwrap();
                    assert!(x > prev, "{fam:?} quantile not increasing");
                    prev = x;
                    assert_abs_diff_eq!(m.cdf(x), level, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn standardize_band_identity_normal() {
        let dist = EllipticalDist::standard(GeneratorFamily::normal(), 2).unwrap();
        let band = TruncationBand::broadcast(0.05, 0.95, 2).unwrap();
        let sb = dist.standardize_band(&band).unwrap();
        for k in 0..2 {
            assert_abs_diff_eq!(sb.lower()[k], -1.6448536269514722, epsilon = 1e-9);
            assert_abs_diff_eq!(sb.upper()[k], 1.6448536269514722, epsilon = 1e-9);
        }
    }

    #[test]
    fn standardize_band_symmetric_reflection() {
        // symmetric levels give eta_p = -eta_q for every family
        let dist = EllipticalDist::new(
            DVector::from_vec(vec![1.2, 0.7, 3.0]),
            section6_sigma(),
            GeneratorFamily::normal(),
        )
        .unwrap();
        let band = TruncationBand::broadcast(0.15, 0.85, 3).unwrap();
        let sb = dist.standardize_band(&band).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(sb.lower()[k], -sb.upper()[k], epsilon = 1e-10);
            assert!(sb.lower()[k] < sb.upper()[k]);
        }
    }

    #[test]
    fn standardize_band_markers_propagate() {
        let dist = EllipticalDist::standard(GeneratorFamily::normal(), 2).unwrap();
        let band = TruncationBand::new(vec![0.0, 0.1], vec![1.0, 0.9]).unwrap();
        let sb = dist.standardize_band(&band).unwrap();
        assert_eq!(sb.lower()[0], f64::NEG_INFINITY);
        assert_eq!(sb.upper()[0], f64::INFINITY);
        assert!(sb.lower()[1].is_finite() && sb.upper()[1].is_finite());
    }

    #[test]
    fn band_validation() {
        assert!(TruncationBand::new(vec![0.2], vec![0.2]).is_err());
        assert!(TruncationBand::new(vec![0.5], vec![0.4]).is_err());
        assert!(TruncationBand::new(vec![-0.1], vec![0.4]).is_err());
        assert!(TruncationBand::new(vec![0.1], vec![1.1]).is_err());
        assert!(TruncationBand::new(vec![0.0], vec![1.0]).is_ok());
    }

    #[test]
    fn mle_two_point_dataset() {
        let samples = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let fit = EllipticalDist::fit_normal_mle(&samples).unwrap();
        assert_abs_diff_eq!(fit.mu()[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.sigma()[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn mle_rejects_degenerate_input() {
        let constant = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(
            EllipticalDist::fit_normal_mle(&constant),
            Err(EllError::SingularCovariance)
        ));
        let too_few = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            EllipticalDist::fit_normal_mle(&too_few),
            Err(EllError::InsufficientData(_))
        ));
    }

    #[test]
    fn closed_form_quantiles_match_generic_numeric_path() {
        // the generic route: radial-reduction density, numerically
        // integrated CDF, Brent inversion — against the closed forms
        for fam in [
            GeneratorFamily::normal(),
            GeneratorFamily::student_t(5.0).unwrap(),
        ] {
            let m = StandardMarginal::new(fam, 2).unwrap();
            for &level in &[0.05, 0.35, 0.5, 0.8, 0.99] {
                let closed = m.quantile(level).unwrap();
                let numeric_cdf = |x: f64| -> f64 {
                    let half =
                        quad::integrate(|t| m.density_radial(t), 0.0, x.abs(), 1e-14, 1e-12).value;
                    if x >= 0.0 {
                        0.5 + half
                    } else {
                        0.5 - half
                    }
                };
                let root = quad::brent_root(|x| numeric_cdf(x) - level, -40.0, 40.0, 1e-13, 200)
                    .expect("bracketed");
                assert_abs_diff_eq!(closed, root, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn mle_recovers_known_parameters() {
        // synthetic draws from published-scale parameters recover them
        // within three standard errors of the sample estimators
        let mu = DVector::from_vec(vec![-1.140677e-3, 5.896240e-3, 2.107343e-3]);
        let sigma = DMatrix::from_row_slice(
            3,
            3,
            &[
                19.088935e-4,
                12.503116e-4,
                -3.720492e-4,
                12.503116e-4,
                20.268816e-4,
                -3.162601e-4,
                -3.720492e-4,
                -3.162601e-4,
                8.851913e-4,
            ],
        );
        let dist =
            EllipticalDist::new(mu.clone(), sigma.clone(), GeneratorFamily::normal()).unwrap();
        let n_samples = 100_000usize;
        let y =
            crate::oracle::sample_spherical(&GeneratorFamily::normal(), 3, n_samples, 12).unwrap();
        let mut data = DMatrix::zeros(n_samples, 3);
        for r in 0..n_samples {
            for i in 0..3 {
                let mut x = mu[i];
                for j in 0..3 {
                    x += dist.sqrt_sigma()[(i, j)] * y[(r, j)];
                }
                data[(r, i)] = x;
            }
        }
        let fit = EllipticalDist::fit_normal_mle(&data).unwrap();
        let nf = n_samples as f64;
        for i in 0..3 {
            let se_mu = (sigma[(i, i)] / nf).sqrt();
            assert!(
                (fit.mu()[i] - mu[i]).abs() < 3.0 * se_mu,
                "mu[{i}] {} vs {}",
                fit.mu()[i],
                mu[i]
            );
            for j in 0..3 {
                // normal-theory standard error of a covariance entry
                let se_cov = ((sigma[(i, i)] * sigma[(j, j)] + sigma[(i, j)].powi(2)) / nf).sqrt();
                assert!(
                    (fit.sigma()[(i, j)] - sigma[(i, j)]).abs() < 3.0 * se_cov,
                    "sigma[{i},{j}] {} vs {}",
                    fit.sigma()[(i, j)],
                    sigma[(i, j)]
                );
            }
        }
    }

    #[test]
    fn marginal_cdf_matches_quantile_inverse() {
        let dist = EllipticalDist::new(
            DVector::from_vec(vec![2.0]),
            DMatrix::from_row_slice(1, 1, &[4.0]),
            GeneratorFamily::student_t(5.0).unwrap(),
        )
        .unwrap();
        let x = dist.var_quantile(0, 0.8).unwrap();
        assert_abs_diff_eq!(dist.marginal_cdf(0, x).unwrap(), 0.8, epsilon = 1e-10);
    }
}
