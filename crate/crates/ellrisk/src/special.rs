//! Special functions: generalized Hurwitz-Lerch zeta, normal and Student-t
//! distribution helpers, and a monotone cubic interpolant for quantile tables.

use crate::error::{EllError, Result};
use crate::quad;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

pub use statrs::function::beta::ln_beta;

const SQRT_2PI: f64 = 2.5066282746310002;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, polished with Newton steps to |cdf - p| < 1e-14.
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || p == 0.0 || p == 1.0 {
        return Err(EllError::Domain(format!(
            "normal quantile needs p in (0,1), got {p}"
        )));
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let mut x = n.inverse_cdf(p);
    for _ in 0..3 {
        let err = norm_cdf(x) - p;
        let d = norm_pdf(x);
        if d <= 0.0 {
            break;
        }
        let step = err / d;
        x -= step;
        if step.abs() < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    Ok(x)
}

/// Student-t CDF with `dof` degrees of freedom.
pub fn t_cdf(x: f64, dof: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    StudentsT::new(0.0, 1.0, dof).expect("valid dof").cdf(x)
}

/// Student-t density with `dof` degrees of freedom.
pub fn t_pdf(x: f64, dof: f64) -> f64 {
    let ln_c =
        ln_gamma((dof + 1.0) / 2.0) - ln_gamma(dof / 2.0) - 0.5 * (dof * std::f64::consts::PI).ln();
    (ln_c - 0.5 * (dof + 1.0) * (x * x / dof).ln_1p()).exp()
}

/// Student-t quantile, polished with Newton steps to |cdf - p| < 1e-13.
pub fn t_quantile(p: f64, dof: f64) -> Result<f64> {
    if p <= 0.0 || p >= 1.0 {
        return Err(EllError::Domain(format!(
            "t quantile needs p in (0,1), got {p}"
        )));
    }
    let st = StudentsT::new(0.0, 1.0, dof).expect("valid dof");
    let mut x = st.inverse_cdf(p);
    for _ in 0..4 {
        let err = t_cdf(x, dof) - p;
        let d = t_pdf(x, dof);
        if d <= 0.0 {
            break;
        }
        let step = err / d;
        x -= step;
        if step.abs() < 1e-14 * (1.0 + x.abs()) {
            break;
        }
    }
    Ok(x)
}

/// Generalized Hurwitz-Lerch zeta
/// Psi*_kappa(z, s, a) = (1/Gamma(kappa)) sum_{n>=0} Gamma(kappa+n)/n! z^n / (n+a)^s.
///
/// The series is summed directly while |z| stays away from 1 (geometric
/// tail bound, alternating bound for z < 0). Near |z| = 1, where the series
/// converges too slowly or not at all, the integral representation
/// (1/Gamma(s)) int_0^inf t^(s-1) e^(-a t) / (1 - z e^-t)^kappa dt
/// is integrated numerically after the substitution t = y^2.
pub fn lerch_zeta_star(kappa: f64, z: f64, s: f64, a: f64) -> Result<f64> {
    if !(kappa > 0.0) || !(a > 0.0) || !(s > 0.0) {
        return Err(EllError::Domain(format!(
            "lerch_zeta_star needs kappa, s, a > 0 (got kappa={kappa}, s={s}, a={a})"
        )));
    }
    if !(-1.0..1.0).contains(&z) && z != -1.0 {
        return Err(EllError::Domain(format!(
            "lerch_zeta_star needs z in [-1, 1), got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(a.powf(-s));
    }

    const TOL: f64 = 1e-14;
    const MAX_TERMS: usize = 1_000_000;

    if z.abs() < 0.999 {
        // coefficient ratio Gamma(kappa+n+1)/((n+1)! ) / (Gamma(kappa+n)/n!) = (kappa+n)/(n+1)
        let mut coef = 1.0; // Gamma(kappa+n)/(Gamma(kappa) n!) at n = 0
        let mut zpow = 1.0;
        let mut sum = 0.0;
        for n in 0..MAX_TERMS {
            let nf = n as f64;
            let term = coef * zpow * (nf + a).powf(-s);
            sum += term;
            // geometric tail bound with observed ratio
            let ratio = z.abs() * (kappa + nf) / (nf + 1.0);
            if ratio < 1.0 && term.abs() * ratio / (1.0 - ratio) < TOL * sum.abs().max(1e-30) {
                return Ok(sum);
            }
            coef *= (kappa + nf) / (nf + 1.0);
            zpow *= z;
        }
        // fall through to the integral representation
    }

    let r = quad::integrate_semi_inf(
        |y: f64| {
            let t = y * y;
            2.0 * y.powf(2.0 * s - 1.0) * (-a * t).exp() / (1.0 - z * (-t).exp()).powf(kappa)
        },
        0.0,
        1e-15,
        1e-13,
    );
    if !r.converged && r.abs_error > 1e-9 * r.value.abs().max(1.0) {
        return Err(EllError::IntegralDiverged(format!(
            "lerch integral error {:.2e} for (kappa={kappa}, z={z}, s={s}, a={a})",
            r.abs_error
        )));
    }
    Ok(r.value * (-ln_gamma(s)).exp())
}

/// Monotone cubic (Fritsch-Carlson) interpolant through strictly increasing
/// (x, y) data; used for tabulated quantile functions.
#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(EllError::Domain(
                "interpolant needs >= 2 matching nodes".into(),
            ));
        }
        let mut d = vec![0.0; n - 1];
        for i in 0..n - 1 {
            let h = x[i + 1] - x[i];
            if h <= 0.0 {
                return Err(EllError::Domain(
                    "interpolant abscissae must increase".into(),
                ));
            }
            d[i] = (y[i + 1] - y[i]) / h;
        }
        let mut slope = vec![0.0; n];
        slope[0] = d[0];
        slope[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            slope[i] = if d[i - 1] * d[i] <= 0.0 {
                0.0
            } else {
                let w1 = 2.0 * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
                let w2 = (x[i + 1] - x[i]) + 2.0 * (x[i] - x[i - 1]);
                (w1 + w2) / (w1 / d[i - 1] + w2 / d[i])
            };
        }
        Ok(Self { x, y, slope })
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.x[mid] <= xq {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = self.x[lo + 1] - self.x[lo];
        let t = (xq - self.x[lo]) / h;
        let (y0, y1) = (self.y[lo], self.y[lo + 1]);
        let (m0, m1) = (self.slope[lo], self.slope[lo + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + m0 * h * (t3 - 2.0 * t2 + t)
            + y1 * (-2.0 * t3 + 3.0 * t2)
            + m1 * h * (t3 - t2)
    }
}
