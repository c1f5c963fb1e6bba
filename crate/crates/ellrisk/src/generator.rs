//! Density-generator calculus for the five supported elliptical families.
//!
//! Each family exposes a generator triple: the density profile g_n, its upper
//! integral (cumulative generator), and the upper integral of that (double
//! cumulative), together with the normalizing constants that turn each profile
//! into a probability density in n dimensions.

use crate::error::{EllError, Result};
use crate::quad;
use crate::special::{lerch_zeta_star, ln_beta};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Normal,
    StudentT,
    Logistic,
    Laplace,
    PearsonVii,
}

/// Which member of the generator triple is being evaluated or normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    /// The density profile itself.
    Density,
    /// First upper integral of the density profile.
    Cumulative,
    /// Second upper integral (upper integral of `Cumulative`).
    DoubleCumulative,
}

/// One of the five named families, with its shape parameter where applicable
/// (degrees of freedom for Student-t, tail exponent for Pearson VII).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorFamily {
    pub kind: FamilyKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shape: Option<f64>,
}

impl GeneratorFamily {
    pub fn normal() -> Self {
        Self {
            kind: FamilyKind::Normal,
            shape: None,
        }
    }

    pub fn student_t(dof: f64) -> Result<Self> {
        if !(dof > 0.0) {
            return Err(EllError::ShapeConstraint(format!(
                "student_t needs m > 0, got {dof}"
            )));
        }
        Ok(Self {
            kind: FamilyKind::StudentT,
            shape: Some(dof),
        })
    }

    pub fn logistic() -> Self {
        Self {
            kind: FamilyKind::Logistic,
            shape: None,
        }
    }

    pub fn laplace() -> Self {
        Self {
            kind: FamilyKind::Laplace,
            shape: None,
        }
    }

    pub fn pearson_vii(t: f64) -> Result<Self> {
        if !(t > 0.5) {
            return Err(EllError::ShapeConstraint(format!(
                "pearson_vii needs t > 1/2 for a 1-d density, got {t}"
            )));
        }
        Ok(Self {
            kind: FamilyKind::PearsonVii,
            shape: Some(t),
        })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::Normal => "normal",
            FamilyKind::StudentT => "student_t",
            FamilyKind::Logistic => "logistic",
            FamilyKind::Laplace => "laplace",
            FamilyKind::PearsonVii => "pearson_vii",
        }
    }

    fn shape_or_err(&self) -> Result<f64> {
        self.shape.ok_or_else(|| {
            EllError::ShapeConstraint(format!("{} has no shape parameter", self.name()))
        })
    }

    /// Checks that the requested generator kind is a valid (decaying,
    /// integrable) profile at dimension `n`.
    pub fn check_eval(&self, kind: GeneratorKind, n: usize) -> Result<()> {
        match self.kind {
            FamilyKind::Normal | FamilyKind::Logistic | FamilyKind::Laplace => Ok(()),
            FamilyKind::StudentT => {
                let m = self.shape_or_err()?;
                let needed = match kind {
                    GeneratorKind::Density => 0.0,
                    GeneratorKind::Cumulative => 2.0,
                    GeneratorKind::DoubleCumulative => 4.0,
                };
                if m + n as f64 > needed {
                    Ok(())
                } else {
                    Err(EllError::ShapeConstraint(format!(
                        "student_t {kind:?} at n={n} needs m + n > {needed}, got m={m}"
                    )))
                }
            }
            FamilyKind::PearsonVii => {
                let t = self.shape_or_err()?;
                let needed = match kind {
                    GeneratorKind::Density => n as f64 / 2.0,
                    GeneratorKind::Cumulative => 1.0,
                    GeneratorKind::DoubleCumulative => 2.0,
                };
                if t > needed {
                    Ok(())
                } else {
                    Err(EllError::ShapeConstraint(format!(
                        "pearson_vii {kind:?} at n={n} needs t > {needed}, got t={t}"
                    )))
                }
            }
        }
    }

    /// Checks the stricter condition for the kind's normalizing constant to
    /// exist at dimension `n`.
    pub fn check_norm(&self, kind: GeneratorKind, n: usize) -> Result<()> {
        self.check_eval(kind, n)?;
        match self.kind {
            FamilyKind::Normal | FamilyKind::Logistic | FamilyKind::Laplace => Ok(()),
            FamilyKind::StudentT => {
                let m = self.shape_or_err()?;
                let needed = match kind {
                    GeneratorKind::Density => 0.0,
                    GeneratorKind::Cumulative => 2.0,
                    GeneratorKind::DoubleCumulative => 4.0,
                };
                if m > needed {
                    Ok(())
                } else {
                    Err(EllError::ShapeConstraint(format!(
                        "student_t {kind:?} normalizing constant needs m > {needed}, got m={m}"
                    )))
                }
            }
            FamilyKind::PearsonVii => {
                let t = self.shape_or_err()?;
                let half_n = n as f64 / 2.0;
                let needed = match kind {
                    GeneratorKind::Density => half_n,
                    GeneratorKind::Cumulative => 1.0 + half_n,
                    GeneratorKind::DoubleCumulative => 2.0 + half_n,
                };
                if t > needed {
                    Ok(())
                } else {
                    Err(EllError::ShapeConstraint(format!(
                        "pearson_vii {kind:?} normalizing constant at n={n} needs t > {needed}, got t={t}"
                    )))
                }
            }
        }
    }

    /// Compiled evaluator for the generator profile at base dimension `n`.
    pub fn profile(&self, kind: GeneratorKind, n: usize) -> Result<GeneratorProfile> {
        self.check_eval(kind, n)?;
        let p = match self.kind {
            FamilyKind::Normal => GeneratorProfile::Exp,
            FamilyKind::StudentT => {
                let m = self.shape_or_err()?;
                let nn = n as f64;
                let (coef, expo) = match kind {
                    GeneratorKind::Density => (1.0, (m + nn) / 2.0),
                    GeneratorKind::Cumulative => (m / (m + nn - 2.0), (m + nn - 2.0) / 2.0),
                    GeneratorKind::DoubleCumulative => (
                        m * m / ((m + nn - 2.0) * (m + nn - 4.0)),
                        (m + nn - 4.0) / 2.0,
                    ),
                };
                GeneratorProfile::PowerTail {
                    scale: m,
                    coef,
                    expo,
                }
            }
            FamilyKind::Logistic => match kind {
                GeneratorKind::Density => GeneratorProfile::LogisticDensity,
                GeneratorKind::Cumulative => GeneratorProfile::LogisticCumulative,
                GeneratorKind::DoubleCumulative => GeneratorProfile::LogisticDouble,
            },
            FamilyKind::Laplace => match kind {
                GeneratorKind::Density => GeneratorProfile::LaplaceDensity,
                GeneratorKind::Cumulative => GeneratorProfile::LaplaceCumulative,
                GeneratorKind::DoubleCumulative => GeneratorProfile::LaplaceDouble,
            },
            FamilyKind::PearsonVii => {
                let t = self.shape_or_err()?;
                let (coef, expo) = match kind {
                    GeneratorKind::Density => (1.0, t),
                    GeneratorKind::Cumulative => (0.5 / (t - 1.0), t - 1.0),
                    GeneratorKind::DoubleCumulative => (0.25 / ((t - 1.0) * (t - 2.0)), t - 2.0),
                };
                GeneratorProfile::PowerTail {
                    scale: 1.0,
                    coef,
                    expo,
                }
            }
        };
        Ok(p)
    }

    /// Generator value; `u >= 0` (tiny negative roundoff is clamped).
    pub fn eval(&self, kind: GeneratorKind, n: usize, u: f64) -> Result<f64> {
        if u < -1e-12 {
            return Err(EllError::NegativeArgument(u));
        }
        Ok(self.profile(kind, n)?.eval(u.max(0.0)))
    }

    /// Closed-form normalizing constant for the kind at dimension `n`.
    pub fn norm_const(&self, kind: GeneratorKind, n: usize) -> Result<f64> {
        self.check_norm(kind, n)?;
        let nn = n as f64;
        let half_n = nn / 2.0;
        let v = match self.kind {
            FamilyKind::Normal => (-half_n * LN_2PI).exp(),
            FamilyKind::StudentT => {
                let m = self.shape_or_err()?;
                let ln_mpi = (m * std::f64::consts::PI).ln();
                match kind {
                    GeneratorKind::Density => {
                        (ln_gamma((m + nn) / 2.0) - ln_gamma(m / 2.0) - half_n * ln_mpi).exp()
                    }
                    GeneratorKind::Cumulative => ((m + nn - 2.0).ln() + ln_gamma(half_n)
                        - half_n * ln_mpi
                        - m.ln()
                        - ln_beta(half_n, (m - 2.0) / 2.0))
                    .exp(),
                    GeneratorKind::DoubleCumulative => {
                        ((m + nn - 2.0).ln() + (m + nn - 4.0).ln() + ln_gamma(half_n)
                            - half_n * ln_mpi
                            - 2.0 * m.ln()
                            - ln_beta(half_n, (m - 4.0) / 2.0))
                        .exp()
                    }
                }
            }
            FamilyKind::Logistic => {
                let psi = match kind {
                    GeneratorKind::Density => lerch_zeta_star(2.0, -1.0, half_n, 1.0)?,
                    GeneratorKind::Cumulative => lerch_zeta_star(1.0, -1.0, half_n, 1.0)?,
                    GeneratorKind::DoubleCumulative => {
                        lerch_zeta_star(1.0, -1.0, half_n + 1.0, 1.0)?
                    }
                };
                ((-half_n * LN_2PI).exp()) / psi
            }
            FamilyKind::Laplace => {
                let ln_base = ln_gamma(half_n) - 2.0f64.ln() - half_n * std::f64::consts::PI.ln();
                match kind {
                    GeneratorKind::Density => (ln_base - ln_gamma(nn)).exp(),
                    GeneratorKind::Cumulative => (ln_base + nn.ln() - ln_gamma(nn + 2.0)).exp(),
                    GeneratorKind::DoubleCumulative => {
                        (ln_base + nn.ln() + (nn + 2.0).ln() - ln_gamma(nn + 4.0)).exp()
                    }
                }
            }
            FamilyKind::PearsonVii => {
                let t = self.shape_or_err()?;
                let ln_pi = std::f64::consts::PI.ln();
                match kind {
                    GeneratorKind::Density => {
                        (ln_gamma(t) - ln_gamma(t - half_n) - half_n * ln_pi).exp()
                    }
                    GeneratorKind::Cumulative => (ln_gamma(half_n) + (2.0 * (t - 1.0)).ln()
                        - half_n * ln_pi
                        - ln_beta(half_n, t - 1.0 - half_n))
                    .exp(),
                    GeneratorKind::DoubleCumulative => (ln_gamma(half_n)
                        + (4.0 * (t - 1.0) * (t - 2.0)).ln()
                        - half_n * ln_pi
                        - ln_beta(half_n, t - 2.0 - half_n))
                    .exp(),
                }
            }
        };
        Ok(v)
    }

    /// Ratio c_n / c_n^* — the covariance of the standardized law is this
    /// ratio times the identity (m/(m-2) for Student-t, 1 for normal).
    pub fn covariance_factor(&self, n: usize) -> Result<f64> {
        Ok(self.norm_const(GeneratorKind::Density, n)?
            / self.norm_const(GeneratorKind::Cumulative, n)?)
    }
}

/// The Pearson VII image of a Student-t model: a Student-t law with m
/// degrees of freedom maps onto Pearson VII with exponent t = (m + n)/2 and
/// the same location and scale, through the affine map
/// x = mu + (y - mu)/sqrt(m). Used as a cross-family test oracle.
pub fn pvii_from_t(dist: &crate::model::EllipticalDist) -> Result<crate::model::EllipticalDist> {
    let FamilyKind::StudentT = dist.family().kind else {
        return Err(EllError::Domain(format!(
            "pvii_from_t needs a student_t model, got {}",
            dist.family().name()
        )));
    };
    let m = dist.family().shape.expect("student_t has dof");
    let t = (m + dist.dim() as f64) / 2.0;
    crate::model::EllipticalDist::new(
        dist.mu().clone(),
        dist.sigma().clone(),
        GeneratorFamily::pearson_vii(t)?,
    )
}

/// Normalizing constant computed from the defining radial integral:
/// Gamma(m/2) / (2 pi)^(m/2) / int_0^inf s^(m/2-1) h(s) ds.
pub fn generic_norm_const<F: Fn(f64) -> f64>(h: F, m: usize) -> Result<f64> {
    let integral = quad::radial_moment(&h, m, 1e-300, 1e-12);
    if !integral.converged && integral.abs_error > 1e-9 * integral.value.abs() {
        return Err(EllError::IntegralDiverged(format!(
            "radial moment error {:.2e} at m={m}",
            integral.abs_error
        )));
    }
    if !(integral.value > 0.0) || !integral.value.is_finite() {
        return Err(EllError::IntegralDiverged(format!(
            "radial moment {} at m={m}",
            integral.value
        )));
    }
    let m2 = m as f64 / 2.0;
    Ok((ln_gamma(m2) - m2 * LN_2PI).exp() / integral.value)
}

/// Compiled generator profile: a fast, allocation-free evaluator for one
/// (family, kind, dimension) combination.
#[derive(Clone, Copy, Debug)]
pub enum GeneratorProfile {
    /// exp(-u): every kind of the normal family.
    Exp,
    /// coef * (1 + 2u/scale)^(-expo): Student-t (scale = m) and
    /// Pearson VII (scale = 1) triples.
    PowerTail {
        scale: f64,
        coef: f64,
        expo: f64,
    },
    LogisticDensity,
    LogisticCumulative,
    LogisticDouble,
    LaplaceDensity,
    LaplaceCumulative,
    LaplaceDouble,
}

impl GeneratorProfile {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        debug_assert!(u >= 0.0);
        match *self {
            GeneratorProfile::Exp => (-u).exp(),
            GeneratorProfile::PowerTail { scale, coef, expo } => {
                coef * (-expo * (2.0 * u / scale).ln_1p()).exp()
            }
            GeneratorProfile::LogisticDensity => {
                let e = (-u).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            GeneratorProfile::LogisticCumulative => {
                let e = (-u).exp();
                e / (1.0 + e)
            }
            GeneratorProfile::LogisticDouble => (-u).exp().ln_1p(),
            // at u = 0 the exact limits 1, 1, 3 are the formula values
            GeneratorProfile::LaplaceDensity => (-(2.0 * u).sqrt()).exp(),
            GeneratorProfile::LaplaceCumulative => {
                let s = (2.0 * u).sqrt();
                (1.0 + s) * (-s).exp()
            }
            GeneratorProfile::LaplaceDouble => {
                let s = (2.0 * u).sqrt();
                (3.0 + s * s + 3.0 * s) * (-s).exp()
            }
        }
    }

    /// Evaluator with a fixed additive argument shift.
    #[inline]
    pub fn shifted(self, shift: f64) -> ShiftedProfile {
        ShiftedProfile { inner: self, shift }
    }
}

/// Generator profile with argument offset: u -> h(u + shift).
#[derive(Clone, Copy, Debug)]
pub struct ShiftedProfile {
    inner: GeneratorProfile,
    shift: f64,
}

impl ShiftedProfile {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.inner.eval(u + self.shift)
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }
}
