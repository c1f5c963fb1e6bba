//! Rectangle probabilities for spherical densities built from (possibly
//! argument-shifted) generators.
//!
//! The density integrated here is t -> norm_const * h(t't/2 + shift) over an
//! axis-aligned box in R^m, where h is a generator profile of the base
//! dimension. Strategy: the normal family factorizes and uses exact 1-d CDF
//! products; m <= 3 uses tensorized adaptive quadrature with infinite faces
//! truncated at the slice-density floor; m >= 4 uses randomized quasi-Monte
//! Carlo with a per-coordinate importance map through the slice quantile.

use crate::error::{EllError, Result};
use crate::generator::{self, FamilyKind, GeneratorFamily, GeneratorKind, ShiftedProfile};
use crate::quad;
use crate::sobol::ScrambledSobol;
use crate::special::{ln_beta, norm_cdf};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

const LN_2PI: f64 = 1.8378770664093453;

/// Axis-aligned box with optional infinite faces.
#[derive(Clone, Debug, PartialEq)]
pub struct Rectangle {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Rectangle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(EllError::InvalidRectangle(
                "bounds must be non-empty, equal length".into(),
            ));
        }
        for (k, (&a, &b)) in lower.iter().zip(&upper).enumerate() {
            if !(a < b) || a.is_nan() || b.is_nan() {
                return Err(EllError::InvalidRectangle(format!(
                    "component {k}: need lower < upper, got ({a}, {b})"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn whole_space(m: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; m],
            upper: vec![f64::INFINITY; m],
        }
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

/// Probability estimate with its error measure.
#[derive(Clone, Copy, Debug)]
pub struct RectProb {
    pub value: f64,
    /// Quadrature error bound or RQMC standard error.
    pub std_error: f64,
    /// False when the sample budget was exhausted before reaching the target.
    pub accuracy_met: bool,
}

/// Closed-form shifted normalizing constant where the family admits one
/// (normal and the power-tail families); quadrature otherwise.
///
/// `base_dim` is the dimension the generator triple is taken at, `m` the
/// reduced dimension being normalized over.
pub fn shifted_norm_const(
    family: &GeneratorFamily,
    base_dim: usize,
    kind: GeneratorKind,
    shift: f64,
    m: usize,
) -> Result<f64> {
    if !(shift >= 0.0) || !shift.is_finite() {
        return Err(EllError::Domain(format!(
            "shift must be finite and >= 0, got {shift}"
        )));
    }
    if m == 0 {
        // empty-product convention: the 0-dimensional "density" is the bare
        // generator value at the shift
        let h0 = family.profile(kind, base_dim)?.eval(shift);
        return Ok(1.0 / h0);
    }
    family.check_eval(kind, base_dim)?;
    let m2 = m as f64 / 2.0;
    match family.kind {
        FamilyKind::Normal => Ok((shift - m2 * LN_2PI).exp()),
        FamilyKind::StudentT | FamilyKind::PearsonVii => {
            let profile = family.profile(kind, base_dim)?;
            let generator::GeneratorProfile::PowerTail { scale, coef, expo } = profile else {
                unreachable!("power-tail family produced non-power profile")
            };
            if !(expo > m2) {
                return Err(EllError::ShapeConstraint(format!(
                    "shifted constant needs tail exponent > m/2 (expo={expo}, m={m})"
                )));
            }
            // h(u + s0) = coef * B^-expo * (1 + 2u/(scale B))^-expo, B = 1 + 2 s0/scale;
            // the radial moment of the rescaled power tail is a beta integral
            let b = 1.0 + 2.0 * shift / scale;
            let ln_c = ln_gamma(m2) - m2 * LN_2PI - coef.ln() + expo * b.ln()
                - m2 * (scale * b / 2.0).ln()
                - ln_beta(m2, expo - m2);
            Ok(ln_c.exp())
        }
        FamilyKind::Logistic | FamilyKind::Laplace => {
            shifted_norm_const_generic(family, base_dim, kind, shift, m)
        }
    }
}

/// Shifted normalizing constant by quadrature of the defining radial moment;
/// always available, used to cross-check the closed forms.
pub fn shifted_norm_const_generic(
    family: &GeneratorFamily,
    base_dim: usize,
    kind: GeneratorKind,
    shift: f64,
    m: usize,
) -> Result<f64> {
    if m == 0 {
        return shifted_norm_const(family, base_dim, kind, shift, m);
    }
    let profile = family.profile(kind, base_dim)?.shifted(shift);
    generator::generic_norm_const(|u| profile.eval(u), m)
}

/// A normalized spherical density t -> norm_const * h(t't/2 + shift) in
/// `dim` dimensions, where h is the `kind` generator of `family` at
/// dimension `base_dim`.
#[derive(Clone, Debug)]
pub struct SphericalDensitySpec {
    family: GeneratorFamily,
    base_dim: usize,
    kind: GeneratorKind,
    shift: f64,
    dim: usize,
    norm_const: f64,
    profile: ShiftedProfile,
}

impl SphericalDensitySpec {
    pub fn new(
        family: GeneratorFamily,
        base_dim: usize,
        kind: GeneratorKind,
        shift: f64,
        dim: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(EllError::DimensionMismatch(
                "spec dimension must be >= 1".into(),
            ));
        }
        let norm_const = shifted_norm_const(&family, base_dim, kind, shift, dim)?;
        let profile = family.profile(kind, base_dim)?.shifted(shift);
        Ok(Self {
            family,
            base_dim,
            kind,
            shift,
            dim,
            norm_const,
            profile,
        })
    }

    /// As `new`, but normalizing by quadrature even where a closed form
    /// exists; the dual route for validation.
    pub fn new_generic(
        family: GeneratorFamily,
        base_dim: usize,
        kind: GeneratorKind,
        shift: f64,
        dim: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(EllError::DimensionMismatch(
                "spec dimension must be >= 1".into(),
            ));
        }
        let norm_const = shifted_norm_const_generic(&family, base_dim, kind, shift, dim)?;
        let profile = family.profile(kind, base_dim)?.shifted(shift);
        Ok(Self {
            family,
            base_dim,
            kind,
            shift,
            dim,
            norm_const,
            profile,
        })
    }

    /// The unshifted base density of the family at its own dimension.
    pub fn base(family: GeneratorFamily, n: usize) -> Result<Self> {
        Self::new(family, n, GeneratorKind::Density, 0.0, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension the base generator triple is taken at.
    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn family(&self) -> &GeneratorFamily {
        &self.family
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Density value at a point of length `dim`.
    pub fn density(&self, t: &[f64]) -> f64 {
        debug_assert_eq!(t.len(), self.dim);
        let half_sq: f64 = 0.5 * t.iter().map(|&x| x * x).sum::<f64>();
        self.norm_const * self.profile.eval(half_sq)
    }

    /// One-dimensional slice density (other coordinates at 0), normalized
    /// over the real line.
    fn slice(&self) -> Slice {
        Slice::new(&self.profile)
    }

    /// Half-width at which the normalized 1-d slice density falls below
    /// 1e-16; infinite faces are truncated here.
    pub fn slice_radius(&self) -> f64 {
        self.slice().radius
    }

    /// Probability of the rectangle, to target accuracy (interpreted as an
    /// absolute error bound for the quadrature strategies and a standard
    /// error target for RQMC). Deterministic for a fixed seed.
    pub fn rectangle_prob(&self, rect: &Rectangle, accuracy: f64, seed: u64) -> Result<RectProb> {
        self.rectangle_prob_impl(rect, accuracy, seed, true)
    }

    /// As `rectangle_prob` but never taking the separable normal shortcut;
    /// used to validate the generic engines against the normal closed form.
    pub fn rectangle_prob_generic(
        &self,
        rect: &Rectangle,
        accuracy: f64,
        seed: u64,
    ) -> Result<RectProb> {
        self.rectangle_prob_impl(rect, accuracy, seed, false)
    }

    fn rectangle_prob_impl(
        &self,
        rect: &Rectangle,
        accuracy: f64,
        seed: u64,
        allow_separable: bool,
    ) -> Result<RectProb> {
        if rect.dim() != self.dim {
            return Err(EllError::DimensionMismatch(format!(
                "rectangle dim {} vs spec dim {}",
                rect.dim(),
                self.dim
            )));
        }
        if !(accuracy > 0.0) {
            return Err(EllError::Domain(format!(
                "accuracy must be positive, got {accuracy}"
            )));
        }
        if self.dim > crate::sobol::MAX_DIM
            && !(allow_separable && self.family.kind == FamilyKind::Normal)
        {
            return Err(EllError::DimensionMismatch(format!(
                "rectangle integration supports up to {} dimensions, got {}",
                crate::sobol::MAX_DIM,
                self.dim
            )));
        }
        if allow_separable && self.family.kind == FamilyKind::Normal {
            // every normal generator kind is exp(-u), which factorizes into
            // independent standard normal coordinates after normalization
            let mut p = 1.0;
            for k in 0..self.dim {
                p *= norm_cdf(rect.upper[k]) - norm_cdf(rect.lower[k]);
            }
            return Ok(RectProb {
                value: p.clamp(0.0, 1.0),
                std_error: 1e-15,
                accuracy_met: true,
            });
        }

        let slice = self.slice();
        let radius = slice.radius;
        let mut lo = Vec::with_capacity(self.dim);
        let mut hi = Vec::with_capacity(self.dim);
        for k in 0..self.dim {
            let a = rect.lower[k].max(-radius);
            let b = rect.upper[k].min(radius);
            if a >= b {
                // rectangle entirely in the truncated tail
                return Ok(RectProb {
                    value: 0.0,
                    std_error: 1e-14,
                    accuracy_met: true,
                });
            }
            lo.push(a);
            hi.push(b);
        }

        let result = if self.dim <= 3 {
            self.tensor_prob(&lo, &hi, accuracy)
        } else {
            self.rqmc_prob(&slice, &lo, &hi, accuracy, seed)
        };
        Ok(RectProb {
            value: result.value.clamp(0.0, 1.0),
            ..result
        })
    }

    /// Nested adaptive quadrature over a finite box, innermost coordinate
    /// integrated at the tightest tolerance. Each level is pre-split at
    /// fixed interior breakpoints so the density peak near the origin is
    /// localized without bisecting down from a possibly huge truncated box.
    fn tensor_prob(&self, lo: &[f64], hi: &[f64], accuracy: f64) -> RectProb {
        const CUTS: [f64; 7] = [-24.0, -8.0, -2.0, 0.0, 2.0, 8.0, 24.0];
        fn level(
            spec: &SphericalDensitySpec,
            lo: &[f64],
            hi: &[f64],
            depth: usize,
            sumsq: f64,
            accuracy: f64,
        ) -> (f64, f64) {
            let m = lo.len();
            let tol = (accuracy * 0.1f64.powi((m - depth) as i32)).max(1e-14);
            if depth == m - 1 {
                let r = quad::integrate_split(
                    |t| spec.norm_const * spec.profile.eval(0.5 * (sumsq + t * t)),
                    lo[depth],
                    hi[depth],
                    &CUTS,
                    tol,
                    1e-10,
                );
                (r.value, r.abs_error)
            } else {
                let inner_err = std::cell::Cell::new(0.0f64);
                let r = quad::integrate_split(
                    |t| {
                        let (v, e) = level(spec, lo, hi, depth + 1, sumsq + t * t, accuracy);
                        inner_err.set(inner_err.get().max(e));
                        v
                    },
                    lo[depth],
                    hi[depth],
                    &CUTS,
                    tol,
                    1e-10,
                );
                (
                    r.value,
                    r.abs_error + inner_err.get() * (hi[depth] - lo[depth]),
                )
            }
        }
        let (value, err) = level(self, lo, hi, 0, 0.0, accuracy);
        RectProb {
            value,
            std_error: err.max(1e-15),
            accuracy_met: err <= accuracy,
        }
    }

    /// Randomized QMC with a digital-shift-scrambled Sobol sequence and a
    /// per-coordinate importance map through the truncated slice quantile.
    /// Budget: 2^16 points per replicate, 16 replicates, points doubling up
    /// to 2^20 until the replicate standard error meets the target.
    fn rqmc_prob(
        &self,
        slice: &Slice,
        lo: &[f64],
        hi: &[f64],
        accuracy: f64,
        seed: u64,
    ) -> RectProb {
        const REPLICATES: u64 = 16;
        let m = self.dim;

        // per-coordinate proposal: slice law conditioned to [lo_k, hi_k]
        let mut u_lo = Vec::with_capacity(m);
        let mut mass = Vec::with_capacity(m);
        let mut ln_mass_total = 0.0;
        for k in 0..m {
            let a = slice.cdf(lo[k]);
            let b = slice.cdf(hi[k]);
            let w = (b - a).max(1e-300);
            u_lo.push(a);
            mass.push(w);
            ln_mass_total += w.ln();
        }

        let mut points_per_rep: u64 = 1 << 16;
        loop {
            let means: Vec<f64> = (0..REPLICATES)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(rep + 1)),
                    );
                    let mut seq = ScrambledSobol::new(m, &mut rng);
                    let mut pt = vec![0.0; m];
                    let mut t = vec![0.0; m];
                    let mut acc = 0.0;
                    for _ in 0..points_per_rep {
                        seq.next_point(&mut pt);
                        let mut ln_q = -ln_mass_total;
                        for k in 0..m {
                            let v = u_lo[k] + mass[k] * pt[k];
                            let (x, dens) = slice.quantile_with_density(v);
                            t[k] = x;
                            ln_q += dens.ln();
                        }
                        let f = self.density(&t);
                        if f > 0.0 {
                            acc += (f.ln() - ln_q).exp();
                        }
                    }
                    acc / points_per_rep as f64
                })
                .collect();

            let mean = means.iter().sum::<f64>() / REPLICATES as f64;
            let var = means.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>()
                / (REPLICATES as f64 - 1.0);
            let se = (var / REPLICATES as f64).sqrt();
            if se <= accuracy {
                return RectProb {
                    value: mean,
                    std_error: se,
                    accuracy_met: true,
                };
            }
            if points_per_rep >= 1 << 20 {
                return RectProb {
                    value: mean,
                    std_error: se,
                    accuracy_met: false,
                };
            }
            points_per_rep *= 2;
        }
    }
}

/// Rectangle probability of the unit spherical normal: exact product of 1-d
/// CDF differences.
pub fn rectangle_prob_normal(rect: &Rectangle) -> RectProb {
    let mut p = 1.0;
    for k in 0..rect.dim() {
        p *= norm_cdf(rect.upper[k]) - norm_cdf(rect.lower[k]);
    }
    RectProb {
        value: p.clamp(0.0, 1.0),
        std_error: 1e-15,
        accuracy_met: true,
    }
}

/// Normalized 1-d slice of a shifted profile: piecewise-linear CDF through
/// exactly integrated nodes, with the matching piecewise-constant density
/// and piecewise-linear quantile (a consistent sampler for importance maps).
struct Slice {
    radius: f64,
    nodes: Vec<f64>,
    cum: Vec<f64>,
}

const SLICE_SEGMENTS: usize = 2048;

impl Slice {
    fn new(profile: &ShiftedProfile) -> Self {
        // normalizer of the untruncated slice
        let z =
            2.0 * quad::integrate_semi_inf(|t| profile.eval(0.5 * t * t), 0.0, 1e-300, 1e-12).value;
        // radius where the normalized slice falls below 1e-16
        let floor = 1e-16 * z;
        let mut radius = 1.0;
        while profile.eval(0.5 * radius * radius) > floor && radius < 1e9 {
            radius *= 2.0;
        }
        if radius > 1.0 {
            let lo = radius / 2.0;
            radius = quad::brent_root(|r| profile.eval(0.5 * r * r) - floor, lo, radius, 1e-6, 200)
                .unwrap_or(radius);
        }

        let k = SLICE_SEGMENTS;
        let mut nodes = Vec::with_capacity(k + 1);
        for i in 0..=k {
            nodes.push(-radius + 2.0 * radius * i as f64 / k as f64);
        }
        let mut cum = Vec::with_capacity(k + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for i in 0..k {
            let seg = quad::integrate(
                |t| profile.eval(0.5 * t * t),
                nodes[i],
                nodes[i + 1],
                1e-300,
                1e-10,
            );
            acc += seg.value;
            cum.push(acc);
        }
        let total = acc;
        for c in cum.iter_mut() {
            *c /= total;
        }
        *cum.last_mut().unwrap() = 1.0;
        Slice { radius, nodes, cum }
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.nodes[0] {
            return 0.0;
        }
        if x >= *self.nodes.last().unwrap() {
            return 1.0;
        }
        let k = self.nodes.len() - 1;
        let h = (self.nodes[k] - self.nodes[0]) / k as f64;
        let i = (((x - self.nodes[0]) / h) as usize).min(k - 1);
        let t = (x - self.nodes[i]) / (self.nodes[i + 1] - self.nodes[i]);
        self.cum[i] + t * (self.cum[i + 1] - self.cum[i])
    }

    /// Quantile and the (piecewise-constant) proposal density at that point.
    fn quantile_with_density(&self, v: f64) -> (f64, f64) {
        let v = v.clamp(0.0, 1.0);
        let (mut lo, mut hi) = (0usize, self.cum.len() - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.cum[mid] <= v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let du = self.cum[lo + 1] - self.cum[lo];
        let dt = self.nodes[lo + 1] - self.nodes[lo];
        if du <= 0.0 {
            return (0.5 * (self.nodes[lo] + self.nodes[lo + 1]), 1e-300);
        }
        let t = (v - self.cum[lo]) / du;
        (self.nodes[lo] + t * dt, du / dt)
    }
}
