//! Adaptive Gauss-Kronrod quadrature on finite and semi-infinite intervals.
//!
//! A 7-point Gauss / 15-point Kronrod pair drives an error-directed interval
//! subdivision (worst interval first). Semi-infinite integrals are mapped to
//! (0, 1) by the substitution x = y/(1-y).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// 15-point Kronrod nodes, positive half (node 0 is the center).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144838258730,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
];

/// Kronrod weights matching `XGK`.
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
];

/// 7-point Gauss weights for the nodes at even indices of `XGK`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub converged: bool,
}

/// One Gauss-Kronrod pass over [a, b]; returns (kronrod, |kronrod - gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = fc * WGK[0];
    let mut gauss = fc * WG[0];

    for j in 1..8 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 0 {
            gauss += WG[j / 2] * fsum;
        }
    }

    kronrod *= half;
    gauss *= half;
    (kronrod, (kronrod - gauss).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
    }
}

const MAX_SEGMENTS: usize = 2000;

/// Adaptive integral of `f` over the finite interval [a, b].
///
/// Stops when the accumulated error estimate drops below
/// `max(abs_tol, rel_tol * |value|)` or the segment budget is exhausted.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            abs_error: 0.0,
            converged: true,
        };
    }
    let (sign, a, b) = if a < b { (1.0, a, b) } else { (-1.0, b, a) };

    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total_value = v;
    let mut total_error = e;

    while total_error > abs_tol.max(rel_tol * total_value.abs()) && heap.len() < MAX_SEGMENTS {
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at machine resolution; keep its estimate
            total_error -= worst.error;
            total_value += 0.0;
            heap.push(Segment {
                error: 0.0,
                ..worst
            });
            continue;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total_value += v1 + v2 - worst.value;
        total_error += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }

    let converged = total_error <= abs_tol.max(rel_tol * total_value.abs());
    QuadResult {
        value: sign * total_value,
        abs_error: total_error,
        converged,
    }
}

/// Adaptive integral over [a, b] pre-split at the interior breakpoints in
/// `cuts`; a sharply localized integrand inside a wide interval is found
/// immediately instead of through repeated bisection.
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    cuts: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult {
    let mut edges = vec![a];
    for &c in cuts {
        if c > a && c < b {
            edges.push(c);
        }
    }
    edges.push(b);
    let per_tol = abs_tol / edges.len() as f64;
    let mut value = 0.0;
    let mut abs_error = 0.0;
    let mut converged = true;
    for w in edges.windows(2) {
        let r = integrate(&f, w[0], w[1], per_tol, rel_tol);
        value += r.value;
        abs_error += r.abs_error;
        converged &= r.converged;
    }
    QuadResult {
        value,
        abs_error,
        converged,
    }
}

/// Adaptive integral of `f` over [a, +inf).
pub fn integrate_semi_inf<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult {
    // x = a + y/(1-y) maps (0,1) -> (a, inf); dx = dy/(1-y)^2
    integrate(
        move |y: f64| {
            let om = 1.0 - y;
            let x = a + y / om;
            f(x) / (om * om)
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Integral of s^(m/2 - 1) h(s) over (0, inf), the radial moment appearing in
/// normalizing constants. The substitution s = y^2 removes the endpoint
/// singularity at s = 0 for m = 1.
pub fn radial_moment<F: Fn(f64) -> f64>(h: F, m: usize, abs_tol: f64, rel_tol: f64) -> QuadResult {
    let pow = m as f64 - 1.0;
    integrate_semi_inf(
        move |y: f64| 2.0 * y.powf(pow) * h(y * y),
        0.0,
        abs_tol,
        rel_tol,
    )
}

/// Classic Brent root finder on [a, b]; f(a) and f(b) must have opposite signs.
pub fn brent_root<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_iter: usize,
) -> Option<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa * fb > 0.0 {
        return None;
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;

    for _ in 0..max_iter {
        if fb == 0.0 || (b - a).abs() < tol {
            return Some(b);
        }
        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };

        let lo = (3.0 * a + b) / 4.0;
        let cond = !((lo.min(b) < s && s < lo.max(b))
            || (mflag && (s - b).abs() < 0.5 * (b - c).abs())
            || (!mflag && (s - b).abs() < 0.5 * d.abs()))
            || (mflag && (b - c).abs() < tol)
            || (!mflag && d.abs() < tol);
        if cond {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }

        let fs = f(s);
        d = c - b;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Some(b)
}
