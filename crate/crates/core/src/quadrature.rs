//! Adaptive Simpson quadrature and Gauss-Legendre rules used by the
//! antiderivative evaluations and the dual energy computation.

use thiserror::Error;

#[derive(Debug, Error)]
#[error("quadrature did not converge on [{a}, {b}]: achieved error estimate {achieved:e} (requested abs {requested_abs:e}, rel {requested_rel:e})")]
pub struct QuadratureError {
    pub a: f64,
    pub b: f64,
    pub achieved: f64,
    pub requested_abs: f64,
    pub requested_rel: f64,
}

const MAX_DEPTH: u32 = 48;

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

struct Adaptive<'a> {
    f: &'a dyn Fn(f64) -> f64,
    abs_tol: f64,
    rel_tol: f64,
    worst: f64,
}

impl Adaptive<'_> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        let tol = self.abs_tol.max(self.rel_tol * (left + right).abs());
        if delta.abs() <= 15.0 * tol || depth >= MAX_DEPTH {
            if depth >= MAX_DEPTH {
                self.worst = self.worst.max(delta.abs() / 15.0);
            }
            left + right + delta / 15.0
        } else {
            // Split the tolerance between the halves.
            let save = (self.abs_tol, self.rel_tol);
            self.abs_tol *= 0.5;
            let v = self.recurse(a, m, fa, flm, fm, left, depth + 1)
                + self.recurse(m, b, fm, frm, fb, right, depth + 1);
            self.abs_tol = save.0;
            self.rel_tol = save.1;
            v
        }
    }
}

/// Integrate `f` over `[a, b]` (the endpoints may be in either order).
pub fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    let fa = f(lo);
    let fb = f(hi);
    let fm = f(0.5 * (lo + hi));
    let whole = simpson(fa, fm, fb, hi - lo);
    let mut state = Adaptive {
        f,
        abs_tol,
        rel_tol,
        worst: 0.0,
    };
    let value = state.recurse(lo, hi, fa, fm, fb, whole, 0);
    let tol = abs_tol.max(rel_tol * value.abs());
    if state.worst > tol {
        return Err(QuadratureError {
            a,
            b,
            achieved: state.worst,
            requested_abs: abs_tol,
            requested_rel: rel_tol,
        });
    }
    Ok(sign * value)
}

/// Gauss-Legendre nodes and weights on [0, 1], computed by Newton iteration
/// on the Legendre polynomial.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Initial guess on [-1, 1].
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map from [-1, 1] to [0, 1].
        nodes[n - 1 - k] = 0.5 * (x + 1.0);
        weights[n - 1 - k] = 0.5 * w;
    }
    (nodes, weights)
}

/// Legendre polynomial P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
