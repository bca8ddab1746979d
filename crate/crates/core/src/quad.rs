//! Adaptive Simpson quadrature used by the distribution and fluid modules.

use thiserror::Error;

/// Maximum bisection depth before a subinterval is declared non-convergent.
const MAX_DEPTH: u32 = 48;
/// Every top-level piece is split at least this many times.
const MIN_DEPTH: u32 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("quadrature did not reach tolerance {tol:e} on [{a}, {b}]")]
pub struct QuadratureError {
    pub a: f64,
    pub b: f64,
    pub tol: f64,
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn refine<F: Fn(f64) -> f64>(f: &F, p: Panel, tol: f64, depth: u32) -> Result<f64, QuadratureError> {
    let m = 0.5 * (p.a + p.b);
    let lm = 0.5 * (p.a + m);
    let rm = 0.5 * (m + p.b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(p.a, m, p.fa, flm, p.fm);
    let right = simpson(m, p.b, p.fm, frm, p.fb);
    let delta = left + right - p.whole;
    if depth >= MIN_DEPTH && delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    // A jump sitting exactly on an endpoint never converges; once the panel is
    // at floating-point resolution its contribution is negligible.
    if p.b - p.a <= 64.0 * f64::EPSILON * p.a.abs().max(p.b.abs()).max(1.0) && (left + right).abs() <= 1e-12 {
        return Ok(left + right);
    }
    if depth >= MAX_DEPTH {
        return Err(QuadratureError { a: p.a, b: p.b, tol });
    }
    let l = refine(
        f,
        Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left },
        0.5 * tol,
        depth + 1,
    )?;
    let r = refine(
        f,
        Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right },
        0.5 * tol,
        depth + 1,
    )?;
    Ok(l + r)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadratureError> {
    if b <= a {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, b, fa, fm, fb);
    refine(&f, Panel { a, b, fa, fm, fb, whole }, tol, 0)
}

/// Integrates `f` over `[a, b]`, splitting at `breaks` (kinks or jumps of the
/// integrand) and geometrically on long stretches away from the origin.
///
/// The tolerance is shared across pieces in proportion to their count.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<f64, QuadratureError> {
    if b <= a {
        return Ok(0.0);
    }
    let mut nodes = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    nodes.extend(inner);
    nodes.push(b);

    let mut pieces = Vec::new();
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        // Long pieces get geometric sub-nodes so the initial Simpson panels
        // see the decay of the integrand instead of skipping over it.
        let mut start = lo;
        if start <= 0.0 {
            let first = hi * 1e-3;
            pieces.push((lo, first));
            start = first;
        }
        while hi / start > 4.0 {
            pieces.push((start, start * 4.0));
            start *= 4.0;
        }
        pieces.push((start, hi));
    }

    let per_piece = tol / pieces.len() as f64;
    pieces
        .into_iter()
        .map(|(lo, hi)| adaptive_simpson(&f, lo, hi, per_piece))
        .sum()
}
