//! Adaptive Simpson quadrature on a finite interval.

pub struct QuadResult {
    pub value: f64,
    pub err_est: f64,
    pub evals: usize,
}

/// Integrate `f` over [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> QuadResult {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut evals = 3usize;
    let mut err = 0.0;
    let value = recurse(
        &f, a, b, fa, fm, fb, whole, tol, 50, &mut evals, &mut err,
    );
    QuadResult {
        value,
        err_est: err,
        evals,
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
    err: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        *err += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, evals, err)
        + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, evals, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        // Simpson is exact for cubics.
        let r = adaptive_simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12);
        assert!((r.value - (4.0 - 4.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn integrates_exp() {
        let r = adaptive_simpson(|x| (-x).exp(), 0.0, 5.0, 1e-12);
        let expect = 1.0 - (-5.0f64).exp();
        assert!((r.value - expect).abs() < 1e-10, "{} vs {}", r.value, expect);
    }
}
