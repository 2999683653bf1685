use hvi_core::{EnergyContext, SpectralVector};

/// argmin of φ(u + w) over the Ĥ coordinates. A coarse grid on [−R, R]^d
/// locates the basin, then nested golden-section searches refine it; every
/// partial minimum of a convex function is convex in the remaining
/// variables, so each nested search is unimodal.
pub fn brute_force_theta(ctx: &EnergyContext, u: &SpectralVector, radius: f64) -> SpectralVector {
    let hhat: Vec<usize> = ctx.decomposition().hhat.clone().collect();
    let f = |w: &[f64]| {
        let mut x = u.clone();
        for (n, c) in hhat.iter().zip(w) {
            x.coeffs_mut()[*n] = *c;
        }
        ctx.energy(&x)
    };
    let d = hhat.len();
    let per_axis = 21usize;
    let step = 2.0 * radius / (per_axis - 1) as f64;
    let mut centre = vec![0.0; d];
    let mut best_val = f(&centre);
    let mut w = vec![0.0; d];
    for idx in 0..per_axis.pow(d as u32) {
        let mut rest = idx;
        for c in w.iter_mut() {
            *c = -radius + step * (rest % per_axis) as f64;
            rest /= per_axis;
        }
        let v = f(&w);
        if v < best_val {
            best_val = v;
            centre.clone_from(&w);
        }
    }
    let mut point = centre.clone();
    nested_golden(&f, &centre, 2.0 * step, &mut point, 0);
    let mut theta = ctx.zeros();
    for (n, c) in hhat.iter().zip(&point) {
        theta.coeffs_mut()[*n] = *c;
    }
    theta
}

/// Minimizes over coordinates `level..` with the earlier ones fixed in
/// `point`; leaves the minimizer in `point` and returns the minimum.
fn nested_golden(f: &dyn Fn(&[f64]) -> f64, centre: &[f64], half: f64, point: &mut Vec<f64>, level: usize) -> f64 {
    if level == point.len() {
        return f(point);
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let eval = |t: f64, point: &mut Vec<f64>| {
        point[level] = t;
        nested_golden(f, centre, half, point, level + 1)
    };
    let (mut a, mut b) = (centre[level] - half, centre[level] + half);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = eval(x1, point);
    let mut f2 = eval(x2, point);
    while b - a > 1e-10 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = eval(x1, point);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = eval(x2, point);
        }
    }
    eval(0.5 * (a + b), point)
}
