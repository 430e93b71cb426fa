//! Small derivative-free optimisers used by the GP fitter and the 1-D
//! acquisition / posterior-mean searches.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Index of the smallest value; ties go to the lowest index. NaN never wins.
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Equally spaced grid over `[lo, hi]` including both endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Grid scan followed by golden-section refinement inside the cells
/// neighbouring the best grid point. The refined point only replaces the grid
/// point when it is strictly better.
pub fn grid_minimize<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    grid_points: usize,
    refine_iters: usize,
) -> (f64, f64) {
    let grid = linspace(lo, hi, grid_points.max(2));
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    refine_grid_minimum(f, &grid, &values, refine_iters)
}

/// The refinement stage of [`grid_minimize`] for values already computed on
/// an ascending `grid`.
pub fn refine_grid_minimum<F: FnMut(f64) -> f64>(mut f: F, grid: &[f64], values: &[f64], refine_iters: usize) -> (f64, f64) {
    let lo = grid.first().copied().unwrap_or(f64::NAN);
    let Some(best) = argmin(values) else {
        return (lo, f64::NAN);
    };
    let (mut x_best, mut f_best) = (grid[best], values[best]);
    if refine_iters > 0 {
        let a = grid[best.saturating_sub(1)];
        let b = grid[(best + 1).min(grid.len() - 1)];
        let (x, fx) = golden_section(&mut f, a, b, refine_iters);
        if fx < f_best {
            x_best = x;
            f_best = fx;
        }
    }
    (x_best, f_best)
}

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    pub initial_step: f64,
    pub f_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evals: 400, initial_step: 0.5, f_tol: 1e-9 }
    }
}

/// Nelder-Mead minimisation with box clamping of every trial point.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let clamp = |x: &mut Vec<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut evals = 0usize;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut x0 = start.to_vec();
    clamp(&mut x0);
    let f0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), f0));
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += if x[i] + opts.initial_step <= upper[i] { opts.initial_step } else { -opts.initial_step };
        clamp(&mut x);
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if (worst - best).abs() <= opts.f_tol * (1.0 + best.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|p| p.0[i]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = (0..n).map(|i| centroid[i] + t * (simplex[n].0[i] - centroid[i])).collect();
            clamp(&mut x);
            x
        };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let t = if fr < simplex[n].1 { -0.5 } else { 0.5 };
            let xc = along(t);
            let fc = eval(&xc, &mut evals);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let mut x: Vec<f64> = (0..n).map(|i| x_best[i] + 0.5 * (p.0[i] - x_best[i])).collect();
                    clamp(&mut x);
                    let fx = eval(&x, &mut evals);
                    *p = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}
