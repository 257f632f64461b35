//! Small dense symmetric solves for the surrogate regressions.

/// Solve `A x = b` for symmetric positive-definite `A` (row-major `n x n`)
/// by Cholesky factorization. Returns `None` when a pivot falls below
/// `rel_tol` times the largest diagonal entry, i.e. the system is
/// numerically rank-deficient.
pub fn cholesky_solve(a: &[f64], b: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    if n == 0 {
        return Some(Vec::new());
    }
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= rel_tol * scale {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Accumulates `X^T W X` and `X^T W y` one weighted row at a time.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    dim: usize,
    pub xtwx: Vec<f64>,
    pub xtwy: Vec<f64>,
}

impl NormalEquations {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            xtwx: vec![0.0; dim * dim],
            xtwy: vec![0.0; dim],
        }
    }

    pub fn add(&mut self, x: &[f64], y: f64, w: f64) {
        let d = self.dim;
        for i in 0..d {
            let wxi = w * x[i];
            if wxi == 0.0 {
                continue;
            }
            self.xtwy[i] += wxi * y;
            for j in 0..d {
                self.xtwx[i * d + j] += wxi * x[j];
            }
        }
    }

    pub fn add_ridge(&mut self, lambda: f64, skip: &[usize]) {
        for i in 0..self.dim {
            if !skip.contains(&i) {
                self.xtwx[i * self.dim + i] += lambda;
            }
        }
    }

    pub fn solve(&self, rel_tol: f64) -> Option<Vec<f64>> {
        cholesky_solve(&self.xtwx, &self.xtwy, rel_tol)
    }
}
