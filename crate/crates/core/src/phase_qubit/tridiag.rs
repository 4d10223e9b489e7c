//! Selected eigenpairs of a real symmetric tridiagonal matrix: Sturm-sequence
//! bisection for the eigenvalues, inverse iteration for the vectors.

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`
/// (`off[i]` couples rows i and i+1).
pub struct Tridiagonal<'a> {
    pub diag: &'a [f64],
    pub off: &'a [f64],
}

impl Tridiagonal<'_> {
    fn n(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin interval containing every eigenvalue.
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    pub fn norm(&self) -> f64 {
        let (lo, hi) = self.bounds();
        lo.abs().max(hi.abs())
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.n() {
            let b2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            d = self.diag[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -tiny;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The k-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        let tol = 2.0 * f64::EPSILON * self.norm().max(f64::MIN_POSITIVE);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    /// Solves (T − σI)·y = b by Gaussian elimination with partial pivoting.
    fn shifted_solve(&self, sigma: f64, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        let eps = f64::EPSILON * self.norm().max(f64::MIN_POSITIVE);
        // U has up to two super-diagonals after pivoting
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        let mut y = b.to_vec();
        let mut d = self.diag[0] - sigma;
        let mut e = if n > 1 { self.off[0] } else { 0.0 };
        for i in 0..n.saturating_sub(1) {
            let sub = self.off[i];
            let next_d = self.diag[i + 1] - sigma;
            let next_e = if i + 2 < n { self.off[i + 1] } else { 0.0 };
            if d.abs() >= sub.abs() {
                let piv = if d == 0.0 { eps } else { d };
                let m = sub / piv;
                u0[i] = piv;
                u1[i] = e;
                u2[i] = 0.0;
                mult[i] = m;
                d = next_d - m * e;
                e = next_e;
            } else {
                let m = d / sub;
                u0[i] = sub;
                u1[i] = next_d;
                u2[i] = next_e;
                mult[i] = m;
                swapped[i] = true;
                d = e - m * next_d;
                e = -m * next_e;
            }
        }
        u0[n - 1] = if d == 0.0 { eps } else { d };
        for i in 0..n.saturating_sub(1) {
            if swapped[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= mult[i] * y[i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            if i + 1 < n {
                s -= u1[i] * y[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * y[i + 2];
            }
            y[i] = s / u0[i];
        }
        y
    }

    /// Eigenvectors for sorted eigenvalues `values`, unit 2-norm. Each vector
    /// is orthogonalised against those of eigenvalues less than 10⁻³·‖T‖
    /// below it.
    pub fn eigenvectors(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let n = self.n();
        let norm = self.norm().max(f64::MIN_POSITIVE);
        let cluster_gap = 1e-3 * norm;
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        let mut cluster_start = 0;
        for (j, &lambda) in values.iter().enumerate() {
            while lambda - values[cluster_start] > cluster_gap {
                cluster_start += 1;
            }
            let sigma = lambda + 4.0 * f64::EPSILON * norm * (j - cluster_start) as f64;
            // deterministic, non-symmetric start vector
            let mut x: Vec<f64> = (0..n)
                .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * (0.618_033_988_75 + j as f64 * 0.1)).sin())
                .collect();
            for _ in 0..4 {
                let mut y = self.shifted_solve(sigma, &x);
                for prev in &out[cluster_start..j] {
                    let dot: f64 = y.iter().zip(prev).map(|(a, b)| a * b).sum();
                    y.iter_mut().zip(prev).for_each(|(a, b)| *a -= dot * b);
                }
                let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                x = y.into_iter().map(|v| v / nrm).collect();
            }
            out.push(x);
        }
        out
    }
}
