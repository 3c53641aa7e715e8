//! Dense symmetric matrices and a Bunch–Kaufman `P A Pᵀ = L D Lᵀ`
//! factorization that reports inertia.
//!
//! The interior-point solver only talks to [`SymmetricFactor`], so a sparse
//! backend can replace the dense one without touching the algorithm.

/// Row-major square matrix. Symmetric users keep both triangles in sync.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "matrix must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    /// Adds `v` at `(i, j)` and, off the diagonal, at `(j, i)`.
    #[inline]
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.add(i, j, v);
        if i != j {
            self.add(j, i, v);
        }
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let n = self.n;
        for j in 0..n {
            self.data.swap(a * n + j, b * n + j);
        }
    }

    fn swap_cols_from(&mut self, a: usize, b: usize, start_row: usize) {
        if a == b {
            return;
        }
        let n = self.n;
        for i in start_row..n {
            self.data.swap(i * n + a, i * n + b);
        }
    }
}

/// Counts of positive, negative and zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone, Copy)]
enum Pivot {
    One(f64),
    Two([f64; 3]),
}

/// Anything that can factor a symmetric matrix, report its inertia and solve.
pub trait SymmetricFactor {
    fn inertia(&self) -> Inertia;
    fn solve(&self, rhs: &[f64]) -> Vec<f64>;
}

/// Dense Bunch–Kaufman factorization with partial (diagonal or 2×2) pivoting.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    l: DenseMatrix,
    // (row, swapped_with) in elimination order.
    swaps: Vec<(usize, usize)>,
    pivots: Vec<(usize, Pivot)>,
    inertia: Inertia,
}

const BK_ALPHA: f64 = 0.640_388_203_202_208_4; // (1 + sqrt(17)) / 8

impl LdlFactor {
    /// Factors a symmetric matrix (both triangles must be filled). Pivots with
    /// magnitude below `zero_tol * max|A|` are counted as zero eigenvalues.
    pub fn factor(a: &DenseMatrix, zero_tol: f64) -> Self {
        let n = a.dim();
        let mut m = a.clone();
        let scale = m.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
        let tiny = zero_tol * scale;
        let mut swaps = Vec::with_capacity(n);
        let mut pivots = Vec::with_capacity(n);
        let mut inertia = Inertia::default();

        let mut k = 0;
        while k < n {
            let absakk = m.get(k, k).abs();
            let (imax, colmax) = ((k + 1)..n)
                .map(|i| (i, m.get(i, k).abs()))
                .fold((k, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });

            let (kp, step) = if absakk.max(colmax) == 0.0 || absakk >= BK_ALPHA * colmax {
                (k, 1)
            } else {
                let rowmax = (k..n)
                    .filter(|&j| j != imax)
                    .map(|j| m.get(imax, j).abs())
                    .fold(0.0, f64::max);
                if absakk * rowmax >= BK_ALPHA * colmax * colmax {
                    (k, 1)
                } else if m.get(imax, imax).abs() >= BK_ALPHA * rowmax {
                    (imax, 1)
                } else {
                    (imax, 2)
                }
            };

            let kk = k + step - 1;
            if kp != kk {
                m.swap_rows(kk, kp);
                m.swap_cols_from(kk, kp, k);
            }
            swaps.push((kk, kp));

            if step == 1 {
                let d = m.get(k, k);
                if d.abs() <= tiny {
                    inertia.zero += 1;
                } else if d > 0.0 {
                    inertia.positive += 1;
                } else {
                    inertia.negative += 1;
                }
                pivots.push((k, Pivot::One(d)));
                if d != 0.0 {
                    let col: Vec<f64> = ((k + 1)..n).map(|i| m.get(i, k)).collect();
                    for (ii, &ci) in col.iter().enumerate() {
                        if ci == 0.0 {
                            continue;
                        }
                        let i = k + 1 + ii;
                        let f = ci / d;
                        let row = &mut m.data[i * n + k + 1..(i + 1) * n];
                        for (r, &cj) in row.iter_mut().zip(&col) {
                            *r -= f * cj;
                        }
                    }
                    for (ii, ci) in col.iter().enumerate() {
                        m.set(k + 1 + ii, k, ci / d);
                    }
                } else {
                    for i in (k + 1)..n {
                        m.set(i, k, 0.0);
                    }
                }
                k += 1;
            } else {
                let (a, b, c) = (m.get(k, k), m.get(k + 1, k), m.get(k + 1, k + 1));
                let det = a * c - b * b;
                count_2x2(a, b, c, tiny, &mut inertia);
                pivots.push((k, Pivot::Two([a, b, c])));
                let w: Vec<(f64, f64)> = ((k + 2)..n).map(|i| (m.get(i, k), m.get(i, k + 1))).collect();
                // rows of W D⁻¹
                let ld: Vec<(f64, f64)> = w.iter().map(|&(w0, w1)| ((c * w0 - b * w1) / det, (a * w1 - b * w0) / det)).collect();
                for (ii, &(l0, l1)) in ld.iter().enumerate() {
                    let i = k + 2 + ii;
                    let row = &mut m.data[i * n + k + 2..(i + 1) * n];
                    for (r, &(w0, w1)) in row.iter_mut().zip(&w) {
                        *r -= l0 * w0 + l1 * w1;
                    }
                }
                for (ii, &(l0, l1)) in ld.iter().enumerate() {
                    m.set(k + 2 + ii, k, l0);
                    m.set(k + 2 + ii, k + 1, l1);
                }
                k += 2;
            }
        }
        Self { n, l: m, swaps, pivots, inertia }
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

fn count_2x2(a: f64, b: f64, c: f64, tiny: f64, inertia: &mut Inertia) {
    let tr = a + c;
    let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
    let (e1, e2) = (0.5 * (tr + disc), 0.5 * (tr - disc));
    for e in [e1, e2] {
        if e.abs() <= tiny {
            inertia.zero += 1;
        } else if e > 0.0 {
            inertia.positive += 1;
        } else {
            inertia.negative += 1;
        }
    }
}

impl SymmetricFactor for LdlFactor {
    fn inertia(&self) -> Inertia {
        self.inertia
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        // L rows were permuted along with the trailing block, so the whole
        // permutation applies up front.
        for &(kk, kp) in &self.swaps {
            x.swap(kk, kp);
        }
        for &(k, piv) in &self.pivots {
            match piv {
                Pivot::One(_) => {
                    let xk = x[k];
                    for i in (k + 1)..n {
                        x[i] -= self.l.get(i, k) * xk;
                    }
                }
                Pivot::Two(_) => {
                    let (x0, x1) = (x[k], x[k + 1]);
                    for i in (k + 2)..n {
                        x[i] -= self.l.get(i, k) * x0 + self.l.get(i, k + 1) * x1;
                    }
                }
            }
        }
        for &(k, piv) in &self.pivots {
            match piv {
                Pivot::One(d) => x[k] = if d != 0.0 { x[k] / d } else { 0.0 },
                Pivot::Two([a, b, c]) => {
                    let det = a * c - b * b;
                    let (x0, x1) = (x[k], x[k + 1]);
                    x[k] = (c * x0 - b * x1) / det;
                    x[k + 1] = (a * x1 - b * x0) / det;
                }
            }
        }
        for &(k, piv) in self.pivots.iter().rev() {
            match piv {
                Pivot::One(_) => {
                    let s: f64 = ((k + 1)..n).map(|i| self.l.get(i, k) * x[i]).sum();
                    x[k] -= s;
                }
                Pivot::Two(_) => {
                    let s0: f64 = ((k + 2)..n).map(|i| self.l.get(i, k) * x[i]).sum();
                    let s1: f64 = ((k + 2)..n).map(|i| self.l.get(i, k + 1) * x[i]).sum();
                    x[k] -= s0;
                    x[k + 1] -= s1;
                }
            }
        }
        for &(kk, kp) in self.swaps.iter().rev() {
            x.swap(kk, kp);
        }
        x
    }
}

/// [`LdlFactor`] of `D A D` with `D = diag(1/sqrt(max_j |a_ij|))`.
/// The congruence keeps the inertia, and the zero-pivot test becomes
/// meaningful when row magnitudes differ by many orders.
#[derive(Debug, Clone)]
pub struct EquilibratedLdl {
    factor: LdlFactor,
    d: Vec<f64>,
}

impl EquilibratedLdl {
    pub fn factor(a: &DenseMatrix, zero_tol: f64) -> Self {
        let n = a.dim();
        let d: Vec<f64> = (0..n)
            .map(|i| {
                let m = a.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if m > 0.0 && m.is_finite() {
                    1.0 / m.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let mut scaled = a.clone();
        for i in 0..n {
            for j in 0..n {
                scaled.data[i * n + j] *= d[i] * d[j];
            }
        }
        Self { factor: LdlFactor::factor(&scaled, zero_tol), d }
    }
}

impl SymmetricFactor for EquilibratedLdl {
    fn inertia(&self) -> Inertia {
        self.factor.inertia()
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b: Vec<f64> = rhs.iter().zip(&self.d).map(|(r, d)| r * d).collect();
        self.factor.solve(&b).iter().zip(&self.d).map(|(x, d)| x * d).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_spd_system() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let f = LdlFactor::factor(&a, 1e-14);
        assert_eq!(f.inertia(), Inertia { positive: 3, negative: 0, zero: 0 });
        let x = f.solve(&[1.0, 2.0, 3.0]);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(*ri, bi, epsilon = 1e-12);
        }
    }

    #[test]
    fn saddle_point_needs_two_by_two_pivot() {
        // [[0, 1], [1, 0]] has eigenvalues ±1 and a zero diagonal.
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let f = LdlFactor::factor(&a, 1e-14);
        assert_eq!(f.inertia(), Inertia { positive: 1, negative: 1, zero: 0 });
        assert_eq!(f.solve(&[2.0, 3.0]), vec![3.0, 2.0]);
    }

    #[test]
    fn singular_matrix_reports_zero() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let f = LdlFactor::factor(&a, 1e-12);
        assert_eq!(f.inertia(), Inertia { positive: 1, negative: 0, zero: 1 });
    }
}
