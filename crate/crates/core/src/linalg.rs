//! Dense complex linear algebra shared by the greedy, interpolation and
//! quadrature-assembly code.
//!
//! Matrices are stored column-major because every algorithm here works on
//! columns: basis vectors, training snapshots and interpolation residuals.
//! Inner products conjugate their first argument.

use num_complex::Complex64;

use crate::error::{check_len, Result, RoqError};
use crate::quadrature::QuadratureRule;

pub type C64 = Complex64;

/// Default number of Gram-Schmidt passes.
pub const DEFAULT_GS_PASSES: usize = 2;

/// Residual norms below this fraction of the input norm signal linear dependence.
pub const GS_BREAKDOWN_RELATIVE: f64 = 1e-14;

pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_MAX: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Matrix with `rows` rows and no columns, ready for `push_column`.
    pub fn with_rows(rows: usize) -> Self {
        ComplexMatrix {
            rows,
            cols: 0,
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_column_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        check_len(rows * cols, data.len(), "column-major matrix data")?;
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_columns<V: AsRef<[C64]>>(rows: usize, columns: &[V]) -> Result<Self> {
        let mut m = Self::with_rows(rows);
        for c in columns {
            m.push_column(c.as_ref())?;
        }
        Ok(m)
    }

    /// Builds a matrix from row-major nested data, mostly useful in tests.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            check_len(ncols, row.len(), "row length")?;
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[C64]> {
        // chunks_exact panics on a zero chunk size
        let rows = self.rows.max(1);
        self.data.chunks_exact(rows).take(self.cols)
    }

    pub fn push_column(&mut self, column: &[C64]) -> Result<()> {
        check_len(self.rows, column.len(), "pushed column")?;
        self.data.extend_from_slice(column);
        self.cols += 1;
        Ok(())
    }

    pub fn row(&self, i: usize) -> Vec<C64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    /// Leading `k` columns.
    pub fn leading_columns(&self, k: usize) -> ComplexMatrix {
        let k = k.min(self.cols);
        ComplexMatrix {
            rows: self.rows,
            cols: k,
            data: self.data[..k * self.rows].to_vec(),
        }
    }

    /// Leading `k x k` block.
    pub fn leading_block(&self, k: usize) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(k, k);
        for j in 0..k {
            out.column_mut(j).copy_from_slice(&self.column(j)[..k]);
        }
        out
    }

    /// Rows picked in the given order (the action of `Pᵀ`).
    pub fn select_rows(&self, indices: &[usize]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(indices.len(), self.cols);
        for j in 0..self.cols {
            let src = self.column(j);
            let dst = out.column_mut(j);
            for (d, &i) in dst.iter_mut().zip(indices) {
                *d = src[i];
            }
        }
        out
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[C64]) -> Result<Vec<C64>> {
        check_len(self.cols, x.len(), "matrix-vector product")?;
        let mut y = vec![C64::new(0.0, 0.0); self.rows];
        for (col, &xj) in self.columns().zip(x) {
            if xj == C64::new(0.0, 0.0) {
                continue;
            }
            axpy(xj, col, &mut y);
        }
        Ok(y)
    }

    /// `A† x`.
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> Result<Vec<C64>> {
        check_len(self.rows, x.len(), "adjoint matrix-vector product")?;
        Ok(self.columns().map(|col| dot_conj(col, x)).collect())
    }

    /// `Aᵀ x` (no conjugation).
    pub fn transpose_mul_vec(&self, x: &[C64]) -> Result<Vec<C64>> {
        check_len(self.rows, x.len(), "transpose matrix-vector product")?;
        Ok(self
            .columns()
            .map(|col| col.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_len(self.cols, other.rows, "matrix product")?;
        let mut out = ComplexMatrix::with_rows(self.rows);
        for col in other.columns() {
            out.push_column(&self.mul_vec(col)?)?;
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Gram matrix `V† Ω V` under a discrete rule.
    pub fn weighted_gram(&self, weights: &[f64]) -> Result<ComplexMatrix> {
        check_len(self.rows, weights.len(), "weighted Gram matrix")?;
        let mut g = ComplexMatrix::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in 0..self.cols {
                g[(i, j)] = weighted_dot(weights, self.column(i), self.column(j));
            }
        }
        Ok(g)
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[j * self.rows + i]
    }
}

impl serde::Serialize for ComplexMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ComplexMatrix", 3)?;
        st.serialize_field("rows", &self.rows())?;
        st.serialize_field("cols", &self.cols())?;
        st.serialize_field("data", self.as_slice())?;
        st.end()
    }
}

impl<'de> serde::Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        struct Raw {
            rows: usize,
            cols: usize,
            data: Vec<C64>,
        }
        let raw = <Raw as serde::Deserialize>::deserialize(d)?;
        ComplexMatrix::from_column_major(raw.rows, raw.cols, raw.data).map_err(serde::de::Error::custom)
    }
}

/// `Σ conj(a_k) b_k`.
pub fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

/// `Σ w_k conj(f_k) g_k`, the unchecked kernel behind every discrete inner product.
pub fn weighted_dot(w: &[f64], f: &[C64], g: &[C64]) -> C64 {
    let (mut re, mut im) = (0.0, 0.0);
    for ((wk, x), y) in w.iter().zip(f).zip(g) {
        re += wk * (x.re * y.re + x.im * y.im);
        im += wk * (x.re * y.im - x.im * y.re);
    }
    C64::new(re, im)
}

pub fn weighted_norm_sq(w: &[f64], f: &[C64]) -> f64 {
    w.iter().zip(f).map(|(wk, x)| wk * x.norm_sqr()).sum()
}

/// `y += a x`.
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(a: C64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= a;
    }
}

pub fn euclidean_norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Index of the largest modulus; ties go to the lowest index.
pub fn argmax_abs(x: &[C64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, z) in x.iter().enumerate() {
        let a = z.norm();
        match best {
            Some((_, b)) if a <= b => {}
            _ => best = Some((i, a)),
        }
    }
    best
}

/// Discrete inner product `⟨f, g⟩_d = Σ ω_k f*(x_k) g(x_k)`.
pub fn discrete_inner_product(f: &[C64], g: &[C64], rule: &QuadratureRule) -> Result<C64> {
    check_len(rule.len(), f.len(), "inner product lhs")?;
    check_len(rule.len(), g.len(), "inner product rhs")?;
    Ok(weighted_dot(rule.weights(), f, g))
}

pub fn discrete_norm(f: &[C64], rule: &QuadratureRule) -> Result<f64> {
    check_len(rule.len(), f.len(), "discrete norm")?;
    Ok(weighted_norm_sq(rule.weights(), f).max(0.0).sqrt())
}

#[derive(Debug, Clone)]
pub struct GramSchmidtStep {
    /// Orthogonalized and normalized residual.
    pub residual: Vec<C64>,
    /// Norm of the residual before normalization.
    pub residual_norm: f64,
}

/// Orthogonalizes `v` against the (orthonormal) columns of `basis` using
/// `passes` rounds of classical Gram-Schmidt.
///
/// Returns [`RoqError::LinearDependence`] when the residual norm falls below
/// `1e-14 ‖v‖_d`; callers decide whether that ends their iteration.
pub fn gram_schmidt_append(
    basis: &ComplexMatrix,
    v: &[C64],
    rule: &QuadratureRule,
    passes: usize,
) -> Result<GramSchmidtStep> {
    check_len(rule.len(), v.len(), "Gram-Schmidt input")?;
    if basis.cols() > 0 {
        check_len(rule.len(), basis.rows(), "Gram-Schmidt basis")?;
    }
    gram_schmidt_weighted(basis, v, rule.weights(), passes)
}

pub(crate) fn gram_schmidt_weighted(
    basis: &ComplexMatrix,
    v: &[C64],
    w: &[f64],
    passes: usize,
) -> Result<GramSchmidtStep> {
    if passes == 0 {
        return Err(RoqError::Argument("Gram-Schmidt needs at least one pass".into()));
    }
    let input_norm = weighted_norm_sq(w, v).sqrt();
    let mut r = v.to_vec();
    if basis.cols() > 0 {
        for _ in 0..passes {
            let coeffs: Vec<C64> = basis.columns().map(|e| weighted_dot(w, e, &r)).collect();
            for (e, c) in basis.columns().zip(&coeffs) {
                axpy(-c, e, &mut r);
            }
        }
    }
    let residual_norm = weighted_norm_sq(w, &r).sqrt();
    let threshold = GS_BREAKDOWN_RELATIVE * input_norm;
    if !(residual_norm > threshold) {
        return Err(RoqError::LinearDependence {
            residual: residual_norm,
            threshold,
        });
    }
    scale(C64::new(1.0 / residual_norm, 0.0), &mut r);
    Ok(GramSchmidtStep {
        residual: r,
        residual_norm,
    })
}

fn pivot_floor(l: &ComplexMatrix) -> f64 {
    // relative to the matrix scale; catches exact zeros and underflowed pivots
    1e-14 * l.max_abs()
}

/// Forward substitution for `L c = b` with `L` lower triangular. Entries above
/// the diagonal are ignored.
pub fn solve_lower_triangular(l: &ComplexMatrix, b: &[C64]) -> Result<Vec<C64>> {
    let n = l.rows();
    check_len(n, l.cols(), "square triangular matrix")?;
    check_len(n, b.len(), "triangular right-hand side")?;
    let floor = pivot_floor(l);
    let mut c = b.to_vec();
    for i in 0..n {
        let mut s = c[i];
        for j in 0..i {
            s -= l[(i, j)] * c[j];
        }
        let d = l[(i, i)];
        if !(d.norm() > floor) {
            return Err(RoqError::Singular {
                index: i,
                magnitude: d.norm(),
            });
        }
        c[i] = s / d;
    }
    Ok(c)
}

/// Back substitution for `Lᵀ x = b` with `L` lower triangular (no conjugation).
pub fn solve_lower_transposed(l: &ComplexMatrix, b: &[C64]) -> Result<Vec<C64>> {
    let n = l.rows();
    check_len(n, l.cols(), "square triangular matrix")?;
    check_len(n, b.len(), "triangular right-hand side")?;
    let floor = pivot_floor(l);
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= l[(j, i)] * x[j];
        }
        let d = l[(i, i)];
        if !(d.norm() > floor) {
            return Err(RoqError::Singular {
                index: i,
                magnitude: d.norm(),
            });
        }
        x[i] = s / d;
    }
    Ok(x)
}

/// LU factorization with partial pivoting for the dense fallback paths.
#[derive(Debug, Clone)]
pub struct LuDecomposition {
    lu: ComplexMatrix,
    perm: Vec<usize>,
}

impl LuDecomposition {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        let n = a.rows();
        check_len(n, a.cols(), "square LU input")?;
        let floor = 1e-14 * a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, mag) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].norm()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(mag > floor) {
                return Err(RoqError::Singular {
                    index: k,
                    magnitude: mag.max(0.0),
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let t = lu[(k, j)];
                    lu[(i, j)] -= f * t;
                }
            }
        }
        Ok(LuDecomposition { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        let n = self.dim();
        check_len(n, b.len(), "LU right-hand side")?;
        let mut y: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = self.lu[(i, j)] * y[j];
                y[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.lu[(i, j)] * y[j];
                y[i] -= t;
            }
            y[i] /= self.lu[(i, i)];
        }
        Ok(y)
    }

    /// Solves `Aᵀ x = b` (no conjugation).
    pub fn solve_transpose(&self, b: &[C64]) -> Result<Vec<C64>> {
        let n = self.dim();
        check_len(n, b.len(), "LU right-hand side")?;
        // Aᵀ = Uᵀ Lᵀ P
        let mut z = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                let t = self.lu[(j, i)] * z[j];
                z[i] -= t;
            }
            z[i] /= self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.lu[(j, i)] * z[j];
                z[i] -= t;
            }
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        Ok(x)
    }

    /// Solves `A† x = b`.
    pub fn solve_adjoint(&self, b: &[C64]) -> Result<Vec<C64>> {
        let conj_b: Vec<C64> = b.iter().map(|z| z.conj()).collect();
        Ok(self.solve_transpose(&conj_b)?.into_iter().map(|z| z.conj()).collect())
    }

    pub fn inverse(&self) -> Result<ComplexMatrix> {
        let n = self.dim();
        let mut inv = ComplexMatrix::with_rows(n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            e[j] = C64::new(1.0, 0.0);
            inv.push_column(&self.solve(&e)?)?;
        }
        Ok(inv)
    }
}

/// Anything that can be applied together with its adjoint.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Result<Vec<C64>>;
    fn apply_adjoint(&self, y: &[C64]) -> Result<Vec<C64>>;
}

impl LinearOperator for ComplexMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.mul_vec(x)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Result<Vec<C64>> {
        self.adjoint_mul_vec(y)
    }
}

/// Largest singular value of `A` by power iteration on `A†A` (or `AA†` when
/// that is the smaller Gram matrix), starting from the all-ones vector.
///
/// The Gram matrix is formed explicitly so each iteration costs `min(r, c)²`.
pub fn matrix_two_norm(a: &ComplexMatrix) -> Result<f64> {
    if a.is_empty() {
        return Err(RoqError::Argument("two-norm of an empty matrix".into()));
    }
    let gram = if a.rows() >= a.cols() {
        a.weighted_gram(&vec![1.0; a.rows()])?
    } else {
        a.adjoint().weighted_gram(&vec![1.0; a.cols()])?
    };
    let lambda = power_iteration(gram.rows(), |x| gram.mul_vec(x))?;
    Ok(lambda.max(0.0).sqrt())
}

/// Two-norm of an operator known only through products with it and its adjoint.
pub fn operator_two_norm<A: LinearOperator + ?Sized>(a: &A) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(RoqError::Argument("two-norm of an empty matrix".into()));
    }
    let tall = a.nrows() >= a.ncols();
    let dim = if tall { a.ncols() } else { a.nrows() };
    let lambda = power_iteration(dim, |x| {
        if tall {
            a.apply_adjoint(&a.apply(x)?)
        } else {
            a.apply(&a.apply_adjoint(x)?)
        }
    })?;
    Ok(lambda.max(0.0).sqrt())
}

/// Dominant eigenvalue of a Hermitian positive semidefinite operator.
fn power_iteration<F>(dim: usize, apply: F) -> Result<f64>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let starts = [
        vec![C64::new(1.0, 0.0); dim],
        // fallback when the all-ones vector sits in the null space
        (0..dim)
            .map(|k| C64::new(1.0 + 0.37 * k as f64, 0.61 * ((k % 7) as f64) - 1.3))
            .collect::<Vec<_>>(),
    ];
    for start in starts {
        let mut x = start;
        let n0 = euclidean_norm(&x);
        scale(C64::new(1.0 / n0, 0.0), &mut x);
        let mut lambda = 0.0;
        for it in 0..POWER_ITERATION_MAX {
            let y = apply(&x)?;
            let new_lambda = dot_conj(&x, &y).re;
            let ny = euclidean_norm(&y);
            if ny == 0.0 {
                if it == 0 {
                    break;
                }
                return Ok(0.0);
            }
            x = y;
            scale(C64::new(1.0 / ny, 0.0), &mut x);
            if it > 0 && (new_lambda - lambda).abs() <= POWER_ITERATION_TOL * new_lambda.abs() {
                return Ok(new_lambda);
            }
            lambda = new_lambda;
        }
        if lambda != 0.0 {
            return Err(RoqError::Convergence {
                method: "power iteration",
                iterations: POWER_ITERATION_MAX,
                estimate: lambda.max(0.0).sqrt(),
            });
        }
    }
    // every start vector was annihilated: the operator is zero
    Ok(0.0)
}

/// Maximum absolute row sum.
pub fn matrix_inf_norm(a: &ComplexMatrix) -> f64 {
    (0..a.rows())
        .map(|i| (0..a.cols()).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}
