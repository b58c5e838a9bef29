//! Discrete empirical interpolation: point selection, interpolant evaluation
//! and Lebesgue constants.
//!
//! Selection keeps the interpolation residuals `U = V T` (`T` unit upper
//! triangular). Each residual vanishes at all earlier points, so `L = PᵀU` is
//! lower triangular and every solve is a substitution.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{check_len, Result, RoqError};
use crate::greedy::{projection_error, ReducedBasis};
use crate::linalg::{
    argmax_abs, matrix_inf_norm, matrix_two_norm, solve_lower_triangular, weighted_norm_sq, ComplexMatrix,
    LuDecomposition, C64,
};
use crate::quadrature::QuadratureRule;

/// Diagonal entries of `PᵀU` below this fraction of the column's largest
/// modulus mean the columns are numerically dependent.
pub const DEIM_DEPENDENCE_RELATIVE: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct EimOperator {
    pub point_indices: Vec<usize>,
    /// Coordinates of the selected nodes.
    pub nodes: Vec<Vec<f64>>,
    /// Interpolation residuals, `M × n`.
    pub u: ComplexMatrix,
    /// `PᵀU`, lower triangular.
    pub l: ComplexMatrix,
    /// Unit upper triangular with `U = V T`.
    pub t: ComplexMatrix,
    /// Identity of the source basis.
    pub basis_ref: String,
}

fn dependent(step: usize, residual: f64) -> RoqError {
    RoqError::DependentColumns { step, residual }
}

/// Greedy interpolation-point selection over the columns of `v`.
pub fn build_deim(v: &ComplexMatrix, rule: &QuadratureRule) -> Result<EimOperator> {
    let (m, n) = (v.rows(), v.cols());
    check_len(rule.len(), m, "interpolated basis rows")?;
    if n == 0 {
        return Err(RoqError::Argument(
            "interpolation needs at least one basis vector".into(),
        ));
    }
    if n > m {
        return Err(RoqError::Argument(format!("{n} basis vectors exceed {m} nodes")));
    }
    let mut points: Vec<usize> = Vec::with_capacity(n);
    let mut u = ComplexMatrix::with_rows(m);
    let mut l = ComplexMatrix::zeros(n, n);
    let mut t = ComplexMatrix::zeros(n, n);

    for i in 0..n {
        let e = v.column(i);
        let scale = e.iter().map(|z| z.norm()).fold(0.0, f64::max);
        // c solves (PᵀU) c = Pᵀe over the first i points
        let rhs: Vec<C64> = points.iter().map(|&p| e[p]).collect();
        let c = solve_lower_triangular(&l.leading_block(i), &rhs)?;
        let mut r = e.to_vec();
        for (col, ck) in u.columns().zip(&c) {
            for (ri, ui) in r.iter_mut().zip(col) {
                *ri -= ck * ui;
            }
        }
        // t_i = ê_i − T c
        t[(i, i)] = C64::new(1.0, 0.0);
        for (q, ck) in c.iter().enumerate() {
            for row in 0..=q {
                let tq = t[(row, q)];
                t[(row, i)] -= ck * tq;
            }
        }
        let (p, mag) = argmax_abs(&r).expect("nonempty column");
        if !(mag > DEIM_DEPENDENCE_RELATIVE * scale) {
            return Err(dependent(i, mag));
        }
        points.push(p);
        u.push_column(&r)?;
        // row i of PᵀU; earlier residuals need not vanish at the new point
        for (j, col) in u.columns().enumerate() {
            l[(i, j)] = col[p];
        }
    }
    let nodes = points.iter().map(|&p| rule.node(p)).collect();
    Ok(EimOperator {
        point_indices: points,
        nodes,
        u,
        l,
        t,
        basis_ref: crate::hashing::matrix_hash(v),
    })
}

/// Point selection that re-solves against the dense basis prefix at each
/// step, kept as a reference for the triangular variant.
pub fn build_deim_dense(v: &ComplexMatrix) -> Result<Vec<usize>> {
    let (m, n) = (v.rows(), v.cols());
    if n == 0 || n > m {
        return Err(RoqError::Argument(format!(
            "cannot interpolate {n} vectors on {m} nodes"
        )));
    }
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let e = v.column(i);
        let scale = e.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut r = e.to_vec();
        if i > 0 {
            let prefix = v.leading_columns(i);
            let pv = prefix.select_rows(&points);
            let rhs: Vec<C64> = points.iter().map(|&p| e[p]).collect();
            let c = LuDecomposition::new(&pv)?.solve(&rhs)?;
            let vc = prefix.mul_vec(&c)?;
            for (ri, x) in r.iter_mut().zip(&vc) {
                *ri -= x;
            }
        }
        let (p, mag) = argmax_abs(&r).expect("nonempty column");
        if !(mag > DEIM_DEPENDENCE_RELATIVE * scale) {
            return Err(dependent(i, mag));
        }
        points.push(p);
    }
    Ok(points)
}

impl EimOperator {
    pub fn len(&self) -> usize {
        self.point_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_indices.is_empty()
    }

    /// Operator restricted to its first `k` points and basis vectors.
    pub fn truncated(&self, k: usize) -> EimOperator {
        let k = k.min(self.len());
        EimOperator {
            point_indices: self.point_indices[..k].to_vec(),
            nodes: self.nodes[..k].to_vec(),
            u: self.u.leading_columns(k),
            l: self.l.leading_block(k),
            t: self.t.leading_block(k),
            basis_ref: format!("{}[..{k}]", self.basis_ref),
        }
    }

    /// Coefficients in the `V` basis: `c = (PᵀV)⁻¹ values = T L⁻¹ values`.
    pub fn coefficients(&self, values_at_points: &[C64]) -> Result<Vec<C64>> {
        check_len(self.len(), values_at_points.len(), "values at interpolation points")?;
        let y = solve_lower_triangular(&self.l, values_at_points)?;
        self.t.mul_vec(&y)
    }

    /// `(PᵀV)⁻¹` as an explicit matrix.
    pub fn inverse_point_matrix(&self) -> Result<ComplexMatrix> {
        let n = self.len();
        let mut out = ComplexMatrix::with_rows(n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            e[j] = C64::new(1.0, 0.0);
            out.push_column(&self.coefficients(&e)?)?;
        }
        Ok(out)
    }

    /// JSON description plus CSV of the triangular factor.
    pub fn write(&self, dir: &Path, stem: &str, config_hash: &str) -> Result<()> {
        #[derive(Serialize)]
        struct Meta<'a> {
            config_hash: &'a str,
            basis_ref: &'a str,
            point_indices: &'a [usize],
            nodes: &'a [Vec<f64>],
        }
        let meta = Meta {
            config_hash,
            basis_ref: &self.basis_ref,
            point_indices: &self.point_indices,
            nodes: &self.nodes,
        };
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)?)?;
        let mut csv = format!("# config_hash={config_hash}\nrow,col,re,im\n");
        for i in 0..self.len() {
            for j in 0..=i {
                let z = self.l[(i, j)];
                writeln!(csv, "{i},{j},{:.16e},{:.16e}", z.re, z.im).expect("String write");
            }
        }
        std::fs::write(dir.join(format!("{stem}_triangular.csv")), csv)?;
        Ok(())
    }
}

/// Interpolant `V (PᵀV)⁻¹ values` at every node.
pub fn eim_interpolate(op: &EimOperator, v: &ComplexMatrix, values_at_points: &[C64]) -> Result<Vec<C64>> {
    check_len(op.len(), v.cols(), "interpolation basis columns")?;
    match op.coefficients(values_at_points) {
        Ok(c) => v.mul_vec(&c),
        Err(RoqError::Singular { .. }) => {
            let pv = v.select_rows(&op.point_indices);
            let c = LuDecomposition::new(&pv)?.solve(values_at_points)?;
            v.mul_vec(&c)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LebesgueConstants {
    /// Operator norm of the interpolant in the rule's discrete norm.
    pub lambda_2: f64,
    /// Product-of-norms upper bound for `lambda_2`.
    pub lambda_2_bound: f64,
    /// Maximum absolute row sum of `V (PᵀV)⁻¹`.
    pub lambda_inf: f64,
}

/// Lebesgue constants of the interpolant built from `v`.
///
/// With `D = diag(√ω)` and `D_p` its restriction to the points, the discrete
/// operator norm is `‖D V (PᵀV)⁻¹ D_p⁻¹‖₂`; the bound is
/// `‖D V‖₂ ‖(PᵀV)⁻¹‖₂ max_p ω_p^{-1/2}`. Both reduce to the unweighted
/// formulas when every weight is one.
pub fn lebesgue_constants(op: &EimOperator, v: &ComplexMatrix, rule: &QuadratureRule) -> Result<LebesgueConstants> {
    check_len(rule.len(), v.rows(), "basis rows")?;
    check_len(op.len(), v.cols(), "basis columns")?;
    let w = rule.weights();
    if w.iter().any(|&x| !(x > 0.0)) {
        return Err(RoqError::Domain("Lebesgue constants need positive rule weights".into()));
    }
    let kinv = op.inverse_point_matrix()?;
    let vk = v.matmul(&kinv)?;
    let lambda_inf = matrix_inf_norm(&vk);

    let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let mut scaled = vk;
    for j in 0..scaled.cols() {
        let inv = 1.0 / sqrt_w[op.point_indices[j]];
        for (z, s) in scaled.column_mut(j).iter_mut().zip(&sqrt_w) {
            *z *= s * inv;
        }
    }
    let lambda_2 = matrix_two_norm(&scaled)?;

    let mut dv = v.clone();
    for j in 0..dv.cols() {
        for (z, s) in dv.column_mut(j).iter_mut().zip(&sqrt_w) {
            *z *= s;
        }
    }
    let max_inv_point = op.point_indices.iter().map(|&p| 1.0 / sqrt_w[p]).fold(0.0, f64::max);
    let lambda_2_bound = matrix_two_norm(&dv)? * matrix_two_norm(&kinv)? * max_inv_point;
    Ok(LebesgueConstants {
        lambda_2,
        lambda_2_bound,
        lambda_inf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterpolationErrorRow {
    pub index: usize,
    pub projection_error: f64,
    pub interpolation_error: f64,
    /// `lambda_2 × projection_error`.
    pub lebesgue_bound: f64,
    /// `lambda_2_bound × projection_error`.
    pub product_bound: f64,
}

impl InterpolationErrorRow {
    /// Interpolation error below the Lebesgue bound, itself below the product bound.
    pub fn ordered(&self, slack: f64) -> bool {
        self.interpolation_error <= self.lebesgue_bound + slack && self.lebesgue_bound <= self.product_bound + slack
    }
}

/// Interpolation error of every sample against its two computable bounds.
pub fn interpolation_error_report(
    op: &EimOperator,
    basis: &ReducedBasis,
    samples: &ComplexMatrix,
) -> Result<(LebesgueConstants, Vec<InterpolationErrorRow>)> {
    let v = &basis.basis;
    check_len(v.rows(), samples.rows(), "sample rows")?;
    let lc = lebesgue_constants(op, v, &basis.rule)?;
    let w = basis.rule.weights();
    let mut rows = Vec::with_capacity(samples.cols());
    for (index, h) in samples.columns().enumerate() {
        let values: Vec<C64> = op.point_indices.iter().map(|&p| h[p]).collect();
        let ih = eim_interpolate(op, v, &values)?;
        let diff: Vec<C64> = h.iter().zip(&ih).map(|(a, b)| a - b).collect();
        let interpolation_error = weighted_norm_sq(w, &diff).max(0.0).sqrt();
        let pe = projection_error(h, basis)?;
        rows.push(InterpolationErrorRow {
            index,
            projection_error: pe,
            interpolation_error,
            lebesgue_bound: lc.lambda_2 * pe,
            product_bound: lc.lambda_2_bound * pe,
        });
    }
    Ok((lc, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{sample_family, scalar_parameters, FunctionFamily, SampledFunctionSet};
    use crate::greedy::rb_greedy;
    use crate::linalg::gram_schmidt_append;
    use crate::quadrature::{gauss_legendre_rule, trapezoidal_rule};
    use proptest::prelude::*;

    fn lcg_vec(seed: u64, n: usize) -> Vec<C64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        (0..n).map(|_| C64::new(next(), next())).collect()
    }

    fn random_matrix(seed: u64, m: usize, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_column_major(m, n, lcg_vec(seed, m * n)).unwrap()
    }

    fn orthonormal(seed: u64, rule: &QuadratureRule, n: usize) -> ComplexMatrix {
        let mut b = ComplexMatrix::with_rows(rule.len());
        for j in 0..n {
            let s = gram_schmidt_append(&b, &lcg_vec(seed + 31 * j as u64, rule.len()), rule, 2).unwrap();
            b.push_column(&s.residual).unwrap();
        }
        b
    }

    fn unit_rule(m: usize) -> QuadratureRule {
        QuadratureRule::from_parts((0..m).map(|k| k as f64).collect(), vec![1.0; m], (0.0, m as f64)).unwrap()
    }

    #[test]
    fn single_column_picks_its_maximum() {
        let rule = trapezoidal_rule(0.0, 1.0, 5).unwrap();
        let v = ComplexMatrix::from_columns(
            5,
            &[vec![
                C64::new(0.1, 0.0),
                C64::new(0.0, -0.9),
                C64::new(0.3, 0.3),
                C64::new(0.0, 0.0),
                C64::new(0.5, 0.0),
            ]],
        )
        .unwrap();
        assert_eq!(build_deim(&v, &rule).unwrap().point_indices, vec![1]);
    }

    #[test]
    fn unit_vectors_pick_their_positions() {
        let rule = trapezoidal_rule(0.0, 1.0, 7).unwrap();
        let pos = [4, 0, 6, 2];
        let mut v = ComplexMatrix::zeros(7, 4);
        for (j, &p) in pos.iter().enumerate() {
            v[(p, j)] = C64::new(1.0, 0.0);
        }
        let op = build_deim(&v, &rule).unwrap();
        assert_eq!(op.point_indices, pos.to_vec());
        assert_eq!(op.nodes[0], vec![rule.nodes()[4]]);
    }

    #[test]
    fn dependent_columns_are_rejected() {
        let rule = trapezoidal_rule(0.0, 1.0, 6).unwrap();
        let c = lcg_vec(3, 6);
        let twice: Vec<C64> = c.iter().map(|z| z * 2.0).collect();
        let v = ComplexMatrix::from_columns(6, &[c, twice]).unwrap();
        assert!(matches!(
            build_deim(&v, &rule),
            Err(RoqError::DependentColumns { step: 1, .. })
        ));
    }

    #[test]
    fn structure_of_factors() {
        let rule = gauss_legendre_rule(20).unwrap();
        let v = random_matrix(8, 20, 6);
        let op = build_deim(&v, &rule).unwrap();
        for a in 0..6 {
            assert!(op.l[(a, a)].norm() > 0.0);
            for b in a + 1..6 {
                assert_eq!(op.l[(a, b)], C64::new(0.0, 0.0));
                assert_eq!(op.t[(b, a)], C64::new(0.0, 0.0));
            }
            assert_eq!(op.t[(a, a)], C64::new(1.0, 0.0));
        }
        let vt = v.matmul(&op.t).unwrap();
        for (x, y) in vt.as_slice().iter().zip(op.u.as_slice()) {
            assert!((x - y).norm() < 1e-12);
        }
        let mut sorted = op.point_indices.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 6);
    }

    #[test]
    fn interpolation_reproduces_basis_and_values() {
        let rule = gauss_legendre_rule(25).unwrap();
        let v = orthonormal(1, &rule, 8);
        let op = build_deim(&v, &rule).unwrap();
        for k in 0..8 {
            let col = v.column(k);
            let vals: Vec<C64> = op.point_indices.iter().map(|&p| col[p]).collect();
            let ih = eim_interpolate(&op, &v, &vals).unwrap();
            assert!(ih.iter().zip(col).all(|(a, b)| (a - b).norm() < 1e-12));
        }
        let vals = lcg_vec(77, 8);
        let ih = eim_interpolate(&op, &v, &vals).unwrap();
        for (q, &p) in op.point_indices.iter().enumerate() {
            assert!((ih[p] - vals[q]).norm() < 1e-12);
        }
    }

    #[test]
    fn square_case_reproduces_anything() {
        let rule = gauss_legendre_rule(9).unwrap();
        let v = orthonormal(5, &rule, 9);
        let op = build_deim(&v, &rule).unwrap();
        let h = lcg_vec(12, 9);
        let vals: Vec<C64> = op.point_indices.iter().map(|&p| h[p]).collect();
        let ih = eim_interpolate(&op, &v, &vals).unwrap();
        assert!(ih.iter().zip(&h).all(|(a, b)| (a - b).norm() < 1e-11));
    }

    #[test]
    fn lebesgue_constants_unit_weights() {
        let rule = unit_rule(10);
        let sq = orthonormal(2, &rule, 10);
        let op = build_deim(&sq, &rule).unwrap();
        let lc = lebesgue_constants(&op, &sq, &rule).unwrap();
        assert!((lc.lambda_2 - 1.0).abs() < 1e-8);

        let rule = unit_rule(30);
        let v = orthonormal(3, &rule, 7);
        let op = build_deim(&v, &rule).unwrap();
        let lc = lebesgue_constants(&op, &v, &rule).unwrap();
        let inv = matrix_two_norm(&op.inverse_point_matrix().unwrap()).unwrap();
        assert!((lc.lambda_2 - inv).abs() < 1e-8 * inv);
        assert!(lc.lambda_2 <= lc.lambda_2_bound * (1.0 + 1e-12));
        assert!(lc.lambda_inf >= 1.0 - 1e-12);
    }

    #[test]
    fn report_bounds_hold_for_inverse_distance() {
        let rule = gauss_legendre_rule(80).unwrap();
        let mus: Vec<f64> = (0..101).map(|i| -0.1 + 0.002 * i as f64).collect();
        let set = sample_family(&FunctionFamily::InvDist1d, &scalar_parameters(&mus), &rule, true).unwrap();
        let rb = rb_greedy(&set, 1e-5, 0).unwrap();
        let op = build_deim(&rb.basis, &rule).unwrap();
        let (_, rows) = interpolation_error_report(&op, &rb, &set.samples).unwrap();
        assert!(rows.iter().all(|r| r.ordered(1e-12)));
        let basis_set =
            SampledFunctionSet::from_columns("b", rb.basis.clone(), vec![vec![]; rb.len()], rule, false).unwrap();
        let (_, rows) = interpolation_error_report(&op, &rb, &basis_set.samples).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.interpolation_error <= 1e-12 && r.projection_error <= 1e-12));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn triangular_and_dense_variants_agree(seed in 0u64..100_000) {
            let rule = gauss_legendre_rule(20).unwrap();
            let v = random_matrix(seed, 20, 6);
            let op = build_deim(&v, &rule).unwrap();
            let dense = build_deim_dense(&v).unwrap();
            prop_assert_eq!(&op.point_indices, &dense);
            let h = lcg_vec(seed ^ 0xabc, 20);
            let vals: Vec<C64> = dense.iter().map(|&p| h[p]).collect();
            let a = eim_interpolate(&op, &v, &vals).unwrap();
            let pv = v.select_rows(&dense);
            let c = LuDecomposition::new(&pv).unwrap().solve(&vals).unwrap();
            let b = v.mul_vec(&c).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).norm() <= 1e-10 * (1.0 + y.norm()));
            }
        }

        #[test]
        fn points_are_nested(seed in 0u64..100_000, k in 1usize..8) {
            let rule = gauss_legendre_rule(24).unwrap();
            let v = random_matrix(seed, 24, 8);
            let full = build_deim(&v, &rule).unwrap();
            let part = build_deim(&v.leading_columns(k), &rule).unwrap();
            prop_assert_eq!(&full.point_indices[..k], &part.point_indices[..]);
        }
    }
}
