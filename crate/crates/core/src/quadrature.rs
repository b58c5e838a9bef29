//! Discrete quadrature rules `{x_k, ω_k}` that define the discrete inner product.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RoqError};
use crate::linalg::C64;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITERS: usize = 100;

/// Which construction produced a rule. Kept for provenance in output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Trapezoidal,
    GaussLegendre,
    TensorProduct,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    kind: RuleKind,
    nodes_x: Vec<f64>,
    nodes_y: Option<Vec<f64>>,
    weights: Vec<f64>,
    domain: Vec<(f64, f64)>,
    /// Factor sizes `(nx, ny)` of a tensor rule.
    factors: Option<(usize, usize)>,
}

impl QuadratureRule {
    /// A one-dimensional rule from explicit nodes and weights.
    pub fn from_parts(nodes: Vec<f64>, weights: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        if nodes.is_empty() {
            return Err(RoqError::Argument("quadrature rule needs at least one node".into()));
        }
        crate::error::check_len(nodes.len(), weights.len(), "rule weights")?;
        if nodes.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(RoqError::Domain("non-finite node or weight".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RoqError::Argument("nodes must be strictly increasing".into()));
        }
        Ok(QuadratureRule {
            kind: RuleKind::Custom,
            nodes_x: nodes,
            nodes_y: None,
            weights,
            domain: vec![domain],
            factors: None,
        })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.domain.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// First coordinate of every node.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes_x
    }

    /// Second coordinate of every node for two-dimensional rules.
    pub fn nodes_y(&self) -> Option<&[f64]> {
        self.nodes_y.as_deref()
    }

    /// Node `k` as `[x]` or `[x, y]`.
    pub fn node(&self, k: usize) -> Vec<f64> {
        match &self.nodes_y {
            Some(y) => vec![self.nodes_x[k], y[k]],
            None => vec![self.nodes_x[k]],
        }
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn factors(&self) -> Option<(usize, usize)> {
        self.factors
    }

    /// `Σ ω_k f(x_k)` for real samples.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        crate::error::check_len(self.len(), values.len(), "integrand samples")?;
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }

    /// `Σ ω_k f(x_k)` for complex samples.
    pub fn integrate_complex(&self, values: &[C64]) -> Result<C64> {
        crate::error::check_len(self.len(), values.len(), "integrand samples")?;
        Ok(self.weights.iter().zip(values).map(|(w, v)| v * *w).sum())
    }

    /// Evaluates a function at every node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|k| f(&self.node(k))).collect()
    }

    /// CSV with columns `index,node_x[,node_y],weight` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.nodes_y {
            Some(_) => out.push_str("index,node_x,node_y,weight\n"),
            None => out.push_str("index,node_x,weight\n"),
        }
        for k in 0..self.len() {
            match &self.nodes_y {
                Some(y) => writeln!(
                    out,
                    "{k},{:.16e},{:.16e},{:.16e}",
                    self.nodes_x[k], y[k], self.weights[k]
                ),
                None => writeln!(out, "{k},{:.16e},{:.16e}", self.nodes_x[k], self.weights[k]),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Endpoint-inclusive equidistant rule with `m - 1` intervals.
pub fn trapezoidal_rule(a: f64, b: f64, m: usize) -> Result<QuadratureRule> {
    if m < 2 {
        return Err(RoqError::Argument(format!("trapezoidal rule needs M >= 2, got {m}")));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(RoqError::Argument(format!("invalid interval [{a}, {b}]")));
    }
    let h = (b - a) / (m - 1) as f64;
    let nodes: Vec<f64> = (0..m).map(|k| if k == m - 1 { b } else { a + h * k as f64 }).collect();
    let mut weights = vec![h; m];
    weights[0] = h / 2.0;
    weights[m - 1] = h / 2.0;
    Ok(QuadratureRule {
        kind: RuleKind::Trapezoidal,
        nodes_x: nodes,
        nodes_y: None,
        weights,
        domain: vec![(a, b)],
        factors: None,
    })
}

/// Legendre polynomial `P_n(x)` and its derivative via the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // endpoint limit P'_n(±1) = (±1)^{n+1} n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p - p_prev) / (x * x - 1.0)
    };
    (p, dp)
}

/// Values of `P_0 … P_{n_max}` at `x`.
pub fn legendre_all(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max >= 1 {
        out.push(x);
    }
    for k in 2..=n_max {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
        out.push(next);
    }
    out
}

/// `m`-point Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre_rule(m: usize) -> Result<QuadratureRule> {
    if m == 0 {
        return Err(RoqError::Argument("Gauss-Legendre rule needs M >= 1".into()));
    }
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    for k in 0..half {
        // k-th largest root
        let mut x = (std::f64::consts::PI * (4 * k + 3) as f64 / (4 * m + 2) as f64).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITERS {
            let (p, dp) = legendre_with_derivative(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(RoqError::Convergence {
                method: "Gauss-Legendre Newton iteration",
                iterations: NEWTON_MAX_ITERS,
                estimate: x,
            }
            .context(format!("root {k} of P_{m}")));
        }
        if m % 2 == 1 && k == half - 1 {
            x = 0.0;
        }
        let (_, dp) = legendre_with_derivative(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[m - 1 - k] = x;
        nodes[k] = -x;
        weights[m - 1 - k] = w;
        weights[k] = w;
    }
    Ok(QuadratureRule {
        kind: RuleKind::GaussLegendre,
        nodes_x: nodes,
        nodes_y: None,
        weights,
        domain: vec![(-1.0, 1.0)],
        factors: None,
    })
}

/// Gauss-Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, m: usize) -> Result<QuadratureRule> {
    map_to_interval(&gauss_legendre_rule(m)?, a, b)
}

/// Tensor product of two 1D rules. Node `k = i * ny + j` pairs `x_i` with `y_j`.
pub fn tensor_product_rule(rx: &QuadratureRule, ry: &QuadratureRule) -> Result<QuadratureRule> {
    if rx.dimension() != 1 || ry.dimension() != 1 {
        return Err(RoqError::Argument(
            "tensor product needs one-dimensional factors".into(),
        ));
    }
    let (nx, ny) = (rx.len(), ry.len());
    let mut xs = Vec::with_capacity(nx * ny);
    let mut ys = Vec::with_capacity(nx * ny);
    let mut ws = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            xs.push(rx.nodes_x[i]);
            ys.push(ry.nodes_x[j]);
            ws.push(rx.weights[i] * ry.weights[j]);
        }
    }
    Ok(QuadratureRule {
        kind: RuleKind::TensorProduct,
        nodes_x: xs,
        nodes_y: Some(ys),
        weights: ws,
        domain: vec![rx.domain[0], ry.domain[0]],
        factors: Some((nx, ny)),
    })
}

/// Magnitude used by [`condition_number`]; implemented for real and complex weights.
pub trait WeightMagnitude {
    fn magnitude(&self) -> f64;
}

impl WeightMagnitude for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl WeightMagnitude for C64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Absolute condition number `Σ_k |ω_k|`.
pub fn condition_number<T: WeightMagnitude>(weights: &[T]) -> f64 {
    weights.iter().map(WeightMagnitude::magnitude).sum()
}

/// Affine transport of a 1D rule onto `[a, b]`.
pub fn map_to_interval(rule: &QuadratureRule, a: f64, b: f64) -> Result<QuadratureRule> {
    if rule.dimension() != 1 {
        return Err(RoqError::Argument("only one-dimensional rules can be mapped".into()));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(RoqError::Argument(format!("invalid interval [{a}, {b}]")));
    }
    let (c, d) = rule.domain[0];
    let s = (b - a) / (d - c);
    let nodes = rule.nodes_x.iter().map(|x| a + (x - c) * s).collect();
    let weights = rule.weights.iter().map(|w| w * s).collect();
    Ok(QuadratureRule {
        kind: rule.kind,
        nodes_x: nodes,
        nodes_y: None,
        weights,
        domain: vec![(a, b)],
        factors: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_trapezoid() {
        let r = trapezoidal_rule(-1.0, 1.0, 2).unwrap();
        assert_eq!(r.nodes(), &[-1.0, 1.0]);
        assert_eq!(r.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn trapezoid_rejects_bad_input() {
        assert!(matches!(trapezoidal_rule(-1.0, 1.0, 1), Err(RoqError::Argument(_))));
        assert!(trapezoidal_rule(1.0, -1.0, 10).is_err());
    }

    #[test]
    fn trapezoid_odd_integrand_vanishes() {
        for m in [2, 3, 10, 999, 1000] {
            let r = trapezoidal_rule(-1.0, 1.0, m).unwrap();
            let v = r.integrate(&r.sample(|x| x[0])).unwrap();
            assert!(v.abs() < 1e-14, "M={m}: {v}");
        }
    }

    #[test]
    fn trapezoid_node_887_of_1000() {
        let r = trapezoidal_rule(-1.0, 1.0, 1000).unwrap();
        assert!((r.nodes()[887] - 0.775775775775776).abs() < 1e-15);
    }

    #[test]
    fn small_gauss_legendre_rules() {
        let r1 = gauss_legendre_rule(1).unwrap();
        assert_eq!(r1.nodes(), &[0.0]);
        assert!((r1.weights()[0] - 2.0).abs() < 1e-15);

        let r2 = gauss_legendre_rule(2).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((r2.nodes()[0] + s).abs() < 1e-15 && (r2.nodes()[1] - s).abs() < 1e-15);
        assert!((r2.weights()[0] - 1.0).abs() < 1e-15 && (r2.weights()[1] - 1.0).abs() < 1e-15);

        let r5 = gauss_legendre_rule(5).unwrap();
        let v = r5.integrate(&r5.sample(|x| x[0].powi(8))).unwrap();
        assert!((v - 2.0 / 9.0).abs() < 1e-15);
        assert!(gauss_legendre_rule(0).is_err());
    }

    #[test]
    fn gauss_legendre_exactness_and_symmetry() {
        for m in [1, 2, 3, 4, 7, 12, 20, 21] {
            let r = gauss_legendre_rule(m).unwrap();
            for p in 0..=(2 * m - 1).min(40) {
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                let v = r.integrate(&r.sample(|x| x[0].powi(p as i32))).unwrap();
                assert!((v - exact).abs() <= 1e-13 * exact.abs().max(1.0), "M={m} p={p}: {v}");
            }
            for k in 0..m {
                assert!((r.nodes()[k] + r.nodes()[m - 1 - k]).abs() < 1e-14);
            }
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn large_gauss_legendre_rules_converge() {
        for m in [400, 1701, 6804] {
            let r = gauss_legendre_rule(m).unwrap();
            let total: f64 = r.weights().iter().sum();
            assert!((total - 2.0).abs() < 1e-12, "M={m}");
            assert!(r.weights().iter().all(|&w| w > 0.0));
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn tensor_rules() {
        let t = trapezoidal_rule(-1.0, 1.0, 2).unwrap();
        let tt = tensor_product_rule(&t, &t).unwrap();
        assert_eq!(tt.len(), 4);
        assert!(tt.weights().iter().all(|&w| w == 1.0));
        assert_eq!(tt.integrate(&[1.0; 4]).unwrap(), 4.0);
        assert_eq!(tt.node(1), vec![-1.0, 1.0]);
        assert_eq!(tt.node(2), vec![1.0, -1.0]);

        let g = gauss_legendre_rule(3).unwrap();
        let gg = tensor_product_rule(&g, &g).unwrap();
        let v = gg.integrate(&gg.sample(|p| p[0] * p[0] * p[1] * p[1])).unwrap();
        assert!((v - 4.0 / 9.0).abs() < 1e-14);
        assert!(tensor_product_rule(&gg, &g).is_err());
    }

    #[test]
    fn mapping() {
        let g = gauss_legendre_rule(2).unwrap();
        let same = map_to_interval(&g, -1.0, 1.0).unwrap();
        assert_eq!(same.nodes(), g.nodes());
        assert_eq!(same.weights(), g.weights());

        let m = map_to_interval(&g, 0.0, 2.0).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((m.nodes()[0] - (1.0 - s)).abs() < 1e-15);
        assert!((m.nodes()[1] - (1.0 + s)).abs() < 1e-15);
        assert!((m.weights()[0] - 1.0).abs() < 1e-15);

        let (a, b) = (40.0, 366.3383434841933);
        let gw = gauss_legendre_on(a, b, 1701).unwrap();
        let len: f64 = gw.weights().iter().sum();
        assert!((len - (b - a)).abs() < 1e-10);
        assert!(map_to_interval(&g, 2.0, 2.0).is_err());
    }

    #[test]
    fn condition_numbers() {
        for m in [1, 5, 50] {
            let g = gauss_legendre_rule(m).unwrap();
            assert!((condition_number(g.weights()) - 2.0).abs() < 1e-13);
        }
        let t = trapezoidal_rule(-1.0, 1.0, 77).unwrap();
        assert!((condition_number(t.weights()) - 2.0).abs() < 1e-14);
        assert_eq!(condition_number(&[C64::new(3.0, 4.0), C64::new(-1.0, 0.0)]), 6.0);
    }

    #[test]
    fn csv_layout() {
        let t = trapezoidal_rule(-1.0, 1.0, 3).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,node_x,weight");
        assert_eq!(lines[1], "0,-1.0000000000000000e0,5.0000000000000000e-1");
        let tt = tensor_product_rule(&t, &t).unwrap();
        assert!(tt.to_csv().starts_with("index,node_x,node_y,weight\n"));
    }

    proptest! {
        #[test]
        fn trapezoid_weights_sum_to_length(a in -50.0f64..50.0, len in 0.1f64..100.0, m in 2usize..500) {
            let r = trapezoidal_rule(a, a + len, m).unwrap();
            let s: f64 = r.weights().iter().sum();
            prop_assert!((s - len).abs() <= 1e-12 * len.max(1.0));
            prop_assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn tensor_counts_and_sums(m1 in 1usize..12, m2 in 2usize..12) {
            let g = gauss_legendre_rule(m1).unwrap();
            let t = trapezoidal_rule(0.0, 3.0, m2).unwrap();
            let r = tensor_product_rule(&g, &t).unwrap();
            prop_assert_eq!(r.len(), m1 * m2);
            let s: f64 = r.weights().iter().sum();
            prop_assert!((s - 6.0).abs() < 1e-12);
        }
    }
}
