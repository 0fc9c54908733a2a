//! Dirichlet sine eigenbasis of the negative Laplacian on (0, l): transforms
//! between nodal and modal form, the inverse Laplacian, norms, and the
//! pseudo-spectral evaluation of pointwise nonlinearities.
//!
//! The basis functions are w_j(x) = sqrt(2/l)·sin(jπx/l) with eigenvalues
//! λ_j = (jπ/l)². The collocation grid is the uniform interior grid
//! x_i = i·l/N, whose trapezoid rule integrates products of sine modes
//! exactly below the Nyquist index, so discrete orthonormality is exact to
//! rounding rather than a discretization tolerance.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("invalid basis sizes: need l_dom > 0, m >= 1 and n_quad >= 2m (got l_dom={l_dom}, m={m}, n_quad={n_quad})")]
    InvalidSizes { l_dom: f64, m: usize, n_quad: usize },
    #[error("size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} at grid point x = {x} while applying a pointwise map")]
    NonFinite { x: f64, value: f64 },
    #[error("Lp norm needs p >= 1, got {p}")]
    BadExponent { p: f64 },
}

/// Coefficients of a field in the first m basis modes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalVector(pub Vec<f64>);

impl ModalVector {
    pub fn zeros(m: usize) -> Self {
        ModalVector(vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for ModalVector {
    fn from(v: Vec<f64>) -> Self {
        ModalVector(v)
    }
}

impl std::ops::Index<usize> for ModalVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The sine eigenbasis with its collocation grid and precomputed mode table.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    l_dom: f64,
    m: usize,
    n_quad: usize,
    lambda: Vec<f64>,
    nodes: Vec<f64>,
    /// Quadrature weight of the interior trapezoid rule (uniform).
    weight: f64,
    /// w_j(x_i), node-major: entry [i * m + j].
    table: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(l_dom: f64, m: usize, n_quad: usize) -> Result<Self, SpectralError> {
        if !l_dom.is_finite() || l_dom <= 0.0 || m < 1 || n_quad < 2 * m {
            return Err(SpectralError::InvalidSizes { l_dom, m, n_quad });
        }
        let lambda: Vec<f64> = (1..=m)
            .map(|j| {
                let k = j as f64 * PI / l_dom;
                k * k
            })
            .collect();
        let h = l_dom / n_quad as f64;
        let nodes: Vec<f64> = (1..n_quad).map(|i| i as f64 * h).collect();
        let norm = (2.0 / l_dom).sqrt();
        let mut table = vec![0.0; nodes.len() * m];
        for (i, &x) in nodes.iter().enumerate() {
            for j in 0..m {
                table[i * m + j] = norm * ((j + 1) as f64 * PI * x / l_dom).sin();
            }
        }
        Ok(SpectralBasis {
            l_dom,
            m,
            n_quad,
            lambda,
            nodes,
            weight: h,
            table,
        })
    }

    pub fn l_dom(&self) -> f64 {
        self.l_dom
    }

    pub fn mode_count(&self) -> usize {
        self.m
    }

    pub fn n_quad(&self) -> usize {
        self.n_quad
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda[0]
    }

    /// Interior collocation nodes x_i = i·l/N, i = 1..N-1.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn quadrature_weight(&self) -> f64 {
        self.weight
    }

    /// w_j evaluated at an arbitrary point (j is 1-based).
    pub fn basis_value(&self, j: usize, x: f64) -> f64 {
        (2.0 / self.l_dom).sqrt() * (j as f64 * PI * x / self.l_dom).sin()
    }

    /// Highest pointwise polynomial degree whose projection onto the first m
    /// modes stays alias-free on this grid.
    pub fn alias_free_degree(&self) -> f64 {
        2.0 * self.n_quad as f64 / self.m as f64 - 1.0
    }

    /// Modal coefficients of a field given at the interior nodes.
    pub fn project(&self, values: &[f64]) -> Result<ModalVector, SpectralError> {
        if values.len() != self.nodes.len() {
            return Err(SpectralError::SizeMismatch {
                expected: self.nodes.len(),
                got: values.len(),
            });
        }
        let mut coeffs = vec![0.0; self.m];
        for (i, &v) in values.iter().enumerate() {
            let row = &self.table[i * self.m..(i + 1) * self.m];
            for (c, w) in coeffs.iter_mut().zip(row) {
                *c += v * w;
            }
        }
        for c in &mut coeffs {
            *c *= self.weight;
        }
        Ok(ModalVector(coeffs))
    }

    /// Field values at the interior nodes.
    pub fn synthesize(&self, a: &ModalVector) -> Result<Vec<f64>, SpectralError> {
        self.check_len(a)?;
        let mut values = vec![0.0; self.nodes.len()];
        for (i, v) in values.iter_mut().enumerate() {
            let row = &self.table[i * self.m..(i + 1) * self.m];
            *v = row.iter().zip(&a.0).map(|(w, c)| w * c).sum();
        }
        Ok(values)
    }

    /// Field values at arbitrary points.
    pub fn synthesize_at(&self, a: &ModalVector, xs: &[f64]) -> Result<Vec<f64>, SpectralError> {
        self.check_len(a)?;
        let norm = (2.0 / self.l_dom).sqrt();
        Ok(xs
            .iter()
            .map(|&x| {
                a.0.iter()
                    .enumerate()
                    .map(|(j, c)| c * norm * ((j + 1) as f64 * PI * x / self.l_dom).sin())
                    .sum()
            })
            .collect())
    }

    /// Spatial derivative of the field at the interior nodes.
    pub fn gradient_values(&self, a: &ModalVector) -> Result<Vec<f64>, SpectralError> {
        self.check_len(a)?;
        let norm = (2.0 / self.l_dom).sqrt();
        Ok(self
            .nodes
            .iter()
            .map(|&x| {
                a.0.iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let k = (j + 1) as f64 * PI / self.l_dom;
                        c * norm * k * (k * x).cos()
                    })
                    .sum()
            })
            .collect())
    }

    /// Modal solve of −Δv = u: divides each coefficient by its eigenvalue.
    pub fn inverse_laplacian(&self, a: &ModalVector) -> Result<ModalVector, SpectralError> {
        self.check_len(a)?;
        Ok(ModalVector(
            a.0.iter().zip(&self.lambda).map(|(c, l)| c / l).collect(),
        ))
    }

    /// The forward map u = −Δv on modal coefficients.
    pub fn negative_laplacian(&self, a: &ModalVector) -> Result<ModalVector, SpectralError> {
        self.check_len(a)?;
        Ok(ModalVector(
            a.0.iter().zip(&self.lambda).map(|(c, l)| c * l).collect(),
        ))
    }

    /// Parseval L² norm squared.
    pub fn l2_norm_sq(&self, a: &ModalVector) -> f64 {
        a.0.iter().map(|c| c * c).sum()
    }

    /// ‖∇v‖² for the potential v = (−Δ)⁻¹u of the field with coefficients a.
    pub fn potential_grad_sq(&self, a: &ModalVector) -> f64 {
        a.0.iter().zip(&self.lambda).map(|(c, l)| c * c / l).sum()
    }

    /// ‖∇w‖² for the field whose own modal coefficients are given.
    pub fn grad_norm_sq(&self, w: &ModalVector) -> f64 {
        w.0.iter().zip(&self.lambda).map(|(c, l)| c * c * l).sum()
    }

    /// Lp norm by grid quadrature of |u|^p.
    pub fn lp_norm(&self, a: &ModalVector, p: f64) -> Result<f64, SpectralError> {
        if !p.is_finite() || p < 1.0 {
            return Err(SpectralError::BadExponent { p });
        }
        let values = self.synthesize(a)?;
        let sum: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
        Ok((self.weight * sum).powf(1.0 / p))
    }

    /// Lp norm of the spatial gradient, by grid quadrature of |∂x u|^p.
    pub fn gradient_lp_norm(&self, a: &ModalVector, p: f64) -> Result<f64, SpectralError> {
        if !p.is_finite() || p < 1.0 {
            return Err(SpectralError::BadExponent { p });
        }
        let values = self.gradient_values(a)?;
        let sum: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
        Ok((self.weight * sum).powf(1.0 / p))
    }

    /// Pseudo-spectral evaluation of a pointwise map: synthesize, apply on
    /// the oversampled grid, project back onto the first m modes. Non-finite
    /// pointwise values surface as an error the solver turns into a step
    /// failure.
    pub fn apply_map(
        &self,
        a: &ModalVector,
        map: impl Fn(f64) -> f64,
    ) -> Result<ModalVector, SpectralError> {
        let mut values = self.synthesize(a)?;
        for (v, &x) in values.iter_mut().zip(&self.nodes) {
            *v = map(*v);
            if !v.is_finite() {
                return Err(SpectralError::NonFinite { x, value: *v });
            }
        }
        self.project(&values)
    }

    fn check_len(&self, a: &ModalVector) -> Result<(), SpectralError> {
        if a.len() != self.m {
            Err(SpectralError::SizeMismatch {
                expected: self.m,
                got: a.len(),
            })
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn basis(l: f64, m: usize, n: usize) -> SpectralBasis {
        SpectralBasis::new(l, m, n).unwrap()
    }

    #[test]
    fn eigenvalues_are_analytic() {
        let b = basis(1.0, 2, 16);
        assert!((b.eigenvalues()[0] - PI * PI).abs() < 1e-12);
        assert!((b.eigenvalues()[1] - 4.0 * PI * PI).abs() < 1e-12);
        let b2 = basis(2.0, 1, 8);
        assert!((b2.eigenvalues()[0] - (PI / 2.0) * (PI / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn undersized_quadrature_rejected() {
        assert!(matches!(
            SpectralBasis::new(1.0, 4, 4),
            Err(SpectralError::InvalidSizes { .. })
        ));
    }

    #[test]
    fn discrete_gram_matrix_is_identity() {
        let b = basis(2.5, 8, 16);
        for j in 1..=8 {
            let wj: Vec<f64> = b.nodes().iter().map(|&x| b.basis_value(j, x)).collect();
            let coeffs = b.project(&wj).unwrap();
            for (k, &c) in coeffs.as_slice().iter().enumerate() {
                let expect = if k + 1 == j { 1.0 } else { 0.0 };
                assert!(
                    (c - expect).abs() <= 1e-12,
                    "gram[{j},{}] = {c}",
                    k + 1
                );
            }
        }
    }

    #[test]
    fn project_first_mode() {
        let b = basis(1.0, 4, 16);
        let w1: Vec<f64> = b.nodes().iter().map(|&x| b.basis_value(1, x)).collect();
        let a = b.project(&w1).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-13);
        for j in 1..4 {
            assert!(a[j].abs() < 1e-13);
        }
    }

    #[test]
    fn project_plain_sine_has_normalization_coefficient() {
        let b = basis(1.0, 4, 32);
        let field: Vec<f64> = b.nodes().iter().map(|&x| (PI * x).sin()).collect();
        let a = b.project(&field).unwrap();
        assert!((a[0] - 1.0 / 2.0f64.sqrt()).abs() < 1e-12, "a1 = {}", a[0]);
    }

    #[test]
    fn higher_mode_invisible_below_truncation() {
        let b = basis(1.0, 2, 16);
        let field: Vec<f64> = b
            .nodes()
            .iter()
            .map(|&x| b.basis_value(1, x) + 0.5 * b.basis_value(3, x))
            .collect();
        let a = b.project(&field).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-13);
        assert!(a[1].abs() < 1e-13);
    }

    #[test]
    fn synthesize_midpoint_value() {
        let b = basis(1.0, 2, 16);
        let field = b
            .synthesize_at(&ModalVector(vec![1.0, 0.0]), &[0.5])
            .unwrap();
        assert!((field[0] - 2.0f64.sqrt()).abs() < 1e-13);
        let zeros = b.synthesize(&ModalVector::zeros(2)).unwrap();
        assert!(zeros.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inverse_laplacian_divides_by_eigenvalue() {
        let b = basis(1.0, 2, 16);
        let v = b.inverse_laplacian(&ModalVector(vec![1.0, 0.0])).unwrap();
        assert!((v[0] - 1.0 / (PI * PI)).abs() < 1e-14);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn norms_examples() {
        let b = basis(1.0, 2, 16);
        let a = ModalVector(vec![1.0, 0.0]);
        assert!((b.l2_norm_sq(&a) - 1.0).abs() < 1e-14);
        assert!((b.potential_grad_sq(&a) - 1.0 / (PI * PI)).abs() < 1e-14);
        let z = ModalVector::zeros(2);
        assert_eq!(b.l2_norm_sq(&z), 0.0);
        assert_eq!(b.lp_norm(&z, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn quartic_norm_of_sine_is_exact() {
        // ∫₀¹ sin⁴(πx) dx = 3/8
        let b = basis(1.0, 4, 16);
        let a = ModalVector(vec![1.0 / 2.0f64.sqrt(), 0.0, 0.0, 0.0]);
        let l4 = b.lp_norm(&a, 4.0).unwrap();
        assert!((l4.powi(4) - 3.0 / 8.0).abs() < 1e-13, "got {}", l4.powi(4));
    }

    #[test]
    fn cubic_map_matches_trig_expansion() {
        // (√2 sin θ)³ = (3√2/2) sin θ − (√2/2) sin 3θ, so the modal image of
        // w₁ under r³ is (3/2, 0, −1/2, 0, ...).
        let b = basis(1.0, 4, 16);
        let mut a = ModalVector::zeros(4);
        a.0[0] = 1.0;
        let image = b.apply_map(&a, |r| r * r * r).unwrap();
        assert!((image[0] - 1.5).abs() < 1e-12);
        assert!(image[1].abs() < 1e-12);
        assert!((image[2] + 0.5).abs() < 1e-12);
        assert!(image[3].abs() < 1e-12);
    }

    #[test]
    fn cubic_map_truncates_at_small_m() {
        let b = basis(1.0, 2, 16);
        let image = b
            .apply_map(&ModalVector(vec![1.0, 0.0]), |r| r * r * r)
            .unwrap();
        assert!((image[0] - 1.5).abs() < 1e-12);
        assert!(image[1].abs() < 1e-12);
    }

    #[test]
    fn identity_map_is_identity() {
        let b = basis(1.0, 6, 24);
        let a = ModalVector(vec![0.3, -0.2, 0.5, 0.0, 0.1, -0.7]);
        let image = b.apply_map(&a, |r| r).unwrap();
        for (x, y) in a.as_slice().iter().zip(image.as_slice()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn non_finite_map_is_reported() {
        let b = basis(1.0, 2, 8);
        let err = b.apply_map(&ModalVector(vec![1.0, 0.0]), |_| f64::NAN);
        assert!(matches!(err, Err(SpectralError::NonFinite { .. })));
    }

    #[test]
    fn gradient_values_match_analytic_cosine() {
        let b = basis(1.0, 3, 24);
        let a = ModalVector(vec![0.7, 0.0, -0.2]);
        let grad = b.gradient_values(&a).unwrap();
        for (i, &x) in b.nodes().iter().enumerate() {
            let expect = 0.7 * 2.0f64.sqrt() * PI * (PI * x).cos()
                - 0.2 * 2.0f64.sqrt() * 3.0 * PI * (3.0 * PI * x).cos();
            assert!((grad[i] - expect).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(coeffs in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let b = basis(1.0, 6, 24);
            let a = ModalVector(coeffs);
            let back = b.project(&b.synthesize(&a).unwrap()).unwrap();
            for (x, y) in a.as_slice().iter().zip(back.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn parseval_holds(coeffs in proptest::collection::vec(-1.0f64..1.0, 5)) {
            let b = basis(1.3, 5, 20);
            let a = ModalVector(coeffs);
            let values = b.synthesize(&a).unwrap();
            let quad: f64 = values.iter().map(|v| v * v).sum::<f64>() * b.quadrature_weight();
            prop_assert!((quad - b.l2_norm_sq(&a)).abs() <= 1e-10);
        }

        #[test]
        fn laplacian_maps_invert(coeffs in proptest::collection::vec(-1.0f64..1.0, 4)) {
            let b = basis(0.7, 4, 16);
            let a = ModalVector(coeffs);
            let round = b.negative_laplacian(&b.inverse_laplacian(&a).unwrap()).unwrap();
            for (x, y) in a.as_slice().iter().zip(round.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
