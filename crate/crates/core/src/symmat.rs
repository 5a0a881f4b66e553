//! Dense symmetric matrices and the eigendecomposition used to form
//! `C^{1/2}` and `C^{-1/2}`.
//!
//! The decomposition is recomputed from scratch every iteration. Eigenvalues
//! are clamped from below at `EPS_FLOOR_RELATIVE * max_eigenvalue`, so the
//! inverse square root stays finite when the covariance becomes nearly
//! singular.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative floor applied to eigenvalues of a covariance matrix.
pub const EPS_FLOOR_RELATIVE: f64 = 1e-14;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// A square matrix whose entries are kept exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Wraps `m`, replacing it by `(m + mᵀ) / 2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidMatrix);
        }
        let mut s = SymMatrix(m);
        s.symmetrize();
        Ok(s)
    }

    /// Builds a symmetric matrix from its lower triangle in row-major order:
    /// `a00, a10, a11, a20, a21, a22, ...`.
    pub fn from_lower_triangle(n: usize, lower: &[f64]) -> Result<Self> {
        if n == 0 || lower.len() != n * (n + 1) / 2 {
            return Err(Error::InvalidMatrix);
        }
        let mut m = DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] = lower[k];
                m[(j, i)] = lower[k];
                k += 1;
            }
        }
        Ok(SymMatrix(m))
    }

    pub fn lower_triangle(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Sets entry `(i, j)` and its mirror `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.0[(i, j)] = value;
        self.0[(j, i)] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub(crate) fn symmetrize(&mut self) {
        let n = self.dim();
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (self.0[(i, j)] + self.0[(j, i)]);
                self.0[(i, j)] = avg;
                self.0[(j, i)] = avg;
            }
        }
    }
}

/// Which matrix root [`EigenDecomposition::apply_root`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootPower {
    /// `C^{1/2}`
    Half,
    /// `C^{-1/2}`
    NegHalf,
}

/// Eigendecomposition `C = B diag(d) Bᵀ` of a symmetric positive definite
/// matrix, eigenvalues ascending and clamped at the relative floor.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: DVector<f64>,
    basis: DMatrix<f64>,
    sqrt_eigenvalues: DVector<f64>,
    inv_sqrt_eigenvalues: DVector<f64>,
    raw_min_eigenvalue: f64,
    clamped: usize,
    source_stamp: u64,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues after clamping, ascending.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, in the order of `eigenvalues`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Smallest eigenvalue reported by the solver, before clamping.
    pub fn raw_min_eigenvalue(&self) -> f64 {
        self.raw_min_eigenvalue
    }

    /// Number of eigenvalues raised to the floor.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    pub fn source_stamp(&self) -> u64 {
        self.source_stamp
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    pub fn condition_number(&self) -> f64 {
        self.max_eigenvalue() / self.min_eigenvalue()
    }

    /// Fails with [`Error::StaleDecomposition`] unless this decomposition was
    /// built for iteration `stamp`.
    pub fn ensure_fresh(&self, stamp: u64) -> Result<()> {
        if self.source_stamp == stamp {
            Ok(())
        } else {
            Err(Error::StaleDecomposition {
                stamp: self.source_stamp,
                current: stamp,
            })
        }
    }

    /// Returns `B diag(d^p) Bᵀ z` with `p = ±1/2`.
    pub fn apply_root(&self, z: &DVector<f64>, power: RootPower) -> Result<DVector<f64>> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        let scale = match power {
            RootPower::Half => &self.sqrt_eigenvalues,
            RootPower::NegHalf => &self.inv_sqrt_eigenvalues,
        };
        let mut coords = self.basis.tr_mul(z);
        coords.component_mul_assign(scale);
        Ok(&self.basis * coords)
    }

    /// `‖C^{-1/2} y‖₂`
    pub fn mahalanobis_norm(&self, y: &DVector<f64>) -> Result<f64> {
        Ok(self.apply_root(y, RootPower::NegHalf)?.norm())
    }

    /// Returns `C v` using the clamped spectrum.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let mut coords = self.basis.tr_mul(v);
        coords.component_mul_assign(&self.eigenvalues);
        Ok(&self.basis * coords)
    }

    /// `B diag(d) Bᵀ` with the clamped eigenvalues.
    pub fn reconstruct(&self) -> SymMatrix {
        let scaled = &self.basis * DMatrix::from_diagonal(&self.eigenvalues);
        let mut m = SymMatrix(scaled * self.basis.transpose());
        m.symmetrize();
        m
    }
}

/// Decomposes `c`, tagging the result with `stamp`.
pub fn decompose(c: &SymMatrix, stamp: u64) -> Result<EigenDecomposition> {
    let n = c.dim();
    if n == 0 || !c.is_finite() {
        return Err(Error::InvalidMatrix);
    }
    let eig = SymmetricEigen::try_new(c.as_matrix().clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::DecompositionFailure)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::DecompositionFailure);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let raw_min = eig.eigenvalues[order[0]];
    let raw_max = eig.eigenvalues[order[n - 1]];
    if raw_max <= 0.0 {
        return Err(Error::InvalidMatrix);
    }
    let floor = EPS_FLOOR_RELATIVE * raw_max;

    let mut clamped = 0;
    let eigenvalues = DVector::from_iterator(
        n,
        order.iter().map(|&k| {
            let v = eig.eigenvalues[k];
            if v < floor {
                clamped += 1;
                floor
            } else {
                v
            }
        }),
    );
    let mut basis = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &eig.eigenvectors.column(src));
    }

    Ok(EigenDecomposition {
        sqrt_eigenvalues: eigenvalues.map(f64::sqrt),
        inv_sqrt_eigenvalues: eigenvalues.map(|v| 1.0 / v.sqrt()),
        eigenvalues,
        basis,
        raw_min_eigenvalue: raw_min,
        clamped,
        source_stamp: stamp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn identity_decomposes_to_ones() {
        let dec = decompose(&SymMatrix::identity(3), 0).unwrap();
        assert_eq!(dec.eigenvalues().as_slice(), &[1.0, 1.0, 1.0]);
        let gram = dec.basis().tr_mul(dec.basis());
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_eigenvalues_ascending_axis_aligned() {
        let dec = decompose(&SymMatrix::from_diagonal(&[4.0, 1.0]), 0).unwrap();
        assert_relative_eq!(dec.eigenvalues()[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(dec.eigenvalues()[1], 4.0, epsilon = 1e-14);
        // eigenvalue 1 belongs to axis e2, eigenvalue 4 to e1
        assert_relative_eq!(dec.basis()[(1, 0)].abs(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(dec.basis()[(0, 1)].abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn reconstructs_matrix_built_from_known_factors() {
        // Q from a fixed rotation, known spectrum; C = Q diag Qᵀ.
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let q: DMatrix<f64> = DMatrix::from_iterator(3, 3, rot.matrix().iter().copied());
        let spectrum = DVector::from_column_slice(&[0.5, 2.0, 7.0]);
        let c = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
        let sym = SymMatrix::from_matrix(c.clone()).unwrap();
        let dec = decompose(&sym, 0).unwrap();
        for k in 0..3 {
            assert_relative_eq!(dec.eigenvalues()[k], spectrum[k], max_relative = 1e-12);
        }
        let rec = dec.reconstruct();
        assert!((rec.as_matrix() - &c).norm() / c.norm() < 1e-10);
    }

    #[test]
    fn reconstructs_ata_plus_identity_n5() {
        let a = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let c = a.transpose() * &a + DMatrix::identity(5, 5);
        let dec = decompose(&SymMatrix::from_matrix(c.clone()).unwrap(), 0).unwrap();
        let rec = dec.reconstruct();
        assert!((rec.as_matrix() - &c).norm() / c.norm() < 1e-10);
        let gram = dec.basis().tr_mul(dec.basis());
        assert!((gram - DMatrix::<f64>::identity(5, 5)).amax() <= 1e-10);
    }

    #[test]
    fn apply_root_examples() {
        let id = decompose(&SymMatrix::identity(2), 0).unwrap();
        let r = id.apply_root(&v(&[3.0, 4.0]), RootPower::NegHalf).unwrap();
        assert_relative_eq!(r, v(&[3.0, 4.0]), epsilon = 1e-14);

        let d = decompose(&SymMatrix::from_diagonal(&[4.0, 1.0]), 0).unwrap();
        let r = d.apply_root(&v(&[1.0, 0.0]), RootPower::NegHalf).unwrap();
        assert_relative_eq!(r, v(&[0.5, 0.0]), epsilon = 1e-14);
        let r = d.apply_root(&v(&[2.0, 3.0]), RootPower::Half).unwrap();
        assert_relative_eq!(r, v(&[4.0, 3.0]), epsilon = 1e-14);
    }

    #[test]
    fn mahalanobis_examples() {
        let id = decompose(&SymMatrix::identity(2), 0).unwrap();
        assert_relative_eq!(
            id.mahalanobis_norm(&v(&[3.0, 4.0])).unwrap(),
            5.0,
            epsilon = 1e-14
        );
        let d = decompose(&SymMatrix::from_diagonal(&[4.0, 1.0]), 0).unwrap();
        assert_relative_eq!(
            d.mahalanobis_norm(&v(&[2.0, 0.0])).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            d.mahalanobis_norm(&v(&[2.0, 3.0])).unwrap(),
            10f64.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn rejects_non_finite_and_wrong_length() {
        let mut m = SymMatrix::identity(2);
        m.set(0, 1, f64::NAN);
        assert_eq!(decompose(&m, 0).unwrap_err(), Error::InvalidMatrix);
        let dec = decompose(&SymMatrix::identity(2), 0).unwrap();
        assert!(matches!(
            dec.apply_root(&v(&[1.0]), RootPower::Half),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn stale_stamp_is_reported() {
        let dec = decompose(&SymMatrix::identity(2), 4).unwrap();
        assert!(dec.ensure_fresh(4).is_ok());
        assert_eq!(
            dec.ensure_fresh(5).unwrap_err(),
            Error::StaleDecomposition {
                stamp: 4,
                current: 5
            }
        );
    }

    #[test]
    fn near_singular_spectrum_is_clamped() {
        let dec = decompose(&SymMatrix::from_diagonal(&[1.0, 1e-20, -1e-18]), 0).unwrap();
        assert_eq!(dec.clamped_count(), 2);
        assert!(dec.min_eigenvalue() >= EPS_FLOOR_RELATIVE * dec.max_eigenvalue());
        assert!(dec.raw_min_eigenvalue() < 0.0);
        let r = dec.mahalanobis_norm(&v(&[0.0, 1.0, 1.0])).unwrap();
        assert!(r.is_finite());
    }

    #[test]
    fn lower_triangle_round_trip() {
        let m = SymMatrix::from_lower_triangle(3, &[1.0, 0.5, 2.0, 0.1, 0.2, 3.0]).unwrap();
        assert_eq!(m.get(0, 2), 0.1);
        assert_eq!(m.get(2, 0), 0.1);
        assert_eq!(m.lower_triangle(), vec![1.0, 0.5, 2.0, 0.1, 0.2, 3.0]);
        assert!(SymMatrix::from_lower_triangle(3, &[1.0]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
            proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |xs| {
                let a = DMatrix::from_vec(n, n, xs);
                a.transpose() * &a + DMatrix::identity(n, n) * 0.1
            })
        }

        fn spd_and_vec() -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>)> {
            prop_oneof![Just(2usize), Just(5), Just(10), Just(20)].prop_flat_map(|n| {
                (
                    spd(n),
                    proptest::collection::vec(-10.0f64..10.0, n).prop_map(DVector::from_vec),
                )
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn half_then_neg_half_is_identity((c, z) in spd_and_vec()) {
                let dec = decompose(&SymMatrix::from_matrix(c).unwrap(), 0).unwrap();
                let back = dec
                    .apply_root(&dec.apply_root(&z, RootPower::NegHalf).unwrap(), RootPower::Half)
                    .unwrap();
                prop_assert!((back - &z).norm() <= 1e-8 * z.norm().max(1e-300));
            }

            #[test]
            fn mahalanobis_of_root_sample_is_euclidean((c, z) in spd_and_vec()) {
                let dec = decompose(&SymMatrix::from_matrix(c).unwrap(), 0).unwrap();
                let y = dec.apply_root(&z, RootPower::Half).unwrap();
                let m = dec.mahalanobis_norm(&y).unwrap();
                prop_assert!((m - z.norm()).abs() <= 1e-8 * z.norm().max(1e-300));
            }
        }
    }
}
