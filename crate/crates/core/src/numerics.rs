//! Dense complex matrix helpers: Hermitian positive-definite solves,
//! log-determinants and trace products.
//!
//! Matrices are plain `nalgebra` dynamic matrices over `Complex<f64>`. The
//! only extra structure is [`HpdMatrix`], which carries its Cholesky factor so
//! repeated solves against the same matrix do not refactorize.

use nalgebra::{Cholesky, Complex, DMatrix, Dyn};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Dense complex matrix, the carrier for every channel, precoder and filter.
pub type ComplexMatrix = DMatrix<C64>;

/// Entrywise Hermitian tolerance, relative to `max(1, max |m_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Relative residual bound `‖AX − B‖_F / ‖B‖_F` a solve must reach.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

const LN_2: f64 = std::f64::consts::LN_2;

/// A Hermitian positive-definite matrix together with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct HpdMatrix {
    matrix: ComplexMatrix,
    chol: Cholesky<C64, Dyn>,
}

impl HpdMatrix {
    /// Validates that `m` is Hermitian within [`HERMITIAN_TOL`], then
    /// symmetrizes and factorizes it.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        check_square(&m, "HpdMatrix::new")?;
        let asym = hermitian_defect(&m);
        let scale = max_abs(&m).max(1.0);
        if !(asym <= HERMITIAN_TOL * scale) {
            return Err(Error::FactorizationFailure(format!(
                "matrix is not Hermitian: max |M - M^H| = {asym:e}"
            )));
        }
        Self::symmetrized(m)
    }

    /// Replaces `m` by `(m + m^H) / 2` and factorizes it. Use this for
    /// matrices that are Hermitian by construction.
    pub fn symmetrized(m: ComplexMatrix) -> Result<Self> {
        check_square(&m, "HpdMatrix::symmetrized")?;
        if !all_finite(&m) {
            return Err(Error::FactorizationFailure(
                "matrix has non-finite entries".into(),
            ));
        }
        let matrix = hermitian_part(&m);
        let not_pd = || {
            Error::FactorizationFailure(format!(
                "{n}x{n} matrix is not positive definite",
                n = matrix.nrows()
            ))
        };
        let chol = Cholesky::new(matrix.clone()).ok_or_else(not_pd)?;
        // The complex square root never fails, so a negative pivot shows up
        // as a non-real diagonal entry rather than as an error.
        let pivots_ok = chol.l_dirty().diagonal().iter().all(|d| d.re > 0.0 && d.im.abs() <= 1e-12 * d.re && d.re.is_finite());
        if !pivots_ok {
            return Err(not_pd());
        }
        Ok(HpdMatrix { matrix, chol })
    }

    /// Factorizes `m`; if that fails, adds `1e-12 (1 + tr(m)/n) I` and retries once.
    ///
    /// Returns the factorization and whether the jitter was needed.
    pub fn with_jitter(m: ComplexMatrix) -> Result<(Self, bool)> {
        match Self::symmetrized(m.clone()) {
            Ok(h) => Ok((h, false)),
            Err(_) => {
                let n = m.nrows();
                let tr = m.trace().re.abs();
                let jitter = 1e-12 * (1.0 + tr / n as f64);
                let shifted = m + ComplexMatrix::identity(n, n) * C64::new(jitter, 0.0);
                Self::symmetrized(shifted).map(|h| (h, true))
            }
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::symmetrized(ComplexMatrix::identity(n, n)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Lower-triangular `L` with `self = L L^H`.
    pub fn cholesky_factor(&self) -> ComplexMatrix {
        self.chol.l()
    }

    /// Solves `self · X = b`.
    pub fn solve(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        if b.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "solve: matrix is {n}x{n}, right-hand side has {} rows",
                b.nrows(),
                n = self.dim()
            )));
        }
        Ok(self.chol.solve(b))
    }

    /// Base-2 log-determinant, read off the Cholesky diagonal.
    pub fn logdet2(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..self.dim()).map(|i| l[(i, i)].re.ln()).sum::<f64>() / LN_2
    }

    /// The inverse, itself Hermitian positive definite.
    pub fn inverse(&self) -> Result<HpdMatrix> {
        HpdMatrix::symmetrized(self.chol.inverse())
    }
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &HpdMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.solve(b)
}

/// `log2 det(A)` for Hermitian positive-definite `A`.
pub fn logdet_hpd(a: &HpdMatrix) -> f64 {
    a.logdet2()
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    if a.ncols() != b.nrows() || a.nrows() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "trace_product: {}x{} times {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(acc)
}

/// `(m + m^H) / 2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `max |m_ij - conj(m_ji)|`.
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Squared Frobenius norm `Tr(m m^H)`.
pub fn frobenius_sq(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_square(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Builds a complex matrix from row-major `(re, im)` pairs.
pub fn from_pairs(rows: usize, cols: usize, entries: &[(f64, f64)]) -> ComplexMatrix {
    assert_eq!(entries.len(), rows * cols, "entry count must equal rows * cols");
    ComplexMatrix::from_row_iterator(rows, cols, entries.iter().map(|&(re, im)| C64::new(re, im)))
}

/// Builds a real-valued complex matrix from row-major entries.
pub fn from_reals(rows: usize, cols: usize, entries: &[f64]) -> ComplexMatrix {
    assert_eq!(entries.len(), rows * cols, "entry count must equal rows * cols");
    ComplexMatrix::from_row_iterator(rows, cols, entries.iter().map(|&re| C64::new(re, 0.0)))
}

#[inline]
pub(crate) fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_matrix(rng: &mut ChaCha20Rng, r: usize, c: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(r, c, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_hpd(rng: &mut ChaCha20Rng, n: usize) -> ComplexMatrix {
        let m = random_matrix(rng, n, n);
        &m * m.adjoint() + ComplexMatrix::identity(n, n)
    }

    /// Determinant by cofactor expansion along the first row.
    fn cofactor_det(m: &ComplexMatrix) -> C64 {
        let n = m.nrows();
        if n == 1 {
            return m[(0, 0)];
        }
        let mut det = C64::new(0.0, 0.0);
        for j in 0..n {
            let minor = m.clone().remove_row(0).remove_column(j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            det += m[(0, j)] * cofactor_det(&minor) * sign;
        }
        det
    }

    #[test]
    fn identity_solve() {
        let a = HpdMatrix::new(ComplexMatrix::identity(2, 2)).unwrap();
        let b = from_reals(2, 1, &[1.0, 2.0]);
        let x = solve_hpd(&a, &b).unwrap();
        assert!((x - b).norm() < 1e-15);
    }

    #[test]
    fn diagonal_solve() {
        let a = HpdMatrix::new(from_reals(2, 2, &[2.0, 0.0, 0.0, 4.0])).unwrap();
        let x = solve_hpd(&a, &ComplexMatrix::identity(2, 2)).unwrap();
        let expected = from_reals(2, 2, &[0.5, 0.0, 0.0, 0.25]);
        assert!((x - expected).norm() < 1e-15);
    }

    #[test]
    fn random_solve_residual() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for n in 1..=8 {
            for _ in 0..12 {
                let a = random_hpd(&mut rng, n);
                let b = random_matrix(&mut rng, n, 3);
                let x = solve_hpd(&HpdMatrix::new(a.clone()).unwrap(), &b).unwrap();
                let rel = (&a * &x - &b).norm() / b.norm();
                assert!(rel <= SOLVE_RESIDUAL_TOL, "n={n} residual {rel:e}");
            }
        }
    }

    #[test]
    fn logdet_trivial_values() {
        assert_eq!(logdet_hpd(&HpdMatrix::identity(3)), 0.0);
        let a = HpdMatrix::new(from_reals(2, 2, &[2.0, 0.0, 0.0, 2.0])).unwrap();
        assert!((logdet_hpd(&a) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn logdet_matches_cofactor_expansion() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_hpd(&mut rng, 3);
            let det = cofactor_det(&a);
            assert!(det.im.abs() < 1e-9 * det.re.abs());
            let expected = det.re.log2();
            let got = logdet_hpd(&HpdMatrix::new(a).unwrap());
            assert!(
                (got - expected).abs() <= 1e-9 * expected.abs().max(1.0),
                "{got} vs {expected}"
            );
        }
    }

    #[test]
    fn logdet_of_inverse_cancels() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for n in 1..=6 {
            let a = HpdMatrix::new(random_hpd(&mut rng, n)).unwrap();
            let inv = a.inverse().unwrap();
            assert!((logdet_hpd(&a) + logdet_hpd(&inv)).abs() < 1e-8);
        }
    }

    #[test]
    fn trace_product_hand_values() {
        let i2 = ComplexMatrix::identity(2, 2);
        assert_eq!(trace_product(&i2, &i2).unwrap(), real(2.0));
        let a = from_reals(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = from_reals(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(trace_product(&a, &b).unwrap(), real(1.0));
    }

    #[test]
    fn trace_product_matches_explicit_product() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 4, 4);
        let b = random_matrix(&mut rng, 4, 4);
        let explicit = (&a * &b).trace();
        assert!((trace_product(&a, &b).unwrap() - explicit).norm() < 1e-12);
    }

    #[test]
    fn trace_product_rejects_bad_shapes() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(2, 3);
        assert!(matches!(trace_product(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rejects_indefinite_and_non_hermitian() {
        let indefinite = from_reals(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(HpdMatrix::new(indefinite), Err(Error::FactorizationFailure(_))));
        let skew = from_reals(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(HpdMatrix::new(skew), Err(Error::FactorizationFailure(_))));
        let nan = from_reals(1, 1, &[f64::NAN]);
        assert!(HpdMatrix::new(nan).is_err());
    }

    #[test]
    fn jitter_rescues_singular_psd() {
        let v = from_reals(3, 1, &[1.0, 2.0, 3.0]);
        let rank_one = &v * v.adjoint();
        let (h, jittered) = HpdMatrix::with_jitter(rank_one).unwrap();
        assert!(jittered);
        assert_eq!(h.dim(), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix_strategy(n: usize, m: usize) -> impl Strategy<Value = ComplexMatrix> {
            proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n * m)
                .prop_map(move |v| from_pairs(n, m, &v))
        }

        proptest! {
            #[test]
            fn trace_product_is_cyclic(
                (a, b) in (1usize..6, 1usize..6).prop_flat_map(|(m, n)| (matrix_strategy(m, n), matrix_strategy(n, m)))
            ) {
                let ab = trace_product(&a, &b).unwrap();
                let ba = trace_product(&b, &a).unwrap();
                prop_assert!((ab - ba).norm() <= 1e-12 * (1.0 + ab.norm()));
            }

            #[test]
            fn hpd_solve_residual(m in (1usize..=8).prop_flat_map(|n| matrix_strategy(n, n))) {
                let n = m.nrows();
                let a = &m * m.adjoint() + ComplexMatrix::identity(n, n);
                let b = ComplexMatrix::from_fn(n, 2, |i, j| C64::new(i as f64 + 1.0, j as f64 - 0.5));
                let x = solve_hpd(&HpdMatrix::new(a.clone()).unwrap(), &b).unwrap();
                prop_assert!((&a * &x - &b).norm() <= SOLVE_RESIDUAL_TOL * b.norm());
            }
        }
    }
}
