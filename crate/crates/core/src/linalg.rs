//! Dense rank and least-squares helpers over `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff for numerical rank.
pub const RANK_TOL: f64 = 1e-10;

/// Number of singular values above `RANK_TOL * sigma_max`. The zero matrix
/// (and any empty matrix) has rank 0.
pub fn numeric_rank(m: &DMatrix<f64>) -> Result<usize> {
    numeric_rank_with(m, RANK_TOL)
}

pub fn numeric_rank_with(m: &DMatrix<f64>, tol: f64) -> Result<usize> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    // Wide matrices: the SVD of the transpose has the same spectrum and is cheaper.
    let sv = if m.nrows() >= m.ncols() {
        m.clone().singular_values()
    } else {
        m.transpose().singular_values()
    };
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * max).count())
}

/// Ordinary least squares `argmin |X b - y|`. Fails when `X` lacks full
/// column rank.
pub fn least_squares(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> std::result::Result<DVector<f64>, String> {
    if x.nrows() != y.len() {
        return Err(format!(
            "design has {} rows, response has {}",
            x.nrows(),
            y.len()
        ));
    }
    if x.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    if x.nrows() < x.ncols() {
        return Err(format!(
            "{} observations for {} coefficients",
            x.nrows(),
            x.ncols()
        ));
    }
    let rank = numeric_rank(x).map_err(|e| e.to_string())?;
    if rank < x.ncols() {
        return Err(format!("design rank {rank} < {} coefficients", x.ncols()));
    }
    let svd = x.clone().svd(true, true);
    svd.solve(y, 0.0).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_duplicate_columns() {
        assert_eq!(numeric_rank(&DMatrix::identity(2, 2)).unwrap(), 2);
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 2.0, 3.0, 3.0, 1.0, 5.0, 5.0, 0.0]);
        assert!(numeric_rank(&m).unwrap() <= 2);
        assert_eq!(numeric_rank(&DMatrix::zeros(4, 3)).unwrap(), 0);
    }

    #[test]
    fn non_finite_is_domain_error() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(numeric_rank(&m), Err(Error::Domain(_))));
    }

    #[test]
    fn wide_and_tall_agree() {
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(numeric_rank(&m).unwrap(), 1);
        assert_eq!(numeric_rank(&m.transpose()).unwrap(), 1);
    }

    #[test]
    fn least_squares_exact_and_singular() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0]);
        let b = least_squares(&x, &y).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(least_squares(&s, &DVector::from_vec(vec![1.0, 2.0])).is_err());
    }
}
