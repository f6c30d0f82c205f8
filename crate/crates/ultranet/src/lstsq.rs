use nalgebra::{DMatrix, DVector};

/// Ordinary least squares of `y` on the given regressor columns.
///
/// Returns the coefficients and the root-mean-square residual, or `None`
/// when there are fewer observations than columns.
pub(crate) fn least_squares(cols: &[&[f64]], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = y.len();
    let p = cols.len();
    if n < p || p == 0 {
        return None;
    }
    let a = DMatrix::from_fn(n, p, |i, j| cols[j][i]);
    let b = DVector::from_column_slice(y);
    let coef = a.clone().svd(true, true).solve(&b, 1e-12).ok()?;
    let r = &b - &a * &coef;
    let rms = (r.norm_squared() / n as f64).sqrt();
    Some((coef.iter().copied().collect(), rms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let ones = [1.0; 4];
        let (c, r) = least_squares(&[&ones, &x], &y).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] + 0.5).abs() < 1e-12 && r < 1e-12);
    }

    #[test]
    fn too_few_rows() {
        assert!(least_squares(&[&[1.0], &[2.0]], &[1.0]).is_none());
    }
}
