use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::observation::ObservationSet;

/// Column observed in each row, if the pattern has exactly one entry per row
/// and per column.
fn permutation_of(obs: &ObservationSet) -> Result<Vec<usize>> {
    let d = obs.dim();
    if obs.len() != d {
        return Err(Error::NotPermutationPattern);
    }
    let mut col_of_row = vec![usize::MAX; d];
    let mut col_seen = vec![false; d];
    for e in obs.iter() {
        if col_of_row[e.row] != usize::MAX || col_seen[e.col] {
            return Err(Error::NotPermutationPattern);
        }
        col_of_row[e.row] = e.col;
        col_seen[e.col] = true;
    }
    Ok(col_of_row)
}

/// Limit of depth-two gradient flow `W = A B` on a permutation pattern,
/// where every observed entry evolves independently.
///
/// For each observed `(i, j)` the closed form uses
/// `P = (A0 B0)_ij` and `Q = ||row i of A0||^2 + ||column j of B0||^2`.
/// Since `|P| <= Q/2`, the square root inside is always real; the limit is
/// undefined only when the logarithm's argument is not positive and finite,
/// which is reported as [`Error::PretrainUndefined`].
pub fn pretrain_closed_form(
    a0: &DMatrix<f64>,
    b0: &DMatrix<f64>,
    obs: &ObservationSet,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = obs.dim();
    for (name, m) in [("A", a0), ("B", b0)] {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {}x{}, observations index a {d}x{d} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let col_of_row = permutation_of(obs)?;
    let mut row_of_col = vec![0; d];
    for (i, &j) in col_of_row.iter().enumerate() {
        row_of_col[j] = i;
    }

    // Exponent for the observed entry in row i.
    let mut r = vec![0.0; d];
    for e in obs.iter() {
        let (i, j) = (e.row, e.col);
        let p = a0.row(i).dot(&b0.column(j).transpose());
        let q = a0.row(i).norm_squared() + b0.column(j).norm_squared();
        let disc = e.target * e.target - p * p + 0.25 * q * q;
        let ratio = (p + 0.5 * q) / (e.target + disc.max(0.0).sqrt());
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(Error::PretrainUndefined { row: i, col: j, reason: format!("log argument is {ratio}") });
        }
        r[i] = 0.5 * ratio.ln();
    }

    let a = DMatrix::from_fn(d, d, |p, q| {
        let rp = r[p];
        a0[(p, q)] * rp.cosh() - b0[(q, col_of_row[p])] * rp.sinh()
    });
    let b = DMatrix::from_fn(d, d, |p, q| {
        let rq = r[row_of_col[q]];
        b0[(p, q)] * rq.cosh() - a0[(row_of_col[q], p)] * rq.sinh()
    });
    Ok((a, b))
}
