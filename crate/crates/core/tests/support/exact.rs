//! Exact rank by Gaussian elimination over the rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

pub fn exact_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<BigRational>> =
        rows.iter().map(|r| r.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect()).collect();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(pivot) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        let (done, rest) = m.split_at_mut(rank + 1);
        let pivot_row = &done[rank];
        for row in rest.iter_mut().filter(|row| !row[col].is_zero()) {
            let factor = &row[col] / &pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= &factor * p;
            }
        }
        rank += 1;
    }
    rank
}
