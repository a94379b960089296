//! Dense symmetric eigendecomposition (cyclic Jacobi) and PCA.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

const MAX_SWEEPS: usize = 60;

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Nonincreasing.
    pub values: Vec<f64>,
    /// Row `i` is the unit eigenvector for `values[i]`.
    pub vectors: Matrix,
    pub sweeps: usize,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Rotations continue until every off-diagonal entry is below
/// `1e-10 * ||a||_F`. Each eigenvector is signed so that its largest-magnitude
/// entry is nonnegative.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    if a.rows != a.cols {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let norm = a.frobenius_norm();
    let sym_tol = 1e-9 * norm;
    for i in 0..n {
        for j in i + 1..n {
            let d = (a.get(i, j) - a.get(j, i)).abs();
            if d > sym_tol {
                return Err(Error::Precondition(format!(
                    "matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {d:e}"
                )));
            }
        }
    }

    // Symmetrize exactly so row and column updates stay consistent.
    let mut m = a.data.clone();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = avg;
            m[j * n + i] = avg;
        }
    }
    // vt[k] holds eigenvector k (a column of V in the usual notation).
    let mut vt = Matrix::identity(n).data;
    let tol = 1e-10 * norm;
    let mut sweeps = 0;

    let max_off = |m: &[f64]| {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(m[i * n + j].abs());
            }
        }
        off
    };

    loop {
        let off = max_off(&m);
        if off <= tol {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_diagonal: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= tol {
                    continue;
                }
                let (app, aqq) = (m[p * n + p], m[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate_rows(&mut m, n, p, q, c, s);
                for k in 0..n {
                    m[k * n + p] = m[p * n + k];
                    m[k * n + q] = m[q * n + k];
                }
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                rotate_rows(&mut vt, n, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        let v = &vt[i * n..(i + 1) * n];
        let lead = v.iter().copied().fold(
            0.0f64,
            |best, x| if x.abs() > best.abs() { x } else { best },
        );
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        vectors.extend(v.iter().map(|x| x * sign));
    }
    Ok(SymmetricEigen {
        values,
        vectors: Matrix::new(n, n, vectors)?,
        sweeps,
    })
}

fn rotate_rows(m: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = m.split_at_mut(q * n);
    let rp = &mut head[p * n..(p + 1) * n];
    let rq = &mut tail[..n];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major n x n).
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s = a[i * n + j] - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::Numeric(format!(
                        "matrix not positive definite at pivot {i}"
                    )));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - dot(&l[i * n..i * n + i], &y[..i])) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Ok(x)
}

/// Principal components of raw pixel intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    components: Matrix,
    eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn from_parts(mean: Vec<f64>, components: Matrix, eigenvalues: Vec<f64>) -> Result<Self> {
        if components.cols != mean.len() {
            return Err(Error::Dimension(format!(
                "components have {} columns, mean has {} entries",
                components.cols,
                mean.len()
            )));
        }
        if components.rows != eigenvalues.len() {
            return Err(Error::Dimension(format!(
                "{} components but {} eigenvalues",
                components.rows,
                eigenvalues.len()
            )));
        }
        Ok(PcaModel {
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn num_components(&self) -> usize {
        self.components.rows
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input of length {} for PCA over {} features",
                x.len(),
                self.input_dim()
            )));
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        Ok(self.components.mul_vec(&centered))
    }
}

const GRAM_BLOCK: usize = 64;

/// Full symmetric `X^T X` for an `n x d` matrix whose rows are produced on
/// demand by `fill_row(r, out)`. Rows are processed in transposed blocks so
/// the inner products run over contiguous memory.
pub(crate) fn gram(n: usize, d: usize, fill_row: impl Fn(usize, &mut [f64])) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    let mut block = vec![0.0; d * GRAM_BLOCK];
    let mut row = vec![0.0; d];
    for start in (0..n).step_by(GRAM_BLOCK) {
        let len = GRAM_BLOCK.min(n - start);
        block.iter_mut().for_each(|v| *v = 0.0);
        for b in 0..len {
            fill_row(start + b, &mut row);
            for (i, v) in row.iter().enumerate() {
                block[i * GRAM_BLOCK + b] = *v;
            }
        }
        for i in 0..d {
            let xi = &block[i * GRAM_BLOCK..(i + 1) * GRAM_BLOCK];
            let dst = &mut out[i * d..(i + 1) * d];
            for j in i..d {
                dst[j] += dot(xi, &block[j * GRAM_BLOCK..(j + 1) * GRAM_BLOCK]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            out[i * d + j] = out[j * d + i];
        }
    }
    out
}

/// Fits PCA on `samples` (one sample per row), keeping the top `k` components.
///
/// With `center` the covariance `(1/(n-1)) sum (x-mean)(x-mean)^T` is used;
/// otherwise the mean is taken as zero and the same normalization applies to
/// the raw second-moment matrix.
pub fn fit_pca(samples: &Matrix, k: usize, center: bool) -> Result<PcaModel> {
    let (n, d) = (samples.rows, samples.cols);
    if n < 2 {
        return Err(Error::Precondition(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    if k == 0 || k > d {
        return Err(Error::Precondition(format!(
            "component count {k} outside 1..={d}"
        )));
    }
    let mut mean = vec![0.0; d];
    if center {
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(samples.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
    }

    let mut cov = gram(n, d, |r, out| {
        for ((o, v), m) in out.iter_mut().zip(samples.row(r)).zip(&mean) {
            *o = v - m;
        }
    });
    let scale = 1.0 / (n - 1) as f64;
    cov.iter_mut().for_each(|v| *v *= scale);

    let eig = symmetric_eigen(&Matrix::new(d, d, cov)?)?;
    let floor = 1e-8 * eig.values.first().copied().unwrap_or(0.0).abs().max(1.0);
    let eigenvalues = eig.values[..k]
        .iter()
        .map(|&v| {
            if v < -floor {
                Err(Error::Numeric(format!(
                    "covariance eigenvalue {v:e} is negative"
                )))
            } else {
                Ok(v.max(0.0))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let components = Matrix::new(k, d, eig.vectors.data[..k * d].to_vec())?;
    PcaModel::from_parts(mean, components, eigenvalues)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn assert_eigenpairs(a: &Matrix, eig: &SymmetricEigen) {
        let norm = a.frobenius_norm();
        for (i, &lambda) in eig.values.iter().enumerate() {
            let v = eig.vectors.row(i);
            let av = a.mul_vec(v);
            for (x, y) in av.iter().zip(v) {
                assert!((x - lambda * y).abs() <= 1e-7 * norm.max(1.0));
            }
        }
    }

    #[test]
    fn identity_and_diagonal() {
        let eig = symmetric_eigen(&Matrix::identity(3)).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0, 1.0]);

        let a = m(&[&[5.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 9.0]]);
        let eig = symmetric_eigen(&a).unwrap();
        assert_eq!(eig.values, vec![9.0, 5.0, 2.0]);
        assert_eq!(eig.vectors.row(0), &[0.0, 0.0, 1.0]);
        assert_eq!(eig.vectors.row(1), &[1.0, 0.0, 0.0]);
        assert_eq!(eig.vectors.row(2), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_by_two() {
        let a = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let eig = symmetric_eigen(&a).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-12);
        assert!((eig.values[1] - 1.0).abs() < 1e-12);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = eig.vectors.row(0);
        assert!((v0[0] - r).abs() < 1e-12 && (v0[1] - r).abs() < 1e-12);
        let v1 = eig.vectors.row(1);
        assert!((v1[0].abs() - r).abs() < 1e-12 && (v1[0] + v1[1]).abs() < 1e-12);
        assert_eigenpairs(&a, &eig);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            symmetric_eigen(&m(&[&[1.0, 2.0], &[0.0, 1.0]])),
            Err(Error::Precondition(_))
        ));
        assert!(symmetric_eigen(&Matrix::zeros(2, 3)).is_err());
        assert!(matches!(
            symmetric_eigen(&m(&[&[f64::NAN]])),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn random_symmetric_residuals_and_orthonormality() {
        let n = 25;
        let mut data = vec![0.0; n * n];
        let mut state = 0x2545F4914F6CDD1Du64;
        for i in 0..n {
            for j in i..n {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let v = (state % 2000) as f64 / 100.0 - 10.0;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        let a = Matrix::new(n, n, data).unwrap();
        let eig = symmetric_eigen(&a).unwrap();
        assert_eigenpairs(&a, &eig);
        for i in 0..n {
            for j in 0..n {
                let d = dot(eig.vectors.row(i), eig.vectors.row(j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-10);
            }
            let v = eig.vectors.row(i);
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            assert!(lead >= 0.0);
        }
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn cholesky() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&a, 2, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-12);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-12);
        assert!(cholesky_solve(&[0.0], 1, &[1.0]).is_err());
    }

    #[test]
    fn pca_rank_one_line() {
        let mean = [2.0, -1.0];
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|t| {
                let t = t as f64 - 4.5;
                vec![mean[0] + 0.6 * t, mean[1] + 0.8 * t]
            })
            .collect();
        let model = fit_pca(&Matrix::from_rows(&rows).unwrap(), 2, true).unwrap();
        let c0 = model.components().row(0);
        assert!((c0[0].abs() - 0.6).abs() < 1e-9 && (c0[1].abs() - 0.8).abs() < 1e-9);
        assert!(model.eigenvalues()[1].abs() < 1e-9);
        assert!((model.mean()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pca_duplicates_and_square() {
        let rows = vec![vec![3.0, 4.0, 5.0]; 6];
        let model = fit_pca(&Matrix::from_rows(&rows).unwrap(), 3, true).unwrap();
        assert!(model.eigenvalues().iter().all(|&v| v == 0.0));

        let sq = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ])
        .unwrap();
        let model = fit_pca(&sq, 2, true).unwrap();
        for &v in model.eigenvalues() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        let c = model.components();
        assert!(dot(c.row(0), c.row(1)).abs() < 1e-12);
    }

    #[test]
    fn pca_errors() {
        let one = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(fit_pca(&one, 1, true).is_err());
        let two = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(fit_pca(&two, 3, true).is_err());
        assert!(fit_pca(&two, 0, true).is_err());
    }

    #[test]
    fn projection() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let i = i as f64;
                vec![i, (i * 7.0) % 5.0, (i * i) % 11.0]
            })
            .collect();
        let model = fit_pca(&Matrix::from_rows(&rows).unwrap(), 3, true).unwrap();
        let z = model.project(model.mean()).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
        let x: Vec<f64> = model
            .mean()
            .iter()
            .zip(model.components().row(0))
            .map(|(m, c)| m + c)
            .collect();
        let z = model.project(&x).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-12 && z[1].abs() < 1e-12 && z[2].abs() < 1e-12);
        assert!(model.project(&[1.0]).is_err());
    }

    #[test]
    fn uncentered_pca_has_zero_mean() {
        let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let model = fit_pca(&Matrix::from_rows(&rows).unwrap(), 1, false).unwrap();
        assert_eq!(model.mean(), &[0.0, 0.0]);
        // (1 + 4 + 9) * 2 / 2
        assert!((model.eigenvalues()[0] - 14.0).abs() < 1e-9);
    }
}
