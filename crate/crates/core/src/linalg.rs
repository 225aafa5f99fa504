//! Dense row-major matrices, norms and a one-sided Jacobi SVD.
//!
//! Everything here is a pure function of its inputs. The SVD uses Hestenes'
//! one-sided Jacobi iteration, which gives singular values to high relative
//! accuracy and is simple enough to audit. Factors follow a fixed sign
//! convention (first nonzero component of every right singular vector is
//! non-negative) so that downstream reports are reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of Jacobi sweeps before reporting `ConvergenceFailure`.
pub const MAX_JACOBI_SWEEPS: usize = 80;

/// Relative tolerance used by [`spectral_norm_power`].
pub const POWER_ITERATION_TOL: f64 = 1e-10;

/// Dense real matrix, row-major, with all entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for WeightMatrix {
    type Error = Error;
    fn try_from(raw: RawMatrix) -> Result<Self> {
        WeightMatrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl From<WeightMatrix> for RawMatrix {
    fn from(w: WeightMatrix) -> Self {
        RawMatrix {
            rows: w.rows,
            cols: w.cols,
            data: w.data,
        }
    }
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Self::new(n, n, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidMatrix("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64]) -> Result<Self> {
        let data = u
            .iter()
            .flat_map(|a| v.iter().map(move |b| a * b))
            .collect();
        Self::new(u.len(), v.len(), data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the raw entries. Callers are responsible for keeping
    /// them finite; [`WeightMatrix::check_finite`] re-validates.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(pos) => Err(Error::NonFinite(format!(
                "entry ({}, {}) is {}",
                pos / self.cols,
                pos % self.cols,
                self.data[pos]
            ))),
            None => Ok(()),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * alpha).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} - {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, a) in self.row(i).iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `W x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Wᵀ y`.
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            if *yi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(i)) {
                *o += yi * w;
            }
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// ℓ_q norm for `q ≥ 1` (or any `q > 0`, as a quasi-norm); `q = ∞` supported.
pub fn lp_norm(v: &[f64], q: f64) -> f64 {
    if q == 1.0 {
        norm1(v)
    } else if q == 2.0 {
        norm2(v)
    } else if q.is_infinite() {
        norm_inf(v)
    } else {
        v.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Norm used for perturbation budgets and Lipschitz constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Inf,
    Two,
}

impl NormKind {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormKind::Inf => norm_inf(v),
            NormKind::Two => norm2(v),
        }
    }

    /// The dual norm (ℓ1 for ℓ∞, ℓ2 for ℓ2).
    pub fn dual_norm(self, v: &[f64]) -> f64 {
        match self {
            NormKind::Inf => norm1(v),
            NormKind::Two => norm2(v),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NormKind::Inf => "inf",
            NormKind::Two => "two",
        }
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inf" | "linf" | "Inf" => Ok(NormKind::Inf),
            "two" | "l2" | "2" => Ok(NormKind::Two),
            other => Err(Error::BadConfig(format!("unknown norm '{other}' (use inf or two)"))),
        }
    }
}

pub fn frobenius_norm(w: &WeightMatrix) -> f64 {
    norm2(&w.data)
}

/// ℓ∞ → ℓ∞ operator norm: the largest row ℓ1 norm.
pub fn op_norm_inf(w: &WeightMatrix) -> f64 {
    (0..w.rows).fold(0.0, |m, i| m.max(norm1(w.row(i))))
}

/// ℓ2 → ℓ2 operator norm (largest singular value), via the SVD.
pub fn op_norm_2(w: &WeightMatrix) -> Result<f64> {
    Ok(singular_values(w)?[0])
}

/// Thin SVD `W = U diag(σ) Vᵀ` with `r = min(rows, cols)` columns in `U` and `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    /// `rows × r`, orthonormal columns.
    pub u: WeightMatrix,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `cols × r`, orthonormal columns.
    pub v: WeightMatrix,
}

impl SvdFactors {
    pub fn rank_capacity(&self) -> usize {
        self.singular_values.len()
    }

    /// `U_k diag(σ_k) V_kᵀ`.
    pub fn reconstruct(&self, k: usize) -> WeightMatrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let k = k.min(self.singular_values.len());
        let mut out = WeightMatrix::zeros(m, n);
        for r in 0..k {
            let s = self.singular_values[r];
            if s == 0.0 {
                continue;
            }
            for i in 0..m {
                let a = self.u.get(i, r) * s;
                if a == 0.0 {
                    continue;
                }
                let row = out.row_mut(i);
                for (j, o) in row.iter_mut().enumerate() {
                    *o += a * self.v.get(j, r);
                }
            }
        }
        out
    }

    /// Right singular vector `i` (a column of `V`).
    pub fn right_vector(&self, i: usize) -> Vec<f64> {
        self.v.column(i)
    }

    pub fn left_vector(&self, i: usize) -> Vec<f64> {
        self.u.column(i)
    }
}

/// Column-major working copy used by the Jacobi iteration.
fn columns_of(w: &WeightMatrix) -> Vec<Vec<f64>> {
    (0..w.cols).map(|j| w.column(j)).collect()
}

/// One-sided Jacobi on the columns of `a` (`rows ≥ cols`).
/// Returns the rotated columns and the accumulated right rotation (as columns).
fn jacobi_columns(mut cols: Vec<Vec<f64>>, want_v: bool) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n = cols.len();
    let m = cols.first().map_or(0, Vec::len);
    let mut v: Vec<Vec<f64>> = if want_v {
        (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect()
    } else {
        Vec::new()
    };
    let tol = f64::EPSILON * (m.max(1) as f64);
    let mut norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();

    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + 1f64.hypot(zeta));
                let c = 1.0 / 1f64.hypot(t);
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                rotate(&mut left[p], &mut right[0], c, s);
                norms[p] = dot(&cols[p], &cols[p]);
                norms[q] = dot(&cols[q], &cols[q]);
                if want_v {
                    let (vl, vr) = v.split_at_mut(q);
                    rotate(&mut vl[p], &mut vr[0], c, s);
                }
            }
        }
        if !rotated {
            return Ok((cols, v));
        }
    }

    let mut worst: f64 = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            let denom = (norms[p] * norms[q]).sqrt();
            if denom > 0.0 {
                worst = worst.max(dot(&cols[p], &cols[q]).abs() / denom);
            }
        }
    }
    Err(Error::ConvergenceFailure {
        sweeps: MAX_JACOBI_SWEEPS,
        residual: worst,
    })
}

#[inline]
fn rotate(xp: &mut [f64], xq: &mut [f64], c: f64, s: f64) {
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Orthonormal completion: fills `basis[idx]` for every index in `missing`
/// with unit vectors orthogonal to all other columns in `basis`.
fn complete_orthonormal(basis: &mut [Vec<f64>], missing: &[usize], dim: usize) {
    let mut candidate = 0usize;
    for &slot in missing {
        loop {
            assert!(candidate < dim, "orthonormal completion ran out of candidates");
            let mut e = vec![0.0; dim];
            e[candidate] = 1.0;
            candidate += 1;
            // two passes of Gram-Schmidt for stability
            for _ in 0..2 {
                for (j, b) in basis.iter().enumerate() {
                    if j == slot || b.is_empty() {
                        continue;
                    }
                    let proj = dot(&e, b);
                    for (x, y) in e.iter_mut().zip(b) {
                        *x -= proj * y;
                    }
                }
            }
            let n = norm2(&e);
            if n > 1e-6 {
                e.iter_mut().for_each(|x| *x /= n);
                basis[slot] = e;
                break;
            }
        }
    }
}

pub fn svd(w: &WeightMatrix) -> Result<SvdFactors> {
    let transposed = w.rows < w.cols;
    let a = if transposed { w.transpose() } else { w.clone() };
    let (m, n) = a.shape();

    let (cols, vcols) = jacobi_columns(columns_of(&a), true)?;
    let mut sigma: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();

    // descending, ties by original index
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));

    let smax = order.first().map_or(0.0, |&i| sigma[i]);
    let small = smax * f64::EPSILON * (m as f64) * 4.0;
    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut vsorted: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (slot, &i) in order.iter().enumerate() {
        let s = sigma[i];
        if s > small && s > 0.0 {
            ucols.push(cols[i].iter().map(|x| x / s).collect());
        } else {
            ucols.push(Vec::new());
            missing.push(slot);
        }
        vsorted.push(vcols[i].clone());
    }
    sigma = order.iter().map(|&i| sigma[i]).collect();
    if !missing.is_empty() {
        complete_orthonormal(&mut ucols, &missing, m);
    }

    // ucols: left vectors of `a` (length m); vsorted: right vectors of `a` (length n)
    let (mut left, mut right) = if transposed {
        (vsorted, ucols)
    } else {
        (ucols, vsorted)
    };

    for (l, r) in left.iter_mut().zip(right.iter_mut()) {
        let lead = r.iter().copied().find(|x| x.abs() > f64::EPSILON).unwrap_or(0.0);
        if lead < 0.0 {
            l.iter_mut().for_each(|x| *x = -*x);
            r.iter_mut().for_each(|x| *x = -*x);
        }
    }

    let rank = n;
    let to_matrix = |vecs: &[Vec<f64>], dim: usize| {
        let mut mtx = WeightMatrix::zeros(dim, rank);
        for (c, vec) in vecs.iter().enumerate() {
            for (r, x) in vec.iter().enumerate() {
                mtx.set(r, c, *x);
            }
        }
        mtx
    };
    Ok(SvdFactors {
        u: to_matrix(&left, w.rows),
        singular_values: sigma,
        v: to_matrix(&right, w.cols),
    })
}

/// Singular values only (descending). Skips accumulating the rotation.
pub fn singular_values(w: &WeightMatrix) -> Result<Vec<f64>> {
    let a = if w.rows < w.cols { w.transpose() } else { w.clone() };
    let (cols, _) = jacobi_columns(columns_of(&a), false)?;
    let mut sigma: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    Ok(sigma)
}

/// Largest singular value by power iteration on `WᵀW`, an independent route
/// to [`op_norm_2`]. Stops when the Rayleigh quotient changes by less than
/// `POWER_ITERATION_TOL` relative.
pub fn spectral_norm_power(w: &WeightMatrix, max_iter: usize) -> Result<f64> {
    let n = w.cols;
    // deterministic, generic start vector
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).sin()).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut prev = 0.0;
    for it in 0..max_iter {
        let y = w.matvec(&x);
        let z = w.matvec_t(&y);
        let lambda = dot(&x, &z);
        let nz = norm2(&z);
        if nz == 0.0 {
            return Ok(0.0);
        }
        x = z.iter().map(|v| v / nz).collect();
        if it > 0 && (lambda - prev).abs() <= POWER_ITERATION_TOL * lambda.abs() {
            return Ok(lambda.max(0.0).sqrt());
        }
        prev = lambda;
    }
    Err(Error::ConvergenceFailure {
        sweeps: max_iter,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> WeightMatrix {
        let data = (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect();
        WeightMatrix::new(r, c, data).unwrap()
    }

    fn ortho_error(m: &WeightMatrix) -> f64 {
        let g = m.transpose().matmul(m).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.get(i, j) - target).abs());
            }
        }
        worst
    }

    #[test]
    fn frobenius_examples() {
        assert!((frobenius_norm(&WeightMatrix::identity(3)) - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(frobenius_norm(&WeightMatrix::zeros(2, 5)), 0.0);
        let w = WeightMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(frobenius_norm(&w), 5.0);
    }

    #[test]
    fn op_norm_inf_examples() {
        assert_eq!(op_norm_inf(&WeightMatrix::identity(5)), 1.0);
        let w = WeightMatrix::from_rows(&[vec![10.0, 2.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(op_norm_inf(&w), 12.0);
        assert_eq!(op_norm_inf(&WeightMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(WeightMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(WeightMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(WeightMatrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn svd_diagonal() {
        let f = svd(&WeightMatrix::from_diag(&[3.0, 1.0]).unwrap()).unwrap();
        assert_eq!(f.singular_values, vec![3.0, 1.0]);
        let f = svd(&WeightMatrix::from_diag(&[1.0, 3.0]).unwrap()).unwrap();
        assert_eq!(f.singular_values, vec![3.0, 1.0]);
    }

    #[test]
    fn svd_rank_one() {
        let u = [1.0, -2.0, 0.5];
        let v = [3.0, 1.0, -1.0, 2.0];
        let w = WeightMatrix::outer(&u, &v).unwrap();
        let f = svd(&w).unwrap();
        let expected = norm2(&u) * norm2(&v);
        assert!((f.singular_values[0] - expected).abs() < 1e-12 * expected);
        for s in &f.singular_values[1..] {
            assert!(s.abs() < 1e-12);
        }
        assert!(ortho_error(&f.u) < 1e-10);
        assert!(ortho_error(&f.v) < 1e-10);
    }

    #[test]
    fn svd_invariants_random_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(r, c) in &[(1, 1), (1, 5), (5, 1), (8, 8), (7, 3), (3, 7), (16, 16), (20, 9)] {
            let w = random_matrix(&mut rng, r, c);
            let f = svd(&w).unwrap();
            assert_eq!(f.singular_values.len(), r.min(c));
            assert!(f.singular_values.windows(2).all(|p| p[0] >= p[1]));
            assert!(f.singular_values.iter().all(|s| *s >= 0.0));
            assert!(ortho_error(&f.u) <= 1e-10, "U not orthonormal for {r}x{c}");
            assert!(ortho_error(&f.v) <= 1e-10, "V not orthonormal for {r}x{c}");
            let rec = f.reconstruct(f.rank_capacity());
            let err = frobenius_norm(&rec.sub(&w).unwrap());
            assert!(err <= 1e-8 * frobenius_norm(&w).max(1.0));
        }
    }

    #[test]
    fn svd_rank_deficient_completes_basis() {
        // two identical rows, one zero row
        let w = WeightMatrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![1.0, 2.0, 3.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let f = svd(&w).unwrap();
        assert!(ortho_error(&f.u) <= 1e-10);
        assert!(ortho_error(&f.v) <= 1e-10);
        assert!(f.singular_values[1].abs() < 1e-12);
        let rec = f.reconstruct(3);
        assert!(frobenius_norm(&rec.sub(&w).unwrap()) < 1e-12);
    }

    #[test]
    fn svd_sign_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random_matrix(&mut rng, 6, 6);
        let f = svd(&w).unwrap();
        for i in 0..6 {
            let v = f.right_vector(i);
            let lead = v.iter().find(|x| x.abs() > f64::EPSILON).unwrap();
            assert!(*lead > 0.0);
        }
        // bitwise reproducible
        assert_eq!(f, svd(&w).unwrap());
        assert_eq!(f.singular_values, singular_values(&w).unwrap());
    }

    #[test]
    fn op_norm_2_examples() {
        assert!((op_norm_2(&WeightMatrix::identity(4)).unwrap() - 1.0).abs() < 1e-15);
        let d = WeightMatrix::from_diag(&[3.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(op_norm_2(&d).unwrap(), 3.0);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let w = random_matrix(&mut rng, 6, 6);
            let a = op_norm_2(&w).unwrap();
            let b = spectral_norm_power(&w, 100_000).unwrap();
            assert!((a - b).abs() <= 1e-8 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn op_norm_inf_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let w = random_matrix(&mut rng, 5, 7);
            let alpha: f64 = rng.random_range(-10.0..10.0);
            let lhs = op_norm_inf(&w.scaled(alpha));
            let rhs = alpha.abs() * op_norm_inf(&w);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE));
        }
    }
}
