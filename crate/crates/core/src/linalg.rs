//! Dense numerical primitives shared by both recovery stages, the baselines
//! and the metrics: orthonormal bases, projections, residuals, medians,
//! subspace distances and batch spectra.
//!
//! Everything here is a pure function of its arguments.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative cutoff on singular values used to decide numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Maximum entrywise deviation of `VᵀV` from the identity accepted for a basis.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// A `d × r` matrix with orthonormal columns.
///
/// This is the common currency between the stages: the coarse basis `V`,
/// the planted basis `U*`, the fine basis `Û_k` (living in `R^r̂`) and the
/// lifted output `VÛ_k` are all `SubspaceBasis` values.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    columns: DMatrix<f64>,
}

impl SubspaceBasis {
    /// Wraps `columns` after checking `1 ≤ r ≤ d` and column orthonormality.
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        let (d, r) = columns.shape();
        if r == 0 || d == 0 {
            return Err(Error::Shape(format!("basis must have 1 <= r <= d, got {d}x{r}")));
        }
        if r > d {
            return Err(Error::Shape(format!("basis has more columns ({r}) than rows ({d})")));
        }
        let basis = SubspaceBasis { columns };
        let err = basis.orthonormality_error();
        if !(err <= ORTHONORMALITY_TOL) {
            return Err(Error::DegenerateInput(format!(
                "columns are not orthonormal (max |VᵀV - I| = {err:e})"
            )));
        }
        Ok(basis)
    }

    /// The full space `R^d` with the canonical basis.
    pub fn identity(d: usize) -> Self {
        assert!(d >= 1, "identity basis needs d >= 1");
        SubspaceBasis {
            columns: DMatrix::identity(d, d),
        }
    }

    /// Span of the canonical axes listed in `axes`.
    pub fn from_axes(d: usize, axes: &[usize]) -> Result<Self> {
        let mut columns = DMatrix::zeros(d, axes.len());
        for (j, &axis) in axes.iter().enumerate() {
            if axis >= d {
                return Err(Error::Shape(format!("axis {axis} out of range for d = {d}")));
            }
            columns[(axis, j)] = 1.0;
        }
        SubspaceBasis::new(columns)
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn into_columns(self) -> DMatrix<f64> {
        self.columns
    }

    /// `max |VᵀV − I|` over all entries.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.columns.transpose() * &self.columns;
        let r = gram.nrows();
        let mut worst: f64 = 0.0;
        for j in 0..r {
            for i in 0..r {
                let target = if i == j { 1.0 } else { 0.0 };
                let dev = (gram[(i, j)] - target).abs();
                if dev.is_nan() {
                    return f64::NAN;
                }
                worst = worst.max(dev);
            }
        }
        worst
    }

    /// The `d × d` orthogonal projector `VVᵀ`. Quadratic in `d`; intended for
    /// tests and small problems.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.columns * self.columns.transpose()
    }

    /// Composes this basis with a basis of a subspace of its coordinate space,
    /// returning `V·U` as a basis in the ambient space.
    pub fn lift(&self, inner: &SubspaceBasis) -> Result<SubspaceBasis> {
        if inner.ambient_dim() != self.dim() {
            return Err(Error::Shape(format!(
                "inner basis lives in R^{} but outer basis has {} columns",
                inner.ambient_dim(),
                self.dim()
            )));
        }
        SubspaceBasis::new(&self.columns * &inner.columns)
    }
}

/// Singular values of `m` in non-increasing order.
pub fn sorted_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut values: Vec<f64> = m.singular_values().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Largest singular value; zero for an empty matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    sorted_singular_values(m).first().copied().unwrap_or(0.0)
}

/// Left singular vectors of `m` paired with their singular values, sorted by
/// decreasing singular value.
pub(crate) fn sorted_left_singular_pairs(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors were requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vectors = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    (values, vectors)
}

/// Orthonormal basis of the column space of `columns`.
///
/// The dimension equals the numerical rank: the number of singular values
/// strictly above `rank_tol` times the largest one.
pub fn orthonormal_basis(columns: &DMatrix<f64>, rank_tol: f64) -> Result<SubspaceBasis> {
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "rank_tol must lie in (0, 1), got {rank_tol}"
        )));
    }
    if columns.ncols() == 0 || columns.nrows() == 0 {
        return Err(Error::EmptyInput("orthonormal_basis of an empty matrix".into()));
    }
    if columns.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("matrix contains non-finite entries".into()));
    }
    if columns.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateInput("all-zero matrix has no column space".into()));
    }
    let (values, vectors) = sorted_left_singular_pairs(columns);
    let cutoff = rank_tol * values[0];
    let rank = values.iter().take_while(|&&s| s > cutoff).count().max(1);
    SubspaceBasis::new(vectors.columns(0, rank).into_owned())
}

/// Numerical rank of `m` relative to its largest singular value.
pub fn numerical_rank(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    let values = sorted_singular_values(m);
    match values.first() {
        Some(&top) if top > 0.0 => values.iter().filter(|&&s| s > rank_tol * top).count(),
        _ => 0,
    }
}

/// `‖x − VVᵀx‖₂`, the distance from `x` to `span(V)`.
pub fn projection_residual(x: &DVector<f64>, basis: &SubspaceBasis) -> Result<f64> {
    if x.len() != basis.ambient_dim() {
        return Err(Error::Shape(format!(
            "vector has length {} but basis lives in R^{}",
            x.len(),
            basis.ambient_dim()
        )));
    }
    let v = basis.columns();
    let coeffs = v.tr_mul(x);
    Ok((x - v * coeffs).norm())
}

/// Residual norms of every column of `x` against `span(V)`.
///
/// The residual is formed explicitly rather than as `sqrt(‖x‖² − ‖Vᵀx‖²)`,
/// which loses all relative accuracy for points close to the subspace.
pub fn residual_norms(x: &DMatrix<f64>, basis: &SubspaceBasis) -> Result<Vec<f64>> {
    if x.nrows() != basis.ambient_dim() {
        return Err(Error::Shape(format!(
            "data has {} rows but basis lives in R^{}",
            x.nrows(),
            basis.ambient_dim()
        )));
    }
    let v = basis.columns();
    let coeffs = v.transpose() * x;
    let mut residual = x.clone();
    residual.gemm(-1.0, v, &coeffs, 1.0);
    Ok(residual.column_iter().map(|c| c.norm()).collect())
}

/// Spectral norm of `P_A − P_B`.
///
/// Computed as `max(‖(I − P_B)A‖, ‖(I − P_A)B‖)`; each term is the norm of
/// `B_⊥ᵀA` (resp. `A_⊥ᵀB`) without ever forming a complement basis or a
/// `d × d` projector. For equal dimensions the two terms coincide and give the
/// sine of the largest principal angle; for unequal dimensions the result is 1.
pub fn subspace_distance(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::Shape(format!(
            "bases live in R^{} and R^{}",
            a.ambient_dim(),
            b.ambient_dim()
        )));
    }
    let leak_a = complement_component_norm(a, b);
    let leak_b = complement_component_norm(b, a);
    Ok(leak_a.max(leak_b).clamp(0.0, 1.0))
}

/// `‖(I − P_onto)·of‖₂`
fn complement_component_norm(of: &SubspaceBasis, onto: &SubspaceBasis) -> f64 {
    let coeffs = onto.columns().transpose() * of.columns();
    let mut residual = of.columns().clone();
    residual.gemm(-1.0, onto.columns(), &coeffs, 1.0);
    spectral_norm(&residual)
}

/// Median with the mean-of-middle-two convention for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("median of an empty list".into()));
    }
    let mut scratch = values.to_vec();
    let mid = scratch.len() / 2;
    let (lower, upper, _) = scratch.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if values.len() % 2 == 1 {
        Ok(upper)
    } else {
        let lower = lower
            .iter()
            .copied()
            .max_by(f64::total_cmp)
            .expect("even-length list has a lower half");
        Ok((lower + upper) / 2.0)
    }
}

/// Coordinates `VᵀX` of the data in the basis.
pub fn project(x: &DMatrix<f64>, basis: &SubspaceBasis) -> Result<DMatrix<f64>> {
    if x.nrows() != basis.ambient_dim() {
        return Err(Error::Shape(format!(
            "data has {} rows but basis lives in R^{}",
            x.nrows(),
            basis.ambient_dim()
        )));
    }
    Ok(basis.columns().transpose() * x)
}

/// Singular values of a batch matrix (one row per coordinate, one column per
/// sample), padded with zeros to the row count.
///
/// With `normalize` set the values are divided by `√B`, so their squares are
/// the eigenvalues of the batch covariance `(1/B)·XXᵀ`.
pub fn batch_singular_values(batch: &DMatrix<f64>, normalize: bool) -> Result<Vec<f64>> {
    let b = batch.ncols();
    if b == 0 {
        return Err(Error::EmptyInput("batch has no samples".into()));
    }
    let rows = batch.nrows();
    let mut values = if rows == 0 {
        Vec::new()
    } else {
        sorted_singular_values(batch)
    };
    values.resize(rows, 0.0);
    if normalize {
        let scale = (b as f64).sqrt();
        for v in &mut values {
            *v /= scale;
        }
    }
    Ok(values)
}

/// Per-batch singular values, one row per batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    width: usize,
    values: Vec<f64>,
    normalized: bool,
}

impl SpectrumTable {
    /// Builds a table from row-major values, checking that every row is
    /// non-negative and non-increasing.
    pub fn from_flat(width: usize, values: Vec<f64>, normalized: bool) -> Result<Self> {
        if width == 0 {
            return Err(Error::Shape("spectrum rows must be non-empty".into()));
        }
        if values.len() % width != 0 {
            return Err(Error::Shape(format!(
                "{} values do not split into rows of {width}",
                values.len()
            )));
        }
        for (j, row) in values.chunks(width).enumerate() {
            let sorted = row.windows(2).all(|w| w[0] >= w[1]);
            if !sorted || row.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::DegenerateInput(format!(
                    "spectrum row {j} is not non-negative and non-increasing"
                )));
            }
        }
        Ok(SpectrumTable {
            width,
            values,
            normalized,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.width..(j + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.width)
    }

    /// `γ̂_i = min_j (σ̂_i^{(j)})²` for each index `i`.
    pub fn min_squared(&self) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; self.width];
        for row in self.rows() {
            for (slot, &v) in out.iter_mut().zip(row) {
                *slot = slot.min(v * v);
            }
        }
        out
    }

    /// Writes the table as CSV, one row per batch with columns
    /// `batch,sigma_1,…,sigma_r`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["batch".to_string()];
        header.extend((1..=self.width).map(|i| format!("sigma_{i}")));
        out.write_record(&header)?;
        for (j, row) in self.rows().enumerate() {
            let mut record = vec![j.to_string()];
            record.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&record)?;
        }
        out.flush().map_err(|e| Error::io("<spectrum csv>", e))?;
        Ok(())
    }
}
