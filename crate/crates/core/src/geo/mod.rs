//! Decompositions of the identity on `R^n` and their lift to `so(n)`.
//!
//! `so(n)` is coordinatized by the orthonormal basis
//! `(e_i e_j^T - e_j e_i^T)/sqrt(2)`, `i < j`, for the inner product
//! `<A, B> = Tr(A^T B)`, so induced projections are symmetric
//! `n(n-1)/2`-square matrices.

pub mod gauss;
pub mod jacobi;
pub mod sphere;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bl::{SubsetKind, SubsetTerm};
use crate::error::{Error, Result};
use crate::rational;
use crate::rng;

/// Gram and antisymmetry tolerance.
pub const GEOMETRY_TOL: f64 = 1e-12;
/// A minimum eigenvalue above `-PSD_TOL` counts as nonnegative.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceKind {
    /// Complement of the Lie algebra of the pointwise stabilizer of `E`.
    Fix,
    /// Complement of the Lie algebra of the setwise stabilizer of `E`.
    Stab,
}

/// A subspace `E` of `R^n` with an orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceSpec {
    n: usize,
    basis: DMatrix<f64>,
    kind: SubspaceKind,
}

impl SubspaceSpec {
    /// Span of `e_i` for 1-based `indices`.
    pub fn coordinate(n: usize, indices: &[usize], kind: SubspaceKind) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i == 0 || i > n) {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let basis = DMatrix::from_fn(n, sorted.len(), |r, c| f64::from(r + 1 == sorted[c]));
        Ok(SubspaceSpec { n, basis, kind })
    }

    /// Span of explicit vectors, which must be orthonormal.
    pub fn from_basis(n: usize, vectors: &[Vec<f64>], kind: SubspaceKind) -> Result<Self> {
        if let Some(v) = vectors.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch { what: "basis vector", expected: n, found: v.len() });
        }
        let basis = DMatrix::from_fn(n, vectors.len(), |r, c| vectors[c][r]);
        let gram = basis.transpose() * &basis - DMatrix::identity(vectors.len(), vectors.len());
        let residual = gram.abs().max();
        if residual > GEOMETRY_TOL {
            return Err(Error::InvalidParameter(format!("basis is not orthonormal (Gram residual {residual:e})")));
        }
        Ok(SubspaceSpec { n, basis, kind })
    }

    /// Orthonormalized Gaussian frame of dimension `k`.
    pub fn random<R: Rng>(rng: &mut R, n: usize, k: usize, kind: SubspaceKind) -> Result<Self> {
        if k > n {
            return Err(Error::InvalidParameter(format!("subspace dimension {k} exceeds {n}")));
        }
        let g = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let q = g.qr().q();
        Ok(SubspaceSpec { n, basis: q.columns(0, k).into_owned(), kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn kind(&self) -> SubspaceKind {
        self.kind
    }

    pub fn with_kind(&self, kind: SubspaceKind) -> Self {
        SubspaceSpec { kind, ..self.clone() }
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// A real antisymmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AntisymmetricMatrix(DMatrix<f64>);

impl AntisymmetricMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { what: "square matrix", expected: a.nrows(), found: a.ncols() });
        }
        let residual = (&a + a.transpose()).abs().max();
        if residual > GEOMETRY_TOL * a.abs().max().max(1.0) {
            return Err(Error::InvalidParameter(format!("matrix is not antisymmetric (residual {residual:e})")));
        }
        Ok(AntisymmetricMatrix((&a - a.transpose()) * 0.5))
    }

    /// Inverse of [`AntisymmetricMatrix::coords`].
    pub fn from_coords(n: usize, v: &[f64]) -> Result<Self> {
        let dim = so_dim(n);
        if v.len() != dim {
            return Err(Error::DimensionMismatch { what: "so(n) coordinates", expected: dim, found: v.len() });
        }
        let mut a = DMatrix::zeros(n, n);
        for (k, (i, j)) in so_pairs(n).enumerate() {
            a[(i, j)] = v[k] / std::f64::consts::SQRT_2;
            a[(j, i)] = -v[k] / std::f64::consts::SQRT_2;
        }
        Ok(AntisymmetricMatrix(a))
    }

    pub fn random<R: Rng>(rng: &mut R, n: usize) -> Self {
        Self::from_coords(n, &rng::normals(rng, so_dim(n))).expect("matching length")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// Coordinates in the orthonormal basis of `so(n)`.
    pub fn coords(&self) -> Vec<f64> {
        so_pairs(self.n()).map(|(i, j)| self.0[(i, j)] * std::f64::consts::SQRT_2).collect()
    }

    /// `Tr(A^T A)`.
    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }
}

pub fn so_dim(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn so_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn check_dims(subspaces: &[SubspaceSpec], c: &[f64]) -> Result<usize> {
    if c.len() != subspaces.len() {
        return Err(Error::DimensionMismatch { what: "exponent vector", expected: subspaces.len(), found: c.len() });
    }
    let n = subspaces.first().map_or(0, SubspaceSpec::n);
    if let Some(s) = subspaces.iter().find(|s| s.n() != n) {
        return Err(Error::DimensionMismatch { what: "ambient dimension", expected: n, found: s.n() });
    }
    Ok(n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralVerdict {
    pub lambda_min: f64,
    pub pass: bool,
}

impl SpectralVerdict {
    fn new(lambda_min: f64) -> Self {
        SpectralVerdict { lambda_min, pass: lambda_min >= -PSD_TOL }
    }
}

/// `lambda_min(Id - sum c_i P_{E_i})` on `R^n`.
pub fn psd_decomposition_check(subspaces: &[SubspaceSpec], c: &[f64]) -> Result<SpectralVerdict> {
    let n = check_dims(subspaces, c)?;
    let mut m = DMatrix::identity(n, n);
    for (s, ci) in subspaces.iter().zip(c) {
        m -= s.projector() * *ci;
    }
    Ok(SpectralVerdict::new(jacobi::min_eigenvalue(&m)?))
}

/// The induced projection of `A` onto the complement of the Lie algebra of
/// the (pointwise or setwise) stabilizer of `E`:
/// `PA + AP - PAP` for `Fix`, `PA + AP - 2PAP` for `Stab`.
pub fn lie_projection(spec: &SubspaceSpec, a: &AntisymmetricMatrix) -> Result<AntisymmetricMatrix> {
    if a.n() != spec.n() {
        return Err(Error::DimensionMismatch { what: "matrix size", expected: spec.n(), found: a.n() });
    }
    let p = spec.projector();
    let pa = &p * a.matrix();
    let ap = a.matrix() * &p;
    let pap = &pa * &p;
    let factor = match spec.kind() {
        SubspaceKind::Fix => 1.0,
        SubspaceKind::Stab => 2.0,
    };
    Ok(AntisymmetricMatrix(pa + ap - pap * factor))
}

/// `| ||P(A)||^2 - (2||PA||^2 - k||PAP||^2) |` with `k = 1` (fix) or `2`
/// (stab).
pub fn norm_identity_residual(spec: &SubspaceSpec, a: &AntisymmetricMatrix) -> Result<f64> {
    let projected = lie_projection(spec, a)?;
    let p = spec.projector();
    let pa = &p * a.matrix();
    let pap = &pa * &p;
    let k = match spec.kind() {
        SubspaceKind::Fix => 1.0,
        SubspaceKind::Stab => 2.0,
    };
    Ok((projected.norm_squared() - (2.0 * pa.norm_squared() - k * pap.norm_squared())).abs())
}

/// Matrix of [`lie_projection`] in the orthonormal basis of `so(n)`.
pub fn induced_operator(spec: &SubspaceSpec) -> Result<DMatrix<f64>> {
    let n = spec.n();
    let dim = so_dim(n);
    let mut m = DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    for k in 0..dim {
        e[k] = 1.0;
        let col = lie_projection(spec, &AntisymmetricMatrix::from_coords(n, &e)?)?.coords();
        m.set_column(k, &DVector::from_vec(col));
        e[k] = 0.0;
    }
    Ok(m)
}

/// Idempotence and self-adjointness residuals of the induced operator.
pub fn projector_residuals(spec: &SubspaceSpec) -> Result<(f64, f64)> {
    let m = induced_operator(spec)?;
    Ok(((&m * &m - &m).abs().max(), (&m - m.transpose()).abs().max()))
}

fn lift_matrix(subspaces: &[SubspaceSpec], weights: &[f64], n: usize) -> Result<DMatrix<f64>> {
    let dim = so_dim(n);
    let mut m = DMatrix::identity(dim, dim);
    for (s, w) in subspaces.iter().zip(weights) {
        m -= induced_operator(s)? * *w;
    }
    Ok(m)
}

/// `lambda_min(Id - sum (c_i/2) P_{E_i})` on `so(n)`, after checking that
/// `sum c_i P_{E_i} <= Id` on `R^n`.
pub fn lie_lift_check(subspaces: &[SubspaceSpec], c: &[f64]) -> Result<SpectralVerdict> {
    let n = check_dims(subspaces, c)?;
    let premise = psd_decomposition_check(subspaces, c)?;
    if !premise.pass {
        return Err(Error::PremiseFails { lambda_min: premise.lambda_min });
    }
    let half: Vec<f64> = c.iter().map(|v| v / 2.0).collect();
    Ok(SpectralVerdict::new(jacobi::min_eigenvalue(&lift_matrix(subspaces, &half, n)?)?))
}

/// Coordinate subspaces for a subset family: restriction terms become `Fix`
/// subspaces and image terms `Stab` subspaces.
pub fn coordinate_family(n: usize, family: &[SubsetTerm]) -> Result<Vec<SubspaceSpec>> {
    family
        .iter()
        .map(|t| {
            let kind = match t.kind {
                SubsetKind::Restriction => SubspaceKind::Fix,
                SubsetKind::Image => SubspaceKind::Stab,
            };
            if t.set.is_empty() {
                return Err(Error::EmptySubset);
            }
            SubspaceSpec::coordinate(n, &t.set, kind)
        })
        .collect()
}

/// `lambda_min(Id - sum c_I P_{E_I})` on `so(n)` for a coordinate family;
/// nonnegative exactly when the pair condition holds.
pub fn coordinate_family_lift(n: usize, family: &[SubsetTerm]) -> Result<SpectralVerdict> {
    let subspaces = coordinate_family(n, family)?;
    let c: Vec<f64> = family.iter().map(|t| rational::to_f64(&t.c)).collect();
    Ok(SpectralVerdict::new(jacobi::min_eigenvalue(&lift_matrix(&subspaces, &c, n)?)?))
}

/// `lambda_max(sum_I P_{E_I})` over all `k`-subsets `I` of `{1..n}`.
pub fn spectral_subset_exponent(n: usize, k: usize, kind: SubspaceKind) -> Result<f64> {
    if n < 2 || k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!("need n >= 2 and 1 <= k <= n-1, got n={n}, k={k}")));
    }
    let dim = so_dim(n);
    let mut m = DMatrix::zeros(dim, dim);
    for subset in k_subsets(n, k) {
        m += induced_operator(&SubspaceSpec::coordinate(n, &subset, kind)?)?;
    }
    jacobi::max_eigenvalue(&m)
}

/// All `k`-subsets of `{1..n}` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i + 1) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Subspace file entry: either 1-based coordinate indices or an explicit
/// orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubspaceInput {
    Indices { indices: Vec<usize>, #[serde(default = "default_kind")] kind: SubspaceKind },
    Basis { basis: Vec<Vec<f64>>, #[serde(default = "default_kind")] kind: SubspaceKind },
}

fn default_kind() -> SubspaceKind {
    SubspaceKind::Fix
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceFile {
    pub n: usize,
    pub subspaces: Vec<SubspaceInput>,
}

impl SubspaceFile {
    pub fn build(&self) -> Result<Vec<SubspaceSpec>> {
        self.subspaces
            .iter()
            .map(|s| match s {
                SubspaceInput::Indices { indices, kind } => SubspaceSpec::coordinate(self.n, indices, *kind),
                SubspaceInput::Basis { basis, kind } => SubspaceSpec::from_basis(self.n, basis, *kind),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use approx::assert_abs_diff_eq;

    fn e(n: usize, i: usize) -> SubspaceSpec {
        SubspaceSpec::coordinate(n, &[i], SubspaceKind::Fix).unwrap()
    }

    #[test]
    fn psd_examples() {
        let basis: Vec<SubspaceSpec> = (1..=4).map(|i| e(4, i)).collect();
        assert_abs_diff_eq!(psd_decomposition_check(&basis, &[1.0; 4]).unwrap().lambda_min, 0.0, epsilon = 1e-14);
        let pair = [
            SubspaceSpec::coordinate(3, &[1, 2], SubspaceKind::Fix).unwrap(),
            SubspaceSpec::coordinate(3, &[2, 3], SubspaceKind::Fix).unwrap(),
        ];
        let v = psd_decomposition_check(&pair, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(v.lambda_min, -1.0, epsilon = 1e-14);
        assert!(!v.pass);
        assert_abs_diff_eq!(psd_decomposition_check(&pair, &[0.5, 0.5]).unwrap().lambda_min, 0.0, epsilon = 1e-14);
        assert!(psd_decomposition_check(&[e(3, 1), e(4, 1)], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn projection_special_cases() {
        let mut rng = rng::stream_rng(1, 0);
        let a = AntisymmetricMatrix::random(&mut rng, 4);
        let p = lie_projection(&e(4, 1), &a).unwrap();
        let row: f64 = (0..4).map(|j| a.matrix()[(0, j)].powi(2)).sum();
        assert_abs_diff_eq!(p.norm_squared(), 2.0 * row, epsilon = 1e-12);
        let full = SubspaceSpec::coordinate(4, &[1, 2, 3, 4], SubspaceKind::Fix).unwrap();
        assert!((lie_projection(&full, &a).unwrap().matrix() - a.matrix()).abs().max() < 1e-14);
        let stab = full.with_kind(SubspaceKind::Stab);
        assert!(lie_projection(&stab, &a).unwrap().matrix().abs().max() < 1e-14);
    }

    #[test]
    fn coords_round_trip() {
        let mut rng = rng::stream_rng(2, 0);
        let a = AntisymmetricMatrix::random(&mut rng, 5);
        let b = AntisymmetricMatrix::from_coords(5, &a.coords()).unwrap();
        assert!((a.matrix() - b.matrix()).abs().max() < 1e-15);
        let norm: f64 = a.coords().iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(norm, a.norm_squared(), epsilon = 1e-12);
        assert!(AntisymmetricMatrix::new(DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn lift_examples() {
        let basis: Vec<SubspaceSpec> = (1..=4).map(|i| e(4, i)).collect();
        assert_abs_diff_eq!(lie_lift_check(&basis, &[1.0; 4]).unwrap().lambda_min, 0.0, epsilon = 1e-12);
        let full = SubspaceSpec::coordinate(3, &[1, 2, 3], SubspaceKind::Fix).unwrap();
        assert_abs_diff_eq!(lie_lift_check(&[full], &[1.0]).unwrap().lambda_min, 0.5, epsilon = 1e-12);
        let pair = [
            SubspaceSpec::coordinate(3, &[1, 2], SubspaceKind::Fix).unwrap(),
            SubspaceSpec::coordinate(3, &[2, 3], SubspaceKind::Fix).unwrap(),
        ];
        assert!(matches!(lie_lift_check(&pair, &[1.0, 1.0]), Err(Error::PremiseFails { .. })));
    }

    #[test]
    fn spectral_exponents_small() {
        assert_abs_diff_eq!(spectral_subset_exponent(4, 2, SubspaceKind::Fix).unwrap(), 5.0, epsilon = 1e-10);
        assert_abs_diff_eq!(spectral_subset_exponent(4, 2, SubspaceKind::Stab).unwrap(), 4.0, epsilon = 1e-10);
        assert_eq!(k_subsets(4, 2).len(), 6);
        assert_eq!(k_subsets(3, 3), vec![vec![1, 2, 3]]);
    }

    #[test]
    fn coordinate_lift_matches_pair_condition() {
        let family = vec![
            SubsetTerm { set: vec![1, 2], kind: SubsetKind::Restriction, c: rat(1, 2) },
            SubsetTerm { set: vec![3], kind: SubsetKind::Image, c: rat(1, 2) },
        ];
        let v = coordinate_family_lift(4, &family).unwrap();
        let pair = crate::bl::pair_condition_check(4, &family).unwrap();
        assert_abs_diff_eq!(v.lambda_min, 1.0 - rational::to_f64(&pair.max_sum), epsilon = 1e-12);
    }

    #[test]
    fn subspace_file_parses() {
        let f: SubspaceFile = serde_json::from_str(
            r#"{"n":3,"subspaces":[{"indices":[1,2]},{"basis":[[0,0,1]],"kind":"stab"}]}"#,
        )
        .unwrap();
        let s = f.build().unwrap();
        assert_eq!(s[0].dim(), 2);
        assert_eq!(s[1].kind(), SubspaceKind::Stab);
    }
}
