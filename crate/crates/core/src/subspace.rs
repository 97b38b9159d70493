//! Tolerance-aware complex linear algebra on column spans.
//!
//! Every geometric object downstream (eigenbundles, projections, Poisson
//! structures, pushforwards) is a [`Subspace`]: a complex column span held
//! as an orthonormal basis together with the tolerance that decided its
//! rank. Orthonormalization uses the conjugate transpose; the geometric
//! pairing of the ambient split space is bilinear and never enters here.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{GcError, Result};

/// Dense complex matrix used for all linear data (J, B, σ, maps, bases).
pub type ComplexMatrix = DMatrix<Complex64>;

/// Default relative rank tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// How a numerical rank was decided, kept for diagnosing near-degenerate
/// inputs: the threshold actually used, the smallest pivot kept and the
/// largest pivot discarded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankDecision {
    pub rank: usize,
    pub threshold: f64,
    pub smallest_kept: f64,
    pub largest_dropped: f64,
}

impl RankDecision {
    fn trivial() -> Self {
        RankDecision {
            rank: 0,
            threshold: 0.0,
            smallest_kept: 0.0,
            largest_dropped: 0.0,
        }
    }
}

/// A linear subspace of `C^n`, stored as an orthonormal basis.
///
/// Zero-dimensional subspaces are ordinary values (basis with 0 columns).
#[derive(Debug, Clone)]
pub struct Subspace {
    ambient_dim: usize,
    basis: ComplexMatrix,
    tol: f64,
    rank_decision: RankDecision,
}

fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn cplx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest singular value; 0 for empty matrices.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |a, &s| a.max(s))
}

/// Largest absolute entry; 0 for empty matrices.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

impl Subspace {
    /// Orthonormal basis of the column space of `columns`.
    ///
    /// Rank is decided by column-pivoted QR: pivots below
    /// `tol * (largest column norm)` are discarded. Pivot order makes the
    /// basis deterministic.
    pub fn span(columns: &ComplexMatrix, tol: f64) -> Result<Subspace> {
        Subspace::span_with_floor(columns, tol, 0.0)
    }

    /// Like [`Subspace::span`], but the rank threshold is
    /// `tol * max(largest column norm, scale_floor)`. Internal consumers
    /// spanning projector-type matrices (whose natural scale is 1) pass a
    /// floor of 1 so that an all-noise input decays to rank 0 instead of
    /// being kept by a purely relative cutoff.
    fn span_with_floor(columns: &ComplexMatrix, tol: f64, scale_floor: f64) -> Result<Subspace> {
        if !(tol > 0.0) {
            return Err(GcError::Input(format!("span: tol must be > 0, got {tol}")));
        }
        if !is_finite(columns) {
            return Err(GcError::NonFinite("span input"));
        }
        let n = columns.nrows();
        if columns.ncols() == 0 {
            return Ok(Subspace::zero(n, tol));
        }
        let qr = columns.clone().col_piv_qr();
        let r = qr.r();
        let diag_len = r.nrows().min(r.ncols());
        let pivots: Vec<f64> = (0..diag_len).map(|i| r[(i, i)].norm()).collect();
        let largest = pivots.first().copied().unwrap_or(0.0);
        let threshold = tol * largest.max(scale_floor);
        let rank = pivots.iter().take_while(|&&p| p > threshold).count();
        let decision = RankDecision {
            rank,
            threshold,
            smallest_kept: if rank > 0 { pivots[rank - 1] } else { 0.0 },
            largest_dropped: if rank < pivots.len() { pivots[rank] } else { 0.0 },
        };
        let q = qr.q();
        let basis = q.columns(0, rank).into_owned();
        Ok(Subspace {
            ambient_dim: n,
            basis,
            tol,
            rank_decision: decision,
        })
    }

    /// The zero subspace of `C^n`.
    pub fn zero(ambient_dim: usize, tol: f64) -> Subspace {
        Subspace {
            ambient_dim,
            basis: ComplexMatrix::zeros(ambient_dim, 0),
            tol,
            rank_decision: RankDecision::trivial(),
        }
    }

    /// All of `C^n` with the standard basis.
    pub fn full(ambient_dim: usize, tol: f64) -> Subspace {
        Subspace {
            ambient_dim,
            basis: ComplexMatrix::identity(ambient_dim, ambient_dim),
            tol,
            rank_decision: RankDecision {
                rank: ambient_dim,
                threshold: 0.0,
                smallest_kept: 1.0,
                largest_dropped: 0.0,
            },
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn rank_decision(&self) -> &RankDecision {
        &self.rank_decision
    }

    /// Orthogonal projector `Q Qᴴ` onto the subspace.
    pub fn projector(&self) -> ComplexMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// `I - Q Qᴴ`.
    fn projector_complement(&self) -> ComplexMatrix {
        ComplexMatrix::identity(self.ambient_dim, self.ambient_dim) - self.projector()
    }

    fn check_same_ambient(&self, other: &Subspace, context: &'static str) -> Result<()> {
        if self.ambient_dim != other.ambient_dim {
            return Err(GcError::DimensionMismatch {
                context,
                expected: self.ambient_dim,
                got: other.ambient_dim,
            });
        }
        Ok(())
    }

    /// `A ∩ B`, computed as the kernel of the stacked projector complements.
    pub fn intersect(&self, other: &Subspace) -> Result<Subspace> {
        self.check_same_ambient(other, "intersect")?;
        let n = self.ambient_dim;
        let mut stacked = ComplexMatrix::zeros(2 * n, n);
        stacked.rows_mut(0, n).copy_from(&self.projector_complement());
        stacked.rows_mut(n, n).copy_from(&other.projector_complement());
        // Projector scale: see span_with_floor.
        let row_space = Subspace::span_with_floor(&stacked.adjoint(), self.tol, 1.0)?;
        Ok(row_space.orthogonal_complement())
    }

    /// `A + B`.
    pub fn sum(&self, other: &Subspace) -> Result<Subspace> {
        self.check_same_ambient(other, "subspace_sum")?;
        let mut joined = ComplexMatrix::zeros(self.ambient_dim, self.dim() + other.dim());
        joined.columns_mut(0, self.dim()).copy_from(&self.basis);
        joined
            .columns_mut(self.dim(), other.dim())
            .copy_from(&other.basis);
        Subspace::span(&joined, self.tol)
    }

    /// Entrywise conjugate span. The conjugate of an orthonormal basis is
    /// orthonormal, so no refactorization is needed.
    pub fn conjugate(&self) -> Subspace {
        Subspace {
            ambient_dim: self.ambient_dim,
            basis: self.basis.map(|z| z.conj()),
            tol: self.tol,
            rank_decision: self.rank_decision,
        }
    }

    /// Hermitian orthogonal complement.
    pub fn orthogonal_complement(&self) -> Subspace {
        let complement = self.projector_complement();
        // Projector entries have unit scale; the floor keeps a numerically
        // zero complement at rank 0.
        Subspace::span_with_floor(&complement, self.tol, 1.0)
            .expect("projector complement is finite")
    }

    /// Annihilator under the bilinear dual pairing `ξ(a) = ξᵀ a`:
    /// all covectors vanishing on the subspace. Equals the Hermitian
    /// complement of the conjugate span.
    pub fn annihilator(&self) -> Subspace {
        self.conjugate().orthogonal_complement()
    }

    /// Image `span(M · basis)`.
    pub fn apply(&self, map: &ComplexMatrix) -> Result<Subspace> {
        if map.ncols() != self.ambient_dim {
            return Err(GcError::DimensionMismatch {
                context: "apply",
                expected: self.ambient_dim,
                got: map.ncols(),
            });
        }
        if !is_finite(map) {
            return Err(GcError::NonFinite("apply map"));
        }
        Subspace::span(&(map * &self.basis), self.tol)
    }

    /// Preimage `{x | M x ∈ self}`, the kernel of `(I - P_self) · M`.
    pub fn preimage(&self, map: &ComplexMatrix) -> Result<Subspace> {
        if map.nrows() != self.ambient_dim {
            return Err(GcError::DimensionMismatch {
                context: "preimage",
                expected: self.ambient_dim,
                got: map.nrows(),
            });
        }
        if !is_finite(map) {
            return Err(GcError::NonFinite("preimage map"));
        }
        kernel(&(self.projector_complement() * map), self.tol)
    }

    /// Largest principal angle from `self` into `other`: 0 when
    /// `self ⊆ other`, `π/2` when some direction of `self` is orthogonal
    /// to `other`. Computed through sines, which stay accurate for tiny
    /// angles.
    pub fn containment_angle(&self, other: &Subspace) -> Result<f64> {
        self.check_same_ambient(other, "containment_angle")?;
        if self.dim() == 0 {
            return Ok(0.0);
        }
        let residual = other.projector_complement() * &self.basis;
        Ok(spectral_norm(&residual).clamp(0.0, 1.0).asin())
    }

    /// Largest principal angle between the two spans (symmetrized).
    pub fn max_principal_angle(&self, other: &Subspace) -> Result<f64> {
        Ok(self
            .containment_angle(other)?
            .max(other.containment_angle(self)?))
    }

    /// Equality as subspaces: equal dimensions and all principal angles
    /// below `tol`. The largest angle is returned as the residual.
    pub fn equal_subspaces(&self, other: &Subspace, tol: f64) -> Result<(bool, f64)> {
        self.check_same_ambient(other, "equal_subspaces")?;
        let angle = self.max_principal_angle(other)?;
        Ok((self.dim() == other.dim() && angle < tol, angle))
    }

    /// Relative distance of a vector from the subspace (`sin` of its angle).
    pub fn vector_residual(&self, v: &DVector<Complex64>) -> Result<f64> {
        if v.nrows() != self.ambient_dim {
            return Err(GcError::DimensionMismatch {
                context: "vector_residual",
                expected: self.ambient_dim,
                got: v.nrows(),
            });
        }
        let norm = v.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        Ok((self.projector_complement() * v).norm() / norm)
    }
}

/// Kernel `{x | M x = 0}` at relative tolerance `tol`: the Hermitian
/// complement of the column space of `Mᴴ`.
pub fn kernel(m: &ComplexMatrix, tol: f64) -> Result<Subspace> {
    let row_space = Subspace::span(&m.adjoint(), tol)?;
    Ok(row_space.orthogonal_complement())
}

/// Embed a real matrix as a complex one.
pub fn complexify(m: &DMatrix<f64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| cplx(m[(i, j)]))
}

/// Real part, erroring if any entry has a meaningful imaginary component.
pub fn realify(m: &ComplexMatrix, tol: f64, context: &'static str) -> Result<DMatrix<f64>> {
    let imag = m.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    let scale = max_abs(m).max(1.0);
    if imag > tol * scale {
        return Err(GcError::InvalidStructure {
            context: format!("{context}: matrix is not real"),
            residual: imag,
        });
    }
    Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_subspace(rng: &mut StdRng, n: usize, k: usize) -> Subspace {
        let m = ComplexMatrix::from_fn(n, k, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        Subspace::span(&m, DEFAULT_TOL).unwrap()
    }

    #[test]
    fn span_unit_column() {
        let s = Subspace::span(&dmatrix![c(1.0, 0.0); c(0.0, 0.0)], 1e-9).unwrap();
        assert_eq!(s.dim(), 1);
        assert!((s.basis()[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(s.basis()[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn span_proportional_columns_rank_one() {
        let m = dmatrix![c(1.0,0.0), c(2.0,0.0); c(0.0,0.0), c(0.0,0.0)];
        let s = Subspace::span(&m, 1e-9).unwrap();
        assert_eq!(s.dim(), 1);
    }

    #[test]
    fn span_tiny_entry_dropped_at_tolerance() {
        // Exact-rationals oracle: zeroing the entry below the relative
        // threshold leaves the matrix [[1,1],[0,0]], whose exact rank is 1
        // (see tests/exact_rank.rs for the rational-arithmetic check).
        let m = dmatrix![c(1.0,0.0), c(1.0,0.0); c(0.0,0.0), c(1e-14,0.0)];
        let s = Subspace::span(&m, 1e-9).unwrap();
        assert_eq!(s.dim(), 1);
        assert!(s.rank_decision().largest_dropped > 0.0);
        assert!(s.rank_decision().largest_dropped < s.rank_decision().threshold);
    }

    #[test]
    fn span_rejects_non_finite() {
        let m = dmatrix![c(f64::NAN, 0.0)];
        assert!(matches!(
            Subspace::span(&m, 1e-9),
            Err(GcError::NonFinite(_))
        ));
    }

    #[test]
    fn span_rejects_bad_tol() {
        let m = dmatrix![c(1.0, 0.0)];
        assert!(Subspace::span(&m, 0.0).is_err());
    }

    #[test]
    fn intersect_coordinate_planes() {
        let e12 = Subspace::span(
            &dmatrix![c(1.0,0.0), c(0.0,0.0); c(0.0,0.0), c(1.0,0.0); c(0.0,0.0), c(0.0,0.0)],
            1e-9,
        )
        .unwrap();
        let e23 = Subspace::span(
            &dmatrix![c(0.0,0.0), c(0.0,0.0); c(1.0,0.0), c(0.0,0.0); c(0.0,0.0), c(1.0,0.0)],
            1e-9,
        )
        .unwrap();
        let isect = e12.intersect(&e23).unwrap();
        assert_eq!(isect.dim(), 1);
        let e2 = Subspace::span(
            &dmatrix![c(0.0,0.0); c(1.0,0.0); c(0.0,0.0)],
            1e-9,
        )
        .unwrap();
        let (eq, angle) = isect.equal_subspaces(&e2, 1e-8).unwrap();
        assert!(eq, "angle {angle}");
    }

    #[test]
    fn intersect_self_is_identity() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = random_subspace(&mut rng, 5, 3);
        let isect = a.intersect(&a).unwrap();
        let (eq, _) = isect.equal_subspaces(&a, 1e-8).unwrap();
        assert!(eq);
    }

    #[test]
    fn random_three_dim_subspaces_of_c5_meet_in_a_line() {
        // Generic dimension count: 3 + 3 - 5 = 1. The same seeds are
        // cross-checked against exact rational rank in tests/exact_rank.rs.
        for seed in 0..10u64 {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = random_subspace(&mut rng, 5, 3);
            let b = random_subspace(&mut rng, 5, 3);
            assert_eq!(a.intersect(&b).unwrap().dim(), 1, "seed {seed}");
        }
    }

    #[test]
    fn conjugate_example() {
        let s = Subspace::span(&dmatrix![c(1.0,0.0); c(0.0,1.0)], 1e-9).unwrap();
        let expected = Subspace::span(&dmatrix![c(1.0,0.0); c(0.0,-1.0)], 1e-9).unwrap();
        let (eq, _) = s.conjugate().equal_subspaces(&expected, 1e-9).unwrap();
        assert!(eq);
    }

    #[test]
    fn annihilator_of_first_axis() {
        let e1 = Subspace::span(&dmatrix![c(1.0,0.0); c(0.0,0.0)], 1e-9).unwrap();
        let e2 = Subspace::span(&dmatrix![c(0.0,0.0); c(1.0,0.0)], 1e-9).unwrap();
        let (eq, _) = e1.annihilator().equal_subspaces(&e2, 1e-9).unwrap();
        assert!(eq);
    }

    #[test]
    fn preimage_enumerated_on_basis() {
        // M maps e1 -> e1 (inside), e2 -> 0 (inside), so the preimage of
        // span{e1} is all of C^2.
        let m = dmatrix![c(1.0,0.0), c(0.0,0.0); c(0.0,0.0), c(0.0,0.0)];
        let e1 = Subspace::span(&dmatrix![c(1.0,0.0); c(0.0,0.0)], 1e-9).unwrap();
        let pre = e1.preimage(&m).unwrap();
        assert_eq!(pre.dim(), 2);
    }

    #[test]
    fn equal_subspaces_reports_small_analytic_angle() {
        let a = Subspace::span(&dmatrix![c(1.0,0.0); c(0.0,0.0)], 1e-9).unwrap();
        let eps = 1e-12;
        let b = Subspace::span(&dmatrix![c(1.0,0.0); c(eps,0.0)], 1e-9).unwrap();
        let (eq, angle) = a.equal_subspaces(&b, 1e-9).unwrap();
        assert!(eq);
        // angle = arctan(eps) up to rounding
        assert!((angle - eps.atan()).abs() < 1e-13, "angle {angle}");
    }

    #[test]
    fn orthogonal_lines_are_not_equal() {
        let e1 = Subspace::span(&dmatrix![c(1.0,0.0); c(0.0,0.0)], 1e-9).unwrap();
        let e2 = Subspace::span(&dmatrix![c(0.0,0.0); c(1.0,0.0)], 1e-9).unwrap();
        let (eq, angle) = e1.equal_subspaces(&e2, 1e-9).unwrap();
        assert!(!eq);
        assert!((angle - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn zero_subspace_is_first_class() {
        let z = Subspace::zero(4, 1e-9);
        assert_eq!(z.dim(), 0);
        let mut rng = StdRng::seed_from_u64(3);
        let a = random_subspace(&mut rng, 4, 2);
        assert_eq!(z.intersect(&a).unwrap().dim(), 0);
        let (eq, _) = z.sum(&a).unwrap().equal_subspaces(&a, 1e-8).unwrap();
        assert!(eq);
        assert_eq!(z.annihilator().dim(), 4);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let a = Subspace::zero(3, 1e-9);
        let b = Subspace::zero(4, 1e-9);
        assert!(matches!(
            a.intersect(&b),
            Err(GcError::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn intersection_contained_in_both(seed in 0u64..5000, n in 2usize..6, ka in 1usize..4, kb in 1usize..4) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = random_subspace(&mut rng, n, ka.min(n));
            let b = random_subspace(&mut rng, n, kb.min(n));
            let isect = a.intersect(&b).unwrap();
            prop_assert!(isect.containment_angle(&a).unwrap() < 1e-7);
            prop_assert!(isect.containment_angle(&b).unwrap() < 1e-7);
        }

        #[test]
        fn dimension_formula(seed in 0u64..5000, n in 2usize..6, ka in 1usize..4, kb in 1usize..4) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = random_subspace(&mut rng, n, ka.min(n));
            let b = random_subspace(&mut rng, n, kb.min(n));
            let isect = a.intersect(&b).unwrap();
            let sum = a.sum(&b).unwrap();
            prop_assert_eq!(a.dim() + b.dim(), isect.dim() + sum.dim());
        }

        #[test]
        fn conjugate_is_involutive(seed in 0u64..5000, n in 1usize..6, k in 1usize..4) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = random_subspace(&mut rng, n, k.min(n));
            let back = a.conjugate().conjugate();
            let (eq, angle) = back.equal_subspaces(&a, 1e-9).unwrap();
            prop_assert!(eq, "angle {}", angle);
        }

        #[test]
        fn annihilator_is_involutive(seed in 0u64..5000, n in 1usize..6, k in 0usize..4) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = random_subspace(&mut rng, n, k.min(n));
            let back = a.annihilator().annihilator();
            let (eq, angle) = back.equal_subspaces(&a, 1e-8).unwrap();
            prop_assert!(eq, "angle {}", angle);
        }

        #[test]
        fn apply_after_preimage_lands_inside(seed in 0u64..5000, n in 2usize..5, m in 2usize..5, k in 1usize..4) {
            let mut rng = StdRng::seed_from_u64(seed);
            let target = random_subspace(&mut rng, m, k.min(m));
            let map = ComplexMatrix::from_fn(m, n, |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let pre = target.preimage(&map).unwrap();
            let image = pre.apply(&map).unwrap();
            prop_assert!(image.containment_angle(&target).unwrap() < 1e-7);
        }
    }
}
