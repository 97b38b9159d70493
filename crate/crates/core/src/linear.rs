//! Linear generalized complex structures on a fixed even-dimensional real
//! space `V = R^d`.
//!
//! A structure is a real automorphism `J` of `V ⊕ V*` (coordinates: the
//! first `d` slots are vectors, the last `d` covectors) squaring to `-I`
//! and orthogonal for the split pairing `⟨A+ξ, B+η⟩ = (ξ(B) + η(A))/2`.
//!
//! Convention note: `V ⊗ C` is represented by complex coordinate vectors of
//! length `d` and conjugation is entrywise. The split pairing extends
//! *bilinearly* — isotropy tests use the transpose — while basis
//! orthonormalization uses the conjugate transpose. Mixing the two is the
//! classic mistake; all pairing evaluations in this module go through
//! [`pairing_matrix`] with a transpose.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{GcError, Result};
use crate::subspace::{complexify, max_abs, realify, ComplexMatrix, Subspace};

fn ci() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

/// Matrix of the split pairing on `V ⊕ V*`: `G = [[0, I], [I, 0]] / 2`.
pub fn pairing_matrix(d: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        g[(i, d + i)] = 0.5;
        g[(d + i, i)] = 0.5;
    }
    g
}

/// Projection `ρ: (V ⊕ V*) ⊗ C -> V ⊗ C` as a matrix `[I 0]`.
pub fn rho_matrix(d: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, 2 * d);
    for i in 0..d {
        m[(i, i)] = Complex64::new(1.0, 0.0);
    }
    m
}

/// Residuals of the two structure equations.
#[derive(Debug, Clone, Copy)]
pub struct ValidityCertificate {
    /// `max |J² + I|`.
    pub j_squared_residual: f64,
    /// `max |Jᵀ G J - G|`.
    pub pairing_residual: f64,
    pub tol: f64,
}

impl ValidityCertificate {
    pub fn accepted(&self) -> bool {
        self.j_squared_residual < self.tol && self.pairing_residual < self.tol
    }
}

/// Check the structure equations for a real `2d x 2d` matrix. A residual at
/// or above `tol` yields a rejected certificate, not an error.
pub fn validate(j: &DMatrix<f64>, tol: f64) -> Result<ValidityCertificate> {
    if j.nrows() != j.ncols() {
        return Err(GcError::Input(format!(
            "validate: J must be square, got {}x{}",
            j.nrows(),
            j.ncols()
        )));
    }
    if j.nrows() % 2 != 0 {
        return Err(GcError::Input(format!(
            "validate: J must act on V ⊕ V* of even size, got {}",
            j.nrows()
        )));
    }
    if j.iter().any(|x| !x.is_finite()) {
        return Err(GcError::NonFinite("validate input"));
    }
    let d = j.nrows() / 2;
    let id = DMatrix::<f64>::identity(2 * d, 2 * d);
    let g = pairing_matrix(d);
    let j_squared_residual = (j * j + &id).abs().max();
    let pairing_residual = (j.transpose() * &g * j - &g).abs().max();
    Ok(ValidityCertificate {
        j_squared_residual,
        pairing_residual,
        tol,
    })
}

/// A validated linear GC structure.
#[derive(Debug, Clone)]
pub struct LinearGcStructure {
    d: usize,
    j: DMatrix<f64>,
    tol: f64,
    certificate: ValidityCertificate,
}

impl LinearGcStructure {
    /// Validate and wrap `J`. Rejects structures whose residuals reach `tol`.
    pub fn new(j: DMatrix<f64>, tol: f64) -> Result<Self> {
        let certificate = validate(&j, tol)?;
        if !certificate.accepted() {
            return Err(GcError::InvalidStructure {
                context: "structure equations J² = -I, JᵀGJ = G".into(),
                residual: certificate
                    .j_squared_residual
                    .max(certificate.pairing_residual),
            });
        }
        Ok(LinearGcStructure {
            d: j.nrows() / 2,
            j,
            tol,
            certificate,
        })
    }

    /// Real dimension of the underlying space `V`.
    pub fn dim_v(&self) -> usize {
        self.d
    }

    pub fn j(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn certificate(&self) -> &ValidityCertificate {
        &self.certificate
    }

    /// The `+i`-eigenbundle, computed as the column space of the projector
    /// `(I - iJ)/2`. Its complex dimension must be `d`.
    pub fn eigenbundle(&self) -> Result<Subspace> {
        let jc = complexify(&self.j);
        let id = ComplexMatrix::identity(2 * self.d, 2 * self.d);
        let projector = (id - jc * ci()) * Complex64::new(0.5, 0.0);
        let l = Subspace::span(&projector, self.tol)?;
        if l.dim() != self.d {
            return Err(GcError::InvalidStructure {
                context: format!(
                    "+i eigenspace has complex dimension {}, expected {}",
                    l.dim(),
                    self.d
                ),
                residual: f64::NAN,
            });
        }
        Ok(l)
    }

    /// B-field transform of the structure: `J_B = e^{-B} J e^{B}`.
    pub fn b_transform(&self, b: &DMatrix<f64>) -> Result<LinearGcStructure> {
        check_antisymmetric(b, self.d, self.tol)?;
        let eb = shear(b, 1.0);
        let ebi = shear(b, -1.0);
        LinearGcStructure::new(ebi * &self.j * eb, self.tol)
    }
}

/// `[[I, 0], [sign*B, I]]` acting on `V ⊕ V*`.
fn shear(b: &DMatrix<f64>, sign: f64) -> DMatrix<f64> {
    let d = b.nrows();
    let mut m = DMatrix::identity(2 * d, 2 * d);
    for i in 0..d {
        for k in 0..d {
            m[(d + i, k)] = sign * b[(i, k)];
        }
    }
    m
}

fn check_antisymmetric(b: &DMatrix<f64>, d: usize, tol: f64) -> Result<()> {
    if b.nrows() != d || b.ncols() != d {
        return Err(GcError::DimensionMismatch {
            context: "b_transform",
            expected: d,
            got: b.nrows(),
        });
    }
    let asym = (b + b.transpose()).abs().max();
    let scale = b.abs().max().max(1.0);
    if asym > tol * scale {
        return Err(GcError::Input(format!(
            "b_transform: B is not antisymmetric (residual {asym:.3e})"
        )));
    }
    Ok(())
}

/// B-field transform of an eigenbundle: `L_B = {A + ξ - B(A,·) | A+ξ ∈ L}`
/// with the covector `B(A,·)` computed as `B·A`.
pub fn b_transform_eigenbundle(l: &Subspace, b: &DMatrix<f64>, tol: f64) -> Result<Subspace> {
    let d2 = l.ambient_dim();
    if d2 % 2 != 0 {
        return Err(GcError::Input("b_transform: odd ambient dimension".into()));
    }
    check_antisymmetric(b, d2 / 2, tol)?;
    l.apply(&complexify(&shear(b, -1.0)))
}

/// Type of a structure at a point together with the real distribution `Δ`.
#[derive(Debug, Clone)]
pub struct StructureType {
    /// `k = d - dim_C ρ(L)`, the complex codimension of `E` in `V ⊗ C`.
    pub k: usize,
    /// `E = ρ(L) ⊆ V ⊗ C`.
    pub e: Subspace,
    /// `Δ ⊗ C = E ∩ conj(E)`.
    pub delta_complex: Subspace,
    /// Real orthonormal basis of `Δ` (`d x (d - 2k)`).
    pub delta_real: DMatrix<f64>,
}

/// Type and `Δ` of a maximal isotropic `L` with `L ∩ conj(L) = 0`.
pub fn type_of(l: &Subspace) -> Result<StructureType> {
    let d2 = l.ambient_dim();
    if d2 % 2 != 0 {
        return Err(GcError::Input("type_of: odd ambient dimension".into()));
    }
    let d = d2 / 2;
    let e = l.apply(&rho_matrix(d))?;
    let k = d - e.dim();
    let delta_complex = e.intersect(&e.conjugate())?;
    let delta_real = real_form(&delta_complex)?;
    if delta_real.ncols() + 2 * k != d {
        return Err(GcError::InvalidStructure {
            context: format!(
                "dim_R Δ = {} does not match d - 2k = {}",
                delta_real.ncols(),
                d as i64 - 2 * k as i64
            ),
            residual: f64::NAN,
        });
    }
    Ok(StructureType {
        k,
        e,
        delta_complex,
        delta_real,
    })
}

/// Real orthonormal basis of the real form of a conjugation-stable
/// subspace, obtained from real and imaginary parts of its basis.
pub fn real_form(s: &Subspace) -> Result<DMatrix<f64>> {
    let n = s.ambient_dim();
    let m = s.dim();
    let mut parts = ComplexMatrix::zeros(n, 2 * m);
    for j in 0..m {
        for i in 0..n {
            let z = s.basis()[(i, j)];
            parts[(i, j)] = Complex64::new(z.re, 0.0);
            parts[(i, m + j)] = Complex64::new(z.im, 0.0);
        }
    }
    let spanned = Subspace::span(&parts, s.tol())?;
    if spanned.dim() != m {
        return Err(GcError::InvalidStructure {
            context: format!(
                "subspace is not conjugation-stable: real form has dimension {}, expected {}",
                spanned.dim(),
                m
            ),
            residual: f64::NAN,
        });
    }
    realify(spanned.basis(), s.tol(), "real_form")
}

/// The maximal isotropic `L(E, σ) = {A + ξ | A ∈ E, ξ|_E = σ(A)}`.
///
/// `sigma` is the matrix of the 2-form on the columns of `e.basis()`.
pub fn isotropic_from_presentation(e: &Subspace, sigma: &ComplexMatrix) -> Result<Subspace> {
    let d = e.ambient_dim();
    let r = e.dim();
    if sigma.nrows() != r || sigma.ncols() != r {
        return Err(GcError::DimensionMismatch {
            context: "isotropic_from_presentation",
            expected: r,
            got: sigma.nrows(),
        });
    }
    let u = e.basis();
    // Covector for basis vector u_α: the zero-extension off E of σ(u_α, ·),
    // i.e. conj(U) · (σᵀ e_α); any other extension differs by Ann(E), which
    // is included below.
    let xi = u.conjugate() * sigma.transpose();
    let ann = e.annihilator();
    let mut columns = ComplexMatrix::zeros(2 * d, r + ann.dim());
    for a in 0..r {
        for i in 0..d {
            columns[(i, a)] = u[(i, a)];
            columns[(d + i, a)] = xi[(i, a)];
        }
    }
    for a in 0..ann.dim() {
        for i in 0..d {
            columns[(d + i, r + a)] = ann.basis()[(i, a)];
        }
    }
    Subspace::span(&columns, e.tol())
}

/// The `(E, σ)` presentation of a maximal isotropic `L`, together with the
/// derived real distribution `Δ`, the transverse symplectic form `Ω_Δ` and
/// the linear Poisson structure `P = L(Δ ⊗ C, Ω_Δ)`.
#[derive(Debug, Clone)]
pub struct IsotropicPresentation {
    pub l: Subspace,
    /// `E = ρ(L)`; `σ` is written on the columns of `e.basis()`.
    pub e: Subspace,
    pub sigma: ComplexMatrix,
    pub structure_type: StructureType,
    /// `Ω_Δ = Im(σ)` restricted to `Δ`, on the columns of `delta_real`.
    pub omega_delta: DMatrix<f64>,
    /// `P = L(Δ ⊗ C, Ω_Δ)`, complex dimension `d`.
    pub poisson: Subspace,
    /// Least-squares residual of the `σ` system.
    pub sigma_residual: f64,
    /// Antisymmetry defect of the raw `σ` solution.
    pub sigma_antisymmetry: f64,
}

/// Solve `σ` from `σ(a_i, ·)|_E = ξ_i|_E` over a basis `{(a_i, ξ_i)}` of
/// `L`, recover `Δ` and `Ω_Δ`, and assemble the linear Poisson structure.
pub fn extract_presentation(l: &Subspace, tol: f64) -> Result<IsotropicPresentation> {
    let d2 = l.ambient_dim();
    if d2 % 2 != 0 {
        return Err(GcError::Input(
            "extract_presentation: odd ambient dimension".into(),
        ));
    }
    let d = d2 / 2;
    if l.dim() != d {
        return Err(GcError::InvalidStructure {
            context: format!("L has dimension {}, expected maximal {}", l.dim(), d),
            residual: f64::NAN,
        });
    }
    let structure_type = type_of(l)?;
    let e = structure_type.e.clone();
    let u = e.basis().clone();
    let r = e.dim();

    // Split the basis of L into vector and covector parts.
    let a_mat = l.basis().rows(0, d).into_owned();
    let xi_mat = l.basis().rows(d, d).into_owned();

    // Equations C_matᵀ · S = Ξᵀ · U with C = Uᴴ A (coordinates of the
    // vector parts in the basis of E).
    let coords_t = (u.adjoint() * &a_mat).transpose();
    let rhs = xi_mat.transpose() * &u;
    let sigma_raw = if r == 0 {
        ComplexMatrix::zeros(0, 0)
    } else {
        coords_t
            .clone()
            .svd(true, true)
            .solve(&rhs, tol)
            .map_err(|e| GcError::Input(format!("sigma solve: {e}")))?
    };
    let sigma = (&sigma_raw - sigma_raw.transpose()) * Complex64::new(0.5, 0.0);
    let sigma_antisymmetry = max_abs(&(&sigma_raw - &sigma));
    let scale = max_abs(&rhs).max(1.0);
    let sigma_residual = if r == 0 {
        0.0
    } else {
        max_abs(&(coords_t * &sigma - rhs))
    };
    if sigma_residual > tol * scale * 1e3 {
        return Err(GcError::InvalidStructure {
            context: "σ system is inconsistent: L is not of the form L(E, σ)".into(),
            residual: sigma_residual,
        });
    }

    // Ω_Δ = Im(σ) in the coordinates of the real basis of Δ.
    let w = &structure_type.delta_real;
    let m = w.ncols();
    let coords_w = u.adjoint() * complexify(w);
    let sigma_delta = coords_w.transpose() * &sigma * &coords_w;
    let omega_delta = DMatrix::from_fn(m, m, |i, j| sigma_delta[(i, j)].im);
    if m > 0 {
        let svals = omega_delta.clone().svd(false, false).singular_values;
        let smax = svals.iter().fold(0.0f64, |a, &s| a.max(s));
        let smin = svals.iter().fold(f64::INFINITY, |a, &s| a.min(s));
        if smin <= tol * smax.max(1.0) {
            return Err(GcError::InvalidStructure {
                context: "Ω_Δ = Im(σ)|_Δ is degenerate".into(),
                residual: smin,
            });
        }
    }

    let poisson = poisson_from_delta(w, &omega_delta, &structure_type.delta_complex, tol)?;
    if poisson.dim() != d {
        return Err(GcError::InvalidStructure {
            context: format!("P has dimension {}, expected {}", poisson.dim(), d),
            residual: f64::NAN,
        });
    }

    Ok(IsotropicPresentation {
        l: l.clone(),
        e,
        sigma,
        structure_type,
        omega_delta,
        poisson,
        sigma_residual,
        sigma_antisymmetry,
    })
}

/// `L(Δ ⊗ C, Ω_Δ)` with covectors zero-extended off `Δ`; the annihilator
/// of `Δ ⊗ C` is included, so the span does not depend on the extension.
fn poisson_from_delta(
    w: &DMatrix<f64>,
    omega_delta: &DMatrix<f64>,
    delta_complex: &Subspace,
    tol: f64,
) -> Result<Subspace> {
    let d = w.nrows();
    let m = w.ncols();
    let graph_covectors = w * omega_delta.transpose();
    let ann = delta_complex.annihilator();
    let mut columns = ComplexMatrix::zeros(2 * d, m + ann.dim());
    for a in 0..m {
        for i in 0..d {
            columns[(i, a)] = Complex64::new(w[(i, a)], 0.0);
            columns[(d + i, a)] = Complex64::new(graph_covectors[(i, a)], 0.0);
        }
    }
    for a in 0..ann.dim() {
        for i in 0..d {
            columns[(d + i, m + a)] = ann.basis()[(i, a)];
        }
    }
    Subspace::span(&columns, tol)
}

/// Pushforward of a Dirac structure `P ⊆ (V ⊕ V*) ⊗ C` along a real linear
/// map `f: V -> W`:
/// `f⋆P = {f(A) + η | A + f*(η) ∈ P}`.
pub fn dirac_pushforward(f: &DMatrix<f64>, p: &Subspace) -> Result<Subspace> {
    let w = f.nrows();
    let v = f.ncols();
    if p.ambient_dim() != 2 * v {
        return Err(GcError::DimensionMismatch {
            context: "dirac_pushforward",
            expected: 2 * v,
            got: p.ambient_dim(),
        });
    }
    if p.dim() != v {
        return Err(GcError::Input(format!(
            "dirac_pushforward: P has dimension {}, expected Dirac dimension {v}",
            p.dim()
        )));
    }
    let fc = complexify(f);
    // Φ: V ⊕ W* -> V ⊕ V*, (A, η) -> (A, fᵀ η).
    let mut phi = ComplexMatrix::zeros(2 * v, v + w);
    phi.view_mut((0, 0), (v, v))
        .copy_from(&ComplexMatrix::identity(v, v));
    phi.view_mut((v, v), (v, w)).copy_from(&fc.transpose());
    // Ψ: V ⊕ W* -> W ⊕ W*, (A, η) -> (f A, η).
    let mut psi = ComplexMatrix::zeros(2 * w, v + w);
    psi.view_mut((0, 0), (w, v)).copy_from(&fc);
    psi.view_mut((w, v), (w, w))
        .copy_from(&ComplexMatrix::identity(w, w));
    p.preimage(&phi)?.apply(&psi)
}

/// One tested condition with its residual.
#[derive(Debug, Clone, Copy)]
pub struct ConditionCheck {
    pub holds: bool,
    pub residual: f64,
}

/// Result of the GC-map test.
#[derive(Debug, Clone)]
pub struct GcMapReport {
    /// `f(E_V) ⊆ E_W`, residual = containment angle.
    pub e_condition: ConditionCheck,
    /// `f⋆(P_V) = P_W`, residual = largest principal angle.
    pub poisson_condition: ConditionCheck,
    pub is_gc_map: bool,
}

/// Test whether a real linear map is a GC map between two presented
/// structures: `f(E_V) ⊆ E_W` and `f⋆(P_V) = P_W`.
pub fn is_gc_map(
    f: &DMatrix<f64>,
    source: &IsotropicPresentation,
    target: &IsotropicPresentation,
    tol: f64,
) -> Result<GcMapReport> {
    let fc = complexify(f);
    let image_e = source.e.apply(&fc)?;
    let e_angle = image_e.containment_angle(&target.e)?;
    let pushed = dirac_pushforward(f, &source.poisson)?;
    let (p_equal, p_angle) = pushed.equal_subspaces(&target.poisson, tol)?;
    let e_condition = ConditionCheck {
        holds: e_angle < tol,
        residual: e_angle,
    };
    let poisson_condition = ConditionCheck {
        holds: p_equal,
        residual: p_angle,
    };
    Ok(GcMapReport {
        is_gc_map: e_condition.holds && poisson_condition.holds,
        e_condition,
        poisson_condition,
    })
}

/// Structure induced on a real subspace `V' ≤ V` by a maximal isotropic.
#[derive(Debug, Clone)]
pub struct InducedSubspace {
    /// `L_{V'} ⊆ (V' ⊕ V'*) ⊗ C` in the coordinates of `real_basis`.
    pub l_induced: Subspace,
    /// Real orthonormal basis of `V'` fixing the coordinates.
    pub real_basis: DMatrix<f64>,
    /// `L_{V'} ∩ conj(L_{V'}) = 0`.
    pub is_gc_subspace: bool,
}

/// `L_{V'} = {ρ(v) + ρ*(v)|_{V'} | v ∈ L ∩ (V' ⊕ V*) ⊗ C}` and the GC
/// subspace verdict. `v_prime` must be conjugation-stable (a real
/// subspace); `dim_C L_{V'} = dim_R V'` is verified.
pub fn induced_subspace_structure(v_prime: &Subspace, l: &Subspace) -> Result<InducedSubspace> {
    let d2 = l.ambient_dim();
    let d = d2 / 2;
    if v_prime.ambient_dim() != d {
        return Err(GcError::DimensionMismatch {
            context: "induced_subspace_structure",
            expected: d,
            got: v_prime.ambient_dim(),
        });
    }
    let (stable, angle) = v_prime
        .conjugate()
        .equal_subspaces(v_prime, v_prime.tol().max(1e-7))?;
    if !stable {
        return Err(GcError::Input(format!(
            "induced_subspace_structure: V' is not a real subspace (conjugation angle {angle:.3e})"
        )));
    }
    let w = real_form(v_prime)?;
    let m = w.ncols();
    let tol = l.tol();

    // (V' ⊕ V*) ⊗ C inside (V ⊕ V*) ⊗ C.
    let mut amb = ComplexMatrix::zeros(2 * d, m + d);
    amb.view_mut((0, 0), (d, m)).copy_from(&complexify(&w));
    amb.view_mut((d, m), (d, d))
        .copy_from(&ComplexMatrix::identity(d, d));
    let sub0 = Subspace::span(&amb, tol)?;
    let t = l.intersect(&sub0)?;

    // Componentwise map (A, ξ) -> (Wᵀ A, Wᵀ ξ): coordinates on V' plus
    // restriction of the covector to V'.
    let wc = complexify(&w);
    let mut proj = ComplexMatrix::zeros(2 * m, 2 * d);
    proj.view_mut((0, 0), (m, d)).copy_from(&wc.transpose());
    proj.view_mut((m, d), (m, d)).copy_from(&wc.transpose());
    let l_induced = t.apply(&proj)?;
    if l_induced.dim() != m {
        return Err(GcError::InvalidStructure {
            context: format!(
                "induced structure has dimension {}, expected dim_R V' = {m}",
                l_induced.dim()
            ),
            residual: f64::NAN,
        });
    }
    let is_gc_subspace = l_induced.intersect(&l_induced.conjugate())?.dim() == 0;
    Ok(InducedSubspace {
        l_induced,
        real_basis: w,
        is_gc_subspace,
    })
}

/// Image structure and type-jump check for an injective map certified GC.
#[derive(Debug, Clone)]
pub struct ImageStructureReport {
    pub induced: InducedSubspace,
    pub source_type: usize,
    pub target_type: usize,
    /// Type of the induced structure on `f(V)`.
    pub image_type: usize,
    /// `typ(W) - typ(V) = (dim W - dim V) / 2`.
    pub type_jump_ok: bool,
}

/// Induce the structure of `target` on `f(V)` and check the type-jump law
/// `typ(W) - typ(V) = (dim_R W - dim_R V)/2`. `f` must be injective and
/// should already be certified by [`is_gc_map`] against the ambient
/// structures.
pub fn image_structure(
    f: &DMatrix<f64>,
    source: &LinearGcStructure,
    target: &LinearGcStructure,
) -> Result<ImageStructureReport> {
    if f.ncols() != source.dim_v() || f.nrows() != target.dim_v() {
        return Err(GcError::DimensionMismatch {
            context: "image_structure",
            expected: source.dim_v(),
            got: f.ncols(),
        });
    }
    let fc = complexify(f);
    let f_image = Subspace::span(&fc, source.tol())?;
    if f_image.dim() != source.dim_v() {
        return Err(GcError::Input(format!(
            "image_structure: f is not injective (rank {}, expected {})",
            f_image.dim(),
            source.dim_v()
        )));
    }
    let l_source = source.eigenbundle()?;
    let l_target = target.eigenbundle()?;
    let source_type = type_of(&l_source)?.k;
    let target_type = type_of(&l_target)?.k;
    let induced = induced_subspace_structure(&f_image, &l_target)?;
    let image_type = type_of(&induced.l_induced)?.k;
    let jump = target_type as i64 - source_type as i64;
    let half_dim_gap = (target.dim_v() as i64 - source.dim_v() as i64) / 2;
    Ok(ImageStructureReport {
        induced,
        source_type,
        target_type,
        image_type,
        type_jump_ok: jump == half_dim_gap,
    })
}

/// Product structure: block assembly with vectors of both factors before
/// covectors of both factors. Type is additive.
pub fn product_structure(
    a: &LinearGcStructure,
    b: &LinearGcStructure,
) -> Result<LinearGcStructure> {
    let (da, db) = (a.dim_v(), b.dim_v());
    let d = da + db;
    let mut j = DMatrix::zeros(2 * d, 2 * d);
    let mut place = |jf: &DMatrix<f64>, df: usize, off_v: usize| {
        let reindex = |i: usize| if i < df { off_v + i } else { d + off_v + (i - df) };
        for r in 0..2 * df {
            for c in 0..2 * df {
                j[(reindex(r), reindex(c))] = jf[(r, c)];
            }
        }
    };
    place(a.j(), da, 0);
    place(b.j(), db, da);
    LinearGcStructure::new(j, a.tol().min(b.tol()))
}

/// `J` of the standard symplectic plane `(R², ω₀)`.
pub fn symplectic_plane(tol: f64) -> LinearGcStructure {
    // ω₀ = dp₁ ∧ dp₂ with matrix Ω = [[0, 1], [-1, 0]].
    let omega = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let omega_inv = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let mut j = DMatrix::zeros(4, 4);
    j.view_mut((0, 2), (2, 2)).copy_from(&(-&omega_inv));
    j.view_mut((2, 0), (2, 2)).copy_from(&omega);
    LinearGcStructure::new(j, tol).expect("standard symplectic plane is valid")
}

/// `J` of the standard complex line `C = (R², J₀)`, lifted as
/// `diag(-J₀, J₀ᵀ)`.
pub fn complex_line(tol: f64) -> LinearGcStructure {
    let j0 = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let mut j = DMatrix::zeros(4, 4);
    j.view_mut((0, 0), (2, 2)).copy_from(&(-&j0));
    j.view_mut((2, 2), (2, 2)).copy_from(&j0.transpose());
    LinearGcStructure::new(j, tol).expect("standard complex line is valid")
}

/// The product model on `R^{2M} x C^N`: `ω₀` on the symplectic block
/// (coordinates `p_1..p_{2M}` first), `J₀` on the complex block. Its type
/// is `N`.
pub fn standard_model(m: usize, n: usize, tol: f64) -> Result<LinearGcStructure> {
    if m == 0 && n == 0 {
        return Err(GcError::Input("standard_model: M = N = 0".into()));
    }
    let mut factors = Vec::new();
    for _ in 0..m {
        factors.push(symplectic_plane(tol));
    }
    for _ in 0..n {
        factors.push(complex_line(tol));
    }
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = product_structure(&acc, f)?;
    }
    Ok(acc)
}

/// Random antisymmetric `d x d` matrix with entries of the given scale.
pub fn random_antisymmetric<R: Rng>(rng: &mut R, d: usize, scale: f64) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            let x = rng.random_range(-scale..scale);
            b[(i, j)] = x;
            b[(j, i)] = -x;
        }
    }
    b
}

/// Isotropy defect of a subspace of `(V ⊕ V*) ⊗ C` under the bilinear
/// split pairing: `max |basisᵀ G basis|`.
pub fn isotropy_residual(l: &Subspace) -> f64 {
    let d = l.ambient_dim() / 2;
    let g = complexify(&pairing_matrix(d));
    max_abs(&(l.basis().transpose() * g * l.basis()))
}

/// Transversality defect: dimension of `L ∩ conj(L)` (0 when transversal).
pub fn transversality_defect(l: &Subspace) -> Result<usize> {
    Ok(l.intersect(&l.conjugate())?.dim())
}

/// Convenience: eigenbundle plus presentation of a validated structure.
pub fn presentation_of(structure: &LinearGcStructure) -> Result<IsotropicPresentation> {
    extract_presentation(&structure.eigenbundle()?, structure.tol())
}

/// Column vector from complex entries.
pub fn complex_column(entries: &[Complex64]) -> DVector<Complex64> {
    DVector::from_column_slice(entries)
}
