//! Pointwise differential checks for structures given as smooth fields on
//! a coordinate box in `R^d`.
//!
//! All derivatives are central differences with a per-point step
//! `h = fd_step * (1 + |x|_∞)`; every check requires its sample points to
//! keep a `2h` margin from the box boundary and never extrapolates.

use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{GcError, Result};
use crate::linear::{standard_model, validate, LinearGcStructure};
use crate::subspace::Subspace;

pub type MatrixField = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type ComplexField = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;
pub type PlaneField = Arc<dyn Fn(&[f64]) -> [f64; 2] + Send + Sync>;

/// Coordinates of the product model `R^{2M} x C^N`: `p_1..p_{2M}` first,
/// then interleaved real/imaginary parts with `z_j = x_{2j-1} + i x_{2j}`
/// inside the complex block.
#[derive(Debug, Clone)]
pub struct ModelChart {
    pub m: usize,
    pub n: usize,
    box_: Vec<(f64, f64)>,
}

impl ModelChart {
    pub fn new(m: usize, n: usize) -> Result<ModelChart> {
        if m == 0 && n == 0 {
            return Err(GcError::Input("ModelChart: M = N = 0".into()));
        }
        let d = 2 * m + 2 * n;
        Ok(ModelChart {
            m,
            n,
            box_: vec![(-10.0, 10.0); d],
        })
    }

    pub fn with_box(mut self, box_: Vec<(f64, f64)>) -> Result<ModelChart> {
        if box_.len() != self.dim() {
            return Err(GcError::DimensionMismatch {
                context: "ModelChart::with_box",
                expected: self.dim(),
                got: box_.len(),
            });
        }
        self.box_ = box_;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        2 * self.m + 2 * self.n
    }

    pub fn box_(&self) -> &[(f64, f64)] {
        &self.box_
    }

    /// Index of `Re z_j` (`j` zero-based).
    pub fn z_re(&self, j: usize) -> usize {
        2 * self.m + 2 * j
    }

    /// Index of `Im z_j`.
    pub fn z_im(&self, j: usize) -> usize {
        2 * self.m + 2 * j + 1
    }

    pub fn z_value(&self, x: &[f64], j: usize) -> Complex64 {
        Complex64::new(x[self.z_re(j)], x[self.z_im(j)])
    }

    /// The constant product structure on these coordinates.
    pub fn structure(&self, tol: f64) -> LinearGcStructure {
        standard_model(self.m, self.n, tol).expect("chart dimensions checked on construction")
    }
}

/// A section `A + ξ` of `TX ⊕ T*X` given by two evaluators.
#[derive(Clone)]
pub struct Section {
    vector: VectorField,
    covector: VectorField,
}

impl Section {
    pub fn new(vector: VectorField, covector: VectorField) -> Section {
        Section { vector, covector }
    }

    pub fn constant(vector: DVector<f64>, covector: DVector<f64>) -> Section {
        Section {
            vector: Arc::new(move |_| vector.clone()),
            covector: Arc::new(move |_| covector.clone()),
        }
    }

    pub fn vector_at(&self, x: &[f64]) -> DVector<f64> {
        (self.vector)(x)
    }

    pub fn covector_at(&self, x: &[f64]) -> DVector<f64> {
        (self.covector)(x)
    }
}

/// A coordinate-patch map `x -> J(x)` with finite-difference calculus
/// attached. Structure validity is certified lazily: every point whose `J`
/// is consumed by a check is validated once and cached.
pub struct StructureField {
    d: usize,
    box_: Vec<(f64, f64)>,
    j_at: MatrixField,
    fd_step: f64,
    tol: f64,
    certified: Mutex<HashSet<Vec<u64>>>,
}

impl StructureField {
    pub fn new(
        d: usize,
        box_: Vec<(f64, f64)>,
        j_at: MatrixField,
        fd_step: f64,
        tol: f64,
    ) -> Result<StructureField> {
        if d == 0 || d % 2 != 0 {
            return Err(GcError::Input(format!(
                "StructureField: d must be even and positive, got {d}"
            )));
        }
        if box_.len() != d {
            return Err(GcError::DimensionMismatch {
                context: "StructureField box",
                expected: d,
                got: box_.len(),
            });
        }
        if box_.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(GcError::Input("StructureField: empty box axis".into()));
        }
        if !(fd_step > 0.0) || !(tol > 0.0) {
            return Err(GcError::Input(
                "StructureField: fd_step and tol must be > 0".into(),
            ));
        }
        Ok(StructureField {
            d,
            box_,
            j_at,
            fd_step,
            tol,
            certified: Mutex::new(HashSet::new()),
        })
    }

    /// Constant field from a validated structure.
    pub fn constant(
        structure: &LinearGcStructure,
        box_: Vec<(f64, f64)>,
        fd_step: f64,
    ) -> Result<StructureField> {
        let j = structure.j().clone();
        StructureField::new(
            structure.dim_v(),
            box_,
            Arc::new(move |_| j.clone()),
            fd_step,
            structure.tol(),
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn box_(&self) -> &[(f64, f64)] {
        &self.box_
    }

    /// Per-point step `fd_step * (1 + |x|_∞)`.
    pub fn step_at(&self, x: &[f64]) -> f64 {
        self.fd_step * (1.0 + sup_norm(x))
    }

    /// Reject points closer than `2h` to the boundary.
    pub fn require_margin(&self, x: &[f64]) -> Result<()> {
        require_margin(&self.box_, x, 2.0 * self.step_at(x))
    }

    fn j_raw(&self, x: &[f64]) -> DMatrix<f64> {
        (self.j_at)(x)
    }

    /// Validate `J(x)` once per point (cached) and return it.
    pub fn j(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let seen = self.certified.lock().unwrap().contains(&key);
        let j = self.j_raw(x);
        if !seen {
            let cert = validate(&j, self.tol)?;
            if !cert.accepted() {
                return Err(GcError::InvalidStructure {
                    context: format!("field structure at {x:?}"),
                    residual: cert.j_squared_residual.max(cert.pairing_residual),
                });
            }
            self.certified.lock().unwrap().insert(key);
        }
        Ok(j)
    }

    /// `+i`-eigenbundle of `J(x)`.
    pub fn eigenbundle_at(&self, x: &[f64]) -> Result<Subspace> {
        LinearGcStructure::new(self.j(x)?, self.tol)?.eigenbundle()
    }
}

pub fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn require_margin(box_: &[(f64, f64)], x: &[f64], margin: f64) -> Result<()> {
    if x.len() != box_.len() {
        return Err(GcError::DimensionMismatch {
            context: "sample point",
            expected: box_.len(),
            got: x.len(),
        });
    }
    for (axis, (&xi, &(lo, hi))) in x.iter().zip(box_.iter()).enumerate() {
        if xi - margin < lo || xi + margin > hi {
            return Err(GcError::BoundaryMargin { axis, margin });
        }
    }
    Ok(())
}

fn shifted(x: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[axis] += delta;
    y
}

/// Jacobian `D[(i, j)] = ∂_j f_i` by central differences.
fn jacobian(f: &VectorField, x: &[f64], h: f64, rows: usize) -> DMatrix<f64> {
    let d = x.len();
    let mut jac = DMatrix::zeros(rows, d);
    for j in 0..d {
        let plus = f(&shifted(x, j, h));
        let minus = f(&shifted(x, j, -h));
        for i in 0..rows {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// Complex gradient `(∂_1 f, ..., ∂_d f)` by central differences.
pub fn complex_gradient(f: &ComplexField, x: &[f64], h: f64) -> DVector<Complex64> {
    let d = x.len();
    DVector::from_fn(d, |j, _| {
        (f(&shifted(x, j, h)) - f(&shifted(x, j, -h))) / Complex64::new(2.0 * h, 0.0)
    })
}

fn second_partial(f: &ComplexField, x: &[f64], a: usize, b: usize, h: f64) -> Complex64 {
    if a == b {
        let two = Complex64::new(2.0, 0.0);
        (f(&shifted(x, a, h)) + f(&shifted(x, a, -h)) - two * f(x)) / Complex64::new(h * h, 0.0)
    } else {
        let pp = f(&shifted(&shifted(x, a, h), b, h));
        let pm = f(&shifted(&shifted(x, a, h), b, -h));
        let mp = f(&shifted(&shifted(x, a, -h), b, h));
        let mm = f(&shifted(&shifted(x, a, -h), b, -h));
        (pp - pm - mp + mm) / Complex64::new(4.0 * h * h, 0.0)
    }
}

/// Courant bracket of two sections at `x`:
/// `[A₁+ξ₁, A₂+ξ₂] = [A₁,A₂]_Lie + ℒ_{A₁}ξ₂ - ℒ_{A₂}ξ₁ - ½ d(ι_{A₁}ξ₂ - ι_{A₂}ξ₁)`.
pub fn courant_bracket(
    s1: &Section,
    s2: &Section,
    x: &[f64],
    box_: &[(f64, f64)],
    fd_step: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let h = fd_step * (1.0 + sup_norm(x));
    require_margin(box_, x, 2.0 * h)?;
    let d = x.len();
    let a1 = s1.vector_at(x);
    let a2 = s2.vector_at(x);
    let xi1 = s1.covector_at(x);
    let xi2 = s2.covector_at(x);
    let da1 = jacobian(&s1.vector, x, h, d);
    let da2 = jacobian(&s2.vector, x, h, d);
    let dxi1 = jacobian(&s1.covector, x, h, d);
    let dxi2 = jacobian(&s2.covector, x, h, d);

    // [A₁, A₂]_Lie = DA₂·A₁ - DA₁·A₂.
    let lie = &da2 * &a1 - &da1 * &a2;
    // ℒ_A ξ = Dξ·A + DAᵀ·ξ.
    let lie_d1 = &dxi2 * &a1 + da1.transpose() * &xi2;
    let lie_d2 = &dxi1 * &a2 + da2.transpose() * &xi1;
    // d(ι_{A₁}ξ₂ - ι_{A₂}ξ₁) by the product rule on the same stencils.
    let dpair = da1.transpose() * &xi2 + dxi2.transpose() * &a1
        - da2.transpose() * &xi1
        - dxi1.transpose() * &a2;
    let covector = lie_d1 - lie_d2 - dpair * 0.5;
    Ok((lie, covector))
}

/// Pointwise Nijenhuis residual: the largest norm of
/// `N(C, D) = [JC, JD] - J[JC, D] - J[C, JD] - [C, D]` over the coordinate
/// frame sections `C, D ∈ {(e_i, 0), (0, dx_i)}`. Vanishing on the frame is
/// enough by tensoriality.
pub fn nijenhuis_residual(field: &StructureField, x: &[f64]) -> Result<f64> {
    field.require_margin(x)?;
    let d = field.dim();
    let h = field.step_at(x);
    // Certify the whole stencil once; the section closures then read J raw.
    field.j(x)?;
    for a in 0..d {
        field.j(&shifted(x, a, h))?;
        field.j(&shifted(x, a, -h))?;
    }
    let j_x = field.j(x)?;

    let frame: Vec<DVector<f64>> = (0..2 * d)
        .map(|i| DVector::from_fn(2 * d, |r, _| if r == i { 1.0 } else { 0.0 }))
        .collect();
    let section_of = |c: &DVector<f64>| -> Section {
        let top = DVector::from_fn(d, |i, _| c[i]);
        let bottom = DVector::from_fn(d, |i, _| c[d + i]);
        Section::constant(top, bottom)
    };
    let j_section = |c: DVector<f64>| -> Section {
        let jc_v = {
            let j_at = field.j_at.clone();
            let c = c.clone();
            Arc::new(move |y: &[f64]| {
                let jc = j_at(y) * &c;
                DVector::from_fn(c.nrows() / 2, |i, _| jc[i])
            }) as VectorField
        };
        let jc_x = {
            let j_at = field.j_at.clone();
            Arc::new(move |y: &[f64]| {
                let jc = j_at(y) * &c;
                let half = c.nrows() / 2;
                DVector::from_fn(half, |i, _| jc[half + i])
            }) as VectorField
        };
        Section::new(jc_v, jc_x)
    };

    let bracket = |s1: &Section, s2: &Section| -> Result<DVector<f64>> {
        let (v, w) = courant_bracket(s1, s2, x, &field.box_, field.fd_step)?;
        Ok(DVector::from_fn(
            2 * d,
            |i, _| if i < d { v[i] } else { w[i - d] },
        ))
    };

    let mut max_norm: f64 = 0.0;
    for i in 0..2 * d {
        for k in (i + 1)..2 * d {
            let c = section_of(&frame[i]);
            let dd = section_of(&frame[k]);
            let jc = j_section(frame[i].clone());
            let jd = j_section(frame[k].clone());
            let n = bracket(&jc, &jd)? - &j_x * bracket(&jc, &dd)? - &j_x * bracket(&c, &jd)?
                - bracket(&c, &dd)?;
            max_norm = max_norm.max(n.norm());
        }
    }
    Ok(max_norm)
}

/// `d_L f` at `x` on the computed orthonormal basis of the eigenbundle:
/// component `i` is `ρ(A_i)·∇f`. The returned norm is the GH defect.
pub fn d_l_function(
    f: &ComplexField,
    field: &StructureField,
    x: &[f64],
) -> Result<(DVector<Complex64>, f64)> {
    field.require_margin(x)?;
    let d = field.dim();
    let h = field.step_at(x);
    let l = field.eigenbundle_at(x)?;
    let grad = complex_gradient(f, x, h);
    let components = DVector::from_fn(l.dim(), |i, _| {
        let mut acc = Complex64::new(0.0, 0.0);
        for row in 0..d {
            acc += l.basis()[(row, i)] * grad[row];
        }
        acc
    });
    let norm = components.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok((components, norm))
}

#[derive(Debug, Clone)]
pub struct GhSample {
    pub point: Vec<f64>,
    pub dzbar: f64,
    pub dp: f64,
    pub dl: f64,
}

/// Report of the coordinate GH criterion `∂f/∂z̄_j = ∂f/∂p_l = 0`,
/// cross-validated against `d_L f` on the constant product structure.
#[derive(Debug, Clone)]
pub struct GhReport {
    pub max_dzbar: f64,
    pub max_dp: f64,
    pub max_dl: f64,
    pub is_gh: bool,
    /// The coordinate verdict and the `d_L` verdict (at `10 * tol`) agree.
    pub agrees_with_dl: bool,
    pub tol: f64,
    pub samples: Vec<GhSample>,
}

/// Test a complex scalar field for generalized holomorphicity on a product
/// model chart.
pub fn gh_check_model(
    f: &ComplexField,
    chart: &ModelChart,
    samples: &[Vec<f64>],
    fd_step: f64,
    tol: f64,
) -> Result<GhReport> {
    if samples.is_empty() {
        return Err(GcError::Input("gh_check_model: no samples".into()));
    }
    let field = StructureField::constant(
        &chart.structure(tol.min(1e-9)),
        chart.box_.clone(),
        fd_step,
    )?;
    let mut rows = Vec::with_capacity(samples.len());
    let (mut max_dzbar, mut max_dp, mut max_dl) = (0.0f64, 0.0f64, 0.0f64);
    for x in samples {
        let h = fd_step * (1.0 + sup_norm(x));
        require_margin(&chart.box_, x, 2.0 * h)?;
        let grad = complex_gradient(f, x, h);
        let mut dzbar = 0.0f64;
        for j in 0..chart.n {
            // ∂/∂z̄ = (∂/∂x + i ∂/∂y) / 2.
            let w = (grad[chart.z_re(j)] + Complex64::new(0.0, 1.0) * grad[chart.z_im(j)]) * 0.5;
            dzbar = dzbar.max(w.norm());
        }
        let mut dp = 0.0f64;
        for l in 0..2 * chart.m {
            dp = dp.max(grad[l].norm());
        }
        let (_, dl) = d_l_function(f, &field, x)?;
        max_dzbar = max_dzbar.max(dzbar);
        max_dp = max_dp.max(dp);
        max_dl = max_dl.max(dl);
        rows.push(GhSample {
            point: x.clone(),
            dzbar,
            dp,
            dl,
        });
    }
    let is_gh = max_dzbar < tol && max_dp < tol;
    let dl_verdict = max_dl < 10.0 * tol;
    Ok(GhReport {
        max_dzbar,
        max_dp,
        max_dl,
        is_gh,
        agrees_with_dl: is_gh == dl_verdict,
        tol,
        samples: rows,
    })
}

#[derive(Debug, Clone)]
pub struct PoissonSample {
    pub point: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct PoissonReport {
    pub max_residual: f64,
    pub is_poisson: bool,
    pub tol: f64,
    pub samples: Vec<PoissonSample>,
}

/// Check `f: R^{2M} x C^N -> R²` for the Poisson-map property
/// `Df · π · Dfᵀ = π₀` with `π = ω₀⁻¹ ⊕ 0` on the source and `π₀ = ω₀⁻¹`
/// on the target. Residuals are max-abs entry norms.
pub fn poisson_map_check(
    f: &PlaneField,
    chart: &ModelChart,
    samples: &[Vec<f64>],
    fd_step: f64,
    tol: f64,
) -> Result<PoissonReport> {
    if samples.is_empty() {
        return Err(GcError::Input("poisson_map_check: no samples".into()));
    }
    let d = chart.dim();
    let mut pi_source = DMatrix::zeros(d, d);
    for b in 0..chart.m {
        // ω₀ block [[0,1],[-1,0]] has inverse [[0,-1],[1,0]].
        pi_source[(2 * b, 2 * b + 1)] = -1.0;
        pi_source[(2 * b + 1, 2 * b)] = 1.0;
    }
    let pi_target = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let fv: VectorField = {
        let f = f.clone();
        Arc::new(move |x: &[f64]| {
            let [u, v] = f(x);
            DVector::from_column_slice(&[u, v])
        })
    };
    let mut rows = Vec::with_capacity(samples.len());
    let mut max_residual = 0.0f64;
    for x in samples {
        let h = fd_step * (1.0 + sup_norm(x));
        require_margin(&chart.box_, x, 2.0 * h)?;
        let df = jacobian(&fv, x, h, 2);
        let pushed = &df * &pi_source * df.transpose();
        let residual = (&pushed - &pi_target).abs().max();
        max_residual = max_residual.max(residual);
        rows.push(PoissonSample {
            point: x.clone(),
            residual,
        });
    }
    Ok(PoissonReport {
        max_residual,
        is_poisson: max_residual < tol,
        tol,
        samples: rows,
    })
}

#[derive(Debug, Clone)]
pub struct LeviSample {
    pub point: Vec<f64>,
    pub leaf_residual: f64,
    pub min_eigenvalue: f64,
    pub hermitian_defect: f64,
}

#[derive(Debug, Clone)]
pub struct LPshReport {
    pub max_leaf_residual: f64,
    /// Smallest Levi eigenvalue over all samples.
    pub min_eigenvalue: f64,
    pub max_hermitian_defect: f64,
    pub is_psh: bool,
    pub is_strictly_psh: bool,
    pub samples: Vec<LeviSample>,
}

/// Thresholds for [`l_psh_check`].
#[derive(Debug, Clone, Copy)]
pub struct LPshSettings {
    /// Leafwise-constancy bound on `max |∂f/∂p_l|`.
    pub leaf_tol: f64,
    /// Tolerance for the positive-semidefinite verdict: psh iff the
    /// smallest Levi eigenvalue is `>= -levi_tol` everywhere. Sits above
    /// the rounding floor of second-difference stencils.
    pub levi_tol: f64,
    /// Strictly psh iff the smallest eigenvalue exceeds this everywhere.
    pub strictness: f64,
}

impl Default for LPshSettings {
    fn default() -> Self {
        LPshSettings {
            leaf_tol: 1e-7,
            levi_tol: 1e-5,
            strictness: 1e-6,
        }
    }
}

/// Leafwise constancy and transverse Levi form of a real function on a
/// product model chart: `H_ij = ∂²f/∂z_i∂z̄_j` from real second partials,
/// eigenvalues of the Hermitian `N x N` matrix per sample.
pub fn l_psh_check(
    f: &ComplexField,
    chart: &ModelChart,
    samples: &[Vec<f64>],
    fd_step: f64,
    settings: LPshSettings,
) -> Result<LPshReport> {
    if samples.is_empty() {
        return Err(GcError::Input("l_psh_check: no samples".into()));
    }
    let n = chart.n;
    let mut rows = Vec::with_capacity(samples.len());
    let mut max_leaf = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut max_herm = 0.0f64;
    for x in samples {
        let h = fd_step * (1.0 + sup_norm(x));
        require_margin(&chart.box_, x, 2.0 * h)?;
        let value = f(x);
        if value.im.abs() > 1e-9 * value.norm().max(1.0) {
            return Err(GcError::Input(format!(
                "l_psh_check: f is not real at {x:?} (Im = {:.3e})",
                value.im
            )));
        }
        let grad = complex_gradient(f, x, h);
        let mut leaf = 0.0f64;
        for l in 0..2 * chart.m {
            leaf = leaf.max(grad[l].re.abs());
        }
        // Levi form: H_ij = (f_{x_i x_j} + f_{y_i y_j} + i (f_{x_i y_j} - f_{y_i x_j})) / 4.
        let mut levi = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let xx = second_partial(f, x, chart.z_re(i), chart.z_re(j), h).re;
                let yy = second_partial(f, x, chart.z_im(i), chart.z_im(j), h).re;
                let xy = second_partial(f, x, chart.z_re(i), chart.z_im(j), h).re;
                let yx = second_partial(f, x, chart.z_im(i), chart.z_re(j), h).re;
                levi[(i, j)] = Complex64::new((xx + yy) / 4.0, (xy - yx) / 4.0);
            }
        }
        let herm_defect = (&levi - levi.adjoint())
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()))
            / 2.0;
        let hermitian = (&levi + levi.adjoint()) * Complex64::new(0.5, 0.0);
        let min_here = if n == 0 {
            f64::INFINITY
        } else {
            SymmetricEigen::new(hermitian)
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &v| a.min(v))
        };
        max_leaf = max_leaf.max(leaf);
        min_eig = min_eig.min(min_here);
        max_herm = max_herm.max(herm_defect);
        rows.push(LeviSample {
            point: x.clone(),
            leaf_residual: leaf,
            min_eigenvalue: min_here,
            hermitian_defect: herm_defect,
        });
    }
    let leaf_ok = max_leaf < settings.leaf_tol;
    Ok(LPshReport {
        max_leaf_residual: max_leaf,
        min_eigenvalue: min_eig,
        max_hermitian_defect: max_herm,
        is_psh: leaf_ok && min_eig >= -settings.levi_tol,
        is_strictly_psh: leaf_ok && min_eig > settings.strictness,
        samples: rows,
    })
}

/// The standard non-integrable fixture: the complex-type structure on `R⁴`
/// whose underlying almost complex structure is `J₀ ⊕ J₀` conjugated by a
/// rotation of the `(x₂, x₃)`-plane by angle `x₁`. Its Nijenhuis tensor has
/// norm `|sin x₁|` on the `(∂₁, ∂₂)` frame pair.
pub fn rotating_almost_complex_field(fd_step: f64, tol: f64) -> StructureField {
    let j_at: MatrixField = Arc::new(|x: &[f64]| {
        let theta = x[0];
        let (s, c) = theta.sin_cos();
        let mut rot = DMatrix::identity(4, 4);
        rot[(1, 1)] = c;
        rot[(1, 2)] = -s;
        rot[(2, 1)] = s;
        rot[(2, 2)] = c;
        let mut j0 = DMatrix::zeros(4, 4);
        for b in 0..2 {
            j0[(2 * b, 2 * b + 1)] = -1.0;
            j0[(2 * b + 1, 2 * b)] = 1.0;
        }
        let jx = &rot * j0 * rot.transpose();
        let mut j = DMatrix::zeros(8, 8);
        j.view_mut((0, 0), (4, 4)).copy_from(&(-&jx));
        j.view_mut((4, 4), (4, 4)).copy_from(&jx.transpose());
        j
    });
    StructureField::new(4, vec![(-2.0, 2.0); 4], j_at, fd_step, tol)
        .expect("rotating fixture parameters are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const FD: f64 = 1e-5;
    const TOL: f64 = 1e-9;

    fn box2() -> Vec<(f64, f64)> {
        vec![(-3.0, 3.0); 2]
    }

    /// Monomial-list polynomials with exact derivatives: the independent
    /// oracle for every finite-difference check below.
    #[derive(Clone, Debug)]
    struct Poly {
        terms: Vec<(f64, Vec<u32>)>,
    }

    impl Poly {
        fn new(terms: &[(f64, &[u32])]) -> Poly {
            Poly {
                terms: terms.iter().map(|(c, p)| (*c, p.to_vec())).collect(),
            }
        }

        fn eval(&self, x: &[f64]) -> f64 {
            self.terms
                .iter()
                .map(|(c, p)| {
                    c * p
                        .iter()
                        .enumerate()
                        .map(|(i, &e)| x[i].powi(e as i32))
                        .product::<f64>()
                })
                .sum()
        }

        fn partial(&self, axis: usize) -> Poly {
            let terms = self
                .terms
                .iter()
                .filter(|(_, p)| p[axis] > 0)
                .map(|(c, p)| {
                    let mut q = p.clone();
                    q[axis] -= 1;
                    (c * p[axis] as f64, q)
                })
                .collect();
            Poly { terms }
        }
    }

    fn poly_section(a: [Poly; 2], xi: [Poly; 2]) -> Section {
        Section::new(
            Arc::new(move |x| DVector::from_column_slice(&[a[0].eval(x), a[1].eval(x)])),
            Arc::new(move |x| DVector::from_column_slice(&[xi[0].eval(x), xi[1].eval(x)])),
        )
    }

    /// Exact Courant bracket of polynomial sections via symbolic partials.
    fn exact_bracket(
        a1: &[Poly; 2],
        xi1: &[Poly; 2],
        a2: &[Poly; 2],
        xi2: &[Poly; 2],
        x: &[f64],
    ) -> (DVector<f64>, DVector<f64>) {
        let d = 2;
        let at =
            |p: &[Poly; 2], x: &[f64]| DVector::from_column_slice(&[p[0].eval(x), p[1].eval(x)]);
        let jac = |p: &[Poly; 2], x: &[f64]| DMatrix::from_fn(d, d, |i, j| p[i].partial(j).eval(x));
        let (a1v, a2v) = (at(a1, x), at(a2, x));
        let (x1v, x2v) = (at(xi1, x), at(xi2, x));
        let (da1, da2) = (jac(a1, x), jac(a2, x));
        let (dx1, dx2) = (jac(xi1, x), jac(xi2, x));
        let lie = &da2 * &a1v - &da1 * &a2v;
        let lie_d1 = &dx2 * &a1v + da1.transpose() * &x2v;
        let lie_d2 = &dx1 * &a2v + da2.transpose() * &x1v;
        let dpair = da1.transpose() * &x2v + dx2.transpose() * &a1v
            - da2.transpose() * &x1v
            - dx1.transpose() * &a2v;
        (lie, lie_d1 - lie_d2 - dpair * 0.5)
    }

    #[test]
    fn bracket_of_constant_sections_vanishes() {
        let s1 = Section::constant(DVector::from_column_slice(&[1.0, 0.0]), DVector::zeros(2));
        let s2 = Section::constant(DVector::from_column_slice(&[0.0, 1.0]), DVector::zeros(2));
        let (v, w) = courant_bracket(&s1, &s2, &[0.3, -0.2], &box2(), FD).unwrap();
        assert!(v.norm() < 1e-12 && w.norm() < 1e-12);
    }

    #[test]
    fn bracket_reproduces_hand_lie_bracket() {
        // s1 = (∂x, 0), s2 = (x ∂y, 0): [∂x, x ∂y] = ∂y.
        let zero = || Poly::new(&[]);
        let one = || Poly::new(&[(1.0, &[0, 0])]);
        let xc = || Poly::new(&[(1.0, &[1, 0])]);
        let s1 = poly_section([one(), zero()], [zero(), zero()]);
        let s2 = poly_section([zero(), xc()], [zero(), zero()]);
        let (v, w) = courant_bracket(&s1, &s2, &[0.4, 0.1], &box2(), FD).unwrap();
        assert!((v[0]).abs() < 1e-8 && (v[1] - 1.0).abs() < 1e-8);
        assert!(w.norm() < 1e-8);
    }

    #[test]
    fn bracket_reproduces_hand_cartan_calculus() {
        // s1 = (∂x, 0), s2 = (0, x dy): result (0, dy).
        let zero = || Poly::new(&[]);
        let one = || Poly::new(&[(1.0, &[0, 0])]);
        let xc = || Poly::new(&[(1.0, &[1, 0])]);
        let s1 = poly_section([one(), zero()], [zero(), zero()]);
        let s2 = poly_section([zero(), zero()], [zero(), xc()]);
        let (v, w) = courant_bracket(&s1, &s2, &[0.4, 0.1], &box2(), FD).unwrap();
        assert!(v.norm() < 1e-8);
        assert!((w[0]).abs() < 1e-8 && (w[1] - 1.0).abs() < 1e-8);
    }

    fn random_poly(rng: &mut StdRng, max_deg: u32) -> Poly {
        let mut terms = Vec::new();
        for e1 in 0..=max_deg {
            for e2 in 0..=(max_deg - e1) {
                terms.push((rng.random_range(-1.0..1.0), vec![e1, e2]));
            }
        }
        Poly { terms }
    }

    fn random_section_polys(rng: &mut StdRng, deg: u32) -> ([Poly; 2], [Poly; 2]) {
        (
            [random_poly(rng, deg), random_poly(rng, deg)],
            [random_poly(rng, deg), random_poly(rng, deg)],
        )
    }

    #[test]
    fn bracket_is_antisymmetric_on_random_polynomial_sections() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..10 {
            let (a1, x1) = random_section_polys(&mut rng, 2);
            let (a2, x2) = random_section_polys(&mut rng, 2);
            let s1 = poly_section(a1, x1);
            let s2 = poly_section(a2, x2);
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let (v12, w12) = courant_bracket(&s1, &s2, &x, &box2(), FD).unwrap();
            let (v21, w21) = courant_bracket(&s2, &s1, &x, &box2(), FD).unwrap();
            assert!((v12 + v21).norm() < 1e-8);
            assert!((w12 + w21).norm() < 1e-8);
        }
    }

    #[test]
    fn bracket_matches_symbolic_oracle_and_converges_at_second_order() {
        let mut rng = StdRng::seed_from_u64(31);
        let (a1, x1) = random_section_polys(&mut rng, 3);
        let (a2, x2) = random_section_polys(&mut rng, 3);
        let s1 = poly_section(a1.clone(), x1.clone());
        let s2 = poly_section(a2.clone(), x2.clone());
        let x = [0.37, -0.22];
        let (ve, we) = exact_bracket(&a1, &x1, &a2, &x2, &x);

        let err_at = |h: f64| {
            let (v, w) = courant_bracket(&s1, &s2, &x, &box2(), h).unwrap();
            ((v - &ve).norm().powi(2) + (w - &we).norm().powi(2)).sqrt()
        };
        let e1 = err_at(1e-2);
        let e2 = err_at(5e-3);
        assert!(
            e1 > 1e-9,
            "cubic sections must produce visible truncation error"
        );
        assert!(e2 * 3.0 <= e1, "halving the step gave {e1} -> {e2}");
        assert!(e1 < 1e-2);
    }

    #[test]
    fn margin_violation_is_reported() {
        let s = Section::constant(DVector::zeros(2), DVector::zeros(2));
        let err = courant_bracket(&s, &s, &[2.9999999, 0.0], &box2(), FD);
        assert!(matches!(err, Err(GcError::BoundaryMargin { .. })));
    }

    #[test]
    fn constant_fields_have_zero_nijenhuis_residual() {
        for &(m, n) in &[(1usize, 0usize), (0, 1), (1, 1)] {
            let s = standard_model(m, n, TOL).unwrap();
            let field = StructureField::constant(&s, vec![(-2.0, 2.0); s.dim_v()], FD).unwrap();
            let x = vec![0.25; s.dim_v()];
            let r = nijenhuis_residual(&field, &x).unwrap();
            assert!(r < 1e-6, "({m},{n}): r = {r}");
        }
    }

    #[test]
    fn constant_b_transform_of_complex_model_stays_integrable() {
        let mut rng = StdRng::seed_from_u64(3);
        let c2 = standard_model(0, 2, TOL).unwrap();
        let b = crate::linear::random_antisymmetric(&mut rng, 4, 0.8);
        let sb = c2.b_transform(&b).unwrap();
        let field = StructureField::constant(&sb, vec![(-2.0, 2.0); 4], FD).unwrap();
        let r = nijenhuis_residual(&field, &[0.1, -0.2, 0.3, 0.0]).unwrap();
        assert!(r < 1e-6, "r = {r}");
    }

    #[test]
    fn rotating_field_is_detectably_non_integrable() {
        let field = rotating_almost_complex_field(FD, TOL);
        let mut rng = StdRng::seed_from_u64(8);
        let mut hits = 0;
        let total = 40;
        for _ in 0..total {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = nijenhuis_residual(&field, &x).unwrap();
            // Symbolic oracle: |N(∂₁, ∂₂)| = |sin x₁|, a lower bound for
            // the frame maximum.
            let sin = x[0].sin().abs();
            assert!(
                r >= sin - 1e-4,
                "residual {r} below symbolic bound {sin} at {x:?}"
            );
            if r > 1e-2 {
                hits += 1;
            }
        }
        assert!(hits * 10 >= total * 9, "only {hits}/{total} above 1e-2");
    }

    #[test]
    fn d_l_of_constant_is_zero() {
        let chart = ModelChart::new(1, 1).unwrap();
        let field =
            StructureField::constant(&chart.structure(TOL), chart.box_().to_vec(), FD).unwrap();
        let f: ComplexField = Arc::new(|_| Complex64::new(2.5, -1.0));
        let (_, norm) = d_l_function(&f, &field, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(norm < 1e-10);
    }

    #[test]
    fn d_l_vanishes_exactly_for_holomorphic_functions() {
        // Model (0,1), f(z) = z² at z = 1.
        let chart = ModelChart::new(0, 1).unwrap();
        let field =
            StructureField::constant(&chart.structure(TOL), chart.box_().to_vec(), FD).unwrap();
        let f: ComplexField = Arc::new(|x| {
            let z = Complex64::new(x[0], x[1]);
            z * z
        });
        let (_, norm) = d_l_function(&f, &field, &[1.0, 0.0]).unwrap();
        assert!(norm < 1e-9, "norm {norm}");
    }

    #[test]
    fn d_l_detects_leaf_dependence() {
        // Model (1,1), f = p₁: the defect is order one.
        let chart = ModelChart::new(1, 1).unwrap();
        let field =
            StructureField::constant(&chart.structure(TOL), chart.box_().to_vec(), FD).unwrap();
        let f: ComplexField = Arc::new(|x| Complex64::new(x[0], 0.0));
        let (_, norm) = d_l_function(&f, &field, &[0.3, 0.1, 0.2, -0.1]).unwrap();
        assert!(norm > 0.5, "norm {norm}");
    }

    fn chart_samples(chart: &ModelChart, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                (0..chart.dim())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn gh_check_classifies_the_spec_examples() {
        let chart = ModelChart::new(1, 1).unwrap();
        let samples = chart_samples(&chart, 12, 5);
        let z = |x: &[f64]| Complex64::new(x[2], x[3]);

        let cubic: ComplexField = Arc::new(move |x| {
            let zz = z(x);
            zz * zz * zz - zz * 2.0
        });
        let r = gh_check_model(&cubic, &chart, &samples, FD, 1e-7).unwrap();
        assert!(r.is_gh, "residuals {} {}", r.max_dzbar, r.max_dp);
        assert!(r.agrees_with_dl);

        let conj: ComplexField = Arc::new(move |x| z(x).conj());
        let r = gh_check_model(&conj, &chart, &samples, FD, 1e-7).unwrap();
        assert!(!r.is_gh);
        assert!((r.max_dzbar - 1.0).abs() < 1e-6);
        assert!(r.agrees_with_dl);

        let modsq: ComplexField = Arc::new(move |x| Complex64::new(z(x).norm_sqr(), 0.0));
        let r = gh_check_model(&modsq, &chart, &samples, FD, 1e-7).unwrap();
        assert!(!r.is_gh);
        // |∂f/∂z̄| = |z| at each sample.
        for row in &r.samples {
            let zn = Complex64::new(row.point[2], row.point[3]).norm();
            assert!(
                (row.dzbar - zn).abs() < 1e-5,
                "dzbar {} vs |z| {}",
                row.dzbar,
                zn
            );
        }
    }

    #[test]
    fn gh_products_and_polynomial_compositions_stay_gh() {
        let chart = ModelChart::new(1, 1).unwrap();
        let samples = chart_samples(&chart, 8, 9);
        let z = |x: &[f64]| Complex64::new(x[2], x[3]);
        let f: ComplexField = Arc::new(move |x| z(x) * z(x) - z(x) * 2.0);
        let g: ComplexField = Arc::new(move |x| z(x) + Complex64::new(0.0, 1.5));
        let product: ComplexField = {
            let (f, g) = (f.clone(), g.clone());
            Arc::new(move |x: &[f64]| f(x) * g(x))
        };
        let composed: ComplexField = {
            let f = f.clone();
            // h(w) = w³ - 2w + 1.
            Arc::new(move |x: &[f64]| {
                let w = f(x);
                w * w * w - w * 2.0 + 1.0
            })
        };
        for h in [product, composed] {
            let r = gh_check_model(&h, &chart, &samples, FD, 1e-6).unwrap();
            assert!(r.is_gh, "residuals {} {}", r.max_dzbar, r.max_dp);
        }
    }

    #[test]
    fn poisson_check_accepts_projection_and_rejects_scaling() {
        let chart = ModelChart::new(1, 1).unwrap();
        let samples = chart_samples(&chart, 10, 11);
        let pr1: PlaneField = Arc::new(|x| [x[0], x[1]]);
        let r = poisson_map_check(&pr1, &chart, &samples, FD, 1e-7).unwrap();
        assert!(r.is_poisson, "residual {}", r.max_residual);

        let scaled: PlaneField = Arc::new(|x| [x[0], 2.0 * x[1]]);
        let r = poisson_map_check(&scaled, &chart, &samples, FD, 1e-7).unwrap();
        assert!(!r.is_poisson);
        assert!(
            (r.max_residual - 1.0).abs() < 1e-6,
            "residual {}",
            r.max_residual
        );

        let constant: PlaneField = Arc::new(|_| [1.0, 2.0]);
        let r = poisson_map_check(&constant, &chart, &samples, FD, 1e-7).unwrap();
        assert!((r.max_residual - 1.0).abs() < 1e-9);
    }

    #[test]
    fn levi_classification_matches_hand_results() {
        let chart = ModelChart::new(1, 1).unwrap();
        let samples = chart_samples(&chart, 10, 13);
        let settings = LPshSettings::default();
        let z = |x: &[f64]| Complex64::new(x[2], x[3]);

        // Σ|z|²: leafwise 0, Levi identity, strictly psh.
        let norm2: ComplexField = Arc::new(move |x| Complex64::new(z(x).norm_sqr(), 0.0));
        let r = l_psh_check(&norm2, &chart, &samples, FD, settings).unwrap();
        assert!(r.is_psh && r.is_strictly_psh);
        assert!((r.min_eigenvalue - 1.0).abs() < 1e-5);
        assert!(r.max_hermitian_defect < 1e-5);

        // Re(z²): Levi zero, psh but not strict.
        let re_zsq: ComplexField = Arc::new(move |x| {
            let w = z(x) * z(x);
            Complex64::new(w.re, 0.0)
        });
        let r = l_psh_check(&re_zsq, &chart, &samples, FD, settings).unwrap();
        assert!(
            r.is_psh && !r.is_strictly_psh,
            "min eig {}",
            r.min_eigenvalue
        );

        // -|z|²: negative Levi.
        let neg: ComplexField = Arc::new(move |x| Complex64::new(-z(x).norm_sqr(), 0.0));
        let r = l_psh_check(&neg, &chart, &samples, FD, settings).unwrap();
        assert!(!r.is_psh);
        assert!((r.min_eigenvalue + 1.0).abs() < 1e-5);

        // p₁²: fails leaf constancy.
        let psq: ComplexField = Arc::new(|x| Complex64::new(x[0] * x[0], 0.0));
        let r = l_psh_check(&psq, &chart, &samples, FD, settings).unwrap();
        assert!(!r.is_psh);
        assert!(r.max_leaf_residual > 0.1);

        // |z|² + p₁: fails leaf constancy too.
        let mixed: ComplexField = Arc::new(move |x| Complex64::new(z(x).norm_sqr() + x[0], 0.0));
        let r = l_psh_check(&mixed, &chart, &samples, FD, settings).unwrap();
        assert!(!r.is_psh);
        assert!((r.max_leaf_residual - 1.0).abs() < 1e-6);
    }

    #[test]
    fn l_psh_rejects_non_real_functions() {
        let chart = ModelChart::new(0, 1).unwrap();
        let f: ComplexField = Arc::new(|x| Complex64::new(x[0], x[1]));
        let err = l_psh_check(&f, &chart, &[vec![0.5, 0.5]], FD, LPshSettings::default());
        assert!(matches!(err, Err(GcError::Input(_))));
    }

    #[test]
    fn invalid_field_structure_is_reported() {
        let j_at: MatrixField = Arc::new(|_| DMatrix::identity(4, 4));
        let field = StructureField::new(2, vec![(-1.0, 1.0); 2], j_at, FD, TOL).unwrap();
        assert!(matches!(
            field.j(&[0.0, 0.0]),
            Err(GcError::InvalidStructure { .. })
        ));
    }
}
