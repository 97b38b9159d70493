//! Sampled probes of the Stein-type conditions on product models: hulls
//! relative to a finite function family, separability, regularity of
//! map tuples, randomized tuple reduction, exhaustion-function assembly
//! and polyhedra.
//!
//! Every set-valued claim here is a statement about finite point sets on a
//! fixed grid. Hulls are outer approximations relative to the *supplied*
//! family: more functions can only shrink them.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GcError, Result};
use crate::field::{
    complex_gradient, gh_check_model, l_psh_check, poisson_map_check, sup_norm, ComplexField,
    LPshReport, LPshSettings, ModelChart, PlaneField,
};
use crate::subspace::{complexify, ComplexMatrix};

/// A named complex scalar field (a candidate GH function).
#[derive(Clone)]
pub struct ScalarField {
    pub name: String,
    pub f: ComplexField,
}

impl ScalarField {
    pub fn new(name: impl Into<String>, f: ComplexField) -> ScalarField {
        ScalarField {
            name: name.into(),
            f,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        (self.f)(x)
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ScalarField({})", self.name)
    }
}

/// A named `R²`-valued field (a candidate GH map to the symplectic plane).
#[derive(Clone)]
pub struct PlaneMap {
    pub name: String,
    pub f: PlaneField,
}

impl PlaneMap {
    pub fn new(name: impl Into<String>, f: PlaneField) -> PlaneMap {
        PlaneMap {
            name: name.into(),
            f,
        }
    }

    pub fn eval(&self, x: &[f64]) -> [f64; 2] {
        (self.f)(x)
    }
}

impl std::fmt::Debug for PlaneMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PlaneMap({})", self.name)
    }
}

/// Candidate members of `O(X)` plus candidate Poisson maps, each tagged by
/// whether it passed its field-calculus check at registration samples.
#[derive(Debug, Default)]
pub struct FunctionFamily {
    gh_functions: Vec<(ScalarField, bool)>,
    poisson_maps: Vec<(PlaneMap, bool)>,
}

impl FunctionFamily {
    pub fn new() -> FunctionFamily {
        FunctionFamily::default()
    }

    /// Register a GH candidate, verifying it on the given samples.
    pub fn register_gh(
        &mut self,
        field: ScalarField,
        chart: &ModelChart,
        samples: &[Vec<f64>],
        fd_step: f64,
        tol: f64,
    ) -> Result<bool> {
        let verified = gh_check_model(&field.f, chart, samples, fd_step, tol)?.is_gh;
        self.gh_functions.push((field, verified));
        Ok(verified)
    }

    /// Register a GH candidate without running the check.
    pub fn push_gh_unverified(&mut self, field: ScalarField) {
        self.gh_functions.push((field, false));
    }

    pub fn register_poisson(
        &mut self,
        map: PlaneMap,
        chart: &ModelChart,
        samples: &[Vec<f64>],
        fd_step: f64,
        tol: f64,
    ) -> Result<bool> {
        let verified = poisson_map_check(&map.f, chart, samples, fd_step, tol)?.is_poisson;
        self.poisson_maps.push((map, verified));
        Ok(verified)
    }

    pub fn gh_functions(&self) -> impl Iterator<Item = &ScalarField> {
        self.gh_functions.iter().map(|(f, _)| f)
    }

    pub fn poisson_maps(&self) -> impl Iterator<Item = &PlaneMap> {
        self.poisson_maps.iter().map(|(f, _)| f)
    }

    pub fn gh_verified(&self) -> impl Iterator<Item = (&ScalarField, bool)> {
        self.gh_functions.iter().map(|(f, v)| (f, *v))
    }

    pub fn gh_len(&self) -> usize {
        self.gh_functions.len()
    }
}

/// A finite stand-in for a compact set: labeled sample points.
#[derive(Debug, Clone)]
pub struct SampledCompact {
    pub label: String,
    pub points: Vec<Vec<f64>>,
}

impl SampledCompact {
    pub fn new(label: impl Into<String>, points: Vec<Vec<f64>>) -> SampledCompact {
        SampledCompact {
            label: label.into(),
            points,
        }
    }

    /// Exact point-set equality by bit patterns.
    pub fn same_points(&self, other: &SampledCompact) -> bool {
        let key = |pts: &[Vec<f64>]| {
            let mut v: Vec<Vec<u64>> = pts
                .iter()
                .map(|p| p.iter().map(|x| x.to_bits()).collect())
                .collect();
            v.sort();
            v
        };
        key(&self.points) == key(&other.points)
    }
}

/// A finite rectangular lattice, iterated in lexicographic order.
#[derive(Debug, Clone)]
pub struct Grid {
    pub box_: Vec<(f64, f64)>,
    pub step: f64,
}

impl Grid {
    pub fn new(box_: Vec<(f64, f64)>, step: f64) -> Result<Grid> {
        if !(step > 0.0) {
            return Err(GcError::Input("Grid: step must be > 0".into()));
        }
        if box_.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(GcError::Input("Grid: empty box axis".into()));
        }
        Ok(Grid { box_, step })
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let counts: Vec<usize> = self
            .box_
            .iter()
            .map(|(lo, hi)| ((hi - lo) / self.step + 1e-9).floor() as usize + 1)
            .collect();
        let total: usize = counts.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.box_.len()];
        for _ in 0..total {
            out.push(
                idx.iter()
                    .zip(&self.box_)
                    .map(|(&i, (lo, _))| lo + i as f64 * self.step)
                    .collect(),
            );
            for axis in (0..idx.len()).rev() {
                idx[axis] += 1;
                if idx[axis] < counts[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
        out
    }
}

/// Hull of `K` relative to the registered GH functions, on a grid: keeps
/// the grid points `p` with `|f(p)| ≤ max_K |f| + tol` for every supplied
/// `f`. An outer approximation of the true hull — supplying more functions
/// never enlarges it.
pub fn o_hull(
    k: &SampledCompact,
    family: &FunctionFamily,
    grid: &Grid,
    tol: f64,
) -> Result<SampledCompact> {
    if family.gh_len() == 0 {
        return Err(GcError::Input(
            "o_hull: empty function family (the hull would be the whole grid)".into(),
        ));
    }
    if k.points.is_empty() {
        return Err(GcError::Input("o_hull: K has no sample points".into()));
    }
    let bounds: Vec<f64> = family
        .gh_functions()
        .map(|f| {
            k.points
                .iter()
                .map(|p| f.eval(p).norm())
                .fold(0.0f64, f64::max)
        })
        .collect();
    let points = grid
        .points()
        .into_iter()
        .filter(|p| {
            family
                .gh_functions()
                .zip(&bounds)
                .all(|(f, &b)| f.eval(p).norm() <= b + tol)
        })
        .collect();
    Ok(SampledCompact::new(format!("hull({})", k.label), points))
}

/// `o_hull(o_hull(K)) = o_hull(K)` as exact point sets on the same grid.
pub fn hull_idempotence_check(
    k: &SampledCompact,
    family: &FunctionFamily,
    grid: &Grid,
    tol: f64,
) -> Result<bool> {
    let once = o_hull(k, family, grid, tol)?;
    let twice = o_hull(&once, family, grid, tol)?;
    Ok(once.same_points(&twice))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparabilityMode {
    GhFunctionsOnly,
    IncludePoissonMaps,
}

#[derive(Debug, Clone)]
pub struct PairSeparation {
    pub separated: bool,
    pub witness: Option<String>,
    pub gap: f64,
}

/// For each pair, search the family for a member taking visibly different
/// values at the two points.
pub fn separability_probe(
    pairs: &[(Vec<f64>, Vec<f64>)],
    family: &FunctionFamily,
    mode: SeparabilityMode,
    tol: f64,
) -> Result<Vec<PairSeparation>> {
    let mut out = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        if x == y {
            return Err(GcError::Input(
                "separability_probe: pair with identical points".into(),
            ));
        }
        let mut best_gap = 0.0f64;
        let mut witness = None;
        for f in family.gh_functions() {
            let gap = (f.eval(x) - f.eval(y)).norm();
            if gap > best_gap {
                best_gap = gap;
                if gap > tol {
                    witness = Some(f.name.clone());
                }
            }
        }
        if mode == SeparabilityMode::IncludePoissonMaps && witness.is_none() {
            for f in family.poisson_maps() {
                let [ux, vx] = f.eval(x);
                let [uy, vy] = f.eval(y);
                let gap = ((ux - uy).powi(2) + (vx - vy).powi(2)).sqrt();
                if gap > best_gap {
                    best_gap = gap;
                    if gap > tol {
                        witness = Some(f.name.clone());
                    }
                }
            }
        }
        out.push(PairSeparation {
            separated: witness.is_some(),
            witness,
            gap: best_gap,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub real_rank: usize,
    pub real_required: usize,
    /// Smallest kept / largest dropped singular value of the real Jacobian.
    pub real_gap: (f64, f64),
    pub complex_rank: usize,
    pub complex_required: usize,
    pub complex_gap: (f64, f64),
    pub regular: bool,
}

fn rank_with_gap(m: &ComplexMatrix, tol: f64) -> (usize, (f64, f64)) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (0, (0.0, 0.0));
    }
    let mut svals: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    svals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let smax = svals[0];
    let threshold = tol * smax.max(1.0);
    let rank = svals.iter().take_while(|&&s| s > threshold).count();
    let kept = if rank > 0 { svals[rank - 1] } else { 0.0 };
    let dropped = if rank < svals.len() { svals[rank] } else { 0.0 };
    (rank, (kept, dropped))
}

/// Differentials of candidate tuples at `x`: the full real Jacobian of all
/// component functions must have rank `2n = dim`, and the complex Jacobian
/// `[∂g_i/∂z_j]` must have rank `k = N` (the chart type).
pub fn regularity_probe(
    x: &[f64],
    poisson_maps: &[PlaneMap],
    gh_functions: &[ScalarField],
    chart: &ModelChart,
    fd_step: f64,
    tol: f64,
) -> Result<RegularityReport> {
    if poisson_maps.len() != chart.m {
        return Err(GcError::Input(format!(
            "regularity_probe: expected {} Poisson maps (n - k), got {}",
            chart.m,
            poisson_maps.len()
        )));
    }
    if gh_functions.len() < chart.n {
        return Err(GcError::Input(format!(
            "regularity_probe: expected at least {} GH functions (k), got {}",
            chart.n,
            gh_functions.len()
        )));
    }
    let d = chart.dim();
    let h = fd_step * (1.0 + sup_norm(x));
    for (axis, (&xi, &(lo, hi))) in x.iter().zip(chart.box_()).enumerate() {
        if xi - 2.0 * h < lo || xi + 2.0 * h > hi {
            return Err(GcError::BoundaryMargin {
                axis,
                margin: 2.0 * h,
            });
        }
    }

    // Real Jacobian: two rows per Poisson map, two (Re, Im) per function.
    let rows = 2 * poisson_maps.len() + 2 * gh_functions.len();
    let mut real_jac = DMatrix::<f64>::zeros(rows, d);
    let mut complex_jac = ComplexMatrix::zeros(gh_functions.len(), chart.n);
    let mut row = 0;
    for pm in poisson_maps {
        for axis in 0..d {
            let mut xp = x.to_vec();
            xp[axis] += h;
            let mut xm = x.to_vec();
            xm[axis] -= h;
            let [up, vp] = pm.eval(&xp);
            let [um, vm] = pm.eval(&xm);
            real_jac[(row, axis)] = (up - um) / (2.0 * h);
            real_jac[(row + 1, axis)] = (vp - vm) / (2.0 * h);
        }
        row += 2;
    }
    for (i, g) in gh_functions.iter().enumerate() {
        let grad = complex_gradient(&g.f, x, h);
        for axis in 0..d {
            real_jac[(row, axis)] = grad[axis].re;
            real_jac[(row + 1, axis)] = grad[axis].im;
        }
        row += 2;
        for j in 0..chart.n {
            // ∂/∂z = (∂/∂x - i ∂/∂y) / 2.
            complex_jac[(i, j)] =
                (grad[chart.z_re(j)] - Complex64::new(0.0, 1.0) * grad[chart.z_im(j)]) * 0.5;
        }
    }
    let (real_rank, real_gap) = rank_with_gap(&complexify(&real_jac), tol);
    let (complex_rank, complex_gap) = rank_with_gap(&complex_jac, tol);
    Ok(RegularityReport {
        real_rank,
        real_required: d,
        real_gap,
        complex_rank,
        complex_required: chart.n,
        complex_gap,
        regular: real_rank == d && complex_rank == chart.n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceMode {
    Regular,
    OneToOne,
}

#[derive(Debug)]
pub enum ReduceOutcome {
    Success {
        functions: Vec<ScalarField>,
        coefficients: Vec<Complex64>,
        trials_used: usize,
    },
    NoWitness {
        trials: usize,
    },
}

fn subtract_multiple(g: &ScalarField, last: &ScalarField, c: Complex64) -> ScalarField {
    let gf = g.f.clone();
    let lf = last.f.clone();
    ScalarField::new(
        format!("{} - ({:.4}{:+.4}i)*{}", g.name, c.re, c.im, last.name),
        Arc::new(move |x: &[f64]| gf(x) - c * lf(x)),
    )
}

/// Seeded generic reduction: drop the last of `N+1` GH functions by
/// replacing `g_j` with `g_j - c_j g_{N+1}` for a random small `c`,
/// accepting the first candidate that is regular (and injective, in
/// one-to-one mode) on every sample of `K`. The zero vector is tried
/// first. Exhausting all trials is a no-witness verdict, not an error.
#[allow(clippy::too_many_arguments)]
pub fn reduce_regular_tuple(
    poisson_maps: &[PlaneMap],
    gh_functions: &[ScalarField],
    k: &SampledCompact,
    chart: &ModelChart,
    mode: ReduceMode,
    seed: u64,
    trials: usize,
    radius: f64,
    fd_step: f64,
    tol: f64,
) -> Result<ReduceOutcome> {
    if gh_functions.len() < 2 {
        return Err(GcError::Input(
            "reduce_regular_tuple: need at least two GH functions".into(),
        ));
    }
    let n = gh_functions.len() - 1;
    let needed = match mode {
        ReduceMode::Regular => 2 * chart.n,
        ReduceMode::OneToOne => 2 * chart.n + 1,
    };
    if n < needed {
        return Err(GcError::Input(format!(
            "reduce_regular_tuple: N = {n} below the threshold {needed} for {mode:?}"
        )));
    }
    if k.points.is_empty() {
        return Err(GcError::Input("reduce_regular_tuple: empty K".into()));
    }
    let last = &gh_functions[n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coord_bound = radius / (2.0 * n as f64).sqrt();
    for trial in 0..trials {
        let c: Vec<Complex64> = if trial == 0 {
            vec![Complex64::new(0.0, 0.0); n]
        } else {
            (0..n)
                .map(|_| {
                    Complex64::new(
                        rng.random_range(-coord_bound..coord_bound),
                        rng.random_range(-coord_bound..coord_bound),
                    )
                })
                .collect()
        };
        let reduced: Vec<ScalarField> = gh_functions[..n]
            .iter()
            .zip(&c)
            .map(|(g, &cj)| subtract_multiple(g, last, cj))
            .collect();
        let mut ok = true;
        for x in &k.points {
            let report = regularity_probe(x, poisson_maps, &reduced, chart, fd_step, tol)?;
            if !report.regular {
                ok = false;
                break;
            }
        }
        if ok && mode == ReduceMode::OneToOne {
            'pairs: for (i, x) in k.points.iter().enumerate() {
                for y in &k.points[i + 1..] {
                    let mut gap = 0.0f64;
                    for pm in poisson_maps {
                        let [ux, vx] = pm.eval(x);
                        let [uy, vy] = pm.eval(y);
                        gap = gap.max((ux - uy).abs()).max((vx - vy).abs());
                    }
                    for g in &reduced {
                        gap = gap.max((g.eval(x) - g.eval(y)).norm());
                    }
                    if gap <= tol {
                        ok = false;
                        break 'pairs;
                    }
                }
            }
        }
        if ok {
            return Ok(ReduceOutcome::Success {
                functions: reduced,
                coefficients: c,
                trials_used: trial + 1,
            });
        }
    }
    Ok(ReduceOutcome::NoWitness { trials })
}

/// One level of the exhaustion construction: functions small on the inner
/// compact and large on the outer sample set.
#[derive(Debug, Clone)]
pub struct ExhaustionLevel {
    pub functions: Vec<ScalarField>,
    /// Samples of `K_j`.
    pub inner: SampledCompact,
    /// Samples of `K_{j+2} \ U_j` (may be empty for the top levels).
    pub outer: SampledCompact,
}

#[derive(Debug, Clone, Copy)]
pub struct SublevelCheck {
    /// Cut value `c` of `{f < c}`.
    pub c: f64,
    /// Required bound on `|p|_∞` for grid points below the cut.
    pub max_sup_norm: f64,
}

#[derive(Debug, Clone)]
pub struct ExhaustionSettings {
    pub power_limit: u32,
    pub fd_step: f64,
    pub lpsh: LPshSettings,
    pub sublevel_checks: Vec<SublevelCheck>,
}

impl Default for ExhaustionSettings {
    fn default() -> Self {
        ExhaustionSettings {
            power_limit: 64,
            fd_step: 1e-5,
            lpsh: LPshSettings::default(),
            sublevel_checks: Vec::new(),
        }
    }
}

#[derive(Debug)]
pub struct ExhaustionReport {
    pub success: bool,
    pub failing_level: Option<usize>,
    pub reason: Option<String>,
    /// Chosen exponents `m_jl` per level.
    pub powers: Vec<Vec<u32>>,
    /// The assembled field `f = Σ |g_jl|^{2 m_jl} - 1` when powers exist.
    pub field: Option<ScalarField>,
    pub lpsh: Option<LPshReport>,
    /// Range of `f` on the level-1 inner samples (must stay below 0).
    pub max_on_k1: Option<f64>,
    pub sublevel_ok: Option<bool>,
}

fn no_witness(level: usize, reason: String, powers: Vec<Vec<u32>>) -> ExhaustionReport {
    ExhaustionReport {
        success: false,
        failing_level: Some(level),
        reason: Some(reason),
        powers,
        field: None,
        lpsh: None,
        max_on_k1: None,
        sublevel_ok: None,
    }
}

/// Find integer powers making each level's sum `Σ_l |g_jl|^{2 m_jl}` fall
/// below `2^{-j}` on the inner samples and exceed `j` on the outer
/// samples, assemble `f = Σ |g_jl|^{2 m_jl} - 1`, and certify it: strictly
/// plurisubharmonic on all samples, negative on the first inner compact,
/// `> j - 1` on the outer sets, with requested sublevel sets bounded on
/// the grid.
pub fn exhaustion_build(
    levels: &[ExhaustionLevel],
    chart: &ModelChart,
    grid: Option<&Grid>,
    settings: &ExhaustionSettings,
) -> Result<ExhaustionReport> {
    if levels.is_empty() {
        return Err(GcError::Input("exhaustion_build: no levels".into()));
    }
    let mut powers: Vec<Vec<u32>> = Vec::with_capacity(levels.len());
    for (idx, level) in levels.iter().enumerate() {
        let j = idx + 1;
        let budget = 0.5f64.powi(j as i32);
        let count = level.functions.len();
        if count == 0 {
            return Ok(no_witness(j, "level has no functions".into(), powers));
        }
        if level.inner.points.is_empty() {
            return Err(GcError::Input(format!(
                "exhaustion_build: level {j} has an empty inner sample set"
            )));
        }
        let per_function = budget / count as f64;
        let mut level_powers = Vec::with_capacity(count);
        for g in &level.functions {
            let a = level
                .inner
                .points
                .iter()
                .map(|p| g.eval(p).norm())
                .fold(0.0f64, f64::max);
            if a >= 1.0 {
                return Ok(no_witness(
                    j,
                    format!("|{}| reaches {a:.3} on K_{j}; the inner bound needs |g| < 1", g.name),
                    powers,
                ));
            }
            let m = if a == 0.0 {
                1
            } else {
                let m = (per_function.ln() / (2.0 * a.ln())).ceil().max(1.0) as u32;
                if m > settings.power_limit {
                    return Ok(no_witness(
                        j,
                        format!(
                            "inner bound for |{}| needs power {m} > limit {} (max on K_{j} is {a:.3})",
                            g.name, settings.power_limit
                        ),
                        powers,
                    ));
                }
                m
            };
            level_powers.push(m);
        }
        // Raise powers until the level sum clears j on every outer sample.
        let level_sum = |powers: &[u32], p: &[f64]| -> f64 {
            level
                .functions
                .iter()
                .zip(powers)
                .map(|(g, &m)| g.eval(p).norm().powi(2 * m as i32))
                .sum()
        };
        let mut guard = 0usize;
        'outer: loop {
            guard += 1;
            if guard > 10_000 {
                return Ok(no_witness(j, "power search did not stabilize".into(), powers));
            }
            for p in &level.outer.points {
                if level_sum(&level_powers, p) > j as f64 {
                    continue;
                }
                let (best, best_norm) = level
                    .functions
                    .iter()
                    .enumerate()
                    .map(|(i, g)| (i, g.eval(p).norm()))
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .unwrap();
                if best_norm <= 1.0 + 1e-12 {
                    return Ok(no_witness(
                        j,
                        format!(
                            "outer bound unattainable at {p:?}: max |g| = {best_norm:.3} ≤ 1"
                        ),
                        powers,
                    ));
                }
                level_powers[best] += 1;
                if level_powers[best] > settings.power_limit {
                    return Ok(no_witness(
                        j,
                        format!("outer bound needs power above the limit {}", settings.power_limit),
                        powers,
                    ));
                }
                continue 'outer;
            }
            break;
        }
        powers.push(level_powers);
    }

    // Assemble f.
    let captured: Vec<Vec<(ComplexField, u32)>> = levels
        .iter()
        .zip(&powers)
        .map(|(level, ps)| {
            level
                .functions
                .iter()
                .zip(ps)
                .map(|(g, &m)| (g.f.clone(), m))
                .collect()
        })
        .collect();
    let f_field: ComplexField = Arc::new(move |x: &[f64]| {
        let mut sum = 0.0;
        for level in &captured {
            for (g, m) in level {
                sum += g(x).norm().powi(2 * *m as i32);
            }
        }
        Complex64::new(sum - 1.0, 0.0)
    });
    let field = ScalarField::new("exhaustion", f_field);

    // Certification.
    let max_on_k1 = levels[0]
        .inner
        .points
        .iter()
        .map(|p| field.eval(p).re)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut reason = None;
    if max_on_k1 >= 0.0 {
        reason = Some(format!("f reaches {max_on_k1:.3} on K_1"));
    }
    for (idx, level) in levels.iter().enumerate() {
        let j = (idx + 1) as f64;
        for p in &level.outer.points {
            let v = field.eval(p).re;
            if v <= j - 1.0 {
                reason = Some(format!(
                    "f = {v:.3} ≤ j - 1 = {} on an outer sample of level {}",
                    j - 1.0,
                    idx + 1
                ));
            }
        }
    }

    let mut all_samples: Vec<Vec<f64>> = Vec::new();
    for level in levels {
        all_samples.extend(level.inner.points.iter().cloned());
        all_samples.extend(level.outer.points.iter().cloned());
    }
    let lpsh = l_psh_check(&field.f, chart, &all_samples, settings.fd_step, settings.lpsh)?;
    if reason.is_none() && !lpsh.is_strictly_psh {
        reason = Some(format!(
            "f is not strictly plurisubharmonic on the samples (min eigenvalue {:.3e}, leaf residual {:.3e})",
            lpsh.min_eigenvalue, lpsh.max_leaf_residual
        ));
    }

    let sublevel_ok = grid.map(|grid| {
        settings.sublevel_checks.iter().all(|check| {
            grid.points()
                .iter()
                .filter(|p| field.eval(p).re < check.c)
                .all(|p| sup_norm(p) <= check.max_sup_norm)
        })
    });
    if reason.is_none() && sublevel_ok == Some(false) {
        reason = Some("a sublevel set escapes its required bound on the grid".into());
    }

    Ok(ExhaustionReport {
        success: reason.is_none(),
        failing_level: None,
        reason,
        powers,
        field: Some(field),
        lpsh: Some(lpsh),
        max_on_k1: Some(max_on_k1),
        sublevel_ok,
    })
}

/// `P = {x | |g_j(x)| < 1 for all j}` given by finitely many functions.
#[derive(Debug, Clone)]
pub struct PolyhedronSpec {
    pub functions: Vec<ScalarField>,
}

impl PolyhedronSpec {
    pub fn order(&self) -> usize {
        self.functions.len()
    }
}

/// Membership with a safety band: inside iff `|g_j(x)| < 1 - tol` for all.
pub fn polyhedron_membership(spec: &PolyhedronSpec, points: &[Vec<f64>], tol: f64) -> Vec<bool> {
    points
        .iter()
        .map(|p| spec.functions.iter().all(|g| g.eval(p).norm() < 1.0 - tol))
        .collect()
}

#[derive(Debug)]
pub enum PolyhedronOutcome {
    Found(PolyhedronSpec),
    NoWitness {
        /// First shell point no candidate could exclude.
        uncovered: Vec<f64>,
    },
}

/// Greedy polyhedron search: walk the sampled boundary shell and, for each
/// yet-uncovered point, pick a candidate `g` rescaled by `s` slightly
/// above `max_K |g|` so that `|g/s| < 1` on `K` while `|g/s| > 1` at the
/// point. Succeeds when the shell is covered.
pub fn polyhedron_search(
    k: &SampledCompact,
    shell: &SampledCompact,
    candidates: &[ScalarField],
    margin: f64,
) -> Result<PolyhedronOutcome> {
    if k.points.is_empty() {
        return Err(GcError::Input("polyhedron_search: empty K".into()));
    }
    if shell.points.is_empty() {
        return Err(GcError::Input("polyhedron_search: empty shell".into()));
    }
    let mut selected: Vec<ScalarField> = Vec::new();
    for p in &shell.points {
        if selected.iter().any(|g| g.eval(p).norm() > 1.0) {
            continue;
        }
        let mut chosen = None;
        for g in candidates {
            let max_k = k
                .points
                .iter()
                .map(|q| g.eval(q).norm())
                .fold(0.0f64, f64::max);
            let s = max_k.max(f64::MIN_POSITIVE) * (1.0 + margin);
            if g.eval(p).norm() > s * (1.0 + margin) {
                let gf = g.f.clone();
                let scale = Complex64::new(1.0 / s, 0.0);
                chosen = Some(ScalarField::new(
                    format!("{}/{s:.6}", g.name),
                    Arc::new(move |x: &[f64]| gf(x) * scale),
                ));
                break;
            }
        }
        match chosen {
            Some(g) => selected.push(g),
            None => {
                return Ok(PolyhedronOutcome::NoWitness {
                    uncovered: p.clone(),
                })
            }
        }
    }
    Ok(PolyhedronOutcome::Found(PolyhedronSpec {
        functions: selected,
    }))
}

/// Monomial `(z_1)^m` style fields on a chart: helper used by fixtures and
/// the CLI for hull and polyhedron families.
pub fn monomial_field(chart: &ModelChart, z_index: usize, power: u32, scale: f64) -> ScalarField {
    let re = chart.z_re(z_index);
    let im = chart.z_im(z_index);
    ScalarField::new(
        format!("{}*z{}^{}", scale, z_index + 1, power),
        Arc::new(move |x: &[f64]| {
            Complex64::new(x[re], x[im]).powu(power) * Complex64::new(scale, 0.0)
        }),
    )
}

/// Evenly spaced samples of the circle of the given radius in the first
/// complex coordinate plane of the chart (other coordinates fixed at 0).
pub fn circle_samples(chart: &ModelChart, radius: f64, count: usize) -> Vec<Vec<f64>> {
    let re = chart.z_re(0);
    let im = chart.z_im(0);
    (0..count)
        .map(|i| {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
            let mut p = vec![0.0; chart.dim()];
            p[re] = radius * theta.cos();
            p[im] = radius * theta.sin();
            p
        })
        .collect()
}
