//! Bulk–surface elliptic solution operators and the induced dual norms.
//!
//! For a right-hand side `r` that annihilates the constants of the
//! coupling, the solution operator returns the mean-free `s` with
//!
//! ```text
//! ⟨s, ζ⟩ = −⟨r, ζ⟩_M   for every discrete test pair ζ,
//! ```
//!
//! where `⟨·,·⟩` is the energy form of the coupling: `m_Ω∫∇u·∇θ + m_Γ∫∇_Γv·∇_Γσ`
//! plus, for the Robin coupling, `(m_Ω/L)∫_Γ(βv − u)(βσ − θ)`. The
//! Dirichlet-coupled operator works on pairs `(βρ, ρ|Γ)` and the decoupled
//! one is the pair of Neumann operators. In every case the returned field
//! is the representative with zero constraint mean, and the dual norm is
//! `‖r‖²_* = ⟨s, s⟩ = −⟨r, s⟩_M`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dense::SparseLu;
use crate::energy::{Coupling, ModelSpec};
use crate::mesh::FemMatrices;
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::vecops::{max_abs, weighted_dot, weighted_sum};
use crate::{Error, Result};

/// Tolerance on the mean condition of right-hand sides, relative to the
/// size of the data.
pub const MEAN_TOLERANCE: f64 = 1e-10;

/// A bulk nodal field paired with a surface nodal field.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledField {
    pub bulk: Vec<f64>,
    pub surf: Vec<f64>,
}

impl CoupledField {
    pub fn new(bulk: Vec<f64>, surf: Vec<f64>) -> Self {
        Self { bulk, surf }
    }

    pub fn zeros(n_bulk: usize, n_surf: usize) -> Self {
        Self::new(vec![0.0; n_bulk], vec![0.0; n_surf])
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.bulk.iter().map(|v| c * v).collect(), self.surf.iter().map(|v| c * v).collect())
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        Self::new(
            self.bulk.iter().zip(&other.bulk).map(|(a, b)| a + c * b).collect(),
            self.surf.iter().zip(&other.surf).map(|(a, b)| a + c * b).collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    /// `β Σ wᵢ bulkᵢ + Σ wⱼ surfⱼ`, the β-weighted total.
    pub fn beta_mean(&self, beta: f64, w_bulk: &[f64], w_surf: &[f64]) -> f64 {
        beta * weighted_sum(w_bulk, &self.bulk) + weighted_sum(w_surf, &self.surf)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.bulk).max(max_abs(&self.surf))
    }

    fn stacked(&self) -> Vec<f64> {
        let mut v = self.bulk.clone();
        v.extend_from_slice(&self.surf);
        v
    }

    fn split(mut v: Vec<f64>, n_bulk: usize) -> Self {
        let surf = v.split_off(n_bulk);
        Self::new(v, surf)
    }
}

/// Which mass matrix realizes the L² pairings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassKind {
    /// Diagonal node weights; this is what the time stepper uses.
    #[default]
    Lumped,
    Consistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LinearSolverKind {
    /// Sparse LU of the bordered saddle-point matrix.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients followed by projection
    /// onto the mean-free subspace.
    ConjugateGradient { tol: f64, max_iter: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticParams {
    pub beta: f64,
    pub coupling: Coupling,
    pub m_bulk: f64,
    pub m_surf: f64,
    pub mass: MassKind,
    pub solver: LinearSolverKind,
}

impl EllipticParams {
    pub fn new(beta: f64, coupling: Coupling) -> Self {
        Self {
            beta,
            coupling,
            m_bulk: 1.0,
            m_surf: 1.0,
            mass: MassKind::Lumped,
            solver: LinearSolverKind::Direct,
        }
    }

    pub fn from_model(model: &ModelSpec, mass: MassKind) -> Self {
        Self {
            beta: model.beta,
            coupling: model.coupling,
            m_bulk: model.m_bulk,
            m_surf: model.m_surf,
            mass,
            solver: LinearSolverKind::Direct,
        }
    }

    fn validate(&self) -> Result<()> {
        let mut model = ModelSpec::new(self.beta, self.coupling);
        model.m_bulk = self.m_bulk;
        model.m_surf = self.m_surf;
        model.validate().map_err(|e| match e {
            Error::Assumption { message, .. } => Error::Contract(message),
            other => other,
        })
    }
}

/// `A s = rhs` subject to `cⱼ · s = 0`, for a symmetric positive
/// semidefinite `A` whose null space is spanned by `kernel`. Constraint and
/// kernel vectors are biorthogonal (`cᵢ · kⱼ = 0` for `i ≠ j`).
#[derive(Debug)]
struct ConstrainedSystem {
    matrix: CsrMatrix,
    constraints: Vec<Vec<f64>>,
    kernel: Vec<Vec<f64>>,
    lu: Option<SparseLu>,
    solver: LinearSolverKind,
}

impl ConstrainedSystem {
    fn new(matrix: CsrMatrix, constraints: Vec<Vec<f64>>, kernel: Vec<Vec<f64>>, solver: LinearSolverKind) -> Result<Self> {
        let n = matrix.nrows();
        let lu = match solver {
            LinearSolverKind::Direct => {
                let k = constraints.len();
                let mut b = TripletBuilder::new(n + k, n + k);
                b.push_block(0, 0, 1.0, &matrix);
                for (j, c) in constraints.iter().enumerate() {
                    for (i, &v) in c.iter().enumerate() {
                        if v != 0.0 {
                            b.push(i, n + j, v);
                            b.push(n + j, i, v);
                        }
                    }
                }
                Some(SparseLu::factor(&b.build())?)
            }
            LinearSolverKind::ConjugateGradient { .. } => None,
        };
        Ok(Self {
            matrix,
            constraints,
            kernel,
            lu,
            solver,
        })
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.nrows();
        let mut s = match (&self.lu, self.solver) {
            (Some(lu), _) => {
                let mut ext = rhs.to_vec();
                ext.resize(n + self.constraints.len(), 0.0);
                let mut x = lu.solve(&ext)?;
                x.truncate(n);
                x
            }
            (None, LinearSolverKind::ConjugateGradient { tol, max_iter }) => self.cg(rhs, tol, max_iter)?,
            (None, LinearSolverKind::Direct) => unreachable!("direct solver is always factored"),
        };
        self.project(&mut s);
        Ok(s)
    }

    /// Removes the kernel components so that every constraint holds.
    fn project(&self, s: &mut [f64]) {
        for (c, k) in self.constraints.iter().zip(&self.kernel) {
            let num: f64 = c.iter().zip(s.iter()).map(|(a, b)| a * b).sum();
            let den: f64 = c.iter().zip(k).map(|(a, b)| a * b).sum();
            let t = num / den;
            for (si, ki) in s.iter_mut().zip(k) {
                *si -= t * ki;
            }
        }
    }

    fn cg(&self, rhs: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n = rhs.len();
        let inv_diag: Vec<f64> = self.matrix.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
        let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let rhs_norm = libm::sqrt(dot(rhs, rhs));
        if rhs_norm == 0.0 {
            return Ok(x);
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        for _ in 0..max_iter {
            self.matrix.mul_vec_into(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if libm::sqrt(dot(&r, &r)) <= tol * rhs_norm {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::LinearSolver {
            message: format!("conjugate gradients did not reach {tol:e} in {max_iter} iterations"),
            pivot_ratio: f64::NAN,
        })
    }
}

fn mass_matrices(fem: &FemMatrices, kind: MassKind) -> (CsrMatrix, CsrMatrix) {
    match kind {
        MassKind::Lumped => (CsrMatrix::from_diagonal(&fem.lumped_bulk), CsrMatrix::from_diagonal(&fem.lumped_surf)),
        MassKind::Consistent => (fem.mass_bulk.clone(), fem.mass_surf.clone()),
    }
}

/// Adds `scale · Tᵀ M T` for a surface matrix `M`.
fn push_trace_sandwich(b: &mut TripletBuilder, trace: &[usize], scale: f64, m: &CsrMatrix) {
    for (i, j, v) in m.iter() {
        b.push(trace[i], trace[j], scale * v);
    }
}

/// The coupled solution operator: `S` (Robin), `S⁰` (Dirichlet) or
/// `N_Ω ⊕ N_Γ` (decoupled), chosen by [`EllipticParams::coupling`].
#[derive(Debug)]
pub struct CoupledSolver {
    params: EllipticParams,
    n_bulk: usize,
    n_surf: usize,
    trace: Vec<usize>,
    w_bulk: Vec<f64>,
    w_surf: Vec<f64>,
    mass_bulk: CsrMatrix,
    mass_surf: CsrMatrix,
    stiff_bulk: CsrMatrix,
    stiff_surf: CsrMatrix,
    system: ConstrainedSystem,
}

impl CoupledSolver {
    pub fn new(fem: &FemMatrices, params: EllipticParams) -> Result<Self> {
        params.validate()?;
        let nb = fem.stiffness_bulk.nrows();
        let ns = fem.stiffness_surf.nrows();
        let trace = fem.trace.indices().to_vec();
        let (mass_bulk, mass_surf) = mass_matrices(fem, params.mass);
        let (w_bulk, w_surf) = (fem.lumped_bulk.clone(), fem.lumped_surf.clone());
        let beta = params.beta;
        let system = match params.coupling {
            Coupling::Robin { l } => {
                let n = nb + ns;
                let mut b = TripletBuilder::new(n, n);
                b.push_block(0, 0, params.m_bulk, &fem.stiffness_bulk);
                b.push_block(nb, nb, params.m_surf, &fem.stiffness_surf);
                let k = params.m_bulk / l;
                for (i, j, v) in mass_surf.iter() {
                    b.push(trace[i], trace[j], k * v);
                    b.push(trace[i], nb + j, -beta * k * v);
                    b.push(nb + i, trace[j], -beta * k * v);
                    b.push(nb + i, nb + j, beta * beta * k * v);
                }
                let mut c = w_bulk.iter().map(|w| beta * w).collect::<Vec<_>>();
                c.extend_from_slice(&w_surf);
                let mut kernel = vec![beta; nb];
                kernel.extend(core::iter::repeat(1.0).take(ns));
                ConstrainedSystem::new(b.build(), vec![c], vec![kernel], params.solver)?
            }
            Coupling::Dirichlet => {
                let mut b = TripletBuilder::new(nb, nb);
                b.push_block(0, 0, beta * beta * params.m_bulk, &fem.stiffness_bulk);
                push_trace_sandwich(&mut b, &trace, params.m_surf, &fem.stiffness_surf);
                let mut c: Vec<f64> = w_bulk.iter().map(|w| beta * beta * w).collect();
                for (j, &t) in trace.iter().enumerate() {
                    c[t] += w_surf[j];
                }
                ConstrainedSystem::new(b.build(), vec![c], vec![vec![1.0; nb]], params.solver)?
            }
            Coupling::Decoupled => {
                let n = nb + ns;
                let mut b = TripletBuilder::new(n, n);
                b.push_block(0, 0, params.m_bulk, &fem.stiffness_bulk);
                b.push_block(nb, nb, params.m_surf, &fem.stiffness_surf);
                let mut cb = w_bulk.clone();
                cb.resize(n, 0.0);
                let mut cs = vec![0.0; nb];
                cs.extend_from_slice(&w_surf);
                let mut kb = vec![1.0; nb];
                kb.resize(n, 0.0);
                let mut ks = vec![0.0; nb];
                ks.resize(n, 1.0);
                ConstrainedSystem::new(b.build(), vec![cb, cs], vec![kb, ks], params.solver)?
            }
        };
        Ok(Self {
            params,
            n_bulk: nb,
            n_surf: ns,
            trace,
            w_bulk,
            w_surf,
            mass_bulk,
            mass_surf,
            stiff_bulk: fem.stiffness_bulk.clone(),
            stiff_surf: fem.stiffness_surf.clone(),
            system,
        })
    }

    pub fn params(&self) -> &EllipticParams {
        &self.params
    }

    /// The stacked operator matrix (bulk-only `ρ` unknowns for Dirichlet).
    pub fn operator(&self) -> &CsrMatrix {
        &self.system.matrix
    }

    /// Mean functionals that must vanish on right-hand sides and solutions.
    pub fn means(&self, r: &CoupledField) -> Vec<f64> {
        let sb = weighted_sum(&self.w_bulk, &r.bulk);
        let ss = weighted_sum(&self.w_surf, &r.surf);
        match self.params.coupling {
            Coupling::Decoupled => vec![sb, ss],
            _ => vec![self.params.beta * sb + ss],
        }
    }

    fn check_rhs(&self, r: &CoupledField) -> Result<()> {
        Error::check_len("bulk field", self.n_bulk, r.bulk.len())?;
        Error::check_len("surface field", self.n_surf, r.surf.len())?;
        let scale = self.params.beta.abs().max(1.0) * (weighted_sum(&self.w_bulk, &abs(&r.bulk)) + weighted_sum(&self.w_surf, &abs(&r.surf)));
        for m in self.means(r) {
            if m.abs() > MEAN_TOLERANCE * scale.max(1.0) {
                return Err(Error::Contract(format!(
                    "right-hand side violates the {} mean condition: {m:e}",
                    self.params.coupling.name()
                )));
            }
        }
        Ok(())
    }

    fn mass_apply(&self, r: &CoupledField) -> CoupledField {
        CoupledField::new(self.mass_bulk.mul_vec(&r.bulk), self.mass_surf.mul_vec(&r.surf))
    }

    /// `⟨u, v⟩_M` over both blocks.
    pub fn mass_pairing(&self, u: &CoupledField, v: &CoupledField) -> f64 {
        self.mass_bulk.bilinear(&u.bulk, &v.bulk) + self.mass_surf.bilinear(&u.surf, &v.surf)
    }

    /// The energy form of the coupling evaluated on two pairs.
    pub fn form(&self, u: &CoupledField, v: &CoupledField) -> f64 {
        let mut total =
            self.params.m_bulk * self.stiff_bulk.bilinear(&u.bulk, &v.bulk) + self.params.m_surf * self.stiff_surf.bilinear(&u.surf, &v.surf);
        if let Coupling::Robin { l } = self.params.coupling {
            let jump = |p: &CoupledField| -> Vec<f64> {
                p.surf.iter().zip(&self.trace).map(|(s, &t)| self.params.beta * s - p.bulk[t]).collect()
            };
            total += self.params.m_bulk / l * self.mass_surf.bilinear(&jump(u), &jump(v));
        }
        total
    }

    /// Solution of the weak problem, in the mean-free representative.
    pub fn solve(&self, r: &CoupledField) -> Result<CoupledField> {
        self.check_rhs(r)?;
        let mr = self.mass_apply(r);
        match self.params.coupling {
            Coupling::Dirichlet => {
                let beta = self.params.beta;
                let mut rhs: Vec<f64> = mr.bulk.iter().map(|v| -beta * v).collect();
                for (j, &t) in self.trace.iter().enumerate() {
                    rhs[t] -= mr.surf[j];
                }
                let rho = self.system.solve(&rhs)?;
                Ok(self.lift(&rho))
            }
            _ => {
                let rhs: Vec<f64> = mr.stacked().iter().map(|v| -v).collect();
                Ok(CoupledField::split(self.system.solve(&rhs)?, self.n_bulk))
            }
        }
    }

    /// `ρ ↦ (βρ, ρ|Γ)`.
    pub fn lift(&self, rho: &[f64]) -> CoupledField {
        CoupledField::new(
            rho.iter().map(|v| self.params.beta * v).collect(),
            self.trace.iter().map(|&t| rho[t]).collect(),
        )
    }

    /// `⟨r₁, r₂⟩_* = ⟨S r₁, S r₂⟩`.
    pub fn inner(&self, r1: &CoupledField, r2: &CoupledField) -> Result<f64> {
        let s1 = self.solve(r1)?;
        let s2 = self.solve(r2)?;
        Ok(self.form(&s1, &s2))
    }

    pub fn norm(&self, r: &CoupledField) -> Result<f64> {
        let s = self.solve(r)?;
        Ok(libm::sqrt(self.form(&s, &s).max(0.0)))
    }

    /// Absolute and relative weak-form defect `⟨s, ζ⟩ + ⟨r, ζ⟩_M` for a test pair.
    pub fn weak_residual(&self, r: &CoupledField, s: &CoupledField, test: &CoupledField) -> (f64, f64) {
        let a = self.form(s, test);
        let b = self.mass_pairing(r, test);
        let abs_err = (a + b).abs();
        let scale = a.abs().max(b.abs());
        (abs_err, if scale > 0.0 { abs_err / scale } else { 0.0 })
    }

    /// Recovers the chemical potentials from an increment: `S(Δ)/τ` plus
    /// the kernel component of `potentials`, the constant shift that makes
    /// the Euler–Lagrange equation hold without mean restrictions.
    pub fn reconstruct_potentials(&self, increment: &CoupledField, tau: f64, potentials: &CoupledField) -> Result<CoupledField> {
        let ring = self.solve(increment)?.scaled(1.0 / tau);
        let beta = self.params.beta;
        let (area, length) = (self.w_bulk.iter().sum::<f64>(), self.w_surf.iter().sum::<f64>());
        let sb = weighted_sum(&self.w_bulk, &potentials.bulk);
        let ss = weighted_sum(&self.w_surf, &potentials.surf);
        let (cb, cs) = match self.params.coupling {
            Coupling::Decoupled => (sb / area, ss / length),
            _ => {
                let c = (beta * sb + ss) / (beta * beta * area + length);
                (beta * c, c)
            }
        };
        Ok(CoupledField::new(
            ring.bulk.iter().map(|v| v + cb).collect(),
            ring.surf.iter().map(|v| v + cs).collect(),
        ))
    }
}

fn abs(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.abs()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bulk,
    Surface,
}

/// Neumann problem on one side: `m A u = −M r` with `Σ wᵢ uᵢ = 0`.
///
/// On the boundary circle `r = sin θ` gives `u ≈ −sin θ`.
#[derive(Debug)]
pub struct NeumannSolver {
    mobility: f64,
    weights: Vec<f64>,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    system: ConstrainedSystem,
}

impl NeumannSolver {
    pub fn new(fem: &FemMatrices, side: Side, mobility: f64, mass: MassKind, solver: LinearSolverKind) -> Result<Self> {
        if !(mobility > 0.0 && mobility.is_finite()) {
            return Err(Error::Contract(format!("mobility {mobility} must be positive")));
        }
        let (mb, ms) = mass_matrices(fem, mass);
        let (stiffness, weights, mass) = match side {
            Side::Bulk => (fem.stiffness_bulk.clone(), fem.lumped_bulk.clone(), mb),
            Side::Surface => (fem.stiffness_surf.clone(), fem.lumped_surf.clone(), ms),
        };
        let mut b = TripletBuilder::new(stiffness.nrows(), stiffness.ncols());
        b.push_block(0, 0, mobility, &stiffness);
        let n = weights.len();
        let system = ConstrainedSystem::new(b.build(), vec![weights.clone()], vec![vec![1.0; n]], solver)?;
        Ok(Self {
            mobility,
            weights,
            mass,
            stiffness,
            system,
        })
    }

    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("field", self.weights.len(), r.len())?;
        let mean = weighted_sum(&self.weights, r);
        let scale = weighted_sum(&self.weights, &abs(r)).max(1.0);
        if mean.abs() > MEAN_TOLERANCE * scale {
            return Err(Error::Contract(format!("right-hand side has nonzero mean {mean:e}")));
        }
        let rhs: Vec<f64> = self.mass.mul_vec(r).iter().map(|v| -v).collect();
        self.system.solve(&rhs)
    }

    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mobility * self.stiffness.bilinear(u, v)
    }

    pub fn norm(&self, r: &[f64]) -> Result<f64> {
        let u = self.solve(r)?;
        Ok(libm::sqrt(self.form(&u, &u).max(0.0)))
    }

    /// Discrete equation residual `‖m A u + M r‖_∞`.
    pub fn residual(&self, r: &[f64], u: &[f64]) -> f64 {
        let au = self.stiffness.mul_vec(u);
        let mr = self.mass.mul_vec(r);
        au.iter().zip(&mr).map(|(a, m)| (self.mobility * a + m).abs()).fold(0.0, f64::max)
    }
}

/// `‖r‖_{(H¹)'} = ((Mr)ᵀ (A + M)⁻¹ (Mr))^½` on each side, combined in ℓ².
pub struct DualH1Norm {
    bulk: (SparseLu, CsrMatrix),
    surf: (SparseLu, CsrMatrix),
}

impl DualH1Norm {
    pub fn new(fem: &FemMatrices, mass: MassKind) -> Result<Self> {
        let (mb, ms) = mass_matrices(fem, mass);
        let shifted = |a: &CsrMatrix, m: &CsrMatrix| -> Result<SparseLu> {
            let mut b = TripletBuilder::new(a.nrows(), a.ncols());
            b.push_block(0, 0, 1.0, a);
            b.push_block(0, 0, 1.0, m);
            SparseLu::factor(&b.build())
        };
        Ok(Self {
            bulk: (shifted(&fem.stiffness_bulk, &mb)?, mb),
            surf: (shifted(&fem.stiffness_surf, &ms)?, ms),
        })
    }

    pub fn norm(&self, r: &CoupledField) -> Result<f64> {
        let side = |(lu, m): &(SparseLu, CsrMatrix), v: &[f64]| -> Result<f64> {
            let mv = m.mul_vec(v);
            let x = lu.solve(&mv)?;
            Ok(mv.iter().zip(&x).map(|(a, b)| a * b).sum())
        };
        Ok(libm::sqrt(side(&self.bulk, &r.bulk)? + side(&self.surf, &r.surf)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormComparisonRow {
    pub l: f64,
    pub worst_ratio: f64,
    pub best_ratio: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormComparisonReport {
    /// Sorted by decreasing `L`.
    pub rows: Vec<NormComparisonRow>,
    /// The worst ratio does not decrease as `L` decreases.
    pub monotone: bool,
}

/// Ratios `‖r‖_{(H¹)'} / ‖r‖_{L,β,*}` over samples, for each Robin `L`.
/// Zero samples are skipped.
pub fn norm_comparison_check(
    fem: &FemMatrices,
    beta: f64,
    ls: &[f64],
    samples: &[CoupledField],
    mass: MassKind,
) -> Result<NormComparisonReport> {
    let dual = DualH1Norm::new(fem, mass)?;
    let mut ls = ls.to_vec();
    ls.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(ls.len());
    for &l in &ls {
        let mut params = EllipticParams::new(beta, Coupling::Robin { l });
        params.mass = mass;
        let solver = CoupledSolver::new(fem, params)?;
        let (mut worst, mut best, mut count) = (0.0f64, f64::INFINITY, 0);
        for r in samples {
            if r.max_abs() == 0.0 {
                continue;
            }
            let ratio = dual.norm(r)? / solver.norm(r)?;
            worst = worst.max(ratio);
            best = best.min(ratio);
            count += 1;
        }
        rows.push(NormComparisonRow {
            l,
            worst_ratio: worst,
            best_ratio: best,
            samples: count,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].worst_ratio >= w[0].worst_ratio);
    Ok(NormComparisonReport { rows, monotone })
}

/// Weighted pairing on both blocks with the lumped weights.
pub fn weighted_pairing(w_bulk: &[f64], w_surf: &[f64], u: &CoupledField, v: &CoupledField) -> f64 {
    weighted_dot(w_bulk, &u.bulk, &v.bulk) + weighted_dot(w_surf, &u.surf, &v.surf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assemble_fem, build_disk_mesh};

    fn fem(level: u32) -> FemMatrices {
        assemble_fem(&build_disk_mesh(level).unwrap()).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let fem = fem(2);
        let (nb, ns) = (fem.lumped_bulk.len(), fem.lumped_surf.len());
        for coupling in [Coupling::Robin { l: 1.0 }, Coupling::Dirichlet, Coupling::Decoupled] {
            let s = CoupledSolver::new(&fem, EllipticParams::new(1.0, coupling)).unwrap();
            let out = s.solve(&CoupledField::zeros(nb, ns)).unwrap();
            assert!(out.max_abs() < 1e-14, "{coupling:?}");
            assert_eq!(s.norm(&CoupledField::zeros(nb, ns)).unwrap(), 0.0);
        }
    }

    #[test]
    fn inadmissible_rhs_is_a_contract_error() {
        let fem = fem(2);
        let (nb, ns) = (fem.lumped_bulk.len(), fem.lumped_surf.len());
        let s = CoupledSolver::new(&fem, EllipticParams::new(1.0, Coupling::Robin { l: 1.0 })).unwrap();
        let r = CoupledField::new(vec![1.0; nb], vec![0.0; ns]);
        assert!(matches!(s.solve(&r), Err(Error::Contract(_))));
        assert!(matches!(
            CoupledSolver::new(&fem, EllipticParams::new(-1.0, Coupling::Dirichlet)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn balanced_constants_for_dirichlet() {
        let fem = fem(3);
        let (nb, ns) = (fem.lumped_bulk.len(), fem.lumped_surf.len());
        let area: f64 = fem.lumped_bulk.iter().sum();
        let length: f64 = fem.lumped_surf.iter().sum();
        let r = CoupledField::new(vec![0.7; nb], vec![-0.7 * area / length; ns]);
        let s = CoupledSolver::new(&fem, EllipticParams::new(1.0, Coupling::Dirichlet)).unwrap();
        let out = s.solve(&r).unwrap();
        // trace identity holds by construction
        for (j, &t) in fem.trace.indices().iter().enumerate() {
            assert_eq!(out.bulk[t], out.surf[j]);
        }
        assert!(s.means(&out)[0].abs() < 1e-11);
    }

    #[test]
    fn cg_fallback_matches_direct() {
        let fem = fem(3);
        let (nb, ns) = (fem.lumped_bulk.len(), fem.lumped_surf.len());
        let bulk: Vec<f64> = (0..nb).map(|i| libm::sin(i as f64)).collect();
        let mut r = CoupledField::new(bulk, vec![0.0; ns]);
        let shift = r.beta_mean(1.0, &fem.lumped_bulk, &fem.lumped_surf) / fem.lumped_surf.iter().sum::<f64>();
        r.surf.iter_mut().for_each(|v| *v -= shift);
        let direct = CoupledSolver::new(&fem, EllipticParams::new(1.0, Coupling::Robin { l: 0.5 })).unwrap();
        let mut params = EllipticParams::new(1.0, Coupling::Robin { l: 0.5 });
        params.solver = LinearSolverKind::ConjugateGradient { tol: 1e-13, max_iter: 5000 };
        let cg = CoupledSolver::new(&fem, params).unwrap();
        let a = direct.solve(&r).unwrap();
        let b = cg.solve(&r).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-9 * a.max_abs());
    }
}
