//! Time-harmonic A-v eddy-current formulation on first-order triangles.
//!
//! Unknowns are the nodal values of `A_z` (zero on `Gamma_out`) and one
//! constant `u_i` per conductor, so that inside conductor `i`
//!
//! ```text
//! E_z = -jω A_z - u_i,    J_z = σ E_z,    ∫_{Ω_ci} J_z dΩ = I_i.
//! ```
//!
//! With `b_j = ∫ N_j dΩ` over the conductor, the nodal rows read
//! `(νK + jωσM) A + σ b u = 0` and the constraint rows
//! `jωσ bᵀA + σ|Ω_ci| u_i = -I_i`. For ω > 0 the constraint rows are divided
//! by jω, which makes the assembled matrix complex symmetric. At ω = 0 the
//! constraint rows reduce to `σ|Ω_ci| u_i = -I_i` and the matrix is not
//! symmetric.
//!
//! The default solver factors the nodal block with an envelope LDLᵀ,
//! eliminates the conductor unknowns through a dense Schur complement and
//! finishes with iterative refinement on the full system.

mod cocg;
mod dense;
pub mod ldl;
pub mod sparse;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{map_indexed, Exec};
use crate::geometry::{ExcitationSpec, MaterialSpec, Point2};
use crate::mesher::{TriMesh, OUTER_BOUNDARY_GROUP};
use dense::DenseLu;
use ldl::EnvelopeLdl;
pub use sparse::CsrMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const J: Complex64 = Complex64::new(0.0, 1.0);

/// Relative residual every solve must reach.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("degenerate triangle {triangle} (area {area:e})")]
    Assembly { triangle: usize, area: f64 },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("solver did not reach the residual target (relative residual {0:e})")]
    NotConverged(f64),
}

/// A complete eddy-current problem on a tagged mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FEProblem {
    pub mesh: TriMesh,
    pub material: MaterialSpec,
    pub excitation: ExcitationSpec,
    /// Imposed current per conductor, A (peak phasor).
    pub currents: Vec<Complex64>,
}

impl FEProblem {
    /// Every conductor carries the excitation amplitude as a real phasor.
    pub fn new(mesh: TriMesh, material: MaterialSpec, excitation: ExcitationSpec) -> Result<Self, SolverError> {
        let n = mesh.conductor_count();
        let currents = vec![Complex64::new(excitation.current_amplitude_a, 0.0); n];
        Self::with_currents(mesh, material, excitation, currents)
    }

    pub fn with_currents(
        mesh: TriMesh,
        material: MaterialSpec,
        excitation: ExcitationSpec,
        currents: Vec<Complex64>,
    ) -> Result<Self, SolverError> {
        let p = Self { mesh, material, excitation, currents };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.mesh.conductor_count();
        if n == 0 {
            return Err(SolverError::InvalidProblem("mesh has no conductor groups".into()));
        }
        if self.currents.len() != n {
            return Err(SolverError::InvalidProblem(format!(
                "{} currents given for {n} conductors",
                self.currents.len()
            )));
        }
        if !(self.material.conductivity_s_per_m > 0.0 && self.material.conductivity_s_per_m.is_finite()) {
            return Err(SolverError::InvalidProblem("conductor conductivity must be positive".into()));
        }
        if !(self.material.reluctivity > 0.0 && self.material.reluctivity.is_finite()) {
            return Err(SolverError::InvalidProblem("reluctivity must be positive".into()));
        }
        if !(self.excitation.frequency_hz >= 0.0 && self.excitation.frequency_hz.is_finite()) {
            return Err(SolverError::InvalidProblem("frequency must be finite and non-negative".into()));
        }
        if self.currents.iter().any(|c| !c.is_finite()) {
            return Err(SolverError::InvalidProblem("currents must be finite".into()));
        }
        for i in 0..n {
            let tag = self
                .mesh
                .conductor_tag(i)
                .ok_or_else(|| SolverError::InvalidProblem(format!("missing group Omega_c_{}", i + 1)))?;
            if !self.mesh.triangles.iter().any(|t| t.tag == tag) {
                return Err(SolverError::InvalidProblem(format!("group Omega_c_{} has no triangles", i + 1)));
            }
        }
        if self.mesh.group_tag(OUTER_BOUNDARY_GROUP).is_none() {
            return Err(SolverError::InvalidProblem("missing group Gamma_out".into()));
        }
        self.mesh.validate().map_err(SolverError::InvalidProblem)
    }

    pub fn omega(&self) -> f64 {
        self.excitation.angular_frequency()
    }

    /// Conductor index (zero based) of each triangle, if any.
    pub fn triangle_conductors(&self) -> Vec<Option<usize>> {
        let tags: Vec<u32> = (0..self.mesh.conductor_count()).filter_map(|i| self.mesh.conductor_tag(i)).collect();
        self.mesh.triangles.iter().map(|t| tags.iter().position(|&g| g == t.tag)).collect()
    }
}

/// Area and shape-function gradients of a P1 triangle.
pub fn p1_gradients(p: [Point2; 3]) -> (f64, [[f64; 2]; 3]) {
    let area = 0.5 * ((p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[1].y - p[0].y) * (p[2].x - p[0].x));
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j].y - p[k].y) / (2.0 * area), (p[k].x - p[j].x) / (2.0 * area)];
    }
    (area, g)
}

/// `ν ∫ ∇N_i · ∇N_j` on one triangle.
pub fn element_stiffness(p: [Point2; 3], nu: f64) -> [[f64; 3]; 3] {
    let (area, g) = p1_gradients(p);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = nu * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

/// `∫ N_i N_j` on a triangle of the given area.
pub fn element_mass(area: f64) -> [[f64; 3]; 3] {
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

/// Numbering of the unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    /// DOF of each mesh node, `None` for Dirichlet nodes.
    pub node_dof: Vec<Option<usize>>,
    pub n_nodal: usize,
    pub n_conductors: usize,
}

impl DofMap {
    pub fn len(&self) -> usize {
        self.n_nodal + self.n_conductors
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn conductor_dof(&self, i: usize) -> usize {
        self.n_nodal + i
    }
}

/// Assembled linear system. The first `dofs.n_nodal` unknowns are nodal
/// `A_z` values, the remaining ones the conductor constants.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<Complex64>,
    pub dofs: DofMap,
}

impl LinearSystem {
    /// A system without mesh context; all unknowns map to nodes except the
    /// trailing `n_conductors`.
    pub fn from_parts(matrix: CsrMatrix, rhs: Vec<Complex64>, n_conductors: usize) -> Self {
        let n_nodal = matrix.n_rows - n_conductors;
        let dofs = DofMap { node_dof: (0..n_nodal).map(Some).collect(), n_nodal, n_conductors };
        Self { matrix, rhs, dofs }
    }
}

pub fn assemble(problem: &FEProblem) -> Result<LinearSystem, SolverError> {
    assemble_with(Exec::available(), problem)
}

pub fn assemble_with(exec: Exec, problem: &FEProblem) -> Result<LinearSystem, SolverError> {
    problem.validate()?;
    let mesh = &problem.mesh;
    let n_cond = mesh.conductor_count();
    let outer = mesh.group_tag(OUTER_BOUNDARY_GROUP).expect("validated");

    let mut fixed = vec![false; mesh.nodes.len()];
    for e in mesh.boundary_edges.iter().filter(|e| e.tag == outer) {
        fixed[e.nodes[0]] = true;
        fixed[e.nodes[1]] = true;
    }
    let mut node_dof = vec![None; mesh.nodes.len()];
    let mut n_nodal = 0;
    for (i, f) in fixed.iter().enumerate() {
        if !f {
            node_dof[i] = Some(n_nodal);
            n_nodal += 1;
        }
    }
    let dofs = DofMap { node_dof, n_nodal, n_conductors: n_cond };

    let (xmin, xmax, ymin, ymax) = mesh.nodes.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), p| (a.min(p.x), b.max(p.x), c.min(p.y), d.max(p.y)),
    );
    let min_area = 1e-16 * ((xmax - xmin).powi(2) + (ymax - ymin).powi(2));

    let omega = problem.omega();
    let nu = problem.material.reluctivity;
    let sigma = problem.material.conductivity_s_per_m;
    let owner = problem.triangle_conductors();
    let dofs_ref = &dofs;

    let element_entries = |t: usize| -> Result<Vec<(usize, usize, Complex64)>, SolverError> {
        let tri = mesh.triangles[t];
        let p = mesh.vertices(t);
        let (area, _) = p1_gradients(p);
        if area <= min_area {
            return Err(SolverError::Assembly { triangle: t, area });
        }
        let k = element_stiffness(p, nu);
        let m = element_mass(area);
        let cond = owner[t];
        let s = if cond.is_some() { sigma } else { 0.0 };
        let mut out = Vec::with_capacity(9 + 7);
        for i in 0..3 {
            let Some(di) = dofs_ref.node_dof[tri.nodes[i]] else { continue };
            for j in 0..3 {
                if let Some(dj) = dofs_ref.node_dof[tri.nodes[j]] {
                    out.push((di, dj, Complex64::new(k[i][j], omega * s * m[i][j])));
                }
            }
        }
        if let Some(c) = cond {
            let cd = dofs_ref.conductor_dof(c);
            for i in 0..3 {
                if let Some(di) = dofs_ref.node_dof[tri.nodes[i]] {
                    let coupling = Complex64::new(sigma * area / 3.0, 0.0);
                    out.push((di, cd, coupling));
                    if omega > 0.0 {
                        out.push((cd, di, coupling));
                    }
                }
            }
            let diag = if omega > 0.0 { -J * sigma * area / omega } else { Complex64::new(sigma * area, 0.0) };
            out.push((cd, cd, diag));
        }
        Ok(out)
    };
    let per_element = map_indexed(exec, mesh.triangles.len(), element_entries);
    let mut triplets = Vec::with_capacity(mesh.triangles.len() * 12);
    for e in per_element {
        triplets.extend(e?);
    }
    let n = dofs.len();
    let matrix = CsrMatrix::from_triplets(n, n, triplets);

    let mut rhs = vec![ZERO; n];
    for (i, &current) in problem.currents.iter().enumerate() {
        rhs[dofs.conductor_dof(i)] = if omega > 0.0 { -current / (J * omega) } else { -current };
    }
    Ok(LinearSystem { matrix, rhs, dofs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Envelope LDLᵀ with Schur complement and iterative refinement; falls
    /// back to COCG if refinement stalls.
    #[default]
    Direct,
    /// Jacobi-preconditioned COCG only (complex symmetric systems).
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    pub tolerance: f64,
    pub max_refinement_steps: usize,
    pub max_iterations: usize,
    pub exec: Exec,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::Direct,
            tolerance: RESIDUAL_TOLERANCE,
            max_refinement_steps: 8,
            max_iterations: 50_000,
            exec: Exec::available(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// `A_z` per mesh node, Wb/m.
    pub a_z: Vec<Complex64>,
    /// Conductor constants `u_i`, V/m.
    pub u: Vec<Complex64>,
    /// Relative residual of the assembled system.
    pub residual_norm: f64,
    pub dof_count: usize,
    pub method: SolveMethod,
    /// Refinement steps (direct) or COCG iterations.
    pub iterations: usize,
}

struct BlockSolver {
    n: usize,
    nc: usize,
    ldl: EnvelopeLdl,
    /// P⁻¹C, one column per conductor
    y: Vec<Vec<Complex64>>,
    /// conductor rows restricted to nodal columns
    d: Vec<Vec<(usize, Complex64)>>,
    schur: Option<DenseLu>,
}

impl BlockSolver {
    fn new(exec: Exec, m: &CsrMatrix, n: usize) -> Result<Self, SolverError> {
        let nc = m.n_rows - n;
        let mut p = Vec::new();
        let mut c = vec![vec![ZERO; n]; nc];
        for i in 0..n {
            for (j, v) in m.row(i) {
                if j < n {
                    p.push((i, j, v));
                } else {
                    c[j - n][i] += v;
                }
            }
        }
        let p = CsrMatrix::from_triplets(n, n, p);
        let ldl = EnvelopeLdl::factor(&p).map_err(|z| SolverError::SingularSystem(format!("zero pivot at unknown {}", z.row)))?;
        let ldl_ref = &ldl;
        let c_ref = &c;
        let y = map_indexed(exec, nc, |k| ldl_ref.solve(&c_ref[k]));
        let d: Vec<Vec<(usize, Complex64)>> =
            (0..nc).map(|k| m.row(n + k).filter(|&(j, _)| j < n).collect()).collect();
        let schur = if nc > 0 {
            let mut s = vec![ZERO; nc * nc];
            for k in 0..nc {
                for (j, v) in m.row(n + k) {
                    if j >= n {
                        s[k * nc + (j - n)] += v;
                    }
                }
                for l in 0..nc {
                    let dy: Complex64 = d[k].iter().map(|&(j, v)| v * y[l][j]).sum();
                    s[k * nc + l] -= dy;
                }
            }
            Some(DenseLu::factor(nc, s).ok_or_else(|| SolverError::SingularSystem("conductor block is singular".into()))?)
        } else {
            None
        };
        Ok(Self { n, nc, ldl, y, d, schur })
    }

    fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let (n, nc) = (self.n, self.nc);
        let mut a = self.ldl.solve(&rhs[..n]);
        let mut x = vec![ZERO; n + nc];
        if let Some(s) = &self.schur {
            let g: Vec<Complex64> = (0..nc)
                .map(|k| rhs[n + k] - self.d[k].iter().map(|&(j, v)| v * a[j]).sum::<Complex64>())
                .collect();
            let u = s.solve(&g);
            for (k, uk) in u.iter().enumerate() {
                for (ai, yi) in a.iter_mut().zip(&self.y[k]) {
                    *ai -= yi * uk;
                }
                x[n + k] = *uk;
            }
        }
        x[..n].copy_from_slice(&a);
        x
    }
}

fn residual(exec: Exec, m: &CsrMatrix, x: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    m.matvec_with(exec, x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

pub fn solve(system: &LinearSystem) -> Result<SolveResult, SolverError> {
    solve_with(system, &SolveOptions::default())
}

pub fn solve_with(system: &LinearSystem, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
    let m = &system.matrix;
    let b = &system.rhs;
    let n_total = m.n_rows;
    if m.n_cols != n_total || b.len() != n_total || system.dofs.len() != n_total {
        return Err(SolverError::InvalidProblem("system dimensions do not match".into()));
    }
    let bnorm = sparse::norm2(b);
    let rel = |r: &[Complex64]| if bnorm > 0.0 { sparse::norm2(r) / bnorm } else { sparse::norm2(r) };

    let mut x = vec![ZERO; n_total];
    let mut method = opts.method;
    let mut res_norm = if bnorm > 0.0 { 1.0 } else { 0.0 };
    let mut iterations = 0;

    if opts.method == SolveMethod::Direct && bnorm > 0.0 {
        let block = BlockSolver::new(opts.exec, m, system.dofs.n_nodal)?;
        let mut r = b.clone();
        for _ in 0..opts.max_refinement_steps {
            iterations += 1;
            let dx = block.solve(&r);
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += d;
            }
            r = residual(opts.exec, m, &x, b);
            res_norm = rel(&r);
            if !res_norm.is_finite() {
                return Err(SolverError::SingularSystem("non-finite solution".into()));
            }
            if res_norm <= opts.tolerance {
                break;
            }
        }
    }
    if res_norm > opts.tolerance {
        if !m.is_symmetric() {
            return Err(SolverError::NotConverged(res_norm));
        }
        let out = cocg::cocg(opts.exec, m, b, x, opts.tolerance, opts.max_iterations);
        x = out.x;
        res_norm = out.relative_residual;
        iterations = out.iterations;
        method = SolveMethod::Iterative;
        if !(res_norm <= opts.tolerance) {
            return Err(SolverError::NotConverged(res_norm));
        }
    }

    let dofs = &system.dofs;
    let a_z = dofs.node_dof.iter().map(|d| d.map(|k| x[k]).unwrap_or(ZERO)).collect();
    let u = (0..dofs.n_conductors).map(|i| x[dofs.conductor_dof(i)]).collect();
    Ok(SolveResult { a_z, u, residual_norm: res_norm, dof_count: n_total, method, iterations })
}

/// Per-triangle derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementFields {
    /// Flux density (B_x, B_y), T.
    pub b: Vec<[Complex64; 2]>,
    /// Field strength ν B, A/m.
    pub h: Vec<[Complex64; 2]>,
    /// Element mean of E_z, V/m. In the insulator this is `-jω A_z`.
    pub e_z: Vec<Complex64>,
    /// Element mean of J_z, A/m²; zero outside conductors.
    pub j_z: Vec<Complex64>,
}

impl ElementFields {
    pub fn b_abs(&self, t: usize) -> f64 {
        (self.b[t][0].norm_sqr() + self.b[t][1].norm_sqr()).sqrt()
    }
}

/// Nodal values of E_z on triangle `t` (conductor constant included).
fn element_e(problem: &FEProblem, result: &SolveResult, owner: Option<usize>, t: usize) -> [Complex64; 3] {
    let omega = problem.omega();
    let u = owner.map(|c| result.u[c]).unwrap_or(ZERO);
    problem.mesh.triangles[t].nodes.map(|n| -J * omega * result.a_z[n] - u)
}

pub fn derive_fields(result: &SolveResult, problem: &FEProblem) -> ElementFields {
    derive_fields_with(Exec::available(), result, problem)
}

pub fn derive_fields_with(exec: Exec, result: &SolveResult, problem: &FEProblem) -> ElementFields {
    let mesh = &problem.mesh;
    let owner = problem.triangle_conductors();
    let nu = problem.material.reluctivity;
    let sigma = problem.material.conductivity_s_per_m;
    let per = map_indexed(exec, mesh.triangles.len(), |t| {
        let (_, g) = p1_gradients(mesh.vertices(t));
        let a = mesh.triangles[t].nodes.map(|n| result.a_z[n]);
        let mut bx = ZERO;
        let mut by = ZERO;
        for i in 0..3 {
            bx += a[i] * g[i][1];
            by -= a[i] * g[i][0];
        }
        let e = element_e(problem, result, owner[t], t);
        let e_mean = (e[0] + e[1] + e[2]) / 3.0;
        let j = if owner[t].is_some() { e_mean * sigma } else { ZERO };
        ([bx, by], [bx * nu, by * nu], e_mean, j)
    });
    let mut f = ElementFields {
        b: Vec::with_capacity(per.len()),
        h: Vec::with_capacity(per.len()),
        e_z: Vec::with_capacity(per.len()),
        j_z: Vec::with_capacity(per.len()),
    };
    for (b, h, e, j) in per {
        f.b.push(b);
        f.h.push(h);
        f.e_z.push(e);
        f.j_z.push(j);
    }
    f
}

/// Exact `∫ |E_z|²` over triangle `t` for the P1 field.
fn e_squared_integral(problem: &FEProblem, result: &SolveResult, owner: Option<usize>, t: usize) -> f64 {
    let e = element_e(problem, result, owner, t);
    let area = problem.mesh.signed_area(t);
    let m = element_mass(area);
    let mut s = ZERO;
    for i in 0..3 {
        for j in 0..3 {
            s += e[i].conj() * e[j] * m[i][j];
        }
    }
    s.re
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductorReport {
    pub index: usize,
    pub group: String,
    /// Current recovered from the solution, `∫ J_z dΩ`.
    pub current: Complex64,
    pub imposed_current: Complex64,
    /// Conductor constant `u_i`, V/m.
    pub voltage: Complex64,
    /// Time-averaged ohmic loss per unit length, W/m.
    pub loss_w_per_m: f64,
    pub area_m2: f64,
    /// Element-mean loss density extremes and area average, W/m³.
    pub loss_density_min: f64,
    pub loss_density_max: f64,
    pub loss_density_mean: f64,
}

pub fn conductor_report(result: &SolveResult, problem: &FEProblem) -> Vec<ConductorReport> {
    let mesh = &problem.mesh;
    let owner = problem.triangle_conductors();
    let sigma = problem.material.conductivity_s_per_m;
    let omega = problem.omega();
    let n = mesh.conductor_count();
    let mut out: Vec<ConductorReport> = (0..n)
        .map(|i| ConductorReport {
            index: i,
            group: crate::mesher::conductor_group_name(i),
            current: ZERO,
            imposed_current: problem.currents[i],
            voltage: result.u[i],
            loss_w_per_m: 0.0,
            area_m2: 0.0,
            loss_density_min: f64::INFINITY,
            loss_density_max: 0.0,
            loss_density_mean: 0.0,
        })
        .collect();
    for (t, o) in owner.iter().enumerate() {
        let Some(c) = *o else { continue };
        let area = mesh.signed_area(t);
        let a_sum: Complex64 = mesh.triangles[t].nodes.iter().map(|&k| result.a_z[k]).sum();
        let r = &mut out[c];
        r.current += sigma * (-J * omega * a_sum * (area / 3.0) - result.u[c] * area);
        let loss = 0.5 * sigma * e_squared_integral(problem, result, *o, t);
        r.loss_w_per_m += loss;
        r.area_m2 += area;
        let density = loss / area;
        r.loss_density_min = r.loss_density_min.min(density);
        r.loss_density_max = r.loss_density_max.max(density);
    }
    for r in &mut out {
        r.loss_density_mean = if r.area_m2 > 0.0 { r.loss_w_per_m / r.area_m2 } else { 0.0 };
        if !r.loss_density_min.is_finite() {
            r.loss_density_min = 0.0;
        }
    }
    out
}

/// Complex power per unit length, `-½ Σ u_i* I_i`; its real part equals the
/// total ohmic loss.
pub fn complex_power(result: &SolveResult, problem: &FEProblem) -> Complex64 {
    -0.5 * result.u.iter().zip(&problem.currents).map(|(u, i)| u.conj() * i).sum::<Complex64>()
}

/// Time-averaged magnetic energy per unit length, `¼ ∫ ν |B|² dΩ`, J/m.
pub fn magnetic_energy(fields: &ElementFields, problem: &FEProblem) -> f64 {
    let nu = problem.material.reluctivity;
    (0..fields.b.len()).map(|t| 0.25 * nu * fields.b_abs(t).powi(2) * problem.mesh.signed_area(t)).sum()
}

/// Convenience bundle of a full solve.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub result: SolveResult,
    pub fields: ElementFields,
    pub conductors: Vec<ConductorReport>,
    pub total_loss_w_per_m: f64,
}

pub fn simulate(problem: &FEProblem, opts: &SolveOptions) -> Result<Simulation, SolverError> {
    let system = assemble_with(opts.exec, problem)?;
    let result = solve_with(&system, opts)?;
    let fields = derive_fields_with(opts.exec, &result, problem);
    let conductors = conductor_report(&result, problem);
    let total_loss_w_per_m = conductors.iter().map(|c| c.loss_w_per_m).sum();
    Ok(Simulation { result, fields, conductors, total_loss_w_per_m })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stiffness_on_unit_right_triangle() {
        let k = element_stiffness([Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)], 1.0);
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_matrix_integrates_products() {
        let m = element_mass(0.3);
        assert!((m[0][0] - 0.3 * 2.0 / 12.0).abs() < 1e-16);
        assert!((m[0][1] - 0.3 / 12.0).abs() < 1e-16);
        // rows sum to ∫ N_i = A/3
        for row in m {
            assert!((row.iter().sum::<f64>() - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_system() {
        let mut b = vec![ZERO; 4];
        b[0] = Complex64::new(1.0, 0.0);
        let sys = LinearSystem::from_parts(CsrMatrix::identity(4), b.clone(), 0);
        let r = solve(&sys).unwrap();
        assert_eq!(r.a_z, b);
        assert!(r.residual_norm <= 1e-15);
    }
}
