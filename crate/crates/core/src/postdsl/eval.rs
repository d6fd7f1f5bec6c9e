use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::check::{conductor_index, static_kind, Formulation, Kind};
use super::{BinOp, Expr, PostProgram};
use crate::exec::{try_map_indexed, Exec};
use crate::mesher::{TriMesh, OUTER_BOUNDARY_GROUP};
use crate::solver::{p1_gradients, FEProblem, SolveResult};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum EvalError {
    #[error("quantity '{quantity}' needs {material}[] in region '{region}', where it is undefined")]
    MissingMaterial { quantity: String, material: String, region: String },
    #[error("quantity '{quantity}': unknown region '{region}'")]
    UnknownRegion { quantity: String, region: String },
    #[error("quantity '{quantity}': {message}")]
    Invalid { quantity: String, message: String },
}

/// Element values of one quantity, indexed by triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum ElementData {
    Scalar(Vec<Complex64>),
    Vector(Vec<[Complex64; 3]>),
}

impl ElementData {
    pub fn len(&self) -> usize {
        match self {
            ElementData::Scalar(v) => v.len(),
            ElementData::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> Kind {
        match self {
            ElementData::Scalar(_) => Kind::Scalar,
            ElementData::Vector(_) => Kind::Vector,
        }
    }

    /// Scalar values, if this is a scalar quantity.
    pub fn scalars(&self) -> Option<&[Complex64]> {
        match self {
            ElementData::Scalar(v) => Some(v),
            ElementData::Vector(_) => None,
        }
    }

    /// Copy with every element outside `mask` set to zero.
    pub fn masked(&self, mask: &[bool]) -> ElementData {
        match self {
            ElementData::Scalar(v) => {
                ElementData::Scalar(v.iter().zip(mask).map(|(x, &m)| if m { *x } else { ZERO }).collect())
            }
            ElementData::Vector(v) => {
                ElementData::Vector(v.iter().zip(mask).map(|(x, &m)| if m { *x } else { [ZERO; 3] }).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityValues {
    pub processing: String,
    pub name: String,
    pub regions: Vec<String>,
    /// Element means; zero outside the quantity's regions.
    pub data: ElementData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PostEvaluation {
    pub quantities: Vec<QuantityValues>,
}

impl PostEvaluation {
    pub fn get(&self, processing: &str, name: &str) -> Option<&QuantityValues> {
        self.quantities.iter().find(|q| q.processing == processing && q.name == name)
    }
}

/// Triangle membership of a named region, or `None` if the name is unknown.
pub fn region_mask(mesh: &TriMesh, name: &str) -> Option<Vec<bool>> {
    let n = mesh.conductor_count() as u32;
    let is_cond = |tag: u32| tag >= 1 && tag <= n;
    let test: Box<dyn Fn(u32) -> bool> = match name {
        "Omega" => Box::new(|_| true),
        "Omega_c" => Box::new(is_cond),
        _ if name == OUTER_BOUNDARY_GROUP => return None,
        _ => {
            let tag = mesh.group_tag(name)?;
            Box::new(move |t| t == tag)
        }
    };
    Some(mesh.triangles.iter().map(|t| test(t.tag)).collect())
}

#[derive(Debug, Clone, Copy)]
enum Val {
    S(Complex64),
    V([Complex64; 3]),
}

impl Val {
    fn map(self, f: impl Fn(Complex64) -> Complex64) -> Val {
        match self {
            Val::S(s) => Val::S(f(s)),
            Val::V(v) => Val::V(v.map(f)),
        }
    }

    fn norm_sqr(self) -> f64 {
        match self {
            Val::S(s) => s.norm_sqr(),
            Val::V(v) => v.iter().map(|c| c.norm_sqr()).sum(),
        }
    }
}

/// Pointwise inputs at one quadrature point.
struct Point {
    a: Complex64,
    grad_phi: Complex64,
    b: [Complex64; 2],
    omega: f64,
    sigma: Option<f64>,
    nu: f64,
}

fn pow(b: Complex64, e: Complex64) -> Complex64 {
    if e.im == 0.0 && e.re.fract() == 0.0 && e.re.abs() <= 64.0 {
        b.powi(e.re as i32)
    } else if b.im == 0.0 && e.im == 0.0 && b.re >= 0.0 {
        Complex64::new(b.re.powf(e.re), 0.0)
    } else {
        b.powc(e)
    }
}

fn eval(e: &Expr, p: &Point) -> Result<Val, String> {
    Ok(match e {
        Expr::Num(v, _) => Val::S(Complex64::new(*v, 0.0)),
        Expr::Field(f, _) => match (f.derivative, f.name.as_str()) {
            (false, "a") => Val::V([ZERO, ZERO, p.a]),
            (false, "grad_phi") => Val::V([ZERO, ZERO, p.grad_phi]),
            (true, "a") => Val::V([p.b[0], p.b[1], ZERO]),
            _ => return Err(format!("field {f} is not available")),
        },
        Expr::Coef(n, _) => match n.as_str() {
            "sigma" => Val::S(Complex64::new(p.sigma.ok_or("sigma")?, 0.0)),
            "nu" => Val::S(Complex64::new(p.nu, 0.0)),
            "mu" => Val::S(Complex64::new(1.0 / p.nu, 0.0)),
            other => return Err(format!("unknown material function '{other}[]'")),
        },
        Expr::Call(n, args, _) => {
            let [arg] = &args[..] else { return Err(format!("'{n}' takes one argument")) };
            let x = eval(arg, p)?;
            match n.as_str() {
                "Dt" => {
                    let jw = Complex64::new(0.0, p.omega);
                    x.map(|c| c * jw)
                }
                "Norm" => Val::S(Complex64::new(x.norm_sqr().sqrt(), 0.0)),
                "SquNorm" => Val::S(Complex64::new(x.norm_sqr(), 0.0)),
                "Re" => x.map(|c| Complex64::new(c.re, 0.0)),
                "Im" => x.map(|c| Complex64::new(c.im, 0.0)),
                "Conj" => x.map(|c| c.conj()),
                "CompX" | "CompY" | "CompZ" => match x {
                    Val::V(v) => Val::S(v[match n.as_str() {
                        "CompX" => 0,
                        "CompY" => 1,
                        _ => 2,
                    }]),
                    Val::S(_) => return Err(format!("'{n}' of a scalar")),
                },
                other => return Err(format!("unknown function '{other}'")),
            }
        }
        Expr::Neg(x, _) => eval(x, p)?.map(|c| -c),
        Expr::Bin(op, l, r, _) => {
            let (a, b) = (eval(l, p)?, eval(r, p)?);
            match (op, a, b) {
                (BinOp::Add, Val::S(x), Val::S(y)) => Val::S(x + y),
                (BinOp::Add, Val::V(x), Val::V(y)) => Val::V([x[0] + y[0], x[1] + y[1], x[2] + y[2]]),
                (BinOp::Sub, Val::S(x), Val::S(y)) => Val::S(x - y),
                (BinOp::Sub, Val::V(x), Val::V(y)) => Val::V([x[0] - y[0], x[1] - y[1], x[2] - y[2]]),
                (BinOp::Mul, Val::S(x), Val::S(y)) => Val::S(x * y),
                (BinOp::Mul, Val::S(s), Val::V(v)) | (BinOp::Mul, Val::V(v), Val::S(s)) => Val::V(v.map(|c| c * s)),
                (BinOp::Div, x, Val::S(y)) => x.map(|c| c / y),
                (BinOp::Pow, Val::S(x), Val::S(y)) => Val::S(pow(x, y)),
                _ => return Err(format!("operator '{}' is not defined for these operand kinds", op.symbol())),
            }
        }
    })
}

/// Evaluates every declared quantity on every triangle of its regions.
pub fn evaluate_post(program: &PostProgram, result: &SolveResult, problem: &FEProblem) -> Result<PostEvaluation, EvalError> {
    evaluate_post_with(Exec::available(), program, result, problem)
}

/// Element values are the mean over the three edge midpoints, which is the
/// exact element average for expressions quadratic in the P1 fields.
pub fn evaluate_post_with(
    exec: Exec,
    program: &PostProgram,
    result: &SolveResult,
    problem: &FEProblem,
) -> Result<PostEvaluation, EvalError> {
    let mesh = &problem.mesh;
    let owner = problem.triangle_conductors();
    let omega = problem.omega();
    let sigma = problem.material.conductivity_s_per_m;
    let nu = problem.material.reluctivity;
    let formulation = Formulation::mag_dyn_a();
    let mut out = PostEvaluation::default();
    for pp in &program.post_processings {
        for q in &pp.quantities {
            let invalid = |message: String| EvalError::Invalid { quantity: q.name.clone(), message };
            let kind = static_kind(&q.expr, &formulation).ok_or_else(|| invalid("expression does not kind-check".into()))?;
            let mut mask = vec![false; mesh.triangles.len()];
            for r in &q.regions {
                let m = region_mask(mesh, r)
                    .ok_or_else(|| EvalError::UnknownRegion { quantity: q.name.clone(), region: r.clone() })?;
                for (a, b) in mask.iter_mut().zip(m) {
                    *a |= b;
                }
            }
            let values = try_map_indexed(exec, mesh.triangles.len(), |t| -> Result<Val, EvalError> {
                if !mask[t] {
                    return Ok(match kind {
                        Kind::Scalar => Val::S(ZERO),
                        Kind::Vector => Val::V([ZERO; 3]),
                    });
                }
                let nodes = mesh.triangles[t].nodes;
                let (_, g) = p1_gradients(mesh.vertices(t));
                let a = nodes.map(|n| result.a_z[n]);
                let mut b = [ZERO; 2];
                for i in 0..3 {
                    b[0] += a[i] * g[i][1];
                    b[1] -= a[i] * g[i][0];
                }
                let grad_phi = owner[t].map(|c| result.u[c]).unwrap_or(ZERO);
                let mat_sigma = owner[t].map(|_| sigma);
                let mut acc: Option<Val> = None;
                for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                    let point = Point { a: (a[i] + a[j]) / 2.0, grad_phi, b, omega, sigma: mat_sigma, nu };
                    let v = eval(&q.expr, &point).map_err(|m| {
                        if m == "sigma" {
                            let region = mesh
                                .groups
                                .iter()
                                .find(|(_, &tag)| tag == mesh.triangles[t].tag)
                                .map(|(n, _)| n.clone())
                                .unwrap_or_default();
                            EvalError::MissingMaterial { quantity: q.name.clone(), material: "sigma".into(), region }
                        } else {
                            EvalError::Invalid { quantity: q.name.clone(), message: m }
                        }
                    })?;
                    acc = Some(match (acc, v) {
                        (None, v) => v,
                        (Some(Val::S(x)), Val::S(y)) => Val::S(x + y),
                        (Some(Val::V(x)), Val::V(y)) => Val::V([x[0] + y[0], x[1] + y[1], x[2] + y[2]]),
                        _ => unreachable!("kind is fixed per expression"),
                    });
                }
                Ok(acc.expect("three points").map(|c| c / 3.0))
            })?;
            let data = match kind {
                Kind::Scalar => ElementData::Scalar(
                    values.into_iter().map(|v| if let Val::S(s) = v { s } else { unreachable!() }).collect(),
                ),
                Kind::Vector => ElementData::Vector(
                    values.into_iter().map(|v| if let Val::V(x) = v { x } else { unreachable!() }).collect(),
                ),
            };
            out.quantities.push(QuantityValues {
                processing: pp.name.clone(),
                name: q.name.clone(),
                regions: q.regions.clone(),
                data,
            });
        }
    }
    Ok(out)
}

/// Conductor index of a region name, for callers mapping regions to reports.
pub fn region_conductor(name: &str) -> Option<usize> {
    conductor_index(name)
}
