//! Per-element real arrays for viewers (`fields.json`) and the payloads
//! served from them.

use std::collections::BTreeMap;
use std::path::Path;

use emsim_core::postdsl::{ElementData, PostEvaluation};
use emsim_core::solver::{FEProblem, Simulation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FIELDS_FILE: &str = "fields.json";

const BUILTIN: [&str; 8] = ["Jz_re", "Jz_im", "Jz_abs", "Az_abs", "B_abs", "H_abs", "w_m", "region"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFile {
    pub schema_version: u32,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub fields: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPayload {
    pub schema_version: u32,
    pub name: String,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub values: Vec<f64>,
    /// `[min, max]` of `values`; `[0, 0]` when empty.
    pub range: [f64; 2],
}

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("no field data for this session")]
    NoData,
    #[error("unknown field '{0}'")]
    UnknownField(String),
    #[error("field data unreadable: {0}")]
    Corrupt(String),
}

fn add_post(fields: &mut BTreeMap<String, Vec<f64>>, name: &str, data: &ElementData) {
    let base = if BUILTIN.iter().any(|b| name.starts_with(b)) { format!("post_{name}") } else { name.to_string() };
    match data {
        ElementData::Scalar(v) => {
            fields.insert(format!("{base}_re"), v.iter().map(|c| c.re).collect());
            fields.insert(format!("{base}_im"), v.iter().map(|c| c.im).collect());
            fields.insert(format!("{base}_abs"), v.iter().map(|c| c.norm()).collect());
        }
        ElementData::Vector(v) => {
            fields.insert(
                format!("{base}_abs"),
                v.iter().map(|x| x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()).collect(),
            );
        }
    }
}

pub fn build_field_file(problem: &FEProblem, sim: &Simulation, post: Option<&PostEvaluation>) -> FieldFile {
    let mesh = &problem.mesh;
    let f = &sim.fields;
    let m = mesh.triangles.len();
    let nu = problem.material.reluctivity;
    let mut fields = BTreeMap::new();
    fields.insert("Jz_re".into(), f.j_z.iter().map(|c| c.re).collect());
    fields.insert("Jz_im".into(), f.j_z.iter().map(|c| c.im).collect());
    fields.insert("Jz_abs".into(), f.j_z.iter().map(|c| c.norm()).collect());
    fields.insert(
        "Az_abs".into(),
        mesh.triangles.iter().map(|t| (t.nodes.iter().map(|&n| sim.result.a_z[n]).sum::<emsim_core::Complex64>() / 3.0).norm()).collect(),
    );
    let b: Vec<f64> = (0..m).map(|t| f.b_abs(t)).collect();
    fields.insert("H_abs".into(), b.iter().map(|x| x * nu).collect());
    fields.insert("w_m".into(), b.iter().map(|x| 0.25 * nu * x * x).collect());
    fields.insert("B_abs".into(), b);
    fields.insert("region".into(), mesh.triangles.iter().map(|t| t.tag as f64).collect());
    if let Some(p) = post {
        for q in &p.quantities {
            add_post(&mut fields, &q.name, &q.data);
        }
    }
    FieldFile {
        schema_version: 1,
        nodes: mesh.nodes.iter().map(|p| [p.x, p.y]).collect(),
        triangles: mesh.triangles.iter().map(|t| t.nodes).collect(),
        fields,
    }
}

fn read_field_file(dir: &Path) -> Result<FieldFile, FieldError> {
    let text = match std::fs::read_to_string(dir.join(FIELDS_FILE)) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(FieldError::NoData),
        Err(e) => return Err(FieldError::Corrupt(e.to_string())),
    };
    serde_json::from_str(&text).map_err(|e| FieldError::Corrupt(e.to_string()))
}

/// Names of the arrays available in `dir`.
pub fn list_fields(dir: &Path) -> Result<Vec<String>, FieldError> {
    Ok(read_field_file(dir)?.fields.into_keys().collect())
}

pub fn load_field(dir: &Path, name: &str) -> Result<FieldPayload, FieldError> {
    let mut file = read_field_file(dir)?;
    let values = file.fields.remove(name).ok_or_else(|| FieldError::UnknownField(name.to_string()))?;
    let range = if values.is_empty() {
        [0.0, 0.0]
    } else {
        values.iter().fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], &v| [lo.min(v), hi.max(v)])
    };
    Ok(FieldPayload { schema_version: 1, name: name.to_string(), nodes: file.nodes, triangles: file.triangles, values, range })
}
