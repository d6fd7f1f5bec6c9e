//! Legacy VTK (ASCII unstructured grid) and JSON writers.
//!
//! Every file is written to a temporary sibling first and renamed into place,
//! so readers see either the complete file or none at all.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::mesher::TriMesh;
use crate::postdsl::{region_mask, ElementData, PostEvaluation, PostProgram};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("output path \"{0}\" escapes the output directory")]
    UnsafePath(String),
    #[error("{0}")]
    Missing(String),
}

/// Per-cell data attached to a VTK file.
#[derive(Debug, Clone, PartialEq)]
pub enum CellValues {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
    ComplexVector(Vec<[Complex64; 3]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub name: String,
    pub values: CellValues,
}

impl CellField {
    pub fn new(name: impl Into<String>, values: CellValues) -> Self {
        Self { name: name.into(), values }
    }
}

impl From<&ElementData> for CellValues {
    fn from(d: &ElementData) -> Self {
        match d {
            ElementData::Scalar(v) => CellValues::Complex(v.clone()),
            ElementData::Vector(v) => CellValues::ComplexVector(v.clone()),
        }
    }
}

/// Writes `bytes` to `path` via a temporary file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// Serializes `value` as pretty JSON and writes it atomically.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), ExportError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)?;
    Ok(())
}

fn sanitize(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    if s.is_empty() {
        "field".into()
    } else {
        s
    }
}

fn scalar_block(out: &mut String, name: &str, n: usize, value: impl Fn(usize) -> f64) {
    let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for i in 0..n {
        let _ = writeln!(out, "{}", value(i));
    }
}

fn vector_block(out: &mut String, name: &str, n: usize, value: impl Fn(usize) -> [f64; 3]) {
    let _ = writeln!(out, "VECTORS {name} double");
    for i in 0..n {
        let v = value(i);
        let _ = writeln!(out, "{} {} {}", v[0], v[1], v[2]);
    }
}

/// Legacy VTK text for `mesh` with region tags and the given cell fields.
pub fn vtk_string(mesh: &TriMesh, title: &str, fields: &[CellField]) -> String {
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(200).collect();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} 0", p.x, p.y);
    }
    let m = mesh.triangles.len();
    let _ = writeln!(s, "CELLS {m} {}", 4 * m);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t.nodes[0], t.nodes[1], t.nodes[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    for _ in 0..m {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "CELL_DATA {m}\nSCALARS region int 1\nLOOKUP_TABLE default");
    for t in &mesh.triangles {
        let _ = writeln!(s, "{}", t.tag);
    }
    for f in fields {
        let name = sanitize(&f.name);
        match &f.values {
            CellValues::Real(v) => scalar_block(&mut s, &name, m, |i| v[i]),
            CellValues::Complex(v) => {
                scalar_block(&mut s, &format!("{name}_re"), m, |i| v[i].re);
                scalar_block(&mut s, &format!("{name}_im"), m, |i| v[i].im);
            }
            CellValues::ComplexVector(v) => {
                vector_block(&mut s, &format!("{name}_re"), m, |i| v[i].map(|c| c.re));
                vector_block(&mut s, &format!("{name}_im"), m, |i| v[i].map(|c| c.im));
            }
        }
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &TriMesh, title: &str, fields: &[CellField]) -> Result<(), ExportError> {
    atomic_write(path, vtk_string(mesh, title, fields).as_bytes())?;
    Ok(())
}

/// Joins a relative artifact path onto `dir`, refusing anything that would
/// leave it.
pub fn confined_join(dir: &Path, rel: &str) -> Result<PathBuf, ExportError> {
    let p = Path::new(rel);
    let ok = !rel.trim().is_empty()
        && !p.is_absolute()
        && !rel.starts_with(['/', '\\'])
        && !rel.ends_with(['/', '\\'])
        && !rel.contains(':')
        && p.components().all(|c| matches!(c, std::path::Component::Normal(_) | std::path::Component::CurDir))
        && p.file_name().is_some();
    if ok {
        Ok(dir.join(p))
    } else {
        Err(ExportError::UnsafePath(rel.to_string()))
    }
}

#[derive(Debug, Clone, Serialize)]
struct PrintArtifact<'a> {
    processing: &'a str,
    quantity: &'a str,
    label: Option<&'a str>,
    target_region: &'a str,
    regions: &'a [String],
    /// `∫ value dΩ` over the printed elements, per unit length.
    integral: Option<[f64; 2]>,
    data: &'a ElementData,
}

/// Writes one `.vtk` and one `.json` per Print statement. The requested file
/// name keeps its stem; the extension is replaced.
pub fn write_post_artifacts(
    program: &PostProgram,
    evaluation: &PostEvaluation,
    mesh: &TriMesh,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ExportError> {
    let mut written = Vec::new();
    for po in &program.post_operations {
        for pr in &po.prints {
            let q = evaluation.get(&po.processing_ref, &pr.quantity).ok_or_else(|| {
                ExportError::Missing(format!("no values for quantity '{}' of '{}'", pr.quantity, po.processing_ref))
            })?;
            let target = pr.on_elements_of.as_deref().unwrap_or("Omega");
            let mask = region_mask(mesh, target).ok_or_else(|| ExportError::Missing(format!("unknown region '{target}'")))?;
            let data = q.data.masked(&mask);
            let file = pr.file.as_deref().ok_or_else(|| ExportError::Missing("Print without File".into()))?;
            let base = confined_join(out_dir, file)?;
            let integral = data.scalars().map(|v| {
                let s: Complex64 = v.iter().enumerate().map(|(t, x)| x * mesh.signed_area(t)).sum();
                [s.re, s.im]
            });
            let vtk = base.with_extension("vtk");
            let title = pr.label.clone().unwrap_or_else(|| pr.quantity.clone());
            write_vtk(&vtk, mesh, title.trim(), &[CellField::new(&pr.quantity, (&data).into())])?;
            let json = base.with_extension("json");
            write_json(
                &json,
                &PrintArtifact {
                    processing: &po.processing_ref,
                    quantity: &pr.quantity,
                    label: pr.label.as_deref(),
                    target_region: target,
                    regions: &q.regions,
                    integral,
                    data: &data,
                },
            )?;
            written.push(vtk);
            written.push(json);
        }
    }
    Ok(written)
}
