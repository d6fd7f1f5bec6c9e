use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::pretty::expr_to_string;
use super::{BinOp, Diagnostic, DslLayer, Expr, FieldRef, PostProgram, Severity, Span};
use crate::mesher::{INSULATOR_GROUP, OUTER_BOUNDARY_GROUP};

/// Whether an expression is scalar- or vector-valued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Scalar,
    Vector,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Scalar => "scalar",
            Kind::Vector => "vector",
        }
    }
}

/// Field references a formulation makes available to post-processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formulation {
    pub name: String,
    pub fields: Vec<(FieldRef, Kind)>,
}

impl Formulation {
    /// The built-in A-v formulation: `{a}`, `{grad_phi}` and `{d a}`.
    pub fn mag_dyn_a() -> Self {
        let f = |derivative, name: &str| FieldRef { derivative, name: name.into() };
        Self {
            name: "MagDyn_a".into(),
            fields: vec![(f(false, "a"), Kind::Vector), (f(false, "grad_phi"), Kind::Vector), (f(true, "a"), Kind::Vector)],
        }
    }

    fn kind_of(&self, r: &FieldRef) -> Option<Kind> {
        self.fields.iter().find(|(f, _)| f == r).map(|(_, k)| *k)
    }

    fn listing(&self) -> String {
        self.fields.iter().map(|(f, _)| f.to_string()).collect::<Vec<_>>().join(", ")
    }
}

impl Default for Formulation {
    fn default() -> Self {
        Self::mag_dyn_a()
    }
}

/// Kinds of common field names that are not primary variables, so that kind
/// errors can still be reported for them.
fn conventional_kind(r: &FieldRef) -> Option<Kind> {
    if r.derivative {
        return Some(Kind::Vector);
    }
    match r.name.as_str() {
        "v" | "phi" | "ur" | "u" => Some(Kind::Scalar),
        "a" | "b" | "h" | "e" | "j" | "js" | "grad_phi" | "grad_v" => Some(Kind::Vector),
        _ => None,
    }
}

const MATERIALS: [&str; 3] = ["sigma", "nu", "mu"];

/// Region names that refer to conductor elements only.
pub(crate) fn is_conductive_region(name: &str) -> bool {
    name == "Omega_c" || conductor_index(name).is_some()
}

/// Zero-based conductor index of an `Omega_c_<k>` name.
pub(crate) fn conductor_index(name: &str) -> Option<usize> {
    let k: usize = name.strip_prefix("Omega_c_")?.parse().ok()?;
    if k >= 1 && !name.strip_prefix("Omega_c_")?.starts_with('0') {
        Some(k - 1)
    } else {
        None
    }
}

fn is_boundary_region(name: &str) -> bool {
    name == OUTER_BOUNDARY_GROUP || name.starts_with("Gamma")
}

/// Whether `name` denotes a set of elements in a mesh with the given groups.
fn region_exists(name: &str, groups: &BTreeSet<String>) -> bool {
    if is_boundary_region(name) {
        return false;
    }
    if groups.contains(name) {
        return true;
    }
    let any_conductor = groups.iter().any(|g| conductor_index(g).is_some());
    match name {
        "Omega" => any_conductor || groups.contains(INSULATOR_GROUP),
        "Omega_c" => any_conductor,
        _ => false,
    }
}

struct Checker<'a> {
    groups: &'a BTreeSet<String>,
    formulation: &'a Formulation,
    out: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn error(&mut self, layer: DslLayer, code: &str, span: Span, msg: impl Into<String>) {
        self.out.push(Diagnostic::new(layer, Severity::Error, code, span, msg));
    }

    fn region(&mut self, name: &str, span: Span) {
        if is_boundary_region(name) {
            self.error(
                DslLayer::DslSemantics,
                "boundary-region",
                span,
                format!("region '{name}' is a boundary and holds no elements"),
            );
        } else if !region_exists(name, self.groups) {
            let mut d = Diagnostic::new(
                DslLayer::DslSemantics,
                Severity::Error,
                "unknown-region",
                span,
                format!("unknown region '{name}'"),
            );
            let known: Vec<&str> = self.groups.iter().map(String::as_str).filter(|g| !is_boundary_region(g)).collect();
            d.hint = Some(format!("the mesh defines Omega, Omega_c, {}", known.join(", ")));
            self.out.push(d);
        }
    }

    fn kind_error(&mut self, span: Span, msg: String) {
        self.error(DslLayer::PhysicsSyntax, "kind", span, msg);
    }

    fn expr(&mut self, e: &Expr) -> Option<Kind> {
        match e {
            Expr::Num(..) => Some(Kind::Scalar),
            Expr::Field(r, s) => match self.formulation.kind_of(r) {
                Some(k) => Some(k),
                None => {
                    let msg = format!(
                        "field {r} does not correspond to a primary variable of formulation {}",
                        self.formulation.name
                    );
                    let mut d = Diagnostic::new(DslLayer::DslSemantics, Severity::Error, "non-primary-field", *s, msg);
                    d.hint = Some(format!("available fields: {}", self.formulation.listing()));
                    self.out.push(d);
                    conventional_kind(r)
                }
            },
            Expr::Coef(n, s) => {
                if !MATERIALS.contains(&n.as_str()) {
                    self.error(
                        DslLayer::DslSemantics,
                        "unknown-function",
                        *s,
                        format!("unknown material function '{n}[]'; expected sigma[], nu[] or mu[]"),
                    );
                    return None;
                }
                Some(Kind::Scalar)
            }
            Expr::Call(n, args, s) => {
                let kinds: Vec<Option<Kind>> = args.iter().map(|a| self.expr(a)).collect();
                let arity_ok = args.len() == 1;
                let known = matches!(
                    n.as_str(),
                    "Dt" | "Norm" | "SquNorm" | "Re" | "Im" | "Conj" | "CompX" | "CompY" | "CompZ"
                );
                if !known {
                    self.error(DslLayer::DslSemantics, "unknown-function", *s, format!("unknown function '{n}'"));
                    return None;
                }
                if !arity_ok {
                    self.error(
                        DslLayer::DslSemantics,
                        "arity",
                        *s,
                        format!("'{n}' takes one argument, got {}", args.len()),
                    );
                    return None;
                }
                let k = kinds[0];
                match n.as_str() {
                    "Dt" => {
                        if !matches!(args[0], Expr::Field(..)) {
                            self.error(
                                DslLayer::DslSemantics,
                                "dt-argument",
                                *s,
                                format!("Dt[] applies only to field references, not '{}'", expr_to_string(&args[0])),
                            );
                        }
                        k
                    }
                    "Norm" | "SquNorm" => Some(Kind::Scalar),
                    "CompX" | "CompY" | "CompZ" => {
                        if k == Some(Kind::Scalar) {
                            self.kind_error(*s, format!("component '{n}' of a scalar"));
                        }
                        Some(Kind::Scalar)
                    }
                    _ => k,
                }
            }
            Expr::Neg(x, _) => self.expr(x),
            Expr::Bin(op, l, r, s) => {
                let (kl, kr) = (self.expr(l), self.expr(r));
                let (Some(kl), Some(kr)) = (kl, kr) else { return None };
                match op {
                    BinOp::Add | BinOp::Sub => {
                        if kl != kr {
                            let word = if *op == BinOp::Add { "plus" } else { "minus" };
                            self.kind_error(*s, format!("{} {word} {}", kl.name(), kr.name()));
                            return None;
                        }
                        Some(kl)
                    }
                    BinOp::Mul => {
                        if kl == Kind::Vector && kr == Kind::Vector {
                            self.kind_error(*s, "product of two vectors".into());
                            return None;
                        }
                        Some(if kl == Kind::Vector || kr == Kind::Vector { Kind::Vector } else { Kind::Scalar })
                    }
                    BinOp::Div => {
                        if kr == Kind::Vector {
                            self.kind_error(*s, "division by a vector".into());
                            return None;
                        }
                        Some(kl)
                    }
                    BinOp::Pow => {
                        if kl == Kind::Vector {
                            self.kind_error(*s, "vector raised to a power".into());
                            return None;
                        }
                        if kr == Kind::Vector {
                            self.kind_error(*s, "vector used as an exponent".into());
                            return None;
                        }
                        Some(Kind::Scalar)
                    }
                }
            }
        }
    }
}

fn uses_coef(e: &Expr, name: &str) -> bool {
    let mut found = false;
    e.walk(&mut |x| {
        if matches!(x, Expr::Coef(n, _) if n == name) {
            found = true;
        }
    });
    found
}

/// Kind of an expression, ignoring diagnostics.
pub(crate) fn static_kind(e: &Expr, formulation: &Formulation) -> Option<Kind> {
    let groups = BTreeSet::new();
    let mut c = Checker { groups: &groups, formulation, out: Vec::new() };
    c.expr(e)
}

/// Whether a File path stays inside the session directory.
pub(crate) fn path_is_confined(path: &str) -> bool {
    crate::export::confined_join(std::path::Path::new(""), path).is_ok()
}

/// Checks names, references, regions, field availability and kinds. An
/// empty result means the program can be evaluated.
pub fn validate_post(program: &PostProgram, mesh_groups: &BTreeSet<String>, formulation: &Formulation) -> Vec<Diagnostic> {
    let mut c = Checker { groups: mesh_groups, formulation, out: Vec::new() };
    let mut seen = HashSet::new();
    for pp in &program.post_processings {
        if !seen.insert(pp.name.as_str()) {
            c.error(DslLayer::DslSemantics, "duplicate-name", pp.span, format!("duplicate PostProcessing '{}'", pp.name));
        }
        if pp.formulation_ref != formulation.name {
            c.error(
                DslLayer::DslSemantics,
                "unknown-formulation",
                pp.span,
                format!("unknown formulation '{}'; expected {}", pp.formulation_ref, formulation.name),
            );
        }
        let mut qnames = HashSet::new();
        for q in &pp.quantities {
            if !qnames.insert(q.name.as_str()) {
                c.error(DslLayer::DslSemantics, "duplicate-name", q.span, format!("duplicate PostQuantity '{}'", q.name));
            }
            if q.jacobian != "Vol" {
                c.error(
                    DslLayer::DslSemantics,
                    "jacobian",
                    q.span,
                    format!("unsupported Jacobian '{}'; only Vol is available", q.jacobian),
                );
            }
            for r in &q.regions {
                c.region(r, q.span);
            }
            c.expr(&q.expr);
            if uses_coef(&q.expr, "sigma") {
                if let Some(r) = q.regions.iter().find(|r| !is_conductive_region(r)) {
                    c.error(
                        DslLayer::DslSemantics,
                        "material-scope",
                        q.expr.span(),
                        format!("sigma[] is only defined in conductors but quantity '{}' is evaluated in '{r}'", q.name),
                    );
                }
            }
        }
    }
    let mut seen = HashSet::new();
    for po in &program.post_operations {
        if !seen.insert(po.name.as_str()) {
            c.error(DslLayer::DslSemantics, "duplicate-name", po.span, format!("duplicate PostOperation '{}'", po.name));
        }
        let target = program.post_processings.iter().find(|pp| pp.name == po.processing_ref);
        if target.is_none() {
            c.error(
                DslLayer::DslSemantics,
                "unresolved-reference",
                po.span,
                format!("PostOperation '{}' refers to unknown PostProcessing '{}'", po.name, po.processing_ref),
            );
        }
        for p in &po.prints {
            if let Some(pp) = target {
                if !pp.quantities.iter().any(|q| q.name == p.quantity) {
                    c.error(
                        DslLayer::DslSemantics,
                        "undeclared-quantity",
                        p.span,
                        format!("quantity '{}' is not declared in PostProcessing '{}'", p.quantity, pp.name),
                    );
                }
            }
            match &p.on_elements_of {
                Some(r) => c.region(r, p.span),
                None => c.error(DslLayer::DslSemantics, "print-target", p.span, "Print needs 'OnElementsOf <region>'"),
            }
            match &p.file {
                Some(f) if path_is_confined(f) => {}
                Some(f) => c.error(
                    DslLayer::DslSemantics,
                    "unsafe-path",
                    p.span,
                    format!("output path \"{f}\" must be a relative path inside the session directory"),
                ),
                None => c.error(DslLayer::DslSemantics, "print-file", p.span, "Print needs 'File \"...\"'"),
            }
            if let Some(fmt) = &p.format {
                if fmt != "Gmsh" {
                    c.error(
                        DslLayer::DslSemantics,
                        "unsupported-format",
                        p.span,
                        format!("unsupported format '{fmt}'; only Gmsh is accepted"),
                    );
                }
            }
        }
    }
    c.out
}

/// SI dimension exponents (kg, m, s, A).
type Dim = [i32; 4];

const DIMLESS: Dim = [0, 0, 0, 0];

fn field_dim(r: &FieldRef) -> Option<Dim> {
    let base = match r.name.as_str() {
        "a" => [1, 1, -2, -1],
        "grad_phi" | "grad_v" | "e" => [1, 1, -3, -1],
        "b" => [1, 0, -2, -1],
        "h" => [0, -1, 0, 1],
        "j" | "js" => [0, -2, 0, 1],
        "v" | "phi" | "u" | "ur" => [1, 2, -3, -1],
        _ => return None,
    };
    if r.derivative {
        // curl or gradient divides by a length
        Some([base[0], base[1] - 1, base[2], base[3]])
    } else {
        Some(base)
    }
}

fn dim_name(d: Dim) -> String {
    const NAMED: [(Dim, &str); 12] = [
        ([0, 0, 0, 0], "dimensionless"),
        ([1, 1, -2, -1], "Wb/m"),
        ([1, 1, -3, -1], "V/m"),
        ([1, 0, -2, -1], "T"),
        ([0, -1, 0, 1], "A/m"),
        ([0, -2, 0, 1], "A/m^2"),
        ([1, 2, -3, -1], "V"),
        ([-1, -3, 3, 2], "S/m"),
        ([-1, -1, 2, 2], "m/H"),
        ([1, 1, -2, -2], "H/m"),
        ([1, -1, -3, 0], "W/m^3"),
        ([1, -1, -2, 0], "J/m^3"),
    ];
    if let Some((_, n)) = NAMED.iter().find(|(k, _)| *k == d) {
        return n.to_string();
    }
    let parts: Vec<String> = ["kg", "m", "s", "A"]
        .iter()
        .zip(d)
        .filter(|(_, e)| *e != 0)
        .map(|(u, e)| if e == 1 { u.to_string() } else { format!("{u}^{e}") })
        .collect();
    parts.join(" ")
}

fn add_dim(a: Dim, b: Dim, sign: i32) -> Dim {
    [a[0] + sign * b[0], a[1] + sign * b[1], a[2] + sign * b[2], a[3] + sign * b[3]]
}

fn dims(e: &Expr, out: &mut Vec<Diagnostic>) -> Option<Dim> {
    match e {
        Expr::Num(..) => Some(DIMLESS),
        Expr::Field(r, _) => field_dim(r),
        Expr::Coef(n, _) => match n.as_str() {
            "sigma" => Some([-1, -3, 3, 2]),
            "nu" => Some([-1, -1, 2, 2]),
            "mu" => Some([1, 1, -2, -2]),
            _ => None,
        },
        Expr::Call(n, args, _) => {
            let inner: Vec<Option<Dim>> = args.iter().map(|a| dims(a, out)).collect();
            let d = (*inner.first()?)?;
            match n.as_str() {
                "Dt" => Some(add_dim(d, [0, 0, 1, 0], -1)),
                "SquNorm" => Some(add_dim(d, d, 1)),
                _ => Some(d),
            }
        }
        Expr::Neg(x, _) => dims(x, out),
        Expr::Bin(op, l, r, s) => {
            let (dl, dr) = (dims(l, out), dims(r, out));
            match op {
                BinOp::Add | BinOp::Sub => {
                    let (dl, dr) = (dl?, dr?);
                    if dl != dr {
                        out.push(Diagnostic::new(
                            DslLayer::PhysicsSemantics,
                            Severity::Warning,
                            "units",
                            *s,
                            format!(
                                "'{}' combines quantities with different units ({} and {})",
                                expr_to_string(e),
                                dim_name(dl),
                                dim_name(dr)
                            ),
                        ));
                        return None;
                    }
                    Some(dl)
                }
                BinOp::Mul => Some(add_dim(dl?, dr?, 1)),
                BinOp::Div => Some(add_dim(dl?, dr?, -1)),
                BinOp::Pow => {
                    let dl = dl?;
                    if dl == DIMLESS {
                        return Some(DIMLESS);
                    }
                    match **r {
                        Expr::Num(v, _) if v.fract() == 0.0 && v.abs() <= 16.0 => {
                            let n = v as i32;
                            Some([dl[0] * n, dl[1] * n, dl[2] * n, dl[3] * n])
                        }
                        _ => None,
                    }
                }
            }
        }
    }
}

/// Flattened product `coef * Π num / Π den`.
struct Product<'a> {
    coef: f64,
    num: Vec<&'a Expr>,
    den: Vec<&'a Expr>,
}

fn product(e: &Expr) -> Product<'_> {
    match e {
        Expr::Num(v, _) => Product { coef: *v, num: vec![], den: vec![] },
        Expr::Neg(x, _) => {
            let mut p = product(x);
            p.coef = -p.coef;
            p
        }
        Expr::Bin(BinOp::Mul, l, r, _) => {
            let (mut a, b) = (product(l), product(r));
            a.coef *= b.coef;
            a.num.extend(b.num);
            a.den.extend(b.den);
            a
        }
        Expr::Bin(BinOp::Div, l, r, _) => {
            let (mut a, b) = (product(l), product(r));
            a.coef /= b.coef;
            a.num.extend(b.den);
            a.den.extend(b.num);
            a
        }
        other => Product { coef: 1.0, num: vec![other], den: vec![] },
    }
}

/// The argument `X` of a squared norm `Norm[X]^2` or `SquNorm[X]`.
fn squared_norm_arg(e: &Expr) -> Option<&Expr> {
    match e {
        Expr::Bin(BinOp::Pow, base, exp, _) => match (&**base, &**exp) {
            (Expr::Call(n, args, _), Expr::Num(p, _)) if n == "Norm" && *p == 2.0 && args.len() == 1 => Some(&args[0]),
            _ => None,
        },
        Expr::Call(n, args, _) if n == "SquNorm" && args.len() == 1 => Some(&args[0]),
        _ => None,
    }
}

fn strip_neg(e: &Expr) -> &Expr {
    match e {
        Expr::Neg(x, _) => strip_neg(x),
        other => other,
    }
}

fn is_field(e: &Expr, derivative: bool, name: &str) -> bool {
    matches!(e, Expr::Field(f, _) if f.derivative == derivative && f.name == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Atom {
    DtA,
    A,
    GradPhi,
    Other,
}

/// Value of a purely numeric expression.
fn constant(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v, _) => Some(*v),
        Expr::Neg(x, _) => Some(-constant(x)?),
        Expr::Bin(BinOp::Mul, l, r, _) => Some(constant(l)? * constant(r)?),
        Expr::Bin(BinOp::Div, l, r, _) => Some(constant(l)? / constant(r)?),
        _ => None,
    }
}

/// Linear decomposition of an electric-field expression into signed atoms.
fn linear_terms(e: &Expr, scale: f64, out: &mut Vec<(f64, Atom)>) {
    match e {
        Expr::Neg(x, _) => linear_terms(x, -scale, out),
        Expr::Bin(BinOp::Add, l, r, _) => {
            linear_terms(l, scale, out);
            linear_terms(r, scale, out);
        }
        Expr::Bin(BinOp::Sub, l, r, _) => {
            linear_terms(l, scale, out);
            linear_terms(r, -scale, out);
        }
        Expr::Bin(BinOp::Mul, l, r, _) if constant(l).is_some() => linear_terms(r, scale * constant(l).unwrap(), out),
        Expr::Bin(BinOp::Mul, l, r, _) if constant(r).is_some() => linear_terms(l, scale * constant(r).unwrap(), out),
        Expr::Bin(BinOp::Div, l, r, _) if constant(r).is_some() => linear_terms(l, scale / constant(r).unwrap(), out),
        Expr::Call(n, args, _) if n == "Dt" && args.len() == 1 && is_field(&args[0], false, "a") => {
            out.push((scale, Atom::DtA))
        }
        _ if is_field(e, false, "a") => out.push((scale, Atom::A)),
        _ if is_field(e, false, "grad_phi") => out.push((scale, Atom::GradPhi)),
        _ => out.push((scale, Atom::Other)),
    }
}

fn format_factor(c: f64) -> String {
    let r = (c * 1e12).round() / 1e12;
    format!("{r}")
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

/// Pattern checks for the energy and loss density formulas and for unit
/// consistency. All findings are warnings in the physics-semantics layer.
pub fn physics_lint(program: &PostProgram) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for pp in &program.post_processings {
        for q in &pp.quantities {
            let warn = |code: &str, msg: String| {
                Diagnostic::new(DslLayer::PhysicsSemantics, Severity::Warning, code, q.expr.span(), msg)
            };
            dims(&q.expr, &mut out);
            let p = product(&q.expr);
            let has = |name: &str| p.num.iter().any(|f| matches!(f, Expr::Coef(n, _) if n == name));
            let has_den = |name: &str| p.den.iter().any(|f| matches!(f, Expr::Coef(n, _) if n == name));
            let squares: Vec<&Expr> = p.num.iter().filter_map(|f| squared_norm_arg(f)).collect();
            let [x] = squares[..] else { continue };
            if p.num.len() + p.den.len() != 2 {
                continue;
            }
            if (has("nu") || has_den("mu")) && is_field(strip_neg(x), true, "a") {
                if !close(p.coef, 0.25) {
                    out.push(warn(
                        "energy-factor",
                        format!(
                            "magnetic energy density of '{}' uses factor {} vs. 0.25 for time-averaged peak phasors",
                            q.name,
                            format_factor(p.coef)
                        ),
                    ));
                }
            } else if has("sigma") {
                let mut terms = Vec::new();
                linear_terms(x, 1.0, &mut terms);
                let electric = terms.iter().any(|(_, a)| matches!(a, Atom::DtA | Atom::A | Atom::GradPhi));
                if !electric {
                    continue;
                }
                if !close(p.coef, 0.5) {
                    out.push(warn(
                        "loss-factor",
                        format!(
                            "ohmic loss density of '{}' uses factor {} vs. 0.5 for time-averaged peak phasors",
                            q.name,
                            format_factor(p.coef)
                        ),
                    ));
                }
                if let Some(msg) = e_form_problem(&terms) {
                    out.push(warn("e-form", format!("{msg} in '{}'; expected -Dt[{{a}}] - {{grad_phi}}", q.name)));
                }
            }
        }
    }
    out
}

fn e_form_problem(terms: &[(f64, Atom)]) -> Option<String> {
    let sum = |atom: Atom| terms.iter().filter(|(_, a)| *a == atom).map(|(c, _)| c).sum::<f64>();
    let count = |atom: Atom| terms.iter().filter(|(_, a)| *a == atom).count();
    if count(Atom::Other) > 0 {
        return Some("electric field expression contains unexpected terms".into());
    }
    if count(Atom::A) > 0 {
        return Some("electric field uses {a} instead of Dt[{a}]".into());
    }
    let (dt, gp) = (sum(Atom::DtA), sum(Atom::GradPhi));
    if count(Atom::GradPhi) == 0 || gp == 0.0 {
        return Some("incomplete electric field expression: {grad_phi} is missing".into());
    }
    if count(Atom::DtA) == 0 || dt == 0.0 {
        return Some("incomplete electric field expression: Dt[{a}] is missing".into());
    }
    if dt.signum() != gp.signum() {
        return Some("electric field terms have inconsistent signs".into());
    }
    if !close(dt.abs(), 1.0) || !close(gp.abs(), 1.0) {
        return Some("electric field terms are scaled".into());
    }
    None
}
