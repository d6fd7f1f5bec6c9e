use std::fmt::Write;

use super::{BinOp, Expr, PostProgram, ValueWrapper};

/// Canonical source form. `parse_post(&pretty_print(p))` reproduces `p`.
pub fn pretty_print(program: &PostProgram) -> String {
    let mut s = String::new();
    if !program.post_processings.is_empty() {
        s.push_str("PostProcessing {\n");
        for pp in &program.post_processings {
            let _ = writeln!(s, "  {{ Name {}; NameOfFormulation {};", pp.name, pp.formulation_ref);
            s.push_str("    PostQuantity {\n");
            for q in &pp.quantities {
                let wrapper = match q.wrapper {
                    ValueWrapper::Local => "Local",
                    ValueWrapper::Term => "Term",
                };
                let _ = writeln!(s, "      {{ Name {};", q.name);
                let _ = writeln!(s, "        Value {{ {wrapper} {{ [ {} ];", expr_to_string(&q.expr));
                let _ = writeln!(s, "          In Region[{{{}}}]; Jacobian {}; }} }}", q.regions.join(", "), q.jacobian);
                s.push_str("      }\n");
            }
            s.push_str("    }\n  }\n");
        }
        s.push_str("}\n");
    }
    if !program.post_operations.is_empty() {
        if !s.is_empty() {
            s.push('\n');
        }
        s.push_str("PostOperation {\n");
        for po in &program.post_operations {
            let _ = writeln!(s, "  {{ Name {}; NameOfPostProcessing {};", po.name, po.processing_ref);
            s.push_str("    Operation {\n");
            for p in &po.prints {
                let mut parts = vec![p.quantity.clone()];
                if let Some(r) = &p.on_elements_of {
                    parts.push(format!("OnElementsOf {r}"));
                }
                if let Some(f) = &p.file {
                    parts.push(format!("File \"{f}\""));
                }
                if let Some(l) = &p.label {
                    parts.push(format!("Name \"{l}\""));
                }
                if let Some(f) = &p.format {
                    parts.push(format!("Format {f}"));
                }
                let _ = writeln!(s, "      Print[ {} ];", parts.join(", "));
            }
            s.push_str("    }\n  }\n");
        }
        s.push_str("}\n");
    }
    s
}

const NEG_PREC: u8 = 3;
const ATOM_PREC: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(op, ..) => op.precedence(),
        Expr::Neg(..) => NEG_PREC,
        _ => ATOM_PREC,
    }
}

pub(crate) fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn wrapped(s: &mut String, e: &Expr, parens: bool) {
    if parens {
        s.push('(');
        write_expr(s, e);
        s.push(')');
    } else {
        write_expr(s, e);
    }
}

fn write_expr(s: &mut String, e: &Expr) {
    match e {
        Expr::Num(v, _) => {
            let _ = write!(s, "{v:?}");
        }
        Expr::Field(f, _) => {
            let _ = write!(s, "{f}");
        }
        Expr::Coef(n, _) => {
            let _ = write!(s, "{n}[]");
        }
        Expr::Call(n, args, _) => {
            let _ = write!(s, "{n}[");
            for (k, a) in args.iter().enumerate() {
                if k > 0 {
                    s.push_str(", ");
                }
                write_expr(s, a);
            }
            s.push(']');
        }
        Expr::Neg(x, _) => {
            s.push('-');
            wrapped(s, x, prec(x) < NEG_PREC);
        }
        Expr::Bin(op, l, r, _) => {
            let p = op.precedence();
            if *op == BinOp::Pow {
                wrapped(s, l, prec(l) < ATOM_PREC);
                s.push('^');
                wrapped(s, r, prec(r) < NEG_PREC);
            } else {
                wrapped(s, l, prec(l) < p);
                let _ = write!(s, " {} ", op.symbol());
                wrapped(s, r, prec(r) <= p);
            }
        }
    }
}
