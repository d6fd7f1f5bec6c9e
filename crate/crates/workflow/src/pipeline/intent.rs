//! Machine-checkable parts of a prompt's geometric intent.
//!
//! Only a few claims are checked: the conductor count, placement on a circle
//! (and its radius), placement on the coordinate axes, and `N x M` grids.
//! Any other shape word makes the result unverifiable.

use emsim_core::geometry::{centroid, Point2};
use serde::{Deserialize, Serialize};

use super::verdict::Finding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum IntentCheck {
    Verified,
    Mismatch(Vec<Finding>),
    Unverifiable(Vec<String>),
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

const ADJECTIVES: [&str; 8] = ["round", "circular", "copper", "parallel", "identical", "solid", "cylindrical", "equal"];

const UNCHECKED_SHAPES: [&str; 24] = [
    "square", "rectangle", "rectangular", "triangle", "triangular", "vertex", "vertices", "letter", "outline",
    "trapezoid", "slot", "curve", "sin", "sine", "sinus", "spiral", "hexagonal", "hexagon", "parametrization",
    "parabola", "bisector", "bisectors", "diagonal", "diagonals",
];

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || matches!(c, ',' | ';' | ':' | '(' | ')' | '"' | '\'' | '!' | '?'))
        .map(|w| w.trim_end_matches('.').to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

fn as_count(w: &str) -> Option<usize> {
    if w == "single" {
        return Some(1);
    }
    w.parse().ok().or_else(|| NUMBER_WORDS.iter().position(|x| *x == w))
}

fn count_claims(ws: &[String]) -> Vec<usize> {
    let mut out = Vec::new();
    for (k, w) in ws.iter().enumerate() {
        if w != "conductor" && w != "conductors" {
            continue;
        }
        let mut j = k;
        while j > 0 && ADJECTIVES.contains(&ws[j - 1].as_str()) {
            j -= 1;
        }
        if let Some(n) = j.checked_sub(1).and_then(|i| as_count(&ws[i])) {
            out.push(n);
        }
    }
    out
}

fn grid_claims(ws: &[String]) -> Vec<usize> {
    let mut out = Vec::new();
    for (k, w) in ws.iter().enumerate() {
        if let Some((a, b)) = w.split_once(['x', '×']) {
            if let (Ok(a), Ok(b)) = (a.parse::<usize>(), b.parse::<usize>()) {
                out.push(a * b);
                continue;
            }
        }
        if (w == "x" || w == "×") && k > 0 {
            if let (Ok(a), Some(Ok(b))) = (ws[k - 1].parse::<usize>(), ws.get(k + 1).map(|s| s.parse::<usize>())) {
                out.push(a * b);
            }
        }
    }
    out
}

fn sentences(text: &str) -> Vec<&str> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..b.len() {
        let end = matches!(b[i], b'!' | b'?' | b';')
            || (b[i] == b'.' && b.get(i + 1).is_none_or(|c| c.is_ascii_whitespace()));
        if end {
            out.push(&text[start..i]);
            start = i + 1;
        }
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

/// First number following `radius` in the text, in meters.
fn radius_after(text: &str) -> Option<f64> {
    let lower = text.to_lowercase();
    let at = lower.find("radius")? + "radius".len();
    let rest = &lower[at..];
    let start = rest.find(|c: char| c.is_ascii_digit())?;
    let tail = &rest[start..];
    let len = tail.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(tail.len());
    let value: f64 = tail[..len].trim_end_matches('.').parse().ok()?;
    let unit = tail[len..].trim_start();
    let scale = if unit.starts_with("mm") {
        1e-3
    } else if unit.starts_with("cm") {
        1e-2
    } else {
        1.0
    };
    Some(value * scale)
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1e-12)
}

/// Compares the prompt's checkable claims with the emitted centers.
pub fn check_intent(prompt: &str, points: &[Point2]) -> IntentCheck {
    let ws = words(prompt);
    let lower = prompt.to_lowercase();
    let n = points.len();
    let scale = points.iter().map(|p| p.x.abs().max(p.y.abs())).fold(0.0, f64::max).max(1e-3);
    let mut mismatches = Vec::new();
    let mut checked = 0;

    let counts = count_claims(&ws);
    for c in counts.iter().copied().chain(grid_claims(&ws)) {
        checked += 1;
        if c != n {
            mismatches.push(Finding::error("count", format!("the prompt asks for {c} conductors but the layout has {n}")));
        }
    }

    let circle_word = |w: &str| matches!(w, "circle" | "circular" | "ring");
    if ws.iter().any(|w| circle_word(w)) && n >= 2 {
        checked += 1;
        let c = centroid(points).expect("non-empty");
        let radii: Vec<f64> = points.iter().map(|p| p.dist(c)).collect();
        let mean = radii.iter().sum::<f64>() / n as f64;
        if radii.iter().any(|r| !close(*r, mean, mean)) {
            mismatches.push(Finding::error("not-on-circle", "the conductors are not equidistant from their centroid"));
        }
        for s in sentences(prompt) {
            let sl = s.to_lowercase();
            let Some(at) = ["circle", "circular", "ring"].iter().filter_map(|k| sl.find(k)).min() else { continue };
            if let Some(r) = radius_after(&s[at..]) {
                checked += 1;
                if !close(mean, r, r) {
                    mismatches.push(Finding::error(
                        "circle-radius",
                        format!("the prompt asks for a circle of radius {r} m but the layout radius is {mean} m"),
                    ));
                }
            }
        }
    }

    let on_x = lower.contains("x-axis") || lower.contains("x axis");
    let on_y = lower.contains("y-axis") || lower.contains("y axis");
    if on_x || on_y {
        checked += 1;
        let tol = 1e-12 * scale;
        let bad = points.iter().any(|p| {
            let x_ok = on_x && p.y.abs() <= tol;
            let y_ok = on_y && p.x.abs() <= tol;
            !(x_ok || y_ok)
        });
        if bad {
            let which = match (on_x, on_y) {
                (true, true) => "the coordinate axes",
                (true, false) => "the x-axis",
                _ => "the y-axis",
            };
            mismatches.push(Finding::error("off-axis", format!("not every conductor lies on {which}")));
        }
    }

    if !mismatches.is_empty() {
        return IntentCheck::Mismatch(mismatches);
    }
    let unchecked: Vec<&str> = UNCHECKED_SHAPES.iter().copied().filter(|s| ws.iter().any(|w| w == s)).collect();
    if !unchecked.is_empty() {
        return IntentCheck::Unverifiable(vec![format!(
            "the prompt describes geometry that is not machine-checked ({}); verify the layout visually",
            unchecked.join(", ")
        )]);
    }
    if checked == 0 {
        return IntentCheck::Unverifiable(vec![
            "the prompt makes no machine-checkable geometric claim; verify the layout visually".into(),
        ]);
    }
    IntentCheck::Verified
}
