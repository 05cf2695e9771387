//! Region membership on a barycentric grid, as CSV and SVG.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::baseline::WilksRegion;
use crate::error::{MvcError, Result};
use crate::multinomial::{exact_p_value, outcome_count, Compositions, CountVector, OutcomeTable, SimplexPoint};
use crate::oracle::GRID_NODE_BUDGET;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMethod {
    /// Exact p-value at least `α`.
    Mvc,
    /// Wilks likelihood-ratio region.
    Chisq,
}

impl FromStr for GridMethod {
    type Err = MvcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mvc" => Ok(GridMethod::Mvc),
            "chisq" | "wilks" => Ok(GridMethod::Chisq),
            other => Err(MvcError::InvalidDimension(format!("unknown grid method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub p: Vec<f64>,
    pub in_a: bool,
    pub in_b: bool,
}

/// Grid with `resolution` points per axis: all `c / (R − 1)` with `Σ c = R − 1`.
/// A resolution of 1 yields the single centroid.
pub fn grid_points(k: usize, resolution: u32) -> Result<Vec<SimplexPoint>> {
    if resolution == 0 {
        return Err(MvcError::InvalidDimension("grid resolution must be positive".into()));
    }
    if k < 2 {
        return Err(MvcError::InvalidDimension(format!("need at least 2 categories, got {k}")));
    }
    if resolution == 1 {
        return Ok(vec![SimplexPoint::from_raw(vec![1.0 / k as f64; k])]);
    }
    let steps = resolution - 1;
    let nodes = outcome_count(steps, k).unwrap_or(u128::MAX);
    if nodes > GRID_NODE_BUDGET {
        return Err(MvcError::BudgetExceeded {
            what: "membership grid",
            required: nodes,
            budget: GRID_NODE_BUDGET,
        });
    }
    let denom = f64::from(steps);
    Ok(Compositions::new(steps, k)
        .map(|c| SimplexPoint::from_raw(c.iter().map(|&x| f64::from(x) / denom).collect()))
        .collect())
}

pub fn grid_rows(
    r_a: &CountVector,
    r_b: &CountVector,
    alpha: f64,
    resolution: u32,
    method: GridMethod,
) -> Result<Vec<GridRow>> {
    if r_a.k() != r_b.k() {
        return Err(MvcError::DimensionMismatch {
            expected: r_a.k(),
            got: r_b.k(),
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MvcError::InvalidTolerance(format!("alpha = {alpha} is outside (0, 1)")));
    }
    let points = grid_points(r_a.k(), resolution)?;
    match method {
        GridMethod::Mvc => {
            let ta = OutcomeTable::new(r_a.n(), r_a.k())?;
            let tb = if r_b.n() == r_a.n() {
                None
            } else {
                Some(OutcomeTable::new(r_b.n(), r_b.k())?)
            };
            let tb = tb.as_ref().unwrap_or(&ta);
            points
                .into_par_iter()
                .map(|p| {
                    let in_a = exact_p_value(r_a, &p, &ta)? >= alpha;
                    let in_b = exact_p_value(r_b, &p, tb)? >= alpha;
                    Ok(GridRow {
                        p: p.into_inner(),
                        in_a,
                        in_b,
                    })
                })
                .collect()
        }
        GridMethod::Chisq => {
            let wa = WilksRegion::new(r_a.clone(), alpha)?;
            let wb = WilksRegion::new(r_b.clone(), alpha)?;
            Ok(points
                .into_par_iter()
                .map(|p| GridRow {
                    in_a: wa.contains(&p),
                    in_b: wb.contains(&p),
                    p: p.into_inner(),
                })
                .collect())
        }
    }
}

/// CSV with header `p1,…,pk,in_A,in_B`; probabilities with 12 decimals.
pub fn rows_to_csv(rows: &[GridRow], k: usize) -> String {
    let mut out = String::new();
    for i in 1..=k {
        let _ = write!(out, "p{i},");
    }
    out.push_str("in_A,in_B\n");
    for row in rows {
        for p in &row.p {
            let _ = write!(out, "{p:.12},");
        }
        let _ = writeln!(out, "{},{}", u8::from(row.in_a), u8::from(row.in_b));
    }
    out
}

/// Static SVG ternary plot for `k = 3` grids.
pub fn rows_to_svg(rows: &[GridRow], title: &str) -> Result<String> {
    if rows.iter().any(|r| r.p.len() != 3) {
        return Err(MvcError::InvalidDimension("ternary plots need k = 3".into()));
    }
    const SIZE: f64 = 600.0;
    const MARGIN: f64 = 40.0;
    let side = SIZE - 2.0 * MARGIN;
    let height = side * 3f64.sqrt() / 2.0;
    // Vertex i of the triangle corresponds to p = e_i.
    let corners = [
        (MARGIN, MARGIN + height),
        (MARGIN + side, MARGIN + height),
        (MARGIN + side / 2.0, MARGIN),
    ];
    let project = |p: &[f64]| {
        let x = p[0] * corners[0].0 + p[1] * corners[1].0 + p[2] * corners[2].0;
        let y = p[0] * corners[0].1 + p[1] * corners[1].1 + p[2] * corners[2].1;
        (x, y)
    };
    let steps = (rows.len() as f64 * 2.0).sqrt().max(1.0);
    let radius = (side / steps * 0.45).clamp(0.5, 6.0);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{}" viewBox="0 0 {SIZE} {}">"#,
        SIZE,
        SIZE
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for row in rows {
        let fill = match (row.in_a, row.in_b) {
            (true, true) => "#7b3294",
            (true, false) => "#e66101",
            (false, true) => "#5e9bd1",
            (false, false) => continue,
        };
        let (x, y) = project(&row.p);
        let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{radius:.2}" fill="{fill}"/>"#);
    }
    let _ = writeln!(
        svg,
        r##"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="none" stroke="#000000" stroke-width="1.5"/>"##,
        corners[0].0, corners[0].1, corners[1].0, corners[1].1, corners[2].0, corners[2].1
    );
    for (i, (x, y)) in corners.iter().enumerate() {
        let dy = if i == 2 { -10.0 } else { 20.0 };
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle">p{}</text>"#,
            y + dy,
            i + 1
        );
    }
    let legend = [("#e66101", "A only"), ("#5e9bd1", "B only"), ("#7b3294", "A and B")];
    for (i, (color, label)) in legend.iter().enumerate() {
        let y = 20.0 + 18.0 * i as f64;
        let _ = writeln!(svg, r#"<rect x="10" y="{:.1}" width="12" height="12" fill="{color}"/>"#, y - 10.0);
        let _ = writeln!(
            svg,
            r#"<text x="28" y="{y:.1}" font-family="sans-serif" font-size="12">{label}</text>"#
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
