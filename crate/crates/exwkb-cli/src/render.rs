//! Output formatting. Every float goes out with 15 significant digits so that
//! identical runs produce identical bytes.

use std::cmp::Ordering;
use std::fmt::Write;

use exwkb::potential::cmp_complex;
use exwkb::stokes::{Endpoint, StokesGraph};
use exwkb::Complex64;
use serde_json::{json, Value};

/// `x` rounded to 15 significant digits.
pub fn sig15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// Fixed-width text form used in CSV.
pub fn num(x: f64) -> String {
    format!("{x:.14e}")
}

pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => n.as_f64().map_or(Value::Null, |x| json!(sig15(x))),
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn complex(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn by_position(a: &Complex64, b: &Complex64) -> Ordering {
    cmp_complex(*a, *b)
}

fn sorted_lines(g: &StokesGraph) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..g.lines.len()).collect();
    idx.sort_by(|&a, &b| {
        let (la, lb) = (&g.lines[a], &g.lines[b]);
        by_position(&la.origin, &lb.origin).then_with(|| {
            let dir = |l: &exwkb::stokes::StokesLine| l.points.get(1).map_or(0.0, |p| (p - l.origin).arg());
            dir(la).total_cmp(&dir(lb))
        })
    });
    idx
}

fn endpoint_json(e: &Endpoint) -> Value {
    match e {
        Endpoint::Pole { z, order } => json!({"pole": complex(*z), "order": order}),
        Endpoint::Infinity { lo, hi } => json!({"infinity": [lo, hi]}),
    }
}

pub fn graph_json(g: &StokesGraph) -> Value {
    let mut tps = g.turning_points.clone();
    tps.sort_by(by_position);
    let mut poles = g.poles.clone();
    poles.sort_by(by_position);
    let mut sectors: Vec<_> = g.sectors.iter().collect();
    sectors.sort_by_key(|s| s.label);
    json!({
        "energy": complex(g.q.energy),
        "hbar": g.q.hbar,
        "turning_points": tps.into_iter().map(complex).collect::<Vec<_>>(),
        "poles": poles.into_iter().map(complex).collect::<Vec<_>>(),
        "stokes_lines": sorted_lines(g).into_iter().map(|i| {
            let l = &g.lines[i];
            json!({"origin": complex(l.origin), "points": l.points.len(), "max_re_w": l.max_re_w})
        }).collect::<Vec<_>>(),
        "sectors": sectors.into_iter().map(|s| json!({
            "label": s.label.to_string(),
            "sigma": s.sigma,
            "endpoint": endpoint_json(&s.endpoint),
            "representative": complex(s.representative),
        })).collect::<Vec<_>>(),
    })
}

/// Rows `kind,index,re,im,label`: turning points, poles, every sample of every
/// Stokes line, and one representative point per sector.
pub fn graph_csv(g: &StokesGraph) -> String {
    let mut out = String::from("kind,index,re,im,label\n");
    let mut tps = g.turning_points.clone();
    tps.sort_by(by_position);
    for (i, z) in tps.iter().enumerate() {
        let _ = writeln!(out, "turning_point,{i},{},{},", num(z.re), num(z.im));
    }
    let mut poles = g.poles.clone();
    poles.sort_by(by_position);
    for (i, z) in poles.iter().enumerate() {
        let _ = writeln!(out, "pole,{i},{},{},", num(z.re), num(z.im));
    }
    for (k, i) in sorted_lines(g).into_iter().enumerate() {
        for z in &g.lines[i].points {
            let _ = writeln!(out, "stokes_line,{k},{},{},", num(z.re), num(z.im));
        }
    }
    let mut sectors: Vec<_> = g.sectors.iter().collect();
    sectors.sort_by_key(|s| s.label);
    for (i, s) in sectors.iter().enumerate() {
        let z = s.representative;
        let sign = if s.sigma > 0 { '+' } else { '-' };
        let _ = writeln!(out, "sector,{i},{},{},S{}({sign})", num(z.re), num(z.im), s.label);
    }
    out
}

const SIZE: f64 = 600.0;

pub fn graph_svg(g: &StokesGraph) -> String {
    let extent = g.turning_points.iter().chain(&g.poles).map(|z| z.re.abs().max(z.im.abs())).fold(1.0, f64::max) * 2.0;
    let scale = SIZE / (2.0 * extent);
    let px = |z: Complex64| ((z.re + extent) * scale, (extent - z.im) * scale);
    let inside = |z: &Complex64| z.re.abs() <= extent && z.im.abs() <= extent;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let (o0, o1) = px(Complex64::new(0.0, 0.0));
    let _ = writeln!(s, r##"<line x1="0" y1="{o1:.3}" x2="{SIZE}" y2="{o1:.3}" stroke="#cccccc"/>"##);
    let _ = writeln!(s, r##"<line x1="{o0:.3}" y1="0" x2="{o0:.3}" y2="{SIZE}" stroke="#cccccc"/>"##);

    for i in sorted_lines(g) {
        // split the polyline where it leaves the frame
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for z in &g.lines[i].points {
            if inside(z) {
                runs.last_mut().unwrap().push(px(*z));
            } else if !runs.last().unwrap().is_empty() {
                runs.push(Vec::new());
            }
        }
        for run in runs.into_iter().filter(|r| r.len() > 1) {
            let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
            let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f4e99" stroke-width="1.5"/>"##, pts.join(" "));
        }
    }
    let mut tps = g.turning_points.clone();
    tps.sort_by(by_position);
    for z in tps {
        let (x, y) = px(z);
        let _ = writeln!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="#c0392b"/>"##);
    }
    let mut poles = g.poles.clone();
    poles.sort_by(by_position);
    for z in poles {
        let (x, y) = px(z);
        let _ = writeln!(s, r##"<path d="M{:.3},{:.3} l8,8 m0,-8 l-8,8" stroke="#000000" stroke-width="2"/>"##, x - 4.0, y - 4.0);
    }
    let mut sectors: Vec<_> = g.sectors.iter().collect();
    sectors.sort_by_key(|s| s.label);
    for sec in sectors {
        let z = sec.representative;
        let z = if inside(&z) { z } else { z / z.norm() * (0.85 * extent) };
        let (x, y) = px(z);
        let sign = if sec.sigma > 0 { '+' } else { '-' };
        let _ = writeln!(s, r#"<text x="{x:.3}" y="{y:.3}" font-family="sans-serif" font-size="14">S{} ({sign})</text>"#, sec.label);
    }
    s.push_str("</svg>\n");
    s
}
