//! Deterministic SVG output. Every drawn datum carries its exact value in a
//! `data-*` attribute so plots can be checked without rasterizing.

use std::fmt::Write;

use bmdp_core::markov::TransitionMatrix;
use bmdp_core::mdp::MdpSolution;

const LIGHT: (f64, f64, f64) = (247.0, 251.0, 255.0);
const DARK: (f64, f64, f64) = (8.0, 48.0, 107.0);

/// Sequential blue ramp over `[0, 1]`.
fn ramp(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let c = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(LIGHT.0, DARK.0), c(LIGHT.1, DARK.1), c(LIGHT.2, DARK.2))
}

fn state_colour(alpha: usize, n: usize) -> String {
    let hue = 360.0 * alpha as f64 / n.max(1) as f64;
    format!("hsl({hue:.1},70%,45%)")
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(out, r#"<rect width="{w:.0}" height="{h:.0}" fill="white"/>"#);
}

/// Probability heatmap; row `α` (target) top to bottom, column `β` (source)
/// left to right. Zero entries are left blank.
pub fn matrix_heatmap(tm: &TransitionMatrix) -> String {
    let s = tm.n_states();
    let cell = (480.0 / s as f64).clamp(6.0, 40.0);
    let (left, top) = (60.0, 40.0);
    let grid = cell * s as f64;
    let bar_x = left + grid + 30.0;
    let (w, h) = (bar_x + 70.0, top + grid + 50.0);
    let mut out = String::new();
    header(&mut out, w, h);
    let _ = writeln!(
        out,
        r#"<text x="{left:.1}" y="20" font-size="13">Transition probabilities, {s} states ({:?}, {:?})</text>"#,
        tm.bins.spec.power_var, tm.bins.spec.mode
    );
    let _ = writeln!(out, r##"<rect x="{left:.1}" y="{top:.1}" width="{grid:.2}" height="{grid:.2}" fill="none" stroke="#999"/>"##);
    let _ = writeln!(out, r#"<g class="cells">"#);
    for a in 0..s {
        for b in 0..s {
            let v = tm.probs[(a, b)];
            if v == 0.0 {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{}" data-alpha="{a}" data-beta="{b}" data-value="{v}"/>"#,
                left + b as f64 * cell,
                top + a as f64 * cell,
                ramp(v)
            );
        }
    }
    let _ = writeln!(out, "</g>");
    let step = (s / 10).max(1);
    for k in (0..s).step_by(step) {
        let c = (k as f64 + 0.5) * cell;
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{k}</text>"#, left + c, top + grid + 14.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{k}</text>"#, left - 4.0, top + c + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">from state β</text>"#, left + grid / 2.0, top + grid + 32.0);
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">to state α</text>"#,
        top + grid / 2.0,
        top + grid / 2.0
    );
    // Colour bar, 1 at the top.
    let n_bar = 20;
    let seg = grid / n_bar as f64;
    let _ = writeln!(out, r#"<g class="colorbar">"#);
    for k in 0..n_bar {
        let v = 1.0 - (k as f64 + 0.5) / n_bar as f64;
        let _ = writeln!(out, r#"<rect x="{bar_x:.2}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#, top + k as f64 * seg, seg + 0.5, ramp(v));
    }
    for (v, y) in [(1.0, top), (0.5, top + grid / 2.0), (0.0, top + grid)] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{v:.1}</text>"#, bar_x + 18.0, y + 4.0);
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}

/// Per-state contributions `ρ_t^α·p^α` with the expected power `p_t` on top.
pub fn power_trajectory(sol: &MdpSolution) -> String {
    let n_t = sol.rho.len();
    let s = sol.n_states;
    let (left, top, pw, ph): (f64, f64, f64, f64) = (60.0, 40.0, 640.0, 300.0);
    let shown: Vec<usize> = (0..s)
        .filter(|&a| sol.p_alpha[a] > 0.0 && sol.rho.iter().any(|r| r[a] > 0.0))
        .collect();
    let legend_h = 16.0 * (shown.len() + 1) as f64;
    let (w, h) = (left + pw + 170.0, (top + ph + 50.0).max(top + legend_h + 20.0));
    let y_max = sol.p_t.iter().cloned().fold(0.0, f64::max).max(1e-9) * 1.05;
    let x = |t: usize| left + pw * t as f64 / (n_t.max(2) - 1) as f64;
    let y = |v: f64| top + ph * (1.0 - v / y_max);
    let mut out = String::new();
    header(&mut out, w, h);
    let _ = writeln!(out, r#"<text x="{left:.1}" y="20" font-size="13">Expected power by state, {} steps</text>"#, n_t - 1);
    let _ = writeln!(out, r##"<rect x="{left:.1}" y="{top:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#999"/>"##);
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{v:.2}</text>"#, left - 4.0, y(v) + 4.0);
    }
    let tick = ((n_t - 1) / 8).max(1);
    for t in (0..n_t).step_by(tick) {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{t}</text>"#, x(t), top + ph + 14.0);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">step</text>"#, left + pw / 2.0, top + ph + 32.0);
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">power (kW)</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    let polyline = |out: &mut String, values: &[f64], attrs: &str| {
        let pts: Vec<String> = values.iter().enumerate().map(|(t, v)| format!("{:.2},{:.2}", x(t), y(*v))).collect();
        let data: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" {attrs} data-values="{}"/>"#, pts.join(" "), data.join(" "));
    };
    let lx = left + pw + 20.0;
    for (k, &a) in shown.iter().enumerate() {
        let values: Vec<f64> = sol.rho.iter().map(|r| r[a] * sol.p_alpha[a]).collect();
        let colour = state_colour(a, s);
        polyline(&mut out, &values, &format!(r#"class="state" data-state="{a}" stroke="{colour}" stroke-width="1.5""#));
        let ly = top + 16.0 * k as f64;
        let _ = writeln!(out, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">state {a} ({:.3} kW)</text>"#, lx + 24.0, ly + 4.0, sol.p_alpha[a]);
    }
    polyline(&mut out, &sol.p_t, r#"class="total" stroke="black" stroke-width="2" stroke-dasharray="5,3""#);
    let ly = top + 16.0 * shown.len() as f64;
    let _ = writeln!(out, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="black" stroke-width="2" stroke-dasharray="5,3"/>"#, lx + 18.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">expected total</text>"#, lx + 24.0, ly + 4.0);
    out.push_str("</svg>\n");
    out
}
