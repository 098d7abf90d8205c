//! Static (x, u) plots: orbit projections over the zero contour of H(x, u, 0).

use std::fmt::Write;

use kam::model::ContactModel;

const W: f64 = 720.0;
const H: f64 = 480.0;
const MARGIN: f64 = 40.0;
/// u-window cap; blown-up orbit pieces are cut at the frame
const U_CAP: f64 = 5.0;

pub struct Curve {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

struct Frame {
    u_lo: f64,
    u_hi: f64,
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        MARGIN + (x + std::f64::consts::PI) / (2.0 * std::f64::consts::PI) * (W - 2.0 * MARGIN)
    }

    fn sy(&self, u: f64) -> f64 {
        H - MARGIN - (u - self.u_lo) / (self.u_hi - self.u_lo) * (H - 2.0 * MARGIN)
    }

    fn inside(&self, u: f64) -> bool {
        u.is_finite() && u >= self.u_lo && u <= self.u_hi
    }
}

/// Splits at x-wraps and at frame exits.
fn path_data(frame: &Frame, pts: &[(f64, f64)]) -> String {
    let mut d = String::new();
    let mut pen_down = false;
    let mut prev_x = f64::NAN;
    for &(x, u) in pts {
        if !frame.inside(u) {
            pen_down = false;
            continue;
        }
        let jump = (x - prev_x).abs() > std::f64::consts::PI;
        let cmd = if pen_down && !jump { 'L' } else { 'M' };
        let _ = write!(d, "{cmd}{:.2} {:.2} ", frame.sx(x), frame.sy(u));
        pen_down = true;
        prev_x = x;
    }
    d.trim_end().to_string()
}

/// Marching squares for H(x, u, 0) = 0.
fn zero_contour(model: &ContactModel, frame: &Frame) -> String {
    let (nx, nu) = (240usize, 160usize);
    let pi = std::f64::consts::PI;
    let xs: Vec<f64> = (0..=nx).map(|i| -pi + 2.0 * pi * i as f64 / nx as f64).collect();
    let us: Vec<f64> = (0..=nu)
        .map(|j| frame.u_lo + (frame.u_hi - frame.u_lo) * j as f64 / nu as f64)
        .collect();
    let val = |i: usize, j: usize| model.hamiltonian(xs[i], us[j], 0.0).unwrap_or(f64::NAN);
    let grid: Vec<Vec<f64>> = (0..=nx).map(|i| (0..=nu).map(|j| val(i, j)).collect()).collect();
    let mut d = String::new();
    for i in 0..nx {
        for j in 0..nu {
            let corners = [
                (xs[i], us[j], grid[i][j]),
                (xs[i + 1], us[j], grid[i + 1][j]),
                (xs[i + 1], us[j + 1], grid[i + 1][j + 1]),
                (xs[i], us[j + 1], grid[i][j + 1]),
            ];
            if corners.iter().any(|c| !c.2.is_finite()) {
                continue;
            }
            let mut hits = Vec::new();
            for e in 0..4 {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                if (a.2 < 0.0) != (b.2 < 0.0) {
                    let s = a.2 / (a.2 - b.2);
                    hits.push((a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1)));
                }
            }
            for pair in hits.chunks_exact(2) {
                let _ = write!(
                    d,
                    "M{:.2} {:.2} L{:.2} {:.2} ",
                    frame.sx(pair[0].0),
                    frame.sy(pair[0].1),
                    frame.sx(pair[1].0),
                    frame.sy(pair[1].1)
                );
            }
        }
    }
    d.trim_end().to_string()
}

pub fn render(model: &ContactModel, title: &str, curves: &[Curve]) -> String {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in curves {
        for &(_, u) in &c.points {
            if u.is_finite() && u.abs() <= U_CAP {
                lo = lo.min(u);
                hi = hi.max(u);
            }
        }
    }
    if !(lo < hi) {
        lo = -1.0;
        hi = 1.0;
    }
    let pad = 0.1 * (hi - lo);
    let frame = Frame {
        u_lo: lo - pad,
        u_hi: hi + pad,
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="24" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11">x in [-pi, pi), u in [{:.3}, {:.3}]</text>"#,
        MARGIN,
        H - 12.0,
        frame.u_lo,
        frame.u_hi
    );
    let contour = zero_contour(model, &frame);
    if !contour.is_empty() {
        let _ = writeln!(
            s,
            r##"<path d="{contour}" fill="none" stroke="#999999" stroke-width="1"><title>H(x,u,0)=0</title></path>"##
        );
    }
    for c in curves {
        let d = path_data(&frame, &c.points);
        if d.is_empty() {
            continue;
        }
        let dash = if c.dashed { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.5"{dash}><title>{}</title></path>"#,
            c.color,
            escape(&c.label)
        );
    }
    for (k, c) in curves.iter().enumerate() {
        let y = MARGIN + 16.0 + 14.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" font-size="11" fill="{}">{}</text>"#,
            W - MARGIN - 200.0,
            c.color,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
