//! Standalone SVG rendering of Q-Q plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Points drawn before evenly spaced downsampling kicks in.
pub const MAX_MARKERS: usize = 2000;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 48.0;

/// Renders `(theoretical, empirical)` pairs with a `y = x` reference line.
pub fn render_svg_qq(pairs: &[(f64, f64)]) -> Result<String> {
    if pairs.is_empty() {
        return Err(Error::Empty("Q-Q pairs"));
    }
    let shown: Vec<(f64, f64)> = if pairs.len() > MAX_MARKERS {
        let last = (pairs.len() - 1) as f64;
        (0..MAX_MARKERS)
            .map(|i| pairs[(i as f64 * last / (MAX_MARKERS - 1) as f64).round() as usize])
            .collect()
    } else {
        pairs.to_vec()
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(a, b) in &shown {
        if a.is_finite() && b.is_finite() {
            lo = lo.min(a.min(b));
            hi = hi.max(a.max(b));
        }
    }
    if !lo.is_finite() {
        return Err(Error::usage("Q-Q pairs contain no finite point"));
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let span = SIZE - 2.0 * MARGIN;
    let px = |v: f64| MARGIN + (v - lo) / (hi - lo) * span;
    let py = |v: f64| SIZE - MARGIN - (v - lo) / (hi - lo) * span;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let _ = writeln!(
        out,
        r#"<path class="axes" d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = SIZE - MARGIN,
        r = SIZE - MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">theoretical quantile</text>"#,
        SIZE / 2.0,
        SIZE - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">empirical quantile</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{v:.2}</text>"#,
            px(v),
            SIZE - MARGIN + 14.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{v:.2}</text>"#,
            MARGIN - 4.0,
            py(v) + 3.0
        );
    }
    let _ = writeln!(
        out,
        r##"<line class="reference" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c0392b"/>"##,
        px(lo),
        py(lo),
        px(hi),
        py(hi)
    );
    for &(a, b) in &shown {
        if a.is_finite() && b.is_finite() {
            let _ = writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="#2c3e50"/>"##,
                px(a),
                py(b)
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Writes the Q-Q plot to `path`. Nothing is created on error.
pub fn emit_svg_qq(pairs: &[(f64, f64)], path: &Path) -> Result<()> {
    let svg = render_svg_qq(pairs)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
