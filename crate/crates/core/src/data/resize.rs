use super::pgm::Image;
use crate::error::{Error, Result};

/// Source coordinate of a destination pixel centre, with half-pixel mapping,
/// as (lower index, upper index, fraction).
fn sample_points(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Bilinear resize with half-pixel-centre coordinate mapping.
pub fn resize_bilinear(image: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid(format!("target size {out_h}×{out_w} has a zero side")));
    }
    if image.height() == out_h && image.width() == out_w {
        return Ok(image.clone());
    }
    let rows = sample_points(image.height(), out_h);
    let cols = sample_points(image.width(), out_w);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(y0, y1, ty) in &rows {
        for &(x0, x1, tx) in &cols {
            let top = lerp(image.get(y0, x0), image.get(y0, x1), tx);
            let bottom = lerp(image.get(y1, x0), image.get(y1, x1), tx);
            out.push(lerp(top, bottom, ty).clamp(0.0, 1.0));
        }
    }
    Image::new(out_h, out_w, out)
}
