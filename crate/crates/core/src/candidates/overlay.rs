//! Numbered candidate overlay rendered onto the alert frame.
//!
//! Style: each candidate's visible pixel polyline is drawn 3 px wide, its
//! endpoint carries a filled circle of radius 14 px with the id centred in
//! black, and a "0 = station-keep" legend sits in the top-left corner.

use image::{Rgb, RgbImage};

use super::font::{glyph, text_width, GLYPH_H};
use super::CandidateSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const LEGEND: &str = "0 = station-keep";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlayStyle {
    pub label_radius: i64,
    pub line_width: i64,
    pub text_scale: u32,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self { label_radius: 14, line_width: 3, text_scale: 2 }
    }
}

const PALETTE: [[u8; 3]; 6] = [
    [255, 200, 0],
    [0, 220, 255],
    [255, 90, 200],
    [120, 255, 80],
    [255, 140, 40],
    [180, 140, 255],
];
const INK: Rgb<u8> = Rgb([0, 0, 0]);
const LEGEND_BG: Rgb<u8> = Rgb([20, 20, 20]);
const LEGEND_FG: Rgb<u8> = Rgb([255, 255, 255]);

pub fn candidate_color(id: usize) -> Rgb<u8> {
    Rgb(PALETTE[id.saturating_sub(1) % PALETTE.len()])
}

/// Draws the candidate set onto a copy of `base`. Output is a pure function of
/// the inputs.
pub fn render_overlay<T: Real>(base: &RgbImage, set: &CandidateSet<T>, style: &OverlayStyle) -> Result<RgbImage> {
    let mut img = base.clone();
    for c in &set.candidates {
        let color = candidate_color(c.id);
        let visible: Vec<(f64, f64)> = c.samples_pixel[c.first_visible_index..]
            .iter()
            .flatten()
            .map(|p| (p.u.to_f64_lossy(), p.v.to_f64_lossy()))
            .collect();
        for w in visible.windows(2) {
            draw_thick_segment(&mut img, w[0], w[1], style.line_width, color);
        }
    }
    // labels after all lines so no polyline crosses a number
    for c in &set.candidates {
        let (u, v) = (c.endpoint_pixel.u.to_f64_lossy(), c.endpoint_pixel.v.to_f64_lossy());
        let (cu, cv) = ((u + 0.5).floor() as i64, (v + 0.5).floor() as i64);
        fill_circle(&mut img, cu, cv, style.label_radius, candidate_color(c.id));
        let text = c.id.to_string();
        let tw = text_width(&text, style.text_scale) as i64;
        let th = (GLYPH_H * style.text_scale) as i64;
        draw_text(&mut img, cu - tw / 2, cv - th / 2, &text, style.text_scale, INK);
    }
    draw_legend(&mut img, style.text_scale);
    Ok(img)
}

/// Encodes an RGB raster as PNG bytes.
pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|source| Error::Image { context: "png encode".into(), source })?;
    Ok(out.into_inner())
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && x < img.width() as i64 && y < img.height() as i64 {
        img.put_pixel(x as u32, y as u32, color);
    }
}

fn draw_thick_segment(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), width: i64, color: Rgb<u8>) {
    let len = (b.0 - a.0).hypot(b.1 - a.1);
    let steps = (len * 2.0).ceil().max(1.0) as i64;
    let lo = -(width - 1) / 2;
    let hi = lo + width - 1;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = (a.0 + (b.0 - a.0) * t + 0.5).floor() as i64;
        let y = (a.1 + (b.1 - a.1) * t + 0.5).floor() as i64;
        for dy in lo..=hi {
            for dx in lo..=hi {
                put(img, x + dx, y + dy, color);
            }
        }
    }
}

fn fill_circle(img: &mut RgbImage, cx: i64, cy: i64, radius: i64, color: Rgb<u8>) {
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if dx * dx + dy * dy <= radius * radius {
                put(img, cx + dx, cy + dy, color);
            }
        }
    }
}

fn draw_text(img: &mut RgbImage, x0: i64, y0: i64, text: &str, scale: u32, color: Rgb<u8>) {
    let s = scale as i64;
    let mut x = x0;
    for ch in text.chars() {
        if let Some(rows) = glyph(ch) {
            for (ry, bits) in rows.iter().enumerate() {
                for rx in 0..5i64 {
                    if bits & (1 << (4 - rx)) != 0 {
                        for sy in 0..s {
                            for sx in 0..s {
                                put(img, x + rx * s + sx, y0 + ry as i64 * s + sy, color);
                            }
                        }
                    }
                }
            }
        }
        x += 6 * s;
    }
}

fn draw_legend(img: &mut RgbImage, scale: u32) {
    let pad = 4i64;
    let w = text_width(LEGEND, scale) as i64 + 2 * pad;
    let h = (GLYPH_H * scale) as i64 + 2 * pad;
    for y in 0..h {
        for x in 0..w {
            put(img, x, y, LEGEND_BG);
        }
    }
    draw_text(img, pad, pad, LEGEND, scale, LEGEND_FG);
}

/// Bounding box `(x0, y0, x1, y1)` (inclusive) of the legend at `scale`.
pub fn legend_box(scale: u32) -> (u32, u32, u32, u32) {
    let pad = 4;
    (0, 0, text_width(LEGEND, scale) + 2 * pad - 1, GLYPH_H * scale + 2 * pad - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::{Candidate, LabelPosition, SamplingParams};
    use crate::frames::{BodyPoint, NavPose, PixelPoint, WorldPoint};
    use sha2::{Digest, Sha256};

    fn empty_set() -> CandidateSet {
        CandidateSet {
            candidates: vec![],
            t_alert: 0.0,
            anchor_pose: NavPose::identity(),
            overlay_meta: vec![],
            params: SamplingParams::default(),
            seed: 0,
            n_survivors: 0,
        }
    }

    fn one_candidate_set() -> CandidateSet {
        let mut set = empty_set();
        let pixels: Vec<_> = (0..5).map(|i| Some(PixelPoint::new(300.0, 400.0 - 30.0 * i as f64))).collect();
        set.candidates.push(Candidate {
            id: 1,
            endpoint_body: BodyPoint::planar(20.0, 0.0),
            samples_body: vec![BodyPoint::default(); 5],
            samples_pixel: pixels,
            first_visible_index: 0,
            endpoint_pixel: PixelPoint::new(300.0, 280.0),
            polyline_world: vec![WorldPoint::default(); 5],
            min_clearance: None,
        });
        set.overlay_meta.push(LabelPosition { id: 1, u: 300.0, v: 280.0 });
        set
    }

    #[test]
    fn empty_set_only_draws_legend() {
        let base = RgbImage::from_pixel(200, 100, Rgb([10, 60, 120]));
        let out = render_overlay(&base, &empty_set(), &OverlayStyle::default()).unwrap();
        let (_, _, x1, y1) = legend_box(2);
        for (x, y, p) in out.enumerate_pixels() {
            if x > x1 || y > y1 {
                assert_eq!(p, base.get_pixel(x, y));
            }
        }
        assert_ne!(out, base);
    }

    #[test]
    fn single_label_at_endpoint() {
        let base = RgbImage::from_pixel(640, 480, Rgb([10, 60, 120]));
        let out = render_overlay(&base, &one_candidate_set(), &OverlayStyle::default()).unwrap();
        // centre of the "1" glyph stem is ink, circle rim is candidate colour
        assert_eq!(*out.get_pixel(300, 280), INK);
        assert_eq!(*out.get_pixel(300 + 13, 280), candidate_color(1));
        // nothing drawn right of the label box away from the polyline
        for y in 0..480 {
            for x in 316..640 {
                assert_eq!(out.get_pixel(x, y), base.get_pixel(x, y));
            }
        }
    }

    #[test]
    fn deterministic_bytes() {
        let base = RgbImage::from_pixel(640, 480, Rgb([10, 60, 120]));
        let a = encode_png(&render_overlay(&base, &one_candidate_set(), &OverlayStyle::default()).unwrap()).unwrap();
        let b = encode_png(&render_overlay(&base, &one_candidate_set(), &OverlayStyle::default()).unwrap()).unwrap();
        assert_eq!(Sha256::digest(&a), Sha256::digest(&b));
    }
}
