use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::glyphs::{glyph, GLYPH_SIZE};

pub const IMAGE_SIZE: usize = 28;
pub const UPSAMPLE: usize = 3;

/// Brightest value a textured background reaches; ink is 1.
const BACKGROUND_MAX: f64 = 0.6;
const WAVE_MAX: f64 = 0.3;
const CLUTTER_GLYPHS: usize = 3;
const CLUTTER_MAX: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Background {
    Blank,
    Textured,
}

impl Background {
    pub fn name(self) -> &'static str {
        match self {
            Background::Blank => "blank",
            Background::Textured => "textured",
        }
    }
}

impl std::str::FromStr for Background {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blank" => Ok(Background::Blank),
            "textured" => Ok(Background::Textured),
            _ => Err(Error::InvalidArgument(format!("unknown background `{s}` (blank | textured)"))),
        }
    }
}

/// Perturbation of one character image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlyphTransform {
    /// Degrees, counter-clockwise about the image centre.
    pub rotation: f64,
    pub scale: f64,
    /// Pixels, `(dx, dy)`.
    pub translation: (f64, f64),
    pub noise: f64,
    pub background: Background,
}

impl GlyphTransform {
    pub fn identity() -> Self {
        Self {
            rotation: 0.0,
            scale: 1.0,
            translation: (0.0, 0.0),
            noise: 0.0,
            background: Background::Blank,
        }
    }
}

/// Ink coverage of the upsampled glyph placed at the top-left offset
/// `(IMAGE_SIZE - 21) / 2`.
fn alpha_canvas(c: char) -> Result<Vec<f64>> {
    let g = glyph(c).ok_or_else(|| Error::InvalidArgument(format!("cannot render `{c}`; expected a-z")))?;
    let offset = (IMAGE_SIZE - GLYPH_SIZE * UPSAMPLE) / 2;
    let mut canvas = vec![0.0; IMAGE_SIZE * IMAGE_SIZE];
    for r in 0..GLYPH_SIZE * UPSAMPLE {
        for col in 0..GLYPH_SIZE * UPSAMPLE {
            if g[r / UPSAMPLE][col / UPSAMPLE] {
                canvas[(r + offset) * IMAGE_SIZE + col + offset] = 1.0;
            }
        }
    }
    Ok(canvas)
}

fn bilinear(img: &[f64], x: f64, y: f64) -> f64 {
    let at = |r: isize, c: isize| {
        if r < 0 || c < 0 || r >= IMAGE_SIZE as isize || c >= IMAGE_SIZE as isize {
            0.0
        } else {
            img[r as usize * IMAGE_SIZE + c as usize]
        }
    };
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (c, r) = (x0 as isize, y0 as isize);
    let top = at(r, c) * (1.0 - fx) + at(r, c + 1) * fx;
    let bottom = at(r + 1, c) * (1.0 - fx) + at(r + 1, c + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Low-frequency waves plus faint strokes of other letters, in
/// `[0, BACKGROUND_MAX]`.
fn textured_background(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(0.05..0.5),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.5..1.0),
            )
        })
        .collect();
    let total: f64 = waves.iter().map(|w| w.3).sum();
    let mut out = Vec::with_capacity(IMAGE_SIZE * IMAGE_SIZE);
    for r in 0..IMAGE_SIZE {
        for c in 0..IMAGE_SIZE {
            let v: f64 = waves
                .iter()
                .map(|&(freq, dir, phase, amp)| {
                    let t = (c as f64 * dir.cos() + r as f64 * dir.sin()) * freq + phase;
                    amp * 0.5 * (1.0 + t.sin())
                })
                .sum();
            out.push(WAVE_MAX * v / total);
        }
    }
    for _ in 0..CLUTTER_GLYPHS {
        let letter = (b'a' + rng.gen_range(0..26u8)) as char;
        let canvas = alpha_canvas(letter).expect("a-z");
        let (dx, dy) = (rng.gen_range(-14.0..14.0), rng.gen_range(-14.0..14.0));
        let (sin, cos) = rng.gen_range(0.0..std::f64::consts::TAU).sin_cos();
        let strength = rng.gen_range(0.3..1.0) * CLUTTER_MAX;
        let centre = (IMAGE_SIZE as f64 - 1.0) / 2.0;
        for r in 0..IMAGE_SIZE {
            for c in 0..IMAGE_SIZE {
                let (x, y) = (c as f64 - centre - dx, r as f64 - centre - dy);
                let a = bilinear(&canvas, cos * x - sin * y + centre, sin * x + cos * y + centre);
                let v = &mut out[r * IMAGE_SIZE + c];
                *v = (*v + strength * a).min(BACKGROUND_MAX);
            }
        }
    }
    out
}

/// Renders one `IMAGE_SIZE`² character image, row-major, values in `[0, 1]`.
/// Deterministic in all arguments; `seed` drives the background texture and
/// the pixel noise.
pub fn render_glyph(c: char, transform: &GlyphTransform, seed: u64) -> Result<Vec<f32>> {
    let alpha = alpha_canvas(c)?;
    if !(transform.scale > 0.0) || !transform.rotation.is_finite() || !(transform.noise >= 0.0) {
        return Err(Error::InvalidArgument(format!("invalid glyph transform {transform:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background = match transform.background {
        Background::Blank => vec![0.0; IMAGE_SIZE * IMAGE_SIZE],
        Background::Textured => textured_background(&mut rng),
    };

    let theta = transform.rotation.rem_euclid(360.0).to_radians();
    let (sin, cos) = theta.sin_cos();
    let centre = (IMAGE_SIZE as f64 - 1.0) / 2.0;
    let (tx, ty) = transform.translation;
    let mut out = Vec::with_capacity(IMAGE_SIZE * IMAGE_SIZE);
    for r in 0..IMAGE_SIZE {
        for col in 0..IMAGE_SIZE {
            let dx = (col as f64 - centre - tx) / transform.scale;
            let dy = (r as f64 - centre - ty) / transform.scale;
            // Inverse rotation in image coordinates (y down).
            let sx = cos * dx - sin * dy + centre;
            let sy = sin * dx + cos * dy + centre;
            let a = bilinear(&alpha, sx, sy);
            let b = background[r * IMAGE_SIZE + col];
            let mut v = a + (1.0 - a) * b;
            if transform.noise > 0.0 {
                v += rng.gen_range(-transform.noise..=transform.noise);
            }
            out.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    Ok(out)
}
