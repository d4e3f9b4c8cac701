use image::{Rgb, RgbImage};
use shapeattn::stroke::LengthMapping;

const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const EARLY: [f64; 3] = [250.0, 200.0, 20.0];
const LATE: [f64; 3] = [20.0, 60.0, 220.0];

fn gradient(f: f64) -> Rgb<u8> {
    let f = f.clamp(0.0, 1.0);
    let mix = |i: usize| (EARLY[i] + f * (LATE[i] - EARLY[i])).round() as u8;
    Rgb([mix(0), mix(1), mix(2)])
}

/// Plots every mapping point as a small square colored by how far into the
/// drawing it was made. Later ink is painted over earlier ink.
pub fn render_mapping(mapping: &LengthMapping, w: u32, h: u32, scale: u32) -> RgbImage {
    let scale = scale.max(1);
    let (iw, ih) = (w * scale, h * scale);
    let mut img = RgbImage::from_pixel(iw, ih, BACKGROUND);
    let total = mapping.total_length().max(f64::MIN_POSITIVE);
    let radius = i64::from(scale);
    for p in mapping.points() {
        let color = gradient(p.z / total);
        let cx = (p.x * f64::from(scale)).round() as i64;
        let cy = (p.y * f64::from(scale)).round() as i64;
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let (x, y) = (cx + dx, cy + dy);
                if (0..i64::from(iw)).contains(&x) && (0..i64::from(ih)).contains(&y) {
                    img.put_pixel(x as u32, y as u32, color);
                }
            }
        }
    }
    img
}
