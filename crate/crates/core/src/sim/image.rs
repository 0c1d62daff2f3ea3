//! Synthetic front-camera images.
//!
//! Pixels are a pure function of (position, yaw, image type): sky above a
//! pitch-free horizon, a 2 m checkerboard ground plane projected from the
//! camera height, and a pose readout in the top-left corner.

use super::{SimState, Vec3};
use crate::dsl::{wrap_degrees, ImageType};
use serde::{Deserialize, Serialize};

pub const IMAGE_WIDTH: u32 = 256;
pub const IMAGE_HEIGHT: u32 = 144;

const HORIZON_ROW: f64 = 72.0;
/// 90° horizontal field of view.
const FOCAL_PX: f64 = 128.0;
const CAMERA_MOUNT_HEIGHT: f64 = 0.5;
const CHECKER_SIZE: f64 = 2.0;
const DEPTH_RANGE: f64 = 100.0;
const FRONT_CAMERA: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImageError {
    #[error("unknown camera {0}; only camera 0 (front) is mounted")]
    UnknownCamera(u32),
    #[error("unknown image type `{0}`")]
    UnknownImageType(String),
    #[error("png encoding failed: {0}")]
    Encode(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetadata {
    pub camera: u32,
    pub image_type: ImageType,
    pub width: u32,
    pub height: u32,
    pub position: Vec3,
    pub yaw: f64,
    pub sim_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraImage {
    pub png: Vec<u8>,
    pub metadata: ImageMetadata,
}

// 3x5 glyphs, one bit per pixel, rows top to bottom, MSB on the left.
fn glyph(c: char) -> [u8; 5] {
    match c {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b001, 0b001, 0b001],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '-' => [0b000, 0b000, 0b111, 0b000, 0b000],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        'N' => [0b101, 0b111, 0b111, 0b101, 0b101],
        'E' => [0b111, 0b100, 0b110, 0b100, 0b111],
        'D' => [0b110, 0b101, 0b101, 0b101, 0b110],
        'Y' => [0b101, 0b101, 0b010, 0b010, 0b010],
        _ => [0; 5],
    }
}

struct Canvas {
    rgb: Vec<u8>,
}

impl Canvas {
    fn set(&mut self, u: u32, v: u32, px: [u8; 3]) {
        if u < IMAGE_WIDTH && v < IMAGE_HEIGHT {
            let i = ((v * IMAGE_WIDTH + u) * 3) as usize;
            self.rgb[i..i + 3].copy_from_slice(&px);
        }
    }

    fn text(&mut self, lines: &[String]) {
        let width = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0) as u32 * 4 + 3;
        let height = lines.len() as u32 * 6 + 3;
        for v in 0..height {
            for u in 0..width {
                self.set(u, v, [0, 0, 0]);
            }
        }
        for (row, line) in lines.iter().enumerate() {
            for (col, c) in line.chars().enumerate() {
                let bits = glyph(c);
                for (dy, bits_row) in bits.iter().enumerate() {
                    for dx in 0..3u32 {
                        if bits_row & (0b100 >> dx) != 0 {
                            self.set(2 + col as u32 * 4 + dx, 2 + row as u32 * 6 + dy as u32, [255, 255, 255]);
                        }
                    }
                }
            }
        }
    }
}

fn sky_pixel(u: u32, v: u32, yaw: f64, image_type: ImageType) -> [u8; 3] {
    match image_type {
        ImageType::Depth => [255, 255, 255],
        ImageType::Scene => {
            let bearing = yaw + ((u as f64 + 0.5 - 128.0) / FOCAL_PX).atan().to_degrees();
            let per_pixel = (1.0 / FOCAL_PX).atan().to_degrees();
            if f64::from(v) >= HORIZON_ROW - 12.0 && wrap_degrees(bearing).abs() < per_pixel / 2.0 + 1e-12 {
                return [200, 30, 30];
            }
            let t = f64::from(v) / HORIZON_ROW;
            [(90.0 + 110.0 * t) as u8, (140.0 + 80.0 * t) as u8, 230]
        }
    }
}

fn ground_pixel(u: u32, v: u32, position: Vec3, yaw: f64, image_type: ImageType) -> [u8; 3] {
    let height = (-position.z + CAMERA_MOUNT_HEIGHT).max(0.05);
    let down = (f64::from(v) + 0.5 - HORIZON_ROW) / FOCAL_PX;
    let forward = height / down;
    let lateral = forward * (f64::from(u) + 0.5 - 128.0) / FOCAL_PX;
    match image_type {
        ImageType::Depth => {
            let range = (forward * forward + lateral * lateral + height * height).sqrt();
            let g = (range.min(DEPTH_RANGE) / DEPTH_RANGE * 255.0) as u8;
            [g, g, g]
        }
        ImageType::Scene => {
            let (s, c) = yaw.to_radians().sin_cos();
            let north = position.x + forward * c - lateral * s;
            let east = position.y + forward * s + lateral * c;
            let cell = (north / CHECKER_SIZE).floor() as i64 + (east / CHECKER_SIZE).floor() as i64;
            if cell.rem_euclid(2) == 0 {
                [70, 140, 60]
            } else {
                [110, 180, 90]
            }
        }
    }
}

fn encode_png(rgb: &[u8]) -> Result<Vec<u8>, ImageError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, IMAGE_WIDTH, IMAGE_HEIGHT);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| ImageError::Encode(e.to_string()))?;
        writer
            .write_image_data(rgb)
            .map_err(|e| ImageError::Encode(e.to_string()))?;
    }
    Ok(out)
}

/// Renders a 256x144 PNG for `camera` at the state's pose.
pub fn render_image(state: &SimState, camera: u32, image_type: ImageType) -> Result<CameraImage, ImageError> {
    if camera != FRONT_CAMERA {
        return Err(ImageError::UnknownCamera(camera));
    }
    let mut canvas = Canvas {
        rgb: vec![0; (IMAGE_WIDTH * IMAGE_HEIGHT * 3) as usize],
    };
    let horizon = HORIZON_ROW as u32;
    for v in 0..IMAGE_HEIGHT {
        for u in 0..IMAGE_WIDTH {
            let px = if v < horizon {
                sky_pixel(u, v, state.yaw, image_type)
            } else if v == horizon && image_type == ImageType::Scene {
                [40, 40, 40]
            } else if v == horizon {
                [255, 255, 255]
            } else {
                ground_pixel(u, v, state.position, state.yaw, image_type)
            };
            canvas.set(u, v, px);
        }
    }
    let p = state.position;
    canvas.text(&[
        format!("N {:.2}", p.x),
        format!("E {:.2}", p.y),
        format!("D {:.2}", p.z),
        format!("Y {:.1}", state.yaw),
    ]);
    Ok(CameraImage {
        png: encode_png(&canvas.rgb)?,
        metadata: ImageMetadata {
            camera,
            image_type,
            width: IMAGE_WIDTH,
            height: IMAGE_HEIGHT,
            position: p,
            yaw: state.yaw,
            sim_time: state.sim_time,
        },
    })
}
