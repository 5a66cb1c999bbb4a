//! Deterministic test images for the tomography bench.
//!
//! Every generator is a closed-form function of the pixel coordinates, so a
//! phantom is fully reproducible from its name and size alone. The suite
//! deliberately mixes large, smooth structures with fine detail: two-level
//! solvers behave differently on the two regimes and the bench should show
//! both.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("unknown phantom name {name:?}")]
    UnknownName { name: String },
    #[error("phantom size must be at least 8, got {size}")]
    TooSmall { size: usize },
    #[error("not a binary pgm file: {reason}")]
    BadHeader { reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    Disks,
    Annulus,
    Bars,
    Checker,
    Blob,
    Mixed,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 6] = [
        PhantomKind::Disks,
        PhantomKind::Annulus,
        PhantomKind::Bars,
        PhantomKind::Checker,
        PhantomKind::Blob,
        PhantomKind::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::Disks => "disks",
            PhantomKind::Annulus => "annulus",
            PhantomKind::Bars => "bars",
            PhantomKind::Checker => "checker",
            PhantomKind::Blob => "blob",
            PhantomKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhantomKind {
    type Err = PhantomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PhantomKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PhantomError::UnknownName {
                name: s.to_string(),
            })
    }
}

/// A square grayscale image with values in `[0, 1]`, row-major.
#[derive(Debug, Clone)]
pub struct Phantom {
    kind: PhantomKind,
    size: usize,
    values: Vec<f64>,
}

impl Phantom {
    pub fn kind(&self) -> PhantomKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.size, self.size)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Generates the named phantom at `size x size` pixels.
pub fn make_phantom(kind: PhantomKind, size: usize) -> Result<Phantom, PhantomError> {
    if size < 8 {
        return Err(PhantomError::TooSmall { size });
    }
    let m = size as f64;
    let mut values = vec![0.0; size * size];
    for r in 0..size {
        for c in 0..size {
            // Pixel center in units of the image side, in (0, 1).
            let u = (c as f64 + 0.5) / m;
            let v = (r as f64 + 0.5) / m;
            values[r * size + c] = pixel_value(kind, u, v, size, r, c);
        }
    }
    debug_assert!(values.iter().all(|&x| (0.0..=1.0).contains(&x)));
    debug_assert!(values.iter().any(|&x| x > 0.0));
    Ok(Phantom { kind, size, values })
}

fn disk(u: f64, v: f64, cu: f64, cv: f64, radius: f64) -> bool {
    let du = u - cu;
    let dv = v - cv;
    du * du + dv * dv < radius * radius
}

fn pixel_value(kind: PhantomKind, u: f64, v: f64, size: usize, r: usize, c: usize) -> f64 {
    match kind {
        PhantomKind::Disks => {
            // One dominant disk plus progressively smaller satellites.
            let mut val: f64 = 0.0;
            if disk(u, v, 0.42, 0.45, 0.27) {
                val = val.max(0.55);
            }
            if disk(u, v, 0.70, 0.30, 0.12) {
                val = val.max(0.85);
            }
            if disk(u, v, 0.72, 0.70, 0.06) {
                val = val.max(1.0);
            }
            if disk(u, v, 0.30, 0.76, 0.035) {
                val = val.max(0.95);
            }
            if disk(u, v, 0.52, 0.50, 0.08) {
                val = val.max(0.75);
            }
            val
        }
        PhantomKind::Annulus => {
            // Radial profile only, so the image is exactly symmetric under
            // quarter turns about the center.
            let du = u - 0.5;
            let dv = v - 0.5;
            let d2 = du * du + dv * dv;
            if d2 >= 0.22 * 0.22 && d2 < 0.38 * 0.38 {
                1.0
            } else if d2 < 0.10 * 0.10 {
                0.6
            } else {
                0.0
            }
        }
        PhantomKind::Bars => {
            // Fine stripes on the left half, coarse on the right.
            let fine = (size / 16).max(1);
            let coarse = (size / 4).max(2);
            if u < 0.5 {
                if (c / fine) % 2 == 0 {
                    0.8
                } else {
                    0.1
                }
            } else if (c / coarse) % 2 == 0 {
                0.5
            } else {
                0.9
            }
        }
        PhantomKind::Checker => {
            let block = (size / 8).max(1);
            if ((r / block) + (c / block)) % 2 == 0 {
                0.9
            } else {
                0.15
            }
        }
        PhantomKind::Blob => {
            // Smooth bumps of very different widths.
            let g = |cu: f64, cv: f64, s: f64| {
                let du = u - cu;
                let dv = v - cv;
                (-(du * du + dv * dv) / (s * s)).exp()
            };
            let val = 0.55 * g(0.45, 0.55, 0.28) + 0.65 * g(0.68, 0.32, 0.07)
                + 0.45 * g(0.25, 0.30, 0.04);
            val.min(1.0)
        }
        PhantomKind::Mixed => {
            // Quadrants: smooth ramp, checker detail, a disk, thin bars.
            if u < 0.5 && v < 0.5 {
                (2.0 * u) * (2.0 * v)
            } else if u >= 0.5 && v < 0.5 {
                let block = (size / 16).max(1);
                if ((r / block) + (c / block)) % 2 == 0 {
                    0.85
                } else {
                    0.2
                }
            } else if u < 0.5 {
                if disk(u, v, 0.25, 0.75, 0.16) {
                    0.9
                } else {
                    0.05
                }
            } else {
                let bar = (size / 32).max(1);
                if (r / bar) % 2 == 0 {
                    0.7
                } else {
                    0.25
                }
            }
        }
    }
}

/// Writes the image as binary PGM (P5, maxval 255).
pub fn write_pgm<W: Write>(phantom: &Phantom, mut w: W) -> Result<(), PhantomError> {
    let n = phantom.size();
    write!(w, "P5\n{n} {n}\n255\n")?;
    let bytes: Vec<u8> = phantom
        .values()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Reads a binary PGM written by [`write_pgm`]. Values come back quantized
/// to the 256 gray levels.
pub fn read_pgm<R: BufRead>(mut r: R) -> Result<Phantom, PhantomError> {
    let mut header = String::new();
    for _ in 0..3 {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(PhantomError::BadHeader {
                reason: "truncated header".to_string(),
            });
        }
        header.push_str(&line);
    }
    let mut fields = header.split_whitespace();
    match fields.next() {
        Some("P5") => {}
        other => {
            return Err(PhantomError::BadHeader {
                reason: format!("magic {other:?}, expected \"P5\""),
            })
        }
    }
    let dims: Vec<usize> = fields
        .by_ref()
        .take(2)
        .map(|t| {
            t.parse().map_err(|_| PhantomError::BadHeader {
                reason: format!("bad dimension {t:?}"),
            })
        })
        .collect::<Result<_, _>>()?;
    if dims.len() != 2 || dims[0] != dims[1] || dims[0] == 0 {
        return Err(PhantomError::BadHeader {
            reason: format!("expected a square image, got dimensions {dims:?}"),
        });
    }
    match fields.next() {
        Some("255") => {}
        other => {
            return Err(PhantomError::BadHeader {
                reason: format!("maxval {other:?}, expected 255"),
            })
        }
    }
    let size = dims[0];
    let mut bytes = vec![0u8; size * size];
    r.read_exact(&mut bytes)?;
    Ok(Phantom {
        // The file does not record which generator produced it; tag the
        // nearest thing to "unknown" without growing the enum.
        kind: PhantomKind::Mixed,
        size,
        values: bytes.iter().map(|&b| b as f64 / 255.0).collect(),
    })
}
