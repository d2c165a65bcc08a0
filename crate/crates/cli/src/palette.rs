//! Named colour maps for escape-time images.
//!
//! A palette's output for a given input never changes within a version, so
//! stored reference images stay valid. Any change to the colours must bump
//! `version`.

use lab_core::complex::EscapeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Palette {
    pub name: &'static str,
    pub version: u32,
    kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Classic,
    Gray,
}

pub const PALETTES: [Palette; 2] = [
    Palette {
        name: "classic",
        version: 1,
        kind: Kind::Classic,
    },
    Palette {
        name: "gray",
        version: 1,
        kind: Kind::Gray,
    },
];

const CLASSIC_STOPS: [[f64; 3]; 5] = [
    [0.0, 7.0, 100.0],
    [32.0, 107.0, 203.0],
    [237.0, 255.0, 255.0],
    [255.0, 170.0, 0.0],
    [0.0, 2.0, 0.0],
];

/// Escape counts per colour cycle in the classic palette.
const CLASSIC_PERIOD: f64 = 64.0;

pub fn lookup(name: &str) -> Option<Palette> {
    PALETTES.iter().copied().find(|p| p.name == name)
}

impl Palette {
    /// Colour of one pixel; `value` is the (possibly fractional) escape count.
    pub fn color(&self, value: f64, escaped: bool, max_iter: u32) -> [u8; 3] {
        if !escaped {
            return [0, 0, 0];
        }
        match self.kind {
            Kind::Classic => {
                let t = (value.max(0.0) / CLASSIC_PERIOD).fract() * CLASSIC_STOPS.len() as f64;
                let i = t.floor() as usize % CLASSIC_STOPS.len();
                let j = (i + 1) % CLASSIC_STOPS.len();
                let f = t - t.floor();
                let mut rgb = [0u8; 3];
                for (c, out) in rgb.iter_mut().enumerate() {
                    let v = CLASSIC_STOPS[i][c] + f * (CLASSIC_STOPS[j][c] - CLASSIC_STOPS[i][c]);
                    *out = v.round().clamp(0.0, 255.0) as u8;
                }
                rgb
            }
            Kind::Gray => {
                let g = (255.0 * value.max(0.0) / max_iter as f64).round().clamp(0.0, 255.0) as u8;
                [g, g, g]
            }
        }
    }

    /// Colours a grid, using the smooth layer when present.
    pub fn apply(&self, grid: &EscapeGrid) -> Vec<[u8; 3]> {
        grid.counts
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let value = grid.smooth.as_ref().map_or(n as f64, |s| s[i]);
                self.color(value, n < grid.max_iter, grid.max_iter)
            })
            .collect()
    }
}

/// Colours for Newton basins: one per root, black for non-convergence.
pub const BASIN_COLORS: [[u8; 3]; 3] = [[220, 50, 47], [38, 139, 210], [133, 153, 0]];

/// Shades each basin by iteration count so convergence speed stays visible.
pub fn basin_color(label: i8, iterations: u32, max_iter: u32) -> [u8; 3] {
    if label < 0 {
        return [0, 0, 0];
    }
    let base = BASIN_COLORS[label as usize];
    let shade = 1.0 - 0.7 * (iterations as f64 / max_iter.max(1) as f64).min(1.0).sqrt();
    base.map(|c| (c as f64 * shade).round() as u8)
}
