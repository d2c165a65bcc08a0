//! Escape-time and Newton-basin grids over a rectangle of the complex plane.
//!
//! Pixels are pure functions of their coordinates, so frames are rendered as
//! independent tiles ([`render_tiles`]) and the result never depends on the
//! number of workers or the tile size.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

pub use num_complex::Complex64 as Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("tile ({tile_col}, {tile_row}) failed: {message}")]
    TileFailed {
        tile_col: usize,
        tile_row: usize,
        message: String,
    },
    #[error("could not start worker pool: {0}")]
    WorkerPool(String),
}

pub type Result<T> = std::result::Result<T, RenderError>;

fn invalid(name: &'static str, reason: impl Into<String>) -> RenderError {
    RenderError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Rectangle of square pixels centred on `center`, `width` wide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub center: Complex,
    pub width: f64,
    pub cols: usize,
    pub rows: usize,
}

impl Viewport {
    pub fn new(center: Complex, width: f64, cols: usize, rows: usize) -> Result<Self> {
        let vp = Viewport {
            center,
            width,
            cols,
            rows,
        };
        vp.validate()?;
        Ok(vp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(invalid("width", "must be positive"));
        }
        if self.cols == 0 || self.rows == 0 {
            return Err(invalid("cols", "pixel dimensions must be at least 1"));
        }
        if !(self.center.re.is_finite() && self.center.im.is_finite()) {
            return Err(invalid("center", "must be finite"));
        }
        Ok(())
    }

    pub fn pixel_size(&self) -> f64 {
        self.width / self.cols as f64
    }

    pub fn height(&self) -> f64 {
        self.pixel_size() * self.rows as f64
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Centre of pixel (col, row); row 0 is the top (largest imaginary part).
    ///
    /// Offsets are computed as odd multiples of half a pixel, so pixels
    /// mirrored about the centre get exactly negated offsets.
    #[inline]
    pub fn pixel(&self, col: usize, row: usize) -> Complex {
        let half = 0.5 * self.pixel_size();
        let dx = (2 * col as i64 + 1 - self.cols as i64) as f64 * half;
        let dy = (2 * row as i64 + 1 - self.rows as i64) as f64 * half;
        Complex::new(self.center.re + dx, self.center.im - dy)
    }
}

/// Outcome of iterating z ↦ z² + c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Escape {
    /// Orbit index of the first iterate outside the bailout disk, counting
    /// the starting value as iterate 1; `max_iter` if none was found.
    pub count: u32,
    pub z: Complex,
}

impl Escape {
    pub fn escaped(&self, max_iter: u32) -> bool {
        self.count < max_iter
    }
}

/// Iterates z ↦ z² + c from z0 and reports the first orbit index whose
/// modulus exceeds `bailout`.
///
/// Iterates z_1 = z0, z_2, … are examined up to z_{max_iter−1}; `max_iter` is
/// the sentinel for "did not escape", in which case `z` is the last iterate.
pub fn escape_time(c: Complex, z0: Complex, max_iter: u32, bailout: f64) -> Escape {
    let limit = bailout * bailout;
    let mut z = z0;
    for n in 1..max_iter {
        if z.norm_sqr() > limit {
            return Escape { count: n, z };
        }
        z = z * z + c;
    }
    Escape { count: max_iter, z }
}

/// Fractional escape count n + 1 − log₂(ln|z_n| / ln bailout).
pub fn smooth_count(e: &Escape, bailout: f64) -> f64 {
    let modulus = e.z.norm();
    e.count as f64 + 1.0 - (modulus.ln() / bailout.ln()).log2()
}

/// True when c lies in the main cardioid or the period-2 disk.
pub fn in_main_components(c: Complex) -> bool {
    let x = c.re - 0.25;
    let y2 = c.im * c.im;
    let q = x * x + y2;
    if q * (q + x) <= 0.25 * y2 {
        return true;
    }
    let x1 = c.re + 1.0;
    x1 * x1 + y2 <= 1.0 / 16.0
}

/// Escape-time settings shared by Julia and Mandelbrot grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeOptions {
    pub max_iter: u32,
    pub bailout: f64,
    /// Also compute the fractional-count layer.
    pub smooth: bool,
    /// Skip iteration inside the cardioid and period-2 disk (Mandelbrot only).
    pub interior_check: bool,
}

impl EscapeOptions {
    pub fn new(max_iter: u32) -> Self {
        EscapeOptions {
            max_iter,
            bailout: 2.0,
            smooth: false,
            interior_check: false,
        }
    }

    /// Smooth layer on, bailout raised to 256.
    pub fn smooth(max_iter: u32) -> Self {
        EscapeOptions {
            max_iter,
            bailout: 256.0,
            smooth: true,
            interior_check: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        if !(self.bailout >= 2.0 && self.bailout.is_finite()) {
            return Err(invalid("bailout", "must be at least 2"));
        }
        Ok(())
    }
}

/// Per-pixel escape counts; `max_iter` marks pixels that never escaped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeGrid {
    pub counts: Vec<u32>,
    pub smooth: Option<Vec<f64>>,
    pub max_iter: u32,
    pub viewport: Viewport,
}

impl EscapeGrid {
    pub fn count(&self, col: usize, row: usize) -> u32 {
        self.counts[row * self.viewport.cols + col]
    }
}

/// Per-pixel Newton result for z³ − 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    /// Root index 0 (z = 1), 1 (e^{2πi/3}), 2 (e^{−2πi/3}), or −1.
    pub labels: Vec<i8>,
    pub iterations: Vec<u32>,
    pub max_iter: u32,
    pub tol: f64,
    pub viewport: Viewport,
    /// Pixels that started exactly at 0 and were nudged by `tol`.
    pub perturbed_zero_starts: usize,
}

/// Pixel computation plugged into [`render_tiles`].
pub trait PixelKernel: Sync {
    type Pixel: Copy + Default + Send + Sync;

    fn viewport(&self) -> &Viewport;

    fn pixel(&self, col: usize, row: usize) -> Self::Pixel;
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EscapeSample {
    pub count: u32,
    pub smooth: f64,
}

fn escape_sample(e: Escape, opts: &EscapeOptions) -> EscapeSample {
    let smooth = if opts.smooth && e.escaped(opts.max_iter) {
        smooth_count(&e, opts.bailout)
    } else {
        0.0
    };
    EscapeSample {
        count: e.count,
        smooth,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MandelbrotKernel {
    pub viewport: Viewport,
    pub options: EscapeOptions,
}

impl PixelKernel for MandelbrotKernel {
    type Pixel = EscapeSample;

    fn viewport(&self) -> &Viewport {
        &self.viewport
    }

    fn pixel(&self, col: usize, row: usize) -> EscapeSample {
        let c = self.viewport.pixel(col, row);
        if self.options.interior_check && in_main_components(c) {
            return EscapeSample {
                count: self.options.max_iter,
                smooth: 0.0,
            };
        }
        escape_sample(
            escape_time(c, Complex::new(0.0, 0.0), self.options.max_iter, self.options.bailout),
            &self.options,
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JuliaKernel {
    pub c: Complex,
    pub viewport: Viewport,
    pub options: EscapeOptions,
}

impl PixelKernel for JuliaKernel {
    type Pixel = EscapeSample;

    fn viewport(&self) -> &Viewport {
        &self.viewport
    }

    fn pixel(&self, col: usize, row: usize) -> EscapeSample {
        let z0 = self.viewport.pixel(col, row);
        escape_sample(
            escape_time(self.c, z0, self.options.max_iter, self.options.bailout),
            &self.options,
        )
    }
}

/// Cube roots of unity in label order.
pub fn cube_roots() -> [Complex; 3] {
    let h = 0.75f64.sqrt();
    [
        Complex::new(1.0, 0.0),
        Complex::new(-0.5, h),
        Complex::new(-0.5, -h),
    ]
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NewtonSample {
    pub label: i8,
    pub iterations: u32,
    pub z: Complex,
    pub perturbed: bool,
}

/// Newton iteration z ← z − (z³ − 1)/(3z²) from `z0`.
///
/// Converged means within `tol` of a cube root of unity, checked before each
/// step, so a start already at a root reports 0 iterations. A start at 0
/// (where the derivative vanishes) is moved to `tol` first.
pub fn newton_point(z0: Complex, max_iter: u32, tol: f64) -> NewtonSample {
    let roots = cube_roots();
    let mut z = z0;
    let mut perturbed = false;
    if z == Complex::new(0.0, 0.0) {
        z += tol;
        perturbed = true;
    }
    for it in 0..max_iter {
        let (label, dist) = roots
            .iter()
            .enumerate()
            .map(|(k, r)| (k, (z - r).norm()))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        if dist < tol {
            return NewtonSample {
                label: label as i8,
                iterations: it,
                z,
                perturbed,
            };
        }
        let z2 = z * z;
        if z2 == Complex::new(0.0, 0.0) {
            z += tol;
            perturbed = true;
            continue;
        }
        z -= (z2 * z - 1.0) / (3.0 * z2);
    }
    NewtonSample {
        label: -1,
        iterations: max_iter,
        z,
        perturbed,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonKernel {
    pub viewport: Viewport,
    pub max_iter: u32,
    pub tol: f64,
}

impl PixelKernel for NewtonKernel {
    type Pixel = NewtonSample;

    fn viewport(&self) -> &Viewport {
        &self.viewport
    }

    fn pixel(&self, col: usize, row: usize) -> NewtonSample {
        newton_point(self.viewport.pixel(col, row), self.max_iter, self.tol)
    }
}

/// Frame assembled from tiles, with throughput.
#[derive(Debug, Clone)]
pub struct Rendered<P> {
    pub pixels: Vec<P>,
    pub cols: usize,
    pub rows: usize,
    pub tiles: usize,
    pub elapsed: Duration,
    pub pixels_per_second: f64,
}

/// Rectangle of pixels: (col0, row0, cols, rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tile {
    pub tile_col: usize,
    pub tile_row: usize,
    pub col0: usize,
    pub row0: usize,
    pub cols: usize,
    pub rows: usize,
}

/// Splits a frame into row-major tiles of at most `size`×`size` pixels.
pub fn tiles(viewport: &Viewport, size: usize) -> Vec<Tile> {
    let mut out = Vec::new();
    for (tile_row, row0) in (0..viewport.rows).step_by(size).enumerate() {
        for (tile_col, col0) in (0..viewport.cols).step_by(size).enumerate() {
            out.push(Tile {
                tile_col,
                tile_row,
                col0,
                row0,
                cols: size.min(viewport.cols - col0),
                rows: size.min(viewport.rows - row0),
            });
        }
    }
    out
}

/// Pixels of one tile in row-major order. Panics in the kernel become
/// [`RenderError::TileFailed`].
pub fn render_tile<K: PixelKernel>(kernel: &K, tile: &Tile) -> Result<Vec<K::Pixel>> {
    panic::catch_unwind(AssertUnwindSafe(|| {
        let mut px = Vec::with_capacity(tile.cols * tile.rows);
        for row in tile.row0..tile.row0 + tile.rows {
            for col in tile.col0..tile.col0 + tile.cols {
                px.push(kernel.pixel(col, row));
            }
        }
        px
    }))
    .map_err(|payload| RenderError::TileFailed {
        tile_col: tile.tile_col,
        tile_row: tile.tile_row,
        message: payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "worker panicked".into()),
    })
}

/// Renders the kernel's frame tile by tile.
///
/// `workers == 0` uses the ambient rayon pool; any other value runs on a
/// dedicated pool of that size (one worker means strictly sequential).
pub fn render_tiles<K: PixelKernel>(kernel: &K, tile_size: usize, workers: usize) -> Result<Rendered<K::Pixel>> {
    if tile_size == 0 {
        return Err(invalid("tile_size", "must be at least 1"));
    }
    let vp = *kernel.viewport();
    vp.validate()?;
    let start = Instant::now();
    let layout = tiles(&vp, tile_size);
    let results = run_tiles(kernel, &layout, workers)?;

    let mut pixels = vec![K::Pixel::default(); vp.len()];
    for (tile, result) in layout.iter().zip(results) {
        let block = result?;
        for (r, chunk) in block.chunks(tile.cols).enumerate() {
            let offset = (tile.row0 + r) * vp.cols + tile.col0;
            pixels[offset..offset + tile.cols].copy_from_slice(chunk);
        }
    }
    let elapsed = start.elapsed();
    Ok(Rendered {
        pixels,
        cols: vp.cols,
        rows: vp.rows,
        tiles: layout.len(),
        elapsed,
        pixels_per_second: vp.len() as f64 / elapsed.as_secs_f64().max(1e-9),
    })
}

fn run_tiles<K: PixelKernel>(kernel: &K, layout: &[Tile], workers: usize) -> Result<Vec<Result<Vec<K::Pixel>>>> {
    let go = |exec| par::map_slice(exec, layout, |t| render_tile(kernel, t));
    match workers {
        0 => Ok(go(Execution::Parallel)),
        1 => Ok(go(Execution::Sequential)),
        #[cfg(feature = "parallel")]
        n => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RenderError::WorkerPool(e.to_string()))?;
            Ok(pool.install(|| go(Execution::Parallel)))
        }
        #[cfg(not(feature = "parallel"))]
        _ => Ok(go(Execution::Sequential)),
    }
}

/// Default tile edge in pixels.
pub const DEFAULT_TILE: usize = 64;

fn escape_grid(rendered: Rendered<EscapeSample>, opts: &EscapeOptions, viewport: Viewport) -> EscapeGrid {
    EscapeGrid {
        counts: rendered.pixels.iter().map(|p| p.count).collect(),
        smooth: opts
            .smooth
            .then(|| rendered.pixels.iter().map(|p| p.smooth).collect()),
        max_iter: opts.max_iter,
        viewport,
    }
}

/// Filled-Julia escape counts with z0 at each pixel centre.
pub fn julia_grid(c: Complex, viewport: &Viewport, max_iter: u32) -> Result<EscapeGrid> {
    julia_grid_with(c, viewport, &EscapeOptions::new(max_iter), DEFAULT_TILE, 0)
}

pub fn julia_grid_with(
    c: Complex,
    viewport: &Viewport,
    options: &EscapeOptions,
    tile_size: usize,
    workers: usize,
) -> Result<EscapeGrid> {
    options.validate()?;
    let kernel = JuliaKernel {
        c,
        viewport: *viewport,
        options: *options,
    };
    Ok(escape_grid(render_tiles(&kernel, tile_size, workers)?, options, *viewport))
}

/// Mandelbrot escape counts with c at each pixel centre and z0 = 0.
pub fn mandelbrot_grid(viewport: &Viewport, max_iter: u32) -> Result<EscapeGrid> {
    mandelbrot_grid_with(viewport, &EscapeOptions::new(max_iter), DEFAULT_TILE, 0)
}

pub fn mandelbrot_grid_with(
    viewport: &Viewport,
    options: &EscapeOptions,
    tile_size: usize,
    workers: usize,
) -> Result<EscapeGrid> {
    options.validate()?;
    let kernel = MandelbrotKernel {
        viewport: *viewport,
        options: *options,
    };
    Ok(escape_grid(render_tiles(&kernel, tile_size, workers)?, options, *viewport))
}

/// Basins of attraction of Newton's method for z³ − 1.
pub fn newton_basins(viewport: &Viewport, max_iter: u32, tol: f64) -> Result<BasinGrid> {
    newton_basins_with(viewport, max_iter, tol, DEFAULT_TILE, 0)
}

pub fn newton_basins_with(
    viewport: &Viewport,
    max_iter: u32,
    tol: f64,
    tile_size: usize,
    workers: usize,
) -> Result<BasinGrid> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid("tol", "must be positive"));
    }
    if max_iter < 1 {
        return Err(invalid("max_iter", "must be at least 1"));
    }
    let kernel = NewtonKernel {
        viewport: *viewport,
        max_iter,
        tol,
    };
    let r = render_tiles(&kernel, tile_size, workers)?;
    Ok(BasinGrid {
        labels: r.pixels.iter().map(|p| p.label).collect(),
        iterations: r.pixels.iter().map(|p| p.iterations).collect(),
        max_iter,
        tol,
        viewport: *viewport,
        perturbed_zero_starts: r.pixels.iter().filter(|p| p.perturbed).count(),
    })
}
