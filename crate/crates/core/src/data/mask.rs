//! Raster grids, polygon fill, tiling and PGM mask I/O.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major `width × height` raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<P> {
    width: usize,
    height: usize,
    cells: Vec<P>,
}

/// A segmentation mask: `true` is white (object present).
pub type BinaryMask = Grid<bool>;

impl<P: Clone> Grid<P> {
    pub fn filled(width: usize, height: usize, value: P) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Data(format!(
                "raster dimensions {width}x{height} must be positive"
            )));
        }
        Ok(Self {
            width,
            height,
            cells: vec![value; width * height],
        })
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<P>) -> Result<Self> {
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(Error::Data(format!(
                "{} cells for a {width}x{height} raster",
                cells.len()
            )));
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[P] {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> &P {
        &self.cells[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: P) {
        self.cells[y * self.width + x] = v;
    }

    fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        let mut cells = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            cells.extend_from_slice(&self.cells[y * self.width + x0..y * self.width + x0 + w]);
        }
        Self {
            width: w,
            height: h,
            cells,
        }
    }
}

impl BinaryMask {
    pub fn count_set(&self) -> usize {
        self.cells.iter().filter(|b| **b).count()
    }
}

/// Even-odd scanline fill sampled at pixel centers `(x + 0.5, y + 0.5)`.
///
/// An edge contributes a crossing on the scanline `yc` when `yc` lies in its
/// half-open vertical span, so horizontal edges never count. Zero-area
/// polygons yield an empty mask.
pub fn rasterize_polygon(
    vertices: &[(f64, f64)],
    width: usize,
    height: usize,
) -> Result<BinaryMask> {
    if vertices.len() < 3 {
        return Err(Error::Data(format!(
            "polygon needs >= 3 vertices, got {}",
            vertices.len()
        )));
    }
    let mut mask = BinaryMask::filled(width, height, false)?;
    if signed_area(vertices) == 0.0 {
        return Ok(mask);
    }
    let mut xs = Vec::new();
    for y in 0..height {
        let yc = y as f64 + 0.5;
        xs.clear();
        for (i, &(x0, y0)) in vertices.iter().enumerate() {
            let (x1, y1) = vertices[(i + 1) % vertices.len()];
            if (y0 <= yc && yc < y1) || (y1 <= yc && yc < y0) {
                xs.push(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        for span in xs.chunks_exact(2) {
            // Pixels whose center lies in [span[0], span[1]).
            let first = (span[0] - 0.5).ceil().max(0.0);
            let last = (span[1] - 0.5).ceil().min(width as f64);
            let (mut x, end) = (first as usize, last.max(0.0) as usize);
            while x < end {
                mask.set(x, y, true);
                x += 1;
            }
        }
    }
    Ok(mask)
}

fn signed_area(v: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        let (x0, y0) = v[i];
        let (x1, y1) = v[(i + 1) % v.len()];
        s += x0 * y1 - x1 * y0;
    }
    s / 2.0
}

/// Tiles cut from a raster in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tiling<P> {
    pub tiles: Vec<Grid<P>>,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub tile: usize,
    /// Columns on the right and rows at the bottom that did not fill a tile.
    pub dropped_columns: usize,
    pub dropped_rows: usize,
}

pub fn partition<P: Clone>(grid: &Grid<P>, tile: usize) -> Result<Tiling<P>> {
    if tile == 0 || tile > grid.width || tile > grid.height {
        return Err(Error::Data(format!(
            "tile size {tile} does not fit a {}x{} raster",
            grid.width, grid.height
        )));
    }
    let (tx, ty) = (grid.width / tile, grid.height / tile);
    let mut tiles = Vec::with_capacity(tx * ty);
    for j in 0..ty {
        for i in 0..tx {
            tiles.push(grid.crop(i * tile, j * tile, tile, tile));
        }
    }
    Ok(Tiling {
        tiles,
        tiles_x: tx,
        tiles_y: ty,
        tile,
        dropped_columns: grid.width - tx * tile,
        dropped_rows: grid.height - ty * tile,
    })
}

/// Inverse of [`partition`] for the covered area.
pub fn reassemble<P: Clone>(t: &Tiling<P>) -> Result<Grid<P>> {
    let first = t.tiles.first().ok_or(Error::Empty("tiling"))?;
    let (w, h) = (t.tiles_x * t.tile, t.tiles_y * t.tile);
    let mut cells = Vec::with_capacity(w * h);
    for y in 0..h {
        for i in 0..t.tiles_x {
            let tile = &t.tiles[(y / t.tile) * t.tiles_x + i];
            let r = y % t.tile;
            cells.extend_from_slice(&tile.cells[r * t.tile..(r + 1) * t.tile]);
        }
    }
    let _ = first;
    Grid::from_cells(w, h, cells)
}

/// Writes a binary (P5) PGM: 0 black, 255 white.
pub fn write_pgm<W: Write>(mask: &BinaryMask, mut w: W) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", mask.width, mask.height)?;
    let bytes: Vec<u8> = mask
        .cells
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Reads a binary (P5) PGM with maxval <= 255. Any nonzero pixel is white.
pub fn read_pgm<R: Read>(r: R) -> Result<BinaryMask> {
    let mut r = BufReader::new(r);
    let mut header = Vec::new();
    while header.len() < 4 {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Data("truncated PGM header".into()));
        }
        let line = line.split('#').next().unwrap_or("");
        header.extend(line.split_whitespace().map(str::to_owned));
    }
    if header[0] != "P5" {
        return Err(Error::Data(format!(
            "unsupported PGM magic {:?}",
            header[0]
        )));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Data(format!("bad PGM header field {s:?}")))
    };
    let (w, h, maxval) = (parse(&header[1])?, parse(&header[2])?, parse(&header[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Data(format!("unsupported PGM maxval {maxval}")));
    }
    let mut bytes = vec![0u8; w * h];
    r.read_exact(&mut bytes)?;
    BinaryMask::from_cells(w, h, bytes.into_iter().map(|b| b != 0).collect())
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<BinaryMask> {
    read_pgm(std::fs::File::open(path)?)
}

pub fn save_pgm(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_pgm(mask, std::io::BufWriter::new(std::fs::File::create(path)?))
}
