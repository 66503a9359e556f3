//! Lattices on H¹, grid functions with an interior/band/exterior mask, the dump format and
//! resampling between lattices.

use std::io::{self, Write};

use crate::error::{Error, Result};

/// A box lattice in (x, y, t) with horizontal spacing h and vertical spacing h_t. Node
/// (i, j, k) sits at lo + (i h, j h, k h_t) and is stored at (i·ny + j)·nt + k, so that
/// vertical columns are contiguous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: [f64; 3],
    pub h: f64,
    pub ht: f64,
    pub dims: [usize; 3],
}

impl Grid {
    pub fn new(lo: [f64; 3], h: f64, ht: f64, dims: [usize; 3]) -> Result<Self> {
        if !(h > 0.0 && ht > 0.0) || !h.is_finite() || !ht.is_finite() {
            return Err(Error::InvalidArgument(format!("grid spacings must be positive, got h = {h}, ht = {ht}")));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidArgument(format!("grid needs at least 2 nodes per axis, got {dims:?}")));
        }
        Ok(Self { lo, h, ht, dims })
    }

    /// Lattice symmetric about `center` covering center ± half (rounded down to whole cells).
    pub fn centered(center: [f64; 3], half: [f64; 3], h: f64, ht: f64) -> Result<Self> {
        let steps = [h, h, ht];
        let mut lo = [0.0; 3];
        let mut dims = [0; 3];
        for a in 0..3 {
            let m = (half[a] / steps[a] + 1e-9).floor() as usize;
            dims[a] = 2 * m + 1;
            lo[a] = center[a] - m as f64 * steps[a];
        }
        Self::new(lo, h, ht, dims)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn columns(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.dims[2];
        let c = idx / self.dims[2];
        (c / self.dims[1], c % self.dims[1], k)
    }

    #[inline]
    pub fn coord(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.lo[0] + i as f64 * self.h, self.lo[1] + j as f64 * self.h, self.lo[2] + k as f64 * self.ht]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unravel(idx);
        self.coord(i, j, k)
    }

    pub fn hi(&self) -> [f64; 3] {
        self.coord(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1)
    }

    /// The lattice with twice the spacings over (at least) the same box, sharing `center`.
    pub fn coarsened(&self, center: [f64; 3]) -> Result<Self> {
        let hi = self.hi();
        let half = [
            (hi[0] - center[0]).max(center[0] - self.lo[0]),
            (hi[1] - center[1]).max(center[1] - self.lo[1]),
            (hi[2] - center[2]).max(center[2] - self.lo[2]),
        ];
        Self::centered(center, half, 2.0 * self.h, 2.0 * self.ht)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum NodeKind {
    Exterior = 0,
    Interior = 1,
    /// Outside Ω but reached by the stencil of an interior node; carries boundary data.
    Band = 2,
}

impl NodeKind {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub mask: Vec<NodeKind>,
}

impl GridFunction {
    /// Samples `f` at every node; nodes where `interior` holds are interior, the rest band.
    pub fn sample(grid: Grid, f: impl Fn([f64; 3]) -> f64, interior: impl Fn([f64; 3]) -> bool) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut mask = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let p = grid.point(idx);
            values.push(f(p));
            mask.push(if interior(p) { NodeKind::Interior } else { NodeKind::Band });
        }
        Self { grid, values, mask }
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.mask.iter().filter(|&&m| m == kind).count()
    }

    /// Maximum of |self − f| over interior nodes.
    pub fn sup_error(&self, f: impl Fn([f64; 3]) -> f64) -> f64 {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == NodeKind::Interior)
            .map(|(idx, _)| (self.values[idx] - f(self.grid.point(idx))).abs())
            .fold(0.0, f64::max)
    }

    /// Header line, column names, then one row per node in index order. Exterior values are `nan`.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        let g = &self.grid;
        writeln!(
            w,
            "# n=1 axes=x,y,t dims={}x{}x{} lo={},{},{} h={} ht={} mask=0:exterior,1:interior,2:band",
            g.dims[0], g.dims[1], g.dims[2], g.lo[0], g.lo[1], g.lo[2], g.h, g.ht
        )?;
        writeln!(w, "i,j,k,x,y,t,mask,value")?;
        for idx in 0..g.len() {
            let (i, j, k) = g.unravel(idx);
            let p = g.coord(i, j, k);
            let v = if self.mask[idx] == NodeKind::Exterior { f64::NAN } else { self.values[idx] };
            writeln!(
                w,
                "{i},{j},{k},{:.10},{:.10},{:.10},{},{}",
                p[0],
                p[1],
                p[2],
                self.mask[idx].code(),
                if v.is_nan() { "nan".to_string() } else { format!("{v:.12e}") }
            )?;
        }
        Ok(())
    }

    /// Parses the dump format back.
    pub fn read_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty dump".into()))?;
        let field = |name: &str| -> Result<&str> {
            header
                .split_whitespace()
                .find_map(|tok| tok.strip_prefix(name).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| Error::InvalidArgument(format!("dump header lacks {name}")))
        };
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad number {s}: {e}")));
        let dims: Vec<usize> = field("dims")?
            .split('x')
            .map(|s| s.parse().map_err(|e| Error::InvalidArgument(format!("bad dims: {e}"))))
            .collect::<Result<_>>()?;
        let lo: Vec<f64> = field("lo")?.split(',').map(parse).collect::<Result<_>>()?;
        if dims.len() != 3 || lo.len() != 3 {
            return Err(Error::InvalidArgument("dump header dims/lo must have 3 entries".into()));
        }
        let grid =
            Grid::new([lo[0], lo[1], lo[2]], parse(field("h")?)?, parse(field("ht")?)?, [dims[0], dims[1], dims[2]])?;
        lines.next();
        let mut values = vec![f64::NAN; grid.len()];
        let mut mask = vec![NodeKind::Exterior; grid.len()];
        for (row, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 8 || row >= grid.len() {
                return Err(Error::InvalidArgument(format!("malformed dump row {}", row + 3)));
            }
            mask[row] = match cols[6] {
                "1" => NodeKind::Interior,
                "2" => NodeKind::Band,
                _ => NodeKind::Exterior,
            };
            values[row] = parse(cols[7])?;
        }
        Ok(Self { grid, values, mask })
    }
}

/// Trilinear interpolation of `src` at p. Cells with non-finite corners fall back to the
/// mean of their finite corners; `None` outside the lattice or with no finite corner.
pub fn interpolate(src: &GridFunction, p: [f64; 3]) -> Option<f64> {
    let g = &src.grid;
    let steps = [g.h, g.h, g.ht];
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let s = (p[a] - g.lo[a]) / steps[a];
        if s < -1e-9 || s > (g.dims[a] - 1) as f64 + 1e-9 {
            return None;
        }
        let b = (s.floor().max(0.0) as usize).min(g.dims[a] - 2);
        base[a] = b;
        frac[a] = (s - b as f64).clamp(0.0, 1.0);
    }
    let mut acc = 0.0;
    let mut wsum = 0.0;
    let mut fallback = 0.0;
    let mut nfin = 0usize;
    for c in 0..8 {
        let o = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
        let idx = g.idx(base[0] + o[0], base[1] + o[1], base[2] + o[2]);
        let v = src.values[idx];
        if src.mask[idx] == NodeKind::Exterior || !v.is_finite() {
            continue;
        }
        let w: f64 = (0..3).map(|a| if o[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
        acc += w * v;
        wsum += w;
        fallback += v;
        nfin += 1;
    }
    if nfin == 8 {
        Some(acc)
    } else if wsum > 1e-12 {
        Some(acc / wsum)
    } else if nfin > 0 {
        Some(fallback / nfin as f64)
    } else {
        None
    }
}

/// Values of `src` at the nodes of `dst` (NaN where undefined).
pub fn resample(src: &GridFunction, dst: &Grid) -> Vec<f64> {
    (0..dst.len()).map(|idx| interpolate(src, dst.point(idx)).unwrap_or(f64::NAN)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_roundtrip() {
        let g = Grid::centered([0.0; 3], [1.0, 0.5, 0.75], 0.25, 0.25).unwrap();
        assert_eq!(g.dims, [9, 5, 7]);
        for idx in [0, 17, g.len() - 1] {
            let (i, j, k) = g.unravel(idx);
            assert_eq!(g.idx(i, j, k), idx);
        }
        assert_eq!(g.coord(4, 2, 3), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn trilinear_is_exact_on_affine() {
        let g = Grid::centered([0.0; 3], [1.0; 3], 0.25, 0.125).unwrap();
        let f = |p: [f64; 3]| 1.0 + 2.0 * p[0] - p[1] + 3.0 * p[2];
        let gf = GridFunction::sample(g, f, |_| true);
        let fine = Grid::centered([0.0; 3], [1.0; 3], 0.1, 0.1).unwrap();
        for (idx, v) in resample(&gf, &fine).iter().enumerate() {
            assert!((v - f(fine.point(idx))).abs() < 1e-12);
        }
    }

    #[test]
    fn dump_roundtrip() {
        let g = Grid::centered([0.0; 3], [0.5; 3], 0.25, 0.25).unwrap();
        let mut gf = GridFunction::sample(g, |p| p[0] * p[1] + p[2], |p| p[0] > 0.0);
        gf.mask[0] = NodeKind::Exterior;
        let mut buf = Vec::new();
        gf.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap() == "i,j,k,x,y,t,mask,value");
        let back = GridFunction::read_dump(&text).unwrap();
        assert_eq!(back.mask, gf.mask);
        assert!(back.values[0].is_nan());
        for idx in 1..g.len() {
            assert!((back.values[idx] - gf.values[idx]).abs() <= 1e-11 * (1.0 + gf.values[idx].abs()));
        }
    }
}
