//! Finite differences along exact horizontal flows with cubic Lagrange interpolation in t.
//!
//! From (x, y, t) the flow of X₁ by a lands at (x + a, y, t + 2ya) and the flow of X₂ by b
//! at (x, y + b, t − 2xb). Composing both in either order gives the feet
//! P(a, b) = (x + a, y + b, t + 2ya − 2(x + a)b) and Q(a, b) = (x + a, y + b, t − 2xb + 2(y + b)a).
//! Horizontal coordinates of every foot are lattice values; only t is off-lattice, and the
//! t-offset depends on the column alone, so each foot is a fixed four-tap filter per column.

use std::sync::Arc;

use crate::barriers::FirstOrderBound;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::SymmetricMatrix;
use crate::pucci::OperatorSpec;

use super::grid::{Grid, GridFunction, NodeKind};

/// First-order term H(ξ, ∇_H u) for n = 1 solves, with the bound used to build barriers.
#[derive(Clone)]
pub struct Hamiltonian {
    pub f: Arc<dyn Fn([f64; 3], [f64; 2]) -> f64 + Send + Sync>,
    pub bound: FirstOrderBound,
}

impl std::fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hamiltonian").field("bound", &self.bound).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Foot {
    pub col: usize,
    pub f: isize,
    pub w: [f64; 4],
}

/// Cubic Lagrange weights for the offset θ ∈ [0, 1) on taps −1, 0, 1, 2.
#[inline]
fn cubic_weights(th: f64) -> [f64; 4] {
    [
        -th * (th - 1.0) * (th - 2.0) / 6.0,
        (th + 1.0) * (th - 1.0) * (th - 2.0) / 2.0,
        -(th + 1.0) * th * (th - 2.0) / 2.0,
        (th + 1.0) * th * (th - 1.0) / 6.0,
    ]
}

/// Cross-difference signs sign(a)·sign(b) for (a, b) = (+,+), (+,−), (−,+), (−,−).
const CROSS: [(f64, f64, f64); 4] = [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)];

/// The twelve feet of column (i, j): X₁±, X₂±, then P and Q for the four sign pairs.
/// `None` when a foot column lies outside the lattice.
pub(crate) fn column_feet(grid: &Grid, i: usize, j: usize) -> Option<[Foot; 12]> {
    let (nx, ny) = (grid.dims[0] as isize, grid.dims[1] as isize);
    let h = grid.h;
    let p = grid.coord(i, j, 0);
    let (x, y) = (p[0], p[1]);
    let make = |di: isize, dj: isize, dt: f64| -> Option<Foot> {
        let (ii, jj) = (i as isize + di, j as isize + dj);
        if ii < 0 || jj < 0 || ii >= nx || jj >= ny {
            return None;
        }
        let s = dt / grid.ht;
        let f = s.floor();
        Some(Foot { col: (ii * ny + jj) as usize, f: f as isize, w: cubic_weights(s - f) })
    };
    let mut feet = [Foot { col: 0, f: 0, w: [0.0; 4] }; 12];
    feet[0] = make(1, 0, 2.0 * y * h)?;
    feet[1] = make(-1, 0, -2.0 * y * h)?;
    feet[2] = make(0, 1, -2.0 * x * h)?;
    feet[3] = make(0, -1, 2.0 * x * h)?;
    for (m, &(sa, sb, _)) in CROSS.iter().enumerate() {
        let (a, b) = (sa * h, sb * h);
        let di = sa as isize;
        let dj = sb as isize;
        feet[4 + m] = make(di, dj, 2.0 * y * a - 2.0 * (x + a) * b)?;
        feet[8 + m] = make(di, dj, -2.0 * x * b + 2.0 * (y + b) * a)?;
    }
    Some(feet)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ColumnPlan {
    pub k_lo: usize,
    pub k_hi: usize,
    pub feet: [Foot; 12],
}

/// Per-column stencil plans over the span of interior nodes.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub(crate) grid: Grid,
    pub(crate) columns: Vec<Option<ColumnPlan>>,
}

fn runs(interior: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, &v) in interior.iter().enumerate() {
        match (v, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push((s, k - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, interior.len() - 1));
    }
    out
}

impl Stencil {
    /// Builds plans for the given interior set and the resulting mask: footprint nodes
    /// that are not interior become band, everything else exterior.
    pub fn with_mask(grid: Grid, interior: &[bool]) -> Result<(Self, Vec<NodeKind>)> {
        let nt = grid.dims[2];
        let mut mask: Vec<NodeKind> =
            interior.iter().map(|&b| if b { NodeKind::Interior } else { NodeKind::Exterior }).collect();
        let mut columns = vec![None; grid.columns()];
        for i in 0..grid.dims[0] {
            for j in 0..grid.dims[1] {
                let c = i * grid.dims[1] + j;
                let col = &interior[c * nt..(c + 1) * nt];
                let rs = runs(col);
                let (Some(first), Some(last)) = (rs.first(), rs.last()) else { continue };
                let feet = column_feet(&grid, i, j).ok_or(Error::Stencil { node: [i, j, first.0] })?;
                for foot in &feet {
                    if (first.0 as isize) + foot.f - 1 < 0 {
                        return Err(Error::Stencil { node: [i, j, first.0] });
                    }
                    if (last.1 as isize) + foot.f + 2 >= nt as isize {
                        return Err(Error::Stencil { node: [i, j, last.1] });
                    }
                    for &(a, b) in &rs {
                        let lo = (a as isize + foot.f - 1) as usize;
                        let hi = (b as isize + foot.f + 2) as usize;
                        for k in lo..=hi {
                            let idx = foot.col * nt + k;
                            if mask[idx] == NodeKind::Exterior {
                                mask[idx] = NodeKind::Band;
                            }
                        }
                    }
                }
                columns[c] = Some(ColumnPlan { k_lo: first.0, k_hi: last.1, feet });
            }
        }
        Ok((Self { grid, columns }, mask))
    }

    /// Plans for an existing mask; every footprint node of an interior node must be
    /// interior or band.
    pub fn from_mask(grid: Grid, mask: &[NodeKind]) -> Result<Self> {
        let interior: Vec<bool> = mask.iter().map(|&m| m == NodeKind::Interior).collect();
        let (st, derived) = Self::with_mask(grid, &interior)?;
        for (idx, (&have, &need)) in mask.iter().zip(&derived).enumerate() {
            if need == NodeKind::Band && have == NodeKind::Exterior {
                let (i, j, k) = grid.unravel(idx);
                return Err(Error::Stencil { node: [i, j, k] });
            }
        }
        Ok(st)
    }

    /// out[idx] = F(ξ, D²_h u) + H(ξ, ∇_h u) at interior nodes, 0 elsewhere.
    pub(crate) fn sweep(
        &self,
        u: &[f64],
        mask: &[NodeKind],
        op: &OperatorSpec,
        ham: Option<&Hamiltonian>,
        out: &mut [f64],
        exec: Execution,
    ) {
        let g = self.grid;
        let nt = g.dims[2];
        let inv_h2 = 1.0 / (g.h * g.h);
        let inv_8h2 = 0.125 * inv_h2;
        let inv_2h = 0.5 / g.h;
        exec.for_each_chunk_mut(out, nt, |c, chunk| {
            let Some(plan) = &self.columns[c] else {
                chunk.fill(0.0);
                return;
            };
            let len = plan.k_hi - plan.k_lo + 1;
            let mut buf = vec![0.0; 12 * len];
            for (m, foot) in plan.feet.iter().enumerate() {
                let start = (plan.k_lo as isize + foot.f - 1) as usize;
                let src = &u[foot.col * nt + start..foot.col * nt + start + len + 3];
                let dst = &mut buf[m * len..(m + 1) * len];
                let [w0, w1, w2, w3] = foot.w;
                for q in 0..len {
                    dst[q] = w0 * src[q] + w1 * src[q + 1] + w2 * src[q + 2] + w3 * src[q + 3];
                }
            }
            let center = &u[c * nt..(c + 1) * nt];
            let cmask = &mask[c * nt..(c + 1) * nt];
            let p0 = g.coord(c / g.dims[1], c % g.dims[1], 0);
            chunk[..plan.k_lo].fill(0.0);
            chunk[plan.k_hi + 1..].fill(0.0);
            let b = |m: usize, q: usize| buf[m * len + q];
            for q in 0..len {
                let k = plan.k_lo + q;
                if cmask[k] != NodeKind::Interior {
                    chunk[k] = 0.0;
                    continue;
                }
                let uc = center[k];
                let a = (b(0, q) - 2.0 * uc + b(1, q)) * inv_h2;
                let d = (b(2, q) - 2.0 * uc + b(3, q)) * inv_h2;
                let cross = (b(4, q) - b(5, q) - b(6, q) + b(7, q)) + (b(8, q) - b(9, q) - b(10, q) + b(11, q));
                let bb = cross * inv_8h2;
                let xi = [p0[0], p0[1], p0[2] + k as f64 * g.ht];
                let mut r = op.evaluate_2x2(xi, a, bb, d);
                if let Some(hm) = ham {
                    r += (hm.f)(xi, [(b(0, q) - b(1, q)) * inv_2h, (b(2, q) - b(3, q)) * inv_2h]);
                }
                chunk[k] = r;
            }
        });
    }
}

/// Discrete horizontal Hessian and gradient at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDerivatives {
    pub hessian: SymmetricMatrix,
    pub gradient: [f64; 2],
}

pub fn discrete_heisenberg_hessian(u: &GridFunction, node: [usize; 3]) -> Result<DiscreteDerivatives> {
    let g = u.grid;
    let nt = g.dims[2];
    let [i, j, k] = node;
    if i >= g.dims[0] || j >= g.dims[1] || k >= nt {
        return Err(Error::InvalidArgument(format!("node {node:?} outside the lattice")));
    }
    let feet = column_feet(&g, i, j).ok_or(Error::Stencil { node })?;
    let mut vals = [0.0; 12];
    for (m, foot) in feet.iter().enumerate() {
        let base = k as isize + foot.f - 1;
        if base < 0 || base + 3 >= nt as isize {
            return Err(Error::Stencil { node });
        }
        let mut acc = 0.0;
        for tap in 0..4 {
            let idx = foot.col * nt + base as usize + tap;
            if u.mask[idx] == NodeKind::Exterior {
                return Err(Error::Stencil { node });
            }
            acc += foot.w[tap] * u.values[idx];
        }
        vals[m] = acc;
    }
    let uc = u.values[g.idx(i, j, k)];
    let h2 = g.h * g.h;
    let a = (vals[0] - 2.0 * uc + vals[1]) / h2;
    let d = (vals[2] - 2.0 * uc + vals[3]) / h2;
    let bb = ((vals[4] - vals[5] - vals[6] + vals[7]) + (vals[8] - vals[9] - vals[10] + vals[11])) / (8.0 * h2);
    let hessian = SymmetricMatrix::from_row_major(2, &[a, bb, bb, d])?;
    Ok(DiscreteDerivatives {
        hessian,
        gradient: [(vals[0] - vals[1]) / (2.0 * g.h), (vals[2] - vals[3]) / (2.0 * g.h)],
    })
}

/// Nodewise F(ξ, D²_h u) + H(ξ, ∇_h u) on interior nodes; 0 on band nodes, NaN outside.
pub fn operator_residual(
    u: &GridFunction,
    op: &OperatorSpec,
    ham: Option<&Hamiltonian>,
    exec: Execution,
) -> Result<GridFunction> {
    let st = Stencil::from_mask(u.grid, &u.mask)?;
    let mut out = vec![0.0; u.grid.len()];
    st.sweep(&u.values, &u.mask, op, ham, &mut out, exec);
    for (v, m) in out.iter_mut().zip(&u.mask) {
        if *m == NodeKind::Exterior {
            *v = f64::NAN;
        }
    }
    Ok(GridFunction { grid: u.grid, values: out, mask: u.mask.clone() })
}
