//! Uniform grids on the unit cube, uniform partitionings, overlapping
//! extensions, parity colorings and the three subdomain layouts
//! (block Jacobi, additive Schwarz, coloring-based decomposition).
//!
//! Grid indices are lexicographic with the first axis varying fastest.
//! Every index set produced here is sorted ascending.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Uniform cell-centred grid on `[0,1]^dim` with `n` points per axis.
///
/// Dimension 1 is a line mode used only to study two-subdomain splittings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(dim: usize, n_per_dim: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::config(format!("grid dimension must be 1, 2 or 3 (got {dim})")));
        }
        if n_per_dim < 2 {
            return Err(Error::config(format!(
                "grid needs at least 2 points per dimension (got {n_per_dim})"
            )));
        }
        Ok(Self {
            dim,
            n: n_per_dim,
            h: 1.0 / n_per_dim as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_dim(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Total number of points, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index of a lexicographic index; unused trailing axes are zero.
    pub fn multi_index(&self, index: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        let mut rest = index;
        for slot in out.iter_mut().take(self.dim) {
            *slot = rest % self.n;
            rest /= self.n;
        }
        out
    }

    pub fn linear_index(&self, multi: &[usize; MAX_DIM]) -> usize {
        multi[..self.dim]
            .iter()
            .rev()
            .fold(0, |acc, &j| acc * self.n + j)
    }

    /// Coordinates `h (j - 1/2)` of a point (1-based `j`), padded with zeros.
    pub fn point(&self, index: usize) -> [f64; MAX_DIM] {
        let mi = self.multi_index(index);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.h * (mi[a] as f64 + 0.5);
        }
        x
    }

    pub fn points(&self) -> Vec<[f64; MAX_DIM]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// All indices whose multi-index lies in the half-open box `lo..hi`.
    pub fn indices_in_box(&self, lo: &[usize; MAX_DIM], hi: &[usize; MAX_DIM]) -> Vec<usize> {
        let mut lo_full = [0; MAX_DIM];
        let mut hi_full = [1; MAX_DIM];
        lo_full[..self.dim].copy_from_slice(&lo[..self.dim]);
        hi_full[..self.dim].copy_from_slice(&hi[..self.dim]);
        let count: usize = (0..MAX_DIM).map(|a| hi_full[a].saturating_sub(lo_full[a])).product();
        let mut out = Vec::with_capacity(count);
        for k in lo_full[2]..hi_full[2] {
            for j in lo_full[1]..hi_full[1] {
                for i in lo_full[0]..hi_full[0] {
                    out.push(self.linear_index(&[i, j, k]));
                }
            }
        }
        out
    }
}

/// Axis-aligned block of grid indices, half-open per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexBox {
    pub lo: [usize; MAX_DIM],
    pub hi: [usize; MAX_DIM],
}

impl IndexBox {
    /// Physical bounds `[lo*h, hi*h]` of the cells covered by this block.
    pub fn physical_bounds(&self, grid: &Grid) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
        let mut a = [0.0; MAX_DIM];
        let mut b = [0.0; MAX_DIM];
        for d in 0..grid.dim() {
            a[d] = self.lo[d] as f64 * grid.spacing();
            b[d] = self.hi[d] as f64 * grid.spacing();
        }
        (a, b)
    }
}

/// Uniform lattice of `m^dim` disjoint blocks of `(n/m)^dim` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Partitioning {
    grid: Grid,
    m: usize,
    blocks: Vec<IndexBox>,
    parts: Vec<Vec<usize>>,
}

impl Partitioning {
    pub fn new(grid: &Grid, m_per_dim: usize) -> Result<Self> {
        let n = grid.n_per_dim();
        if m_per_dim == 0 || n % m_per_dim != 0 {
            return Err(Error::config(format!(
                "partitions per dimension ({m_per_dim}) must divide grid points per dimension ({n})"
            )));
        }
        let width = n / m_per_dim;
        let lattice = Grid {
            dim: grid.dim(),
            n: m_per_dim,
            h: 1.0 / m_per_dim as f64,
        };
        let count = m_per_dim.pow(grid.dim() as u32);
        let mut blocks = Vec::with_capacity(count);
        let mut parts = Vec::with_capacity(count);
        for p in 0..count {
            let mi = lattice.multi_index(p);
            let mut lo = [0; MAX_DIM];
            let mut hi = [1; MAX_DIM];
            for a in 0..grid.dim() {
                lo[a] = mi[a] * width;
                hi[a] = lo[a] + width;
            }
            let block = IndexBox { lo, hi };
            parts.push(grid.indices_in_box(&block.lo, &block.hi));
            blocks.push(block);
        }
        Ok(Self {
            grid: *grid,
            m: m_per_dim,
            blocks,
            parts,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m_per_dim(&self) -> usize {
        self.m
    }

    /// Number of partitions `M = m^dim`.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn blocks(&self) -> &[IndexBox] {
        &self.blocks
    }

    /// Position of partition `p` on the `m^dim` partition lattice.
    pub fn lattice_index(&self, p: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        let mut rest = p;
        for slot in out.iter_mut().take(self.grid.dim()) {
            *slot = rest % self.m;
            rest /= self.m;
        }
        out
    }

    /// Partitions are adjacent when they share a face, edge or corner.
    pub fn adjacent(&self, p: usize, q: usize) -> bool {
        if p == q {
            return false;
        }
        let a = self.lattice_index(p);
        let b = self.lattice_index(q);
        (0..self.grid.dim()).all(|d| a[d].abs_diff(b[d]) <= 1)
    }
}

/// Partitions dilated by `overlap_width` grid layers, clipped at the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPartitioning {
    overlap_width: usize,
    blocks: Vec<IndexBox>,
    extended: Vec<Vec<usize>>,
}

impl ExtendedPartitioning {
    pub fn new(partitioning: &Partitioning, overlap_width: usize) -> Self {
        let grid = partitioning.grid();
        let n = grid.n_per_dim();
        let mut blocks = Vec::with_capacity(partitioning.len());
        let mut extended = Vec::with_capacity(partitioning.len());
        for block in partitioning.blocks() {
            let mut ext = *block;
            for a in 0..grid.dim() {
                ext.lo[a] = block.lo[a].saturating_sub(overlap_width);
                ext.hi[a] = (block.hi[a] + overlap_width).min(n);
            }
            extended.push(grid.indices_in_box(&ext.lo, &ext.hi));
            blocks.push(ext);
        }
        Self {
            overlap_width,
            blocks,
            extended,
        }
    }

    pub fn overlap_width(&self) -> usize {
        self.overlap_width
    }

    pub fn extended(&self) -> &[Vec<usize>] {
        &self.extended
    }

    pub fn blocks(&self) -> &[IndexBox] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.extended.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extended.is_empty()
    }
}

/// Parity coloring of the partition lattice; colors are 0-based here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    colors: Vec<usize>,
    num_colors: usize,
}

impl Coloring {
    pub fn new(partitioning: &Partitioning) -> Self {
        let dim = partitioning.grid().dim();
        let colors = (0..partitioning.len())
            .map(|p| {
                let mi = partitioning.lattice_index(p);
                (0..dim).map(|a| (mi[a] % 2) << a).sum()
            })
            .collect();
        Self {
            colors,
            num_colors: 1 << dim,
        }
    }

    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    pub fn num_colors(&self) -> usize {
        self.num_colors
    }

    /// Partition ids carrying color `c`, ascending.
    pub fn class(&self, c: usize) -> Vec<usize> {
        self.colors
            .iter()
            .enumerate()
            .filter_map(|(p, &cp)| (cp == c).then_some(p))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompositionKind {
    Jacobi,
    Schwarz,
    Cbd,
}

impl std::fmt::Display for DecompositionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecompositionKind::Jacobi => "jacobi",
            DecompositionKind::Schwarz => "schwarz",
            DecompositionKind::Cbd => "cbd",
        })
    }
}

/// One subdomain: its sorted grid indices and the partitions it is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Subdomain {
    pub indices: Vec<usize>,
    pub regions: Vec<usize>,
}

/// A set of (possibly overlapping) subdomains covering the grid.
#[derive(Debug, Clone)]
pub struct Decomposition {
    kind: DecompositionKind,
    grid: Grid,
    lattice: Option<(Partitioning, ExtendedPartitioning)>,
    coloring: Option<Coloring>,
    subdomains: Vec<Subdomain>,
}

impl Decomposition {
    pub fn new(
        grid: &Grid,
        m_per_dim: usize,
        overlap_width: usize,
        kind: DecompositionKind,
    ) -> Result<Self> {
        let partitioning = Partitioning::new(grid, m_per_dim)?;
        let extended = ExtendedPartitioning::new(&partitioning, overlap_width);
        let mut coloring = None;
        let subdomains = match kind {
            DecompositionKind::Jacobi => partitioning
                .parts()
                .iter()
                .enumerate()
                .map(|(p, idx)| Subdomain {
                    indices: idx.clone(),
                    regions: vec![p],
                })
                .collect(),
            DecompositionKind::Schwarz => extended
                .extended()
                .iter()
                .enumerate()
                .map(|(p, idx)| Subdomain {
                    indices: idx.clone(),
                    regions: vec![p],
                })
                .collect(),
            DecompositionKind::Cbd => {
                let col = Coloring::new(&partitioning);
                let subs = (0..col.num_colors())
                    .map(|c| {
                        let regions = col.class(c);
                        let indices = sorted_union(regions.iter().map(|&p| &extended.extended()[p]));
                        Subdomain { indices, regions }
                    })
                    .filter(|s| !s.regions.is_empty())
                    .collect();
                coloring = Some(col);
                subs
            }
        };
        Ok(Self {
            kind,
            grid: *grid,
            lattice: Some((partitioning, extended)),
            coloring,
            subdomains,
        })
    }

    /// Arbitrary subdomains; used for non-lattice splittings such as two halves.
    pub fn from_index_sets(
        grid: &Grid,
        kind: DecompositionKind,
        sets: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let n = grid.len();
        let mut seen = vec![false; n];
        let mut subdomains = Vec::with_capacity(sets.len());
        for (i, mut set) in sets.into_iter().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(Error::config(format!("subdomain {i} is empty")));
            }
            if let Some(&bad) = set.iter().find(|&&j| j >= n) {
                return Err(Error::config(format!("index {bad} outside grid of {n} points")));
            }
            for &j in &set {
                seen[j] = true;
            }
            subdomains.push(Subdomain {
                indices: set,
                regions: vec![i],
            });
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::config("subdomains do not cover the grid"));
        }
        Ok(Self {
            kind,
            grid: *grid,
            lattice: None,
            coloring: None,
            subdomains,
        })
    }

    /// Two non-overlapping halves split across the first axis.
    pub fn halves(grid: &Grid) -> Result<Self> {
        let n = grid.n_per_dim();
        if n % 2 != 0 {
            return Err(Error::config("half split needs an even number of points per axis"));
        }
        let (left, right): (Vec<usize>, Vec<usize>) =
            (0..grid.len()).partition(|&i| grid.multi_index(i)[0] < n / 2);
        Self::from_index_sets(grid, DecompositionKind::Jacobi, vec![left, right])
    }

    pub fn kind(&self) -> DecompositionKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    /// Number of subdomains `D`.
    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn partitioning(&self) -> Option<&Partitioning> {
        self.lattice.as_ref().map(|(p, _)| p)
    }

    pub fn extended(&self) -> Option<&ExtendedPartitioning> {
        self.lattice.as_ref().map(|(_, e)| e)
    }

    pub fn coloring(&self) -> Option<&Coloring> {
        self.coloring.as_ref()
    }

    pub fn overlap_width(&self) -> usize {
        match (&self.lattice, self.kind) {
            (Some((_, e)), DecompositionKind::Schwarz | DecompositionKind::Cbd) => e.overlap_width(),
            _ => 0,
        }
    }

    /// Number of partitions `M`, or `D` for non-lattice decompositions.
    pub fn num_partitions(&self) -> usize {
        self.partitioning().map_or(self.len(), Partitioning::len)
    }

    /// Index-set block of the region `r` of a subdomain built on this lattice.
    pub fn region_block(&self, region: usize) -> Option<IndexBox> {
        let (p, e) = self.lattice.as_ref()?;
        Some(match self.kind {
            DecompositionKind::Jacobi => p.blocks()[region],
            _ => e.blocks()[region],
        })
    }

    /// Grid indices contained in every subdomain.
    pub fn shared_by_all(&self) -> Vec<usize> {
        let mut count = vec![0usize; self.grid.len()];
        for s in &self.subdomains {
            for &j in &s.indices {
                count[j] += 1;
            }
        }
        let d = self.subdomains.len();
        (0..self.grid.len()).filter(|&j| count[j] == d).collect()
    }
}

fn sorted_union<'a>(sets: impl Iterator<Item = &'a Vec<usize>>) -> Vec<usize> {
    let mut out: Vec<usize> = sets.flatten().copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}
