use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Decomposition, DecompositionKind, Grid, IndexBox, Partitioning, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeMode {
    /// Leaves are the disjoint partitions of the whole grid.
    Global,
    /// Leaves are the same-colored extended partitions of one subdomain.
    Colored,
}

#[derive(Debug, Clone)]
pub struct TreeBox {
    pub level: usize,
    /// Physical bounding box.
    pub lo: [f64; MAX_DIM],
    pub hi: [f64; MAX_DIM],
    pub children: Vec<usize>,
    pub parent: Option<usize>,
    /// Local indices owned by a leaf; empty for interior boxes.
    pub indices: Vec<usize>,
}

impl TreeBox {
    pub fn center(&self) -> [f64; MAX_DIM] {
        let mut c = [0.0; MAX_DIM];
        for a in 0..MAX_DIM {
            c[a] = 0.5 * (self.lo[a] + self.hi[a]);
        }
        c
    }

    /// Largest edge length.
    pub fn side(&self) -> f64 {
        (0..MAX_DIM).map(|a| self.hi[a] - self.lo[a]).fold(0.0, f64::max)
    }

    /// Euclidean distance from `x` to the box (zero inside).
    pub fn distance_to(&self, x: &[f64; MAX_DIM]) -> f64 {
        (0..MAX_DIM)
            .map(|a| {
                let d = (self.lo[a] - x[a]).max(x[a] - self.hi[a]).max(0.0);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Hierarchy of boxes over a set of owned grid points.
///
/// Level 0 holds the leaves; the last level holds the single root. Local
/// index `i` refers to the grid point `owned()[i]`.
#[derive(Debug, Clone)]
pub struct BoxTree {
    mode: TreeMode,
    grid: Grid,
    owned: Vec<usize>,
    boxes: Vec<TreeBox>,
    levels: Vec<Vec<usize>>,
}

impl BoxTree {
    /// Quadtree/octree over the partition lattice of the whole grid.
    pub fn global(partitioning: &Partitioning) -> Result<Self> {
        let m = partitioning.m_per_dim();
        if !m.is_power_of_two() {
            return Err(Error::config(format!(
                "partitions per dimension must be a power of two for the box tree (got {m})"
            )));
        }
        let grid = *partitioning.grid();
        let leaves = (0..partitioning.len())
            .map(|p| {
                (
                    partitioning.lattice_index(p),
                    partitioning.blocks()[p],
                    partitioning.parts()[p].clone(),
                )
            })
            .collect();
        Self::from_leaves(TreeMode::Global, &grid, (0..grid.len()).collect(), leaves, m)
    }

    /// Tree over one CBD subdomain. Regions of one color sit on a stride-2
    /// sublattice; boxes are merged by a quadtree/octree on that sublattice.
    pub fn colored(decomposition: &Decomposition, subdomain: usize) -> Result<Self> {
        if decomposition.kind() != DecompositionKind::Cbd {
            return Err(Error::config("colored trees need a CBD decomposition"));
        }
        let partitioning = decomposition
            .partitioning()
            .ok_or_else(|| Error::config("colored trees need a lattice decomposition"))?;
        let sub = decomposition
            .subdomains()
            .get(subdomain)
            .ok_or_else(|| Error::config(format!("no subdomain {subdomain}")))?;
        let m = partitioning.m_per_dim();
        if m % 2 != 0 || !(m / 2).is_power_of_two() {
            return Err(Error::config(format!(
                "colored trees need partitions per dimension equal to twice a power of two (got {m})"
            )));
        }
        let grid = *decomposition.grid();
        let dim = grid.dim();
        let extended = decomposition.extended().expect("lattice decomposition");
        // assign every point to the first region that contains it
        let mut taken = vec![false; grid.len()];
        let mut leaves = Vec::with_capacity(sub.regions.len());
        for &p in &sub.regions {
            let mut coord = partitioning.lattice_index(p);
            for c in coord.iter_mut().take(dim) {
                *c /= 2;
            }
            let idx: Vec<usize> = extended.extended()[p]
                .iter()
                .copied()
                .filter(|&j| !std::mem::replace(&mut taken[j], true))
                .collect();
            leaves.push((coord, extended.blocks()[p], idx));
        }
        Self::from_leaves(TreeMode::Colored, &grid, sub.indices.clone(), leaves, m / 2)
    }

    fn from_leaves(
        mode: TreeMode,
        grid: &Grid,
        owned: Vec<usize>,
        leaves: Vec<([usize; MAX_DIM], IndexBox, Vec<usize>)>,
        per_axis: usize,
    ) -> Result<Self> {
        let dim = grid.dim();
        let lin = |c: &[usize; MAX_DIM], k: usize| {
            (0..dim).rev().fold(0, |acc, a| acc * k + c[a])
        };
        let mut keyed: Vec<_> = leaves
            .into_iter()
            .map(|(c, b, idx)| (lin(&c, per_axis), c, b, idx))
            .collect();
        keyed.sort_by_key(|t| t.0);
        if keyed.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::config("two leaves share a lattice position"));
        }

        let mut boxes = Vec::new();
        let mut current: Vec<(usize, [usize; MAX_DIM])> = Vec::new();
        for (_, coord, block, globals) in keyed {
            let (lo, hi) = block.physical_bounds(grid);
            let indices = globals
                .iter()
                .map(|g| {
                    owned
                        .binary_search(g)
                        .map_err(|_| Error::config(format!("leaf point {g} is not owned")))
                })
                .collect::<Result<Vec<_>>>()?;
            current.push((boxes.len(), coord));
            boxes.push(TreeBox {
                level: 0,
                lo,
                hi,
                children: Vec::new(),
                parent: None,
                indices,
            });
        }
        let mut levels = vec![current.iter().map(|c| c.0).collect::<Vec<_>>()];
        let mut k = per_axis;
        let mut level = 0;
        while current.len() > 1 {
            k = k.div_ceil(2).max(1);
            level += 1;
            let mut parents: Vec<(usize, [usize; MAX_DIM], Vec<usize>)> = Vec::new();
            for &(b, c) in &current {
                let mut pc = [0; MAX_DIM];
                for a in 0..dim {
                    pc[a] = c[a] / 2;
                }
                let key = lin(&pc, k);
                match parents.binary_search_by_key(&key, |p| p.0) {
                    Ok(pos) => parents[pos].2.push(b),
                    Err(pos) => parents.insert(pos, (key, pc, vec![b])),
                }
            }
            let mut next = Vec::with_capacity(parents.len());
            for (_, pc, children) in parents {
                let id = boxes.len();
                let mut lo = [f64::INFINITY; MAX_DIM];
                let mut hi = [f64::NEG_INFINITY; MAX_DIM];
                for &ch in &children {
                    boxes[ch].parent = Some(id);
                    for a in 0..MAX_DIM {
                        lo[a] = lo[a].min(boxes[ch].lo[a]);
                        hi[a] = hi[a].max(boxes[ch].hi[a]);
                    }
                }
                boxes.push(TreeBox {
                    level,
                    lo,
                    hi,
                    children,
                    parent: None,
                    indices: Vec::new(),
                });
                next.push((id, pc));
            }
            levels.push(next.iter().map(|c| c.0).collect());
            current = next;
        }
        if current.is_empty() {
            return Err(Error::config("box tree needs at least one leaf"));
        }
        Ok(Self {
            mode,
            grid: *grid,
            owned,
            boxes,
            levels,
        })
    }

    pub fn mode(&self) -> TreeMode {
        self.mode
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Grid indices of the points covered by the tree, ascending.
    pub fn owned(&self) -> &[usize] {
        &self.owned
    }

    pub fn boxes(&self) -> &[TreeBox] {
        &self.boxes
    }

    /// Box ids per level, leaves first, each level in lexicographic order.
    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn root(&self) -> usize {
        self.levels.last().expect("non-empty tree")[0]
    }
}
