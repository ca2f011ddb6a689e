use std::time::Instant;

use faer::Mat;
use serde::Serialize;

use super::proxy::{proxy_points, ProxyConfig};
use super::tree::BoxTree;
use crate::dense::{cholesky, interpolative_decomposition, CholeskyFactor};
use crate::error::{Error, Result};
use crate::geometry::MAX_DIM;
use crate::kernel::KernelOperator;

/// Size and cost figures of a factorization.
#[derive(Debug, Clone, Serialize)]
pub struct SkelStats {
    /// Points left at the root, factored densely.
    pub skeleton_count: usize,
    pub memory_bytes: usize,
    pub factor_seconds: f64,
    /// Largest skeleton count among the leaves.
    pub max_leaf_rank: usize,
    /// Active points at the start of each level; the last entry equals `skeleton_count`.
    pub level_dofs: Vec<usize>,
}

/// One compress-then-eliminate step.
#[derive(Debug, Clone)]
struct Step {
    redundant: Vec<usize>,
    skeleton: Vec<usize>,
    /// `|s| x |r|` interpolation matrix.
    t: Mat<f64>,
    /// Cholesky factor of the redundant block.
    chol: CholeskyFactor,
    /// `L⁻¹ B_rs`, `|r| x |s|`.
    e: Mat<f64>,
}

/// Approximate factorization `A ≈ W⁻ᵀ diag(I, C) W⁻¹` over the points of a
/// [`BoxTree`]; vectors are indexed by the tree's local numbering.
#[derive(Debug, Clone)]
pub struct SkelFactor {
    len: usize,
    steps: Vec<Step>,
    root_indices: Vec<usize>,
    root: Option<CholeskyFactor>,
    stats: SkelStats,
}

fn gather(a: &Mat<f64>, rows: &[usize], cols: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn factorize(op: &KernelOperator, tree: &BoxTree, eps: f64, proxy: &ProxyConfig) -> Result<SkelFactor> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::config(format!("eps must lie in (0, 1) (got {eps})")));
    }
    let grid = tree.grid();
    if grid != op.grid() {
        return Err(Error::config("tree and operator are built on different grids"));
    }
    let dim = grid.dim();
    proxy.validate(dim)?;
    let start = Instant::now();
    let owned = tree.owned();
    let points: Vec<[f64; MAX_DIM]> = owned.iter().map(|&g| grid.point(g)).collect();
    let entry = |i: usize, j: usize| op.entry(owned[i], owned[j]);
    let block = |rows: &[usize], cols: &[usize]| {
        Mat::from_fn(rows.len(), cols.len(), |i, j| entry(rows[i], cols[j]))
    };

    let boxes = tree.boxes();
    let levels = tree.levels();
    // active points and the current diagonal block of every box on the level
    let mut active: Vec<Vec<usize>> = vec![Vec::new(); boxes.len()];
    let mut diag: Vec<Mat<f64>> = vec![Mat::new(); boxes.len()];
    for &b in &levels[0] {
        active[b] = boxes[b].indices.clone();
        diag[b] = block(&active[b], &active[b]);
    }

    let mut steps = Vec::new();
    let mut level_dofs = Vec::with_capacity(levels.len());
    let mut max_leaf_rank = 0;
    let mut memory = 0usize;
    for (lvl, ids) in levels.iter().enumerate() {
        if lvl > 0 {
            for &b in ids {
                let children = &boxes[b].children;
                let mut idx = Vec::new();
                let mut owner = Vec::new();
                for (c, &ch) in children.iter().enumerate() {
                    idx.extend_from_slice(&active[ch]);
                    owner.extend((0..active[ch].len()).map(|k| (c, k)));
                }
                let mut d = Mat::from_fn(idx.len(), idx.len(), |i, j| {
                    let ((ci, ki), (cj, kj)) = (owner[i], owner[j]);
                    if ci == cj {
                        diag[children[ci]][(ki, kj)]
                    } else {
                        entry(idx[i], idx[j])
                    }
                });
                if d.nrows() == 0 {
                    d = Mat::new();
                }
                for &ch in children {
                    diag[ch] = Mat::new();
                    active[ch] = Vec::new();
                }
                active[b] = idx;
                diag[b] = d;
            }
        }
        level_dofs.push(ids.iter().map(|&b| active[b].len()).sum());
        if lvl + 1 == levels.len() {
            break;
        }
        for &b in ids {
            let p = active[b].clone();
            if p.is_empty() {
                continue;
            }
            let bx = &boxes[b];
            let center = bx.center();
            let radius = proxy.radius_factor * bx.side();

            // exact rows from nearby active points, proxy rows for the rest
            let mut near = Vec::new();
            for &o in ids {
                if o == b || boxes[o].distance_to(&center) >= radius {
                    continue;
                }
                near.extend(active[o].iter().copied().filter(|&j| {
                    let x = &points[j];
                    (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum::<f64>() < radius * radius
                }));
            }
            let pxy = proxy_points(dim, proxy.count(dim), &center, radius);
            let rows = near.len() + pxy.len();
            let mut m = Mat::<f64>::zeros(rows, p.len());
            for (j, &pj) in p.iter().enumerate() {
                for (i, &ni) in near.iter().enumerate() {
                    m[(i, j)] = entry(ni, pj);
                }
                for (i, x) in pxy.iter().enumerate() {
                    m[(near.len() + i, j)] = op.point_entry(x, owned[pj]);
                }
            }
            let id = interpolative_decomposition(m.as_ref(), eps)?;
            if lvl == 0 {
                max_leaf_rank = max_leaf_rank.max(id.rank());
            }
            if id.redundant.is_empty() {
                continue;
            }

            let a = &diag[b];
            let (r, s) = (&id.redundant, &id.skeleton);
            let t = &id.interp;
            let a_ss = gather(a, s, s);
            let b_sr = gather(a, s, r) - &a_ss * t;
            let mut b_rr = gather(a, r, r) - gather(a, r, s) * t - t.transpose() * &b_sr;
            for i in 0..b_rr.nrows() {
                for j in 0..i {
                    let v = 0.5 * (b_rr[(i, j)] + b_rr[(j, i)]);
                    b_rr[(i, j)] = v;
                    b_rr[(j, i)] = v;
                }
            }
            let chol = cholesky(b_rr.as_ref()).map_err(|e| match e {
                Error::NotPositiveDefinite { pivot } => Error::IndefiniteBox {
                    box_id: b,
                    level: lvl,
                    pivot,
                },
                other => other,
            })?;
            let mut e = b_sr.transpose().to_owned();
            chol.forward_mat_in_place(e.as_mut());
            let b_ss = a_ss - e.transpose() * &e;

            let redundant: Vec<usize> = r.iter().map(|&k| p[k]).collect();
            let skeleton: Vec<usize> = s.iter().map(|&k| p[k]).collect();
            memory += 8 * (t.nrows() * t.ncols() + chol.stored_len() + e.nrows() * e.ncols() + p.len());
            active[b] = skeleton.clone();
            diag[b] = b_ss;
            steps.push(Step {
                redundant,
                skeleton,
                t: id.interp,
                chol,
                e,
            });
        }
    }

    let root_box = tree.root();
    let root_indices = std::mem::take(&mut active[root_box]);
    let root = if root_indices.is_empty() {
        None
    } else {
        Some(cholesky(diag[root_box].as_ref())?)
    };
    if let Some(r) = &root {
        memory += 8 * (r.stored_len() + root_indices.len());
    }
    let stats = SkelStats {
        skeleton_count: root_indices.len(),
        memory_bytes: memory,
        factor_seconds: start.elapsed().as_secs_f64(),
        max_leaf_rank,
        level_dofs,
    };
    Ok(SkelFactor {
        len: owned.len(),
        steps,
        root_indices,
        root,
        stats,
    })
}

/// `y -= M x`
fn sub_matvec(m: &Mat<f64>, x: &[f64], y: &mut [f64]) {
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            let col = m.col(j);
            for (i, yi) in y.iter_mut().enumerate() {
                *yi -= col[i] * xj;
            }
        }
    }
}

/// `y -= Mᵀ x`
fn sub_matvec_t(m: &Mat<f64>, x: &[f64], y: &mut [f64]) {
    for (j, yj) in y.iter_mut().enumerate() {
        let col = m.col(j);
        let mut s = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            s += col[i] * xi;
        }
        *yj -= s;
    }
}

impl SkelFactor {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stats(&self) -> &SkelStats {
        &self.stats
    }

    /// Number of compress-then-eliminate steps that removed points.
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    /// Apply the approximate inverse in place.
    pub fn apply_inverse_in_place(&self, x: &mut [f64]) -> Result<()> {
        Error::check_len(self.len, x.len())?;
        let mut xr = Vec::new();
        let mut xs = Vec::new();
        for st in &self.steps {
            xr.clear();
            xr.extend(st.redundant.iter().map(|&i| x[i]));
            xs.clear();
            xs.extend(st.skeleton.iter().map(|&i| x[i]));
            sub_matvec_t(&st.t, &xs, &mut xr);
            st.chol.forward_in_place(&mut xr);
            sub_matvec_t(&st.e, &xr, &mut xs);
            scatter(x, &st.redundant, &xr);
            scatter(x, &st.skeleton, &xs);
        }
        if let Some(root) = &self.root {
            let mut y: Vec<f64> = self.root_indices.iter().map(|&i| x[i]).collect();
            root.solve_in_place(&mut y);
            scatter(x, &self.root_indices, &y);
        }
        for st in self.steps.iter().rev() {
            xr.clear();
            xr.extend(st.redundant.iter().map(|&i| x[i]));
            xs.clear();
            xs.extend(st.skeleton.iter().map(|&i| x[i]));
            sub_matvec(&st.e, &xs, &mut xr);
            st.chol.backward_in_place(&mut xr);
            sub_matvec(&st.t, &xr, &mut xs);
            scatter(x, &st.redundant, &xr);
            scatter(x, &st.skeleton, &xs);
        }
        Ok(())
    }

    pub fn apply_inverse(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut x = f.to_vec();
        self.apply_inverse_in_place(&mut x)?;
        Ok(x)
    }
}

fn scatter(x: &mut [f64], idx: &[usize], v: &[f64]) {
    for (&i, &vi) in idx.iter().zip(v) {
        x[i] = vi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Decomposition, DecompositionKind, Grid, Partitioning};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, m: usize) -> (KernelOperator, BoxTree) {
        let g = Grid::new(2, n).unwrap();
        let op = KernelOperator::new(&g).unwrap();
        let tree = BoxTree::global(&Partitioning::new(&g, m).unwrap()).unwrap();
        (op, tree)
    }

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn inverse_error(op: &KernelOperator, tree: &BoxTree, f: &SkelFactor, rng: &mut ChaCha8Rng) -> f64 {
        let a = op.assemble_block(tree.owned(), tree.owned());
        let v = random(tree.owned().len(), rng);
        let av: Vec<f64> = (0..v.len()).map(|i| (0..v.len()).map(|j| a[(i, j)] * v[j]).sum()).collect();
        let w = f.apply_inverse(&av).unwrap();
        let d: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - b).collect();
        norm(&d) / norm(&v)
    }

    #[test]
    fn exact_limit() {
        let (op, tree) = setup(8, 2);
        let f = factorize(&op, &tree, 1e-15, &ProxyConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(inverse_error(&op, &tree, &f, &mut rng) < 1e-10);
    }

    #[test]
    fn loose_tolerance_still_useful() {
        let (op, tree) = setup(16, 4);
        let f = factorize(&op, &tree, 1e-3, &ProxyConfig::default()).unwrap();
        assert!(f.num_steps() > 0);
        assert!(f.stats().skeleton_count < 256);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let err = inverse_error(&op, &tree, &f, &mut rng);
        assert!(err < 0.1, "{err}");
    }

    #[test]
    fn zero_linear_and_symmetric() {
        let (op, tree) = setup(16, 4);
        let f = factorize(&op, &tree, 1e-6, &ProxyConfig::default()).unwrap();
        assert!(f.apply_inverse(&[0.0; 256]).unwrap().iter().all(|&x| x == 0.0));
        assert!(f.apply_inverse(&[1.0; 3]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (u, v) = (random(256, &mut rng), random(256, &mut rng));
        let (fu, fv) = (f.apply_inverse(&u).unwrap(), f.apply_inverse(&v).unwrap());
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&fu, &v) - dot(&u, &fv)).abs() < 1e-10 * dot(&fu, &u).abs());
        let comb: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let fc = f.apply_inverse(&comb).unwrap();
        for i in 0..256 {
            assert!((fc[i] - (2.0 * fu[i] - 3.0 * fv[i])).abs() < 1e-9 * fc[i].abs().max(1.0));
        }
        assert!(dot(&fu, &u) > 0.0);
    }

    #[test]
    fn stats_are_consistent() {
        let (op, tree) = setup(32, 4);
        let f = factorize(&op, &tree, 1e-3, &ProxyConfig::default()).unwrap();
        let s = f.stats();
        assert_eq!(s.level_dofs.len(), tree.num_levels());
        assert_eq!(s.level_dofs[0], 1024);
        assert_eq!(*s.level_dofs.last().unwrap(), s.skeleton_count);
        assert!(s.level_dofs.windows(2).all(|w| w[1] <= w[0]));
        assert!(s.memory_bytes > 0);
        assert!(s.max_leaf_rank > 0 && s.max_leaf_rank <= 64);
    }

    #[test]
    fn colored_subdomain() {
        let g = Grid::new(2, 32).unwrap();
        let op = KernelOperator::new(&g).unwrap();
        let d = Decomposition::new(&g, 8, 1, DecompositionKind::Cbd).unwrap();
        let tree = BoxTree::colored(&d, 0).unwrap();
        let f = factorize(&op, &tree, 1e-9, &ProxyConfig::default()).unwrap();
        assert!(f.stats().skeleton_count < tree.owned().len());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let err = inverse_error(&op, &tree, &f, &mut rng);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn rejects_bad_eps() {
        let (op, tree) = setup(8, 2);
        assert!(factorize(&op, &tree, 0.0, &ProxyConfig::default()).is_err());
        assert!(factorize(&op, &tree, 1.0, &ProxyConfig::default()).is_err());
    }
}
