//! Additive preconditioners `T⁻¹ = Σ R_iᵀ A_i⁻¹ R_i` and a global RS
//! preconditioner for comparison.

use std::collections::HashMap;
use std::time::Instant;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{cholesky, CholeskyFactor};
use crate::error::{Error, Result};
use crate::fast_matvec::LinearOperator;
use crate::geometry::{Decomposition, DecompositionKind, Grid, Partitioning};
use crate::kernel::{KernelOperator, DEFAULT_DENSE_LIMIT};
use crate::rskel::{factorize, BoxTree, ProxyConfig, SkelFactor};

/// How each subproblem `A_i` is factorized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "backend")]
pub enum Backend {
    /// Dense Cholesky.
    Exact,
    /// Recursive skeletonization with ID tolerance `eps`.
    Rskel { eps: f64, proxy: ProxyConfig },
}

impl Backend {
    pub fn rskel(eps: f64) -> Self {
        Backend::Rskel {
            eps,
            proxy: ProxyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerKind {
    None,
    Jacobi,
    Schwarz,
    Cbd,
    RsGlobal,
}

impl std::fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PreconditionerKind::None => "none",
            PreconditionerKind::Jacobi => "jacobi",
            PreconditionerKind::Schwarz => "schwarz",
            PreconditionerKind::Cbd => "cbd",
            PreconditionerKind::RsGlobal => "rs-global",
        })
    }
}

impl std::str::FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => PreconditionerKind::None,
            "jacobi" => PreconditionerKind::Jacobi,
            "schwarz" => PreconditionerKind::Schwarz,
            "cbd" => PreconditionerKind::Cbd,
            "rs-global" => PreconditionerKind::RsGlobal,
            other => return Err(Error::config(format!("unknown preconditioner '{other}'"))),
        })
    }
}

impl From<DecompositionKind> for PreconditionerKind {
    fn from(k: DecompositionKind) -> Self {
        match k {
            DecompositionKind::Jacobi => PreconditionerKind::Jacobi,
            DecompositionKind::Schwarz => PreconditionerKind::Schwarz,
            DecompositionKind::Cbd => PreconditionerKind::Cbd,
        }
    }
}

#[derive(Debug)]
enum LocalSolver {
    Dense(CholeskyFactor),
    Skel(SkelFactor),
}

impl LocalSolver {
    fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        match self {
            LocalSolver::Dense(c) => {
                c.solve_in_place(x);
                Ok(())
            }
            LocalSolver::Skel(s) => s.apply_inverse_in_place(x),
        }
    }

    fn memory_bytes(&self) -> usize {
        match self {
            LocalSolver::Dense(c) => 8 * c.stored_len(),
            LocalSolver::Skel(s) => s.stats().memory_bytes,
        }
    }

    fn skeleton_count(&self) -> usize {
        match self {
            LocalSolver::Dense(c) => c.dim(),
            LocalSolver::Skel(s) => s.stats().skeleton_count,
        }
    }
}

/// Construction figures of a preconditioner.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PrecondStats {
    pub factor_seconds: f64,
    pub memory_bytes: usize,
    /// Points factored densely at the end of each subproblem (its size for
    /// dense solves, the root size for RS).
    pub skeleton_counts: Vec<usize>,
    pub subdomain_sizes: Vec<usize>,
}

impl PrecondStats {
    /// Largest root size over subproblems.
    pub fn max_skeleton_count(&self) -> usize {
        self.skeleton_counts.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug)]
pub struct Preconditioner {
    kind: PreconditionerKind,
    len: usize,
    /// Per subdomain, grid indices in the local order of its solver.
    index_sets: Vec<Vec<usize>>,
    solver_of: Vec<usize>,
    solvers: Vec<LocalSolver>,
    stats: PrecondStats,
}

/// Options shared by all preconditioner builds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Largest subproblem the exact backend accepts.
    pub dense_limit: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            dense_limit: DEFAULT_DENSE_LIMIT,
        }
    }
}

impl Preconditioner {
    /// The identity.
    pub fn none(len: usize) -> Self {
        Self {
            kind: PreconditionerKind::None,
            len,
            index_sets: Vec::new(),
            solver_of: Vec::new(),
            solvers: Vec::new(),
            stats: PrecondStats::default(),
        }
    }

    /// Factorize every subproblem `A(I_i, I_i)` of the decomposition.
    ///
    /// The RS backend uses colored trees for CBD subdomains; Jacobi and
    /// Schwarz blocks are small by design and are always factored densely.
    pub fn build(
        op: &KernelOperator,
        decomposition: &Decomposition,
        backend: Backend,
        options: BuildOptions,
    ) -> Result<Self> {
        if op.grid() != decomposition.grid() {
            return Err(Error::config("operator and decomposition use different grids"));
        }
        let use_rs = matches!(backend, Backend::Rskel { .. }) && decomposition.kind() == DecompositionKind::Cbd;
        if !use_rs {
            if let Some((i, s)) = decomposition
                .subdomains()
                .iter()
                .enumerate()
                .find(|(_, s)| s.indices.len() > options.dense_limit)
            {
                return Err(Error::config(format!(
                    "subdomain {i} has {} points, above the dense limit of {}; use the rskel backend",
                    s.indices.len(),
                    options.dense_limit
                )));
            }
        }
        let start = Instant::now();
        let (index_sets, solver_of, canonical) = share_congruent(decomposition);
        let solvers = canonical
            .into_par_iter()
            .map(|i| {
                let idx = &decomposition.subdomains()[i].indices;
                let solver = match backend {
                    Backend::Rskel { eps, proxy } if use_rs => {
                        let tree = BoxTree::colored(decomposition, i)?;
                        factorize(op, &tree, eps, &proxy).map(LocalSolver::Skel)
                    }
                    _ => cholesky(op.assemble_block(idx, idx).as_ref()).map(LocalSolver::Dense),
                };
                solver.map_err(|e| Error::Subdomain {
                    subdomain: i,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let stats = PrecondStats {
            factor_seconds: start.elapsed().as_secs_f64(),
            memory_bytes: solvers.iter().map(LocalSolver::memory_bytes).sum(),
            skeleton_counts: solver_of.iter().map(|&s| solvers[s].skeleton_count()).collect(),
            subdomain_sizes: index_sets.iter().map(Vec::len).collect(),
        };
        Ok(Self {
            kind: decomposition.kind().into(),
            len: op.len(),
            index_sets,
            solver_of,
            solvers,
            stats,
        })
    }

    /// RS factorization of the whole matrix over an `m^d` partition tree.
    pub fn rs_global(op: &KernelOperator, m_per_dim: usize, eps: f64, proxy: ProxyConfig) -> Result<Self> {
        let start = Instant::now();
        let tree = BoxTree::global(&Partitioning::new(op.grid(), m_per_dim)?)?;
        let factor = factorize(op, &tree, eps, &proxy)?;
        let stats = PrecondStats {
            factor_seconds: start.elapsed().as_secs_f64(),
            memory_bytes: factor.stats().memory_bytes,
            skeleton_counts: vec![factor.stats().skeleton_count],
            subdomain_sizes: vec![op.len()],
        };
        Ok(Self {
            kind: PreconditionerKind::RsGlobal,
            len: op.len(),
            index_sets: vec![tree.owned().to_vec()],
            solver_of: vec![0],
            solvers: vec![LocalSolver::Skel(factor)],
            stats,
        })
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    /// Number of subproblems `D` (zero for the identity).
    pub fn num_subdomains(&self) -> usize {
        self.index_sets.len()
    }

    /// Distinct factorizations; mirror-image subdomains share one.
    pub fn num_factorizations(&self) -> usize {
        self.solvers.len()
    }

    pub fn stats(&self) -> &PrecondStats {
        &self.stats
    }

    /// Apply only the `i`-th term `R_iᵀ A_i⁻¹ R_i`.
    pub fn apply_subdomain(&self, i: usize, f: &[f64]) -> Result<Vec<f64>> {
        Error::check_len(self.len, f.len())?;
        let idx = self
            .index_sets
            .get(i)
            .ok_or_else(|| Error::config(format!("no subdomain {i}")))?;
        let mut local: Vec<f64> = idx.iter().map(|&j| f[j]).collect();
        self.solvers[self.solver_of[i]].solve_in_place(&mut local)?;
        let mut out = vec![0.0; self.len];
        for (&j, &v) in idx.iter().zip(&local) {
            out[j] = v;
        }
        Ok(out)
    }

    /// Dense `T⁻¹`, assembled block by block.
    pub fn dense_inverse(&self) -> Result<Mat<f64>> {
        let n = self.len;
        if self.kind == PreconditionerKind::None {
            return Ok(Mat::identity(n, n));
        }
        let mut t = Mat::<f64>::zeros(n, n);
        let inverses = self
            .solvers
            .iter()
            .map(|solver| match solver {
                LocalSolver::Dense(c) => Ok(c.inverse()),
                LocalSolver::Skel(s) => {
                    let k = s.len();
                    let cols = (0..k)
                        .into_par_iter()
                        .map(|j| {
                            let mut e = vec![0.0; k];
                            e[j] = 1.0;
                            s.apply_inverse_in_place(&mut e).map(|_| e)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Mat::from_fn(k, k, |i, j| cols[j][i]))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        for (idx, &s) in self.index_sets.iter().zip(&self.solver_of) {
            let inv = &inverses[s];
            for (b, &gj) in idx.iter().enumerate() {
                for (a, &gi) in idx.iter().enumerate() {
                    t[(gi, gj)] += inv[(a, b)];
                }
            }
        }
        Ok(t)
    }
}

fn reflect(grid: &Grid, index: usize, mask: usize) -> usize {
    let n = grid.n_per_dim();
    let mut c = grid.multi_index(index);
    for (a, x) in c.iter_mut().enumerate().take(grid.dim()) {
        if mask >> a & 1 == 1 {
            *x = n - 1 - *x;
        }
    }
    grid.linear_index(&c)
}

/// Groups subdomains that are mirror images of an earlier one under axis
/// reflections of the grid. Reflections preserve every kernel entry, so a
/// mirrored subdomain reuses the earlier factorization with its indices
/// listed in reflected order.
///
/// Returns per-subdomain index lists, the solver slot of each subdomain and
/// the subdomains that need their own factorization.
fn share_congruent(decomposition: &Decomposition) -> (Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
    let grid = decomposition.grid();
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut index_sets = Vec::with_capacity(decomposition.len());
    let mut solver_of = Vec::with_capacity(decomposition.len());
    let mut canonical: Vec<usize> = Vec::new();
    for sub in decomposition.subdomains() {
        let idx = &sub.indices;
        let found = (1..1usize << grid.dim()).find_map(|mask| {
            let mut key: Vec<usize> = idx.iter().map(|&j| reflect(grid, j, mask)).collect();
            key.sort_unstable();
            seen.get(&key).map(|&slot| (slot, mask))
        });
        match found {
            Some((slot, mask)) => {
                let source = &decomposition.subdomains()[canonical[slot]].indices;
                index_sets.push(source.iter().map(|&j| reflect(grid, j, mask)).collect());
                solver_of.push(slot);
            }
            None => {
                let slot = canonical.len();
                seen.entry(idx.clone()).or_insert(slot);
                canonical.push(index_sets.len());
                index_sets.push(idx.clone());
                solver_of.push(slot);
            }
        }
    }
    (index_sets, solver_of, canonical)
}

impl LinearOperator for Preconditioner {
    fn len(&self) -> usize {
        self.len
    }

    fn apply_into(&self, f: &[f64], y: &mut [f64]) -> Result<()> {
        Error::check_len(self.len, f.len())?;
        Error::check_len(self.len, y.len())?;
        if self.kind == PreconditionerKind::None {
            y.copy_from_slice(f);
            return Ok(());
        }
        let locals = self
            .index_sets
            .par_iter()
            .zip(self.solver_of.par_iter())
            .map(|(idx, &s)| {
                let mut local: Vec<f64> = idx.iter().map(|&j| f[j]).collect();
                self.solvers[s].solve_in_place(&mut local).map(|_| local)
            })
            .collect::<Result<Vec<_>>>()?;
        // fixed accumulation order keeps results reproducible
        y.fill(0.0);
        for (idx, local) in self.index_sets.iter().zip(&locals) {
            for (&j, &v) in idx.iter().zip(local) {
                y[j] += v;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (Grid, KernelOperator) {
        let g = Grid::new(2, n).unwrap();
        let op = KernelOperator::new(&g).unwrap();
        (g, op)
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn dense_mul(a: &Mat<f64>, v: &[f64]) -> Vec<f64> {
        (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * v[j]).sum()).collect()
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    #[test]
    fn identity_preconditioner() {
        let p = Preconditioner::none(5);
        let f = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(p.apply(&f).unwrap(), f.to_vec());
        assert!(p.apply(&[1.0]).is_err());
        assert_eq!(p.num_subdomains(), 0);
    }

    #[test]
    fn jacobi_block_sizes() {
        let (g, op) = setup(16);
        let d = Decomposition::new(&g, 4, 0, DecompositionKind::Jacobi).unwrap();
        let p = Preconditioner::build(&op, &d, Backend::Exact, BuildOptions::default()).unwrap();
        assert_eq!(p.num_subdomains(), 16);
        assert!(p.stats().subdomain_sizes.iter().all(|&s| s == 16));
        assert_eq!(p.kind(), PreconditionerKind::Jacobi);
    }

    #[test]
    fn cbd_subproblem_sizes_match_enumeration() {
        let (g, op) = setup(16);
        let d = Decomposition::new(&g, 4, 1, DecompositionKind::Cbd).unwrap();
        let p = Preconditioner::build(&op, &d, Backend::Exact, BuildOptions::default()).unwrap();
        assert_eq!(p.num_subdomains(), 4);
        // brute force: count points within one layer of a partition of the color
        for c in 0..4usize {
            let count = (0..g.len())
                .filter(|&i| {
                    let mi = g.multi_index(i);
                    (0..4).any(|p| {
                        let lat = [p % 2 * 2 + (c & 1), p / 2 * 2 + ((c >> 1) & 1)];
                        (0..2).all(|a| {
                            let lo = (lat[a] * 4) as i64 - 1;
                            let hi = (lat[a] * 4 + 4) as i64;
                            (mi[a] as i64) >= lo && (mi[a] as i64) <= hi
                        })
                    })
                })
                .count();
            assert_eq!(p.stats().subdomain_sizes[c], count);
        }
    }

    #[test]
    fn single_subdomain_is_exact_inverse() {
        let (g, op) = setup(8);
        let d = Decomposition::from_index_sets(&g, DecompositionKind::Jacobi, vec![(0..64).collect()]).unwrap();
        let p = Preconditioner::build(&op, &d, Backend::Exact, BuildOptions::default()).unwrap();
        let f = random(64, 1);
        let u = p.apply(&f).unwrap();
        let a = op.assemble_full();
        let r: Vec<f64> = dense_mul(&a, &u).iter().zip(&f).map(|(x, y)| x - y).collect();
        assert!(dot(&r, &r).sqrt() <= 1e-10 * dot(&f, &f).sqrt());
    }

    #[test]
    fn symmetric_positive_and_consistent_with_dense_inverse() {
        let (g, op) = setup(16);
        for (kind, m) in [
            (DecompositionKind::Jacobi, 2),
            (DecompositionKind::Schwarz, 4),
            (DecompositionKind::Cbd, 4),
        ] {
            let d = Decomposition::new(&g, m, 1, kind).unwrap();
            let p = Preconditioner::build(&op, &d, Backend::Exact, BuildOptions::default()).unwrap();
            let (u, v) = (random(256, 2), random(256, 3));
            let (pu, pv) = (p.apply(&u).unwrap(), p.apply(&v).unwrap());
            let lhs = dot(&pu, &v);
            assert!((lhs - dot(&u, &pv)).abs() <= 1e-10 * lhs.abs());
            assert!(dot(&pu, &u) > 0.0);
            let t = p.dense_inverse().unwrap();
            let tu = dense_mul(&t, &u);
            for i in 0..256 {
                assert!((tu[i] - pu[i]).abs() <= 1e-10 * pu[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn projection_properties() {
        let (g, op) = setup(16);
        let a = op.assemble_full();
        let d = Decomposition::new(&g, 4, 1, DecompositionKind::Schwarz).unwrap();
        let p = Preconditioner::build(&op, &d, Backend::Exact, BuildOptions::default()).unwrap();
        let v = random(256, 4);
        let i = 5;
        let pv = p.apply_subdomain(i, &dense_mul(&a, &v)).unwrap();
        let ppv = p.apply_subdomain(i, &dense_mul(&a, &pv)).unwrap();
        let diff: Vec<f64> = ppv.iter().zip(&pv).map(|(x, y)| x - y).collect();
        assert!(dot(&diff, &diff).sqrt() <= 1e-8 * dot(&v, &v).sqrt());

        // a vector supported in the subdomain is reproduced
        let mut w = vec![0.0; 256];
        for &j in &d.subdomains()[i].indices {
            w[j] = v[j];
        }
        let pw = p.apply_subdomain(i, &dense_mul(&a, &w)).unwrap();
        let diff: Vec<f64> = pw.iter().zip(&w).map(|(x, y)| x - y).collect();
        assert!(dot(&diff, &diff).sqrt() <= 1e-8 * dot(&w, &w).sqrt());
    }

    #[test]
    fn rskel_backend_for_cbd() {
        let (g, op) = setup(32);
        let d = Decomposition::new(&g, 8, 1, DecompositionKind::Cbd).unwrap();
        let exact = Preconditioner::build(&op, &d, Backend::Exact, BuildOptions::default()).unwrap();
        let rs = Preconditioner::build(&op, &d, Backend::rskel(1e-9), BuildOptions::default()).unwrap();
        assert!(rs.stats().max_skeleton_count() < exact.stats().max_skeleton_count());
        let f = random(1024, 5);
        let (a, b) = (exact.apply(&f).unwrap(), rs.apply(&f).unwrap());
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        assert!(dot(&diff, &diff).sqrt() <= 1e-4 * dot(&a, &a).sqrt());
    }

    #[test]
    fn mirrored_subdomains_share_factors() {
        for (dim, n, m, kind, expect) in [
            (2, 16, 4, DecompositionKind::Cbd, 1),
            (3, 8, 2, DecompositionKind::Cbd, 1),
            (2, 12, 3, DecompositionKind::Schwarz, 4),
            (2, 16, 4, DecompositionKind::Jacobi, 4),
        ] {
            let g = Grid::new(dim, n).unwrap();
            let op = KernelOperator::new(&g).unwrap();
            let d = Decomposition::new(&g, m, 1, kind).unwrap();
            let p = Preconditioner::build(&op, &d, Backend::Exact, BuildOptions::default()).unwrap();
            assert_eq!(p.num_factorizations(), expect, "{dim}D {kind}");
            let f = random(g.len(), 9);
            for (i, sub) in d.subdomains().iter().enumerate() {
                // independent solve on the subdomain's own ordering
                let idx = &sub.indices;
                let mut x: Vec<f64> = idx.iter().map(|&j| f[j]).collect();
                cholesky(op.assemble_block(idx, idx).as_ref()).unwrap().solve_in_place(&mut x);
                let got = p.apply_subdomain(i, &f).unwrap();
                for (&j, &xj) in idx.iter().zip(&x) {
                    assert!((got[j] - xj).abs() <= 1e-9 * xj.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn dense_limit_enforced() {
        let (g, op) = setup(16);
        let d = Decomposition::new(&g, 2, 1, DecompositionKind::Cbd).unwrap();
        let small = BuildOptions { dense_limit: 50 };
        let err = Preconditioner::build(&op, &d, Backend::Exact, small).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn rs_global_wraps_factorization() {
        let (_, op) = setup(16);
        let p = Preconditioner::rs_global(&op, 4, 1e-9, ProxyConfig::default()).unwrap();
        assert_eq!(p.kind(), PreconditionerKind::RsGlobal);
        let f = random(256, 6);
        let u = p.apply(&f).unwrap();
        let a = op.assemble_full();
        let r: Vec<f64> = dense_mul(&a, &u).iter().zip(&f).map(|(x, y)| x - y).collect();
        assert!(dot(&r, &r).sqrt() <= 1e-6 * dot(&f, &f).sqrt());
    }

    #[test]
    fn kind_parsing() {
        for k in ["none", "jacobi", "schwarz", "cbd", "rs-global"] {
            assert_eq!(k.parse::<PreconditionerKind>().unwrap().to_string(), k);
        }
        assert!("bogus".parse::<PreconditionerKind>().is_err());
    }
}
