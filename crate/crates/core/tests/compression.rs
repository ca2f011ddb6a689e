use faer::Mat;

use iedd_core::dense::interpolative_decomposition;
use iedd_core::geometry::{Grid, MAX_DIM};
use iedd_core::kernel::kernel_value;
use iedd_core::precond::Preconditioner;
use iedd_core::rskel::{proxy_points, ProxyConfig};
use iedd_core::KernelOperator;

/// `k x k` cell centres of the unit square shifted by `origin`.
fn cluster(k: usize, origin: [f64; 2]) -> Vec<[f64; MAX_DIM]> {
    let mut pts = Vec::with_capacity(k * k);
    for j in 0..k {
        for i in 0..k {
            let mut p = [0.0; MAX_DIM];
            p[0] = origin[0] + (i as f64 + 0.5) / k as f64;
            p[1] = origin[1] + (j as f64 + 0.5) / k as f64;
            pts.push(p);
        }
    }
    pts
}

fn kernel_block(targets: &[[f64; MAX_DIM]], sources: &[[f64; MAX_DIM]]) -> Mat<f64> {
    Mat::from_fn(targets.len(), sources.len(), |i, j| {
        let r = [targets[i][0] - sources[j][0], targets[i][1] - sources[j][1]];
        kernel_value(2, &r).unwrap()
    })
}

#[test]
fn separated_cluster_rank_is_size_independent() {
    let targets = cluster(8, [5.0, 0.0]);
    let mut ranks = Vec::new();
    for k in [8, 16] {
        let b = kernel_block(&targets, &cluster(k, [0.0, 0.0]));
        let id = interpolative_decomposition(b.as_ref(), 1e-3).unwrap();
        assert!(id.relative_error(b.as_ref()) <= 1e-2, "k={k}");
        ranks.push(id.rank());
    }
    assert!(ranks[0] < 16, "{ranks:?}");
    assert!(ranks[0].abs_diff(ranks[1]) <= 2, "{ranks:?}");
}

#[test]
fn skeletons_sit_on_the_cluster_boundary() {
    let k = 8;
    let sources = cluster(k, [0.0, 0.0]);
    // exterior field: a ring of far points plus the separated cluster
    let mut exterior = proxy_points(2, 64, &[0.5, 0.5, 0.0], 1.5);
    exterior.extend(cluster(8, [5.0, 0.0]));
    let b = kernel_block(&exterior, &sources);
    let id = interpolative_decomposition(b.as_ref(), 1e-3).unwrap();
    let outer = id
        .skeleton
        .iter()
        .filter(|&&c| {
            let (i, j) = (c % k, c / k);
            i == 0 || j == 0 || i == k - 1 || j == k - 1
        })
        .count();
    assert!(
        outer as f64 >= 0.8 * id.rank() as f64,
        "{outer} of {} skeleton points on the boundary",
        id.rank()
    );
}

#[test]
fn global_skeleton_grows_like_the_boundary() {
    // at fixed leaf size the top-level skeleton follows the domain perimeter
    let mut s = Vec::new();
    for n in [32, 64] {
        let op = KernelOperator::new(&Grid::new(2, n).unwrap()).unwrap();
        let p = Preconditioner::rs_global(&op, n / 8, 1e-3, ProxyConfig::default()).unwrap();
        s.push(p.stats().max_skeleton_count());
    }
    let ratio = s[1] as f64 / s[0] as f64;
    assert!((1.3..=2.6).contains(&ratio), "{s:?}");
}
