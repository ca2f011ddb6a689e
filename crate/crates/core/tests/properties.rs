use proptest::prelude::*;

use iedd_core::pcg::random_vector;
use iedd_core::precond::{Backend, BuildOptions, Preconditioner};
use iedd_core::spectrum::{preconditioned_spectrum, SpectrumOptions};
use iedd_core::{Decomposition, DecompositionKind, Grid, KernelOperator, LinearOperator, ToeplitzMatvec};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn grid_strategy() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![(Just(1usize), 2usize..40), (Just(2usize), 2usize..12), (Just(3usize), 2usize..6)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matvec_is_linear_symmetric_and_positive((dim, n) in grid_strategy(), seed in 0u64..1000, a in -3.0f64..3.0) {
        let op = KernelOperator::new(&Grid::new(dim, n).unwrap()).unwrap();
        let fast = ToeplitzMatvec::new(&op);
        let x = random_vector(op.len(), seed);
        let y = random_vector(op.len(), seed + 1);
        let ax = fast.apply(&x).unwrap();
        let ay = fast.apply(&y).unwrap();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let lhs = fast.apply(&combo).unwrap();
        let scale = ax.iter().chain(&ay).fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..op.len() {
            prop_assert!((lhs[i] - (a * ax[i] + ay[i])).abs() <= 1e-12 * scale * (1.0 + a.abs()));
        }
        let (xay, yax) = (dot(&x, &ay), dot(&y, &ax));
        prop_assert!((xay - yax).abs() <= 1e-12 * dot(&x, &x).sqrt() * dot(&ay, &ay).sqrt());
        prop_assert!(dot(&x, &ax) > 0.0);
    }

    #[test]
    fn matvec_matches_entries((dim, n) in grid_strategy(), j in 0usize..10_000) {
        let op = KernelOperator::new(&Grid::new(dim, n).unwrap()).unwrap();
        let j = j % op.len();
        let mut e = vec![0.0; op.len()];
        e[j] = 1.0;
        let col = ToeplitzMatvec::new(&op).apply(&e).unwrap();
        let scale = op.entry(j, j).abs();
        for (i, v) in col.iter().enumerate() {
            prop_assert!((v - op.entry(i, j)).abs() <= 1e-12 * scale.max(1e-300) * 10.0);
        }
    }
}

fn lattice_strategy() -> impl Strategy<Value = (usize, usize, usize, usize, DecompositionKind)> {
    let kind = prop_oneof![
        Just(DecompositionKind::Jacobi),
        Just(DecompositionKind::Schwarz),
        Just(DecompositionKind::Cbd)
    ];
    (prop_oneof![Just(2usize), Just(3usize)], 1usize..4, 1usize..4, 1usize..3, kind).prop_map(
        |(dim, m, cell, w, kind)| {
            let m = if kind == DecompositionKind::Cbd { 2 * m } else { m + 1 };
            let cell = if dim == 3 { 1 + cell % 2 } else { cell + 1 };
            let m = if dim == 3 { m.min(4) } else { m };
            let w = if kind == DecompositionKind::Jacobi { 0 } else { w.min(cell) };
            (dim, m * cell, m, w, kind)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectrum_lies_in_zero_to_d((dim, n, m, w, kind) in lattice_strategy()) {
        let g = Grid::new(dim, n).unwrap();
        let op = KernelOperator::new(&g).unwrap();
        let d = Decomposition::new(&g, m, w, kind).unwrap();
        let p = Preconditioner::build(&op, &d, Backend::Exact, BuildOptions::default()).unwrap();
        let r = preconditioned_spectrum(&op, &p, &SpectrumOptions::default()).unwrap();
        prop_assert!(r.lambda_min > 0.0);
        prop_assert!(r.lambda_min <= r.lambda_max);
        prop_assert!(r.lambda_max <= d.len() as f64 + 1e-8, "{} > {}", r.lambda_max, d.len());
        if kind == DecompositionKind::Jacobi {
            // a single block of the matrix is reproduced exactly
            prop_assert!(r.lambda_min <= 1.0 + 1e-10 && r.lambda_max >= 1.0 - 1e-10);
        }
    }
}
