use polyhardy::grid::{embed, regroup};
use polyhardy::hardy::{backward_shift, multiplier, shift, szego_kernel, truncated_multiplier, truncated_shift};
use polyhardy::instances::{self, MixedParams};
use polyhardy::numkernel::{
    adjoint_matmul, gram_defect, hermitian_sqrt, matmul, op_norm, orthonormal_columns, projector_distance,
    singular_values, CMatrix,
};
use polyhardy::subspace::{classify, model_space, span_closure, wandering};
use polyhardy::theorems::{
    block_multiplier, commutant_symbol, defect_and_dilate, factorize_mixed, mixed_subspace, multiset_distance,
    phase_normalize, scalar_detect, theta_fourier, Factor, FactorizeOptions, ScalarOutcome,
};
use polyhardy::{
    GridSplit, HardyElement, InnerFunction, Invariance, KernelPoint, Layout, MultiIndex, OperatorMatrix,
    RankDecision, Subspace, TruncationGrid, C64,
};
use proptest::prelude::*;
use rand::Rng;
use std::collections::BTreeMap;

fn grid(caps: &[usize]) -> TruncationGrid {
    TruncationGrid::new(caps.to_vec()).unwrap()
}

fn random_matrix(seed: u64, m: usize, n: usize) -> CMatrix {
    let mut rng = instances::rng(seed);
    CMatrix::from_fn(m, n, |_, _| instances::unit_box(&mut rng))
}

fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn caps_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..5, 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lin_and_multi_index_are_inverse(caps in caps_strategy()) {
        let g = grid(&caps);
        for lin in 0..g.size() {
            prop_assert_eq!(g.lin_index(&g.multi_index(lin)).unwrap(), lin);
        }
        for (lin, k) in g.indices().enumerate() {
            prop_assert_eq!(g.multi_index(lin), k);
        }
    }

    #[test]
    fn regroup_preserves_norm(caps in prop::collection::vec(0usize..4, 2..4), seed in any::<u64>()) {
        let g = grid(&caps);
        let k = 1 + (seed as usize) % (caps.len() - 1);
        let f = instances::polynomial(&mut instances::rng(seed), &g);
        let m = regroup(&GridSplit::new(g, k).unwrap(), &f).unwrap();
        prop_assert!((m.norm() - f.norm()).abs() <= 1e-12 * f.norm().max(1.0));
    }

    #[test]
    fn pure_tensor_regroups_to_rank_one(a in prop::collection::vec(1usize..4, 1..3), b in prop::collection::vec(1usize..4, 1..3), seed in any::<u64>()) {
        let mut rng = instances::rng(seed);
        let f = instances::polynomial(&mut rng, &grid(&a));
        let h = instances::polynomial(&mut rng, &grid(&b));
        let t = f.tensor(&h);
        let split = GridSplit::new(t.grid().clone(), a.len()).unwrap();
        let m = regroup(&split, &t).unwrap();
        let rd = RankDecision::from_singular_values(singular_values(&m), 1e-10);
        prop_assert_eq!(rd.rank, 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn orthonormalize_is_idempotent(m in 1usize..12, n in 1usize..8, seed in any::<u64>()) {
        let a = random_matrix(seed, m, n);
        let (q1, r1) = orthonormal_columns(&a, 1e-8).unwrap();
        let (q2, r2) = orthonormal_columns(&q1, 1e-8).unwrap();
        prop_assert_eq!(r1.rank, r2.rank);
        prop_assert!(projector_distance(&q1, &q2) <= 1e-12);
        prop_assert!(gram_defect(&q1) <= 1e-12);
    }

    #[test]
    fn hermitian_sqrt_inverts_squaring(n in 1usize..8, seed in any::<u64>()) {
        let x = random_matrix(seed, n, n);
        let b = matmul(&x, &x.adjoint()) / C64::new(n as f64, 0.0) + CMatrix::identity(n, n) * C64::new(0.1, 0.0);
        let r = hermitian_sqrt(&OperatorMatrix::new(matmul(&b, &b))).unwrap();
        prop_assert!(op_norm(&(r.as_matrix() - &b)) <= 1e-8 * op_norm(&b).max(1.0));
    }

    #[test]
    fn rank_is_scale_equivariant(n in 2usize..7, drop in 0usize..3, scale in -3.0f64..3.0, seed in any::<u64>()) {
        let mut rng = instances::rng(seed);
        let u = instances::unitary(&mut rng, n);
        let v = instances::unitary(&mut rng, n);
        let mut d = CMatrix::zeros(n, n);
        for i in 0..n {
            let s = if i < n.saturating_sub(drop) { rng.random_range(0.1..2.0) } else { rng.random_range(0.0..1e-12) };
            d[(i, i)] = C64::new(s, 0.0);
        }
        let a = &u * d * v.adjoint();
        let c = 10f64.powf(scale);
        let r1 = RankDecision::from_singular_values(singular_values(&a), 1e-8);
        let r2 = RankDecision::from_singular_values(singular_values(&(&a * C64::new(c, 0.0))), 1e-8);
        let separated = |r: &RankDecision| r.singular_values.iter().all(|s| *s >= 10.0 * r.cutoff || *s <= r.cutoff / 10.0);
        prop_assume!(separated(&r1) && separated(&r2));
        prop_assert_eq!(r1.rank, r2.rank);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shifts_commute(caps in prop::collection::vec(0usize..4, 2..4), seed in any::<u64>()) {
        let g = grid(&caps);
        let i = (seed as usize) % caps.len();
        let j = (i + 1) % caps.len();
        let ij = shift(&g.enlarged(i, 1), j).unwrap().mul(&shift(&g, i).unwrap()).unwrap();
        let ji = shift(&g.enlarged(j, 1), i).unwrap().mul(&shift(&g, j).unwrap()).unwrap();
        prop_assert_eq!(ij.as_matrix(), ji.as_matrix());
    }

    #[test]
    fn backward_shift_undoes_shift(caps in caps_strategy(), seed in any::<u64>()) {
        let g = grid(&caps);
        let j = (seed as usize) % caps.len();
        let s = shift(&g, j).unwrap();
        let big = g.enlarged(j, 1);
        let bs = backward_shift(&big, j).unwrap().mul(&s).unwrap();
        let inclusion = embed(&g, &big).unwrap();
        prop_assert_eq!(bs.as_matrix(), inclusion.as_matrix());

        // S B = embedding composed with the projection off the degree-0 slice
        let sb = s.mul(&backward_shift(&g, j).unwrap()).unwrap();
        let mut off_zero = CMatrix::identity(g.size(), g.size());
        for lin in 0..g.size() {
            if g.degree_at(lin, j) == 0 {
                off_zero[(lin, lin)] = C64::new(0.0, 0.0);
            }
        }
        let want = inclusion.as_matrix() * off_zero;
        prop_assert_eq!(sb.as_matrix(), &want);
    }

    #[test]
    fn kernel_reproduces_values(caps in prop::collection::vec(0usize..5, 1..3), seed in any::<u64>()) {
        let g = grid(&caps);
        let mut rng = instances::rng(seed);
        let f = instances::polynomial(&mut rng, &g);
        let w: Vec<C64> = (0..caps.len()).map(|_| instances::disc_point(&mut rng, 0.9)).collect();
        let k = szego_kernel(&KernelPoint::new(w.clone()).unwrap(), &g).unwrap();
        let got = f.inner(&k).unwrap();
        prop_assert!((got - f.eval(&w).unwrap()).norm() <= 1e-12);
    }

    #[test]
    fn blaschke_multiplier_is_isometric_up_to_defect(cap in 4usize..24, seed in any::<u64>()) {
        let g = grid(&[cap]);
        let theta = instances::blaschke(&mut instances::rng(seed), &g, 0, 3, 0.8).unwrap();
        let m = multiplier(&theta.coefficients(), &g).unwrap();
        prop_assert!(gram_defect(m.as_matrix()) <= theta.defect_bound() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projector_is_orthogonal(caps in prop::collection::vec(1usize..4, 1..3), count in 1usize..6, seed in any::<u64>()) {
        let g = grid(&caps);
        let mut rng = instances::rng(seed);
        let mut elems: Vec<HardyElement> = (0..count).map(|_| instances::polynomial(&mut rng, &g)).collect();
        if count > 2 {
            let dup = elems[0].add(&elems[1]).unwrap();
            elems.push(dup);
        }
        let s = Subspace::span(&elems, 1e-8).unwrap();
        let p = s.projector();
        let p = p.as_matrix();
        prop_assert!(op_norm(&(matmul(p, p) - p)) <= 1e-10);
        prop_assert!(op_norm(&(p - p.adjoint())) <= 1e-10);
        let mut cols = CMatrix::zeros(g.size(), elems.len());
        for (i, e) in elems.iter().enumerate() {
            cols.column_mut(i).copy_from_slice(e.coeffs());
        }
        prop_assert_eq!(s.dim(), orthonormal_columns(&cols, 1e-8).unwrap().1.rank);
    }

    #[test]
    fn model_space_is_orthogonal_to_theta_range(cap in 6usize..24, seed in any::<u64>()) {
        let g = grid(&[cap]);
        let theta = instances::blaschke(&mut instances::rng(seed), &g, 0, 4, 0.7).unwrap();
        let q = model_space(&theta, &g).unwrap();
        let t = truncated_multiplier(&theta.coefficients(), &g).unwrap();
        let overlap = op_norm(&adjoint_matmul(&q.basis(), t.as_matrix()));
        prop_assert!(overlap <= theta.defect_bound() + 1e-10);
    }

    #[test]
    fn classification_is_monotone_in_tol(exp in -14.0f64..0.0, factor in 1.0f64..1e3, seed in any::<u64>()) {
        let g = grid(&[5, 5]);
        let inst = instances::mixed_instance(&mut instances::rng(seed), &g, 1, &MixedParams::default()).unwrap();
        let s = mixed_subspace(&inst.theta, &inst.factors, &g, Layout::Dense).unwrap();
        let t = 10f64.powf(exp);
        let a = classify(&s, 1, t).unwrap();
        let b = classify(&s, 1, t * factor).unwrap();
        prop_assert!(!a.mixed || b.mixed);
        prop_assert!(!a.forward_all || b.forward_all);
        prop_assert!(a.kind == Invariance::Neither || b.kind != Invariance::Neither);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn beurling_span_closure_has_one_wandering_vector(seed in any::<u64>()) {
        let g = grid(&[32]);
        let theta = instances::blaschke(&mut instances::rng(seed), &g, 0, 4, 0.7).unwrap().coefficients();
        let theta = theta.scale(C64::new(1.0 / theta.norm(), 0.0));
        let s = span_closure(&[theta.clone()], &[0], 64).unwrap();
        let w = wandering(&s, &[0]).unwrap();
        prop_assert_eq!(w.dim(), 1);
        let v = w.basis();
        let overlap: C64 = v.column(0).iter().zip(theta.coeffs()).map(|(a, b)| a.conj() * b).sum();
        let lambda = overlap / overlap.norm();
        let err = v.column(0).iter().zip(theta.coeffs()).take(g.cap(0)).map(|(a, b)| (a * lambda - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8, "{err:e}");
    }

    #[test]
    fn commutant_symbol_is_linear_and_multiplicative(seed in any::<u64>()) {
        let g = grid(&[6, 6]);
        let v: Vec<OperatorMatrix> = (0..2).map(|j| truncated_shift(&g, j).unwrap()).collect();
        let mut rng = instances::rng(seed);
        let p1 = instances::polynomial(&mut rng, &grid(&[2, 2])).on_grid(&g).unwrap();
        let p2 = instances::polynomial(&mut rng, &grid(&[2, 2])).on_grid(&g).unwrap();
        let (a, b) = (instances::unit_box(&mut rng), instances::unit_box(&mut rng));
        let t1 = truncated_multiplier(&p1, &g).unwrap();
        let t2 = truncated_multiplier(&p2, &g).unwrap();
        let deg = MultiIndex::new(vec![6, 6]);
        let s1 = commutant_symbol(&t1, &v, &deg).unwrap();
        let s2 = commutant_symbol(&t2, &v, &deg).unwrap();
        let comb = OperatorMatrix::new(t1.as_matrix() * a + t2.as_matrix() * b);
        let sc = commutant_symbol(&comb, &v, &deg).unwrap();
        let prod = commutant_symbol(&t1.mul(&t2).unwrap(), &v, &deg).unwrap();
        let at = |s: &polyhardy::theorems::SymbolSeries, k: &MultiIndex| s.coeff(k).unwrap().as_matrix()[(0, 0)];
        for k in sc.grid_z.indices() {
            let lin = at(&sc, &k) - at(&s1, &k) * a - at(&s2, &k) * b;
            prop_assert!(lin.norm() <= 1e-10);
            let mut conv = C64::new(0.0, 0.0);
            for i in sc.grid_z.indices() {
                if let Some(j) = k.checked_sub(&i).unwrap() {
                    conv += at(&s1, &i) * at(&s2, &j);
                }
            }
            prop_assert!((at(&prod, &k) - conv).norm() <= 1e-10);
        }
    }

    #[test]
    fn theta_fourier_inverts_block_multiplier(degrees in prop::collection::btree_set(0usize..6, 1..4), seed in any::<u64>()) {
        let g = grid(&[6, 5]);
        let split = GridSplit::new(g, 1).unwrap();
        let mut rng = instances::rng(seed);
        let mut thetas = BTreeMap::new();
        for d in degrees {
            thetas.insert(MultiIndex::new(vec![d]), instances::polynomial(&mut rng, split.right()));
        }
        let m = block_multiplier(&split, &thetas).unwrap();
        let out = theta_fourier(&m, &split, &MultiIndex::new(vec![6])).unwrap();
        for (k, got) in &out {
            let want = thetas.get(k).cloned().unwrap_or_else(|| HardyElement::zeros(split.right()));
            prop_assert!(max_abs(got.sub(&want).unwrap().coeffs()) <= 1e-10);
        }
    }

    #[test]
    fn scalar_detect_recovers_the_scalar(seed in any::<u64>()) {
        let mut rng = instances::rng(seed);
        let n = rng.random_range(1..=3);
        let alphas = instances::separated_points(&mut rng, n, 0.6, 0.1).unwrap();
        let g = grid(&[48]);
        let q = model_space(&InnerFunction::blaschke(&g, 0, alphas).unwrap(), &g).unwrap();
        let lambda = instances::unimodular(&mut rng);
        match scalar_detect(&OperatorMatrix::new(q.basis() * lambda), &q, 1e-10).unwrap() {
            ScalarOutcome::Scalar { lambda: got, .. } => prop_assert!((got - lambda).norm() <= 1e-10),
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn dilation_ledger_closes(cap in 2usize..20, a in 0.0f64..0.9, b in 0.0f64..0.9, seed in any::<u64>()) {
        let mut rng = instances::rng(seed);
        let one = |r: f64, rng: &mut instances::InstanceRng| {
            OperatorMatrix::new(CMatrix::from_element(1, 1, instances::unimodular(rng) * r))
        };
        let ops = [one(a, &mut rng), one(b, &mut rng)];
        let d = defect_and_dilate(&ops, &MultiIndex::new(vec![cap, cap + 1]), 1e-10).unwrap();
        prop_assert!(d.ledger_residual <= 1e-8);
        let closed = 1.0 - (1.0 - a.powi(2 * (cap as i32 + 1))) * (1.0 - b.powi(2 * (cap as i32 + 2)));
        prop_assert!((d.isometry_defect - closed).abs() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn factorization_round_trips(seed in any::<u64>()) {
        let g = grid(&[20, 8]);
        let p = MixedParams { max_modulus: 0.5, repeat_probability: 0.0, ..MixedParams::default() };
        let inst = instances::mixed_instance(&mut instances::rng(seed), &g, 1, &p).unwrap();
        let s = mixed_subspace(&inst.theta, &inst.factors, &g, Layout::Dense).unwrap();
        let f = factorize_mixed(&s, 1, &FactorizeOptions::default()).unwrap();
        prop_assert_eq!(f.factors.len(), 1);
        match (&f.factors[0], &inst.factors[0]) {
            (Factor::Model { zeros: got }, Factor::Model { zeros: want }) => {
                prop_assert!(multiset_distance(got, want) <= 1e-6);
            }
            (got, want) => prop_assert_eq!(got, want),
        }
        prop_assert!(f.residuals["tensor_reconstruction"] <= 1e-8);
        let lead = f.theta.grid().clone();
        let mut want: Vec<C64> = (0..lead.size())
            .map(|i| inst.theta.coefficients().coeff(&lead.multi_index(i).concat(&MultiIndex::zeros(1))).unwrap())
            .collect();
        let norm = want.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        want.iter_mut().for_each(|c| *c /= norm);
        phase_normalize(&mut want);
        let got = f.theta_coeffs();
        let err = got.coeffs().iter().zip(&want).take(lead.cap(0)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8, "{err:e}");
    }
}
