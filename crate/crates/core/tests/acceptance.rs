//! Acceptance criteria, one line each. Runs as a plain binary so the lines
//! always reach the test log; exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use polyhardy::hardy::{truncated_multiplier, truncated_shift};
use polyhardy::instances::{self, MixedParams};
use polyhardy::numkernel::CMatrix;
use polyhardy::subspace::{beurling_subspace, model_space, wandering, wandering_with};
use polyhardy::theorems::{
    block_multiplier, build_sn, commutant_symbol, defect_and_dilate, factorize_mixed, mixed_subspace,
    multiset_distance, phase_normalize, range_classify, scalar_detect, theorem5_construct, theta_fourier,
    verify_forward, Factor, FactorizeOptions, ScalarOutcome, Symbol1D, Theorem5Data,
};
use polyhardy::{GridSplit, HardyElement, InnerFunction, Layout, MultiIndex, OperatorMatrix, Subspace, TruncationGrid, C64};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn grid(caps: &[usize]) -> TruncationGrid {
    TruncationGrid::new(caps.to_vec()).unwrap()
}

/// Unit norm, first significant coefficient real positive.
fn normalized(mut v: Vec<C64>) -> Vec<C64> {
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|c| *c /= n);
    phase_normalize(&mut v);
    v
}

/// Largest coefficient difference over indices with every degree below its cap.
fn interior_error(g: &TruncationGrid, a: &[C64], b: &[C64]) -> f64 {
    (0..g.size())
        .filter(|&i| (0..g.nvars()).all(|j| g.degree_at(i, j) < g.cap(j)))
        .map(|i| (a[i] - b[i]).norm())
        .fold(0.0, f64::max)
}

fn beurling_round_trip() -> Outcome {
    let g = grid(&[48]);
    let mut worst = 0.0f64;
    let mut dims_ok = true;
    for seed in 0..50 {
        let mut rng = instances::rng(1000 + seed);
        let theta = instances::blaschke(&mut rng, &g, 0, 4, 0.7).unwrap();
        let s = beurling_subspace(&theta, &g).unwrap();
        let w = wandering(&s, &[0]).unwrap();
        if w.dim() != 1 {
            dims_ok = false;
            continue;
        }
        let got = normalized(w.basis().column(0).iter().copied().collect());
        let want = normalized(theta.coefficients().into_coeffs());
        worst = worst.max(interior_error(&g, &got, &want));
    }
    Outcome {
        pass: dims_ok && worst <= 1e-8,
        detail: format!("50 instances, wandering dim 1: {dims_ok}, max interior error {worst:.2e} (tol 1e-8)"),
    }
}

fn doubly_commuting_forward() -> Outcome {
    let g = grid(&[10, 10, 10]);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut all = true;
    let mut max_comm = 0.0f64;
    for seed in 0..25 {
        let mut rng = instances::rng(2000 + seed);
        let inst = instances::mixed_instance(&mut rng, &g, 1, &MixedParams::default()).unwrap();
        let rep = verify_forward(&inst.theta, &inst.factors, &g, 1e-8).unwrap();
        let m = rep.pair_norms.iter().map(|p| p.commutator.max(p.mixed)).fold(0.0, f64::max);
        max_comm = max_comm.max(m);
        worst_excess = worst_excess.max(m - rep.tolerance);
        all &= rep.is_doubly_commuting && m <= rep.tolerance;
    }
    Outcome {
        pass: all,
        detail: format!("25 instances on D^3, max commutator {max_comm:.2e}, worst margin {worst_excess:.2e} vs 1e-8 + defect bounds"),
    }
}

fn factor_error(got: &[Factor], want: &[Factor]) -> f64 {
    got.iter()
        .zip(want)
        .map(|(a, b)| match (a, b) {
            (Factor::Model { zeros: x }, Factor::Model { zeros: y }) => multiset_distance(x, y),
            (Factor::FullAtTruncation, Factor::FullAtTruncation) => 0.0,
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

fn main_theorem_round_trip() -> Outcome {
    let opts = FactorizeOptions::default();
    let mut theta_err = 0.0f64;
    let mut zero_err = 0.0f64;
    let mut recon = 0.0f64;
    let mut failures = Vec::new();
    let cases: Vec<(u64, Vec<usize>, usize, Layout)> = (0..25)
        .map(|s| (3000 + s, vec![22, 16, 16], 1, Layout::Dense))
        .chain((0..10).map(|s| (4000 + s, vec![22, 22, 16, 16], 2, Layout::Split)))
        .collect();
    for (seed, caps, k, layout) in cases {
        let g = grid(&caps);
        let mut rng = instances::rng(seed);
        let inst = instances::mixed_instance(&mut rng, &g, k, &MixedParams::default()).unwrap();
        let s = mixed_subspace(&inst.theta, &inst.factors, &g, layout).unwrap();
        let f = match factorize_mixed(&s, k, &opts) {
            Ok(f) => f,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let left = GridSplit::new(g.clone(), k).unwrap();
        let want = normalized(
            inst.theta.coefficients().into_coeffs().iter().step_by(left.right().size()).copied().collect(),
        );
        theta_err = theta_err.max(interior_error(left.left(), f.theta_coeffs().coeffs(), &want));
        zero_err = zero_err.max(factor_error(&f.factors, &inst.factors));
        recon = recon.max(f.residuals["tensor_reconstruction"]);
    }
    let pass = failures.is_empty() && theta_err <= 1e-8 && zero_err <= 1e-6 && recon <= 1e-8;
    let mut detail = format!(
        "25 on D^3 + 10 on D^4: theta interior error {theta_err:.2e} (1e-8), zero error {zero_err:.2e} (1e-6), tensor reconstruction {recon:.2e} (1e-8)"
    );
    if !failures.is_empty() {
        detail.push_str(&format!("; {} failed: {}", failures.len(), failures.join("; ")));
    }
    Outcome { pass, detail }
}

fn commutant_symbols() -> Outcome {
    let g = grid(&[12, 12]);
    let v: Vec<OperatorMatrix> = (0..2).map(|j| truncated_shift(&g, j).unwrap()).collect();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut rng = instances::rng(5000 + seed);
        let pg = grid(&[rng.random_range(0..=6), rng.random_range(0..=6)]);
        let phi = instances::polynomial(&mut rng, &pg);
        let t = truncated_multiplier(&phi.on_grid(&g).unwrap(), &g).unwrap();
        let sym = commutant_symbol(&t, &v, &MultiIndex::new(vec![6, 6])).unwrap();
        for (k, m) in &sym.coeffs {
            let want = if pg.contains(k) { phi.coeff(k).unwrap() } else { C64::new(0.0, 0.0) };
            worst = worst.max((m.as_matrix()[(0, 0)] - want).norm());
        }
    }
    Outcome { pass: worst <= 1e-10, detail: format!("20 multipliers on D^2, max coefficient error {worst:.2e} (tol 1e-10)") }
}

fn theta_extraction() -> Outcome {
    let g = grid(&[8, 8]);
    let split = GridSplit::new(g.clone(), 1).unwrap();
    let mut rng = instances::rng(6000);
    let mut thetas = BTreeMap::new();
    for k in [0usize, 2, 3] {
        let th = instances::polynomial(&mut rng, &grid(&[3]));
        thetas.insert(MultiIndex::new(vec![k]), th.on_grid(split.right()).unwrap());
    }
    let m = block_multiplier(&split, &thetas).unwrap();
    let out = theta_fourier(&m, &split, &MultiIndex::new(vec![8])).unwrap();
    let mut worst = 0.0f64;
    for (k, got) in &out {
        let want = thetas.get(k).cloned().unwrap_or_else(|| HardyElement::zeros(split.right()));
        worst = worst.max(got.sub(&want).unwrap().coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    let cl = range_classify(&m, &split, 1e-8).unwrap();
    Outcome {
        pass: worst <= 1e-10 && cl.mixed,
        detail: format!(
            "3 operator coefficients, max error {worst:.2e} (tol 1e-10), range mixed invariant: {}",
            cl.mixed
        ),
    }
}

fn sn_examples() -> Outcome {
    let g = grid(&[32, 32]);
    let mut report = Vec::new();
    let mut pass = true;
    for n in 1..=6 {
        for rep in 0..3 {
            let mut rng = instances::rng(7000 + 10 * n as u64 + rep);
            let alphas = instances::separated_points(&mut rng, n, 0.6, 0.1).unwrap();
            let s = build_sn(&alphas, &g).unwrap().densify();
            let d = wandering_with(&s, &[0], 1e-8).unwrap().dim();
            pass &= d == n;
            if rep == 0 {
                report.push(format!("N={n}:{d}"));
            }
        }
    }
    Outcome { pass, detail: format!("3 point sets per N, wandering dims {}", report.join(" ")) }
}

fn theorem5() -> Outcome {
    let mut rng = instances::rng(8000);
    let mut pass = true;
    let mut lines = Vec::new();
    let c = |r: &mut instances::InstanceRng| instances::disc_point(r, 0.6);
    let cases: Vec<(&str, Vec<Symbol1D>)> = vec![
        ("constant n=1", vec![Symbol1D::Constant(c(&mut rng))]),
        ("constant n=2", vec![Symbol1D::Constant(c(&mut rng)), Symbol1D::Constant(c(&mut rng))]),
        ("linear n=1", vec![Symbol1D::Linear(c(&mut rng))]),
        ("linear n=1 |c|=0.6", vec![Symbol1D::Linear(C64::new(0.0, 0.6))]),
        ("linear+constant n=2", vec![Symbol1D::Linear(c(&mut rng)), Symbol1D::Constant(c(&mut rng))]),
    ];
    for (name, phis) in cases {
        let n = phis.len();
        let mut caps = vec![4];
        caps.extend(std::iter::repeat_n(48, n));
        let data = Theorem5Data::balanced(phis);
        let (_, rep) = theorem5_construct(&data, &grid(&caps), 1e-8).unwrap();
        let ok = rep.wandering_dim == 1 && rep.mixed_invariant && rep.torus_max_deviation <= 10.0 * rep.tail_bound;
        pass &= ok;
        lines.push(format!(
            "{name}: dim W {}, torus dev {:.1e} <= 10x{:.1e}",
            rep.wandering_dim, rep.torus_max_deviation, rep.tail_bound
        ));
    }
    Outcome { pass, detail: lines.join("; ") }
}

fn kernel_space(g: &TruncationGrid, alphas: Vec<C64>) -> Subspace {
    model_space(&InnerFunction::blaschke(g, 0, alphas).unwrap(), g).unwrap()
}

fn scalar_detection() -> Outcome {
    let g = grid(&[48]);
    let mut worst = 0.0f64;
    let mut accepted = 0;
    let mut rejected = 0;
    for seed in 0..20 {
        let mut rng = instances::rng(9000 + seed);
        let n = rng.random_range(1..=4);
        let alphas = instances::separated_points(&mut rng, n, 0.6, 0.1).unwrap();
        let q = kernel_space(&g, alphas);
        let b = q.basis();
        let lambda = instances::unimodular(&mut rng);
        if let Ok(ScalarOutcome::Scalar { lambda: got, .. }) = scalar_detect(&OperatorMatrix::new(&b * lambda), &q, 1e-10) {
            accepted += 1;
            worst = worst.max((got - lambda).norm());
        }
    }
    for seed in 0..20 {
        let mut rng = instances::rng(9500 + seed);
        let n = rng.random_range(2..=4);
        let alphas = instances::separated_points(&mut rng, n, 0.6, 0.1).unwrap();
        let q = kernel_space(&g, alphas);
        let b = q.basis();
        let u = if seed % 2 == 0 {
            instances::unitary(&mut rng, n)
        } else {
            let mut d = CMatrix::identity(n, n);
            d[(n - 1, n - 1)] = C64::new(-1.0, 0.0);
            d
        };
        match scalar_detect(&OperatorMatrix::new(&b * u), &q, 1e-10) {
            Ok(ScalarOutcome::NotScalar { .. }) | Err(polyhardy::Error::PrereqFailed(_)) => rejected += 1,
            _ => {}
        }
    }
    Outcome {
        pass: accepted == 20 && rejected == 20 && worst <= 1e-10,
        detail: format!("{accepted}/20 scalars recovered (max error {worst:.2e}, tol 1e-10), {rejected}/20 non-scalars rejected"),
    }
}

fn dilation_ledger() -> Outcome {
    let mut worst = 0.0f64;
    let mut closed_vs_formula = 0.0f64;
    let mut rng = instances::rng(10_000);
    for cap in [5usize, 10, 20, 30] {
        let a = instances::disc_point(&mut rng, 0.9);
        let b = instances::disc_point(&mut rng, 0.9);
        let one = |x: C64| OperatorMatrix::new(CMatrix::from_element(1, 1, x));
        let d1 = defect_and_dilate(&[one(a)], &MultiIndex::new(vec![cap]), 1e-10).unwrap();
        let d2 = defect_and_dilate(&[one(a), one(b)], &MultiIndex::new(vec![cap, cap + 3]), 1e-10).unwrap();
        let f1 = a.norm().powi(2 * (cap as i32 + 1));
        let f2 = 1.0 - (1.0 - f1) * (1.0 - b.norm().powi(2 * (cap as i32 + 4)));
        closed_vs_formula = closed_vs_formula.max((d1.isometry_defect - f1).abs()).max((d2.isometry_defect - f2).abs());
        worst = worst.max(d1.ledger_residual).max(d2.ledger_residual);

        // 2×2 pair diagonal in a common unitary basis
        let u = instances::unitary(&mut rng, 2);
        let diag = |x: C64, y: C64| {
            let mut m = CMatrix::zeros(2, 2);
            m[(0, 0)] = x;
            m[(1, 1)] = y;
            OperatorMatrix::new(&u * m * u.adjoint())
        };
        let t1 = diag(instances::disc_point(&mut rng, 0.8), instances::disc_point(&mut rng, 0.8));
        let t2 = diag(instances::disc_point(&mut rng, 0.8), instances::disc_point(&mut rng, 0.8));
        let d = defect_and_dilate(&[t1, t2], &MultiIndex::new(vec![cap, cap]), 1e-10).unwrap();
        worst = worst.max(d.ledger_residual).max(d.intertwining_residual);
    }
    Outcome {
        pass: worst <= 1e-8 && closed_vs_formula <= 1e-8,
        detail: format!(
            "scalar and 2x2 pairs at caps 5..30: ledger residual {worst:.2e}, scalar closed form error {closed_vs_formula:.2e} (tol 1e-8)"
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, u64); 9] = [
        ("1 Beurling round-trip", beurling_round_trip, 10),
        ("2 doubly commuting forward", doubly_commuting_forward, 30),
        ("3 main theorem round-trip", main_theorem_round_trip, 120),
        ("4 commutant symbol", commutant_symbols, 5),
        ("5 Theta_k extraction", theta_extraction, 5),
        ("6 S_N wandering dimension", sn_examples, 5),
        ("7 kernel construction", theorem5, 10),
        ("8 scalar detection", scalar_detection, 5),
        ("9 dilation ledger", dilation_ledger, 5),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} | {} | {:.2} s (budget {budget} s)",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
