//! Execution of each scenario kind.

use std::collections::BTreeMap;

use polyhardy::hardy::{truncated_multiplier, truncated_shift};
use polyhardy::instances::{self, InstanceRng, MixedParams};
use polyhardy::io::{
    inner_from_structure, ComplexFile, FactorizationFile, SubspaceFile, SymbolSeriesFile, TensorFile,
};
use polyhardy::subspace::{beurling_subspace, wandering, wandering_with, wold_verify};
use polyhardy::theorems::{
    block_multiplier, build_sn, commutant_symbol, factorize_mixed, mixed_subspace, multiset_distance,
    phase_normalize, range_classify, theorem5_construct, theta_fourier, verify_forward, Factor, FactorizeOptions,
    Symbol1D, Theorem5Data,
};
use polyhardy::{GridSplit, HardyElement, InnerFunction, MultiIndex, OperatorMatrix, Subspace, TruncationGrid, C64};
use serde::Serialize;
use serde_json::Value;

use crate::report::LedgerEntry;
use crate::scenario::*;
use crate::CliError;

/// Resolved settings for one execution.
#[derive(Clone, Copy, Debug)]
pub struct Ctx {
    pub tol: f64,
    pub seed: u64,
}

impl Ctx {
    fn rng(&self) -> InstanceRng {
        instances::rng(self.seed)
    }
}

#[derive(Default)]
pub struct Outcome {
    pub ledger: BTreeMap<String, LedgerEntry>,
    pub outputs: BTreeMap<String, Value>,
}

impl Outcome {
    fn check(&mut self, name: &str, value: f64, tol: f64) {
        self.ledger.insert(name.to_string(), LedgerEntry::new(value, tol));
    }

    fn output<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let v = serde_json::to_value(value).map_err(polyhardy::Error::from)?;
        self.outputs.insert(name.to_string(), v);
        Ok(())
    }
}

pub fn execute(params: &Params, ctx: Ctx) -> Result<Outcome, CliError> {
    match params {
        Params::BeurlingRoundtrip(p) => beurling(p, ctx),
        Params::MixedFactorize(p) => mixed_factorize(p, ctx),
        Params::Commutant(p) => commutant(p, ctx),
        Params::ThetaFourier(p) => theta_fourier_kind(p, ctx),
        Params::Wold(p) => wold(p, ctx),
        Params::SnExample(p) => sn_example(p, ctx),
        Params::Theorem5(p) => theorem5(p, ctx),
        Params::DcCheck(p) => dc_check(p, ctx),
    }
}

fn grid(caps: &[usize]) -> Result<TruncationGrid, CliError> {
    Ok(TruncationGrid::new(caps.to_vec())?)
}

fn points(zs: &[ComplexFile]) -> Vec<C64> {
    zs.iter().map(|z| (*z).into()).collect()
}

fn dim_defect(got: usize, want: usize) -> f64 {
    got.abs_diff(want) as f64
}

/// Unit norm, first significant coefficient real positive.
fn normalized(mut v: Vec<C64>) -> Vec<C64> {
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|c| *c /= n);
    }
    phase_normalize(&mut v);
    v
}

/// Largest difference over indices with every degree below its cap.
fn interior_error(g: &TruncationGrid, a: &[C64], b: &[C64]) -> f64 {
    (0..g.size())
        .filter(|&i| (0..g.nvars()).all(|j| g.degree_at(i, j) < g.cap(j)))
        .map(|i| (a[i] - b[i]).norm())
        .fold(0.0, f64::max)
}

fn beurling(p: &BeurlingParams, ctx: Ctx) -> Result<Outcome, CliError> {
    let g = grid(&[p.cap])?;
    let theta = match &p.zeros {
        Some(z) => InnerFunction::blaschke(&g, 0, points(z))?,
        None => instances::blaschke(&mut ctx.rng(), &g, 0, p.max_zeros, p.max_modulus)?,
    };
    let s = beurling_subspace(&theta, &g)?;
    let w = wandering(&s, &[0])?;
    let mut out = Outcome::default();
    out.check("wandering_dim_defect", dim_defect(w.dim(), 1), 0.0);
    out.check("beurling_gram_defect", s.gram_defect(), ctx.tol);
    if w.dim() == 1 {
        let got = normalized(w.basis().column(0).iter().copied().collect());
        let want = normalized(theta.coefficients().into_coeffs());
        out.check("theta_interior_error", interior_error(&g, &got, &want), ctx.tol);
        out.output("theta", &TensorFile::from_element(&HardyElement::new(g.clone(), got)?))?;
    }
    out.output("theta_in", &TensorFile::from_inner(&theta))?;
    out.output("wandering", &SubspaceFile::from_subspace(&w))?;
    Ok(out)
}

/// `Θ` and the factors from the file, or a seeded instance when both are absent.
fn mixed_data(
    g: &TruncationGrid,
    k: usize,
    theta: &Option<polyhardy::io::StructureFile>,
    factors: &Option<Vec<polyhardy::io::FactorFile>>,
    ctx: Ctx,
) -> Result<(InnerFunction, Vec<Factor>), CliError> {
    match (theta, factors) {
        (Some(t), Some(f)) => Ok((inner_from_structure(g, t)?, f.iter().map(Factor::from).collect())),
        (None, None) => {
            let inst = instances::mixed_instance(&mut ctx.rng(), g, k, &MixedParams::default())?;
            Ok((inst.theta, inst.factors))
        }
        _ => Err(CliError::Parse("params: `theta` and `factors` must be given together".into())),
    }
}

fn factor_error(got: &[Factor], want: &[Factor]) -> f64 {
    if got.len() != want.len() {
        return f64::INFINITY;
    }
    got.iter()
        .zip(want)
        .map(|(a, b)| match (a, b) {
            (Factor::Model { zeros: x }, Factor::Model { zeros: y }) => multiset_distance(x, y),
            (Factor::FullAtTruncation, Factor::FullAtTruncation) => 0.0,
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

fn mixed_factorize(p: &MixedFactorizeParams, ctx: Ctx) -> Result<Outcome, CliError> {
    let g = grid(&p.caps)?;
    let (theta, factors) = mixed_data(&g, p.k, &p.theta, &p.factors, ctx)?;
    let s = mixed_subspace(&theta, &factors, &g, p.layout)?;
    let opts = FactorizeOptions { tol: ctx.tol, ..FactorizeOptions::default() };
    let f = factorize_mixed(&s, p.k, &opts)?;
    let mut out = Outcome::default();
    for (name, &v) in &f.residuals {
        let tol = match name.as_str() {
            "theta_inner_defect" => opts.inner_tol,
            "leading_rank_ratio" => opts.rank_ratio,
            _ => ctx.tol,
        };
        out.check(name, v, tol);
    }
    let split = GridSplit::new(g.clone(), p.k)?;
    let want = normalized(theta.coefficients().into_coeffs().iter().step_by(split.right().size()).copied().collect());
    out.check("theta_interior_error", interior_error(split.left(), f.theta_coeffs().coeffs(), &want), ctx.tol);
    out.check("zero_error", factor_error(&f.factors, &factors), p.zero_tol);
    out.output("factorization", &FactorizationFile::from(&f))?;
    Ok(out)
}

fn commutant(p: &CommutantParams, ctx: Ctx) -> Result<Outcome, CliError> {
    let g = grid(&p.caps)?;
    let phi = match (&p.phi, &p.phi_caps) {
        (Some(t), None) => t.to_element()?,
        (None, Some(c)) => instances::polynomial(&mut ctx.rng(), &grid(c)?),
        _ => return Err(CliError::Parse("params: give exactly one of `phi` and `phi_caps`".into())),
    };
    let v: Vec<OperatorMatrix> = (0..g.nvars()).map(|j| truncated_shift(&g, j)).collect::<Result<_, _>>()?;
    let t = truncated_multiplier(&phi.on_grid(&g)?, &g)?;
    let sym = commutant_symbol(&t, &v, &MultiIndex::new(p.max_degree.clone()))?;
    let mut worst = 0.0f64;
    for (k, m) in &sym.coeffs {
        let want = if phi.grid().contains(k) { phi.coeff(k)? } else { C64::new(0.0, 0.0) };
        let got = m.as_matrix();
        let err = if got.shape() == (1, 1) { (got[(0, 0)] - want).norm() } else { f64::INFINITY };
        worst = worst.max(err);
    }
    let mut out = Outcome::default();
    out.check("coefficient_error", worst, ctx.tol);
    out.output("symbol", &SymbolSeriesFile::from(&sym))?;
    Ok(out)
}

#[derive(Serialize)]
struct ThetaOut {
    index: Vec<usize>,
    value: TensorFile,
}

fn theta_fourier_kind(p: &ThetaFourierParams, ctx: Ctx) -> Result<Outcome, CliError> {
    let split = GridSplit::new(grid(&p.caps)?, p.split)?;
    let mut thetas: BTreeMap<MultiIndex, HardyElement> = BTreeMap::new();
    match (&p.coefficients, &p.random) {
        (Some(cs), None) => {
            for c in cs {
                thetas.insert(MultiIndex::new(c.index.clone()), c.value.to_element()?.on_grid(split.right())?);
            }
        }
        (None, Some(r)) => {
            let mut rng = ctx.rng();
            let cg = grid(&r.caps)?;
            for idx in &r.indices {
                let th = instances::polynomial(&mut rng, &cg);
                thetas.insert(MultiIndex::new(idx.clone()), th.on_grid(split.right())?);
            }
        }
        _ => return Err(CliError::Parse("params: give exactly one of `coefficients` and `random`".into())),
    }
    let m = block_multiplier(&split, &thetas)?;
    let got = theta_fourier(&m, &split, &MultiIndex::new(p.max_k.clone()))?;
    let zero = HardyElement::zeros(split.right());
    let max_abs = |h: &HardyElement| h.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for (k, h) in &got {
        worst = worst.max(max_abs(&h.sub(thetas.get(k).unwrap_or(&zero))?));
    }
    for (k, h) in &thetas {
        if !got.contains_key(k) {
            worst = worst.max(max_abs(h));
        }
    }
    let cl = range_classify(&m, &split, p.range_tol)?;
    let k = p.split;
    let mut out = Outcome::default();
    out.check("coefficient_error", worst, ctx.tol);
    out.check("range_forward_residual", cl.forward_residuals[..k].iter().copied().fold(0.0, f64::max), p.range_tol);
    out.check("range_backward_residual", cl.backward_residuals[k..].iter().copied().fold(0.0, f64::max), p.range_tol);
    out.check("range_commutator", cl.dc.max_commutator, p.range_tol);
    let list: Vec<ThetaOut> = got
        .iter()
        .map(|(k, h)| ThetaOut { index: k.entries().to_vec(), value: TensorFile::from_element(h) })
        .collect();
    out.output("thetas", &list)?;
    Ok(out)
}

fn build_subspace(spec: &SubspaceSpec) -> Result<Subspace, CliError> {
    match spec {
        SubspaceSpec::Beurling { caps, theta } => {
            let g = grid(caps)?;
            Ok(beurling_subspace(&inner_from_structure(&g, theta)?, &g)?)
        }
        SubspaceSpec::Mixed { caps, theta, factors, layout } => {
            let g = grid(caps)?;
            let fs: Vec<Factor> = factors.iter().map(Factor::from).collect();
            Ok(mixed_subspace(&inner_from_structure(&g, theta)?, &fs, &g, *layout)?)
        }
        SubspaceSpec::Kernels { caps, alphas } => Ok(build_sn(&points(alphas), &grid(caps)?)?),
    }
}

fn wold(p: &WoldParams, ctx: Ctx) -> Result<Outcome, CliError> {
    let s = build_subspace(&p.subspace)?;
    let rep = wold_verify(&s, &p.vars, &MultiIndex::new(p.interior_caps.clone()), ctx.tol)?;
    let mut out = Outcome::default();
    out.check("orthogonality_residual", rep.orthogonality_residual, ctx.tol);
    out.check("containment_residual", rep.containment_residual, ctx.tol);
    out.check("remainder_residual", rep.remainder_residual, ctx.tol);
    out.check("dimension_defect", dim_defect(rep.tiles_dim + rep.remainder_dim, rep.total_dim), 0.0);
    if let Some(d) = p.expected_wandering_dim {
        out.check("wandering_dim_defect", dim_defect(rep.wandering_dim, d), 0.0);
    }
    out.output("wold", &rep)?;
    Ok(out)
}

fn sn_example(p: &SnParams, ctx: Ctx) -> Result<Outcome, CliError> {
    let alphas = match (&p.alphas, p.n) {
        (Some(a), None) => points(a),
        (None, Some(n)) => instances::separated_points(&mut ctx.rng(), n, p.max_modulus, p.min_separation)?,
        _ => return Err(CliError::Parse("params: give exactly one of `alphas` and `n`".into())),
    };
    let g = grid(&[p.cap, p.cap])?;
    let s = build_sn(&alphas, &g)?.densify();
    let w = wandering_with(&s, &[0], p.rank_epsilon)?;
    let mut out = Outcome::default();
    out.check("wandering_dim_defect", dim_defect(w.dim(), alphas.len()), 0.0);
    out.check("gram_defect", s.gram_defect(), ctx.tol);
    let alphas_out: Vec<ComplexFile> = alphas.iter().map(|a| (*a).into()).collect();
    out.output("alphas", &alphas_out)?;
    out.output("wandering_dim", &w.dim())?;
    Ok(out)
}

fn theorem5(p: &Theorem5Params, ctx: Ctx) -> Result<Outcome, CliError> {
    let phis: Vec<Symbol1D> = p
        .phis
        .iter()
        .map(|f| match f {
            PhiFile::Constant { c } => Symbol1D::Constant((*c).into()),
            PhiFile::Linear { c } => Symbol1D::Linear((*c).into()),
        })
        .collect();
    let n = phis.len();
    let data = match p.psi {
        Some(psi) => Theorem5Data { phis, psi: psi.into() },
        None => Theorem5Data::balanced(phis),
    };
    let mut caps = vec![p.z_cap];
    caps.extend(std::iter::repeat_n(p.w_cap, n));
    let (_, rep) = theorem5_construct(&data, &grid(&caps)?, ctx.tol)?;
    let mut out = Outcome::default();
    out.check("modulus_residual", rep.modulus_residual, ctx.tol);
    out.check("forward_residual", rep.forward_residual, ctx.tol);
    for (j, r) in rep.backward_residuals.iter().enumerate() {
        out.check(&format!("backward_residual_{j}"), *r, ctx.tol);
    }
    out.check("wandering_dim_defect", dim_defect(rep.wandering_dim, 1), 0.0);
    out.check("torus_max_deviation", rep.torus_max_deviation, 10.0 * rep.tail_bound);
    out.output("theorem5", &rep)?;
    Ok(out)
}

fn dc_check(p: &DcCheckParams, ctx: Ctx) -> Result<Outcome, CliError> {
    let g = grid(&p.caps)?;
    let (theta, factors) = mixed_data(&g, p.k, &p.theta, &p.factors, ctx)?;
    if factors.len() + p.k != g.nvars() {
        return Err(CliError::Parse(format!("params: {} factors with k = {} on {g}", factors.len(), p.k)));
    }
    let rep = verify_forward(&theta, &factors, &g, ctx.tol)?;
    let mut out = Outcome::default();
    out.check("max_commutator", rep.max_commutator, rep.tolerance);
    out.output("dc", &rep)?;
    Ok(out)
}
