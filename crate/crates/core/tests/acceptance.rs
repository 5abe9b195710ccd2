//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when any
//! criterion fails.

mod common;

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semigroup_lab::boundary::{heat_feedback_scenario, HeatFeedbackConfig, Kernel};
use semigroup_lab::catalog::{build_rank_one_lp, decay_integral, run_example, ExampleConfig, ExampleId};
use semigroup_lab::interpolation::{holder_positive_check, riesz_thorin_check, TimeOperator};
use semigroup_lab::operator::{operator_norm, spectral_radius};
use semigroup_lab::perturbation::resolvent_factorization;
use semigroup_lab::probes::{random_dominated_pair, random_positive_matrix, random_positive_triple, random_signed_triple};
use semigroup_lab::semigroup::random_probes;
use semigroup_lab::system::{
    bump_probe, controllability_map, io_power_bound_check, laplace_identity_residual, laplace_transform,
    observability_l1_check, Input,
};
use semigroup_lab::{
    construct_dominated, construct_perturbed, GridSpace, LinOp, NormKind, SemigroupModel, SpectralMethod, TheoremKind,
    TimeGrid, TimeGridFn, TimeNorm, TripleSpec,
};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// 25 random positive triples with dims 2–12, the same stream for criteria 1, 2 and 5.
fn random_triples(seed: u64) -> Vec<TripleSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..25)
        .map(|k| {
            let n = 2 + k % 11;
            let m = 1 + k % 3;
            random_positive_triple(&mut rng, n, m, (0.2, 0.8), NormKind::Sup).unwrap()
        })
        .collect()
}

fn vp_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for tr in random_triples(101) {
        let s = construct_perturbed(&tr, TheoremKind::AM, TimeGrid::new(1e-3, 2.0), 1e-12).unwrap();
        let closed = closed_loop_oracle(&tr);
        for t in [0.25, 0.5, 1.0, 2.0] {
            let err = sup_norm(&(&*s.eval(t).unwrap() - (&closed * t).exp()));
            worst = worst.max(err);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-6 && secs <= 60.0, format!("max sup error {worst:.3e} (<= 1e-6), runtime {secs:.1} s (<= 60 s)"))
}

fn min_on_grid(s: &semigroup_lab::PerturbedSemigroup) -> f64 {
    s.grid_iter().map(|(_, m)| m.min()).fold(f64::INFINITY, f64::min)
}

fn positivity() -> Outcome {
    let mut worst = f64::INFINITY;
    let grid = TimeGrid::new(1e-2, 2.0);
    for tr in random_triples(202) {
        worst = worst.min(min_on_grid(&construct_perturbed(&tr, TheoremKind::AM, grid, 1e-12).unwrap()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(203);
    for k in 0..10 {
        let tr = random_positive_triple(&mut rng, 2 + k, 1 + k % 2, (0.2, 0.8), NormKind::L1).unwrap();
        worst = worst.min(min_on_grid(&construct_perturbed(&tr, TheoremKind::AL, grid, 1e-12).unwrap()));
    }
    for id in [ExampleId::RankOneLp, ExampleId::ConvC0, ExampleId::HeatFeedback] {
        let rep = run_example(&ExampleConfig::new(id, 200), 0).unwrap();
        let m = match &rep.heat {
            Some(h) => h.times.iter().map(|r| r.min_entry_s).fold(f64::INFINITY, f64::min),
            None => rep.times.iter().map(|r| r.min_entry).fold(f64::INFINITY, f64::min),
        };
        worst = worst.min(m);
    }
    let r1 = build_rank_one_lp(&ExampleConfig::new(ExampleId::RankOneLp, 200)).unwrap().feedback(1.0).unwrap();
    let oracle = nested_rank_one(1.0);
    let pass = worst >= -1e-9 && (r1 - oracle).abs() <= 1e-4;
    outcome(pass, format!("min entry {worst:.3e} (>= -1e-9); r(ΦR(1,A)b) = {r1:.6} vs nested quadrature {oracle:.6} (± 1e-4)"))
}

fn signed_probes(times: &[f64], space: &Arc<GridSpace>, count: usize, rng: &mut ChaCha8Rng) -> Vec<TimeGridFn> {
    (0..count).map(|_| bump_probe(times, space.clone(), true, rng)).collect()
}

fn norm_bound_scenarios() -> Vec<TripleSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut out = vec![scalar_triple(), two_by_two_triple()];
    for k in 0..5 {
        out.push(random_positive_triple(&mut rng, 2 + k, 1 + k % 2, (0.2, 0.8), NormKind::Sup).unwrap());
    }
    out
}

fn norm_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(304);
    let slack = 1e-6;
    let (mut bt, mut ct, mut foon, mut foon3) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for tr in norm_bound_scenarios() {
        let times = TimeGridFn::uniform_times(4.0, 0.02);
        let u_sup = tr.with_u_norm(NormKind::Sup);
        // ‖𝓑ₜu‖ ≤ ‖A⁻¹B‖ ‖u‖_∞
        let inv_ab = tr.model.resolvent(0.0).unwrap() * tr.control.b_raw();
        let c_bt = operator_norm(&inv_ab, u_sup.u_space(), tr.x_space()).value();
        for u in signed_probes(&times, u_sup.u_space(), 100, &mut rng) {
            let base = u.sup_norm();
            for t in [1.0, 4.0] {
                let x = controllability_map(&u_sup, Input::Grid(&u), t).unwrap();
                bt = bt.max(tr.x_space().norm_of(x.as_slice()) - c_bt * base);
            }
        }
        // ∫‖CT(s)x‖ ds ≤ ‖CA⁻¹‖ ‖x‖ with U an AL-space
        let probes: Vec<DVector<f64>> = random_probes(tr.model.dim(), 100, &mut rng).into_iter().map(|p| p.abs()).collect();
        let rep = observability_l1_check(&tr.with_u_norm(NormKind::L1), &probes, 10.0, 5e-3, slack).unwrap();
        ct = ct.max(rep.excess());
        // ‖𝓕∞ⁿ‖ for n ≤ 6 in sup and L¹, and the interpolated Lᵖ bounds
        let probes = signed_probes(&times, tr.u_space(), 100, &mut rng);
        for norm in [TimeNorm::Sup, TimeNorm::L1] {
            foon = foon.max(io_power_bound_check(&tr, 6, norm, &probes, slack).unwrap().max_excess());
        }
        for p in [1.5, 2.0, 3.0] {
            foon3 = foon3.max(io_power_bound_check(&tr, 6, TimeNorm::Lp(p), &probes, slack).unwrap().max_excess());
        }
    }
    let worst = bt.max(ct).max(foon).max(foon3);
    outcome(
        worst <= slack,
        format!("max excess: controllability {bt:.3e}, AL observability {ct:.3e}, io powers {foon:.3e}, interpolated {foon3:.3e} (<= 1e-6)"),
    )
}

fn laplace_identity() -> Outcome {
    let mut worst = 0.0f64;
    for tr in [scalar_triple(), two_by_two_triple()] {
        let times = TimeGridFn::uniform_times(30.0, 0.01);
        for f in decaying_inputs(tr.u_space().dim(), 10) {
            let u = TimeGridFn::from_fn(times.clone(), tr.u_space().clone(), f).unwrap();
            for lambda in [0.5, 1.0, 2.0] {
                worst = worst.max(laplace_identity_residual(&tr, &u, lambda, 1e-12).unwrap().relative);
            }
        }
    }
    outcome(worst <= 1e-3, format!("max relative residual {worst:.3e} (<= 1e-3)"))
}

fn resolvent_factorization_check() -> Outcome {
    let (mut fact, mut lap) = (0.0f64, 0.0f64);
    for tr in random_triples(505) {
        let closed = closed_loop_oracle(&tr);
        let s0 = abscissa(&closed);
        for lambda in [s0 + 0.5, s0 + 1.0, 1.0, 2.0, 5.0] {
            if lambda <= s0 {
                continue;
            }
            let direct = inverse_shifted(&closed, lambda);
            let f = resolvent_factorization(&tr, lambda).unwrap();
            fact = fact.max((&f - &direct).amax() / direct.amax());
        }
        let s = construct_perturbed(&tr, TheoremKind::AM, TimeGrid::new(1e-2, 15.0), 1e-12).unwrap();
        let x = DVector::from_element(tr.model.dim(), 1.0);
        let (times, values): (Vec<f64>, Vec<DVector<f64>>) = s.grid_iter().map(|(t, m)| (t, m * &x)).unzip();
        let orbit = TimeGridFn::new(times, values, tr.x_space().clone()).unwrap();
        let hat = laplace_transform(&orbit, 1.0, None).unwrap();
        let rx = resolvent_factorization(&tr, 1.0).unwrap() * &x;
        lap = lap.max((&hat - &rx).amax() / rx.amax());
    }
    outcome(fact <= 1e-8 && lap <= 1e-3, format!("factorized vs direct {fact:.3e} (<= 1e-8); Laplace of S vs resolvent {lap:.3e} (<= 1e-3)"))
}

fn domination() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut grid_excess, mut power_excess) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for k in 0..20 {
        let st = random_signed_triple(&mut rng, 2 + k % 7, 1 + k % 3, (0.2, 0.8)).unwrap();
        let pair = construct_dominated(&st.triple, &st.split, TheoremKind::AM, TimeGrid::new(1e-3, 1.0), 1e-12, 1e-8).unwrap();
        for t in [0.5, 1.0] {
            let (s, s_tilde) = (pair.s.eval(t).unwrap(), pair.s_tilde.eval(t).unwrap());
            let e = s.iter().zip(s_tilde.iter()).map(|(a, b)| a.abs() - b).fold(f64::NEG_INFINITY, f64::max);
            grid_excess = grid_excess.max(e);
        }
        let a = closed_loop_oracle(&st.triple);
        let a_tilde = closed_loop_oracle(&st.split.dominating_triple(&st.triple).unwrap());
        let s0 = abscissa(&a_tilde);
        for lambda in [s0 + 0.25, s0 + 1.0, s0 + 4.0] {
            let (r, rt) = (inverse_shifted(&a, lambda), inverse_shifted(&a_tilde, lambda));
            let (mut rn, mut rtn) = (r.clone(), rt.clone());
            for _ in 1..=6 {
                power_excess = power_excess.max(sup_norm(&rn) - sup_norm(&rtn));
                rn = &rn * &r;
                rtn = &rtn * &rt;
            }
        }
    }
    outcome(
        grid_excess <= 1e-8 && power_excess <= 1e-8,
        format!("max(|S| − S̃) {grid_excess:.3e}, max resolvent-power excess {power_excess:.3e} (<= 1e-8)"),
    )
}

fn riesz_thorin() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let (mut rt, mut holder) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut positivity = true;
    for _ in 0..100 {
        let (times, comps) = (rng.gen_range(2..8), rng.gen_range(1..4));
        let d = times * comps;
        let t = TimeOperator::new(random_positive_matrix(&mut rng, d, d, 0.5), times, comps).unwrap();
        let rep = riesz_thorin_check(&t, &[1.5, 2.0, 3.0], 20, &mut rng).unwrap();
        rt = rt.max(rep.max_excess());
        positivity &= rep.positivity_preserved;
        for p in [1.5, 2.0, 3.0] {
            holder = holder.max(holder_positive_check(&t, p, 20, &mut rng).unwrap());
        }
    }
    outcome(
        rt <= 1e-9 && holder <= 1e-9 && positivity,
        format!("max p-norm excess {rt:.3e}, max Hölder violation {holder:.3e} (<= 1e-9)"),
    )
}

fn heat_boundary() -> Outcome {
    let rep = heat_feedback_scenario(&HeatFeedbackConfig::default()).unwrap();
    let norms: Vec<f64> = rep.boundary.sweep.iter().map(|r| r.norm_llambda_one).collect();
    let decreasing = norms.windows(2).all(|w| w[1] < w[0]);
    let last = *norms.last().unwrap();
    let small = last < 0.05;
    let min_s = rep.times.iter().map(|r| r.min_entry_s).fold(f64::INFINITY, f64::min);
    let routes = rep.boundary.route_discrepancy;
    let signed = heat_feedback_scenario(&HeatFeedbackConfig {
        kernel: Kernel::Cosine { amplitude: 0.3, frequency: 1.0 },
        ..HeatFeedbackConfig::default()
    })
    .unwrap();
    let dom = signed.times.iter().map(|r| r.domination_residual).fold(f64::NEG_INFINITY, f64::max);
    let star = rep.lambda_star;
    let pass = decreasing && small && star.is_some() && min_s >= -1e-9 && routes <= 1e-6 && dom <= 1e-8;
    outcome(
        pass,
        format!(
            "‖L_λ 1‖ strictly decreasing: {decreasing}; ‖L_200 1‖ = {last:.5} (< 0.05: {small}); λ* = {star:?}; \
             min S {min_s:.3e}; routes {routes:.3e} (<= 1e-6); signed domination {dom:.3e} (<= 1e-8)"
        ),
    )
}

fn decay_certificate() -> Outcome {
    let sweep = [1.0, 2.0, 5.0, 10.0, 50.0, 100.0, 200.0];
    let decreasing = [1.0, 1.5, 1.9].iter().all(|&a| {
        let v: Vec<f64> = sweep.iter().map(|&l| decay_integral(l, a).unwrap()).collect();
        v.windows(2).all(|w| w[1] < w[0])
    });
    let i11 = decay_integral(1.0, 1.0).unwrap();
    let o11 = decay_oracle(1.0, 1.0);
    let i100 = decay_integral(100.0, 1.5).unwrap();
    let o100 = decay_oracle(100.0, 1.5);
    let pass = decreasing && (i11 - 0.79659).abs() <= 1e-4 && (i11 - o11).abs() <= 1e-4 && i100 < 0.07;
    outcome(
        pass,
        format!(
            "strictly decreasing: {decreasing}; I(1,1) = {i11:.6} (oracle {o11:.6}); \
             I(100,1.5) = {i100:.6} (oracle {o100:.6}, threshold < 0.07)"
        ),
    )
}

fn spectral_toolkit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let x = |n: usize| Arc::new(GridSpace::unit(n, NormKind::Sup));
    let mut gelfand = 0.0f64;
    for k in 0..20 {
        let n = 3 + k % 8;
        let m = random_positive_matrix(&mut rng, n, n, 0.6);
        let op = LinOp::on(m.clone(), x(n));
        let g = spectral_radius(&op, SpectralMethod::Gelfand { n_max: 64 }).value;
        let e = spectral_radius(&op, SpectralMethod::Eigen).value;
        gelfand = gelfand.max((g - e).abs()).max((e - common::spectral_radius(&m)).abs());
    }
    let mut mono = f64::NEG_INFINITY;
    for k in 0..50 {
        let n = 2 + k % 9;
        let (s, t) = random_dominated_pair(&mut rng, n);
        let rs = spectral_radius(&LinOp::on(s, x(n)), SpectralMethod::Eigen).value;
        let rt = spectral_radius(&LinOp::on(t, x(n)), SpectralMethod::Eigen).value;
        mono = mono.max(rs - rt);
    }
    let n_nodes = 65;
    let h = 1.0 / (n_nodes - 1) as f64;
    let shift = SemigroupModel::left_shift(Arc::new(GridSpace::trapezoid(0.0, 1.0, n_nodes, NormKind::L1))).unwrap();
    let nil = [1.0 + h, 1.0 + 2.0 * h, 1.5, 3.0]
        .iter()
        .map(|&t| shift.eval(t).unwrap().amax())
        .fold(0.0f64, f64::max);
    let alive = shift.eval(1.0 - h).unwrap().amax();
    let pass = gelfand <= 0.05 && mono <= 1e-12 && nil == 0.0 && alive > 0.0;
    outcome(
        pass,
        format!("Gelfand gap {gelfand:.3e} (<= 0.05); max r(S) − r(T) {mono:.3e} (<= 0); max |T(t)| for t >= 1+h: {nil:e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("vp-oracle-equivalence", vp_oracle_equivalence),
        ("positivity", positivity),
        ("norm-bound-ledger", norm_bounds),
        ("laplace-identity", laplace_identity),
        ("resolvent-factorization", resolvent_factorization_check),
        ("domination", domination),
        ("riesz-thorin", riesz_thorin),
        ("heat-boundary-feedback", heat_boundary),
        ("decay-certificate", decay_certificate),
        ("spectral-toolkit", spectral_toolkit),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{}] {name}: {} ({:.1} s)", i + 1, o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(i + 1);
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
