//! Scenario dispatch: each runner fills the report table and a diagnostics map.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use semigroup_lab::catalog::{run_example, ExampleReport};
use semigroup_lab::interpolation::{holder_positive_check, riesz_thorin_check, TimeOperator};
use semigroup_lab::operator::{operator_norm, spectral_radius};
use semigroup_lab::perturbation::{resolvent_direct, resolvent_factorization, DominatedPair};
use semigroup_lab::probes::{random_dominated_pair, random_positive_matrix, random_positive_triple, random_signed_triple};
use semigroup_lab::semigroup::random_probes;
use semigroup_lab::system::{
    bump_probe, controllability_map, io_power_bound_check, laplace_identity_residual, observability_l1_check, Input,
};
use semigroup_lab::{
    construct_dominated, construct_perturbed, expm, DominatingSplit, Error, GridSpace, LinOp, NormKind, PerturbedSemigroup,
    RegularizedControl, SemigroupModel, SpectralMethod, TheoremKind, TimeGrid, TimeGridFn, TimeNorm, TripleSpec,
};

use crate::config::{self, ScenarioConfig, ScenarioKind, TheoremName, TripleSection};
use crate::report::Table;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e)
    }
}

pub struct Output {
    pub report: Table,
    pub diagnostics: Map<String, Value>,
    pub convergence: Option<Table>,
}

type Res<T> = Result<T, Failure>;

fn cfg_err<T>(msg: impl Into<String>) -> Res<T> {
    Err(Failure::Config(msg.into()))
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("diagnostics serialize")
}

pub fn run(cfg: &ScenarioConfig, refine: usize) -> Res<Output> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = match cfg.scenario {
        ScenarioKind::Triple => run_triple(cfg, &mut rng)?,
        ScenarioKind::RandomTriples => run_random(cfg, &mut rng)?,
        ScenarioKind::ConvC0 | ScenarioKind::RankOneLp | ScenarioKind::HeatFeedback => run_catalog(cfg, refine)?,
        ScenarioKind::RieszThorin => run_riesz(cfg, &mut rng)?,
        ScenarioKind::Spectral => run_spectral(cfg, &mut rng)?,
    };
    out.diagnostics.insert("scenario".into(), to_json(&cfg.scenario_name()));
    out.diagnostics.insert("seed".into(), json!(cfg.seed));
    Ok(out)
}

impl ScenarioConfig {
    fn scenario_name(&self) -> &'static str {
        match self.scenario {
            ScenarioKind::Triple => "triple",
            ScenarioKind::RandomTriples => "random_triples",
            ScenarioKind::ConvC0 => "conv_c0",
            ScenarioKind::RankOneLp => "rank_one_lp",
            ScenarioKind::HeatFeedback => "heat_feedback",
            ScenarioKind::RieszThorin => "riesz_thorin",
            ScenarioKind::Spectral => "spectral",
        }
    }

    fn grid(&self) -> TimeGrid {
        let t = self.time.as_ref().expect("validated");
        let g = TimeGrid::new(t.t_end / t.steps as f64, t.t_end);
        match t.rule {
            Some(r) => g.with_rule(r),
            None => g,
        }
    }

    /// Report times: the configured list, else `default` (every grid time when `None`).
    fn report_times(&self, default: Option<Vec<f64>>) -> Vec<f64> {
        let t = self.time.as_ref().expect("validated");
        t.report.clone().or(default).unwrap_or_else(|| {
            let g = self.grid();
            (0..=g.steps()).map(|k| g.time(k)).collect()
        })
    }
}

fn triple_from_section(sec: &TripleSection) -> Res<(TripleSpec, Option<DominatingSplit>)> {
    let a = config::matrix("triple.a", &sec.a).map_err(Failure::Config)?;
    let b = config::matrix("triple.b", &sec.b).map_err(Failure::Config)?;
    let c = config::matrix("triple.c", &sec.c).map_err(Failure::Config)?;
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || c.shape() != (m, n) {
        return cfg_err(format!("shapes do not fit: a {:?}, b {:?}, c {:?}", a.shape(), b.shape(), c.shape()));
    }
    let x = Arc::new(GridSpace::unit(n, sec.x_norm.kind().map_err(Failure::Config)?));
    let u = Arc::new(GridSpace::unit(m, sec.u_norm.kind().map_err(Failure::Config)?));
    let model = SemigroupModel::matrix_exp(&LinOp::on(a, x.clone()))?;
    let lambda0 = sec.lambda0.unwrap_or(model.growth_bound().max(0.0) + 1.0);
    if !(lambda0 > model.growth_bound()) {
        return cfg_err(format!("triple.lambda0 = {lambda0} must exceed the growth bound {}", model.growth_bound()));
    }
    let bounded = |mat: DMatrix<f64>| RegularizedControl::from_bounded(&model, LinOp::new(mat, u.clone(), x.clone()), lambda0);
    let control = bounded(b)?;
    let split = match sec.theorem {
        TheoremName::Dom => {
            let (Some(bp), Some(bm), Some(ct)) = (&sec.b_plus, &sec.b_minus, &sec.c_tilde) else {
                return cfg_err("theorem = \"dom\" needs triple.b_plus, triple.b_minus and triple.c_tilde");
            };
            let bp = config::matrix("triple.b_plus", bp).map_err(Failure::Config)?;
            let bm = config::matrix("triple.b_minus", bm).map_err(Failure::Config)?;
            let ct = config::matrix("triple.c_tilde", ct).map_err(Failure::Config)?;
            if bp.shape() != (n, m) || bm.shape() != (n, m) || ct.shape() != (m, n) {
                return cfg_err("dominating split has the wrong shape");
            }
            Some(DominatingSplit { b_plus: bounded(bp)?, b_minus: bounded(bm)?, c_tilde: ct })
        }
        _ => None,
    };
    let triple = TripleSpec::new(model, control, LinOp::new(c, x, u))?;
    Ok((triple, split))
}

/// Theorem under which a positive (or dominating) triple is built, from its U norm.
fn kind_for(triple: &TripleSpec) -> TheoremKind {
    match triple.u_space().norm_kind() {
        NormKind::Sup => TheoremKind::AM,
        NormKind::L1 => TheoremKind::AL,
        NormKind::Lp(p) => TheoremKind::RN { p },
    }
}

fn entry_excess(s: &DMatrix<f64>, s_tilde: &DMatrix<f64>) -> f64 {
    s.iter().zip(s_tilde.iter()).map(|(a, b)| a.abs() - b).fold(f64::NEG_INFINITY, f64::max)
}

enum Built {
    Plain(PerturbedSemigroup),
    Dominated(DominatedPair),
}

impl Built {
    fn s(&self) -> &PerturbedSemigroup {
        match self {
            Built::Plain(s) => s,
            Built::Dominated(p) => &p.s,
        }
    }
}

const TRIPLE_COLUMNS: [&str; 9] =
    ["t", "s_norm", "s_min", "s_max", "t_norm", "s_minus_t", "closed_loop_error", "s_tilde_norm", "domination_residual"];

fn triple_rows(table: &mut Table, triple: &TripleSpec, built: &Built, times: &[f64], extra: &[(&str, Option<f64>)]) -> Res<()> {
    let x = triple.x_space();
    let closed = triple.closed_loop();
    for &t in times {
        let s = built.s().eval(t)?;
        let tt = triple.model.eval(t)?;
        let norm = |m: &DMatrix<f64>| operator_norm(m, x, x).value();
        let err = closed.as_ref().map(|a| norm(&(&*s - expm(&(a * t)))));
        let mut cells = vec![
            ("t", Some(t)),
            ("s_norm", Some(norm(&s))),
            ("s_min", Some(s.min())),
            ("s_max", Some(s.max())),
            ("t_norm", Some(norm(&tt))),
            ("s_minus_t", Some(norm(&(&*s - &tt)))),
            ("closed_loop_error", err),
        ];
        if let Built::Dominated(p) = built {
            let st = p.s_tilde.eval(t)?;
            cells.push(("s_tilde_norm", Some(norm(&st))));
            cells.push(("domination_residual", Some(entry_excess(&s, &st))));
        }
        cells.extend_from_slice(extra);
        table.push(&cells);
    }
    Ok(())
}

fn build(triple: &TripleSpec, split: Option<&DominatingSplit>, kind: TheoremKind, cfg: &ScenarioConfig) -> Res<Built> {
    Ok(match split {
        Some(sp) => {
            let tilde = sp.dominating_triple(triple)?;
            Built::Dominated(construct_dominated(triple, sp, kind_for(&tilde), cfg.grid(), cfg.tol.picard, cfg.tol.domination)?)
        }
        None => Built::Plain(construct_perturbed(triple, kind, cfg.grid(), cfg.tol.picard)?),
    })
}

fn run_triple(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Res<Output> {
    let sec = cfg.triple.as_ref().expect("validated");
    let (triple, split) = triple_from_section(sec)?;
    let built = build(&triple, split.as_ref(), config::theorem(&sec.theorem, sec.p), cfg)?;
    let mut report = Table::new(&TRIPLE_COLUMNS);
    triple_rows(&mut report, &triple, &built, &cfg.report_times(None), &[])?;
    let mut diagnostics = Map::new();
    diagnostics.insert("diagnostics".into(), to_json(&built.s().diagnostics));
    if let Built::Dominated(p) = &built {
        diagnostics.insert("domination".into(), to_json(&p.summary));
    }
    diagnostics.insert("checks".into(), run_checks(&triple, &cfg.checks, rng)?);
    Ok(Output { report, diagnostics, convergence: None })
}

fn run_random(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Res<Output> {
    let sec = cfg.random.clone().unwrap_or_default();
    if sec.dim_min < 1 || sec.dim_max < sec.dim_min || sec.inputs_max < 1 || !(0.0 < sec.r_min && sec.r_min < sec.r_max && sec.r_max < 1.0) {
        return cfg_err("random: need 1 <= dim_min <= dim_max, inputs_max >= 1 and 0 < r_min < r_max < 1");
    }
    let u_norm = sec.u_norm.kind().map_err(Failure::Config)?;
    let t_end = cfg.time.as_ref().expect("validated").t_end;
    let times = cfg.report_times(Some(vec![0.25 * t_end, 0.5 * t_end, 0.75 * t_end, t_end]));
    let mut columns = vec!["index", "dim", "inputs"];
    columns.extend(TRIPLE_COLUMNS);
    let mut report = Table::new(&columns);
    let mut items = Vec::new();
    for k in 0..sec.count {
        let n = sec.dim_min + k % (sec.dim_max - sec.dim_min + 1);
        let m = 1 + k % sec.inputs_max;
        let (triple, split) = if sec.signed {
            let s = random_signed_triple(rng, n, m, (sec.r_min, sec.r_max))?;
            (s.triple, Some(s.split))
        } else {
            (random_positive_triple(rng, n, m, (sec.r_min, sec.r_max), u_norm)?, None)
        };
        let built = build(&triple, split.as_ref(), kind_for(&triple), cfg)?;
        let extra = [("index", Some(k as f64)), ("dim", Some(n as f64)), ("inputs", Some(m as f64))];
        triple_rows(&mut report, &triple, &built, &times, &extra)?;
        let s = built.s();
        let grid_min = s.grid_iter().map(|(_, m)| m.min()).fold(f64::INFINITY, f64::min);
        let mut item = Map::new();
        item.insert("index".into(), json!(k));
        item.insert("dim".into(), json!(n));
        item.insert("inputs".into(), json!(m));
        item.insert("grid_min_entry".into(), json!(grid_min));
        item.insert("diagnostics".into(), to_json(&s.diagnostics));
        if let Built::Dominated(p) = &built {
            item.insert("domination".into(), to_json(&p.summary));
        }
        item.insert("checks".into(), run_checks(&triple, &cfg.checks, rng)?);
        items.push(Value::Object(item));
    }
    let mut diagnostics = Map::new();
    diagnostics.insert("triples".into(), Value::Array(items));
    Ok(Output { report, diagnostics, convergence: None })
}

/// Optional checks on a triple, evaluated on the rescaled triple A − λ_h.
fn run_checks(triple: &TripleSpec, checks: &[String], rng: &mut ChaCha8Rng) -> Res<Value> {
    let mut out = Map::new();
    let hp = triple.hypothesis_point();
    let tr = triple.rescaled(hp);
    for c in checks {
        match c.as_str() {
            "resolvent" => {
                let mut gap = 0.0f64;
                let lambdas: Vec<f64> = [0.5, 1.0, 2.0, 5.0].iter().map(|d| hp + d).collect();
                for &l in &lambdas {
                    let f = resolvent_factorization(triple, l)?;
                    let d = resolvent_direct(triple, l)?;
                    gap = gap.max((&f - &d).amax() / d.amax());
                }
                out.insert("resolvent".into(), json!({ "lambdas": lambdas, "max_relative_gap": gap }));
            }
            "laplace" => {
                let times = TimeGridFn::uniform_times(30.0, 0.01);
                let m = tr.u_space().dim();
                let mut worst = 0.0f64;
                for k in 0..10 {
                    let (a, w) = (0.5 + 0.25 * k as f64, 1.0 + k as f64);
                    let u = TimeGridFn::from_fn(times.clone(), tr.u_space().clone(), |t| {
                        DVector::from_fn(m, |i, _| (1.0 + 0.5 * (w * t + i as f64).sin()) * (-a * t).exp())
                    })?;
                    for l in [0.5, 1.0, 2.0] {
                        worst = worst.max(laplace_identity_residual(&tr, &u, l, 1e-12)?.relative);
                    }
                }
                out.insert("laplace".into(), json!({ "lambdas": [0.5, 1.0, 2.0], "inputs": 10, "max_relative_residual": worst }));
            }
            "norm_bounds" => {
                out.insert("norm_bounds".into(), norm_bounds(&tr, rng)?);
            }
            _ => unreachable!("validated"),
        }
    }
    Ok(Value::Object(out))
}

fn norm_bounds(tr: &TripleSpec, rng: &mut ChaCha8Rng) -> Res<Value> {
    let times = TimeGridFn::uniform_times(4.0, 0.02);
    let u_sup = tr.with_u_norm(NormKind::Sup);
    let inv_ab = tr.model.resolvent(0.0)? * tr.control.b_raw();
    let c_bt = operator_norm(&inv_ab, u_sup.u_space(), tr.x_space()).value();
    let probes: Vec<TimeGridFn> = (0..100).map(|_| bump_probe(&times, u_sup.u_space().clone(), true, rng)).collect();
    let mut bt = f64::NEG_INFINITY;
    for u in &probes {
        for t in [1.0, 4.0] {
            let x = controllability_map(&u_sup, Input::Grid(u), t)?;
            bt = bt.max(tr.x_space().norm_of(x.as_slice()) - c_bt * u.sup_norm());
        }
    }
    let xs: Vec<DVector<f64>> = random_probes(tr.model.dim(), 100, rng).into_iter().map(|p| p.abs()).collect();
    let ct = observability_l1_check(&tr.with_u_norm(NormKind::L1), &xs, 10.0, 5e-3, 1e-6)?;
    let mut powers = Map::new();
    for (name, norm) in [("sup", TimeNorm::Sup), ("l1", TimeNorm::L1), ("l2", TimeNorm::Lp(2.0)), ("l3", TimeNorm::Lp(3.0))] {
        let probes: Vec<TimeGridFn> = probes.iter().map(|p| p.with_space(tr.u_space().clone())).collect::<Result<_, _>>()?;
        let rep = io_power_bound_check(tr, 6, norm, &probes, 1e-6)?;
        powers.insert(name.into(), json!({ "empirical": rep.empirical, "bounds": rep.bounds, "max_excess": rep.max_excess() }));
    }
    Ok(json!({
        "controllability": { "bound": c_bt, "max_excess": bt },
        "observability_l1": ct,
        "io_powers": powers,
    }))
}

const CATALOG_COLUMNS: [&str; 11] = [
    "t",
    "lambda",
    "feedback_radius",
    "c_resolvent_norm",
    "decay_integral",
    "norm_llambda_one",
    "l_min_entry",
    "s_min",
    "s_max",
    "domination_residual",
    "mass",
];

fn run_catalog(cfg: &ScenarioConfig, refine: usize) -> Res<Output> {
    let ex = cfg.example_config().map_err(Failure::Config)?;
    let rep: ExampleReport = run_example(&ex, refine)?;
    let mut report = Table::new(&CATALOG_COLUMNS);
    if let Some(h) = &rep.heat {
        for r in &h.boundary.sweep {
            report.push(&[
                ("lambda", Some(r.lambda)),
                ("feedback_radius", Some(r.spectral_radius_phi_llambda)),
                ("norm_llambda_one", Some(r.norm_llambda_one)),
                ("l_min_entry", Some(r.min_entry)),
            ]);
        }
        for r in &h.times {
            report.push(&[
                ("t", Some(r.t)),
                ("s_min", Some(r.min_entry_s)),
                ("domination_residual", Some(r.domination_residual)),
                ("mass", Some(r.mass)),
            ]);
        }
    }
    for r in &rep.sweep {
        report.push(&[
            ("lambda", Some(r.lambda)),
            ("feedback_radius", Some(r.feedback_radius)),
            ("c_resolvent_norm", r.c_resolvent_norm),
            ("decay_integral", r.decay_integral),
        ]);
    }
    for r in &rep.times {
        report.push(&[("t", Some(r.t)), ("s_min", Some(r.min_entry)), ("s_max", Some(r.max_entry)), ("domination_residual", r.domination_residual)]);
    }
    let convergence = (refine > 0).then(|| {
        let mut t = Table::new(&["level", "grid_n", "step", "diff_to_previous", "observed_order"]);
        for r in &rep.convergence {
            t.push(&[
                ("level", Some(r.level as f64)),
                ("grid_n", Some(r.grid_n as f64)),
                ("step", Some(r.step)),
                ("diff_to_previous", r.diff_to_previous),
                ("observed_order", r.observed_order),
            ]);
        }
        t
    });
    let mut diagnostics = Map::new();
    diagnostics.insert("config".into(), to_json(&ex));
    diagnostics.insert("theorem_kind".into(), to_json(&rep.theorem_kind));
    diagnostics.insert("lambda_star".into(), to_json(&rep.lambda_star));
    diagnostics.insert("diagnostics".into(), to_json(&rep.diagnostics));
    diagnostics.insert("vp_residual".into(), to_json(&rep.vp_residual));
    diagnostics.insert("z_scaled_sup".into(), to_json(&rep.z_scaled_sup));
    diagnostics.insert("consistency_residual".into(), to_json(&rep.consistency_residual));
    if let Some(h) = &rep.heat {
        diagnostics.insert(
            "heat".into(),
            json!({
                "lambda_star": h.lambda_star,
                "route_discrepancy": h.boundary.route_discrepancy,
                "hypothesis": h.boundary.hypothesis,
                "signed": h.signed,
                "domination_checks_ok": h.domination_checks_ok,
                "resolvent_power_excess": h.resolvent_power_excess,
            }),
        );
    }
    Ok(Output { report, diagnostics, convergence })
}

fn run_riesz(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Res<Output> {
    let sec = cfg.riesz_thorin.clone().unwrap_or_default();
    if sec.max_times < 1 || sec.max_components < 1 || sec.ps.iter().any(|p| !(*p > 1.0)) {
        return cfg_err("riesz_thorin: need max_times, max_components >= 1 and every p > 1");
    }
    let mut report = Table::new(&["p", "index", "times", "components", "empirical", "bound", "excess", "holder_violation"]);
    let (mut worst, mut holder_worst) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut positivity = true;
    for k in 0..sec.count {
        let times = rng.gen_range(1..=sec.max_times);
        let comps = rng.gen_range(1..=sec.max_components);
        let d = times * comps;
        let op = TimeOperator::new(random_positive_matrix(rng, d, d, sec.density), times, comps)?;
        let rep = riesz_thorin_check(&op, &sec.ps, sec.trials, rng)?;
        positivity &= rep.positivity_preserved;
        for row in &rep.rows {
            let h = holder_positive_check(&op, row.p, sec.trials, rng)?;
            worst = worst.max(row.excess());
            holder_worst = holder_worst.max(h);
            report.push(&[
                ("p", Some(row.p)),
                ("index", Some(k as f64)),
                ("times", Some(times as f64)),
                ("components", Some(comps as f64)),
                ("empirical", Some(row.empirical)),
                ("bound", Some(row.bound)),
                ("excess", Some(row.excess())),
                ("holder_violation", Some(h)),
            ]);
        }
    }
    let mut diagnostics = Map::new();
    diagnostics.insert("operators".into(), json!(sec.count));
    diagnostics.insert("max_excess".into(), json!(worst));
    diagnostics.insert("max_holder_violation".into(), json!(holder_worst));
    diagnostics.insert("positivity_preserved".into(), json!(positivity));
    Ok(Output { report, diagnostics, convergence: None })
}

fn run_spectral(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Res<Output> {
    let sec = cfg.spectral.clone().unwrap_or_default();
    if sec.dim_min < 1 || sec.dim_max < sec.dim_min || sec.shift_nodes < 3 || sec.n_max < 1 {
        return cfg_err("spectral: need 1 <= dim_min <= dim_max, n_max >= 1 and shift_nodes >= 3");
    }
    let span = sec.dim_max - sec.dim_min + 1;
    let mut report = Table::new(&["index", "dim", "gelfand", "eigen", "gap", "converged"]);
    let mut gap = 0.0f64;
    for k in 0..sec.count {
        let n = sec.dim_min + k % span;
        let op = LinOp::on(random_positive_matrix(rng, n, n, 0.6), Arc::new(GridSpace::unit(n, NormKind::Sup)));
        let g = spectral_radius(&op, SpectralMethod::Gelfand { n_max: sec.n_max });
        let e = spectral_radius(&op, SpectralMethod::Eigen).value;
        gap = gap.max((g.value - e).abs());
        report.push(&[
            ("index", Some(k as f64)),
            ("dim", Some(n as f64)),
            ("gelfand", Some(g.value)),
            ("eigen", Some(e)),
            ("gap", Some((g.value - e).abs())),
            ("converged", Some(if g.converged { 1.0 } else { 0.0 })),
        ]);
    }
    let mut mono = f64::NEG_INFINITY;
    for k in 0..sec.pairs {
        let n = sec.dim_min + k % span;
        let x = Arc::new(GridSpace::unit(n, NormKind::Sup));
        let (s, t) = random_dominated_pair(rng, n);
        let rs = spectral_radius(&LinOp::on(s, x.clone()), SpectralMethod::Eigen).value;
        let rt = spectral_radius(&LinOp::on(t, x), SpectralMethod::Eigen).value;
        mono = mono.max(rs - rt);
    }
    let h = 1.0 / (sec.shift_nodes - 1) as f64;
    let shift = SemigroupModel::left_shift(Arc::new(GridSpace::trapezoid(0.0, 1.0, sec.shift_nodes, NormKind::L1)))?;
    let mut nil = 0.0f64;
    for t in [1.0 + h, 1.5, 2.0] {
        nil = nil.max(shift.eval(t)?.amax());
    }
    let mut diagnostics = Map::new();
    diagnostics.insert("max_gelfand_gap".into(), json!(gap));
    diagnostics.insert("dominated_pairs".into(), json!(sec.pairs));
    diagnostics.insert("max_monotonicity_excess".into(), json!(mono));
    diagnostics.insert("nilpotent_max_entry".into(), json!(nil));
    Ok(Output { report, diagnostics, convergence: None })
}
