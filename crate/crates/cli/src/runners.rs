//! One function per verification suite. Each returns its verdict, a detail
//! line and the rows it estimated.

use heis_area::expr::parse;
use heis_area::graph::{
    area_integrand, intrinsic_differential, intrinsic_jacobian, verify_chain_rule, verify_uid, VerifyOptions,
    CHAIN_RULE_SCALES, UID_DELTAS,
};
use heis_area::group::check_axioms;
use heis_area::mc::{self, MeasureEstimate};
use heis_area::measure::{density_ratio_times_cone, spherical_factor as beta, verify_blowup_suite, Budget};
use heis_area::metric::{calibrate_family, validate_distance, Family, HomogeneousDistance};
use heis_area::split::{
    random_horizontal_subgroup, random_vertical_complement, verify_projection_lemma, CoordBox, VerticalSubgroup,
};
use heis_area::surfaces::Shipped;
use rand::Rng;

use crate::config::{BudgetPreset, ExperimentConfig, SubgroupSpec, Surface};
use crate::output::{fmt_coords, fmt_point, ProfileRecord, Row};
use crate::CliError;

pub struct Context {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub preset: BudgetPreset,
}

pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub rows: Vec<Row>,
    pub profiles: Vec<ProfileRecord>,
}

impl SuiteResult {
    fn new(name: &'static str, passed: bool, detail: String, rows: Vec<Row>) -> Self {
        Self { name, passed, detail, rows, profiles: Vec::new() }
    }
}

fn numerical(e: heis_area::Error) -> CliError {
    CliError::Numerical(e.to_string())
}

impl Context {
    fn budget(&self) -> Budget {
        self.config.budget(self.preset)
    }

    fn task_seed(&self, suite: u64) -> u64 {
        mc::derive_seed(self.seed, suite)
    }

    /// The configured surface, or `x1 + x3` with its three sample points.
    fn surface(&self) -> Result<Surface, CliError> {
        if self.config.surface.is_some() {
            return self.config.surface();
        }
        if self.config.n != 1 {
            return Err(CliError::Config("surface: required when n != 1".into()));
        }
        let s = Shipped::Tilted;
        Ok(Surface { label: s.name().into(), model: s.model().map_err(numerical)?, points: s.points().map_err(numerical)? })
    }
}

fn planes(ctx: &Context) -> Result<Vec<VerticalSubgroup>, CliError> {
    let n = ctx.config.n;
    let field = |r: heis_area::Result<VerticalSubgroup>| r.map_err(|e| CliError::Config(format!("subgroups: {e}")));
    match &ctx.config.subgroups {
        None => Ok(vec![field(VerticalSubgroup::coordinate(n, 1))?]),
        Some(SubgroupSpec::Random { random, k }) => {
            let mut rng = mc::stream_rng(ctx.task_seed(0x5F), 0);
            (0..*random)
                .map(|_| {
                    let v = random_horizontal_subgroup(n, *k, &mut rng)
                        .map_err(|e| CliError::Config(format!("subgroups.k: {e}")))?;
                    field(VerticalSubgroup::orthogonal_to(&v))
                })
                .collect()
        }
        Some(SubgroupSpec::Explicit(list)) => list.iter().map(|b| field(VerticalSubgroup::new(n, b.clone()))).collect(),
    }
}

fn plane_label(p: &VerticalSubgroup) -> String {
    let gens: Vec<String> = p.basis().iter().map(|b| format!("[{}]", fmt_coords(b))).collect();
    format!("span{{{}, e{}}}", gens.join(", "), 2 * p.n() + 1)
}

pub fn spherical_factor(ctx: &Context) -> Result<SuiteResult, CliError> {
    let d = ctx.config.distance()?;
    let planes = planes(ctx)?;
    let budget = ctx.budget();
    let name = d.name();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    let mut shortcut = 0.0f64;
    for (i, p) in planes.iter().enumerate() {
        let sf = beta(p, &d, &budget, ctx.task_seed(i as u64)).map_err(numerical)?;
        let label = plane_label(p);
        rows.push(Row::estimate("spherical-factor", &label, &fmt_point(&sf.argmax), &name, "beta", &sf.value));
        rows.push(Row::estimate("spherical-factor", &label, "0", &name, "area_at_origin", &sf.at_origin));
        shortcut = shortcut.max((sf.value.value / sf.at_origin.value - 1.0).abs());
        values.push(sf.value.value);
    }
    let hi = values.iter().cloned().fold(f64::MIN, f64::max);
    let lo = values.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (hi - lo) / lo;
    if planes.len() > 1 {
        rows.push(Row::exact("spherical-factor", "all planes", "", &name, "spread", spread, ctx.seed));
    }
    let spread_ok = planes.len() < 2 || !d.is_multiradial() || spread <= 0.02;
    let shortcut_ok = d.convex_ball() != Some(true) || shortcut <= 0.01;
    let detail = format!(
        "{} plane(s), beta in [{lo:.5}, {hi:.5}], spread {spread:.2e}{}, beta vs area at 0 {shortcut:.2e}{}",
        planes.len(),
        if d.is_multiradial() { " (limit 2%)" } else { "" },
        if d.convex_ball() == Some(true) { " (limit 1%)" } else { "" },
    );
    Ok(SuiteResult::new("spherical-factor", spread_ok && shortcut_ok, detail, rows))
}

pub fn blowup(ctx: &Context) -> Result<SuiteResult, CliError> {
    let d = ctx.config.distance()?;
    let s = ctx.surface()?;
    let schedule = ctx.config.schedule()?;
    let control = ctx.config.control();
    let tol = ctx.preset.mc_tolerance();
    let report =
        verify_blowup_suite(&s.model, &s.points, &d, &schedule, &ctx.budget(), ctx.task_seed(0xB1), control.as_ref())
            .map_err(numerical)?;
    let name = d.name();
    let mut rows = Vec::new();
    let mut profiles = Vec::new();
    let mut passed = true;
    let mut worst = 0.0f64;
    for row in &report.rows {
        let pt = fmt_point(&row.x);
        let est = |q: &str, e: &MeasureEstimate| Row::estimate("blowup", &s.label, &pt, &name, q, e);
        rows.push(est("theta", &row.theta.limit));
        rows.push(est("beta", &row.beta));
        rows.push(est("upper_density", &row.upper.limit));
        rows.push(est("tangent_section", &row.h_tan));
        let seed = row.theta.limit.seed;
        rows.push(Row::exact("blowup", &s.label, &pt, &name, "theta_gap", row.theta_gap, seed));
        rows.push(Row::exact("blowup", &s.label, &pt, &name, "upper_gap", row.upper_gap, seed));
        if let Some(g) = row.coincidence_gap {
            rows.push(Row::exact("blowup", &s.label, &pt, &name, "coincidence_gap", g, seed));
        }
        let gap = row.theta_gap.max(row.upper_gap).max(row.coincidence_gap.unwrap_or(0.0));
        worst = worst.max(gap);
        passed &= gap <= tol;
        profiles.push(ProfileRecord::new(&s.label, &row.x, "federer", &row.theta));
        profiles.push(ProfileRecord::new(&s.label, &row.x, "upper", &row.upper));
    }
    let mut detail = format!("{}: {} point(s), worst gap {worst:.3e} (limit {:.0}%)", s.label, report.rows.len(), tol * 100.0);
    if ctx.preset == BudgetPreset::Low {
        detail.push_str(", tolerance widened for the low budget");
    }
    if control.is_some() {
        detail.push_str(", negative control");
    }
    Ok(SuiteResult { name: "blowup", passed, detail, rows, profiles })
}

pub fn projection_lemma(ctx: &Context) -> Result<SuiteResult, CliError> {
    let samples = ctx.budget().final_samples;
    let mut rng = mc::stream_rng(ctx.task_seed(0x9A), 0);
    let mut rows = Vec::new();
    let mut passed = true;
    let mut worst = 0.0f64;
    for i in 0..ctx.config.triples {
        let n = 1 + i % 2;
        let v = random_horizontal_subgroup(n, 1, &mut rng).map_err(numerical)?;
        let m = random_vertical_complement(&v, 1.0, &mut rng).map_err(numerical)?;
        let w = random_vertical_complement(&v, 1.0, &mut rng).map_err(numerical)?;
        let seed = ctx.task_seed(1000 + i as u64);
        let r = verify_projection_lemma(&v, &m, &w, &CoordBox::unit(m.dim()), samples, seed).map_err(numerical)?;
        let subject = format!("triple {i} (n = {n})");
        let ratio_times = |e: &MeasureEstimate| e.scaled(1.0 / r.source_measure);
        rows.push(Row::exact("projection-lemma", &subject, "", "", "ratio", r.ratio, seed));
        rows.push(Row::estimate("projection-lemma", &subject, "", "", "jacobian_ratio", &ratio_times(&r.jacobian_estimate)));
        rows.push(Row::estimate("projection-lemma", &subject, "", "", "indicator_ratio", &ratio_times(&r.indicator_estimate)));
        worst = worst.max(r.jacobian_rel_error).max(r.indicator_rel_error);
        passed &= r.passed;
    }
    let detail = format!("{} triple(s), worst relative error {worst:.3e} (limit 2%)", ctx.config.triples);
    Ok(SuiteResult::new("projection-lemma", passed, detail, rows))
}

pub fn chain_rule(ctx: &Context) -> Result<SuiteResult, CliError> {
    let s = ctx.surface()?;
    let n = s.model.n();
    let probe = parse(&format!("x1 + x2*x{d} + x{d}^2", d = 2 * n + 1), n).map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut rows = Vec::new();
    let mut passed = true;
    let mut worst = 0.0f64;
    let mut defect = 0.0f64;
    let mut controls_fail = true;
    for (i, x) in s.points.iter().enumerate() {
        let xw = s.model.split().pi_w(x);
        let pt = fmt_point(x);
        let base = VerifyOptions { seed: ctx.task_seed(0xC4 + i as u64), ..VerifyOptions::default() };
        let with_probe = VerifyOptions { probe: Some(&probe), ..base.clone() };
        let control = VerifyOptions { dphi_perturbation: 0.1, ..base.clone() };
        for (label, opts) in [("f", &base), ("probe", &with_probe)] {
            let r = verify_chain_rule(&s.model, &xw, &CHAIN_RULE_SCALES, opts).map_err(numerical)?;
            for (sc, q) in r.scales.iter().zip(&r.ratios) {
                rows.push(Row::exact("chain-rule", &s.label, &pt, label, &format!("remainder_ratio(s={sc:e})"), *q, opts.seed));
            }
            if label == "f" {
                rows.push(Row::exact("chain-rule", &s.label, &pt, label, "kernel_defect", r.kernel_defect, opts.seed));
                defect = defect.max(r.kernel_defect);
            }
            worst = worst.max(*r.ratios.last().unwrap_or(&f64::INFINITY));
            passed &= r.passed;
        }
        let c = verify_chain_rule(&s.model, &xw, &CHAIN_RULE_SCALES, &control).map_err(numerical)?;
        rows.push(Row::exact(
            "chain-rule",
            &s.label,
            &pt,
            "f",
            "control_remainder_ratio",
            *c.ratios.last().unwrap_or(&f64::NAN),
            control.seed,
        ));
        controls_fail &= !c.passed;
    }
    let detail = format!(
        "{}: last-scale ratio {worst:.2e} (limit 1e-2), kernel defect {defect:.2e} (limit 1e-8), perturbed dphi {}",
        s.label,
        if controls_fail { "rejected" } else { "NOT rejected" }
    );
    Ok(SuiteResult::new("chain-rule", passed && controls_fail, detail, rows))
}

pub fn uid(ctx: &Context) -> Result<SuiteResult, CliError> {
    let s = ctx.surface()?;
    let d = ctx.config.distance()?;
    let mut rows = Vec::new();
    let mut passed = true;
    for (i, x) in s.points.iter().enumerate() {
        let wbar = s.model.split().pi_w(x);
        let opts = VerifyOptions { distance: d.clone(), seed: ctx.task_seed(0x1D + i as u64), ..VerifyOptions::default() };
        let r = verify_uid(&s.model, &wbar, &UID_DELTAS, &opts).map_err(numerical)?;
        for (delta, v) in r.deltas.iter().zip(&r.values) {
            rows.push(Row::exact("uid", &s.label, &fmt_point(x), &d.name(), &format!("sup_ratio(delta={delta:e})"), *v, opts.seed));
        }
        passed &= r.passed;
    }
    let detail = format!("{}: {} point(s), sup ratios decrease with delta", s.label, s.points.len());
    Ok(SuiteResult::new("uid", passed, detail, rows))
}

pub fn group_axioms(ctx: &Context) -> Result<SuiteResult, CliError> {
    let r = check_axioms(10_000, ctx.task_seed(0x6A), 1e-12);
    let row = |q: &str, v: f64| Row::exact("group-axioms", "H^1..H^3", "", "", q, v, ctx.task_seed(0x6A));
    let rows = vec![
        row("associativity", r.associativity),
        row("inverse", r.inverse),
        row("dilation", r.dilation),
        row("basis_extension", r.basis),
    ];
    let worst = r.associativity.max(r.inverse).max(r.dilation).max(r.basis);
    Ok(SuiteResult::new("group-axioms", r.passed, format!("{} samples, worst defect {worst:.2e} (limit 1e-12)", r.samples), rows))
}

pub fn metrics(ctx: &Context) -> Result<SuiteResult, CliError> {
    let n = ctx.config.n;
    let d = ctx.config.distance()?;
    let seed = ctx.task_seed(0x3E);
    let check = |d: &HomogeneousDistance| validate_distance(d, n, 100_000, seed);
    let r = check(&d);
    let cal = calibrate_family(Family::Dinf, n, 100_000, seed).map_err(numerical)?;
    let mut rows = Vec::new();
    let name = d.name();
    rows.push(Row::exact("metrics", &name, "", &name, "triangle_violation", r.max_triangle_violation, seed));
    rows.push(Row::exact("metrics", &name, "", &name, "homogeneity_error", r.max_homogeneity_error, seed));
    rows.push(Row::exact("metrics", &name, "", &name, "symmetry_error", r.max_symmetry_error, seed));
    rows.push(Row::exact("metrics", "dinf", "", "dinf", "calibrated_eps", cal.parameter, seed));
    let ok = r.passed && r.max_homogeneity_error <= 1e-12 && cal.passed && cal.rejected_above == Some(true);
    let detail = format!(
        "{name}: triangle {:.1e}, homogeneity {:.1e}; dinf calibrated eps = {}, 5% above rejected: {}",
        r.max_triangle_violation,
        r.max_homogeneity_error,
        cal.parameter,
        cal.rejected_above == Some(true)
    );
    Ok(SuiteResult::new("metrics", ok, detail, rows))
}

fn surface_sample(s: &Surface, count: usize, seed: u64) -> Result<Vec<heis_area::group::Point>, CliError> {
    let mut rng = mc::stream_rng(seed, 0);
    let dom = s.model.domain();
    (0..count)
        .map(|_| {
            let c: Vec<f64> = dom.center().iter().zip(dom.half()).map(|(c, h)| c + 0.9 * h * rng.gen_range(-1.0..1.0)).collect();
            s.model.graph_map(&s.model.split().w().point(&c).map_err(numerical)?).map_err(numerical)
        })
        .collect()
}

pub fn claim_two(ctx: &Context) -> Result<SuiteResult, CliError> {
    let s = ctx.surface()?;
    let seed = ctx.task_seed(0xC2);
    let mut worst = 0.0f64;
    for x in surface_sample(&s, 100, seed)? {
        worst = worst.max((density_ratio_times_cone(&s.model, &x).map_err(numerical)? - 1.0).abs());
    }
    let rows = vec![Row::exact("density-ratio", &s.label, "100 samples", "", "max_defect", worst, seed)];
    Ok(SuiteResult::new("density-ratio", worst <= 1e-6, format!("{}: max |J_H/J_V · ‖V∧N_x‖ − 1| = {worst:.2e} (limit 1e-6)", s.label), rows))
}

pub fn integrand(ctx: &Context) -> Result<SuiteResult, CliError> {
    let s = ctx.surface()?;
    if !s.model.split().is_orthogonal() {
        return Ok(SuiteResult::new("integrand", true, format!("{}: skipped, W is not orthogonal to V", s.label), Vec::new()));
    }
    let seed = ctx.task_seed(0x16);
    let mut worst = 0.0f64;
    for x in surface_sample(&s, 100, seed)? {
        let a = area_integrand(&s.model, &x).map_err(numerical)?;
        let j = intrinsic_jacobian(&intrinsic_differential(&s.model, &x).map_err(numerical)?);
        worst = worst.max((a - j).abs());
    }
    let rows = vec![Row::exact("integrand", &s.label, "100 samples", "", "max_defect", worst, seed)];
    Ok(SuiteResult::new("integrand", worst <= 1e-6, format!("{}: max |integrand − intrinsic Jacobian| = {worst:.2e} (limit 1e-6)", s.label), rows))
}

/// Every suite in turn; a failing or erroring suite does not stop the rest.
pub fn verify_all(ctx: &Context) -> Vec<SuiteResult> {
    type Runner = fn(&Context) -> Result<SuiteResult, CliError>;
    let suites: [(&'static str, Runner); 9] = [
        ("group-axioms", group_axioms),
        ("metrics", metrics),
        ("projection-lemma", projection_lemma),
        ("chain-rule", chain_rule),
        ("uid", uid),
        ("density-ratio", claim_two),
        ("integrand", integrand),
        ("spherical-factor", spherical_factor),
        ("blowup", blowup),
    ];
    suites
        .into_iter()
        .map(|(name, run)| match run(ctx) {
            Ok(r) => r,
            Err(e) => SuiteResult::new(name, false, format!("error: {e}"), Vec::new()),
        })
        .collect()
}
