use crate::cache::IaCache;
use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::output::{emit, render_json, Cell, Table};
use dimer_sg::asymptotics::{convergence_sweep, epsilon_schedule, ParityCase, ScalingParams};
use dimer_sg::height_field::{
    a_height_cov_exact, deriv_corr_exact, deriv_corr_limit, expr_covariance, height_expr, scaled_a_faces,
    smeared_two_point, AFace, Axis, SmearedField, TestFunction,
};
use dimer_sg::kernel_exact::{
    cylinder_prob, ia_double_oracle, ia_prefetch, ia_single, kinv, kinv_double_oracle, kinv_indices, WeightParams,
};
use dimer_sg::lattice::{EdgeDimer, VertexG};
use dimer_sg::par;
use dimer_sg::sine_gordon::{
    c_mu, f_profile, fermion_k0_form, sg_deriv_two_point, sg_two_point, truncated_corr, DerivKind, FermionIndex,
    FourierGrid, SGParams,
};
use dimer_sg::special_functions::{identity_lhs, identity_rhs, k1, BesselIdentity, RadialPair};
use serde_json::{json, Value};
use std::f64::consts::PI;

/// Rendered output plus an optional failed self-check.
struct Report {
    text: String,
    failed: Option<String>,
}

impl Report {
    fn ok(text: String) -> Self {
        Self { text, failed: None }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let name = cli.command.name();
    let file = ConfigFile::load(cli.config.as_ref(), name)?;
    let globals = file.globals(&cli);
    if let Some(n) = globals.threads {
        par::set_threads(n)?;
    }
    par::set_sequential(globals.sequential);
    let cache = IaCache::from_env();
    let report = match &cli.command {
        Command::BesselCheck(a) => {
            let (a, params) = file.resolve(a)?;
            bessel_check(&a, &params)?
        }
        Command::Ia(a) => {
            let (a, params) = file.resolve(a)?;
            ia(&a, &params, &cache)?
        }
        Command::Kinv(a) => {
            let (a, params) = file.resolve(a)?;
            kinv_cmd(&a, &params, &cache)?
        }
        Command::EdgeProb(a) => {
            let (a, params) = file.resolve(a)?;
            edge_prob(&a, &params, &cache)?
        }
        Command::Converge(a) => {
            let (a, params) = file.resolve(a)?;
            converge(&a, &params, &cache)?
        }
        Command::DerivCorr(a) => {
            let (a, params) = file.resolve(a)?;
            deriv_corr(&a, &params, &cache)?
        }
        Command::HeightCov(a) => {
            let (a, params) = file.resolve(a)?;
            height_cov(&a, &params, &cache)?
        }
        Command::Smeared(a) => {
            let (a, params) = file.resolve(a)?;
            smeared(&a, &params, &cache)?
        }
        Command::Sg(a) => {
            let (a, params) = file.resolve(a)?;
            sg(&a, &params)?
        }
        Command::Compare(a) => {
            let (a, params) = file.resolve(a)?;
            compare(&a, &params, &cache)?
        }
    };
    emit(&report.text, globals.out.as_deref())?;
    match report.failed {
        Some(msg) => Err(CliError::Check(msg)),
        None => Ok(()),
    }
}

fn weights(a: &Option<f64>) -> CliResult<WeightParams> {
    Ok(WeightParams::new(required(a, "a")?)?)
}

fn pair2<T: Copy>(v: &[T], key: &str) -> CliResult<(T, T)> {
    match v {
        [x, y] => Ok((*x, *y)),
        _ => Err(CliError::usage(format!("`{key}` needs exactly two values"))),
    }
}

fn axis_name(a: Axis) -> i64 {
    a.index() as i64
}

fn bessel_check(a: &BesselCheckArgs, params: &Value) -> CliResult<Report> {
    let n = a.n.unwrap_or(10);
    let (lo, hi) = (a.r_min.unwrap_or(0.1), a.r_max.unwrap_or(6.0));
    let tol = a.tol.unwrap_or(1e-8);
    if n < 2 || !(lo >= 0.0 && hi > lo) {
        return Err(CliError::usage("bessel-check needs n >= 2 and 0 <= r_min < r_max"));
    }
    let grid: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect();
    let mut points = Vec::new();
    for &r1 in &grid {
        for &r2 in &grid {
            if r1 > 0.0 || r2 > 0.0 {
                points.push((r1, r2));
            }
        }
    }
    let rows = par::map(&points, |&(r1, r2)| -> dimer_sg::Result<Vec<(BesselIdentity, f64, f64)>> {
        let p = RadialPair::new(r1, r2)?;
        BesselIdentity::ALL
            .iter()
            .map(|&w| Ok((w, identity_lhs(w, p)?, identity_rhs(w, p)?)))
            .collect()
    });
    let mut table = Table::new(&["identity", "r1", "r2", "lhs", "rhs", "rel_err", "pass"]);
    let mut failures = 0;
    for (&(r1, r2), row) in points.iter().zip(rows) {
        let kk = k1(r1.hypot(r2))?;
        for (w, lhs, rhs) in row? {
            let scale = match w {
                BesselIdentity::K0 => rhs.abs(),
                _ => rhs.abs().max(kk),
            };
            let rel = (lhs - rhs).abs() / scale;
            let pass = rel <= tol;
            failures += usize::from(!pass);
            table.push(vec![
                w.name().into(),
                r1.into(),
                r2.into(),
                lhs.into(),
                rhs.into(),
                rel.into(),
                if pass { "pass" } else { "fail" }.into(),
            ]);
        }
    }
    Ok(Report {
        text: table.render("bessel-check", params)?,
        failed: (failures > 0).then(|| format!("{failures} identity evaluations above tolerance {tol:e}")),
    })
}

fn ia(a: &IaArgs, params: &Value, cache: &IaCache) -> CliResult<Report> {
    let p = weights(&a.a)?;
    let (km, lm) = (a.k_max.unwrap_or(8) as i64, a.l_max.unwrap_or(8) as i64);
    let oracle = a.oracle.unwrap_or(false);
    cache.load(&p)?;
    let idx: Vec<(i64, i64)> = (0..=km).flat_map(|k| (0..=lm).map(move |l| (k, l))).collect();
    ia_prefetch(&idx, &p)?;
    cache.save(&p)?;
    let cols: &[&str] = if oracle { &["k", "l", "ia", "oracle", "abs_diff"] } else { &["k", "l", "ia"] };
    let mut table = Table::new(cols);
    for &(k, l) in &idx {
        let v = ia_single(k, l, &p)?;
        let mut row: Vec<Cell> = vec![k.into(), l.into(), v.into()];
        if oracle {
            let o = ia_double_oracle(k, l, &p)?;
            row.extend([o.into(), (v - o).abs().into()]);
        }
        table.push(row);
    }
    Ok(Report::ok(table.render("ia", params)?))
}

fn vertex(v: &Option<Vec<i64>>, key: &str) -> CliResult<VertexG> {
    let (x, y) = pair2(&required(v, key)?, key)?;
    Ok(VertexG::new(x, y)?)
}

fn kinv_cmd(a: &KinvArgs, params: &Value, cache: &IaCache) -> CliResult<Report> {
    let p = weights(&a.a)?;
    let w = vertex(&a.white, "white")?;
    let b = vertex(&a.black, "black")?;
    cache.load(&p)?;
    ia_prefetch(&kinv_indices(&w, &b)?, &p)?;
    let k = kinv(&w, &b, &p)?;
    cache.save(&p)?;
    let oracle = a.oracle.unwrap_or(false);
    let mut cols = vec!["white_x", "white_y", "black_x", "black_y", "h", "re", "im"];
    let mut row: Vec<Cell> = vec![w.x.into(), w.y.into(), b.x.into(), b.y.into(), k.h.into(), k.value.re.into(), k.value.im.into()];
    if oracle {
        let o = kinv_double_oracle(&w, &b, &p)?;
        cols.extend(["re_oracle", "im_oracle", "abs_diff"]);
        row.extend([o.re.into(), o.im.into(), (k.value - o).norm().into()]);
    }
    let mut table = Table::new(&cols);
    table.push(row);
    Ok(Report::ok(table.render("kinv", params)?))
}

fn parse_edge(s: &str) -> CliResult<EdgeDimer> {
    let v: Vec<i64> = s
        .split(',')
        .map(|t| t.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("edge {s:?} must be four integers bx,by,wx,wy")))?;
    match v[..] {
        [bx, by, wx, wy] => Ok(EdgeDimer::new(VertexG::new(bx, by)?, VertexG::new(wx, wy)?)?),
        _ => Err(CliError::usage(format!("edge {s:?} must be four integers bx,by,wx,wy"))),
    }
}

fn edge_label(e: &EdgeDimer) -> String {
    format!("{}:{}:{}:{}", e.black.x, e.black.y, e.white.x, e.white.y)
}

fn edge_prob(a: &EdgeProbArgs, params: &Value, cache: &IaCache) -> CliResult<Report> {
    let p = weights(&a.a)?;
    let edges: Vec<EdgeDimer> = required(&a.edge, "edge")?.iter().map(|s| parse_edge(s)).collect::<CliResult<_>>()?;
    if edges.is_empty() {
        return Err(CliError::usage("at least one edge is required"));
    }
    cache.load(&p)?;
    let mut table = Table::new(&["edges", "probability"]);
    for e in &edges {
        table.push(vec![edge_label(e).into(), cylinder_prob(&[*e], &p)?.into()]);
    }
    if edges.len() > 1 {
        let label: Vec<String> = edges.iter().map(edge_label).collect();
        table.push(vec![label.join(";").into(), cylinder_prob(&edges, &p)?.into()]);
    }
    cache.save(&p)?;
    Ok(Report::ok(table.render("edge-prob", params)?))
}

fn parity_case(s: &str) -> CliResult<ParityCase> {
    let b = s.as_bytes();
    if b.len() != 2 || !b.iter().all(|c| *c == b'0' || *c == b'1') {
        return Err(CliError::usage(format!("case {s:?} must be one of 00, 01, 10, 11")));
    }
    Ok(ParityCase::new(b[0] - b'0', b[1] - b'0')?)
}

fn converge(a: &ConvergeArgs, params: &Value, cache: &IaCache) -> CliResult<Report> {
    let case = parity_case(&required(&a.case, "case")?)?;
    let alpha = required(&a.alpha, "alpha")?;
    let beta = required(&a.beta, "beta")?;
    let lambda = a.lambda.unwrap_or(1.0);
    let eps = match &a.eps {
        Some(e) => e.clone(),
        None => epsilon_schedule(alpha, beta, a.m.as_deref().unwrap_or(&[2, 4, 8, 16]))?,
    };
    let mut table = Table::new(&["eps", "case", "alpha", "beta", "re_exact", "im_exact", "re_limit", "im_limit", "abs_err"]);
    for &e in &eps {
        let p = ScalingParams::new(e, lambda)?.weights();
        cache.load(&p)?;
        let row = convergence_sweep(case, alpha, beta, lambda, &[e])?[0];
        cache.save(&p)?;
        table.push(vec![
            e.into(),
            case.to_string().into(),
            alpha.into(),
            beta.into(),
            row.exact.re.into(),
            row.exact.im.into(),
            row.limit.re.into(),
            row.limit.im.into(),
            row.abs_err.into(),
        ]);
    }
    Ok(Report::ok(table.render("converge", params)?))
}

fn axes(i: Option<u8>) -> CliResult<Vec<Axis>> {
    match i {
        Some(v) => Ok(vec![Axis::from_index(v)?]),
        None => Ok(vec![Axis::Horizontal, Axis::Vertical]),
    }
}

fn deriv_corr(a: &DerivCorrArgs, params: &Value, cache: &IaCache) -> CliResult<Report> {
    let x = required(&a.x, "x")?;
    let y = required(&a.y, "y")?;
    let lambda = a.lambda.unwrap_or(1.0);
    let eps = a.eps.clone().unwrap_or_else(|| vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]);
    let (is, js) = (axes(a.i)?, axes(a.j)?);
    let mut table = Table::new(&["eps", "i", "j", "exact", "limit", "abs_err"]);
    for &e in &eps {
        let s = ScalingParams::new(e, lambda)?;
        let (x1, x2) = scaled_a_faces(x, y, e)?;
        cache.load(&s.weights())?;
        for &i in &is {
            for &j in &js {
                let exact = deriv_corr_exact(i, j, x1, x2, &s)?;
                let limit = deriv_corr_limit(i, j, x, y, lambda)?;
                table.push(vec![
                    e.into(),
                    axis_name(i).into(),
                    axis_name(j).into(),
                    exact.into(),
                    limit.into(),
                    (exact - limit).abs().into(),
                ]);
            }
        }
        cache.save(&s.weights())?;
    }
    Ok(Report::ok(table.render("deriv-corr", params)?))
}

fn a_face(v: &Option<Vec<i64>>, key: &str) -> CliResult<AFace> {
    let (m, n) = pair2(&required(v, key)?, key)?;
    Ok(AFace::new(m, n)?)
}

fn height_cov(a: &HeightCovArgs, params: &Value, cache: &IaCache) -> CliResult<Report> {
    let p = weights(&a.a)?;
    let x1 = a_face(&a.x1, "x1")?;
    let x2 = a_face(&a.x2, "x2")?;
    cache.load(&p)?;
    let second = a_height_cov_exact(x1, x2, &p)?;
    let cov = expr_covariance(&height_expr(x1.face()), &height_expr(x2.face()), &p)?;
    cache.save(&p)?;
    let mut table = Table::new(&["m1", "n1", "m2", "n2", "second_moment", "covariance"]);
    let (f1, f2) = (x1.face(), x2.face());
    table.push(vec![f1.m.into(), f1.n.into(), f2.m.into(), f2.n.into(), second.into(), cov.into()]);
    Ok(Report::ok(table.render("height-cov", params)?))
}

/// Builds one test function; directional when `c0` or `c1` is given, or when
/// `directional_default` asks for the ∂1 derivative of the bump.
fn build_function(f: &FunctionSpec, key: &str, centre: (f64, f64), directional_default: bool) -> CliResult<TestFunction> {
    let centre = match &f.centre {
        Some(c) => pair2(c, &format!("{key}_centre"))?,
        None => centre,
    };
    let radius = f.radius.unwrap_or(0.5);
    let amplitude = f.amplitude.unwrap_or(1.0);
    let tf = if f.c0.is_some() || f.c1.is_some() {
        TestFunction::directional(centre, radius, f.c0.unwrap_or(0.0), f.c1.unwrap_or(0.0))?.scaled(amplitude)
    } else if directional_default {
        TestFunction::directional(centre, radius, 0.0, 1.0)?.scaled(amplitude)
    } else {
        TestFunction::bump(centre, radius, amplitude)?
    };
    Ok(tf)
}

fn build_pair(spec: &PairSpec, directional_default: bool) -> CliResult<(TestFunction, TestFunction)> {
    Ok((
        build_function(&spec.f1, "f1", (-1.0, 0.0), directional_default)?,
        build_function(&spec.f2, "f2", (1.0, 0.0), directional_default)?,
    ))
}

fn parse_field(s: &str) -> CliResult<SmearedField> {
    match s {
        "a-height" => Ok(SmearedField::AHeight),
        "full-height" => Ok(SmearedField::FullHeight),
        other => match DerivKind::parse(other) {
            Ok(DerivKind::Directional(i, j)) => Ok(SmearedField::Derivative(i, j)),
            _ => Err(CliError::usage(format!(
                "field {other:?} must be a-height, full-height, d0d0, d0d1, d1d0 or d1d1"
            ))),
        },
    }
}

/// (1/4π) times the sine-Gordon pairing of the matching continuum field.
fn sg_target(field: SmearedField, f1: &TestFunction, f2: &TestFunction, lambda: f64) -> CliResult<f64> {
    let s = SGParams::from_lambda(lambda)?;
    let v = match field {
        SmearedField::AHeight | SmearedField::FullHeight => sg_two_point(f1, f2, &s, &FourierGrid::default())?.value,
        SmearedField::Derivative(i, j) => sg_deriv_two_point(DerivKind::Directional(i, j), f1, f2, &s, 1e-4)?.value.re,
    };
    Ok(v / (4.0 * PI))
}

fn smeared(a: &SmearedArgs, params: &Value, cache: &IaCache) -> CliResult<Report> {
    let lambda = a.lambda.unwrap_or(1.0);
    let eps = a.eps.clone().unwrap_or_else(|| vec![1.0 / 16.0]);
    let field = parse_field(a.field.as_deref().unwrap_or("a-height"))?;
    let (f1, f2) = build_pair(&a.pair_spec(), false)?;
    let target = sg_target(field, &f1, &f2, lambda)?;
    let mut table = Table::new(&["eps", "value", "sg_value", "abs_err"]);
    for &e in &eps {
        let s = ScalingParams::new(e, lambda)?;
        cache.load(&s.weights())?;
        let v = smeared_two_point(&f1, &f2, &s, field)?.value;
        cache.save(&s.weights())?;
        table.push(vec![e.into(), v.into(), target.into(), (v - target).abs().into()]);
    }
    Ok(Report::ok(table.render("smeared", params)?))
}

fn compare(a: &CompareArgs, params: &Value, cache: &IaCache) -> CliResult<Report> {
    let lambda = a.lambda.unwrap_or(1.0);
    let eps = a.eps.clone().unwrap_or_else(|| vec![1.0 / 16.0, 1.0 / 24.0, 1.0 / 32.0]);
    let (f1, f2) = build_pair(&a.pair_spec(), true)?;
    if !f1.is_condition_one_pair(&f2) {
        return Err(dimer_sg::Error::Domain(
            "compare needs directional test functions whose underlying bumps have disjoint supports".into(),
        )
        .into());
    }
    let target = sg_target(SmearedField::AHeight, &f1, &f2, lambda)?;
    let mut table = Table::new(&["eps", "dimer", "sg_target", "abs_err"]);
    for &e in &eps {
        let s = ScalingParams::new(e, lambda)?;
        cache.load(&s.weights())?;
        let v = smeared_two_point(&f1, &f2, &s, SmearedField::AHeight)?.value;
        cache.save(&s.weights())?;
        table.push(vec![e.into(), v.into(), target.into(), (v - target).abs().into()]);
    }
    Ok(Report::ok(table.render("compare", params)?))
}

fn sg_params(a: &SgArgs) -> CliResult<SGParams> {
    Ok(match a.z {
        Some(z) => SGParams::new(z)?,
        None => SGParams::from_lambda(a.lambda.unwrap_or(1.0))?,
    })
}

fn point(v: &Option<Vec<f64>>, key: &str) -> CliResult<(f64, f64)> {
    pair2(&required(v, key)?, key)
}

fn sg(a: &SgArgs, params: &Value) -> CliResult<Report> {
    let op = required(&a.op, "op")?;
    let mu = || -> CliResult<f64> { a.mu.map_or_else(|| sg_params(a).map(|s| s.mu()), Ok) };
    let result = match op.as_str() {
        "F" => {
            let x = required(&a.x, "x")?;
            json!({ "x": x, "F": f_profile(x)? })
        }
        "cmu" => {
            let p = point(&a.p, "p")?;
            let m = mu()?;
            json!({ "p0": p.0, "p1": p.1, "mu": m, "c_mu": c_mu(p, m)? })
        }
        "two-point" => {
            let s = sg_params(a)?;
            let (f1, f2) = build_pair(&a.pair_spec(), false)?;
            let e = sg_two_point(&f1, &f2, &s, &FourierGrid::default())?;
            json!({ "z": s.z(), "mu": s.mu(), "value": e.value, "change": e.change, "points": e.points, "box_side": e.box_side })
        }
        "deriv" => {
            let s = sg_params(a)?;
            let kind = DerivKind::parse(&required(&a.kind, "kind")?)?;
            let (f1, f2) = build_pair(&a.pair_spec(), false)?;
            let e = sg_deriv_two_point(kind, &f1, &f2, &s, a.tol.unwrap_or(1e-4))?;
            json!({
                "kind": kind.name(), "z": s.z(), "mu": s.mu(),
                "re": e.value.re, "im": e.value.im, "change": e.change, "nodes_per_side": e.nodes_per_side,
            })
        }
        "fermion" => {
            let m = mu()?;
            let x = point(&a.point1, "point1")?;
            let y = point(&a.point2, "point2")?;
            let (a1, b1) = pair2(a.index1.as_deref().unwrap_or(&[2, 1]), "index1")?;
            let (a2, b2) = pair2(a.index2.as_deref().unwrap_or(&[1, 2]), "index2")?;
            let t = truncated_corr(FermionIndex::new(a1, b1, x)?, FermionIndex::new(a2, b2, y)?, m)?;
            json!({ "mu": m, "re": t.re, "im": t.im, "k0_form": fermion_k0_form(x, y, m)? })
        }
        other => {
            return Err(CliError::usage(format!(
                "op {other:?} must be one of F, cmu, two-point, deriv, fermion"
            )))
        }
    };
    let text = match a.format.as_deref().unwrap_or("json") {
        "json" => render_json("sg", params, result)?,
        "csv" => {
            let Value::Object(m) = &result else { unreachable!() };
            let cols: Vec<&String> = m.keys().collect();
            let mut table = Table::new(&cols);
            table.push(
                m.values()
                    .map(|v| match v {
                        Value::Number(n) if n.is_i64() => Cell::Int(n.as_i64().unwrap()),
                        Value::Number(n) => Cell::Num(n.as_f64().unwrap()),
                        Value::String(s) => Cell::Text(s.clone()),
                        _ => Cell::Num(f64::NAN),
                    })
                    .collect(),
            );
            table.render("sg", params)?
        }
        other => return Err(CliError::usage(format!("format {other:?} must be json or csv"))),
    };
    Ok(Report::ok(text))
}
