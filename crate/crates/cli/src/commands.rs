use std::path::Path;

use ehrsym::engine::constant::{minimum_limit_order, polarizing_vector, CUTOFF_ID};
use ehrsym::engine::expand::default_j;
use ehrsym::engine::{
    constant_direct, constant_limit, constant_tail, ehrhart_fit, expand as expand_symbol, kp_verify,
    ConstantEstimate, DirectOptions, ExpandOptions, LimitOptions, TailOptions,
};
use ehrsym::polytope::Polytope;
use ehrsym::quadrature::QuadratureSpec;
use ehrsym::record;
use ehrsym::report::{num, opt_num, Report};
use ehrsym::summation::{enumerate, weighted_sum, weighted_sum_exact};
use ehrsym::symbols::{parse_polynomial, r64_to_f64, HomPiece, SymbolExpr};
use ehrsym::todd::OperatorKind;
use ehrsym::{Error, Result};
use num_rational::Rational64;
use serde_json::Value;

use crate::{Common, MethodArg, Outcome};

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn load_polytope(path: &Path) -> Result<Polytope> {
    Polytope::from_json(&read_file(path)?)
}

fn symbol_text(arg: Option<&str>, default: &str) -> Result<String> {
    match arg {
        None => Ok(default.to_string()),
        Some(s) => match s.strip_prefix('@') {
            Some(path) => Ok(read_file(Path::new(path))?.trim().to_string()),
            None => Ok(s.to_string()),
        },
    }
}

fn require_symbol(arg: Option<&str>) -> Result<String> {
    match arg {
        Some(_) => symbol_text(arg, ""),
        None => Err(Error::InvalidArgument("--symbol is required".into())),
    }
}

fn quad_spec(tol: Option<f64>) -> Result<QuadratureSpec> {
    let mut spec = QuadratureSpec::default();
    if let Some(t) = tol {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidArgument(format!("--tol must lie in (0, 1), got {t}")));
        }
        spec.tol = t;
    }
    Ok(spec)
}

fn quad_header(r: &mut Report, spec: &QuadratureSpec) {
    r.set("quad_order", spec.order)
        .set("quad_tol", num(spec.tol))
        .set("quad_max_regions", spec.max_regions);
}

fn base_report(command: &str, p: &Polytope, path: &Path, kind: OperatorKind) -> Report {
    let mut r = Report::new(command);
    r.set("polytope_file", path.display().to_string())
        .set("polytope", p.describe())
        .set("kind", kind.name());
    r
}

pub fn count(common: &Common, n: i64) -> Result<Outcome> {
    if n < 1 {
        return Err(Error::InvalidArgument(format!("--N must be >= 1, got {n}")));
    }
    let p = load_polytope(&common.polytope)?;
    let kind: OperatorKind = common.kind.into();
    let text = symbol_text(common.symbol.as_deref(), "1")?;
    let f = SymbolExpr::parse(&text, Some(p.dim()))?;
    let mut report = base_report("count", &p, &common.polytope, kind);
    report.set("symbol", f.to_string()).set("N", n);
    let points = enumerate(&p, n)?.len();
    let weighted = match f.to_polynomial() {
        Some(poly) => Value::from(weighted_sum_exact(&p, n, &poly, kind)?.to_string()),
        None => num(weighted_sum(&p, n, &f.density(None), kind)?),
    };
    report.push(record! {"points" => points, "weighted" => weighted});
    Ok(Outcome { report, pass: true })
}

pub fn verify_kp(common: &Common, n_max: i64) -> Result<Outcome> {
    let p = load_polytope(&common.polytope)?;
    let kind: OperatorKind = common.kind.into();
    let f = parse_polynomial(&require_symbol(common.symbol.as_deref())?, Some(p.dim()))?;
    let kp = kp_verify(&p, &f, n_max, kind)?;
    let mut report = base_report("verify-kp", &p, &common.polytope, kind);
    report
        .set("symbol", kp.symbol.clone())
        .set("Nmax", n_max)
        .set("k", kp.k)
        .set("operator_polynomial", kp.operator_polynomial.clone());
    for row in &kp.rows {
        report.push(record! {
            "N" => row.n,
            "lattice_sum" => row.lattice_sum.clone(),
            "operator_value" => row.operator_value.clone(),
            "pass" => row.pass,
        });
    }
    report.push(record! {"result" => if kp.pass { "PASS" } else { "FAIL" }});
    Ok(Outcome { report, pass: kp.pass })
}

pub fn fit(common: &Common) -> Result<Outcome> {
    let p = load_polytope(&common.polytope)?;
    let kind: OperatorKind = common.kind.into();
    let f = parse_polynomial(&symbol_text(common.symbol.as_deref(), "1")?, Some(p.dim()))?;
    let fit = ehrhart_fit(&p, &f, kind)?;
    let mut report = base_report("fit", &p, &common.polytope, kind);
    report
        .set("symbol", fit.symbol.clone())
        .set("degree", fit.degree)
        .set("interpolation_points", fit.interpolation_points.clone())
        .set("verification_points", fit.verification_points.clone());
    report.push(record! {"polynomial" => fit.polynomial.clone()});
    for (d, c) in fit.coefficients.iter().enumerate() {
        report.push(record! {"degree" => d, "coefficient" => c.clone()});
    }
    Ok(Outcome { report, pass: true })
}

pub fn expand(common: &Common, k: Option<usize>, j: Option<i64>, tol: Option<f64>, truncate: Option<f64>) -> Result<Outcome> {
    let p = load_polytope(&common.polytope)?;
    let kind: OperatorKind = common.kind.into();
    let f = SymbolExpr::parse(&require_symbol(common.symbol.as_deref())?, Some(p.dim()))?;
    let n = p.dim() as f64;
    let k = k.unwrap_or_else(|| 4.max((n + f.order_f64()).floor() as usize + 1));
    let j = j.unwrap_or_else(|| default_j(&f, k));
    let opts = ExpandOptions {
        limit: LimitOptions {
            quad: quad_spec(tol)?,
            ..LimitOptions::default()
        },
        ..ExpandOptions::default()
    };
    let mut e = expand_symbol(&p, &f, k, Some(j), kind, &opts)?;
    if let Some(d) = truncate {
        e = e.truncate(d);
    }
    let mut report = base_report("expand", &p, &common.polytope, kind);
    report
        .set("symbol", f.to_string())
        .set("k", k)
        .set("j", e.j.map(Value::from).unwrap_or(Value::Null))
        .set("schedule", opts.limit.schedule.clone())
        .set("cutoff", CUTOFF_ID)
        .set("max_condition", num(opts.max_condition))
        .set("truncate", opt_num(truncate));
    quad_header(&mut report, &opts.limit.quad);
    for t in &e.ladder {
        report.push(record! {
            "type" => "term",
            "exponent" => t.exponent.clone(),
            "coefficient" => num(t.coefficient),
            "error" => num(t.error),
            "exact" => t.exact.clone().map(Value::from).unwrap_or(Value::Null),
        });
    }
    report.push(record! {"type" => "constant", "value" => num(e.constant), "error" => num(e.constant_error)});
    if let Some(res) = &e.residual {
        for s in &res.samples {
            report.push(record! {"type" => "residual", "N" => s.n, "value" => num(s.value), "error" => num(s.error)});
        }
        report.push(record! {
            "type" => "slope",
            "observed" => opt_num(res.observed_slope),
            "predicted" => num(res.predicted_slope),
        });
    }
    Ok(Outcome { report, pass: true })
}

pub struct ConstantArgs {
    pub method: MethodArg,
    pub k: Option<usize>,
    pub j: Option<i64>,
    pub gauge: Option<String>,
    pub tol: Option<f64>,
    pub seed: u64,
    pub richardson: bool,
}

fn parse_gauges(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("bad gauge value '{s}'")))
        })
        .collect()
}

fn estimate_record(gauge: Option<f64>, est: &ConstantEstimate) -> serde_json::Map<String, Value> {
    record! {
        "type" => "estimate",
        "gauge" => opt_num(gauge),
        "method" => est.method.name(),
        "value" => num(est.value),
        "error" => num(est.error),
        "k" => est.k.map(Value::from).unwrap_or(Value::Null),
        "j" => est.j.map(Value::from).unwrap_or(Value::Null),
        "radius" => est.radius.map(Value::from).unwrap_or(Value::Null),
        "xi" => est.xi.clone().map(Value::from).unwrap_or(Value::Null),
    }
}

pub fn constant(common: &Common, args: &ConstantArgs) -> Result<Outcome> {
    let p = load_polytope(&common.polytope)?;
    let kind: OperatorKind = common.kind.into();
    let f = SymbolExpr::parse(&require_symbol(common.symbol.as_deref())?, Some(p.dim()))?;
    let n = p.dim();
    let gauges: Vec<Option<f64>> = match &args.gauge {
        Some(text) => parse_gauges(text)?.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let quad = quad_spec(args.tol)?;
    let limit = LimitOptions {
        quad,
        seed: args.seed,
        richardson: args.richardson,
        ..LimitOptions::default()
    };
    let direct = DirectOptions {
        tol: args.tol.unwrap_or(DirectOptions::default().tol),
        ..DirectOptions::default()
    };
    let tail_opts = TailOptions {
        limit: limit.clone(),
        ..TailOptions::default()
    };
    let default_k = |order: f64| 4.max(minimum_limit_order(n, order));
    let j = args.j.unwrap_or(-(n as i64) - 5);
    let methods: Vec<MethodArg> = match args.method {
        MethodArg::All => vec![MethodArg::Direct, MethodArg::Limit, MethodArg::Tail],
        m => vec![m],
    };

    let mut report = base_report("constant", &p, &common.polytope, kind);
    report
        .set("symbol", f.to_string())
        .set("order", num(f.order_f64()))
        .set("method", format!("{:?}", args.method).to_lowercase())
        .set("k", args.k.map(Value::from).unwrap_or_else(|| Value::from(default_k(f.order_f64()))))
        .set("j", j)
        .set("gauge", gauges.iter().map(|g| opt_num(*g)).collect::<Vec<_>>())
        .set("schedule", limit.schedule.clone())
        .set("richardson", args.richardson)
        .set("direct_tol", num(direct.tol))
        .set("tail_tol", num(tail_opts.tail_tol))
        .set("cutoff", CUTOFF_ID)
        .set("seed", args.seed)
        .set("xi", polarizing_vector(&p, None, args.seed)?);
    quad_header(&mut report, &quad);

    for &gauge in &gauges {
        let order = f.order_f64() + gauge.unwrap_or(0.0);
        let mut found: Vec<ConstantEstimate> = Vec::new();
        for &m in &methods {
            let result = match m {
                MethodArg::Limit => {
                    let k = match (args.k, gauge) {
                        (Some(k), Some(_)) => k.max(minimum_limit_order(n, order)),
                        (Some(k), None) => k,
                        (None, _) => default_k(order),
                    };
                    constant_limit(&p, &f, k, kind, gauge, &limit)
                }
                MethodArg::Direct => constant_direct(&f, gauge, &direct),
                MethodArg::Tail => {
                    let g = match gauge {
                        Some(s) => {
                            let r = Rational64::approximate_float(s)
                                .filter(|r| r64_to_f64(*r) == s)
                                .ok_or_else(|| Error::InvalidArgument(format!("gauge {s} is not a simple rational")))?;
                            f.with_gauge(r)
                        }
                        None => f.clone(),
                    };
                    constant_tail(&p, &g, j, kind, &tail_opts).map(|(mut est, _)| {
                        est.gauge = gauge;
                        est
                    })
                }
                MethodArg::All => unreachable!(),
            };
            match result {
                Ok(est) => {
                    report.push(estimate_record(gauge, &est));
                    found.push(est);
                }
                // a cross-check skips methods whose preconditions fail
                Err(Error::InvalidArgument(reason)) if args.method == MethodArg::All => {
                    report.push(record! {
                        "type" => "skipped",
                        "gauge" => opt_num(gauge),
                        "method" => format!("{m:?}").to_lowercase(),
                        "reason" => reason,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        if found.len() > 1 {
            let mut spread: f64 = 0.0;
            let mut budget: f64 = 0.0;
            for (i, a) in found.iter().enumerate() {
                for b in &found[i + 1..] {
                    spread = spread.max((a.value - b.value).abs());
                    budget = budget.max(a.error + b.error);
                }
            }
            report.push(record! {
                "type" => "discrepancy",
                "gauge" => opt_num(gauge),
                "max" => num(spread),
                "budget" => num(budget),
                "agree" => spread <= budget,
            });
        }
    }
    Ok(Outcome { report, pass: true })
}

fn piece_text(piece: &HomPiece) -> String {
    piece
        .parts
        .iter()
        .map(|part| {
            let mut s = format!("{}", part.coeff);
            for (i, &e) in part.exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => s.push_str(&format!("*x{}", i + 1)),
                    _ => s.push_str(&format!("*x{}^{e}", i + 1)),
                }
            }
            if part.rho != Rational64::from_integer(0) {
                s.push_str(&format!("*|x|^{}", part.rho));
            }
            s
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

pub fn info(polytope: Option<&Path>, symbol: Option<&str>, j: Option<i64>) -> Result<Outcome> {
    let mut report = Report::new("info");
    let mut dim = None;
    if let Some(path) = polytope {
        let p = load_polytope(path)?;
        dim = Some(p.dim());
        report
            .set("polytope_file", path.display().to_string())
            .set("dim", p.dim())
            .set("facets", p.num_facets())
            .set("regular", p.is_regular())
            .set("volume", p.volume()?.to_string());
        match p.polarize_perturbed(&(1..=p.dim() as i64).collect::<Vec<_>>(), 0) {
            Ok(pol) => report.set("xi", pol.xi).set("xi_minimizer", pol.minimizer),
            Err(_) => report.set("xi", Value::Null),
        };
        for (i, h) in p.facets().iter().enumerate() {
            report.push(record! {"type" => "facet", "index" => i, "u" => h.u.clone(), "a" => h.a});
        }
        for v in p.vertices() {
            report.push(record! {
                "type" => "vertex",
                "point" => v.point.clone(),
                "tight" => v.tight_facets.clone(),
                "edges" => Value::from(v.edge_generators.iter().map(|g| Value::from(g.clone())).collect::<Vec<_>>()),
            });
        }
    }
    if let Some(text) = symbol {
        let f = SymbolExpr::parse(&symbol_text(Some(text), "")?, dim)?;
        let j = j.unwrap_or(f.order_f64().floor() as i64 - 4);
        let tail = f.tail(Rational64::from_integer(j));
        report
            .set("symbol", f.to_string())
            .set("symbol_dim", f.dim())
            .set("order", num(f.order_f64()))
            .set("polynomial", f.to_polynomial().is_some())
            .set("j", j)
            .set("tail_decay", num(tail.decay_exponent))
            .set("tail_constant", num(tail.outer_constant))
            .set("cutoff", CUTOFF_ID);
        for piece in &tail.pieces {
            report.push(record! {
                "type" => "piece",
                "degree" => num(r64_to_f64(piece.degree)),
                "terms" => piece_text(piece),
            });
        }
    }
    if polytope.is_none() && symbol.is_none() {
        return Err(Error::InvalidArgument("info needs --polytope and/or --symbol".into()));
    }
    Ok(Outcome { report, pass: true })
}
