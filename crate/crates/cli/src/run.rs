//! The seven subcommand implementations. Each renders its table, decides the
//! pass/fail verdict behind the exit code, and lists any side files. Sweeps
//! run cell-parallel; rows are always collected in declaration order, so the
//! output bytes do not depend on the thread count.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use fraclab::capacity::{cap_local, cap_sp, default_capacity_box, flat_crack_law, int_cap_sp};
use fraclab::constants::{counterexample_sweep, doubleside_check, ConstantReport};
use fraclab::domain::GridDomain;
use fraclab::geometry::{cone_eccentricity, ConvexPolygon};
use fraclab::hardy::hardy_sharpness_curve;
use fraclab::kfunctional::{log_grid, KSolver};
use fraclab::norms::{gagliardo_global_pow, grad_seminorm_pow, lp_norm_pow, MathConstants};
use fraclab::params::{TOL_GEOM, TOL_QUAD};
use fraclab::{random_convex_polygon, FracParams};

use crate::config::{
    CapacityConfig, ConstantsConfig, CounterexampleConfig, GeometryConfig, HardyConfig,
    KProfileConfig, SLimitsConfig,
};
use crate::emit::{fmt, RunMeta};

/// One finished command: the main artifact, the verdict, and side files as
/// (path, content) pairs.
pub struct Rendered {
    pub content: String,
    pub pass: bool,
    pub side_files: Vec<(String, String)>,
}

impl Rendered {
    fn table(content: String, pass: bool) -> Self {
        Rendered { content, pass, side_files: Vec::new() }
    }
}

pub fn cmd_constants(cfg: &ConstantsConfig, meta: &mut RunMeta) -> Result<Rendered> {
    let mut cells = Vec::new();
    for nd in &cfg.domains {
        let dom = GridDomain::from_spec(&nd.domain)
            .with_context(|| format!("domain {:?}", nd.name))?;
        meta.note_domain(&nd.name, &dom);
        for &s in &cfg.s_list {
            for &p in &cfg.p_list {
                cells.push((nd.name.as_str(), dom.clone(), s, p));
            }
        }
    }
    let reports: Vec<fraclab::Result<ConstantReport>> = cells
        .par_iter()
        .map(|(_, dom, s, p)| doubleside_check(dom, &FracParams::new(*s, *p)?))
        .collect();
    let mut out = meta.csv_header();
    out.push_str(
        "domain,s,p,active,lambda1,lambda_s,lambda_interp_upper,\
         residual_equivalence,residual_oneside,residual_twosideconv,oneside_pass\n",
    );
    let mut pass = true;
    for ((name, dom, s, p), report) in cells.iter().zip(reports) {
        let r = report.with_context(|| format!("cell ({name}, s={s}, p={p})"))?;
        let mc = MathConstants::new(dom.dim(), *p)?;
        let rhs = 2f64.powf(p * (1.0 - s)) * dom.dim() as f64 * mc.omega_n * r.lambda1.powf(*s);
        let ok = r.residual_oneside >= -cfg.slack * rhs;
        pass &= ok;
        out.push_str(&format!(
            "{name},{},{},{},{},{},{},{},{},{},{}\n",
            fmt(*s),
            fmt(*p),
            dom.active_count(),
            fmt(r.lambda1),
            fmt(r.lambda_s),
            fmt(r.lambda_interp_upper),
            fmt(r.residual_equivalence),
            fmt(r.residual_oneside),
            fmt(r.residual_twosideconv),
            u8::from(ok),
        ));
    }
    Ok(Rendered::table(out, pass))
}

pub fn cmd_counterexample(cfg: &CounterexampleConfig, meta: &mut RunMeta) -> Result<Rendered> {
    let fp = FracParams::new(cfg.s, cfg.p)?;
    let rows = counterexample_sweep(cfg.dim, &cfg.ns, cfg.h, &fp)?;
    meta.note(
        "truncation",
        format!("cracked family: dim={} h={:e} n={:?}", cfg.dim, cfg.h, cfg.ns),
    );
    let mut out = meta.csv_header();
    out.push_str("n,lambda1,lambda_s,mu_cell,ratio,pass\n");
    let mut pass = true;
    for (i, row) in rows.iter().enumerate() {
        let decreasing = i == 0 || row.lambda_s < rows[i - 1].lambda_s;
        let bounded = row.lambda1 >= 0.95 * row.mu_cell;
        let ok = decreasing && bounded;
        pass &= ok;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.n,
            fmt(row.lambda1),
            fmt(row.lambda_s),
            fmt(row.mu_cell),
            fmt(row.ratio),
            u8::from(ok),
        ));
    }
    Ok(Rendered::table(out, pass))
}

pub fn cmd_kprofile(cfg: &KProfileConfig, meta: &mut RunMeta) -> Result<Rendered> {
    let dom = GridDomain::from_spec(&cfg.domain)?;
    meta.note_domain("domain", &dom);
    let u = cfg.function.build(&dom, meta.seed)?;
    let solver = KSolver::new(dom.clone(), cfg.p)?;
    let ts = log_grid(cfg.t_min, cfg.t_max, cfg.per_decade)?;
    let profile = solver.profile(&u, &ts)?;
    meta.note(
        "truncation",
        format!("t-window [{:e}, {:e}] per_decade={}", cfg.t_min, cfg.t_max, cfg.per_decade),
    );
    meta.note(
        "info",
        format!("norm_lp={} norm_grad={}", fmt(profile.norm_lp), fmt(profile.norm_grad)),
    );
    let mut out = meta.csv_header();
    out.push_str("t,k,residual\n");
    for i in 0..profile.t_samples.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt(profile.t_samples[i]),
            fmt(profile.k_values[i]),
            fmt(profile.residuals[i]),
        ));
    }
    Ok(Rendered::table(out, true))
}

pub fn cmd_capacity(cfg: &CapacityConfig, meta: &mut RunMeta) -> Result<Rendered> {
    if cfg.kind == "flat_crack" {
        return flat_crack_table(cfg, meta);
    }
    let dim = cfg.dim()?;
    let h = cfg.h.expect("validated");
    let nodes = cfg.target_nodes(h)?;
    let box_domain = match &cfg.box_bounds {
        Some(bounds) => GridDomain::make_box_bounds(dim, bounds, h)?,
        None => default_capacity_box(dim, &nodes, h)?,
    };
    let result = match cfg.kind.as_str() {
        "fractional" => cap_sp(&nodes, &box_domain, &FracParams::new(cfg.s.expect("validated"), cfg.p)?)?,
        "local" => cap_local(&nodes, &box_domain, cfg.p)?,
        "interpolation" => {
            int_cap_sp(&nodes, &box_domain, &FracParams::new(cfg.s.expect("validated"), cfg.p)?)?
        }
        other => bail!("unknown capacity kind {other:?}"),
    };
    meta.note_domain("capacity box", &result.box_used);
    let mut root = meta.json_value();
    root["result"] = json!({
        "value": result.value,
        "target_nodes": nodes.iter().map(|n| n[..dim].to_vec()).collect::<Vec<_>>(),
        "max_constraint_violation": result.max_constraint_violation,
        "box_doubling_delta": result.box_doubling_delta,
        "box_active_nodes": result.box_used.active_count(),
    });
    let mut side_files = Vec::new();
    if let Some(path) = &cfg.minimizer_csv {
        let mut csv = meta.csv_header();
        csv.push_str(if dim == 1 { "x,u\n" } else { "x,y,u\n" });
        let d = result.minimizer.domain();
        for a in 0..d.active_count() {
            let c = d.coords(d.active_box_index(a));
            let coords: Vec<String> = c[..dim].iter().map(|&x| fmt(x)).collect();
            csv.push_str(&format!("{},{}\n", coords.join(","), fmt(result.minimizer.values()[a])));
        }
        side_files.push((path.clone(), csv));
    }
    let content = serde_json::to_string_pretty(&root)? + "\n";
    Ok(Rendered { content, pass: true, side_files })
}

fn flat_crack_table(cfg: &CapacityConfig, meta: &mut RunMeta) -> Result<Rendered> {
    let fp = FracParams::new(cfg.s.expect("validated"), cfg.p)?;
    let a = cfg.half_length.expect("validated");
    let eps = cfg.epsilons.as_deref().expect("validated");
    let hs = cfg.hs.as_deref().expect("validated");
    let table = flat_crack_law(a, eps, hs, &fp)?;
    meta.note(
        "truncation",
        format!("flat crack: half_length={a:e} epsilons={eps:?} hs={hs:?}"),
    );
    let mut root = meta.json_value();
    root["result"] = json!({
        "rows": table
            .rows
            .iter()
            .map(|r| {
                json!({
                    "epsilon": r.epsilon,
                    "h": r.h,
                    "bound": r.bound,
                    "skipped": r.skipped,
                    "note": r.note,
                })
            })
            .collect::<Vec<_>>(),
        "slope": table.slope,
        "expected_exponent": table.expected_exponent,
    });
    let content = serde_json::to_string_pretty(&root)? + "\n";
    Ok(Rendered { content, pass: true, side_files: Vec::new() })
}

pub fn cmd_hardy(cfg: &HardyConfig, meta: &mut RunMeta) -> Result<Rendered> {
    let mut cells = Vec::new();
    for &alpha in &cfg.alphas {
        for &p in &cfg.p_list {
            cells.push((alpha, p));
        }
    }
    let curves: Vec<fraclab::Result<Vec<f64>>> = cells
        .par_iter()
        .map(|&(alpha, p)| {
            hardy_sharpness_curve(alpha, p, &cfg.deltas, cfg.t_min, cfg.t_end, cfg.per_decade)
        })
        .collect();
    meta.note(
        "truncation",
        format!("t-grid [{:e}, {:e}] per_decade={}", cfg.t_min, cfg.t_end, cfg.per_decade),
    );
    let mut out = meta.csv_header();
    out.push_str("alpha,p,delta,margin_over_rhs,pass\n");
    let mut pass = true;
    for ((alpha, p), curve) in cells.iter().zip(curves) {
        let ratios = curve.with_context(|| format!("cell (alpha={alpha}, p={p})"))?;
        for (i, &ratio) in ratios.iter().enumerate() {
            let nonneg = ratio >= -TOL_QUAD;
            let nonincreasing = i == 0 || ratio <= ratios[i - 1] + 1e-9;
            let ok = nonneg && nonincreasing;
            pass &= ok;
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt(*alpha),
                fmt(*p),
                fmt(cfg.deltas[i]),
                fmt(ratio),
                u8::from(ok),
            ));
        }
    }
    Ok(Rendered::table(out, pass))
}

pub fn cmd_geometry(cfg: &GeometryConfig, meta: &mut RunMeta) -> Result<Rendered> {
    let mut polygons: Vec<(String, ConvexPolygon)> = Vec::new();
    for (i, vertices) in cfg.polygons.iter().enumerate() {
        let poly = ConvexPolygon::new(vertices.clone())
            .with_context(|| format!("polygon {i}"))?;
        polygons.push((format!("poly{i}"), poly));
    }
    for i in 0..cfg.random_polygons {
        let poly = random_convex_polygon(meta.seed.wrapping_add(i as u64))?;
        polygons.push((format!("rand{i}"), poly));
    }
    let margins: Vec<fraclab::Result<Vec<f64>>> = polygons
        .par_iter()
        .map(|(_, poly)| {
            cfg.t_list
                .iter()
                .map(|&t| poly.scaled_distance_margin(t, cfg.boundary_samples))
                .collect()
        })
        .collect();
    let mut out = meta.csv_header();
    out.push_str("kind,id,param,inradius,diameter,eccentricity,margin,pass\n");
    let mut pass = true;
    for (i, &beta) in cfg.cone_betas.iter().enumerate() {
        let ecc = cone_eccentricity(beta)?;
        out.push_str(&format!("cone,cone{i},{},,,{},,1\n", fmt(beta), fmt(ecc)));
    }
    for ((id, poly), row) in polygons.iter().zip(margins) {
        let row = row.with_context(|| format!("polygon {id}"))?;
        let (inradius, _) = poly.inradius_incenter();
        let diameter = poly.diameter();
        let ecc = poly.eccentricity();
        for (&t, &margin) in cfg.t_list.iter().zip(&row) {
            let ok = margin >= -TOL_GEOM;
            pass &= ok;
            out.push_str(&format!(
                "polygon,{id},{},{},{},{},{},{}\n",
                fmt(t),
                fmt(inradius),
                fmt(diameter),
                fmt(ecc),
                fmt(margin),
                u8::from(ok),
            ));
        }
    }
    Ok(Rendered::table(out, pass))
}

pub fn cmd_slimits(cfg: &SLimitsConfig, meta: &mut RunMeta) -> Result<Rendered> {
    let dom = GridDomain::from_spec(&cfg.domain)?;
    meta.note_domain("domain", &dom);
    let u = cfg.function.build(&dom, meta.seed)?;
    let mc = MathConstants::new(dom.dim(), cfg.p)?;
    let beta_term = mc.beta_np * lp_norm_pow(&u, cfg.p);
    let alpha_term = mc.alpha_np * grad_seminorm_pow(&u, cfg.p);
    meta.note(
        "info",
        format!("alpha_np={} beta_np={}", fmt(mc.alpha_np), fmt(mc.beta_np)),
    );
    let gagliardo: Vec<fraclab::Result<f64>> = cfg
        .s_list
        .par_iter()
        .map(|&s| Ok(gagliardo_global_pow(&u, &FracParams::new(s, cfg.p)?)))
        .collect();
    let mut out = meta.csv_header();
    out.push_str("s,s_seminorm_p,one_minus_s_seminorm_p,beta_lp_term,alpha_grad_term\n");
    for (&s, gag) in cfg.s_list.iter().zip(gagliardo) {
        let gag = gag.with_context(|| format!("s = {s}"))?;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(s),
            fmt(s * gag),
            fmt((1.0 - s) * gag),
            fmt(beta_term),
            fmt(alpha_term),
        ));
    }
    Ok(Rendered::table(out, true))
}
