use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use szego::coefficients::coefficients_from_report;
use szego::curvature::curvature_report;
use szego::harness::config::{parse_m_range, parse_weights, CONFIG_HELP};
use szego::harness::{self, fmt_f64, ExperimentConfig, ModelSpec, PointSpec, Table};
use szego::models::MetricPreset;
use szego::{Error, Exec, C64};

#[derive(Parser)]
#[command(name = "szego", version, about = "Szegő kernel expansions on weighted spheres", after_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Curvature report and b0, b1, b2 at the configured points.
    Coeffs(Common),
    /// Table of exact S_m values.
    Kernel(Common),
    /// Exact S_m against the truncated expansion.
    Expansion(Common),
    /// Residual decay near the singular strata.
    Decay(Common),
    /// Invariant suite for the model.
    Checks(Common),
    /// Circle-Fourier localization on the flat model.
    Demo(DemoArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Config file (`key = value`); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// s3 | s5 | s7 | weighted
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    weights: Option<String>,
    /// levi | ambient-round
    #[arg(long)]
    metric: Option<String>,
    /// `a:b`, `a:step:b` or a comma list
    #[arg(long)]
    m: Option<String>,
    /// Truncation order 1..=3
    #[arg(long = "N")]
    truncation: Option<usize>,
    /// stratum | grid | random
    #[arg(long)]
    points: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Single-threaded evaluation.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 1)]
    p: u32,
    /// `a:b`, `a:step:b` or a comma list
    #[arg(long, default_value = "1:40")]
    m: String,
    /// Squared modulus of the base point, one coordinate per entry
    #[arg(long, default_value = "0.5")]
    z2: String,
    #[arg(long, default_value_t = 512)]
    order: usize,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn config_from(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::parse(&std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &c.model {
        cfg.model = ModelSpec::named(m)?;
    }
    if let Some(w) = &c.weights {
        cfg.model.weights = parse_weights(w)?;
        if c.metric.is_none() {
            cfg.model.preset = MetricPreset::Levi;
        }
    }
    if let Some(p) = &c.metric {
        cfg.model.preset = p.parse()?;
    }
    if let Some(m) = &c.m {
        cfg.m_values = parse_m_range(m)?;
    }
    if let Some(n) = c.truncation {
        cfg.truncation = n;
    }
    if let Some(p) = &c.points {
        cfg.points = match p.as_str() {
            "stratum" => PointSpec::Stratum,
            "grid" => PointSpec::Grid { min: 0.05, max: 0.4, count: 8 },
            "random" => PointSpec::Random { samples: 4, seed: 7 },
            other => return Err(Error::Config(format!("unknown point set `{other}`"))),
        };
    }
    if c.delta.is_some() {
        cfg.delta = c.delta;
    }
    if c.csv.is_some() {
        cfg.csv = c.csv.clone();
    }
    if c.svg.is_some() {
        cfg.svg = c.svg.clone();
    }
    if c.sequential {
        cfg.exec = Exec::Sequential;
    }
    cfg.validate().map_err(|e| match e {
        Error::Config(_) | Error::InvalidDelta { .. } => e,
        other => Error::Config(other.to_string()),
    })?;
    Ok(cfg)
}

fn emit(table: &Table, path: &Option<PathBuf>) -> Result<(), Error> {
    match path {
        Some(p) => table.write_file(p),
        None => table.write_to(std::io::stdout().lock()),
    }
}

fn write_svg(path: &Option<PathBuf>, svg: String) -> Result<(), Error> {
    if let Some(p) = path {
        std::fs::write(p, svg)?;
    }
    Ok(())
}

fn coeffs(cfg: &ExperimentConfig) -> Result<bool, Error> {
    let sphere = cfg.sphere()?;
    let mut t = Table::new(&[
        "point", "pivot", "s_l", "s_theta", "lap_s_l", "lap_s_theta", "rdet_sq", "ric_sq", "ric_rdet", "chern_sq",
        "det_rdot", "tw_scalar", "b0", "b1", "b2",
    ]);
    for (i, x) in cfg.resolve_points(&sphere).iter().enumerate() {
        let cp = sphere.brt_chart_at(x)?;
        let rep = curvature_report(&cp.chart, &cp.w)?;
        let c = coefficients_from_report(&rep, cp.chart.label.clone());
        let mut row = vec![i.to_string(), (cp.pivot + 1).to_string()];
        for v in [
            rep.s_l, rep.s_theta, rep.lap_s_l, rep.lap_s_theta, rep.norms.rdet_sq, rep.norms.ric_sq,
            rep.norms.ric_rdet, rep.norms.chern_sq, rep.det_rdot, rep.tw_scalar, c.b0, c.b1, c.b2,
        ] {
            row.push(fmt_f64(v));
        }
        t.push(row);
    }
    emit(&t, &cfg.csv)?;
    Ok(true)
}

fn kernel(cfg: &ExperimentConfig) -> Result<bool, Error> {
    let sphere = cfg.sphere()?;
    let xs = cfg.resolve_points(&sphere);
    let mut t = Table::new(&["m", "point", "dim", "s_m"]);
    for &m in &cfg.m_values {
        let b = sphere.monomial_norms(m)?;
        for (i, x) in xs.iter().enumerate() {
            t.push(vec![m.to_string(), i.to_string(), b.dim().to_string(), fmt_f64(b.szego_value(x))]);
        }
    }
    emit(&t, &cfg.csv)?;
    Ok(true)
}

fn expansion(cfg: &ExperimentConfig) -> Result<bool, Error> {
    let rep = harness::run_expansion(cfg)?;
    emit(&rep.table(), &cfg.csv)?;
    write_svg(&cfg.svg, rep.svg())?;
    for (i, f) in rep.fits.iter().enumerate() {
        if let Some(f) = f {
            let c = &rep.points[i].coefficients;
            eprintln!(
                "point {i}: fitted ({:.9e}, {:.9e}, {:.9e}) computed ({:.9e}, {:.9e}, {:.9e})",
                f[0], f[1], f[2], c.b0, c.b1, c.b2
            );
        }
    }
    eprintln!("envelope C = {:.3e}, eps_hat = {:?}, violations = {}", rep.envelope_c, rep.eps_hat, rep.violations);
    Ok(rep.violations == 0)
}

fn decay(cfg: &ExperimentConfig) -> Result<bool, Error> {
    let rep = harness::decay_scan(cfg)?;
    emit(&rep.table(), &cfg.csv)?;
    write_svg(&cfg.svg, rep.svg())?;
    eprintln!(
        "eps_hat = {:.4} from {} of {} rows, C = {:.3e}, C_N = {:.3e}, envelope ratio {:.3} ({}), exponential-only ratio {:.3}, gradient constants {:.3e} / {:.3e}, d_hat/d in [{:.3}, {:.3}]",
        rep.eps_hat,
        rep.exp_rows,
        rep.rows.len(),
        rep.envelope_c,
        rep.poly_constant,
        rep.envelope_ratio,
        if rep.envelope_holds { "holds" } else { "violated" },
        rep.exp_envelope_ratio,
        rep.gradient_constants.0,
        rep.gradient_constants.1,
        rep.dhat_ratio.0,
        rep.dhat_ratio.1
    );
    Ok(rep.envelope_holds)
}

fn checks(cfg: &ExperimentConfig) -> Result<bool, Error> {
    let results = harness::run_checks(&cfg.model, &cfg.tolerances, cfg.exec)?;
    for c in &results {
        println!("{c}");
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    println!("{} checks, {} failed", results.len(), failed);
    Ok(failed == 0)
}

fn demo(a: &DemoArgs) -> Result<bool, Error> {
    let ms = parse_m_range(&a.m)?;
    let z: Vec<C64> = a
        .z2
        .split(',')
        .map(|s| s.trim().parse::<f64>().map(|v| C64::new(v.max(0.0).sqrt(), 0.0)))
        .collect::<Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad --z2 `{}`", a.z2)))?;
    let mut t = Table::new(&["m", "p", "order", "re_quad", "im_quad", "exact", "aliasing_change"]);
    let mut ok = true;
    for m in ms {
        let r = harness::oscillatory_demo(&z, a.p, m, a.order)?;
        let scale = (2.0 * m as f64 / std::f64::consts::PI).powi(z.len() as i32);
        ok &= if r.i_exact != 0.0 {
            (r.i_quad - C64::new(r.i_exact, 0.0)).norm() <= 1e-10 * r.i_exact.abs().max(1e-3 * scale)
        } else {
            r.i_quad.norm() <= 1e-12 * scale
        };
        t.push(vec![
            m.to_string(),
            a.p.to_string(),
            a.order.to_string(),
            fmt_f64(r.i_quad.re),
            fmt_f64(r.i_quad.im),
            fmt_f64(r.i_exact),
            fmt_f64(r.aliasing_change),
        ]);
    }
    emit(&t, &a.csv)?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.cmd {
        Command::Demo(a) => demo(a),
        Command::Coeffs(c) | Command::Kernel(c) | Command::Expansion(c) | Command::Decay(c) | Command::Checks(c) => {
            match config_from(c) {
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
                Ok(cfg) => match &cli.cmd {
                    Command::Coeffs(_) => coeffs(&cfg),
                    Command::Kernel(_) => kernel(&cfg),
                    Command::Expansion(_) => expansion(&cfg),
                    Command::Decay(_) => decay(&cfg),
                    _ => checks(&cfg),
                },
            }
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ (Error::Config(_) | Error::InvalidDelta { .. } | Error::Parse(_) | Error::EmptyStratum)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
