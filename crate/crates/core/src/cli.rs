//! Command-line front end.
//!
//! ```text
//! paramcmp DATA.csv --dep Y --indep X1 X2 --m1 ols --m2 rreg
//! paramcmp engel1857.csv --dep foodexp --indep income \
//!     --m1 sqreg --m1-opts "q(.25) r(100)" --m2 sqreg --m2-opts "q(.75) r(100)" --seed 1
//! ```

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::biastest::{run_biastest, BiasTestReport, JointForm, ModelSummary};
use crate::data::{load_csv, RowFilter};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, EstimatorSpec};
use crate::numerics::{normal_sf2, student_t_sf2};

/// Environment variable naming a directory searched first for relative data paths.
pub const FIXTURES_ENV: &str = "PARAMCMP_FIXTURES";

#[derive(Parser, Debug)]
#[command(
    name = "paramcmp",
    version,
    about = "Fit two regression models to the same data and test whether their coefficients are equal"
)]
struct Args {
    /// CSV file with a header row.
    data: PathBuf,
    /// Dependent variable.
    #[arg(long)]
    dep: String,
    /// Independent variables.
    #[arg(long, num_args = 1.., required = true)]
    indep: Vec<String>,
    /// Row filter, e.g. "pcths > 60 & poverty <= 20".
    #[arg(long = "if", value_name = "EXPR")]
    if_expr: Option<String>,
    /// 1-based inclusive row range, e.g. "1,25".
    #[arg(long = "in", value_name = "FIRST,LAST")]
    in_range: Option<String>,
    /// First model: ols (reg), rreg, qreg, sqreg or xtreg.
    #[arg(long)]
    m1: String,
    /// Options for the first model, e.g. "q(.25) r(100)" or "fe".
    #[arg(long = "m1-opts", default_value = "", allow_hyphen_values = true)]
    m1_opts: String,
    /// Second model.
    #[arg(long)]
    m2: String,
    /// Options for the second model.
    #[arg(long = "m2-opts", default_value = "", allow_hyphen_values = true)]
    m2_opts: String,
    /// Panel group and time variables, e.g. "company,year".
    #[arg(long, value_name = "GROUP,TIME")]
    panel: Option<String>,
    /// Seed for bootstrap resampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as JSON to PATH ("-" writes JSON to stdout instead of text).
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Covariance used by the joint test: sum (V1 + V2) or difference (V1 - V2).
    #[arg(long = "joint-form", default_value = "sum")]
    joint_form: JointForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    Text,
    Json,
    Both,
}

/// A parsed command line.
#[derive(Debug, Clone, PartialEq)]
pub struct CliInvocation {
    pub data_path: PathBuf,
    pub depvar: String,
    pub indep: Vec<String>,
    pub filter: Option<RowFilter>,
    pub m1: String,
    pub m2: String,
    pub spec1: EstimatorSpec,
    pub spec2: EstimatorSpec,
    pub panel: Option<(String, String)>,
    pub output: OutputMode,
    pub json_path: Option<PathBuf>,
    pub joint_form: JointForm,
    pub seed: u64,
}

/// Parse `argv` (program name first).
pub fn parse_args<I, T>(argv: I) -> Result<CliInvocation>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| Error::Usage(e.to_string()))?;
    invocation(args)
}

fn invocation(args: Args) -> Result<CliInvocation> {
    let spec1 = model_spec(&args.m1, &args.m1_opts, args.seed)?;
    let spec2 = model_spec(&args.m2, &args.m2_opts, args.seed)?;
    let panel = args.panel.as_deref().map(parse_pair).transpose()?;
    if (spec1.kind.is_panel() || spec2.kind.is_panel()) && panel.is_none() {
        return Err(Error::Usage("xtreg needs --panel GROUP,TIME".into()));
    }

    let mut filter = args.if_expr.as_deref().map(RowFilter::parse_if).transpose()?;
    if let Some(range) = args.in_range.as_deref() {
        let (first, last) = RowFilter::parse_in(range)?;
        filter = Some(filter.unwrap_or_default().with_range(first, last));
    }

    let (output, json_path) = match args.json {
        Some(p) if p.as_os_str() == "-" => (OutputMode::Json, None),
        Some(p) => (OutputMode::Both, Some(p)),
        None => (OutputMode::Text, None),
    };
    Ok(CliInvocation {
        data_path: args.data,
        depvar: args.dep,
        indep: args.indep,
        filter,
        m1: args.m1,
        m2: args.m2,
        spec1,
        spec2,
        panel,
        output,
        json_path,
        joint_form: args.joint_form,
        seed: args.seed,
    })
}

fn parse_pair(s: &str) -> Result<(String, String)> {
    match s.split_once(',') {
        Some((g, t)) if !g.trim().is_empty() && !t.trim().is_empty() => Ok((g.trim().into(), t.trim().into())),
        _ => Err(Error::Usage(format!("--panel expects GROUP,TIME, got `{s}`"))),
    }
}

/// Split an option string into `name` / `name(arg)` tokens.
fn option_tokens(opts: &str) -> Result<Vec<(String, Option<String>)>> {
    let mut tokens = Vec::new();
    let mut chars = opts.chars().peekable();
    loop {
        while chars.next_if(|c| c.is_whitespace() || *c == ',').is_some() {}
        if chars.peek().is_none() {
            return Ok(tokens);
        }
        let mut name = String::new();
        while let Some(c) = chars.next_if(|c| c.is_ascii_alphanumeric() || *c == '_') {
            name.push(c.to_ascii_lowercase());
        }
        if name.is_empty() {
            return Err(Error::Usage(format!("malformed model options `{opts}`")));
        }
        let arg = if chars.next_if_eq(&'(').is_some() {
            let mut arg = String::new();
            loop {
                match chars.next() {
                    Some(')') => break,
                    Some(c) => arg.push(c),
                    None => return Err(Error::Usage(format!("unclosed parenthesis in `{opts}`"))),
                }
            }
            Some(arg.trim().to_string())
        } else {
            None
        };
        if chars.peek().is_some_and(|c| !c.is_whitespace() && *c != ',') {
            return Err(Error::Usage(format!("malformed model options `{opts}`")));
        }
        tokens.push((name, arg));
    }
}

fn number<T: std::str::FromStr>(opt: &str, arg: Option<&str>) -> Result<T> {
    arg.and_then(|a| a.parse().ok())
        .ok_or_else(|| Error::Usage(format!("option `{opt}` needs a numeric argument")))
}

/// Translate a model name and its option string into an estimator spec.
pub fn model_spec(name: &str, opts: &str, seed: u64) -> Result<EstimatorSpec> {
    let base = match name.to_ascii_lowercase().as_str() {
        "ols" | "reg" | "regress" => Some(EstimatorKind::Ols),
        "rreg" => Some(EstimatorKind::Rreg),
        "qreg" => Some(EstimatorKind::Qreg),
        "sqreg" | "qreg_bootstrap" => Some(EstimatorKind::QregBootstrap),
        "xtreg" => None,
        other => {
            return Err(Error::Usage(format!(
                "unknown model `{other}` (use ols, reg, rreg, qreg, sqreg or xtreg)"
            )))
        }
    };
    let mut effects = None;
    let mut spec = EstimatorSpec::new(base.unwrap_or(EstimatorKind::Fe)).with_seed(seed);
    let is_quantile = matches!(base, Some(EstimatorKind::Qreg | EstimatorKind::QregBootstrap));
    for (opt, arg) in option_tokens(opts)? {
        let arg = arg.as_deref();
        match opt.as_str() {
            "nolog" => {}
            "q" | "quantile" if is_quantile => {
                let mut q: f64 = number(&opt, arg)?;
                // Stata accepts q(25) to mean the 25th percentile
                if q >= 1.0 && q < 100.0 {
                    q /= 100.0;
                }
                spec.q = q;
            }
            "r" | "reps" if base == Some(EstimatorKind::QregBootstrap) => spec.reps = number(&opt, arg)?,
            "tune" if base == Some(EstimatorKind::Rreg) => spec.biweight_c = number(&opt, arg)?,
            "fe" | "re" if base.is_none() => {
                let kind = if opt == "fe" { EstimatorKind::Fe } else { EstimatorKind::Re };
                if effects.is_some_and(|k| k != kind) {
                    return Err(Error::Usage("xtreg takes either fe or re, not both".into()));
                }
                effects = Some(kind);
            }
            _ => return Err(Error::Usage(format!("option `{opt}` does not apply to {name}"))),
        }
    }
    spec.kind = match base {
        Some(kind) => kind,
        None => effects.ok_or_else(|| Error::Usage("xtreg needs fe or re in its options".into()))?,
    };
    spec.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(spec)
}

fn resolve_data_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(FIXTURES_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

/// Load the data and run the comparison.
pub fn run(inv: &CliInvocation) -> Result<BiasTestReport> {
    let mut ds = load_csv(resolve_data_path(&inv.data_path))?;
    if let Some((g, t)) = &inv.panel {
        ds = ds.set_panel(g, t)?;
    }
    run_biastest(
        &ds,
        &inv.depvar,
        &inv.indep,
        inv.filter.as_ref(),
        &inv.spec1,
        &inv.spec2,
        inv.joint_form,
    )
}

/// Fixed 4-decimal formatting that never shows a negative zero.
pub fn fmt4(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.4}");
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
        _ => s,
    }
}

const RULE: &str = "------------------------------------------------------------------------";

fn label(kind: EstimatorKind) -> &'static str {
    match kind {
        EstimatorKind::Ols => "Linear regression (OLS)",
        EstimatorKind::Rreg => "Robust regression",
        EstimatorKind::Qreg => "Quantile regression",
        EstimatorKind::QregBootstrap => "Quantile regression, bootstrap standard errors",
        EstimatorKind::Fe => "Fixed-effects (within) regression",
        EstimatorKind::Re => "Random-effects GLS regression",
    }
}

/// Diagnostics shown under each model table, in display order.
const SHOWN_DIAGNOSTICS: &[(&str, &str)] = &[
    ("q", "Quantile"),
    ("n_groups", "Number of groups"),
    ("n_dropped", "Dropped (Cook's D > 1)"),
    ("reps", "Bootstrap replications"),
    ("r2", "R-squared"),
    ("adj_r2", "Adj R-squared"),
    ("pseudo_r2", "Pseudo R2"),
    ("r2_within", "R-sq within"),
    ("r2_between", "R-sq between"),
    ("r2_overall", "R-sq overall"),
    ("F", "F statistic"),
    ("p_F", "Prob > F"),
    ("wald_chi2", "Wald chi2"),
    ("p_wald", "Prob > chi2"),
    ("rmse", "Root MSE"),
    ("sigma_u", "sigma_u"),
    ("sigma_e", "sigma_e"),
    ("rho", "rho"),
    ("theta", "theta"),
    ("F_u", "F test that all u_i=0"),
];

fn render_model(out: &mut String, title: &str, m: &ModelSummary) {
    let stat = if m.df_resid.is_some() { "t" } else { "z" };
    let _ = writeln!(out, "{title}: {}", label(m.estimator));
    let _ = writeln!(out, "Number of obs = {}", m.n_obs);
    let _ = writeln!(out, "{RULE}");
    let _ = writeln!(
        out,
        "{:>12} | {:>14} {:>12} {:>10} {:>9}",
        "Variable",
        "Coef.",
        "Std. Err.",
        stat,
        format!("P>|{stat}|")
    );
    let _ = writeln!(out, "{RULE}");
    for (i, name) in m.names.iter().enumerate() {
        let (b, se) = (m.b[i], m.se[i]);
        let z = if se > 0.0 { b / se } else { f64::NAN };
        let p = if z.is_nan() {
            f64::NAN
        } else {
            match m.df_resid {
                Some(df) => student_t_sf2(z, df as f64).unwrap_or(f64::NAN),
                None => normal_sf2(z),
            }
        };
        let _ = writeln!(
            out,
            "{:>12} | {:>14} {:>12} {:>10} {:>9}",
            name,
            fmt4(b),
            fmt4(se),
            if z.is_nan() { ".".into() } else { format!("{z:.2}") },
            if p.is_nan() { ".".into() } else { format!("{p:.3}") },
        );
    }
    let _ = writeln!(out, "{RULE}");
    for (key, text) in SHOWN_DIAGNOSTICS {
        if let Some(v) = m.diagnostics.get(*key) {
            let value = match *key {
                "F" => format!(
                    "F({}, {}) = {}",
                    m.diagnostics.get("F_df1").copied().unwrap_or(f64::NAN),
                    m.diagnostics.get("F_df2").copied().unwrap_or(f64::NAN),
                    fmt4(*v)
                ),
                "F_u" => format!(
                    "F({}, {}) = {}",
                    m.diagnostics.get("F_u_df1").copied().unwrap_or(f64::NAN),
                    m.diagnostics.get("F_u_df2").copied().unwrap_or(f64::NAN),
                    fmt4(*v)
                ),
                "q" | "n_groups" | "n_dropped" | "reps" => format!("{v}"),
                _ => fmt4(*v),
            };
            let _ = writeln!(out, "  {text:<24} {value}");
        }
    }
    if !m.converged {
        let _ = writeln!(out, "  (did not converge)");
    }
    out.push('\n');
}

/// Human-readable report: both model tables, the per-variable table and
/// the joint test, with statistics at 4 decimals.
pub fn render_text(report: &BiasTestReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Dependent variable: {}", report.depvar);
    let _ = writeln!(out, "Independent variables: {}", report.indepvars.join(" "));
    out.push('\n');
    render_model(&mut out, "Model 1", &report.model1);
    render_model(&mut out, "Model 2", &report.model2);

    let _ = writeln!(out, "Variable Bias Test:");
    let _ = writeln!(out, "H0: The parameters are equal");
    let _ = writeln!(out, "{RULE}");
    let _ = writeln!(
        out,
        "{:>12} | {:>10} {:>10} {:>10} {:>10} {:>8}",
        "Variables", "Model 1", "Model 2", "Diff.", "t-stat", "P>|t|"
    );
    let _ = writeln!(out, "{RULE}");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:>12} | {:>10} {:>10} {:>10} {:>10} {:>8}",
            r.name,
            fmt4(r.b1),
            fmt4(r.b2),
            fmt4(r.diff),
            fmt4(r.t_stat),
            fmt4(r.p_value)
        );
    }
    let _ = writeln!(out, "{RULE}");
    out.push('\n');
    let _ = writeln!(out, "Jointly Bias Test:");
    let _ = writeln!(out, "H0: All parameters are equal");
    let _ = writeln!(out, "chi2({}) = {}", report.df_chi2, fmt4(report.chi2));
    let _ = writeln!(out, "Prob > chi2 = {}", fmt4(report.p_chi2));
    if report.joint_form == JointForm::Difference {
        let _ = writeln!(out, "(joint statistic uses V1 - V2)");
    }
    match report.df_t {
        Some(df) => {
            let _ = writeln!(out, "Note: per-variable p-values use the t distribution with {df} df.");
        }
        None => {
            let _ = writeln!(out, "Note: per-variable p-values use the standard normal distribution.");
        }
    }
    for w in &report.warnings {
        let _ = writeln!(out, "Warning: {w}");
    }
    out
}

/// Pretty-printed JSON with a trailing newline.
pub fn render_json(report: &BiasTestReport) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

/// Run the command line, writing to the given streams; returns the exit code.
pub fn main_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = invocation(args).and_then(|inv| {
        let report = run(&inv)?;
        Ok((inv, report))
    });
    let (inv, report) = match result {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let json = render_json(&report);
    match inv.output {
        OutputMode::Json => {
            let _ = stdout.write_all(&json);
        }
        OutputMode::Text | OutputMode::Both => {
            let _ = stdout.write_all(render_text(&report).as_bytes());
        }
    }
    if let Some(path) = &inv.json_path {
        if let Err(source) = std::fs::write(path, &json) {
            let e = Error::Io {
                path: path.clone(),
                source,
            };
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    }
    0
}

/// Entry point used by the binary.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    main_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
