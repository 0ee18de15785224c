//! Command-line front end. Every report carries the tool version, the
//! command and the resolved parameters. Exit codes: 0 when every asserted
//! inequality holds, 2 when a hypothesis or inequality fails, 1 on I/O or
//! validation errors.

use crate::czmax::{cz_decomposition, dyadic_maximal, generalized_cz_decomposition, sharp_maximal};
use crate::dyadic::{DyadicCube, GridFunction};
use crate::error::{invalid, Error, Result};
use crate::generate::{generate, GenKind, GenParams};
use crate::goodlambda::{
    check_hypotheses, gr_epsilon, gr_exponent_classical, gr_exponent_oscillation, gr_self_improve,
    verify_levelset_inequality, verify_norm_inequalities, Decomposition, ProviderTable, HYPOTHESIS_SLACK,
};
use crate::metric::{
    doubling_constants, jn_dp_identity, jn_ptr_norm, lambda0, verify_fpw_metric, verify_good_lambda_metric,
    verify_weak_gr_metric, vitali_cz_cover, weak_gr_epsilon, weak_gr_exponent, Ball, BallBasis, BallFunctional,
    ConstantPolicy, MetricProvider, MetricSpace, SearchOptions, DEFAULT_D_GRID,
};
use crate::oscillations::{mean_oscillation_family, polynomial_oscillation_family, OscillationFamily};
use crate::report::{to_csv, to_value};
use crate::scalar::{rational_string, Rational, Scalar};
use crate::selfimprove::{
    bmo_dyadic_norm, dp_norm, dp_sup_norm, jn_dp_exact, jn_norm, jn_sup_norm, verify_fpw, verify_weak_embedding,
    CubeFunctional,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Parser, Debug)]
#[command(
    name = "oscillab",
    version,
    about = "Good-lambda, John-Nirenberg and Gurov-Reshetnyak checks on dyadic grids and finite metric spaces"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Serialize)]
pub struct Common {
    /// Input file: a grid function, provider table or metric space (JSON).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Use exact rational arithmetic where the command supports it.
    #[arg(long, global = true)]
    pub exact_rational: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Mean,
    Polynomial,
}

#[derive(Args, Debug, Serialize)]
pub struct FamilyArgs {
    /// Oscillation family: mean (A_Q f = f_Q) or polynomial projections.
    #[arg(long, value_enum, default_value_t = FamilyName::Mean)]
    pub family: FamilyName,
    /// Polynomial degree for the polynomial family.
    #[arg(long, default_value_t = 0)]
    pub degree: u32,
}

#[derive(Args, Debug, Serialize)]
pub struct CubeArg {
    /// Cube as LEVEL:c1,c2,... (default: the whole grid).
    #[arg(long)]
    pub cube: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct BallArgs {
    /// Center site index of B0.
    #[arg(long, default_value_t = 0)]
    pub center: usize,
    /// Radius of B0 (default: twice the diameter).
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxKind {
    Dyadic,
    Sharp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderName {
    Jn,
    Gr,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricProviderName {
    Jn,
    Gr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKindArg {
    RandomUniform,
    Spike,
    GrWeight,
    BmoLog,
    RandomPlanarSpace,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Dyadic or sharp maximal function.
    Maximal {
        #[arg(long, value_enum, default_value_t = MaxKind::Dyadic)]
        kind: MaxKind,
        #[command(flatten)]
        #[serde(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        #[serde(flatten)]
        cube: CubeArg,
    },
    /// Calderón–Zygmund stopping cubes at threshold λ.
    Cz {
        #[arg(long)]
        lambda: f64,
        /// Stop on oscillation instead of average.
        #[arg(long)]
        generalized: bool,
        #[command(flatten)]
        #[serde(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        #[serde(flatten)]
        cube: CubeArg,
    },
    /// John–Nirenberg norm with its weak-type embedding check.
    JnNorm {
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[command(flatten)]
        #[serde(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        #[serde(flatten)]
        cube: CubeArg,
    },
    /// D_p norm of a cube functional, with the self-improvement check.
    DpNorm {
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Functional as JSON, or @path to a JSON file.
        #[arg(long, default_value = r#"{"kind":"tight"}"#)]
        functional: String,
        #[command(flatten)]
        #[serde(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        #[serde(flatten)]
        cube: CubeArg,
    },
    /// Dyadic BMO norm.
    Bmo {
        #[command(flatten)]
        #[serde(flatten)]
        cube: CubeArg,
    },
    /// Level-set and norm inequalities for a decomposition.
    GoodLambda {
        #[arg(long, value_enum, default_value_t = ProviderName::Jn)]
        provider: ProviderName,
        /// K values; default 1.1Θ, 2Θ, 4Θ.
        #[arg(long = "K", value_delimiter = ',')]
        k: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.9])]
        gamma: Vec<f64>,
        /// Absolute λ values; default F_{Q0} times --lambda-mult.
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0, 8.0])]
        lambda_mult: Vec<f64>,
        /// ε for the gr provider (default: the smallest admissible).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Also check the norm inequalities at this p.
        #[arg(long)]
        p: Option<f64>,
        #[command(flatten)]
        #[serde(flatten)]
        family: FamilyArgs,
    },
    /// Gurov–Reshetnyak ε, p(ε) and higher integrability.
    Gr {
        /// Exponent to test (default: midpoint of [1, p(ε))).
        #[arg(long)]
        p: Option<f64>,
        #[command(flatten)]
        #[serde(flatten)]
        family: FamilyArgs,
    },
    /// Doubling profile (c_μ, D) of a metric measure space.
    MetricDoubling {
        #[arg(long, value_delimiter = ',')]
        d_grid: Vec<f64>,
    },
    /// Disjoint ball cover of a level set of the ball maximal function.
    MetricVitali {
        /// Site values of F (JSON array or {"values": [...]}).
        #[arg(long)]
        values: PathBuf,
        #[command(flatten)]
        #[serde(flatten)]
        ball: BallArgs,
        /// Absolute λ (default: --lambda-mult times λ0 F_{B̂0}).
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        lambda_mult: f64,
        #[arg(long, value_delimiter = ',')]
        d_grid: Vec<f64>,
    },
    /// Level-set and norm inequalities on a ball basis.
    MetricGoodLambda {
        #[arg(long)]
        values: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricProviderName::Jn)]
        provider: MetricProviderName,
        #[command(flatten)]
        #[serde(flatten)]
        ball: BallArgs,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        /// K values as multiples of max{Θ, c_μ 3^D}.
        #[arg(long, value_delimiter = ',', default_values_t = [1.1, 2.0, 4.0])]
        k_mult: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.9])]
        gamma: Vec<f64>,
        /// λ values as multiples of λ0 F_{B̂0}.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0])]
        lambda_mult: Vec<f64>,
        #[arg(long)]
        p: Option<f64>,
        /// Use this C_μ instead of the derived c_μ² 45^D.
        #[arg(long)]
        calibrated: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        d_grid: Vec<f64>,
    },
    /// ρ-oscillation John–Nirenberg norm on a ball, optionally with a D_p check.
    MetricJn {
        #[arg(long)]
        values: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[command(flatten)]
        #[serde(flatten)]
        ball: BallArgs,
        /// Ball functional JSON (or @path) for the D_p chain.
        #[arg(long)]
        functional: Option<String>,
        /// Compare with ‖a0‖_{D_p} a0(B) for the exact oscillation functional.
        #[arg(long)]
        identity: bool,
        #[arg(long, default_value_t = 2_000_000)]
        node_budget: u64,
    },
    /// Weak Gurov–Reshetnyak ε and higher integrability on balls.
    MetricGr {
        #[arg(long)]
        values: PathBuf,
        #[command(flatten)]
        #[serde(flatten)]
        ball: BallArgs,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        calibrated: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        d_grid: Vec<f64>,
    },
    /// Synthetic inputs.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKindArg,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 4)]
        depth: u32,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, default_value_t = 0.0)]
        low: f64,
        #[arg(long, default_value_t = 1.0)]
        high: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Maximal { .. } => "maximal",
            Command::Cz { .. } => "cz",
            Command::JnNorm { .. } => "jn-norm",
            Command::DpNorm { .. } => "dp-norm",
            Command::Bmo { .. } => "bmo",
            Command::GoodLambda { .. } => "good-lambda",
            Command::Gr { .. } => "gr",
            Command::MetricDoubling { .. } => "metric-doubling",
            Command::MetricVitali { .. } => "metric-vitali",
            Command::MetricGoodLambda { .. } => "metric-good-lambda",
            Command::MetricJn { .. } => "metric-jn",
            Command::MetricGr { .. } => "metric-gr",
            Command::Gen { .. } => "gen",
        }
    }
}

/// A finished report and whether every asserted inequality held.
pub struct Outcome {
    pub report: Value,
    pub pass: bool,
}

fn read(path: &Option<PathBuf>) -> Result<String> {
    let p = path.as_ref().ok_or_else(|| invalid("--input is required"))?;
    Ok(std::fs::read_to_string(p)?)
}

fn load_grid(common: &Common) -> Result<GridFunction> {
    GridFunction::from_json_str(&read(&common.input)?)
}

fn load_space(common: &Common) -> Result<MetricSpace> {
    MetricSpace::from_json_str(&read(&common.input)?)
}

fn load_values(path: &PathBuf) -> Result<Vec<f64>> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let arr = match &v {
        Value::Array(_) => &v,
        Value::Object(m) => m
            .get("values")
            .ok_or_else(|| invalid("values file needs a \"values\" array"))?,
        _ => return Err(invalid("values file must be an array or an object with \"values\"")),
    };
    Ok(serde_json::from_value(arr.clone())?)
}

fn inline_or_file(s: &str) -> Result<String> {
    match s.strip_prefix('@') {
        Some(path) => Ok(std::fs::read_to_string(path)?),
        None => Ok(s.to_string()),
    }
}

fn parse_cube(arg: &CubeArg, f: &GridFunction) -> Result<DyadicCube> {
    let Some(s) = &arg.cube else {
        return Ok(f.root());
    };
    let (level, coords) = s
        .split_once(':')
        .ok_or_else(|| invalid(format!("cube {s:?} is not LEVEL:c1,c2,...")))?;
    let level: u32 = level
        .trim()
        .parse()
        .map_err(|_| invalid(format!("bad cube level in {s:?}")))?;
    let coords = coords
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<u64>()
                .map_err(|_| invalid(format!("bad cube coordinate in {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let cube = DyadicCube::new(level, coords)?;
    f.tree().locate(&cube)?;
    Ok(cube)
}

fn family(args: &FamilyArgs, f: &GridFunction) -> Result<Arc<dyn OscillationFamily>> {
    Ok(match args.family {
        FamilyName::Mean => {
            if args.degree != 0 {
                return Err(invalid("--degree applies to the polynomial family"));
            }
            Arc::new(mean_oscillation_family())
        }
        FamilyName::Polynomial => Arc::new(polynomial_oscillation_family(f.dim(), f.depth(), args.degree)?),
    })
}

fn no_exact(common: &Common, cmd: &str) -> Result<()> {
    if common.exact_rational {
        return Err(invalid(format!("{cmd} has no rational mode")));
    }
    Ok(())
}

fn d_grid(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        DEFAULT_D_GRID.to_vec()
    } else {
        v.to_vec()
    }
}

fn outer_ball(space: &MetricSpace, args: &BallArgs) -> Result<Ball> {
    let radius = args.radius.unwrap_or_else(|| {
        let d = space.max_distance();
        if d > 0.0 {
            2.0 * d
        } else {
            1.0
        }
    });
    let b = Ball::new(args.center, radius);
    space.check_ball(&b)?;
    Ok(b)
}

fn merge(mut base: Map<String, Value>, extra: Value) -> Map<String, Value> {
    if let Value::Object(m) = extra {
        base.extend(m);
    }
    base
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let common = &cli.common;
    let (body, pass) = match &cli.command {
        Command::Maximal {
            kind,
            family: fam,
            cube,
        } => {
            no_exact(common, "maximal")?;
            let f = load_grid(common)?;
            let q = parse_cube(cube, &f)?;
            let m = match kind {
                MaxKind::Dyadic => dyadic_maximal(&f, &q)?,
                MaxKind::Sharp => sharp_maximal(&f, &q, family(fam, &f)?.as_ref())?,
            };
            let max = m.values().iter().copied().fold(0.0, f64::max);
            (json!({"maximal": to_value(m.values()), "max": to_value(&max)}), true)
        }
        Command::Cz {
            lambda,
            generalized,
            family: fam,
            cube,
        } => {
            no_exact(common, "cz")?;
            let f = load_grid(common)?;
            let q = parse_cube(cube, &f)?;
            let fam = if *generalized {
                generalized_cz_decomposition(&f, *lambda, &q, family(fam, &f)?.as_ref())?
            } else {
                cz_decomposition(&f, *lambda, &q)?
            };
            (json!({"stopping": to_value(&fam)}), true)
        }
        Command::JnNorm { p, family: fam, cube } => {
            let f = load_grid(common)?;
            let q = parse_cube(cube, &f)?;
            let osc = family(fam, &f)?;
            let value = jn_norm(&f, *p, &q, osc.as_ref())?;
            let sup = jn_sup_norm(&f, *p, &q, osc.as_ref())?;
            let emb = verify_weak_embedding(&f, *p, &q, osc.as_ref())?;
            let mut out = json!({
                "jn_norm": to_value(&value),
                "jn_sup": to_value(&sup),
                "embedding": to_value(&emb),
            });
            if common.exact_rational {
                let exact = exact_jn_pow(&f, *p, &q, fam)?;
                out["jn_norm_pow_exact"] = Value::from(exact);
            }
            (out, emb.pass && emb.chain_pass)
        }
        Command::DpNorm {
            p,
            functional,
            family: fam,
            cube,
        } => {
            no_exact(common, "dp-norm")?;
            let f = load_grid(common)?;
            let q = parse_cube(cube, &f)?;
            let osc = family(fam, &f)?;
            let func: CubeFunctional = serde_json::from_str(&inline_or_file(functional)?)?;
            let a = func.evaluate(&f, osc.as_ref())?;
            let value = dp_norm(&a, *p, &q)?;
            let sup = dp_sup_norm(&a, *p)?;
            let fpw = verify_fpw(&f, &a, *p, osc.as_ref())?;
            let pass = fpw.pass && fpw.hypothesis_pass;
            (
                json!({"dp_norm": to_value(&value), "dp_sup": to_value(&sup), "fpw": to_value(&fpw)}),
                pass,
            )
        }
        Command::Bmo { cube } => {
            no_exact(common, "bmo")?;
            let f = load_grid(common)?;
            let q = parse_cube(cube, &f)?;
            (json!({"bmo": to_value(&bmo_dyadic_norm(&f, &q)?)}), true)
        }
        Command::GoodLambda {
            provider,
            k,
            gamma,
            lambda,
            lambda_mult,
            epsilon,
            p,
            family: fam,
        } => good_lambda(common, *provider, k, gamma, lambda, lambda_mult, *epsilon, *p, fam)?,
        Command::Gr { p, family: fam } => {
            no_exact(common, "gr")?;
            let w = load_grid(common)?;
            let osc = match fam.family {
                FamilyName::Mean => None,
                FamilyName::Polynomial => Some(family(fam, &w)?),
            };
            let eps = gr_epsilon(&w, osc.as_deref())?.epsilon;
            let p_eps = match &osc {
                None => gr_exponent_classical(w.dim(), eps),
                Some(o) => gr_exponent_oscillation(w.dim(), o.constant(), eps),
            };
            let p = p.unwrap_or(if p_eps.is_finite() { (1.0 + p_eps) / 2.0 } else { 2.0 });
            let r = gr_self_improve(&w, osc.as_deref(), p)?;
            let pass = r.applicable && r.pass;
            let mut out = to_value(&r);
            out["epsilon"] = to_value(&r.epsilon);
            (out, pass)
        }
        Command::MetricDoubling { d_grid: grid } => {
            no_exact(common, "metric-doubling")?;
            let s = load_space(common)?;
            let sw = doubling_constants(&s, &d_grid(grid))?;
            (json!({"doubling": to_value(&sw)}), true)
        }
        Command::MetricVitali {
            values,
            ball,
            lambda,
            lambda_mult,
            d_grid: grid,
        } => {
            no_exact(common, "metric-vitali")?;
            let s = load_space(common)?;
            let f = load_values(values)?;
            s.check_values(&f, "F")?;
            let b0 = outer_ball(&s, ball)?;
            let basis = BallBasis::new(&s, b0, ball.eta)?;
            let profile = doubling_constants(&s, &d_grid(grid))?.profile;
            let lam = match lambda {
                Some(l) => *l,
                None => {
                    let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
                    lambda_mult * lambda0(ball.tau, ball.eta, &profile) * s.ball_average(&abs, &basis.hat)
                }
            };
            let r = vitali_cz_cover(&s, &basis, &f, lam, ball.tau, &profile)?;
            let pass = r.pass;
            (json!({"profile": to_value(&profile), "cover": to_value(&r)}), pass)
        }
        Command::MetricGoodLambda {
            values,
            provider,
            ball,
            rho,
            epsilon,
            k_mult,
            gamma,
            lambda_mult,
            p,
            calibrated,
            d_grid: grid,
        } => {
            no_exact(common, "metric-good-lambda")?;
            let s = load_space(common)?;
            let v = load_values(values)?;
            let b0 = outer_ball(&s, ball)?;
            let basis = BallBasis::new(&s, b0, ball.eta)?;
            let profile = doubling_constants(&s, &d_grid(grid))?.profile;
            let prov = match provider {
                MetricProviderName::Jn => MetricProvider::jn_rho(&s, &basis, &v, *rho, ball.tau, &profile)?,
                MetricProviderName::Gr => {
                    let eps = match epsilon {
                        Some(e) => *e,
                        None => weak_gr_epsilon(&s, &v, ball.tau, &b0, ball.eta)?.epsilon,
                    };
                    MetricProvider::weak_gr(&s, &basis, &v, eps, ball.tau, &profile)?
                }
            };
            let policy = policy(*calibrated);
            let k_min = prov.theta.max(profile.c_mu * 3f64.powf(profile.dim));
            let ks: Vec<f64> = k_mult.iter().map(|m| m * k_min).collect();
            let hat = s.ball_average(&prov.f, &basis.hat);
            let l0 = lambda0(ball.tau, ball.eta, &profile);
            let lambdas: Vec<f64> = lambda_mult.iter().map(|m| m * l0 * hat).collect();
            let r = verify_good_lambda_metric(&s, &basis, &prov, &profile, policy, &ks, gamma, &lambdas, *p)?;
            let pass = r.pass && r.hypotheses.pass;
            let mut out = to_value(&r);
            out["points"] = to_value(&r.points);
            (out, pass)
        }
        Command::MetricJn {
            values,
            p,
            rho,
            ball,
            functional,
            identity,
            node_budget,
        } => {
            no_exact(common, "metric-jn")?;
            let s = load_space(common)?;
            let f = load_values(values)?;
            let b0 = outer_ball(&s, ball)?;
            let opts = SearchOptions {
                node_budget: *node_budget,
                ..SearchOptions::default()
            };
            let jn = jn_ptr_norm(&s, &f, *p, *rho, ball.tau, &b0, &opts)?;
            let mut out = json!({"jn_norm": to_value(&jn.value), "search": to_value(&jn)});
            let mut pass = true;
            if *identity {
                let id = jn_dp_identity(&s, &f, *p, *rho, ball.tau, &b0, &opts)?;
                pass &= !id.exact || id.relative_gap <= 1e-9;
                out["identity"] = to_value(&id);
            }
            if let Some(func) = functional {
                let a: BallFunctional = serde_json::from_str(&inline_or_file(func)?)?;
                let r = verify_fpw_metric(&s, &f, &a, *p, *rho, ball.tau, &b0, ball.eta, &opts)?;
                pass &= r.hypothesis_pass && r.chain_pass;
                out["fpw"] = to_value(&r);
            }
            (out, pass)
        }
        Command::MetricGr {
            values,
            ball,
            p,
            calibrated,
            d_grid: grid,
        } => {
            no_exact(common, "metric-gr")?;
            let s = load_space(common)?;
            let w = load_values(values)?;
            let b0 = outer_ball(&s, ball)?;
            let profile = doubling_constants(&s, &d_grid(grid))?.profile;
            let policy = policy(*calibrated);
            let eps = weak_gr_epsilon(&s, &w, ball.tau, &b0, ball.eta)?.epsilon;
            let p_eps = weak_gr_exponent(eps, ball.tau, &profile, policy.value(&profile));
            let p = p.unwrap_or(if p_eps.is_finite() { (1.0 + p_eps) / 2.0 } else { 2.0 });
            let r = verify_weak_gr_metric(&s, &w, ball.tau, &b0, ball.eta, p, &profile, policy)?;
            let pass = r.applicable && r.pass;
            (to_value(&r), pass)
        }
        Command::Gen {
            kind,
            dim,
            depth,
            epsilon,
            points,
            low,
            high,
        } => {
            no_exact(common, "gen")?;
            let kind = match kind {
                GenKindArg::RandomUniform => GenKind::RandomUniform,
                GenKindArg::Spike => GenKind::Spike,
                GenKindArg::GrWeight => GenKind::GrWeight,
                GenKindArg::BmoLog => GenKind::BmoLog,
                GenKindArg::RandomPlanarSpace => GenKind::RandomPlanarSpace,
            };
            let params = GenParams {
                dim: *dim,
                depth: *depth,
                epsilon: *epsilon,
                points: *points,
                low: *low,
                high: *high,
            };
            return Ok(Outcome {
                report: generate(kind, &params, common.seed)?.to_json(),
                pass: true,
            });
        }
    };
    let mut head = Map::new();
    head.insert("tool".into(), Value::from("oscillab"));
    head.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
    head.insert("command".into(), Value::from(cli.command.name()));
    let mut params = merge(Map::new(), to_value(common));
    params = merge(params, command_params(&cli.command));
    head.insert("params".into(), Value::Object(params));
    let mut report = merge(head, body);
    report.insert("pass".into(), Value::from(pass));
    Ok(Outcome {
        report: Value::Object(report),
        pass,
    })
}

fn command_params(cmd: &Command) -> Value {
    // externally tagged: {"name": {...}}
    match to_value(cmd) {
        Value::Object(m) => m.into_iter().next().map(|(_, v)| v).unwrap_or(Value::Null),
        other => other,
    }
}

fn policy(calibrated: Option<f64>) -> ConstantPolicy {
    match calibrated {
        Some(value) => ConstantPolicy::Calibrated { value },
        None => ConstantPolicy::Derived,
    }
}

fn exact_jn_pow(f: &GridFunction, p: f64, q: &DyadicCube, fam: &FamilyArgs) -> Result<String> {
    if fam.family != FamilyName::Mean {
        return Err(invalid("rational mode supports the mean family only"));
    }
    if !(p >= 1.0 && p.fract() == 0.0 && p <= 64.0) {
        return Err(invalid(format!("rational mode needs an integer p, got {p}")));
    }
    let g = f.restrict(q)?;
    let vals: Vec<Rational> = g.values().iter().map(|&v| Rational::from_f64(v)).collect();
    let table = crate::oscillations::mean_oscillation_table(g.tree(), &vals);
    let dp = jn_dp_exact(&table, p as u32);
    Ok(rational_string(dp.best(0, 0)))
}

#[allow(clippy::too_many_arguments)]
fn good_lambda(
    common: &Common,
    provider: ProviderName,
    k: &[f64],
    gamma: &[f64],
    lambda: &[f64],
    lambda_mult: &[f64],
    epsilon: Option<f64>,
    p: Option<f64>,
    fam: &FamilyArgs,
) -> Result<(Value, bool)> {
    let text = read(&common.input)?;
    let mut eps = 0.0;
    let d: Decomposition<f64> = match provider {
        ProviderName::Table => {
            let t: ProviderTable = serde_json::from_str(&text)?;
            Decomposition::from_table(t)?
        }
        ProviderName::Jn | ProviderName::Gr => {
            let f = GridFunction::from_json_str(&text)?;
            let osc = family(fam, &f)?;
            eps = match (provider, epsilon) {
                (ProviderName::Gr, Some(e)) => e,
                (ProviderName::Gr, None) => {
                    let o = (fam.family == FamilyName::Polynomial).then_some(osc.as_ref());
                    gr_epsilon(&f, o)?.epsilon
                }
                _ => 0.0,
            };
            match (provider, fam.family) {
                (ProviderName::Jn, FamilyName::Mean) => Decomposition::jn(f.tree(), f.values())?,
                (ProviderName::Gr, FamilyName::Mean) => Decomposition::gr(f.tree(), f.values(), eps)?,
                (ProviderName::Jn, _) => Decomposition::jn_oscillation(&f, osc)?,
                _ => Decomposition::gr_oscillation(&f, osc, eps)?,
            }
        }
    };
    let theta = *d.theta();
    let ks: Vec<f64> = if k.is_empty() {
        [1.1, 2.0, 4.0].iter().map(|m| m * theta).collect()
    } else {
        k.to_vec()
    };
    let favg = d.f_average();
    let lambdas: Vec<f64> = if lambda.is_empty() {
        lambda_mult.iter().map(|m| m * favg).collect()
    } else {
        lambda.to_vec()
    };
    let (hyp, level) = if common.exact_rational {
        let f = GridFunction::from_json_str(&text)?;
        if provider == ProviderName::Table || fam.family != FamilyName::Mean {
            return Err(invalid(
                "rational mode supports the jn and gr providers with the mean family",
            ));
        }
        let vals: Vec<Rational> = f.values().iter().map(|&v| Rational::from_f64(v)).collect();
        let q = |v: &[f64]| v.iter().map(|&x| Rational::from_f64(x)).collect::<Vec<_>>();
        let dq = match provider {
            ProviderName::Jn => Decomposition::jn(f.tree(), &vals)?,
            _ => Decomposition::gr(f.tree(), &vals, Rational::from_f64(eps))?,
        };
        (
            check_hypotheses(&dq, 0.0)?,
            verify_levelset_inequality(&dq, &q(&ks), &q(gamma), &q(&lambdas)),
        )
    } else {
        (
            check_hypotheses(&d, HYPOTHESIS_SLACK)?,
            verify_levelset_inequality(&d, &ks, gamma, &lambdas),
        )
    };
    let mut out = json!({
        "provider": d.name(),
        "theta": to_value(&theta),
        "delta": to_value(d.delta()),
        "hypotheses": to_value(&hyp),
        "levelset": to_value(&level),
        "points": to_value(&level.points),
    });
    let mut pass = hyp.pass && level.pass;
    if let Some(p) = p {
        let norms = verify_norm_inequalities(&d, p)?;
        pass &= norms.pass;
        out["norms"] = to_value(&norms);
    }
    Ok((out, pass))
}

/// Parses `args` (without the program name) and runs the command, returning
/// the report instead of writing it. `--output` and `--format` are ignored.
pub fn execute_args<I, T>(args: I) -> Result<Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("oscillab")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| invalid(e.to_string().trim_end().to_string()))?;
    execute(&cli)
}

/// Parses arguments, runs, writes the report and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli).and_then(|o| write_outcome(&cli, &o).map(|_| o)) {
        Ok(o) => {
            if o.pass {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn write_outcome(cli: &Cli, o: &Outcome) -> Result<()> {
    let text = match (cli.common.format, &cli.command) {
        (Format::Csv, Command::Gen { .. }) | (Format::Json, _) => {
            let mut s = serde_json::to_string_pretty(&o.report)?;
            s.push('\n');
            s
        }
        (Format::Csv, _) => to_csv(&o.report),
    };
    match &cli.common.output {
        Some(path) => std::fs::write(path, text).map_err(Error::from),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(Error::from)
        }
    }
}
