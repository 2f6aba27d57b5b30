use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rigidity::certifier::{certify, verify_certificate, CertifyConfig, CertifyOutcome, RigidityCertificate};
use rigidity::chain_rule::default_constants;
use rigidity::curves::{build_curve, default_bump, sample_curve};
use rigidity::geometry::{
    box_dimension_estimate, cantor_set, covering_number, covering_profile_with_xi1, default_ladder, dyadic_ladder,
    generate_h_dense, h_dense_grid, random_points, GridSpec, PointSet,
};
use rigidity::integral_geometry::{find_line, select_separated_points, LineCertificate, SearchBudget};
use rigidity::remez::{remez_bounds, rigidity_from_remez, RemezDomain};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "rigidity", version, about = "Certified lower bounds on the smooth rigidity of point sets")]
struct Cli {
    /// Write JSON here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Input {
    /// Point-set JSON file; `-` reads standard input.
    #[arg(long, short, default_value = "-")]
    input: String,
}

#[derive(Args, Clone)]
struct Ladder {
    /// Comma-separated ε values; defaults to the dyadic ladder from 1/10.
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<f64>>,
}

impl Ladder {
    fn get(&self) -> Vec<f64> {
        self.ladder.clone().unwrap_or_else(default_ladder)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Domain {
    Ball,
    Cube,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a point set.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Covering number M(ε, Z).
    Cover {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        eps: f64,
    },
    /// Covering profile and ζ_d.
    Zeta {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[command(flatten)]
        ladder: Ladder,
    },
    /// Box-dimension estimate.
    Dim {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        ladder: Ladder,
    },
    /// Search for a line through z0 crossing many occupied cubes.
    Findline {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z0: Vec<f64>,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        target: u128,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cap on swept directions.
        #[arg(long)]
        directions: Option<usize>,
        /// Also select d+1 separated points on the line found.
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// Build the interpolating curve for a line certificate.
    Curve {
        /// LineCertificate JSON, or `findline` output carrying one.
        #[arg(long, short, default_value = "-")]
        input: String,
        /// Emit sampled points and derivative norms as CSV.
        #[arg(long)]
        csv: bool,
        #[arg(long, default_value_t = 201)]
        samples: usize,
    },
    /// Certify a lower bound on the d-rigidity, or replay a certificate.
    Certify {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        z0_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        ladder: Ladder,
        #[arg(long)]
        directions: Option<usize>,
        /// Also try the polynomial norming route.
        #[arg(long)]
        remez: bool,
        /// Replay this certificate against the input set instead.
        #[arg(long)]
        verify: Option<PathBuf>,
    },
    /// Remez constant bounds by linear programming.
    Remez {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        #[arg(long, value_enum, default_value_t = Domain::Ball)]
        domain: Domain,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Chain-rule constants for (n, d).
    Constants { n: usize, d: usize },
}

#[derive(Subcommand)]
enum GenKind {
    /// Regular h-dense grid: spacing h/2, cube of side s centered at the origin.
    Grid {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        h: f64,
        /// Keep the closed-form representation instead of listing points.
        #[arg(long)]
        implicit: bool,
    },
    /// h-dense set, optionally perturbed.
    Hdense {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        h: f64,
        #[arg(long, default_value_t = 0.0)]
        perturbation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        implicit: bool,
    },
    /// Uniform random points in the ball of radius 1/3.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Middle-thirds Cantor set on a segment.
    Cantor {
        #[arg(long, default_value_t = 8)]
        level: u32,
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
}

/// Result of a subcommand: JSON or raw text, with the exit code.
enum Output {
    Json(serde_json::Value, u8),
    Text(String),
}

fn to_json<T: Serialize>(x: &T) -> anyhow::Result<serde_json::Value> {
    // Through a string, since `to_value` cannot hold 128-bit counts.
    let s = serde_json::to_string(x)?;
    Ok(serde_json::from_str(&s)?)
}

fn read_text(path: &str) -> anyhow::Result<String> {
    if path == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading standard input")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {path}"))
    }
}

fn read_points(input: &Input) -> anyhow::Result<PointSet> {
    let text = read_text(&input.input)?;
    let z: PointSet = serde_json::from_str(&text).map_err(|e| anyhow!(MalformedInput(e.to_string())))?;
    Ok(z)
}

#[derive(Debug)]
struct MalformedInput(String);

impl std::fmt::Display for MalformedInput {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        write!(f, "malformed input: {}", self.0)
    }
}

impl std::error::Error for MalformedInput {}

fn budget(directions: Option<usize>) -> SearchBudget {
    SearchBudget { directions, ..SearchBudget::default() }
}

fn generate(kind: GenKind) -> anyhow::Result<PointSet> {
    let z = match kind {
        GenKind::Grid { n, s, h, implicit } => {
            let z = PointSet::grid(h_dense_grid(n, s, h), format!("grid n={n} s={s} h={h}"))?;
            if implicit {
                z
            } else {
                z.to_explicit()?
            }
        }
        GenKind::Hdense { n, s, h, perturbation, seed, implicit } => {
            if implicit {
                if perturbation != 0.0 {
                    bail!(rigidity::Error::InvalidInput("an implicit set cannot be perturbed".into()));
                }
                PointSet::grid(h_dense_grid(n, s, h), format!("h-dense n={n} s={s} h={h}"))?
            } else {
                generate_h_dense(n, s, h, perturbation, seed)?
            }
        }
        GenKind::Random { n, count, seed } => random_points(n, count, seed)?,
        GenKind::Cantor { level, n } => cantor_set(level, n)?,
    };
    Ok(z)
}

fn read_line_certificate(path: &str) -> anyhow::Result<LineCertificate> {
    let text = read_text(path)?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| anyhow!(MalformedInput(e.to_string())))?;
    let inner = match v.get("certificate") {
        Some(c) if !c.is_null() => c.to_string(),
        _ => text,
    };
    serde_json::from_str(&inner).map_err(|e| anyhow!(MalformedInput(e.to_string())))
}

fn run(command: Command) -> anyhow::Result<Output> {
    Ok(match command {
        Command::Gen { kind } => Output::Json(to_json(&generate(kind)?)?, 0),
        Command::Cover { input, eps } => {
            let z = read_points(&input)?;
            let m = covering_number(&z, GridSpec::new(eps)?)?;
            Output::Json(to_json(&json_count(eps, m))?, 0)
        }
        Command::Zeta { input, d, ladder } => {
            let z = read_points(&input)?;
            let xi1 = default_constants(z.n, d)?.xi1;
            Output::Json(to_json(&covering_profile_with_xi1(&z, d, &ladder.get(), xi1)?)?, 0)
        }
        Command::Dim { input, ladder } => {
            let z = read_points(&input)?;
            let eps = ladder.ladder.unwrap_or_else(|| dyadic_ladder(0.1, 8));
            Output::Json(to_json(&box_dimension_estimate(&z, &eps)?)?, 0)
        }
        Command::Findline { input, z0, eps, target, seed, directions, d, kappa } => {
            let z = read_points(&input)?;
            let g = GridSpec::new(eps)?;
            let search = find_line(&z0, &z, g, target, budget(directions), seed)?;
            let certificate = match (d, kappa) {
                (Some(d), Some(k)) => Some(select_separated_points(&search.line, &z, g, d, k)?),
                (None, None) => None,
                _ => bail!(rigidity::Error::InvalidInput("--d and --kappa go together".into())),
            };
            let code = if search.reached { 0 } else { 2 };
            Output::Json(json!({ "search": to_json(&search)?, "certificate": to_json(&certificate)? }), code)
        }
        Command::Curve { input, csv, samples } => {
            let cert = read_line_certificate(&input)?;
            let spec = build_curve(&cert, default_bump())?;
            if csv {
                let mut out = String::from("eta");
                for i in 0..spec.n {
                    out.push_str(&format!(",x{i}"));
                }
                for k in 1..=spec.d + 1 {
                    out.push_str(&format!(",norm_d{k}"));
                }
                out.push('\n');
                for s in sample_curve(&spec, samples) {
                    let row: Vec<String> =
                        std::iter::once(s.eta).chain(s.point).chain(s.norms).map(|x| format!("{x:e}")).collect();
                    out.push_str(&row.join(","));
                    out.push('\n');
                }
                Output::Text(out)
            } else {
                Output::Json(to_json(&spec)?, 0)
            }
        }
        Command::Certify { input, d, z0_samples, seed, ladder, directions, remez, verify } => {
            let z = read_points(&input)?;
            if let Some(path) = verify {
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                let cert: RigidityCertificate = match serde_json::from_str::<CertifyOutcome>(&text) {
                    Ok(CertifyOutcome::Certificate(c)) => c,
                    Ok(CertifyOutcome::NoCertificate(_)) => {
                        bail!(rigidity::Error::InvalidInput("the file holds no certificate".into()))
                    }
                    Err(_) => serde_json::from_str(&text).map_err(|e| anyhow!(MalformedInput(e.to_string())))?,
                };
                let bound = verify_certificate(&cert, &z)?;
                return Ok(Output::Json(json!({ "verified": true, "bound": bound }), 0));
            }
            let config = CertifyConfig {
                ladder: ladder.get(),
                seed,
                search: budget(directions),
                remez,
                ..CertifyConfig::default()
            };
            let out = certify(&z, d, z0_samples, &config)?;
            let code = match out {
                CertifyOutcome::Certificate(_) => 0,
                CertifyOutcome::NoCertificate(_) => 2,
            };
            Output::Json(to_json(&out)?, code)
        }
        Command::Remez { input, d, resolution, domain, rho } => {
            let z = read_points(&input)?;
            let domain = match domain {
                Domain::Ball => RemezDomain::Ball,
                Domain::Cube => RemezDomain::Cube,
            };
            let est = remez_bounds(&z, d, resolution, domain)?;
            let rig = rigidity_from_remez(&est, d, rho);
            Output::Json(json!({ "estimate": to_json(&est)?, "rigidity": to_json(&rig)? }), 0)
        }
        Command::Constants { n, d } => Output::Json(to_json(&default_constants(n, d)?)?, 0),
    })
}

fn json_count(eps: f64, m: u128) -> serde_json::Value {
    #[derive(Serialize)]
    struct Cover {
        epsilon: f64,
        #[serde(with = "rigidity::count")]
        covering_number: u128,
    }
    to_json(&Cover { epsilon: eps, covering_number: m }).expect("plain struct serializes")
}

fn error_json(e: &anyhow::Error) -> serde_json::Value {
    let kind = if let Some(err) = e.downcast_ref::<rigidity::Error>() {
        err.kind()
    } else if e.downcast_ref::<MalformedInput>().is_some() {
        "malformed_input"
    } else if e.downcast_ref::<io::Error>().is_some() {
        "io"
    } else {
        "other"
    };
    json!({ "error": { "kind": kind, "message": format!("{e:#}") } })
}

fn emit(output: &Option<PathBuf>, text: &str) -> io::Result<()> {
    match output {
        Some(path) => fs::write(path, text),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("RIGIDITY_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let (text, code) = match run(cli.command) {
        Ok(Output::Json(v, code)) => (format!("{}\n", serde_json::to_string_pretty(&v).expect("JSON value")), code),
        Ok(Output::Text(t)) => (t, 0),
        Err(e) => {
            eprintln!("error: {e:#}");
            (format!("{}\n", serde_json::to_string_pretty(&error_json(&e)).expect("JSON value")), 1)
        }
    };
    if let Err(e) = emit(&cli.output, &text) {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
