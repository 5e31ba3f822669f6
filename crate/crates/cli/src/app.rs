//! Argument parsing and the command handlers behind the `sbjo` binary.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use sbjo_core::algebra::{haar_unitary_with, random_element_with, rng_from_seed, CVec};
use sbjo_core::orthogonality::{decide, find_violation, OrthoVerdict, Witness};
use sbjo_core::orthograph::{engineered_sample, export_dot, export_json, BuildOptions, GraphMode, OrthoGraph};
use sbjo_core::preservers::{
    property_p_check, recover_sandwich, verify, wild, LinearMap, PreserverSpec, TauPolicy, VerifyVerdict,
};
use sbjo_core::structure::classify;
use sbjo_core::{sampling, BlockStructure, Element, Tolerance};

use crate::suite::{self, Group, SuiteConfig};

pub const EXIT_YES: i32 = 0;
pub const EXIT_NO: i32 = 1;
pub const EXIT_DISAGREE: i32 = 2;
pub const EXIT_FRAGILE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "sbjo", version, about = "Strong Birkhoff–James orthogonality on block-diagonal matrix algebras")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Relative singular-value cutoff for rank and kernels.
    #[arg(long, global = true)]
    pub tol_rank: Option<f64>,
    /// Relative tolerance for norm equalities.
    #[arg(long, global = true)]
    pub tol_norm: Option<f64>,
    /// Subspace inclusion tolerance.
    #[arg(long, global = true)]
    pub tol_frame: Option<f64>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
}

impl Global {
    fn tolerance(&self) -> Tolerance {
        let d = Tolerance::default();
        Tolerance {
            eps_rank: self.tol_rank.unwrap_or(d.eps_rank),
            eps_norm: self.tol_norm.unwrap_or(d.eps_norm),
            eps_frame: self.tol_frame.unwrap_or(d.eps_frame),
        }
    }

    fn checked_tolerance(&self) -> Result<Tolerance, Failure> {
        let tol = self.tolerance();
        tol.validate().map_err(usage)?;
        Ok(tol)
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide x ⊥ˢ y with every decider and print witnesses.
    Check {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// Random candidates for the sampled refutation search.
        #[arg(long, default_value_t = 200)]
        budget: usize,
        /// Write the violating z here when x is not orthogonal to y.
        #[arg(long)]
        z_out: Option<PathBuf>,
    },
    /// Structural summary of one element.
    Classify {
        #[arg(long)]
        x: PathBuf,
    },
    /// Build a sampled ortho-graph and export it as DOT.
    Graph {
        #[arg(long)]
        structure: Option<String>,
        /// Number of engineered samples (ignored with --elements).
        #[arg(long, default_value_t = 24)]
        sample: usize,
        /// Build from these Element files instead of sampling.
        #[arg(long, num_args = 1..)]
        elements: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Mutual)]
        mode: ModeArg,
        /// Add mutual-edge partners of non-right-symmetric vertices.
        #[arg(long)]
        inject: bool,
        /// DOT output path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON export path.
        #[arg(long = "json-out")]
        json_out: Option<PathBuf>,
    },
    /// Candidate preservers.
    #[command(subcommand)]
    Preserver(PreserverCommand),
    /// Write seeded random elements.
    Rand {
        #[arg(long)]
        structure: String,
        #[arg(long, value_enum, default_value_t = KindArg::Random)]
        kind: KindArg,
        /// Target rank for --kind rank.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Output file; with --count > 1, files are named <stem>-<i>.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance criteria.
    Suite {
        /// Comma-separated groups: oracle, symmetry, inclusion, rank, preserver, graph.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<String>,
        /// Machine-readable summary path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum PreserverCommand {
    /// Sample pairs and compare orthogonality before and after the map.
    Verify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        structure: String,
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        /// Also check property 𝒫 on this many samples.
        #[arg(long)]
        property_p: Option<usize>,
        /// Directory for counterexample Element files.
        #[arg(long)]
        cex_dir: Option<PathBuf>,
    },
    /// Recover a unitary sandwich from a linear map.
    Recover {
        #[arg(long)]
        map: PathBuf,
        /// Write the recovered spec here.
        #[arg(long)]
        spec_out: Option<PathBuf>,
    },
    /// Apply the wild map for --seed to one element.
    Wild {
        #[arg(long)]
        x: PathBuf,
        #[arg(long, default_value_t = TauPolicy::default().delta)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Mutual,
    Directed,
    Reduced,
}

impl From<ModeArg> for GraphMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Mutual => GraphMode::Mutual,
            ModeArg::Directed => GraphMode::Directed,
            ModeArg::Reduced => GraphMode::Reduced,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    /// Complex Gaussian entries.
    Random,
    /// Haar unitary.
    Unitary,
    /// Rank one, in a random block.
    Rank1,
    /// Rank given by --rank.
    Rank,
    /// Orthogonal projection.
    Projection,
    /// Scaled Haar unitary.
    Coisometry,
    /// Not right symmetric.
    Singular,
}

/// An exit code plus the message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: e.to_string(),
    }
}

/// Output of one command: stdout text and the exit code.
pub struct Output {
    pub stdout: String,
    pub code: i32,
}

/// Parses `args` and runs the command. Parse errors and `--help` are
/// reported through clap's own message.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_YES };
            let text = e.render().to_string();
            if e.use_stderr() {
                eprint!("{text}");
                return Output { stdout: String::new(), code };
            }
            return Output { stdout: text, code };
        }
    };
    match dispatch(&cli) {
        Ok(o) => o,
        Err(f) => {
            eprintln!("sbjo: {}", f.message);
            Output {
                stdout: String::new(),
                code: f.code,
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Output, Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Check { x, y, budget, z_out } => cmd_check(g, x, y, *budget, z_out.as_deref()),
        Command::Classify { x } => cmd_classify(g, x),
        Command::Graph {
            structure,
            sample,
            elements,
            mode,
            inject,
            out,
            json_out,
        } => cmd_graph(g, structure.as_deref(), *sample, elements, (*mode).into(), *inject, out.as_deref(), json_out.as_deref()),
        Command::Preserver(PreserverCommand::Verify {
            spec,
            structure,
            budget,
            property_p,
            cex_dir,
        }) => cmd_verify(g, spec, structure, *budget, *property_p, cex_dir.as_deref()),
        Command::Preserver(PreserverCommand::Recover { map, spec_out }) => cmd_recover(g, map, spec_out.as_deref()),
        Command::Preserver(PreserverCommand::Wild { x, delta, out }) => cmd_wild(g, x, *delta, out.as_deref()),
        Command::Rand {
            structure,
            kind,
            rank,
            count,
            out,
        } => cmd_rand(g, structure, *kind, *rank, *count, out.as_deref()),
        Command::Suite { criteria, out } => cmd_suite(g, criteria, out.as_deref()),
    }
}

fn read_element(path: &Path) -> Result<Element, Failure> {
    Element::read_file(path).map_err(usage)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parse_structure(text: &str) -> Result<BlockStructure, Failure> {
    BlockStructure::parse(text).map_err(usage)
}

fn pretty(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn vector_json(v: &CVec) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re + 0.0, z.im + 0.0])).collect())
}

fn element_json(e: &Element) -> Value {
    serde_json::from_str(&e.to_json()).expect("element JSON")
}

fn verdict_json(v: &OrthoVerdict) -> Value {
    json!({
        "orthogonal": v.value,
        "margin": if v.margin.is_finite() { json!(v.margin) } else { Value::Null },
        "fragile": v.fragile,
    })
}

fn cmd_check(g: &Global, x: &Path, y: &Path, budget: usize, z_out: Option<&Path>) -> Result<Output, Failure> {
    let tol = g.checked_tolerance()?;
    let (x, y) = (read_element(x)?, read_element(y)?);
    let d = decide(&x, &y, &tol).map_err(usage)?;
    let mut rng = rng_from_seed(g.seed);
    let sampled_z = find_violation(&x, &y, &tol, budget, &mut rng).map_err(usage)?;
    let sampled = sampled_z.is_none();

    let values = [d.frames.value, d.formula.value, d.distance.value, sampled];
    let all_true = values.iter().all(|&v| v);
    let all_false = values.iter().all(|&v| !v);
    let (verdict, code) = if d.fragile() {
        ("fragile", EXIT_FRAGILE)
    } else if all_true {
        ("orthogonal", EXIT_YES)
    } else if all_false {
        ("not_orthogonal", EXIT_NO)
    } else {
        ("disagreement", EXIT_DISAGREE)
    };

    let witness = match (&d.frames.witness, &d.distance.witness) {
        (Some(Witness::Vector { zeta, xi, block }), _) if d.value() => {
            json!({"kind": "vector", "block": block, "zeta": vector_json(zeta), "xi": vector_json(xi)})
        }
        (_, Some(Witness::Violation(z))) => {
            if let Some(path) = z_out {
                z.write_file(path).map_err(usage)?;
            }
            json!({"kind": "violation", "z": element_json(z), "norm_x": x.norm(),
                   "norm_x_plus_yz": x.add(&y.mul(z).map_err(usage)?).map_err(usage)?.norm()})
        }
        _ => Value::Null,
    };
    let report = json!({
        "verdict": verdict,
        "methods": {
            "frames": verdict_json(&d.frames),
            "norm_formula": verdict_json(&d.formula),
            "distance": verdict_json(&d.distance),
            "sampled": {"orthogonal": sampled, "budget": budget},
        },
        "witness": witness,
    });
    let stdout = if g.json {
        pretty(&report)
    } else {
        let mut s = String::new();
        for (name, v) in [("frames", &d.frames), ("norm_formula", &d.formula), ("distance", &d.distance)] {
            s.push_str(&format!(
                "{name:<13} {:<15} margin {:+.3e}{}\n",
                if v.value { "orthogonal" } else { "not orthogonal" },
                v.margin,
                if v.fragile { " (fragile)" } else { "" }
            ));
        }
        s.push_str(&format!(
            "{:<13} {}\n",
            "sampled",
            if sampled { "no violation found" } else { "violation found" }
        ));
        match &witness["kind"] {
            Value::String(k) if k == "vector" => {
                s.push_str(&format!("witness zeta (block {}) = {}\n", witness["block"], witness["zeta"]))
            }
            Value::String(k) if k == "violation" => s.push_str(&format!(
                "violating z = {}\n‖x + yz‖ = {:.6e} < ‖x‖ = {:.6e}\n",
                witness["z"],
                witness["norm_x_plus_yz"].as_f64().unwrap_or(f64::NAN),
                witness["norm_x"].as_f64().unwrap_or(f64::NAN)
            )),
            _ => {}
        }
        s.push_str(&format!("verdict: {verdict}\n"));
        s
    };
    Ok(Output { stdout, code })
}

fn cmd_classify(g: &Global, x: &Path) -> Result<Output, Failure> {
    let tol = g.checked_tolerance()?;
    let x = read_element(x)?;
    let c = classify(&x, &tol).map_err(usage)?;
    let stdout = if g.json {
        pretty(&c)
    } else {
        let v = serde_json::to_value(&c).expect("serializable");
        let mut s = String::new();
        for (k, val) in v.as_object().expect("struct") {
            s.push_str(&format!("{k:<22} {val}\n"));
        }
        s
    };
    Ok(Output { stdout, code: EXIT_YES })
}

#[allow(clippy::too_many_arguments)]
fn cmd_graph(
    g: &Global,
    structure: Option<&str>,
    sample: usize,
    elements: &[PathBuf],
    mode: GraphMode,
    inject: bool,
    out: Option<&Path>,
    json_out: Option<&Path>,
) -> Result<Output, Failure> {
    let tol = g.checked_tolerance()?;
    let xs: Vec<Element> = if elements.is_empty() {
        let s = parse_structure(structure.ok_or_else(|| usage("--structure or --elements is required"))?)?;
        engineered_sample(&s, sample, g.seed)
    } else {
        elements.iter().map(|p| read_element(p)).collect::<Result<_, _>>()?
    };
    let opts = BuildOptions {
        inject_witnesses: inject,
        seed: elements.is_empty().then_some(g.seed),
    };
    let graph = OrthoGraph::build_with(&xs, mode, &tol, opts).map_err(usage)?;
    let dot = export_dot(&graph);
    if let Some(p) = json_out {
        write_text(p, &(export_json(&graph) + "\n"))?;
    }
    let stdout = match out {
        Some(p) => {
            write_text(p, &dot)?;
            if g.json {
                export_json(&graph) + "\n"
            } else {
                format!(
                    "{} vertices, {} edges ({} mode) written to {}\n",
                    graph.vertices.len(),
                    graph.edges.len(),
                    mode.name(),
                    p.display()
                )
            }
        }
        None if g.json => export_json(&graph) + "\n",
        None => dot,
    };
    Ok(Output { stdout, code: EXIT_YES })
}

fn cmd_verify(
    g: &Global,
    spec: &Path,
    structure: &str,
    budget: usize,
    property_p: Option<usize>,
    cex_dir: Option<&Path>,
) -> Result<Output, Failure> {
    let tol = g.checked_tolerance()?;
    let s = parse_structure(structure)?;
    let text = fs::read_to_string(spec).map_err(|e| usage(format!("{}: {e}", spec.display())))?;
    let spec: PreserverSpec = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", spec.display())))?;
    spec.validate(&s).map_err(usage)?;
    let report = verify(&spec, &s, g.seed, budget, &tol);
    let p_report = property_p.map(|n| property_p_check(&spec, &s, g.seed, n, &tol));

    let mut written = Vec::new();
    if let Some(dir) = cex_dir {
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        let all = report
            .forward_failures
            .iter()
            .map(|c| ("forward", c))
            .chain(report.backward_failures.iter().map(|c| ("backward", c)));
        for (k, (dir_name, c)) in all.enumerate() {
            for (part, e) in [("x", &c.x), ("y", &c.y), ("image-x", &c.image_x), ("image-y", &c.image_y)] {
                let path = dir.join(format!("cex-{k:03}-{dir_name}-{part}.json"));
                e.write_file(&path).map_err(usage)?;
                written.push(path.display().to_string());
            }
        }
    }

    let p_fail = p_report.as_ref().is_some_and(|p| !p.pass);
    let code = match report.verdict {
        VerifyVerdict::Pass if !p_fail => EXIT_YES,
        VerifyVerdict::Fragile if !p_fail => EXIT_FRAGILE,
        _ => EXIT_NO,
    };
    let stdout = if g.json {
        pretty(&json!({
            "verify": report,
            "property_p": p_report,
            "counterexample_files": written,
        }))
    } else {
        let c = &report.engineered_coverage;
        let mut s = format!(
            "pairs tested        {}\nforward failures    {}\nbackward failures   {}\nfragile             {}\ndecider splits      {}\nerrors              {}\n",
            report.pairs_tested,
            report.forward_failures.len(),
            report.backward_failures.len(),
            report.fragile_disagreements,
            report.decider_disagreements,
            report.errors.len()
        );
        s.push_str(&format!(
            "coverage            random {} rank-one {} projection {} planted {}/{} restriction {} backward {} table {}\n",
            c.random, c.rank_one, c.projection, c.planted_orthogonal, c.planted_non_orthogonal, c.restriction, c.backward, c.table
        ));
        if let Some(p) = &p_report {
            s.push_str(&format!(
                "property P          {} samples, {} violations, {} errors\n",
                p.samples,
                p.violations.len(),
                p.errors.len()
            ));
        }
        if let Some(e) = report.errors.first() {
            s.push_str(&format!("first error         {e}\n"));
        }
        if !written.is_empty() {
            s.push_str(&format!("counterexample files {}\n", written.len()));
        }
        s.push_str(&format!(
            "verdict: {}\n",
            match code {
                EXIT_YES => "pass",
                EXIT_FRAGILE => "fragile",
                _ => "fail",
            }
        ));
        s
    };
    Ok(Output { stdout, code })
}

fn cmd_recover(g: &Global, map: &Path, spec_out: Option<&Path>) -> Result<Output, Failure> {
    let tol = g.checked_tolerance()?;
    let map = LinearMap::read_file(map).map_err(usage)?;
    match recover_sandwich(&map, &tol, g.seed) {
        Ok(rec) => {
            if let Some(p) = spec_out {
                write_text(p, &pretty(&rec.to_spec()))?;
            }
            let stdout = if g.json {
                pretty(&rec)
            } else {
                format!(
                    "alpha      {:+.12e} {:+.12e}i\nkappa      {:.12e} (spread {:.2e})\npermutation {:?}\nresidual   {:.3e}\n",
                    rec.alpha.re, rec.alpha.im, rec.kappa, rec.kappa_spread, rec.pi, rec.residual
                )
            };
            Ok(Output { stdout, code: EXIT_YES })
        }
        Err(e) => {
            let stdout = if g.json {
                pretty(&json!({"refuted": e.to_string()}))
            } else {
                format!("not a sandwich map: {e}\n")
            };
            Ok(Output { stdout, code: EXIT_NO })
        }
    }
}

fn cmd_wild(g: &Global, x: &Path, delta: f64, out: Option<&Path>) -> Result<Output, Failure> {
    let tol = g.checked_tolerance()?;
    let x = read_element(x)?;
    let policy = TauPolicy { delta };
    policy.validate().map_err(usage)?;
    let image = wild(&x, g.seed, &policy, &tol).map_err(usage)?;
    emit_element(&image, out)
}

fn emit_element(e: &Element, out: Option<&Path>) -> Result<Output, Failure> {
    match out {
        Some(p) => {
            e.write_file(p).map_err(usage)?;
            Ok(Output {
                stdout: String::new(),
                code: EXIT_YES,
            })
        }
        None => Ok(Output {
            stdout: e.to_json() + "\n",
            code: EXIT_YES,
        }),
    }
}

fn cmd_rand(
    g: &Global,
    structure: &str,
    kind: KindArg,
    rank: Option<usize>,
    count: usize,
    out: Option<&Path>,
) -> Result<Output, Failure> {
    let s = parse_structure(structure)?;
    if matches!(kind, KindArg::Rank) && rank.is_none() {
        return Err(usage("--kind rank needs --rank"));
    }
    let mut rng = rng_from_seed(g.seed);
    let mut elements = Vec::with_capacity(count);
    for _ in 0..count {
        let e = match kind {
            KindArg::Random => sampling::gaussian(&s, &mut rng),
            KindArg::Unitary => haar_unitary_with(&s, &mut rng),
            KindArg::Rank1 => sampling::rank_one(&s, &mut rng),
            KindArg::Rank => random_element_with(&s, rank, &mut rng).map_err(usage)?,
            KindArg::Projection => sampling::projection(&s, &mut rng),
            KindArg::Coisometry => sampling::coisometry(&s, &mut rng),
            KindArg::Singular => sampling::singular(&s, &mut rng),
        };
        elements.push(e);
    }
    match (out, count) {
        (Some(p), 1) => emit_element(&elements[0], Some(p)),
        (Some(p), _) => {
            let stem = p.with_extension("");
            for (i, e) in elements.iter().enumerate() {
                e.write_file(format!("{}-{i}.json", stem.display())).map_err(usage)?;
            }
            Ok(Output {
                stdout: String::new(),
                code: EXIT_YES,
            })
        }
        (None, _) => Ok(Output {
            stdout: elements.iter().map(|e| e.to_json() + "\n").collect(),
            code: EXIT_YES,
        }),
    }
}

fn cmd_suite(g: &Global, criteria: &[String], out: Option<&Path>) -> Result<Output, Failure> {
    let groups = if criteria.is_empty() {
        None
    } else {
        Some(
            criteria
                .iter()
                .map(|c| c.trim().parse::<Group>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(usage)?,
        )
    };
    let config = SuiteConfig {
        seed: g.seed,
        tol: g.tolerance(),
        groups,
    };
    let report = suite::run(&config);
    if let Some(p) = out {
        write_text(p, &pretty(&report))?;
    }
    let stdout = if g.json { pretty(&report) } else { format!("{report}\n") };
    Ok(Output {
        stdout,
        code: if report.pass { EXIT_YES } else { EXIT_NO },
    })
}
