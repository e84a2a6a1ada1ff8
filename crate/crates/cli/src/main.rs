//! Single-binary command-line front end. Every payload carries
//! `"schema": 1` and a reproducibility manifest (config snapshot, library
//! version, wall clock, input hashes). Exit codes: 0 completed, 2 input
//! error, 3 numerical failure; errors are JSON on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use projcone_core::cones::{
    self, arch_member, base_cone, Certificate, ConeOracle, MatElem, MaxOracle, OracleConfig,
    Verdict, WitnessData,
};
use projcone_core::correlations::{
    self, classify, deterministic_boxes, Box as CorrBox, ClassifyConfig, HierarchyConfig,
};
use projcone_core::feasibility::Tolerances;
use projcone_core::linalg::CMat;
use projcone_core::relspace::{build_space, RelationSet};
use projcone_core::sicpovm::{
    build_mub_presentation, build_sic_presentation_with, commuting_witness, gram_cp_check,
    sic_gram_spectrum, verify_sic, CpCheckOutcome, SicNormalization,
};

#[derive(Parser)]
#[command(name = "projcone", version, about = "Universal projection-relation spaces, cone oracles, correlation boxes, SIC/MUB checks")]
struct Cli {
    /// JSON file with tolerance/grid overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized procedure.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Universal space operations.
    Space {
        #[command(subcommand)]
        cmd: SpaceCmd,
    },
    /// Cone membership checks.
    Cone {
        #[command(subcommand)]
        cmd: ConeCmd,
    },
    /// Correlation box operations.
    Box {
        #[command(subcommand)]
        cmd: BoxCmd,
    },
    /// Hierarchy convergence runs.
    Hierarchy {
        #[command(subcommand)]
        cmd: HierarchyCmd,
    },
    /// SIC-POVM presentations and checks.
    Sic {
        #[command(subcommand)]
        cmd: SicCmd,
    },
    /// MUB presentations and checks.
    Mub {
        #[command(subcommand)]
        cmd: MubCmd,
    },
}

#[derive(Subcommand)]
enum SpaceCmd {
    /// Build the quotient space from a relation file and report its basis.
    Build { file: PathBuf },
}

#[derive(Subcommand)]
enum ConeCmd {
    /// Decide membership of an element under a cone construction.
    Check(ConeCheckArgs),
}

#[derive(Args)]
struct ConeCheckArgs {
    /// Relation file defining the space.
    #[arg(long)]
    space: PathBuf,
    /// Element file ({"coords": [...]} or {"level": n, "coeffs": [[[..]]]}).
    #[arg(long)]
    element: PathBuf,
    /// base | max | proj:<k>:<T>
    #[arg(long, default_value = "base")]
    construction: String,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
}

#[derive(Subcommand)]
enum BoxCmd {
    /// Classify a correlation box file.
    Classify {
        file: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long = "T", default_value_t = 4)]
        t_levels: usize,
        #[arg(long, default_value_t = 1e-7)]
        eps: f64,
    },
    /// Emit the canonical box gallery as JSON (optionally one file per box).
    Gallery {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Mixing weight for the isotropic box.
        #[arg(long, default_value_t = 0.5)]
        v: f64,
    },
}

#[derive(Subcommand)]
enum HierarchyCmd {
    /// Run the hierarchy on seeded random local boxes and emit per-level
    /// verdict counts as CSV.
    Run {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long = "T", default_value_t = 8)]
        t_levels: usize,
        #[arg(long, default_value_t = 10)]
        boxes: usize,
        #[arg(long, default_value_t = 1e-7)]
        eps: f64,
        /// CSV output path (stdout JSON always contains the same rows).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SicCmd {
    /// Gram spectrum and complete-positivity check for dimension d.
    Check {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        level: usize,
        #[arg(long = "T", default_value_t = 0)]
        t_levels: usize,
        #[arg(long, default_value_t = 40)]
        samples: usize,
        /// Relation normalization: "de" (sum p_i = d e) or "e".
        #[arg(long, default_value = "de")]
        normalization: String,
    },
    /// Verify an external SIC candidate (JSON list of complex matrices).
    Verify {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Commuting block witness for dimension d.
    Witness {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        extra_partitions: usize,
    },
}

#[derive(Subcommand)]
enum MubCmd {
    /// Presentation dimension and Gram CP check for d+1 bases.
    Check {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        level: usize,
        #[arg(long, default_value_t = 30)]
        samples: usize,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default)]
struct Config {
    accept_tol: f64,
    psd_tol: f64,
    rank_tol: f64,
    t_max: f64,
    t_steps: usize,
    bisect_steps: usize,
}

impl Default for Config {
    fn default() -> Self {
        let t = Tolerances::default();
        let o = OracleConfig::default();
        Config {
            accept_tol: t.accept_tol,
            psd_tol: t.psd_tol,
            rank_tol: t.rank_tol,
            t_max: o.t_max,
            t_steps: o.t_steps,
            bisect_steps: o.bisect_steps,
        }
    }
}

impl Config {
    fn tols(&self) -> Tolerances {
        Tolerances {
            accept_tol: self.accept_tol,
            psd_tol: self.psd_tol,
            rank_tol: self.rank_tol,
        }
    }

    fn oracle(&self) -> OracleConfig {
        OracleConfig {
            t_max: self.t_max,
            t_steps: self.t_steps,
            bisect_steps: self.bisect_steps,
            tols: self.tols(),
        }
    }

    fn snapshot(&self) -> Value {
        json!({
            "accept_tol": self.accept_tol,
            "psd_tol": self.psd_tol,
            "rank_tol": self.rank_tol,
            "t_max": self.t_max,
            "t_steps": self.t_steps,
            "bisect_steps": self.bisect_steps,
        })
    }
}

enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    fn emit(&self) -> ExitCode {
        let (kind, msg, code) = match self {
            CliError::Input(m) => ("input", m, 2),
            CliError::Numerical(m) => ("numerical", m, 3),
        };
        eprintln!("{}", json!({"schema": 1, "error": msg, "kind": kind}));
        ExitCode::from(code)
    }
}

fn input_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

struct Manifest {
    command: String,
    seed: u64,
    config: Value,
    hashes: Vec<(String, String)>,
    start: Instant,
}

impl Manifest {
    fn new(seed: u64, config: &Config) -> Manifest {
        Manifest {
            command: std::env::args().collect::<Vec<_>>().join(" "),
            seed,
            config: config.snapshot(),
            hashes: Vec::new(),
            start: Instant::now(),
        }
    }

    fn hash_input(&mut self, path: &Path, bytes: &[u8]) {
        let mut h = Sha256::new();
        h.update(bytes);
        self.hashes.push((path.display().to_string(), format!("{:x}", h.finalize())));
    }

    fn finish(&self) -> Value {
        json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "config": self.config,
            "input_hashes": self.hashes.iter()
                .map(|(p, h)| json!({"path": p, "sha256": h}))
                .collect::<Vec<_>>(),
            "wall_ms": self.start.elapsed().as_millis() as u64,
        })
    }
}

fn read_file(path: &Path, manifest: &mut Manifest) -> Result<Vec<u8>, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    manifest.hash_input(path, &bytes);
    Ok(bytes)
}

fn certificate_json(c: &Certificate) -> Value {
    match c {
        Certificate::Linear(cc) => json!({"type": "linear", "certificate": cc.to_json()}),
        Certificate::PsdBlock(cc) => json!({"type": "psd_block", "certificate": cc.to_json()}),
        Certificate::Eigen { min_eig } => json!({"type": "eigen", "min_eig": min_eig}),
        Certificate::Projectivized { t, inner } => {
            json!({"type": "projectivized", "t": t, "inner": certificate_json(inner)})
        }
    }
}

fn witness_json(w: &WitnessData) -> Value {
    match w {
        WitnessData::Functional(f) => {
            json!({"type": "functional", "functional": f.functional, "violation": f.violation})
        }
        WitnessData::EigVector(v) => json!({
            "type": "eigvector",
            "vector": v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        }),
        WitnessData::Projectivized { inner } => {
            json!({"type": "projectivized", "inner": witness_json(inner)})
        }
    }
}

fn verdict_json(v: &Verdict, reverified: Option<bool>) -> Value {
    let mut out = match v {
        Verdict::Accept(c) => json!({"verdict": "accept", "certificate": certificate_json(c)}),
        Verdict::Reject(w) => json!({"verdict": "reject", "witness": witness_json(w)}),
        Verdict::Unknown => json!({"verdict": "unknown"}),
    };
    if let Some(r) = reverified {
        out["reverified"] = json!(r);
    }
    out
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ElementFile {
    Scalar { coords: Vec<f64> },
    Matrix { level: usize, coeffs: Vec<Vec<Vec<f64>>> },
}

fn parse_element(bytes: &[u8], dim: usize) -> Result<MatElem, CliError> {
    let parsed: ElementFile = serde_json::from_slice(bytes).map_err(input_err)?;
    match parsed {
        ElementFile::Scalar { coords } => {
            if coords.len() != dim {
                return Err(CliError::Input(format!(
                    "element has {} coordinates, space dimension is {dim}",
                    coords.len()
                )));
            }
            Ok(MatElem::from_element(&projcone_core::relspace::Element {
                coords: coords.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            }))
        }
        ElementFile::Matrix { level, coeffs } => {
            if coeffs.len() != dim {
                return Err(CliError::Input(format!(
                    "element has {} coefficient matrices, space dimension is {dim}",
                    coeffs.len()
                )));
            }
            let mut ms = Vec::with_capacity(dim);
            for c in &coeffs {
                if c.len() != level || c.iter().any(|row| row.len() != level) {
                    return Err(CliError::Input("coefficient matrix shape mismatch".into()));
                }
                ms.push(CMat::from_fn(level, level, |i, j| Complex64::new(c[i][j], 0.0)));
            }
            Ok(MatElem { level, coeffs: ms })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        None => Config::default(),
        Some(path) => match fs::read(path).map_err(input_err).and_then(|b| {
            serde_json::from_slice::<Config>(&b).map_err(input_err)
        }) {
            Ok(c) => c,
            Err(e) => return e.emit(),
        },
    };
    let mut manifest = Manifest::new(cli.seed, &config);
    match run(cli.command, &config, cli.seed, &mut manifest) {
        Ok(mut payload) => {
            payload["schema"] = json!(1);
            payload["manifest"] = manifest.finish();
            println!("{}", serde_json::to_string_pretty(&payload).unwrap());
            ExitCode::SUCCESS
        }
        Err(e) => e.emit(),
    }
}

fn run(
    command: Command,
    config: &Config,
    seed: u64,
    manifest: &mut Manifest,
) -> Result<Value, CliError> {
    match command {
        Command::Space { cmd: SpaceCmd::Build { file } } => {
            let bytes = read_file(&file, manifest)?;
            let rels: RelationSet = serde_json::from_slice(&bytes).map_err(input_err)?;
            let space = build_space(&rels, config.rank_tol)
                .map_err(|e| CliError::Input(e.to_string()))?;
            Ok(json!({
                "dim": space.dim,
                "num_generators": space.num_generators,
                "basis_selector": space.basis_selector,
                "degenerate_generators": space.degenerate_generators,
            }))
        }
        Command::Cone { cmd: ConeCmd::Check(args) } => cone_check(args, config, manifest),
        Command::Box { cmd } => run_box(cmd, config, seed, manifest),
        Command::Hierarchy { cmd } => run_hierarchy(cmd, config, seed),
        Command::Sic { cmd } => run_sic(cmd, config, seed, manifest),
        Command::Mub { cmd } => run_mub(cmd, config, seed),
    }
}

fn cone_check(
    args: ConeCheckArgs,
    config: &Config,
    manifest: &mut Manifest,
) -> Result<Value, CliError> {
    let bytes = read_file(&args.space, manifest)?;
    let rels: RelationSet = serde_json::from_slice(&bytes).map_err(input_err)?;
    let space = build_space(&rels, config.rank_tol).map_err(input_err)?;
    let elem_bytes = read_file(&args.element, manifest)?;
    let x = parse_element(&elem_bytes, space.dim)?;
    let cone = base_cone(&space).map_err(input_err)?;
    let ocfg = config.oracle();

    let (verdict, level, reverified) = match args.construction.as_str() {
        "base" => {
            if x.level != 1 {
                return Err(CliError::Input("base construction expects a level-1 element".into()));
            }
            let v = arch_member(&cone, &x.as_element(), args.eps);
            // arch certificates re-verify through the max oracle at level 1.
            let oracle = MaxOracle::new(cone.clone(), ocfg);
            let r = oracle.verify(&x, args.eps, &v);
            (v, 0usize, r)
        }
        "max" => {
            let oracle = MaxOracle::new(cone.clone(), ocfg);
            let v = oracle.decide(&x, args.eps);
            let r = oracle.verify(&x, args.eps, &v);
            (v, 0, r)
        }
        other => {
            let parts: Vec<&str> = other.split(':').collect();
            if parts.len() != 3 || parts[0] != "proj" {
                return Err(CliError::Input(format!(
                    "unknown construction '{other}' (expected base | max | proj:<k>:<T>)"
                )));
            }
            let _k: usize = parts[1].parse().map_err(input_err)?;
            let t_levels: usize = parts[2].parse().map_err(input_err)?;
            let c0: Arc<dyn ConeOracle> = Arc::new(MaxOracle::new(cone.clone(), ocfg));
            let order: Vec<usize> = (1..=space.num_generators).collect();
            let iterates = cones::iterate_proj(&space, &cone, c0, &order, t_levels, ocfg)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            let (level, v) = cones::limit_member(&iterates, &x, args.eps);
            let r = match level {
                Some(l) => iterates[l].verify(&x, args.eps, &v),
                None => true,
            };
            (v, level.unwrap_or(0), r)
        }
    };
    Ok(json!({
        "construction": args.construction,
        "eps": args.eps,
        "level": level,
        "result": verdict_json(&verdict, Some(reverified)),
    }))
}

fn run_box(
    cmd: BoxCmd,
    config: &Config,
    seed: u64,
    manifest: &mut Manifest,
) -> Result<Value, CliError> {
    match cmd {
        BoxCmd::Classify { file, k, t_levels, eps } => {
            let bytes = read_file(&file, manifest)?;
            let b: CorrBox = serde_json::from_slice(&bytes).map_err(input_err)?;
            b.validate_shape().map_err(input_err)?;
            let base_hierarchy = HierarchyConfig::default();
            let cfg = ClassifyConfig {
                k,
                t_levels,
                eps,
                tol: config.accept_tol.min(1e-9),
                hierarchy: HierarchyConfig {
                    seed,
                    oracle: OracleConfig { tols: config.tols(), ..base_hierarchy.oracle },
                    ..base_hierarchy
                },
                ..Default::default()
            };
            let report = classify(&b, &cfg).map_err(|e| CliError::Numerical(e.to_string()))?;
            Ok(json!({
                "ns": report.nonsignalling,
                "local": report.local,
                "report": serde_json::to_value(&report).map_err(input_err)?,
            }))
        }
        BoxCmd::Gallery { out, v } => {
            let mut boxes = serde_json::Map::new();
            boxes.insert("uniform".into(), serde_json::to_value(CorrBox::uniform(2, 2)).unwrap());
            boxes.insert("pr".into(), serde_json::to_value(CorrBox::pr()).unwrap());
            boxes.insert("tsirelson".into(), serde_json::to_value(CorrBox::tsirelson()).unwrap());
            boxes.insert("isotropic".into(), serde_json::to_value(CorrBox::isotropic(v)).unwrap());
            for (i, b) in deterministic_boxes(2, 2, 1_000_000)
                .map_err(input_err)?
                .iter()
                .enumerate()
            {
                boxes.insert(format!("deterministic_{i:02}"), serde_json::to_value(b).unwrap());
            }
            if let Some(dir) = &out {
                fs::create_dir_all(dir).map_err(input_err)?;
                for (name, value) in &boxes {
                    fs::write(dir.join(format!("{name}.json")), value.to_string())
                        .map_err(input_err)?;
                }
            }
            Ok(json!({"isotropic_v": v, "boxes": boxes}))
        }
    }
}

fn run_hierarchy(cmd: HierarchyCmd, config: &Config, seed: u64) -> Result<Value, CliError> {
    let HierarchyCmd::Run { n, m, k, t_levels, boxes, eps, csv } = cmd;
    use rand::SeedableRng;
    let s = correlations::build_ns_space(n, m).map_err(|e| CliError::Numerical(e.to_string()))?;
    let hcfg = HierarchyConfig { seed, oracle: config.oracle(), ..Default::default() };
    let hierarchy = correlations::certified_hierarchy(&s, k, t_levels, &hcfg)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(usize, usize, usize, usize)> =
        (0..=t_levels).map(|l| (l, 0usize, 0usize, 0usize)).collect();
    let mut fails = 0usize;
    for _ in 0..boxes {
        let b = correlations::random_local_box(n, m, &mut rng);
        let f = correlations::box_functional(&s, &b, 1e-7)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        for (level, set) in hierarchy.levels.iter().enumerate() {
            for x in set {
                // phi evaluated on the diagonal compressions of x.
                for c in 0..k {
                    let y = if k == 1 {
                        x.clone()
                    } else {
                        let mut alpha = CMat::zeros(k, 1);
                        alpha[(c, 0)] = Complex64::new(1.0, 0.0);
                        x.compress(&alpha)
                    };
                    let value = f.eval(&y.as_element()) / y.max_abs().max(1.0);
                    if value >= -eps {
                        rows[level].1 += 1;
                    } else if value < -10.0 * eps {
                        rows[level].2 += 1;
                        fails += 1;
                    } else {
                        rows[level].3 += 1;
                    }
                }
            }
        }
    }
    let csv_text = emit_convergence(&rows);
    if let Some(path) = &csv {
        fs::write(path, &csv_text).map_err(input_err)?;
    }
    Ok(json!({
        "n": n, "m": m, "k": k, "T": t_levels, "boxes": boxes, "eps": eps,
        "fails": fails,
        "csv": csv_text,
        "rows": rows.iter().map(|(l, a, r, u)| json!({
            "level": l, "accepted_count": a, "rejected_count": r, "unknown_count": u,
        })).collect::<Vec<_>>(),
    }))
}

/// CSV rows (level, accepted_count, rejected_count, unknown_count).
fn emit_convergence(rows: &[(usize, usize, usize, usize)]) -> String {
    let mut out = String::from("level,accepted_count,rejected_count,unknown_count\n");
    for (l, a, r, u) in rows {
        out.push_str(&format!("{l},{a},{r},{u}\n"));
    }
    out
}

fn run_sic(
    cmd: SicCmd,
    config: &Config,
    seed: u64,
    manifest: &mut Manifest,
) -> Result<Value, CliError> {
    match cmd {
        SicCmd::Check { d, level, t_levels, samples, normalization } => {
            if d < 2 {
                return Err(CliError::Input("d must be at least 2".into()));
            }
            let norm = match normalization.as_str() {
                "de" => SicNormalization::DTimesUnit,
                "e" => SicNormalization::Unit,
                other => {
                    return Err(CliError::Input(format!(
                        "unknown normalization '{other}' (expected de | e)"
                    )))
                }
            };
            let pres = build_sic_presentation_with(d, norm)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            let cone = base_cone(&pres.space).map_err(|e| CliError::Numerical(e.to_string()))?;
            let ocfg = config.oracle();
            let c0: Arc<dyn ConeOracle> = Arc::new(MaxOracle::new(cone.clone(), ocfg));
            let oracle: Arc<dyn ConeOracle> = if t_levels == 0 {
                c0
            } else {
                let order: Vec<usize> = (1..=pres.space.num_generators).collect();
                cones::iterate_proj(&pres.space, &cone, c0, &order, t_levels, ocfg)
                    .map_err(|e| CliError::Numerical(e.to_string()))?
                    .pop()
                    .unwrap()
            };
            let out = gram_cp_check(
                &pres.space,
                &pres.gram,
                oracle.as_ref(),
                level,
                samples,
                config.accept_tol,
                seed,
            );
            let (top, rest) = sic_gram_spectrum(d);
            let (verdict, witness) = match &out {
                CpCheckOutcome::Pass { pairs } => (json!(format!("Pass({pairs} pairs)")), None),
                CpCheckOutcome::Fail { value, .. } => {
                    (json!("Fail"), Some(json!({"pairing": value})))
                }
                CpCheckOutcome::Unknown => (json!("Unknown"), None),
            };
            let mut payload = json!({
                "d": d,
                "dim": pres.space.dim,
                "level": level,
                "normalization": normalization,
                "gram_spectrum": [top, rest],
                "cp_verdict": verdict,
            });
            if let Some(w) = witness {
                payload["witness"] = w;
            }
            Ok(payload)
        }
        SicCmd::Verify { file, tol } => {
            let bytes = read_file(&file, manifest)?;
            let raw: Vec<Vec<Vec<[f64; 2]>>> = serde_json::from_slice(&bytes).map_err(input_err)?;
            let mats: Vec<CMat> = raw
                .iter()
                .map(|m| {
                    let r = m.len();
                    CMat::from_fn(r, r, |i, j| Complex64::new(m[i][j][0], m[i][j][1]))
                })
                .collect();
            if mats.iter().any(|m| m.nrows() != mats[0].nrows()) {
                return Err(CliError::Input("matrices must share one dimension".into()));
            }
            let (ok, res) = verify_sic(&mats, tol);
            Ok(json!({
                "valid": ok,
                "tol": tol,
                "residuals": {
                    "projection": res.projection,
                    "trace_one": res.trace_one,
                    "resolution": res.resolution,
                    "pairwise": res.pairwise,
                },
            }))
        }
        SicCmd::Witness { d, extra_partitions } => {
            let w = commuting_witness(d, extra_partitions)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            Ok(json!({
                "d": d,
                "span_rank": w.span_rank,
                "partitions": w.partitions.len(),
                "block_space_dim": w.diagonals[0].len(),
            }))
        }
    }
}

fn run_mub(cmd: MubCmd, config: &Config, seed: u64) -> Result<Value, CliError> {
    let MubCmd::Check { d, level, samples } = cmd;
    if d < 2 {
        return Err(CliError::Input("d must be at least 2".into()));
    }
    let pres = build_mub_presentation(d).map_err(|e| CliError::Numerical(e.to_string()))?;
    let cone = base_cone(&pres.space).map_err(|e| CliError::Numerical(e.to_string()))?;
    let oracle = MaxOracle::new(cone, config.oracle());
    let out = gram_cp_check(
        &pres.space,
        &pres.gram,
        &oracle,
        level,
        samples,
        config.accept_tol,
        seed,
    );
    let verdict = match &out {
        CpCheckOutcome::Pass { pairs } => format!("Pass({pairs} pairs)"),
        CpCheckOutcome::Fail { value, .. } => format!("Fail({value})"),
        CpCheckOutcome::Unknown => "Unknown".into(),
    };
    let gram_diag: Vec<f64> = (0..pres.space.dim).map(|i| pres.gram[(i, i)]).collect();
    Ok(json!({
        "d": d,
        "dim": pres.space.dim,
        "num_generators": pres.space.num_generators,
        "level": level,
        "gram_diagonal": gram_diag,
        "cp_verdict": verdict,
    }))
}
