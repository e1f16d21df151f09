//! Batch front end: runs norms, verifications and scans from plain-text
//! config files and emits JSON reports plus CSV tables for external plotting.
//!
//! Exit codes: 0 success, 1 numerical failure or failed check (partial
//! report flushed), 2 configuration error.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};

use smoothing_lab::config::{ConfigError, ExperimentConfig};
use smoothing_lab::estimator::{
    dyadic_piece_bounds, extension_norm, ks_factor, refinement_scan, smoothing_ratio_with_factor,
    tt_star_norm, validate_params, EstimatorError, KsSetting, ParamSet, ScanAxes, ScanConfig,
    ScanObservable,
};
use smoothing_lab::grid::{sample_weight, GridSpec};
use smoothing_lab::propagator::{band_limited_field, BandLimitedSpec, EvolutionParams};
use smoothing_lab::report::{
    format_float17, write_atomic, CsvTable, EstimateReport, EvolutionMeta, GridMeta,
    NamedConstant, ParamMeta, RefinementRow,
};
use smoothing_lab::sphere::{sphere_rule, surface_measure_ft_radial};
use smoothing_lab::weights::{ks_cube_family, ks_norm, mc_norm, parse_weight_id, McFamily};

#[derive(Parser)]
#[command(
    name = "smoothing-lab",
    version,
    about = "Weighted smoothing-estimate laboratory: norms, operator bounds, scans"
)]
struct Cli {
    /// Print the documentation of every CSV column and exit.
    #[arg(long, global = true)]
    schema: bool,
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports and tables.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the rayon heuristic).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Check parameter admissibility and derive the smoothing exponent.
    Validate,
    /// Kerman–Sawyer norm of a catalog weight over the grid's dyadic family.
    KsNorm,
    /// Morrey–Campanato norm over a declared center/radius family.
    McNorm,
    /// Tabulate the surface-measure transform and its decay quotient.
    SigmaHat,
    /// Stability of the decay quotient across sup windows.
    DecayCheck,
    /// Weighted extension (restriction-dual) operator norm.
    RestrictionNorm,
    /// Extension-norm² vs TT* convolution norm agreement.
    EquivalenceCheck,
    /// Max smoothing ratio over a band-limited input family.
    VerifySmoothing,
    /// Per-piece dyadic kernel bounds and fitted slopes.
    DyadicPieces,
    /// Refinement scan with STABLE/GROWING verdict.
    Scan,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::KsNorm => "ks-norm",
            Command::McNorm => "mc-norm",
            Command::SigmaHat => "sigma-hat",
            Command::DecayCheck => "decay-check",
            Command::RestrictionNorm => "restriction-norm",
            Command::EquivalenceCheck => "equivalence-check",
            Command::VerifySmoothing => "verify-smoothing",
            Command::DyadicPieces => "dyadic-pieces",
            Command::Scan => "scan",
        }
    }
}

const SCHEMA_TEXT: &str = r#"CSV column documentation (all files: '.' decimal separator, '\n' line
endings, mandatory header row; floats carry 17 significant digits)

ks-norm.csv
  level        dyadic level j (side = base_scale * 2^-j; -1 is the root box)
  cubes        number of cubes at the level
  max_ratio    largest (double integral)/(mass) ratio over the level's cubes

mc-norm.csv
  radius       ball radius r of the family
  max_value    sup over centers of r^alpha (r^-n int_B w^p)^(1/p)

sigma-hat.csv
  r            radius |x|
  value        surface-measure transform at |x| = r
  quotient     |value| * (1+r)^((n-1)/2)

decay-check.csv
  window       sup window R
  sup_quotient sup over 0 <= r <= R of the decay quotient

equivalence-check.csv
  weight       catalog weight id
  ext_sigma    extension operator norm
  ext_sq       its square
  tt_sigma     TT* convolution operator norm
  rel_diff     |ext_sq - tt_sigma| / tt_sigma

verify-smoothing.csv
  weight       catalog weight id
  input        input index within the seeded family
  ratio        smoothing ratio LHS/(KS factor * ||f||)

dyadic-pieces.csv
  j            dyadic piece index
  norm_unweighted  ||K_j * .||_{l2 -> l2} (periodic box)
  norm_weighted    ||w^(b/2) (K_j * .) w^(b/2)|| (true displacements)

scan.csv
  level        refinement level
  points       grid points per axis
  half_width   box half-width L
  t            time window half-width T
  time_nodes   trapezoid nodes
  constant     family-max smoothing ratio
  growth       relative growth from the previous level (empty at level 0)
"#;

enum CliFailure {
    Config(String),
    Numerical {
        report: EstimateReport,
        message: String,
    },
    CheckFailed {
        report: EstimateReport,
        csv: Option<CsvTable>,
        message: String,
    },
}

type CliResult = Result<(EstimateReport, Option<CsvTable>), CliFailure>;

fn config_err(msg: impl Into<String>) -> CliFailure {
    CliFailure::Config(msg.into())
}

fn main() {
    let cli = Cli::parse();
    if cli.schema {
        print!("{SCHEMA_TEXT}");
        std::process::exit(0);
    }
    let Some(command) = cli.command else {
        eprintln!("error: no command given (see --help, or --schema for the CSV columns)");
        std::process::exit(2);
    };
    if let Some(k) = cli.threads {
        // May already be initialized when embedded in tests; ignore that.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let Some(config_path) = cli.config.as_ref() else {
        eprintln!("error: --config PATH is required for '{}'", command.name());
        std::process::exit(2);
    };
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            std::process::exit(2);
        }
    };
    let mut cfg = match ExperimentConfig::from_text(&text) {
        Ok(c) => c,
        Err(e @ ConfigError { .. }) => {
            eprintln!("error: {}: {e}", config_path.display());
            std::process::exit(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match run(command, &cfg) {
        Ok((report, csv)) => {
            emit(&cli.out, &cfg.out_prefix, &report, csv.as_ref());
            std::process::exit(0);
        }
        Err(CliFailure::Config(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(CliFailure::Numerical { mut report, message }) => {
            report.notes.push(format!("numerical failure: {message}"));
            emit(&cli.out, &cfg.out_prefix, &report, None);
            eprintln!("numerical failure: {message}");
            std::process::exit(1);
        }
        Err(CliFailure::CheckFailed {
            report,
            csv,
            message,
        }) => {
            emit(&cli.out, &cfg.out_prefix, &report, csv.as_ref());
            eprintln!("check failed: {message}");
            std::process::exit(1);
        }
    }
}

fn emit(out: &Path, prefix: &str, report: &EstimateReport, csv: Option<&CsvTable>) {
    let json_path = out.join(format!("{prefix}.json"));
    if let Err(e) = write_atomic(&json_path, report.to_json().as_bytes()) {
        eprintln!("error: cannot write {}: {e}", json_path.display());
        std::process::exit(2);
    }
    if let Some(table) = csv {
        let csv_path = out.join(format!("{prefix}.csv"));
        if let Err(e) = write_atomic(&csv_path, &table.to_bytes()) {
            eprintln!("error: cannot write {}: {e}", csv_path.display());
            std::process::exit(2);
        }
    }
}

fn run(command: Command, cfg: &ExperimentConfig) -> CliResult {
    match command {
        Command::Validate => run_validate(cfg),
        Command::KsNorm => run_ks_norm(cfg),
        Command::McNorm => run_mc_norm(cfg),
        Command::SigmaHat => run_sigma_hat(cfg),
        Command::DecayCheck => run_decay_check(cfg),
        Command::RestrictionNorm => run_restriction_norm(cfg),
        Command::EquivalenceCheck => run_equivalence_check(cfg),
        Command::VerifySmoothing => run_verify_smoothing(cfg),
        Command::DyadicPieces => run_dyadic_pieces(cfg),
        Command::Scan => run_scan(cfg),
    }
}

fn require_grid(cfg: &ExperimentConfig) -> Result<GridSpec, CliFailure> {
    let g = cfg
        .grid
        .as_ref()
        .ok_or_else(|| config_err("this command needs a [grid] section"))?;
    GridSpec::new(g.dim, g.points_per_axis, g.half_width)
        .map_err(|e| config_err(format!("[grid]: {e}")))
}

fn require_params(cfg: &ExperimentConfig) -> Result<ParamSet, CliFailure> {
    let p = cfg
        .params
        .as_ref()
        .ok_or_else(|| config_err("this command needs a [params] section"))?;
    Ok(ParamSet::forced(p.n, p.gamma, p.alpha, p.beta))
}

fn require_weights(
    cfg: &ExperimentConfig,
    dim: usize,
) -> Result<Vec<(String, smoothing_lab::WeightSpec)>, CliFailure> {
    if cfg.weights.is_empty() {
        return Err(config_err("this command needs a [weight] section"));
    }
    cfg.weights
        .iter()
        .map(|id| {
            parse_weight_id(id, dim)
                .map(|w| (id.clone(), w))
                .map_err(|e| config_err(format!("[weight]: {e}")))
        })
        .collect()
}

fn ks_setting(cfg: &ExperimentConfig) -> KsSetting {
    KsSetting {
        cells_per_axis: cfg.ks.cells_per_axis,
        min_side_factor: cfg.ks.min_side_factor,
        ..KsSetting::default()
    }
}

fn grid_meta(grid: &GridSpec) -> GridMeta {
    GridMeta {
        dim: grid.dim(),
        points_per_axis: grid.points_per_axis(),
        half_width: grid.half_width().into(),
    }
}

fn numerical(report: EstimateReport, e: impl std::fmt::Display) -> CliFailure {
    CliFailure::Numerical {
        report,
        message: e.to_string(),
    }
}

fn run_validate(cfg: &ExperimentConfig) -> CliResult {
    let p = cfg
        .params
        .as_ref()
        .ok_or_else(|| config_err("validate needs a [params] section"))?;
    let mut report = EstimateReport::new("validate", cfg.seed);
    match validate_params(p.n, p.gamma, p.alpha, p.beta) {
        Ok(set) => {
            report.params = Some(ParamMeta::from_params(&set));
            report.constants.push(NamedConstant::new("s", set.s));
            report
                .constants
                .push(NamedConstant::new("remark1_lower", set.remark1_lower));
            if let Some(u) = set.remark2_upper {
                report
                    .constants
                    .push(NamedConstant::new("remark2_upper", u));
            }
            report.notes.push(format!(
                "remark1 bound holds: {}; remark2 bound holds: {:?}",
                set.remark1_holds, set.remark2_holds
            ));
            report.verdict = Some("ADMISSIBLE".into());
            Ok((report, None))
        }
        Err(rej) => {
            let set = ParamSet::forced(p.n, p.gamma, p.alpha, p.beta);
            report.params = Some(ParamMeta::from_params(&set));
            report.constants.push(NamedConstant::new("s", set.s));
            for v in &rej.violations {
                report.notes.push(format!("violated: {v}"));
            }
            report.verdict = Some("REJECTED".into());
            Err(CliFailure::CheckFailed {
                report,
                csv: None,
                message: rej.to_string(),
            })
        }
    }
}

fn run_ks_norm(cfg: &ExperimentConfig) -> CliResult {
    let grid = require_grid(cfg)?;
    let weights = require_weights(cfg, grid.dim())?;
    let (wid, w) = &weights[0];
    let alpha = cfg
        .ks
        .alpha
        .ok_or_else(|| config_err("ks-norm needs 'alpha' in the [ks] section"))?;
    let setting = ks_setting(cfg);
    let mut report = EstimateReport::new("ks-norm", cfg.seed);
    report.grid = Some(grid_meta(&grid));
    report.weights.push(wid.clone());
    let cubes = ks_cube_family(
        grid.dim(),
        grid.half_width(),
        setting.min_side(&grid),
    )
    .map_err(|e| numerical(report.clone(), &e))?;
    let res = ks_norm(w, alpha, &cubes, setting.cells_per_axis)
        .map_err(|e| numerical(report.clone(), &e))?;
    report.constants.push(NamedConstant::with_witness(
        "ks_norm",
        res.value,
        res.cube.label(),
    ));
    report.constants.push(NamedConstant::new("alpha", alpha));
    report.notes.push(format!(
        "{} cubes evaluated, {} skipped by the mass floor",
        res.evaluated, res.skipped
    ));
    let mut csv = CsvTable::new(&["level", "cubes", "max_ratio"]);
    let min_level = cubes.iter().map(|c| c.level).min().unwrap();
    let max_level = cubes.iter().map(|c| c.level).max().unwrap();
    for level in min_level..=max_level {
        let slice: Vec<_> = cubes
            .iter()
            .filter(|c| c.level == level)
            .cloned()
            .collect();
        if let Ok(r) = ks_norm(w, alpha, &slice, setting.cells_per_axis) {
            csv.push(vec![
                level.to_string(),
                slice.len().to_string(),
                format_float17(r.value),
            ]);
        }
    }
    Ok((report, Some(csv)))
}

fn run_mc_norm(cfg: &ExperimentConfig) -> CliResult {
    let grid = require_grid(cfg)?;
    let weights = require_weights(cfg, grid.dim())?;
    let (wid, w) = &weights[0];
    let mc = cfg
        .mc
        .as_ref()
        .ok_or_else(|| config_err("mc-norm needs an [mc] section"))?;
    let mut report = EstimateReport::new("mc-norm", cfg.seed);
    report.grid = Some(grid_meta(&grid));
    report.weights.push(wid.clone());
    let mut family = McFamily::lattice(grid.dim(), mc.centers_per_axis, mc.extent, &mc.radii);
    family.cells_per_diameter = mc.cells_per_diameter;
    let res = mc_norm(w, mc.alpha, mc.p, &family).map_err(|e| numerical(report.clone(), &e))?;
    report.constants.push(NamedConstant::with_witness(
        "mc_norm",
        res.value,
        format!("center {:?} radius {}", res.center, res.radius),
    ));
    let mut csv = CsvTable::new(&["radius", "max_value"]);
    for &r in &mc.radii {
        let single = McFamily {
            centers: family.centers.clone(),
            radii: vec![r],
            cells_per_diameter: family.cells_per_diameter,
        };
        let v = mc_norm(w, mc.alpha, mc.p, &single).map_err(|e| numerical(report.clone(), &e))?;
        csv.push(vec![r.to_string(), format_float17(v.value)]);
    }
    Ok((report, Some(csv)))
}

fn run_sigma_hat(cfg: &ExperimentConfig) -> CliResult {
    let sigma = cfg
        .sigma
        .as_ref()
        .ok_or_else(|| config_err("sigma-hat needs a [sigma] section"))?;
    if !(sigma.n == 2 || sigma.n == 3) {
        return Err(config_err("[sigma] n must be 2 or 3"));
    }
    let mut report = EstimateReport::new("sigma-hat", cfg.seed);
    let mut csv = CsvTable::new(&["r", "value", "quotient"]);
    let mut sup: f64 = 0.0;
    for &r in &sigma.radii {
        let v = surface_measure_ft_radial(sigma.n, r);
        let q = v.abs() * (1.0 + r).powf((sigma.n as f64 - 1.0) / 2.0);
        sup = sup.max(q);
        csv.push(vec![r.to_string(), format_float17(v), format_float17(q)]);
    }
    report
        .constants
        .push(NamedConstant::new("sup_decay_quotient", sup));
    report.notes.push(format!("n = {}", sigma.n));
    Ok((report, Some(csv)))
}

fn decay_sup(n: usize, window: f64) -> f64 {
    let steps = (window * 400.0).ceil() as usize;
    let mut sup: f64 = 0.0;
    for i in 0..=steps {
        let r = window * i as f64 / steps as f64;
        let q = surface_measure_ft_radial(n, r).abs() * (1.0 + r).powf((n as f64 - 1.0) / 2.0);
        sup = sup.max(q);
    }
    sup
}

fn run_decay_check(cfg: &ExperimentConfig) -> CliResult {
    let (n, windows) = match cfg.sigma.as_ref() {
        Some(s) => (s.n, s.radii.clone()),
        None => (3, vec![10.0, 20.0, 40.0]),
    };
    if !(n == 2 || n == 3) {
        return Err(config_err("[sigma] n must be 2 or 3"));
    }
    let mut report = EstimateReport::new("decay-check", cfg.seed);
    let mut csv = CsvTable::new(&["window", "sup_quotient"]);
    let sups: Vec<f64> = windows.iter().map(|&r| decay_sup(n, r)).collect();
    for (r, s) in windows.iter().zip(&sups) {
        csv.push(vec![r.to_string(), format_float17(*s)]);
    }
    let base = sups[0];
    let variation = sups
        .iter()
        .map(|s| (s - base).abs() / base)
        .fold(0.0f64, f64::max);
    report
        .constants
        .push(NamedConstant::new("max_relative_variation", variation));
    report.notes.push(format!("n = {n}"));
    if variation < 0.05 {
        report.verdict = Some("STABLE".into());
        Ok((report, Some(csv)))
    } else {
        report.verdict = Some("VARYING".into());
        Err(CliFailure::CheckFailed {
            report,
            csv: Some(csv),
            message: format!("decay quotient varies by {variation:.3} across windows"),
        })
    }
}

fn run_restriction_norm(cfg: &ExperimentConfig) -> CliResult {
    let grid = require_grid(cfg)?;
    let params = require_params(cfg)?;
    let weights = require_weights(cfg, grid.dim())?;
    let (wid, w) = &weights[0];
    let rule = sphere_rule(grid.dim(), cfg.rule.degree)
        .map_err(|e| config_err(format!("[rule]: {e}")))?;
    let mut report = EstimateReport::new("restriction-norm", cfg.seed);
    report.grid = Some(grid_meta(&grid));
    report.params = Some(ParamMeta::from_params(&params));
    report.weights.push(wid.clone());
    let out = extension_norm(w, &params, &grid, &rule, &ks_setting(cfg), cfg.seed)
        .map_err(|e| numerical(report.clone(), &e))?;
    report
        .constants
        .push(NamedConstant::new("sigma", out.sigma));
    report
        .constants
        .push(NamedConstant::new("normalized", out.normalized));
    report
        .constants
        .push(NamedConstant::new("ks_factor", out.ks_factor));
    if let Some(d) = out.dense_sigma {
        report.constants.push(NamedConstant::new("dense_sigma", d));
    }
    report.notes.push(format!(
        "power iteration: {} iterations, residual {:.3e}, rule nodes {}",
        out.power.iterations,
        out.power.residual,
        rule.len()
    ));
    Ok((report, None))
}

fn run_equivalence_check(cfg: &ExperimentConfig) -> CliResult {
    let grid = require_grid(cfg)?;
    let params = require_params(cfg)?;
    let weights = require_weights(cfg, grid.dim())?;
    let rule = sphere_rule(grid.dim(), cfg.rule.degree)
        .map_err(|e| config_err(format!("[rule]: {e}")))?;
    let setting = ks_setting(cfg);
    let mut report = EstimateReport::new("equivalence-check", cfg.seed);
    report.grid = Some(grid_meta(&grid));
    report.params = Some(ParamMeta::from_params(&params));
    let mut csv = CsvTable::new(&["weight", "ext_sigma", "ext_sq", "tt_sigma", "rel_diff"]);
    let mut worst: f64 = 0.0;
    for (wid, w) in &weights {
        report.weights.push(wid.clone());
        let ext = extension_norm(w, &params, &grid, &rule, &setting, cfg.seed)
            .map_err(|e| numerical(report.clone(), &e))?;
        let tt = tt_star_norm(w, &params, &grid, &setting, cfg.seed.wrapping_add(1))
            .map_err(|e| numerical(report.clone(), &e))?;
        let ext_sq = ext.sigma * ext.sigma;
        let rel = (ext_sq - tt.sigma).abs() / tt.sigma;
        worst = worst.max(rel);
        csv.push(vec![
            wid.clone(),
            format_float17(ext.sigma),
            format_float17(ext_sq),
            format_float17(tt.sigma),
            format_float17(rel),
        ]);
    }
    report
        .constants
        .push(NamedConstant::new("max_rel_diff", worst));
    if worst <= 0.01 {
        report.verdict = Some("EQUIVALENT".into());
        Ok((report, Some(csv)))
    } else {
        report.verdict = Some("DISAGREE".into());
        Err(CliFailure::CheckFailed {
            report,
            csv: Some(csv),
            message: format!("extension²/tt* disagree by {worst:.4}"),
        })
    }
}

fn family_spec(cfg: &ExperimentConfig) -> Result<(BandLimitedSpec, usize), CliFailure> {
    let f = cfg
        .family
        .as_ref()
        .ok_or_else(|| config_err("this command needs a [family] section"))?;
    Ok((
        BandLimitedSpec {
            rho_min: f.rho_min,
            rho_max: f.rho_max,
            modes: f.modes,
            sigma_x: f.sigma_x,
        },
        f.count,
    ))
}

fn run_verify_smoothing(cfg: &ExperimentConfig) -> CliResult {
    let grid = require_grid(cfg)?;
    let params = require_params(cfg)?;
    let weights = require_weights(cfg, grid.dim())?;
    let evo_cfg = cfg
        .evolution
        .as_ref()
        .ok_or_else(|| config_err("verify-smoothing needs an [evolution] section"))?;
    let (family, count) = family_spec(cfg)?;
    let evolution = EvolutionParams::new(
        params.gamma,
        params.s,
        evo_cfg.time_half_width,
        evo_cfg.time_nodes,
    )
    .map_err(|e| config_err(format!("[evolution]: {e}")))?;
    let mut report = EstimateReport::new("verify-smoothing", cfg.seed);
    report.grid = Some(grid_meta(&grid));
    report.params = Some(ParamMeta::from_params(&params));
    report.evolution = Some(EvolutionMeta {
        gamma: params.gamma.into(),
        s: params.s.into(),
        time_half_width: evo_cfg.time_half_width.into(),
        time_nodes: evo_cfg.time_nodes,
    });
    let travel =
        params.gamma * family.xi_max().powf(params.gamma - 1.0) * evo_cfg.time_half_width;
    if travel >= grid.half_width() / 2.0 {
        return Err(numerical(
            report,
            EstimatorError::WindowBound {
                actual: travel,
                bound: grid.half_width() / 2.0,
            },
        ));
    }
    let setting = ks_setting(cfg);
    let inputs: Vec<_> = (0..count)
        .map(|i| {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(
                cfg.seed.wrapping_add(i as u64),
            );
            band_limited_field(&grid, &family, &mut rng)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| numerical(report.clone(), &e))?;
    let mut csv = CsvTable::new(&["weight", "input", "ratio"]);
    let mut best: Option<(f64, usize, String)> = None;
    for (wid, w) in &weights {
        report.weights.push(wid.clone());
        let ksf =
            ks_factor(w, &params, &grid, &setting).map_err(|e| numerical(report.clone(), &e))?;
        let samples = sample_weight(&grid, w).map_err(|e| numerical(report.clone(), &e))?;
        for (i, f) in inputs.iter().enumerate() {
            let ratio = smoothing_ratio_with_factor(f, &params, &samples, &evolution, ksf.value)
                .map_err(|e| numerical(report.clone(), &e))?;
            csv.push(vec![wid.clone(), i.to_string(), format_float17(ratio)]);
            if best.as_ref().map(|(b, _, _)| ratio > *b).unwrap_or(true) {
                best = Some((ratio, i, wid.clone()));
            }
        }
    }
    let (value, input, wid) = best.expect("non-empty family");
    report.constants.push(NamedConstant::with_witness(
        "max_smoothing_ratio",
        value,
        format!("weight {wid}, input {input}"),
    ));
    Ok((report, Some(csv)))
}

fn run_dyadic_pieces(cfg: &ExperimentConfig) -> CliResult {
    let grid = require_grid(cfg)?;
    let params = require_params(cfg)?;
    let weights = require_weights(cfg, grid.dim())?;
    let (wid, w) = &weights[0];
    let pieces = cfg
        .pieces
        .as_ref()
        .ok_or_else(|| config_err("dyadic-pieces needs a [pieces] section"))?;
    let mut report = EstimateReport::new("dyadic-pieces", cfg.seed);
    report.grid = Some(grid_meta(&grid));
    report.params = Some(ParamMeta::from_params(&params));
    report.weights.push(wid.clone());
    let out = dyadic_piece_bounds(pieces.j_min..=pieces.j_max, w, &params, &grid, cfg.seed)
        .map_err(|e| numerical(report.clone(), &e))?;
    let mut csv = CsvTable::new(&["j", "norm_unweighted", "norm_weighted"]);
    for row in &out.rows {
        csv.push(vec![
            row.j.to_string(),
            format_float17(row.norm_unweighted),
            format_float17(row.norm_weighted),
        ]);
    }
    report
        .constants
        .push(NamedConstant::new("slope_unweighted", out.slope_unweighted));
    report
        .constants
        .push(NamedConstant::new("slope_weighted", out.slope_weighted));
    report.constants.push(NamedConstant::new(
        "summability_exponent",
        out.summability_exponent,
    ));
    report
        .notes
        .push(format!("summability gate: {}", out.summable));
    Ok((report, Some(csv)))
}

fn run_scan(cfg: &ExperimentConfig) -> CliResult {
    let grid_cfg = cfg
        .grid
        .as_ref()
        .ok_or_else(|| config_err("scan needs a [grid] section"))?;
    let params = require_params(cfg)?;
    if cfg.weights.is_empty() {
        return Err(config_err("scan needs a [weight] section"));
    }
    let evo_cfg = cfg
        .evolution
        .as_ref()
        .ok_or_else(|| config_err("scan needs an [evolution] section"))?;
    let scan_cfg = cfg
        .scan
        .as_ref()
        .ok_or_else(|| config_err("scan needs a [scan] section"))?;
    let observable = if scan_cfg.observable == "extension" {
        ScanObservable::ExtensionNorm {
            base_rule_degree: cfg.rule.degree,
        }
    } else {
        ScanObservable::SmoothingRatio
    };
    let (family, count) = if observable == ScanObservable::SmoothingRatio {
        family_spec(cfg)?
    } else {
        (
            BandLimitedSpec {
                rho_min: 1.0,
                rho_max: 1.5,
                modes: 1,
                sigma_x: 1.0,
            },
            0,
        )
    };
    let axes = ScanAxes {
        double_points: scan_cfg.axes.iter().any(|a| a == "points"),
        double_time: scan_cfg.axes.iter().any(|a| a == "time"),
        double_box: scan_cfg.axes.iter().any(|a| a == "box"),
        double_rule_degree: scan_cfg.axes.iter().any(|a| a == "rule"),
    };
    let config = ScanConfig {
        params: params.clone(),
        weight_ids: cfg.weights.clone(),
        base_points: grid_cfg.points_per_axis,
        base_half_width: grid_cfg.half_width,
        base_time: evo_cfg.time_half_width,
        base_time_nodes: evo_cfg.time_nodes,
        family,
        family_count: count,
        levels: scan_cfg.levels,
        axes,
        observable,
        seed: cfg.seed,
        couple_box_to_time: scan_cfg.couple_box_to_time,
        enforce_window_bound: scan_cfg.enforce_window_bound,
        ks: ks_setting(cfg),
    };
    let mut report = EstimateReport::new("scan", cfg.seed);
    report.params = Some(ParamMeta::from_params(&params));
    report.weights = cfg.weights.clone();
    let out = refinement_scan(&config).map_err(|e| numerical(report.clone(), &e))?;
    let mut csv = CsvTable::new(&[
        "level",
        "points",
        "half_width",
        "t",
        "time_nodes",
        "constant",
        "growth",
    ]);
    for (i, level) in out.levels.iter().enumerate() {
        report.refinement.push(RefinementRow {
            level: level.level,
            label: format!(
                "N={} L={} T={} M={}",
                level.points, level.half_width, level.time_half_width, level.time_nodes
            ),
            value: level.constant.into(),
        });
        csv.push(vec![
            level.level.to_string(),
            level.points.to_string(),
            level.half_width.to_string(),
            level.time_half_width.to_string(),
            level.time_nodes.to_string(),
            format_float17(level.constant),
            if i == 0 {
                String::new()
            } else {
                format_float17(out.growth[i - 1])
            },
        ]);
    }
    for (i, g) in out.growth.iter().enumerate() {
        report
            .constants
            .push(NamedConstant::new(&format!("growth_{}", i + 1), *g));
    }
    let last = out.levels.last().expect(">= 3 levels");
    report.constants.push(NamedConstant::with_witness(
        "constant_at_finest_level",
        last.constant,
        format!(
            "weight {}, input {}",
            last.witness_weight, last.witness_input
        ),
    ));
    report.verdict = Some(out.verdict.to_string());
    Ok((report, Some(csv)))
}
