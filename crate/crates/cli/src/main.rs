//! `promises`: batch front end for alignment, simulation, connectivity and
//! k selection. Every run writes a `manifest.json` next to its outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use promises::connectivity::{roi_correlation, seed_correlation, RoiLabels};
use promises::io::{config_echo, load_matrix, write_matrix_csv, write_optional_column, MatrixFormat, RunManifest};
use promises::prior::{build_prior_location, PriorLocation, PriorSpec};
use promises::simulate::{random_reference, simulate_dataset, SimulationSpec};
use promises::{align, align_efficient, select_k, AlignmentConfig, CovarianceMode};
use serde::Deserialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "promises", version, about = "Functional alignment with von Mises-Fisher priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align a set of subject matrices.
    Align(AlignArgs),
    /// Draw a synthetic dataset from the perturbation model.
    Simulate(SimulateArgs),
    /// Seed and ROI correlation maps of a reference matrix.
    Connectivity(ConnectivityArgs),
    /// Choose k by leave-one-subject-out cross-validation.
    SelectK(SelectKArgs),
}

/// Options shared by `align` and `select-k`. Every field is optional on the
/// command line so a config file can fill it in.
#[derive(Args, Deserialize, Default, Clone)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct FitOptions {
    /// Directory of subject files (.csv, .bin, .raw) or a glob pattern.
    #[arg(long)]
    input: Option<String>,
    /// `identity`, `euclidean:<coords.csv>` or `custom:<F.csv>`.
    #[arg(long)]
    prior: Option<String>,
    /// Work in the n-dimensional space of each subject's thin SVD.
    #[arg(long)]
    #[serde(default)]
    efficient: bool,
    /// Estimate isotropic scales.
    #[arg(long)]
    #[serde(default)]
    scaling: bool,
    /// `identity` or `dutilleul`.
    #[arg(long)]
    cov: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl FitOptions {
    /// Command-line values win over the config file.
    fn merge(self, file: FitOptions) -> FitOptions {
        FitOptions {
            input: self.input.or(file.input),
            prior: self.prior.or(file.prior),
            efficient: self.efficient || file.efficient,
            scaling: self.scaling || file.scaling,
            cov: self.cov.or(file.cov),
            tol: self.tol.or(file.tol),
            max_iter: self.max_iter.or(file.max_iter),
            out: self.out.or(file.out),
        }
    }

    fn config(&self, k: f64) -> Result<AlignmentConfig> {
        let defaults = AlignmentConfig::default();
        let covariance_mode = match &self.cov {
            Some(c) => c.parse::<CovarianceMode>()?,
            None => CovarianceMode::Identity,
        };
        let location = parse_prior(self.prior.as_deref().unwrap_or("identity"))?;
        let config = AlignmentConfig {
            tol: self.tol.unwrap_or(defaults.tol),
            max_iterations: self.max_iter.unwrap_or(defaults.max_iterations),
            scaling: self.scaling,
            covariance_mode,
            prior: PriorSpec::new(k, location)?,
            ..defaults
        };
        config.validate()?;
        Ok(config)
    }

    fn out(&self) -> Result<&Path> {
        self.out.as_deref().context("--out is required")
    }
}

#[derive(Args)]
struct AlignArgs {
    #[command(flatten)]
    fit: FitOptions,
    /// Prior concentration; 0 gives the maximum likelihood estimator.
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// TOML file whose keys mirror the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    subjects: Option<usize>,
    /// Noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Planted scales, one per subject (comma separated).
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct SimulateFile {
    n: Option<usize>,
    m: Option<usize>,
    subjects: Option<usize>,
    sigma: Option<f64>,
    seed: Option<u64>,
    alpha: Option<Vec<f64>>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConnectivityArgs {
    /// Group reference matrix (time × variables).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Zero-based seed column.
    #[arg(long)]
    seed_col: Option<usize>,
    /// One region label per column; an optional second column names the region.
    #[arg(long)]
    rois: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct ConnectivityFile {
    reference: Option<PathBuf>,
    seed_col: Option<usize>,
    rois: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectKArgs {
    #[command(flatten)]
    fit: FitOptions,
    /// Candidate values of k.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

/// Config file for `align` or `select-k`: `extra` names the one key that is
/// not a fit option (`k` or `grid`).
fn read_fit_config<T: for<'de> Deserialize<'de>>(
    path: Option<&Path>,
    extra: &str,
) -> Result<(Option<T>, FitOptions)> {
    let mut table: toml::Table = read_config(path)?;
    let value = match table.remove(extra) {
        Some(v) => Some(v.try_into().with_context(|| format!("bad value for `{extra}`"))?),
        None => None,
    };
    let fit = table.try_into().context("bad config file")?;
    Ok((value, fit))
}

fn parse_prior(text: &str) -> Result<PriorLocation> {
    let load = |path: &str| load_matrix(Path::new(path), MatrixFormat::from_path(Path::new(path)));
    match text.split_once(':') {
        None if text == "identity" => Ok(PriorLocation::Identity),
        Some(("euclidean", path)) => Ok(PriorLocation::EuclideanKernel(load(path)?)),
        Some(("custom", path)) => Ok(PriorLocation::Custom(load(path)?)),
        _ => bail!("unknown prior `{text}`; use identity, euclidean:<coords.csv> or custom:<F.csv>"),
    }
}

/// Subject files in name order.
fn subject_files(input: &str) -> Result<Vec<PathBuf>> {
    let path = Path::new(input);
    let mut files: Vec<PathBuf> = if path.is_dir() {
        fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && matches!(
                        p.extension().and_then(|e| e.to_str()),
                        Some("csv") | Some("bin") | Some("raw")
                    )
            })
            .collect()
    } else {
        glob::glob(input)
            .with_context(|| format!("bad glob `{input}`"))?
            .collect::<std::result::Result<_, _>>()?
    };
    files.sort();
    if files.is_empty() {
        bail!("no subject files found for `{input}`");
    }
    Ok(files)
}

fn load_subjects(input: &str, manifest: &mut RunManifest) -> Result<(Vec<PathBuf>, Vec<DMatrix<f64>>)> {
    let files = subject_files(input)?;
    let mut xs = Vec::with_capacity(files.len());
    for f in &files {
        xs.push(load_matrix(f, MatrixFormat::from_path(f))?);
        manifest.record_input(f)?;
    }
    Ok((files, xs))
}

fn record_prior_inputs(prior: Option<&str>, manifest: &mut RunManifest) -> Result<()> {
    if let Some((_, path)) = prior.and_then(|p| p.split_once(':')) {
        manifest.record_input(Path::new(path))?;
    }
    Ok(())
}

fn write_indexed(dir: &Path, prefix: &str, mats: &[DMatrix<f64>]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, a) in mats.iter().enumerate() {
        write_matrix_csv(&dir.join(format!("{prefix}{:03}.csv", i + 1)), a)?;
    }
    Ok(())
}

fn write_scales(path: &Path, scales: &[f64], warnings: &[bool]) -> Result<()> {
    let mut text = String::from("subject,alpha,approximation_warning\n");
    for (i, (a, w)) in scales.iter().zip(warnings).enumerate() {
        text.push_str(&format!("{},{a:.16e},{w}\n", i + 1));
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_translations(path: &Path, translations: &[nalgebra::DVector<f64>]) -> Result<()> {
    let rows: Vec<f64> = translations.iter().flat_map(|t| t.iter().copied()).collect();
    let m = translations.first().map_or(0, |t| t.len());
    write_matrix_csv(path, &DMatrix::from_row_slice(translations.len(), m, &rows))?;
    Ok(())
}

fn fit_echo(fit: &FitOptions, config: &AlignmentConfig, files: &[PathBuf]) -> serde_json::Value {
    let mut echo = config_echo(config);
    echo["input"] = json!(fit.input);
    echo["prior_arg"] = json!(fit.prior.as_deref().unwrap_or("identity"));
    echo["efficient"] = json!(fit.efficient);
    echo["subjects"] = json!(files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>());
    echo
}

fn run_align(args: AlignArgs) -> Result<()> {
    let (file_k, file_fit) = read_fit_config::<f64>(args.config.as_deref(), "k")?;
    let fit = args.fit.merge(file_fit);
    let k = args.k.or(file_k).unwrap_or(0.0);
    let config = fit.config(k)?;
    let out = fit.out()?.to_path_buf();
    let input = fit.input.clone().context("--input is required")?;
    let mut manifest = RunManifest::new("align", json!({}));

    let started = Instant::now();
    let (files, xs) = load_subjects(&input, &mut manifest)?;
    record_prior_inputs(fit.prior.as_deref(), &mut manifest)?;
    manifest.phase_seconds.insert("load".into(), started.elapsed().as_secs_f64());
    let m = xs[0].ncols();
    if config.prior.is_active() {
        let (_, diagnostics) = build_prior_location(&config.prior, m)?;
        manifest.notes.insert("prior_full_rank".into(), diagnostics.full_rank.to_string());
        manifest.notes.insert(
            "prior_smallest_singular_value".into(),
            format!("{:e}", diagnostics.smallest_singular_value),
        );
    }

    let started = Instant::now();
    fs::create_dir_all(&out)?;
    if fit.efficient {
        let result = align_efficient(&xs, &config)?;
        manifest.phase_seconds.insert("align".into(), started.elapsed().as_secs_f64());
        let started = Instant::now();
        let reduced = &result.reduced;
        write_matrix_csv(&out.join("reference.csv"), &result.group_mean())?;
        write_matrix_csv(&out.join("reduced_reference.csv"), &reduced.reference)?;
        write_indexed(&out.join("rotations"), "R_", &reduced.rotations)?;
        let bases: Vec<_> = result.transforms.iter().map(|t| t.basis.clone()).collect();
        write_indexed(&out.join("bases"), "Q_", &bases)?;
        write_indexed(&out.join("aligned"), "subject_", &result.aligned)?;
        write_scales(&out.join("scales.csv"), &reduced.scales, &reduced.scale_warnings)?;
        write_translations(&out.join("translations.csv"), &result.translations)?;
        manifest.phase_seconds.insert("write".into(), started.elapsed().as_secs_f64());
        fill_loop_fields(&mut manifest, reduced);
        manifest.notes.insert(
            "rank_deficient_subjects".into(),
            flagged(&result.rank_deficient),
        );
    } else {
        let result = align(&xs, &config)?;
        manifest.phase_seconds.insert("align".into(), started.elapsed().as_secs_f64());
        let started = Instant::now();
        write_matrix_csv(&out.join("reference.csv"), &result.reference)?;
        write_indexed(&out.join("rotations"), "R_", &result.rotations)?;
        write_indexed(&out.join("aligned"), "subject_", &result.aligned)?;
        write_scales(&out.join("scales.csv"), &result.scales, &result.scale_warnings)?;
        write_translations(&out.join("translations.csv"), &result.translations)?;
        manifest.phase_seconds.insert("write".into(), started.elapsed().as_secs_f64());
        fill_loop_fields(&mut manifest, &result);
    }
    manifest.config = fit_echo(&fit, &config, &files);
    manifest.write(&out.join("manifest.json"))?;
    eprintln!(
        "aligned {} subjects in {} iterations (converged: {}); outputs in {}",
        xs.len(),
        manifest.iterations_run,
        manifest.converged,
        out.display()
    );
    Ok(())
}

fn flagged(flags: &[bool]) -> String {
    let ids: Vec<String> = flags
        .iter()
        .enumerate()
        .filter(|(_, f)| **f)
        .map(|(i, _)| (i + 1).to_string())
        .collect();
    if ids.is_empty() {
        "none".into()
    } else {
        ids.join(",")
    }
}

fn fill_loop_fields(manifest: &mut RunManifest, result: &promises::AlignmentResult) {
    manifest.dist_trace = result.dist_trace.clone();
    manifest.iterations_run = result.iterations_run;
    manifest.converged = result.converged;
    let non_unique: Vec<bool> = result.unique.iter().map(|u| !u).collect();
    manifest.notes.insert("non_unique_rotations".into(), flagged(&non_unique));
    manifest.notes.insert("covariance_degenerate".into(), result.covariance_degenerate.to_string());
    manifest.notes.insert("scale_warnings".into(), flagged(&result.scale_warnings));
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let file: SimulateFile = read_config(args.config.as_deref())?;
    let n = args.n.or(file.n).context("--n is required")?;
    let m = args.m.or(file.m).context("--m is required")?;
    let subjects = args.subjects.or(file.subjects).context("--subjects is required")?;
    let sigma = args.sigma.or(file.sigma).unwrap_or(0.1);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let scales = args.alpha.or(file.alpha).unwrap_or_default();
    let out = args.out.or(file.out).context("--out is required")?;

    let started = Instant::now();
    let reference = random_reference(n, m, seed);
    let spec = SimulationSpec {
        scales: scales.clone(),
        ..SimulationSpec::new(subjects, n, m, sigma, seed.wrapping_add(1))
    };
    let data = simulate_dataset(&spec, &reference)?;
    let mut manifest = RunManifest::new(
        "simulate",
        json!({
            "n": n, "m": m, "subjects": subjects, "sigma": sigma, "seed": seed, "alpha": scales,
            "reference_seed": seed, "data_seed": seed.wrapping_add(1),
        }),
    );
    manifest.phase_seconds.insert("simulate".into(), started.elapsed().as_secs_f64());

    let started = Instant::now();
    write_indexed(&out.join("subjects"), "subject_", &data.xs)?;
    let truth = out.join("truth");
    fs::create_dir_all(&truth)?;
    write_matrix_csv(&truth.join("reference.csv"), &reference)?;
    write_indexed(&truth.join("rotations"), "R_", &data.rotations)?;
    write_scales(&truth.join("scales.csv"), &data.scales, &vec![false; data.scales.len()])?;
    manifest.phase_seconds.insert("write".into(), started.elapsed().as_secs_f64());
    manifest.converged = true;
    manifest.write(&out.join("manifest.json"))?;
    eprintln!("wrote {subjects} subjects ({n}x{m}) to {}", out.display());
    Ok(())
}

/// Labels CSV: first column integer label, optional second column name,
/// optional header row.
fn read_rois(path: &Path) -> Result<RoiLabels> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut labels = Vec::new();
    let mut names = BTreeMap::new();
    for (index, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cells = line.splitn(2, ',').map(str::trim);
        let first = cells.next().unwrap_or_default();
        let label = match first.parse::<i64>() {
            Ok(l) => l,
            Err(_) if index == 0 => continue,
            Err(_) => bail!("{}: row {}: `{first}` is not an integer label", path.display(), index + 1),
        };
        if let Some(name) = cells.next().filter(|n| !n.is_empty()) {
            names.insert(label, name.trim_matches('"').to_string());
        }
        labels.push(label);
    }
    Ok(RoiLabels {
        labels,
        region_names: (!names.is_empty()).then_some(names),
    })
}

fn run_connectivity(args: ConnectivityArgs) -> Result<()> {
    let file: ConnectivityFile = read_config(args.config.as_deref())?;
    let reference_path = args.reference.or(file.reference).context("--reference is required")?;
    let seed_col = args.seed_col.or(file.seed_col);
    let rois = args.rois.or(file.rois);
    let out = args.out.or(file.out).context("--out is required")?;
    if seed_col.is_none() && rois.is_none() {
        bail!("nothing to compute: give --seed-col, --rois or both");
    }

    let mut manifest = RunManifest::new(
        "connectivity",
        json!({
            "reference": reference_path.display().to_string(),
            "seed_col": seed_col,
            "rois": rois.as_ref().map(|p| p.display().to_string()),
        }),
    );
    let started = Instant::now();
    let reference = load_matrix(&reference_path, MatrixFormat::from_path(&reference_path))?;
    manifest.record_input(&reference_path)?;
    fs::create_dir_all(&out)?;
    if let Some(col) = seed_col {
        let map = seed_correlation(&reference, col)?;
        write_optional_column(&out.join("seed_map.csv"), "correlation", &map)?;
        let undefined = map.iter().filter(|v| v.is_none()).count();
        manifest.notes.insert("seed_map_undefined".into(), undefined.to_string());
    }
    if let Some(path) = rois {
        let labels = read_rois(&path)?;
        manifest.record_input(&path)?;
        let matrix = roi_correlation(&reference, &labels)?;
        let regions = labels.regions();
        let header: Vec<String> = regions
            .iter()
            .map(|r| {
                labels
                    .region_names
                    .as_ref()
                    .and_then(|names| names.get(r).cloned())
                    .unwrap_or_else(|| r.to_string())
            })
            .collect();
        let mut text = header.join(",");
        text.push('\n');
        for row in matrix.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        fs::write(out.join("roi_matrix.csv"), text)?;
    }
    manifest.phase_seconds.insert("connectivity".into(), started.elapsed().as_secs_f64());
    manifest.converged = true;
    manifest.write(&out.join("manifest.json"))?;
    eprintln!("connectivity outputs in {}", out.display());
    Ok(())
}

fn run_select_k(args: SelectKArgs) -> Result<()> {
    let (file_grid, file_fit) = read_fit_config::<Vec<f64>>(args.config.as_deref(), "grid")?;
    let fit = args.fit.merge(file_fit);
    let grid = args.grid.or(file_grid).unwrap_or_else(|| vec![0.0, 0.1, 1.0, 10.0]);
    let config = fit.config(0.0)?;
    let out = fit.out()?.to_path_buf();
    let input = fit.input.clone().context("--input is required")?;
    let mut manifest = RunManifest::new("select-k", json!({}));

    let started = Instant::now();
    let (files, xs) = load_subjects(&input, &mut manifest)?;
    record_prior_inputs(fit.prior.as_deref(), &mut manifest)?;
    manifest.phase_seconds.insert("load".into(), started.elapsed().as_secs_f64());

    let started = Instant::now();
    let selection = select_k(&xs, &grid, &config, fit.efficient)?;
    manifest.phase_seconds.insert("select".into(), started.elapsed().as_secs_f64());

    fs::create_dir_all(&out)?;
    let mut text = String::from("k,mean_score");
    for i in 0..xs.len() {
        text.push_str(&format!(",fold_{:03}", i + 1));
    }
    text.push('\n');
    for row in &selection.table {
        text.push_str(&format!("{},{:.16e}", row.k, row.mean_score));
        for s in &row.fold_scores {
            text.push_str(&format!(",{s:.16e}"));
        }
        text.push('\n');
    }
    fs::write(out.join("scores.csv"), text)?;

    let mut echo = fit_echo(&fit, &config, &files);
    echo["grid"] = json!(grid);
    manifest.config = echo;
    manifest.converged = true;
    manifest.notes.insert("best_k".into(), selection.best_k.to_string());
    manifest.notes.insert(
        "criterion".into(),
        "leave-one-subject-out; held-out subject split into two contiguous halves of time points, \
         rotation fitted on one half against the training reference and Frobenius error scored on the other"
            .into(),
    );
    manifest.write(&out.join("manifest.json"))?;
    println!("{}", selection.best_k);
    eprintln!("best k = {} (scores in {})", selection.best_k, out.join("scores.csv").display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Align(a) => run_align(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Connectivity(a) => run_connectivity(a),
        Command::SelectK(a) => run_select_k(a),
    }
}
