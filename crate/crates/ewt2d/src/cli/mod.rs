//! Command-line façade: configuration loading, flag overrides and the
//! `partition | register | transform | reconstruct | segment | bench`
//! subcommands.

pub mod artifacts;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    format_db, partition_image, psnr, run_benchmark, BenchConfig, PartitionMethod,
};
use crate::demons::{register_partition, DemonsParams, Variant};
use crate::error::{EwtError, Result};
use crate::ewt::{bank_from_registrations, forward, inverse};
use crate::kernels::{KernelKind, KernelSpec};
use crate::segmentation::{segment, SegmentConfig, DEFAULT_SIGMA_C, DEFAULT_WINDOW};

/// A numeric setting that may be deferred to the automatic grid search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Value(T),
    Auto(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoKeyword {
    #[serde(rename = "auto")]
    Auto,
}

impl<T: Copy> AutoOr<T> {
    pub fn value(self) -> Option<T> {
        match self {
            AutoOr::Value(v) => Some(v),
            AutoOr::Auto(_) => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSection {
    pub method: PartitionMethod,
    pub s0: f64,
}

impl Default for PartitionSection {
    fn default() -> Self {
        Self {
            method: PartitionMethod::Voronoi,
            s0: 0.8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub kind: KernelKind,
    pub tau: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            kind: KernelKind::Disk,
            tau: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemonsSection {
    pub variant: Variant,
    pub sigma_x: f64,
    pub sigma_i: f64,
    pub sigma_f: f64,
    pub sigma_d: AutoOr<f64>,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub n_level: AutoOr<usize>,
}

impl Default for DemonsSection {
    fn default() -> Self {
        let d = DemonsParams::default();
        Self {
            variant: d.variant,
            sigma_x: d.sigma_x,
            sigma_i: d.sigma_i,
            sigma_f: d.sigma_f,
            sigma_d: AutoOr::Value(d.sigma_d),
            epsilon: d.epsilon,
            max_iterations: d.max_iterations,
            n_level: AutoOr::Value(d.n_level),
        }
    }
}

impl DemonsSection {
    /// Effective parameters plus whether the grid search is requested
    /// (any field left on "auto").
    pub fn resolve(&self) -> (DemonsParams, bool) {
        let defaults = DemonsParams::default();
        let params = DemonsParams {
            sigma_x: self.sigma_x,
            sigma_i: self.sigma_i,
            sigma_f: self.sigma_f,
            sigma_d: self.sigma_d.value().unwrap_or(defaults.sigma_d),
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            variant: self.variant,
            n_level: self.n_level.value().unwrap_or(defaults.n_level),
        };
        let auto = self.sigma_d.value().is_none() || self.n_level.value().is_none();
        (params, auto)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationSection {
    pub k: usize,
    pub window: usize,
    pub seed: u64,
    pub sigma_c: f64,
}

impl Default for SegmentationSection {
    fn default() -> Self {
        Self {
            k: 2,
            window: DEFAULT_WINDOW,
            seed: 42,
            sigma_c: DEFAULT_SIGMA_C,
        }
    }
}

/// Whole-pipeline configuration; every field can also be set by a flag
/// (flags win over the file).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub normalized: bool,
    pub threads: Option<usize>,
    pub partition: PartitionSection,
    pub kernel: KernelSection,
    pub demons: DemonsSection,
    pub segmentation: SegmentationSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        artifacts::require_exists(path, "config file")?;
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| EwtError::Config(e.to_string()))
    }
}

/// Benchmark configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchFileConfig {
    pub seed: u64,
    pub size: usize,
    pub s0: f64,
    pub variants: Vec<Variant>,
    pub partitions: Vec<PartitionMethod>,
    pub kernels: Vec<KernelKind>,
    pub taus: Vec<f64>,
    pub demons: DemonsSection,
}

impl Default for BenchFileConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            size: 256,
            s0: 0.8,
            variants: vec![Variant::Additive],
            partitions: vec![PartitionMethod::Voronoi],
            kernels: vec![KernelKind::Disk],
            taus: vec![0.2],
            demons: DemonsSection::default(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ewt",
    version,
    about = "2D empirical wavelet transform driven by demons registration"
)]
struct Cli {
    /// Configuration file (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Thread-pool size (fallback: EWT_THREADS environment variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect spectrum modes and partition the Fourier plane.
    Partition(PartitionArgs),
    /// Register each partition region onto the kernel support.
    Register(RegisterArgs),
    /// Build the filter bank and compute wavelet coefficients.
    Transform(TransformArgs),
    /// Reconstruct an image from coefficients via the dual frame.
    Reconstruct(ReconstructArgs),
    /// Texture segmentation from local coefficient energy.
    Segment(SegmentArgs),
    /// Run the reconstruction benchmark grid and emit a CSV report.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct PartitionArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// voronoi | watershed
    #[arg(long)]
    method: Option<String>,
    /// Scale-space step.
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RegisterArgs {
    /// Partition directory produced by `ewt partition`.
    #[arg(long)]
    partition: PathBuf,
    /// disk | square
    #[arg(long)]
    kernel: Option<String>,
    /// thirion | additive | diffeomorphic
    #[arg(long)]
    variant: Option<String>,
    /// Grid-search sigma_d and the pyramid depth per region.
    #[arg(long)]
    select_params: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TransformArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Registration directory with region_<n>.ewtf files; required unless
    /// the bank directory already holds a bank.
    #[arg(long)]
    fields: Option<PathBuf>,
    /// Bank directory: loaded if it holds a bank, written otherwise.
    #[arg(long)]
    bank: PathBuf,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    normalized: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long)]
    bank: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Reference image for the PSNR entry of the report.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit codes: 0 success, 2 configuration error, 3 numeric failure.
pub fn exit_code_for(err: &EwtError) -> u8 {
    match err {
        EwtError::Numeric(_) | EwtError::NonFinite(_) => 3,
        _ => 2,
    }
}

/// Entry point used by the `ewt` binary; returns the process exit code.
pub fn main_entry<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version through this path.
            let is_usage = e.use_stderr();
            let _ = e.print();
            return if is_usage { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn init_threads(cli_threads: Option<usize>, config_threads: Option<usize>) -> Result<()> {
    let from_env = std::env::var("EWT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let Some(n) = cli_threads.or(config_threads).or(from_env) else {
        return Ok(());
    };
    if n == 0 {
        return Err(EwtError::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| EwtError::Config(format!("thread pool: {e}")))
}

fn parse_opt<T: FromStr<Err = EwtError>>(v: &Option<String>) -> Result<Option<T>> {
    v.as_deref().map(T::from_str).transpose()
}

fn required_input(flag: &Option<PathBuf>, config: &PipelineConfig) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| config.input.clone())
        .ok_or_else(|| EwtError::Config("no input image given (--input or config)".into()))
}

fn required_out(flag: &Option<PathBuf>, config: &PipelineConfig) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| config.out.clone())
        .ok_or_else(|| EwtError::Config("no output path given (--out or config)".into()))
}

fn run(cli: Cli) -> Result<()> {
    // Bench has its own config schema; don't parse its file as a
    // pipeline config.
    if let Command::Bench(args) = cli.command {
        init_threads(cli.threads, None)?;
        return cmd_bench(args, cli.config);
    }
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    init_threads(cli.threads, config.threads)?;
    match cli.command {
        Command::Partition(args) => cmd_partition(args, config),
        Command::Register(args) => cmd_register(args, config),
        Command::Transform(args) => cmd_transform(args, config),
        Command::Reconstruct(args) => cmd_reconstruct(args, config),
        Command::Segment(args) => cmd_segment(args, config),
        Command::Bench(_) => unreachable!("handled above"),
    }
}

fn cmd_partition(args: PartitionArgs, mut config: PipelineConfig) -> Result<()> {
    if let Some(m) = parse_opt::<PartitionMethod>(&args.method)? {
        config.partition.method = m;
    }
    if let Some(s0) = args.s0 {
        config.partition.s0 = s0;
    }
    let input = required_input(&args.input, &config)?;
    let out = required_out(&args.out, &config)?;

    let t0 = Instant::now();
    let img = artifacts::read_input_image(&input)?;
    let partition = partition_image(&img, config.partition.method, config.partition.s0)?;
    artifacts::prepare_out(&out)?;
    artifacts::save_partition(&out, &partition, config.partition.s0)?;
    artifacts::write_manifest(&out, "partition", &config, t0.elapsed().as_secs_f64())?;
    println!(
        "partition: {} regions ({} labels) -> {}",
        partition.positive_labels().len(),
        partition.pairs.len(),
        out.display()
    );
    Ok(())
}

fn cmd_register(args: RegisterArgs, mut config: PipelineConfig) -> Result<()> {
    if let Some(k) = parse_opt::<KernelKind>(&args.kernel)? {
        config.kernel.kind = k;
    }
    if let Some(v) = parse_opt::<Variant>(&args.variant)? {
        config.demons.variant = v;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| args.partition.join("fields"));

    let t0 = Instant::now();
    artifacts::require_exists(&args.partition, "partition directory")?;
    let (partition, _) = artifacts::load_partition(&args.partition)?;
    let (params, auto_from_config) = config.demons.resolve();
    let auto = args.select_params || auto_from_config;
    let regs = register_partition(&partition, config.kernel.kind, &params, auto)?;
    artifacts::prepare_out(&out)?;
    artifacts::save_registrations(&out, &regs)?;
    artifacts::write_manifest(&out, "register", &config, t0.elapsed().as_secs_f64())?;
    for (n, _, rec) in &regs {
        println!(
            "region {n}: rmse {:.4} after {} iterations",
            rec.rmse, rec.iterations
        );
    }
    Ok(())
}

fn cmd_transform(args: TransformArgs, mut config: PipelineConfig) -> Result<()> {
    if let Some(k) = parse_opt::<KernelKind>(&args.kernel)? {
        config.kernel.kind = k;
    }
    if let Some(tau) = args.tau {
        config.kernel.tau = tau;
    }
    if args.normalized {
        config.normalized = true;
    }
    let input = required_input(&args.input, &config)?;
    let out = required_out(&args.out, &config)?;

    let t0 = Instant::now();
    let img = artifacts::read_input_image(&input)?;
    let bank = if args.bank.join("bank.json").exists() {
        artifacts::load_bank(&args.bank)?
    } else {
        let fields = args.fields.clone().ok_or_else(|| {
            EwtError::Config(format!(
                "bank {} does not exist yet; --fields is required to build it",
                args.bank.display()
            ))
        })?;
        artifacts::require_exists(&fields, "registration directory")?;
        let estimates = artifacts::load_estimates(&fields)?;
        let spec = KernelSpec::new(config.kernel.kind, config.kernel.tau)?;
        let grid = crate::grid::FrequencyGrid::new(img.width(), img.height());
        let bank = bank_from_registrations(grid, spec, &estimates, config.normalized)?;
        artifacts::prepare_out(&args.bank)?;
        artifacts::save_bank(&args.bank, &bank)?;
        bank
    };
    if !bank.diagnostics.reconstruction_safe {
        eprintln!(
            "warning: bank has {} coverage holes ({:.3}%); reconstruction will lose content",
            bank.diagnostics.holes,
            bank.diagnostics.hole_fraction * 100.0
        );
    }
    let coeffs = forward(&img, &bank)?;
    artifacts::prepare_out(&out)?;
    artifacts::save_coefficients(&out, &coeffs)?;
    artifacts::write_manifest(&out, "transform", &config, t0.elapsed().as_secs_f64())?;
    println!("transform: {} bands -> {}", coeffs.bands.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReconstructReport {
    psnr: String,
    coverage_min: f64,
    coverage_max: f64,
    hole_fraction: f64,
    reconstruction_safe: bool,
}

fn cmd_reconstruct(args: ReconstructArgs, config: PipelineConfig) -> Result<()> {
    let out = required_out(&args.out, &config)?;
    let t0 = Instant::now();
    artifacts::require_exists(&args.coeffs, "coefficient directory")?;
    artifacts::require_exists(&args.bank, "bank directory")?;
    let bank = artifacts::load_bank(&args.bank)?;
    let coeffs = artifacts::load_coefficients(&args.coeffs)?;
    let rec = inverse(&coeffs, &bank)?;
    crate::grid::io::write_gray_png(&out, &rec)?;

    let psnr_value = match &args.reference {
        Some(path) => {
            let reference = artifacts::read_input_image(path)?;
            format_db(psnr(&reference, &rec)?)
        }
        None => "n/a".to_string(),
    };
    let report = ReconstructReport {
        psnr: psnr_value,
        coverage_min: bank.diagnostics.min_coverage,
        coverage_max: bank.diagnostics.max_coverage,
        hole_fraction: bank.diagnostics.hole_fraction,
        reconstruction_safe: bank.diagnostics.reconstruction_safe,
    };
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| out.with_extension("report.json"));
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        artifacts::write_manifest(dir, "reconstruct", &config, t0.elapsed().as_secs_f64())?;
    }
    println!("reconstruct: psnr {} -> {}", report.psnr, out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SegmentReport {
    k: usize,
    cost: f64,
    cluster_sizes: Vec<usize>,
    config: PipelineConfig,
}

fn cmd_segment(args: SegmentArgs, mut config: PipelineConfig) -> Result<()> {
    if let Some(m) = parse_opt::<PartitionMethod>(&args.method)? {
        config.partition.method = m;
    }
    if let Some(k) = parse_opt::<KernelKind>(&args.kernel)? {
        config.kernel.kind = k;
    }
    if let Some(v) = parse_opt::<Variant>(&args.variant)? {
        config.demons.variant = v;
    }
    if let Some(tau) = args.tau {
        config.kernel.tau = tau;
    }
    if let Some(k) = args.k {
        config.segmentation.k = k;
    }
    if let Some(seed) = args.seed {
        config.segmentation.seed = seed;
    }
    if let Some(window) = args.window {
        config.segmentation.window = window;
    }
    let input = required_input(&args.input, &config)?;
    let out = required_out(&args.out, &config)?;

    let t0 = Instant::now();
    let img = artifacts::read_input_image(&input)?;
    let (params, _) = config.demons.resolve();
    let seg_config = SegmentConfig {
        method: config.partition.method,
        s0: config.partition.s0,
        kernel: config.kernel.kind,
        tau: config.kernel.tau,
        demons: params,
        normalized: config.normalized,
        sigma_c: config.segmentation.sigma_c,
        window: config.segmentation.window,
        k: config.segmentation.k,
        seed: config.segmentation.seed,
    };
    let seg = segment(&img, &seg_config)?;
    artifacts::write_segmentation_png(&out, &seg)?;
    let report = SegmentReport {
        k: seg.k,
        cost: seg.cost,
        cluster_sizes: seg.cluster_sizes(),
        config: config.clone(),
    };
    std::fs::write(
        out.with_extension("json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        artifacts::write_manifest(dir, "segment", &config, t0.elapsed().as_secs_f64())?;
    }
    println!(
        "segment: k={} cost {:.3} -> {}",
        seg.k,
        seg.cost,
        out.display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs, config_path: Option<PathBuf>) -> Result<()> {
    let file = match &config_path {
        Some(path) => {
            artifacts::require_exists(path, "config file")?;
            toml::from_str::<BenchFileConfig>(&std::fs::read_to_string(path)?)
                .map_err(|e| EwtError::Config(e.to_string()))?
        }
        None => BenchFileConfig::default(),
    };
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from("report.csv"));

    let t0 = Instant::now();
    let (params, auto) = file.demons.resolve();
    let config = BenchConfig {
        seed: file.seed,
        size: file.size,
        s0: file.s0,
        variants: file.variants.clone(),
        partitions: file.partitions.clone(),
        kernels: file.kernels.clone(),
        taus: file.taus.clone(),
        demons: params,
        auto_select: auto,
    };
    let report = run_benchmark(&config);
    std::fs::write(&out, report.to_csv())?;
    let json_path = out.with_extension("json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        artifacts::write_manifest(dir, "bench", &file, t0.elapsed().as_secs_f64())?;
    }
    println!("bench: {} rows -> {}", report.rows.len(), out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let config = PipelineConfig::default();
        let text = toml::to_string(&config).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.kernel.tau, 0.2);
        assert_eq!(back.partition.s0, 0.8);
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_key_name() {
        let err = toml::from_str::<PipelineConfig>("sigma_typo = 1.0").unwrap_err();
        assert!(err.to_string().contains("sigma_typo"));
        let err =
            toml::from_str::<PipelineConfig>("[demons]\nsigma_dd = 0.3").unwrap_err();
        assert!(err.to_string().contains("sigma_dd"));
    }

    #[test]
    fn auto_keyword_parses() {
        let config: PipelineConfig =
            toml::from_str("[demons]\nsigma_d = \"auto\"\nn_level = 4").unwrap();
        let (params, auto) = config.demons.resolve();
        assert!(auto);
        assert_eq!(params.n_level, 4);
        assert_eq!(params.sigma_d, DemonsParams::default().sigma_d);

        let config: PipelineConfig = toml::from_str("[demons]\nsigma_d = 0.35").unwrap();
        let (params, auto) = config.demons.resolve();
        assert!(!auto);
        assert_eq!(params.sigma_d, 0.35);
    }

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(exit_code_for(&EwtError::Config("x".into())), 2);
        assert_eq!(exit_code_for(&EwtError::InvalidParameter("x".into())), 2);
        assert_eq!(exit_code_for(&EwtError::Numeric("x".into())), 3);
        assert_eq!(exit_code_for(&EwtError::NonFinite("x")), 3);
    }
}
