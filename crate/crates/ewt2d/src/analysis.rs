//! Assessment metrics (registration RMSE, reconstruction PSNR) and the
//! benchmark driver running the full pipeline over a configuration grid.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::demons::{register_partition, DemonsParams, Variant};
use crate::error::{EwtError, Result};
use crate::ewt::{bank_from_registrations, forward, inverse};
use crate::grid::{warp, DisplacementField, Image};
use crate::kernels::{KernelKind, KernelSpec};
use crate::partition::{
    detect_modes, log_spectrum, voronoi_partition, watershed_partition, Partition,
};

/// Partition method selector shared by the benchmark driver and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMethod {
    Voronoi,
    Watershed,
}

impl std::str::FromStr for PartitionMethod {
    type Err = EwtError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "voronoi" => Ok(PartitionMethod::Voronoi),
            "watershed" => Ok(PartitionMethod::Watershed),
            other => Err(EwtError::InvalidParameter(format!(
                "unknown partition method '{other}' (expected voronoi or watershed)"
            ))),
        }
    }
}

/// Builds a partition of an image's spectrum with the given method.
pub fn partition_image(img: &Image, method: PartitionMethod, s0: f64) -> Result<Partition> {
    let logspec = log_spectrum(img)?;
    let modes = detect_modes(&logspec, s0)?;
    match method {
        PartitionMethod::Voronoi => voronoi_partition(&modes),
        PartitionMethod::Watershed => watershed_partition(&logspec, &modes),
    }
}

/// Registration residual `(1 / sqrt(N)) || a - b o gamma ||_2` with
/// N = W*H: the warp applies to the second argument.
pub fn rmse_mapping(a: &Image, b: &Image, field: &DisplacementField) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(EwtError::DimensionMismatch {
            expected_w: a.width(),
            expected_h: a.height(),
            got_w: b.width(),
            got_h: b.height(),
        });
    }
    let warped = warp(b, field)?;
    let sum: f64 = a
        .as_slice()
        .iter()
        .zip(warped.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sum / (a.width() * a.height()) as f64).sqrt())
}

/// Peak signal-to-noise ratio in dB, `-10 log10(MSE)`, for images with
/// values in [0, 1]. Identical images return infinity.
pub fn psnr(f: &Image, g: &Image) -> Result<f64> {
    if !f.same_dims(g) {
        return Err(EwtError::DimensionMismatch {
            expected_w: f.width(),
            expected_h: f.height(),
            got_w: g.width(),
            got_h: g.height(),
        });
    }
    let mse: f64 = f
        .as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / (f.width() * f.height()) as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

/// Formats a dB value; infinity serializes as "inf".
pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

fn serialize_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_db(*v))
}

/// Synthetic benchmark image: four oriented cosine gratings plus a smooth
/// Gaussian blob, rescaled to [0, 1]. Fully determined by the seed.
pub fn toy_image(seed: u64) -> Image {
    toy_image_sized(seed, 256)
}

/// Smaller variant of [`toy_image`] for fast tests.
pub fn toy_image_sized(seed: u64, size: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Integer wave vectors scaled to the grid so the modes sit on exact
    // frequency bins, well separated from each other and the origin.
    let base: [(f64, f64); 4] = [(21.0, 5.0), (0.0, 34.0), (18.0, -18.0), (45.0, 11.0)];
    let scale = size as f64 / 256.0;
    let waves: Vec<(f64, f64, f64, f64)> = base
        .iter()
        .map(|&(kx, ky)| {
            let amp = 0.4 + 0.6 * rng.gen::<f64>();
            let phase = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            ((kx * scale).round(), (ky * scale).round(), amp, phase)
        })
        .collect();
    let bx = size as f64 * (0.4 + 0.2 * rng.gen::<f64>());
    let by = size as f64 * (0.4 + 0.2 * rng.gen::<f64>());
    let bsigma = size as f64 * 0.1;
    let bamp = 0.8 + 0.4 * rng.gen::<f64>();
    let n = size as f64;
    Image::from_fn(size, size, |x, y| {
        let mut v = 0.0;
        for &(kx, ky, amp, phase) in &waves {
            v += amp
                * (2.0 * std::f64::consts::PI * (kx * x as f64 + ky * y as f64) / n + phase).cos();
        }
        let dx = x as f64 - bx;
        let dy = y as f64 - by;
        v + bamp * (-(dx * dx + dy * dy) / (2.0 * bsigma * bsigma)).exp()
    })
    .rescale_unit()
}

/// One benchmark configuration row.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub variant: Variant,
    pub partition: PartitionMethod,
    pub kernel: KernelKind,
    pub tau: f64,
    pub normalized: bool,
    pub mean_rmse: f64,
    pub min_rmse: f64,
    pub max_rmse: f64,
    #[serde(serialize_with = "serialize_db")]
    pub psnr: f64,
    pub seconds_register: f64,
    pub seconds_roundtrip: f64,
    pub error: Option<String>,
}

/// Full benchmark output: configuration echo plus one row per combination.
#[derive(Debug, Clone, Serialize)]
pub struct AssessmentReport {
    pub seed: u64,
    pub size: usize,
    pub s0: f64,
    pub rows: Vec<BenchRow>,
}

impl AssessmentReport {
    /// CSV rendering with the benchmark column contract.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "variant,partition,kernel,tau,normalized,mean_rmse,min_rmse,max_rmse,psnr,seconds_register,seconds_roundtrip\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:?},{:?},{:?},{},{},{:.6},{:.6},{:.6},{},{:.3},{:.3}\n",
                r.variant,
                r.partition,
                r.kernel,
                r.tau,
                r.normalized,
                r.mean_rmse,
                r.min_rmse,
                r.max_rmse,
                format_db(r.psnr),
                r.seconds_register,
                r.seconds_roundtrip,
            ));
        }
        out
    }
}

/// Benchmark configuration grid.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub seed: u64,
    pub size: usize,
    pub s0: f64,
    pub variants: Vec<Variant>,
    pub partitions: Vec<PartitionMethod>,
    pub kernels: Vec<KernelKind>,
    pub taus: Vec<f64>,
    pub demons: DemonsParams,
    pub auto_select: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            size: 256,
            s0: 0.8,
            variants: vec![Variant::Additive],
            partitions: vec![PartitionMethod::Voronoi],
            kernels: vec![KernelKind::Disk],
            taus: vec![0.2],
            demons: DemonsParams::default(),
            auto_select: false,
        }
    }
}

/// Runs partition -> registration -> bank -> round-trip over the whole
/// configuration grid. Stage failures are recorded in the row and the run
/// continues.
pub fn run_benchmark(config: &BenchConfig) -> AssessmentReport {
    let img = toy_image_sized(config.seed, config.size);
    let mut rows = Vec::new();

    for &method in &config.partitions {
        let partition = match partition_image(&img, method, config.s0) {
            Ok(p) => p,
            Err(e) => {
                for &variant in &config.variants {
                    for &kernel in &config.kernels {
                        for &tau in &config.taus {
                            for normalized in [true, false] {
                                rows.push(failed_row(
                                    variant,
                                    method,
                                    kernel,
                                    tau,
                                    normalized,
                                    &e.to_string(),
                                ));
                            }
                        }
                    }
                }
                continue;
            }
        };
        for &variant in &config.variants {
            for &kernel in &config.kernels {
                let mut params = config.demons;
                params.variant = variant;
                let t0 = Instant::now();
                let regs = match register_partition(&partition, kernel, &params, config.auto_select)
                {
                    Ok(r) => r,
                    Err(e) => {
                        for &tau in &config.taus {
                            for normalized in [true, false] {
                                rows.push(failed_row(
                                    variant,
                                    method,
                                    kernel,
                                    tau,
                                    normalized,
                                    &e.to_string(),
                                ));
                            }
                        }
                        continue;
                    }
                };
                let seconds_register = t0.elapsed().as_secs_f64();
                let rmses: Vec<f64> = regs.iter().map(|(_, _, rec)| rec.rmse).collect();
                let mean_rmse = rmses.iter().sum::<f64>() / rmses.len() as f64;
                let min_rmse = rmses.iter().copied().fold(f64::INFINITY, f64::min);
                let max_rmse = rmses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let estimates: Vec<_> =
                    regs.iter().map(|(n, est, _)| (*n, est.clone())).collect();

                for &tau in &config.taus {
                    for normalized in [true, false] {
                        let t1 = Instant::now();
                        let result = (|| -> Result<f64> {
                            let spec = KernelSpec::new(kernel, tau)?;
                            let bank = bank_from_registrations(
                                partition.grid,
                                spec,
                                &estimates,
                                normalized,
                            )?;
                            let rec = inverse(&forward(&img, &bank)?, &bank)?;
                            psnr(&img, &rec)
                        })();
                        let seconds_roundtrip = t1.elapsed().as_secs_f64();
                        match result {
                            Ok(p) => rows.push(BenchRow {
                                variant,
                                partition: method,
                                kernel,
                                tau,
                                normalized,
                                mean_rmse,
                                min_rmse,
                                max_rmse,
                                psnr: p,
                                seconds_register,
                                seconds_roundtrip,
                                error: None,
                            }),
                            Err(e) => {
                                let mut row = failed_row(
                                    variant,
                                    method,
                                    kernel,
                                    tau,
                                    normalized,
                                    &e.to_string(),
                                );
                                row.mean_rmse = mean_rmse;
                                row.min_rmse = min_rmse;
                                row.max_rmse = max_rmse;
                                row.seconds_register = seconds_register;
                                row.seconds_roundtrip = seconds_roundtrip;
                                rows.push(row);
                            }
                        }
                    }
                }
            }
        }
    }
    AssessmentReport {
        seed: config.seed,
        size: config.size,
        s0: config.s0,
        rows,
    }
}

fn failed_row(
    variant: Variant,
    partition: PartitionMethod,
    kernel: KernelKind,
    tau: f64,
    normalized: bool,
    error: &str,
) -> BenchRow {
    BenchRow {
        variant,
        partition,
        kernel,
        tau,
        normalized,
        mean_rmse: f64::NAN,
        min_rmse: f64::NAN,
        max_rmse: f64::NAN,
        psnr: f64::NAN,
        seconds_register: 0.0,
        seconds_roundtrip: 0.0,
        error: Some(error.to_string()),
    }
}
