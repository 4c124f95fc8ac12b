//! On-disk artifact layout shared by the subcommands: partitions, fields,
//! banks, coefficients, segmentations and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demons::{MappingEstimate, RegionRecord};
use crate::error::{EwtError, Result};
use crate::ewt::{CoefficientSet, FilterBank};
use crate::grid::io::{
    read_field, read_labels_png, read_raster_f32, read_raster_f64, write_field, write_labels_png,
    write_raster_f32, write_raster_f64,
};
use crate::grid::{FrequencyGrid, Image};
use crate::kernels::{KernelKind, KernelSpec};
use crate::partition::{Partition, PartitionMeta};
use crate::segmentation::Segmentation;

/// Fixed palette for segmentation previews (labels 1..=8 cycle).
pub const SEGMENT_PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [128, 128, 128],
];

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Run manifest written next to every subcommand's artifacts.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub config_hash: String,
    pub seconds: f64,
}

/// SHA-256 hex digest of the effective configuration's JSON rendering.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let json = serde_json::to_string(config)?;
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

pub fn write_manifest<T: Serialize>(
    dir: &Path,
    command: &str,
    config: &T,
    seconds: f64,
) -> Result<()> {
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: config_hash(config)?,
        seconds,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn save_partition(dir: &Path, partition: &Partition, s0: f64) -> Result<()> {
    ensure_dir(dir)?;
    write_labels_png(
        &dir.join("labels.png"),
        &partition.labels,
        partition.grid.width,
        partition.grid.height,
    )?;
    let meta = PartitionMeta {
        pairs: partition.pairs.clone(),
        centers: partition.centers.clone(),
        s0,
    };
    fs::write(
        dir.join("partition.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    Ok(())
}

pub fn load_partition(dir: &Path) -> Result<(Partition, f64)> {
    let (labels, w, h) = read_labels_png(&dir.join("labels.png"))?;
    let meta: PartitionMeta = serde_json::from_str(&fs::read_to_string(
        dir.join("partition.json"),
    )?)?;
    Ok((
        Partition {
            grid: FrequencyGrid::new(w, h),
            labels,
            pairs: meta.pairs,
            centers: meta.centers,
        },
        meta.s0,
    ))
}

pub fn save_registrations(
    dir: &Path,
    regs: &[(i32, MappingEstimate, RegionRecord)],
) -> Result<()> {
    ensure_dir(dir)?;
    for (n, est, record) in regs {
        write_field(&dir.join(format!("region_{n}.ewtf")), &est.field)?;
        fs::write(
            dir.join(format!("region_{n}.json")),
            serde_json::to_string_pretty(record)?,
        )?;
    }
    Ok(())
}

/// Loads every `region_<n>.ewtf` from a registration directory.
pub fn load_estimates(dir: &Path) -> Result<Vec<(i32, MappingEstimate)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(stem) = name.strip_prefix("region_").and_then(|s| s.strip_suffix(".ewtf"))
        else {
            continue;
        };
        let n: i32 = stem.parse().map_err(|_| {
            EwtError::InvalidParameter(format!("bad region field filename '{name}'"))
        })?;
        let field = read_field(&path)?;
        let mut est = MappingEstimate::identity(field.width(), field.height());
        est.field = field;
        out.push((n, est));
    }
    if out.is_empty() {
        return Err(EwtError::InvalidParameter(format!(
            "no region_<n>.ewtf files in {}",
            dir.display()
        )));
    }
    out.sort_by_key(|&(n, _)| n);
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BankMeta {
    pub kernel: KernelKind,
    pub tau: f64,
    pub normalized: bool,
    pub width: usize,
    pub height: usize,
    pub labels: Vec<i32>,
}

pub fn save_bank(dir: &Path, bank: &FilterBank) -> Result<()> {
    ensure_dir(dir)?;
    let meta = BankMeta {
        kernel: bank.kernel.kind,
        tau: bank.kernel.tau,
        normalized: bank.normalized,
        width: bank.grid.width,
        height: bank.grid.height,
        labels: bank.filters.iter().map(|&(n, _)| n).collect(),
    };
    fs::write(dir.join("bank.json"), serde_json::to_string_pretty(&meta)?)?;
    for (n, filter) in &bank.filters {
        write_raster_f64(&dir.join(format!("filter_{n}.ewtr")), filter)?;
    }
    Ok(())
}

pub fn load_bank(dir: &Path) -> Result<FilterBank> {
    let meta: BankMeta =
        serde_json::from_str(&fs::read_to_string(dir.join("bank.json"))?)?;
    let grid = FrequencyGrid::new(meta.width, meta.height);
    let kernel = KernelSpec::new(meta.kernel, meta.tau)?;
    let mut filters = Vec::with_capacity(meta.labels.len());
    for n in &meta.labels {
        filters.push((*n, read_raster_f64(&dir.join(format!("filter_{n}.ewtr")))?));
    }
    FilterBank::from_filters(grid, kernel, meta.normalized, filters)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CoefficientIndex {
    pub labels: Vec<i32>,
    pub width: usize,
    pub height: usize,
}

pub fn save_coefficients(dir: &Path, coeffs: &CoefficientSet) -> Result<()> {
    ensure_dir(dir)?;
    let index = CoefficientIndex {
        labels: coeffs.bands.iter().map(|&(n, _)| n).collect(),
        width: coeffs.grid.width,
        height: coeffs.grid.height,
    };
    fs::write(
        dir.join("index.json"),
        serde_json::to_string_pretty(&index)?,
    )?;
    for (n, band) in &coeffs.bands {
        write_raster_f32(&dir.join(format!("coeff_{n}.ewtc")), band)?;
        crate::grid::io::write_gray_png(
            &dir.join(format!("coeff_{n}.png")),
            &band.rescale_unit(),
        )?;
    }
    Ok(())
}

pub fn load_coefficients(dir: &Path) -> Result<CoefficientSet> {
    let index: CoefficientIndex =
        serde_json::from_str(&fs::read_to_string(dir.join("index.json"))?)?;
    let mut bands = Vec::with_capacity(index.labels.len());
    for n in &index.labels {
        bands.push((*n, read_raster_f32(&dir.join(format!("coeff_{n}.ewtc")))?));
    }
    Ok(CoefficientSet {
        grid: FrequencyGrid::new(index.width, index.height),
        bands,
    })
}

/// Writes a segmentation as an RGB PNG with the fixed palette.
pub fn write_segmentation_png(path: &Path, seg: &Segmentation) -> Result<()> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_fn(seg.width as u32, seg.height as u32, |x, y| {
            let l = seg.label_at(x as usize, y as usize) as usize;
            Rgb(SEGMENT_PALETTE[(l - 1) % SEGMENT_PALETTE.len()])
        });
    buf.save(path)?;
    Ok(())
}

/// Resolves a path against an output directory, creating the directory.
pub fn prepare_out(out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    Ok(out.to_path_buf())
}

/// Missing-input guard with the path in the message.
pub fn require_exists(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        return Err(EwtError::Config(format!(
            "{what} not found: {}",
            path.display()
        )));
    }
    Ok(())
}

/// Reads a grayscale input image, reporting the path on failure.
pub fn read_input_image(path: &Path) -> Result<Image> {
    require_exists(path, "input image")?;
    crate::grid::io::read_gray(path)
}
