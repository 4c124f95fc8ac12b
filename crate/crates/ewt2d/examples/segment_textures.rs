//! Texture segmentation of a two-grating composite: empirical wavelet
//! coefficients, local energy features, L1 k-means.

use std::path::PathBuf;

use ewt2d::cli::artifacts::write_segmentation_png;
use ewt2d::grid::io::write_gray_png;
use ewt2d::grid::Image;
use ewt2d::segmentation::{segment, SegmentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from("target/examples/segment");
    std::fs::create_dir_all(&out)?;

    // Left half: vertical grating; right half: horizontal grating.
    let tau = 2.0 * std::f64::consts::PI;
    let img = Image::from_fn(256, 256, |x, y| {
        if x < 128 {
            0.5 + 0.4 * (tau * 48.0 * x as f64 / 256.0).cos()
        } else {
            0.5 + 0.4 * (tau * 48.0 * y as f64 / 256.0).cos()
        }
    });
    write_gray_png(&out.join("input.png"), &img)?;

    let config = SegmentConfig {
        k: 2,
        ..Default::default()
    };
    let seg = segment(&img, &config)?;
    write_segmentation_png(&out.join("segmentation.png"), &seg)?;
    println!(
        "k = {}, cost {:.3}, cluster sizes {:?} -> {}",
        seg.k,
        seg.cost,
        seg.cluster_sizes(),
        out.join("segmentation.png").display()
    );
    Ok(())
}
