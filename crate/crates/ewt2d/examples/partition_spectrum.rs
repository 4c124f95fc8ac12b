//! Detects harmonic modes of the synthetic toy image and writes its log
//! spectrum plus Voronoi and watershed partitions of the Fourier plane.

use std::path::PathBuf;

use ewt2d::grid::io::{write_gray_png, write_labels_png};
use ewt2d::analysis::toy_image;
use ewt2d::partition::{detect_modes, log_spectrum, voronoi_partition, watershed_partition};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from("target/examples/partition");
    std::fs::create_dir_all(&out)?;

    let img = toy_image(42);
    write_gray_png(&out.join("toy.png"), &img)?;

    let spec = log_spectrum(&img)?;
    write_gray_png(&out.join("log_spectrum.png"), &spec)?;

    let modes = detect_modes(&spec, 0.8)?;
    println!("detected {} mode centers (origin included):", modes.len());
    for (c, p) in modes.centers.iter().zip(&modes.persistence) {
        println!("  {:?} persistence {p}", c);
    }

    for (name, part) in [
        ("voronoi", voronoi_partition(&modes)?),
        ("watershed", watershed_partition(&spec, &modes)?),
    ] {
        let path = out.join(format!("{name}_labels.png"));
        write_labels_png(&path, &part.labels, part.grid.width, part.grid.height)?;
        println!(
            "{name}: {} regions, mirror symmetric: {} -> {}",
            part.pairs.len(),
            part.is_mirror_symmetric(),
            path.display()
        );
    }
    Ok(())
}
