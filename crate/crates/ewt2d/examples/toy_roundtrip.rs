//! Full adaptive pipeline on the synthetic toy image: partition, demons
//! registration, filter bank, forward transform, dual-frame inverse.

use std::path::PathBuf;

use ewt2d::analysis::{format_db, partition_image, psnr, toy_image, PartitionMethod};
use ewt2d::demons::{register_partition, DemonsParams};
use ewt2d::ewt::{bank_from_registrations, forward, inverse};
use ewt2d::grid::io::write_gray_png;
use ewt2d::kernels::{KernelKind, KernelSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from("target/examples/roundtrip");
    std::fs::create_dir_all(&out)?;

    let img = toy_image(42);
    write_gray_png(&out.join("toy.png"), &img)?;

    let partition = partition_image(&img, PartitionMethod::Voronoi, 0.8)?;
    let regs = register_partition(&partition, KernelKind::Disk, &DemonsParams::default(), false)?;
    let estimates: Vec<_> = regs.into_iter().map(|(n, est, _)| (n, est)).collect();

    let kernel = KernelSpec::new(KernelKind::Disk, 0.2)?;
    let bank = bank_from_registrations(partition.grid, kernel, &estimates, false)?;
    println!(
        "bank: {} filters, coverage [{:.3}, {:.3}], holes {}",
        bank.len(),
        bank.diagnostics.min_coverage,
        bank.diagnostics.max_coverage,
        bank.diagnostics.holes,
    );

    let coeffs = forward(&img, &bank)?;
    for (n, band) in &coeffs.bands {
        write_gray_png(&out.join(format!("coeff_{n}.png")), &band.rescale_unit())?;
    }
    let rec = inverse(&coeffs, &bank)?;
    write_gray_png(&out.join("reconstruction.png"), &rec)?;
    println!(
        "round trip PSNR {} dB -> {}",
        format_db(psnr(&img, &rec)?),
        out.display()
    );
    Ok(())
}
