//! Renders the analytic disk and square band-pass kernels for several
//! transition widths into `target/examples/kernels/`.

use std::path::PathBuf;

use ewt2d::grid::io::write_gray_png;
use ewt2d::grid::Image;
use ewt2d::kernels::{KernelKind, KernelSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from("target/examples/kernels");
    std::fs::create_dir_all(&out)?;

    let size = 256usize;
    for kind in [KernelKind::Disk, KernelKind::Square] {
        for tau in [0.05, 0.2, 0.4] {
            let kernel = KernelSpec::new(kind, tau)?;
            // Sample the kernel over [-0.75, 0.75]^2 so the transition band
            // is visible around the support boundary at 1/2.
            let img = Image::from_fn(size, size, |x, y| {
                let u = 1.5 * (x as f64 / (size - 1) as f64 - 0.5);
                let v = 1.5 * (y as f64 / (size - 1) as f64 - 0.5);
                kernel.eval((u, v))
            });
            let name = format!("{:?}_tau{:.2}.png", kind, tau).to_lowercase();
            write_gray_png(&out.join(&name), &img)?;
            println!("wrote {}", out.join(&name).display());
        }
    }
    Ok(())
}
