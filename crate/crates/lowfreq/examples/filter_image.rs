//! Low-pass and high-pass an image, and show where the energy goes.
//!
//! Run with: cargo run --example filter_image

use lowfreq::filters::{gaussian_kernel, highpass, lowpass, Normalization, PaddingMode};
use lowfreq::image::Image;
use lowfreq::synthdata::render_shape_at;
use lowfreq::tensorio::write_pgm;

fn main() -> lowfreq::Result<()> {
    // The truncated Gaussian kernel behind every filter here.
    let kernel = gaussian_kernel(3, Normalization::UnitSum)?;
    println!("3x3 unit-sum Gaussian taps (sigma = 1):");
    for row in 0..3 {
        println!(
            "  {:.6}  {:.6}  {:.6}",
            kernel.tap(row, 0),
            kernel.tap(row, 1),
            kernel.tap(row, 2)
        );
    }

    // A clean shape plus a burst of single-pixel texture.
    let shape = render_shape_at(2, 64, (32.0, 32.0), 1.6);
    let textured = Image::from_fn(64, 64, |y, x| {
        let t = if (y + x) % 2 == 0 { 0.12 } else { -0.12 };
        (shape.get(y, x) + t).clamp(0.0, 1.0)
    });

    let low = lowpass(&textured, 3, PaddingMode::Reflect)?;
    let high = highpass(&textured, 3, PaddingMode::Reflect)?;

    println!("\ninput energy      {:10.3}", textured.energy());
    println!("lowpass energy    {:10.3}", low.energy());
    println!("highpass energy   {:10.3}", high.energy());
    println!("reassembly error  {:10.3e}", low.add(&high)?.max_abs_diff(&textured));

    let dir = std::env::temp_dir().join("lowfreq-filter-example");
    std::fs::create_dir_all(&dir)?;
    write_pgm(&dir.join("input.pgm"), &textured)?;
    write_pgm(&dir.join("lowpass.pgm"), &low)?;
    // Mid-gray encodes zero, as the CLI does for high-pass output.
    write_pgm(&dir.join("highpass.pgm"), &high.map(|v| v + 0.5))?;
    println!("\nwrote input.pgm, lowpass.pgm, highpass.pgm to {}", dir.display());
    Ok(())
}
