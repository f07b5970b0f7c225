//! Why strided convolutions mislead on high-frequency input, and what the
//! blur-then-sample replacement block does about it.
//!
//! A +-1 checkerboard is the highest representable frequency. Sampling
//! every other pixel keeps a single phase — a constant +1 (or -1) image —
//! so all of its energy is aliased. Blurring first removes the
//! unrepresentable mode before the sampling step.
//!
//! Run with: cargo run --example antialias_demo

use lowfreq::filters::PaddingMode;
use lowfreq::image::Image;
use lowfreq::lfm::{rsl_block_forward, LfmConfig};
use lowfreq::tensor::Tensor;

fn main() -> lowfreq::Result<()> {
    let cb = Image::checkerboard(8, 8);
    println!("input: 8x8 checkerboard, mean {:.3}, energy {:.1}", cb.mean(), cb.energy());

    let naive = Image::from_fn(4, 4, |y, x| cb.get(2 * y, 2 * x));
    println!(
        "\nnaive stride-2 subsample: constant {:+.1} image, energy {:.1} (pure aliasing)",
        naive.get(0, 0),
        naive.energy()
    );

    let cfg = LfmConfig { padding: PaddingMode::Circular, stride: 2, ..LfmConfig::default() };
    let out = rsl_block_forward(&Tensor::from_image(&cb), &[1.0], &[0.0], 1, &cfg)?
        .plane_image(0, 0);
    println!(
        "blur-then-sample block:   near-zero image, energy {:.2e} ({:.4}% of naive)",
        out.energy(),
        100.0 * out.energy() / naive.energy()
    );
    println!("\nthe replacement block keeps {:.2e} of the aliased energy", out.energy());
    Ok(())
}
