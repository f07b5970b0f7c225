//! Transform images to the frequency domain and report radial band
//! energies: shapes concentrate low, checkerboards sit at the top.
//!
//! Run with: cargo run --example spectrum_report

use lowfreq::image::Image;
use lowfreq::spectral::{dft2, idft2, spectrum_stats};
use lowfreq::synthdata::render_shape_at;

fn report(name: &str, image: &Image) -> lowfreq::Result<()> {
    let field = dft2(image);
    let stats = spectrum_stats(&field, 8)?;
    println!("{name}:");
    println!("  dc value     {:.3}", stats.dc_value);
    println!("  total energy {:.3}", stats.total_energy);
    for (i, band) in stats.bands.iter().enumerate() {
        let share = 100.0 * band.energy / stats.total_energy;
        let bar = "#".repeat((share * 0.4).round() as usize);
        println!("  band {i} [{:.3}, {:.3})  {share:6.2}%  {bar}", band.lo, band.hi);
    }
    let (_, residual) = idft2(&field);
    println!("  inverse imaginary residual {residual:.2e}\n");
    Ok(())
}

fn main() -> lowfreq::Result<()> {
    let disk = render_shape_at(0, 32, (16.0, 16.0), 1.0);
    report("filled disk (shape content is low-frequency)", &disk)?;

    let checkerboard = Image::from_fn(32, 32, |y, x| if (y + x) % 2 == 0 { 1.0 } else { 0.0 });
    report("checkerboard (all structure at the highest frequency)", &checkerboard)?;
    Ok(())
}
