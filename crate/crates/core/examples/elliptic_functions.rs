//! Complete elliptic integral `K(m)` and Jacobi `sn(u, m)` over the negative
//! parameters used by the oscillating pairing amplitude, with the continuum
//! `atanh` on its branch cut.
//!
//! ```text
//! cargo run --release --example elliptic_functions
//! ```

use num_complex::Complex64;

use bcs_quench::special::{complex_atanh, elliptic_k, jacobi_sn};

fn main() -> bcs_quench::Result<()> {
    println!("{:>6} {:>18} {:>12} {:>12}", "m", "K(m)", "sn(K/2, m)", "sn(4K, m)");
    for m in [-20.0, -4.0, -1.0, -0.25, 0.0, 0.5, 0.9, 0.99] {
        let k = elliptic_k(m)?;
        println!(
            "{m:6.2} {k:18.15} {:12.8} {:12.2e}",
            jacobi_sn(0.5 * k, m)?,
            jacobi_sn(4.0 * k, m)?
        );
    }
    println!();
    for z in [
        Complex64::new(0.5, 0.0),
        Complex64::new(2.0, 1e-12),
        Complex64::new(2.0, -1e-12),
        Complex64::new(0.0, 3.0),
    ] {
        let a = complex_atanh(z)?;
        println!("atanh({:+.1}{:+.0e}i) = {:+.6}{:+.6}i", z.re, z.im, a.re, a.im);
    }
    Ok(())
}
