use num_complex::Complex64;
use specdet::det::zeta::{fit_heat_coefficients, SpectrumMeta, ZetaConfig};
use specdet::geometry::{Geometry, ModeBasis, PerturbationField};
use specdet::operators::{build_laplace, eigenvalues};
use std::f64::consts::PI;

fn main() {
    let g = Geometry::circle(2.0 * PI, 1.0).unwrap();
    let b = ModeBasis::new(&g, 128).unwrap();
    let v = PerturbationField::cosine([1, 0], 2.0);
    let op = build_laplace(&g, &v, &b).unwrap();
    let eigs = eigenvalues(&op).unwrap();
    let meta = SpectrumMeta::for_operator(&op);
    println!("lowest eigs: {:?}", &eigs[..4]);
    let heatable: Vec<Complex64> = eigs.iter().copied().filter(|l| l.re > 0.0).collect();
    println!("heatable: {} of {}", heatable.len(), eigs.len());
    for j in [4usize, 5, 6, 7] {
        let cfg = ZetaConfig { n_heat_coeffs: j, residual_threshold: 1.0, ..ZetaConfig::precise(1) };
        match fit_heat_coefficients(&heatable, &meta, &cfg) {
            Ok(h) => println!("J={j}: window {:?} residual {:.3e} coeffs {:?}", h.window, h.residual,
                h.coeffs.iter().map(|c| format!("{:.4e}", c.re)).collect::<Vec<_>>()),
            Err(e) => println!("J={j}: {e}"),
        }
    }
}
