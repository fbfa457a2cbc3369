//! scratch calibration runs (deleted before release)
use num_complex::Complex64;
use specdet::det::zeta::{
    free_circle_det_zeta, zeta_det_from_spectrum, SpectrumMeta, ZetaConfig,
};
use specdet::det::{monodromy::zeta_det_monodromy, rp_transform, zeta::zeta_det_mellin};
use specdet::geometry::{Geometry, ModeBasis, PerturbationField};
use specdet::linalg::{max_abs, CMat};
use specdet::operators::build_laplace;
use std::f64::consts::PI;

fn main() {
    // rp_transform(2, 0)
    let z = CMat::zeros(3, 3);
    let r = rp_transform(2, &z);
    println!("rp(2, 0) max abs = {:.3e}", max_abs(&r));
    for i in 0..3 {
        for j in 0..3 {
            print!("{:+.2e} ", r[(i, j)].norm());
        }
        println!();
    }

    // free circle sweep: N, J, w1 policy
    let mass = 0.5;
    let want = free_circle_det_zeta(mass, 2.0 * PI);
    println!("\nfree circle m=0.5, want {want:.12}");
    for n in [128u32, 256, 512] {
        let g = Geometry::circle(2.0 * PI, mass).unwrap();
        let b = ModeBasis::new(&g, n).unwrap();
        let op = build_laplace(&g, &PerturbationField::zero(), &b).unwrap();
        let eigs = specdet::operators::eigenvalues(&op).unwrap();
        let meta = SpectrumMeta::for_operator(&op);
        let w0 = ((meta.count as f64 * 1e12).ln() + 4.0) / (0.95 * meta.lambda_dropped_min);
        for j in [2usize, 3, 4, 5, 6] {
            for w1_fac in [8.0, 16.0, 32.0, 64.0, 100.0] {
                let w1 = (w0 * w1_fac).min(0.33);
                let cfg = ZetaConfig {
                    cut_angle: PI,
                    split_point: (w0 * w1).sqrt(),
                    n_heat_coeffs: j,
                    fit_window: Some((w0, w1)),
                    fit_samples: 48,
                    residual_threshold: 1.0,
                };
                match zeta_det_from_spectrum(&eigs, &meta, &cfg) {
                    Ok(d) => {
                        let rel = (d.value.re - want).abs() / want;
                        println!(
                            "N={n:4} J={j} w=[{w0:.2e},{w1:.2e}] rel={rel:.2e} est={:.2e}",
                            d.error_estimate
                        );
                    }
                    Err(e) => println!("N={n:4} J={j} w1fac={w1_fac}: {e}"),
                }
            }
        }
    }

    // perturbed d=1 ratio vs monodromy
    println!("\nperturbed: V = cos x, m = 1, ratio vs monodromy");
    let g = Geometry::circle(2.0 * PI, 1.0).unwrap();
    let v = PerturbationField::cosine([1, 0], 1.0);
    let md = zeta_det_monodromy(&v, &g, 1e-12).unwrap();
    println!("monodromy ratio = {:.12}", md.ratio);
    for n in [128u32, 256, 512] {
        let b = ModeBasis::new(&g, n).unwrap();
        let op_v = build_laplace(&g, &v, &b).unwrap();
        let op_0 = build_laplace(&g, &PerturbationField::zero(), &b).unwrap();
        for j in [3usize, 4, 5] {
            let cfg = ZetaConfig::precise(1).with_coeffs(j);
            let dv = zeta_det_mellin(&op_v, &cfg).unwrap();
            let d0 = zeta_det_mellin(&op_0, &cfg).unwrap();
            let ratio = (dv.log_value - d0.log_value).exp().re;
            let rel = (ratio - md.ratio).abs() / md.ratio;
            println!("N={n:4} J={j}: ratio={ratio:.10} rel={rel:.2e}");
        }
    }

    // d=2 free torus: det_zeta known? use internal-consistency N-doubling
    println!("\nfree T2 m=1: N-convergence of log det");
    let mut prev: Option<Complex64> = None;
    for n in [16u32, 24, 32] {
        let g = Geometry::torus2(2.0 * PI, 1.0).unwrap();
        let b = ModeBasis::new(&g, n).unwrap();
        let op = build_laplace(&g, &PerturbationField::zero(), &b).unwrap();
        let meta = SpectrumMeta::for_operator(&op);
        let w0 = ((meta.count as f64 * 1e12).ln() + 4.0) / (0.95 * meta.lambda_dropped_min);
        let w1 = (100.0 * w0).min(meta.small_time_cap);
        for j in [3usize, 4, 5, 6] {
            let cfg = ZetaConfig {
                cut_angle: PI,
                split_point: (w0 * w1).sqrt(),
                n_heat_coeffs: j,
                fit_window: Some((w0, w1)),
                fit_samples: 48,
                residual_threshold: 1.0,
            };
            match zeta_det_mellin(&op, &cfg) {
                Ok(d) => {
                    println!(
                        "N={n} J={j} w=[{w0:.3e},{w1:.3e}] logdet={:+.10} est={:.2e} prev_diff={:.2e}",
                        d.log_value.re,
                        d.error_estimate,
                        prev.map(|p| (d.log_value - p).norm()).unwrap_or(f64::NAN)
                    );
                    if j == 6 {
                        prev = Some(d.log_value);
                    }
                }
                Err(e) => println!("N={n} J={j}: {e}"),
            }
        }
    }
}
