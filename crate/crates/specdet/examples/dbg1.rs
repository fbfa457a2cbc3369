use num_complex::Complex64;
use specdet::det::fredholm_det;
use specdet::geometry::{Geometry, ModeBasis, PerturbationField};
use specdet::linalg;
use specdet::operators::{build_laplace, green_compose};
use std::f64::consts::PI;

fn main() {
    let g = Geometry::circle(2.0 * PI, 1.0).unwrap();
    let b = ModeBasis::new(&g, 32).unwrap();
    let v = PerturbationField::cosine([1, 0], 2.0);
    let free = build_laplace(&g, &PerturbationField::zero(), &b).unwrap();
    let pert = build_laplace(&g, &v, &b).unwrap();
    let k = green_compose(&free, &v).unwrap();
    let det_f = fredholm_det(&k).unwrap();
    println!("det_F(Id+GV) = {}", det_f.value);

    // direct route: det(Delta+V)/det(Delta) over truncated eigenvalues
    let ep = specdet::operators::eigenvalues(&pert).unwrap();
    let e0 = specdet::operators::eigenvalues(&free).unwrap();
    let mut logr = Complex64::new(0.0, 0.0);
    for (a, b) in ep.iter().zip(e0.iter()) {
        logr += (a / b).ln();
    }
    println!("det ratio direct = {}", logr.exp());
    println!("lowest eigenvalues of Delta+V: {:?}", &ep[..4]);

    // eigenvalues of K = G V
    let ek = linalg::eigenvalues_general(&k).unwrap();
    let minre = ek.iter().map(|z| z.re).fold(f64::MAX, f64::min);
    println!("eigs of K near -1? min re = {minre}");
    for z in ek.iter().filter(|z| (z.re + 1.0).abs() < 0.3) {
        println!("  close: {z}");
    }
}
