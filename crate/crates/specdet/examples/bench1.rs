use num_complex::Complex64;
use specdet::geometry::{Geometry, ModeBasis, PerturbationField};
use specdet::operators::{build_dirac_squared, build_laplace};
use std::f64::consts::PI;
use std::time::Instant;

fn main() {
    // d=2 N=32 Hermitian (criterion 3 workhorse)
    let g = Geometry::torus2(2.0 * PI, 1.0).unwrap();
    let b = ModeBasis::new(&g, 32).unwrap();
    let v = PerturbationField::linear_combination(&[
        (Complex64::new(1.0, 0.0), &PerturbationField::cosine([1, 0], 1.0)),
        (Complex64::new(1.0, 0.0), &PerturbationField::cosine([0, 1], 1.0)),
    ])
    .unwrap();
    let op = build_laplace(&g, &v, &b).unwrap();
    println!("matrix dim {}", op.matrix.nrows());
    let t0 = Instant::now();
    let e = specdet::operators::eigenvalues(&op).unwrap();
    println!("hermitian eig 4225: {:?} (min {})", t0.elapsed(), e[0].re);

    // d=1 fermionic N=512 general eig
    let gc = Geometry::circle(2.0 * PI, 0.5).unwrap();
    let bc = ModeBasis::new(&gc, 512).unwrap();
    let a = PerturbationField::cosine([1, 0], 1.0);
    let dsq = build_dirac_squared(&gc, 0.5, &a, &bc).unwrap();
    let t1 = Instant::now();
    let e2 = specdet::operators::eigenvalues(&dsq).unwrap();
    println!("general eig 1025: {:?} (min re {})", t1.elapsed(), e2[0].re);

    // d=1 N=512 Hermitian
    let v1 = PerturbationField::cosine([1, 0], 1.0);
    let op1 = build_laplace(&gc, &v1, &bc).unwrap();
    let t2 = Instant::now();
    let _e3 = specdet::operators::eigenvalues(&op1).unwrap();
    println!("hermitian eig 1025: {:?}", t2.elapsed());
}
