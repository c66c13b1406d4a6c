use std::time::Instant;
use transmod::domains::Domain;
use transmod::geometry::{Point2, Window};
use transmod::modulus::{solve_modulus, SolveOptions};
use transmod::quotient::{discretize, CurveFamilySpec, Neighborhood};

fn main() {
    let target = 2.0 * std::f64::consts::PI;
    for (h, nb, name) in [
        (1.0 / 50.0, Neighborhood::N8, "N8"),
        (1.0 / 50.0, Neighborhood::N16, "N16"),
        (1.0 / 100.0, Neighborhood::N8, "N8"),
        (1.0 / 100.0, Neighborhood::N16, "N16"),
    ] {
        let e = std::f64::consts::E;
        let w = Window::square(Point2::new(0.0, 0.0), e + 3.0 * h);
        let g = discretize(&Domain::empty(), w, h, nb).unwrap();
        let spec = CurveFamilySpec::ring(Point2::new(0.0, 0.0), 1.0, e);
        let t0 = Instant::now();
        let res = solve_modulus(&g, &spec, &SolveOptions::default()).unwrap();
        println!(
            "h=1/{:<4} {name:>4}: upper={:.4} lower={:.4} ({:+.2}% vs 2pi) paths={} status={:?} {:.1?}",
            (1.0 / h).round() as i64,
            res.upper_value,
            res.lower_value,
            (res.upper_value / target - 1.0) * 100.0,
            res.active_paths.len(),
            res.status,
            t0.elapsed()
        );
    }
}
