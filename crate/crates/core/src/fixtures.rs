//! Seeded random problem fixtures for the verification suites.
//!
//! Potentials have the admissible shape V = a(y) + x²·b(y) + x³·d(y) + x⁴·c(y)
//! with y-degrees ≤ 3 (so the invariant-plane hypothesis holds by
//! construction, while the x³ term breaks the transverse reflection symmetry),
//! a confining well on the y-axis, and energies that keep the libration well
//! inside it. Deformations are sums of plane-preserving monomials, each with
//! total (x,pₓ)-degree ≥ 2 or depending on (y,p_y) only.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomProblem {
    pub v_src: String,
    pub f_src: Option<String>,
    pub e0: f64,
    pub eps0: f64,
}

fn poly_in_y(rng: &mut ChaCha8Rng, c0: (f64, f64), c1: (f64, f64), c2: (f64, f64)) -> String {
    let a0 = rng.gen_range(c0.0..c0.1);
    let a1 = rng.gen_range(c1.0..c1.1);
    let a2 = rng.gen_range(c2.0..c2.1);
    format!("({a0:?} + {a1:?}*y + {a2:?}*y^2)")
}

/// A random admissible potential (optionally with a deformation) and an
/// energy offset inside the well.
pub fn random_problem(seed: u64, with_deformation: bool) -> RandomProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = rng.gen_range(0.8..1.25);
    let a3 = rng.gen_range(-0.15..0.15);
    let a4 = rng.gen_range(0.05..0.3);
    let b = poly_in_y(&mut rng, (0.5, 1.4), (-0.35, 0.35), (-0.3, 0.3));
    let d = poly_in_y(&mut rng, (-0.25, 0.25), (-0.2, 0.2), (0.0, 1e-9));
    let c = poly_in_y(&mut rng, (-0.2, 0.2), (-0.15, 0.15), (0.0, 1e-9));
    let v_src = format!(
        "{:?}*y^2 + {a3:?}*y^3 + {a4:?}*y^4 + 0.5*x^2*{b} + x^3*{d} + x^4*{c}",
        0.5 * alpha
    );
    let f_src = with_deformation.then(|| {
        let f1 = rng.gen_range(-0.3..0.3);
        let f2 = rng.gen_range(-0.25..0.25);
        let f3 = rng.gen_range(-0.3..0.3);
        let g = poly_in_y(&mut rng, (-0.35, 0.35), (-0.3, 0.3), (0.0, 1e-9));
        let g2 = rng.gen_range(-0.3..0.3);
        let h = poly_in_y(&mut rng, (-0.3, 0.3), (-0.25, 0.25), (0.0, 1e-9));
        let g3 = rng.gen_range(-0.25..0.25);
        format!(
            "{f1:?}*y^2 + {f2:?}*y^3 + {f3:?}*y*py^2 + x^2*{g} + {g2:?}*x*px*y + px^2*{h} + {g3:?}*x^2*py"
        )
    });
    let eps0 = rng.gen_range(0.25..0.5);
    RandomProblem {
        v_src,
        f_src,
        e0: 0.0,
        eps0,
    }
}
