//! Brute-force route: inhomogeneities by full tensor contraction of the
//! vector-field derivatives, and table solves by explicit variation of
//! constants quadrature.
//!
//! Nothing here knows the parity or block lemmas: every vector-field partial
//! is evaluated from its symbolic tree (including the ones that vanish on the
//! invariant plane), and the contraction runs over all index combinations.
//! This is the second, independent route the verification tests compare the
//! specialized builders against, and the one used to certify that every
//! ZERO-tagged entry really is zero.

use super::{CoeffSet, Entry, FlowTables, Pair};
use crate::error::Result;
use crate::grid::GridFn;
use crate::prereq::OrbitPrerequisites;

/// Vector-field partial v^r with respect to directions `dirs` (over 1..=5),
/// evaluated along the orbit at node `k`. The vector field is
/// v¹ = pₓ + δ·F_px, v² = p_y + δ·F_py, v³ = −V_x − δ·F_x, v⁴ = −V_y − δ·F_y,
/// with δ the fifth coordinate; on the orbit δ = 0.
fn v_partial_node(c: &CoeffSet, r: u8, dirs: &[u8], k: usize) -> f64 {
    let fives = dirs.iter().filter(|&&i| i == 5).count();
    let coords: Vec<u8> = dirs.iter().copied().filter(|&i| i != 5).collect();
    if fives > 1 {
        return 0.0;
    }
    let (momentum, base_f, sign_f, base_v) = match r {
        1 => (3u8, 3u8, 1.0, None),
        2 => (4, 4, 1.0, None),
        3 => (0, 1, -1.0, Some(1u8)),
        4 => (0, 2, -1.0, Some(2u8)),
        _ => unreachable!(),
    };
    if fives == 1 {
        // ∂/∂δ picks the F-component; remaining directions differentiate it
        let mut key = vec![base_f];
        key.extend_from_slice(&coords);
        return sign_f * c.fc(&key).node(k).0;
    }
    // no δ-derivative: the δ·F part vanishes on the orbit
    match base_v {
        None => {
            // v^r = momentum coordinate: first partial is 1, higher vanish
            if coords.len() == 1 && coords[0] == momentum {
                1.0
            } else {
                0.0
            }
        }
        Some(axis) => {
            // v^r = −V_axis: only x/y directions survive
            if coords.iter().any(|&i| i > 2) {
                return 0.0;
            }
            let mut key = vec![axis];
            key.extend_from_slice(&coords);
            -c.vc(&key).node(k).0
        }
    }
}

/// First-order factor x^i_λ at node k, with the bookkeeping component i = 5.
fn x_first_node(t: &FlowTables, i: u8, lam: u8, k: usize) -> Result<f64> {
    if i == 5 {
        return Ok(if lam == 5 { 1.0 } else { 0.0 });
    }
    Ok(t.entry(i, &[lam])?.node(k).0)
}

fn x_second_node(t: &FlowTables, i: u8, l: u8, m: u8, k: usize) -> Result<f64> {
    if i == 5 {
        return Ok(0.0);
    }
    Ok(t.entry(i, &[l, m])?.node(k).0)
}

/// g^r_{λμ} by full contraction, as a dense grid function (never ZERO-tagged).
pub fn inhomogeneity_second(t: &FlowTables, c: &CoeffSet, r: u8, l: u8, m: u8) -> Result<GridFn> {
    let grid = &t.grid;
    let mut vals = vec![0.0; grid.n + 1];
    for k in 0..=grid.n {
        let mut acc = 0.0;
        for i in 1..=5u8 {
            let xi = x_first_node(t, i, l, k)?;
            if xi == 0.0 {
                continue;
            }
            for j in 1..=5u8 {
                let v = v_partial_node(c, r, &[i, j], k);
                if v != 0.0 {
                    acc += v * xi * x_first_node(t, j, m, k)?;
                }
            }
        }
        vals[k] = acc;
    }
    let ders = super::fd_derivative_fill(grid, &vals);
    Ok(GridFn::new(grid.clone(), vals, ders))
}

/// g^r_{λμν} by full contraction.
pub fn inhomogeneity_third(
    t: &FlowTables,
    c: &CoeffSet,
    r: u8,
    l: u8,
    m: u8,
    n: u8,
) -> Result<GridFn> {
    let grid = &t.grid;
    let mut vals = vec![0.0; grid.n + 1];
    for k in 0..=grid.n {
        let mut acc = 0.0;
        for i in 1..=5u8 {
            let xl = x_first_node(t, i, l, k)?;
            let xm_i = x_first_node(t, i, m, k)?;
            let xn_i = x_first_node(t, i, n, k)?;
            for j in 1..=5u8 {
                if xl != 0.0 {
                    let xjm = x_first_node(t, j, m, k)?;
                    if xjm != 0.0 {
                        for q in 1..=5u8 {
                            let v = v_partial_node(c, r, &[i, j, q], k);
                            if v != 0.0 {
                                acc += v * xl * xjm * x_first_node(t, q, n, k)?;
                            }
                        }
                    }
                }
                let v2 = v_partial_node(c, r, &[i, j], k);
                if v2 != 0.0 {
                    acc += v2
                        * (xl * x_second_node(t, j, m, n, k)?
                            + xm_i * x_second_node(t, j, n, l, k)?
                            + xn_i * x_second_node(t, j, l, m, k)?);
                }
            }
        }
        vals[k] = acc;
    }
    let ders = super::fd_derivative_fill(grid, &vals);
    Ok(GridFn::new(grid.clone(), vals, ders))
}

/// Solve one block by explicit variation of constants: the solution with zero
/// initial data is Φ(t)·∫₀ᵗ Φ(τ)⁻¹ g(τ) dτ, with the inverse of the (unit
/// Wronskian) fundamental matrix written out entrywise and the integral done
/// by the grid's Hermite-exact rule.
pub fn brute_solve(
    pair: Pair,
    g_top: &GridFn,
    g_bot: &GridFn,
    pre: &OrbitPrerequisites,
) -> (GridFn, GridFn) {
    let (f11, f12, f21, f22) = match pair {
        Pair::Transverse => (&pre.xi1, &pre.xi2, &pre.xi1dot, &pre.xi2dot),
        Pair::Planar => (&pre.eta1, &pre.eta2, &pre.eta1dot, &pre.eta2dot),
    };
    let grid = &pre.grid;
    let n = grid.n;
    let prod = |a: &GridFn, b: &GridFn, k: usize| {
        (
            a.vals[k] * b.vals[k],
            a.ders[k] * b.vals[k] + a.vals[k] * b.ders[k],
        )
    };
    let mut i1 = GridFn::new(grid.clone(), vec![0.0; n + 1], vec![0.0; n + 1]);
    let mut i2 = GridFn::new(grid.clone(), vec![0.0; n + 1], vec![0.0; n + 1]);
    for k in 0..=n {
        let (a, da) = prod(f22, g_top, k);
        let (b, db) = prod(f12, g_bot, k);
        i1.vals[k] = a - b;
        i1.ders[k] = da - db;
        let (cc, dc) = prod(f21, g_top, k);
        let (d, dd) = prod(f11, g_bot, k);
        i2.vals[k] = d - cc;
        i2.ders[k] = dd - dc;
    }
    let c1 = i1.cumulative_integral();
    let c2 = i2.cumulative_integral();
    let mut top = GridFn::new(grid.clone(), vec![0.0; n + 1], vec![0.0; n + 1]);
    let mut bot = GridFn::new(grid.clone(), vec![0.0; n + 1], vec![0.0; n + 1]);
    for k in 0..=n {
        top.vals[k] = f11.vals[k] * c1.vals[k] + f12.vals[k] * c2.vals[k];
        bot.vals[k] = f21.vals[k] * c1.vals[k] + f22.vals[k] * c2.vals[k];
        top.ders[k] = f11.ders[k] * c1.vals[k]
            + f11.vals[k] * c1.ders[k]
            + f12.ders[k] * c2.vals[k]
            + f12.vals[k] * c2.ders[k];
        bot.ders[k] = f21.ders[k] * c1.vals[k]
            + f21.vals[k] * c1.ders[k]
            + f22.ders[k] * c2.vals[k]
            + f22.vals[k] * c2.ders[k];
    }
    (top, bot)
}

/// Recompute a (possibly ZERO-tagged) order-2/3 entry by the brute route.
pub fn brute_entry(
    t: &FlowTables,
    c: &CoeffSet,
    pre: &OrbitPrerequisites,
    r: u8,
    indices: &[u8],
) -> Result<GridFn> {
    let pair = Pair::of_component(r);
    let (rt, rb) = pair.components();
    let (g_top, g_bot) = match indices.len() {
        2 => (
            inhomogeneity_second(t, c, rt, indices[0], indices[1])?,
            inhomogeneity_second(t, c, rb, indices[0], indices[1])?,
        ),
        3 => (
            inhomogeneity_third(t, c, rt, indices[0], indices[1], indices[2])?,
            inhomogeneity_third(t, c, rb, indices[0], indices[1], indices[2])?,
        ),
        _ => {
            return Err(crate::error::Error::UnsupportedIndex(
                "brute route covers orders 2 and 3".into(),
            ))
        }
    };
    let (top, bot) = brute_solve(pair, &g_top, &g_bot, pre);
    Ok(if r == rt { top } else { bot })
}

impl Entry {
    /// Compare against a brute-route recomputation on the nodes.
    pub fn max_diff(&self, other: &GridFn) -> f64 {
        let mut worst = 0.0_f64;
        for k in 0..other.vals.len() {
            let (v, _) = self.node(k);
            worst = worst.max((v - other.vals[k]).abs());
        }
        worst
    }
}
