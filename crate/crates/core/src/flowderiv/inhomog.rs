//! Specialized inhomogeneities g^r_* of the block systems, one closed form per
//! index-group case, built from coefficient functions and lower-order tables.
//!
//! Each case is the contraction g^r_{λμ} = v^r_{ij} x^i_λ x^j_μ (and its
//! third-order analogue) reduced by hand using which coordinate directions the
//! indices lie in; the brute-force contraction in [`super::generic`] computes
//! the same quantities without any reduction and the tests compare the two.
//!
//! Two alternate transcriptions of deformation-mixed rows are kept behind
//! [`GVariants`]; they are rejected by the finite-difference cross-check (see
//! tests/protocol.rs and docs/formula-notes.md) and exist only so that the
//! build's choice between the candidate forms stays tested.

use super::{CoeffSet, Entry, FlowTables, TermSum};
use crate::error::{Error, Result};

/// Selects alternate transcriptions of two deformation-mixed inhomogeneity
/// rows. Both default to the validated form.
#[derive(Debug, Clone, Copy, Default)]
pub struct GVariants {
    /// g³ for one transverse index, one planar index and δ: use the alternate
    /// transcription (coefficient V_xyy and positive mixed-F signs).
    pub alt_g3_transverse_planar_delta: bool,
    /// g¹ for one transverse index, one planar index and δ: use the alternate
    /// transcription (second factor x³_μ instead of x²_μ).
    pub alt_g1_transverse_planar_delta: bool,
}

fn is_t(i: u8) -> bool {
    i == 1 || i == 3
}

/// Split a pair of coordinate directions into (transverse, planar) if mixed.
fn split_mixed(l: u8, m: u8) -> Option<(u8, u8)> {
    match (is_t(l), is_t(m)) {
        (true, false) => Some((l, m)),
        (false, true) => Some((m, l)),
        _ => None,
    }
}

/// g^r_{λμ} for coordinate directions λ,μ ∈ 1..=5 (not both 5).
pub fn second_order(
    t: &FlowTables,
    c: &CoeffSet,
    _variants: GVariants,
    r: u8,
    l: u8,
    m: u8,
) -> Result<Entry> {
    if l == 5 || m == 5 {
        let lam = if l == 5 { m } else { l };
        if lam == 5 {
            return Err(Error::UnsupportedIndex("two deformation indices".into()));
        }
        return second_order_delta(t, c, r, lam);
    }
    // pure coordinate pair; components 1 and 2 have no quadratic vector-field terms
    if r == 1 || r == 2 {
        return Ok(Entry::Zero);
    }
    let grid = &t.grid;
    let mut s = TermSum::new(grid);
    match (r, is_t(l) as u8 + is_t(m) as u8) {
        (3, 2) => s.add3(
            -1.0,
            c.vc(&[1, 1, 1]),
            &t.entry(1, &[l])?,
            &t.entry(1, &[m])?,
        ),
        (3, 1) => {
            let (lt, mp) = split_mixed(l, m).unwrap();
            s.add3(
                -1.0,
                c.vc(&[1, 1, 2]),
                &t.entry(1, &[lt])?,
                &t.entry(2, &[mp])?,
            );
        }
        (3, 0) => {}
        (4, 2) => s.add3(
            -1.0,
            c.vc(&[1, 1, 2]),
            &t.entry(1, &[l])?,
            &t.entry(1, &[m])?,
        ),
        (4, 1) => {}
        (4, 0) => s.add3(
            -1.0,
            c.vc(&[2, 2, 2]),
            &t.entry(2, &[l])?,
            &t.entry(2, &[m])?,
        ),
        _ => unreachable!(),
    }
    Ok(s.into_entry())
}

/// g^r_{λ5} for a coordinate direction λ ∈ 1..=4.
fn second_order_delta(t: &FlowTables, c: &CoeffSet, r: u8, l: u8) -> Result<Entry> {
    if (r + l) % 2 == 1 {
        return Ok(Entry::Zero);
    }
    let grid = &t.grid;
    let mut s = TermSum::new(grid);
    match r {
        1 => {
            s.add2(1.0, c.fc(&[1, 3]), &t.entry(1, &[l])?);
            s.add2(1.0, c.fc(&[3, 3]), &t.entry(3, &[l])?);
        }
        3 => {
            s.add2(-1.0, c.fc(&[1, 1]), &t.entry(1, &[l])?);
            s.add2(-1.0, c.fc(&[1, 3]), &t.entry(3, &[l])?);
            s.add3(
                -1.0,
                c.vc(&[1, 1, 2]),
                &t.entry(1, &[l])?,
                &t.entry(2, &[5])?,
            );
        }
        2 => {
            s.add2(1.0, c.fc(&[2, 4]), &t.entry(2, &[l])?);
            s.add2(1.0, c.fc(&[4, 4]), &t.entry(4, &[l])?);
        }
        4 => {
            s.add2(-1.0, c.fc(&[2, 2]), &t.entry(2, &[l])?);
            s.add2(-1.0, c.fc(&[2, 4]), &t.entry(4, &[l])?);
            s.add3(
                -1.0,
                c.vc(&[2, 2, 2]),
                &t.entry(2, &[l])?,
                &t.entry(2, &[5])?,
            );
        }
        _ => unreachable!(),
    }
    Ok(s.into_entry())
}

/// g^r_{λμν} for λ,μ,ν ∈ 1..=4, or g^r_{λμ5} when ν = 5.
pub fn third_order(
    t: &FlowTables,
    c: &CoeffSet,
    variants: GVariants,
    r: u8,
    l: u8,
    m: u8,
    n: u8,
) -> Result<Entry> {
    let mut dirs = [l, m, n];
    dirs.sort_unstable();
    if dirs.iter().filter(|&&i| i == 5).count() > 1 {
        return Err(Error::UnsupportedIndex("two deformation indices".into()));
    }
    if dirs[2] == 5 {
        return third_order_delta(t, c, variants, r, dirs[0], dirs[1]);
    }
    // pure coordinate triples; components 1 and 2 have no V-driven terms
    if r == 1 || r == 2 {
        return Ok(Entry::Zero);
    }
    let ts: Vec<u8> = dirs.iter().copied().filter(|&i| is_t(i)).collect();
    let ps: Vec<u8> = dirs.iter().copied().filter(|&i| !is_t(i)).collect();
    let grid = &t.grid;
    let mut s = TermSum::new(grid);
    match (r, ts.len()) {
        (3, 3) => {
            let (l, m, n) = (dirs[0], dirs[1], dirs[2]);
            s.add4(
                -1.0,
                c.vc(&[1, 1, 1, 1]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m])?,
                &t.entry(1, &[n])?,
            );
            for (a, bc) in [(l, [m, n]), (m, [n, l]), (n, [l, m])] {
                s.add3(
                    -1.0,
                    c.vc(&[1, 1, 1]),
                    &t.entry(1, &[a])?,
                    &t.entry(1, &bc)?,
                );
                s.add3(
                    -1.0,
                    c.vc(&[1, 1, 2]),
                    &t.entry(1, &[a])?,
                    &t.entry(2, &bc)?,
                );
            }
        }
        (3, 2) => {
            let (l, m, n) = (ts[0], ts[1], ps[0]);
            s.add4(
                -1.0,
                c.vc(&[1, 1, 1, 2]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m])?,
                &t.entry(2, &[n])?,
            );
            s.add3(
                -1.0,
                c.vc(&[1, 1, 1]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m, n])?,
            );
            s.add3(
                -1.0,
                c.vc(&[1, 1, 1]),
                &t.entry(1, &[m])?,
                &t.entry(1, &[n, l])?,
            );
            s.add3(
                -1.0,
                c.vc(&[1, 1, 2]),
                &t.entry(2, &[n])?,
                &t.entry(1, &[l, m])?,
            );
        }
        (3, 1) => {
            let (l, m, n) = (ts[0], ps[0], ps[1]);
            s.add4(
                -1.0,
                c.vc(&[1, 1, 2, 2]),
                &t.entry(1, &[l])?,
                &t.entry(2, &[m])?,
                &t.entry(2, &[n])?,
            );
            s.add3(
                -1.0,
                c.vc(&[1, 1, 2]),
                &t.entry(1, &[l])?,
                &t.entry(2, &[m, n])?,
            );
            s.add3(
                -1.0,
                c.vc(&[1, 1, 2]),
                &t.entry(2, &[m])?,
                &t.entry(1, &[n, l])?,
            );
            s.add3(
                -1.0,
                c.vc(&[1, 1, 2]),
                &t.entry(2, &[n])?,
                &t.entry(1, &[l, m])?,
            );
        }
        (3, 0) => {}
        (4, 3) => {
            let (l, m, n) = (dirs[0], dirs[1], dirs[2]);
            s.add4(
                -1.0,
                c.vc(&[1, 1, 1, 2]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m])?,
                &t.entry(1, &[n])?,
            );
            for (a, bc) in [(l, [m, n]), (m, [n, l]), (n, [l, m])] {
                s.add3(
                    -1.0,
                    c.vc(&[1, 1, 2]),
                    &t.entry(1, &[a])?,
                    &t.entry(1, &bc)?,
                );
            }
        }
        (4, 2) => {
            let (l, m, n) = (ts[0], ts[1], ps[0]);
            s.add4(
                -1.0,
                c.vc(&[1, 1, 2, 2]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m])?,
                &t.entry(2, &[n])?,
            );
            s.add3(
                -1.0,
                c.vc(&[1, 1, 2]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m, n])?,
            );
            s.add3(
                -1.0,
                c.vc(&[1, 1, 2]),
                &t.entry(1, &[m])?,
                &t.entry(1, &[n, l])?,
            );
            s.add3(
                -1.0,
                c.vc(&[2, 2, 2]),
                &t.entry(2, &[n])?,
                &t.entry(2, &[l, m])?,
            );
        }
        (4, 1) => {}
        (4, 0) => {
            let (l, m, n) = (dirs[0], dirs[1], dirs[2]);
            s.add4(
                -1.0,
                c.vc(&[2, 2, 2, 2]),
                &t.entry(2, &[l])?,
                &t.entry(2, &[m])?,
                &t.entry(2, &[n])?,
            );
            for (a, bc) in [(l, [m, n]), (m, [n, l]), (n, [l, m])] {
                s.add3(
                    -1.0,
                    c.vc(&[2, 2, 2]),
                    &t.entry(2, &[a])?,
                    &t.entry(2, &bc)?,
                );
            }
        }
        _ => unreachable!(),
    }
    Ok(s.into_entry())
}

/// g^r_{λμ5} for coordinate directions λ,μ ∈ 1..=4.
fn third_order_delta(
    t: &FlowTables,
    c: &CoeffSet,
    variants: GVariants,
    r: u8,
    l: u8,
    m: u8,
) -> Result<Entry> {
    let ts: Vec<u8> = [l, m].iter().copied().filter(|&i| is_t(i)).collect();
    let ps: Vec<u8> = [l, m].iter().copied().filter(|&i| !is_t(i)).collect();
    let grid = &t.grid;
    let mut s = TermSum::new(grid);
    match (r, ts.len()) {
        (1, 2) => {
            s.add3(
                1.0,
                c.fc(&[1, 1, 3]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m])?,
            );
            s.add3(
                1.0,
                c.fc(&[1, 3, 3]),
                &t.entry(1, &[l])?,
                &t.entry(3, &[m])?,
            );
            s.add3(
                1.0,
                c.fc(&[1, 3, 3]),
                &t.entry(3, &[l])?,
                &t.entry(1, &[m])?,
            );
            s.add3(
                1.0,
                c.fc(&[3, 3, 3]),
                &t.entry(3, &[l])?,
                &t.entry(3, &[m])?,
            );
            s.add2(1.0, c.fc(&[1, 3]), &t.entry(1, &[l, m])?);
            s.add2(1.0, c.fc(&[3, 3]), &t.entry(3, &[l, m])?);
        }
        (1, 1) => {
            let (lt, mp) = (ts[0], ps[0]);
            s.add3(
                1.0,
                c.fc(&[1, 2, 3]),
                &t.entry(1, &[lt])?,
                &t.entry(2, &[mp])?,
            );
            s.add3(
                1.0,
                c.fc(&[1, 3, 4]),
                &t.entry(1, &[lt])?,
                &t.entry(4, &[mp])?,
            );
            if variants.alt_g1_transverse_planar_delta {
                // alternate transcription: x³_μ in place of x²_μ (identically
                // zero by parity, so this drops the term)
                s.add3(
                    1.0,
                    c.fc(&[2, 3, 3]),
                    &t.entry(3, &[lt])?,
                    &t.entry(3, &[mp])?,
                );
            } else {
                s.add3(
                    1.0,
                    c.fc(&[2, 3, 3]),
                    &t.entry(3, &[lt])?,
                    &t.entry(2, &[mp])?,
                );
            }
            s.add3(
                1.0,
                c.fc(&[3, 3, 4]),
                &t.entry(3, &[lt])?,
                &t.entry(4, &[mp])?,
            );
            s.add2(1.0, c.fc(&[1, 3]), &t.entry(1, &[lt, mp])?);
            s.add2(1.0, c.fc(&[3, 3]), &t.entry(3, &[lt, mp])?);
        }
        (1, 0) | (3, 0) | (2, 1) | (4, 1) => {}
        (2, 2) => {
            s.add3(
                1.0,
                c.fc(&[1, 1, 4]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m])?,
            );
            s.add3(
                1.0,
                c.fc(&[1, 3, 4]),
                &t.entry(1, &[l])?,
                &t.entry(3, &[m])?,
            );
            s.add3(
                1.0,
                c.fc(&[1, 3, 4]),
                &t.entry(3, &[l])?,
                &t.entry(1, &[m])?,
            );
            s.add3(
                1.0,
                c.fc(&[3, 3, 4]),
                &t.entry(3, &[l])?,
                &t.entry(3, &[m])?,
            );
            s.add2(1.0, c.fc(&[2, 4]), &t.entry(2, &[l, m])?);
            s.add2(1.0, c.fc(&[4, 4]), &t.entry(4, &[l, m])?);
        }
        (2, 0) => {
            s.add3(
                1.0,
                c.fc(&[2, 2, 4]),
                &t.entry(2, &[l])?,
                &t.entry(2, &[m])?,
            );
            s.add3(
                1.0,
                c.fc(&[2, 4, 4]),
                &t.entry(2, &[l])?,
                &t.entry(4, &[m])?,
            );
            s.add3(
                1.0,
                c.fc(&[2, 4, 4]),
                &t.entry(4, &[l])?,
                &t.entry(2, &[m])?,
            );
            s.add3(
                1.0,
                c.fc(&[4, 4, 4]),
                &t.entry(4, &[l])?,
                &t.entry(4, &[m])?,
            );
            s.add2(1.0, c.fc(&[2, 4]), &t.entry(2, &[l, m])?);
            s.add2(1.0, c.fc(&[4, 4]), &t.entry(4, &[l, m])?);
        }
        (3, 2) => {
            let x25 = t.entry(2, &[5])?;
            s.add4(
                -1.0,
                c.vc(&[1, 1, 1, 2]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m])?,
                &x25,
            );
            s.add3(
                -1.0,
                c.vc(&[1, 1, 1]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m, 5])?,
            );
            s.add3(
                -1.0,
                c.vc(&[1, 1, 1]),
                &t.entry(1, &[m])?,
                &t.entry(1, &[l, 5])?,
            );
            s.add3(-1.0, c.vc(&[1, 1, 2]), &x25, &t.entry(1, &[l, m])?);
            s.add3(
                -1.0,
                c.fc(&[1, 1, 1]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m])?,
            );
            s.add3(
                -1.0,
                c.fc(&[1, 1, 3]),
                &t.entry(1, &[l])?,
                &t.entry(3, &[m])?,
            );
            s.add3(
                -1.0,
                c.fc(&[1, 1, 3]),
                &t.entry(3, &[l])?,
                &t.entry(1, &[m])?,
            );
            s.add3(
                -1.0,
                c.fc(&[1, 3, 3]),
                &t.entry(3, &[l])?,
                &t.entry(3, &[m])?,
            );
            s.add2(-1.0, c.fc(&[1, 1]), &t.entry(1, &[l, m])?);
            s.add2(-1.0, c.fc(&[1, 3]), &t.entry(3, &[l, m])?);
        }
        (3, 1) => {
            let (lt, mp) = (ts[0], ps[0]);
            let x25 = t.entry(2, &[5])?;
            s.add4(
                -1.0,
                c.vc(&[1, 1, 2, 2]),
                &t.entry(1, &[lt])?,
                &t.entry(2, &[mp])?,
                &x25,
            );
            let bracket_coeff = if variants.alt_g3_transverse_planar_delta {
                c.vc(&[1, 2, 2])
            } else {
                c.vc(&[1, 1, 2])
            };
            s.add3(
                -1.0,
                bracket_coeff,
                &t.entry(1, &[lt])?,
                &t.entry(2, &[mp, 5])?,
            );
            s.add3(
                -1.0,
                bracket_coeff,
                &t.entry(2, &[mp])?,
                &t.entry(1, &[lt, 5])?,
            );
            s.add3(-1.0, bracket_coeff, &x25, &t.entry(1, &[lt, mp])?);
            s.add3(
                -1.0,
                c.fc(&[1, 1, 2]),
                &t.entry(1, &[lt])?,
                &t.entry(2, &[mp])?,
            );
            s.add3(
                -1.0,
                c.fc(&[1, 1, 4]),
                &t.entry(1, &[lt])?,
                &t.entry(4, &[mp])?,
            );
            let mixed_sign = if variants.alt_g3_transverse_planar_delta {
                1.0
            } else {
                -1.0
            };
            s.add3(
                mixed_sign,
                c.fc(&[1, 2, 3]),
                &t.entry(3, &[lt])?,
                &t.entry(2, &[mp])?,
            );
            s.add3(
                mixed_sign,
                c.fc(&[1, 3, 4]),
                &t.entry(3, &[lt])?,
                &t.entry(4, &[mp])?,
            );
            s.add2(-1.0, c.fc(&[1, 1]), &t.entry(1, &[lt, mp])?);
            s.add2(-1.0, c.fc(&[1, 3]), &t.entry(3, &[lt, mp])?);
        }
        (4, 2) => {
            let x25 = t.entry(2, &[5])?;
            s.add4(
                -1.0,
                c.vc(&[1, 1, 2, 2]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m])?,
                &x25,
            );
            s.add3(
                -1.0,
                c.vc(&[1, 1, 2]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m, 5])?,
            );
            s.add3(
                -1.0,
                c.vc(&[1, 1, 2]),
                &t.entry(1, &[m])?,
                &t.entry(1, &[l, 5])?,
            );
            s.add3(-1.0, c.vc(&[2, 2, 2]), &x25, &t.entry(2, &[l, m])?);
            s.add3(
                -1.0,
                c.fc(&[1, 1, 2]),
                &t.entry(1, &[l])?,
                &t.entry(1, &[m])?,
            );
            s.add3(
                -1.0,
                c.fc(&[1, 2, 3]),
                &t.entry(1, &[l])?,
                &t.entry(3, &[m])?,
            );
            s.add3(
                -1.0,
                c.fc(&[1, 2, 3]),
                &t.entry(3, &[l])?,
                &t.entry(1, &[m])?,
            );
            s.add3(
                -1.0,
                c.fc(&[2, 3, 3]),
                &t.entry(3, &[l])?,
                &t.entry(3, &[m])?,
            );
            s.add2(-1.0, c.fc(&[2, 2]), &t.entry(2, &[l, m])?);
            s.add2(-1.0, c.fc(&[2, 4]), &t.entry(4, &[l, m])?);
        }
        (4, 0) => {
            let x25 = t.entry(2, &[5])?;
            s.add4(
                -1.0,
                c.vc(&[2, 2, 2, 2]),
                &t.entry(2, &[l])?,
                &t.entry(2, &[m])?,
                &x25,
            );
            s.add3(
                -1.0,
                c.vc(&[2, 2, 2]),
                &t.entry(2, &[l])?,
                &t.entry(2, &[m, 5])?,
            );
            s.add3(
                -1.0,
                c.vc(&[2, 2, 2]),
                &t.entry(2, &[m])?,
                &t.entry(2, &[l, 5])?,
            );
            s.add3(-1.0, c.vc(&[2, 2, 2]), &x25, &t.entry(2, &[l, m])?);
            s.add3(
                -1.0,
                c.fc(&[2, 2, 2]),
                &t.entry(2, &[l])?,
                &t.entry(2, &[m])?,
            );
            s.add3(
                -1.0,
                c.fc(&[2, 2, 4]),
                &t.entry(2, &[l])?,
                &t.entry(4, &[m])?,
            );
            s.add3(
                -1.0,
                c.fc(&[2, 2, 4]),
                &t.entry(4, &[l])?,
                &t.entry(2, &[m])?,
            );
            s.add3(
                -1.0,
                c.fc(&[2, 4, 4]),
                &t.entry(4, &[l])?,
                &t.entry(4, &[m])?,
            );
            s.add2(-1.0, c.fc(&[2, 2]), &t.entry(2, &[l, m])?);
            s.add2(-1.0, c.fc(&[2, 4]), &t.entry(4, &[l, m])?);
        }
        _ => unreachable!(),
    }
    Ok(s.into_entry())
}
