//! Starting-point and flow-time derivative tables at the fixed point, and the
//! chain-rule assembly of the 38 map derivatives.
//!
//! The return map is the composition of the flow with the section re-entry
//! data Z = (T, q, y, p, 0, δ): component 0 is the return time, component 2
//! the starting height on the energy shell, the rest are affine. All Z
//! derivatives at (q,p,ε,δ) = (0,0,ε₀,0) reduce to point values of V and F at
//! the turning point plus a handful of flow-table values at t = T.
//!
//! The assembly below uses the reduced closed forms validated against both the
//! full chain-rule sum ([`assemble_via_full_chain`]) and finite differences of
//! the directly integrated map. An alternate transcription of some
//! third-order rows is kept behind [`AssemblyVariants`] for the
//! formula-validation tests; it fails those tests and is never the default.

use crate::error::{Error, Result};
use crate::flowderiv::FlowTables;
use crate::prereq::OrbitPrerequisites;
use crate::symexpr::{SymbolicField, Var};

/// Starting-point (Z²) and flow-time (Z⁰) derivatives at (0,0,ε₀,0), plus the
/// point values of V and F they are built from.
#[derive(Debug, Clone, Default)]
pub struct ZTables {
    /// V_y, V_xx, V_xxx at (0, y_max)
    pub v2: f64,
    pub v11: f64,
    pub v111: f64,
    /// F at (0, y_max, 0, 0); zero without a deformation
    pub f_val: f64,
    // starting-point derivatives (the nonzero ones; the rest vanish)
    pub z2_3: f64,
    pub z2_4: f64,
    pub z2_11: f64,
    pub z2_22: f64,
    // flow-time derivatives
    pub z0_1: f64,
    pub z0_2: f64,
    pub z0_3: f64,
    pub z0_4: f64,
    pub z0_11: f64,
    pub z0_12: f64,
    pub z0_22: f64,
    pub z0_14: f64,
    pub z0_24: f64,
}

impl ZTables {
    /// First derivative Z^λ_ℓ at the fixed point (λ over 0..=5, ℓ over 1..=4
    /// meaning q, p, ε, δ).
    pub fn z_first(&self, lambda: u8, l: u8) -> f64 {
        match lambda {
            0 => match l {
                1 => self.z0_1,
                2 => self.z0_2,
                3 => self.z0_3,
                4 => self.z0_4,
                _ => 0.0,
            },
            1 => (l == 1) as u8 as f64,
            2 => match l {
                3 => self.z2_3,
                4 => self.z2_4,
                _ => 0.0,
            },
            3 => (l == 2) as u8 as f64,
            4 => 0.0,
            5 => (l == 4) as u8 as f64,
            _ => 0.0,
        }
    }

    /// Second derivative Z^λ_{ℓm} at the fixed point.
    pub fn z_second(&self, lambda: u8, l: u8, m: u8) -> f64 {
        let (a, b) = if l <= m { (l, m) } else { (m, l) };
        match lambda {
            0 => match (a, b) {
                (1, 1) => self.z0_11,
                (1, 2) => self.z0_12,
                (2, 2) => self.z0_22,
                (1, 4) => self.z0_14,
                (2, 4) => self.z0_24,
                _ => 0.0,
            },
            2 => match (a, b) {
                (1, 1) => self.z2_11,
                (2, 2) => self.z2_22,
                _ => 0.0,
            },
            _ => 0.0,
        }
    }
}

/// Fill the starting-point part: Z²₃ = 1/V_y, Z²₄ = −F/V_y,
/// Z²₁₁ = −V_xx/V_y, Z²₂₂ = −1/V_y, everything else zero.
pub fn starting_point_table(
    v: &SymbolicField,
    f: Option<&SymbolicField>,
    pre: &OrbitPrerequisites,
) -> Result<ZTables> {
    let ym = pre.y_max;
    let v2 = v.eval_partial(&[Var::Y], 0.0, ym, 0.0, 0.0)?;
    let v11 = v.eval_partial(&[Var::X, Var::X], 0.0, ym, 0.0, 0.0)?;
    let v111 = v.eval_partial(&[Var::X, Var::X, Var::X], 0.0, ym, 0.0, 0.0)?;
    if v2 == 0.0 {
        return Err(Error::DegenerateTurningPoint { ymax: ym, v2 });
    }
    let f_val = f.map(|f| f.eval(0.0, ym, 0.0, 0.0)).unwrap_or(0.0);
    Ok(ZTables {
        v2,
        v11,
        v111,
        f_val,
        z2_3: 1.0 / v2,
        z2_4: -f_val / v2,
        z2_11: -v11 / v2,
        z2_22: -1.0 / v2,
        ..ZTables::default()
    })
}

/// Fill the flow-time part from the planar flow tables at t = T.
pub fn flow_time_table(tables: &FlowTables, mut z: ZTables) -> Result<ZTables> {
    let v2 = z.v2;
    let x = |idx: &[u8]| tables.value_at_period(4, idx);
    let x42 = x(&[2])?;
    z.z0_1 = x(&[1])? / v2;
    z.z0_2 = x(&[3])? / v2;
    z.z0_3 = x42 / (v2 * v2);
    z.z0_4 = x(&[5])? / v2 - z.f_val * x42 / (v2 * v2);
    z.z0_11 = x(&[1, 1])? / v2 - z.v11 * x42 / (v2 * v2);
    z.z0_12 = x(&[1, 3])? / v2;
    z.z0_22 = x(&[3, 3])? / v2 - x42 / (v2 * v2);
    z.z0_14 = x(&[1, 5])? / v2;
    z.z0_24 = x(&[3, 5])? / v2;
    Ok(z)
}

/// The 38 map derivatives at (0,0,ε₀,0) plus run metadata.
///
/// Naming: `q_qp` is ∂²Q/∂q∂p, the suffixes `e`/`d` are the energy and
/// deformation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareDerivatives {
    pub epsilon0: f64,
    pub energy: f64,
    pub y_max: f64,
    pub period: f64,
    pub q_q: f64,
    pub q_p: f64,
    pub p_q: f64,
    pub p_p: f64,
    pub q_qq: f64,
    pub q_qp: f64,
    pub q_pp: f64,
    pub p_qq: f64,
    pub p_qp: f64,
    pub p_pp: f64,
    pub q_qqq: f64,
    pub q_qqp: f64,
    pub q_qpp: f64,
    pub q_ppp: f64,
    pub p_qqq: f64,
    pub p_qqp: f64,
    pub p_qpp: f64,
    pub p_ppp: f64,
    pub q_qe: f64,
    pub q_pe: f64,
    pub p_qe: f64,
    pub p_pe: f64,
    pub q_qqe: f64,
    pub q_qpe: f64,
    pub q_ppe: f64,
    pub p_qqe: f64,
    pub p_qpe: f64,
    pub p_ppe: f64,
    pub q_qd: f64,
    pub q_pd: f64,
    pub p_qd: f64,
    pub p_pd: f64,
    pub q_qqd: f64,
    pub q_qpd: f64,
    pub q_ppd: f64,
    pub p_qqd: f64,
    pub p_qpd: f64,
    pub p_ppd: f64,
}

pub const DERIVATIVE_NAMES: [&str; 38] = [
    "Q_q", "Q_p", "P_q", "P_p", "Q_qq", "Q_qp", "Q_pp", "P_qq", "P_qp", "P_pp", "Q_qqq", "Q_qqp",
    "Q_qpp", "Q_ppp", "P_qqq", "P_qqp", "P_qpp", "P_ppp", "Q_qe", "Q_pe", "P_qe", "P_pe", "Q_qqe",
    "Q_qpe", "Q_ppe", "P_qqe", "P_qpe", "P_ppe", "Q_qd", "Q_pd", "P_qd", "P_pd", "Q_qqd", "Q_qpd",
    "Q_ppd", "P_qqd", "P_qpd", "P_ppd",
];

impl PoincareDerivatives {
    pub fn trace(&self) -> f64 {
        self.q_q + self.p_p
    }

    /// ε-derivative of the trace along the fixed-point branch.
    pub fn trace_prime(&self) -> f64 {
        self.q_qe + self.p_pe
    }

    /// All 38 values in the fixed report order of [`DERIVATIVE_NAMES`].
    pub fn values(&self) -> [f64; 38] {
        [
            self.q_q, self.q_p, self.p_q, self.p_p, self.q_qq, self.q_qp, self.q_pp, self.p_qq,
            self.p_qp, self.p_pp, self.q_qqq, self.q_qqp, self.q_qpp, self.q_ppp, self.p_qqq,
            self.p_qqp, self.p_qpp, self.p_ppp, self.q_qe, self.q_pe, self.p_qe, self.p_pe,
            self.q_qqe, self.q_qpe, self.q_ppe, self.p_qqe, self.p_qpe, self.p_ppe, self.q_qd,
            self.q_pd, self.p_qd, self.p_pd, self.q_qqd, self.q_qpd, self.q_ppd, self.p_qqd,
            self.p_qpd, self.p_ppd,
        ]
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        DERIVATIVE_NAMES
            .iter()
            .copied()
            .zip(self.values())
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        DERIVATIVE_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.values()[i])
    }
}

/// Alternate transcription of the third-order assembly rows, kept only for
/// the formula-validation tests; the default (all false) is the variant that
/// matches finite differences of the directly integrated map.
#[derive(Debug, Clone, Copy, Default)]
pub struct AssemblyVariants {
    /// Swap the time-mixed coefficients in the two qpp rows.
    pub alt_third_order_qpp: bool,
    /// Use the alternate deformation-mixed third-order P rows (time-mixed
    /// coefficient without the inhomogeneity part, and the alternate last
    /// terms of the pp row / index pairing of the qp row).
    pub alt_deformation_rows: bool,
}

/// Assemble the 38 derivatives from finished tables; pure arithmetic, no
/// integration happens here.
pub fn assemble(
    tables: &FlowTables,
    z: &ZTables,
    pre: &OrbitPrerequisites,
    epsilon0: f64,
    variants: AssemblyVariants,
) -> Result<PoincareDerivatives> {
    let x = |r: u8, idx: &[u8]| tables.value_at_period(r, idx);

    // per-component assembly closures over the reduced chain rule
    let second =
        |i: u8| -> Result<[f64; 3]> { Ok([x(i, &[1, 1])?, x(i, &[1, 3])?, x(i, &[3, 3])?]) };
    let eps_first = |i: u8| -> Result<[f64; 2]> {
        let qe = x(i, &[1, 2])? * z.z2_3 + x(i, &[0, 1])? * z.z0_3;
        let pe = x(i, &[2, 3])? * z.z2_3 + x(i, &[0, 3])? * z.z0_3;
        Ok([qe, pe])
    };
    let third = |i: u8| -> Result<[f64; 4]> {
        let qqq =
            x(i, &[1, 1, 1])? + 3.0 * x(i, &[1, 2])? * z.z2_11 + 3.0 * x(i, &[0, 1])? * z.z0_11;
        let qqp = x(i, &[1, 1, 3])?
            + x(i, &[2, 3])? * z.z2_11
            + x(i, &[0, 3])? * z.z0_11
            + 2.0 * x(i, &[0, 1])? * z.z0_12;
        let (qpp_a, qpp_b) = if variants.alt_third_order_qpp {
            if i == 1 {
                // alternate: the Z⁰₁₂ term repeats the q-indexed coefficient
                (x(i, &[0, 1])?, x(i, &[0, 1])?)
            } else {
                // alternate: swapped pairing
                (x(i, &[0, 3])?, x(i, &[0, 1])?)
            }
        } else {
            (x(i, &[0, 1])?, x(i, &[0, 3])?)
        };
        let qpp =
            x(i, &[1, 3, 3])? + x(i, &[1, 2])? * z.z2_22 + qpp_a * z.z0_22 + 2.0 * qpp_b * z.z0_12;
        let ppp =
            x(i, &[3, 3, 3])? + 3.0 * x(i, &[2, 3])? * z.z2_22 + 3.0 * x(i, &[0, 3])? * z.z0_22;
        Ok([qqq, qqp, qpp, ppp])
    };
    let eps_second = |i: u8| -> Result<[f64; 3]> {
        let qqe = x(i, &[1, 1, 2])? * z.z2_3 + x(i, &[0, 1, 1])? * z.z0_3;
        let qpe = x(i, &[1, 2, 3])? * z.z2_3 + x(i, &[0, 1, 3])? * z.z0_3;
        let ppe = x(i, &[2, 3, 3])? * z.z2_3 + x(i, &[0, 3, 3])? * z.z0_3;
        Ok([qqe, qpe, ppe])
    };
    let delta_first = |i: u8| -> Result<[f64; 2]> {
        let qd = x(i, &[1, 5])? + x(i, &[1, 2])? * z.z2_4 + x(i, &[0, 1])? * z.z0_4;
        let pd = x(i, &[3, 5])? + x(i, &[2, 3])? * z.z2_4 + x(i, &[0, 3])? * z.z0_4;
        Ok([qd, pd])
    };
    let delta_second = |i: u8| -> Result<[f64; 3]> {
        if variants.alt_deformation_rows && i == 3 {
            // alternate transcription: −V_xx·x¹_{λμ} in place of the full time
            // derivative of x³_{λμ}, plus the alternate pp-row terms
            let v11 = z.v11;
            let qqd = x(3, &[1, 1, 5])? + x(3, &[1, 1, 2])? * z.z2_4
                - v11 * x(1, &[1, 1])? * z.z0_4
                - 2.0 * v11 * x(1, &[1])? * z.z0_14;
            let qpd = x(3, &[1, 3, 5])? + x(3, &[1, 2, 3])? * z.z2_4
                - v11 * x(1, &[1, 3])? * z.z0_4
                - v11 * (x(1, &[3])? * z.z0_14 + x(1, &[1])? * z.z0_24);
            let ppd = x(3, &[3, 3, 5])? + x(3, &[2, 3, 3])? * z.z2_4
                - v11 * x(1, &[1, 3])? * z.z0_4
                - 2.0 * v11 * x(3, &[1])? * z.z0_24;
            return Ok([qqd, qpd, ppd]);
        }
        let qqd = x(i, &[1, 1, 5])?
            + x(i, &[1, 1, 2])? * z.z2_4
            + x(i, &[0, 1, 1])? * z.z0_4
            + 2.0 * x(i, &[0, 1])? * z.z0_14;
        let (qpd_14, qpd_24) = if variants.alt_deformation_rows {
            (x(i, &[0, 1])?, x(i, &[0, 3])?)
        } else {
            (x(i, &[0, 3])?, x(i, &[0, 1])?)
        };
        let qpd = x(i, &[1, 3, 5])?
            + x(i, &[1, 2, 3])? * z.z2_4
            + x(i, &[0, 1, 3])? * z.z0_4
            + qpd_14 * z.z0_14
            + qpd_24 * z.z0_24;
        let ppd = x(i, &[3, 3, 5])?
            + x(i, &[2, 3, 3])? * z.z2_4
            + x(i, &[0, 3, 3])? * z.z0_4
            + 2.0 * x(i, &[0, 3])? * z.z0_24;
        Ok([qqd, qpd, ppd])
    };

    let [q_qq, q_qp, q_pp] = second(1)?;
    let [p_qq, p_qp, p_pp] = second(3)?;
    let [q_qe, q_pe] = eps_first(1)?;
    let [p_qe, p_pe] = eps_first(3)?;
    let [q_qqq, q_qqp, q_qpp, q_ppp] = third(1)?;
    let [p_qqq, p_qqp, p_qpp, p_ppp] = third(3)?;
    let [q_qqe, q_qpe, q_ppe] = eps_second(1)?;
    let [p_qqe, p_qpe, p_ppe] = eps_second(3)?;
    let [q_qd, q_pd] = delta_first(1)?;
    let [p_qd, p_pd] = delta_first(3)?;
    let [q_qqd, q_qpd, q_ppd] = delta_second(1)?;
    let [p_qqd, p_qpd, p_ppd] = delta_second(3)?;

    Ok(PoincareDerivatives {
        epsilon0,
        energy: pre.energy,
        y_max: pre.y_max,
        period: pre.period,
        q_q: x(1, &[1])?,
        q_p: x(1, &[3])?,
        p_q: x(3, &[1])?,
        p_p: x(3, &[3])?,
        q_qq,
        q_qp,
        q_pp,
        p_qq,
        p_qp,
        p_pp,
        q_qqq,
        q_qqp,
        q_qpp,
        q_ppp,
        p_qqq,
        p_qqp,
        p_qpp,
        p_ppp,
        q_qe,
        q_pe,
        p_qe,
        p_pe,
        q_qqe,
        q_qpe,
        q_ppe,
        p_qqe,
        p_qpe,
        p_ppe,
        q_qd,
        q_pd,
        p_qd,
        p_pd,
        q_qqd,
        q_qpd,
        q_ppd,
        p_qqd,
        p_qpd,
        p_ppd,
    })
}

/// The same 38 numbers by the unreduced chain rule: full sums over all six
/// flow directions with the complete Z tables, skipping terms whose Z-factor
/// product vanishes. Used to validate the reduced assembly.
pub fn assemble_via_full_chain(tables: &FlowTables, z: &ZTables) -> Result<Vec<(String, f64)>> {
    let x = |r: u8, idx: &[u8]| tables.value_at_period(r, idx);
    let d1 = |i: u8, l: u8| -> Result<f64> {
        let mut acc = 0.0;
        for lam in 0..=5u8 {
            let zf = z.z_first(lam, l);
            if zf == 0.0 {
                continue;
            }
            if lam == 5 {
                continue; // x^{1,3}_5 = 0
            }
            acc += x(i, &[lam])? * zf;
        }
        Ok(acc)
    };
    let d2 = |i: u8, l: u8, m: u8| -> Result<f64> {
        let mut acc = 0.0;
        for lam in 0..=5u8 {
            for mu in 0..=5u8 {
                let zz = z.z_first(lam, l) * z.z_first(mu, m);
                if zz != 0.0 {
                    acc += x(i, &[lam, mu])? * zz;
                }
            }
            let z2 = z.z_second(lam, l, m);
            if z2 != 0.0 && lam != 5 {
                acc += x(i, &[lam])? * z2;
            }
        }
        Ok(acc)
    };
    let d3 = |i: u8, l: u8, m: u8, n: u8| -> Result<f64> {
        let mut acc = 0.0;
        for lam in 0..=5u8 {
            for mu in 0..=5u8 {
                for nu in 0..=5u8 {
                    let zzz = z.z_first(lam, l) * z.z_first(mu, m) * z.z_first(nu, n);
                    if zzz != 0.0 {
                        acc += x(i, &[lam, mu, nu])? * zzz;
                    }
                }
                let pairing = z.z_first(lam, l) * z.z_second(mu, m, n)
                    + z.z_first(lam, m) * z.z_second(mu, n, l)
                    + z.z_first(lam, n) * z.z_second(mu, l, m);
                if pairing != 0.0 {
                    acc += x(i, &[lam, mu])? * pairing;
                }
            }
            // x^i_λ Z^λ_{ℓmn}: the only λ with nonvanishing third Z-derivatives
            // are 0 and 2, and x^{1,3}_0 = x^{1,3}_2 = 0.
        }
        Ok(acc)
    };
    let mut out = Vec::with_capacity(38);
    for (name, i) in [("Q", 1u8), ("P", 3u8)] {
        out.push((format!("{name}_q"), d1(i, 1)?));
        out.push((format!("{name}_p"), d1(i, 2)?));
        for (suffix, l, m) in [
            ("qq", 1, 1),
            ("qp", 1, 2),
            ("pp", 2, 2),
            ("qe", 1, 3),
            ("pe", 2, 3),
            ("qd", 1, 4),
            ("pd", 2, 4),
        ] {
            out.push((format!("{name}_{suffix}"), d2(i, l, m)?));
        }
        for (suffix, l, m, n) in [
            ("qqq", 1, 1, 1),
            ("qqp", 1, 1, 2),
            ("qpp", 1, 2, 2),
            ("ppp", 2, 2, 2),
            ("qqe", 1, 1, 3),
            ("qpe", 1, 2, 3),
            ("ppe", 2, 2, 3),
            ("qqd", 1, 1, 4),
            ("qpd", 1, 2, 4),
            ("ppd", 2, 2, 4),
        ] {
            out.push((format!("{name}_{suffix}"), d3(i, l, m, n)?));
        }
    }
    Ok(out)
}
