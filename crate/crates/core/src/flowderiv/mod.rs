//! Tables of flow derivatives x^r_*(t) along the libration orbit.
//!
//! Derivative directions are numbered 0–5: 0 is time, 1–4 are the initial
//! coordinates (x, y, pₓ, p_y), 5 is the deformation strength δ. Components
//! r = 1..4 are the flow coordinates in the same order; the bookkeeping
//! component for δ is never stored (its only nonzero derivative is the
//! constant 1 with respect to direction 5).
//!
//! First-order tables are the fundamental systems themselves plus one
//! variation-of-constants solve for the δ-column. Higher orders satisfy the
//! same two linear 2×2 systems,
//!
//! ```text
//! transverse:  ẋ¹_* − x³_* = g¹_*(t),   ẋ³_* + V_xx(0,y(t))·x¹_* = g³_*(t)
//! planar:      ẋ²_* − x⁴_* = g²_*(t),   ẋ⁴_* + V_yy(0,y(t))·x²_* = g⁴_*(t)
//! ```
//!
//! with zero initial data and inhomogeneities built from lower-order tables
//! ([`inhomog`]). Entries that vanish identically by the parity and block
//! lemmas are tagged [`Entry::Zero`] and never solved for; a brute-force route
//! that knows none of those lemmas lives in [`generic`] and is used by the
//! verification tests.

pub mod generic;
pub mod inhomog;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::ode::integrate_fixed;
use crate::prereq::OrbitPrerequisites;
use crate::symexpr::{SymbolicField, Var};
use std::collections::HashMap;
use std::sync::Arc;

pub use inhomog::GVariants;

/// Sorted multi-index of derivative directions, 1–3 entries over 0..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    len: u8,
    idx: [u8; 3],
}

impl MultiIndex {
    pub fn new(indices: &[u8]) -> Result<Self> {
        if indices.is_empty() || indices.len() > 3 {
            return Err(Error::UnsupportedIndex(format!(
                "multi-index must have 1..=3 entries, got {}",
                indices.len()
            )));
        }
        if indices.iter().any(|&i| i > 5) {
            return Err(Error::UnsupportedIndex(format!(
                "direction out of range in {indices:?}"
            )));
        }
        let mut idx = [0u8; 3];
        idx[..indices.len()].copy_from_slice(indices);
        idx[..indices.len()].sort_unstable();
        Ok(Self {
            len: indices.len() as u8,
            idx,
        })
    }

    pub fn order(&self) -> usize {
        self.len as usize
    }

    pub fn entries(&self) -> &[u8] {
        &self.idx[..self.len as usize]
    }

    fn count(&self, v: u8) -> usize {
        self.entries().iter().filter(|&&i| i == v).count()
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in self.entries() {
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

/// A table entry: either a structural zero or a dense function on [0, T].
#[derive(Debug, Clone)]
pub enum Entry {
    Zero,
    Dense(Arc<GridFn>),
}

impl Entry {
    pub fn is_zero(&self) -> bool {
        matches!(self, Entry::Zero)
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Entry::Zero => 0.0,
            Entry::Dense(f) => f.eval(t),
        }
    }

    pub fn end(&self) -> f64 {
        match self {
            Entry::Zero => 0.0,
            Entry::Dense(f) => f.end_val(),
        }
    }

    pub fn node(&self, k: usize) -> (f64, f64) {
        match self {
            Entry::Zero => (0.0, 0.0),
            Entry::Dense(f) => (f.vals[k], f.ders[k]),
        }
    }

    pub(crate) fn dense(f: GridFn) -> Self {
        Entry::Dense(Arc::new(f))
    }
}

/// The two 2×2 blocks of the linearized system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pair {
    /// components (x, pₓ) = (1, 3); coefficient V_xx(0, y(t))
    Transverse,
    /// components (y, p_y) = (2, 4); coefficient V_yy(0, y(t))
    Planar,
}

impl Pair {
    pub fn components(self) -> (u8, u8) {
        match self {
            Pair::Transverse => (1, 3),
            Pair::Planar => (2, 4),
        }
    }

    pub fn of_component(r: u8) -> Pair {
        match r {
            1 | 3 => Pair::Transverse,
            2 | 4 => Pair::Planar,
            _ => panic!("component out of range"),
        }
    }
}

fn is_transverse_dir(i: u8) -> bool {
    i == 1 || i == 3
}

/// The parity/block vanishing rule.
///
/// Strip the time indices; in the remainder let c be the number of transverse
/// directions ({1,3}) among the non-δ entries. Then the entry vanishes
/// identically iff
/// - nothing remains and the component is transverse,
/// - only δ remains and the component is transverse,
/// - one coordinate direction λ remains and r+λ is odd,
/// - two or more coordinate directions remain and c = 0 for a transverse
///   component or c = 1 for a planar component.
pub fn is_structural_zero(r: u8, idx: &MultiIndex) -> bool {
    let stripped: Vec<u8> = idx.entries().iter().copied().filter(|&i| i != 0).collect();
    let r_transverse = is_transverse_dir(r);
    let core: Vec<u8> = stripped.iter().copied().filter(|&i| i != 5).collect();
    match (stripped.len(), core.len()) {
        (0, _) => r_transverse,
        (1, 0) => r_transverse,
        (1, 1) | (2, 1) => (r + core[0]) % 2 == 1,
        (2, 2) | (3, 2) | (3, 3) => {
            let c = core.iter().filter(|&&i| is_transverse_dir(i)).count();
            if r_transverse {
                c == 0
            } else {
                c == 1
            }
        }
        _ => false,
    }
}

fn validate_pattern(r: u8, idx: &MultiIndex) -> Result<()> {
    if !(1..=4).contains(&r) {
        return Err(Error::UnsupportedIndex(format!(
            "component {r} out of range"
        )));
    }
    if idx.count(5) > 1 {
        return Err(Error::UnsupportedIndex(format!(
            "x^{r}_{idx}: second order in the deformation parameter is not supported"
        )));
    }
    Ok(())
}

/// All flow-derivative tables of orders 1–3, including time-mixed entries.
#[derive(Debug, Clone)]
pub struct FlowTables {
    pub grid: Arc<Grid>,
    pub period: f64,
    entries: HashMap<(u8, MultiIndex), Entry>,
    /// Inhomogeneities of orders 2–3, kept for the time-mixed entries and for
    /// diagnostic dumps.
    inhomogeneities: HashMap<(u8, MultiIndex), Entry>,
}

impl FlowTables {
    /// Look up x^r for a multi-index over directions 0..=5 (any order of
    /// entries). Structural zeros resolve without storage; unsupported
    /// patterns (two δ-indices) are an error.
    pub fn entry(&self, r: u8, indices: &[u8]) -> Result<Entry> {
        let idx = MultiIndex::new(indices)?;
        validate_pattern(r, &idx)?;
        if is_structural_zero(r, &idx) {
            return Ok(Entry::Zero);
        }
        self.entries
            .get(&(r, idx))
            .cloned()
            .ok_or_else(|| Error::MissingEntry(format!("x^{r}_{idx}")))
    }

    /// The entry value at t = T.
    pub fn value_at_period(&self, r: u8, indices: &[u8]) -> Result<f64> {
        Ok(self.entry(r, indices)?.end())
    }

    /// Stored inhomogeneity g^r for an order-2/3 multi-index over 1..=5.
    pub fn inhomogeneity(&self, r: u8, indices: &[u8]) -> Result<Entry> {
        let idx = MultiIndex::new(indices)?;
        validate_pattern(r, &idx)?;
        if is_structural_zero(r, &idx) {
            return Ok(Entry::Zero);
        }
        self.inhomogeneities
            .get(&(r, idx))
            .cloned()
            .ok_or_else(|| Error::MissingEntry(format!("g^{r}_{idx}")))
    }

    /// Raw shared handle, for the pointer-identity test of index permutation.
    pub fn raw_entry(&self, r: u8, indices: &[u8]) -> Option<&Entry> {
        let idx = MultiIndex::new(indices).ok()?;
        self.entries.get(&(r, idx))
    }

    /// Debug dump of one table entry as (t, value) rows on the shared grid.
    pub fn entry_csv(&self, r: u8, indices: &[u8]) -> Result<String> {
        let e = self.entry(r, indices)?;
        let mut out = String::from("t,value\n");
        for k in 0..=self.grid.n {
            let (v, _) = e.node(k);
            out.push_str(&format!("{:?},{:?}\n", self.grid.node(k), v));
        }
        Ok(out)
    }

    fn put(&mut self, r: u8, indices: &[u8], e: Entry) {
        let idx = MultiIndex::new(indices).unwrap();
        if is_structural_zero(r, &idx) {
            debug_assert!(
                e.is_zero(),
                "structurally zero x^{r}_{idx} populated with a dense entry"
            );
            return;
        }
        self.entries.insert((r, idx), e);
    }

    fn put_g(&mut self, r: u8, indices: &[u8], e: Entry) {
        let idx = MultiIndex::new(indices).unwrap();
        if is_structural_zero(r, &idx) {
            return;
        }
        self.inhomogeneities.insert((r, idx), e);
    }
}

/// Coefficient functions along the orbit: every partial derivative of V at
/// (0, y(t)) up to order 4 and of F at (0, y(t), 0, ẏ(t)) up to order 3, as
/// grid functions. Partials whose symbolic tree folds to the literal zero are
/// tagged [`Entry::Zero`], which lets the inhomogeneity builders prune terms.
#[derive(Debug, Clone)]
pub struct CoeffSet {
    pub grid: Arc<Grid>,
    v: HashMap<Vec<Var>, Entry>,
    f: HashMap<Vec<Var>, Entry>,
    pub has_deformation: bool,
}

fn var_of(i: u8) -> Var {
    match i {
        1 => Var::X,
        2 => Var::Y,
        3 => Var::Px,
        4 => Var::Py,
        _ => panic!("not a coordinate direction"),
    }
}

pub(crate) fn fd_derivative_fill(grid: &Grid, vals: &[f64]) -> Vec<f64> {
    // fourth-order differences of the nodal values, biased at the ends
    let n = grid.n;
    let h = grid.h();
    let mut d = vec![0.0; n + 1];
    for k in 0..=n {
        d[k] = if k >= 2 && k + 2 <= n {
            (vals[k - 2] - 8.0 * vals[k - 1] + 8.0 * vals[k + 1] - vals[k + 2]) / (12.0 * h)
        } else if k + 4 <= n && k < 2 {
            (-25.0 * vals[k] + 48.0 * vals[k + 1] - 36.0 * vals[k + 2] + 16.0 * vals[k + 3]
                - 3.0 * vals[k + 4])
                / (12.0 * h)
        } else {
            (25.0 * vals[k] - 48.0 * vals[k - 1] + 36.0 * vals[k - 2] - 16.0 * vals[k - 3]
                + 3.0 * vals[k - 4])
                / (12.0 * h)
        };
    }
    d
}

impl CoeffSet {
    pub fn build(
        v: &SymbolicField,
        f: Option<&SymbolicField>,
        pre: &OrbitPrerequisites,
    ) -> Result<Self> {
        let grid = pre.grid.clone();
        let mut vmap = HashMap::new();
        let mut fmap = HashMap::new();
        let v_vars = [Var::X, Var::Y];
        for idx in all_indices(&v_vars, 4) {
            vmap.insert(idx.clone(), coeff_entry(v, &idx, pre, idx.len() < 4)?);
        }
        if let Some(field) = f {
            for idx in all_indices(&Var::ALL, 3) {
                fmap.insert(idx.clone(), coeff_entry(field, &idx, pre, idx.len() < 3)?);
            }
        }
        Ok(Self {
            grid,
            v: vmap,
            f: fmap,
            has_deformation: f.is_some(),
        })
    }

    /// V-partial along the orbit, indexed by directions over {1,2}.
    pub fn vc(&self, dirs: &[u8]) -> &Entry {
        let mut key: Vec<Var> = dirs.iter().map(|&i| var_of(i)).collect();
        key.sort();
        self.v.get(&key).expect("V partial precomputed")
    }

    /// F-partial along the orbit, indexed by directions over {1..4}.
    /// Every partial of an absent deformation is the zero entry.
    pub fn fc(&self, dirs: &[u8]) -> &Entry {
        if !self.has_deformation {
            return &Entry::Zero;
        }
        let mut key: Vec<Var> = dirs.iter().map(|&i| var_of(i)).collect();
        key.sort();
        self.f.get(&key).expect("F partial precomputed")
    }
}

fn all_indices(vars: &[Var], max_order: usize) -> Vec<Vec<Var>> {
    let mut out: Vec<Vec<Var>> = vec![vec![]];
    let mut frontier: Vec<Vec<Var>> = vec![vec![]];
    for _ in 0..max_order {
        let mut next = Vec::new();
        for idx in &frontier {
            for &v in vars {
                if let Some(&last) = idx.last() {
                    if v < last {
                        continue;
                    }
                }
                let mut n = idx.clone();
                n.push(v);
                next.push(n);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn coeff_entry(
    field: &SymbolicField,
    idx: &[Var],
    pre: &OrbitPrerequisites,
    exact_derivative: bool,
) -> Result<Entry> {
    let expr = field.partial(idx)?;
    if expr.is_zero() {
        return Ok(Entry::Zero);
    }
    let grid = &pre.grid;
    let n = grid.n;
    let mut vals = vec![0.0; n + 1];
    for k in 0..=n {
        vals[k] = expr.eval(0.0, pre.y.vals[k], 0.0, pre.ydot.vals[k]);
    }
    let ders = if exact_derivative {
        // d/dt P(0,y,0,ẏ) = P_y·ẏ + P_py·ÿ, with ÿ = −V_y(0,y) = ẏ'
        let mut with_y = idx.to_vec();
        with_y.push(Var::Y);
        let mut with_py = idx.to_vec();
        with_py.push(Var::Py);
        let py_part = field.partial(&with_y)?;
        let ppy_part = field.partial(&with_py)?;
        (0..=n)
            .map(|k| {
                py_part.eval(0.0, pre.y.vals[k], 0.0, pre.ydot.vals[k]) * pre.ydot.vals[k]
                    + ppy_part.eval(0.0, pre.y.vals[k], 0.0, pre.ydot.vals[k]) * pre.ydot.ders[k]
            })
            .collect()
    } else {
        fd_derivative_fill(grid, &vals)
    };
    Ok(Entry::dense(GridFn::new(grid.clone(), vals, ders)))
}

/// Accumulator for sums of products of entries, with product-rule derivative
/// slots. Stays ZERO until a term with a non-zero factor set is added.
pub(crate) struct TermSum {
    grid: Arc<Grid>,
    vals: Vec<f64>,
    ders: Vec<f64>,
    any: bool,
}

impl TermSum {
    pub fn new(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            vals: vec![0.0; grid.n + 1],
            ders: vec![0.0; grid.n + 1],
            any: false,
        }
    }

    pub fn add1(&mut self, sign: f64, a: &Entry) {
        if a.is_zero() {
            return;
        }
        self.any = true;
        for k in 0..=self.grid.n {
            let (v, d) = a.node(k);
            self.vals[k] += sign * v;
            self.ders[k] += sign * d;
        }
    }

    pub fn add2(&mut self, sign: f64, a: &Entry, b: &Entry) {
        if a.is_zero() || b.is_zero() {
            return;
        }
        self.any = true;
        for k in 0..=self.grid.n {
            let (av, ad) = a.node(k);
            let (bv, bd) = b.node(k);
            self.vals[k] += sign * av * bv;
            self.ders[k] += sign * (ad * bv + av * bd);
        }
    }

    pub fn add3(&mut self, sign: f64, a: &Entry, b: &Entry, c: &Entry) {
        if a.is_zero() || b.is_zero() || c.is_zero() {
            return;
        }
        self.any = true;
        for k in 0..=self.grid.n {
            let (av, ad) = a.node(k);
            let (bv, bd) = b.node(k);
            let (cv, cd) = c.node(k);
            self.vals[k] += sign * av * bv * cv;
            self.ders[k] += sign * (ad * bv * cv + av * bd * cv + av * bv * cd);
        }
    }

    pub fn add4(&mut self, sign: f64, a: &Entry, b: &Entry, c: &Entry, d: &Entry) {
        if a.is_zero() || b.is_zero() || c.is_zero() || d.is_zero() {
            return;
        }
        self.any = true;
        for k in 0..=self.grid.n {
            let (av, ad) = a.node(k);
            let (bv, bd) = b.node(k);
            let (cv, cd) = c.node(k);
            let (dv, dd) = d.node(k);
            self.vals[k] += sign * av * bv * cv * dv;
            self.ders[k] += sign
                * (ad * bv * cv * dv + av * bd * cv * dv + av * bv * cd * dv + av * bv * cv * dd);
        }
    }

    pub fn into_entry(self) -> Entry {
        if self.any {
            Entry::dense(GridFn::new(self.grid, self.vals, self.ders))
        } else {
            Entry::Zero
        }
    }
}

/// Solve one 2×2 block with zero initial data by fixed-step integration.
///
/// With both inhomogeneities ZERO no integration happens and both outputs are
/// ZERO.
pub fn solve_inhomogeneous(
    pair: Pair,
    g_top: &Entry,
    g_bot: &Entry,
    pre: &OrbitPrerequisites,
    coeffs: &CoeffSet,
    substeps: usize,
) -> (Entry, Entry) {
    if g_top.is_zero() && g_bot.is_zero() {
        return (Entry::Zero, Entry::Zero);
    }
    let coeff = match pair {
        Pair::Transverse => coeffs.vc(&[1, 1]).clone(),
        Pair::Planar => coeffs.vc(&[2, 2]).clone(),
    };
    let rhs = |t: f64, s: &[f64], ds: &mut [f64]| {
        ds[0] = s[1] + g_top.at(t);
        ds[1] = -coeff.at(t) * s[0] + g_bot.at(t);
    };
    let grid = &pre.grid;
    let states = integrate_fixed(&rhs, &grid.nodes(), &[0.0, 0.0], substeps);
    let n = grid.n;
    let mut top_v = vec![0.0; n + 1];
    let mut top_d = vec![0.0; n + 1];
    let mut bot_v = vec![0.0; n + 1];
    let mut bot_d = vec![0.0; n + 1];
    for k in 0..=n {
        let t = grid.node(k);
        top_v[k] = states[k][0];
        bot_v[k] = states[k][1];
        top_d[k] = states[k][1] + g_top.at(t);
        bot_d[k] = -coeff.at(t) * states[k][0] + g_bot.at(t);
    }
    (
        Entry::dense(GridFn::new(grid.clone(), top_v, top_d)),
        Entry::dense(GridFn::new(grid.clone(), bot_v, bot_d)),
    )
}

/// Build every table (orders 1–3, including time-mixed entries).
pub fn build_tables(
    pre: &OrbitPrerequisites,
    coeffs: &CoeffSet,
    variants: GVariants,
    substeps: usize,
) -> Result<FlowTables> {
    let mut t = build_first_order(pre, coeffs, substeps);
    second_order(&mut t, pre, coeffs, variants, substeps)?;
    time_index_first_and_second(&mut t, pre, coeffs)?;
    third_order(&mut t, pre, coeffs, variants, substeps)?;
    time_index_third(&mut t, pre, coeffs)?;
    Ok(t)
}

/// First-order tables only: the cheap path used by the ε-sweep.
pub fn build_first_order(
    pre: &OrbitPrerequisites,
    coeffs: &CoeffSet,
    substeps: usize,
) -> FlowTables {
    let mut t = FlowTables {
        grid: pre.grid.clone(),
        period: pre.period,
        entries: HashMap::new(),
        inhomogeneities: HashMap::new(),
    };
    first_order(&mut t, pre, coeffs, substeps);
    t
}

fn first_order(t: &mut FlowTables, pre: &OrbitPrerequisites, coeffs: &CoeffSet, substeps: usize) {
    let share = |f: &GridFn| Entry::Dense(Arc::new(f.clone()));
    t.put(1, &[1], share(&pre.xi1));
    t.put(1, &[3], share(&pre.xi2));
    t.put(3, &[1], share(&pre.xi1dot));
    t.put(3, &[3], share(&pre.xi2dot));
    t.put(2, &[2], share(&pre.eta1));
    t.put(2, &[4], share(&pre.eta2));
    t.put(4, &[2], share(&pre.eta1dot));
    t.put(4, &[4], share(&pre.eta2dot));
    // time column: ẋ of the orbit itself
    t.put(2, &[0], share(&pre.ydot));
    let mut v2neg = TermSum::new(&pre.grid);
    v2neg.add1(-1.0, coeffs.vc(&[2]));
    t.put(4, &[0], v2neg.into_entry());
    // δ-column of the planar pair: g² = F_py, g⁴ = −F_y
    let g2 = coeffs.fc(&[4]).clone();
    let mut g4 = TermSum::new(&pre.grid);
    g4.add1(-1.0, coeffs.fc(&[2]));
    let (x25, x45) =
        solve_inhomogeneous(Pair::Planar, &g2, &g4.into_entry(), pre, coeffs, substeps);
    t.put(2, &[5], x25);
    t.put(4, &[5], x45);
}

fn family_indices_second() -> Vec<(u8, u8)> {
    let mut v = Vec::new();
    for l in 1..=5u8 {
        for m in l..=5u8 {
            if l == 5 && m == 5 {
                continue;
            }
            v.push((l, m));
        }
    }
    v
}

fn second_order(
    t: &mut FlowTables,
    pre: &OrbitPrerequisites,
    coeffs: &CoeffSet,
    variants: GVariants,
    substeps: usize,
) -> Result<()> {
    for (l, m) in family_indices_second() {
        for pair in [Pair::Transverse, Pair::Planar] {
            let (rt, rb) = pair.components();
            let idx = MultiIndex::new(&[l, m])?;
            if is_structural_zero(rt, &idx) && is_structural_zero(rb, &idx) {
                continue;
            }
            let g_top = inhomog::second_order(t, coeffs, variants, rt, l, m)?;
            let g_bot = inhomog::second_order(t, coeffs, variants, rb, l, m)?;
            let (top, bot) = solve_inhomogeneous(pair, &g_top, &g_bot, pre, coeffs, substeps);
            t.put(rt, &[l, m], top);
            t.put(rb, &[l, m], bot);
            t.put_g(rt, &[l, m], g_top);
            t.put_g(rb, &[l, m], g_bot);
        }
    }
    Ok(())
}

fn family_indices_third() -> Vec<(u8, u8, u8)> {
    let mut v = Vec::new();
    for l in 1..=4u8 {
        for m in l..=4u8 {
            for n in m..=4u8 {
                v.push((l, m, n));
            }
        }
    }
    for l in 1..=4u8 {
        for m in l..=4u8 {
            v.push((l, m, 5));
        }
    }
    v
}

fn third_order(
    t: &mut FlowTables,
    pre: &OrbitPrerequisites,
    coeffs: &CoeffSet,
    variants: GVariants,
    substeps: usize,
) -> Result<()> {
    for (l, m, n) in family_indices_third() {
        for pair in [Pair::Transverse, Pair::Planar] {
            let (rt, rb) = pair.components();
            let idx = MultiIndex::new(&[l, m, n])?;
            if is_structural_zero(rt, &idx) && is_structural_zero(rb, &idx) {
                continue;
            }
            let g_top = inhomog::third_order(t, coeffs, variants, rt, l, m, n)?;
            let g_bot = inhomog::third_order(t, coeffs, variants, rb, l, m, n)?;
            let (top, bot) = solve_inhomogeneous(pair, &g_top, &g_bot, pre, coeffs, substeps);
            t.put(rt, &[l, m, n], top);
            t.put(rb, &[l, m, n], bot);
            t.put_g(rt, &[l, m, n], g_top);
            t.put_g(rb, &[l, m, n], g_bot);
        }
    }
    Ok(())
}

/// Time-mixed entries that come from differentiating the block systems rather
/// than from new integrations: ẋ-type entries of orders 2 and the pure-time
/// rows.
fn time_index_first_and_second(
    t: &mut FlowTables,
    pre: &OrbitPrerequisites,
    coeffs: &CoeffSet,
) -> Result<()> {
    let grid = &pre.grid;
    // x^r_{0λ} = ẋ^r_λ for coordinate directions λ
    for l in 1..=4u8 {
        let x1l = t.entry(1, &[l])?;
        let x2l = t.entry(2, &[l])?;
        let x3l = t.entry(3, &[l])?;
        let x4l = t.entry(4, &[l])?;
        t.put(1, &[0, l], x3l.clone());
        t.put(2, &[0, l], x4l.clone());
        let mut s3 = TermSum::new(grid);
        s3.add2(-1.0, coeffs.vc(&[1, 1]), &x1l);
        t.put(3, &[0, l], s3.into_entry());
        let mut s4 = TermSum::new(grid);
        s4.add2(-1.0, coeffs.vc(&[2, 2]), &x2l);
        t.put(4, &[0, l], s4.into_entry());
    }
    // x^r_{05}: planar pair carries the deformation forcing
    let x25 = t.entry(2, &[5])?;
    let x45 = t.entry(4, &[5])?;
    let mut s205 = TermSum::new(grid);
    s205.add1(1.0, &x45);
    s205.add1(1.0, coeffs.fc(&[4]));
    t.put(2, &[0, 5], s205.into_entry());
    let mut s405 = TermSum::new(grid);
    s405.add2(-1.0, coeffs.vc(&[2, 2]), &x25);
    s405.add1(-1.0, coeffs.fc(&[2]));
    t.put(4, &[0, 5], s405.into_entry());
    // x²_{00} = ÿ = −V_y(t), shared with x⁴_0; x⁴_{00} = −V_yy·ẏ
    let x40 = t.entry(4, &[0])?;
    t.put(2, &[0, 0], x40);
    let ydot = t.entry(2, &[0])?;
    let mut s400 = TermSum::new(grid);
    s400.add2(-1.0, coeffs.vc(&[2, 2]), &ydot);
    t.put(4, &[0, 0], s400.into_entry());
    Ok(())
}

fn time_index_third(t: &mut FlowTables, pre: &OrbitPrerequisites, coeffs: &CoeffSet) -> Result<()> {
    let grid = &pre.grid;
    let ydot = t.entry(2, &[0])?;
    // x²_{000} = d/dt(−V_y) = −V_yy·ẏ  (same function as x⁴_{00})
    let x400 = t.entry(4, &[0, 0])?;
    t.put(2, &[0, 0, 0], x400);
    // x⁴_{000} = −V_yyy·ẏ² + V_y·V_yy
    let mut s = TermSum::new(grid);
    s.add3(-1.0, coeffs.vc(&[2, 2, 2]), &ydot, &ydot);
    s.add2(1.0, coeffs.vc(&[2]), coeffs.vc(&[2, 2]));
    t.put(4, &[0, 0, 0], s.into_entry());
    // x^r_{00λ}: second time derivatives of the first-order tables
    for l in 1..=4u8 {
        let x1l = t.entry(1, &[l])?;
        let x2l = t.entry(2, &[l])?;
        let x3l = t.entry(3, &[l])?;
        let x4l = t.entry(4, &[l])?;
        let x30l = t.entry(3, &[0, l])?; // = −V_xx·x¹_λ
        let x40l = t.entry(4, &[0, l])?; // = −V_yy·x²_λ
        t.put(1, &[0, 0, l], x30l);
        t.put(2, &[0, 0, l], x40l);
        let mut s3 = TermSum::new(grid);
        s3.add3(-1.0, coeffs.vc(&[1, 1, 2]), &ydot, &x1l);
        s3.add2(-1.0, coeffs.vc(&[1, 1]), &x3l);
        t.put(3, &[0, 0, l], s3.into_entry());
        let mut s4 = TermSum::new(grid);
        s4.add3(-1.0, coeffs.vc(&[2, 2, 2]), &ydot, &x2l);
        s4.add2(-1.0, coeffs.vc(&[2, 2]), &x4l);
        t.put(4, &[0, 0, l], s4.into_entry());
    }
    // x²_{005} = −V_yy·x²_5 − F_y + F_y,py·ẏ − F_py,py·V_y
    let x25 = t.entry(2, &[5])?;
    let x45 = t.entry(4, &[5])?;
    let v2 = coeffs.vc(&[2]);
    let mut s2 = TermSum::new(grid);
    s2.add2(-1.0, coeffs.vc(&[2, 2]), &x25);
    s2.add1(-1.0, coeffs.fc(&[2]));
    s2.add2(1.0, coeffs.fc(&[2, 4]), &ydot);
    s2.add2(-1.0, coeffs.fc(&[4, 4]), v2);
    t.put(2, &[0, 0, 5], s2.into_entry());
    // x⁴_{005} = −V_yyy·ẏ·x²_5 − V_yy·x⁴_5 − V_yy·F_py − F_yy·ẏ + F_y,py·V_y
    let mut s4 = TermSum::new(grid);
    s4.add3(-1.0, coeffs.vc(&[2, 2, 2]), &ydot, &x25);
    s4.add2(-1.0, coeffs.vc(&[2, 2]), &x45);
    s4.add2(-1.0, coeffs.vc(&[2, 2]), coeffs.fc(&[4]));
    s4.add2(-1.0, coeffs.fc(&[2, 2]), &ydot);
    s4.add2(1.0, coeffs.fc(&[2, 4]), v2);
    t.put(4, &[0, 0, 5], s4.into_entry());
    // ẋ-entries of the order-2 tables: x^r_{0λμ} from the block systems
    let mut keys: Vec<(u8, u8)> = family_indices_second();
    keys.retain(|&(l, m)| !(l == 5 && m == 5));
    for (l, m) in keys {
        let idx = MultiIndex::new(&[l, m])?;
        for pair in [Pair::Transverse, Pair::Planar] {
            let (rt, rb) = pair.components();
            if is_structural_zero(rt, &idx) && is_structural_zero(rb, &idx) {
                // differentiating a pair of zeros with zero g stays zero
                continue;
            }
            let top = t.entry(rt, &[l, m])?;
            let bot = t.entry(rb, &[l, m])?;
            let g_top = t.inhomogeneity(rt, &[l, m])?;
            let g_bot = t.inhomogeneity(rb, &[l, m])?;
            let mut st = TermSum::new(grid);
            st.add1(1.0, &bot);
            st.add1(1.0, &g_top);
            t.put(rt, &[0, l, m], st.into_entry());
            let coeff = match pair {
                Pair::Transverse => coeffs.vc(&[1, 1]),
                Pair::Planar => coeffs.vc(&[2, 2]),
            };
            let mut sb = TermSum::new(grid);
            sb.add2(-1.0, coeff, &top);
            sb.add1(1.0, &g_bot);
            t.put(rb, &[0, l, m], sb.into_entry());
        }
    }
    Ok(())
}
