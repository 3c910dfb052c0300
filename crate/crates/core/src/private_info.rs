//! How much of `Y` is about `X`.
//!
//! The minimal sufficient statistic `T(Y)` groups the `y` symbols that share
//! a posterior `P_{X|Y}(.|y)`. Its entropy is `C_X(Y)`, the private
//! information about `X` carried by `Y`, and `D_X(Y) = H(Y) - C_X(Y)` is
//! the part of `Y` unrelated to `X`.
//!
//! This module also bounds the common-information chain
//! `I(X;Y) <= C_W <= G <= C_X(Y) <= H(Y)`. Wyner's `C_W` and the common
//! entropy `G` are nonconvex minimizations over `W` with `X -> W -> Y`; both
//! are reported as upper bounds from a seeded search whose seeds make the
//! ordering hold by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::enumerate::SetPartitions;
use crate::error::{Error, Result};
use crate::prob::{
    entropy, entropy_bits, joint_entropy, mutual_information, posterior_kernel, JointDistribution, Kernel, Pmf,
};

/// Posteriors closer than this in L-inf are treated as equal.
pub const DEFAULT_POSTERIOR_TOL: f64 = 1e-9;

/// Largest `|Y|` accepted by [`c_x_oracle`].
pub const ORACLE_MAX_Y: usize = 6;

/// Acceptance threshold on `I(X;Y|W)` in the common-information searches.
pub const MARKOV_TOL: f64 = 1e-6;

pub const DEFAULT_SEARCH_RESTARTS: usize = 16;

/// A grouping of the `Y` alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Disjoint blocks covering `0..|Y|`, each sorted, ordered by first element.
    pub blocks: Vec<Vec<usize>>,
    /// Block masses under `P_Y`.
    pub block_pmf: Pmf,
}

impl Partition {
    /// Builds a partition from a block label per symbol (labels need not be contiguous).
    pub fn from_labels(labels: &[usize], py: &Pmf) -> Self {
        let mut firsts: Vec<usize> = Vec::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (y, &l) in labels.iter().enumerate() {
            match firsts.iter().position(|&f| labels[f] == l) {
                Some(b) => blocks[b].push(y),
                None => {
                    firsts.push(y);
                    blocks.push(vec![y]);
                }
            }
        }
        let mass = blocks
            .iter()
            .map(|b| b.iter().map(|&y| py.mass()[y]).sum())
            .collect();
        Self {
            blocks,
            block_pmf: Pmf::from_raw(mass),
        }
    }

    /// Block index of every symbol.
    pub fn labels(&self) -> Vec<usize> {
        let n = self.blocks.iter().map(Vec::len).sum();
        let mut out = vec![0; n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &y in block {
                out[y] = b;
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.block_pmf)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut i = i;
        while self.0[i] != r {
            let next = self.0[i];
            self.0[i] = r;
            i = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root so labels are stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `T(Y)`: symbols whose posteriors agree within `tol` (L-inf) share a block.
/// Near-equality is closed transitively.
pub fn sufficient_statistic(j: &JointDistribution, tol: f64) -> Partition {
    let post = posterior_kernel(j);
    let ny = j.ny();
    let mut uf = UnionFind::new(ny);
    for a in 0..ny {
        for b in a + 1..ny {
            if linf(post.row(a), post.row(b)) <= tol {
                uf.union(a, b);
            }
        }
    }
    let labels: Vec<usize> = (0..ny).map(|y| uf.find(y)).collect();
    Partition::from_labels(&labels, &j.p_y())
}

/// Joint table of `(X, W)` for a function `W` of `Y`.
fn x_block_table(j: &JointDistribution, part: &Partition) -> Vec<f64> {
    let nb = part.len();
    let mut t = vec![0.0; j.nx() * nb];
    for (b, block) in part.blocks.iter().enumerate() {
        for x in 0..j.nx() {
            t[x * nb + b] = block.iter().map(|&y| j.get(x, y)).sum();
        }
    }
    t
}

/// `I(X;Y|W)` for a function `W` of `Y`; zero exactly when `X -> W -> Y`.
pub fn markov_gap(j: &JointDistribution, part: &Partition) -> f64 {
    let nb = part.len();
    let xw = x_block_table(j, part);
    let py = j.p_y();
    let labels = part.labels();
    let mut gap = 0.0;
    for x in 0..j.nx() {
        for y in 0..j.ny() {
            let p = j.get(x, y);
            if p > 0.0 {
                let b = labels[y];
                let pw = part.block_pmf.mass()[b];
                gap += p * ((p * pw) / (xw[x * nb + b] * py.mass()[y])).log2();
            }
        }
    }
    gap.max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `C_X(Y) = H(T(Y))`, bits.
    pub c_x: f64,
    /// `D_X(Y) = H(Y) - C_X(Y)`, bits.
    pub d_x: f64,
    pub statistic: Partition,
}

pub fn decompose(j: &JointDistribution) -> Decomposition {
    decompose_with_tol(j, DEFAULT_POSTERIOR_TOL)
}

pub fn decompose_with_tol(j: &JointDistribution, tol: f64) -> Decomposition {
    let statistic = sufficient_statistic(j, tol);
    let hy = entropy(&j.p_y());
    let c_x = if statistic.len() == j.ny() {
        // identity partition: the block pmf is P_Y itself
        hy
    } else {
        statistic.entropy()
    };
    Decomposition {
        c_x,
        d_x: hy - c_x,
        statistic,
    }
}

/// Brute force for `C_X(Y)`: the least-entropy partition `W` of `Y` with
/// `I(X;Y|W) <= 1e-12`, found by visiting every partition of `Y`.
pub fn c_x_oracle(j: &JointDistribution) -> Result<(f64, Partition)> {
    if j.ny() > ORACLE_MAX_Y {
        return Err(Error::TooLarge(format!(
            "|Y| = {} exceeds the partition-enumeration limit {ORACLE_MAX_Y}",
            j.ny()
        )));
    }
    let py = j.p_y();
    let mut best: Option<(f64, Partition)> = None;
    for (labels, _) in SetPartitions::new(j.ny()) {
        let part = Partition::from_labels(&labels, &py);
        if markov_gap(j, &part) > 1e-12 {
            continue;
        }
        let h = part.entropy();
        if best.as_ref().is_none_or(|(bh, _)| h < *bh) {
            best = Some((h, part));
        }
    }
    best.ok_or_else(|| Error::Internal("identity partition infeasible".into()))
}

/// True iff all posteriors differ pairwise by more than `tol`.
pub fn distinct_posteriors(j: &JointDistribution, tol: f64) -> bool {
    let post = posterior_kernel(j);
    let ny = j.ny();
    (0..ny).all(|a| (a + 1..ny).all(|b| linf(post.row(a), post.row(b)) > tol))
}

/// Gacs-Korner common information: entropy of the connected component of
/// the bipartite support graph that `(X, Y)` falls in.
pub fn gacs_korner(j: &JointDistribution) -> f64 {
    let (nx, ny) = (j.nx(), j.ny());
    let mut uf = UnionFind::new(nx + ny);
    for x in 0..nx {
        for y in 0..ny {
            if j.get(x, y) > 0.0 {
                uf.union(x, nx + y);
            }
        }
    }
    let mut mass = vec![0.0; nx + ny];
    for x in 0..nx {
        let r = uf.find(x);
        mass[r] += j.row(x).iter().sum::<f64>();
    }
    entropy_bits(&mass)
}

/// `sum_w P_W(w) P_{X|W}(.|w) P_{Y|W}(.|w)` with `W = T(Y)`, compared to `P_XY`.
/// Returns the largest absolute deviation.
pub fn exact_generation_check(j: &JointDistribution) -> f64 {
    let part = sufficient_statistic(j, DEFAULT_POSTERIOR_TOL);
    let xw = x_block_table(j, &part);
    let nb = part.len();
    let py = j.p_y();
    let labels = part.labels();
    let mut dev: f64 = 0.0;
    for x in 0..j.nx() {
        for y in 0..j.ny() {
            let b = labels[y];
            let pw = part.block_pmf.mass()[b];
            let px_w = xw[x * nb + b] / pw;
            let py_w = py.mass()[y] / pw;
            dev = dev.max((pw * px_w * py_w - j.get(x, y)).abs());
        }
    }
    dev
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DpiCheck {
    pub c_u: f64,
    pub c_x: f64,
    pub holds: bool,
}

/// Checks `C_U(Y) <= C_X(Y)` for `U -> X -> Y`, with `u` the kernel `P_{U|X}`.
pub fn dpi_check(j: &JointDistribution, u: &Kernel) -> Result<DpiCheck> {
    if u.inputs() != j.nx() {
        return Err(Error::DimensionMismatch {
            expected: j.nx(),
            found: u.inputs(),
        });
    }
    let rows = (0..u.outputs())
        .map(|o| {
            (0..j.ny())
                .map(|y| (0..j.nx()).map(|x| u.get(x, o) * j.get(x, y)).sum())
                .collect()
        })
        .collect();
    let uy = JointDistribution::from_rows(rows)?;
    let c_u = decompose(&uy).c_x;
    let c_x = decompose(j).c_x;
    Ok(DpiCheck {
        c_u,
        c_x,
        holds: c_u <= c_x + 1e-9,
    })
}

/// One term `q * a(x) b(y)` of a decomposition of `P_XY` as a mixture of
/// product distributions, which is exactly a `W` with `X -> W -> Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductComponent {
    pub weight: f64,
    pub x_given_w: Vec<f64>,
    pub y_given_w: Vec<f64>,
}

/// A `W` for the common-information chain, together with its checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonInfoEstimate {
    /// The minimized objective, bits.
    pub value: f64,
    pub components: Vec<ProductComponent>,
    /// `I(X;Y|W)` of the induced kernel `P_{W|XY}`.
    pub markov_gap: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl CommonInfoEstimate {
    /// The kernel `P_{W|XY}`, rows indexed by `x * |Y| + y`.
    pub fn kernel(&self, j: &JointDistribution) -> Kernel {
        induced_kernel(j, &self.components)
    }
}

fn induced_kernel(j: &JointDistribution, comps: &[ProductComponent]) -> Kernel {
    let nw = comps.len();
    let mut data = Vec::with_capacity(j.nx() * j.ny() * nw);
    for x in 0..j.nx() {
        for y in 0..j.ny() {
            let row: Vec<f64> = comps
                .iter()
                .map(|c| c.weight * c.x_given_w[x] * c.y_given_w[y])
                .collect();
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                data.extend(row.iter().map(|v| v / s));
            } else {
                // cell outside the support; any row works
                data.extend((0..nw).map(|w| if w == 0 { 1.0 } else { 0.0 }));
            }
        }
    }
    Kernel::from_flat_unchecked(j.nx() * j.ny(), nw, data)
}

/// `I(X;Y|W)` under `P_XY * P_{W|XY}`.
pub fn conditional_mi_given_w(j: &JointDistribution, kernel: &Kernel) -> f64 {
    let (nx, ny, nw) = (j.nx(), j.ny(), kernel.outputs());
    let mut gap = 0.0;
    for w in 0..nw {
        let mut t = vec![0.0; nx * ny];
        for x in 0..nx {
            for y in 0..ny {
                t[x * ny + y] = j.get(x, y) * kernel.get(x * ny + y, w);
            }
        }
        let pw: f64 = t.iter().sum();
        if pw > 0.0 {
            t.iter_mut().for_each(|v| *v /= pw);
            gap += pw * crate::prob::mi_table(&t, nx, ny);
        }
    }
    gap
}

#[derive(Clone, Copy)]
enum Objective {
    /// `H(W)`
    Entropy,
    /// `I(X,Y;W) = sum_w q_w D(a_w x b_w || P_XY)`
    Wyner,
}

fn component_cost(obj: Objective, j: &JointDistribution, c: &ProductComponent) -> f64 {
    cost_parts(obj, j, c.weight, &c.x_given_w, &c.y_given_w)
}

fn cost_parts(obj: Objective, j: &JointDistribution, weight: f64, xs: &[f64], ys: &[f64]) -> f64 {
    match obj {
        Objective::Entropy => crate::prob::plogp(weight),
        Objective::Wyner => {
            let mut d = 0.0;
            for (x, &a) in xs.iter().enumerate() {
                if a <= 0.0 {
                    continue;
                }
                for (y, &b) in ys.iter().enumerate() {
                    let p = j.get(x, y);
                    let ab = a * b;
                    if ab > 0.0 && p > 0.0 {
                        d += ab * (ab / p).log2();
                    }
                }
            }
            weight * d
        }
    }
}

fn total_cost(obj: Objective, j: &JointDistribution, comps: &[ProductComponent]) -> f64 {
    comps.iter().map(|c| component_cost(obj, j, c)).sum()
}

fn seed_components(j: &JointDistribution) -> Vec<ProductComponent> {
    let part = sufficient_statistic(j, DEFAULT_POSTERIOR_TOL);
    let xw = x_block_table(j, &part);
    let nb = part.len();
    let py = j.p_y();
    part.blocks
        .iter()
        .enumerate()
        .map(|(b, block)| {
            let w = part.block_pmf.mass()[b];
            let mut yw = vec![0.0; j.ny()];
            for &y in block {
                yw[y] = py.mass()[y] / w;
            }
            ProductComponent {
                weight: w,
                x_given_w: (0..j.nx()).map(|x| xw[x * nb + b] / w).collect(),
                y_given_w: yw,
            }
        })
        .collect()
}

/// Geometry of the two-term mixture `q1 a1 b1' + q2 a2 b2'`.
///
/// Every normalized column lies on the line `a1 + t (a2 - a1)`; any other
/// nonnegative two-term decomposition picks new X-side generators at
/// `s1 <= t_min` and `s2 >= t_max` inside the simplex.
struct PairGeometry {
    a1: Vec<f64>,
    dir: Vec<f64>,
    col_mass: Vec<f64>,
    t: Vec<f64>,
    t_lo: f64,
    t_min: f64,
    t_max: f64,
    t_hi: f64,
}

impl PairGeometry {
    fn new(c1: &ProductComponent, c2: &ProductComponent) -> Option<Self> {
        let ny = c1.y_given_w.len();
        let dir: Vec<f64> = c2.x_given_w.iter().zip(&c1.x_given_w).map(|(b, a)| b - a).collect();
        let mut col_mass = vec![0.0; ny];
        let mut t = vec![f64::NAN; ny];
        let (mut t_min, mut t_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for y in 0..ny {
            let m1 = c1.weight * c1.y_given_w[y];
            let m2 = c2.weight * c2.y_given_w[y];
            col_mass[y] = m1 + m2;
            if col_mass[y] > 0.0 {
                t[y] = m2 / col_mass[y];
                t_min = t_min.min(t[y]);
                t_max = t_max.max(t[y]);
            }
        }
        if !t_min.is_finite() {
            return None;
        }
        let (mut t_lo, mut t_hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (a, d) in c1.x_given_w.iter().zip(&dir) {
            if *d > 0.0 {
                t_lo = t_lo.max(-a / d);
            } else if *d < 0.0 {
                t_hi = t_hi.min(a / -d);
            }
        }
        if !t_lo.is_finite() {
            t_lo = t_min;
        }
        if !t_hi.is_finite() {
            t_hi = t_max;
        }
        Some(Self {
            a1: c1.x_given_w.clone(),
            dir,
            col_mass,
            t,
            t_lo: t_lo.min(t_min),
            t_min,
            t_max,
            t_hi: t_hi.max(t_max),
        })
    }

    fn point(&self, s: f64) -> Vec<f64> {
        let mut p: Vec<f64> = self.a1.iter().zip(&self.dir).map(|(a, d)| (a + s * d).max(0.0)).collect();
        let sum: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= sum);
        p
    }

    /// All columns share one direction, so the pair is a single product.
    fn collapses(&self) -> bool {
        self.t_max - self.t_min <= 1e-14
    }

    fn merged(&self) -> ProductComponent {
        let total: f64 = self.col_mass.iter().sum();
        ProductComponent {
            weight: total,
            x_given_w: self.point(self.t_min),
            y_given_w: self.col_mass.iter().map(|m| m / total).collect(),
        }
    }

    fn fill_point(&self, s: f64, out: &mut [f64]) {
        for ((o, a), d) in out.iter_mut().zip(&self.a1).zip(&self.dir) {
            *o = (a + s * d).max(0.0);
        }
        let sum: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= sum);
    }

    /// Cost of [`Self::split`] without building the components.
    fn split_cost(&self, obj: Objective, j: &JointDistribution, s1: f64, s2: f64, sc: &mut SplitScratch) -> Option<f64> {
        if !(s2 > s1) {
            return None;
        }
        let (mut q1, mut q2) = (0.0, 0.0);
        for y in 0..self.col_mass.len() {
            let (m1, m2) = if self.col_mass[y] > 0.0 {
                let lambda = ((s2 - self.t[y]) / (s2 - s1)).clamp(0.0, 1.0);
                (self.col_mass[y] * lambda, self.col_mass[y] * (1.0 - lambda))
            } else {
                (0.0, 0.0)
            };
            sc.b1[y] = m1;
            sc.b2[y] = m2;
            q1 += m1;
            q2 += m2;
        }
        if q1 <= 0.0 || q2 <= 0.0 {
            return None;
        }
        sc.b1.iter_mut().for_each(|v| *v /= q1);
        sc.b2.iter_mut().for_each(|v| *v /= q2);
        self.fill_point(s1, &mut sc.p1);
        self.fill_point(s2, &mut sc.p2);
        Some(cost_parts(obj, j, q1, &sc.p1, &sc.b1) + cost_parts(obj, j, q2, &sc.p2, &sc.b2))
    }

    fn split(&self, s1: f64, s2: f64) -> Option<(ProductComponent, ProductComponent)> {
        if !(s2 > s1) {
            return None;
        }
        let ny = self.col_mass.len();
        let mut b1 = vec![0.0; ny];
        let mut b2 = vec![0.0; ny];
        for y in 0..ny {
            if self.col_mass[y] > 0.0 {
                let lambda = ((s2 - self.t[y]) / (s2 - s1)).clamp(0.0, 1.0);
                b1[y] = self.col_mass[y] * lambda;
                b2[y] = self.col_mass[y] * (1.0 - lambda);
            }
        }
        let q1: f64 = b1.iter().sum();
        let q2: f64 = b2.iter().sum();
        if q1 <= 0.0 || q2 <= 0.0 {
            return None;
        }
        b1.iter_mut().for_each(|v| *v /= q1);
        b2.iter_mut().for_each(|v| *v /= q2);
        Some((
            ProductComponent {
                weight: q1,
                x_given_w: self.point(s1),
                y_given_w: b1,
            },
            ProductComponent {
                weight: q2,
                x_given_w: self.point(s2),
                y_given_w: b2,
            },
        ))
    }
}

struct SplitScratch {
    p1: Vec<f64>,
    p2: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
}

impl SplitScratch {
    fn new(nx: usize, ny: usize) -> Self {
        Self {
            p1: vec![0.0; nx],
            p2: vec![0.0; nx],
            b1: vec![0.0; ny],
            b2: vec![0.0; ny],
        }
    }
}

enum PairMove {
    Merge(ProductComponent),
    Split(ProductComponent, ProductComponent),
}

/// Best re-decomposition of a pair under `obj`, if it beats the current cost.
fn improve_pair(
    obj: Objective,
    j: &JointDistribution,
    c1: &ProductComponent,
    c2: &ProductComponent,
) -> Option<(f64, PairMove)> {
    let g = PairGeometry::new(c1, c2)?;
    let current = component_cost(obj, j, c1) + component_cost(obj, j, c2);
    if g.collapses() {
        let m = g.merged();
        let c = component_cost(obj, j, &m);
        return (c < current - 1e-13).then_some((current - c, PairMove::Merge(m)));
    }
    let eval = |s1: f64, s2: f64| -> Option<(f64, ProductComponent, ProductComponent)> {
        let (p, q) = g.split(s1, s2)?;
        Some((component_cost(obj, j, &p) + component_cost(obj, j, &q), p, q))
    };
    let mut best: Option<(f64, ProductComponent, ProductComponent)> = None;
    let consider = |s1: f64, s2: f64, best: &mut Option<(f64, ProductComponent, ProductComponent)>| {
        if let Some(c) = eval(s1, s2) {
            if best.as_ref().is_none_or(|b| c.0 < b.0) {
                *best = Some(c);
            }
        }
    };
    let lerp = |a: f64, b: f64, f: f64| a + (b - a) * f;
    match obj {
        // H of the pair weights is extremal at the corners of the box
        Objective::Entropy => {
            for s1 in [g.t_lo, g.t_min] {
                for s2 in [g.t_max, g.t_hi] {
                    consider(s1, s2, &mut best);
                }
            }
        }
        Objective::Wyner => {
            const GRID: usize = 8;
            let mut sc = SplitScratch::new(j.nx(), j.ny());
            let mut cost = |fi: f64, fk: f64| {
                g.split_cost(obj, j, lerp(g.t_lo, g.t_min, fi), lerp(g.t_max, g.t_hi, fk), &mut sc)
                    .unwrap_or(f64::INFINITY)
            };
            let (mut bi, mut bj) = (0.0, 0.0);
            let mut bc = f64::INFINITY;
            for i in 0..=GRID {
                for k in 0..=GRID {
                    let (fi, fk) = (i as f64 / GRID as f64, k as f64 / GRID as f64);
                    let c = cost(fi, fk);
                    if c < bc {
                        bc = c;
                        bi = fi;
                        bj = fk;
                    }
                }
            }
            // coordinate golden-section refinement
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..6 {
                for axis in 0..2 {
                    let mut f = |v: f64| if axis == 0 { cost(v, bj) } else { cost(bi, v) };
                    let centre = if axis == 0 { bi } else { bj };
                    let (mut lo, mut hi) = ((centre - 0.125).max(0.0), (centre + 0.125).min(1.0));
                    let mut x1 = hi - phi * (hi - lo);
                    let mut x2 = lo + phi * (hi - lo);
                    let (mut f1, mut f2) = (f(x1), f(x2));
                    for _ in 0..30 {
                        if f1 < f2 {
                            hi = x2;
                            x2 = x1;
                            f2 = f1;
                            x1 = hi - phi * (hi - lo);
                            f1 = f(x1);
                        } else {
                            lo = x1;
                            x1 = x2;
                            f1 = f2;
                            x2 = lo + phi * (hi - lo);
                            f2 = f(x2);
                        }
                    }
                    let v = 0.5 * (lo + hi);
                    if f(v) < f(centre) {
                        if axis == 0 {
                            bi = v;
                        } else {
                            bj = v;
                        }
                    }
                }
            }
            consider(lerp(g.t_lo, g.t_min, bi), lerp(g.t_max, g.t_hi, bj), &mut best);
        }
    }
    let (c, p, q) = best?;
    (c < current - 1e-13).then_some((current - c, PairMove::Split(p, q)))
}

fn apply_move(comps: &mut Vec<ProductComponent>, a: usize, b: usize, mv: PairMove) {
    match mv {
        PairMove::Merge(m) => {
            comps[a] = m;
            comps.remove(b);
        }
        PairMove::Split(p, q) => {
            comps[a] = p;
            comps[b] = q;
        }
    }
}

fn markov_ok(j: &JointDistribution, comps: &[ProductComponent]) -> (bool, f64) {
    let k = induced_kernel(j, comps);
    let gap = conditional_mi_given_w(j, &k);
    // the mixture must also still reproduce P_XY
    let mut dev: f64 = 0.0;
    for x in 0..j.nx() {
        for y in 0..j.ny() {
            let m: f64 = comps.iter().map(|c| c.weight * c.x_given_w[x] * c.y_given_w[y]).sum();
            dev = dev.max((m - j.get(x, y)).abs());
        }
    }
    (gap <= MARKOV_TOL && dev <= 1e-9, gap)
}

/// Descent stops once no pair move gains this many bits.
const MIN_GAIN: f64 = 1e-10;

/// Greedy descent by pairwise re-decomposition.
fn descend(obj: Objective, j: &JointDistribution, mut comps: Vec<ProductComponent>, max_w: usize) -> Vec<ProductComponent> {
    for _ in 0..200 {
        let mut best: Option<(f64, usize, usize, PairMove)> = None;
        for a in 0..comps.len() {
            for b in a + 1..comps.len() {
                if let Some((gain, mv)) = improve_pair(obj, j, &comps[a], &comps[b]) {
                    if best.as_ref().is_none_or(|bb| gain > bb.0) {
                        best = Some((gain, a, b, mv));
                    }
                }
            }
        }
        // for I(X,Y;W) splitting a component in two can open new moves
        if best.is_none() && matches!(obj, Objective::Wyner) && comps.len() < max_w {
            for a in 0..comps.len() {
                for b in 0..comps.len() {
                    if a == b {
                        continue;
                    }
                    let mut half = comps[a].clone();
                    half.weight *= 0.5;
                    if let Some((gain, mv)) = improve_pair(obj, j, &half, &comps[b]) {
                        if gain > 1e-10 && best.as_ref().is_none_or(|bb| gain > bb.0) {
                            best = Some((gain, a, b, mv));
                        }
                    }
                }
            }
            if let Some((_, a, b, mv)) = best.take() {
                let mut trial = comps.clone();
                trial[a].weight *= 0.5;
                trial.push(trial[a].clone());
                apply_move(&mut trial, a, b, mv);
                if markov_ok(j, &trial).0 {
                    comps = trial;
                    continue;
                }
            }
            break;
        }
        match best {
            Some((gain, a, b, mv)) if gain >= MIN_GAIN => {
                let mut trial = comps.clone();
                apply_move(&mut trial, a, b, mv);
                if !markov_ok(j, &trial).0 {
                    break;
                }
                comps = trial;
            }
            _ => break,
        }
    }
    comps
}

/// Random exact re-decompositions of a few pairs, used to leave a local minimum.
fn kick(j: &JointDistribution, comps: &[ProductComponent], rng: &mut ChaCha8Rng) -> Vec<ProductComponent> {
    let mut out = comps.to_vec();
    if out.len() < 2 {
        return out;
    }
    for _ in 0..out.len() {
        let a = rng.gen_range(0..out.len());
        let mut b = rng.gen_range(0..out.len() - 1);
        if b >= a {
            b += 1;
        }
        let Some(g) = PairGeometry::new(&out[a], &out[b]) else {
            continue;
        };
        if g.collapses() {
            continue;
        }
        let s1 = g.t_lo + (g.t_min - g.t_lo) * rng.gen::<f64>();
        let s2 = g.t_max + (g.t_hi - g.t_max) * rng.gen::<f64>();
        if let Some((p, q)) = g.split(s1, s2) {
            let mut trial = out.clone();
            trial[a] = p;
            trial[b] = q;
            if markov_ok(j, &trial).0 {
                out = trial;
            }
        }
    }
    out
}

fn search(
    obj: Objective,
    j: &JointDistribution,
    seed_comps: Vec<ProductComponent>,
    seed: u64,
    restarts: usize,
) -> CommonInfoEstimate {
    let max_w = j.nx() * j.ny();
    let seed_cost = total_cost(obj, j, &seed_comps);
    let greedy = descend(obj, j, seed_comps.clone(), max_w);
    let mut runs: Vec<Vec<ProductComponent>> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let start = kick(j, &greedy, &mut rng);
            descend(obj, j, start, max_w)
        })
        .collect();
    runs.push(greedy);

    let mut best = seed_comps;
    let mut best_cost = seed_cost;
    for r in runs {
        let c = total_cost(obj, j, &r);
        if c < best_cost - 1e-12 && markov_ok(j, &r).0 {
            best_cost = c;
            best = r;
        }
    }
    let (_, gap) = markov_ok(j, &best);
    CommonInfoEstimate {
        value: best_cost.max(0.0),
        components: best,
        markov_gap: gap,
        restarts,
        seed,
    }
}

/// Upper bound on the common entropy `G(X;Y) = min H(W)` over `X -> W -> Y`,
/// seeded with `W = T(Y)` so the result never exceeds `C_X(Y)`.
pub fn common_entropy_upper(j: &JointDistribution, seed: u64, restarts: usize) -> CommonInfoEstimate {
    let seed_comps = seed_components(j);
    search(Objective::Entropy, j, seed_comps, seed, restarts)
}

/// Upper bound on Wyner's common information `C_W = min I(X,Y;W)`, seeded
/// with the minimizer `from` of the common-entropy search.
pub fn wyner_ci_upper_from(
    j: &JointDistribution,
    from: &CommonInfoEstimate,
    seed: u64,
    restarts: usize,
) -> CommonInfoEstimate {
    search(Objective::Wyner, j, from.components.clone(), seed, restarts)
}

/// Upper bound on Wyner's common information; runs the common-entropy search
/// first and starts from its minimizer.
pub fn wyner_ci_upper(j: &JointDistribution, seed: u64, restarts: usize) -> CommonInfoEstimate {
    let g = common_entropy_upper(j, seed, restarts);
    wyner_ci_upper_from(j, &g, seed, restarts)
}

/// Every quantity of the common-information chain for one joint.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CommonInfoBundle {
    pub mi: f64,
    pub cw_upper: f64,
    pub g_upper: f64,
    pub c_x: f64,
    pub h_y: f64,
    pub gk: f64,
    /// `H(X,Y) - cw_upper`: a lower bound on the private information `M(X;Y)`.
    pub m_lower: f64,
    /// Necessary conditional entropy `H(T(Y)|X)`.
    pub h_dagger: f64,
}

pub fn common_info_bundle(j: &JointDistribution, seed: u64) -> CommonInfoBundle {
    common_info_bundle_with(j, seed, DEFAULT_SEARCH_RESTARTS)
}

pub fn common_info_bundle_with(j: &JointDistribution, seed: u64, restarts: usize) -> CommonInfoBundle {
    let dec = decompose(j);
    let g = common_entropy_upper(j, seed, restarts);
    let cw = wyner_ci_upper_from(j, &g, seed, restarts);
    let hx = entropy(&j.p_x());
    let xt = x_block_table(j, &dec.statistic);
    CommonInfoBundle {
        mi: mutual_information(j),
        cw_upper: cw.value,
        g_upper: g.value,
        c_x: dec.c_x,
        h_y: entropy(&j.p_y()),
        gk: gacs_korner(j),
        m_lower: joint_entropy(j) - cw.value,
        h_dagger: (entropy_bits(&xt) - hx).max(0.0),
    }
}
