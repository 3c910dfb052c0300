//! Near-uniform binning of `Y^n` for vanishing-leakage deterministic filters.
//!
//! For each private symbol `x` the product distribution `P(.|x)^n` over
//! `Y^n` is cut into `2^r` bins of mass close to `2^-r`, by filling bins
//! greedily in decreasing probability until each reaches `2^-r - 2^-s`.
//! The filter first decodes `x` from `y^n` by maximum likelihood and then
//! outputs the bin index under the decoded symbol. Everything is computed
//! exactly by enumerating `Y^n`, so no statistical tolerance is involved.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::{conditional_min_entropy, l1_distance, mi_table, JointDistribution, Kernel, Pmf};

/// Hard limit on `n log2 |Y|`, i.e. at most `2^24` sequences.
pub const MAX_SEQUENCE_BITS: f64 = 24.0;

fn check_length(ny: usize, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Precondition("block length n must be at least 1".into()));
    }
    let bits = n as f64 * (ny as f64).log2();
    if bits > MAX_SEQUENCE_BITS + 1e-12 {
        return Err(Error::TooLarge(format!(
            "|Y|^n = {ny}^{n} needs {bits:.1} bits of index (limit {MAX_SEQUENCE_BITS})"
        )));
    }
    Ok(ny.pow(n as u32))
}

/// Symbol counts of the sequence with index `seq` (first symbol most significant).
fn type_counts(mut seq: usize, ny: usize, n: usize, counts: &mut [u32]) {
    counts.iter_mut().for_each(|c| *c = 0);
    for _ in 0..n {
        counts[seq % ny] += 1;
        seq /= ny;
    }
}

/// `prod_y P(y|x)^{count_y}`, multiplied in symbol order so that sequences
/// of the same type get bit-identical probabilities.
fn likelihood(row: &[f64], counts: &[u32]) -> f64 {
    row.iter()
        .zip(counts)
        .map(|(&p, &c)| if c == 0 { 1.0 } else { p.powi(c as i32) })
        .product()
}

/// Relative rounding allowance when comparing an accumulated bin mass with
/// `2^-r - 2^-s`; exact-arithmetic ties must close the bin.
pub const BIN_ROUNDING: f64 = 1e-12;

/// Decodes a sequence index into symbols.
pub fn sequence_symbols(mut seq: usize, ny: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = seq % ny;
        seq /= ny;
    }
    out
}

/// Index of a sequence of symbols (first symbol most significant).
pub fn sequence_index(symbols: &[usize], ny: usize) -> usize {
    symbols.iter().fold(0, |acc, &s| acc * ny + s)
}

/// `P(y^n | x) = prod_i P(y_i | x)` over all of `Y^n` in lexicographic order.
pub fn product_distribution(k: &Kernel, x: usize, n: usize) -> Result<Pmf> {
    let ny = k.outputs();
    let len = check_length(ny, n)?;
    if x >= k.inputs() {
        return Err(Error::Precondition(format!("no kernel row {x}")));
    }
    let row = k.row(x);
    let mut counts = vec![0u32; ny];
    let mass = (0..len)
        .map(|seq| {
            type_counts(seq, ny, n, &mut counts);
            likelihood(row, &counts)
        })
        .collect();
    Ok(Pmf::from_raw(mass))
}

/// The bins of one product distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Bins {
    /// `2^r` disjoint sets of sequence indices; the last one holds the leftover.
    pub members: Vec<Vec<usize>>,
    pub masses: Vec<f64>,
}

impl Bins {
    /// Bin index of every sequence; sequences outside the support go to the last bin.
    pub fn lookup(&self, len: usize) -> Vec<u32> {
        let last = (self.members.len() - 1) as u32;
        let mut out = vec![last; len];
        for (b, m) in self.members.iter().enumerate() {
            for &seq in m {
                out[seq] = b as u32;
            }
        }
        out
    }

    /// Closed bins lie in `[2^-r - 2^-s, 2^-r)` (up to [`BIN_ROUNDING`]) and the leftover is at most
    /// `2^{r-s} + 2^-r - 2^-s`.
    pub fn brackets_hold(&self, r: u32, s: u32) -> bool {
        let (lo, hi) = (2f64.powi(-(r as i32)) - 2f64.powi(-(s as i32)), 2f64.powi(-(r as i32)));
        let closed = &self.masses[..self.masses.len() - 1];
        let left = *self.masses.last().expect("at least one bin");
        let leftover_cap = 2f64.powi(r as i32 - s as i32) + hi - 2f64.powi(-(s as i32));
        closed.iter().all(|&m| m >= lo * (1.0 - BIN_ROUNDING) && m < hi) && left <= leftover_cap + 1e-12
    }
}

/// Greedy near-uniform binning of `p` into `2^r` bins.
///
/// Mass points are taken in decreasing probability (ties: smaller sequence
/// index first). A bin closes as soon as its mass reaches `2^-r - 2^-s`;
/// once `2^r - 1` bins are closed, the rest of the support forms the last bin.
pub fn build_bins(p: &Pmf, r: u32, s: u32) -> Result<Bins> {
    if r > 30 {
        return Err(Error::TooLarge(format!("2^{r} bins")));
    }
    let closing = (1usize << r) - 1;
    let threshold = (2f64.powi(-(r as i32)) - 2f64.powi(-(s as i32))) * (1.0 - BIN_ROUNDING);
    let mut order: Vec<usize> = (0..p.len()).filter(|&i| p.mass()[i] > 0.0).collect();
    order.sort_by(|&a, &b| p.mass()[b].total_cmp(&p.mass()[a]).then(a.cmp(&b)));

    let mut members: Vec<Vec<usize>> = Vec::with_capacity(closing + 1);
    let mut masses: Vec<f64> = Vec::with_capacity(closing + 1);
    let mut cur: Vec<usize> = Vec::new();
    let mut mass = 0.0;
    let mut rest = order.into_iter();
    while members.len() < closing {
        let Some(i) = rest.next() else {
            return Err(Error::Internal(format!(
                "mass ran out after {} of {closing} bins (requires s < n H*)",
                members.len()
            )));
        };
        cur.push(i);
        mass += p.mass()[i];
        if mass >= threshold {
            members.push(std::mem::take(&mut cur));
            masses.push(mass);
            mass = 0.0;
        }
    }
    cur.extend(rest);
    masses.push(cur.iter().map(|&i| p.mass()[i]).sum());
    members.push(cur);
    Ok(Bins { members, masses })
}

/// Maximum-likelihood decision on `x` from `y^n`; exact ties go to the
/// smaller `x` index.
pub fn ml_decode(k: &Kernel, yseq: &[usize]) -> usize {
    let mut counts = vec![0u32; k.outputs()];
    for &y in yseq {
        counts[y] += 1;
    }
    ml_from_counts(k, &counts)
}

fn ml_from_counts(k: &Kernel, counts: &[u32]) -> usize {
    let mut best = 0;
    let mut best_l = f64::NEG_INFINITY;
    for x in 0..k.inputs() {
        let l = likelihood(k.row(x), counts);
        if l > best_l {
            best_l = l;
            best = x;
        }
    }
    best
}

/// `P(X != decode(Y^n))` under `prior`, by exact summation over `Y^n`.
pub fn decoder_error_probability(k: &Kernel, prior: &Pmf, n: usize) -> Result<f64> {
    let ny = k.outputs();
    let len = check_length(ny, n)?;
    if prior.len() != k.inputs() {
        return Err(Error::DimensionMismatch {
            expected: k.inputs(),
            found: prior.len(),
        });
    }
    let mut counts = vec![0u32; ny];
    let mut err = 0.0;
    for seq in 0..len {
        type_counts(seq, ny, n, &mut counts);
        let xhat = ml_from_counts(k, &counts);
        for x in 0..k.inputs() {
            if x != xhat {
                err += prior.mass()[x] * likelihood(k.row(x), &counts);
            }
        }
    }
    Ok(err)
}

fn rows_distinct(k: &Kernel) -> bool {
    (0..k.inputs()).all(|a| (a + 1..k.inputs()).all(|b| k.row(a) != k.row(b)))
}

/// Bins for every private symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningPlan {
    pub n: usize,
    pub r: u32,
    pub s: u32,
    pub per_symbol_bins: Vec<Bins>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BinningReport {
    pub n: usize,
    pub delta: f64,
    /// `H*_inf(Y|X)`, bits.
    pub min_entropy: f64,
    pub r: u32,
    pub s: u32,
    /// `r / n`, bits per symbol.
    pub rate: f64,
    /// No bins were built (`r <= 0` or a noiseless kernel); `Z_n` is constant.
    pub degenerate: bool,
    /// `V(P~_x, U^r)` for each `x`, with `P~_x` the bin masses of `P(.|x)^n`.
    pub per_symbol_tv: Vec<f64>,
    /// `max_{x != x'} V(P~_x, P~_x')`.
    pub pairwise_tv_max: f64,
    /// `V(P_{Z_n X}, P_{Z_n} P_X)` for the decoded filter.
    pub joint_tv: f64,
    /// `sum_{x,x'} P(x) P(x') V(P~_x, P~_x') + 4 P(decoding error)`.
    pub jensen_bound: f64,
    /// `I(X; Z_n)`, bits.
    pub leakage: f64,
    /// `2 (2^{r-s} + 2^-r)`.
    pub analytic_bound: f64,
    pub decoder_error_prob: f64,
    pub brackets_hold: bool,
    pub bin_masses: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Runs the whole construction at block length `n` with slack `delta`,
/// choosing `r = floor(n (H* - delta))` and `s = floor(n (H* - delta / 2))`.
pub fn multiletter_evaluate(j: &JointDistribution, n: usize, delta: f64) -> Result<BinningReport> {
    let k = j.y_given_x();
    let prior = j.p_x();
    let (nx, ny) = (j.nx(), j.ny());
    let len = check_length(ny, n)?;
    let hmin = conditional_min_entropy(&k);
    let mut warnings = Vec::new();
    if !rows_distinct(&k) {
        let w = "rows of P(Y|X) are not pairwise distinct; decoding cannot be reliable".to_string();
        log::warn!("{w}");
        warnings.push(w);
    }

    let (r, s, degenerate) = if hmin == 0.0 {
        warnings.push("H*(Y|X) = 0: nothing to bin".into());
        (0, 0, true)
    } else {
        if !(delta > 0.0 && delta <= 2.0 / 3.0 * hmin * (1.0 + 1e-12)) {
            return Err(Error::Precondition(format!(
                "delta = {delta} must lie in (0, 2/3 H*] = (0, {}]",
                2.0 / 3.0 * hmin
            )));
        }
        let r = (n as f64 * (hmin - delta)).floor();
        let s = (n as f64 * (hmin - delta / 2.0)).floor();
        if r <= 0.0 {
            warnings.push(format!("r = {r} <= 0: zero-rate report"));
            (0, s.max(0.0) as u32, true)
        } else {
            (r as u32, s as u32, false)
        }
    };
    let nbins = 1usize << r;
    let analytic_bound = 2.0 * (2f64.powi(r as i32 - s as i32) + 2f64.powi(-(r as i32)));

    let dists: Vec<Pmf> = (0..nx)
        .into_par_iter()
        .map(|x| product_distribution(&k, x, n))
        .collect::<Result<_>>()?;
    let plan: Vec<Bins> = dists
        .par_iter()
        .map(|p| build_bins(p, r, s))
        .collect::<Result<_>>()?;
    let lookups: Vec<Vec<u32>> = plan.iter().map(|b| b.lookup(len)).collect();

    // joint of (X, Z_n) with Z_n = bin index under the decoded symbol
    let mut xz = vec![0.0; nx * nbins];
    let mut err = 0.0;
    let mut counts = vec![0u32; ny];
    for seq in 0..len {
        type_counts(seq, ny, n, &mut counts);
        let xhat = ml_from_counts(&k, &counts);
        let z = lookups[xhat][seq] as usize;
        for x in 0..nx {
            let p = prior.mass()[x] * dists[x].mass()[seq];
            xz[x * nbins + z] += p;
            if x != xhat {
                err += p;
            }
        }
    }
    let pz: Vec<f64> = (0..nbins).map(|z| (0..nx).map(|x| xz[x * nbins + z]).sum()).collect();
    let mut joint_tv = 0.0;
    // a single bin makes Z_n constant: exactly independent of X
    for x in (0..nx).filter(|_| nbins > 1) {
        for z in 0..nbins {
            joint_tv += (xz[x * nbins + z] - prior.mass()[x] * pz[z]).abs();
        }
    }
    let leakage = if nbins > 1 { mi_table(&xz, nx, nbins) } else { 0.0 };

    let uniform = vec![1.0 / nbins as f64; nbins];
    let per_symbol_tv: Vec<f64> = plan.iter().map(|b| l1_distance(&b.masses, &uniform)).collect();
    let mut pairwise_tv_max: f64 = 0.0;
    let mut jensen = 0.0;
    for a in 0..nx {
        for b in 0..nx {
            let v = l1_distance(&plan[a].masses, &plan[b].masses);
            if a != b {
                pairwise_tv_max = pairwise_tv_max.max(v);
            }
            jensen += prior.mass()[a] * prior.mass()[b] * v;
        }
    }
    let brackets_hold = degenerate || plan.iter().all(|b| b.brackets_hold(r, s));
    if let Some((x, tv)) = per_symbol_tv.iter().enumerate().find(|(_, &tv)| tv >= analytic_bound) {
        return Err(Error::Internal(format!(
            "V(P~_{x}, U^r) = {tv} is not below 2(2^(r-s) + 2^-r) = {analytic_bound}"
        )));
    }

    Ok(BinningReport {
        n,
        delta,
        min_entropy: hmin,
        r,
        s,
        rate: r as f64 / n as f64,
        degenerate,
        per_symbol_tv,
        pairwise_tv_max,
        joint_tv,
        jensen_bound: jensen + 4.0 * err,
        leakage,
        analytic_bound,
        decoder_error_prob: err,
        brackets_hold,
        bin_masses: plan.iter().map(|b| b.masses.clone()).collect(),
        warnings,
    })
}

/// The bins used by [`multiletter_evaluate`] with explicit `r` and `s`.
pub fn build_plan(k: &Kernel, n: usize, r: u32, s: u32) -> Result<BinningPlan> {
    let per_symbol_bins = (0..k.inputs())
        .map(|x| build_bins(&product_distribution(k, x, n)?, r, s))
        .collect::<Result<_>>()?;
    Ok(BinningPlan {
        n,
        r,
        s,
        per_symbol_bins,
    })
}
