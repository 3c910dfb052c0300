//! The rate-privacy function `g_eps(X;Y) = max { I(Y;Z) : I(X;Z) <= eps }`.
//!
//! Three routes are provided: exhaustive search over deterministic filters,
//! a brute-force grid over the product of simplices (used as an oracle), and
//! a seeded multistart local search that walks the leakage boundary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::enumerate::{simplex_grid, SetPartitions};
use crate::error::{Error, Result};
use crate::filters::{evaluate_filter, filter_from_function, image_entropy, lex_cmp, PrivacyFilter, Scratch};
use crate::perfect::g0;
use crate::prob::{entropy, mi_table, mutual_information, JointDistribution, Kernel};

/// Slack granted when testing `I(X;Z) <= eps` in floating point.
pub const LEAKAGE_TOL: f64 = 1e-10;

/// Upper limit on grid points visited by [`g_eps_oracle`].
pub const ORACLE_MAX_POINTS: u128 = 10_000_000;

pub const DEFAULT_RESTARTS: usize = 32;

const BISECTION_STEPS: usize = 48;
const MIN_STEP: f64 = 1e-9;
const MAX_SWEEPS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Method {
    Vertex,
    Deterministic,
    LocalSearch,
    GridOracle,
}

/// One point of the tradeoff: the best filter found at leakage budget `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePrivacyPoint {
    pub epsilon: f64,
    pub utility: f64,
    pub achieved_leakage: f64,
    pub filter: PrivacyFilter,
    pub method: Method,
    pub restarts: usize,
    pub seed: Option<u64>,
    /// Per-result remarks (relaxations applied, search statistics).
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffCurve {
    pub points: Vec<RatePrivacyPoint>,
}

fn better(u: f64, k: &[f64], best_u: f64, best_k: &[f64]) -> bool {
    u > best_u + 1e-12 || ((u - best_u).abs() <= 1e-12 && lex_cmp(k, best_k).is_lt())
}

fn column_merge(j: &JointDistribution, labels: &[usize], blocks: usize) -> Vec<f64> {
    let mut t = vec![0.0; j.nx() * blocks];
    for x in 0..j.nx() {
        for (y, &z) in labels.iter().enumerate() {
            t[x * blocks + z] += j.get(x, y);
        }
    }
    t
}

/// `g~_eps`: best deterministic filter with `I(f(Y);X) <= eps`.
///
/// Every partition of `Y` is visited once (relabelings of `Z` change
/// nothing), so the search is exhaustive over all functions of `Y`.
pub fn g_eps_deterministic(j: &JointDistribution, eps: f64) -> Result<RatePrivacyPoint> {
    if !(eps >= 0.0) {
        return Err(Error::Precondition(format!("eps must be >= 0, got {eps}")));
    }
    let py = j.p_y();
    let mut best: Option<(f64, f64, PrivacyFilter)> = None;
    for (labels, blocks) in SetPartitions::new(j.ny()) {
        let leak = mi_table(&column_merge(j, &labels, blocks), j.nx(), blocks);
        if leak > eps + LEAKAGE_TOL {
            continue;
        }
        let h = image_entropy(py.mass(), &labels, blocks);
        let f = filter_from_function(&labels, blocks)?;
        let take = match &best {
            None => true,
            Some((bu, _, bf)) => better(h, f.kernel().as_flat(), *bu, bf.kernel().as_flat()),
        };
        if take {
            best = Some((h, leak, f));
        }
    }
    let (utility, achieved_leakage, filter) =
        best.ok_or_else(|| Error::Internal("constant function was not feasible".into()))?;
    Ok(RatePrivacyPoint {
        epsilon: eps,
        utility,
        achieved_leakage,
        filter,
        method: Method::Deterministic,
        restarts: 0,
        seed: None,
        notes: vec!["leakage constraint I(f(Y);X) = eps relaxed to <= eps".into()],
    })
}

/// Number of grid points of the oracle for a given display alphabet.
fn oracle_points(ny: usize, z_card: usize, resolution: usize) -> u128 {
    let per_row = crate::enumerate::binomial(resolution + z_card - 1, z_card - 1);
    (0..ny).fold(1u128, |acc, _| acc.saturating_mul(per_row))
}

/// Largest display alphabet (at most `|Y| + 1`) the oracle grid can afford.
pub fn oracle_z_card(ny: usize, resolution: usize) -> Option<usize> {
    (2..=ny + 1)
        .rev()
        .find(|&z| oracle_points(ny, z, resolution) <= ORACLE_MAX_POINTS)
}

/// Brute-force grid oracle with an automatically chosen display alphabet.
pub fn g_eps_oracle(j: &JointDistribution, eps: f64, resolution: usize) -> Result<RatePrivacyPoint> {
    let z_card = oracle_z_card(j.ny(), resolution).ok_or_else(|| {
        Error::TooLarge(format!(
            "grid of resolution {resolution} over {} rows exceeds {ORACLE_MAX_POINTS} points",
            j.ny()
        ))
    })?;
    g_eps_oracle_with_z(j, eps, resolution, z_card)
}

/// Best feasible filter on the grid `{ k / resolution }` of each row simplex.
///
/// The grid is a subset of the feasible set, so the result is a lower
/// bound on `g_eps` restricted to `z_card` display symbols.
pub fn g_eps_oracle_with_z(
    j: &JointDistribution,
    eps: f64,
    resolution: usize,
    z_card: usize,
) -> Result<RatePrivacyPoint> {
    if resolution == 0 || z_card == 0 {
        return Err(Error::Precondition("resolution and z_card must be positive".into()));
    }
    let points = oracle_points(j.ny(), z_card, resolution);
    if points > ORACLE_MAX_POINTS {
        return Err(Error::TooLarge(format!(
            "{points} grid points (limit {ORACLE_MAX_POINTS})"
        )));
    }
    let ny = j.ny();
    let rows: Vec<Vec<f64>> = simplex_grid(z_card, resolution)
        .into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / resolution as f64).collect())
        .collect();
    let per_row = rows.len();

    // split on the first row; each task walks the remaining rows odometer-style
    let best = (0..per_row)
        .into_par_iter()
        .map(|first| {
            let mut scratch = Scratch::new(j, z_card);
            let mut idx = vec![0usize; ny];
            idx[0] = first;
            let mut kernel = vec![0.0; ny * z_card];
            let mut best: Option<(f64, f64, Vec<f64>)> = None;
            loop {
                for (y, &i) in idx.iter().enumerate() {
                    kernel[y * z_card..(y + 1) * z_card].copy_from_slice(&rows[i]);
                }
                let (u, l) = scratch.eval(j, &kernel);
                if l <= eps + LEAKAGE_TOL {
                    let take = match &best {
                        None => true,
                        Some((bu, _, bk)) => better(u, &kernel, *bu, bk),
                    };
                    if take {
                        best = Some((u, l, kernel.clone()));
                    }
                }
                // advance rows 1..ny
                let mut pos = ny;
                loop {
                    if pos <= 1 {
                        return best;
                    }
                    pos -= 1;
                    idx[pos] += 1;
                    if idx[pos] < per_row {
                        break;
                    }
                    idx[pos] = 0;
                }
            }
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) | (x, None) => x,
                (Some(a), Some(b)) => {
                    if better(b.0, &b.2, a.0, &a.2) {
                        Some(b)
                    } else {
                        Some(a)
                    }
                }
            },
        );
    let (utility, achieved_leakage, kernel) =
        best.ok_or_else(|| Error::Internal("no feasible grid point".into()))?;
    Ok(RatePrivacyPoint {
        epsilon: eps,
        utility,
        achieved_leakage,
        filter: PrivacyFilter::from_kernel_unchecked(Kernel::from_flat_unchecked(ny, z_card, kernel)),
        method: Method::GridOracle,
        restarts: 0,
        seed: None,
        notes: vec![format!("grid resolution {resolution}, |Z| = {z_card}, {points} points")],
    })
}

/// Knobs for [`g_eps_solve_with`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Display alphabet size; `|Y| + 1` when unset.
    pub z_card: Option<usize>,
    /// Extra starting filter, e.g. the optimum at a smaller budget.
    pub warm_start: Option<PrivacyFilter>,
}

impl SolveOptions {
    pub fn new(restarts: usize, seed: u64) -> Self {
        Self {
            restarts,
            seed,
            z_card: None,
            warm_start: None,
        }
    }
}

/// Local search state shared by all restarts of one solve.
struct Walker<'a> {
    j: &'a JointDistribution,
    eps: f64,
    nz: usize,
    /// A strictly feasible point (leakage ~ 0) used for radial retraction.
    anchor: Vec<f64>,
}

impl Walker<'_> {
    fn point(&self, t: f64, target: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(&self.anchor).zip(target) {
            *o = (a + t * (b - a)).max(0.0);
        }
    }

    /// Largest `t` in `[lo, hi]` on the ray anchor -> target with leakage <= eps.
    fn bisect(&self, s: &mut Scratch, target: &[f64], mut lo: f64, mut hi: f64, buf: &mut [f64]) -> f64 {
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            self.point(mid, target, buf);
            if s.leakage(self.j, buf) <= self.eps + LEAKAGE_TOL {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Moves a candidate onto the feasible set along the ray from the anchor.
    /// Infeasible candidates are pulled in to the leakage boundary; feasible
    /// ones are also tried pushed out to the boundary (or the simplex edge),
    /// keeping whichever has more utility.
    fn retract(&self, s: &mut Scratch, cand: &[f64], buf: &mut [f64]) -> (f64, f64, Vec<f64>) {
        let (u, l) = s.eval(self.j, cand);
        if l > self.eps + LEAKAGE_TOL {
            let t = self.bisect(s, cand, 0.0, 1.0, buf);
            self.point(t, cand, buf);
            let (u, l) = s.eval(self.j, buf);
            return (u, l, buf.to_vec());
        }
        // how far the ray stays inside the product of simplices
        let mut t_max = f64::INFINITY;
        for (a, b) in self.anchor.iter().zip(cand) {
            if b < a {
                t_max = t_max.min(a / (a - b));
            }
        }
        if !t_max.is_finite() || t_max <= 1.0 + 1e-12 {
            return (u, l, cand.to_vec());
        }
        self.point(t_max, cand, buf);
        let (ue, le) = s.eval(self.j, buf);
        let (ue, le, ext) = if le <= self.eps + LEAKAGE_TOL {
            (ue, le, buf.to_vec())
        } else {
            let t = self.bisect(s, cand, 1.0, t_max, buf);
            self.point(t, cand, buf);
            let (ue, le) = s.eval(self.j, buf);
            (ue, le, buf.to_vec())
        };
        if ue > u + 1e-13 {
            (ue, le, ext)
        } else {
            (u, l, cand.to_vec())
        }
    }

    /// Coordinate-exchange ascent with a halving step.
    fn climb(&self, start: Vec<f64>) -> (f64, f64, Vec<f64>, usize) {
        let ny = self.j.ny();
        let nz = self.nz;
        let mut s = Scratch::new(self.j, nz);
        let mut buf = vec![0.0; start.len()];
        let (mut cu, mut cl, mut cur) = self.retract(&mut s, &start, &mut buf);
        let mut step = 0.5;
        let mut sweeps = 0;
        let mut cand = cur.clone();
        while step >= MIN_STEP && sweeps < MAX_SWEEPS {
            sweeps += 1;
            let mut improved = false;
            for y in 0..ny {
                for a in 0..nz {
                    for b in 0..nz {
                        if a == b || cur[y * nz + a] <= 0.0 {
                            continue;
                        }
                        let amt = step.min(cur[y * nz + a]);
                        cand.copy_from_slice(&cur);
                        cand[y * nz + a] -= amt;
                        cand[y * nz + b] += amt;
                        let (u, l, p) = self.retract(&mut s, &cand, &mut buf);
                        if u > cu + 1e-13 {
                            cu = u;
                            cl = l;
                            cur = p;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (cu, cl, cur, sweeps)
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let ny = self.j.ny();
        let mut d = vec![0.0; ny * self.nz];
        for y in 0..ny {
            d[y * self.nz + rng.gen_range(0..self.nz)] = 1.0;
        }
        // a random point of the segment anchor -> d; retraction then puts it on the boundary
        let t: f64 = rng.gen_range(0.25..=1.0);
        let mut out = vec![0.0; d.len()];
        self.point(t, &d, &mut out);
        out
    }
}

/// `g_eps` by seeded multistart local search; see [`g_eps_solve_with`].
pub fn g_eps_solve(j: &JointDistribution, eps: f64, restarts: usize, seed: u64) -> Result<RatePrivacyPoint> {
    g_eps_solve_with(j, eps, &SolveOptions::new(restarts, seed))
}

/// Multistart search for `g_eps`.
///
/// Starts are mixtures of random deterministic filters with the best
/// perfect-privacy vertex. Each start climbs by moving mass between two
/// display symbols of one row; candidates that overshoot the budget are
/// pulled back along the segment to that vertex, where leakage is zero
/// and convex, so the boundary crossing is unique. The result is never
/// worse than the deterministic optimum or `g_0` at the same budget.
pub fn g_eps_solve_with(j: &JointDistribution, eps: f64, opts: &SolveOptions) -> Result<RatePrivacyPoint> {
    if !(eps >= 0.0) {
        return Err(Error::Precondition(format!("eps must be >= 0, got {eps}")));
    }
    let ny = j.ny();
    let nz = opts.z_card.unwrap_or(ny + 1);
    if nz == 0 {
        return Err(Error::Precondition("z_card must be at least 1".into()));
    }
    let mi = mutual_information(j);
    let hy = entropy(&j.p_y());

    if eps >= mi - LEAKAGE_TOL && nz >= ny {
        let f = PrivacyFilter::identity(ny).padded(nz);
        let e = evaluate_filter(j, &f)?;
        return Ok(RatePrivacyPoint {
            epsilon: eps,
            utility: e.utility.max(hy),
            achieved_leakage: e.leakage,
            filter: f,
            method: Method::Deterministic,
            restarts: 0,
            seed: Some(opts.seed),
            notes: vec!["budget covers I(X;Y); identity filter is optimal".into()],
        });
    }

    let vertex = g0(j, nz)?;
    if eps == 0.0 {
        return Ok(RatePrivacyPoint {
            seed: Some(opts.seed),
            ..vertex
        });
    }
    let det = g_eps_deterministic(j, eps)?;

    let walker = Walker {
        j,
        eps,
        nz,
        anchor: vertex.filter.padded(nz).kernel().as_flat().to_vec(),
    };

    let mut seeds: Vec<Option<Vec<f64>>> = Vec::new();
    if det.filter.z_card() <= nz {
        seeds.push(Some(det.filter.padded(nz).kernel().as_flat().to_vec()));
    }
    if let Some(w) = &opts.warm_start {
        if w.y_card() == ny && w.z_card() <= nz {
            seeds.push(Some(w.padded(nz).kernel().as_flat().to_vec()));
        }
    }
    let fixed = seeds.len();
    seeds.extend((0..opts.restarts).map(|_| None));

    let results: Vec<(f64, f64, Vec<f64>, usize)> = seeds
        .into_par_iter()
        .enumerate()
        .map(|(i, start)| {
            let start = start.unwrap_or_else(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream((i - fixed) as u64);
                walker.random_start(&mut rng)
            });
            walker.climb(start)
        })
        .collect();

    let mut best_u = vertex.utility;
    let mut best_l = vertex.achieved_leakage;
    let mut best_k = vertex.filter.padded(nz).kernel().as_flat().to_vec();
    let mut method = Method::Vertex;
    if det.filter.z_card() <= nz {
        let dk = det.filter.padded(nz).kernel().as_flat().to_vec();
        if better(det.utility, &dk, best_u, &best_k) {
            best_u = det.utility;
            best_l = det.achieved_leakage;
            best_k = dk;
            method = Method::Deterministic;
        }
    }
    let mut sweeps = 0;
    for (u, l, k, s) in results {
        sweeps += s;
        if better(u, &k, best_u, &best_k) {
            best_u = u;
            best_l = l;
            best_k = k;
            method = Method::LocalSearch;
        }
    }
    // the deterministic optimum may need more symbols than the search alphabet
    let mut filter = PrivacyFilter::from_kernel_unchecked(Kernel::from_flat_unchecked(ny, nz, best_k));
    if det.utility > best_u + 1e-12 {
        best_u = det.utility;
        best_l = det.achieved_leakage;
        filter = det.filter.clone();
        method = Method::Deterministic;
    }
    Ok(RatePrivacyPoint {
        epsilon: eps,
        utility: best_u,
        achieved_leakage: best_l,
        filter,
        method,
        restarts: opts.restarts,
        seed: Some(opts.seed),
        notes: vec![format!("|Z| = {nz}, {sweeps} exchange sweeps")],
    })
}

/// Tradeoff curve over an ascending budget grid, warm-starting each point
/// from the previous optimum and enforcing monotonicity by running maximum.
pub fn g_eps_curve(j: &JointDistribution, eps_grid: &[f64], opts: &SolveOptions) -> Result<TradeoffCurve> {
    if eps_grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Precondition("eps grid must be sorted ascending".into()));
    }
    let mi = mutual_information(j);
    let hy = entropy(&j.p_y());
    let mut points: Vec<RatePrivacyPoint> = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let mut o = opts.clone();
        if let Some(prev) = points.last() {
            o.warm_start = Some(prev.filter.clone());
        }
        let mut p = g_eps_solve_with(j, eps, &o)?;
        if let Some(prev) = points.last() {
            if p.utility < prev.utility {
                p = RatePrivacyPoint {
                    epsilon: eps,
                    notes: vec!["running maximum: carried over from smaller budget".into()],
                    ..prev.clone()
                };
            }
        }
        if eps >= mi - LEAKAGE_TOL && (p.utility - hy).abs() > 1e-6 {
            return Err(Error::Internal(format!(
                "curve at eps={eps} >= I(X;Y) gave {} instead of H(Y)={hy}",
                p.utility
            )));
        }
        points.push(p);
    }
    if let Some(first) = points.first() {
        if first.epsilon == 0.0 {
            let g = g0(j, opts.z_card.unwrap_or(j.ny() + 1))?;
            if (first.utility - g.utility).abs() > 1e-6 {
                return Err(Error::Internal(format!(
                    "curve starts at {} but g0 = {}",
                    first.utility, g.utility
                )));
            }
        }
    }
    Ok(TradeoffCurve { points })
}
