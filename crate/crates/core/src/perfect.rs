//! Perfect privacy (`eps = 0`).
//!
//! The feasible filters form the polytope `D0 = { P_{Z|Y} : Z independent of X }`.
//! Utility `I(Y;Z)` is convex in the filter, so its maximum over `D0` sits on
//! a vertex; vertices are found by exhaustive basis enumeration of the
//! standard-form system, which is exact at the alphabet sizes this crate
//! targets.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::enumerate::{binomial, Combinations};
use crate::error::{Error, Result};
use crate::filters::{evaluate_filter, lex_cmp, PrivacyFilter};
use crate::prob::{posterior_kernel, JointDistribution, Kernel};
use crate::rate::{Method, RatePrivacyPoint};

/// Relative singular-value threshold used for the weak-independence rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Vertices closer than this (L-inf) are the same vertex.
pub const VERTEX_DEDUP_TOL: f64 = 1e-8;

/// Hard cap on the number of candidate bases examined.
pub const MAX_BASES: u128 = 20_000_000;

const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WeakIndependenceReport {
    pub weakly_independent: bool,
    /// Numerical rank of `{ P_{X|Y}(.|y) }`.
    pub rank: usize,
    pub tolerance: f64,
    pub singular_values: Vec<f64>,
}

/// `X` is weakly independent of `Y` when the posterior vectors are linearly dependent.
pub fn is_weakly_independent(j: &JointDistribution, tol: f64) -> WeakIndependenceReport {
    let post = posterior_kernel(j);
    let m = DMatrix::from_row_slice(post.inputs(), post.outputs(), post.as_flat());
    let mut singular_values: Vec<f64> = m.singular_values().iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let top = singular_values.first().copied().unwrap_or(0.0);
    let rank = singular_values.iter().filter(|&&s| s > tol * top).count();
    WeakIndependenceReport {
        weakly_independent: rank < j.ny(),
        rank,
        tolerance: tol,
        singular_values,
    }
}

#[derive(Debug, Clone)]
pub struct PolytopeVertexSet {
    /// Distinct vertices up to relabeling of `Z`, in canonical form.
    pub vertices: Vec<PrivacyFilter>,
    /// Largest equality-constraint residual over all vertices.
    pub constraint_residual_max: f64,
    /// Largest spread `max_z (max_x - min_x) P_{Z|X}(z|x)` over all vertices.
    pub independence_gap_max: f64,
    pub bases_examined: usize,
}

/// Equality system `A v = b` over `v[y * z_card + z] = P(z|y)`.
fn d0_system(j: &JointDistribution, z_card: usize) -> (DMatrix<f64>, DVector<f64>) {
    let (nx, ny) = (j.nx(), j.ny());
    let k = j.y_given_x();
    let n = ny * z_card;
    let rows = ny + z_card * (nx - 1);
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    for y in 0..ny {
        for z in 0..z_card {
            a[(y, y * z_card + z)] = 1.0;
        }
        b[y] = 1.0;
    }
    let mut r = ny;
    for z in 0..z_card {
        for x in 1..nx {
            for y in 0..ny {
                a[(r, y * z_card + z)] = k.get(0, y) - k.get(x, y);
            }
            r += 1;
        }
    }
    (a, b)
}

/// Drops linearly dependent rows (Gram-Schmidt with reorthogonalization).
fn independent_rows(a: &DMatrix<f64>, b: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut keep = Vec::new();
    for i in 0..a.nrows() {
        let row: DVector<f64> = a.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = row.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v -= q * c;
            }
        }
        let rest = v.norm();
        if rest > PIVOT_TOL * norm.max(1.0) {
            basis.push(v / rest);
            keep.push(i);
        }
    }
    let mut ar = DMatrix::zeros(keep.len(), n);
    let mut br = DVector::zeros(keep.len());
    for (r, &i) in keep.iter().enumerate() {
        ar.set_row(r, &a.row(i));
        br[r] = b[i];
    }
    (ar, br)
}

/// Max over z of the spread of `P_{Z|X}(z|.)` across x.
pub(crate) fn independence_gap(j: &JointDistribution, f: &PrivacyFilter) -> f64 {
    let k = j.y_given_x();
    let nz = f.z_card();
    let mut gap: f64 = 0.0;
    for z in 0..nz {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in 0..j.nx() {
            let pzx: f64 = (0..j.ny()).map(|y| k.get(x, y) * f.kernel().get(y, z)).sum();
            lo = lo.min(pzx);
            hi = hi.max(pzx);
        }
        gap = gap.max(hi - lo);
    }
    gap
}

fn solve_basis(a: &DMatrix<f64>, b: &DVector<f64>, cols: &[usize]) -> Option<Vec<f64>> {
    let r = a.nrows();
    let mut m = DMatrix::zeros(r, r);
    for (c, &col) in cols.iter().enumerate() {
        m.set_column(c, &a.column(col));
    }
    let lu = m.full_piv_lu();
    // reject numerically singular bases
    let u = lu.u();
    let diag_max = (0..r).map(|i| u[(i, i)].abs()).fold(0.0, f64::max);
    let diag_min = (0..r).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if r > 0 && (diag_max == 0.0 || diag_min < PIVOT_TOL * diag_max.max(1.0)) {
        return None;
    }
    let sol = lu.solve(b)?;
    Some(sol.iter().copied().collect())
}

/// Enumerates the vertices of `D0` for display alphabet size `z_card`.
pub fn d0_vertices(j: &JointDistribution, z_card: usize) -> Result<PolytopeVertexSet> {
    if z_card == 0 {
        return Err(Error::Precondition("z_card must be at least 1".into()));
    }
    let ny = j.ny();
    let n = ny * z_card;
    let (a_full, b_full) = d0_system(j, z_card);
    let (a, b) = independent_rows(&a_full, &b_full);
    let rank = a.nrows();
    let total = binomial(n, rank);
    if total > MAX_BASES {
        return Err(Error::TooLarge(format!(
            "{total} candidate bases for {n} variables (limit {MAX_BASES})"
        )));
    }

    let raw: Vec<Vec<f64>> = Combinations::new(n, rank)
        .par_bridge()
        .filter_map(|cols| {
            let xb = solve_basis(&a, &b, &cols)?;
            if xb.iter().any(|&v| v < -1e-9) {
                return None;
            }
            let mut v = vec![0.0; n];
            for (&c, &val) in cols.iter().zip(&xb) {
                v[c] = val.max(0.0);
            }
            // restore exact row stochasticity after clamping
            for row in v.chunks_mut(z_card) {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= s);
            }
            Some(v)
        })
        .collect();
    let bases_examined = usize::try_from(total).unwrap_or(usize::MAX);

    let mut vertices: Vec<PrivacyFilter> = Vec::new();
    let mut residual_max: f64 = 0.0;
    let mut gap_max: f64 = 0.0;
    for v in raw {
        let dv = DVector::from_column_slice(&v);
        let res = (&a_full * &dv - &b_full).amax();
        let f = PrivacyFilter::from_kernel_unchecked(Kernel::from_flat_unchecked(ny, z_card, v))
            .canonical();
        let dup = vertices.iter().any(|g| {
            g.kernel()
                .as_flat()
                .iter()
                .zip(f.kernel().as_flat())
                .all(|(p, q)| (p - q).abs() <= VERTEX_DEDUP_TOL)
        });
        if !dup {
            residual_max = residual_max.max(res);
            gap_max = gap_max.max(independence_gap(j, &f));
            vertices.push(f);
        }
    }
    if vertices.is_empty() {
        // the constant filter is always a vertex
        return Err(Error::Internal("perfect-privacy polytope has no vertex".into()));
    }
    vertices.sort_by(|p, q| lex_cmp(p.kernel().as_flat(), q.kernel().as_flat()));
    Ok(PolytopeVertexSet {
        vertices,
        constraint_residual_max: residual_max,
        independence_gap_max: gap_max,
        bases_examined,
    })
}

/// Exact `g_0(X;Y)`: the best vertex of `D0`.
pub fn g0(j: &JointDistribution, z_card: usize) -> Result<RatePrivacyPoint> {
    let set = d0_vertices(j, z_card)?;
    let mut best: Option<(f64, f64, &PrivacyFilter)> = None;
    for f in &set.vertices {
        let e = evaluate_filter(j, f)?;
        let better = match best {
            None => true,
            Some((u, _, g)) => {
                e.utility > u + 1e-12
                    || ((e.utility - u).abs() <= 1e-12
                        && lex_cmp(f.kernel().as_flat(), g.kernel().as_flat()).is_lt())
            }
        };
        if better {
            best = Some((e.utility, e.leakage, f));
        }
    }
    let (utility, leakage, filter) = best.expect("vertex set is nonempty");
    if leakage > 1e-9 {
        return Err(Error::Internal(format!(
            "perfect-privacy vertex leaks {leakage} bits"
        )));
    }
    Ok(RatePrivacyPoint {
        epsilon: 0.0,
        utility,
        achieved_leakage: leakage,
        filter: filter.clone(),
        method: Method::Vertex,
        restarts: 0,
        seed: None,
        notes: vec![format!("{} distinct vertices", set.vertices.len())],
    })
}
