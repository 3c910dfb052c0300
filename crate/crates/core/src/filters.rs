//! Privacy filters `P_{Z|Y}` and their exact evaluation along `X -> Y -> Z`.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::{entropy_bits, mi_table, JointDistribution, Kernel, Pmf};

/// A channel from the observable alphabet `Y` to a display alphabet `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyFilter {
    kernel: Kernel,
    deterministic: bool,
}

impl PrivacyFilter {
    /// Wraps a kernel, enforcing the default display-alphabet bound `|Z| <= |Y| + 1`.
    pub fn new(kernel: Kernel) -> Result<Self> {
        let limit = kernel.inputs() + 1;
        Self::with_z_limit(kernel, limit)
    }

    pub fn with_z_limit(kernel: Kernel, limit: usize) -> Result<Self> {
        if kernel.outputs() > limit {
            return Err(Error::Precondition(format!(
                "filter has {} outputs, limit is {limit}",
                kernel.outputs()
            )));
        }
        let deterministic = kernel.is_deterministic();
        Ok(Self {
            kernel,
            deterministic,
        })
    }

    pub(crate) fn from_kernel_unchecked(kernel: Kernel) -> Self {
        let deterministic = kernel.is_deterministic();
        Self {
            kernel,
            deterministic,
        }
    }

    pub fn identity(ny: usize) -> Self {
        Self::from_kernel_unchecked(Kernel::identity(ny))
    }

    /// Every `y` goes to display symbol 0.
    pub fn constant(ny: usize, z_card: usize) -> Self {
        Self::from_kernel_unchecked(Kernel::constant(ny, &Pmf::point(z_card, 0)))
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn z_card(&self) -> usize {
        self.kernel.outputs()
    }

    pub fn y_card(&self) -> usize {
        self.kernel.inputs()
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    /// Same filter over a larger display alphabet (extra symbols get no mass).
    pub fn padded(&self, z_card: usize) -> Self {
        assert!(z_card >= self.z_card(), "cannot pad to a smaller alphabet");
        let mut data = Vec::with_capacity(self.y_card() * z_card);
        for row in self.kernel.rows() {
            data.extend_from_slice(row);
            data.extend(std::iter::repeat_n(0.0, z_card - row.len()));
        }
        Self {
            kernel: Kernel::from_flat_unchecked(self.y_card(), z_card, data),
            deterministic: self.deterministic,
        }
    }

    /// Canonical representative under relabeling of `Z`: columns sorted in
    /// decreasing lexicographic order (read down the `y` axis).
    pub fn canonical(&self) -> Self {
        let (ny, nz) = (self.y_card(), self.z_card());
        let mut cols: Vec<Vec<f64>> = (0..nz)
            .map(|z| (0..ny).map(|y| self.kernel.get(y, z)).collect())
            .collect();
        cols.sort_by(|a, b| lex_cmp(b, a));
        let mut data = vec![0.0; ny * nz];
        for (z, col) in cols.iter().enumerate() {
            for (y, &v) in col.iter().enumerate() {
                data[y * nz + z] = v;
            }
        }
        Self {
            kernel: Kernel::from_flat_unchecked(ny, nz, data),
            deterministic: self.deterministic,
        }
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Both sides of the tradeoff for one filter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterEvaluation {
    /// `I(Y;Z)` in bits.
    pub utility: f64,
    /// `I(X;Z)` in bits.
    pub leakage: f64,
    #[serde(skip)]
    pub induced_pz: Pmf,
}

/// Exact utility and leakage of `f` on the joint `j`.
pub fn evaluate_filter(j: &JointDistribution, f: &PrivacyFilter) -> Result<FilterEvaluation> {
    if f.y_card() != j.ny() {
        return Err(Error::DimensionMismatch {
            expected: j.ny(),
            found: f.y_card(),
        });
    }
    let (utility, leakage, pz) = evaluate_raw(j, f.kernel.as_flat(), f.z_card());
    Ok(FilterEvaluation {
        utility,
        leakage,
        induced_pz: Pmf::from_raw(pz),
    })
}

/// `(I(Y;Z), I(X;Z), P_Z)` for a row-major `|Y| x nz` kernel.
pub(crate) fn evaluate_raw(j: &JointDistribution, kernel: &[f64], nz: usize) -> (f64, f64, Vec<f64>) {
    let mut scratch = Scratch::new(j, nz);
    let (u, l) = scratch.eval(j, kernel);
    (u, l, scratch.pz.clone())
}

/// Reusable buffers for the hot evaluation loop in the solvers.
pub(crate) struct Scratch {
    nz: usize,
    py: Vec<f64>,
    pxz: Vec<f64>,
    pyz: Vec<f64>,
    pub(crate) pz: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(j: &JointDistribution, nz: usize) -> Self {
        Self {
            nz,
            py: j.p_y().mass().to_vec(),
            pxz: vec![0.0; j.nx() * nz],
            pyz: vec![0.0; j.ny() * nz],
            pz: vec![0.0; nz],
        }
    }

    /// Returns `(utility, leakage)`.
    pub(crate) fn eval(&mut self, j: &JointDistribution, kernel: &[f64]) -> (f64, f64) {
        let nz = self.nz;
        let (nx, ny) = (j.nx(), j.ny());
        self.pxz.iter_mut().for_each(|v| *v = 0.0);
        for x in 0..nx {
            let out = &mut self.pxz[x * nz..(x + 1) * nz];
            for y in 0..ny {
                let p = j.get(x, y);
                if p == 0.0 {
                    continue;
                }
                let row = &kernel[y * nz..(y + 1) * nz];
                for (o, k) in out.iter_mut().zip(row) {
                    *o += p * k;
                }
            }
        }
        for y in 0..ny {
            for z in 0..nz {
                self.pyz[y * nz + z] = self.py[y] * kernel[y * nz + z];
            }
        }
        for z in 0..nz {
            self.pz[z] = (0..ny).map(|y| self.pyz[y * nz + z]).sum();
        }
        let utility = mi_table(&self.pyz, ny, nz);
        let leakage = mi_table(&self.pxz, nx, nz);
        (utility, leakage)
    }

    pub(crate) fn leakage(&mut self, j: &JointDistribution, kernel: &[f64]) -> f64 {
        self.eval(j, kernel).1
    }
}

/// Deterministic filter `z = mapping[y]` over `z_card` display symbols.
pub fn filter_from_function(mapping: &[usize], z_card: usize) -> Result<PrivacyFilter> {
    if mapping.is_empty() {
        return Err(Error::Invalid("mapping over an empty alphabet".into()));
    }
    let mut data = vec![0.0; mapping.len() * z_card];
    for (y, &z) in mapping.iter().enumerate() {
        if z >= z_card {
            return Err(Error::Invalid(format!(
                "mapping sends y={y} to {z}, outside 0..{z_card}"
            )));
        }
        data[y * z_card + z] = 1.0;
    }
    Ok(PrivacyFilter {
        kernel: Kernel::from_flat_unchecked(mapping.len(), z_card, data),
        deterministic: true,
    })
}

/// `H(f(Y))` for a deterministic mapping.
pub(crate) fn image_entropy(py: &[f64], mapping: &[usize], z_card: usize) -> f64 {
    let mut pz = vec![0.0; z_card];
    for (&p, &z) in py.iter().zip(mapping) {
        pz[z] += p;
    }
    entropy_bits(&pz)
}
