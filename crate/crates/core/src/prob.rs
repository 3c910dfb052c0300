//! Exact discrete-probability primitives.
//!
//! Everything here works on explicit probability tables over finite
//! alphabets. Logarithms are base 2, so every information quantity is in
//! bits, and `0 · log 0 = 0` throughout.

use crate::error::{Error, Result};

/// Tolerance used when validating that masses sum to one.
pub const VALIDATION_TOL: f64 = 1e-9;

/// `-p log2 p` with the `0 log 0 = 0` convention.
#[inline]
pub(crate) fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy of an unvalidated mass vector.
pub(crate) fn entropy_bits(mass: &[f64]) -> f64 {
    mass.iter().map(|&p| plogp(p)).sum()
}

/// Mutual information of a row-major `rows x cols` table that sums to one.
///
/// Computed as `sum p log(p / (p_r p_c))`, which stays accurate near
/// independence where the `H(X) + H(Y) - H(X,Y)` form cancels badly.
pub(crate) fn mi_table(table: &[f64], rows: usize, cols: usize) -> f64 {
    debug_assert_eq!(table.len(), rows * cols);
    let mut pr = vec![0.0; rows];
    let mut pc = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            let p = table[r * cols + c];
            pr[r] += p;
            pc[c] += p;
        }
    }
    let mut mi = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let p = table[r * cols + c];
            if p > 0.0 {
                mi += p * (p / (pr[r] * pc[c])).log2();
            }
        }
    }
    mi.max(0.0)
}

fn check_mass(mass: &[f64], what: &str) -> Result<()> {
    if mass.is_empty() {
        return Err(Error::Invalid(format!("{what}: empty alphabet")));
    }
    if let Some((i, &p)) = mass
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        return Err(Error::Invalid(format!("{what}: entry {i} is {p}")));
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > VALIDATION_TOL {
        return Err(Error::Invalid(format!("{what}: mass sums to {total}")));
    }
    Ok(())
}

/// A probability mass function over `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    mass: Vec<f64>,
}

impl Pmf {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        check_mass(&mass, "pmf")?;
        Ok(Self { mass })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform pmf needs a nonempty alphabet");
        Self {
            mass: vec![1.0 / n as f64; n],
        }
    }

    pub fn point(n: usize, at: usize) -> Self {
        let mut mass = vec![0.0; n];
        mass[at] = 1.0;
        Self { mass }
    }

    /// Builds a pmf without validation; callers guarantee the invariants.
    pub(crate) fn from_raw(mass: Vec<f64>) -> Self {
        debug_assert!(check_mass(&mass, "pmf").is_ok());
        Self { mass }
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn support_size(&self) -> usize {
        self.mass.iter().filter(|&&p| p > 0.0).count()
    }

    /// Mixture `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Pmf, lambda: f64) -> Result<Pmf> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Ok(Pmf { mass })
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &Pmf) -> f64 {
    entropy_bits(&p.mass)
}

/// Binary entropy `h(q)` in bits.
pub fn binary_entropy(q: f64) -> f64 {
    plogp(q) + plogp(1.0 - q)
}

/// Total variation in the L1 convention `sum |p - q|`, so the range is `[0, 2]`.
pub fn total_variation(p: &Pmf, q: &Pmf) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(l1_distance(&p.mass, &q.mass))
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// A row-stochastic conditional distribution: one pmf per input symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    inputs: usize,
    outputs: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let inputs = rows.len();
        if inputs == 0 {
            return Err(Error::Invalid("kernel: no rows".into()));
        }
        let outputs = rows[0].len();
        let mut data = Vec::with_capacity(inputs * outputs);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != outputs {
                return Err(Error::Invalid(format!(
                    "kernel: row {i} has {} entries, expected {outputs}",
                    row.len()
                )));
            }
            check_mass(&row, &format!("kernel row {i}"))?;
            data.extend(row);
        }
        Ok(Self {
            inputs,
            outputs,
            data,
        })
    }

    /// Row-major construction; every row is validated.
    pub fn from_flat(inputs: usize, outputs: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != inputs * outputs {
            return Err(Error::DimensionMismatch {
                expected: inputs * outputs,
                found: data.len(),
            });
        }
        for i in 0..inputs {
            check_mass(
                &data[i * outputs..(i + 1) * outputs],
                &format!("kernel row {i}"),
            )?;
        }
        Ok(Self {
            inputs,
            outputs,
            data,
        })
    }

    pub(crate) fn from_flat_unchecked(inputs: usize, outputs: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), inputs * outputs);
        Self {
            inputs,
            outputs,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::from_flat_unchecked(n, n, data)
    }

    /// Every input maps to the same output pmf.
    pub fn constant(inputs: usize, output: &Pmf) -> Self {
        let data = (0..inputs).flat_map(|_| output.mass().iter().copied()).collect();
        Self::from_flat_unchecked(inputs, output.len(), data)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.outputs..(i + 1) * self.outputs]
    }

    pub fn get(&self, i: usize, o: usize) -> f64 {
        self.data[i * self.outputs + o]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.outputs)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// True when every row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.rows()
            .all(|r| r.iter().all(|&p| p == 0.0 || p == 1.0))
    }

    /// Pushes an input pmf through the kernel.
    pub fn apply(&self, input: &Pmf) -> Result<Pmf> {
        if input.len() != self.inputs {
            return Err(Error::DimensionMismatch {
                expected: self.inputs,
                found: input.len(),
            });
        }
        let mut out = vec![0.0; self.outputs];
        for (p, row) in input.mass().iter().zip(self.rows()) {
            for (o, q) in out.iter_mut().zip(row) {
                *o += p * q;
            }
        }
        Ok(Pmf::from_raw(out))
    }
}

/// `H*_inf(Y|X) = -log2 max_{x,y} P(y|x)`.
pub fn conditional_min_entropy(k: &Kernel) -> f64 {
    let max = k.as_flat().iter().copied().fold(0.0_f64, f64::max);
    // max > 0 because every row sums to one
    let h = -max.log2();
    if h == 0.0 {
        0.0
    } else {
        h
    }
}

/// A joint pmf over `X x Y`, stored row-major with `X` indexing rows.
///
/// Symbols of zero marginal mass are removed at construction; they cannot
/// change any quantity computed here, and removing them keeps every
/// conditional distribution well defined. The removed labels are kept so
/// callers can surface them.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    nx: usize,
    ny: usize,
    probs: Vec<f64>,
    x_labels: Vec<String>,
    y_labels: Vec<String>,
    dropped_x: Vec<String>,
    dropped_y: Vec<String>,
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

impl JointDistribution {
    pub fn new(rows: Vec<Vec<f64>>, x_labels: Vec<String>, y_labels: Vec<String>) -> Result<Self> {
        let nx = rows.len();
        if nx == 0 {
            return Err(Error::Invalid("joint: no rows".into()));
        }
        let ny = rows[0].len();
        if ny == 0 {
            return Err(Error::Invalid("joint: no columns".into()));
        }
        if x_labels.len() != nx {
            return Err(Error::DimensionMismatch {
                expected: nx,
                found: x_labels.len(),
            });
        }
        if y_labels.len() != ny {
            return Err(Error::DimensionMismatch {
                expected: ny,
                found: y_labels.len(),
            });
        }
        let mut flat = Vec::with_capacity(nx * ny);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != ny {
                return Err(Error::Invalid(format!(
                    "joint: row {i} has {} entries, expected {ny}",
                    row.len()
                )));
            }
            flat.extend(row);
        }
        check_mass(&flat, "joint")?;

        let px: Vec<f64> = (0..nx).map(|x| flat[x * ny..(x + 1) * ny].iter().sum()).collect();
        let py: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| flat[x * ny + y]).sum()).collect();
        let keep_x: Vec<usize> = (0..nx).filter(|&x| px[x] > 0.0).collect();
        let keep_y: Vec<usize> = (0..ny).filter(|&y| py[y] > 0.0).collect();
        let dropped_x: Vec<String> = (0..nx)
            .filter(|&x| px[x] <= 0.0)
            .map(|x| x_labels[x].clone())
            .collect();
        let dropped_y: Vec<String> = (0..ny)
            .filter(|&y| py[y] <= 0.0)
            .map(|y| y_labels[y].clone())
            .collect();
        for l in &dropped_x {
            log::warn!("dropping zero-mass X symbol {l:?}");
        }
        for l in &dropped_y {
            log::warn!("dropping zero-mass Y symbol {l:?}");
        }
        let mut probs = Vec::with_capacity(keep_x.len() * keep_y.len());
        for &x in &keep_x {
            for &y in &keep_y {
                probs.push(flat[x * ny + y]);
            }
        }
        Ok(Self {
            nx: keep_x.len(),
            ny: keep_y.len(),
            probs,
            x_labels: keep_x.iter().map(|&x| x_labels[x].clone()).collect(),
            y_labels: keep_y.iter().map(|&y| y_labels[y].clone()).collect(),
            dropped_x,
            dropped_y,
        })
    }

    /// Joint with labels `0, 1, ...` on both axes.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nx = rows.len();
        let ny = rows.first().map_or(0, Vec::len);
        Self::new(rows, default_labels(nx), default_labels(ny))
    }

    /// `P_XY(x, y) = P_X(x) P_{Y|X}(y|x)`.
    pub fn from_channel(px: &Pmf, channel: &Kernel) -> Result<Self> {
        if px.len() != channel.inputs() {
            return Err(Error::DimensionMismatch {
                expected: channel.inputs(),
                found: px.len(),
            });
        }
        let rows = px
            .mass()
            .iter()
            .zip(channel.rows())
            .map(|(&p, row)| row.iter().map(|&q| p * q).collect())
            .collect();
        Self::from_rows(rows)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.ny + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x * self.ny..(x + 1) * self.ny]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }

    pub fn x_labels(&self) -> &[String] {
        &self.x_labels
    }

    pub fn y_labels(&self) -> &[String] {
        &self.y_labels
    }

    pub fn dropped_x_labels(&self) -> &[String] {
        &self.dropped_x
    }

    pub fn dropped_y_labels(&self) -> &[String] {
        &self.dropped_y
    }

    pub fn p_x(&self) -> Pmf {
        Pmf::from_raw((0..self.nx).map(|x| self.row(x).iter().sum()).collect())
    }

    pub fn p_y(&self) -> Pmf {
        Pmf::from_raw(
            (0..self.ny)
                .map(|y| (0..self.nx).map(|x| self.get(x, y)).sum())
                .collect(),
        )
    }

    /// `P_{Y|X}`; rows indexed by x.
    pub fn y_given_x(&self) -> Kernel {
        let px = self.p_x();
        let data = (0..self.nx)
            .flat_map(|x| {
                let m = px.mass()[x];
                self.row(x).iter().map(move |&p| p / m)
            })
            .collect();
        Kernel::from_flat_unchecked(self.nx, self.ny, data)
    }

    /// Swaps the roles of X and Y.
    pub fn transpose(&self) -> JointDistribution {
        let mut probs = Vec::with_capacity(self.probs.len());
        for y in 0..self.ny {
            for x in 0..self.nx {
                probs.push(self.get(x, y));
            }
        }
        JointDistribution {
            nx: self.ny,
            ny: self.nx,
            probs,
            x_labels: self.y_labels.clone(),
            y_labels: self.x_labels.clone(),
            dropped_x: self.dropped_y.clone(),
            dropped_y: self.dropped_x.clone(),
        }
    }

    /// Independent coupling of the two marginals.
    pub fn product_of_marginals(&self) -> JointDistribution {
        let px = self.p_x();
        let py = self.p_y();
        let mut probs = Vec::with_capacity(self.probs.len());
        for &a in px.mass() {
            for &b in py.mass() {
                probs.push(a * b);
            }
        }
        JointDistribution {
            probs,
            dropped_x: Vec::new(),
            dropped_y: Vec::new(),
            ..self.clone()
        }
    }
}

pub fn joint_entropy(j: &JointDistribution) -> f64 {
    entropy_bits(j.as_flat())
}

/// `I(X;Y)` in bits.
pub fn mutual_information(j: &JointDistribution) -> f64 {
    mi_table(j.as_flat(), j.nx(), j.ny())
}

/// The map `y -> P_{X|Y}(.|y)`; rows are indexed by y.
///
/// Construction of [`JointDistribution`] already rejects an all-zero table and
/// removes zero-mass columns, so every row here is well defined.
pub fn posterior_kernel(j: &JointDistribution) -> Kernel {
    let py = j.p_y();
    let mut data = Vec::with_capacity(j.nx() * j.ny());
    for y in 0..j.ny() {
        let m = py.mass()[y];
        for x in 0..j.nx() {
            data.push(j.get(x, y) / m);
        }
    }
    Kernel::from_flat_unchecked(j.ny(), j.nx(), data)
}
