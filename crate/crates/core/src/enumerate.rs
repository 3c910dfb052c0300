//! Small combinatorial enumerators shared by the exhaustive searches.

/// All `k`-subsets of `0..n` in lexicographic order.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for t in i + 1..k {
                    self.idx[t] = self.idx[t - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Set partitions of `0..n` as restricted growth strings: `labels[0] = 0` and
/// each label is at most one more than the maximum of the labels before it.
/// Block labels therefore appear in order of first occurrence.
#[derive(Debug, Clone)]
pub struct SetPartitions {
    labels: Vec<usize>,
    maxes: Vec<usize>,
    done: bool,
}

impl SetPartitions {
    pub fn new(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            maxes: vec![0; n],
            done: n == 0,
        }
    }
}

impl Iterator for SetPartitions {
    /// `(labels, number_of_blocks)`
    type Item = (Vec<usize>, usize);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let n = self.labels.len();
        let blocks = self.labels.iter().max().map_or(0, |m| m + 1);
        let out = (self.labels.clone(), blocks);
        // advance: rightmost position that can still grow
        let mut i = n;
        loop {
            if i <= 1 {
                self.done = true;
                break;
            }
            i -= 1;
            let prev_max = self.maxes[i - 1];
            if self.labels[i] <= prev_max {
                self.labels[i] += 1;
                self.maxes[i] = prev_max.max(self.labels[i]);
                for t in i + 1..n {
                    self.labels[t] = 0;
                    self.maxes[t] = self.maxes[t - 1];
                }
                break;
            }
        }
        Some(out)
    }
}

/// Grid points of the probability simplex over `parts` outcomes with step
/// `1 / resolution`, as integer counts summing to `resolution`.
pub fn simplex_grid(parts: usize, resolution: usize) -> Vec<Vec<usize>> {
    fn rec(parts: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in (0..=left).rev() {
            cur.push(v);
            rec(parts - 1, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(parts, resolution, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_counts() {
        assert_eq!(Combinations::new(5, 2).count(), 10);
        assert_eq!(Combinations::new(4, 0).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
        assert_eq!(binomial(20, 10), 184_756);
        let all: Vec<_> = Combinations::new(4, 2).collect();
        assert_eq!(all[0], vec![0, 1]);
        assert_eq!(all[5], vec![2, 3]);
    }

    #[test]
    fn bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (n, &b) in bell.iter().enumerate().skip(1) {
            assert_eq!(SetPartitions::new(n).count(), b, "n = {n}");
        }
        let all: Vec<_> = SetPartitions::new(3).map(|(l, _)| l).collect();
        assert_eq!(all[0], vec![0, 0, 0]);
        assert_eq!(all[4], vec![0, 1, 2]);
    }

    #[test]
    fn simplex_grid_size() {
        // C(r + k - 1, k - 1)
        assert_eq!(simplex_grid(3, 4).len(), 15);
        assert_eq!(simplex_grid(2, 25).len(), 26);
        assert!(simplex_grid(3, 5).iter().all(|p| p.iter().sum::<usize>() == 5));
    }
}
