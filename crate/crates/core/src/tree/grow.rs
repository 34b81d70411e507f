use super::{impurity_of_counts, Criterion, Node, Tree, TreeConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Splitter {
    /// Exhaustive search over midpoints of consecutive unique values.
    Best,
    /// One uniform threshold in `[min, max)` per candidate feature.
    Random,
}

/// Sufficient statistics of the rows in a node, additive over rows.
trait Target {
    type Stats: Copy + Default;

    fn add(&self, stats: &mut Self::Stats, row: usize);
    fn minus(total: Self::Stats, part: Self::Stats) -> Self::Stats;
    /// Node cost; a split minimises the children's summed cost.
    fn cost(&self, stats: Self::Stats) -> f64;
    fn is_pure(&self, rows: &[usize]) -> bool;
    fn leaf(&self, stats: Self::Stats) -> ([f64; 2], f64);
}

struct Classes<'a> {
    y: &'a [u8],
    weights: Option<&'a [f64]>,
    criterion: Criterion,
}

impl Target for Classes<'_> {
    type Stats = [f64; 2];

    fn add(&self, stats: &mut [f64; 2], row: usize) {
        stats[self.y[row] as usize] += self.weights.map_or(1.0, |w| w[row]);
    }

    fn minus(total: [f64; 2], part: [f64; 2]) -> [f64; 2] {
        [(total[0] - part[0]).max(0.0), (total[1] - part[1]).max(0.0)]
    }

    fn cost(&self, stats: [f64; 2]) -> f64 {
        (stats[0] + stats[1]) * impurity_of_counts(stats, self.criterion)
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        rows.iter().all(|&r| self.y[r] == self.y[rows[0]])
    }

    fn leaf(&self, stats: [f64; 2]) -> ([f64; 2], f64) {
        let total = stats[0] + stats[1];
        let value = if total > 0.0 { stats[1] / total } else { 0.0 };
        (stats, value)
    }
}

struct Residuals<'a> {
    targets: &'a [f64],
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Target for Residuals<'_> {
    type Stats = Moments;

    fn add(&self, m: &mut Moments, row: usize) {
        let v = self.targets[row];
        m.n += 1.0;
        m.sum += v;
        m.sum_sq += v * v;
    }

    fn minus(total: Moments, part: Moments) -> Moments {
        Moments {
            n: total.n - part.n,
            sum: total.sum - part.sum,
            sum_sq: total.sum_sq - part.sum_sq,
        }
    }

    fn cost(&self, m: Moments) -> f64 {
        if m.n <= 0.0 {
            0.0
        } else {
            (m.sum_sq - m.sum * m.sum / m.n).max(0.0)
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        rows.iter().all(|&r| self.targets[r] == self.targets[rows[0]])
    }

    fn leaf(&self, m: Moments) -> ([f64; 2], f64) {
        ([0.0, m.n], if m.n > 0.0 { m.sum / m.n } else { 0.0 })
    }
}

fn check_shapes(x: &Matrix, len: usize, config: &TreeConfig) -> Result<()> {
    config.validate()?;
    if x.n_rows() != len {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            found: len,
        });
    }
    if x.is_empty() {
        return Err(Error::invalid("cannot grow a tree on zero rows"));
    }
    Ok(())
}

pub(super) fn grow_classifier(
    x: &Matrix,
    y: &[u8],
    weights: Option<&[f64]>,
    config: &TreeConfig,
    splitter: Splitter,
    rng: &mut SplitMix64,
) -> Result<Tree> {
    check_shapes(x, y.len(), config)?;
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::invalid(format!("label {bad} is not binary")));
    }
    if let Some(w) = weights {
        if w.len() != y.len() || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("sample weights must be finite, non-negative, one per row"));
        }
    }
    let target = Classes {
        y,
        weights,
        criterion: config.criterion,
    };
    Ok(Builder::new(x, &target, config, splitter, rng).run())
}

pub(super) fn grow_regressor(
    x: &Matrix,
    targets: &[f64],
    config: &TreeConfig,
    rng: &mut SplitMix64,
) -> Result<Tree> {
    check_shapes(x, targets.len(), config)?;
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression targets must be finite"));
    }
    let target = Residuals { targets };
    Ok(Builder::new(x, &target, config, Splitter::Best, rng).run())
}

struct Builder<'a, T: Target> {
    x: &'a Matrix,
    target: &'a T,
    config: &'a TreeConfig,
    splitter: Splitter,
    rng: &'a mut SplitMix64,
    max_features: usize,
    nodes: Vec<Node>,
}

struct Candidate {
    cost: f64,
    feature: usize,
    threshold: f64,
}

impl<'a, T: Target> Builder<'a, T> {
    fn new(
        x: &'a Matrix,
        target: &'a T,
        config: &'a TreeConfig,
        splitter: Splitter,
        rng: &'a mut SplitMix64,
    ) -> Self {
        Self {
            x,
            target,
            config,
            splitter,
            rng,
            max_features: config.max_features.count(x.n_cols()),
            nodes: Vec::new(),
        }
    }

    fn run(mut self) -> Tree {
        let rows: Vec<usize> = (0..self.x.n_rows()).collect();
        self.build(rows, 0);
        Tree {
            nodes: self.nodes,
            n_features: self.x.n_cols(),
        }
    }

    fn stats(&self, rows: &[usize]) -> T::Stats {
        let mut s = T::Stats::default();
        for &r in rows {
            self.target.add(&mut s, r);
        }
        s
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        let stats = self.stats(&rows);
        let (counts, value) = self.target.leaf(stats);
        self.nodes.push(Node::Leaf {
            counts,
            value,
            samples: rows.len(),
        });

        let cfg = self.config;
        if depth >= cfg.max_depth
            || rows.len() < cfg.min_samples_split
            || rows.len() < 2 * cfg.min_samples_leaf
            || self.target.is_pure(&rows)
        {
            return at;
        }
        let Some(best) = self.best_split(&rows, stats) else {
            return at;
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x.get(r, best.feature) <= best.threshold);
        let samples = rows.len();
        drop(rows);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            samples,
        };
        at
    }

    fn value_range(&self, rows: &[usize], feature: usize) -> (f64, f64) {
        rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            let v = self.x.get(r, feature);
            (lo.min(v), hi.max(v))
        })
    }

    /// Features examined at this node, in ascending index order. Constant
    /// features are skipped and do not count toward the budget.
    fn candidate_features(&mut self, rows: &[usize]) -> Vec<usize> {
        let d = self.x.n_cols();
        let mut order: Vec<usize> = (0..d).collect();
        if self.max_features < d {
            self.rng.shuffle(&mut order);
        }
        let mut chosen = Vec::with_capacity(self.max_features);
        for f in order {
            let (lo, hi) = self.value_range(rows, f);
            if lo < hi {
                chosen.push(f);
                if chosen.len() == self.max_features {
                    break;
                }
            }
        }
        chosen.sort_unstable();
        chosen
    }

    /// Lowest-cost valid split; ties keep the earlier (feature, threshold).
    /// Zero-gain splits count as valid.
    fn best_split(&mut self, rows: &[usize], total: T::Stats) -> Option<Candidate> {
        let min_leaf = self.config.min_samples_leaf;
        let mut best: Option<Candidate> = None;
        let mut consider = |c: Candidate| {
            if best.as_ref().map_or(true, |b| c.cost < b.cost) {
                best = Some(c);
            }
        };

        for feature in self.candidate_features(rows) {
            match self.splitter {
                Splitter::Best => {
                    let mut sorted: Vec<(f64, usize)> =
                        rows.iter().map(|&r| (self.x.get(r, feature), r)).collect();
                    sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    let mut left = T::Stats::default();
                    for p in 0..sorted.len() - 1 {
                        self.target.add(&mut left, sorted[p].1);
                        let (lo, hi) = (sorted[p].0, sorted[p + 1].0);
                        let n_left = p + 1;
                        if lo == hi || n_left < min_leaf || sorted.len() - n_left < min_leaf {
                            continue;
                        }
                        let mut threshold = lo + (hi - lo) / 2.0;
                        if threshold >= hi {
                            threshold = lo;
                        }
                        let cost = self.target.cost(left) + self.target.cost(T::minus(total, left));
                        consider(Candidate {
                            cost,
                            feature,
                            threshold,
                        });
                    }
                }
                Splitter::Random => {
                    let (lo, hi) = self.value_range(rows, feature);
                    let mut threshold = lo + self.rng.next_f64() * (hi - lo);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    let mut left = T::Stats::default();
                    let mut n_left = 0;
                    for &r in rows {
                        if self.x.get(r, feature) <= threshold {
                            self.target.add(&mut left, r);
                            n_left += 1;
                        }
                    }
                    if n_left < min_leaf || rows.len() - n_left < min_leaf {
                        continue;
                    }
                    let cost = self.target.cost(left) + self.target.cost(T::minus(total, left));
                    consider(Candidate {
                        cost,
                        feature,
                        threshold,
                    });
                }
            }
        }
        best
    }
}
