//! Divide-and-conquer driver: random balanced partitioning, independent
//! local fits and averaging of the local prediction vectors.

use rand::seq::SliceRandom;

use crate::kernel::KernelSpec;
use crate::{exec, krr, seed, Error, PredictionSet, Result, Sample};

/// Assignment of `N` sample indices to `P` equally sized partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    n: usize,
    members: Vec<Vec<usize>>,
}

impl PartitionPlan {
    pub fn sample_size(&self) -> usize {
        self.n
    }

    pub fn parts(&self) -> usize {
        self.members.len()
    }

    /// Size `S = N / P` of every partition.
    pub fn part_size(&self) -> usize {
        self.n / self.members.len()
    }

    /// Indices of partition `p`, in draw order.
    pub fn members(&self, p: usize) -> &[usize] {
        &self.members[p]
    }

    /// Partition of every index `i in [N]`.
    pub fn assignment(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for (p, m) in self.members.iter().enumerate() {
            for &i in m {
                out[i] = p;
            }
        }
        out
    }

    /// Build a plan from explicit index lists. Lists may repeat indices; the
    /// only requirement is equal sizes. Used to construct test scenarios.
    pub fn from_members(n: usize, members: Vec<Vec<usize>>) -> Result<Self> {
        let size = members.first().map(Vec::len).unwrap_or(0);
        if size == 0 || members.iter().any(|m| m.len() != size) {
            return Err(Error::domain("partitions must be non-empty and of equal size"));
        }
        if members.iter().flatten().any(|&i| i >= n) {
            return Err(Error::domain("partition index out of range"));
        }
        Ok(Self { n, members })
    }
}

/// Uniformly random balanced partition of `0..n` into `parts` blocks.
pub fn make_partition_plan(n: usize, parts: usize, seed: u64) -> Result<PartitionPlan> {
    if parts == 0 || n == 0 {
        return Err(Error::domain("sample size and partition count must be positive"));
    }
    if n % parts != 0 {
        return Err(Error::Indivisible { n, parts });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    let size = n / parts;
    let members = idx.chunks_exact(size).map(<[usize]>::to_vec).collect();
    Ok(PartitionPlan { n, members })
}

/// A base algorithm: fits on a sample and reports predictions at the
/// prediction set.
pub trait Learner: Sync {
    fn fit_predict(&self, sample: &Sample, points: &PredictionSet) -> Result<Vec<f64>>;
}

/// Kernel ridge regression with a fixed penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrrLearner {
    pub kernel: KernelSpec,
    pub rho: f64,
}

impl Learner for KrrLearner {
    fn fit_predict(&self, sample: &Sample, points: &PredictionSet) -> Result<Vec<f64>> {
        let fit = krr::fit(sample, &self.kernel, self.rho)?;
        Ok(krr::predict(&fit, points))
    }
}

/// `P x T` matrix whose row `p` is the `p`-th local estimator at the
/// prediction set, with the column means cached.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPredictionMatrix {
    parts: usize,
    len: usize,
    values: Vec<f64>,
    mean: Vec<f64>,
}

impl LocalPredictionMatrix {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let len = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::domain("need at least one local estimator"))?;
        if len == 0 {
            return Err(Error::domain("prediction set must be non-empty"));
        }
        let mut values = Vec::with_capacity(len * rows.len());
        for r in rows {
            let r = r.as_ref();
            if r.len() != len {
                return Err(Error::Shape(format!("row of length {} (expected {len})", r.len())));
            }
            values.extend_from_slice(r);
        }
        let mut m = Self {
            parts: rows.len(),
            len,
            values,
            mean: Vec::new(),
        };
        m.mean = column_means(&m.values, m.parts, m.len);
        Ok(m)
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    /// Prediction set size `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.values[p * self.len..(p + 1) * self.len]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.len)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The averaged estimator at the prediction set.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Sample standard deviation of each column across partitions (0 when `P = 1`).
    pub fn column_sd(&self) -> Vec<f64> {
        if self.parts < 2 {
            return vec![0.0; self.len];
        }
        let mut ss = vec![0.0; self.len];
        for row in self.rows() {
            for ((s, v), m) in ss.iter_mut().zip(row).zip(&self.mean) {
                *s += (v - m) * (v - m);
            }
        }
        ss.iter().map(|s| (s / (self.parts - 1) as f64).sqrt()).collect()
    }
}

fn column_means(values: &[f64], parts: usize, len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    // ascending p
    for row in values.chunks_exact(len) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let scale = parts as f64;
    acc.iter().map(|a| a / scale).collect()
}

/// Column means of the matrix accumulated in ascending partition order.
pub fn average(matrix: &LocalPredictionMatrix) -> Vec<f64> {
    column_means(&matrix.values, matrix.parts, matrix.len)
}

/// Fit `learner` on every partition and collect the local predictions.
pub fn fit_partitions_with<L: Learner>(
    sample: &Sample,
    plan: &PartitionPlan,
    learner: &L,
    points: &PredictionSet,
) -> Result<LocalPredictionMatrix> {
    if plan.members.iter().flatten().any(|&i| i >= sample.len()) {
        return Err(Error::Shape(format!(
            "plan covers {} indices but the sample has {}",
            plan.sample_size(),
            sample.len()
        )));
    }
    if points.is_empty() {
        return Err(Error::domain("prediction set must be non-empty"));
    }
    if points.dim() != sample.x.dim() {
        return Err(Error::Shape(format!(
            "prediction points have dimension {}, sample has {}",
            points.dim(),
            sample.x.dim()
        )));
    }
    let rows = exec::map_indexed(plan.parts(), |p| {
        let local = sample.select(plan.members(p));
        learner
            .fit_predict(&local, points)
            .map_err(|e| Error::Partition {
                partition: p,
                source: Box::new(e),
            })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    LocalPredictionMatrix::from_rows(&rows)
}

/// Kernel ridge regression on every partition.
pub fn fit_all_partitions(
    sample: &Sample,
    plan: &PartitionPlan,
    kernel: &KernelSpec,
    rho: f64,
    points: &PredictionSet,
) -> Result<LocalPredictionMatrix> {
    fit_partitions_with(sample, plan, &KrrLearner { kernel: *kernel, rho }, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Points;
    use proptest::prelude::*;

    fn sample6() -> Sample {
        let xs = [0.05, 0.2, 0.41, 0.55, 0.72, 0.97];
        let ys = [0.1, 0.9, 0.4, -0.3, -0.8, 0.2];
        Sample::new(Points::from_scalars(&xs).unwrap(), ys.to_vec()).unwrap()
    }

    #[test]
    fn plan_edge_cases() {
        let one = make_partition_plan(4, 1, 0).unwrap();
        let mut m = one.members(0).to_vec();
        m.sort();
        assert_eq!(m, vec![0, 1, 2, 3]);

        let four = make_partition_plan(4, 4, 0).unwrap();
        let mut all: Vec<usize> = (0..4).flat_map(|p| four.members(p).to_vec()).collect();
        assert!((0..4).all(|p| four.members(p).len() == 1));
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);

        let err = make_partition_plan(6, 4, 0).unwrap_err();
        assert!(matches!(err, Error::Indivisible { n: 6, parts: 4 }));
        assert!(err.to_string().contains("does not divide"));
    }

    #[test]
    fn plan_is_seeded() {
        let a = make_partition_plan(64, 8, 5).unwrap();
        let b = make_partition_plan(64, 8, 5).unwrap();
        let c = make_partition_plan(64, 8, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn single_partition_is_plain_krr() {
        let s = sample6();
        let k = KernelSpec::default();
        let q = Points::from_scalars(&[0.1, 0.5, 0.9]).unwrap();
        let plan = make_partition_plan(6, 1, 3).unwrap();
        let m = fit_all_partitions(&s, &plan, &k, 0.01, &q).unwrap();
        let direct = krr::predict(&krr::fit(&s, &k, 0.01).unwrap(), &q);
        for (a, b) in m.mean().iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-3), "{a} {b}");
        }
    }

    #[test]
    fn duplicated_partitions_give_identical_rows() {
        let s = sample6();
        let plan = PartitionPlan::from_members(6, vec![vec![0, 2, 4], vec![0, 2, 4]]).unwrap();
        let q = Points::from_scalars(&[0.3, 0.6]).unwrap();
        let m = fit_all_partitions(&s, &plan, &KernelSpec::default(), 0.05, &q).unwrap();
        assert_eq!(m.row(0), m.row(1));
        assert_eq!(m.mean(), m.row(0));
    }

    #[test]
    fn two_partitions_match_reference_loop() {
        let s = sample6();
        let k = KernelSpec::default();
        let rho = 0.02;
        let plan = make_partition_plan(6, 2, 9).unwrap();
        let q = [0.15, 0.5, 0.8];
        let m = fit_all_partitions(&s, &plan, &k, rho, &Points::from_scalars(&q).unwrap()).unwrap();
        // scalar reference: solve each 3x3 system by Gaussian elimination
        let mut expected = [0.0; 3];
        for p in 0..2 {
            let idx = plan.members(p);
            let xs: Vec<f64> = idx.iter().map(|&i| s.x.row(i)[0]).collect();
            let mut a = [[0.0; 4]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    a[i][j] = k.at_distance((xs[i] - xs[j]).abs());
                }
                a[i][i] += 3.0 * rho;
                a[i][3] = s.y[idx[i]];
            }
            for c in 0..3 {
                for r in (c + 1)..3 {
                    let f = a[r][c] / a[c][c];
                    for j in c..4 {
                        a[r][j] -= f * a[c][j];
                    }
                }
            }
            let mut alpha = [0.0; 3];
            for i in (0..3).rev() {
                let tail: f64 = ((i + 1)..3).map(|j| a[i][j] * alpha[j]).sum();
                alpha[i] = (a[i][3] - tail) / a[i][i];
            }
            for (t, &x) in q.iter().enumerate() {
                let v: f64 = (0..3).map(|i| alpha[i] * k.at_distance((x - xs[i]).abs())).sum();
                expected[t] += v / 2.0;
            }
        }
        for (a, b) in m.mean().iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn errors_carry_partition_id() {
        let s = sample6();
        let plan = make_partition_plan(6, 3, 1).unwrap();
        let q = Points::from_scalars(&[0.5]).unwrap();
        let err = fit_all_partitions(&s, &plan, &KernelSpec::default(), -1.0, &q).unwrap_err();
        assert!(matches!(err, Error::Partition { partition: 0, .. }));
    }

    #[test]
    fn average_examples() {
        let v = [1.5, -2.0];
        let m = LocalPredictionMatrix::from_rows(&[v, v, v]).unwrap();
        assert_eq!(average(&m), v.to_vec());
        let m = LocalPredictionMatrix::from_rows(&[[1.0, -3.0], [-1.0, 3.0]]).unwrap();
        assert_eq!(average(&m), vec![0.0, 0.0]);
    }

    #[test]
    fn average_against_extended_precision() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..2).map(|_| rng.random_range(-1e3..1e3)).collect())
            .collect();
        let m = LocalPredictionMatrix::from_rows(&rows).unwrap();
        let avg = average(&m);
        for t in 0..2 {
            // error-free two-sum accumulation as a double-double oracle
            let (mut hi, mut lo) = (0.0f64, 0.0f64);
            for r in &rows {
                let s = hi + r[t];
                let bb = s - hi;
                lo += (hi - (s - bb)) + (r[t] - bb);
                hi = s;
            }
            let exact = (hi + lo) / 3.0;
            assert!((avg[t] - exact).abs() <= 4.0 * f64::EPSILON * exact.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn plan_is_balanced_partition(log_p in 0u32..5, s in 1usize..9, seed in any::<u64>()) {
            let parts = 1usize << log_p;
            let n = parts * s;
            let plan = make_partition_plan(n, parts, seed).unwrap();
            let mut seen = vec![false; n];
            for p in 0..parts {
                prop_assert_eq!(plan.members(p).len(), s);
                for &i in plan.members(p) {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
            }
            prop_assert!(seen.iter().all(|&b| b));
            let a = plan.assignment();
            for p in 0..parts {
                for &i in plan.members(p) {
                    prop_assert_eq!(a[i], p);
                }
            }
        }

        #[test]
        fn average_is_linear(rows in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 3), 1..6), s in -4i32..5) {
            let scale = 2f64.powi(s);
            let m = LocalPredictionMatrix::from_rows(&rows).unwrap();
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
            let ms = LocalPredictionMatrix::from_rows(&scaled).unwrap();
            for (a, b) in average(&ms).iter().zip(average(&m)) {
                prop_assert_eq!(*a, b * scale);
            }
        }
    }
}
