//! Simultaneous element-wise bands from bootstrap draws.
//!
//! For a tail rank `k` the band of component `t` runs from the `k`-th to the
//! `(B + 1 - k)`-th order statistic of column `t` of the draws, so every
//! component has `k - 1` replicates strictly below and `k - 1` strictly above
//! its band. `k` is the largest rank for which at least `1 - alpha` of the
//! replicates lie strictly inside all bands at once.
//!
//! Calibration uses a rank transform: replicate `b` has depth
//! `m_b = min_t min(r_bt, B + 1 - r_bt)` where `r_bt` is its rank in column
//! `t` (ties broken by replicate index). It lies inside the rank-`k` bands
//! iff `m_b > k`, so the coverage of every `k` is read off the sorted depths.

use crate::bootstrap::BootstrapDraws;
use crate::{Error, Result};

/// Minimum number of replicates per unit of `alpha` required by [`calibrate`].
pub const RESOLUTION_FACTOR: f64 = 20.0;

/// Slack when comparing an achieved coverage fraction with `1 - alpha`.
const COVERAGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Bands {
    /// Lower offsets `l_t` for `f_bar^b - f_bar`.
    pub lower: Vec<f64>,
    /// Upper offsets `u_t`.
    pub upper: Vec<f64>,
    pub alpha: f64,
    /// Tail rank `k`; each component's band spans order statistics `k` and `B + 1 - k`.
    pub tail_rank: usize,
    /// Per-component tail level `c = k / B`.
    pub tail: f64,
    /// Fraction of replicates strictly inside all bands.
    pub coverage: f64,
    /// Components whose draws are all equal; their band has zero width.
    pub degenerate: Vec<bool>,
    /// False when even `k = 1` leaves coverage below `1 - alpha`.
    pub target_met: bool,
}

impl Bands {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn width(&self, t: usize) -> f64 {
        self.upper[t] - self.lower[t]
    }

    pub fn has_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

/// Whether `covered` out of `total` replicates meets level `1 - alpha`.
pub fn meets_level(covered: usize, total: usize, alpha: f64) -> bool {
    covered as f64 / total as f64 >= 1.0 - alpha - COVERAGE_EPS
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Smallest replicate count accepted by [`calibrate`] for this `alpha`.
pub fn required_replicates(alpha: f64) -> usize {
    (RESOLUTION_FACTOR / alpha).ceil() as usize
}

/// Calibrate bands at simultaneous level `1 - alpha`, enforcing
/// `B >= 20 / alpha` so the tail is resolved.
pub fn calibrate(draws: &BootstrapDraws, alpha: f64) -> Result<Bands> {
    check_alpha(alpha)?;
    let required = required_replicates(alpha);
    if draws.replicates() < required {
        return Err(Error::Resolution {
            replicates: draws.replicates(),
            required,
            alpha,
        });
    }
    calibrate_rank_transform(draws, alpha)
}

/// Rank-transform calibration without the resolution guard.
pub fn calibrate_rank_transform(draws: &BootstrapDraws, alpha: f64) -> Result<Bands> {
    check_alpha(alpha)?;
    let b = draws.replicates();
    let t_len = draws.len();
    if b == 0 || t_len == 0 {
        return Err(Error::domain("draws must be non-empty"));
    }

    let mut depth = vec![usize::MAX; b];
    let mut sorted_cols = Vec::with_capacity(t_len);
    let mut degenerate = Vec::with_capacity(t_len);
    let mut order: Vec<usize> = (0..b).collect();
    for t in 0..t_len {
        let col = draws.column(t);
        order.iter_mut().enumerate().for_each(|(i, o)| *o = i);
        // stable: equal values keep replicate order
        order.sort_by(|&i, &j| col[i].total_cmp(&col[j]));
        let sorted: Vec<f64> = order.iter().map(|&i| col[i]).collect();
        let flat = sorted[0] == sorted[b - 1];
        if !flat {
            for (pos, &rep) in order.iter().enumerate() {
                let r = pos + 1;
                let d = r.min(b + 1 - r);
                if d < depth[rep] {
                    depth[rep] = d;
                }
            }
        }
        degenerate.push(flat);
        sorted_cols.push(sorted);
    }

    depth.sort_unstable();
    // replicates with depth <= k are outside the rank-k bands
    let outside = |k: usize| depth.partition_point(|&d| d <= k);
    let max_rank = (b + 1) / 2;
    let mut k = 0;
    for cand in 1..=max_rank {
        if meets_level(b - outside(cand), b, alpha) {
            k = cand;
        } else {
            break;
        }
    }
    let target_met = k > 0;
    let k = k.max(1);

    let (lower, upper) = sorted_cols
        .iter()
        .map(|s| (s[k - 1], s[b - k]))
        .unzip();
    Ok(Bands {
        lower,
        upper,
        alpha,
        tail_rank: k,
        tail: k as f64 / b as f64,
        coverage: (b - outside(k)) as f64 / b as f64,
        degenerate,
        target_met,
    })
}

/// A band for the true value at one prediction point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Strict containment.
    pub fn contains(&self, v: f64) -> bool {
        self.lo < v && v < self.hi
    }
}

/// Intervals `(f_bar_t - u_t, f_bar_t - l_t)` for the true values.
pub fn band_intervals(bands: &Bands, f_bar: &[f64]) -> Result<Vec<Interval>> {
    if f_bar.len() != bands.len() {
        return Err(Error::Shape(format!(
            "{} band components but {} estimates",
            bands.len(),
            f_bar.len()
        )));
    }
    Ok(f_bar
        .iter()
        .zip(bands.lower.iter().zip(&bands.upper))
        .map(|(f, (l, u))| Interval { lo: f - u, hi: f - l })
        .collect())
}

/// True iff every `truth[t]` lies strictly inside `intervals[t]`.
pub fn covers(intervals: &[Interval], truth: &[f64]) -> Result<bool> {
    if intervals.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} intervals but {} true values",
            intervals.len(),
            truth.len()
        )));
    }
    Ok(intervals.iter().zip(truth).all(|(i, &v)| i.contains(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::Scheme;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn draws(len: usize, deltas: Vec<f64>) -> BootstrapDraws {
        BootstrapDraws::from_deltas(Scheme::Empirical, len, deltas, 0).unwrap()
    }

    /// Scan every tail rank and count coverage directly from values.
    fn brute_force(d: &BootstrapDraws, alpha: f64) -> (usize, Vec<f64>, Vec<f64>, f64) {
        let b = d.replicates();
        let cols: Vec<Vec<f64>> = (0..d.len())
            .map(|t| {
                let mut c = d.column(t);
                c.sort_by(f64::total_cmp);
                c
            })
            .collect();
        let bounds = |k: usize| -> (Vec<f64>, Vec<f64>) {
            cols.iter().map(|c| (c[k - 1], c[b - k])).unzip()
        };
        let inside = |k: usize| {
            let (l, u) = bounds(k);
            d.rows()
                .filter(|r| r.iter().enumerate().all(|(t, &v)| l[t] < v && v < u[t]))
                .count()
        };
        let mut best = 1;
        for k in 1..=(b + 1) / 2 {
            if meets_level(inside(k), b, alpha) {
                best = k;
            }
        }
        let (l, u) = bounds(best);
        (best, l, u, inside(best) as f64 / b as f64)
    }

    #[test]
    fn single_component_is_marginal() {
        let deltas: Vec<f64> = (1..=100).map(|i| (i as f64 - 50.5) / 100.0).collect();
        let d = draws(1, deltas);
        let bands = calibrate_rank_transform(&d, 0.1).unwrap();
        assert_eq!(bands.tail, 0.05);
        assert_eq!(bands.tail_rank, 5);
        assert_eq!(bands.lower, vec![-0.455]);
        assert_eq!(bands.upper, vec![0.455]);
        assert_eq!(bands.coverage, 0.9);
        assert!(bands.target_met);
    }

    #[test]
    fn zero_draws_give_zero_width() {
        let d = draws(3, vec![0.0; 3 * 400]);
        let bands = calibrate(&d, 0.05).unwrap();
        assert_eq!(bands.lower, vec![0.0; 3]);
        assert_eq!(bands.upper, vec![0.0; 3]);
        assert_eq!(bands.coverage, 1.0);
        assert!(bands.degenerate.iter().all(|&x| x));
    }

    #[test]
    fn crafted_eight_replicates() {
        let deltas = vec![
            0.3, -0.1, //
            -0.7, 0.4, //
            0.1, 0.9, //
            0.8, -0.5, //
            -0.2, 0.2, //
            0.5, -0.9, //
            -0.4, 0.6, //
            0.0, 0.05,
        ];
        let d = draws(2, deltas);
        for alpha in [0.3, 0.5, 0.7] {
            let got = calibrate_rank_transform(&d, alpha).unwrap();
            let (k, l, u, cov) = brute_force(&d, alpha);
            assert_eq!((got.tail_rank, got.lower, got.upper, got.coverage), (k, l, u, cov));
        }
    }

    #[test]
    fn guards() {
        let d = draws(1, vec![0.1; 100]);
        assert!(matches!(calibrate(&d, 0.05), Err(Error::Resolution { required: 400, .. })));
        assert!(calibrate(&d, 0.0).is_err());
        assert!(calibrate(&d, 1.0).is_err());
        assert!(calibrate_rank_transform(&d, 1.5).is_err());
    }

    #[test]
    fn too_many_components_for_the_level() {
        // every replicate is extreme in some column: no rank reaches 1 - alpha
        let b = 4;
        let mut deltas = vec![0.0; b * b];
        for i in 0..b {
            for t in 0..b {
                deltas[i * b + t] = if i == t { 1.0 } else { (i + t) as f64 * 1e-3 };
            }
        }
        let bands = calibrate_rank_transform(&draws(b, deltas), 0.1).unwrap();
        assert!(!bands.target_met);
        assert_eq!(bands.tail_rank, 1);
    }

    #[test]
    fn intervals_and_coverage() {
        let bands = Bands {
            lower: vec![0.0, -0.5],
            upper: vec![0.0, 0.5],
            alpha: 0.05,
            tail_rank: 1,
            tail: 0.01,
            coverage: 1.0,
            degenerate: vec![true, false],
            target_met: true,
        };
        let iv = band_intervals(&bands, &[0.0, 1.0]).unwrap();
        assert_eq!(iv[0], Interval { lo: 0.0, hi: 0.0 });
        assert_eq!(iv[1], Interval { lo: 0.5, hi: 1.5 });
        // boundary is not covered
        assert!(!covers(&iv[1..], &[0.5]).unwrap());
        assert!(!covers(&iv[1..], &[1.5]).unwrap());
        assert!(covers(&iv[1..], &[0.75]).unwrap());
        let wide = [Interval { lo: -1e300, hi: 1e300 }; 3];
        assert!(covers(&wide, &[0.0, 5.0, -7.0]).unwrap());
        assert!(covers(&wide, &[0.0]).is_err());
        // hand-checked instances
        let iv = [Interval { lo: -1.0, hi: 1.0 }, Interval { lo: 2.0, hi: 3.0 }];
        assert!(covers(&iv, &[0.0, 2.5]).unwrap());
        assert!(!covers(&iv, &[0.0, 3.5]).unwrap());
        assert!(!covers(&iv, &[-1.0, 2.5]).unwrap());
    }

    #[test]
    fn intervals_match_naive_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let t = 7;
        let lower: Vec<f64> = (0..t).map(|_| -rng.random::<f64>()).collect();
        let upper: Vec<f64> = (0..t).map(|_| rng.random::<f64>()).collect();
        let f_bar: Vec<f64> = (0..t).map(|_| rng.random_range(-2.0..2.0)).collect();
        let bands = Bands {
            lower: lower.clone(),
            upper: upper.clone(),
            alpha: 0.1,
            tail_rank: 1,
            tail: 0.01,
            coverage: 0.9,
            degenerate: vec![false; t],
            target_met: true,
        };
        let iv = band_intervals(&bands, &f_bar).unwrap();
        for i in 0..t {
            assert_eq!(iv[i].lo, f_bar[i] - upper[i]);
            assert_eq!(iv[i].hi, f_bar[i] - lower[i]);
        }
    }

    fn random_draws() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (1usize..=4, 2usize..=50).prop_flat_map(|(t, b)| {
            (Just(t), Just(b), prop::collection::vec(-1.0..1.0f64, t * b))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn matches_brute_force((t, _b, deltas) in random_draws(), alpha in 0.01..0.99f64) {
            let d = draws(t, deltas);
            let got = calibrate_rank_transform(&d, alpha).unwrap();
            let (k, l, u, cov) = brute_force(&d, alpha);
            prop_assert_eq!(got.tail_rank, k);
            prop_assert_eq!(got.lower, l);
            prop_assert_eq!(got.upper, u);
            prop_assert_eq!(got.coverage, cov);
        }

        #[test]
        fn equal_tails((t, b, deltas) in random_draws(), alpha in 0.01..0.99f64) {
            let d = draws(t, deltas);
            let bands = calibrate_rank_transform(&d, alpha).unwrap();
            let counts: Vec<(usize, usize)> = (0..t).map(|c| {
                let col = d.column(c);
                (col.iter().filter(|&&v| v < bands.lower[c]).count(),
                 col.iter().filter(|&&v| v > bands.upper[c]).count())
            }).collect();
            let all: Vec<usize> = counts.iter().flat_map(|&(a, b)| [a, b]).collect();
            let lo = *all.iter().min().unwrap();
            let hi = *all.iter().max().unwrap();
            prop_assert!(hi - lo <= 1, "{:?} (B = {})", counts, b);
        }

        #[test]
        fn nested_in_alpha((t, _b, deltas) in random_draws(), a1 in 0.01..0.98f64, gap in 0.0..0.5f64) {
            let a2 = (a1 + gap).min(0.99);
            let d = draws(t, deltas);
            let wide = calibrate_rank_transform(&d, a1).unwrap();
            let narrow = calibrate_rank_transform(&d, a2).unwrap();
            for c in 0..t {
                prop_assert!(wide.lower[c] <= narrow.lower[c]);
                prop_assert!(wide.upper[c] >= narrow.upper[c]);
            }
        }

        #[test]
        fn translation_equivariant((t, _b, raw) in random_draws(), shift in prop::collection::vec(-8i32..8, 4), alpha in 0.05..0.9f64) {
            // dyadic grid keeps the shifted values exact
            let deltas: Vec<f64> = raw.iter().map(|v| (v * 1024.0).round() / 1024.0).collect();
            let shifted: Vec<f64> = deltas.iter().enumerate().map(|(i, v)| v + shift[i % t] as f64).collect();
            let a = calibrate_rank_transform(&draws(t, deltas), alpha).unwrap();
            let s = calibrate_rank_transform(&draws(t, shifted), alpha).unwrap();
            for c in 0..t {
                prop_assert_eq!(s.lower[c], a.lower[c] + shift[c] as f64);
                prop_assert_eq!(s.upper[c], a.upper[c] + shift[c] as f64);
                prop_assert_eq!(s.width(c), a.width(c));
            }
        }
    }
}
