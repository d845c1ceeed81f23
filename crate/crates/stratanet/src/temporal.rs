//! Temporal descriptives: local-time activity profiles, inter-event
//! burstiness, and pairwise group comparisons (Tukey–Kramer HSD, Welch
//! mean-difference intervals).

use crate::error::{Error, Result};
use crate::graph::Event;
use crate::stat;
use chrono::{DateTime, Datelike, Timelike, Utc};
use chrono_tz::Tz;
use std::collections::BTreeMap;

pub const DEFAULT_TZ: Tz = chrono_tz::Europe::Helsinki;
pub const DEFAULT_MIN_EVENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binning {
    /// 168 bins; bin 0 = Monday 00:00 local time.
    HourOfWeek,
    /// 53 bins; ISO week number − 1.
    WeekOfYear,
}

impl Binning {
    pub fn bins(self) -> usize {
        match self {
            Binning::HourOfWeek => 168,
            Binning::WeekOfYear => 53,
        }
    }

    fn bin_of(self, t: DateTime<Utc>, tz: Tz) -> usize {
        let local = t.with_timezone(&tz);
        match self {
            Binning::HourOfWeek => {
                local.weekday().num_days_from_monday() as usize * 24 + local.hour() as usize
            }
            Binning::WeekOfYear => local.iso_week().week() as usize - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityProfile {
    pub binning: Binning,
    pub counts: Vec<u64>,
    /// None when there are no events (normalization undefined).
    pub normalized: Option<Vec<f64>>,
}

/// Bucket the selected events by local time of `tz`. All event kinds count.
pub fn activity_profile<F>(events: &[Event], select: F, binning: Binning, tz: Tz) -> ActivityProfile
where
    F: Fn(&Event) -> bool,
{
    let mut counts = vec![0u64; binning.bins()];
    for e in events.iter().filter(|e| select(e)) {
        counts[binning.bin_of(e.timestamp, tz)] += 1;
    }
    let total: u64 = counts.iter().sum();
    let normalized = (total > 0)
        .then(|| counts.iter().map(|&c| c as f64 / total as f64).collect());
    ActivityProfile { binning, counts, normalized }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Burstiness {
    pub n_events: usize,
    /// Mean inter-event gap, seconds.
    pub mean_gap: f64,
    /// Population standard deviation of gaps, seconds.
    pub sd_gap: f64,
    pub b: f64,
}

/// B = (σ−μ)/(σ+μ) over inter-event gaps; population moments. A constant
/// sequence gives −1 (σ = 0), including the all-zero-gap edge case.
pub fn burstiness_from_gaps(gaps: &[f64], n_events: usize) -> Burstiness {
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    let b = if sd + mean == 0.0 { -1.0 } else { (sd - mean) / (sd + mean) };
    Burstiness { n_events, mean_gap: mean, sd_gap: sd, b }
}

/// None when fewer than `min_events` timestamps (B too noisy to report).
pub fn burstiness(times: &[DateTime<Utc>], min_events: usize) -> Option<Burstiness> {
    if times.len() < min_events.max(2) {
        return None;
    }
    let mut ts: Vec<i64> = times.iter().map(|t| t.timestamp()).collect();
    ts.sort_unstable();
    let gaps: Vec<f64> = ts.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    Some(burstiness_from_gaps(&gaps, times.len()))
}

/// Burstiness per account over every event kind, account-sorted.
pub fn burstiness_by_account(events: &[Event], min_events: usize) -> Vec<(String, Burstiness)> {
    let mut per: BTreeMap<&str, Vec<DateTime<Utc>>> = BTreeMap::new();
    for e in events {
        per.entry(&e.account_id).or_default().push(e.timestamp);
    }
    per.into_iter()
        .filter_map(|(acc, times)| burstiness(&times, min_events).map(|b| (acc.to_string(), b)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsdRow {
    pub group1: String,
    pub group2: String,
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_adj: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsdTable {
    pub rows: Vec<HsdRow>,
    pub q_critical: f64,
    pub mse: f64,
    pub df: f64,
}

/// Tukey–Kramer honestly-significant-difference test over ≥2 groups with
/// possibly unequal sizes. One row per unordered pair, in input group order.
pub fn tukey_hsd(groups: &[(String, Vec<f64>)], confidence: f64) -> Result<HsdTable> {
    if groups.len() < 2 {
        return Err(Error::degenerate("tukey_hsd needs at least 2 groups"));
    }
    for (name, xs) in groups {
        if xs.len() < 2 {
            return Err(Error::degenerate(format!("group `{name}` has fewer than 2 values")));
        }
    }
    let k = groups.len();
    let n_total: usize = groups.iter().map(|(_, xs)| xs.len()).sum();
    let df = (n_total - k) as f64;
    let stats: Vec<(f64, f64, usize)> = groups
        .iter()
        .map(|(_, xs)| {
            let (m, v) = stat::mean_var(xs);
            (m, v, xs.len())
        })
        .collect();
    let mse = stats.iter().map(|&(_, v, n)| v * (n as f64 - 1.0)).sum::<f64>() / df;
    let q_critical = stat::studentized_range_quantile(confidence, k, df);
    let mut rows = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let (mi, _, ni) = stats[i];
            let (mj, _, nj) = stats[j];
            let diff = mi - mj;
            let se = (mse / 2.0 * (1.0 / ni as f64 + 1.0 / nj as f64)).sqrt();
            let (lo, hi, p) = if se == 0.0 {
                (diff, diff, if diff == 0.0 { 1.0 } else { 0.0 })
            } else {
                (
                    diff - q_critical * se,
                    diff + q_critical * se,
                    stat::studentized_range_sf(diff.abs() / se, k, df),
                )
            };
            rows.push(HsdRow {
                group1: groups[i].0.clone(),
                group2: groups[j].0.clone(),
                mean_diff: diff,
                ci_low: lo,
                ci_high: hi,
                p_adj: p,
            });
        }
    }
    Ok(HsdTable { rows, q_critical, mse, df })
}

/// Difference of group means with a Welch-style 95% interval.
pub fn group_mean_difference(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    stat::welch_interval(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EventKind;
    use crate::rng::{stream, uniform_f64};
    use approx::assert_abs_diff_eq;
    use chrono::{NaiveDate, TimeZone};

    fn ev(account: &str, ts: DateTime<Utc>) -> Event {
        Event {
            account_id: account.into(),
            target_account_id: None,
            timestamp: ts,
            kind: EventKind::Tweet,
            text: None,
        }
    }

    fn helsinki_local(y: i32, m: u32, d: u32, h: u32, min: u32) -> DateTime<Utc> {
        DEFAULT_TZ
            .from_local_datetime(
                &NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, min, 0).unwrap(),
            )
            .unwrap()
            .with_timezone(&Utc)
    }

    #[test]
    fn single_event_monday_morning() {
        // 2019-01-07 is a Monday; 09:30 Helsinki winter time = 07:30 UTC.
        let events = [ev("a", "2019-01-07T07:30:00Z".parse().unwrap())];
        let p = activity_profile(&events, |_| true, Binning::HourOfWeek, DEFAULT_TZ);
        assert_eq!(p.counts[9], 1);
        assert_eq!(p.counts.iter().sum::<u64>(), 1);
        assert_eq!(p.normalized.as_ref().unwrap()[9], 1.0);
    }

    #[test]
    fn dst_shifts_local_bin() {
        // Same UTC hour; 2019-01-07 (EET, +2) lands bin 8, 2019-07-08 (EEST, +3) bin 9.
        let winter = [ev("a", "2019-01-07T06:30:00Z".parse().unwrap())];
        let summer = [ev("a", "2019-07-08T06:30:00Z".parse().unwrap())];
        let pw = activity_profile(&winter, |_| true, Binning::HourOfWeek, DEFAULT_TZ);
        let ps = activity_profile(&summer, |_| true, Binning::HourOfWeek, DEFAULT_TZ);
        assert_eq!(pw.counts[8], 1);
        assert_eq!(ps.counts[9], 1);
    }

    #[test]
    fn uniform_week_profile() {
        let events: Vec<Event> = (0..168u32)
            .map(|h| ev("a", helsinki_local(2019, 1, 7, 0, 0) + chrono::Duration::hours(h as i64)))
            .collect();
        let p = activity_profile(&events, |_| true, Binning::HourOfWeek, DEFAULT_TZ);
        assert!(p.counts.iter().all(|&c| c == 1));
        let norm = p.normalized.unwrap();
        for f in &norm {
            assert_abs_diff_eq!(*f, 1.0 / 168.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(norm.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn week_shift_leaves_profile_unchanged() {
        // Fixed-offset window (no DST transition crossed by the shift).
        let events: Vec<Event> = (0..40)
            .map(|i| ev("a", helsinki_local(2019, 1, 7, 0, 0) + chrono::Duration::hours(i * 3)))
            .collect();
        let shifted: Vec<Event> = events
            .iter()
            .map(|e| ev("a", e.timestamp + chrono::Duration::weeks(1)))
            .collect();
        let p0 = activity_profile(&events, |_| true, Binning::HourOfWeek, DEFAULT_TZ);
        let p1 = activity_profile(&shifted, |_| true, Binning::HourOfWeek, DEFAULT_TZ);
        assert_eq!(p0.counts, p1.counts);
    }

    #[test]
    fn empty_profile_flagged() {
        let p = activity_profile(&[], |_| true, Binning::WeekOfYear, DEFAULT_TZ);
        assert_eq!(p.counts.len(), 53);
        assert!(p.normalized.is_none());
    }

    #[test]
    fn burstiness_regular_sequence() {
        let b = burstiness_from_gaps(&[3600.0, 3600.0, 3600.0], 4);
        assert_eq!(b.b, -1.0);
        assert_eq!(b.sd_gap, 0.0);
    }

    #[test]
    fn burstiness_hand_case() {
        let b = burstiness_from_gaps(&[1.0, 3.0], 3);
        assert_abs_diff_eq!(b.mean_gap, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.sd_gap, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.b, -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn burstiness_poisson_near_zero() {
        let mut rng = stream(11, "poisson", 0);
        let mut t = 0i64;
        let times: Vec<DateTime<Utc>> = (0..10_000)
            .map(|_| {
                let gap = -(1.0 - uniform_f64(&mut rng)).ln() * 3600.0;
                t += gap.round() as i64;
                DateTime::<Utc>::from_timestamp(t, 0).unwrap()
            })
            .collect();
        let b = burstiness(&times, DEFAULT_MIN_EVENTS).unwrap();
        assert!(b.b.abs() < 0.05, "B = {}", b.b);
    }

    #[test]
    fn burstiness_bounds_and_scale_invariance() {
        let mut rng = stream(12, "gaps", 0);
        for _ in 0..50 {
            let gaps: Vec<f64> = (0..20).map(|_| uniform_f64(&mut rng) * 1e4).collect();
            let b = burstiness_from_gaps(&gaps, gaps.len() + 1);
            assert!((-1.0..=1.0).contains(&b.b));
            for c in [0.5, 2.0, 977.0] {
                let scaled: Vec<f64> = gaps.iter().map(|g| g * c).collect();
                let bs = burstiness_from_gaps(&scaled, gaps.len() + 1);
                assert_abs_diff_eq!(bs.b, b.b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn burstiness_below_min_events_absent() {
        let times: Vec<DateTime<Utc>> = (0..5)
            .map(|i| DateTime::<Utc>::from_timestamp(i * 100, 0).unwrap())
            .collect();
        assert!(burstiness(&times, 10).is_none());
        assert!(burstiness(&times, 5).is_some());
    }

    #[test]
    fn by_account_respects_threshold() {
        let mut events = Vec::new();
        for i in 0..12 {
            events.push(ev("busy", DateTime::<Utc>::from_timestamp(i * 50, 0).unwrap()));
        }
        events.push(ev("quiet", DateTime::<Utc>::from_timestamp(0, 0).unwrap()));
        let out = burstiness_by_account(&events, 10);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, "busy");
        assert_eq!(out[0].1.n_events, 12);
    }

    // Reference values computed with an independent Tukey–Kramer
    // implementation before this module was written.
    #[test]
    fn tukey_reference_case() {
        let groups = vec![
            ("g1".to_string(), vec![1.0, 2.0, 3.0]),
            ("g2".to_string(), vec![2.0, 3.0, 4.0]),
            ("g3".to_string(), vec![3.0, 4.0, 5.0]),
        ];
        let t = tukey_hsd(&groups, 0.95).unwrap();
        assert_abs_diff_eq!(t.mse, 1.0, epsilon = 1e-12);
        assert_eq!(t.df, 6.0);
        assert_abs_diff_eq!(t.q_critical, 4.3391954765, epsilon = 5e-6);
        assert_eq!(t.rows.len(), 3);
        let r01 = &t.rows[0];
        assert_abs_diff_eq!(r01.mean_diff, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r01.ci_low, -3.5052356764, epsilon = 5e-6);
        assert_abs_diff_eq!(r01.ci_high, 1.5052356764, epsilon = 5e-6);
        assert_abs_diff_eq!(r01.p_adj, 0.4827272795, epsilon = 1e-6);
        let r02 = &t.rows[1];
        assert_abs_diff_eq!(r02.mean_diff, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r02.p_adj, 0.1088670200, epsilon = 1e-6);
        let r12 = &t.rows[2];
        assert_abs_diff_eq!(r12.p_adj, 0.4827272795, epsilon = 1e-6);
        for r in &t.rows {
            assert!(r.ci_low <= r.mean_diff && r.mean_diff <= r.ci_high);
        }
    }

    #[test]
    fn tukey_identical_groups() {
        let groups = vec![
            ("a".to_string(), vec![1.0, 2.0, 3.0]),
            ("b".to_string(), vec![1.0, 2.0, 3.0]),
        ];
        let t = tukey_hsd(&groups, 0.95).unwrap();
        let r = &t.rows[0];
        assert_abs_diff_eq!(r.mean_diff, 0.0, epsilon = 1e-15);
        assert!(r.ci_low < 0.0 && r.ci_high > 0.0);
        assert_abs_diff_eq!(r.ci_low, -r.ci_high, epsilon = 1e-12);
    }

    #[test]
    fn tukey_symmetry_under_group_swap() {
        let ab = vec![
            ("a".to_string(), vec![1.0, 2.0, 3.5]),
            ("b".to_string(), vec![2.0, 4.0, 4.5]),
        ];
        let ba = vec![ab[1].clone(), ab[0].clone()];
        let t1 = tukey_hsd(&ab, 0.95).unwrap();
        let t2 = tukey_hsd(&ba, 0.95).unwrap();
        assert_abs_diff_eq!(t1.rows[0].mean_diff, -t2.rows[0].mean_diff, epsilon = 1e-12);
        assert_abs_diff_eq!(t1.rows[0].ci_low, -t2.rows[0].ci_high, epsilon = 1e-12);
        assert_abs_diff_eq!(t1.rows[0].p_adj, t2.rows[0].p_adj, epsilon = 1e-12);
    }

    #[test]
    fn tukey_small_group_errors_with_name() {
        let groups = vec![
            ("ok".to_string(), vec![1.0, 2.0]),
            ("tiny".to_string(), vec![1.0]),
        ];
        let err = tukey_hsd(&groups, 0.95).unwrap_err();
        assert!(err.to_string().contains("tiny"));
    }

    #[test]
    fn welch_monte_carlo_width() {
        let mut rng = stream(13, "welch", 0);
        let normal = |rng: &mut rand_chacha::ChaCha8Rng| {
            // Box-Muller
            let u1 = uniform_f64(rng).max(1e-12);
            let u2 = uniform_f64(rng);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let a: Vec<f64> = (0..1000).map(|_| normal(&mut rng) + 1.0).collect();
        let b: Vec<f64> = (0..1000).map(|_| normal(&mut rng)).collect();
        let (d, lo, hi) = group_mean_difference(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 0.15);
        // closed-form width: 2 z sqrt(2/1000) = 0.1753
        assert_abs_diff_eq!(hi - lo, 0.1753, epsilon = 0.02);
    }
}
