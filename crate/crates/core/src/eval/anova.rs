use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub ss: f64,
    pub df: usize,
    pub ms: f64,
    pub f: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub ss: f64,
    pub df: usize,
    pub ms: f64,
}

/// Fixed-effects two-way ANOVA with interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub factor_a: EffectRow,
    pub factor_b: EffectRow,
    pub interaction: EffectRow,
    pub error: ErrorRow,
    pub ss_total: f64,
    /// Set when the within-cell variance is zero, so F is undefined. F is
    /// then reported as 0 and p as 1.
    pub degenerate: bool,
}

fn effect(ss: f64, df: usize, ms_error: f64, df_error: usize, degenerate: bool) -> EffectRow {
    let ms = ss / df as f64;
    if degenerate {
        return EffectRow { ss, df, ms, f: 0.0, p: 1.0 };
    }
    // tiny negative SS from cancellation would give a negative F
    let f = (ms / ms_error).max(0.0);
    let p = FisherSnedecor::new(df as f64, df_error as f64)
        .map(|d| d.sf(f))
        .unwrap_or(f64::NAN);
    EffectRow { ss, df, ms, f, p }
}

/// Two-way ANOVA of `values` with level indices `a[i]` and `b[i]`.
///
/// The design must be balanced: every (a, b) combination of the levels that
/// occur must hold the same number of observations, at least two.
pub fn two_way_anova(values: &[f64], a: &[usize], b: &[usize]) -> Result<AnovaTable> {
    if values.len() != a.len() || values.len() != b.len() {
        return Err(Error::invalid("values and factor levels differ in length"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("observations must be finite"));
    }
    let mut a_levels: Vec<usize> = a.to_vec();
    a_levels.sort_unstable();
    a_levels.dedup();
    let mut b_levels: Vec<usize> = b.to_vec();
    b_levels.sort_unstable();
    b_levels.dedup();
    let (na, nb) = (a_levels.len(), b_levels.len());
    if na < 2 || nb < 2 {
        return Err(Error::invalid("each factor needs at least two levels"));
    }

    let mut cells = vec![Vec::new(); na * nb];
    for ((&v, &ai), &bi) in values.iter().zip(a).zip(b) {
        let i = a_levels.binary_search(&ai).expect("level listed");
        let j = b_levels.binary_search(&bi).expect("level listed");
        cells[i * nb + j].push(v);
    }
    let n = cells[0].len();
    if let Some(k) = cells.iter().position(|c| c.len() != n) {
        return Err(Error::invalid(format!(
            "unbalanced design: cell (a={}, b={}) has {} observations, cell (a={}, b={}) has {n}",
            a_levels[k / nb],
            b_levels[k % nb],
            cells[k].len(),
            a_levels[0],
            b_levels[0]
        )));
    }
    if n < 2 {
        return Err(Error::invalid("each cell needs at least two observations"));
    }

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let grand = mean(values);
    let cell_means: Vec<f64> = cells.iter().map(|c| mean(c)).collect();
    let a_means: Vec<f64> = (0..na).map(|i| mean(&cell_means[i * nb..(i + 1) * nb])).collect();
    let b_means: Vec<f64> = (0..nb)
        .map(|j| (0..na).map(|i| cell_means[i * nb + j]).sum::<f64>() / na as f64)
        .collect();

    let sq = |x: f64| x * x;
    let ss_total: f64 = values.iter().map(|&v| sq(v - grand)).sum();
    let ss_a = (nb * n) as f64 * a_means.iter().map(|&m| sq(m - grand)).sum::<f64>();
    let ss_b = (na * n) as f64 * b_means.iter().map(|&m| sq(m - grand)).sum::<f64>();
    let ss_cells = n as f64 * cell_means.iter().map(|&m| sq(m - grand)).sum::<f64>();
    let ss_ab = ss_cells - ss_a - ss_b;
    let ss_e: f64 = cells
        .iter()
        .zip(&cell_means)
        .map(|(c, &m)| c.iter().map(|&v| sq(v - m)).sum::<f64>())
        .sum();

    let df_e = na * nb * (n - 1);
    let ms_e = ss_e / df_e as f64;
    let degenerate = ms_e <= f64::EPSILON * ss_total.max(f64::MIN_POSITIVE) || ss_e == 0.0;
    Ok(AnovaTable {
        factor_a: effect(ss_a, na - 1, ms_e, df_e, degenerate),
        factor_b: effect(ss_b, nb - 1, ms_e, df_e, degenerate),
        interaction: effect(ss_ab, (na - 1) * (nb - 1), ms_e, df_e, degenerate),
        error: ErrorRow {
            ss: ss_e,
            df: df_e,
            ms: ms_e,
        },
        ss_total,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn textbook() -> (Vec<f64>, Vec<usize>, Vec<usize>) {
        let cells: [((usize, usize), [f64; 3]); 6] = [
            ((0, 0), [4.0, 6.0, 8.0]),
            ((0, 1), [10.0, 12.0, 14.0]),
            ((0, 2), [8.0, 9.0, 10.0]),
            ((1, 0), [5.0, 7.0, 6.0]),
            ((1, 1), [6.0, 8.0, 7.0]),
            ((1, 2), [12.0, 14.0, 13.0]),
        ];
        let mut v = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for ((i, j), xs) in cells {
            for x in xs {
                v.push(x);
                a.push(i);
                b.push(j);
            }
        }
        (v, a, b)
    }

    #[test]
    fn textbook_two_by_three() {
        let (v, a, b) = textbook();
        let t = two_way_anova(&v, &a, &b).unwrap();
        // reference values from an ordinary least squares fit of y ~ A * B
        assert!((t.factor_a.ss - 0.5).abs() < 1e-9);
        assert!((t.factor_b.ss - 79.0).abs() < 1e-9);
        assert!((t.interaction.ss - 61.0).abs() < 1e-9);
        assert!((t.error.ss - 24.0).abs() < 1e-9);
        assert_eq!((t.factor_a.df, t.factor_b.df, t.interaction.df, t.error.df), (1, 2, 2, 12));
        assert!((t.factor_a.f - 0.25).abs() < 1e-6);
        assert!((t.factor_b.f - 19.75).abs() < 1e-6);
        assert!((t.interaction.f - 15.25).abs() < 1e-6);
        assert!((t.factor_a.p - 0.6261174762253221).abs() < 1e-6);
        assert!((t.factor_b.p - 0.00016004573380539377).abs() < 1e-6);
        assert!((t.interaction.p - 0.0005067034904799246).abs() < 1e-6);
        assert!(!t.degenerate);
    }

    #[test]
    fn constant_data_is_degenerate() {
        let (_, a, b) = textbook();
        let t = two_way_anova(&vec![3.0; a.len()], &a, &b).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.ss_total, 0.0);
        assert_eq!((t.factor_a.f, t.factor_b.f, t.interaction.f), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rejects_unbalanced_and_tiny_designs() {
        let (mut v, mut a, mut b) = textbook();
        v.pop();
        a.pop();
        b.pop();
        assert!(two_way_anova(&v, &a, &b).is_err());
        assert!(two_way_anova(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1], &[0, 1, 0, 1]).is_err());
        assert!(two_way_anova(&[1.0, 2.0], &[0, 0], &[0, 1]).is_err());
    }

    proptest! {
        #[test]
        fn decomposition_is_exact_and_shift_invariant(
            data in prop::collection::vec(-50.0f64..50.0, 2 * 5 * 4),
            shift in -1e3f64..1e3,
        ) {
            let a: Vec<usize> = (0..40).map(|i| i / 20).collect();
            let b: Vec<usize> = (0..40).map(|i| (i / 4) % 5).collect();
            let t = two_way_anova(&data, &a, &b).unwrap();
            let sum = t.factor_a.ss + t.factor_b.ss + t.interaction.ss + t.error.ss;
            prop_assert!((sum - t.ss_total).abs() <= 1e-9 * t.ss_total.max(1.0));
            let shifted: Vec<f64> = data.iter().map(|v| v + shift).collect();
            let u = two_way_anova(&shifted, &a, &b).unwrap();
            for (x, y) in [(t.factor_a.f, u.factor_a.f), (t.factor_b.f, u.factor_b.f), (t.interaction.f, u.interaction.f)] {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{} vs {}", x, y);
            }
        }
    }
}
