use serde::{Deserialize, Serialize};

use super::frame::{AlignedDataset, ColumnRole};
use crate::error::{Error, Result};

/// Ranks starting at 1; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "spearman needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 3 observations, got {}",
            x.len()
        )));
    }
    for (label, v) in [("first", x), ("second", y)] {
        if v.iter().all(|&a| a == v[0]) {
            return Err(Error::UndefinedCorrelation(format!(
                "{label} vector is constant"
            )));
        }
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub name: String,
    pub rho: f64,
}

/// Spearman correlation of every exogenous column against the target,
/// strongest magnitude first (ties by name).
pub fn correlate_candidates(dataset: &AlignedDataset) -> Result<Vec<FeatureCorrelation>> {
    let target = dataset.target();
    let mut out = dataset
        .columns()
        .iter()
        .filter(|c| c.role == ColumnRole::Exogenous)
        .map(|c| {
            let rho = spearman(&c.values, target).map_err(|e| match e {
                Error::UndefinedCorrelation(m) => {
                    Error::UndefinedCorrelation(format!("column `{}`: {m}", c.name))
                }
                other => other,
            })?;
            Ok(FeatureCorrelation {
                name: c.name.clone(),
                rho,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| {
        b.rho
            .abs()
            .total_cmp(&a.rho.abs())
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(out)
}

/// Exogenous columns with `|rho| >= threshold`, strongest first.
pub fn select_features(dataset: &AlignedDataset, threshold: f64) -> Result<Vec<String>> {
    Ok(correlate_candidates(dataset)?
        .into_iter()
        .filter(|c| c.rho.abs() >= threshold)
        .map(|c| c.name)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::frame::Column;
    use chrono::NaiveDate;
    use rand::Rng;

    #[test]
    fn monotone_agreement_and_reversal() {
        let x = [1.0, 2.0, 5.0, 9.0, 10.0];
        let up = [0.1, 0.2, 0.3, 7.0, 8.0];
        let down = [5.0, 4.0, 3.0, 2.0, -1.0];
        assert_eq!(spearman(&x, &up).unwrap(), 1.0);
        assert_eq!(spearman(&x, &down).unwrap(), -1.0);
    }

    #[test]
    fn rank_difference_example() {
        let rho = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((rho - 0.8).abs() < 1e-12, "{rho}");
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn constant_and_short_inputs_are_rejected() {
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(matches!(
            spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(Error::Shape(_))
        ));
    }

    fn dataset(cols: Vec<(&str, ColumnRole, Vec<f64>)>) -> AlignedDataset {
        let n = cols[0].2.len();
        let start = NaiveDate::from_ymd_opt(2012, 1, 3).unwrap();
        let dates = (0..n)
            .map(|i| start + chrono::Days::new(i as u64))
            .collect();
        AlignedDataset::new(
            dates,
            cols.into_iter()
                .map(|(n, r, v)| Column {
                    name: n.into(),
                    role: r,
                    values: v,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn selection_keeps_copies_and_negatives_drops_noise() {
        let mut rng = crate::rng::seeded(11);
        let n = 2000;
        let target: Vec<f64> = (0..n)
            .map(|i| (i as f64 * 0.01).sin() + i as f64 * 0.001)
            .collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let neg: Vec<f64> = target.iter().map(|v| -2.0 * v).collect();
        let ds = dataset(vec![
            ("brent", ColumnRole::Target, target.clone()),
            ("copy", ColumnRole::Exogenous, target),
            ("noise", ColumnRole::Exogenous, noise),
            ("usdx", ColumnRole::Exogenous, neg),
        ]);
        let all = correlate_candidates(&ds).unwrap();
        let noise_rho = all.iter().find(|c| c.name == "noise").unwrap().rho;
        assert!(noise_rho.abs() < 0.1, "{noise_rho}");
        assert_eq!(select_features(&ds, 0.6).unwrap(), ["copy", "usdx"]);
        assert!(select_features(&ds, 1.1).unwrap().is_empty());
    }

    #[test]
    fn derived_columns_are_not_candidates() {
        let ds = dataset(vec![
            ("brent", ColumnRole::Target, vec![1.0, 2.0, 3.0, 4.0]),
            ("residual", ColumnRole::Derived, vec![1.0, 2.0, 3.0, 4.0]),
        ]);
        assert!(correlate_candidates(&ds).unwrap().is_empty());
    }
}
