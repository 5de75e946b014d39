use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::ItemResponseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
    Expert,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Hard, Difficulty::Expert];

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Hard => "hard",
            Difficulty::Expert => "expert",
        }
    }
}

/// Difficulty tertiles, aligned with the item order of the response matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyStrata {
    pub item_ids: Vec<String>,
    pub stratum: Vec<Difficulty>,
    /// Mean success over the reference models.
    pub mean_success: Vec<f64>,
}

impl DifficultyStrata {
    pub fn labels(&self) -> Vec<String> {
        self.stratum.iter().map(|d| d.name().to_string()).collect()
    }

    pub fn size(&self, d: Difficulty) -> usize {
        self.stratum.iter().filter(|&&s| s == d).count()
    }
}

/// Items sorted by descending mean success over `reference_models` (ties by
/// item id) and cut into three contiguous groups whose sizes differ by at
/// most one, larger groups first.
pub fn estimate_item_difficulty(irm: &ItemResponseMatrix, reference_models: &[String]) -> Result<DifficultyStrata> {
    if irm.n_items() == 0 {
        return Err(Error::EmptyItems);
    }
    if reference_models.is_empty() {
        return Err(Error::InvalidArgument("no reference models".into()));
    }
    let rows: Vec<&[u8]> = reference_models
        .iter()
        .map(|m| irm.model_index(m).map(|i| irm.row(i)))
        .collect::<Result<_>>()?;
    let n = irm.n_items();
    let mean_success: Vec<f64> = (0..n)
        .map(|j| rows.iter().map(|r| f64::from(r[j])).sum::<f64>() / rows.len() as f64)
        .collect();
    let items = irm.items();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        mean_success[b]
            .total_cmp(&mean_success[a])
            .then_with(|| items[a].id.cmp(&items[b].id))
    });
    let mut stratum = vec![Difficulty::Easy; n];
    let mut start = 0;
    for (g, d) in Difficulty::ALL.into_iter().enumerate() {
        let size = n / 3 + usize::from(g < n % 3);
        for &j in &order[start..start + size] {
            stratum[j] = d;
        }
        start += size;
    }
    Ok(DifficultyStrata {
        item_ids: items.iter().map(|i| i.id.clone()).collect(),
        stratum,
        mean_success,
    })
}

/// Stratum labels taken from item metadata.
pub fn metadata_strata(irm: &ItemResponseMatrix) -> Result<Vec<String>> {
    irm.items()
        .iter()
        .map(|i| {
            i.stratum
                .clone()
                .ok_or_else(|| Error::InvalidArgument(format!("item {:?} has no stratum", i.id)))
        })
        .collect()
}

/// Mean response of `model` within each stratum label.
pub fn stratified_success_rates(irm: &ItemResponseMatrix, labels: &[String], model: &str) -> Result<BTreeMap<String, f64>> {
    if labels.len() != irm.n_items() {
        return Err(Error::DimensionMismatch {
            expected: irm.n_items(),
            found: labels.len(),
        });
    }
    let row = irm.row(irm.model_index(model)?);
    let mut acc: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for (label, &r) in labels.iter().zip(row) {
        let e = acc.entry(label.clone()).or_default();
        e.0 += u64::from(r);
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(k, (s, n))| (k, s as f64 / n as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_item_responses, Item, ItemResponseSpec};
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn matrix(models: &[&str], items: &[&str], responses: Vec<u8>) -> ItemResponseMatrix {
        ItemResponseMatrix::new(
            models.iter().map(|s| s.to_string()).collect(),
            items.iter().map(|s| Item::new(*s)).collect(),
            responses,
        )
        .unwrap()
    }

    #[test]
    fn all_solved_items_split_by_identifier() {
        let ids = ["q5", "q1", "q4", "q2", "q3"];
        let irm = matrix(&["a", "b"], &ids, vec![1; 10]);
        let s = estimate_item_difficulty(&irm, &["a".into(), "b".into()]).unwrap();
        assert!(s.mean_success.iter().all(|&m| m == 1.0));
        let by_id: BTreeMap<&str, Difficulty> = ids.iter().copied().zip(s.stratum.iter().copied()).collect();
        assert_eq!(by_id["q1"], Difficulty::Easy);
        assert_eq!(by_id["q2"], Difficulty::Easy);
        assert_eq!(by_id["q3"], Difficulty::Hard);
        assert_eq!(by_id["q4"], Difficulty::Hard);
        assert_eq!(by_id["q5"], Difficulty::Expert);
    }

    #[test]
    fn nine_items_match_sort_and_chunk() {
        // Eight reference models make item j solved by exactly j of them.
        let models: Vec<String> = (0..8).map(|m| format!("m{m}")).collect();
        let ids: Vec<String> = (0..9).map(|j| format!("item{j}")).collect();
        let responses = (0..8)
            .flat_map(|m| (0..9).map(move |j| u8::from(m < j)))
            .collect();
        let irm = ItemResponseMatrix::new(models.clone(), ids.iter().map(Item::new).collect(), responses).unwrap();
        let s = estimate_item_difficulty(&irm, &models).unwrap();
        let expected = |j: usize| match j {
            6..=8 => Difficulty::Easy,
            3..=5 => Difficulty::Hard,
            _ => Difficulty::Expert,
        };
        for j in 0..9 {
            assert_eq!(s.stratum[j], expected(j), "item {j}");
        }
    }

    #[test]
    fn empty_and_unknown_inputs() {
        let irm = matrix(&["a"], &[], vec![]);
        assert!(matches!(estimate_item_difficulty(&irm, &["a".into()]), Err(Error::EmptyItems)));
        let irm = matrix(&["a"], &["q"], vec![1]);
        assert!(matches!(estimate_item_difficulty(&irm, &["z".into()]), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn synthetic_rates_recover_generator() {
        let spec = ItemResponseSpec::format_following(10_000);
        let irm = generate_item_responses(&spec, 2024).unwrap();
        let labels = metadata_strata(&irm).unwrap();
        for m in &spec.models {
            let rates = stratified_success_rates(&irm, &labels, &m.model).unwrap();
            for (s, r) in &m.rates {
                assert!((rates[s] - r).abs() <= 0.02);
            }
        }
    }

    #[test]
    fn all_ones_rates_are_one() {
        let irm = matrix(&["a"], &["x", "y", "z"], vec![1, 1, 1]);
        let labels = vec!["s".to_string(), "t".into(), "s".into()];
        let rates = stratified_success_rates(&irm, &labels, "a").unwrap();
        assert!(rates.values().all(|&r| r == 1.0));
    }

    fn random_matrix(seed: u64, n_items: usize) -> ItemResponseMatrix {
        let mut g = rng::stream(seed, "difficulty-test", 0);
        let ids: Vec<String> = (0..n_items).map(|j| format!("item{j:03}")).collect();
        let responses = (0..3 * n_items).map(|_| u8::from(g.random_bool(0.5))).collect();
        ItemResponseMatrix::new(vec!["a".into(), "b".into(), "c".into()], ids.iter().map(Item::new).collect(), responses)
            .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn strata_are_balanced_and_order_invariant(seed: u64, n in 1usize..40, rot in 0usize..40) {
            let irm = random_matrix(seed, n);
            let refs = vec!["a".to_string(), "b".into(), "c".into()];
            let s = estimate_item_difficulty(&irm, &refs).unwrap();
            let sizes: Vec<usize> = Difficulty::ALL.iter().map(|&d| s.size(d)).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);

            let order: Vec<usize> = (0..n).map(|j| (j + rot) % n).collect();
            let shuffled = estimate_item_difficulty(&irm.permute_items(&order), &refs).unwrap();
            for (k, &j) in order.iter().enumerate() {
                prop_assert_eq!(shuffled.stratum[k], s.stratum[j]);
            }

            let labels = s.labels();
            let rates = stratified_success_rates(&irm, &labels, "a").unwrap();
            let permuted_labels: Vec<String> = order.iter().map(|&j| labels[j].clone()).collect();
            let permuted = stratified_success_rates(&irm.permute_items(&order), &permuted_labels, "a").unwrap();
            prop_assert_eq!(rates, permuted);
        }
    }
}
