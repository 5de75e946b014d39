use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratum: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

impl Item {
    pub fn new(id: impl Into<String>) -> Self {
        Item {
            id: id.into(),
            stratum: None,
            domain: None,
            format: None,
        }
    }
}

/// Binary success of each model on each benchmark item (models x items).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemResponseMatrix {
    models: Vec<String>,
    items: Vec<Item>,
    responses: Vec<u8>,
}

impl ItemResponseMatrix {
    pub fn new(models: Vec<String>, items: Vec<Item>, responses: Vec<u8>) -> Result<Self> {
        if responses.len() != models.len() * items.len() {
            return Err(Error::DimensionMismatch {
                expected: models.len() * items.len(),
                found: responses.len(),
            });
        }
        if responses.iter().any(|&r| r > 1) {
            return Err(Error::InvalidArgument("responses must be 0 or 1".into()));
        }
        Ok(ItemResponseMatrix {
            models,
            items,
            responses,
        })
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn model_index(&self, model: &str) -> Result<usize> {
        self.models
            .iter()
            .position(|m| m == model)
            .ok_or_else(|| Error::UnknownModel(model.to_string()))
    }

    /// Responses of one model across all items.
    pub fn row(&self, model: usize) -> &[u8] {
        let n = self.items.len();
        &self.responses[model * n..(model + 1) * n]
    }

    pub fn response(&self, model: usize, item: usize) -> u8 {
        self.responses[model * self.items.len() + item]
    }

    /// The same matrix with items reordered by `order` (a permutation).
    pub fn permute_items(&self, order: &[usize]) -> ItemResponseMatrix {
        let items = order.iter().map(|&j| self.items[j].clone()).collect();
        let responses = (0..self.models.len())
            .flat_map(|m| order.iter().map(move |&j| (m, j)))
            .map(|(m, j)| self.response(m, j))
            .collect();
        ItemResponseMatrix {
            models: self.models.clone(),
            items,
            responses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRates {
    pub model: String,
    /// Success probability per stratum name.
    pub rates: BTreeMap<String, f64>,
}

/// Per-model, per-stratum success rates for the synthetic benchmark generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResponseSpec {
    /// Strata in item order.
    pub strata: Vec<String>,
    pub items_per_stratum: usize,
    pub models: Vec<ModelRates>,
}

impl ItemResponseSpec {
    /// Easy/hard success rates of two 7B models on the format-following
    /// benchmark.
    pub fn format_following(items_per_stratum: usize) -> Self {
        let rates = |easy: f64, hard: f64| {
            BTreeMap::from([("easy".to_string(), easy), ("hard".to_string(), hard)])
        };
        ItemResponseSpec {
            strata: vec!["easy".into(), "hard".into()],
            items_per_stratum,
            models: vec![
                ModelRates {
                    model: "llama-2-7b".into(),
                    rates: rates(0.88, 0.36),
                },
                ModelRates {
                    model: "mistral-7b-instruct-v0.1".into(),
                    rates: rates(0.80, 0.45),
                },
            ],
        }
    }
}

/// Independent Bernoulli responses; item metadata records the stratum.
pub fn generate_item_responses(spec: &ItemResponseSpec, seed: u64) -> Result<ItemResponseMatrix> {
    for m in &spec.models {
        for s in &spec.strata {
            let rate = m.rates.get(s).ok_or_else(|| {
                Error::InvalidArgument(format!("model {:?} has no rate for stratum {s:?}", m.model))
            })?;
            if !(0.0..=1.0).contains(rate) {
                return Err(Error::InvalidArgument(format!("rate {rate} outside [0, 1]")));
            }
        }
    }
    let items: Vec<Item> = spec
        .strata
        .iter()
        .flat_map(|s| {
            (0..spec.items_per_stratum).map(move |k| Item {
                id: format!("{s}-{k:05}"),
                stratum: Some(s.clone()),
                domain: None,
                format: None,
            })
        })
        .collect();

    let mut responses = Vec::with_capacity(spec.models.len() * items.len());
    for (mi, m) in spec.models.iter().enumerate() {
        let mut rng = rng::stream(seed, "item-responses", mi as u64);
        for s in &spec.strata {
            let rate = m.rates[s];
            for _ in 0..spec.items_per_stratum {
                responses.push(u8::from(rng.random_bool(rate)));
            }
        }
    }
    ItemResponseMatrix::new(spec.models.iter().map(|m| m.model.clone()).collect(), items, responses)
}

/// Reads long-format `model_id,item_id[,stratum],response` rows. Models and
/// items keep first-appearance order; every (model, item) cell must appear.
pub fn load_item_responses_csv(path: impl AsRef<Path>) -> Result<ItemResponseMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_item_responses_csv(file)
}

pub fn read_item_responses_csv<R: std::io::Read>(reader: R) -> Result<ItemResponseMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let has_stratum = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["model_id", "item_id", "response"] => false,
        ["model_id", "item_id", "stratum", "response"] => true,
        _ => {
            return Err(Error::SchemaMismatch {
                expected: vec!["model_id".into(), "item_id".into(), "stratum".into(), "response".into()],
                found: header,
            })
        }
    };

    let mut models: Vec<String> = Vec::new();
    let mut items: Vec<Item> = Vec::new();
    let mut model_idx: HashMap<String, usize> = HashMap::new();
    let mut item_idx: HashMap<String, usize> = HashMap::new();
    let mut cells: Vec<(usize, usize, u8)> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let m = *model_idx.entry(record[0].to_string()).or_insert_with(|| {
            models.push(record[0].to_string());
            models.len() - 1
        });
        let i = *item_idx.entry(record[1].to_string()).or_insert_with(|| {
            let mut item = Item::new(&record[1]);
            if has_stratum && !record[2].is_empty() {
                item.stratum = Some(record[2].to_string());
            }
            items.push(item);
            items.len() - 1
        });
        let field = &record[record.len() - 1];
        let r = match field.trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    row,
                    column: "response".into(),
                    message: format!("not binary: {other:?}"),
                })
            }
        };
        cells.push((m, i, r));
    }
    let n = items.len();
    let mut responses = vec![u8::MAX; models.len() * n];
    for (m, i, r) in cells {
        responses[m * n + i] = r;
    }
    if responses.contains(&u8::MAX) {
        return Err(Error::InvalidArgument("item response table is incomplete".into()));
    }
    ItemResponseMatrix::new(models, items, responses)
}

pub fn write_item_responses_csv<W: std::io::Write>(irm: &ItemResponseMatrix, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["model_id", "item_id", "stratum", "response"])?;
    for (m, model) in irm.models().iter().enumerate() {
        for (i, item) in irm.items().iter().enumerate() {
            let r = irm.response(m, i).to_string();
            wtr.write_record([model.as_str(), &item.id, item.stratum.as_deref().unwrap_or(""), &r])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<item responses>", e))?;
    Ok(())
}
