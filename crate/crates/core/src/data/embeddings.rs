use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Row-major embedding vectors with an integer identity label per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingDataset {
    ids: Vec<String>,
    dim: usize,
    vectors: Vec<f64>,
    identity: Vec<u32>,
}

impl EmbeddingDataset {
    pub fn new(ids: Vec<String>, dim: usize, vectors: Vec<f64>, identity: Vec<u32>) -> Result<Self> {
        if ids.len() != identity.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                found: identity.len(),
            });
        }
        if vectors.len() != ids.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: ids.len() * dim,
                found: vectors.len(),
            });
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("EmbeddingDataset::new"));
        }
        Ok(EmbeddingDataset {
            ids,
            dim,
            vectors,
            identity,
        })
    }

    pub fn len(&self) -> usize {
        self.identity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identity.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn identity(&self) -> &[u32] {
        &self.identity
    }

    pub fn n_identities(&self) -> usize {
        self.identity.iter().collect::<BTreeSet<_>>().len()
    }
}

/// Parameters of the synthetic identity-embedding generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityGenerator {
    pub n_identities: usize,
    pub per_identity: usize,
    pub dim: usize,
    pub within_spread: f64,
    pub between_spread: f64,
    pub seed: u64,
}

impl IdentityGenerator {
    /// The repository's default calibration: 40 identities of 10 records,
    /// matching the size of the face-clustering benchmark.
    pub const DEFAULT: IdentityGenerator = IdentityGenerator {
        n_identities: 40,
        per_identity: 10,
        dim: 32,
        within_spread: 0.3,
        between_spread: 1.0,
        seed: 2024,
    };

    pub fn generate(&self) -> Result<EmbeddingDataset> {
        generate_synthetic_identities(
            self.n_identities,
            self.per_identity,
            self.dim,
            self.within_spread,
            self.between_spread,
            self.seed,
        )
    }
}

/// Identity centroids are i.i.d. isotropic Gaussians with scale
/// `between_spread`; each member is its centroid plus isotropic Gaussian noise
/// with scale `within_spread`. Records are grouped by identity.
pub fn generate_synthetic_identities(
    n_identities: usize,
    per_identity: usize,
    dim: usize,
    within_spread: f64,
    between_spread: f64,
    seed: u64,
) -> Result<EmbeddingDataset> {
    if n_identities == 0 || per_identity == 0 || dim == 0 {
        return Err(Error::InvalidArgument("identity generator counts must be positive".into()));
    }
    if !(within_spread >= 0.0 && between_spread >= 0.0) {
        return Err(Error::InvalidArgument("spreads must be non-negative".into()));
    }
    let mut centroid_rng = rng::stream(seed, "identity-centroids", 0);
    let centroids: Vec<f64> = (0..n_identities * dim)
        .map(|_| between_spread * centroid_rng.sample::<f64, _>(StandardNormal))
        .collect();

    let n = n_identities * per_identity;
    let mut ids = Vec::with_capacity(n);
    let mut identity = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * dim);
    for c in 0..n_identities {
        let mut noise = rng::stream(seed, "identity-members", c as u64);
        let centroid = &centroids[c * dim..(c + 1) * dim];
        for k in 0..per_identity {
            ids.push(format!("id{c:03}-{k:03}"));
            identity.push(c as u32);
            vectors.extend(
                centroid
                    .iter()
                    .map(|&mu| mu + within_spread * noise.sample::<f64, _>(StandardNormal)),
            );
        }
    }
    EmbeddingDataset::new(ids, dim, vectors, identity)
}

/// Reads `id,identity,v0,v1,...` rows.
pub fn load_embeddings_csv(path: impl AsRef<Path>) -> Result<EmbeddingDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings_csv(file)
}

pub fn read_embeddings_csv<R: std::io::Read>(reader: R) -> Result<EmbeddingDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 3 || header[0] != "id" || header[1] != "identity" {
        return Err(Error::SchemaMismatch {
            expected: vec!["id".into(), "identity".into(), "v0".into()],
            found: header,
        });
    }
    let dim = header.len() - 2;
    let (mut ids, mut identity, mut vectors) = (Vec::new(), Vec::new(), Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        ids.push(record[0].to_string());
        identity.push(record[1].trim().parse().map_err(|_| Error::Parse {
            row,
            column: "identity".into(),
            message: format!("not an integer: {:?}", &record[1]),
        })?);
        for (j, field) in record.iter().enumerate().skip(2) {
            vectors.push(field.trim().parse().map_err(|_| Error::Parse {
                row,
                column: header[j].clone(),
                message: format!("not a number: {field:?}"),
            })?);
        }
    }
    if ids.is_empty() {
        return Err(Error::EmptyDataset);
    }
    EmbeddingDataset::new(ids, dim, vectors, identity)
}

pub fn write_embeddings_csv<W: std::io::Write>(ds: &EmbeddingDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "identity".to_string()];
    header.extend((0..ds.dim()).map(|j| format!("v{j}")));
    wtr.write_record(&header)?;
    for i in 0..ds.len() {
        let mut row = vec![ds.ids()[i].clone(), ds.identity()[i].to_string()];
        row.extend(ds.vector(i).iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<embeddings>", e))?;
    Ok(())
}
