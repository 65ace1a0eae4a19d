//! On-disk cache of fitted predictors.
//!
//! File layout:
//!
//! ```text
//! b"METAREC\0"            8 bytes magic
//! header length           u64, little endian
//! header                  JSON, see CacheHeader
//! arrays                  f64 little endian, in header order
//! ```
//!
//! A file is only reused when its header matches the algorithm, the
//! hyperparameters, the seed and the fingerprint of the training matrix.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::PoolProvider;
use crate::pool::{fit_predictor, AlgorithmId, Params, Pool, PoolConfig, RatingMatrix, TrainedPredictor};

const MAGIC: &[u8; 8] = b"METAREC\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayInfo {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format_version: u32,
    pub algorithm_id: AlgorithmId,
    pub hyperparameters: serde_json::Value,
    pub seed: u64,
    pub fingerprint: String,
    pub arrays: Vec<ArrayInfo>,
}

impl CacheHeader {
    fn expected(id: AlgorithmId, cfg: &PoolConfig, matrix: &RatingMatrix) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            algorithm_id: id,
            hyperparameters: cfg.hyperparameters(id),
            seed: cfg.seed,
            fingerprint: matrix.fingerprint(),
            arrays: Vec::new(),
        }
    }

    fn matches(&self, other: &CacheHeader) -> bool {
        self.format_version == other.format_version
            && self.algorithm_id == other.algorithm_id
            && self.hyperparameters == other.hyperparameters
            && self.seed == other.seed
            && self.fingerprint == other.fingerprint
    }
}

pub fn write_predictor(path: &Path, predictor: &TrainedPredictor, cfg: &PoolConfig) -> Result<()> {
    let params = predictor.params();
    let mut header = CacheHeader::expected(predictor.algorithm(), cfg, predictor.training());
    header.arrays = params
        .0
        .iter()
        .map(|(name, v)| ArrayInfo {
            name: name.clone(),
            len: v.len(),
        })
        .collect();
    let json = serde_json::to_vec(&header)?;

    let tmp = path.with_extension("partial");
    let io = |e| Error::io(&tmp, e);
    let mut w = BufWriter::new(fs::File::create(&tmp).map_err(io)?);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&json).map_err(io)?;
    for (_, values) in &params.0 {
        for v in values {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.into_inner().map_err(|e| io(e.into_error()))?.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Cache(format!("{}: truncated", path.display())),
        _ => Error::io(path, e),
    })
}

fn open(path: &Path) -> Result<(BufReader<fs::File>, CacheHeader)> {
    let mut r = BufReader::new(fs::File::open(path).map_err(|e| Error::io(path, e))?);
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, path)?;
    if &magic != MAGIC {
        return Err(Error::Cache(format!("{}: not a model cache file", path.display())));
    }
    let mut len = [0u8; 8];
    read_exact(&mut r, &mut len, path)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 20 {
        return Err(Error::Cache(format!("{}: implausible header length {len}", path.display())));
    }
    let mut json = vec![0u8; len];
    read_exact(&mut r, &mut json, path)?;
    Ok((r, serde_json::from_slice(&json)?))
}

pub fn read_header(path: &Path) -> Result<CacheHeader> {
    open(path).map(|(_, h)| h)
}

/// Load a predictor if the file's header matches `id`, `cfg` and `matrix`;
/// `Ok(None)` for a stale file.
pub fn read_predictor(
    path: &Path,
    id: AlgorithmId,
    cfg: &PoolConfig,
    matrix: &Arc<RatingMatrix>,
) -> Result<Option<TrainedPredictor>> {
    let (mut r, header) = open(path)?;
    if !header.matches(&CacheHeader::expected(id, cfg, matrix)) {
        return Ok(None);
    }
    let mut params = Params::default();
    for a in &header.arrays {
        let mut bytes = vec![0u8; a.len * 8];
        read_exact(&mut r, &mut bytes, path)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        params.push(&a.name, values);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::Cache(format!("{}: trailing bytes", path.display())));
    }
    TrainedPredictor::from_params(id, cfg, Arc::clone(matrix), params).map(Some)
}

/// Pools backed by a cache directory. Missing, stale or unreadable entries
/// are refitted and rewritten.
#[derive(Debug, Clone)]
pub struct CachedFit {
    pub dir: PathBuf,
}

impl CachedFit {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, id: AlgorithmId, matrix: &RatingMatrix) -> PathBuf {
        self.dir.join(format!("{}-{}.model", id.as_str(), &matrix.fingerprint()[..16]))
    }

    fn load_or_fit(&self, id: AlgorithmId, train: &Arc<RatingMatrix>, cfg: &PoolConfig) -> Result<(TrainedPredictor, bool)> {
        let path = self.path_for(id, train);
        if path.exists() {
            match read_predictor(&path, id, cfg, train) {
                Ok(Some(p)) => return Ok((p, true)),
                Ok(None) => log::info!("{}: stale cache entry, refitting", path.display()),
                Err(e) => log::warn!("{}: unreadable cache entry ({e}), refitting", path.display()),
            }
        }
        let p = fit_predictor(id, train, cfg).map_err(|e| match e {
            e @ (Error::Divergence { .. } | Error::Algorithm { .. }) => e,
            e => Error::Algorithm {
                algorithm: id,
                source: Box::new(e),
            },
        })?;
        write_predictor(&path, &p, cfg)?;
        Ok((p, false))
    }
}

impl PoolProvider for CachedFit {
    fn provide(&self, train: &Arc<RatingMatrix>, cfg: &PoolConfig, ids: &[AlgorithmId]) -> Result<(Pool, usize)> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let loaded = ids
            .par_iter()
            .map(|&id| self.load_or_fit(id, train, cfg))
            .collect::<Result<Vec<_>>>()?;
        let hits = loaded.iter().filter(|(_, hit)| *hit).count();
        Ok((Pool::from_predictors(loaded.into_iter().map(|(p, _)| p).collect())?, hits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn matrix(seed: u64) -> Arc<RatingMatrix> {
        let mut r = rng::stream(seed, 0);
        let mut triples = Vec::new();
        for u in 0..40u32 {
            for i in 0..50u32 {
                if rng::below(&mut r, 3) == 0 {
                    triples.push((u + 1, i + 1, 1.0 + rng::below(&mut r, 5) as f64));
                }
            }
        }
        Arc::new(RatingMatrix::from_triples(triples).unwrap())
    }

    #[test]
    fn cached_pool_predicts_identically() {
        let dir = tempfile::tempdir().unwrap();
        let m = matrix(1);
        let cfg = PoolConfig::with_seed(5);
        let provider = CachedFit::new(dir.path());
        let (fresh, hits) = provider.provide(&m, &cfg, &AlgorithmId::ALL).unwrap();
        assert_eq!(hits, 0);
        let (cached, hits) = provider.provide(&m, &cfg, &AlgorithmId::ALL).unwrap();
        assert_eq!(hits, 9);

        let mut r = rng::stream(77, 0);
        for _ in 0..1000 {
            let u = 1 + rng::below(&mut r, 45) as u32;
            let i = 1 + rng::below(&mut r, 55) as u32;
            assert_eq!(fresh.predict_all(u, i), cached.predict_all(u, i));
        }
    }

    #[test]
    fn stale_entries_are_refitted() {
        let dir = tempfile::tempdir().unwrap();
        let m = matrix(2);
        let provider = CachedFit::new(dir.path());
        let ids = [AlgorithmId::Svd];
        provider.provide(&m, &PoolConfig::with_seed(1), &ids).unwrap();
        let (_, hits) = provider.provide(&m, &PoolConfig::with_seed(2), &ids).unwrap();
        assert_eq!(hits, 0);
        let mut cfg = PoolConfig::with_seed(2);
        cfg.svd.epochs = 3;
        let (_, hits) = provider.provide(&m, &cfg, &ids).unwrap();
        assert_eq!(hits, 0);
        let header = read_header(&provider.path_for(AlgorithmId::Svd, &m)).unwrap();
        assert_eq!(header.seed, 2);
        assert_eq!(header.hyperparameters, cfg.hyperparameters(AlgorithmId::Svd));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = matrix(3);
        let cfg = PoolConfig::with_seed(1);
        let p = fit_predictor(AlgorithmId::BaselineOnly, &m, &cfg).unwrap();
        let path = dir.path().join("b.model");
        write_predictor(&path, &p, &cfg).unwrap();
        assert!(read_predictor(&path, AlgorithmId::BaselineOnly, &cfg, &m).unwrap().is_some());
        assert!(read_predictor(&path, AlgorithmId::Svd, &cfg, &m).unwrap().is_none());

        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_predictor(&path, AlgorithmId::BaselineOnly, &cfg, &m), Err(Error::Cache(_))));
        fs::write(&path, b"not a cache").unwrap();
        assert!(read_header(&path).is_err());

        // an unreadable entry is refitted by the provider
        let provider = CachedFit::new(dir.path());
        fs::write(provider.path_for(AlgorithmId::BaselineOnly, &m), b"garbage").unwrap();
        let (_, hits) = provider.provide(&m, &cfg, &[AlgorithmId::BaselineOnly]).unwrap();
        assert_eq!(hits, 0);
        let (_, hits) = provider.provide(&m, &cfg, &[AlgorithmId::BaselineOnly]).unwrap();
        assert_eq!(hits, 1);
    }
}
