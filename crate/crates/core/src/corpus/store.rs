use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::embed::{EmbedError, Embedder, EmbedderSpec};
use super::item::ContextItem;
use super::vector::EmbeddingVector;
use crate::retrieval::LexicalIndex;
use crate::Scalar;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ITEMS_FILE: &str = "items.jsonl";
const GENERATIONS_DIR: &str = "generations";
const CURRENT_FILE: &str = "CURRENT";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("embedding item `{item_id}` failed: {source}")]
    Embed { item_id: String, source: EmbedError },
    #[error("item `{item_id}` has dimension {got}, store dimension is {expected}")]
    Dimension {
        item_id: String,
        expected: usize,
        got: usize,
    },
    #[error("duplicate item id `{0}`")]
    DuplicateId(String),
    #[error("invalid item: {0}")]
    InvalidItem(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("manifest says {expected} items, found {found}")]
    ItemCount { expected: usize, found: usize },
    #[error("no store generation published under {0}")]
    NoGeneration(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub embedder: EmbedderSpec,
    pub dimension: usize,
    pub item_count: usize,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord<T> {
    #[serde(flatten)]
    pub item: ContextItem,
    pub vector: EmbeddingVector<T>,
}

/// Context items with their embeddings. Immutable once built; records are
/// kept in id order.
#[derive(Debug)]
pub struct VectorStore<T> {
    manifest: StoreManifest,
    records: BTreeMap<String, StoredRecord<T>>,
    lexical: OnceLock<LexicalIndex>,
}

impl<T: Clone> Clone for VectorStore<T> {
    fn clone(&self) -> Self {
        Self {
            manifest: self.manifest.clone(),
            records: self.records.clone(),
            lexical: self.lexical.clone(),
        }
    }
}

impl<T: PartialEq> PartialEq for VectorStore<T> {
    fn eq(&self, other: &Self) -> bool {
        self.manifest == other.manifest && self.records == other.records
    }
}

impl<T: Scalar> VectorStore<T> {
    /// Embeds every item once and assembles the store. The creation time is
    /// passed in so identical inputs give byte-identical files.
    pub fn build<E: Embedder<T> + ?Sized>(
        items: Vec<ContextItem>,
        embedder: &E,
        created_at: DateTime<Utc>,
    ) -> Result<Self, StoreError> {
        let dimension = embedder.dimension();
        let mut records = BTreeMap::new();
        for item in items {
            item.validate().map_err(StoreError::InvalidItem)?;
            if records.contains_key(&item.id) {
                return Err(StoreError::DuplicateId(item.id));
            }
            let vector = embedder
                .embed(&item.text)
                .map_err(|source| StoreError::Embed {
                    item_id: item.id.clone(),
                    source,
                })?;
            if vector.dimension() != dimension {
                return Err(StoreError::Dimension {
                    item_id: item.id,
                    expected: dimension,
                    got: vector.dimension(),
                });
            }
            records.insert(item.id.clone(), StoredRecord { item, vector });
        }
        let manifest = StoreManifest {
            embedder: embedder.spec(),
            dimension,
            item_count: records.len(),
            created_at,
        };
        Ok(Self {
            manifest,
            records,
            lexical: OnceLock::new(),
        })
    }

    pub fn empty(embedder: EmbedderSpec, dimension: usize, created_at: DateTime<Utc>) -> Self {
        Self {
            manifest: StoreManifest {
                embedder,
                dimension,
                item_count: 0,
                created_at,
            },
            records: BTreeMap::new(),
            lexical: OnceLock::new(),
        }
    }

    pub fn manifest(&self) -> &StoreManifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&StoredRecord<T>> {
        self.records.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.contains_key(id)
    }

    /// Records in ascending id order.
    pub fn records(&self) -> impl ExactSizeIterator<Item = &StoredRecord<T>> {
        self.records.values()
    }

    /// Term statistics for the lexical retrievers, built on first use.
    pub fn lexical(&self) -> &LexicalIndex {
        self.lexical
            .get_or_init(|| LexicalIndex::build(self.records().map(|r| &r.item)))
    }

    /// Writes `manifest.json` and `items.jsonl` into `dir` (created if needed).
    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let mut json = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        json.push(b'\n');
        fs::write(&manifest_path, json).map_err(io_err(&manifest_path))?;

        let items_path = dir.join(ITEMS_FILE);
        let file = File::create(&items_path).map_err(io_err(&items_path))?;
        let mut w = BufWriter::new(file);
        for record in self.records.values() {
            serde_json::to_writer(&mut w, record).expect("record serializes");
            w.write_all(b"\n").map_err(io_err(&items_path))?;
        }
        w.flush().map_err(io_err(&items_path))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let raw = fs::read(&manifest_path).map_err(io_err(&manifest_path))?;
        let manifest: StoreManifest =
            serde_json::from_slice(&raw).map_err(|e| StoreError::Format {
                path: manifest_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;

        let items_path = dir.join(ITEMS_FILE);
        let file = File::open(&items_path).map_err(io_err(&items_path))?;
        let mut records = BTreeMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(&items_path))?;
            if line.trim().is_empty() {
                continue;
            }
            let format_err = |message: String| StoreError::Format {
                path: items_path.clone(),
                line: n + 1,
                message,
            };
            let record: StoredRecord<T> =
                serde_json::from_str(&line).map_err(|e| format_err(e.to_string()))?;
            // deserialization bypasses the finiteness check
            EmbeddingVector::new(record.vector.values().to_vec())
                .map_err(|e| format_err(e.to_string()))?;
            record.item.validate().map_err(format_err)?;
            if record.vector.dimension() != manifest.dimension {
                return Err(StoreError::Dimension {
                    item_id: record.item.id,
                    expected: manifest.dimension,
                    got: record.vector.dimension(),
                });
            }
            if records.contains_key(&record.item.id) {
                return Err(StoreError::DuplicateId(record.item.id));
            }
            records.insert(record.item.id.clone(), record);
        }
        if records.len() != manifest.item_count {
            return Err(StoreError::ItemCount {
                expected: manifest.item_count,
                found: records.len(),
            });
        }
        Ok(Self {
            manifest,
            records,
            lexical: OnceLock::new(),
        })
    }
}

/// A directory holding numbered store generations and a `CURRENT` pointer.
///
/// New generations are written to a temporary directory, renamed into place
/// and only then published by atomically replacing `CURRENT`, so readers of
/// the previous generation are never disturbed.
#[derive(Debug, Clone)]
pub struct GenerationRoot {
    root: PathBuf,
}

impl GenerationRoot {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn generation_dir(&self, name: &str) -> PathBuf {
        self.root.join(GENERATIONS_DIR).join(name)
    }

    fn existing(&self) -> Result<Vec<u64>, StoreError> {
        let dir = self.root.join(GENERATIONS_DIR);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut numbers: Vec<u64> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok()?.file_name().to_str()?.parse().ok())
            .collect();
        numbers.sort_unstable();
        Ok(numbers)
    }

    /// Saves `store` as the next generation and makes it current. Returns the
    /// generation name.
    pub fn publish<T: Scalar>(&self, store: &VectorStore<T>) -> Result<String, StoreError> {
        let next = self.existing()?.last().copied().unwrap_or(0) + 1;
        let name = format!("{next:06}");
        let gens = self.root.join(GENERATIONS_DIR);
        fs::create_dir_all(&gens).map_err(io_err(&gens))?;
        let tmp = gens.join(format!(".tmp-{name}-{}", std::process::id()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
        }
        store.save(&tmp)?;
        let dest = self.generation_dir(&name);
        fs::rename(&tmp, &dest).map_err(io_err(&dest))?;

        let pointer_tmp = self.root.join(format!(".{CURRENT_FILE}.tmp"));
        fs::write(&pointer_tmp, format!("{name}\n")).map_err(io_err(&pointer_tmp))?;
        let pointer = self.root.join(CURRENT_FILE);
        fs::rename(&pointer_tmp, &pointer).map_err(io_err(&pointer))?;
        Ok(name)
    }

    pub fn current(&self) -> Result<String, StoreError> {
        let pointer = self.root.join(CURRENT_FILE);
        match fs::read_to_string(&pointer) {
            Ok(s) if !s.trim().is_empty() => Ok(s.trim().to_string()),
            Ok(_) => Err(StoreError::NoGeneration(self.root.clone())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(StoreError::NoGeneration(self.root.clone()))
            }
            Err(e) => Err(StoreError::Io {
                path: pointer,
                source: e,
            }),
        }
    }

    pub fn load_current<T: Scalar>(&self) -> Result<LoadedStore<T>, StoreError> {
        let generation = self.current()?;
        let store = VectorStore::load(&self.generation_dir(&generation))?;
        Ok(LoadedStore { generation, store })
    }
}

/// A store together with the generation it was loaded from.
#[derive(Debug)]
pub struct LoadedStore<T> {
    pub generation: String,
    pub store: VectorStore<T>,
}

/// Shared, swappable reference to the live store. Readers take a snapshot
/// and keep using it even if a newer generation is swapped in meanwhile.
#[derive(Debug)]
pub struct StoreHandle<T> {
    current: RwLock<Arc<LoadedStore<T>>>,
}

impl<T> StoreHandle<T> {
    pub fn new(loaded: LoadedStore<T>) -> Self {
        Self {
            current: RwLock::new(Arc::new(loaded)),
        }
    }

    pub fn snapshot(&self) -> Arc<LoadedStore<T>> {
        Arc::clone(&self.current.read().unwrap_or_else(|p| p.into_inner()))
    }

    /// Replaces the live store, returning the previous one.
    pub fn swap(&self, loaded: LoadedStore<T>) -> Arc<LoadedStore<T>> {
        let mut guard = self.current.write().unwrap_or_else(|p| p.into_inner());
        std::mem::replace(&mut *guard, Arc::new(loaded))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_teams, HashingEmbedder};

    fn items(n: usize) -> Vec<ContextItem> {
        (0..n)
            .flat_map(|i| {
                split_teams(
                    &format!("Message: issue {i} on pool {}", i % 3),
                    &format!("m{i}"),
                )
            })
            .collect()
    }

    fn epoch() -> DateTime<Utc> {
        DateTime::from_timestamp(1_700_000_000, 0).unwrap()
    }

    #[test]
    fn build_records_manifest() {
        let store: VectorStore<f64> =
            VectorStore::build(items(4), &HashingEmbedder::default(), epoch()).unwrap();
        assert_eq!(store.manifest().item_count, 4);
        assert_eq!(store.manifest().dimension, 64);
        assert_eq!(store.manifest().embedder.0, "hashing-fnv1a/64");
    }

    struct ShortOnce;
    impl Embedder<f64> for ShortOnce {
        fn spec(&self) -> EmbedderSpec {
            EmbedderSpec("short".into())
        }
        fn dimension(&self) -> usize {
            64
        }
        fn embed(&self, text: &str) -> Result<EmbeddingVector<f64>, EmbedError> {
            let dim = if text.contains("issue 2") { 63 } else { 64 };
            Ok(EmbeddingVector::new(vec![1.0; dim]).unwrap())
        }
    }

    #[test]
    fn dimension_mismatch_names_the_item() {
        match VectorStore::build(items(4), &ShortOnce, epoch()) {
            Err(StoreError::Dimension {
                item_id,
                expected: 64,
                got: 63,
            }) => assert_eq!(item_id, "m2:0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut it = items(2);
        it.push(it[0].clone());
        assert!(matches!(
            VectorStore::<f64>::build(it, &HashingEmbedder::default(), epoch()),
            Err(StoreError::DuplicateId(id)) if id == "m0:0"
        ));
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let e = HashingEmbedder::default();
        for sub in ["a", "b"] {
            VectorStore::<f32>::build(items(6), &e, epoch())
                .unwrap()
                .save(&dir.path().join(sub))
                .unwrap();
        }
        for f in [MANIFEST_FILE, ITEMS_FILE] {
            assert_eq!(
                fs::read(dir.path().join("a").join(f)).unwrap(),
                fs::read(dir.path().join("b").join(f)).unwrap()
            );
        }
    }

    #[test]
    fn load_rejects_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let store: VectorStore<f64> =
            VectorStore::build(items(3), &HashingEmbedder::default(), epoch()).unwrap();
        store.save(dir.path()).unwrap();
        let path = dir.path().join(ITEMS_FILE);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.lines().take(2).collect::<Vec<_>>().join("\n")).unwrap();
        assert!(matches!(
            VectorStore::<f64>::load(dir.path()),
            Err(StoreError::ItemCount {
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn generations_publish_and_advance() {
        let dir = tempfile::tempdir().unwrap();
        let root = GenerationRoot::new(dir.path());
        assert!(matches!(root.current(), Err(StoreError::NoGeneration(_))));
        let e = HashingEmbedder::default();
        let s1: VectorStore<f64> = VectorStore::build(items(2), &e, epoch()).unwrap();
        let s2: VectorStore<f64> = VectorStore::build(items(5), &e, epoch()).unwrap();
        assert_eq!(root.publish(&s1).unwrap(), "000001");
        assert_eq!(root.publish(&s2).unwrap(), "000002");
        let loaded = root.load_current::<f64>().unwrap();
        assert_eq!(loaded.generation, "000002");
        assert_eq!(loaded.store, s2);
        // the old generation stays readable
        assert_eq!(
            VectorStore::<f64>::load(&root.generation_dir("000001")).unwrap(),
            s1
        );
    }
}
