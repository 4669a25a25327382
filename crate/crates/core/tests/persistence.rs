mod common;

use tabdisc_core::embed::{build_encoder, EncoderSpec, Vector};
use tabdisc_core::index::{build_exact, build_ivf, two_round_retrieve, Bm25Params, FirstStageIndex, RetrievalParams, SparseIndex};
use tabdisc_core::rcg::{build_collection_triples, retrieval_text, sidecar_path, TripleStore};
use tabdisc_core::Error;

fn fixture() -> (tabdisc_core::corpus::TableCollection, TripleStore, Vec<Vector>) {
    let coll = common::mixed_collection(12, 21);
    let store = build_collection_triples(&coll);
    let enc = build_encoder(&EncoderSpec::reference(64)).unwrap();
    let texts: Vec<String> = store
        .iter()
        .map(|t| retrieval_text(t, coll.get(&t.table_id).unwrap()))
        .collect();
    let vectors = enc.encode_passages(&texts).unwrap();
    (coll, store, vectors)
}

fn indexes() -> (TripleStore, Vec<FirstStageIndex>) {
    let (coll, store, vectors) = fixture();
    let ids: Vec<u64> = store.iter().map(|t| t.triple_id).collect();
    let texts: Vec<String> = store
        .iter()
        .map(|t| retrieval_text(t, coll.get(&t.table_id).unwrap()))
        .collect();
    let sparse = SparseIndex::build(ids.iter().copied().zip(texts.iter().map(String::as_str)), Bm25Params::default());
    let mut ivf = build_ivf(&vectors, &ids, 8, 3).unwrap();
    ivf.nprobe = 3;
    (
        store,
        vec![
            FirstStageIndex::Exact(build_exact(&vectors, &ids).unwrap()),
            FirstStageIndex::Ivf(ivf),
            FirstStageIndex::Sparse(sparse),
        ],
    )
}

const QUESTIONS: [&str; 4] = [
    "what is the field 1 of the one whose field 2 is alpha 3?",
    "table number 5",
    "tango 2 in table number 7",
    "long long",
];

#[test]
fn save_load_gives_identical_retrieval() {
    let (store, indexes) = indexes();
    let enc = build_encoder(&EncoderSpec::reference(64)).unwrap();
    let params = RetrievalParams { k_u: 10, k_t: 3, max_try_ku: 60, per_table_cap: 3 };
    for index in indexes {
        let dir = tempfile::tempdir().unwrap();
        let manifest = index.save(dir.path()).unwrap();
        assert_eq!(manifest.kind, index.kind());
        let loaded = FirstStageIndex::load(dir.path()).unwrap();
        assert_eq!(loaded, index);
        for q in QUESTIONS {
            let a = two_round_retrieve(q, enc.as_ref(), &index, &store, &params).unwrap();
            let b = two_round_retrieve(q, enc.as_ref(), &loaded, &store, &params).unwrap();
            assert_eq!(a, b);
            assert!(a.len() <= params.k_u);
        }
    }
}

#[test]
fn tampered_blob_is_rejected() {
    let (_, indexes) = indexes();
    for (index, blob) in indexes.into_iter().zip(["vectors.bin", "centroids.bin", "postings.json"]) {
        let dir = tempfile::tempdir().unwrap();
        index.save(dir.path()).unwrap();
        let path = dir.path().join(blob);
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 2;
        bytes[last] ^= 0x01;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(FirstStageIndex::load(dir.path()), Err(Error::Checksum { .. })), "{blob}");
    }
}

#[test]
fn triple_store_round_trip() {
    let (_, store, _) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("triples.bin");
    store.save(&path).unwrap();
    assert!(sidecar_path(&path).exists());
    assert_eq!(TripleStore::load(&path).unwrap(), store);
}

#[test]
fn empty_question_retrieves_nothing() {
    let (store, indexes) = indexes();
    let enc = build_encoder(&EncoderSpec::reference(64)).unwrap();
    for index in &indexes {
        assert!(two_round_retrieve("  ", enc.as_ref(), index, &store, &RetrievalParams::default())
            .unwrap()
            .is_empty());
    }
}
