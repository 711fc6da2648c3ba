use keyreid::store::{read_store, write_store};
use keyreid::{EmbeddingRecord, EmbeddingStore, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ENCODER: &str = "dinov2-s14";

fn key_frame_store(records: usize, dim: usize, seed: u64) -> EmbeddingStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let recs: Vec<EmbeddingRecord> = (0..records)
        .map(|i| EmbeddingRecord {
            video_id: format!("A{:03}", i / 7),
            frame_index: (i % 7) * 13,
            encoder_id: ENCODER.into(),
            vector: (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
            label: Some(format!("band-{}", i % 11)),
        })
        .collect();
    EmbeddingStore::new(ENCODER, dim)
        .unwrap()
        .upserted(recs)
        .unwrap()
}

#[test]
fn size_fixture_816_by_384_round_trips_on_disk() {
    let store = key_frame_store(816, 384, 816);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gallery.emb");
    write_store(&store, &path).unwrap();

    let header = 4 + 1 + 3 + 4 + 8 + 2 + ENCODER.len();
    let body: usize = store
        .records()
        .iter()
        .map(|r| 2 + r.key().to_string().len() + 1 + 2 + r.label.as_ref().unwrap().len() + 384 * 4)
        .sum();
    assert_eq!(
        std::fs::metadata(&path).unwrap().len() as usize,
        header + body
    );

    let back = read_store(&path).unwrap();
    assert_eq!(back.len(), 816);
    assert_eq!(back.dim(), 384);
    assert_eq!(back.records(), store.records());
    assert_eq!(back.to_bytes().unwrap(), std::fs::read(&path).unwrap());
}

#[test]
fn missing_file_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let err = read_store(&dir.path().join("absent.emb")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("absent.emb"));
}

#[test]
fn truncated_file_on_disk_is_rejected() {
    let store = key_frame_store(3, 8, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.emb");
    let bytes = store.to_bytes().unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
    assert!(matches!(read_store(&path), Err(Error::Truncated(_))));
}
