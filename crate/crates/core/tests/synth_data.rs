use spokenvis::io::load_dataset;
use spokenvis::synth::*;

#[test]
fn region_means_converge_to_prototypes() {
    let cfg = SynthConfig { n_concepts: 4, n_filler_concepts: 3, d_i: 8, d_w: 4, n_images: 2500, captions_per_image: 1, seed: 8, ..Default::default() };
    let data = generate(&cfg).unwrap();
    let concept = 2;
    let mut sum = vec![0.0; cfg.d_i];
    let mut n = 0usize;
    for (im, t) in data.dataset.images.iter().zip(&data.truth.images) {
        for (r, &c) in t.region_concepts.iter().enumerate() {
            if c == concept && n < 10_000 {
                for (s, v) in sum.iter_mut().zip(im.region(r)) {
                    *s += v;
                }
                n += 1;
            }
        }
    }
    assert_eq!(n, 10_000);
    let bound = 3.0 * cfg.noise_sigma / (n as f64).sqrt();
    let mu = &data.image_prototypes.data()[concept * cfg.d_i..(concept + 1) * cfg.d_i];
    for (s, m) in sum.iter().zip(mu) {
        let diff = (s / n as f64 - m).abs();
        assert!(diff < bound, "coordinate off by {diff:e}, bound {bound:e}");
    }
}

#[test]
fn written_dataset_loads_back_equal() {
    let data = generate(&SynthConfig { n_images: 15, seed: 4, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_synth(dir.path(), &data).unwrap();
    assert_eq!(load_dataset(&manifest).unwrap(), data.dataset);
    assert_eq!(read_ground_truth(dir.path().join(GROUND_TRUTH_FILE)).unwrap(), data.truth);
}

#[test]
fn same_seed_writes_identical_bytes() {
    let cfg = SynthConfig { n_images: 6, seed: 11, ..Default::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_synth(a.path(), &generate(&cfg).unwrap()).unwrap();
    write_synth(b.path(), &generate(&cfg).unwrap()).unwrap();
    for rel in ["manifest.jsonl", GROUND_TRUTH_FILE, "regions/000003.mmtf", "words/000017.mmtf"] {
        assert_eq!(std::fs::read(a.path().join(rel)).unwrap(), std::fs::read(b.path().join(rel)).unwrap(), "{rel}");
    }
    let other = generate(&SynthConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(other.dataset, generate(&cfg).unwrap().dataset);
}

#[test]
fn filler_regions_never_enter_oracle_sets() {
    let data = generate(&SynthConfig { n_images: 40, seed: 2, ..Default::default() }).unwrap();
    let oracle = oracle_alignment(&data.dataset, &data.truth).unwrap();
    let by_id: std::collections::HashMap<_, _> = data.truth.images.iter().map(|t| (t.image_id.clone(), t)).collect();
    for (ct, sets) in data.truth.captions.iter().zip(&oracle) {
        let im = by_id[&ct.image_id];
        for (&c, set) in ct.word_concepts.iter().zip(sets) {
            assert_eq!(set.len(), 4);
            assert!(set.iter().all(|&r| im.region_concepts[r] == c && c < data.truth.n_concepts));
        }
    }
}
