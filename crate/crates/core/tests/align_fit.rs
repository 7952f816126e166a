use spokenvis::align::*;
use spokenvis::synth::{generate, SynthConfig};
use spokenvis::{Error, Tensor};

fn synth(n_images: usize, seed: u64) -> Dataset {
    generate(&SynthConfig { n_images, seed, ..Default::default() }).unwrap().dataset
}

fn small_cfg(epochs: usize, seed: u64) -> FitConfig {
    FitConfig { h: 16, learning_rate: 4e-4, epochs, seed, ..Default::default() }
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let ds = synth(20, 1);
    let (p, report) = fit(&ds, &small_cfg(0, 5)).unwrap();
    assert_eq!(p, AlignParams::init(16, 64, 32, AlignInit::Gaussian, 5).unwrap());
    assert!(report.epoch_costs.is_empty());
}

#[test]
fn same_seed_gives_identical_parameters() {
    let ds = synth(60, 2);
    let (a, ra) = fit(&ds, &small_cfg(4, 9)).unwrap();
    let (b, rb) = fit(&ds, &small_cfg(4, 9)).unwrap();
    for (ta, tb) in a.tensors().values().zip(b.tensors().values()) {
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(ta), bits(tb));
    }
    assert_eq!(ra, rb);
    let (c, _) = fit(&ds, &small_cfg(4, 10)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn cost_falls_on_planted_data() {
    let ds = synth(120, 3);
    let (_, report) = fit(&ds, &small_cfg(40, 3)).unwrap();
    assert_eq!(report.epoch_costs.len(), 40);
    assert_eq!(report.batches_per_epoch, 3);
    let (first, last) = (report.epoch_costs[0], *report.epoch_costs.last().unwrap());
    assert!(last < first, "{last} >= {first}");
}

#[test]
fn image_without_captions_is_rejected() {
    let mut ds = synth(5, 4);
    ds.captions.retain(|c| c.image_id != ds.images[2].id);
    assert!(matches!(fit(&ds, &small_cfg(1, 0)), Err(Error::Data(_))));
}

#[test]
fn invalid_config_names_its_key() {
    let ds = synth(5, 4);
    let err = fit(&ds, &FitConfig { learning_rate: 0.0, ..small_cfg(1, 0) }).unwrap_err();
    assert!(err.to_string().contains("align.learning_rate"), "{err}");
}
