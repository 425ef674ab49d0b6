use ibkit_core::adapter::checkpoint::{load_checkpoint_into, read_manifest, save_checkpoint};
use ibkit_core::adapter::{fused_forward, FusedParams, Mode};
use ibkit_core::tensor::{Matrix, ParamCollection};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn restored_model_reproduces_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = FusedParams::init(16, 4, 0.3, &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(dir.path(), &params, serde_json::json!({"note": "test"})).unwrap();

    let mut other = FusedParams::init(16, 4, 0.3, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
    load_checkpoint_into(dir.path(), &mut other).unwrap();
    for (a, b) in params.slots().iter().zip(other.slots()) {
        assert_eq!(a.value().data(), b.value().data());
    }
    let x = Matrix::from_fn(8, 16, |r, c| ((r * 16 + c) as f64).sin());
    let za = fused_forward(&x, &params, Mode::Infer, &mut rng).unwrap().0;
    let zb = fused_forward(&x, &other, Mode::Infer, &mut rng).unwrap().0;
    assert_eq!(za, zb);

    let manifest = read_manifest(dir.path()).unwrap();
    assert_eq!(manifest.slots.len(), params.slots().len());
    assert_eq!(manifest.meta["note"], "test");
}
