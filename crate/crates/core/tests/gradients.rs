use roi_attention::loss::{repulsive_single, total_loss, LossConfig};
use roi_attention::model::{model_backward, model_forward, ModelConfig, Readout};
use roi_attention::rng::Stream;
use roi_attention::train::{gradcheck, random_params, random_record, Fault};

/// Looser than the acceptance bound: deeper and pooled configurations have
/// parameters whose true gradient sits near the finite-difference noise floor.
const TOL: f64 = 1e-3;

fn check(cfg: ModelConfig, lambda_rep: f64, k: usize, seeds: std::ops::Range<u64>) {
    let loss = LossConfig {
        lambda_rep,
        ..LossConfig::default()
    };
    for seed in seeds {
        let r = gradcheck(&cfg, &loss, k, seed, None).unwrap();
        assert!(
            r.max_rel_error < TOL,
            "{cfg:?} seed {seed}: {:.3e} at {}",
            r.max_rel_error,
            r.worst_param
        );
    }
}

fn toy() -> ModelConfig {
    ModelConfig {
        a: 6,
        d: 8,
        heads: 2,
        layers: 1,
        ..ModelConfig::default()
    }
}

#[test]
fn anchor_readout_two_layers() {
    check(ModelConfig { layers: 2, ..toy() }, 1.0, 5, 0..2);
}

#[test]
fn meanpool_readout() {
    check(ModelConfig { readout: Readout::MeanPool, ..toy() }, 1.0, 4, 0..2);
}

#[test]
fn maxpool_readout() {
    check(ModelConfig { readout: Readout::MaxPool, ..toy() }, 1.0, 4, 0..2);
}

#[test]
fn without_rope() {
    check(ModelConfig { use_rope: false, ..toy() }, 1.0, 4, 0..2);
}

#[test]
fn without_attention_blocks() {
    check(
        ModelConfig {
            attention: false,
            readout: Readout::MaxPool,
            ..toy()
        },
        0.0,
        4,
        0..2,
    );
}

#[test]
fn bce_only_with_two_rois() {
    check(toy(), 0.0, 2, 0..2);
}

#[test]
fn single_head_wide_mlp() {
    check(ModelConfig { heads: 1, mlp_ratio: 2, ..toy() }, 0.5, 4, 0..2);
}

#[test]
fn sign_flip_fault_is_detected() {
    let r = gradcheck(&toy(), &LossConfig::default(), 4, 0, Some(Fault::SignFlip)).unwrap();
    assert!(!r.passed);
    assert!(r.max_rel_error > 1.0);
}

#[test]
fn repulsive_gradient_matches_finite_differences() {
    let (k, d) = (5, 7);
    for seed in 0..5 {
        let mut s = Stream::new(seed, 9);
        let x: Vec<f64> = (0..k * d).map(|_| s.normal()).collect();
        let (_, g) = repulsive_single(&x, k, 1e-7).unwrap();
        assert!(g[..d].iter().all(|&v| v == 0.0));
        for i in d..k * d {
            let h = 1e-6;
            let mut up = x.clone();
            up[i] += h;
            let mut down = x.clone();
            down[i] -= h;
            let num = (repulsive_single(&up, k, 1e-7).unwrap().0 - repulsive_single(&down, k, 1e-7).unwrap().0) / (2.0 * h);
            let rel = (g[i] - num).abs() / g[i].abs().max(num.abs()).max(1e-8);
            assert!(rel < 1e-6, "seed {seed} entry {i}: {} vs {num}", g[i]);
        }
    }
}

#[test]
fn input_gradient_flows_through_the_loss() {
    let cfg = toy();
    let p = random_params(&cfg, 11).unwrap();
    let r = random_record(4, cfg.a, 11);
    let lcfg = LossConfig::default();
    let tr = model_forward(&r, &p, &cfg).unwrap();
    let lv = total_loss(tr.y_hat, r.label, &tr.x_l, tr.k, &lcfg).unwrap();
    let g = model_backward(&tr, lv.grad_y_hat, lv.grad_x_l.as_deref(), &p, &cfg);
    assert!(g.is_finite());
    assert!(g.to_flat().iter().any(|&v| v != 0.0));
    let no_rep = total_loss(tr.y_hat, r.label, &tr.x_l, tr.k, &LossConfig { lambda_rep: 0.0, ..lcfg }).unwrap();
    assert!(no_rep.grad_x_l.is_none());
}
