use super::*;
use crate::camera::{Frame, FRAME_PIXELS};
use crate::corpus::{build_corpus, corpus_clip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use crate::tensor::{cast_vec, AdamHyper, OptState};

fn tiny(mode: LabelMode) -> ClassifierConfig {
    ClassifierConfig {
        channels: [2, 3, 4],
        embed: 8,
        head_hidden: vec![8],
        batch_size: 16,
        epochs: 2,
        mode,
        ..ClassifierConfig::default()
    }
}

fn tiny_model(seed: u64, mode: LabelMode) -> Classifier {
    Classifier::init(Architecture::of(&tiny(mode)), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn clip_pixels(seed: u64, id: u32, skill: Skill) -> Vec<f32> {
    let c = corpus_clip(seed, id, skill, LabelMode::Curated);
    c.clip.frames().iter().flat_map(|f| f.pixels.iter().copied()).collect()
}

#[test]
fn curated_scores_are_a_distribution() {
    let c = tiny_model(1, LabelMode::Curated);
    for skill in Skill::ALL {
        let s = c.scores_pixels(&clip_pixels(2, 0, skill)).unwrap();
        assert_eq!(s.len(), 4);
        assert!((s.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        assert!(s.iter().all(|&p| p > 0.0));
    }
    let m = tiny_model(1, LabelMode::MultiLabel);
    let s = m.scores_pixels(&clip_pixels(2, 0, Skill::Run)).unwrap();
    assert!(s.iter().all(|&p| (0.0..=1.0).contains(&p)));
}

#[test]
fn forward_is_deterministic() {
    let a = tiny_model(3, LabelMode::Curated);
    let b = tiny_model(3, LabelMode::Curated);
    let px = clip_pixels(4, 1, Skill::Jump);
    assert_eq!(a.scores_pixels(&px).unwrap(), b.scores_pixels(&px).unwrap());
    assert_ne!(a.params, tiny_model(4, LabelMode::Curated).params);
}

#[test]
fn untrained_model_is_uncertain_on_background() {
    let px: Vec<f32> = (0..CLIP_LEN).flat_map(|_| Frame::filled(0.05).pixels).collect();
    let arch = Architecture::of(&ClassifierConfig::default());
    let mut entropy = 0.0;
    for seed in 0..100 {
        let c = Classifier::init(arch.clone(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let p = c.scores_pixels(&px).unwrap();
        entropy -= p.iter().map(|&q| f64::from(q) * f64::from(q).ln()).sum::<f64>();
    }
    assert!(entropy / 100.0 > 1.0, "mean entropy {}", entropy / 100.0);
}

#[test]
fn rejects_wrong_clip_size() {
    let c = tiny_model(0, LabelMode::Curated);
    assert!(matches!(c.scores_pixels(&[0.5; 100]), Err(Error::Shape(_))));
    assert!(matches!(c.logits_from_embeddings(&vec![vec![0.0; 8]; 3]), Err(Error::Shape(_))));
}

#[test]
fn pool_matches_direct_definition() {
    let e: Vec<Vec<f32>> = (0..CLIP_LEN).map(|i| vec![i as f32, (i % 2) as f32]).collect();
    let p = Classifier::pool(&e);
    assert_eq!(p.len(), 4);
    assert!((p[0] - 3.5).abs() < 1e-6);
    assert!((p[1] - 0.5).abs() < 1e-6);
    assert!((p[2] - 1.0).abs() < 1e-6);
    assert!((p[3] - 1.0).abs() < 1e-6);
}

/// Central differences in 64-bit along random directions restricted to
/// each parameter tensor, against the analytic directional derivative.
#[test]
fn gradient_matches_finite_difference() {
    for mode in [LabelMode::Curated, LabelMode::MultiLabel] {
        let c = tiny_model(7, mode);
        let px: Vec<f64> = cast_vec(&clip_pixels(5, 2, Skill::Walk));
        let target = match mode {
            LabelMode::Curated => vec![0.0, 0.7, 0.3, 0.0],
            LabelMode::MultiLabel => vec![0.0, 1.0, 1.0, 0.0],
        };
        // zero biases put units fed by blank regions exactly on a relu kink
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params: Vec<f64> = c.params.iter().map(|&p| f64::from(p) + rng.random_range(-0.01..0.01)).collect();
        let mut g = vec![0.0f64; params.len()];
        c.loss_and_grad_at(&params, &px, &target, &mut g, true).unwrap();
        let ne = c.encoder_len();
        let mut ranges: Vec<_> = (0..c.encoder().layers().len()).map(|i| c.encoder().layer_params(i)).collect();
        ranges.extend((0..c.head().layers().len()).map(|i| {
            let r = c.head().layer_params(i);
            r.start + ne..r.end + ne
        }));
        for r in ranges.into_iter().filter(|r| !r.is_empty()) {
            let dir: Vec<f64> = (0..g.len()).map(|i| if r.contains(&i) { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
            let analytic: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            let eps = 1e-8;
            let loss_at = |s: f64| {
                let p: Vec<f64> = params.iter().zip(&dir).map(|(p, d)| p + s * d).collect();
                let mut scratch = vec![0.0f64; p.len()];
                c.loss_and_grad_at(&p, &px, &target, &mut scratch, true).unwrap()
            };
            let numeric = (loss_at(eps) - loss_at(-eps)) / (2.0 * eps);
            let tol = 1e-4 * analytic.abs().max(1e-3);
            assert!((numeric - analytic).abs() < tol, "{mode} {r:?}: numeric {numeric} analytic {analytic}");
        }
    }
}

#[test]
fn head_only_gradient_leaves_encoder_untouched() {
    let c = tiny_model(2, LabelMode::Curated);
    let mut g = vec![0.0f32; c.params.len()];
    c.loss_and_grad(&clip_pixels(1, 0, Skill::Run), &[0.0, 0.0, 1.0, 0.0], &mut g, false).unwrap();
    assert!(g[..c.encoder_len()].iter().all(|&v| v == 0.0));
    assert!(g[c.encoder_len()..].iter().any(|&v| v != 0.0));
}

#[test]
fn overfits_a_single_clip() {
    let arch = Architecture::of(&ClassifierConfig::default());
    let mut c = Classifier::init(arch, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let px = clip_pixels(6, 3, Skill::Jump);
    let target = [0.0, 0.0, 0.0, 1.0];
    let mut opt = OptState::new(
        c.params.len(),
        AdamHyper {
            lr: 1e-3,
            weight_decay: 0.0,
            ..AdamHyper::default()
        },
    );
    let mut loss = f64::INFINITY;
    for _ in 0..200 {
        let mut g = vec![0.0f32; c.params.len()];
        loss = c.loss_and_grad(&px, &target, &mut g, true).unwrap();
        if loss < 0.01 {
            break;
        }
        opt.step(&mut c.params, &g, 1e-3).unwrap();
    }
    assert!(loss < 0.01, "loss {loss}");
}

#[test]
fn augmentation_probability_zero_is_identity() {
    let mut px = clip_pixels(3, 0, Skill::Walk);
    let orig = px.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(random_conv_augment(&mut px, &mut rng, 0.0).unwrap().is_none());
    assert_eq!(px, orig);
}

#[test]
fn augmentation_replays_per_frame() {
    let mut px = clip_pixels(3, 1, Skill::Run);
    let orig = px.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let k = random_conv_augment(&mut px, &mut rng, 1.0).unwrap().unwrap();
    assert!(KERNEL_SIZES.contains(&k.size));
    assert_eq!(k.weights.len(), k.size * k.size);
    assert!(px.iter().all(|v| (0.0..=1.0).contains(v)));
    for (i, frame) in orig.chunks_exact(FRAME_PIXELS).enumerate() {
        let mut f = apply_kernel(&k, frame).unwrap();
        renormalize(&mut f, k.range);
        let got = &px[i * FRAME_PIXELS..(i + 1) * FRAME_PIXELS];
        assert!(f.iter().zip(got).all(|(a, b)| (a - b).abs() < 1e-6));
    }
}

#[test]
fn unit_kernel_on_full_range_clip_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut px: Vec<f32> = (0..CLIP_LEN * FRAME_PIXELS).map(|_| rng.random_range(0.0..1.0)).collect();
    px[0] = 0.0;
    px[1] = 1.0;
    let k = ConvKernel {
        size: 1,
        weights: vec![1.0],
        range: (0.0, 1.0),
    };
    for frame in px.chunks_exact(FRAME_PIXELS) {
        let mut f = apply_kernel(&k, frame).unwrap();
        renormalize(&mut f, k.range);
        assert_eq!(f, frame);
    }
}

#[test]
fn mixup_endpoints() {
    let a = Sample {
        pixels: vec![0.2, 0.8],
        target: vec![1.0, 0.0],
    };
    let b = Sample {
        pixels: vec![0.6, 0.0],
        target: vec![0.0, 1.0],
    };
    let out = mixup(&[a.clone()], &[b.clone()], &[1.0]).unwrap();
    assert_eq!(out[0], a);
    let half = &mixup(&[a.clone()], &[b.clone()], &[0.5]).unwrap()[0];
    assert!((half.pixels[0] - 0.4).abs() < 1e-6 && (half.pixels[1] - 0.4).abs() < 1e-6);
    assert_eq!(half.target, vec![0.5, 0.5]);
    assert!(mixup(&[a], &[b], &[0.5, 0.5]).is_err());
}

#[test]
fn evaluation_of_perfect_and_uniform_predictors() {
    let one_hot = |k: usize| -> Vec<f32> { (0..4).map(|j| f32::from(u8::from(j == k))).collect() };
    let rows: Vec<(Vec<f32>, u8)> = (0..40).map(|i| (one_hot(i % 4), 1u8 << (i % 4))).collect();
    let perfect = Evaluation::from_scores(rows.iter().map(|(s, l)| (s.as_slice(), *l)));
    assert_eq!(perfect.accuracy, 1.0);
    assert_eq!(perfect.support(), [10; 4]);
    for r in 0..4 {
        assert_eq!(perfect.confusion[r][r], 10);
        assert!((perfect.mean_scores[r][r] - 1.0).abs() < 1e-12);
    }
    let flat = [0.25f32; 4];
    let uniform = Evaluation::from_scores(rows.iter().map(|(_, l)| (flat.as_slice(), *l)));
    assert!((uniform.accuracy - 0.25).abs() < 1e-12);
    assert_eq!(uniform.confusion.iter().map(|r| r.iter().sum::<usize>()).sum::<usize>(), 40);
    assert!(uniform.report().contains("accuracy 0.2500"));
}

#[test]
fn checkpoint_round_trip_and_mismatch() {
    let c = tiny_model(4, LabelMode::MultiLabel);
    let ckpt = c.to_checkpoint();
    let back = Classifier::from_checkpoint(&ckpt).unwrap();
    assert_eq!(back.params, c.params);
    assert_eq!(back.mode(), LabelMode::MultiLabel);
    let bytes = ckpt.to_bytes();
    let loaded = Checkpoint::from_bytes(&bytes, std::path::Path::new("mem")).unwrap();
    let clip = corpus_clip(1, 1, Skill::Walk, LabelMode::Curated).clip;
    assert_eq!(classifier_forward(&loaded, &clip).unwrap(), c.probs(&clip).unwrap());

    let mut other = ckpt.clone();
    other.meta = Architecture::of(&ClassifierConfig {
        embed: 16,
        ..tiny(LabelMode::MultiLabel)
    })
    .meta();
    assert!(matches!(Classifier::from_checkpoint(&other), Err(Error::ManifestMismatch(_))));
}

#[test]
fn training_is_reproducible_and_learns() {
    let data = build_corpus(40, LabelMode::Curated, 13).unwrap();
    let cfg = ClassifierConfig {
        epochs: 3,
        lr: 3e-3,
        seed: 5,
        ..tiny(LabelMode::Curated)
    };
    let a = train_classifier(&data, &cfg).unwrap();
    let b = train_classifier(&data, &cfg).unwrap();
    assert_eq!(a.classifier.to_checkpoint().to_bytes(), b.classifier.to_checkpoint().to_bytes());
    assert_eq!(a.log.len(), 3);
    assert!(a.log.iter().all(|e| e.train_loss.is_finite()));
    assert!(a.log_csv().starts_with("epoch,lr,train_loss,val_acc\n"));
    assert_eq!(a.best_val_acc, a.log.iter().map(|e| e.val_acc).fold(0.0, f64::max));
    let eval = eval_stored(&a.classifier, data.val()).unwrap();
    assert!((eval.accuracy - a.best_val_acc).abs() < 1e-12);
    assert!(a.log[2].train_loss < a.log[0].train_loss);
}

#[test]
fn soup_averages_members() {
    let data = build_corpus(20, LabelMode::Curated, 2).unwrap();
    let cfg = SoupConfig {
        base: tiny(LabelMode::Curated),
        warm_epochs: 1,
        head_epochs: 1,
        weight_decays: vec![0.01, 0.1],
        member_epochs: vec![1],
        finetune_lr_scale: 0.5,
    };
    let r = make_soup(&data, &cfg).unwrap();
    assert_eq!(r.members.len(), 2);
    assert!(r.soup.to_checkpoint().meta.contains("members=2"));
    assert!(r.soup.params.iter().all(|v| v.is_finite()));
    let single = SoupConfig {
        weight_decays: vec![0.1],
        ..cfg
    };
    assert!(make_soup(&data, &single).is_err());
}

#[test]
fn config_validation() {
    assert!(ClassifierConfig::default().validate().is_ok());
    let bad = ClassifierConfig {
        batch_size: 0,
        ..ClassifierConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = ClassifierConfig {
        lr: -1.0,
        ..ClassifierConfig::default()
    };
    assert!(bad.validate().is_err());
}
