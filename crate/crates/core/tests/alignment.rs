use maskalign::proto::{
    finalize_prototypes, proto_loss, proto_loss_grad, prototype_loss, similarity, AlignConfig,
    PrototypeAccumulator, PrototypeBank,
};
use maskalign::{DenseTensor, LabelMap};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bank(rng: &mut ChaCha8Rng, k: usize, c: usize) -> PrototypeBank {
    let mut acc = PrototypeAccumulator::new(k, c);
    let f: Vec<f64> = (0..k * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let labels = LabelMap::new(1, k, (0..k as u8).collect()).unwrap();
    acc.accumulate(&DenseTensor::new(vec![1, k, c], f).unwrap(), &labels)
        .unwrap();
    finalize_prototypes(&acc).unwrap()
}

struct Instance {
    bank: PrototypeBank,
    z: Vec<f64>,
    labels: Vec<u8>,
    c: usize,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(2..=5);
    let c = rng.gen_range(2..=8);
    let n = rng.gen_range(1..=8);
    let bank = random_bank(&mut rng, k, c);
    let z = (0..n * c).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..k) as u8).collect();
    labels[0] = rng.gen_range(0..k) as u8;
    for l in labels.iter_mut().skip(1) {
        if rng.gen_bool(0.2) {
            *l = 255;
        }
    }
    Instance { bank, z, labels, c }
}

impl Instance {
    fn n(&self) -> usize {
        self.labels.len()
    }

    fn z(&self) -> DenseTensor {
        DenseTensor::new(vec![1, self.n(), self.c], self.z.clone()).unwrap()
    }

    fn labels(&self) -> LabelMap {
        LabelMap::new(1, self.n(), self.labels.clone()).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn loss_is_bounded(seed in any::<u64>(), t in 0.05f64..2.0) {
        let inst = instance(seed);
        let cfg = AlignConfig { temperature: t, ..Default::default() };
        let l = prototype_loss(&inst.z(), &inst.bank, &inst.labels(), &cfg).unwrap();
        let k = inst.bank.classes() as f64;
        prop_assert!(l >= 0.0);
        prop_assert!(l <= k.ln() + 2.0 / t + 1e-9, "{} > ln {} + 2/{}", l, k, t);
    }

    #[test]
    fn loss_ignores_pixel_order(seed in any::<u64>()) {
        let inst = instance(seed);
        let mut order: Vec<usize> = (0..inst.n()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let z: Vec<f64> = order
            .iter()
            .flat_map(|&i| inst.z[i * inst.c..(i + 1) * inst.c].to_vec())
            .collect();
        let labels: Vec<u8> = order.iter().map(|&i| inst.labels[i]).collect();
        let permuted = Instance { z, labels, bank: inst.bank.clone(), c: inst.c };
        let cfg = AlignConfig::default();
        let a = prototype_loss(&inst.z(), &inst.bank, &inst.labels(), &cfg).unwrap();
        let b = prototype_loss(&permuted.z(), &permuted.bank, &permuted.labels(), &cfg).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn similarity_path_agrees_with_direct_loss(seed in any::<u64>(), normalize in any::<bool>()) {
        let inst = instance(seed);
        let cfg = AlignConfig { normalize_projected: normalize, ..Default::default() };
        let s = similarity(&inst.z(), &inst.bank, &cfg).unwrap();
        let via = proto_loss(&s, &inst.labels()).unwrap();
        let direct = prototype_loss(&inst.z(), &inst.bank, &inst.labels(), &cfg).unwrap();
        prop_assert!((via - direct).abs() <= 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn small_step_descends(seed in any::<u64>()) {
        let inst = instance(seed);
        let cfg = AlignConfig::default();
        let z = inst.z();
        let before = prototype_loss(&z, &inst.bank, &inst.labels(), &cfg).unwrap();
        let g = proto_loss_grad(&z, &inst.bank, &inst.labels(), &cfg).unwrap().to_f64_vec();
        let gnorm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(gnorm > 1e-6);
        let step = 1e-4 / gnorm;
        let moved: Vec<f64> = inst.z.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        let after = prototype_loss(
            &DenseTensor::new(vec![1, inst.n(), inst.c], moved).unwrap(),
            &inst.bank,
            &inst.labels(),
            &cfg,
        )
        .unwrap();
        prop_assert!(after < before, "{} >= {}", after, before);
    }

    #[test]
    fn accumulation_order_does_not_matter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k, c) = (4, 6);
        let images: Vec<(DenseTensor, LabelMap)> = (0..rng.gen_range(2..8))
            .map(|_| {
                let (h, w) = (rng.gen_range(1..5), rng.gen_range(1..5));
                let f: Vec<f32> = (0..h * w * c).map(|_| rng.gen_range(-10.0..10.0)).collect();
                let l: Vec<u8> = (0..h * w)
                    .map(|_| if rng.gen_bool(0.2) { 255 } else { rng.gen_range(0..k as u8) })
                    .collect();
                (DenseTensor::new(vec![h, w, c], f).unwrap(), LabelMap::new(h, w, l).unwrap())
            })
            .collect();
        let mut sequential = PrototypeAccumulator::new(k, c);
        for (f, l) in &images {
            sequential.accumulate(f, l).unwrap();
        }
        let mut order: Vec<usize> = (0..images.len()).collect();
        order.shuffle(&mut rng);
        let mut merged = PrototypeAccumulator::new(k, c);
        for i in order {
            let mut part = PrototypeAccumulator::new(k, c);
            part.accumulate(&images[i].0, &images[i].1).unwrap();
            merged.merge(&part).unwrap();
        }
        prop_assert_eq!(sequential.counts(), merged.counts());
        for (a, b) in sequential.sums().iter().zip(merged.sums()) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
        if let Ok(bank) = finalize_prototypes(&merged) {
            for class in 0..k {
                if bank.present()[class] {
                    let norm: f64 = bank.row(class).iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt();
                    prop_assert!((norm - 1.0).abs() < 1e-6);
                }
            }
        }
    }
}
