use maskalign::{confusion, iou_report, ConfusionMatrix, LabelMap};
use proptest::prelude::*;

fn maps_of_width(w: usize, classes: u8) -> impl Strategy<Value = (LabelMap, LabelMap)> {
    (1usize..6).prop_flat_map(move |h| {
        let labels = prop::collection::vec(0..classes, h * w);
        (labels.clone(), labels).prop_map(move |(a, b)| {
            (
                LabelMap::new(h, w, a).unwrap(),
                LabelMap::new(h, w, b).unwrap(),
            )
        })
    })
}

fn maps(classes: u8) -> impl Strategy<Value = (LabelMap, LabelMap)> {
    (1usize..6).prop_flat_map(move |w| maps_of_width(w, classes))
}

/// Two image pairs sharing a width, so they can be stacked vertically.
fn stackable(classes: u8) -> impl Strategy<Value = ((LabelMap, LabelMap), (LabelMap, LabelMap))> {
    (1usize..6).prop_flat_map(move |w| (maps_of_width(w, classes), maps_of_width(w, classes)))
}

proptest! {
    #[test]
    fn swapping_arguments_transposes((pred, gt) in maps(5)) {
        let a = confusion(&pred, &gt, 5).unwrap();
        let b = confusion(&gt, &pred, 5).unwrap();
        prop_assert_eq!(a.transpose(), b);
    }

    #[test]
    fn matrices_add_over_split_images(((p1, g1), (p2, g2)) in stackable(4)) {
        let stack = |a: &LabelMap, b: &LabelMap| {
            let mut v = a.labels().to_vec();
            v.extend_from_slice(b.labels());
            LabelMap::new(a.height() + b.height(), a.width(), v).unwrap()
        };
        let whole = confusion(&stack(&p1, &p2), &stack(&g1, &g2), 4).unwrap();
        let mut parts = confusion(&p1, &g1, 4).unwrap();
        parts.add(&confusion(&p2, &g2, 4).unwrap()).unwrap();
        prop_assert_eq!(whole, parts);
    }

    #[test]
    fn iou_matches_set_counting((pred, gt) in maps(4), subset in prop::collection::btree_set(0usize..4, 1..=4)) {
        let subset: Vec<usize> = subset.into_iter().collect();
        let report = iou_report(&confusion(&pred, &gt, 4).unwrap(), &subset).unwrap();
        let mut defined = Vec::new();
        for c in 0..4u8 {
            let (mut inter, mut union) = (0, 0);
            for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
                inter += u32::from(p == c && g == c);
                union += u32::from(p == c || g == c);
            }
            let want = (union > 0).then(|| f64::from(inter) / f64::from(union));
            prop_assert_eq!(report.per_class[usize::from(c)], want);
            if let Some(v) = want {
                prop_assert!((0.0..=1.0).contains(&v));
                if subset.contains(&usize::from(c)) {
                    defined.push(v);
                }
            }
        }
        let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        prop_assert_eq!(report.miou, mean);
    }

    #[test]
    fn ignored_pixels_are_counted_apart(h in 1usize..5, w in 1usize..5, mask in prop::collection::vec(any::<bool>(), 25)) {
        let gt: Vec<u8> = (0..h * w).map(|i| if mask[i] { 255 } else { 1 }).collect();
        let cm = confusion(&LabelMap::new(h, w, vec![0; h * w]).unwrap(), &LabelMap::new(h, w, gt).unwrap(), 2).unwrap();
        let ignored = mask[..h * w].iter().filter(|&&m| m).count() as u64;
        prop_assert_eq!(cm.ignored(), ignored);
        prop_assert_eq!(cm.total() + cm.ignored(), (h * w) as u64);
        prop_assert_eq!(cm, {
            let mut m = ConfusionMatrix::new(2);
            for _ in 0..(h * w) as u64 - ignored {
                m.add(&confusion(&LabelMap::new(1, 1, vec![0]).unwrap(), &LabelMap::new(1, 1, vec![1]).unwrap(), 2).unwrap()).unwrap();
            }
            for _ in 0..ignored {
                m.add(&confusion(&LabelMap::new(1, 1, vec![0]).unwrap(), &LabelMap::new(1, 1, vec![255]).unwrap(), 2).unwrap()).unwrap();
            }
            m
        });
    }
}
