use maskalign::tensor::{read_npy, write_npy};
use maskalign::{decode_rle, encode_rle, DenseTensor, LabelMap, MaskSet, TensorData};
use proptest::prelude::*;

fn shapes() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 1..=4)
}

fn tensors() -> impl Strategy<Value = DenseTensor> {
    shapes().prop_flat_map(|shape| {
        let n: usize = shape.iter().product();
        let s = shape.clone();
        prop_oneof![
            prop::collection::vec(any::<u32>().prop_map(f32::from_bits), n)
                .prop_map(TensorData::from),
            prop::collection::vec(any::<u64>().prop_map(f64::from_bits), n)
                .prop_map(TensorData::from),
            prop::collection::vec(any::<u8>(), n).prop_map(TensorData::from),
            prop::collection::vec(any::<u16>(), n).prop_map(TensorData::from),
        ]
        .prop_map(move |data| DenseTensor::new(s.clone(), data).unwrap())
    })
}

fn bits(t: &DenseTensor) -> Vec<u64> {
    match t.data() {
        TensorData::F32(v) => v.iter().map(|x| u64::from(x.to_bits())).collect(),
        TensorData::F64(v) => v.iter().map(|x| x.to_bits()).collect(),
        TensorData::U8(v) => v.iter().map(|&x| u64::from(x)).collect(),
        TensorData::U16(v) => v.iter().map(|&x| u64::from(x)).collect(),
    }
}

proptest! {
    #[test]
    fn npy_roundtrip_is_bit_exact(t in tensors()) {
        let mut buf = Vec::new();
        write_npy(&mut buf, &t).unwrap();
        prop_assert_eq!((buf.len() - t.len() * t.dtype().size()) % 64, 0);
        let back = read_npy(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.shape(), t.shape());
        prop_assert_eq!(back.dtype(), t.dtype());
        prop_assert_eq!(bits(&back), bits(&t));
    }

    #[test]
    fn mask_set_json_keeps_order(
        (h, w, grids) in (1usize..6, 1usize..6).prop_flat_map(|(h, w)| {
            (Just(h), Just(w), prop::collection::vec(prop::collection::vec(any::<bool>(), h * w), 0..5))
        })
    ) {
        let masks = grids.iter().map(|g| encode_rle(g, h, w).unwrap()).collect();
        let set = MaskSet::new(h, w, masks).unwrap();
        let back = MaskSet::from_json(&set.to_json()).unwrap();
        prop_assert_eq!(&back, &set);
        for (m, g) in back.masks().iter().zip(&grids) {
            prop_assert_eq!(&decode_rle(m), g);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn label_png_keeps_every_value(
        (h, w, labels) in (1usize..9, 1usize..9).prop_flat_map(|(h, w)| {
            (Just(h), Just(w), prop::collection::vec(any::<u8>(), h * w))
        })
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.png");
        let map = LabelMap::new(h, w, labels).unwrap();
        map.save_png(&path).unwrap();
        prop_assert_eq!(LabelMap::load_png(&path).unwrap(), map);
    }
}
