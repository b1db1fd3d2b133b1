use proptest::prelude::*;

use imgconn::image::{connected_components, is_connected};
use imgconn::lab::{gen_connected, ConnectedFamily, Procedural, ProceduralFamily};
use imgconn::pbm::{self, PbmFormat};
use imgconn::testers::{nonadaptive_query_count, run_tester, verify_certificate, TesterConfig, Variant};
use imgconn::{DyadicEps, Image};

fn quarter() -> DyadicEps {
    DyadicEps::from_inverse(4).unwrap()
}

fn variants() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Nonadaptive), Just(Variant::Adaptive)]
}

fn families() -> impl Strategy<Value = ConnectedFamily> {
    prop_oneof![
        Just(ConnectedFamily::Blob),
        Just(ConnectedFamily::Rectangles),
        Just(ConnectedFamily::Serpentine)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn connected_images_are_accepted(family in families(), img_seed in any::<u64>(), seed in any::<u64>(), variant in variants()) {
        let img = gen_connected(65, family, img_seed);
        let v = run_tester(&img, &TesterConfig::new(quarter(), variant, seed)).unwrap();
        prop_assert!(!v.rejected());
    }

    #[test]
    fn rejections_only_on_disconnected_images_with_sound_witnesses(
        density in 0.0f64..0.6,
        img_seed in any::<u64>(),
        seed in any::<u64>(),
        variant in variants(),
    ) {
        let mut rng = imgconn::rng::substream(img_seed, 0);
        let img = Image::from_fn(65, |_, _| rand::Rng::random_bool(&mut rng, density));
        let v = run_tester(&img, &TesterConfig::new(quarter(), variant, seed)).unwrap();
        if v.rejected() {
            prop_assert!(!is_connected(&img));
            prop_assert!(verify_certificate(&img, &v).is_ok());
        }
    }

    #[test]
    fn nonadaptive_count_ignores_the_image(img_seed in any::<u64>(), seed in any::<u64>()) {
        let img = gen_connected(65, ConnectedFamily::Blob, img_seed);
        let v = run_tester(&img, &TesterConfig::new(quarter(), Variant::Nonadaptive, seed)).unwrap();
        prop_assert_eq!(v.queries_used, nonadaptive_query_count(quarter()));
    }
}

#[test]
fn procedural_and_rendered_images_get_identical_verdicts() {
    let e = DyadicEps::from_inverse(16).unwrap();
    for family in ProceduralFamily::ALL {
        let p: Procedural = family.instance(513, 4);
        let img = p.render();
        for variant in [Variant::Nonadaptive, Variant::Adaptive] {
            let cfg = TesterConfig::new(e, variant, 12);
            assert_eq!(run_tester(&p, &cfg).unwrap(), run_tester(&img, &cfg).unwrap(), "{family} {variant:?}");
        }
    }
}

#[test]
fn padding_keeps_connected_images_connected() {
    // side 300 pads to 513 and eps shrinks to match; white padding must not
    // create a rejection
    let img = gen_connected(300, ConnectedFamily::Serpentine, 8);
    let e = DyadicEps::from_inverse(4).unwrap();
    for seed in 0..20 {
        let v = run_tester(&img, &TesterConfig::new(e, Variant::Adaptive, seed)).unwrap();
        assert_eq!(v.side, 513);
        assert!(!v.rejected());
    }
}

#[test]
fn generated_images_survive_pbm_round_trips() {
    for family in ConnectedFamily::ALL {
        let img = gen_connected(37, family, 2);
        for format in [PbmFormat::Plain, PbmFormat::Raw] {
            let back = pbm::decode(&pbm::encode(&img, format)).unwrap();
            assert_eq!(back, img);
            assert_eq!(connected_components(&back).component_count(), 1);
        }
    }
}
