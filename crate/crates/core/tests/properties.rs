use std::sync::OnceLock;

use approx::assert_relative_eq;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use limit_surface::harness::angular_error;
use limit_surface::identification::{fit, FitConfig};
use limit_surface::inversion::{invert, InversionOptions};
use limit_surface::poly_model::{ModelKind, PolyModel};
use limit_surface::support_oracle::{
    gen_dataset, gen_legged_support, load_for_twist, DataPair, Dataset, Protocol,
};
use limit_surface::wrench_space::{power, GeneralizedLoad, GeneralizedVelocity};

fn certified_models() -> &'static [PolyModel] {
    static MODELS: OnceLock<Vec<PolyModel>> = OnceLock::new();
    MODELS.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut out = Vec::new();
        for _ in 0..2 {
            let cfg = gen_legged_support(&mut rng);
            let train = gen_dataset(&cfg, Protocol::Legged, 22, &mut rng).unwrap();
            let val = gen_dataset(&cfg, Protocol::Legged, 20, &mut rng).unwrap();
            for kind in [ModelKind::Poly4Cvx, ModelKind::Quad] {
                out.push(fit(&train, &val, &FitConfig::new(kind)).unwrap().model);
            }
        }
        out
    })
}

fn direction() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("away from zero", |(x, y, z)| x * x + y * y + z * z > 1e-4)
        .prop_map(|(x, y, z)| Vector3::new(x, y, z).normalize())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn inversion_round_trip(v in direction(), which in 0usize..4) {
        let model = &certified_models()[which];
        let opts = InversionOptions::default();
        let f = invert(model, &v, &opts).unwrap();
        prop_assert!((model.evaluate(&f) - 1.0).abs() <= 1e-9);
        let g = model.gradient(&f);
        prop_assert!(g.cross(&v).norm().atan2(g.dot(&v)) <= 1e-6);
        let back = invert(model, &(-v), &opts).unwrap();
        prop_assert!((back + f).amax() <= 1e-9);
    }

    #[test]
    fn prediction_ignores_load_magnitude(f in direction(), c in 1e-3..1e3f64, which in 0usize..4) {
        let model = &certified_models()[which];
        let a = model.predict_velocity_direction(&f).unwrap();
        let b = model.predict_velocity_direction(&(f * c)).unwrap();
        prop_assert!((a - b).amax() <= 1e-12);
    }

    #[test]
    fn oracle_dissipates_and_is_odd_and_scale_free(seed in any::<u64>(), v in direction(), s in 1e-3..1e3f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = gen_legged_support(&mut rng);
        let twist = GeneralizedVelocity(v);
        let Ok(f) = load_for_twist(&cfg, &twist) else { return Ok(()) };
        prop_assert!(power(&f, &twist) >= -1e-12);
        let neg = load_for_twist(&cfg, &GeneralizedVelocity(-v)).unwrap();
        prop_assert_eq!(neg.0, -f.0);
        let scaled = load_for_twist(&cfg, &GeneralizedVelocity(v * s)).unwrap();
        prop_assert!((scaled.0 - f.0).amax() <= 1e-12);
    }

    #[test]
    fn oracle_maximum_work(seed in any::<u64>(), v in direction(), w in direction()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = gen_legged_support(&mut rng);
        let (Ok(f), Ok(g)) = (load_for_twist(&cfg, &GeneralizedVelocity(v)), load_for_twist(&cfg, &GeneralizedVelocity(w)))
        else { return Ok(()) };
        prop_assert!((f.0 - g.0).dot(&v) >= -1e-9);
    }

    #[test]
    fn metric_is_bounded_and_sign_symmetric(
        pairs in prop::collection::vec((direction(), direction()), 1..20),
        which in 0usize..4,
    ) {
        let model = &certified_models()[which];
        let ds = Dataset::new(
            pairs.iter().map(|(f, v)| DataPair::new(GeneralizedLoad(*f), GeneralizedVelocity(*v))).collect(),
            limit_surface::support_oracle::DatasetMeta::sensor(1.0),
        );
        let neg = Dataset::new(
            ds.pairs.iter().map(|p| DataPair::new(GeneralizedLoad(-p.load.0), GeneralizedVelocity(-p.twist.0))).collect(),
            ds.metadata.clone(),
        );
        let a = angular_error(model, &ds).unwrap().mean_deg;
        let b = angular_error(model, &neg).unwrap().mean_deg;
        prop_assert!((0.0..=180.0).contains(&a));
        prop_assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn fitted_models_are_certified() {
    for m in certified_models() {
        let cert = m.certificate().expect("certificate attached");
        assert!(cert.gram.is_square());
        assert_relative_eq!(cert.gram.clone(), cert.gram.transpose(), epsilon = 1e-12);
        assert!(m.load_scale() > 0.0);
    }
}
