mod common;

use cfrule::cf::{find_counterfactuals, CfQuery};
use cfrule::classifier::is_good;
use cfrule::harness::uniform_dataset;
use cfrule::schema::PlafConstraint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counterfactuals_honour_the_contract(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let schema = common::small_schema(&mut rng);
        let model = common::random_model(&schema, &mut rng);
        let Some(x) = common::random_bad(&schema, &model, &mut rng) else { return Ok(()) };
        let rule = common::random_relevant_rule(&x, &mut rng);
        let data = uniform_dataset(&schema, 50, rng.gen());
        let query = CfQuery::new(x.clone(), rule.to_plaf(), rng.gen());
        let res = find_counterfactuals(&model, &data, &query).unwrap();
        prop_assert!(res.counterfactuals().len() <= query.settings.k);
        let mut last = 0.0;
        for cf in res.counterfactuals() {
            prop_assert!(rule.to_plaf().allows(cf.instance.values()));
            prop_assert!(is_good(model.score(cf.instance.values())));
            prop_assert_eq!(&cf.changed, &x.diff(&cf.instance));
            prop_assert!(!cf.changed.is_empty());
            prop_assert!(cf.distance >= last);
            last = cf.distance;
        }
    }

    #[test]
    fn same_seed_same_answer(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let schema = common::small_schema(&mut rng);
        let model = common::random_model(&schema, &mut rng);
        let Some(x) = common::random_bad(&schema, &model, &mut rng) else { return Ok(()) };
        let data = uniform_dataset(&schema, 50, rng.gen());
        let query = CfQuery::new(x, PlafConstraint::unconstrained(), rng.gen());
        let a = find_counterfactuals(&model, &data, &query).unwrap();
        let b = find_counterfactuals(&model, &data, &query).unwrap();
        prop_assert_eq!(a, b);
    }
}
