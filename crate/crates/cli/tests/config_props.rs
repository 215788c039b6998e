use isinglab::config::parse_config;
use proptest::prelude::*;

fn list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

proptest! {
    #[test]
    fn grid_is_the_product_of_axes_and_seeds(
        ls in prop::collection::btree_set(2u32..5, 1..3),
        alphas in prop::collection::vec(0.1f64..3.0, 1..3),
        betas in prop::collection::vec(0.1f64..2.0, 1..3),
        seeds in prop::collection::vec(any::<u64>(), 1..3),
        both in any::<bool>(),
    ) {
        let ls: Vec<u32> = ls.into_iter().collect();
        let boundary = if both { "plus, minus" } else { "minus" };
        let text = format!(
            "[experiment]\nkind = mc-gap\nseeds = {}\n[grid]\nL = {}\nalpha = {}\nbeta = {}\nh_star = 1\nboundary = {boundary}\n",
            list(&seeds), list(&ls), list(&alphas), list(&betas),
        );
        let cfg = parse_config(&text).unwrap();
        let points = cfg.points();
        let n = ls.len() * alphas.len() * betas.len() * seeds.len() * if both { 2 } else { 1 };
        prop_assert_eq!(points.len(), n);
        for (i, p) in points.iter().enumerate() {
            prop_assert_eq!(p.index, i);
            prop_assert!(ls.contains(&p.l.unwrap()));
            prop_assert!(alphas.contains(&p.alpha.unwrap()));
            prop_assert!(seeds.contains(&p.seed.unwrap()));
        }
    }

    #[test]
    fn nonpositive_alpha_is_rejected(alpha in -5.0f64..=0.0) {
        let text = format!("[experiment]\nkind = field-scan\n[grid]\nalpha = {alpha}\nh_star = 1\n");
        prop_assert!(parse_config(&text).is_err());
    }
}
