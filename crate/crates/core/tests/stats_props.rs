use proptest::prelude::*;

use npcluster::stats::{kruskal_wallis, wilcoxon_rank_sum, GroupedSamples, WilcoxonMethod};

/// Values on a coarse grid so ties occur regularly.
fn values(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0i32..30).prop_map(|v| f64::from(v) * 0.5), min..max)
}

fn groups() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(values(1, 15), 2..6)
}

proptest! {
    #[test]
    fn kruskal_wallis_depends_only_on_ranks(g in groups(), a in 0.1..10.0f64, b in -5.0..5.0f64) {
        prop_assume!(g.iter().map(Vec::len).sum::<usize>() >= 3);
        prop_assume!(g.iter().flatten().any(|&v| v != g[0][0]));
        let transformed: Vec<Vec<f64>> = g.iter().map(|s| s.iter().map(|&v| (a * v + b).exp()).collect()).collect();
        let x = kruskal_wallis(&GroupedSamples::new(g).unwrap()).unwrap();
        let y = kruskal_wallis(&GroupedSamples::new(transformed).unwrap()).unwrap();
        prop_assert!((x.statistic - y.statistic).abs() <= 1e-9 * x.statistic.abs().max(1.0));
        prop_assert!((x.p_value - y.p_value).abs() <= 1e-9);
    }

    #[test]
    fn wilcoxon_is_symmetric(a in values(1, 25), b in values(1, 25)) {
        prop_assume!(a.iter().chain(&b).any(|&v| v != a[0]));
        for method in [WilcoxonMethod::Auto, WilcoxonMethod::Exact, WilcoxonMethod::Normal] {
            let ab = wilcoxon_rank_sum(&a, &b, method).unwrap();
            let ba = wilcoxon_rank_sum(&b, &a, method).unwrap();
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12, "{method:?}: {} vs {}", ab.p_value, ba.p_value);
            prop_assert!((ab.statistic + ba.statistic - (a.len() * b.len()) as f64).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }
    }

    #[test]
    fn exact_and_normal_agree_at_eight_per_group(mut pool in prop::collection::hash_set(0u32..1000, 16)) {
        let all: Vec<f64> = pool.drain().map(f64::from).collect();
        let (a, b) = all.split_at(8);
        let exact = wilcoxon_rank_sum(a, b, WilcoxonMethod::Exact).unwrap().p_value;
        let normal = wilcoxon_rank_sum(a, b, WilcoxonMethod::Normal).unwrap().p_value;
        // The continuity-corrected approximation drifts up to 0.0109 from the
        // exact tail in the flat middle of the distribution (W near 24).
        prop_assert!((exact - normal).abs() < 0.011, "exact {exact} normal {normal}");
        if exact < 0.3 {
            prop_assert!((exact - normal).abs() < 0.01, "exact {exact} normal {normal}");
        }
    }
}
