use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use npcluster::agreement::adjusted_rand_labels;
use npcluster::cluster::{pdf_cluster_locations, AllocationPolicy, ClusterOptions};

/// Isotropic Gaussian blobs spaced ten standard deviations apart.
fn blobs(seed: u64, k: usize, n: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|i| {
            let c = (i % k) as f64 * 10.0;
            [c + noise.sample(&mut rng), noise.sample(&mut rng)]
        })
        .collect()
}

fn policy() -> impl Strategy<Value = AllocationPolicy> {
    prop_oneof![
        Just(AllocationPolicy::Static),
        Just(AllocationPolicy::Sequential),
        Just(AllocationPolicy::Batch),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn increments_of_the_mode_function_count_the_leaves(seed in any::<u64>(), k in 1usize..4, n in 30usize..150) {
        let r = pdf_cluster_locations(&blobs(seed, k, n), &ClusterOptions::default()).unwrap();
        prop_assert_eq!(r.mode_function.mode_count(), r.tree.leaf_count());
        let p: Vec<f64> = r.mode_function.points.iter().map(|m| m.p).collect();
        prop_assert!(p.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn tree_nodes_nest_inside_their_parents(seed in any::<u64>(), k in 1usize..4, n in 30usize..150) {
        let r = pdf_cluster_locations(&blobs(seed, k, n), &ClusterOptions::default()).unwrap();
        for node in &r.tree.nodes {
            if let Some(p) = node.parent {
                let parent = &r.tree.nodes[p];
                prop_assert!(parent.alpha < node.alpha);
                prop_assert!(node.members.iter().all(|m| parent.members.binary_search(m).is_ok()));
                prop_assert!(parent.children.contains(&node.id));
            }
        }
        for node in &r.tree.nodes {
            for (i, &a) in node.children.iter().enumerate() {
                for &b in &node.children[i + 1..] {
                    let (ma, mb) = (&r.tree.nodes[a].members, &r.tree.nodes[b].members);
                    prop_assert!(ma.iter().all(|m| mb.binary_search(m).is_err()));
                }
            }
        }
    }

    #[test]
    fn cores_are_disjoint_and_keep_their_label(seed in any::<u64>(), k in 1usize..4, n in 30usize..150, policy in policy()) {
        let options = ClusterOptions { policy, ..ClusterOptions::default() };
        let r = pdf_cluster_locations(&blobs(seed, k, n), &options).unwrap();
        let mut owner = vec![None; n];
        for (j, core) in r.cores.iter().enumerate() {
            let floor = core.members.iter().map(|&i| r.densities[i]).fold(f64::INFINITY, f64::min);
            prop_assert!(floor >= core.alpha);
            for &i in &core.members {
                prop_assert!(owner[i].is_none(), "event {i} in two cores");
                owner[i] = Some(j);
                prop_assert_eq!(r.partition.labels[i], j);
                prop_assert!(r.partition.core[i]);
            }
        }
        prop_assert_eq!(r.partition.cluster_count, r.cores.len());
        prop_assert!(r.partition.labels.iter().all(|&l| l < r.cores.len()));
        prop_assert_eq!(owner.iter().filter(|o| o.is_some()).count(), r.partition.core.iter().filter(|&&c| c).count());
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>(), k in 1usize..4, n in 30usize..120, policy in policy()) {
        let points = blobs(seed, k, n);
        let options = ClusterOptions { policy, ..ClusterOptions::default() };
        let a = pdf_cluster_locations(&points, &options).unwrap();
        let b = pdf_cluster_locations(&points, &options).unwrap();
        prop_assert_eq!(&a.partition, &b.partition);
        prop_assert_eq!(&a.tree, &b.tree);
        prop_assert_eq!(&a.mode_function, &b.mode_function);
    }

    #[test]
    fn renaming_clusters_keeps_the_partition(seed in any::<u64>(), k in 2usize..4, n in 40usize..120, shift in 1usize..5) {
        let r = pdf_cluster_locations(&blobs(seed, k, n), &ClusterOptions::default()).unwrap();
        let m = r.partition.cluster_count;
        prop_assume!(m >= 2);
        let renamed: Vec<usize> = r.partition.labels.iter().map(|&l| (l + shift) % m).collect();
        let ari = adjusted_rand_labels(&r.partition.labels, &renamed).unwrap();
        prop_assert!((ari - 1.0).abs() < 1e-12);
    }

    #[test]
    fn input_order_does_not_change_the_partition(seed in any::<u64>(), k in 1usize..4, n in 30usize..120, rotate in 1usize..29) {
        let points = blobs(seed, k, n);
        let mut moved = points.clone();
        moved.rotate_left(rotate);
        let a = pdf_cluster_locations(&points, &ClusterOptions::default()).unwrap();
        let b = pdf_cluster_locations(&moved, &ClusterOptions::default()).unwrap();
        let mut back = b.partition.labels.clone();
        back.rotate_right(rotate);
        prop_assert_eq!(a.partition.cluster_count, b.partition.cluster_count);
        if a.partition.cluster_count > 1 {
            prop_assert!((adjusted_rand_labels(&a.partition.labels, &back).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
