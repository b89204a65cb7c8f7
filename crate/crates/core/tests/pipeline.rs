use knnvis_core::synthetic::gaussian_mixture;
use knnvis_core::{
    brute_force_knn, build_knn_graph, knn_classify_accuracy, recall, train, weigh_graph,
    GraphConfig, LabeledSet, LayoutConfig, NeighborLists, SampleBudget, WeightedGraph,
};

#[test]
fn three_clusters_end_to_end() {
    let (data, ids) = gaussian_mixture(900, 30, 3, 1.0, 21);
    let cfg = GraphConfig {
        k: 15,
        trees: 5,
        perplexity: 5.0,
        seed: 2,
        ..GraphConfig::default()
    };
    let knn = build_knn_graph(&data, &cfg).unwrap();
    knn.validate(&data).unwrap();
    let exact = brute_force_knn(&data, 15).unwrap();
    assert!(recall(&knn, &exact).unwrap().mean > 0.9);

    let graph = weigh_graph(&knn, cfg.perplexity).unwrap();
    let total: f64 = graph.weights().iter().sum();
    assert!((total - 1.0).abs() < 1e-9);

    let layout = LayoutConfig {
        samples: SampleBudget::PerNode(5_000),
        seed: 4,
        ..LayoutConfig::default()
    };
    let e = train(&graph, &layout).unwrap();
    assert!(e.is_finite());
    let acc = knn_classify_accuracy(&e, &LabeledSet::from_ids(&ids), 5).unwrap();
    assert!(acc > 0.95, "accuracy {acc}");
}

#[test]
fn intermediate_artifacts_round_trip_through_text() {
    let (data, _) = gaussian_mixture(200, 8, 2, 1.0, 3);
    let cfg = GraphConfig {
        k: 6,
        trees: 3,
        ..GraphConfig::default()
    };
    let knn = build_knn_graph(&data, &cfg).unwrap();
    let back = NeighborLists::from_text(&knn.to_text(), 6).unwrap();
    assert_eq!(back.n_points(), knn.n_points());
    for i in 0..knn.n_points() {
        assert_eq!(back.ids(i), knn.ids(i));
    }

    let graph = weigh_graph(&knn, 3.0).unwrap();
    let reread = WeightedGraph::from_text(&graph.to_text(), 200).unwrap();
    assert_eq!(reread.n_edges(), graph.n_edges());
    for (a, b) in reread.weights().iter().zip(graph.weights()) {
        assert!((a - b).abs() <= 1e-8 * b);
    }
}
