use gcx_core::concepts::{discover_concepts, DiscoveryConfig};
use gcx_core::gnn::{ActivationTrace, TraceUnit};
use gcx_core::graph::Graph;
use gcx_core::metrics::{
    concept_completeness, concept_purity, heuristic_recovery_count, majority_vote_completeness, ConceptPurity,
    PurityOptions,
};
use gcx_core::synth::{attach_motifs, generate_ba, MotifKind};
use gcx_core::{Dataset, Error, Task};
use ndarray::Array2;
use proptest::prelude::*;

fn node_trace(rows: Array2<f64>) -> ActivationTrace {
    ActivationTrace { layers: vec![rows], units: vec![TraceUnit::Node], is_conv: vec![true], last_conv: 0 }
}

fn one_hot(ids: &[usize], width: usize) -> Array2<f64> {
    Array2::from_shape_fn((ids.len(), width), |(i, j)| if ids[i] == j { 1.0 } else { 0.0 })
}

fn labeled_path(labels: Vec<usize>, classes: usize) -> Dataset {
    let n = labels.len();
    let g = Graph::new(n, (1..n).map(|v| (v - 1, v)))
        .unwrap()
        .with_node_labels(labels)
        .unwrap()
        .with_features(Array2::ones((n, 1)))
        .unwrap();
    let names = (0..classes).map(|c| format!("c{c}")).collect();
    Dataset::new("path", vec![g], Task::NodeClassification, classes, names, 7).unwrap()
}

fn seen_in_training(ds: &Dataset, ids: &[usize]) -> bool {
    let mut seen = vec![false; ids.iter().max().map_or(0, |m| m + 1)];
    for (i, &c) in ids.iter().enumerate() {
        if ds.train_mask()[i] {
            seen[c] = true;
        }
    }
    ids.iter().all(|&c| seen[c])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tree_matches_majority_vote_on_one_hot_concepts(
        pairs in prop::collection::vec((0usize..4, 0usize..3), 20..60),
        seed in 0u64..50,
    ) {
        let ids: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let labels: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let ds = labeled_path(labels, 3);
        prop_assume!(seen_in_training(&ds, &ids));
        let distinct = { let mut d = ids.clone(); d.sort(); d.dedup(); d.len() };
        let model = discover_concepts(&node_trace(one_hot(&ids, 4)), 0, &DiscoveryConfig::kmeans(distinct, seed)).unwrap();
        let tree = concept_completeness(&model, &ds).unwrap().score;
        let vote = majority_vote_completeness(&model, &ds).unwrap();
        prop_assert!((tree - vote).abs() < 1e-12, "tree {tree} vote {vote}");
    }

    #[test]
    fn completeness_ignores_concept_numbering(
        pairs in prop::collection::vec((0usize..5, 0usize..2), 20..60),
        a in 0u64..100,
        b in 0u64..100,
    ) {
        let ids: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let ds = labeled_path(pairs.iter().map(|p| p.1).collect(), 2);
        prop_assume!(seen_in_training(&ds, &ids));
        let distinct = { let mut d = ids.clone(); d.sort(); d.dedup(); d.len() };
        let t = node_trace(one_hot(&ids, 5));
        let s1 = concept_completeness(&discover_concepts(&t, 0, &DiscoveryConfig::kmeans(distinct, a)).unwrap(), &ds).unwrap();
        let s2 = concept_completeness(&discover_concepts(&t, 0, &DiscoveryConfig::kmeans(distinct, b)).unwrap(), &ds).unwrap();
        prop_assert!((s1.score - s2.score).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&s1.score));
    }
}

/// Three single-graph units: two 3-paths and a triangle, centre nodes clustered together.
fn path_path_triangle() -> (Dataset, ActivationTrace) {
    let path = || Graph::new(3, [(0, 1), (1, 2)]).unwrap().with_features(Array2::ones((3, 1))).unwrap();
    let graphs = vec![
        path().with_graph_label(Some(0)),
        path().with_graph_label(Some(0)),
        Graph::new(3, [(0, 1), (1, 2), (0, 2)])
            .unwrap()
            .with_features(Array2::ones((3, 1)))
            .unwrap()
            .with_graph_label(Some(1)),
    ];
    let ds = Dataset::new("ppt", graphs, Task::GraphClassification, 2, vec!["p".into(), "t".into()], 0).unwrap();
    let centre = [false, true, false, false, true, false, true, false, false];
    let rows = Array2::from_shape_fn((9, 2), |(i, _)| if centre[i] { 0.0 } else { 10.0 });
    (ds, node_trace(rows))
}

#[test]
fn purity_of_one_edge_difference_is_two_thirds() {
    let (ds, trace) = path_path_triangle();
    let model = discover_concepts(&trace, 0, &DiscoveryConfig::kmeans(2, 0)).unwrap();
    let centre_concept = model.assignments()[1];
    let report = concept_purity(&model, &ds, &PurityOptions::new(1)).unwrap();
    match report.concepts[centre_concept] {
        ConceptPurity::Scored { score } => assert!((score - 2.0 / 3.0).abs() < 1e-12, "{score}"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(report.min <= report.avg && report.avg <= report.max);
}

#[test]
fn purity_needs_two_representations() {
    let (ds, trace) = path_path_triangle();
    let model = discover_concepts(&trace, 0, &DiscoveryConfig::kmeans(2, 0)).unwrap();
    let options = PurityOptions { top_m: 1, ..PurityOptions::new(1) };
    assert!(matches!(concept_purity(&model, &ds, &options), Err(Error::Input(_))));
}

#[test]
fn purity_reports_empty_when_every_concept_is_skipped() {
    let (ds, trace) = path_path_triangle();
    let model = discover_concepts(&trace, 0, &DiscoveryConfig::kmeans(2, 0)).unwrap();
    let options = PurityOptions { node_limit: 1, ..PurityOptions::new(1) };
    assert!(matches!(concept_purity(&model, &ds, &options), Err(Error::EmptyReport)));
}

/// BA base with houses and no random edges; activations are the one-hot role.
fn clean_houses(name: &str) -> (Dataset, ActivationTrace) {
    let base = generate_ba(30, 2, 4).unwrap();
    let planted = attach_motifs(&base, MotifKind::House, 12, 4).unwrap();
    let n = planted.graph.num_nodes();
    let g = planted
        .graph
        .clone()
        .with_node_labels(planted.roles.clone())
        .unwrap()
        .with_features(Array2::ones((n, 1)))
        .unwrap();
    let names = ["base", "top", "middle", "bottom"].map(String::from).to_vec();
    let ds = Dataset::new(name, vec![g], Task::NodeClassification, 4, names, 0).unwrap();
    (ds, node_trace(one_hot(&planted.roles, 4)))
}

#[test]
fn top_node_cluster_recovers_only_the_armed_top_house() {
    let (ds, trace) = clean_houses("ba_shapes");
    let model = discover_concepts(&trace, 0, &DiscoveryConfig::kmeans(4, 0)).unwrap();
    let report = heuristic_recovery_count(&model, &ds, 2).unwrap();
    assert_eq!(report.recovered, 1);
    assert_eq!(report.heuristics[3].matched_concepts.len(), 1);
    for (i, h) in report.heuristics.iter().enumerate() {
        assert_eq!(h.matched_concepts.is_empty(), i != 3, "{}", h.name);
    }
}

#[test]
fn heuristics_refuse_other_datasets() {
    let (ds, trace) = clean_houses("tree_grid");
    let model = discover_concepts(&trace, 0, &DiscoveryConfig::kmeans(4, 0)).unwrap();
    assert!(matches!(heuristic_recovery_count(&model, &ds, 2), Err(Error::Input(_))));
}
