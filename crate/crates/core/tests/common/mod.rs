#![allow(dead_code)]

use graphnls::metric_graph::MetricGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Connected multigraph with at most `max_edges` edges, self-loops and
/// parallel edges allowed. Lengths are drawn from `[0.5, 2]`.
pub fn random_multigraph(seed: u64, max_edges: usize) -> MetricGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_multigraph_with(&mut rng, max_edges)
}

pub fn random_multigraph_with(rng: &mut ChaCha8Rng, max_edges: usize) -> MetricGraph {
    let nv = rng.random_range(1..=max_edges.min(5));
    let tree = nv.saturating_sub(1);
    let ne = rng.random_range(tree.max(1)..=max_edges);
    let mut b = MetricGraph::builder(format!("random{nv}v{ne}e"));
    let mut edges = Vec::with_capacity(ne);
    // spanning tree first so the graph is connected
    for i in 1..nv {
        edges.push((i, rng.random_range(0..i)));
    }
    while edges.len() < ne {
        edges.push((rng.random_range(0..nv), rng.random_range(0..nv)));
    }
    for (k, (i, j)) in edges.into_iter().enumerate() {
        b = b.edge(&format!("e{k}"), &format!("v{i}"), &format!("v{j}"), rng.random_range(0.5..2.0));
    }
    b.build().expect("random multigraph is valid")
}

/// Standard families plus ten seeded random multigraphs with at most 8 edges.
pub fn corpus() -> Vec<MetricGraph> {
    let mut out = vec![
        MetricGraph::interval(1.0).unwrap(),
        MetricGraph::circle(1.0).unwrap(),
        MetricGraph::star(&[1.0, 1.0, 1.0]).unwrap(),
        MetricGraph::star(&[0.5, 1.0, 1.5, 2.0]).unwrap(),
        MetricGraph::star(&[0.3, 0.3, 0.3, 0.3, 2.0]).unwrap(),
        MetricGraph::dumbbell(1.0, 1.0, 1.0).unwrap(),
        MetricGraph::dumbbell(1.0, 0.1, 2.0).unwrap(),
        MetricGraph::dumbbell(0.5, 3.0, 0.5).unwrap(),
        MetricGraph::figure_eight(1.0, 1.0).unwrap(),
        MetricGraph::figure_eight(0.4, 2.0).unwrap(),
        MetricGraph::tadpole(1.0, 0.7).unwrap(),
        MetricGraph::theta(&[1.0, 1.3, 0.6]).unwrap(),
    ];
    out.extend((0..10).map(|s| random_multigraph(1000 + s, 8)));
    out
}
