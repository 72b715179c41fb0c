use std::sync::Arc;

use snakeopt::estimator::{hard_bounds, BoundsOptions, Estimator, MitigationFlags, WeightTable};
use snakeopt::genmodel::{generate, GenerativeSpec};
use snakeopt::snake::{
    optimize, InnerSolver, Scope, SeedStrategy, SnakeParams, TraversalHeuristic, TraversalRule,
};
use snakeopt::topology::{build_surface_code_lattice, color_cz_layers, GateVariableGraph};

fn kind_breakdown(est: &Estimator, vals: &[f64]) -> Vec<(String, f64)> {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<String, f64> = BTreeMap::new();
    let w = est.weights().values();
    for (i, c) in est.components().iter().enumerate() {
        let name = format!("{:?}", c.kind);
        let name = name.split([' ', '{']).next().unwrap().to_string();
        *acc.entry(name).or_default() += w[c.group] * est.component_value(i, vals);
    }
    acc.into_iter().collect()
}

#[test]
fn probe() {
    for seed in [101u64, 102, 103] {
        let proc = build_surface_code_lattice(4).unwrap();
        let spec = GenerativeSpec::new(proc.clone(), seed);
        let data = Arc::new(generate(&spec).unwrap());
        let graph = Arc::new(GateVariableGraph::from_processor(&proc));
        let layers = color_cz_layers(&proc).unwrap();
        let est = Estimator::build(
            graph.clone(),
            data.clone(),
            &layers,
            MitigationFlags::all(),
            WeightTable::reference(),
        )
        .unwrap();
        let bounds = hard_bounds(&data, &graph, &BoundsOptions::default()).unwrap();
        let n_pairs = graph.n_interaction() as f64;

        let mut runs: Vec<(String, Vec<f64>, f64)> = Vec::new();
        for (label, scope, rule, budget) in [
            ("s1-nnear-600", Scope::Bounded(1), TraversalRule::NextNearest, 600),
            ("s2-nnear-600", Scope::Bounded(2), TraversalRule::NextNearest, 600),
            ("s3-nnear-600", Scope::Bounded(3), TraversalRule::NextNearest, 600),
        ] {
            let params = SnakeParams {
                scope,
                rule,
                heuristic: TraversalHeuristic::Breadth,
                seeds: SeedStrategy::RandomSubset(3),
                solver: InnerSolver::Auto {
                    step: 0.002,
                    budget,
                },
                seed: 7,
            };
            let r = optimize(&est, &bounds, &params).unwrap();
            let med = est
                .predict_benchmarks(&r.values)
                .unwrap()
                .median_cycle_error();
            println!(
                "inst {seed} {label}: total {:.6e}  median {med:.5e}",
                r.total
            );
            runs.push((label.to_string(), r.values.clone(), r.total));
        }
        let _ = n_pairs;
        let _ = kind_breakdown(&est, &runs[0].1);
    }
}
