//! Seeded random graphs for tests, benchmarks and property sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kg::{KnowledgeGraph, Triple};

/// Uniform random graph with exactly `n_triples` distinct triples (or fewer
/// when that exceeds the number of possible triples). Every entity and
/// relation id below the given counts is registered, even if isolated.
pub fn random_graph(n_entities: u32, n_relations: u32, n_triples: usize, seed: u64) -> KnowledgeGraph {
    assert!(n_entities > 0 && n_relations > 0, "empty vocabulary");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let possible = n_entities as usize * n_entities as usize * n_relations as usize;
    let target = n_triples.min(possible);
    let mut triples = std::collections::BTreeSet::new();
    while triples.len() < target {
        triples.insert(Triple::new(
            rng.gen_range(0..n_entities),
            rng.gen_range(0..n_relations),
            rng.gen_range(0..n_entities),
        ));
    }
    let entities = (0..n_entities).map(|e| (e, format!("ent_{e}"))).collect();
    let relations = (0..n_relations).map(|r| (r, format!("rel_{r}"))).collect();
    KnowledgeGraph::with_dictionaries(entities, relations, triples)
        .expect("ids are within the dictionaries")
}

/// Splits a random graph into nested train ⊂ train+valid ⊂ full parts by
/// holding out a fraction of triples for each of valid and test.
pub fn random_splits(
    n_entities: u32,
    n_relations: u32,
    n_triples: usize,
    held_out: f64,
    seed: u64,
) -> crate::kg::SplitGraphs {
    use rand::seq::SliceRandom;
    let full = random_graph(n_entities, n_relations, n_triples, seed);
    let mut all: Vec<Triple> = full.triples().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    all.shuffle(&mut rng);
    let k = ((all.len() as f64) * held_out).round() as usize;
    let test = all.split_off(all.len() - k);
    let valid = all.split_off(all.len() - k);
    let train = KnowledgeGraph::with_dictionaries(full.entities().clone(), full.relations().clone(), all)
        .expect("ids are within the dictionaries");
    crate::kg::SplitGraphs::from_parts(train, &valid, &test)
}
