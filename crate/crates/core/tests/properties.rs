mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use schedrag::alignment::loss_pa;
use schedrag::eval::{make_mask_tasks, RELATIONAL_COLUMNS};
use schedrag::graph::{build_graph, degree_distribution};
use schedrag::knowledge::{cosine_similarity, ChunkStore, DocumentChunk, Embedder, HashedNgramEmbedder};
use schedrag::prompts::{extract_sections, parse_row, render_row, PromptRegistry, PromptSections, TaskKind};
use schedrag::sampler::{first_order, sample_hierarchical, sample_sequential, Direction, SamplerConfig};
use schedrag::schedule::{parse_schedule, FormatSpec};
use schedrag::synth::{generate_schedule, GeneratorParams};
use schedrag::rng::stream;

fn synthetic(n: usize, seed: u64) -> schedrag::schedule::Schedule {
    generate_schedule(&GeneratorParams {
        n_activities: n,
        target_mean_degree: (n as f64 - 1.0).min(3.86),
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn to_tsv(csv_text: &str) -> String {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(csv_text.as_bytes());
    let mut writer = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    for record in reader.records() {
        writer.write_record(&record.unwrap()).unwrap();
    }
    String::from_utf8(writer.into_inner().unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn serialization_is_a_fixed_point(
        n in 1usize..25,
        seed in any::<u64>(),
        names in proptest::collection::vec("[A-Za-z][A-Za-z0-9 ,\"'é;|]{0,16}", 25),
    ) {
        let mut s = synthetic(n, seed);
        for (a, name) in s.activities.iter_mut().zip(&names) {
            a.name = name.clone();
        }
        let raw = s.to_csv().unwrap();
        let first = parse_schedule(&raw, &FormatSpec::default(), "p").unwrap().to_csv().unwrap();
        let parsed = parse_schedule(&first, &FormatSpec::default(), "p").unwrap();
        let second = parsed.to_csv().unwrap();
        prop_assert_eq!(&first, &second);
        let from_tsv = parse_schedule(&to_tsv(&first), &FormatSpec::default(), "p").unwrap();
        prop_assert_eq!(from_tsv.to_csv().unwrap(), second);
    }

    #[test]
    fn sequential_paths_stay_within_hops(seed in 0u64..10_000, hops in 1usize..5) {
        let s = common::random_dag(seed, 30);
        let g = build_graph(&s).unwrap();
        let cfg = SamplerConfig { max_sequential_hops: hops, ..Default::default() };
        for a in &s.activities {
            let target = &a.activity_id;
            let forward = common::bfs_within(&g, target, hops, true);
            let backward = common::bfs_within(&g, target, hops, false);
            let mut rng = stream(seed, target);
            for p in sample_sequential(&g, target, &cfg, &mut rng).unwrap() {
                prop_assert!(p.hops() <= hops);
                prop_assert_eq!(&p.nodes[0], target);
                let reach = if p.direction == Direction::Forward { &forward } else { &backward };
                for v in &p.nodes {
                    prop_assert!(reach.contains(v), "{} not within {} hops of {}", v, hops, target);
                }
                let distinct: BTreeSet<_> = p.nodes.iter().collect();
                prop_assert_eq!(distinct.len(), p.nodes.len());
            }
        }
    }

    #[test]
    fn hierarchical_and_first_order_match_filters(seed in 0u64..10_000, levels in 0usize..4) {
        let s = common::random_dag(seed, 30);
        let g = build_graph(&s).unwrap();
        let cfg = SamplerConfig { max_wbs_levels: levels, ..Default::default() };
        for a in &s.activities {
            let need = a.wbs.depth().saturating_sub(levels).max(1);
            let expected: BTreeSet<String> = s.activities.iter()
                .filter(|b| b.activity_id != a.activity_id)
                .filter(|b| b.wbs.0.iter().zip(&a.wbs.0).take_while(|(x, y)| x == y).count() >= need)
                .map(|b| b.activity_id.clone())
                .collect();
            prop_assert_eq!(sample_hierarchical(&s, &a.activity_id, &cfg).unwrap(), expected);
            let raw: BTreeSet<String> = s.links.iter()
                .filter_map(|l| {
                    if l.predecessor_id == a.activity_id { Some(l.successor_id.clone()) }
                    else if l.successor_id == a.activity_id { Some(l.predecessor_id.clone()) }
                    else { None }
                })
                .collect();
            prop_assert_eq!(first_order(&g, &a.activity_id).unwrap(), raw);
        }
    }

    #[test]
    fn retrieval_matches_exhaustive_scan(
        docs in proptest::collection::vec(proptest::collection::vec(0usize..12, 1..6), 1..40),
        query in proptest::collection::vec(0usize..12, 1..5),
        k in 1usize..6,
    ) {
        const VOCAB: [&str; 12] = ["slab", "pour", "steel", "erect", "pipe", "weld", "roof", "deck",
                                  "duct", "test", "pier", "cure"];
        let text = |ws: &[usize]| ws.iter().map(|&w| VOCAB[w]).collect::<Vec<_>>().join(" ");
        let pieces: Vec<DocumentChunk> = docs.iter().enumerate().map(|(i, ws)| DocumentChunk {
            doc_id: format!("d{}", i % 7),
            chunk_index: i,
            text: text(ws),
            token_count: ws.len(),
        }).collect();
        let e = HashedNgramEmbedder::default();
        let store = ChunkStore::from_chunks(&e, pieces).unwrap();
        let q = e.embed(&text(&query)).unwrap();
        let got: Vec<(String, usize)> = store.retrieve_by_embedding(&q, k).unwrap().iter()
            .map(|h| (h.chunk.doc_id().to_owned(), h.chunk.chunk_index())).collect();

        let mut all: Vec<(f64, String, usize)> = store.chunks().iter().map(|c| {
            let v = e.embed(c.text()).unwrap();
            (cosine_similarity(&q, &v).unwrap(), c.doc_id().to_owned(), c.chunk_index())
        }).collect();
        all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let expected: Vec<(String, usize)> = all.into_iter().take(k).map(|(_, d, i)| (d, i)).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn row_rendering_is_injective(
        values in proptest::collection::vec("[A-Za-z0-9.;|+-]{0,10}( [A-Za-z0-9]{1,5})?", 4),
        mask in proptest::collection::vec(any::<bool>(), 4),
    ) {
        let columns = ["Activity ID", "Level", "Area", "Predecessor Details"];
        let cells: Vec<(String, String)> = columns.iter().zip(&values)
            .map(|(c, v)| (c.to_string(), v.clone())).collect();
        let masked: Vec<String> = columns.iter().zip(&mask).filter(|(_, m)| **m).map(|(c, _)| c.to_string()).collect();
        let q = parse_row(&render_row(&cells, &masked));
        prop_assert_eq!(&q.masked, &masked);
        for ((c, v), (qc, qv)) in cells.iter().zip(&q.cells) {
            prop_assert_eq!(c, qc);
            if masked.contains(c) {
                prop_assert_eq!(qv, "[MASKED]");
            } else {
                prop_assert_eq!(qv, v);
            }
        }
    }

    #[test]
    fn prompt_sections_round_trip(
        row in "[a-z]{1,8}( [a-z]{1,8}){0,3}",
        knowledge in "([a-z]{1,8}\n?){0,4}",
        context in "([a-z|]{1,8}\n?){0,4}",
        rules in "(- [a-z]{1,8}\n?){0,3}",
    ) {
        let sections = PromptSections { row, static_knowledge: knowledge, context, rules };
        let p = PromptRegistry::builtin().build_task_prompt(TaskKind::DA, &sections, &RELATIONAL_COLUMNS.map(String::from), 2).unwrap();
        let back = extract_sections(&p.user_text).unwrap();
        let trim = |s: &str| s.trim_end().to_owned();
        prop_assert_eq!(back.row, trim(&sections.row));
        prop_assert_eq!(back.static_knowledge, trim(&sections.static_knowledge));
        prop_assert_eq!(back.context, trim(&sections.context));
        prop_assert_eq!(back.rules, trim(&sections.rules));
    }

    #[test]
    fn mask_arity_invariants(n in 1usize..40, seed in any::<u64>()) {
        let s = synthetic(n, seed);
        for m in make_mask_tasks(&s, TaskKind::MVP, seed).unwrap() {
            prop_assert_eq!(m.masked_columns.len(), 3);
            let distinct: BTreeSet<_> = m.masked_columns.iter().collect();
            prop_assert_eq!(distinct.len(), 3);
            prop_assert!(!m.masked_columns.iter().any(|c| c == "Activity ID" || c == "Activity Name"));
        }
        for m in make_mask_tasks(&s, TaskKind::DA, seed).unwrap() {
            prop_assert!(m.masked_columns.iter().all(|c| RELATIONAL_COLUMNS.contains(&c.as_str())));
        }
        for m in make_mask_tasks(&s, TaskKind::AP, seed).unwrap() {
            prop_assert_eq!(m.masked_columns, vec!["Current Start".to_owned(), "Current Finish".to_owned()]);
        }
    }

    #[test]
    fn preference_loss_symmetry(p in 0.0f64..=1.0, y in 0u8..=1) {
        let y = f64::from(y);
        let a = loss_pa(&[p], &[y]).unwrap();
        let b = loss_pa(&[1.0 - p], &[1.0 - y]).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn degree_sum_is_twice_edges(seed in 0u64..10_000) {
        let s = common::random_dag(seed, 40);
        let g = build_graph(&s).unwrap();
        let stats = degree_distribution(&g);
        let d = stats.degree.unwrap();
        let sum: usize = d.per_node.values().sum();
        prop_assert_eq!(sum, 2 * g.edge_count());
    }
}
