mod support;

use rand::Rng;
use support::{brute_force_combmnz, random_judgments, random_lists, recount_contributors, rng};
use vircis_core::cis::{
    merge_results, split_results, Judgments, MergedEntry, MergedResult, RelevanceFilterConfig, Session,
};
use vircis_core::ir::{index_documents, Document, RankedList, ScoredDoc, StopWords};
use vircis_core::script::{parse_script, replay};

#[test]
fn combmnz_matches_brute_force() {
    let mut r = rng(41);
    for case in 0..100 {
        let lists = random_lists(&mut r, 4, 8);
        let judgments = random_judgments(&mut r, &lists);
        let filter = RelevanceFilterConfig {
            threshold: if r.random_bool(0.5) {
                0.0
            } else {
                r.random_range(0.0..0.8)
            },
            boost: 2.0,
        };
        let got = merge_results(&lists, &judgments, &filter).unwrap();
        let want = brute_force_combmnz(&lists, &judgments, &filter);
        assert_eq!(got.entries, want, "case {case}");
    }
}

#[test]
fn contributor_counts_match_recount() {
    let mut r = rng(42);
    for _ in 0..100 {
        let lists = random_lists(&mut r, 5, 8);
        let merged = merge_results(&lists, &Judgments::new(), &RelevanceFilterConfig::default()).unwrap();
        let counts = recount_contributors(&lists);
        assert_eq!(merged.entries.len(), counts.len());
        for e in &merged.entries {
            assert_eq!(e.contributors, counts[&e.doc_id]);
            assert_eq!(merged.provenance[&e.doc_id].len(), e.contributors);
            assert!(e.score <= (e.contributors * e.contributors) as f64 + 1e-12);
        }
    }
}

#[test]
fn single_list_keeps_its_order() {
    let mut r = rng(43);
    for _ in 0..50 {
        let lists = random_lists(&mut r, 1, 10);
        let merged = merge_results(&lists, &Judgments::new(), &RelevanceFilterConfig::default()).unwrap();
        let ids: Vec<&str> = merged.doc_ids().collect();
        let mut expect: Vec<&ScoredDoc> = lists[0].1.entries.iter().collect();
        // equal normalized scores fall back to doc id
        expect.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.doc_id.cmp(&b.doc_id)));
        let want: Vec<&str> = expect.iter().map(|e| e.doc_id.as_str()).collect();
        assert_eq!(ids, want);
    }
}

fn merged_of(n: usize) -> MergedResult {
    MergedResult {
        entries: (0..n)
            .map(|i| MergedEntry {
                doc_id: format!("d{i:02}"),
                score: (n - i) as f64,
                contributors: 1,
            })
            .collect(),
        provenance: Default::default(),
    }
}

#[test]
fn split_grid() {
    for c in 1..=7 {
        let collabs: Vec<String> = (0..c).rev().map(|i| format!("u{i}")).collect();
        for n in 0..=25 {
            let merged = merged_of(n);
            let split = split_results(&merged, &collabs).unwrap();
            assert_eq!(split.assignment.len(), c);
            let sizes: Vec<usize> = split.assignment.values().map(Vec::len).collect();
            assert_eq!(sizes.iter().sum::<usize>(), n);
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut all: Vec<&String> = split.assignment.values().flatten().collect();
            all.sort();
            all.dedup();
            assert_eq!(all.len(), n);
            // rank r goes to the (r mod c)-th collaborator in id order
            for (k, (_, docs)) in split.assignment.iter().enumerate() {
                for (j, d) in docs.iter().enumerate() {
                    assert_eq!(*d, merged.entries[j * c + k].doc_id);
                }
            }
        }
    }
    assert!(split_results(&merged_of(3), &[]).is_err());
}

fn corpus() -> Vec<Document> {
    vec![
        Document::new("d1", "", "speech recognition with hidden markov models"),
        Document::new("d2", "", "speech search over spoken archives"),
        Document::new("d3", "", "collaborative search sessions"),
        Document::new("d4", "", "markov chains"),
    ]
}

#[test]
fn scripted_replay_is_deterministic() {
    let index = index_documents(&corpus(), &StopWords::new()).unwrap();
    let script = parse_script(
        "JOIN alice\nJOIN bob\nQUERY alice speech markov\nQUERY bob search\nJUDGE bob d3 irrel\nEXPECT_TOP d2\n",
    )
    .unwrap();
    let run = || {
        let mut s = Session::new("s1").unwrap();
        replay(&script, &mut s, &index, None, std::path::Path::new(".")).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.merged, b.merged);
    assert!(a.passed(), "{:?}", a.failures);
    assert_eq!(a.expectations_checked, 1);
}

#[test]
fn session_merge_agrees_with_direct_fusion() {
    let index = index_documents(&corpus(), &StopWords::new()).unwrap();
    let mut s = Session::new("s").unwrap();
    s.join("a").unwrap();
    s.join("b").unwrap();
    let la = s.submit_query("a", "speech", &index).unwrap();
    let lb = s.submit_query("b", "markov search", &index).unwrap();
    let lists: Vec<(String, RankedList)> = vec![("a".into(), la), ("b".into(), lb)];
    let direct = merge_results(&lists, &Judgments::new(), &RelevanceFilterConfig::default()).unwrap();
    assert_eq!(s.merged().entries, direct.entries);
    assert_eq!(s.suggest_queries("a").unwrap(), vec!["markov search".to_string()]);
    assert!(s.judge("a", "nope", true).is_err());
    assert!(s.submit_query("carol", "speech", &index).is_err());
}
