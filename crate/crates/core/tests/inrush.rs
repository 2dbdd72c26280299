//! Energization inrush through a trained pipeline, scored on cases the
//! training corpus never contained.

use std::collections::BTreeSet;

use diffprot::pipeline::{train_pipeline, TrainConfig, Verdict};
use diffprot::rng::rng_for;
use diffprot::signal::DisturbanceType;
use diffprot::waveformgen::corpus::{generate_case, select_cases};
use diffprot::waveformgen::{generate_cases, CorpusPlan};
use rand::seq::SliceRandom;

#[test]
fn unseen_magnetizing_inrush_is_restrained_and_named() {
    let train_plan = CorpusPlan { cap_per_class: Some(300), fault_cap_per_stratum: Some(10), ..CorpusPlan::default() };
    let corpus: Vec<_> = generate_cases(&train_plan, 21).unwrap().into_iter().map(|(e, w)| (e.file, w)).collect();
    let seen: BTreeSet<String> =
        corpus.iter().map(|(_, w)| w.provenance["case_id"].as_str().unwrap().to_string()).collect();
    let model = train_pipeline(&corpus, &TrainConfig::default(), 21).unwrap();

    let inrush_plan = CorpusPlan {
        units: vec![],
        fault_types: vec![],
        disturbances: vec![DisturbanceType::MagnetizingInrush],
        ..CorpusPlan::default()
    };
    let mut unseen: Vec<_> = select_cases(&inrush_plan, 0).into_iter().filter(|c| !seen.contains(&c.id)).collect();
    unseen.shuffle(&mut rng_for(22, 0));
    unseen.truncate(100);
    assert_eq!(unseen.len(), 100);

    let mut hits = 0;
    for case in &unseen {
        let w = generate_case(&inrush_plan, case, 0).unwrap();
        let d = model.decide(&w).unwrap();
        hits += usize::from(
            d.verdict == Verdict::Restrain && d.disturbance_type == Some(DisturbanceType::MagnetizingInrush),
        );
    }
    assert!(hits >= 95, "{hits}/100 restrained as magnetizing inrush");
}
