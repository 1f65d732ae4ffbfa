use std::collections::BTreeSet;

use adlforge_core::eval::{
    aggregate_judge, build_mcq, mementos_f1, prf, score_mcq, JudgeMetric, JudgeRatings, Lexicon, McqItem, McqTask,
};
use adlforge_core::model::{ActionTable, Segment, StitchedVideo};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn videos(count: usize, seed: u64) -> (Vec<StitchedVideo>, Vec<String>) {
    let table = ActionTable::ntu120();
    let ids = table.ids();
    let vocab: Vec<String> = ids.iter().map(|i| table.label(*i).unwrap().to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let videos = (0..count)
        .map(|v| {
            let n = rng.random_range(2..=6);
            let mut start = 0;
            let segments = ids
                .choose_multiple(&mut rng, n)
                .enumerate()
                .map(|(k, id)| {
                    let len = rng.random_range(5..20);
                    let s = Segment {
                        clip_id: format!("clip{v}-{k}"),
                        action_id: *id,
                        action_label: table.label(*id).unwrap().to_string(),
                        start_frame: start,
                        end_frame: start + len,
                    };
                    start += len;
                    s
                })
                .collect();
            StitchedVideo {
                video_id: format!("video_{v:05}"),
                subject_id: "P001".into(),
                camera_id: "C001".into(),
                sequence_id: None,
                segments,
                video_path: format!("videos/{v}.adlv"),
                fps: 10.0,
                crop_box: None,
            }
        })
        .collect();
    (videos, vocab)
}

fn letter(i: usize) -> String {
    ((b'A' + i as u8) as char).to_string()
}

#[test]
fn oracle_and_anti_oracle() {
    let (vs, vocab) = videos(300, 1);
    for task in [McqTask::Recognition, McqTask::Forecasting] {
        let items = build_mcq(&vs, &vocab, task, 4, 9).unwrap();
        assert_eq!(items.len(), 300);
        let oracle: Vec<String> = items.iter().map(|i| i.options[i.correct_index].clone()).collect();
        assert_eq!(score_mcq(&items, &oracle).unwrap().accuracy, 100.0);
        let by_letter: Vec<String> = items.iter().map(|i| format!("The answer is ({}).", letter(i.correct_index))).collect();
        assert_eq!(score_mcq(&items, &by_letter).unwrap().accuracy, 100.0);
        let anti: Vec<String> = items.iter().map(|i| i.options[(i.correct_index + 1) % 4].clone()).collect();
        assert_eq!(score_mcq(&items, &anti).unwrap().accuracy, 0.0);
    }
}

#[test]
fn uniform_random_answerer_is_near_chance() {
    let (vs, vocab) = videos(10_000, 2);
    let items = build_mcq(&vs, &vocab, McqTask::Recognition, 4, 11).unwrap();
    assert_eq!(items.len(), 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let replies: Vec<String> = items.iter().map(|_| letter(rng.random_range(0..4))).collect();
    let acc = score_mcq(&items, &replies).unwrap().accuracy;
    let sigma = 100.0 * (0.25f64 * 0.75 / 10_000.0).sqrt();
    assert!((acc - 25.0).abs() <= 3.0 * sigma, "accuracy {acc}, sigma {sigma}");
}

#[test]
fn correct_answer_position_is_balanced() {
    let (vs, vocab) = videos(4000, 3);
    let items = build_mcq(&vs, &vocab, McqTask::Recognition, 4, 13).unwrap();
    let mut counts = [0usize; 4];
    for i in &items {
        counts[i.correct_index] += 1;
    }
    for c in counts {
        assert!((c as f64 - 1000.0).abs() < 4.0 * (4000.0f64 * 0.25 * 0.75).sqrt(), "{counts:?}");
    }
}

fn permute(item: &McqItem, perm: &[usize]) -> McqItem {
    McqItem {
        options: perm.iter().map(|p| item.options[*p].clone()).collect(),
        correct_index: perm.iter().position(|p| *p == item.correct_index).unwrap(),
        ..item.clone()
    }
}

#[test]
fn shuffling_options_preserves_scores() {
    let (vs, vocab) = videos(500, 4);
    let items = build_mcq(&vs, &vocab, McqTask::Forecasting, 4, 17).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // A text answerer that is right on roughly half of the items.
    let picks: Vec<usize> = items
        .iter()
        .map(|i| if rng.random_bool(0.5) { i.correct_index } else { rng.random_range(0..4) })
        .collect();
    let replies: Vec<String> = items.iter().zip(&picks).map(|(i, p)| i.options[*p].clone()).collect();
    let base = score_mcq(&items, &replies).unwrap();
    for _ in 0..5 {
        let shuffled: Vec<McqItem> = items
            .iter()
            .map(|i| {
                let mut perm: Vec<usize> = (0..4).collect();
                perm.shuffle(&mut rng);
                permute(i, &perm)
            })
            .collect();
        let again = score_mcq(&shuffled, &replies).unwrap();
        assert_eq!(again.correct, base.correct);
        let flags = |r: &adlforge_core::eval::McqReport| r.verdicts.iter().map(|v| v.correct).collect::<Vec<_>>();
        assert_eq!(flags(&again), flags(&base));
    }
}

#[test]
fn distractors_exclude_the_videos_actions() {
    let (vs, vocab) = videos(200, 7);
    for task in [McqTask::Recognition, McqTask::Forecasting] {
        for (item, v) in build_mcq(&vs, &vocab, task, 4, 19).unwrap().iter().zip(&vs) {
            let labels: Vec<&str> = v.segments.iter().map(|s| s.action_label.as_str()).collect();
            let distinct: BTreeSet<&String> = item.options.iter().collect();
            assert_eq!(distinct.len(), 4);
            for (k, o) in item.options.iter().enumerate() {
                if k != item.correct_index && task == McqTask::Recognition {
                    assert!(!labels.contains(&o.as_str()));
                }
            }
            if task == McqTask::Forecasting {
                let boundary = item.visible_frames.unwrap();
                let m = v.segments.iter().position(|s| s.start_frame == boundary).unwrap();
                assert_eq!(item.options[item.correct_index], v.segments[m].action_label);
            }
        }
    }
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[test]
fn f1_arithmetic() {
    let half = prf(&set(&["a", "b"]), &set(&["a", "c"]));
    assert_eq!((half.precision, half.recall, half.f1), (0.5, 0.5, 0.5));
    let same = prf(&set(&["a", "b"]), &set(&["a", "b"]));
    assert_eq!(same.f1, 1.0);
    assert_eq!(prf(&set(&[]), &set(&["a"])).f1, 0.0);
    let lex = Lexicon::builtin();
    let text = "The person drinks water from a bottle and then sits on a chair.";
    let s = mementos_f1(text, text, &lex);
    assert_eq!((s.verb_f1, s.noun_f1), (1.0, 1.0));
}

#[test]
fn judge_scale_maps_one_to_five_onto_twenty_to_hundred() {
    for raw in 1..=5u8 {
        let items = vec![JudgeRatings {
            video_id: "v".into(),
            ratings: JudgeMetric::ALL.iter().map(|m| (*m, Some(raw))).collect(),
        }];
        let s = aggregate_judge(&items).unwrap();
        for m in JudgeMetric::ALL {
            assert_eq!(s.get(m), Some(20.0 * raw as f64));
        }
    }
}
