//! Built-in deterministic replies for every prompt the pipeline issues, so
//! that a full run needs no model server. Replies are pure functions of the
//! request and derive their content from it (action labels, image size,
//! requested labels) so downstream stages see plausible, varied data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::backends::{sha256_hex, BackendError, BackendRequest, FixtureTable, Matcher, MockReply, Role};
use crate::media::png_dimensions;
use crate::model::OBJECT_FEATURE_DIM;
use crate::pose::{JOINTS_QUESTION, MOTION_QUESTION};

/// Objects every mock detection reports.
pub const SCENE_OBJECTS: [&str; 7] = ["Plant", "chair", "bottle", "table", "cup", "phone", "book"];

const CAPTIONS: [&str; 6] = [
    "A person stands in a living room next to a table and a chair.",
    "A person moves their arms while standing near a couch.",
    "A person bends forward slightly beside a table with a bottle on it.",
    "A person turns toward the camera in a small room with a plant.",
    "A person holds an object close to their body while standing.",
    "A person shifts their weight from one foot to the other in a room.",
];

/// Keyword in an action label mapped to the object most tied to it.
const ACTION_OBJECTS: &[(&str, &str)] = &[
    ("drink", "bottle"),
    ("eat", "cup"),
    ("phone", "phone"),
    ("read", "book"),
    ("writ", "book"),
    ("sit", "chair"),
    ("stand", "chair"),
    ("cup", "cup"),
    ("table", "table"),
];

fn seed_of(text: &str) -> u64 {
    let h = sha256_hex(text.as_bytes());
    u64::from_str_radix(&h[..16], 16).expect("hex")
}

fn reply(v: Value) -> Result<Vec<u8>, BackendError> {
    Ok(serde_json::to_vec(&v).expect("serializable"))
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let s = text.find(start)? + start.len();
    let e = text[s..].find(end).map_or(text.len(), |e| s + e);
    Some(&text[s..e])
}

fn last_user(req: &BackendRequest) -> String {
    req.payload["messages"]
        .as_array()
        .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_string()
}

fn actions_in(prompt: &str) -> Vec<String> {
    between(prompt, "in order, are: ", ". Please generate")
        .map(|s| s.split(", ").map(|a| a.trim().to_string()).filter(|a| !a.is_empty()).collect())
        .unwrap_or_default()
}

fn narrate(actions: &[String]) -> String {
    match actions {
        [] => "The video shows a person moving around a room and interacting with nearby furniture.".into(),
        [only] => format!("The video shows a person who performs the action {only} in a room."),
        [first, mid @ .., last] => {
            let mut s = format!("The video shows a person in a room. First, the person performs the action {first}.");
            for a in mid {
                s.push_str(&format!(" Next, the person performs the action {a}."));
            }
            s.push_str(&format!(" Finally, the person performs the action {last}."));
            s
        }
    }
}

fn dense_reply(prompt: &str) -> String {
    let answer = narrate(&actions_in(prompt));
    json!({ "Q": "Can you describe what happens in the video in detail?", "A": answer }).to_string()
}

fn qa_list(prompt: &str, kind: &str) -> String {
    let caption = between(prompt, "The video caption is: ", ". The additional dense caption")
        .unwrap_or("The video shows a person in a room.");
    let questions: [&str; 3] = if kind == "summary" {
        [
            "What is the main activity in the video?",
            "Can you summarize the video?",
            "What does the person do over the course of the video?",
        ]
    } else {
        [
            "Where does the video take place?",
            "In what order does the person perform the actions?",
            "What does the person do at the end of the video?",
        ]
    };
    let sentences: Vec<&str> = caption.split_inclusive('.').map(str::trim).filter(|s| !s.is_empty()).collect();
    let answers = [
        caption.to_string(),
        sentences.iter().skip(1).copied().collect::<Vec<_>>().join(" "),
        sentences.last().copied().unwrap_or(caption).to_string(),
    ];
    let items: Vec<Value> = questions
        .iter()
        .zip(answers)
        .map(|(q, a)| json!({ "Q": q, "A": if a.trim().is_empty() { caption.to_string() } else { a } }))
        .collect();
    Value::Array(items).to_string()
}

fn relevant_reply(prompt: &str) -> String {
    let label = between(prompt, "the action \"", "\"").unwrap_or_default().to_lowercase();
    let found: Vec<&str> = between(prompt, "the objects I found are: ", ". I only want")
        .map(|s| s.split(", ").map(str::trim).filter(|s| !s.is_empty()).collect())
        .unwrap_or_default();
    if found.is_empty() {
        return "None".into();
    }
    let pick = ACTION_OBJECTS
        .iter()
        .find(|(kw, obj)| label.contains(kw) && found.contains(obj))
        .map(|(_, obj)| *obj)
        .unwrap_or_else(|| found[(seed_of(&label) % found.len() as u64) as usize]);
    pick.to_string()
}

fn sequences_reply(prompt: &str) -> String {
    let ids: Vec<u32> = between(prompt, "numeric id:\n", "\nCombine")
        .unwrap_or_default()
        .lines()
        .filter_map(|l| l.split(':').next()?.trim().parse().ok())
        .collect();
    let num = |key: &str, end: &str| -> usize { between(prompt, key, end).and_then(|s| s.trim().parse().ok()).unwrap_or(0) };
    let count = num("Combine these actions into ", " different");
    let min_len = num("must contain between ", " and ").max(1);
    let max_len = num(&format!("between {min_len} and "), " actions").max(min_len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed_of(prompt));
    let mut out: Vec<Vec<u32>> = Vec::new();
    if ids.len() >= 2 {
        while out.len() < count {
            let len = rng.random_range(min_len..=max_len);
            let mut seq: Vec<u32> = Vec::with_capacity(len);
            while seq.len() < len {
                let a = ids[rng.random_range(0..ids.len())];
                if seq.last() != Some(&a) {
                    seq.push(a);
                }
            }
            if !out.contains(&seq) {
                out.push(seq);
            }
        }
    }
    json!(out).to_string()
}

fn caption_reply(req: &BackendRequest) -> Result<Vec<u8>, BackendError> {
    let prompt = req.payload["prompt"].as_str().unwrap_or_default();
    let seed = seed_of(&format!("{}{prompt}", req.media_hash.as_deref().unwrap_or_default()));
    if prompt.contains("Answer with the letter") {
        let letter = (b'A' + (seed % 4) as u8) as char;
        return reply(json!({ "caption": letter.to_string() }));
    }
    reply(json!({ "caption": CAPTIONS[(seed % CAPTIONS.len() as u64) as usize] }))
}

fn label_feature(label: &str) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_of(&format!("feature:{label}")));
    (0..OBJECT_FEATURE_DIM).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

fn localize_reply(req: &BackendRequest) -> Result<Vec<u8>, BackendError> {
    let (w, h) = req
        .media
        .first()
        .and_then(|m| png_dimensions(m))
        .ok_or_else(|| BackendError::Decode {
            role: Role::Localize,
            message: "mock localizer needs a PNG image".into(),
        })?;
    let labels: Vec<String> = req.payload["labels"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        .unwrap_or_default();
    let (w, h) = (w as f64, h as f64);
    let mut boxes = Vec::new();
    let mut features = Vec::new();
    for label in &labels {
        let s = seed_of(label);
        let fx = (s % 50) as f64 / 100.0;
        let fy = ((s >> 8) % 50) as f64 / 100.0;
        boxes.push([fx * w, fy * h, (fx + 0.3) * w, (fy + 0.3) * h]);
        features.push(label_feature(label));
    }
    let scores = vec![0.9; labels.len()];
    reply(json!({ "boxes": boxes, "features": features, "labels": labels, "scores": scores }))
}

fn chat_reply(req: &BackendRequest) -> Result<Vec<u8>, BackendError> {
    let prompt = last_user(req);
    let content = if prompt.contains("the objects I found are:") {
        relevant_reply(&prompt)
    } else if prompt.contains("Generate TWO question and answer pairs") {
        json!([
            { "Q": MOTION_QUESTION, "A": "The hands travel toward the upper body while the knees stay almost still and the head tilts slightly." },
            { "Q": JOINTS_QUESTION, "A": "Mostly the right hand and left hand move; the head moves a little and the knees barely move." }
        ])
        .to_string()
    } else if prompt.contains("Write a general description of the pose") {
        "The head stays above both hands, the hands rise toward the chest and come back down, and the knees stay roughly under the hips.".into()
    } else if prompt.contains("I want to obtain the motion of each of these joints") {
        "The head moves slightly, the right hand and left hand move a lot, and the right knee and left knee move only a small amount.".into()
    } else if prompt.contains("on summarizing the video") {
        qa_list(&prompt, "summary")
    } else if prompt.contains("on the details of the video") {
        qa_list(&prompt, "detail")
    } else if prompt.contains("The fragmented video description is:") {
        dense_reply(&prompt)
    } else if prompt.contains("composite action sequences") {
        sequences_reply(&prompt)
    } else if prompt.contains("You are evaluating a generated description") {
        (1 + seed_of(&prompt) % 5).to_string()
    } else {
        return Err(BackendError::Decode {
            role: Role::Chat,
            message: "no built-in fixture for this prompt".into(),
        });
    };
    reply(json!({ "content": content }))
}

/// Fixture table answering every prompt the pipeline and evaluations issue.
pub fn builtin_fixtures() -> FixtureTable {
    FixtureTable::new()
        .rule(Matcher::Role(Role::Caption), MockReply::func(caption_reply))
        .rule(Matcher::Role(Role::Detect), MockReply::objects(&SCENE_OBJECTS))
        .rule(Matcher::Role(Role::Localize), MockReply::func(localize_reply))
        .rule(Matcher::Role(Role::Chat), MockReply::func(chat_reply))
}
