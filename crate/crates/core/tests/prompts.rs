use adlforge_core::annotate::prompts;
use adlforge_core::backends::ChatMessage;
use adlforge_core::pose::{build_pose_str, parse_pose_str, PeripheralJoint, PeripheralJointTrace};

const CAPTION: &str = "A person sits down on a chair and then drinks water from a bottle.";
const MEGA: &str = "In frame 0: A person stands near a table. | The image shows a room.\n\
In frame 60: A person sits on a chair. | A person is seated.";

fn golden(name: &str) -> String {
    let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn assert_bytes(actual: &str, name: &str) {
    let expected = golden(name);
    if actual != expected {
        let at = actual
            .bytes()
            .zip(expected.bytes())
            .position(|(a, b)| a != b)
            .unwrap_or(actual.len().min(expected.len()));
        panic!(
            "{name} differs at byte {at}:\n  got      {:?}\n  expected {:?}",
            &actual[at.saturating_sub(20)..(at + 40).min(actual.len())],
            &expected[at.saturating_sub(20)..(at + 40).min(expected.len())]
        );
    }
}

fn split(msgs: &[ChatMessage]) -> (&str, &str) {
    assert_eq!(msgs.len(), 2);
    assert_eq!(msgs[0].role, "system");
    assert_eq!(msgs[1].role, "user");
    (&msgs[0].content, &msgs[1].content)
}

fn appendix_traces() -> Vec<PeripheralJointTrace> {
    let obs: [[(i64, i64); 5]; 2] = [
        [(104, 201), (106, 197), (87, 162), (134, 49), (112, 40)],
        [(82, 208), (87, 204), (66, 167), (122, 63), (91, 38)],
    ];
    PeripheralJoint::ORDER
        .iter()
        .enumerate()
        .map(|(k, j)| PeripheralJointTrace {
            joint: *j,
            observations: obs.iter().map(|o| o[k]).collect(),
        })
        .collect()
}

#[test]
fn dense_caption() {
    let mega = format!("{MEGA}\nThe actions performed in the video, in order, are: sitting down, drink water");
    let msgs = prompts::dense_caption_messages(&mega).unwrap();
    let (system, user) = split(&msgs);
    assert_bytes(system, "dense_caption.system.txt");
    assert_bytes(user, "dense_caption.user.txt");
}

#[test]
fn qa_summary() {
    let msgs = prompts::qa_summary_messages(CAPTION, MEGA).unwrap();
    let (system, user) = split(&msgs);
    assert_bytes(system, "qa_summary.system.txt");
    assert_bytes(user, "qa_summary.user.txt");
}

#[test]
fn qa_detail() {
    let msgs = prompts::qa_detail_messages(CAPTION, MEGA).unwrap();
    let (system, user) = split(&msgs);
    assert_bytes(system, "qa_detail.system.txt");
    assert_bytes(user, "qa_detail.user.txt");
}

#[test]
fn relevant_objects() {
    let msgs = prompts::relevant_objects_messages("Drinking", "plant, chair, bottle, table").unwrap();
    assert_eq!(msgs.len(), 1);
    assert_bytes(&msgs[0].content, "relevant_objects.txt");
}

#[test]
fn caption_prompts() {
    let [a, b] = prompts::caption_prompts();
    assert_bytes(&a, "caption_frame_1.txt");
    assert_bytes(&b, "caption_frame_2.txt");
}

#[test]
fn pose_string_matches_sample_sentence() {
    let s = build_pose_str(&appendix_traces()).unwrap();
    assert_bytes(&s, "pose_str_appendix.txt");
}

#[test]
fn pose_motion_prompt() {
    let s = build_pose_str(&appendix_traces()).unwrap();
    let msgs = prompts::pose_motion_messages(&s).unwrap();
    assert_eq!(msgs.len(), 1);
    assert_bytes(&msgs[0].content, "pose_motion.txt");
}

#[test]
fn pose_string_round_trips() {
    let traces = appendix_traces();
    let parsed = parse_pose_str(&build_pose_str(&traces).unwrap()).unwrap();
    for (k, t) in traces.iter().enumerate() {
        let back: Vec<(i64, i64)> = parsed.iter().map(|o| o[k]).collect();
        assert_eq!(back, t.observations);
    }
}

#[test]
fn substituted_text_is_not_rescanned() {
    let out = prompts::render("a {x} b {y}", &[("x", "{y}"), ("y", "z")]).unwrap();
    assert_eq!(out, "a {y} b z");
    assert!(prompts::render("no placeholder", &[("x", "1")]).is_err());
}
