use std::path::PathBuf;

use cosearch::grid::{Cell, Heading, MoveAction, Pose};
use cosearch::harness::{StepRecord, TrialResult, TrialTrace};
use cosearch::pomdp::Action;
use cosearch::render::{render_svg, render_trajectory};
use cosearch::scenario::ScenarioSpec;
use cosearch::harness::BeliefSnapshot;

fn spec() -> ScenarioSpec {
    ScenarioSpec::from_json(
        r#"{
            "schema_version": 1,
            "name": "golden <&>",
            "map": { "width": 6, "height": 4, "cell_size": 0.25, "obstacles": [[3, 1], [3, 2]] },
            "target": { "class": "Salt&Pepper", "cell": [5, 3], "detector": { "tp": 0.7, "fp": 0.05, "r": 1.0 } },
            "objects": [
                { "class": "Stove", "cell": [4, 3], "detector": { "tp": 0.9, "fp": 0.02, "r": 2.0 },
                  "correlation": { "relation": "close", "d": 0.5 } }
            ],
            "init_pose": { "cell": [0, 0], "heading": 0 }
        }"#,
    )
    .unwrap()
}

fn step(t: u32, col: i32, row: i32, heading: Heading) -> StepRecord {
    StepRecord {
        t,
        pose: Pose::new(Cell::new(col, row), heading),
        action: Action::Move(MoveAction::MoveAhead),
        subgoal: Some("SearchLocal".into()),
        belief_hash: 0,
        detections: vec![None, None],
        reward: -1.0,
        resampled: false,
        belief_reset: false,
    }
}

fn trace(steps: Vec<StepRecord>, beliefs: Vec<BeliefSnapshot>) -> TrialTrace {
    let final_pose = steps.last().map_or(Pose::new(Cell::new(0, 0), Heading::EAST), |s| s.pose);
    TrialTrace {
        schema_version: 1,
        scenario: spec(),
        result: TrialResult {
            scenario: "golden".into(),
            agent: "cospomdp".into(),
            seed: 0,
            success: false,
            path_len: 0.5,
            shortest_len: 1.0,
            discounted_reward: -2.0,
            steps: steps.len() as u32,
            belief_resets: 0,
            error: None,
        },
        steps,
        beliefs,
        final_pose,
    }
}

fn three_steps() -> Vec<StepRecord> {
    vec![step(0, 0, 0, Heading::EAST), step(1, 1, 0, Heading::EAST), step(2, 2, 1, Heading::from_index(1))]
}

#[test]
fn empty_trace_draws_only_the_grid() {
    let svg = render_svg(&trace(Vec::new(), Vec::new()));
    assert_eq!(svg.matches("<circle").count(), 0);
    assert_eq!(svg.matches("<polyline").count(), 0);
    assert_eq!(svg.matches(r##"fill="#404040""##).count(), 2);
    assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
}

#[test]
fn one_glyph_per_step() {
    let svg = render_svg(&trace(three_steps(), Vec::new()));
    assert_eq!(svg.matches("<circle").count(), 3);
    assert_eq!(svg.matches("<polyline").count(), 1);
}

#[test]
fn names_are_escaped() {
    let svg = render_svg(&trace(three_steps(), Vec::new()));
    assert!(svg.contains("Salt&amp;Pepper"));
    assert!(svg.contains("golden &lt;&amp;&gt;"));
}

#[test]
fn matches_pinned_svg() {
    let beliefs = vec![
        BeliefSnapshot { t: 0, cells: vec![(Cell::new(5, 3), 0.5), (Cell::new(4, 2), 0.25)] },
        BeliefSnapshot { t: 2, cells: vec![(Cell::new(5, 3), 0.9)] },
    ];
    let t = trace(three_steps(), beliefs);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.svg");
    render_trajectory(&t, &out).unwrap();
    let got = std::fs::read_to_string(&out).unwrap();
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/trace.svg");
    if std::env::var_os("COSEARCH_BLESS").is_some() {
        std::fs::write(&golden, &got).unwrap();
    }
    let want = std::fs::read_to_string(&golden).expect("golden file; regenerate with COSEARCH_BLESS=1");
    assert_eq!(got, want);
}
