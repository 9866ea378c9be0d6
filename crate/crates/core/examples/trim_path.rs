//! Temporal trimming of one path into action tubes.
//!
//! The path's class score rises for a while, dips for two frames and rises
//! again. A small switching penalty cuts the dip out; a large one keeps a
//! single tube.

use tubelink::geometry::BBox;
use tubelink::model::{ActionPath, Label, PathNode};
use tubelink::trimming::{cut_tubes, labelling_objective, trim_path, TrimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = [0.05, 0.1, 0.8, 0.9, 0.9, 0.2, 0.3, 0.85, 0.9, 0.1, 0.05];
    let path = ActionPath {
        video_id: "demo".into(),
        class_id: 0,
        nodes: raw
            .iter()
            .enumerate()
            .map(|(t, &s)| PathNode {
                bbox: BBox::new(t as f64, 0.0, t as f64 + 30.0, 60.0).unwrap(),
                score: s,
                raw_score: s,
                box_index: 0,
            })
            .collect(),
        energy: 0.0,
    };

    for lambda_l in [0.0, 0.5, 3.0] {
        let cfg = TrimConfig {
            lambda_l,
            top_k: 3,
            ..TrimConfig::default()
        };
        let labelling = trim_path(&path, &cfg)?;
        let marks: String = labelling
            .labels
            .iter()
            .map(|l| if *l == Label::Action { '#' } else { '.' })
            .collect();
        let tubes = cut_tubes(&path, &labelling, &cfg)?;
        let spans: Vec<String> = tubes
            .iter()
            .map(|t| {
                format!(
                    "{}..{} ({:.3})",
                    t.start_frame + 1,
                    t.end_frame + 1,
                    t.score
                )
            })
            .collect();
        println!(
            "lambda_l {lambda_l:3.1}  {marks}  objective {:6.3}  tubes {}",
            labelling_objective(&path, &labelling.labels, &cfg),
            spans.join(", ")
        );
    }
    Ok(())
}
