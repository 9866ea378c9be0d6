//! Scoring detected tubes against ground truth.

use tubelink::evaluation::{evaluate, tube_iou, EvalConfig};
use tubelink::geometry::BBox;
use tubelink::model::{ActionTube, ClassCatalog, GroundTruthTube};

fn boxes(n: usize, x: f64) -> Vec<BBox> {
    (0..n)
        .map(|_| BBox::new(x, 0.0, x + 10.0, 10.0).unwrap())
        .collect()
}

fn tube(video: &str, class: usize, start: usize, n: usize, x: f64, score: f64) -> ActionTube {
    ActionTube {
        video_id: video.into(),
        class_id: class,
        start_frame: start,
        end_frame: start + n - 1,
        boxes: boxes(n, x),
        box_scores: vec![score; n],
        score,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gt = vec![
        GroundTruthTube {
            video_id: "a".into(),
            class_id: 0,
            start_frame: 0,
            end_frame: 19,
            boxes: boxes(20, 0.0),
        },
        GroundTruthTube {
            video_id: "b".into(),
            class_id: 1,
            start_frame: 5,
            end_frame: 14,
            boxes: boxes(10, 0.0),
        },
    ];
    let preds = vec![
        tube("a", 0, 0, 10, 0.0, 0.9), // first half only
        tube("a", 0, 0, 20, 3.0, 0.4), // full span, shifted boxes
        tube("b", 1, 5, 10, 0.0, 0.7), // exact
        tube("b", 0, 0, 5, 0.0, 0.95), // wrong class, no gt of class 0 in b
    ];

    println!(
        "overlap of the half tube: {:.3}",
        tube_iou(&preds[0], &gt[0])
    );
    println!(
        "overlap of the shifted tube: {:.3}",
        tube_iou(&preds[1], &gt[0])
    );

    let catalog = ClassCatalog::new(["wave", "clap", "sit"])?;
    let report = evaluate(&preds, &gt, &EvalConfig::default(), Some(&catalog))?;
    println!("{}", report.render_table());
    println!("absent classes: {:?}", report.absent_classes);
    println!("mAP@0.5 = {:?}", report.map_at(0.5));
    Ok(())
}
