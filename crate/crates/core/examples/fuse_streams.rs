//! Boosting appearance detections with an optical-flow stream.
//!
//! Each appearance box picks, per class, the motion box it overlaps most and
//! adds that box's score weighted by the overlap, but only above `tau`.

use tubelink::fusion::{fuse_frame, FusionConfig};
use tubelink::geometry::BBox;
use tubelink::model::DetectionBox;

fn det(b: [f64; 4], scores: &[f64]) -> DetectionBox {
    DetectionBox::new(BBox::new(b[0], b[1], b[2], b[3]).unwrap(), scores.to_vec())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // two classes: run, jump
    let appearance = vec![
        det([0.0, 0.0, 10.0, 10.0], &[0.6, 0.1]),
        det([40.0, 40.0, 60.0, 80.0], &[0.2, 0.5]),
    ];
    let motion = vec![
        det([5.0, 0.0, 15.0, 10.0], &[0.8, 0.3]), // IoU 1/3 with the first box
        det([41.0, 42.0, 61.0, 82.0], &[0.1, 0.9]), // near-copy of the second
    ];

    for tau in [0.0, 0.3, 0.5, 1.0] {
        let fused = fuse_frame(&appearance, &motion, &FusionConfig::new(tau)?)?;
        let rows: Vec<String> = fused
            .iter()
            .map(|d| format!("[{:.3}, {:.3}]", d.scores[0], d.scores[1]))
            .collect();
        println!("tau {tau:.1}: {}", rows.join("  "));
    }
    Ok(())
}
