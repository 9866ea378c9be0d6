//! Linking boxes into class-specific paths across a whole video.
//!
//! Two people walk side by side while a distractor flickers in and out. The
//! linker pulls out one path per person, each checked against brute-force
//! enumeration of every possible chain.

use tubelink::geometry::BBox;
use tubelink::model::{DetectionBox, VideoDetections};
use tubelink::pathing::{extract_paths, Linker, PathConfig};
use tubelink::synth::oracle::brute_force_best_path;

fn det(x: f64, y: f64, score: f64) -> DetectionBox {
    DetectionBox::new(BBox::new(x, y, x + 20.0, y + 40.0).unwrap(), vec![score])
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let frames: Vec<Vec<DetectionBox>> = (0..6)
        .map(|t| {
            let x = 10.0 + 3.0 * t as f64;
            let flicker = if t % 2 == 0 { 0.95 } else { 0.05 };
            vec![
                det(x, 10.0, 0.8),
                det(x, 100.0, 0.7),
                det(200.0 - 30.0 * t as f64, 50.0, flicker),
            ]
        })
        .collect();
    let video = VideoDetections::new("walkers", frames);
    let cfg = PathConfig::default();

    let linker = Linker::new(&video);
    let best = linker.best_path(0, &cfg)?;
    let (_, oracle) = brute_force_best_path(&video, 0, cfg.lambda_o)?;
    println!("best energy {:.4}, enumeration {:.4}", best.energy, oracle);

    for (i, path) in extract_paths(&video, 0, &cfg)?.iter().enumerate() {
        let rows: Vec<String> = path
            .nodes
            .iter()
            .map(|n| format!("{}@y{:.0}", n.box_index, n.bbox.y1()))
            .collect();
        println!("path {i}: energy {:7.4}  {}", path.energy, rows.join(" "));
    }

    // with no reward for overlap, the flickering box is worth chasing
    let greedy = PathConfig {
        lambda_o: 0.0,
        ..cfg
    };
    let picks: Vec<usize> = linker
        .best_path(0, &greedy)?
        .nodes
        .iter()
        .map(|n| n.box_index)
        .collect();
    println!("lambda_o = 0 picks {picks:?}");
    Ok(())
}
