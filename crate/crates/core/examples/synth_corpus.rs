//! Generating a seeded synthetic corpus and writing it as JSON lines.
//!
//! Usage: cargo run --example synth_corpus [OUT_DIR]

use std::path::PathBuf;

use tubelink::io;
use tubelink::synth::{generate, scenarios};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tubelink-synth"));
    std::fs::create_dir_all(&out)?;

    let mut appearance = Vec::new();
    let mut motion = Vec::new();
    let mut gt = Vec::new();
    for seed in 0..5 {
        let mut spec = scenarios::untrimmed(seed, 4);
        spec.video_id = format!("untrimmed-{seed:02}");
        let s = generate(&spec)?;
        // same spec, same bytes
        assert_eq!(generate(&spec)?, s);
        println!(
            "{}: {} frames, {} detections, {} instance(s)",
            spec.video_id,
            s.appearance.num_frames(),
            s.appearance.num_detections(),
            s.ground_truth.len()
        );
        appearance.push(s.appearance);
        motion.push(s.motion);
        gt.extend(s.ground_truth);
    }

    io::save_detections(&out.join("appearance.jsonl"), &appearance)?;
    io::save_detections(&out.join("motion.jsonl"), &motion)?;
    io::save_ground_truth(&out.join("gt.jsonl"), &gt)?;
    println!("wrote {}", out.display());
    Ok(())
}
