//! Driving the command-line front end in-process: synthesize a corpus,
//! run the pipeline from a config file, and evaluate.

use tubelink::cli;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let d = dir.path();
    std::fs::write(
        d.join("corpus.toml"),
        r#"
[[videos]]
seed = 1
video_id = "cli-demo"
num_frames = 40
num_classes = 2
clutter = { per_frame = 3 }

[[videos.plants]]
class_id = 1
start_frame = 8
end_frame = 30
start_box = [20.0, 20.0, 80.0, 120.0]
end_box = [150.0, 30.0, 210.0, 130.0]
profile = { peak = 0.9, edge = 0.6, ramp = 3 }
idle_score = 0.1
"#,
    )?;
    std::fs::write(
        d.join("run.toml"),
        r#"
schema_version = 1
classes = ["sit", "stand"]

[io]
appearance = "demo.appearance.jsonl"
motion = "demo.motion.jsonl"
out = "tubes.jsonl"
gt = "demo.gt.jsonl"

[trimming]
alpha = { stand = 2.0 }
"#,
    )?;
    std::env::set_current_dir(d)?;

    let run = |args: &[&str]| {
        let argv = std::iter::once("tubelink").chain(args.iter().copied());
        println!("$ tubelink {}", args.join(" "));
        cli::run(argv)
    };
    assert_eq!(
        run(&["synth", "--spec", "corpus.toml", "--out-prefix", "demo"]),
        cli::EXIT_OK
    );
    assert_eq!(
        run(&["pipeline", "--config", "run.toml", "--workers", "2"]),
        cli::EXIT_OK
    );
    assert_eq!(
        run(&[
            "eval",
            "--tubes",
            "tubes.jsonl",
            "--gt",
            "demo.gt.jsonl",
            "--deltas",
            "0.2,0.5"
        ]),
        cli::EXIT_OK
    );
    // bad input maps to distinct exit codes
    assert_eq!(
        run(&["trim", "--in", "missing.jsonl", "--out", "x.jsonl"]),
        cli::EXIT_IO
    );
    assert_eq!(
        run(&["pipeline", "--config", "run.toml", "--tau", "7"]),
        cli::EXIT_USAGE
    );
    std::env::set_current_dir(std::env::temp_dir())?;
    Ok(())
}
