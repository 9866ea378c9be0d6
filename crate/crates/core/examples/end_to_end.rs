//! Full pipeline on an untrimmed synthetic corpus, with and without the
//! trimming pass, evaluated at several overlap thresholds.

use tubelink::evaluation::{evaluate, EvalConfig};
use tubelink::pipeline::{fuse_corpus, run_corpus};
use tubelink::synth::{generate, scenarios};
use tubelink::trimming::build_untrimmed_tubes;
use tubelink::{FusionConfig, PathConfig, TrimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let videos: Vec<_> = (0..24)
        .map(|seed| generate(&scenarios::untrimmed(seed, 3)))
        .collect::<Result<_, _>>()?;
    let appearance: Vec<_> = videos.iter().map(|s| s.appearance.clone()).collect();
    let motion: Vec<_> = videos.iter().map(|s| s.motion.clone()).collect();
    let gt: Vec<_> = videos.iter().flat_map(|s| s.ground_truth.clone()).collect();

    let (fusion, pathing, trimming) = (
        FusionConfig::default(),
        PathConfig::default(),
        TrimConfig::default(),
    );
    let tubes = run_corpus(&appearance, &motion, &fusion, &pathing, &trimming, workers)?;

    let fused = fuse_corpus(&appearance, &motion, &fusion, workers)?;
    let mut one_pass = Vec::new();
    for v in &fused {
        one_pass.extend(build_untrimmed_tubes(v, &pathing, &trimming)?);
    }

    let cfg = EvalConfig::default();
    for (name, t) in [("two passes", &tubes), ("one pass", &one_pass)] {
        let report = evaluate(t, &gt, &cfg, None)?;
        println!("{name}: {} tubes", t.len());
        println!("{}", report.render_table());
    }
    Ok(())
}
