//! Learns a 2-D stream in which one class jumps away mid-stream and prints
//! the structural events and the accuracy before and after the jump.

use parafis::harness::{prequential_run, DriftStream, Phase, StreamPoint, TraceMode};
use parafis::{ClassLabel, HyperParams, RuleSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> parafis::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let jump = 500;
    let points = (0..1500)
        .map(|i| {
            let class = usize::from(rng.random_bool(0.5));
            let (mx, my) = match (class, i >= jump) {
                (0, _) => (0.0, 0.0),
                (_, false) => (6.0, 0.0),
                (_, true) => (6.0, 10.0),
            };
            let noise = |rng: &mut ChaCha8Rng| rng.random_range(-1.5..1.5);
            StreamPoint {
                features: vec![mx + noise(&mut rng), my + noise(&mut rng)],
                label: ClassLabel(class),
                phase: if i < jump { Phase::A } else { Phase::B },
            }
        })
        .collect();
    let stream = DriftStream { points, label_names: vec!["left".into(), "right".into()], drift_times: vec![jump] };

    let (record, trace) = prequential_run(|| RuleSystem::new(2, HyperParams::default()), &stream, TraceMode::Record)?;
    for e in trace.events() {
        println!("step {:>4}: {} (rule {})", e.stream_index, e.kind, e.rule_index);
    }
    let acc = |r: std::ops::Range<usize>| {
        let len = r.len() as f64;
        record.scores[r].iter().map(|s| f64::from(*s)).sum::<f64>() / len
    };
    println!("accuracy before the jump {:.3}", acc(0..jump));
    println!("accuracy over the next 200 points {:.3}", acc(jump..jump + 200));
    println!("accuracy afterwards {:.3}", acc(jump + 200..record.len()));
    Ok(())
}
