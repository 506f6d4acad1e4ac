use std::time::Instant;

use headfield::forknet::{build_forknet, segment_volume, train, ForkNetConfig, OutputMode, SliceDataset, TrainSchedule};
use headfield::metrics::dice;
use headfield::volume::{generate_phantom, Axis, PhantomConfig, TISSUE_COUNT};

fn main() {
    let lr: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3e-3);
    let epochs: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(6);
    let volumes: Vec<_> = (0..20)
        .map(|i| generate_phantom(9000 + i as u64, [64, 64, 64], &PhantomConfig::default()).unwrap())
        .collect();
    let mut train_volumes = volumes;
    let (held_mri, held_truth) = train_volumes.pop().unwrap();
    let config = ForkNetConfig { degree: TISSUE_COUNT, depth: 4, extent: 64, seed: 7, ..Default::default() };
    let mut net = build_forknet::<f32>(&config).unwrap();
    let dataset = SliceDataset::new(train_volumes, Axis::Axial).unwrap();
    let counts = held_truth.label_counts();

    let start = Instant::now();
    for epoch in 1..=epochs {
        let schedule = TrainSchedule { epochs: 1, batch_size: 2, learning_rate: lr, seed: 7 + epoch as u64, split: 0.9 };
        let trace = train(&mut net, &dataset, &schedule, OutputMode::LogSigmoid).unwrap();
        let predicted = segment_volume(&mut net, &held_mri, Axis::Axial, Some(0.5)).unwrap();
        let mut dices = Vec::new();
        for t in 1..=TISSUE_COUNT as u8 {
            if counts[t as usize] >= 200 {
                dices.push(dice(&predicted.mask(t), &held_truth.mask(t)).unwrap());
            }
        }
        let mean = dices.iter().sum::<f64>() / dices.len() as f64;
        println!(
            "epoch {}: loss {:.4}, mean dice {:.2}%, per-tissue {:?}, {:.0}s",
            epoch, trace.train[0], mean,
            dices.iter().map(|d| format!("{:.0}", d)).collect::<Vec<_>>(),
            start.elapsed().as_secs_f64()
        );
    }
}
