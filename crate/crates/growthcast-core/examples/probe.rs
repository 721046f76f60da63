// Scratch diagnostic: seed robustness sweep.
use growthcast_core::pipeline::{Raster, SourceDepth};
use growthcast_core::segnet::*;
use growthcast_core::tensor::RngStream;

fn three_stripe(size: usize, sigma: f64, seed: u64) -> (Raster, Vec<usize>) {
    let mut rng = RngStream::new(seed);
    let levels = [0.2f64, 0.5, 0.8];
    let mut data = vec![0.0f32; size * size];
    let mut stripe_of = vec![0usize; size * size];
    for y in 0..size {
        let stripe = (y * 3) / size;
        for x in 0..size {
            data[y * size + x] = rng.normal(levels[stripe], sigma).clamp(0.0, 1.0) as f32;
            stripe_of[y * size + x] = stripe;
        }
    }
    (Raster::new(size, size, 1, data, SourceDepth::Float).unwrap(), stripe_of)
}

fn worst_purity(labels: &LabelMap, stripe_of: &[usize]) -> (usize, f64) {
    let q = labels.num_classes();
    let mut counts = vec![vec![0usize; q]; 3];
    let mut totals = [0usize; 3];
    for (i, &l) in labels.labels().iter().enumerate() {
        counts[stripe_of[i]][l as usize] += 1;
        totals[stripe_of[i]] += 1;
    }
    let worst = (0..3)
        .map(|s| *counts[s].iter().max().unwrap() as f64 / totals[s] as f64)
        .fold(1.0f64, f64::min);
    (labels.distinct_count(), worst)
}

fn main() {
    let (block, stripe_of) = three_stripe(64, 0.05, 2024);
    for (q, mu, lr, iters) in [
        (16usize, 5.0f64, 0.1f64, 120usize),
        (8, 5.0, 0.1, 120),
        (16, 5.0, 0.2, 120),
        (16, 7.0, 0.1, 200),
        (8, 7.0, 0.1, 200),
    ] {
        print!("q={q} mu={mu} lr={lr} it={iters}: ");
        let mut pass = 0;
        for seed in 0..12u64 {
            let cfg = SegConfig {
                components: 2, filters: q, labels: q,
                continuity_weight: mu, lr, momentum: 0.9,
                max_iters: iters, min_labels: 2,
            };
            let (_m, labels) =
                train_segmentation::<f32>(&block, &cfg, &mut RngStream::new(seed)).unwrap();
            let (d, worst) = worst_purity(&labels, &stripe_of);
            let ok = d >= 3 && worst >= 0.95;
            if ok { pass += 1; }
            print!("{}{:.2} ", if ok { "+" } else { "-" }, worst);
        }
        println!("  => {pass}/12");
    }
}
