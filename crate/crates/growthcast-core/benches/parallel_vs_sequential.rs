//! Data-parallel core vs sequential fallback.
//!
//! Each group benchmarks one pipeline hot spot twice: once with the
//! rayon paths active and once with the runtime sequential override
//! (the same code the crate compiles to without the `parallel`
//! feature). Outputs are bit-identical either way, which each group
//! asserts before timing.

use criterion::{criterion_group, criterion_main, Criterion};
use growthcast_core::convlstm::{
    batch_gradients, ConvLstmModel, ModelConfig, OutputGatePeephole,
};
use growthcast_core::exec;
use growthcast_core::metrics::{MetricReport, SsimConfig};
use growthcast_core::pipeline::{Raster, SourceDepth};
use growthcast_core::segnet::{
    assign_labels, backward, forward, seg_loss_backward, SegConfig, SegNetModel,
};
use growthcast_core::tensor::{conv2d, conv2d_backward, RngStream, Tensor};
use std::hint::black_box;

fn random_tensor(shape: &[usize], rng: &mut RngStream) -> Tensor<f32> {
    Tensor::from_fn(shape, |_| rng.uniform() as f32)
}

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", false), ("sequential", true)]
}

fn bench_conv2d(c: &mut Criterion) {
    let mut rng = RngStream::new(1);
    let input = random_tensor(&[16, 64, 64], &mut rng);
    let kernels = random_tensor(&[16, 16, 3, 3], &mut rng);
    let bias = random_tensor(&[16], &mut rng);

    exec::force_sequential(true);
    let seq = conv2d(&input, &kernels, &bias).unwrap();
    exec::force_sequential(false);
    let par = conv2d(&input, &kernels, &bias).unwrap();
    assert_eq!(seq, par, "parallel conv must be bit-identical");

    let mut group = c.benchmark_group("conv2d_forward_16x64x64");
    for (name, force_seq) in modes() {
        group.bench_function(name, |b| {
            exec::force_sequential(force_seq);
            b.iter(|| black_box(conv2d(&input, &kernels, &bias).unwrap()));
        });
    }
    group.finish();

    let upstream = random_tensor(&[16, 64, 64], &mut rng);
    let mut group = c.benchmark_group("conv2d_backward_16x64x64");
    for (name, force_seq) in modes() {
        group.bench_function(name, |b| {
            exec::force_sequential(force_seq);
            b.iter(|| black_box(conv2d_backward(&upstream, &input, &kernels).unwrap()));
        });
    }
    group.finish();
    exec::force_sequential(false);
}

fn bench_segmentation_iteration(c: &mut Criterion) {
    let mut rng = RngStream::new(2);
    let data: Vec<f32> = (0..64 * 64).map(|_| rng.uniform() as f32).collect();
    let block = Raster::new(64, 64, 1, data, SourceDepth::Float).unwrap();
    let cfg = SegConfig {
        components: 2,
        filters: 16,
        labels: 16,
        max_iters: 1,
        ..SegConfig::default()
    };
    let model: SegNetModel<f32> = SegNetModel::init(1, &cfg, &mut RngStream::new(3)).unwrap();
    let input = block.to_tensor();

    let mut group = c.benchmark_group("segmentation_iteration_64x64");
    group.sample_size(20);
    for (name, force_seq) in modes() {
        group.bench_function(name, |b| {
            exec::force_sequential(force_seq);
            b.iter(|| {
                let mut m = model.clone();
                let (resp, cache) = forward(&m, &input).unwrap();
                let labels = assign_labels(&resp);
                let grad = seg_loss_backward(&resp, &labels, 5.0).unwrap();
                m.zero_grads();
                backward(&mut m, &cache, &grad).unwrap();
                black_box(m);
            });
        });
    }
    group.finish();
    exec::force_sequential(false);
}

fn bench_batch_gradients(c: &mut Criterion) {
    let config = ModelConfig {
        layers: 2,
        filters: 8,
        kernel: 3,
        in_channels: 1,
        out_channels: 1,
        seq_len: 1,
        peephole: OutputGatePeephole::PreviousCell,
    };
    let model = ConvLstmModel::<f32>::init(config, &mut RngStream::new(4)).unwrap();
    let mut rng = RngStream::new(5);
    let batch: Vec<(Tensor<f32>, Tensor<f32>)> = (0..8)
        .map(|_| {
            (
                random_tensor(&[1, 64, 64], &mut rng),
                random_tensor(&[1, 64, 64], &mut rng),
            )
        })
        .collect();

    let mut group = c.benchmark_group("convlstm_batch_gradients_8x64x64");
    group.sample_size(10);
    for (name, force_seq) in modes() {
        group.bench_function(name, |b| {
            exec::force_sequential(force_seq);
            b.iter(|| black_box(batch_gradients(&model, &batch).unwrap()));
        });
    }
    group.finish();
    exec::force_sequential(false);
}

fn bench_tile_metrics(c: &mut Criterion) {
    let mut rng = RngStream::new(6);
    let truth: Vec<Tensor<f32>> = (0..16)
        .map(|_| random_tensor(&[1, 64, 64], &mut rng))
        .collect();
    let pred: Vec<Tensor<f32>> = (0..16)
        .map(|_| random_tensor(&[1, 64, 64], &mut rng))
        .collect();
    let cfg = SsimConfig::default();

    exec::force_sequential(true);
    let seq = MetricReport::compute(&truth, &pred, &cfg).unwrap();
    exec::force_sequential(false);
    let par = MetricReport::compute(&truth, &pred, &cfg).unwrap();
    assert_eq!(seq, par, "parallel metrics must be bit-identical");

    let mut group = c.benchmark_group("tile_metrics_16x64x64");
    group.sample_size(20);
    for (name, force_seq) in modes() {
        group.bench_function(name, |b| {
            exec::force_sequential(force_seq);
            b.iter(|| black_box(MetricReport::compute(&truth, &pred, &cfg).unwrap()));
        });
    }
    group.finish();
    exec::force_sequential(false);
}

criterion_group!(
    benches,
    bench_conv2d,
    bench_segmentation_iteration,
    bench_batch_gradients,
    bench_tile_metrics
);
criterion_main!(benches);
