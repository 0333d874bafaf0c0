use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rrg_core::numkit::{ops, Array, Var};
use rrg_core::rewards::{arn, bleu4, rouge_l};

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Var {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Var::leaf(Array::new(vec![rows, cols], data).unwrap())
}

fn bench_matmul(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_matrix(&mut rng, 64, 64);
    let b = random_matrix(&mut rng, 64, 64);
    c.bench_function("matmul 64x64 forward", |bench| {
        bench.iter(|| ops::matmul(black_box(&a), black_box(&b)).unwrap())
    });
    c.bench_function("matmul 64x64 forward+backward", |bench| {
        bench.iter(|| {
            let out = ops::matmul(black_box(&a), black_box(&b)).unwrap();
            ops::sum_all(&out).unwrap().backward().unwrap();
        })
    });
}

fn bench_softmax_and_norm(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_matrix(&mut rng, 128, 64);
    let gain = Var::leaf(Array::from_vec(vec![1.0; 64]));
    c.bench_function("softmax_last 128x64", |bench| {
        bench.iter(|| ops::softmax_last(black_box(&x)).unwrap())
    });
    c.bench_function("rms_norm 128x64", |bench| {
        bench.iter(|| ops::rms_norm(black_box(&x), &gain).unwrap())
    });
}

fn bench_attention(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seq = 64;
    let q = random_matrix(&mut rng, seq, 32);
    let k = random_matrix(&mut rng, seq, 32);
    let v = random_matrix(&mut rng, seq, 32);
    let causal: Vec<Vec<bool>> = (0..seq)
        .map(|i| (0..seq).map(|j| j <= i).collect())
        .collect();
    c.bench_function("masked_attention 64 tokens", |bench| {
        bench.iter(|| {
            ops::masked_attention(black_box(&q), black_box(&k), black_box(&v), &causal).unwrap()
        })
    });
}

fn bench_text_metrics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vocab = ["lungs", "clear", "effusion", "cardiac", "normal", "acute", "right", "left"];
    let sample = |rng: &mut ChaCha8Rng, len: usize| -> String {
        (0..len)
            .map(|_| vocab[rng.gen_range(0..vocab.len())])
            .collect::<Vec<_>>()
            .join(" ")
    };
    let hyp = sample(&mut rng, 60);
    let refer = sample(&mut rng, 60);
    c.bench_function("bleu4 60 tokens", |bench| {
        bench.iter(|| bleu4(black_box(&hyp), black_box(&refer)))
    });
    c.bench_function("rouge_l 60 tokens", |bench| {
        bench.iter(|| rouge_l(black_box(&hyp), black_box(&refer)))
    });
    c.bench_function("arn 60 tokens", |bench| {
        bench.iter(|| arn(black_box(&hyp)))
    });
}

criterion_group!(
    kernels,
    bench_matmul,
    bench_softmax_and_norm,
    bench_attention,
    bench_text_metrics
);
criterion_main!(kernels);
