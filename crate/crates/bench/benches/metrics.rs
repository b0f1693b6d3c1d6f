use criterion::{black_box, criterion_group, criterion_main, Criterion};
use curdesc_core::datasynth::{self, SynthConfig};
use curdesc_core::metrics::{self, CaptionSet};

fn corpus() -> Vec<CaptionSet> {
    let data = datasynth::generate(&SynthConfig::default()).unwrap();
    // Shift candidates by one sample so scores are not all perfect.
    let n = data.val.len();
    (0..n)
        .map(|i| {
            CaptionSet::from_text(
                data.val[i].id.clone(),
                &data.val[(i + 1) % n].caption,
                &[data.val[i].caption.as_str()],
            )
            .unwrap()
        })
        .collect()
}

fn scoring(c: &mut Criterion) {
    let sets = corpus();
    c.bench_function("cider_d_128", |b| b.iter(|| black_box(metrics::cider_d(&sets))));
    c.bench_function("corpus_report_128", |b| {
        b.iter(|| black_box(metrics::corpus_report(&sets).unwrap()))
    });
}

criterion_group!(benches, scoring);
criterion_main!(benches);
