use criterion::{criterion_group, criterion_main, Criterion};
use refty::concrete::ConcreteConfig;
use refty::config::{AnalysisConfig, DomainChoice};
use refty::corpus::{load_corpus, run_batch, Mode};
use std::hint::black_box;
use std::path::PathBuf;

fn configs() -> Vec<AnalysisConfig> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let quals = std::fs::read_to_string(dir.join("quals.txt")).expect("corpus qualifiers");
    let mut out = Vec::new();
    for k in [0, 1] {
        out.push(AnalysisConfig::pred(&quals, k).expect("qualifiers"));
        out.push(AnalysisConfig::new(DomainChoice::Oct, k));
        out.push(AnalysisConfig::new(DomainChoice::Poly, k));
    }
    out
}

fn corpus(c: &mut Criterion) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let entries = load_corpus(&dir).expect("corpus");
    let cfgs = configs();
    let cc = ConcreteConfig::default();
    let mut g = c.benchmark_group("corpus");
    g.sample_size(10);
    for (name, mode) in [("parallel", Mode::Parallel), ("sequential", Mode::Sequential)] {
        g.bench_function(format!("analyze/{name}"), |b| b.iter(|| black_box(run_batch(&entries, &cfgs, None, mode))));
        g.bench_function(format!("analyze+oracle/{name}"), |b| {
            b.iter(|| black_box(run_batch(&entries, &cfgs, Some(&cc), mode)))
        });
    }
    g.finish();
}

criterion_group!(benches, corpus);
criterion_main!(benches);
