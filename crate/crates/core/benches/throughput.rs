//! Throughput of the data-parallel kernels.
//!
//! Run twice to compare execution modes:
//!   cargo bench -p lexsim --bench throughput
//!   cargo bench -p lexsim --bench throughput --no-default-features
//! Parallel builds also time each kernel inside a one-thread pool.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use lexsim::formspace::CueMatrix;
use lexsim::mappings::{comprehension_endstate, predict_form, wh_update_production, MappingKind, MappingMatrix};
use lexsim::par;
use lexsim::semspace::EmbeddingTable;
use lexsim::synth::{self, TrialListSpec};
use lexsim::trialsim::{Lexicon, Priors, SimulationConfig, Simulator, TrialRecord};

struct Setup {
    lexicon: Lexicon,
    priors: Priors,
    subjects: Vec<(String, Vec<TrialRecord>)>,
    table: EmbeddingTable,
    g: MappingMatrix,
}

fn setup() -> Setup {
    let mut rng = synth::rng(42);
    let words = synth::random_words(&mut rng, 400);
    let cues = CueMatrix::build(&words).unwrap();
    let emb = synth::form_linked_embeddings(&mut rng, &cues, 64, 1.0).unwrap();
    let nonwords = synth::random_nonwords(&mut rng, &words, 200);
    let lexicon = Lexicon::new(cues, emb).unwrap();
    let priors = Priors::endstate(&lexicon, 1e-8).unwrap();
    let spec = TrialListSpec {
        trials: 150,
        ..Default::default()
    };
    let subjects = (0..8)
        .map(|i| {
            let id = i.to_string();
            let trials = synth::trial_list(&mut rng, &id, &words, &nonwords, &spec);
            (id, trials)
        })
        .collect();
    let big_words: Vec<String> = (0..20_000).map(|i| format!("w{i}")).collect();
    let rows = synth::gaussian_matrix(&mut rng, 20_000, 64);
    let table = EmbeddingTable::new(big_words, rows).unwrap();
    let g = MappingMatrix::new(MappingKind::Production, synth::gaussian_matrix(&mut rng, 256, 4096)).unwrap();
    Setup {
        lexicon,
        priors,
        subjects,
        table,
        g,
    }
}

fn kernels(c: &mut Criterion, label: &str, s: &Setup, pool: Option<&par::Pool>) {
    let run = |f: &mut (dyn FnMut() + Send)| match pool {
        Some(p) => p.install(f),
        None => f(),
    };
    let mut group = c.benchmark_group(label);
    group.sample_size(10);
    group.bench_function("endstate_comprehension", |b| {
        b.iter(|| run(&mut || {
            black_box(comprehension_endstate(s.lexicon.cues(), s.lexicon.semantics(), 1e-8).unwrap());
        }))
    });
    let q: Vec<f64> = s.table.row(0).iter().map(|x| x + 0.1).collect();
    group.bench_function("cosine_scan_20k", |b| b.iter(|| run(&mut || {
            black_box(s.table.cosine_scan(black_box(&q)).unwrap());
        })));
    let input: Vec<f64> = (0..256).map(|i| (i as f64).sin()).collect();
    group.bench_function("predict_form_256x4096", |b| b.iter(|| run(&mut || {
            black_box(predict_form(black_box(&input), &s.g));
        })));
    let target = s.lexicon.cues().row(0).with_dim(4096).unwrap();
    group.bench_function("production_update_256x4096", |b| {
        let mut g = s.g.clone();
        b.iter(|| run(&mut || wh_update_production(&mut g, black_box(&input), &target, 1e-3)))
    });
    let sim = Simulator::new(&s.lexicon, SimulationConfig::default())
        .unwrap()
        .with_stimuli(s.subjects.iter().flat_map(|(_, t)| t.iter().map(|t| t.stimulus.as_str())));
    group.bench_function("simulate_8_subjects", |b| b.iter(|| run(&mut || {
            black_box(sim.simulate_subjects(&s.priors, &s.subjects));
        })));
    group.finish();
}

fn throughput(c: &mut Criterion) {
    let s = setup();
    if par::PARALLEL {
        kernels(c, "parallel", &s, None);
        let one = par::Pool::new(1);
        kernels(c, "parallel_1_thread", &s, Some(&one));
    } else {
        kernels(c, "sequential", &s, None);
    }
}

criterion_group!(benches, throughput);
criterion_main!(benches);
