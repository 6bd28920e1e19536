use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion as Bench};
use rxngraph_bench::recorded;
use rxngraph_core::chem::{fingerprint, parse_smiles, tanimoto, FingerprintConfig};
use rxngraph_core::eval::{score_corpus, Criterion, EvalDocument};
use rxngraph_core::geometry::{iou_region, IouMode, Region};

fn geometry(c: &mut Bench) {
    let a = Region::from_slice(&[513.0, 155.0, 880.0, 153.0, 880.0, 130.0, 513.0, 132.0]).unwrap();
    let b = Region::from_slice(&[585.0, 146.0, 860.0, 160.0, 861.0, 140.0, 586.0, 126.0]).unwrap();
    c.bench_function("iou_oriented", |bn| {
        bn.iter(|| iou_region(black_box(&a), black_box(&b), IouMode::Polygon))
    });
}

fn chem(c: &mut Bench) {
    let cfg = FingerprintConfig::default();
    c.bench_function("parse_smiles_aspirin", |bn| {
        bn.iter(|| parse_smiles(black_box("CC(=O)Oc1ccccc1C(=O)O")).unwrap())
    });
    let a = fingerprint(&parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap(), &cfg);
    let b = fingerprint(&parse_smiles("OC(=O)c1ccccc1O").unwrap(), &cfg);
    let mol = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
    c.bench_function("fingerprint_aspirin", |bn| {
        bn.iter(|| fingerprint(black_box(&mol), &cfg))
    });
    c.bench_function("tanimoto", |bn| {
        bn.iter(|| tanimoto(black_box(&a), black_box(&b)).unwrap())
    });
}

fn pipeline(c: &mut Bench) {
    let r = recorded(20, 3);
    let graph_doc = r
        .docs
        .iter()
        .max_by_key(|d| d.detections.len())
        .expect("non-empty batch");
    c.bench_function("parse_document", |bn| {
        bn.iter(|| {
            r.pipeline
                .parse_bytes(black_box(graph_doc.detections.as_bytes()))
                .unwrap()
        })
    });
    let truth = r.truth();
    let pairs: Vec<(EvalDocument, EvalDocument)> =
        truth.iter().map(|d| (d.clone(), d.clone())).collect();
    c.bench_function("score_corpus_20", |bn| {
        bn.iter(|| score_corpus(black_box(&pairs), Criterion::Hard, 0.5).unwrap())
    });
}

criterion_group!(benches, geometry, chem, pipeline);
criterion_main!(benches);
