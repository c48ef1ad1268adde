use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_bigint::BigUint;
use powerq_core::magnus::{embed, unit_image_quotient};
use powerq_core::{Caps, Domain, FiniteQuotient, PrimeSeq, QuotientSpec, VerbalSeries, Word};

fn magnus_embedding(c: &mut Criterion) {
    let w = Word::parse("abABaabbAB", 2).unwrap();
    let mut group = c.benchmark_group("embed");
    for l in [4usize, 6, 8] {
        group.bench_with_input(BenchmarkId::new("F_5", l), &l, |b, &l| {
            b.iter(|| embed(black_box(&w), &Domain::prime(5), l).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("Z", l), &l, |b, &l| {
            b.iter(|| embed(black_box(&w), &Domain::Integers, l).unwrap())
        });
    }
    group.finish();
}

fn unit_quotient(c: &mut Criterion) {
    c.bench_function("unit quotient p=2 l=3", |b| {
        b.iter(|| unit_image_quotient(2, 2, black_box(3), 1_000_000).unwrap())
    });
}

fn reidemeister_schreier(c: &mut Criterion) {
    let caps = Caps::default();
    let spec = QuotientSpec::magnus_units(2, &BigUint::from(3u32), 3).unwrap();
    let q = FiniteQuotient::build(&spec, &caps).unwrap();
    let g = Word::parse("ab", 2).unwrap();
    let exponent = q.image_order(&g).unwrap() as u64;
    let z = q.lemma0_conjugates(&g, exponent, &caps).unwrap().conjugates;
    c.bench_function("reidemeister-schreier F_3 l=3", |b| {
        b.iter(|| q.reidemeister_schreier(black_box(&z)).unwrap())
    });
}

fn verbal_normal_form(c: &mut Criterion) {
    let caps = Caps::default();
    let series = VerbalSeries::build(&PrimeSeq::new(vec![2, 3]).unwrap(), 2, 2, &caps).unwrap();
    let w = Word::parse("abAbbaBBaabABa", 2).unwrap();
    c.bench_function("verbal normal form (2,3) d=2", |b| {
        b.iter(|| series.normal_form(2, black_box(&w)).unwrap())
    });
    c.bench_function("verbal order_mod (2,3) d=2", |b| {
        b.iter(|| series.order_mod(2, black_box(&w)).unwrap())
    });
}

criterion_group!(benches, magnus_embedding, unit_quotient, reidemeister_schreier, verbal_normal_form);
criterion_main!(benches);
