//! Stratified down-sampling with largest-remainder quotas.
//!
//! `cargo run --example sampling`

use tcls::corpus::{apportion, label_distribution, stratified_sample, Split};

fn main() {
    println!("quotas for 10000 of [15398, 7712, 18046]: {:?}", apportion(&[15398, 7712, 18046], 10_000));

    let full = tcls::synth::corpus("covid", Split::Test, 42).unwrap();
    let sample = stratified_sample(&full, 800, 42).unwrap();
    println!("{} -> {} examples", full.len(), sample.len());
    for ((label, before), (_, after)) in label_distribution(&full).iter().zip(label_distribution(&sample).iter()) {
        println!("  {label:<9} {before:>5} -> {after:>4}");
    }
    assert_eq!(sample, stratified_sample(&full, 800, 42).unwrap(), "same seed, same sample");
}
