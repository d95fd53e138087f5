#![allow(dead_code)]

use dab_core::frontend::{parse_model, ProcessModel};
use dab_core::region::{domain_cutoff, CutoffReport};
use std::path::PathBuf;

/// Benchmarks with the process cutoff they are verified at and their
/// expected domain cutoff.
pub const BENCHMARKS: [(&str, usize, u32); 8] = [
    ("consortium", 3, 3),
    ("consortium-three", 4, 3),
    ("consortium-bcast", 3, 3),
    ("consortium-check", 5, 3),
    ("consortium-32bit", 3, 3),
    ("distreg", 2, 2),
    ("distreg-two", 2, 2),
    ("distreg-32bit", 2, 2),
];

pub const MUTANTS: [&str; 3] = ["consortium-buggy", "consortium-selfish", "distreg-buggy"];

pub fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../models/{name}.mer"))
}

pub fn source(name: &str) -> String {
    std::fs::read_to_string(model_path(name)).unwrap()
}

pub fn model(name: &str) -> ProcessModel {
    parse_model(&source(name)).unwrap()
}

pub fn cutoffs(m: &ProcessModel) -> Vec<CutoffReport> {
    domain_cutoff(m, m.safety.as_ref()).into_iter().map(|(_, r)| r.unwrap()).collect()
}
