//! Seeded fixture builders shared by the benchmark targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use prodiv_core::embed::{FirmVector, ModelTag, VectorData};
use prodiv_core::simspace::ClassProfile;
use prodiv_core::textprep::TokenizedDoc;

/// Random valid class profile with `s` classes.
pub fn random_profile(seed: u64, s: usize) -> ClassProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts: Vec<u64> = (0..s).map(|_| rng.random_range(1..=50)).collect();
    let total: u64 = counts.iter().sum();
    let abundance: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let mut z = vec![0.0; s * s];
    for i in 0..s {
        z[i * s + i] = 1.0;
        for j in i + 1..s {
            let v = rng.random::<f64>();
            z[i * s + j] = v;
            z[j * s + i] = v;
        }
    }
    ClassProfile::new(2000, (0..s as u16).collect(), z, abundance).unwrap()
}

/// Random unit vectors of dimension `dim`.
pub fn random_vectors(seed: u64, n: usize, dim: usize) -> Vec<FirmVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let values: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
            FirmVector::normalized(
                i as u64 + 1,
                2000,
                ModelTag::Pvdm,
                VectorData::Dense(values),
                "bench",
            )
            .unwrap()
        })
        .collect()
}

/// Synthetic tokenized corpus over a `vocab`-word vocabulary.
pub fn random_corpus(
    seed: u64,
    docs: usize,
    tokens_per_doc: usize,
    vocab: usize,
) -> Vec<TokenizedDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let letter = |n: usize| (b'a' + (n % 26) as u8) as char;
    let words: Vec<String> = (0..vocab)
        .map(|i| format!("word{}{}{}", letter(i / 676), letter(i / 26), letter(i)))
        .collect();
    (0..docs)
        .map(|d| TokenizedDoc {
            cik: d as u64 + 1,
            year: 2000 + (d % 10) as i32,
            tokens: (0..tokens_per_doc)
                .map(|_| words[rng.random_range(0..vocab)].clone())
                .collect(),
        })
        .collect()
}

/// A realistic-size plain-text filing with business and risk sections.
pub fn synthetic_filing(paragraphs: usize) -> String {
    let sentence = "The company manufactures precision components and sells them through distribution partners across several regions. ";
    let block = sentence.repeat(12);
    let mut out = String::from("FORM 10-K\nTABLE OF CONTENTS\nItem 1. Business ... 2\nItem 2. Properties ... 9\n\nITEM 1. BUSINESS\n");
    for _ in 0..paragraphs {
        out.push_str(&block);
        out.push('\n');
    }
    out.push_str("ITEM 1A. RISK FACTORS\nCompetition could reduce margins.\n");
    out.push_str("ITEM 2. PROPERTIES\nLeased.\n");
    out
}
