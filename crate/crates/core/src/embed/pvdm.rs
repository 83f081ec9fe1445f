//! Paragraph Vector (Distributed Memory) trainer with negative sampling.
//!
//! For a window of size `w`, each position predicts the next word from the
//! mean of the document vector and the `w` preceding word vectors. Negative
//! sampling (unigram^0.75 noise) replaces the softmax. Training is
//! single-threaded and fully seeded, so identical seed + input gives
//! bitwise-identical output; callers parallelize across model runs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbedError, EmbeddingMatrix, FirmVector, ModelTag, PvdmParams, VectorData};
use crate::textprep::TokenizedDoc;

/// Unigram distribution exponent for the noise sampler.
const NOISE_EXPONENT: f64 = 0.75;
/// Logistic inputs are clipped to this magnitude before exponentiation.
const MAX_EXP: f64 = 30.0;

/// Training output: the document embedding matrix plus the mean loss per
/// epoch (useful as a convergence sanity check; the trainer itself only
/// requires the losses to stay finite).
#[derive(Debug, Clone)]
pub struct PvdmTrained {
    pub embeddings: EmbeddingMatrix,
    pub epoch_losses: Vec<f64>,
}

struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(word_counts: &[u64]) -> Self {
        let mut cumulative = Vec::with_capacity(word_counts.len());
        let mut acc = 0.0;
        for &c in word_counts {
            acc += (c as f64).powf(NOISE_EXPONENT);
            cumulative.push(acc);
        }
        NoiseTable { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let x = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x)
    }
}

fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-MAX_EXP, MAX_EXP);
    1.0 / (1.0 + (-x).exp())
}

/// `-ln(sigmoid(x))`, computed stably.
fn neg_log_sigmoid(x: f64) -> f64 {
    let x = x.clamp(-MAX_EXP, MAX_EXP);
    (1.0 + (-x).exp()).ln()
}

/// Train PV-DM document vectors over `docs`.
///
/// Every document must have at least `window + 1` tokens. The learning
/// rate decays linearly per epoch from its initial value. Document vectors
/// are unit-normalized on output only.
pub fn train_pvdm(docs: &[TokenizedDoc], params: &PvdmParams) -> Result<PvdmTrained, EmbedError> {
    params.validate()?;
    if docs.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    for doc in docs {
        if doc.tokens.len() < params.window + 1 {
            return Err(EmbedError::DocTooShort {
                cik: doc.cik,
                year: doc.year,
                tokens: doc.tokens.len(),
                required: params.window + 1,
            });
        }
    }

    // Word list in lexicographic order for deterministic indexing.
    let mut word_counts: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in docs {
        for token in &doc.tokens {
            *word_counts.entry(token).or_insert(0) += 1;
        }
    }
    let word_index: BTreeMap<&str, usize> = word_counts
        .keys()
        .enumerate()
        .map(|(i, &w)| (w, i))
        .collect();
    let counts: Vec<u64> = word_counts.values().copied().collect();
    let vocab_size = counts.len();
    let noise = NoiseTable::new(&counts);

    let indexed_docs: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.tokens.iter().map(|t| word_index[t.as_str()]).collect())
        .collect();

    let dim = params.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut init = |n: usize| -> Vec<f64> {
        (0..n * dim)
            .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
            .collect()
    };
    let mut doc_vecs = init(docs.len());
    let mut word_vecs = init(vocab_size);
    // Output (context-prediction) vectors start at zero, as in word2vec.
    let mut out_vecs = vec![0.0; vocab_size * dim];

    let window = params.window;
    let contributors = (window + 1) as f64;
    let mut hidden = vec![0.0; dim];
    let mut hidden_err = vec![0.0; dim];
    let mut epoch_losses = Vec::with_capacity(params.epochs);

    for epoch in 0..params.epochs {
        let alpha = params.learning_rate * (1.0 - epoch as f64 / params.epochs as f64);
        let mut loss_sum = 0.0;
        let mut positions = 0u64;

        for (doc_id, tokens) in indexed_docs.iter().enumerate() {
            for t in window..tokens.len() {
                let target = tokens[t];
                let context = &tokens[t - window..t];

                // h = mean of the document vector and the context words.
                hidden.copy_from_slice(&doc_vecs[doc_id * dim..(doc_id + 1) * dim]);
                for &w in context {
                    let row = &word_vecs[w * dim..(w + 1) * dim];
                    for (h, x) in hidden.iter_mut().zip(row) {
                        *h += x;
                    }
                }
                for h in hidden.iter_mut() {
                    *h /= contributors;
                }

                hidden_err.fill(0.0);
                let mut loss = 0.0;
                {
                    let mut step = |word: usize, label: f64| {
                        let row = &mut out_vecs[word * dim..(word + 1) * dim];
                        let score: f64 = hidden.iter().zip(row.iter()).map(|(h, o)| h * o).sum();
                        loss += if label > 0.5 {
                            neg_log_sigmoid(score)
                        } else {
                            neg_log_sigmoid(-score)
                        };
                        let grad = (label - sigmoid(score)) * alpha;
                        for ((e, o), h) in hidden_err.iter_mut().zip(row.iter_mut()).zip(&hidden) {
                            *e += grad * *o;
                            *o += grad * h;
                        }
                    };

                    step(target, 1.0);
                    if vocab_size > 1 {
                        for _ in 0..params.negative_samples {
                            // Redraw on collision so every position sees
                            // the same number of noise terms; epoch losses
                            // stay comparable.
                            let neg = loop {
                                let w = noise.sample(&mut rng);
                                if w != target {
                                    break w;
                                }
                            };
                            step(neg, 0.0);
                        }
                    }
                }

                // Apply the full hidden-layer error to every contributor,
                // as the reference distributed-memory implementations do
                // when the context is mean-composed.
                let doc_row = &mut doc_vecs[doc_id * dim..(doc_id + 1) * dim];
                for (x, e) in doc_row.iter_mut().zip(&hidden_err) {
                    *x += e;
                }
                for &w in context {
                    let row = &mut word_vecs[w * dim..(w + 1) * dim];
                    for (x, e) in row.iter_mut().zip(&hidden_err) {
                        *x += e;
                    }
                }

                loss_sum += loss;
                positions += 1;
            }
        }

        let mean_loss = loss_sum / positions as f64;
        if !mean_loss.is_finite() {
            return Err(EmbedError::Diverged { epoch: epoch + 1 });
        }
        epoch_losses.push(mean_loss);
    }

    let vectors: Result<Vec<FirmVector>, EmbedError> = docs
        .iter()
        .enumerate()
        .map(|(doc_id, doc)| {
            FirmVector::normalized(
                doc.cik,
                doc.year,
                ModelTag::Pvdm,
                VectorData::Dense(doc_vecs[doc_id * dim..(doc_id + 1) * dim].to_vec()),
                "trained document vector collapsed to zero",
            )
        })
        .collect();
    Ok(PvdmTrained {
        embeddings: EmbeddingMatrix::from_vectors(ModelTag::Pvdm, vectors?)?,
        epoch_losses,
    })
}
