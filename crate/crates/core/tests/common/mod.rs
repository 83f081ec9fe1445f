//! Shared fixtures and independent oracles for the integration suites.
//!
//! Everything here is deliberately written as naively as possible: direct
//! summation, pair enumeration, exact rational arithmetic. The oracles
//! must not share code paths with the implementations they check.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use prodiv_core::simspace::ClassProfile;
use prodiv_core::textprep::TokenizedDoc;

// ---------------------------------------------------------------------
// Synthetic filing fixture (100 documents, composition fixed by design)
// ---------------------------------------------------------------------

pub struct SyntheticFiling {
    pub cik: u64,
    pub raw: String,
    pub parseable_by_design: bool,
}

const SENTENCE_BANK: [&str; 12] = [
    "The company designs and manufactures precision components for industrial customers.",
    "Our products are sold through a network of distributors and direct sales personnel.",
    "We operate facilities in several states and own the majority of our equipment.",
    "The segment provides maintenance services under long term contracts.",
    "Demand for our products depends on conditions in the construction industry.",
    "We hold patents covering our core technology and license certain processes.",
    "Raw materials are purchased from multiple suppliers at market prices.",
    "Our research programs focus on new materials and improved production methods.",
    "The company markets consumer products under several brand names.",
    "International sales represent a growing share of total revenue.",
    "We compete on quality, delivery reliability, and price.",
    "Seasonal factors affect quarterly shipment volumes.",
];

fn paragraph(rng: &mut ChaCha8Rng, sentences: usize) -> String {
    (0..sentences)
        .map(|_| SENTENCE_BANK[rng.random_range(0..SENTENCE_BANK.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// 100 synthetic filings. By construction: 85 parse through the heading
/// grammar, 3 through the keyword fallback, and 12 fail (6 without any
/// Business section, 3 with keyword sections under 1000 characters, 3
/// that are tables of contents only).
pub fn synthetic_filings() -> Vec<SyntheticFiling> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1077_f11e);
    let mut filings = Vec::with_capacity(100);
    let mut cik = 1000;
    let mut push = |raw: String, parseable: bool, filings: &mut Vec<SyntheticFiling>| {
        cik += 7;
        filings.push(SyntheticFiling {
            cik,
            raw,
            parseable_by_design: parseable,
        });
    };

    // 60 standard filings with a table of contents, an ITEM 1 heading,
    // and trailing items. Half embed a Risk Factors section.
    for i in 0..60 {
        let body = paragraph(&mut rng, 18);
        let risk = if i % 2 == 0 {
            format!("ITEM 1A. RISK FACTORS\n{}\n", paragraph(&mut rng, 6))
        } else {
            String::new()
        };
        let raw = format!(
            "UNITED STATES SECURITIES AND EXCHANGE COMMISSION\n\
             FORM 10-K ANNUAL REPORT\n\
             TABLE OF CONTENTS\n\
             Item 1. Business ............ 2\n\
             Item 2. Properties .......... 8\n\
             Item 3. Legal Proceedings ... 9\n\
             \n\
             PART I\n\
             ITEM 1. BUSINESS\n\
             {body}\n\
             {risk}ITEM 2. PROPERTIES\n\
             {props}\n\
             ITEM 3. LEGAL PROCEEDINGS\nNone.\n",
            body = body,
            risk = risk,
            props = paragraph(&mut rng, 3),
        );
        push(raw, true, &mut filings);
    }

    // 15 with the PART I prefix style and sparse punctuation.
    for _ in 0..15 {
        let raw = format!(
            "annual report pursuant to section 13\n\
             PART I, ITEM 1: BUSINESS\n\
             {}\n\
             PART I, ITEM 2: PROPERTIES\n\
             {}\n",
            paragraph(&mut rng, 14),
            paragraph(&mut rng, 2),
        );
        push(raw, true, &mut filings);
    }

    // 10 with a bare "Item 1." heading, no BUSINESS label.
    for _ in 0..10 {
        let raw = format!(
            "FORM 10-K\n\
             Item 1.\n\
             {}\n\
             Item 2.\n\
             {}\n",
            paragraph(&mut rng, 12),
            paragraph(&mut rng, 2),
        );
        push(raw, true, &mut filings);
    }

    // 3 keyword-tier documents: a BUSINESS line with no item headings and
    // a body comfortably over 1000 characters.
    for _ in 0..3 {
        let raw = format!(
            "ANNUAL REPORT\n\
             BUSINESS\n\
             {}\n\
             SIGNATURES\nThe registrant has signed this report.\n",
            paragraph(&mut rng, 20),
        );
        push(raw, true, &mut filings);
    }

    // 6 with no Business section at all.
    for _ in 0..6 {
        let raw = format!(
            "FORM 10-K\nSELECTED FINANCIAL DATA\n{}\n",
            paragraph(&mut rng, 10),
        );
        push(raw, false, &mut filings);
    }

    // 3 keyword candidates under the 1000-character floor.
    for _ in 0..3 {
        let raw = format!(
            "FORM 10-K\nBUSINESS\n{}\nSIGNATURES\n",
            paragraph(&mut rng, 2),
        );
        push(raw, false, &mut filings);
    }

    // 3 stub documents: item headings with nothing between them.
    for _ in 0..3 {
        let raw = "FORM 10-K\n\
                   Item 1. Business\n\
                   Item 1A. Risk Factors\n\
                   Item 2. Properties\n"
            .to_string();
        push(raw, false, &mut filings);
    }

    assert_eq!(filings.len(), 100);
    filings
}

// ---------------------------------------------------------------------
// Random class profiles plus an exact-rational diversity oracle
// ---------------------------------------------------------------------

/// Build a random valid profile with `s` classes. Z entries are multiples
/// of 1/1000 so their f64 images convert back to rationals exactly.
pub fn random_profile(rng: &mut ChaCha8Rng, s: usize) -> ClassProfile {
    let counts: Vec<u64> = (0..s).map(|_| rng.random_range(1..=20)).collect();
    let total: u64 = counts.iter().sum();
    let abundance: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let mut z = vec![0.0; s * s];
    for i in 0..s {
        z[i * s + i] = 1.0;
        for j in i + 1..s {
            let v = f64::from(rng.random_range(0..=1000u32)) / 1000.0;
            z[i * s + j] = v;
            z[j * s + i] = v;
        }
    }
    ClassProfile::new(2000, (0..s as u16).collect(), z, abundance).unwrap()
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("profile entries are finite")
}

/// Direct-summation diversity oracle at extended precision: all sums and
/// powers with integer exponents run in exact rational arithmetic over the
/// exact binary rationals of the f64 inputs; only the final root (for
/// q = 5) and the conversion to f64 round.
pub fn oracle_q_diversity(profile: &ClassProfile, q: u32) -> f64 {
    let s = profile.size();
    let a: Vec<BigRational> = profile.abundance().iter().map(|&x| rational(x)).collect();
    let za: Vec<BigRational> = (0..s)
        .map(|i| {
            (0..s)
                .map(|j| rational(profile.z(i, j)) * &a[j])
                .sum::<BigRational>()
        })
        .collect();
    match q {
        0 => {
            let sum: BigRational = (0..s).map(|i| &a[i] * za[i].recip()).sum();
            sum.to_f64().expect("fits f64")
        }
        2 => {
            let sum: BigRational = (0..s).map(|i| &a[i] * &za[i]).sum();
            sum.recip().to_f64().expect("fits f64")
        }
        5 => {
            let sum: BigRational = (0..s)
                .map(|i| {
                    let sq = &za[i] * &za[i];
                    &a[i] * (&sq * &sq)
                })
                .sum();
            sum.to_f64().expect("fits f64").powf(-0.25)
        }
        other => panic!("oracle only supports q in {{0, 2, 5}}, got {other}"),
    }
}

// ---------------------------------------------------------------------
// Jacobi eigenvalue oracle (for the PCA cross-check)
// ---------------------------------------------------------------------

/// Classic cyclic Jacobi rotations on a symmetric matrix; returns the
/// eigenvalues in descending order.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(mut m: Vec<Vec<f64>>) -> Vec<f64> {
    let n = m.len();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[i][j] * m[i][j];
                }
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-18 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eigenvalues: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eigenvalues
}

// ---------------------------------------------------------------------
// Two-topic corpus for the PV-DM separation check
// ---------------------------------------------------------------------

const TOPIC_A: [&str; 12] = [
    "engine", "piston", "valve", "torque", "camshaft", "gearbox", "axle", "clutch", "crank",
    "cylinder", "flywheel", "manifold",
];
const TOPIC_B: [&str; 12] = [
    "grain", "wheat", "harvest", "silo", "tractor", "furrow", "barley", "meadow", "orchard",
    "pasture", "plough", "seedling",
];

/// 40 documents over two disjoint topic vocabularies, 20 per topic.
/// Returns the docs and the topic of each (by index).
pub fn two_topic_corpus(seed: u64, tokens_per_doc: usize) -> (Vec<TokenizedDoc>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(40);
    let mut topics = Vec::with_capacity(40);
    for i in 0..40u64 {
        let topic = (i % 2) as usize;
        let bank: &[&str] = if topic == 0 { &TOPIC_A } else { &TOPIC_B };
        let tokens: Vec<String> = (0..tokens_per_doc)
            .map(|_| bank[rng.random_range(0..bank.len())].to_string())
            .collect();
        docs.push(TokenizedDoc {
            cik: i + 1,
            year: 2000,
            tokens,
        });
        topics.push(topic);
    }
    (docs, topics)
}

/// Brute-force cosine separation check: mean within-topic cosine minus
/// mean between-topic cosine over all unordered pairs of unit vectors.
pub fn separation_margin(vectors: &[Vec<f64>], topics: &[usize]) -> f64 {
    let mut within = (0.0, 0u64);
    let mut between = (0.0, 0u64);
    for i in 0..vectors.len() {
        for j in (i + 1)..vectors.len() {
            let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
            if topics[i] == topics[j] {
                within.0 += dot;
                within.1 += 1;
            } else {
                between.0 += dot;
                between.1 += 1;
            }
        }
    }
    within.0 / within.1 as f64 - between.0 / between.1 as f64
}

// ---------------------------------------------------------------------
// Analytic t-test p-value (cross-check oracle for the permutation test)
// ---------------------------------------------------------------------

pub fn analytic_t_pvalue(r: f64, n: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    if (1.0 - r * r).abs() < 1e-15 {
        return 0.0;
    }
    let dof = (n - 2) as f64;
    let t = r * (dof / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, dof).unwrap();
    2.0 * (1.0 - dist.cdf(t.abs()))
}
