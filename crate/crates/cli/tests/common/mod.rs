//! Disk fixtures for the CLI tests: a synthetic multi-year corpus whose
//! topic richness shrinks over time, written out as manifest + filings +
//! SIC tree + lexicon + config, ready for `prodiv run-all`.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOPIC_STEMS: [&str; 8] = [
    "velto", "brimar", "quozen", "dalpex", "mirvon", "sorbit", "galdra", "nuphel",
];
const WORD_TAILS: [&str; 10] = [
    "ane", "oste", "ine", "aris", "ulo", "ectra", "imo", "aque", "urn", "yne",
];

/// SIC code per topic: three major groups across two divisions.
pub const TOPIC_CODES: [u16; 8] = [2011, 2021, 2085, 3511, 3523, 3585, 7372, 7389];

/// Topic count per year, 2008 through 2017: richness shrinks 8 -> 4.
pub const TOPICS_PER_YEAR: [usize; 10] = [8, 8, 7, 7, 6, 6, 5, 5, 4, 4];
pub const FIRST_YEAR: i32 = 2008;
pub const FIRMS_PER_TOPIC: usize = 5;

pub fn topic_word(topic: usize, k: usize) -> String {
    format!("{}{}", TOPIC_STEMS[topic], WORD_TAILS[k % WORD_TAILS.len()])
}

/// Low-frequency word shared by adjacent topics `t` and `t + 1`, so
/// neighboring classes have a little cross-class similarity without any
/// word clearing the dictionary's document-frequency cap.
fn bridge_word(t: usize) -> String {
    format!("ponte{}", (b'a' + t as u8) as char)
}

/// Number of general-vocabulary words shared across all topics. Real
/// product descriptions mix topic terms into common business English;
/// without that mixture every prediction is trivially solvable from the
/// word context alone and the document vectors never learn anything.
const NOISE_BANK: usize = 600;
const NOISE_RATE: f64 = 0.4;

fn noise_word(i: usize) -> String {
    let letter = |n: usize| (b'a' + (n % 26) as u8) as char;
    format!("fill{}{}{}", letter(i / 676), letter(i / 26), letter(i))
}

fn sic_tree_csv() -> String {
    let mut out = String::from("code,industry_group,major_group,division\n");
    for &code in &TOPIC_CODES {
        let ig = code / 10;
        let mg = code / 100;
        let div = if mg < 40 { "D" } else { "I" };
        out.push_str(&format!("{code},{ig},{mg},{div}\n"));
    }
    out
}

fn noun_lexicon() -> String {
    let mut out = String::from("# synthetic topic lexicon\n");
    for topic in 0..8 {
        for k in 0..WORD_TAILS.len() {
            out.push_str(&topic_word(topic, k));
            out.push('\n');
        }
    }
    for t in 0..7 {
        out.push_str(&bridge_word(t));
        out.push('\n');
    }
    for i in 0..NOISE_BANK {
        out.push_str(&noise_word(i));
        out.push('\n');
    }
    out
}

fn filing_text(rng: &mut ChaCha8Rng, topic: usize, words_in_body: usize) -> String {
    let mut body: Vec<String> = (0..words_in_body)
        .map(|_| {
            if rng.random::<f64>() < NOISE_RATE {
                noise_word(rng.random_range(0..NOISE_BANK))
            } else {
                topic_word(topic, rng.random_range(0..WORD_TAILS.len()))
            }
        })
        .collect();
    for t in [topic.wrapping_sub(1), topic] {
        if t < 7 && rng.random::<f64>() < 0.4 {
            body.push(bridge_word(t));
            body.push(bridge_word(t));
        }
    }
    format!(
        "FORM 10-K\n\
         ITEM 1. BUSINESS\n\
         The company provides {} to customers in 3 markets.\n\
         ITEM 2. PROPERTIES\n\
         Leased offices.\n",
        body.join(" and ")
    )
}

pub struct Fixture {
    pub config: PathBuf,
    pub output: PathBuf,
}

/// Write the full 10-year corpus. `years` limits how many of the ten
/// years to materialize (10 for the acceptance run, fewer for quick
/// behavioral tests).
pub fn write_corpus(root: &Path, years: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF1D0);
    let filings_dir = root.join("filings");
    std::fs::create_dir_all(&filings_dir).unwrap();

    let mut manifest = String::from("cik,year,form_type,sic_code,text_path,prefiltered\n");
    for (offset, &topics) in TOPICS_PER_YEAR.iter().take(years).enumerate() {
        let year = FIRST_YEAR + offset as i32;
        for (topic, &code) in TOPIC_CODES.iter().enumerate().take(topics) {
            for firm in 0..FIRMS_PER_TOPIC {
                let cik = 1000 + topic as u64 * 10 + firm as u64;
                let name = format!("{cik}_{year}.txt");
                std::fs::write(filings_dir.join(&name), filing_text(&mut rng, topic, 120)).unwrap();
                manifest.push_str(&format!("{cik},{year},10-K,{code},filings/{name},1\n"));
            }
        }
    }
    std::fs::write(root.join("manifest.csv"), manifest).unwrap();
    std::fs::write(root.join("tree.csv"), sic_tree_csv()).unwrap();
    std::fs::write(root.join("nouns.txt"), noun_lexicon()).unwrap();

    let config = root.join("prodiv.ini");
    std::fs::write(
        &config,
        "manifest = manifest.csv\n\
         sic_tree = tree.csv\n\
         output_dir = out\n\
         noun_lexicon = nouns.txt\n\
         models = boolean,tfidf,pvdm,sic\n\
         q = 0,2,5\n\
         seed = 42\n\
         pvdm_dim = 16\n\
         pvdm_window = 8\n\
         pvdm_epochs = 20\n",
    )
    .unwrap();

    Fixture {
        config,
        output: root.join("out"),
    }
}

pub fn prodiv() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_prodiv"))
}
