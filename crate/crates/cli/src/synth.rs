//! Seeded synthetic corpora in the HotpotQA distractor layout.
//!
//! Three corpus shapes, each a 10-paragraph pool with 2 gold supporting
//! documents and 8 distractors:
//!
//! - `plain`: mixed-difficulty questions for end-to-end runs; distractors
//!   share varying amounts of vocabulary with the question, so retrieval
//!   sometimes misses a gold document.
//! - `lexical-bridge`: the second gold document covers every question term
//!   exactly once but is heavily diluted with filler, while a distractor
//!   repeats two question terms; dense similarity alone prefers the
//!   distractor, term matching recovers the gold document.
//! - `two-hop`: the second gold document shares no vocabulary with the
//!   question; its title appears only inside the first gold document's
//!   text, so only query reformulation can reach it.
//!
//! Every corpus ships with a scripted mock-generator table that returns
//! the gold answer exactly when both supporting documents are in the
//! prompt.
//!
//! Generation is a pure function of `(kind, count, seed)`.

use std::collections::BTreeSet;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use hopqa_core::{MockEntry, MockMode, MockScript};

const SYLLABLES: [&str; 20] = [
    "bral", "dorn", "fex", "grim", "hul", "jor", "kel", "lum", "mar", "nix", "oss", "pry", "quil",
    "rav", "sor", "tev", "ul", "vex", "wyn", "zar",
];

const NOISE_WORDS: [&str; 32] = [
    "meadow", "harvest", "lantern", "orchard", "timber", "granite", "willow", "ember", "saddle",
    "harbor", "anthem", "garland", "copper", "mill", "brook", "quarry", "archive", "parlor",
    "beacon", "cellar", "garden", "hollow", "spire", "market", "chapel", "foundry", "terrace",
    "grove", "summit", "canal", "bridge", "tower",
];

/// Which corpus shape to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    Plain,
    LexicalBridge,
    TwoHop,
}

impl std::str::FromStr for CorpusKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "plain" => Ok(CorpusKind::Plain),
            "lexical-bridge" | "lexical_bridge" => Ok(CorpusKind::LexicalBridge),
            "two-hop" | "two_hop" => Ok(CorpusKind::TwoHop),
            other => Err(format!(
                "unknown corpus kind `{other}` (expected plain, lexical-bridge or two-hop)"
            )),
        }
    }
}

/// A generated dataset plus its scripted mock answers.
pub struct SynthCorpus {
    pub records: Vec<Value>,
    pub mock: MockScript,
}

impl SynthCorpus {
    pub fn write(&self, dataset_path: &Path, mock_path: Option<&Path>) -> anyhow::Result<()> {
        let dataset = serde_json::to_string_pretty(&Value::Array(self.records.clone()))?;
        std::fs::write(dataset_path, dataset)?;
        if let Some(path) = mock_path {
            std::fs::write(path, serde_json::to_string_pretty(&self.mock)?)?;
        }
        Ok(())
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// A coined capitalized entity name, unique within `used`.
fn entity(rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    loop {
        let n = rng.gen_range(2..=3);
        let name: String = (0..n)
            .map(|_| SYLLABLES[rng.gen_range(0..SYLLABLES.len())])
            .collect();
        let name = capitalize(&name);
        if used.insert(name.clone()) {
            return name;
        }
    }
}

fn pick_distinct(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    let mut choices: Vec<&'static str> = NOISE_WORDS.to_vec();
    choices.shuffle(rng);
    choices.truncate(n);
    choices
}

fn record(
    id: &str,
    question: &str,
    answer: &str,
    qtype: &str,
    gold: [(String, Vec<String>); 2],
    mut distractors: Vec<(String, Vec<String>)>,
    rng: &mut ChaCha8Rng,
) -> (Value, MockEntry) {
    let supporting_titles = vec![gold[0].0.clone(), gold[1].0.clone()];
    let mut pool: Vec<(String, Vec<String>)> = gold.into_iter().collect();
    pool.append(&mut distractors);
    pool.shuffle(rng);
    let context: Vec<Value> = pool
        .iter()
        .map(|(title, sentences)| serde_json::json!([title, sentences]))
        .collect();
    let supporting: Vec<Value> = supporting_titles
        .iter()
        .map(|t| serde_json::json!([t, 0]))
        .collect();
    let value = serde_json::json!({
        "_id": id,
        "question": question,
        "answer": answer,
        "context": context,
        "supporting_facts": supporting,
        "type": qtype,
        "level": "synthetic",
    });
    let entry = MockEntry {
        raw: None,
        gold: Some(answer.to_string()),
        supporting_titles,
    };
    (value, entry)
}

fn plain_record(i: usize, rng: &mut ChaCha8Rng) -> (Value, MockEntry) {
    let mut used = BTreeSet::new();
    let ea = entity(rng, &mut used);
    let eb = entity(rng, &mut used);
    let ans = entity(rng, &mut used);
    let words = pick_distinct(rng, 6);
    let (wa, wb, wn) = (words[0], words[1], words[2]);
    let yes_no = rng.gen_bool(0.2);
    let mention_eb = rng.gen_bool(0.3);
    // Hard questions: the second gold document shares no vocabulary with
    // the question, so single-shot retrieval usually misses it.
    let hard_b = !yes_no && !mention_eb && rng.gen_bool(0.4);

    let question = if yes_no {
        format!("is {ea} associated with the {wb} circle of {eb}?")
    } else if mention_eb {
        format!("who founded {eb}, the keeper of the {wb} circle tied to {ea}?")
    } else {
        format!("who founded the keeper of the {wb} circle tied to {ea}?")
    };
    let answer = if yes_no { "yes".to_string() } else { ans.clone() };

    let gold_a = (
        ea.clone(),
        vec![
            format!("{ea} is a {wn} {wa} guild from the {} valley.", words[3]),
            format!("{ea} keeps close ties with the {wb} circle."),
        ],
    );
    let gold_b = (
        eb.clone(),
        if hard_b {
            vec![
                format!("{eb} stands far from public notice in the {} hills.", words[5]),
                format!("The founder of {eb} was {ans}."),
            ]
        } else {
            vec![
                format!("{eb} oversees the {wb} circle and its {} halls.", words[4]),
                if yes_no {
                    format!("{eb} has long been associated with {ea}.")
                } else {
                    format!("The founder of {eb} was {ans}.")
                },
            ]
        },
    );

    let mut distractors = Vec::with_capacity(8);
    for d in 0..8 {
        let ed = entity(rng, &mut used);
        let filler = pick_distinct(rng, 4);
        let overlap = rng.gen_range(0..=3);
        let mut body = format!(
            "{ed} is a {} {} association near the {} {}.",
            filler[0], filler[1], filler[2], filler[3]
        );
        // Some distractors lean hard on a question term, which makes them
        // competitive with the gold documents.
        if overlap >= 1 {
            body.push_str(&format!(" It hosts a {wb} {wb} pavilion."));
        }
        if overlap >= 2 {
            body.push_str(&format!(" Members study the {wa} craft."));
        }
        if overlap >= 3 {
            body.push_str(&format!(" Its {wb} archive mentions {ea}."));
        }
        distractors.push((ed, vec![body, format!("Locals call it plot number {d}.")]));
    }

    record(
        &format!("plain-{i:04}"),
        &question,
        &answer,
        if yes_no { "comparison" } else { "bridge" },
        [gold_a, gold_b],
        distractors,
        rng,
    )
}

fn lexical_bridge_record(i: usize, rng: &mut ChaCha8Rng) -> (Value, MockEntry) {
    let mut used = BTreeSet::new();
    let rare = entity(rng, &mut used).to_lowercase();
    let words = pick_distinct(rng, 5);
    let (w1, w2, w3) = (words[0], words[1], words[2]);
    let question = format!("which of the {w1} {w2} {w3} was {rare}");
    let answer = rare.clone();

    let gold_dense = (
        format!("{} {}", capitalize(w1), capitalize(w2)),
        vec![format!("{w1} {w2} {w3} {} {}", words[3], words[4])],
    );
    let filler_count = rng.gen_range(50..=70);
    let fillers: Vec<String> = (0..filler_count).map(|f| format!("q{i}f{f}")).collect();
    let gold_diluted = (
        capitalize(&rare),
        vec![format!("{rare} {w1} {w2} {w3} {}", fillers.join(" "))],
    );

    let mut distractors = Vec::with_capacity(8);
    let strong = entity(rng, &mut used);
    let repeats = rng.gen_range(15..=25);
    distractors.push((
        strong,
        vec![format!("{w1} {w2} ").repeat(repeats).trim().to_string()],
    ));
    for _ in 0..7 {
        let ed = entity(rng, &mut used);
        let filler = pick_distinct(rng, 6);
        let mut body = filler.join(" ");
        if rng.gen_bool(0.3) {
            body.push(' ');
            body.push_str(w3);
        }
        distractors.push((ed, vec![body]));
    }

    record(
        &format!("lexbridge-{i:04}"),
        &question,
        &answer,
        "bridge",
        [gold_dense, gold_diluted],
        distractors,
        rng,
    )
}

fn two_hop_record(i: usize, rng: &mut ChaCha8Rng) -> (Value, MockEntry) {
    let mut used = BTreeSet::new();
    let ea = entity(rng, &mut used);
    let eb = entity(rng, &mut used);
    let words = pick_distinct(rng, 4);
    let (w1, w2, w3, w4) = (words[0], words[1], words[2], words[3]);
    let title_a = format!("{ea} {}", capitalize(w4));
    let question = format!("what kind of {w2} is the {} {w4}", ea.to_lowercase());
    let answer = format!("{w1} {w2}");

    let gold_a = (
        title_a.clone(),
        vec![format!("The {ea} {} is a {w1} {w2} created by {eb}.", capitalize(w4))],
    );
    let gold_b = (
        eb.clone(),
        vec![format!("{eb} {eb} {eb} composed many {w3} pieces in a long career.")],
    );

    let mut distractors = Vec::with_capacity(8);
    for _ in 0..8 {
        let ed = entity(rng, &mut used);
        // Coined lowercase filler keeps distractors disjoint from the
        // question vocabulary, so only the bridge token can move hop 2.
        let filler: Vec<String> = (0..5)
            .map(|_| entity(rng, &mut used).to_lowercase())
            .collect();
        distractors.push((
            ed,
            vec![format!(
                "assorted unrelated prose regarding {} and {} beside {} {} {}",
                filler[0], filler[1], filler[2], filler[3], filler[4]
            )],
        ));
    }

    record(
        &format!("twohop-{i:04}"),
        &question,
        &answer,
        "bridge",
        [gold_a, gold_b],
        distractors,
        rng,
    )
}

/// Generates `count` questions of the given shape. Deterministic in
/// `(kind, count, seed)`.
pub fn generate(kind: CorpusKind, count: usize, seed: u64) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(count);
    let mut entries = std::collections::BTreeMap::new();
    for i in 0..count {
        let (value, entry) = match kind {
            CorpusKind::Plain => plain_record(i, &mut rng),
            CorpusKind::LexicalBridge => lexical_bridge_record(i, &mut rng),
            CorpusKind::TwoHop => two_hop_record(i, &mut rng),
        };
        let id = value["_id"].as_str().expect("synth records carry ids").to_string();
        records.push(value);
        entries.insert(id, entry);
    }
    SynthCorpus {
        records,
        mock: MockScript {
            mode: MockMode::GoldIfSupport,
            default: "no answer".into(),
            entries,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate(CorpusKind::Plain, 5, 9);
        let b = generate(CorpusKind::Plain, 5, 9);
        assert_eq!(
            serde_json::to_string(&a.records).unwrap(),
            serde_json::to_string(&b.records).unwrap()
        );
        assert_eq!(a.mock, b.mock);
    }

    #[test]
    fn records_are_canonical_distractor_examples() {
        for kind in [CorpusKind::Plain, CorpusKind::LexicalBridge, CorpusKind::TwoHop] {
            let corpus = generate(kind, 4, 3);
            for value in &corpus.records {
                assert_eq!(value["context"].as_array().unwrap().len(), 10);
                assert_eq!(value["supporting_facts"].as_array().unwrap().len(), 2);
            }
        }
    }

    #[test]
    fn mock_entries_cover_every_record() {
        let corpus = generate(CorpusKind::LexicalBridge, 6, 1);
        assert_eq!(corpus.mock.entries.len(), 6);
        for value in &corpus.records {
            let id = value["_id"].as_str().unwrap();
            let entry = &corpus.mock.entries[id];
            assert_eq!(entry.supporting_titles.len(), 2);
            assert_eq!(
                entry.gold.as_deref(),
                Some(value["answer"].as_str().unwrap())
            );
        }
    }
}
