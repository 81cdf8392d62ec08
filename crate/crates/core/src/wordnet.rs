//! Custom lexicon with noun hypernym taxonomy and two synset similarity
//! measures (shortest path and Wu-Palmer).
//!
//! Multiple taxonomy roots are joined under a virtual root so every pair of
//! synsets is connected. Only noun synsets participate in word similarity;
//! words whose synsets are all of another part of speech fall back to the
//! out-of-vocabulary rules.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Embedded default lexicon (a small noun taxonomy).
pub const LEXICON_WN: &str = include_str!("../resources/lexicon.wn");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pos {
    Noun,
    Verb,
    Adjective,
    Adverb,
}

impl FromStr for Pos {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "n" => Ok(Pos::Noun),
            "v" => Ok(Pos::Verb),
            "a" => Ok(Pos::Adjective),
            "r" => Ok(Pos::Adverb),
            other => Err(format!("unknown part of speech {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synset {
    pub id: String,
    pub pos: Pos,
    pub lemmas: Vec<String>,
    pub parents: Vec<String>,
}

/// Which similarity measure to use between synsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Path,
    #[default]
    WuPalmer,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Path => "path",
            Measure::WuPalmer => "wu-palmer",
        })
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "path" => Ok(Measure::Path),
            "wu-palmer" | "wu_palmer" | "wup" => Ok(Measure::WuPalmer),
            other => Err(format!(
                "unknown wordnet measure {other:?} (expected path or wu-palmer)"
            )),
        }
    }
}

/// Validated taxonomy with precomputed depths and ancestor sets.
#[derive(Debug, Clone)]
pub struct Lexicon {
    synsets: BTreeMap<String, Synset>,
    children: HashMap<String, Vec<String>>,
    roots: Vec<String>,
    depth: HashMap<String, u32>,
    /// Ancestors including the synset itself.
    ancestors: HashMap<String, BTreeSet<String>>,
    /// Lowercased lemma -> noun synset ids, sorted.
    noun_index: HashMap<String, Vec<String>>,
}

impl Lexicon {
    /// Parses `synset_id|pos|lemma1,...|parent1,...` lines. `#` comments and
    /// blank lines are skipped. The parent list may be empty (a root).
    /// Validates referential integrity and acyclicity.
    pub fn parse(src: &str, origin: &str) -> Result<Self> {
        let mut synsets: BTreeMap<String, Synset> = BTreeMap::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                file: origin.to_string(),
                line: i + 1,
                msg,
            };
            let fields: Vec<&str> = line.split('|').collect();
            if fields.len() != 4 {
                return Err(parse_err(format!(
                    "expected 4 `|`-separated fields, found {}",
                    fields.len()
                )));
            }
            let id = fields[0].trim();
            if id.is_empty() {
                return Err(parse_err("empty synset id".to_string()));
            }
            let pos = Pos::from_str(fields[1].trim()).map_err(parse_err)?;
            let lemmas: Vec<String> = fields[2]
                .split(',')
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect();
            if lemmas.is_empty() {
                return Err(parse_err("synset has no lemmas".to_string()));
            }
            let parents: Vec<String> = fields[3]
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(str::to_string)
                .collect();
            let synset = Synset {
                id: id.to_string(),
                pos,
                lemmas,
                parents,
            };
            if synsets.insert(id.to_string(), synset).is_some() {
                return Err(parse_err(format!("duplicate synset id {id:?}")));
            }
        }
        Self::build(synsets)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src, &path.display().to_string())
    }

    /// The embedded default lexicon.
    pub fn embedded() -> Self {
        Self::parse(LEXICON_WN, "lexicon.wn").expect("embedded lexicon is valid")
    }

    /// Builds from already-parsed synsets: referential integrity, cycle
    /// check, depths (longest path down from the roots), ancestor sets and the noun
    /// lemma index.
    pub fn build(synsets: BTreeMap<String, Synset>) -> Result<Self> {
        // Referential integrity.
        for s in synsets.values() {
            for p in &s.parents {
                if !synsets.contains_key(p) {
                    return Err(Error::DanglingParent {
                        child: s.id.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }

        // Kahn's algorithm over parent edges; leftovers form a cycle.
        let mut remaining_parents: HashMap<&str, usize> = synsets
            .values()
            .map(|s| (s.id.as_str(), s.parents.len()))
            .collect();
        let mut children: HashMap<String, Vec<String>> = HashMap::new();
        for s in synsets.values() {
            for p in &s.parents {
                children.entry(p.clone()).or_default().push(s.id.clone());
            }
        }
        for c in children.values_mut() {
            c.sort();
        }
        let mut queue: VecDeque<&str> = synsets
            .values()
            .filter(|s| s.parents.is_empty())
            .map(|s| s.id.as_str())
            .collect();
        let mut visited = 0usize;
        let mut topo: Vec<String> = Vec::new();
        while let Some(id) = queue.pop_front() {
            visited += 1;
            topo.push(id.to_string());
            if let Some(kids) = children.get(id) {
                for kid in kids {
                    let c = remaining_parents.get_mut(kid.as_str()).unwrap();
                    *c -= 1;
                    if *c == 0 {
                        queue.push_back(kid.as_str());
                    }
                }
            }
        }
        if visited != synsets.len() {
            let stuck = synsets
                .keys()
                .find(|id| remaining_parents[id.as_str()] > 0)
                .cloned()
                .unwrap_or_default();
            return Err(Error::CyclicTaxonomy(stuck));
        }

        let roots: Vec<String> = synsets
            .values()
            .filter(|s| s.parents.is_empty())
            .map(|s| s.id.clone())
            .collect();

        // Depth: real roots sit at depth 1 (children of the virtual root when
        // several exist); everything else is one below its *deepest* parent.
        // Longest-path depth keeps every ancestor at most as deep as its
        // descendants, which is what makes Wu-Palmer land in (0, 1] even when
        // a synset has both a shallow and a deep parent.
        let mut depth: HashMap<String, u32> = HashMap::new();
        for id in &topo {
            let d = synsets[id]
                .parents
                .iter()
                .map(|p| depth[p.as_str()])
                .max()
                .unwrap_or(0);
            depth.insert(id.clone(), d + 1);
        }

        // Ancestor sets (including self) in topological order.
        let mut ancestors: HashMap<String, BTreeSet<String>> = HashMap::new();
        for id in &topo {
            let mut set = BTreeSet::new();
            set.insert(id.clone());
            for p in &synsets[id].parents {
                set.extend(ancestors[p].iter().cloned());
            }
            ancestors.insert(id.clone(), set);
        }

        let mut noun_index: HashMap<String, Vec<String>> = HashMap::new();
        for s in synsets.values() {
            if s.pos == Pos::Noun {
                for lemma in &s.lemmas {
                    noun_index
                        .entry(lemma.clone())
                        .or_default()
                        .push(s.id.clone());
                }
            }
        }
        for ids in noun_index.values_mut() {
            ids.sort();
        }

        Ok(Lexicon {
            synsets,
            children,
            roots,
            depth,
            ancestors,
            noun_index,
        })
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn synset(&self, id: &str) -> Option<&Synset> {
        self.synsets.get(id)
    }

    pub fn roots(&self) -> &[String] {
        &self.roots
    }

    pub fn depth(&self, id: &str) -> Option<u32> {
        self.depth.get(id).copied()
    }

    /// Noun synsets containing the (lowercased) lemma.
    pub fn noun_synsets(&self, lemma: &str) -> &[String] {
        self.noun_index.get(lemma).map(Vec::as_slice).unwrap_or(&[])
    }

    fn check_id(&self, id: &str) -> Result<()> {
        if self.synsets.contains_key(id) {
            Ok(())
        } else {
            Err(Error::UnknownSynset(id.to_string()))
        }
    }

    /// Shortest hypernym-edge distance between two synsets, traversing edges
    /// in either direction and crossing the virtual root when the taxonomy
    /// has several real roots.
    pub fn edge_distance(&self, a: &str, b: &str) -> Result<u32> {
        self.check_id(a)?;
        self.check_id(b)?;
        if a == b {
            return Ok(0);
        }
        // BFS over Option<&str>: None is the virtual root.
        let multi_root = self.roots.len() > 1;
        let mut dist: HashMap<Option<&str>, u32> = HashMap::new();
        let mut queue: VecDeque<Option<&str>> = VecDeque::new();
        dist.insert(Some(a), 0);
        queue.push_back(Some(a));
        while let Some(node) = queue.pop_front() {
            let d = dist[&node];
            let mut neighbors: Vec<Option<&str>> = Vec::new();
            match node {
                Some(id) => {
                    let s = &self.synsets[id];
                    neighbors.extend(s.parents.iter().map(|p| Some(p.as_str())));
                    if let Some(kids) = self.children.get(id) {
                        neighbors.extend(kids.iter().map(|k| Some(k.as_str())));
                    }
                    if multi_root && s.parents.is_empty() {
                        neighbors.push(None);
                    }
                }
                None => neighbors.extend(self.roots.iter().map(|r| Some(r.as_str()))),
            }
            for nb in neighbors {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(nb) {
                    if nb == Some(b) {
                        return Ok(d + 1);
                    }
                    e.insert(d + 1);
                    queue.push_back(nb);
                }
            }
        }
        unreachable!("virtual root connects every synset")
    }

    /// `1 / (1 + d)` where `d` is the shortest hypernym-edge distance.
    pub fn path_similarity(&self, a: &str, b: &str) -> Result<f64> {
        Ok(1.0 / (1.0 + self.edge_distance(a, b)? as f64))
    }

    /// Deepest common ancestor; ties on depth break toward the smallest
    /// synset id. `None` when the only shared ancestor is the virtual root.
    pub fn lcs(&self, a: &str, b: &str) -> Result<Option<String>> {
        self.check_id(a)?;
        self.check_id(b)?;
        let common: Vec<&String> = self.ancestors[a].intersection(&self.ancestors[b]).collect();
        Ok(common
            .into_iter()
            .max_by(|x, y| {
                self.depth[x.as_str()]
                    .cmp(&self.depth[y.as_str()])
                    .then_with(|| y.cmp(x)) // smaller id wins on equal depth
            })
            .cloned())
    }

    /// Wu-Palmer similarity: `2 * depth(lcs) / (depth(a) + depth(b))` with
    /// real roots at depth 1. Disjoint taxonomies share only the virtual root
    /// (depth 0), scoring 0.
    pub fn wu_palmer(&self, a: &str, b: &str) -> Result<f64> {
        let lcs_depth = match self.lcs(a, b)? {
            Some(id) => self.depth[&id] as f64,
            None => 0.0,
        };
        let da = self.depth[a] as f64;
        let db = self.depth[b] as f64;
        Ok(2.0 * lcs_depth / (da + db))
    }

    pub fn synset_similarity(&self, a: &str, b: &str, measure: Measure) -> Result<f64> {
        match measure {
            Measure::Path => self.path_similarity(a, b),
            Measure::WuPalmer => self.wu_palmer(a, b),
        }
    }

    /// Maximum similarity over the words' noun synset pairs. A word with no
    /// noun synset is out of vocabulary: the pair scores 1.0 when the words
    /// are equal and 0.0 otherwise.
    pub fn word_similarity(&self, w1: &str, w2: &str, measure: Measure) -> f64 {
        let s1 = self.noun_synsets(w1);
        let s2 = self.noun_synsets(w2);
        if s1.is_empty() || s2.is_empty() {
            return if w1 == w2 { 1.0 } else { 0.0 };
        }
        let mut best = 0.0f64;
        for a in s1 {
            for b in s2 {
                let sim = self
                    .synset_similarity(a, b, measure)
                    .expect("indexed synsets exist");
                best = best.max(sim);
            }
        }
        best
    }

    /// Symmetric mean-of-max similarity over two documents' unique lemma
    /// sets. Returns the score and whether either side was empty (which
    /// forces 0.0 and warrants an empty-comparison warning downstream).
    pub fn doc_similarity(
        &self,
        a: &BTreeSet<String>,
        b: &BTreeSet<String>,
        measure: Measure,
    ) -> (f64, bool) {
        if a.is_empty() || b.is_empty() {
            return (0.0, true);
        }
        let a_words: Vec<&String> = a.iter().collect();
        let b_words: Vec<&String> = b.iter().collect();
        let mut sims = vec![vec![0.0f64; b_words.len()]; a_words.len()];
        for (i, wa) in a_words.iter().enumerate() {
            for (j, wb) in b_words.iter().enumerate() {
                sims[i][j] = self.word_similarity(wa, wb, measure);
            }
        }
        let mean_a: f64 = sims
            .iter()
            .map(|row| row.iter().cloned().fold(0.0f64, f64::max))
            .sum::<f64>()
            / a_words.len() as f64;
        let mean_b: f64 = (0..b_words.len())
            .map(|j| sims.iter().map(|row| row[j]).fold(0.0f64, f64::max))
            .sum::<f64>()
            / b_words.len() as f64;
        // Every per-word similarity is in [0, 1]; clamp summation rounding.
        (((mean_a + mean_b) / 2.0).clamp(0.0, 1.0), false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> Lexicon {
        Lexicon::embedded()
    }

    #[test]
    fn embedded_lexicon_parses() {
        let lex = toy();
        assert!(lex.len() >= 10);
        assert_eq!(lex.depth("n.entity"), Some(1));
        assert_eq!(lex.depth("n.animal"), Some(2));
        assert_eq!(lex.depth("n.dog"), Some(3));
    }

    #[test]
    fn rejects_malformed_lines() {
        let err = Lexicon::parse("n.a|n|alpha\n", "lex.wn").unwrap_err();
        assert!(err.to_string().contains("lex.wn:1"), "{err}");
        let err = Lexicon::parse("n.a|x|alpha|\n", "lex.wn").unwrap_err();
        assert!(err.to_string().contains("part of speech"), "{err}");
        let err = Lexicon::parse("n.a|n||\n", "lex.wn").unwrap_err();
        assert!(err.to_string().contains("no lemmas"), "{err}");
    }

    #[test]
    fn rejects_dangling_parent() {
        let err = Lexicon::parse("n.a|n|alpha|n.ghost\n", "lex.wn").unwrap_err();
        assert!(matches!(err, Error::DanglingParent { .. }), "{err}");
    }

    #[test]
    fn rejects_cycle() {
        let src = "n.a|n|alpha|n.b\nn.b|n|beta|n.a\n";
        let err = Lexicon::parse(src, "lex.wn").unwrap_err();
        assert!(matches!(err, Error::CyclicTaxonomy(_)), "{err}");
    }

    #[test]
    fn path_similarity_examples() {
        let lex = toy();
        assert_eq!(lex.path_similarity("n.dog", "n.dog").unwrap(), 1.0);
        let dc = lex.path_similarity("n.dog", "n.cat").unwrap();
        assert!((dc - 1.0 / 3.0).abs() < 1e-12);
        let de = lex.path_similarity("n.dog", "n.entity").unwrap();
        assert!((de - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn path_crosses_virtual_root_between_taxonomies() {
        let lex = toy();
        // n.dog (depth 3) to v.run (root): up to n.entity (2 edges), virtual
        // root (1), down to v.run (1) -> distance 4.
        assert_eq!(lex.edge_distance("n.dog", "v.run").unwrap(), 4);
    }

    #[test]
    fn wu_palmer_examples() {
        let lex = toy();
        assert_eq!(lex.wu_palmer("n.dog", "n.dog").unwrap(), 1.0);
        let dc = lex.wu_palmer("n.dog", "n.cat").unwrap();
        assert!((dc - 2.0 / 3.0).abs() < 1e-12);
        let da = lex.wu_palmer("n.dog", "n.animal").unwrap();
        assert!((da - 0.8).abs() < 1e-12);
    }

    #[test]
    fn wu_palmer_is_zero_across_disjoint_taxonomies() {
        let src = "n.a|n|alpha|\nn.b|n|beta|\n";
        let lex = Lexicon::parse(src, "t").unwrap();
        assert_eq!(lex.wu_palmer("n.a", "n.b").unwrap(), 0.0);
        // But the path measure still connects them through the virtual root.
        assert_eq!(lex.edge_distance("n.a", "n.b").unwrap(), 2);
    }

    #[test]
    fn lcs_tie_breaks_to_smallest_id() {
        // Diamond: d has parents b and c, both children of a, so b and c are
        // common ancestors of (d, e) at equal depth.
        let src = "\
n.a|n|a|
n.b|n|b|n.a
n.c|n|c|n.a
n.d|n|d|n.b,n.c
n.e|n|e|n.b,n.c
";
        let lex = Lexicon::parse(src, "t").unwrap();
        assert_eq!(lex.lcs("n.d", "n.e").unwrap().unwrap(), "n.b");
    }

    #[test]
    fn word_similarity_oov_rules() {
        let lex = toy();
        assert_eq!(
            lex.word_similarity("zzyzx", "zzyzx", Measure::WuPalmer),
            1.0
        );
        assert_eq!(lex.word_similarity("zzyzx", "dog", Measure::WuPalmer), 0.0);
        // "run" only has a verb synset, so it is OOV for similarity.
        assert_eq!(lex.word_similarity("run", "dog", Measure::WuPalmer), 0.0);
        assert_eq!(lex.word_similarity("run", "run", Measure::WuPalmer), 1.0);
    }

    #[test]
    fn word_similarity_takes_max_over_synsets() {
        let lex = toy();
        let dc = lex.word_similarity("dog", "cat", Measure::WuPalmer);
        assert!((dc - 2.0 / 3.0).abs() < 1e-12);
        // Shared synset lemmas score 1.0.
        assert_eq!(
            lex.word_similarity("table", "chart", Measure::WuPalmer),
            1.0
        );
    }

    #[test]
    fn doc_similarity_identical_docs() {
        let lex = toy();
        let a: BTreeSet<String> = ["dog", "figure", "zzyzx"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (sim, empty) = lex.doc_similarity(&a, &a, Measure::WuPalmer);
        assert_eq!(sim, 1.0);
        assert!(!empty);
    }

    #[test]
    fn doc_similarity_single_words() {
        let lex = toy();
        let a: BTreeSet<String> = std::iter::once("dog".to_string()).collect();
        let b: BTreeSet<String> = std::iter::once("cat".to_string()).collect();
        let (sim, _) = lex.doc_similarity(&a, &b, Measure::WuPalmer);
        assert!((sim - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn doc_similarity_empty_side() {
        let lex = toy();
        let a: BTreeSet<String> = std::iter::once("dog".to_string()).collect();
        let empty_set = BTreeSet::new();
        assert_eq!(
            lex.doc_similarity(&a, &empty_set, Measure::WuPalmer),
            (0.0, true)
        );
        assert_eq!(
            lex.doc_similarity(&empty_set, &a, Measure::Path),
            (0.0, true)
        );
        assert_eq!(
            lex.doc_similarity(&empty_set, &empty_set, Measure::Path),
            (0.0, true)
        );
    }

    #[test]
    fn doc_similarity_all_oov_distinct_is_zero() {
        let lex = toy();
        let a: BTreeSet<String> = ["qqq", "www"].iter().map(|s| s.to_string()).collect();
        let b: BTreeSet<String> = ["eee", "rrr"].iter().map(|s| s.to_string()).collect();
        assert_eq!(lex.doc_similarity(&a, &b, Measure::WuPalmer), (0.0, false));
    }

    /// Random single-rooted DAG: node i > 0 picks 1-2 parents among 0..i.
    fn random_taxonomy_src(n: usize, seed: u64) -> String {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut lines = String::new();
        for i in 0..n {
            let parents = if i == 0 {
                String::new()
            } else {
                let p1 = rng.gen_range(0..i);
                if i > 1 && rng.gen_bool(0.25) {
                    let p2 = rng.gen_range(0..i);
                    if p2 != p1 {
                        format!("s{p1:02},s{p2:02}")
                    } else {
                        format!("s{p1:02}")
                    }
                } else {
                    format!("s{p1:02}")
                }
            };
            lines.push_str(&format!("s{i:02}|n|w{i:02}|{parents}\n"));
        }
        lines
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn measures_are_symmetric_and_bounded(n in 2usize..16, seed in 0u64..500) {
            let lex = Lexicon::parse(&random_taxonomy_src(n, seed), "t").unwrap();
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            for _ in 0..10 {
                let a = format!("s{:02}", rng.gen_range(0..n));
                let b = format!("s{:02}", rng.gen_range(0..n));
                for m in [Measure::Path, Measure::WuPalmer] {
                    let ab = lex.synset_similarity(&a, &b, m).unwrap();
                    let ba = lex.synset_similarity(&b, &a, m).unwrap();
                    prop_assert_eq!(ab, ba);
                    prop_assert!(ab > 0.0 && ab <= 1.0, "{} not in (0,1]", ab);
                    let aa = lex.synset_similarity(&a, &a, m).unwrap();
                    prop_assert_eq!(aa, 1.0);
                }
            }
        }
    }
}
