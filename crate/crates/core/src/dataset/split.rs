//! Class partitions and the seeded train/test/evaluation split.

use std::fs;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{load_letters, parse_idx, ClassLabel, DatasetError, LabeledImage, Source};
use crate::nn::rng;

/// Which digits the models are trained on (KN), which digits are held out as
/// novel (UN), and which letters form the far-out-of-distribution set (L).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassPartition {
    pub known: Vec<u8>,
    pub unknown: Vec<u8>,
    pub letters: Vec<char>,
}

impl ClassPartition {
    /// KN = {0,1,4,6,7,8,9}, UN = {2,3,5}, L = A..J without E.
    pub fn default_experiment() -> Self {
        Self {
            known: vec![0, 1, 4, 6, 7, 8, 9],
            unknown: vec![2, 3, 5],
            letters: vec!['A', 'B', 'C', 'D', 'F', 'G', 'H', 'I', 'J'],
        }
    }

    /// Every digit known and all ten letters as novel inputs.
    pub fn all_digits() -> Self {
        Self {
            known: (0..10).collect(),
            unknown: vec![],
            letters: ('A'..='J').collect(),
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::Partition(m));
        if self.known.is_empty() {
            return bad("no known classes".into());
        }
        let mut digits = self.known.clone();
        digits.extend(&self.unknown);
        if let Some(d) = digits.iter().find(|&&d| d > 9) {
            return bad(format!("{d} is not a digit"));
        }
        let n = digits.len();
        digits.sort_unstable();
        digits.dedup();
        if digits.len() != n {
            return bad("known and unknown digits overlap or repeat".into());
        }
        let mut letters = self.letters.clone();
        if let Some(c) = letters.iter().find(|c| !('A'..='J').contains(*c)) {
            return bad(format!("{c} is not a letter in A..J"));
        }
        letters.sort_unstable();
        letters.dedup();
        if letters.len() != self.letters.len() {
            return bad("letters repeat".into());
        }
        Ok(())
    }

    pub fn is_known(&self, label: ClassLabel) -> bool {
        matches!(label, ClassLabel::Digit(d) if self.known.contains(&d))
    }

    pub fn is_unknown(&self, label: ClassLabel) -> bool {
        matches!(label, ClassLabel::Digit(d) if self.unknown.contains(&d))
    }

    pub fn is_letter(&self, label: ClassLabel) -> bool {
        matches!(label, ClassLabel::Letter(c) if self.letters.contains(&c))
    }

    /// Position of a known digit in the classifier's output vector.
    pub fn known_index(&self, label: ClassLabel) -> Option<usize> {
        match label {
            ClassLabel::Digit(d) => self.known.iter().position(|&k| k == d),
            ClassLabel::Letter(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub test: usize,
    pub eval_known: usize,
    pub eval_unknown: usize,
    pub eval_letters: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            train: 30_000,
            test: 12_500,
            eval_known: 100,
            eval_unknown: 100,
            eval_letters: 100,
        }
    }
}

/// The raw image pools a split draws from.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub mnist_train: Vec<LabeledImage>,
    pub mnist_test: Vec<LabeledImage>,
    pub letters: Vec<LabeledImage>,
}

impl Corpus {
    /// Reads `<root>/mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte` and
    /// the letter folders under `<root>/notmnist_small`.
    pub fn load(root: &Path, letters: &[char]) -> Result<Self, DatasetError> {
        let mnist = root.join("mnist");
        let read = |name: &str| fs::read(mnist.join(name));
        let mnist_train = parse_idx(
            &read("train-images-idx3-ubyte")?,
            &read("train-labels-idx1-ubyte")?,
            Source::MnistTrain,
        )?;
        let mnist_test = parse_idx(
            &read("t10k-images-idx3-ubyte")?,
            &read("t10k-labels-idx1-ubyte")?,
            Source::MnistTest,
        )?;
        let letter_set = load_letters(&root.join("notmnist_small"), letters)?;
        if !letter_set.skipped.is_empty() {
            tracing::info!(skipped = letter_set.skipped.len(), "skipped unreadable letter images");
        }
        Ok(Self {
            mnist_train,
            mnist_test,
            letters: letter_set.images,
        })
    }

    fn pool(&self, source: Source) -> &[LabeledImage] {
        match source {
            Source::MnistTrain => &self.mnist_train,
            Source::MnistTest => &self.mnist_test,
            Source::Notmnist => &self.letters,
        }
    }

    fn get(&self, r: ImageRef) -> Result<&LabeledImage, DatasetError> {
        self.pool(r.source)
            .get(r.index)
            .ok_or_else(|| DatasetError::Partition(format!("manifest index {} out of range", r.index)))
    }
}

/// A position in one of the corpus pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    pub source: Source,
    pub index: usize,
}

/// Everything needed to rebuild a split exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub partition: ClassPartition,
    pub sizes: SplitSizes,
    pub train: Vec<ImageRef>,
    pub test: Vec<ImageRef>,
    pub eval_known: Vec<ImageRef>,
    pub eval_unknown: Vec<ImageRef>,
    pub eval_letters: Vec<ImageRef>,
}

impl SplitManifest {
    pub fn materialize(&self, corpus: &Corpus) -> Result<DatasetSplit, DatasetError> {
        let take = |refs: &[ImageRef]| -> Result<Vec<LabeledImage>, DatasetError> {
            refs.iter().map(|&r| corpus.get(r).cloned()).collect()
        };
        Ok(DatasetSplit {
            train: take(&self.train)?,
            test: take(&self.test)?,
            eval_known: take(&self.eval_known)?,
            eval_unknown: take(&self.eval_unknown)?,
            eval_letters: take(&self.eval_letters)?,
            manifest: self.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub manifest: SplitManifest,
    pub train: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
    pub eval_known: Vec<LabeledImage>,
    pub eval_unknown: Vec<LabeledImage>,
    pub eval_letters: Vec<LabeledImage>,
}

fn refs_where(corpus: &Corpus, source: Source, keep: impl Fn(ClassLabel) -> bool) -> Vec<ImageRef> {
    corpus
        .pool(source)
        .iter()
        .enumerate()
        .filter(|(_, im)| keep(im.label))
        .map(|(index, _)| ImageRef { source, index })
        .collect()
}

fn class_names<T: std::fmt::Display>(tag: &str, classes: &[T]) -> String {
    let list: Vec<String> = classes.iter().map(ToString::to_string).collect();
    format!("{tag}={{{}}}", list.join(","))
}

/// Draws `n` of `pool` without replacement; returns (drawn, remaining).
fn draw(
    pool: Vec<ImageRef>,
    n: usize,
    set: &'static str,
    classes: &str,
    rng: &mut rng::Rng,
) -> Result<(Vec<ImageRef>, Vec<ImageRef>), DatasetError> {
    if pool.len() < n {
        return Err(DatasetError::Insufficient {
            set,
            classes: classes.to_string(),
            needed: n,
            available: pool.len(),
        });
    }
    let picked = index::sample(rng, pool.len(), n).into_vec();
    let mut taken = vec![false; pool.len()];
    for &i in &picked {
        taken[i] = true;
    }
    let drawn = picked.iter().map(|&i| pool[i]).collect();
    let rest = pool
        .into_iter()
        .zip(taken)
        .filter_map(|(r, t)| (!t).then_some(r))
        .collect();
    Ok((drawn, rest))
}

/// Builds the experiment split from the corpus.
///
/// The evaluation sets come from the MNIST test file and the letter folders;
/// training images come from the MNIST train file. The test set is drawn from
/// every known-class image left over, since neither file alone holds enough
/// known-class images for the default sizes. All five sets are disjoint.
pub fn build_split(
    corpus: &Corpus,
    partition: &ClassPartition,
    sizes: SplitSizes,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    partition.validate()?;
    let mut rng = rng::derive(seed, "split");
    let kn = class_names("KN", &partition.known);
    let un = class_names("UN", &partition.unknown);
    let l = class_names("L", &partition.letters);

    let known_test = refs_where(corpus, Source::MnistTest, |c| partition.is_known(c));
    let (eval_known, known_test_rest) = draw(known_test, sizes.eval_known, "eval_known", &kn, &mut rng)?;
    let unknown_test = refs_where(corpus, Source::MnistTest, |c| partition.is_unknown(c));
    let (eval_unknown, _) = draw(unknown_test, sizes.eval_unknown, "eval_unknown", &un, &mut rng)?;
    let letters = refs_where(corpus, Source::Notmnist, |c| partition.is_letter(c));
    let (eval_letters, _) = draw(letters, sizes.eval_letters, "eval_letters", &l, &mut rng)?;

    let known_train = refs_where(corpus, Source::MnistTrain, |c| partition.is_known(c));
    let (train, mut leftover) = draw(known_train, sizes.train, "train", &kn, &mut rng)?;
    leftover.extend(known_test_rest);
    let (test, _) = draw(leftover, sizes.test, "test", &kn, &mut rng)?;

    SplitManifest {
        seed,
        partition: partition.clone(),
        sizes,
        train,
        test,
        eval_known,
        eval_unknown,
        eval_letters,
    }
    .materialize(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn synthetic(per_digit: usize, letters: usize) -> Corpus {
        let mk = |label, source, i: usize| {
            let mut px = vec![0u8; super::super::PIXELS];
            px[i % 784] = 255;
            LabeledImage::from_bytes(&px, label, source).unwrap()
        };
        let digits = |source| {
            (0..per_digit * 10)
                .map(|i| mk(ClassLabel::Digit((i % 10) as u8), source, i))
                .collect()
        };
        Corpus {
            mnist_train: digits(Source::MnistTrain),
            mnist_test: digits(Source::MnistTest),
            letters: (0..letters * 10)
                .map(|i| mk(ClassLabel::Letter((b'A' + (i % 10) as u8) as char), Source::Notmnist, i))
                .collect(),
        }
    }

    fn small() -> SplitSizes {
        SplitSizes {
            train: 300,
            test: 200,
            eval_known: 20,
            eval_unknown: 20,
            eval_letters: 20,
        }
    }

    #[test]
    fn partition_validation() {
        assert!(ClassPartition::default_experiment().validate().is_ok());
        assert!(ClassPartition::all_digits().validate().is_ok());
        let mut p = ClassPartition::default_experiment();
        p.unknown.push(0);
        assert!(p.validate().is_err());
        let mut p = ClassPartition::default_experiment();
        p.letters.push('K');
        assert!(p.validate().is_err());
    }

    #[test]
    fn sets_respect_partition_and_are_disjoint() {
        let corpus = synthetic(60, 5);
        let p = ClassPartition::default_experiment();
        let split = build_split(&corpus, &p, small(), 3).unwrap();
        assert!(split
            .train
            .iter()
            .chain(&split.test)
            .chain(&split.eval_known)
            .all(|i| p.is_known(i.label)));
        assert!(split.eval_unknown.iter().all(|i| p.is_unknown(i.label)));
        assert!(split.eval_letters.iter().all(|i| p.is_letter(i.label)));
        assert!(!split.eval_letters.iter().any(|i| i.label == ClassLabel::Letter('E')));
        assert!(split.train.iter().all(|i| i.source == Source::MnistTrain));
        assert!(split.eval_known.iter().all(|i| i.source == Source::MnistTest));
        let m = &split.manifest;
        let all: Vec<ImageRef> = [&m.train, &m.test, &m.eval_known, &m.eval_unknown, &m.eval_letters]
            .into_iter()
            .flatten()
            .copied()
            .collect();
        assert_eq!(all.len(), 300 + 200 + 60);
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), all.len());
    }

    #[test]
    fn seeded_and_reproducible_from_manifest() {
        let corpus = synthetic(60, 5);
        let p = ClassPartition::default_experiment();
        let a = build_split(&corpus, &p, small(), 9).unwrap();
        let b = build_split(&corpus, &p, small(), 9).unwrap();
        let c = build_split(&corpus, &p, small(), 10).unwrap();
        assert_eq!(a.manifest, b.manifest);
        assert_ne!(a.manifest.train, c.manifest.train);
        let json = serde_json::to_string(&a.manifest).unwrap();
        let back: SplitManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back.materialize(&corpus).unwrap().eval_letters, a.eval_letters);
    }

    #[test]
    fn insufficient_images_names_the_classes() {
        let corpus = synthetic(30, 5);
        let err = build_split(&corpus, &ClassPartition::default_experiment(), small(), 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("KN={0,1,4,6,7,8,9}"), "{msg}");
    }
}
