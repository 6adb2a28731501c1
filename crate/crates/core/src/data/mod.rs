//! Synthetic word-recognition data: procedural glyphs under random affine
//! perturbation and noise, plus the binary dataset format.

mod glyphs;
mod io;
mod render;

pub use glyphs::{glyph, GLYPH_SIZE};
pub use io::{
    decode_dataset, encode_dataset, manifest_text, parse_manifest, read_dataset, read_manifest, read_splits,
    write_dataset, write_manifest, write_splits, FORMAT_VERSION, MAGIC, MANIFEST,
};
pub use render::{render_glyph, Background, GlyphTransform, IMAGE_SIZE, UPSAMPLE};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learning::Sample;
use crate::tensor::TensorValue;

pub const NUM_LETTERS: usize = 26;

/// Built-in 50-word vocabulary of five-letter words.
pub const DEFAULT_VOCABULARY: [&str; 50] = [
    "about", "above", "actor", "adult", "after", "again", "agent", "alarm", "album", "alert",
    "alive", "angle", "apple", "arena", "avoid", "badge", "basic", "beach", "black", "blind",
    "board", "brain", "bread", "brick", "cabin", "candy", "chair", "chest", "civil", "clock",
    "cloud", "crowd", "dance", "drama", "eagle", "earth", "fable", "field", "flame", "fruit",
    "glove", "grape", "honey", "jelly", "knife", "lemon", "music", "night", "ocean", "zebra",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub vocabulary: Vec<String>,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    /// Rotation drawn from `[-rotation, rotation]` degrees.
    pub rotation: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Each axis drawn from `[-translation, translation]` pixels.
    pub translation: f64,
    pub noise: f64,
    pub background: Background,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            vocabulary: DEFAULT_VOCABULARY.iter().map(|w| w.to_string()).collect(),
            train: 1000,
            validation: 200,
            test: 200,
            rotation: 25.0,
            scale_min: 0.8,
            scale_max: 1.2,
            translation: 3.0,
            noise: 0.15,
            background: Background::Textured,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let Some(first) = self.vocabulary.first() else {
            return bad("vocabulary is empty".into());
        };
        for w in &self.vocabulary {
            if w.is_empty() || !w.bytes().all(|b| b.is_ascii_lowercase()) {
                return bad(format!("vocabulary word `{w}` is not lowercase a-z"));
            }
            if w.len() != first.len() {
                return bad(format!("vocabulary word `{w}` has length {}, expected {}", w.len(), first.len()));
            }
        }
        if !(self.rotation >= 0.0 && self.translation >= 0.0 && self.noise >= 0.0) {
            return bad("perturbation ranges must be nonnegative".into());
        }
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max && self.scale_max.is_finite()) {
            return bad(format!("scale range [{}, {}] is invalid", self.scale_min, self.scale_max));
        }
        Ok(())
    }

    pub fn word_len(&self) -> usize {
        self.vocabulary.first().map_or(0, |w| w.len())
    }
}

/// One rendered word: labels in `1..=26` and `word_len` row-major images.
#[derive(Debug, Clone, PartialEq)]
pub struct WordSample {
    pub labels: Vec<u8>,
    pub images: Vec<f32>,
}

impl WordSample {
    pub fn word(&self) -> String {
        self.labels.iter().map(|&l| (b'a' + l - 1) as char).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub word_len: usize,
    pub height: usize,
    pub width: usize,
    pub samples: Vec<WordSample>,
}

impl Dataset {
    pub fn empty(word_len: usize) -> Self {
        Self {
            word_len,
            height: IMAGE_SIZE,
            width: IMAGE_SIZE,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Training samples: `x` is `[word_len, H·W]`, labels shifted to 0-based.
    pub fn to_samples(&self) -> Vec<Sample> {
        let dim = self.height * self.width;
        self.samples
            .iter()
            .map(|s| Sample {
                x: TensorValue::new(vec![self.word_len, dim], s.images.iter().map(|&v| v as f64).collect())
                    .expect("image block matches the header"),
                y: s.labels.iter().map(|&l| l as usize - 1).collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "val",
            Split::Test => "test",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Validation => 1,
            Split::Test => 2,
        }
    }
}

/// Sample `index` of `split`, from its own ChaCha stream so samples can be
/// generated in any order.
pub fn generate_sample(spec: &DatasetSpec, split: Split, index: usize) -> Result<WordSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream((split.stream() << 48) | index as u64);
    let word = &spec.vocabulary[rng.gen_range(0..spec.vocabulary.len())];
    let mut images = Vec::with_capacity(word.len() * IMAGE_SIZE * IMAGE_SIZE);
    let mut labels = Vec::with_capacity(word.len());
    for c in word.chars() {
        let t = GlyphTransform {
            rotation: symmetric(&mut rng, spec.rotation),
            scale: if spec.scale_min == spec.scale_max {
                spec.scale_min
            } else {
                rng.gen_range(spec.scale_min..=spec.scale_max)
            },
            translation: (symmetric(&mut rng, spec.translation), symmetric(&mut rng, spec.translation)),
            noise: spec.noise,
            background: spec.background,
        };
        images.extend(render_glyph(c, &t, rng.gen())?);
        labels.push(c as u8 - b'a' + 1);
    }
    Ok(WordSample { labels, images })
}

fn symmetric(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    if half_width == 0.0 {
        0.0
    } else {
        rng.gen_range(-half_width..=half_width)
    }
}

pub fn generate_split(spec: &DatasetSpec, split: Split, count: usize) -> Result<Dataset> {
    spec.validate()?;
    let samples = (0..count)
        .into_par_iter()
        .map(|i| generate_sample(spec, split, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        word_len: spec.word_len(),
        height: IMAGE_SIZE,
        width: IMAGE_SIZE,
        samples,
    })
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<Splits> {
    Ok(Splits {
        train: generate_split(spec, Split::Train, spec.train)?,
        validation: generate_split(spec, Split::Validation, spec.validation)?,
        test: generate_split(spec, Split::Test, spec.test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetSpec {
        DatasetSpec {
            train: 12,
            validation: 4,
            test: 4,
            ..DatasetSpec::default()
        }
    }

    #[test]
    fn default_vocabulary_is_valid() {
        let spec = DatasetSpec::default();
        spec.validate().unwrap();
        assert_eq!((spec.vocabulary.len(), spec.word_len()), (50, 5));
        let mut v = spec.vocabulary.clone();
        v.sort();
        v.dedup();
        assert_eq!(v.len(), 50);
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(generate_dataset(&small()).unwrap(), generate_dataset(&small()).unwrap());
        let other = DatasetSpec { seed: 1, ..small() };
        assert_ne!(generate_dataset(&small()).unwrap().train, generate_dataset(&other).unwrap().train);
    }

    #[test]
    fn splits_use_distinct_streams() {
        let spec = DatasetSpec {
            train: 4,
            validation: 4,
            test: 4,
            ..DatasetSpec::default()
        };
        let s = generate_dataset(&spec).unwrap();
        assert_ne!(s.train.samples, s.validation.samples);
        assert_ne!(s.validation.samples, s.test.samples);
    }

    #[test]
    fn unperturbed_letters_render_identically() {
        let spec = DatasetSpec {
            rotation: 0.0,
            scale_min: 1.0,
            scale_max: 1.0,
            translation: 0.0,
            noise: 0.0,
            background: Background::Blank,
            ..small()
        };
        let d = generate_split(&spec, Split::Train, 30).unwrap();
        let px = IMAGE_SIZE * IMAGE_SIZE;
        let mut seen: std::collections::HashMap<u8, &[f32]> = Default::default();
        for s in &d.samples {
            for (i, &l) in s.labels.iter().enumerate() {
                let img = &s.images[i * px..(i + 1) * px];
                assert_eq!(*seen.entry(l).or_insert(img), img);
            }
        }
    }

    #[test]
    fn labels_spell_vocabulary_words_and_pixels_are_in_range() {
        let spec = small();
        let d = generate_dataset(&spec).unwrap();
        for s in d.train.samples.iter().chain(&d.validation.samples).chain(&d.test.samples) {
            assert!(spec.vocabulary.contains(&s.word()));
            assert!(s.images.iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(s.images.len(), 5 * IMAGE_SIZE * IMAGE_SIZE);
        }
    }

    #[test]
    fn samples_convert_to_zero_based_labels() {
        let d = generate_split(&small(), Split::Test, 3).unwrap();
        for (w, s) in d.samples.iter().zip(d.to_samples()) {
            assert_eq!(s.x.shape(), &[5, 784]);
            assert_eq!(s.y.iter().map(|&y| y as u8 + 1).collect::<Vec<_>>(), w.labels);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for f in [
            |s: &mut DatasetSpec| s.vocabulary.clear(),
            |s: &mut DatasetSpec| s.vocabulary.push("toolong".into()),
            |s: &mut DatasetSpec| s.vocabulary[0] = "Apple".into(),
            |s: &mut DatasetSpec| s.rotation = -1.0,
            |s: &mut DatasetSpec| s.scale_min = 2.0,
        ] {
            let mut s = DatasetSpec::default();
            f(&mut s);
            assert!(s.validate().is_err());
        }
    }
}
