use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::codec::{open, seal, Reader, Writer};
use crate::error::{Error, Result};

use super::{Background, Dataset, DatasetSpec, Split, Splits, WordSample, NUM_LETTERS};

pub const MAGIC: &[u8; 8] = b"DSTRUCT1";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.tsv";

pub fn encode_dataset(d: &Dataset) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(FORMAT_VERSION);
    w.u32(d.samples.len() as u32);
    w.u32(d.word_len as u32);
    w.u32(d.height as u32);
    w.u32(d.width as u32);
    for s in &d.samples {
        s.labels.iter().for_each(|&l| w.u8(l));
        s.images.iter().for_each(|&v| w.f32(v));
    }
    seal(MAGIC, &w.buf)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(open(MAGIC, "DSTRUCT1", bytes)?);
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = r.u32()? as usize;
    let word_len = r.u32()? as usize;
    let height = r.u32()? as usize;
    let width = r.u32()? as usize;
    let pixels = word_len * height * width;
    if r.remaining() != count * (word_len + 4 * pixels) {
        return Err(Error::Truncated);
    }
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let labels = r.take(word_len)?.to_vec();
        if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l as usize > NUM_LETTERS) {
            return Err(Error::InvalidArgument(format!("label {bad} outside 1..=26")));
        }
        let images = (0..pixels).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        samples.push(WordSample { labels, images });
    }
    Ok(Dataset {
        word_len,
        height,
        width,
        samples,
    })
}

pub fn write_dataset(path: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    fs::write(path, encode_dataset(d))?;
    Ok(())
}

/// The whole file is read and verified before a dataset is returned.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_dataset(&fs::read(path)?)
}

/// Tab-separated `key value` lines describing how a dataset was generated.
pub fn manifest_text(spec: &DatasetSpec) -> String {
    let mut out = String::from("key\tvalue\n");
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push('\t');
        out.push_str(&v);
        out.push('\n');
    };
    line("format", format!("DSTRUCT1 v{FORMAT_VERSION}"));
    line("seed", spec.seed.to_string());
    line("train", spec.train.to_string());
    line("val", spec.validation.to_string());
    line("test", spec.test.to_string());
    line("rotation", spec.rotation.to_string());
    line("scale_min", spec.scale_min.to_string());
    line("scale_max", spec.scale_max.to_string());
    line("translation", spec.translation.to_string());
    line("noise", spec.noise.to_string());
    line("background", spec.background.name().to_string());
    line("vocabulary", spec.vocabulary.join(","));
    out
}

pub fn parse_manifest(text: &str) -> Result<DatasetSpec> {
    let mut map = BTreeMap::new();
    for (i, l) in text.lines().enumerate().skip(1) {
        if l.trim().is_empty() {
            continue;
        }
        let (k, v) = l
            .split_once('\t')
            .ok_or_else(|| Error::InvalidArgument(format!("manifest line {} has no tab", i + 1)))?;
        map.insert(k, v);
    }
    let get = |k: &str| map.get(k).copied().ok_or_else(|| Error::InvalidArgument(format!("manifest lacks `{k}`")));
    let num = |k: &str| -> Result<f64> {
        get(k)?.parse().map_err(|_| Error::InvalidArgument(format!("manifest `{k}` is not a number")))
    };
    let int = |k: &str| -> Result<u64> {
        get(k)?.parse().map_err(|_| Error::InvalidArgument(format!("manifest `{k}` is not an integer")))
    };
    let spec = DatasetSpec {
        vocabulary: get("vocabulary")?.split(',').map(str::to_string).collect(),
        train: int("train")? as usize,
        validation: int("val")? as usize,
        test: int("test")? as usize,
        rotation: num("rotation")?,
        scale_min: num("scale_min")?,
        scale_max: num("scale_max")?,
        translation: num("translation")?,
        noise: num("noise")?,
        background: get("background")?.parse::<Background>()?,
        seed: int("seed")?,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn write_manifest(dir: impl AsRef<Path>, spec: &DatasetSpec) -> Result<()> {
    fs::write(dir.as_ref().join(MANIFEST), manifest_text(spec))?;
    Ok(())
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<DatasetSpec> {
    parse_manifest(&fs::read_to_string(dir.as_ref().join(MANIFEST))?)
}

fn split_path(dir: &Path, split: Split) -> std::path::PathBuf {
    dir.join(format!("{}.bin", split.name()))
}

/// Writes `train.bin`, `val.bin`, `test.bin` and the manifest into `dir`.
pub fn write_splits(dir: impl AsRef<Path>, splits: &Splits, spec: &DatasetSpec) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_dataset(split_path(dir, Split::Train), &splits.train)?;
    write_dataset(split_path(dir, Split::Validation), &splits.validation)?;
    write_dataset(split_path(dir, Split::Test), &splits.test)?;
    write_manifest(dir, spec)
}

pub fn read_splits(dir: impl AsRef<Path>) -> Result<Splits> {
    let dir = dir.as_ref();
    Ok(Splits {
        train: read_dataset(split_path(dir, Split::Train))?,
        validation: read_dataset(split_path(dir, Split::Validation))?,
        test: read_dataset(split_path(dir, Split::Test))?,
    })
}
