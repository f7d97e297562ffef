//! Versioned binary model files.
//!
//! One container serves both pretrained window networks and full
//! segmentor checkpoints; a role line in the config block tells them
//! apart so transfer can consume either end. All integers and floats
//! are little-endian, so files move across platforms. The exact byte
//! layout lives in docs/model-format.md.

use std::path::Path;

use crate::diffcore::ParamSet;
use crate::encoders::{param_specs, ModelConfig, ModelRole, ScoringModel, SoftmaxHead};
use crate::error::{Error, Result};
use crate::vocab::Vocab;

pub const MAGIC: [u8; 4] = *b"NSEG";
pub const VERSION: u32 = 1;

/// Config-block key prefixes reserved for run settings that ride along
/// with the model without shaping its parameter set.
const EXTRA_PREFIXES: [&str; 2] = ["train.", "pretrain."];

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u64(buf, s.len() as u64);
    buf.extend_from_slice(s.as_bytes());
}

fn put_tokens(buf: &mut Vec<u8>, tokens: &[String]) {
    put_u64(buf, tokens.len() as u64);
    for t in tokens {
        put_str(buf, t);
    }
}

pub(crate) fn to_bytes(model: &ScoringModel, extras: &[(String, String)]) -> Result<Vec<u8>> {
    for (k, _) in extras {
        if !EXTRA_PREFIXES.iter().any(|p| k.starts_with(p)) {
            return Err(Error::invalid_argument(format!(
                "extra config key `{k}` must start with one of {EXTRA_PREFIXES:?}"
            )));
        }
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    put_u32(&mut buf, VERSION);

    let mut text = format!("role={}\n", model.role);
    text.push_str(&model.cfg.to_kv());
    for (k, v) in extras {
        text.push_str(k);
        text.push('=');
        text.push_str(v);
        text.push('\n');
    }
    put_str(&mut buf, &text);

    put_tokens(&mut buf, model.chars.tokens());
    put_tokens(&mut buf, model.bigrams.tokens());
    put_tokens(&mut buf, model.words.tokens());
    let lengths: Vec<String> = (0..=model.cfg.length_cap).map(|l| l.to_string()).collect();
    put_tokens(&mut buf, &lengths);

    put_u64(&mut buf, model.heads.len() as u64);
    for head in &model.heads {
        put_str(&mut buf, &head.task);
        put_tokens(&mut buf, &head.labels);
    }

    put_u64(&mut buf, model.params.len() as u64);
    for (_, p) in model.params.iter() {
        put_str(&mut buf, &p.name);
        put_u64(&mut buf, p.shape.len() as u64);
        for &d in &p.shape {
            put_u64(&mut buf, d as u64);
        }
        for v in &p.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

/// Serializes the model, plus optional namespaced run settings, to
/// `path`. Reloading reproduces every tensor bit for bit.
pub fn save(model: &ScoringModel, path: impl AsRef<Path>, extras: &[(String, String)]) -> Result<()> {
    let bytes = to_bytes(model, extras)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Byte reader that reports which section ran dry.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    section: String,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Cursor<'a> {
        Cursor {
            buf,
            pos: 0,
            section: "header".to_string(),
        }
    }

    fn enter(&mut self, section: impl Into<String>) {
        self.section = section.into();
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::TruncatedTensor {
                tensor: self.section.clone(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Length-prefixed count, sanity-bounded so a corrupt prefix cannot
    /// request an absurd allocation.
    fn count(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > (self.buf.len() as u64) {
            return Err(Error::ModelFormat(format!(
                "{}: count {} exceeds file size",
                self.section, n
            )));
        }
        Ok(n as usize)
    }

    fn str(&mut self) -> Result<String> {
        let n = self.count()?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::ModelFormat(format!("{}: invalid UTF-8", self.section)))
    }

    fn tokens(&mut self) -> Result<Vec<String>> {
        let n = self.count()?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.str()?);
        }
        Ok(out)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(8 * n)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn parse_config(text: &str) -> Result<(ModelRole, ModelConfig, Vec<(String, String)>)> {
    let mut role = None;
    let mut extras = Vec::new();
    let mut model_lines = String::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::ModelFormat(format!(
                "config line `{line}` is not key=value"
            )));
        };
        if k == "role" {
            if role.is_some() {
                return Err(Error::ModelFormat("duplicate role line".into()));
            }
            role = Some(v.parse::<ModelRole>()?);
        } else if EXTRA_PREFIXES.iter().any(|p| k.starts_with(p)) {
            extras.push((k.to_string(), v.to_string()));
        } else {
            model_lines.push_str(line);
            model_lines.push('\n');
        }
    }
    let role = role.ok_or_else(|| Error::ModelFormat("config block lacks a role".into()))?;
    let cfg = ModelConfig::from_kv(&model_lines)?;
    Ok((role, cfg, extras))
}

pub(crate) fn from_bytes(bytes: &[u8]) -> Result<(ScoringModel, Vec<(String, String)>)> {
    let mut cur = Cursor::new(bytes);
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            found: magic.try_into().unwrap(),
        });
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: VERSION,
        });
    }

    cur.enter("config");
    let text = cur.str()?;
    let (role, cfg, extras) = parse_config(&text)?;

    cur.enter("vocab.chars");
    let chars = Vocab::from_tokens(cur.tokens()?)?;
    cur.enter("vocab.bigrams");
    let bigrams = Vocab::from_tokens(cur.tokens()?)?;
    cur.enter("vocab.words");
    let words = Vocab::from_tokens(cur.tokens()?)?;
    cur.enter("vocab.lengths");
    let lengths = cur.tokens()?;
    let expected: Vec<String> = (0..=cfg.length_cap).map(|l| l.to_string()).collect();
    if lengths != expected {
        return Err(Error::ModelFormat(format!(
            "length list has {} entries, config caps words at {}",
            lengths.len(),
            cfg.length_cap
        )));
    }

    cur.enter("heads");
    let n_heads = cur.count()?;
    let mut heads = Vec::with_capacity(n_heads);
    for _ in 0..n_heads {
        let task = cur.str()?;
        let labels = cur.tokens()?;
        heads.push(SoftmaxHead { task, labels });
    }

    let specs = param_specs(&cfg, role, chars.len(), bigrams.len(), words.len(), &heads)?;
    cur.enter("tensors");
    let n_tensors = cur.count()?;
    if n_tensors != specs.len() {
        return Err(Error::ModelFormat(format!(
            "{} tensors on disk, configuration implies {}",
            n_tensors,
            specs.len()
        )));
    }
    let mut params = ParamSet::new();
    for spec in &specs {
        cur.enter(spec.name.clone());
        let name = cur.str()?;
        if name != spec.name {
            return Err(Error::ModelFormat(format!(
                "expected tensor `{}`, found `{}`",
                spec.name, name
            )));
        }
        let rank = cur.count()?;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u64()? as usize);
        }
        if shape != spec.shape {
            return Err(Error::ModelFormat(format!(
                "tensor `{name}` has shape {shape:?}, expected {:?}",
                spec.shape
            )));
        }
        let values = cur.f64s(shape.iter().product())?;
        params.add(&spec.name, &spec.shape, values, spec.tunable)?;
    }
    if cur.pos != bytes.len() {
        return Err(Error::ModelFormat(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - cur.pos
        )));
    }

    let model = ScoringModel::from_parts(cfg, role, chars, bigrams, words, heads, params)?;
    Ok((model, extras))
}

/// Reads a model file, rebuilding the parameter set in canonical order
/// and validating it against what the configuration implies.
pub fn load(path: impl AsRef<Path>) -> Result<(ScoringModel, Vec<(String, String)>)> {
    let bytes = std::fs::read(path)?;
    from_bytes(&bytes)
}
