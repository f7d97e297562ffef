//! One settings model for every command: the standard hyper-parameter
//! defaults, overridden by a key=value file, overridden by flags. Model
//! keys are unprefixed (`hidden_dim=200`); run settings are namespaced
//! (`train.beam=8`, `pretrain.epochs=5`), matching the extras a model
//! file carries.

use std::path::Path;

use nseg::encoders::ModelConfig;
use nseg::pretrainer::PretrainConfig;
use nseg::trainer::TrainConfig;
use nseg::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub pretrain: PretrainConfig,
}

impl Settings {
    /// Applies every `key=value` line of a settings file. Blank lines
    /// and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Usage(format!(
                    "settings line `{line}` is not key=value"
                )));
            };
            self.apply(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Applies one override; the prefix picks the settings group.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(k) = key.strip_prefix("train.") {
            return self.apply_train(k, value);
        }
        if let Some(k) = key.strip_prefix("pretrain.") {
            return self.apply_pretrain(k, value);
        }
        apply_model_key(&mut self.model, key, value)
    }

    fn apply_train(&mut self, key: &str, value: &str) -> Result<()> {
        let full = format!("train.{key}");
        let t = &mut self.train;
        match key {
            "beam" => t.beam = parse(&full, value)?,
            "margin" => t.margin = parse(&full, value)?,
            "alpha" => t.alpha = parse(&full, value)?,
            "lambda" => t.lambda = parse(&full, value)?,
            "dropout" => t.dropout = parse(&full, value)?,
            "singleton_unk" => t.singleton_unk = parse(&full, value)?,
            "epochs" => t.epochs = parse(&full, value)?,
            "seed" => t.seed = parse(&full, value)?,
            "dev_every" => t.dev_every = parse(&full, value)?,
            _ => return Err(Error::Usage(format!("unknown setting `{full}`"))),
        }
        Ok(())
    }

    fn apply_pretrain(&mut self, key: &str, value: &str) -> Result<()> {
        let full = format!("pretrain.{key}");
        let p = &mut self.pretrain;
        match key {
            "alpha" => p.alpha = parse(&full, value)?,
            "lambda" => p.lambda = parse(&full, value)?,
            "epochs" => p.epochs = parse(&full, value)?,
            "seed" => p.seed = parse(&full, value)?,
            "draws_per_epoch" => {
                let n: usize = parse(&full, value)?;
                p.draws_per_epoch = if n == 0 { None } else { Some(n) };
            }
            _ => return Err(Error::Usage(format!("unknown setting `{full}`"))),
        }
        Ok(())
    }

    /// The effective settings as a valid settings file.
    pub fn render(&self) -> String {
        let mut s = self.model.to_kv();
        for (k, v) in self.train_pairs().iter().chain(&self.pretrain_pairs()) {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    /// Training settings as namespaced pairs, also stored in model files.
    pub fn train_pairs(&self) -> Vec<(String, String)> {
        let t = &self.train;
        [
            ("beam", t.beam.to_string()),
            ("margin", t.margin.to_string()),
            ("alpha", t.alpha.to_string()),
            ("lambda", t.lambda.to_string()),
            ("dropout", t.dropout.to_string()),
            ("singleton_unk", t.singleton_unk.to_string()),
            ("epochs", t.epochs.to_string()),
            ("seed", t.seed.to_string()),
            ("dev_every", t.dev_every.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (format!("train.{k}"), v))
        .collect()
    }

    /// Pretraining settings as namespaced pairs; `draws_per_epoch=0`
    /// stands for the automatic per-source default.
    pub fn pretrain_pairs(&self) -> Vec<(String, String)> {
        let p = &self.pretrain;
        [
            ("alpha", p.alpha.to_string()),
            ("lambda", p.lambda.to_string()),
            ("epochs", p.epochs.to_string()),
            ("seed", p.seed.to_string()),
            (
                "draws_per_epoch",
                p.draws_per_epoch.unwrap_or(0).to_string(),
            ),
        ]
        .into_iter()
        .map(|(k, v)| (format!("pretrain.{k}"), v))
        .collect()
    }

    /// Takes the window-stack sizes from a pretrained model's
    /// configuration so transferred tensors line up; returns whether
    /// anything changed.
    pub fn adopt_stack(&mut self, pre: &ModelConfig) -> bool {
        let m = &mut self.model;
        let changed = (
            m.char_dim,
            m.bichar_dim,
            m.use_char_emb,
            m.use_bichar_emb,
            m.xc_dim,
            m.mlp_layers,
        ) != (
            pre.char_dim,
            pre.bichar_dim,
            pre.use_char_emb,
            pre.use_bichar_emb,
            pre.xc_dim,
            pre.mlp_layers,
        );
        m.char_dim = pre.char_dim;
        m.bichar_dim = pre.bichar_dim;
        m.use_char_emb = pre.use_char_emb;
        m.use_bichar_emb = pre.use_bichar_emb;
        m.xc_dim = pre.xc_dim;
        m.mlp_layers = pre.mlp_layers;
        changed
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Usage(format!("bad value for {key}: {e}")))
}

/// Patches one key into the canonical model-config text and reparses,
/// so values go through the same validation as a model file's config.
fn apply_model_key(cfg: &mut ModelConfig, key: &str, value: &str) -> Result<()> {
    let mut patched = String::new();
    let mut found = false;
    for line in cfg.to_kv().lines() {
        let (k, old) = line.split_once('=').expect("canonical config is key=value");
        if k == key {
            found = true;
            patched.push_str(&format!("{k}={value}\n"));
        } else {
            patched.push_str(&format!("{k}={old}\n"));
        }
    }
    if !found {
        return Err(Error::Usage(format!("unknown setting `{key}`")));
    }
    *cfg = ModelConfig::from_kv(&patched)?;
    Ok(())
}
