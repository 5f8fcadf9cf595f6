//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key must be known and may
//! appear once; command-line flags override file values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use spheretopic::metrics::MetricsConfig;
use spheretopic::TrainConfig;

/// Everything a command may need: training hyperparameters, inputs, outputs
/// and metric settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub embeddings: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub min_count: u32,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            embeddings: None,
            vocab: None,
            out_dir: None,
            labels: None,
            min_count: 5,
            metrics: MetricsConfig::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "num_topics",
    "latent_dim",
    "kappa",
    "lambda",
    "epochs",
    "pretrain_epochs",
    "learning_rate",
    "batch_size",
    "seed",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "grad_check_tolerance",
    "attention_dim",
    "encoder_hidden",
    "decoder_hidden",
    "attention_content_only",
    "kmeans_max_iters",
    "embeddings",
    "vocab",
    "out_dir",
    "labels",
    "min_count",
    "top_m",
    "diversity_m",
    "window",
];

/// Splits a config file into key/value pairs.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {line_no}: expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(format!("line {line_no}: unknown key `{key}`"));
        }
        if value.is_empty() {
            return Err(format!("line {line_no}: `{key}` has no value"));
        }
        if out.insert(key.to_owned(), value.to_owned()).is_some() {
            return Err(format!("line {line_no}: `{key}` is set twice"));
        }
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("`{key}`: cannot parse `{value}`"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>, String> {
    value
        .split(',')
        .map(|v| parse(key, v.trim()))
        .collect()
}

impl RunConfig {
    /// Sets one key; the key must be in [`KEYS`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.train;
        match key {
            "num_topics" => t.num_topics = parse(key, value)?,
            "latent_dim" => t.latent_dim = parse(key, value)?,
            "kappa" => t.kappa = parse(key, value)?,
            "lambda" => t.lambda = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "pretrain_epochs" => t.pretrain_epochs = parse(key, value)?,
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "adam_beta1" => t.adam_beta1 = parse(key, value)?,
            "adam_beta2" => t.adam_beta2 = parse(key, value)?,
            "adam_epsilon" => t.adam_epsilon = parse(key, value)?,
            "grad_check_tolerance" => t.grad_check_tolerance = parse(key, value)?,
            "attention_dim" => t.attention_dim = parse(key, value)?,
            "encoder_hidden" => t.encoder_hidden = parse_list(key, value)?,
            "decoder_hidden" => t.decoder_hidden = parse_list(key, value)?,
            "attention_content_only" => t.attention_content_only = parse(key, value)?,
            "kmeans_max_iters" => t.kmeans_max_iters = parse(key, value)?,
            "embeddings" => self.embeddings = Some(value.into()),
            "vocab" => self.vocab = Some(value.into()),
            "out_dir" => self.out_dir = Some(value.into()),
            "labels" => self.labels = Some(value.into()),
            "min_count" => self.min_count = parse(key, value)?,
            "top_m" => self.metrics.m = parse(key, value)?,
            "diversity_m" => self.metrics.diversity_m = parse(key, value)?,
            "window" => self.metrics.window = parse(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, String> {
        let mut config = RunConfig::default();
        for (key, value) in parse_pairs(text)? {
            config.set(&key, &value)?;
        }
        Ok(config)
    }

    /// The effective configuration in the file format, one key per line.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut entries: Vec<(&str, Option<String>)> = vec![
            ("num_topics", Some(t.num_topics.to_string())),
            ("latent_dim", Some(t.latent_dim.to_string())),
            ("kappa", Some(t.kappa.to_string())),
            ("lambda", Some(t.lambda.to_string())),
            ("epochs", Some(t.epochs.to_string())),
            ("pretrain_epochs", Some(t.pretrain_epochs.to_string())),
            ("learning_rate", Some(t.learning_rate.to_string())),
            ("batch_size", Some(t.batch_size.to_string())),
            ("seed", Some(t.seed.to_string())),
            ("adam_beta1", Some(t.adam_beta1.to_string())),
            ("adam_beta2", Some(t.adam_beta2.to_string())),
            ("adam_epsilon", Some(t.adam_epsilon.to_string())),
            ("grad_check_tolerance", Some(t.grad_check_tolerance.to_string())),
            ("attention_dim", Some(t.attention_dim.to_string())),
            ("encoder_hidden", Some(list(&t.encoder_hidden))),
            ("decoder_hidden", Some(list(&t.decoder_hidden))),
            ("attention_content_only", Some(t.attention_content_only.to_string())),
            ("kmeans_max_iters", Some(t.kmeans_max_iters.to_string())),
            ("min_count", Some(self.min_count.to_string())),
            ("top_m", Some(self.metrics.m.to_string())),
            ("diversity_m", Some(self.metrics.diversity_m.to_string())),
            ("window", Some(self.metrics.window.to_string())),
        ];
        entries.push(("embeddings", path(&self.embeddings)));
        entries.push(("vocab", path(&self.vocab)));
        entries.push(("out_dir", path(&self.out_dir)));
        entries.push(("labels", path(&self.labels)));
        let mut out = String::new();
        for (key, value) in entries {
            if let Some(value) = value {
                writeln!(out, "{key} = {value}").expect("writing to a String");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blank_lines_and_values() {
        let c = RunConfig::from_text(
            "# run\n\nnum_topics = 7   # trailing\nlambda=0\nencoder_hidden = 8, 9\nembeddings = a.bin\n",
        )
        .unwrap();
        assert_eq!(c.train.num_topics, 7);
        assert_eq!(c.train.lambda, 0.0);
        assert_eq!(c.train.encoder_hidden, vec![8, 9]);
        assert_eq!(c.embeddings, Some(PathBuf::from("a.bin")));
        assert_eq!(c.train.kappa, 10.0);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        assert!(RunConfig::from_text("topics = 3").unwrap_err().contains("unknown key"));
        assert!(RunConfig::from_text("seed = 1\nseed = 2").unwrap_err().contains("twice"));
        assert!(RunConfig::from_text("seed 1").is_err());
        assert!(RunConfig::from_text("seed = x").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.train.seed = 7;
        c.labels = Some("l.tsv".into());
        assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
    }
}
