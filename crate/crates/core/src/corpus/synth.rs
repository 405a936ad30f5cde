//! Synthetic corpus generation with planted structure: per-designer style
//! vectors evolving by random-walk drift, a shared per-slot trend vector,
//! and looks embedded into feature space through a fixed random projection
//! plus Gaussian noise. The planted latents are returned so tests can use
//! them as ground-truth oracles.

use super::{split_corpus, Collection, Corpus, CorpusError, LookBlock, SeasonSlot};
use crate::tensor::Rng;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub designers: usize,
    pub seasons: usize,
    pub looks_min: usize,
    pub looks_max: usize,
    pub feature_dim: usize,
    pub style_dim: usize,
    /// Scale of the per-slot random-walk steps of both designer styles and
    /// the shared trend vector.
    pub drift: f64,
    /// Weight of the shared trend vector in each look's latent.
    pub trend_strength: f64,
    /// Standard deviation of per-look Gaussian noise in feature space.
    pub noise: f64,
    /// Probability that a designer skips a slot entirely.
    pub skip_prob: f64,
    pub split: (f64, f64, f64),
    pub year0: i32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            designers: 12,
            seasons: 16,
            looks_min: 4,
            looks_max: 12,
            feature_dim: 512,
            style_dim: 8,
            drift: 0.05,
            trend_strength: 0.5,
            noise: 0.1,
            skip_prob: 0.0,
            split: (0.7, 0.2, 0.1),
            year0: 2000,
            seed: 42,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), CorpusError> {
        if self.designers < 2 {
            return Err(CorpusError::Config(
                "designers must be at least 2 (evaluation needs negatives from other designers)"
                    .into(),
            ));
        }
        if self.seasons < 2 {
            return Err(CorpusError::Config("seasons must be at least 2".into()));
        }
        if self.looks_min == 0 || self.looks_min > self.looks_max {
            return Err(CorpusError::Config(format!(
                "looks range [{}, {}] is invalid",
                self.looks_min, self.looks_max
            )));
        }
        if self.style_dim == 0 || self.feature_dim < self.style_dim {
            return Err(CorpusError::Config(format!(
                "feature_dim {} must be at least style_dim {}",
                self.feature_dim, self.style_dim
            )));
        }
        if self.drift < 0.0 || self.noise < 0.0 || self.trend_strength < 0.0 {
            return Err(CorpusError::Config(
                "drift, noise and trend_strength must be nonnegative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.skip_prob) {
            return Err(CorpusError::Config("skip_prob must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Planted latent state behind a generated corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthGroundTruth {
    pub style_dim: usize,
    /// `styles[designer][t]` — the style vector at every slot, including
    /// slots the designer skipped.
    pub styles: Vec<Vec<Vec<f64>>>,
    /// `trend[t]` — the shared trend vector per slot.
    pub trend: Vec<Vec<f64>>,
}

/// Generates a corpus with planted designer-style and trend latents and
/// applies the configured train/val/test split. Deterministic per seed.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(Corpus, SynthGroundTruth), CorpusError> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed);
    let d_count = cfg.designers;
    let t_count = cfg.seasons;
    let scale = 1.0 / (cfg.style_dim as f64).sqrt();

    // Fixed random projection from style space into feature space.
    let projection: Vec<Vec<f64>> = (0..cfg.feature_dim)
        .map(|_| (0..cfg.style_dim).map(|_| rng.normal() * scale).collect())
        .collect();

    let mut styles: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(t_count); d_count];
    for designer_styles in styles.iter_mut() {
        designer_styles.push((0..cfg.style_dim).map(|_| rng.normal()).collect());
    }
    let mut trend: Vec<Vec<f64>> = Vec::with_capacity(t_count);
    trend.push((0..cfg.style_dim).map(|_| rng.normal()).collect());

    let mut collections = Vec::new();
    for t in 0..t_count {
        if t > 0 {
            let step: Vec<f64> = (0..cfg.style_dim).map(|_| rng.normal()).collect();
            let prev = &trend[t - 1];
            trend.push(
                prev.iter()
                    .zip(&step)
                    .map(|(p, s)| p + cfg.drift * s)
                    .collect(),
            );
            for designer_styles in styles.iter_mut() {
                let step: Vec<f64> = (0..cfg.style_dim).map(|_| rng.normal()).collect();
                let prev = &designer_styles[t - 1];
                designer_styles.push(
                    prev.iter()
                        .zip(&step)
                        .map(|(p, s)| p + cfg.drift * s)
                        .collect(),
                );
            }
        }
        for (d, designer_styles) in styles.iter().enumerate() {
            let skip = rng.uniform() < cfg.skip_prob;
            let k = rng.int_in(cfg.looks_min, cfg.looks_max);
            let latent: Vec<f64> = designer_styles[t]
                .iter()
                .zip(&trend[t])
                .map(|(s, g)| s + cfg.trend_strength * g)
                .collect();
            let base: Vec<f64> = projection
                .iter()
                .map(|row| row.iter().zip(&latent).map(|(p, l)| p * l).sum())
                .collect();
            let mut looks = Vec::with_capacity(k);
            for _ in 0..k {
                let look: Vec<f64> = if cfg.noise > 0.0 {
                    base.iter()
                        .map(|b| quantize(b + cfg.noise * rng.normal()))
                        .collect()
                } else {
                    base.iter().map(|b| quantize(*b)).collect()
                };
                looks.push(look);
            }
            if skip {
                continue;
            }
            collections.push(Collection {
                designer_id: d,
                slot: SeasonSlot::from_t(t, cfg.year0),
                split: super::Split::Train,
                looks: LookBlock::Memory(looks),
            });
        }
    }

    let designers = (0..d_count).map(|d| format!("atelier_{d:03}")).collect();
    let mut corpus = Corpus::new(designers, cfg.feature_dim, cfg.year0, collections)?;
    split_corpus(&mut corpus, cfg.split, &mut rng)?;
    Ok((
        corpus,
        SynthGroundTruth {
            style_dim: cfg.style_dim,
            styles,
            trend,
        },
    ))
}

/// Feature files store f32; quantizing at generation time keeps a generated
/// corpus bit-identical with its written-and-reloaded form.
fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

/// Writes the planted latents as tab-separated text. Values use the shortest
/// round-trip float representation, so reading the file back restores them
/// exactly.
pub fn write_ground_truth(gt: &SynthGroundTruth, path: &Path) -> Result<(), CorpusError> {
    let io = |e| CorpusError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    let mut emit = |line: String| {
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(io)
    };
    emit(format!("style_dim\t{}", gt.style_dim))?;
    for (d, per_t) in gt.styles.iter().enumerate() {
        for (t, style) in per_t.iter().enumerate() {
            let values: Vec<String> = style.iter().map(|v| format!("{v}")).collect();
            emit(format!("style\t{d}\t{t}\t{}", values.join("\t")))?;
        }
    }
    for (t, g) in gt.trend.iter().enumerate() {
        let values: Vec<String> = g.iter().map(|v| format!("{v}")).collect();
        emit(format!("trend\t{t}\t{}", values.join("\t")))?;
    }
    w.flush().map_err(io)
}

pub fn load_ground_truth(path: &Path) -> Result<SynthGroundTruth, CorpusError> {
    let io = |e| CorpusError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = File::open(path).map_err(io)?;
    let reader = BufReader::new(file);
    let mut style_dim = 0usize;
    let mut styles: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut trend: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| CorpusError::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[0] {
            "style_dim" => {
                style_dim = fields
                    .get(1)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err("bad style_dim".into()))?;
            }
            "style" => {
                let d: usize = fields
                    .get(1)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err("bad designer index".into()))?;
                let t: usize = fields
                    .get(2)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err("bad slot index".into()))?;
                let values: Vec<f64> = fields[3..]
                    .iter()
                    .map(|v| v.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| parse_err("bad style values".into()))?;
                if styles.len() <= d {
                    styles.resize(d + 1, Vec::new());
                }
                if styles[d].len() != t {
                    return Err(parse_err(format!(
                        "style rows out of order for designer {d}"
                    )));
                }
                styles[d].push(values);
            }
            "trend" => {
                let t: usize = fields
                    .get(1)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err("bad slot index".into()))?;
                let values: Vec<f64> = fields[2..]
                    .iter()
                    .map(|v| v.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| parse_err("bad trend values".into()))?;
                if trend.len() != t {
                    return Err(parse_err("trend rows out of order".into()));
                }
                trend.push(values);
            }
            other => return Err(parse_err(format!("unknown record {other:?}"))),
        }
    }
    Ok(SynthGroundTruth {
        style_dim,
        styles,
        trend,
    })
}
