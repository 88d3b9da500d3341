//! `balsa preprocess`: turn a clip manifest into a fused feature
//! table.
//!
//! Each manifest row names one submission: a breathing, cough, and
//! speech recording for one user. Every clip is resampled, trimmed,
//! normalized, converted to log-mel segments, and summarized into a
//! 128-value embedding; the three embeddings concatenate into one
//! 384-column feature row.
//!
//! A failed clip never aborts the batch. Failures are recorded in a
//! status log next to the feature table, successful rows are still
//! written, and the command exits nonzero so pipelines notice.

use std::path::{Path, PathBuf};

use balsa::audio::{embed_modality, fuse_modalities, mel_segments, preprocess, read_wav};
use balsa::dataset::{load_audio_manifest, save_tabular, Dataset, ManifestEntry};
use balsa::{AudioError, Modality, Sample};

use crate::error::CliError;
use crate::runs::{write_atomic, write_atomic_with};

#[derive(Debug, Clone)]
pub struct PreprocessOpts {
    pub manifest: PathBuf,
    pub out: PathBuf,
}

/// The status log lives next to the feature table: `features.csv`
/// gets `features.log`.
pub fn log_path_for(out: &Path) -> PathBuf {
    out.with_extension("log")
}

fn embed_clip(path: &Path, modality: Modality) -> Result<Vec<f64>, AudioError> {
    let clip = read_wav(path, modality)?;
    let clean = preprocess(&clip)?;
    let grid = mel_segments(&clean)?;
    let embedding = embed_modality(&grid)?;
    Ok(embedding.vector().to_vec())
}

fn embed_entry(entry: &ManifestEntry) -> Result<Vec<f64>, AudioError> {
    let slots = [
        (&entry.breathing, Modality::Breathing),
        (&entry.cough, Modality::Cough),
        (&entry.speech, Modality::Speech),
    ];
    let mut embeddings = Vec::with_capacity(3);
    for (path, modality) in slots {
        let vector = embed_clip(path, modality)?;
        embeddings.push(balsa::ModalityEmbedding::from_vector(vector)?);
    }
    fuse_modalities(
        Some(&embeddings[0]),
        Some(&embeddings[1]),
        Some(&embeddings[2]),
    )
}

pub fn run(opts: &PreprocessOpts) -> Result<(), CliError> {
    let entries = load_audio_manifest(&opts.manifest)?;
    if entries.is_empty() {
        return Err(balsa::DataError::Empty.into());
    }

    let mut samples = Vec::new();
    let mut log = String::from("id,status,detail\n");
    let mut failed = 0usize;
    for entry in &entries {
        match embed_entry(entry) {
            Ok(features) => {
                samples.push(Sample {
                    id: entry.id.clone(),
                    user_id: entry.user_id.clone(),
                    features,
                    label: entry.label,
                });
                log.push_str(&format!("{},ok,\n", csv_field(&entry.id)));
            }
            Err(err) => {
                failed += 1;
                log.push_str(&format!(
                    "{},failed,{}\n",
                    csv_field(&entry.id),
                    csv_field(&err.to_string())
                ));
            }
        }
    }

    // Successes are preserved even when some clips fail.
    if !samples.is_empty() {
        let data = Dataset::from_samples(samples)?;
        write_atomic_with(&opts.out, |tmp| Ok(save_tabular(&data, tmp)?))?;
    }
    let log_path = log_path_for(&opts.out);
    write_atomic(&log_path, log.as_bytes())?;

    if failed > 0 {
        return Err(CliError::PreprocessFailures {
            failed,
            total: entries.len(),
            log: log_path,
        });
    }
    println!(
        "embedded {} submissions to {}",
        entries.len(),
        opts.out.display()
    );
    Ok(())
}

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use balsa::audio::{write_wav, TARGET_SAMPLE_RATE};
    use balsa::dataset::{load_tabular, TabularSchema};
    use std::f64::consts::PI;
    use std::fs;

    /// 1.2 s tone, loud enough that nothing is trimmed.
    fn write_tone(path: &Path, freq: f64) {
        let n = (1.2 * TARGET_SAMPLE_RATE as f64) as usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| 0.6 * (2.0 * PI * freq * i as f64 / TARGET_SAMPLE_RATE as f64).sin())
            .collect();
        write_wav(path, &samples, TARGET_SAMPLE_RATE).unwrap();
    }

    fn write_manifest(dir: &Path, rows: &[(&str, &str, &str)]) -> PathBuf {
        let mut text = String::from("id,user_id,label,breathing,cough,speech\n");
        for (id, user, label) in rows {
            let clip = dir.join(format!("{id}.wav"));
            text.push_str(&format!(
                "{id},{user},{label},{c},{c},{c}\n",
                c = clip.display()
            ));
        }
        let path = dir.join("manifest.csv");
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn preprocess_writes_fused_rows_and_clean_log() {
        let dir = tempfile::tempdir().unwrap();
        write_tone(&dir.path().join("a.wav"), 440.0);
        write_tone(&dir.path().join("b.wav"), 880.0);
        let manifest = write_manifest(dir.path(), &[("a", "u1", "1"), ("b", "u2", "0")]);
        let out = dir.path().join("features.csv");
        run(&PreprocessOpts {
            manifest,
            out: out.clone(),
        })
        .unwrap();

        let data = load_tabular(&out, &TabularSchema::default()).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.feature_dim(), 384);
        let log = fs::read_to_string(dir.path().join("features.log")).unwrap();
        assert_eq!(log, "id,status,detail\na,ok,\nb,ok,\n");
    }

    #[test]
    fn failed_clip_is_logged_and_survivors_are_kept() {
        let dir = tempfile::tempdir().unwrap();
        write_tone(&dir.path().join("good.wav"), 440.0);
        // Too short to be usable.
        let short: Vec<f64> = vec![0.5; 1000];
        write_wav(&dir.path().join("bad.wav"), &short, TARGET_SAMPLE_RATE).unwrap();
        let manifest = write_manifest(dir.path(), &[("good", "u1", "1"), ("bad", "u2", "0")]);
        let out = dir.path().join("features.csv");
        let err = run(&PreprocessOpts {
            manifest,
            out: out.clone(),
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_DATA);

        let data = load_tabular(&out, &TabularSchema::default()).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data.samples()[0].id, "good");
        let log = fs::read_to_string(dir.path().join("features.log")).unwrap();
        assert!(log.contains("good,ok,"));
        assert!(log.contains("bad,failed,"));
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        write_tone(&dir.path().join("a.wav"), 523.25);
        let manifest = write_manifest(dir.path(), &[("a", "u1", "1")]);
        let out = dir.path().join("features.csv");
        let opts = PreprocessOpts {
            manifest,
            out: out.clone(),
        };
        run(&opts).unwrap();
        let first = fs::read(&out).unwrap();
        let first_log = fs::read(dir.path().join("features.log")).unwrap();
        run(&opts).unwrap();
        assert_eq!(fs::read(&out).unwrap(), first);
        assert_eq!(
            fs::read(dir.path().join("features.log")).unwrap(),
            first_log
        );
    }
}
