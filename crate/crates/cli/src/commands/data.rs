use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use leakcheck_core::embedding::{import_csv, manifest_path_for, read_embedding_set, toy_extract, write_embedding_set};
use leakcheck_core::{fsio, EmbeddingSet, Error as CoreError, ManifestRecord};

use super::{io_out, stem};
use crate::args::{ExtractArgs, IngestArgs};
use crate::exit::{CliError, CliResult};

pub fn cmd_ingest(args: &IngestArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut set: EmbeddingSet = import_csv(&args.csv, &args.manifest)?;
    set = set.with_dataset_id(stem(&args.out));
    if !args.no_normalize {
        set = set.normalize()?;
    }
    write_embedding_set(&set, &args.out)?;
    writeln!(
        out,
        "wrote {} rows of dim {} to {} (normalized: {})",
        set.count(),
        set.dim(),
        args.out.display(),
        set.is_normalized()
    )
    .map_err(io_out)
}

/// Image paths as listed, plus each resolved against the list's directory.
fn read_image_list(list: &Path) -> CliResult<Vec<(String, PathBuf)>> {
    let text = String::from_utf8(fsio::read(list)?)
        .map_err(|_| CoreError::Parse(format!("{} is not UTF-8", list.display())))?;
    let base = list.parent().unwrap_or(Path::new("."));
    let images: Vec<_> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| (l.to_owned(), base.join(l)))
        .collect();
    if images.is_empty() {
        return Err(CoreError::EmptyInput.into());
    }
    Ok(images)
}

fn manifest(images: &[(String, PathBuf)]) -> Vec<ManifestRecord> {
    images.iter().enumerate().map(|(i, (p, _))| ManifestRecord::new(i, p.clone())).collect()
}

pub fn cmd_extract(args: &ExtractArgs, out: &mut dyn Write) -> CliResult<()> {
    let images = read_image_list(&args.images)?;
    let id = stem(&args.out);
    let set = match &args.command {
        None => toy_set(&images, &id, args.dim, args.seed)?,
        Some(cmd) => external_set(cmd, &images, &args.out)?.with_dataset_id(id.clone()),
    };
    let set = set.normalize()?;
    write_embedding_set(&set, &args.out)?;
    writeln!(out, "extracted {} embeddings of dim {} to {}", set.count(), set.dim(), args.out.display())
        .map_err(io_out)
}

fn toy_set(images: &[(String, PathBuf)], id: &str, dim: usize, seed: u64) -> CliResult<EmbeddingSet> {
    if dim == 0 {
        return Err(CliError::Argument("--dim must be positive".into()));
    }
    let mut vectors = Vec::with_capacity(images.len() * dim);
    for (_, path) in images {
        vectors.extend(toy_extract::<f32>(&fsio::read(path)?, dim, seed)?);
    }
    Ok(EmbeddingSet::new(id, dim, vectors, manifest(images))?)
}

fn external_set(command: &str, images: &[(String, PathBuf)], out: &Path) -> CliResult<EmbeddingSet> {
    let argv = shlex::split(command)
        .filter(|a| !a.is_empty())
        .ok_or_else(|| CliError::Argument(format!("cannot parse --command {command:?}")))?;
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let work = tempfile::Builder::new()
        .prefix(".leakcheck-extract")
        .tempdir_in(parent)
        .map_err(|e| CoreError::io(parent, e))?;
    let list = work.path().join("images.txt");
    let body: String = images.iter().map(|(_, p)| format!("{}\n", p.display())).collect();
    fsio::atomic_write(&list, body.as_bytes())?;
    let produced = work.path().join("embeddings.embs");

    let output = Command::new(&argv[0])
        .args(&argv[1..])
        .arg(&list)
        .arg(&produced)
        .output()
        .map_err(|e| CliError::Extractor(format!("cannot run {:?}: {e}", argv[0])))?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let last = stderr.lines().last().unwrap_or("").trim();
        return Err(CliError::Extractor(format!("{:?} exited with {}: {last}", argv[0], output.status)));
    }
    if !produced.exists() {
        return Err(CliError::Extractor("command wrote no embedding file".into()));
    }
    let manifest_file = manifest_path_for(&produced);
    if !manifest_file.exists() {
        fsio::atomic_write(&manifest_file, &fsio::to_jsonl(manifest(images)))?;
    }
    let set: EmbeddingSet =
        read_embedding_set(&produced).map_err(|e| CliError::Extractor(format!("invalid output: {e}")))?;
    if set.count() != images.len() {
        return Err(CliError::Extractor(format!(
            "{} embeddings for {} images",
            set.count(),
            images.len()
        )));
    }
    Ok(set)
}
