//! Reading and writing pipeline artifacts.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use wpctc_core::ctc::Posteriorgram;
use wpctc_core::fst::{read_text, write_text, Semiring, SymbolTable, Wfst};
use wpctc_core::graph::{parse_arpa, NGramLm};
use wpctc_core::wordpiece::WordpieceModel;

use crate::error::CliError;

fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(ext);
    PathBuf::from(name)
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

/// Writes the graph in text form with numeric labels, plus its input and
/// output symbol tables as `<path>.isyms` and `<path>.osyms`.
pub fn write_graph(path: &Path, g: &Wfst) -> Result<()> {
    let mut w = create(path)?;
    write_text(g, &mut w)?;
    w.flush()?;
    for (ext, table) in [(".isyms", g.isymbols()), (".osyms", g.osymbols())] {
        let table = table.ok_or_else(|| CliError::Data(format!("graph has no {} table", &ext[1..])))?;
        let mut w = create(&sidecar(path, ext))?;
        table.write_text(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<Wfst> {
    let isyms = SymbolTable::read_text(open(&sidecar(path, ".isyms"))?)?;
    let osyms = SymbolTable::read_text(open(&sidecar(path, ".osyms"))?)?;
    let mut g = read_text(open(path)?, Semiring::Tropical, None, None)
        .with_context(|| format!("parsing graph {}", path.display()))?;
    g.set_isymbols(Some(isyms));
    g.set_osymbols(Some(osyms));
    Ok(g)
}

pub fn read_wordpiece(path: &Path) -> Result<WordpieceModel> {
    WordpieceModel::read_text(open(path)?).with_context(|| format!("parsing wordpiece model {}", path.display()))
}

pub fn write_wordpiece(path: &Path, model: &WordpieceModel) -> Result<()> {
    let mut w = create(path)?;
    model.write_text(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_lm(path: &Path) -> Result<NGramLm> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_arpa(&text).with_context(|| format!("parsing ARPA model {}", path.display()))
}

/// Symbol table of piece names with `<eps>` at 0, matching unit ids.
pub fn piece_symbols(model: &WordpieceModel) -> SymbolTable {
    let names: Vec<String> = model.pieces().iter().map(|p| p.name()).collect();
    wpctc_core::graph::unit_symbols(&names)
}

/// One posteriorgram file, or every `*.pgrm` file of a directory in name
/// order. Utterance ids are file stems.
pub fn read_posteriors(path: &Path) -> Result<Vec<(String, Posteriorgram)>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("listing {}", path.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        v.retain(|p| p.extension().is_some_and(|e| e == "pgrm"));
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(CliError::Data(format!("no .pgrm files in {}", path.display())).into());
    }
    files
        .iter()
        .map(|f| {
            let id = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let post = Posteriorgram::read_binary(open(f)?).with_context(|| format!("reading {}", f.display()))?;
            Ok((id, post))
        })
        .collect()
}

pub fn write_posteriors(dir: &Path, posts: &[(String, Posteriorgram)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (id, p) in posts {
        let mut w = create(&dir.join(format!("{id}.pgrm")))?;
        p.write_binary(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// `utt_id word1 word2 ...` lines.
pub fn read_transcripts(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .filter_map(|l| {
            let mut f = l.split_whitespace();
            f.next().map(|id| (id.to_string(), f.map(String::from).collect()))
        })
        .collect())
}
