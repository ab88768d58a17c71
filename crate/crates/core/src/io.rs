//! On-disk formats for catalogs, posteriors, predictive samples and risk
//! reports.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! yields bit-identical values and rewriting it yields identical bytes.
//!
//! A catalog directory holds
//! `grid.json` (geometry, hazard labels, normalization constants),
//! `exposure.csv` (`row,col,value`),
//! `events/<id>/hazards.csv` (`row,col,hazard,value`),
//! `catalog.csv` (`event_id,observed_damage`, empty when unobserved) and
//! optionally `truth.json`.
//! A posterior directory holds `posterior.json` and `chains/<k>.csv`
//! (`iter,<param>...`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::damage::{EventCatalog, EventRecord, SyntheticTruth};
use crate::error::{Error, Result};
use crate::grids::{ExposureField, HazardFieldSet, HazardScale, SpatialGrid};
use crate::inference::{
    Chain, DiagnosticsReport, McmcConfig, PosteriorSamples, PriorSpec, Provenance,
};
use crate::predict::PredictiveSummary;
use crate::risk::RiskReport;

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Lower-case hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::data(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}

/// Parsed CSV body: header plus `(line, fields)` rows.
struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::parse(path, line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Self { path: path.to_path_buf(), header, rows })
    }

    fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self.header != expected {
            return Err(Error::parse(
                &self.path,
                1,
                format!("expected header {:?}, found {:?}", expected.join(","), self.header.join(",")),
            ));
        }
        Ok(())
    }

    fn float(&self, line: u64, field: &str, what: &str) -> Result<f64> {
        let x: f64 = field
            .trim()
            .parse()
            .map_err(|_| Error::parse(&self.path, line, format!("{what}: not a number: {field:?}")))?;
        if !x.is_finite() {
            return Err(Error::parse(&self.path, line, format!("{what}: non-finite value {field:?}")));
        }
        Ok(x)
    }

    fn index(&self, line: u64, field: &str, what: &str, bound: usize) -> Result<usize> {
        let i: usize = field
            .trim()
            .parse()
            .map_err(|_| Error::parse(&self.path, line, format!("{what}: not an index: {field:?}")))?;
        if i >= bound {
            return Err(Error::parse(&self.path, line, format!("{what} {i} out of range 0..{bound}")));
        }
        Ok(i)
    }

    fn error(&self, line: u64, message: impl Into<String>) -> Error {
        Error::parse(&self.path, line, message)
    }
}

/// `grid.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub n_rows: usize,
    pub n_cols: usize,
    pub cell_size: f64,
    pub origin: [f64; 2],
    pub hazards: Vec<String>,
    pub normalization: Option<Vec<HazardScale>>,
}

fn write_exposure(path: &Path, field: &ExposureField) -> Result<()> {
    let grid = field.grid();
    let mut out = String::from("row,col,value\n");
    for (i, v) in field.values().iter().enumerate() {
        let (r, c) = grid.row_col(i);
        let _ = writeln!(out, "{r},{c},{}", fmt_f64(*v));
    }
    write_text(path, &out)
}

fn read_exposure(path: &Path, grid: &SpatialGrid) -> Result<ExposureField> {
    let t = Table::read(path)?;
    t.expect_header(&["row", "col", "value"])?;
    let mut values = vec![f64::NAN; grid.len()];
    for (line, f) in &t.rows {
        let r = t.index(*line, &f[0], "row", grid.n_rows())?;
        let c = t.index(*line, &f[1], "col", grid.n_cols())?;
        let i = grid.index(r, c).expect("bounds checked");
        if !values[i].is_nan() {
            return Err(t.error(*line, format!("duplicate cell ({r},{c})")));
        }
        values[i] = t.float(*line, &f[2], "value")?;
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        let (r, c) = grid.row_col(i);
        return Err(t.error(t.rows.last().map_or(1, |r| r.0), format!("missing cell ({r},{c})")));
    }
    ExposureField::new(grid.clone(), values)
}

/// Writes one event's fields as `row,col,hazard,value`, hazard by hazard.
pub fn write_hazards(path: &Path, fields: &HazardFieldSet) -> Result<()> {
    let grid = fields.grid();
    let mut out = String::from("row,col,hazard,value\n");
    for (j, name) in fields.names().iter().enumerate() {
        for (i, v) in fields.values(j).iter().enumerate() {
            let (r, c) = grid.row_col(i);
            let _ = writeln!(out, "{r},{c},{name},{}", fmt_f64(*v));
        }
    }
    write_text(path, &out)
}

/// Reads `row,col,hazard,value` for the given hazard labels. Every label
/// must cover every cell exactly once.
pub fn read_hazards(
    path: &Path,
    grid: &SpatialGrid,
    names: &[String],
    normalization: Option<&[HazardScale]>,
) -> Result<HazardFieldSet> {
    let t = Table::read(path)?;
    t.expect_header(&["row", "col", "hazard", "value"])?;
    let mut values = vec![vec![f64::NAN; grid.len()]; names.len()];
    for (line, f) in &t.rows {
        let r = t.index(*line, &f[0], "row", grid.n_rows())?;
        let c = t.index(*line, &f[1], "col", grid.n_cols())?;
        let j = names
            .iter()
            .position(|n| n == &f[2])
            .ok_or_else(|| t.error(*line, format!("unknown hazard {:?}; expected one of {names:?}", f[2])))?;
        let i = grid.index(r, c).expect("bounds checked");
        if !values[j][i].is_nan() {
            return Err(t.error(*line, format!("duplicate {} value at ({r},{c})", names[j])));
        }
        values[j][i] = t.float(*line, &f[3], "value")?;
    }
    for (j, v) in values.iter().enumerate() {
        if let Some(i) = v.iter().position(|x| x.is_nan()) {
            let (r, c) = grid.row_col(i);
            return Err(t.error(
                t.rows.last().map_or(1, |r| r.0),
                format!("missing {} value at ({r},{c})", names[j]),
            ));
        }
    }
    let set = HazardFieldSet::new(grid.clone(), names.to_vec(), values)?;
    match normalization {
        Some(s) => set.with_normalization(s.to_vec()),
        None => Ok(set),
    }
}

pub fn event_hazards_path(catalog_dir: &Path, event_id: &str) -> PathBuf {
    catalog_dir.join("events").join(event_id).join("hazards.csv")
}

pub fn write_catalog(dir: &Path, catalog: &EventCatalog, truth: Option<&SyntheticTruth>) -> Result<()> {
    let grid = catalog.grid();
    let meta = GridFile {
        n_rows: grid.n_rows(),
        n_cols: grid.n_cols(),
        cell_size: grid.cell_size(),
        origin: grid.origin(),
        hazards: catalog.hazard_names().to_vec(),
        normalization: catalog.normalization().map(<[_]>::to_vec),
    };
    write_json(&dir.join("grid.json"), &meta)?;
    write_exposure(&dir.join("exposure.csv"), catalog.exposure())?;
    let mut index = String::from("event_id,observed_damage\n");
    for e in catalog.events() {
        write_hazards(&event_hazards_path(dir, &e.event_id), &e.hazards)?;
        let d = e.observed_damage.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(index, "{},{d}", e.event_id);
    }
    write_text(&dir.join("catalog.csv"), &index)?;
    if let Some(t) = truth {
        write_json(&dir.join("truth.json"), t)?;
    }
    Ok(())
}

pub fn read_grid_file(dir: &Path) -> Result<(GridFile, SpatialGrid)> {
    let path = dir.join("grid.json");
    let meta: GridFile = read_json(&path)?;
    let grid = SpatialGrid::new(meta.n_rows, meta.n_cols, meta.origin, meta.cell_size)
        .map_err(|e| Error::parse(&path, 1, e.to_string()))?;
    Ok((meta, grid))
}

/// Reads a catalog directory; events appear in `catalog.csv` order.
pub fn read_catalog(dir: &Path) -> Result<EventCatalog> {
    let (meta, grid) = read_grid_file(dir)?;
    let exposure = read_exposure(&dir.join("exposure.csv"), &grid)?;
    let t = Table::read(&dir.join("catalog.csv"))?;
    t.expect_header(&["event_id", "observed_damage"])?;
    let mut events = Vec::with_capacity(t.rows.len());
    for (line, f) in &t.rows {
        let id = f[0].trim().to_string();
        if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
            return Err(t.error(*line, format!("invalid event id {id:?}")));
        }
        let observed = if f[1].trim().is_empty() {
            None
        } else {
            Some(t.float(*line, &f[1], "observed_damage")?)
        };
        let hazards = read_hazards(
            &event_hazards_path(dir, &id),
            &grid,
            &meta.hazards,
            meta.normalization.as_deref(),
        )?;
        events.push(EventRecord { event_id: id, hazards, observed_damage: observed });
    }
    EventCatalog::new(exposure, meta.hazards, meta.normalization, events)
}

pub fn read_truth(dir: &Path) -> Result<Option<SyntheticTruth>> {
    let path = dir.join("truth.json");
    if path.exists() {
        read_json(&path).map(Some)
    } else {
        Ok(None)
    }
}

/// Content hash over the catalog's files, in a fixed order.
pub fn catalog_digest(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut feed = |p: PathBuf| -> Result<()> {
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
        Ok(())
    };
    feed(dir.join("grid.json"))?;
    feed(dir.join("exposure.csv"))?;
    let index = dir.join("catalog.csv");
    feed(index.clone())?;
    let t = Table::read(&index)?;
    for (_, f) in &t.rows {
        feed(event_hazards_path(dir, f[0].trim()))?;
    }
    Ok(sha256_hex(&hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub seed: u64,
    pub accepted: usize,
    pub n_draws: usize,
}

/// `posterior.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorFile {
    pub family: String,
    pub param_names: Vec<String>,
    pub config: McmcConfig,
    pub priors: PriorSpec,
    pub hazard_names: Vec<String>,
    pub normalization: Option<Vec<HazardScale>>,
    pub provenance: Provenance,
    pub chains: Vec<ChainMeta>,
    pub acceptance_rates: Vec<f64>,
    pub diagnostics: Option<DiagnosticsReport>,
}

fn chain_path(dir: &Path, k: usize) -> PathBuf {
    dir.join("chains").join(format!("{k}.csv"))
}

pub fn write_posterior(dir: &Path, file: &PosteriorFile, samples: &PosteriorSamples) -> Result<()> {
    write_json(&dir.join("posterior.json"), file)?;
    for (k, chain) in samples.chains.iter().enumerate() {
        let mut out = String::from("iter");
        for n in &samples.param_names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, d) in chain.draws.iter().enumerate() {
            out.push_str(&i.to_string());
            for x in d {
                out.push(',');
                out.push_str(&fmt_f64(*x));
            }
            out.push('\n');
        }
        write_text(&chain_path(dir, k), &out)?;
    }
    Ok(())
}

pub fn read_posterior(dir: &Path) -> Result<(PosteriorFile, PosteriorSamples)> {
    let meta_path = dir.join("posterior.json");
    if !meta_path.exists() {
        return Err(Error::data(format!("no posterior found at {}", meta_path.display())));
    }
    let file: PosteriorFile = read_json(&meta_path)?;
    let mut header = vec!["iter".to_string()];
    header.extend(file.param_names.iter().cloned());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut chains = Vec::with_capacity(file.chains.len());
    for (k, meta) in file.chains.iter().enumerate() {
        let t = Table::read(&chain_path(dir, k))?;
        t.expect_header(&header)?;
        let mut draws = Vec::with_capacity(t.rows.len());
        for (i, (line, f)) in t.rows.iter().enumerate() {
            let iter = t.index(*line, &f[0], "iter", usize::MAX)?;
            if iter != i {
                return Err(t.error(*line, format!("expected iter {i}, found {iter}")));
            }
            let theta = f[1..]
                .iter()
                .zip(&file.param_names)
                .map(|(x, n)| t.float(*line, x, n))
                .collect::<Result<Vec<_>>>()?;
            draws.push(theta);
        }
        if draws.len() != meta.n_draws {
            return Err(t.error(
                t.rows.last().map_or(1, |r| r.0),
                format!("expected {} draws, found {}", meta.n_draws, draws.len()),
            ));
        }
        chains.push(Chain { seed: meta.seed, draws, accepted: meta.accepted });
    }
    let samples = PosteriorSamples {
        param_names: file.param_names.clone(),
        chains,
        burn_in: file.config.burn_in,
        thin: file.config.thin,
        provenance: file.provenance.clone(),
    };
    Ok((file, samples))
}

/// Single-column `damage` file.
pub fn write_damage_sample(path: &Path, damages: &[f64]) -> Result<()> {
    let mut out = String::from("damage\n");
    for d in damages {
        out.push_str(&fmt_f64(*d));
        out.push('\n');
    }
    write_text(path, &out)
}

/// Reads the `damage` column (or the only column) of a sample file.
pub fn read_damage_sample(path: &Path) -> Result<Vec<f64>> {
    let t = Table::read(path)?;
    let col = match t.header.iter().position(|h| h == "damage") {
        Some(c) => c,
        None if t.header.len() == 1 => 0,
        None => return Err(t.error(1, "no `damage` column")),
    };
    let values = t
        .rows
        .iter()
        .map(|(line, f)| t.float(*line, &f[col], "damage"))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::data(format!("{}: empty damage sample", path.display())));
    }
    Ok(values)
}

pub fn predictive_paths(out_dir: &Path, event_id: &str) -> (PathBuf, PathBuf) {
    (
        out_dir.join(format!("predictive_{event_id}.csv")),
        out_dir.join(format!("predictive_{event_id}.json")),
    )
}

pub fn write_predictive_summary(path: &Path, summary: &PredictiveSummary) -> Result<()> {
    write_json(path, summary)
}

/// `risk_report.json` plus `exceedance.csv` (`model,threshold,prob`).
pub fn write_risk_report(dir: &Path, report: &RiskReport) -> Result<()> {
    write_json(&dir.join("risk_report.json"), report)?;
    let mut out = String::from("model,threshold,prob\n");
    for (m, t, p) in report.exceedance_rows() {
        let _ = writeln!(out, "{m},{},{}", fmt_f64(t), fmt_f64(p));
    }
    write_text(&dir.join("exceedance.csv"), &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damage::{generate_synthetic_catalog, ScenarioSpec};

    fn small_spec() -> ScenarioSpec {
        let mut s = ScenarioSpec::named("medium-high").unwrap().resized(5, 4);
        s.n_events = 4;
        s.n_holdout = 2;
        s
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0, 1e-300, 123456.789, f64::MIN_POSITIVE, 2.0f64.sqrt(), -0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn catalog_round_trip_is_exact() {
        let (cat, truth) = generate_synthetic_catalog(&small_spec(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_catalog(dir.path(), &cat, Some(&truth)).unwrap();
        let back = read_catalog(dir.path()).unwrap();
        assert_eq!(back, cat);
        assert_eq!(read_truth(dir.path()).unwrap().unwrap(), truth);
        let digest = catalog_digest(dir.path()).unwrap();
        let other = tempfile::tempdir().unwrap();
        write_catalog(other.path(), &back, Some(&truth)).unwrap();
        assert_eq!(catalog_digest(other.path()).unwrap(), digest);
        for f in ["catalog.csv", "grid.json", "exposure.csv"] {
            assert_eq!(
                fs::read(dir.path().join(f)).unwrap(),
                fs::read(other.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn parse_errors_name_file_and_line() {
        let (cat, _) = generate_synthetic_catalog(&small_spec(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_catalog(dir.path(), &cat, None).unwrap();
        let path = event_hazards_path(dir.path(), "ev0001");
        let mut text = fs::read_to_string(&path).unwrap();
        text = text.replacen("\n0,1,wind,", "\n0,1,wind,abc", 1);
        fs::write(&path, text).unwrap();
        match read_catalog(dir.path()).unwrap_err() {
            Error::Parse { path: p, line, message } => {
                assert_eq!(p, path);
                assert_eq!(line, 3);
                assert!(message.contains("not a number"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
        fs::remove_file(&path).unwrap();
        assert!(matches!(read_catalog(dir.path()).unwrap_err(), Error::Io { .. }));
    }

    #[test]
    fn damage_sample_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_damage_sample(&p, &[1.5, 2.25]).unwrap();
        assert_eq!(read_damage_sample(&p).unwrap(), vec![1.5, 2.25]);
        write_text(&p, "damage\n").unwrap();
        assert!(matches!(read_damage_sample(&p), Err(Error::Data(_))));
    }
}
