use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use aggsim_core::core::{BatterySpec, HourlySeries, SeriesUnit, HOURS_PER_DAY};
use aggsim_core::synth::{SynthDataset, SynthUnit};
use chrono::{DateTime, Duration, SecondsFormat, Utc};

use crate::error::{CliError, Result};

pub const PRICES_FILE: &str = "prices.csv";
const PRICES_HEADER: &str = "timestamp,da_price,rt_price";
const UNIT_HEADER: &str = "timestamp,pv_kw,demand_kw";

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Writes a dataset as one price file plus one file per unit. Floats
/// use the shortest representation that parses back to the same bits,
/// so `ingest` round-trips exactly.
pub fn emit(dir: &Path, ds: &SynthDataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let write = |name: &str, header: &str, series: Vec<(&HourlySeries, &HourlySeries)>| {
        let path = dir.join(name);
        let (a, b) = series[0];
        let mut text = String::with_capacity(a.len() * 48);
        text.push_str(header);
        text.push('\n');
        for i in 0..a.len() {
            let t = a.start() + Duration::hours(i as i64);
            text.push_str(&format!("{},{},{}\n", stamp(t), a.values()[i], b.values()[i]));
        }
        let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| CliError::io(&path, e))
    };
    write(PRICES_FILE, PRICES_HEADER, vec![(&ds.da, &ds.rt)])?;
    for u in &ds.units {
        write(&format!("{}.csv", u.id), UNIT_HEADER, vec![(&u.pv, &u.demand)])?;
    }
    Ok(())
}

/// One parsed hourly file: start timestamp plus two value columns.
struct ParsedFile {
    start: DateTime<Utc>,
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Parses an hourly two-column file, checking the header, hourly
/// continuity, and (optionally) non-negativity. Every error names the
/// file and the 1-based line number.
fn parse_file(path: &Path, header: &str, non_negative: bool) -> Result<ParsedFile> {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let bad = |line_no: usize, msg: String| {
        CliError::Validation(format!("{name} line {}: {msg}", line_no + 1))
    };
    match lines.next() {
        Some((_, h)) if h.trim_end() == header => {}
        Some((n, h)) => return Err(bad(n, format!("expected header '{header}', got '{h}'"))),
        None => return Err(CliError::Validation(format!("{name}: empty file"))),
    }
    let mut start = None;
    let mut first = Vec::new();
    let mut second = Vec::new();
    let (col1, col2) = {
        let mut cols = header.split(',').skip(1);
        (cols.next().unwrap().to_owned(), cols.next().unwrap().to_owned())
    };
    for (n, raw) in lines {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(n, format!("expected 3 comma-separated fields, got {}", fields.len())));
        }
        let t = DateTime::parse_from_rfc3339(fields[0])
            .map_err(|e| bad(n, format!("bad timestamp '{}': {e}", fields[0])))?
            .with_timezone(&Utc);
        let expected = match start {
            None => {
                start = Some(t);
                t
            }
            Some(s) => s + Duration::hours(first.len() as i64),
        };
        if t > expected {
            return Err(bad(n, format!("missing hour: expected {}", stamp(expected))));
        }
        if t < expected {
            return Err(bad(n, format!("out-of-order timestamp {} (expected {})", stamp(t), stamp(expected))));
        }
        let value = |field: &str, col: &str| -> Result<f64> {
            let v: f64 = field
                .parse()
                .map_err(|_| bad(n, format!("bad {col} value '{field}'")))?;
            if !v.is_finite() {
                return Err(bad(n, format!("non-finite {col} value '{field}'")));
            }
            if non_negative && v < 0.0 {
                return Err(bad(n, format!("negative {col} value {v}")));
            }
            Ok(v)
        };
        first.push(value(fields[1], &col1)?);
        second.push(value(fields[2], &col2)?);
    }
    let Some(start) = start else {
        return Err(CliError::Validation(format!("{name}: no data rows")));
    };
    if first.len() % HOURS_PER_DAY != 0 {
        return Err(CliError::Validation(format!(
            "{name}: {} rows is not a whole number of days",
            first.len()
        )));
    }
    Ok(ParsedFile { start, first, second })
}

/// Reads a dataset directory back into memory: `prices.csv` plus every
/// other `*.csv` as a unit (alphabetical, so unit order is stable).
pub fn ingest(dir: &Path, battery: BatterySpec) -> Result<SynthDataset> {
    let prices_path = dir.join(PRICES_FILE);
    let prices = parse_file(&prices_path, PRICES_HEADER, false)?;
    let da = HourlySeries::new(prices.start, prices.first, SeriesUnit::CurrencyPerKwh)?;
    let rt = HourlySeries::new(prices.start, prices.second, SeriesUnit::CurrencyPerKwh)?;

    let mut unit_paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|ext| ext == "csv")
                && p.file_name().is_some_and(|f| f != PRICES_FILE)
        })
        .collect();
    unit_paths.sort();
    if unit_paths.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no unit files (expected at least one *.csv besides {PRICES_FILE})",
            dir.display()
        )));
    }

    let mut units = Vec::with_capacity(unit_paths.len());
    for path in &unit_paths {
        let parsed = parse_file(path, UNIT_HEADER, true)?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if parsed.start != prices.start || parsed.first.len() != da.len() {
            return Err(CliError::Validation(format!(
                "{id}: covers {} hours from {}, but {PRICES_FILE} covers {} from {}",
                parsed.first.len(),
                stamp(parsed.start),
                da.len(),
                stamp(prices.start)
            )));
        }
        units.push(SynthUnit {
            id,
            pv: HourlySeries::new(parsed.start, parsed.first, SeriesUnit::Kw)?,
            demand: HourlySeries::new(parsed.start, parsed.second, SeriesUnit::Kw)?,
        });
    }
    Ok(SynthDataset { units, da, rt, battery })
}

#[cfg(test)]
mod tests {
    use super::*;
    use aggsim_core::synth::{generate, SynthSpec};

    fn battery() -> BatterySpec {
        BatterySpec::new(0.5, 4.5, 0.9, 2.5).unwrap()
    }

    fn small_world() -> SynthDataset {
        generate(&SynthSpec::new(9, 3, 40).unwrap()).unwrap()
    }

    #[test]
    fn emit_then_ingest_reproduces_the_dataset_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small_world();
        emit(dir.path(), &ds).unwrap();
        let back = ingest(dir.path(), battery()).unwrap();
        assert_eq!(back.da, ds.da);
        assert_eq!(back.rt, ds.rt);
        assert_eq!(back.units.len(), ds.units.len());
        for (a, b) in back.units.iter().zip(&ds.units) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.pv, b.pv);
            assert_eq!(a.demand, b.demand);
        }
    }

    #[test]
    fn a_missing_hour_is_reported_by_timestamp() {
        let dir = tempfile::tempdir().unwrap();
        emit(dir.path(), &small_world()).unwrap();
        let path = dir.path().join("prices.csv");
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.remove(30); // drop 2021-01-02T05:00:00Z
        fs::write(&path, lines.join("\n")).unwrap();
        let err = ingest(dir.path(), battery()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains("missing hour"), "{err}");
        assert!(err.message().contains("2021-01-02T05:00:00Z"), "{err}");
        assert!(err.message().contains("line 31"), "{err}");
    }

    #[test]
    fn negative_demand_is_rejected_with_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small_world();
        emit(dir.path(), &ds).unwrap();
        let path = dir.path().join(format!("{}.csv", ds.units[0].id));
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let fields: Vec<&str> = lines[5].split(',').collect();
        lines[5] = format!("{},{},-0.25", fields[0], fields[1]);
        fs::write(&path, lines.join("\n")).unwrap();
        let err = ingest(dir.path(), battery()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains("negative demand_kw"), "{err}");
        assert!(err.message().contains("line 6"), "{err}");
    }

    #[test]
    fn garbled_numbers_and_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small_world();
        emit(dir.path(), &ds).unwrap();

        let path = dir.path().join("prices.csv");
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = lines[2].replace(',', ";");
        fs::write(&path, lines.join("\n")).unwrap();
        let err = ingest(dir.path(), battery()).unwrap_err();
        assert!(err.message().contains("line 3"), "{err}");

        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[0] = "time,da,rt".into();
        fs::write(&path, lines.join("\n")).unwrap();
        let err = ingest(dir.path(), battery()).unwrap_err();
        assert!(err.message().contains("header"), "{err}");
    }

    #[test]
    fn unit_files_must_align_with_the_price_range() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small_world();
        emit(dir.path(), &ds).unwrap();
        let path = dir.path().join(format!("{}.csv", ds.units[1].id));
        let text = fs::read_to_string(&path).unwrap();
        let keep: Vec<&str> = text.lines().take(1 + 24 * 39).collect();
        fs::write(&path, keep.join("\n")).unwrap();
        let err = ingest(dir.path(), battery()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains(&ds.units[1].id), "{err}");
    }

    #[test]
    fn an_empty_directory_is_an_io_error_for_prices() {
        let dir = tempfile::tempdir().unwrap();
        let err = ingest(dir.path(), battery()).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
