//! On-disk formats: creatives as JSON lines, daily rows as CSV.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::types::{AdCreative, DailyPerformance};
use crate::error::{domain, Result};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn to_jsonl<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, &to_jsonl(rows)?)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn read_creatives(path: &Path) -> Result<Vec<AdCreative>> {
    let creatives: Vec<AdCreative> = read_jsonl(path)?;
    Ok(creatives)
}

#[derive(Debug, Serialize, Deserialize)]
struct DailyRow {
    creative_id: String,
    day: u32,
    impressions: u64,
    clicks: u64,
    conversions: u64,
    spend: f64,
}

/// Daily rows of every creative as CSV.
pub fn daily_csv(creatives: &[AdCreative]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in creatives {
        for d in &c.daily {
            w.serialize(DailyRow {
                creative_id: c.creative_id.clone(),
                day: d.day,
                impressions: d.impressions,
                clicks: d.clicks,
                conversions: d.conversions,
                spend: d.spend,
            })?;
        }
    }
    w.flush()?;
    Ok(w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?)
}

pub fn read_daily_csv(path: &Path) -> Result<BTreeMap<String, Vec<DailyPerformance>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: BTreeMap<String, Vec<DailyPerformance>> = BTreeMap::new();
    for row in r.deserialize() {
        let row: DailyRow = row?;
        out.entry(row.creative_id).or_default().push(DailyPerformance {
            day: row.day,
            impressions: row.impressions,
            clicks: row.clicks,
            conversions: row.conversions,
            spend: row.spend,
        });
    }
    for rows in out.values_mut() {
        rows.sort_by_key(|d| d.day);
    }
    Ok(out)
}

/// Fills each creative's history from CSV rows; creatives without rows are an error.
pub fn attach_daily(creatives: &mut [AdCreative], mut daily: BTreeMap<String, Vec<DailyPerformance>>) -> Result<()> {
    for c in creatives.iter_mut() {
        match daily.remove(&c.creative_id) {
            Some(rows) => c.daily = rows,
            None if !c.daily.is_empty() => {}
            None => return domain(format!("no daily rows for creative {}", c.creative_id)),
        }
        c.validate()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Gender;

    fn creative(id: &str) -> AdCreative {
        AdCreative {
            creative_id: id.into(),
            campaign_id: "c0".into(),
            gender: Gender::Male,
            genre: "books".into(),
            target_cpa: 100.0,
            text_embedding: vec![0.1, -0.2],
            image_embedding: vec![0.3],
            daily: vec![
                DailyPerformance { day: 1, impressions: 10, clicks: 2, conversions: 1, spend: 4.5 },
                DailyPerformance { day: 2, impressions: 7, clicks: 1, conversions: 0, spend: 2.25 },
            ],
            lifetime_days: 2.0,
            censored: false,
            total_sales: 12.0,
        }
    }

    #[test]
    fn jsonl_and_csv_round_trip() {
        let dir = tempfile_dir();
        let a = vec![creative("a"), creative("b")];
        let p = dir.join("creatives.jsonl");
        write_jsonl(&p, &a).unwrap();
        let back = read_creatives(&p).unwrap();
        assert_eq!(back, a);

        let csv_path = dir.join("daily.csv");
        write_atomic(&csv_path, &daily_csv(&a).unwrap()).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("creative_id,day,impressions,clicks,conversions,spend\n"));
        let mut stripped: Vec<AdCreative> = a.iter().cloned().map(|mut c| { c.daily.clear(); c }).collect();
        attach_daily(&mut stripped, read_daily_csv(&csv_path).unwrap()).unwrap();
        assert_eq!(stripped, a);
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn missing_daily_rows_is_error() {
        let mut c = vec![creative("x")];
        c[0].daily.clear();
        assert!(attach_daily(&mut c, BTreeMap::new()).is_err());
    }

    fn tempfile_dir() -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("adsurv-io-{}", std::process::id()));
        std::fs::create_dir_all(&d).unwrap();
        d
    }
}
