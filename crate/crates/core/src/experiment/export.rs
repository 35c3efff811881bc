//! Delimited tables and the JSON summary written by each run.
//!
//! Trajectories are stored one row per event with the post-event counts,
//! preceded by a row with an empty reaction field holding the initial state:
//!
//! ```text
//! replicate,time,reaction,G,M,P
//! 0,0,,1,50,10
//! 0,0.0132,1,1,50,11
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::forward::{Event, JumpPath};
use crate::guide::GreedyViolation;
use crate::network::ReactionNetwork;
use crate::weights::Replicate;

use super::run::{PmfRow, RunSummary, TuneRow};

pub fn write_paths<W: Write>(w: W, net: &ReactionNetwork, paths: &[JumpPath]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["replicate".to_string(), "time".into(), "reaction".into()];
    header.extend(net.species_names().map(String::from));
    out.write_record(&header)?;
    for (rep, path) in paths.iter().enumerate() {
        let mut x = path.x0.clone();
        let mut row = |time: String, reaction: String, x: &[i64]| -> Result<()> {
            let mut rec = vec![rep.to_string(), time, reaction];
            rec.extend(x.iter().map(|c| c.to_string()));
            out.write_record(&rec)?;
            Ok(())
        };
        row("0".into(), String::new(), &x)?;
        for e in &path.events {
            net.fire(e.reaction, &mut x);
            row(e.time.to_string(), e.reaction.to_string(), &x)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, line: u64, what: &str) -> Result<T> {
    field.parse().map_err(|_| Error::Io(format!("trajectory line {line}: bad {what} '{field}'")))
}

/// Inverse of [`write_paths`]; every path gets the given horizon.
pub fn read_paths<R: Read>(r: R, horizon: f64) -> Result<Vec<JumpPath>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut paths: Vec<JumpPath> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() < 4 {
            return Err(Error::Io(format!("trajectory line {line}: too few fields")));
        }
        let rep: usize = parse(&rec[0], line, "replicate")?;
        if rec[2].is_empty() {
            if rep != paths.len() {
                return Err(Error::Io(format!("trajectory line {line}: replicate {rep} out of order")));
            }
            let x0 = (3..rec.len()).map(|j| parse(&rec[j], line, "count")).collect::<Result<Vec<i64>>>()?;
            paths.push(JumpPath::new(x0, horizon));
        } else {
            let n = paths.len();
            let path = paths.last_mut().filter(|_| rep + 1 == n);
            let path = path.ok_or_else(|| Error::Io(format!("trajectory line {line}: event before the initial row of replicate {rep}")))?;
            path.events.push(Event { time: parse(&rec[1], line, "time")?, reaction: parse(&rec[2], line, "reaction")? });
        }
    }
    Ok(paths)
}

/// One row per replicate: hit flag per observation and the log weight
/// (empty for a miss).
pub fn write_weights<W: Write>(w: W, reps: &[Replicate], hits: &[Vec<bool>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n_obs = hits.first().map_or(0, |h| h.len());
    let mut header = vec!["replicate".to_string()];
    header.extend((1..=n_obs).map(|k| format!("hit_{k}")));
    header.extend(["events".to_string(), "log_weight".into()]);
    out.write_record(&header)?;
    for (r, h) in reps.iter().zip(hits) {
        let mut rec = vec![r.index.to_string()];
        rec.extend(h.iter().map(|&b| (b as u8).to_string()));
        rec.push(r.events.to_string());
        rec.push(r.log_weight.map_or(String::new(), |w| w.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_pmf<W: Write>(w: W, rows: &[PmfRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["v", "estimate", "std_error", "hit_fraction", "reference"])?;
    for r in rows {
        out.write_record([
            r.v.to_string(),
            r.estimate.to_string(),
            r.std_error.to_string(),
            r.hit_fraction.to_string(),
            r.reference.map_or(String::new(), |p| p.to_string()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_tune<W: Write>(w: W, rows: &[TuneRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["multiplier", "a_trace", "criterion", "log_mean_weight", "hit_fraction"])?;
    for r in rows {
        out.write_record([
            r.multiplier.to_string(),
            r.a_trace.to_string(),
            r.criterion.to_string(),
            r.log_mean_weight.to_string(),
            r.hit_fraction.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per state from which no active reaction approaches the target.
pub fn write_greedy<W: Write>(w: W, net: &ReactionNetwork, violations: &[GreedyViolation]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["observation".to_string(), "interval_start".into(), "interval_end".into()];
    header.extend(net.species_names().map(String::from));
    out.write_record(&header)?;
    for v in violations {
        let mut rec = vec![(v.observation + 1).to_string(), v.interval.0.to_string(), v.interval.1.to_string()];
        rec.extend(v.state.iter().map(|c| c.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn create(dir: &Path, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let f = std::fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(f))
}
