//! CSV writers for traces, commitment events and run summaries.

use std::io::Write;

use crate::engine::{CommitEvent, SimResult, TraceRow};
use crate::error::Result;

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_events<W: Write>(out: W, events: &[CommitEvent]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(["t", "id", "transition", "window_start", "window_end"])?;
    for e in events {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_time(t: Option<f64>) -> String {
    t.map(|x| format!("{x:.2}")).unwrap_or_default()
}

/// One row per vehicle; run-level columns repeat on every row.
pub fn write_summary<W: Write>(out: W, result: &SimResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "policy",
        "id",
        "exit_time",
        "last_exit_time",
        "min_clearance",
        "collision",
        "timeout",
    ])?;
    for (k, exit) in result.exit_times.iter().enumerate() {
        w.write_record([
            result.policy.name().to_string(),
            (k + 1).to_string(),
            fmt_time(*exit),
            fmt_time(result.last_exit_time),
            format!("{:.3}", result.min_clearance),
            result.collision.to_string(),
            result.timeout.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_header_is_exact() {
        let row = TraceRow {
            t: 0.05,
            id: 1,
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            v: 1.0,
            a: 0.0,
            z: 0.5,
            sigma: 'N',
            zone: "APPROACH".into(),
            d: 20.0,
        };
        let mut buf = Vec::new();
        write_trace(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "t,id,x,y,heading,v,a,z,sigma,zone,d"
        );
    }

    #[test]
    fn event_header_is_exact_even_when_empty() {
        let mut buf = Vec::new();
        write_events(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim(),
            "t,id,transition,window_start,window_end"
        );
    }
}
