//! CSV writers for trajectories and summaries, and a numeric reader for the
//! plotter.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! results give byte-identical files.

use std::io::Write;
use std::path::Path;

use adaug_core::safe::acc::AccTrajectory;
use adaug_core::sim::Trajectory;
use adaug_core::Vector;

use crate::error::{HarnessError, Result};

fn indexed(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (0..count).map(move |i| format!("{prefix}{i}"))
}

/// Header of the episode trajectory schema for `n` states and `m` inputs.
pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(indexed("x", n));
    h.extend(indexed("u_rl", m));
    h.extend(indexed("u_l1", m));
    h.extend(indexed("u", m));
    h.extend(indexed("sighat", n));
    h.extend(indexed("sigtrue", n));
    h.push("reward".into());
    h
}

fn push_vec(row: &mut Vec<String>, v: &Vector) {
    row.extend(v.iter().map(|x| x.to_string()));
}

/// Episode trajectory at control rate. `σ̂` and `σ` are the most recent
/// adaptation-rate samples; both are zero before the first sample and in
/// runs without L1.
pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let n = traj.final_state.len();
    let m = traj.u_total.first().map_or(0, |u| u.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(n, m))?;
    let zeros = Vector::zeros(n);
    for (i, &t) in traj.times.iter().enumerate() {
        let mut row = vec![t.to_string()];
        push_vec(&mut row, &traj.states[i]);
        push_vec(&mut row, &traj.u_rl[i]);
        push_vec(&mut row, &traj.u_l1[i]);
        push_vec(&mut row, &traj.u_total[i]);
        let (hat, truth) = match traj.adapt_index_at(t) {
            Some(j) => (&traj.sigma_hat[j], &traj.sigma_true[j]),
            None => (&zeros, &zeros),
        };
        push_vec(&mut row, hat);
        push_vec(&mut row, truth);
        row.push(traj.rewards.get(i).map_or(String::new(), |r| r.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| HarnessError::io("<trajectory>", e))?;
    Ok(())
}

/// ACC run in the trajectory schema plus `h,V,psi_h_active,qp_status`. The
/// QP output fills `u_rl` and `u`; `u_l1` is zero; the reward column is
/// `−V`.
pub fn write_acc_trajectory<W: Write>(out: W, traj: &AccTrajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = trajectory_header(3, 1);
    header.extend(["h", "V", "psi_h_active", "qp_status"].map(String::from));
    w.write_record(&header)?;
    for s in &traj.samples {
        let mut row = vec![s.t.to_string()];
        push_vec(&mut row, &s.x);
        row.extend([s.u.to_string(), "0".into(), s.u.to_string()]);
        // the uncertainty enters the velocity channel only
        for sigma in [s.sigma_used, s.sigma_true] {
            row.extend(["0".to_string(), sigma.to_string(), "0".to_string()]);
        }
        row.push((-s.v).to_string());
        row.extend([
            s.h.to_string(),
            s.v.to_string(),
            u8::from(s.psi_h_active).to_string(),
            s.status.name().to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()
        .map_err(|e| HarnessError::io("<acc trajectory>", e))?;
    Ok(())
}

/// Writes `records` under `header` to `path`, creating parent directories.
pub fn write_table(path: &Path, header: &[String], records: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(header)?;
    for r in records {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

pub fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

/// Column-oriented numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }
}

/// Reads a CSV whose cells are all numeric, except that columns containing
/// any non-numeric cell are dropped. Ragged rows are an error reported
/// with their line number.
pub fn read_numeric_csv(path: &Path) -> Result<NumericTable> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().flexible(false).from_reader(file);
    let parse_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        HarnessError::Parse {
            path: path.into(),
            line,
            msg: e.to_string(),
        }
    };
    let header: Vec<String> = r
        .headers()
        .map_err(parse_err)?
        .iter()
        .map(String::from)
        .collect();
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); header.len()];
    for rec in r.records() {
        let rec = rec.map_err(parse_err)?;
        for (i, cell) in rec.iter().enumerate() {
            cells[i].push(cell.trim().parse::<f64>().ok());
        }
    }
    let (header, columns) = header
        .into_iter()
        .zip(cells)
        .filter_map(|(h, col)| {
            col.into_iter()
                .collect::<Option<Vec<f64>>>()
                .map(|c| (h, c))
        })
        .unzip();
    Ok(NumericTable { header, columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let h = trajectory_header(2, 1);
        assert_eq!(
            h.join(","),
            "t,x0,x1,u_rl0,u_l10,u0,sighat0,sighat1,sigtrue0,sigtrue1,reward"
        );
    }

    #[test]
    fn numeric_reader_drops_text_columns_and_reports_lines() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("a.csv");
        std::fs::write(&good, "t,x,status\n0,1,ok\n0.5,2,ok\n").unwrap();
        let t = read_numeric_csv(&good).unwrap();
        assert_eq!(t.header, vec!["t", "x"]);
        assert_eq!(t.column("x").unwrap(), &[1.0, 2.0]);
        let bad = dir.path().join("b.csv");
        std::fs::write(&bad, "t,x\n0,1\n0.5,2,3\n").unwrap();
        match read_numeric_csv(&bad) {
            Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
