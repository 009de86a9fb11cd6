//! Run logs: the flat CSV record of a simulation.
//!
//! One row per control tick. Floats are written with Rust's shortest
//! round-trip formatting, so a log is byte-identical across runs of the same
//! scenario and parses back to the exact same values. The header is part of
//! the format; readers reject anything else.

use std::io::{self, Write};

use thiserror::Error;

/// Column schema, version 1. Speeds are squared rotor speeds, commanded and
/// achieved; the wrench is the controller request before allocation.
pub const RUNLOG_HEADER_V1: &str = "t,p_x,p_y,p_z,q_w,q_x,q_y,q_z,v_x,v_y,v_z,omega_x,omega_y,omega_z,w_cmd_1,w_cmd_2,w_cmd_3,w_cmd_4,w_cmd_5,w_cmd_6,w_cmd_7,w_cmd_8,w_act_1,w_act_2,w_act_3,w_act_4,w_act_5,w_act_6,w_act_7,w_act_8,u_fx,u_fy,u_fz,u_tau_x,u_tau_y,u_tau_z,slack_norm,e_r,e_r_tip,phase,voltage,p_des_x,p_des_y,p_des_z,yaw_des";

/// Number of comma-separated columns in a row.
pub const RUNLOG_COLUMNS: usize = 45;

#[derive(Debug, Error)]
pub enum RunLogError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("log header mismatch, expected the v1 schema")]
    HeaderMismatch,
    #[error("line {line}: expected {RUNLOG_COLUMNS} columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}, column {column}: {message}")]
    BadField {
        line: usize,
        column: &'static str,
        message: String,
    },
}

/// One control-tick sample.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLogRow {
    pub t: f64,
    /// True world position.
    pub position: [f64; 3],
    /// True attitude as a unit quaternion, scalar first.
    pub quaternion: [f64; 4],
    /// Body-frame velocity.
    pub velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
    pub speeds_sq_cmd: [f64; 8],
    pub speeds_sq_act: [f64; 8],
    pub wrench: [f64; 6],
    pub slack_norm: f64,
    pub radial_error: f64,
    pub tip_radial_error: f64,
    pub phase: String,
    pub voltage: f64,
    pub position_des: [f64; 3],
    pub yaw_des: f64,
}

impl RunLogRow {
    fn fields(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.t)
            .chain(self.position)
            .chain(self.quaternion)
            .chain(self.velocity)
            .chain(self.angular_velocity)
            .chain(self.speeds_sq_cmd)
            .chain(self.speeds_sq_act)
            .chain(self.wrench)
            .chain([self.slack_norm, self.radial_error, self.tip_radial_error])
    }

    fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        debug_assert!(
            !self.phase.contains(',') && !self.phase.contains('\n'),
            "phase label must stay a bare word"
        );
        let mut first = true;
        for value in self.fields() {
            if !first {
                out.write_all(b",")?;
            }
            first = false;
            write!(out, "{value}")?;
        }
        write!(out, ",{},{}", self.phase, self.voltage)?;
        for value in self.position_des {
            write!(out, ",{value}")?;
        }
        writeln!(out, ",{}", self.yaw_des)
    }
}

/// Streams rows to a writer, header first.
pub struct RunLogWriter<W: Write> {
    out: W,
    rows: u64,
}

impl<W: Write> RunLogWriter<W> {
    pub fn new(mut out: W) -> Result<Self, RunLogError> {
        writeln!(out, "{RUNLOG_HEADER_V1}")?;
        Ok(Self { out, rows: 0 })
    }

    pub fn write(&mut self, row: &RunLogRow) -> Result<(), RunLogError> {
        row.write_csv(&mut self.out)?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows_written(&self) -> u64 {
        self.rows
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Parses a complete log, header line included.
pub fn read_runlog(text: &str) -> Result<Vec<RunLogRow>, RunLogError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RUNLOG_HEADER_V1 => {}
        _ => return Err(RunLogError::HeaderMismatch),
    }
    let mut rows = Vec::new();
    for (index, line) in lines {
        if line.is_empty() {
            continue;
        }
        rows.push(parse_row(line, index + 1)?);
    }
    Ok(rows)
}

fn parse_row(line: &str, line_no: usize) -> Result<RunLogRow, RunLogError> {
    let parts: Vec<&str> = line.split(',').collect();
    if parts.len() != RUNLOG_COLUMNS {
        return Err(RunLogError::ColumnCount {
            line: line_no,
            found: parts.len(),
        });
    }
    let names: Vec<&'static str> = RUNLOG_HEADER_V1.split(',').collect();
    let float = |i: usize| -> Result<f64, RunLogError> {
        parts[i].parse().map_err(|e| RunLogError::BadField {
            line: line_no,
            column: names[i],
            message: format!("{e}"),
        })
    };
    let take3 = |start: usize| -> Result<[f64; 3], RunLogError> {
        Ok([float(start)?, float(start + 1)?, float(start + 2)?])
    };
    let take8 = |start: usize| -> Result<[f64; 8], RunLogError> {
        let mut a = [0.0; 8];
        for (k, slot) in a.iter_mut().enumerate() {
            *slot = float(start + k)?;
        }
        Ok(a)
    };
    Ok(RunLogRow {
        t: float(0)?,
        position: take3(1)?,
        quaternion: [float(4)?, float(5)?, float(6)?, float(7)?],
        velocity: take3(8)?,
        angular_velocity: take3(11)?,
        speeds_sq_cmd: take8(14)?,
        speeds_sq_act: take8(22)?,
        wrench: [
            float(30)?,
            float(31)?,
            float(32)?,
            float(33)?,
            float(34)?,
            float(35)?,
        ],
        slack_norm: float(36)?,
        radial_error: float(37)?,
        tip_radial_error: float(38)?,
        phase: parts[39].to_owned(),
        voltage: float(40)?,
        position_des: take3(41)?,
        yaw_des: float(44)?,
    })
}
