//! Human-readable run summary.
//!
//! The report is fully determined by the simulation result: no timestamps,
//! no wall-clock durations, no host details. Two runs of the same scenario
//! print the same bytes.

use std::fmt;

use crate::metrics::PhaseAggregate;
use crate::mission::PlacementRecord;

/// How a run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum RunOutcome {
    /// Mission completed, or a hold ran out its clock.
    Success,
    /// The mission gave up; `phase` is where, `reason` is why.
    Aborted { phase: String, reason: String },
    /// The state left the sane envelope or went non-finite.
    Diverged { time: f64 },
}

impl RunOutcome {
    /// Process exit code the command-line front end reports.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Success => 0,
            Self::Aborted { .. } => 2,
            Self::Diverged { .. } => 3,
        }
    }
}

impl fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Success => write!(f, "success"),
            Self::Aborted { phase, reason } => write!(f, "aborted in {phase}: {reason}"),
            Self::Diverged { time } => write!(f, "diverged at t={time:.3} s"),
        }
    }
}

/// End-of-run summary, printed by the command-line front end.
#[derive(Clone, Debug)]
pub struct SummaryReport {
    pub outcome: RunOutcome,
    pub config_hash: String,
    pub sim_time: f64,
    pub placements: Vec<PlacementRecord<f64>>,
    pub phases: Vec<PhaseAggregate<f64>>,
    pub overall: PhaseAggregate<f64>,
    pub final_voltage: f64,
}

fn cm(meters: f64) -> f64 {
    meters * 100.0
}

fn deg(radians: f64) -> f64 {
    radians.to_degrees()
}

fn metric_line(out: &mut String, agg: &PhaseAggregate<f64>) {
    use fmt::Write;
    writeln!(
        out,
        "{:<12} {:>7.2} {:>7.2} {:>9.2} {:>8.2} {:>9.2} {:>8.2} {:>10.2} {:>9.2} {:>11.2} {:>10.2}",
        agg.label,
        agg.start_time,
        agg.end_time,
        cm(agg.radial.mean()),
        cm(agg.radial.max),
        cm(agg.tip_radial.mean()),
        cm(agg.tip_radial.max),
        deg(agg.roll_abs.mean()),
        deg(agg.roll_abs.max),
        deg(agg.pitch_abs.mean()),
        deg(agg.pitch_abs.max),
    )
    .expect("writing to a String cannot fail");
}

/// Per-phase metric table, positions in centimeters and angles in degrees.
pub fn phase_table(phases: &[PhaseAggregate<f64>], overall: &PhaseAggregate<f64>) -> String {
    use fmt::Write;
    let mut out = String::new();
    writeln!(
        out,
        "{:<12} {:>7} {:>7} {:>9} {:>8} {:>9} {:>8} {:>10} {:>9} {:>11} {:>10}",
        "phase",
        "start",
        "end",
        "e_r av",
        "e_r mx",
        "tip av",
        "tip mx",
        "|roll| av",
        "|roll| mx",
        "|pitch| av",
        "|pitch| mx",
    )
    .expect("writing to a String cannot fail");
    writeln!(
        out,
        "{:<12} {:>7} {:>7} {:>9} {:>8} {:>9} {:>8} {:>10} {:>9} {:>11} {:>10}",
        "", "[s]", "[s]", "[cm]", "[cm]", "[cm]", "[cm]", "[deg]", "[deg]", "[deg]", "[deg]",
    )
    .expect("writing to a String cannot fail");
    for phase in phases {
        metric_line(&mut out, phase);
    }
    metric_line(&mut out, overall);
    out
}

impl fmt::Display for SummaryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "outcome:       {}", self.outcome)?;
        writeln!(f, "config hash:   {}", self.config_hash)?;
        writeln!(f, "sim time:      {:.3} s", self.sim_time)?;
        writeln!(f, "final voltage: {:.3} V", self.final_voltage)?;
        writeln!(f, "placements:    {}", self.placements.len())?;
        for p in &self.placements {
            writeln!(
                f,
                "  pole {}  t={:>8.3} s  tip {:>6.2} cm  body {:>6.2} cm",
                p.pole_index + 1,
                p.time,
                cm(p.tip_radial_error),
                cm(p.body_radial_error),
            )?;
        }
        writeln!(f)?;
        f.write_str(&phase_table(&self.phases, &self.overall))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricsCollector;

    fn sample_report() -> SummaryReport {
        let mut collector = MetricsCollector::new();
        collector.record("Takeoff", 0.0, 0.012, 0.015, 0.01, 0.004);
        collector.record("Takeoff", 0.1, 0.010, 0.013, 0.008, 0.003);
        collector.record("Transport", 0.2, 0.020, 0.027, 0.015, 0.021);
        SummaryReport {
            outcome: RunOutcome::Success,
            config_hash: "ab".repeat(32),
            sim_time: 0.2,
            placements: vec![PlacementRecord {
                pole_index: 0,
                time: 0.15,
                tip_radial_error: 0.031,
                body_radial_error: 0.012,
            }],
            phases: collector.phases().to_vec(),
            overall: collector.overall(),
            final_voltage: 24.9,
        }
    }

    #[test]
    fn report_is_deterministic_and_wall_clock_free() {
        let report = sample_report();
        let a = report.to_string();
        let b = report.to_string();
        assert_eq!(a, b);
        assert!(a.contains("outcome:       success"));
        assert!(a.contains("pole 1"));
        // Angles come out in degrees: 0.021 rad pitch is about 1.20 deg.
        assert!(a.contains("1.20"));
        // Radial errors come out in centimeters.
        assert!(a.contains("2.00"));
        assert!(!a.to_lowercase().contains("wall"));
    }

    #[test]
    fn outcome_exit_codes_are_pinned() {
        assert_eq!(RunOutcome::Success.exit_code(), 0);
        let aborted = RunOutcome::Aborted {
            phase: "Descend".into(),
            reason: "gate timed out".into(),
        };
        assert_eq!(aborted.exit_code(), 2);
        assert_eq!(RunOutcome::Diverged { time: 1.0 }.exit_code(), 3);
    }
}
