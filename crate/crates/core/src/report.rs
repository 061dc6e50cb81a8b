//! CSV renderings of sweep points, simulation metrics and MUC results.
//!
//! Every float is printed with a fixed number of decimals so identical runs
//! produce byte-identical files.

use std::io::{self, Write};

use crate::channel::{AccessPolicy, ChannelParams, SimMetrics, ThroughputPoint};
use crate::muc::{MeterReport, MucStats};

pub const METRICS_HEADER: &str =
    "policy,g_offered,g_measured,s_sim,s_analytic,pdr,collisions,retx,drops,seed";
pub const ANALYTIC_HEADER: &str = "policy,g,s";
pub const MUC_HEADER: &str = "muc,frames,accepted,duplicates,rejected,readings,skipped_records";
pub const METER_HEADER: &str = "meter,kind,frames_intact,readings,outage";

fn opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

fn metrics_row(
    out: &mut dyn Write,
    policy: AccessPolicy,
    g_offered: f64,
    s_analytic: Option<f64>,
    m: &SimMetrics,
    seed: u64,
) -> io::Result<()> {
    writeln!(
        out,
        "{},{:.6},{:.6},{:.6},{},{:.6},{},{},{},{}",
        policy.name(),
        g_offered,
        m.g_measured,
        m.s_throughput,
        opt(s_analytic),
        m.pdr,
        m.collisions,
        m.retransmissions,
        m.drops,
        seed
    )
}

/// One row per grid point, in grid order. `g_offered` is the requested grid
/// load (the access load for CSMA).
pub fn write_sweep_csv(out: &mut dyn Write, points: &[ThroughputPoint]) -> io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for p in points {
        metrics_row(out, p.policy, p.g, p.s_analytic, &p.metrics, p.seed)?;
    }
    Ok(())
}

/// Closed-form throughput at the load a run actually produced: fresh load for
/// the Aloha variants, access load for CSMA. `None` when slots differ from
/// the frame length (no closed form).
pub fn analytic_for_run(channel: &ChannelParams, metrics: &SimMetrics) -> Option<f64> {
    match channel.policy {
        AccessPolicy::SlottedAloha if channel.slot_ms() != channel.airtime_ms => None,
        AccessPolicy::CsmaCa => Some(channel.policy.analytic(metrics.g_access, channel.a())),
        policy => Some(policy.analytic(metrics.g_offered, channel.a())),
    }
}

pub fn write_metrics_csv(
    out: &mut dyn Write,
    channel: &ChannelParams,
    metrics: &SimMetrics,
    seed: u64,
) -> io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    metrics_row(
        out,
        channel.policy,
        metrics.g_offered,
        analytic_for_run(channel, metrics),
        metrics,
        seed,
    )
}

pub fn write_muc_csv(
    out: &mut dyn Write,
    muc_name: &str,
    stats: &MucStats,
    meters: &[MeterReport],
) -> io::Result<()> {
    writeln!(out, "{MUC_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        muc_name,
        stats.frames,
        stats.accepted,
        stats.duplicates,
        stats.rejected,
        stats.readings,
        stats.skipped_records
    )?;
    writeln!(out)?;
    writeln!(out, "{METER_HEADER}")?;
    for m in meters {
        writeln!(
            out,
            "{},{},{},{},{}",
            m.address,
            m.kind.name(),
            m.frames_intact,
            m.readings,
            opt(m.outage)
        )?;
    }
    Ok(())
}

/// Closed-form curves for each policy over the given loads.
pub fn write_analytic_csv(
    out: &mut dyn Write,
    policies: &[AccessPolicy],
    loads: &[f64],
    a: f64,
) -> io::Result<()> {
    writeln!(out, "{ANALYTIC_HEADER}")?;
    for &policy in policies {
        for &g in loads {
            writeln!(
                out,
                "{},{:.6},{:.6}",
                policy.name(),
                g,
                policy.analytic(g, a)
            )?;
        }
    }
    Ok(())
}
