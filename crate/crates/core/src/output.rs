//! Trajectory serializers shared by the CLI and the browser demo.
//!
//! Both writers are deterministic down to the byte: floats go through Rust's
//! shortest round-trip formatting, column order follows the trajectory, and
//! `+inf` is emitted as the literal `inf` (quoted in JSON, bare in CSV).

use crate::ode::Trajectory;
use std::fmt::Write;

fn push_f64(out: &mut String, v: f64) {
    if v.is_infinite() {
        out.push_str(if v > 0.0 { "inf" } else { "-inf" });
    } else {
        let _ = write!(out, "{v}");
    }
}

fn push_json_f64(out: &mut String, v: f64) {
    if v.is_finite() {
        let _ = write!(out, "{v}");
    } else if v.is_nan() {
        out.push_str("\"nan\"");
    } else {
        out.push_str(if v > 0.0 { "\"inf\"" } else { "\"-inf\"" });
    }
}

fn push_csv_field(out: &mut String, name: &str) {
    if name.contains([',', '"', '\n']) {
        out.push('"');
        out.push_str(&name.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(name);
    }
}

fn push_json_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Renders the trajectory as CSV with header `t,<states...>,<channels...>`.
/// Header fields containing commas are quoted per RFC 4180.
pub fn trajectory_csv(traj: &Trajectory, state_names: &[String]) -> String {
    let dim = traj.states.first().map_or(0, Vec::len);
    assert_eq!(state_names.len(), dim, "one name per state component");

    let mut out = String::new();
    out.push('t');
    for name in state_names {
        out.push(',');
        push_csv_field(&mut out, name);
    }
    for (name, _) in &traj.channels {
        out.push(',');
        push_csv_field(&mut out, name);
    }
    out.push('\n');

    for (row, (&t, state)) in traj.times.iter().zip(&traj.states).enumerate() {
        push_f64(&mut out, t);
        for &x in state {
            out.push(',');
            push_f64(&mut out, x);
        }
        for (_, series) in &traj.channels {
            out.push(',');
            push_f64(&mut out, series[row]);
        }
        out.push('\n');
    }
    out
}

/// Renders the trajectory as JSON mirroring the CSV layout: a `times` array
/// plus named series objects for states and channels, with run statistics.
pub fn trajectory_json(traj: &Trajectory, state_names: &[String]) -> String {
    let dim = traj.states.first().map_or(0, Vec::len);
    assert_eq!(state_names.len(), dim, "one name per state component");

    let mut out = String::from("{\n  \"times\": [");
    for (i, &t) in traj.times.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        push_json_f64(&mut out, t);
    }
    out.push_str("],\n  \"states\": [");
    for (j, name) in state_names.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        out.push_str("\n    {\"name\": ");
        push_json_string(&mut out, name);
        out.push_str(", \"values\": [");
        for (i, state) in traj.states.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            push_json_f64(&mut out, state[j]);
        }
        out.push_str("]}");
    }
    out.push_str("\n  ],\n  \"channels\": [");
    for (k, (name, series)) in traj.channels.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str("\n    {\"name\": ");
        push_json_string(&mut out, name);
        out.push_str(", \"values\": [");
        for (i, &v) in series.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            push_json_f64(&mut out, v);
        }
        out.push_str("]}");
    }
    if !traj.channels.is_empty() {
        out.push_str("\n  ");
    }
    let stats = traj.stats;
    let _ = write!(
        out,
        "],\n  \"stats\": {{\"accepted_steps\": {}, \"rejected_steps\": {}, \"clamp_events\": {}}}\n}}\n",
        stats.accepted_steps, stats.rejected_steps, stats.clamp_events
    );
    out
}
