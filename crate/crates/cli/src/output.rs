//! CSV, summary and plot-script writers. Floats are written with 17
//! significant digits so a trace reproduces the learning cost exactly.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use esmpc::learner::{LearningTrace, StepRecord};

use crate::config::ScenarioFile;
use crate::report::RunReport;
use crate::RunOutcome;

pub const TRACE_HEADER: &str = "t,x1,x2,x3,x4,u,y1,y2,r,y_e1,y_e2,sigma,qp_iterations";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace<W: Write>(mut w: W, records: &[StepRecord]) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in records {
        let mut row: Vec<String> = vec![fmt_f64(r.t)];
        row.extend(r.x.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(r.u[0]));
        row.extend(r.y.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(r.r[0]));
        row.extend(r.y_e.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(r.sigma));
        row.push(r.qp_iterations.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_learning<W: Write>(mut w: W, names: &[String], trace: Option<&LearningTrace>) -> io::Result<()> {
    let mut header = vec!["iter".to_string(), "Q".to_string()];
    header.extend(names.iter().cloned());
    writeln!(w, "{}", header.join(","))?;
    if let Some(t) = trace {
        for it in &t.iterations {
            let mut row = vec![it.iteration.to_string(), fmt_f64(it.q)];
            row.extend(it.estimate.iter().map(|&v| fmt_f64(v)));
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots for one run directory: closed-loop outputs and, for learning
runs, the cost and estimate histories. Usage: python3 plot.py [DIR]"""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

d = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))


def columns(name):
    with open(os.path.join(d, name)) as f:
        rows = list(csv.DictReader(f))
    if not rows:
        return {}
    return {k: [float(r[k]) for r in rows] for k in rows[0]}


summary = {}
with open(os.path.join(d, "summary.txt")) as f:
    for line in f:
        if " = " in line:
            k, v = line.strip().split(" = ", 1)
            summary[k] = v

scen = {}
with open(os.path.join(d, "scenario.toml")) as f:
    section = ""
    for line in f:
        line = line.strip()
        if line.startswith("["):
            section = line.strip("[]")
        elif " = " in line:
            k, v = line.split(" = ", 1)
            scen[section + "." + k] = v

tr = columns("trace.csv")
t = tr["t"]
torque_limit = float(scen.get("limits.torque", "nan"))
voltage_limit = float(scen.get("limits.voltage", "nan"))

fig, ax = plt.subplots(3, 1, sharex=True, figsize=(8, 8))
ax[0].plot(t, tr["r"], "k--", label="reference")
ax[0].plot(t, tr["y1"], label="load angle")
ax[0].set_ylabel("rad")
ax[0].legend(loc="upper right")
ax[1].plot(t, tr["y2"])
for s in (1, -1):
    ax[1].axhline(s * torque_limit, color="r", ls=":")
ax[1].set_ylabel("shaft torque [Nm]")
ax[2].plot(t, tr["u"])
for s in (1, -1):
    ax[2].axhline(s * voltage_limit, color="r", ls=":")
ax[2].set_ylabel("voltage [V]")
ax[2].set_xlabel("t [s]")
fig.suptitle(summary.get("scenario", ""))
fig.tight_layout()
fig.savefig(os.path.join(d, "outputs.png"), dpi=120)

lr = columns("learning.csv")
if lr:
    names = [k for k in lr if k not in ("iter", "Q")]
    fig, ax = plt.subplots(1 + len(names), 1, sharex=True, figsize=(8, 3 + 2.5 * len(names)))
    ax[0].semilogy(lr["iter"], lr["Q"], "o-")
    if "epsilon_q" in summary:
        ax[0].axhline(float(summary["epsilon_q"]), color="r", ls=":", label="threshold")
        ax[0].legend()
    ax[0].set_ylabel("Q")
    for a, n in zip(ax[1:], names):
        a.plot(lr["iter"], lr[n], "o-")
        key = "true_" + n
        if key in summary:
            a.axhline(float(summary[key]), color="k", ls="--", label="true")
            a.legend()
        a.set_ylabel(n)
    ax[-1].set_xlabel("iteration")
    fig.tight_layout()
    fig.savefig(os.path.join(d, "learning.png"), dpi=120)
"#;

pub fn write_all(outcome: &RunOutcome, report: &RunReport, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let names = outcome
        .learning
        .as_ref()
        .map(|l| l.trace.names.clone())
        .unwrap_or_else(|| outcome.scenario.learned.iter().map(|l| format!("d{}", l.param.name())).collect());

    let mut trace = BufWriter::new(fs::File::create(dir.join("trace.csv"))?);
    write_trace(&mut trace, &outcome.records)?;
    trace.flush()?;

    let mut learning = BufWriter::new(fs::File::create(dir.join("learning.csv"))?);
    write_learning(&mut learning, &names, outcome.learning.as_ref().map(|l| &l.trace))?;
    learning.flush()?;

    fs::write(dir.join("summary.txt"), report.to_summary())?;
    // the measured nominal cost is stored here so later runs can reuse it
    fs::write(dir.join("scenario.toml"), ScenarioFile::from_scenario(&outcome.scenario).to_toml())?;
    fs::write(dir.join("plot.py"), PLOT_SCRIPT)?;
    Ok(())
}
