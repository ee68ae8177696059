use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use fsmwt_core::capacity::{
    continuous_capacity, secrecy_capacity_discrete_at, secrecy_capacity_discrete_feedback_at, CapacityResult,
    ContinuousModel, InputLawFamily, FLAG_NONCONCAVE,
};
use fsmwt_core::codec::{conditional_rates, run_experiment, uniform_input, CodecExperiment, RunReport, StateRate};
use fsmwt_core::region::trace_degraded_region_at;
use fsmwt_core::simulate::{sweep, sweep_to_csv, SweepGrid};

use crate::config::{ExperimentConfig, Loaded, Mode};
use crate::Failure;

/// What a command produced, for the exit code.
#[derive(Debug, Default)]
pub struct Outcome {
    pub numerical_flag: bool,
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Failure::io(&path, e))
}

fn pretty<T: Serialize>(v: &T) -> String {
    // through Value so every object comes out with sorted keys
    let v = serde_json::to_value(v).expect("serializable");
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

fn delay_label(d: Option<u64>) -> String {
    d.map_or_else(|| "inf".to_string(), |d| d.to_string())
}

pub fn capacity(loaded: &Loaded, dir: &Path) -> Result<Outcome, Failure> {
    let cfg = &loaded.config;
    let feedback = cfg.mode == Mode::CapacityFeedback;
    let chain = cfg.chain()?;
    let d = cfg.delay()?;
    let (result, model): (CapacityResult, String) = if let Some((spec, fading)) = cfg.continuous()? {
        let model = match (fading, feedback) {
            (false, false) => ContinuousModel::Gaussian,
            (false, true) => ContinuousModel::GaussianFeedback,
            (true, false) => ContinuousModel::Fading,
            (true, true) => ContinuousModel::FadingFeedback,
        };
        let name = serde_json::to_value(model).ok().and_then(|v| v.as_str().map(String::from));
        (continuous_capacity(&spec, model, &chain, d)?, name.unwrap_or_default())
    } else {
        let ch = cfg.discrete(&loaded.base)?.expect("one channel present");
        let dj = match d {
            Some(d) => chain.delayed_joint(d),
            None => chain.delayed_joint_limit(),
        };
        let r = if feedback {
            secrecy_capacity_discrete_feedback_at(&ch, &dj)?
        } else {
            secrecy_capacity_discrete_at(&ch, &dj)?
        };
        (r, if feedback { "discrete_feedback" } else { "discrete" }.to_string())
    };
    let hash = cfg.params_hash();
    let doc = json!({
        "params_hash": hash,
        "model": model,
        "d": delay_label(d),
        "result": result,
        "config": cfg,
    });
    write(dir, "capacity.json", &pretty(&doc))?;
    let mut w = csv_writer();
    w.write_record(["model", "d", "value", "flags", "params-hash"]).map_err(Failure::csv)?;
    w.write_record([
        model.as_str(),
        &delay_label(d),
        &result.value.to_string(),
        &result.flags.join(";"),
        &hash,
    ])
    .map_err(Failure::csv)?;
    write(dir, "capacity.csv", &finish_csv(w))?;
    println!("{:.6}", result.value);
    Ok(Outcome {
        numerical_flag: result.has_flag(FLAG_NONCONCAVE),
    })
}

const PLOT_SCRIPT: &str = r#"# Capacity against feedback delay, one curve per memory u.
# Reads only sweep.csv from this directory. Run: python3 plot_sweep.py
import csv
import os
from collections import defaultdict

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "sweep.csv"), newline="") as f:
    rows = [r for r in csv.DictReader(f) if r["value"]]

panels = defaultdict(lambda: defaultdict(list))
limits = defaultdict(dict)
for r in rows:
    key = (r["model"], float(r["sigma2_w"]))
    u = float(r["u"])
    if r["d"] == "inf":
        limits[key][u] = float(r["value"])
    else:
        panels[key][u].append((int(r["d"]), float(r["value"])))

keys = sorted(set(panels) | set(limits))
fig, axes = plt.subplots(1, len(keys), figsize=(5 * len(keys), 4), squeeze=False)
for ax, key in zip(axes[0], keys):
    for i, u in enumerate(sorted(set(panels[key]) | set(limits[key]))):
        color = "C%d" % i
        pts = sorted(panels[key].get(u, []))
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", ms=3, color=color, label="u = %g" % u)
        if u in limits[key]:
            ax.axhline(limits[key][u], ls="--", lw=0.8, color=color)
    ax.set_title("%s, sigma_w^2 = %g" % key)
    ax.set_xlabel("feedback delay d")
    ax.set_ylabel("secrecy capacity (bits/use)")
    ax.grid(alpha=0.3)
    ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "sweep.png"), dpi=150)
"#;

pub fn sweep_cmd(loaded: &Loaded, dir: &Path) -> Result<Outcome, Failure> {
    let cfg = &loaded.config;
    let sc = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::config("sweep mode needs a [sweep] section with `u` and `d_max`"))?;
    let (spec, fading) = cfg
        .continuous()?
        .ok_or_else(|| Failure::config("sweep needs [channel.gaussian] or [channel.fading]"))?;
    if cfg.chain.matrix.is_some() {
        return Err(Failure::config("sweep varies u; give `chain.c` rather than a matrix"));
    }
    let mut d: Vec<Option<u64>> = (0..=sc.d_max).map(Some).collect();
    if sc.include_limit {
        d.push(None);
    }
    let grid = SweepGrid {
        d,
        u: sc.u.clone(),
        c: cfg.chain.c.unwrap_or(1.0),
        sigma2_w: sc.sigma2_w.clone().unwrap_or_else(|| vec![spec.base.sigma2_w]),
        feedback: sc.feedback.clone(),
        fading,
    };
    if grid.is_empty() {
        return Err(Failure::config("sweep grid is empty"));
    }
    let records = sweep(&grid, &spec);
    write(dir, "sweep.csv", &sweep_to_csv(&records, &cfg.params_hash()))?;
    write(dir, "plot_sweep.py", PLOT_SCRIPT)?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} sweep points failed; see the error column", records.len());
    }
    eprintln!("wrote {} rows to {}", records.len(), dir.join("sweep.csv").display());
    Ok(Outcome {
        numerical_flag: failed > 0 || records.iter().any(|r| r.flags.iter().any(|f| f == FLAG_NONCONCAVE)),
    })
}

pub fn region(loaded: &Loaded, dir: &Path) -> Result<Outcome, Failure> {
    let cfg = &loaded.config;
    let ch = cfg
        .discrete(&loaded.base)?
        .ok_or_else(|| Failure::config("region needs [channel.discrete]"))?;
    let chain = cfg.chain()?;
    let d = cfg.delay()?;
    let dj = match d {
        Some(d) => chain.delayed_joint(d),
        None => chain.delayed_joint_limit(),
    };
    let boundary = trace_degraded_region_at(&ch, &dj, cfg.region.feedback, cfg.region.points)?;
    let hash = cfg.params_hash();
    let doc = json!({
        "params_hash": hash,
        "d": delay_label(d),
        "boundary": boundary,
        "config": cfg,
    });
    write(dir, "region.json", &pretty(&doc))?;
    let mut w = csv_writer();
    w.write_record(["r", "re", "params-hash"]).map_err(Failure::csv)?;
    for p in &boundary.points {
        w.write_record([p.r.to_string(), p.re.to_string(), hash.clone()]).map_err(Failure::csv)?;
    }
    write(dir, "region.csv", &finish_csv(w))?;
    println!("{:.6}", boundary.secrecy_capacity);
    Ok(Outcome::default())
}

fn per_state(name: &str, v: &[f64], k: usize) -> Result<(), Failure> {
    if v.len() == k {
        Ok(())
    } else {
        Err(Failure::config(format!("codec.{name} has {} entries, chain has {k} states", v.len())))
    }
}

pub fn codec(loaded: &Loaded, dir: &Path) -> Result<Outcome, Failure> {
    let cfg: &ExperimentConfig = &loaded.config;
    let cc = cfg
        .codec
        .as_ref()
        .ok_or_else(|| Failure::config("codec mode needs a [codec] section with `n`"))?;
    let ch = cfg
        .discrete(&loaded.base)?
        .ok_or_else(|| Failure::config("codec needs [channel.discrete]"))?;
    let chain = cfg.chain()?;
    let k = chain.states();
    let d = cfg
        .delay()?
        .ok_or_else(|| Failure::config("codec runs need a finite delay d"))?;
    let input = match &cc.input {
        Some(rows) => InputLawFamily { rows: rows.clone() },
        None => uniform_input(k, ch.nx()),
    };
    let dj = chain.delayed_joint(d);
    let needs_analysis = cc.secret.is_none() || (cc.feedback && cc.key_rate.is_none());
    let cond = if needs_analysis {
        Some(conditional_rates(&ch, &dj, &input)?)
    } else {
        None
    };
    let rates: Vec<StateRate> = match &cc.secret {
        Some(secret) => {
            per_state("secret", secret, k)?;
            let binning = cc.binning.clone().unwrap_or_else(|| vec![0.0; k]);
            per_state("binning", &binning, k)?;
            secret
                .iter()
                .zip(&binning)
                .map(|(s, b)| StateRate::wiretap(s * cc.scale, b * cc.scale))
                .collect()
        }
        None => cond
            .as_ref()
            .expect("computed above")
            .iter()
            .map(|r| StateRate::wiretap(r.secrecy() * cc.scale, r.eve.max(0.0) * cc.scale))
            .collect(),
    };
    let key_rate = match (&cc.key_rate, cc.feedback) {
        (Some(kr), _) => {
            per_state("key_rate", kr, k)?;
            kr.clone()
        }
        (None, true) => cond.as_ref().expect("computed above").iter().map(|r| r.key_bound).collect(),
        (None, false) => vec![0.0; k],
    };
    let seeds = cc.seeds.clone().unwrap_or_else(|| vec![cfg.seed]);
    let mut lines = String::new();
    let mut reports: Vec<RunReport> = Vec::new();
    for seed in seeds {
        let exp = CodecExperiment {
            channel: ch.clone(),
            chain: chain.clone(),
            d,
            rates: rates.clone(),
            input: Some(input.clone()),
            n: cc.n,
            blocks: cc.blocks,
            seed,
            feedback: cc.feedback,
            key_rate: key_rate.clone(),
        };
        let report = run_experiment(&exp)?;
        let line: Value = json!({ "seed": seed, "params_hash": cfg.params_hash(), "report": report });
        lines.push_str(&line.to_string());
        lines.push('\n');
        reports.push(report);
    }
    write(dir, "codec.jsonl", &lines)?;
    for r in &reports {
        println!(
            "error_rate {:.6} equivocation {:.6} message_rate {:.6} key_rate {:.6}",
            r.error_rate, r.equivocation, r.message_rate, r.key_rate
        );
    }
    Ok(Outcome::default())
}
