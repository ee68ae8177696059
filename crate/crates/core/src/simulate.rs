//! Monte Carlo sampling of the state process and channel, plug-in
//! information estimates, and parameter sweeps of the continuous models.

use serde::{Deserialize, Serialize};

use crate::capacity::{continuous_capacity, Argmax, ContinuousModel, InputLawFamily};
use crate::channels::{DiscreteWiretapChannel, FadingSpec};
use crate::markov::StateChain;
use crate::streams::{sample_index, stream};
use crate::{Error, Result};

/// Cells of `(s~, s)` with fewer samples than this are flagged.
pub const MIN_CELL_SAMPLES: u64 = 100;
/// Input law row used while no delayed state exists yet (`i <= d`).
pub const SENTINEL_INPUT_ROW: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<u8>,
    pub inputs: Vec<u8>,
    pub y: Vec<u8>,
    pub z: Vec<u8>,
    pub d: u64,
    pub seed: u64,
    pub k: usize,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `s_{i-d}`, or `None` (the sentinel) for the first `d` uses.
    pub fn delayed(&self, i: usize) -> Option<usize> {
        let d = usize::try_from(self.d).ok()?;
        (i >= d).then(|| usize::from(self.states[i - d]))
    }
}

/// Samples `t` channel uses. The chain starts from `pi`; the input at use
/// `i` follows `P(x | s~ = s_{i-d})`, and row [`SENTINEL_INPUT_ROW`] while
/// `i <= d`.
///
/// Streams: `simulate/states`, `simulate/inputs`, `simulate/channel`.
pub fn sample_trajectory(
    chain: &StateChain,
    ch: &DiscreteWiretapChannel,
    input: &InputLawFamily,
    d: u64,
    t: usize,
    seed: u64,
) -> Result<Trajectory> {
    let k = chain.states();
    if t == 0 {
        return Err(Error::Domain("trajectory length must be at least 1".into()));
    }
    if ch.states() != k {
        return Err(Error::Shape(format!("channel has {} states, chain has {k}", ch.states())));
    }
    if input.rows.len() != k || input.rows.iter().any(|r| r.len() != ch.nx()) {
        return Err(Error::Shape(format!("input law must be {k} rows of {} entries", ch.nx())));
    }
    if [k, ch.nx(), ch.ny(), ch.nz()].iter().any(|&n| n > 256) {
        return Err(Error::Domain("alphabets above 256 symbols are not supported by the sampler".into()));
    }
    let mut st_rng = stream(seed, "simulate/states");
    let mut in_rng = stream(seed, "simulate/inputs");
    let mut ch_rng = stream(seed, "simulate/channel");
    let kern = chain.kernel();
    let du = usize::try_from(d).unwrap_or(usize::MAX);

    let mut states = Vec::with_capacity(t);
    let mut s = sample_index(&mut st_rng, chain.pi());
    states.push(s as u8);
    for _ in 1..t {
        s = sample_index(&mut st_rng, kern.row(s));
        states.push(s as u8);
    }
    let mut inputs = Vec::with_capacity(t);
    let mut y = Vec::with_capacity(t);
    let mut z = Vec::with_capacity(t);
    for i in 0..t {
        let row = if i >= du { usize::from(states[i - du]) } else { SENTINEL_INPUT_ROW };
        let x = sample_index(&mut in_rng, &input.rows[row]);
        let yz = sample_index(&mut ch_rng, ch.row(usize::from(states[i]), x));
        inputs.push(x as u8);
        y.push((yz / ch.nz()) as u8);
        z.push((yz % ch.nz()) as u8);
    }
    Ok(Trajectory {
        states,
        inputs,
        y,
        z,
        d,
        seed,
        k,
        nx: ch.nx(),
        ny: ch.ny(),
        nz: ch.nz(),
    })
}

/// Which conditional mutual information to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `I(X;Y|S,S~)`.
    Main,
    /// `I(X;Z|S,S~)`.
    Eve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Bits.
    pub value: f64,
    pub stderr: f64,
    /// Samples used (uses with a real delayed state).
    pub samples: u64,
    /// `(s~, s)` cells with fewer than [`MIN_CELL_SAMPLES`] samples.
    pub undersampled: Vec<(usize, usize)>,
}

impl Estimate {
    pub fn is_undersampled(&self) -> bool {
        !self.undersampled.is_empty()
    }
}

/// Plug-in `I(X; Y or Z | S, S~)` from the empirical joint, skipping the
/// sentinel uses. The standard error combines the delta-method variance with
/// the first-order (Miller-Madow) bias, which dominates near independence.
pub fn empirical_cmi(traj: &Trajectory, which: Quantity) -> Estimate {
    let (out, no) = match which {
        Quantity::Main => (&traj.y, traj.ny),
        Quantity::Eve => (&traj.z, traj.nz),
    };
    let k = traj.k;
    let nx = traj.nx;
    let cells = k * k;
    let mut counts = vec![0u64; cells * nx * no];
    let mut n = 0u64;
    for i in 0..traj.len() {
        let Some(sd) = traj.delayed(i) else { continue };
        let c = sd * k + usize::from(traj.states[i]);
        counts[(c * nx + usize::from(traj.inputs[i])) * no + usize::from(out[i])] += 1;
        n += 1;
    }
    let mut undersampled = Vec::new();
    let mut mean = 0.0;
    let mut second = 0.0;
    let mut dof = 0.0;
    let nf = n as f64;
    for c in 0..cells {
        let block = &counts[c * nx * no..(c + 1) * nx * no];
        let nc: u64 = block.iter().sum();
        if nc < MIN_CELL_SAMPLES {
            undersampled.push((c / k, c % k));
        }
        if nc == 0 {
            continue;
        }
        let mut px = vec![0u64; nx];
        let mut po = vec![0u64; no];
        for x in 0..nx {
            for o in 0..no {
                px[x] += block[x * no + o];
                po[o] += block[x * no + o];
            }
        }
        let sx = px.iter().filter(|&&v| v > 0).count() as f64;
        let so = po.iter().filter(|&&v| v > 0).count() as f64;
        dof += (sx - 1.0).max(0.0) * (so - 1.0).max(0.0);
        let ncf = nc as f64;
        for x in 0..nx {
            for o in 0..no {
                let v = block[x * no + o];
                if v == 0 {
                    continue;
                }
                let l = ((v as f64) * ncf / (px[x] as f64 * po[o] as f64)).log2();
                let p = v as f64 / nf;
                mean += p * l;
                second += p * l * l;
            }
        }
    }
    let (value, stderr) = if n == 0 {
        (0.0, f64::INFINITY)
    } else {
        let var = (second - mean * mean).max(0.0) / nf;
        let bias = dof / (2.0 * nf * std::f64::consts::LN_2);
        (mean.max(0.0), (var + bias * bias).sqrt())
    };
    Estimate {
        value,
        stderr,
        samples: n,
        undersampled,
    }
}

/// Empirical one-step transition matrix (rows with no visits are zero).
pub fn transition_frequencies(traj: &Trajectory) -> Vec<Vec<f64>> {
    let k = traj.k;
    let mut counts = vec![vec![0u64; k]; k];
    for w in traj.states.windows(2) {
        counts[usize::from(w[0])][usize::from(w[1])] += 1;
    }
    counts
        .into_iter()
        .map(|row| {
            let tot: u64 = row.iter().sum();
            row.into_iter()
                .map(|c| if tot == 0 { 0.0 } else { c as f64 / tot as f64 })
                .collect()
        })
        .collect()
}

/// Largest `|K_hat - K|` entry.
pub fn transition_error(traj: &Trajectory, chain: &StateChain) -> f64 {
    let emp = transition_frequencies(traj);
    let mut worst: f64 = 0.0;
    for (i, row) in emp.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((v - chain.kernel().get(i, j)).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
}

impl ChiSquare {
    /// Normal-approximation screen: statistic within `z` standard deviations
    /// of its mean.
    pub fn passes(&self, z: f64) -> bool {
        let dof = self.dof as f64;
        self.statistic <= dof + z * (2.0 * dof).sqrt()
    }
}

/// Chi-square screen of `P(s_i | s_{i-d}, x_i)` against the `K^d` row.
///
/// The input only depends on the delayed state, so given `s_{i-d}` it
/// carries no further information about `s_i`. The current output does,
/// through the state-dependent channel, and is not part of the condition.
pub fn delayed_state_screen(traj: &Trajectory, chain: &StateChain) -> ChiSquare {
    let k = traj.k;
    let nx = traj.nx;
    let kd = chain.power(traj.d);
    let mut counts = vec![vec![0u64; k]; k * nx];
    for i in 0..traj.len() {
        let Some(sd) = traj.delayed(i) else { continue };
        counts[sd * nx + usize::from(traj.inputs[i])][usize::from(traj.states[i])] += 1;
    }
    let mut stat = 0.0;
    let mut dof = 0;
    for (cell, row) in counts.iter().enumerate() {
        let sd = cell / nx;
        let tot: u64 = row.iter().sum();
        if tot == 0 {
            continue;
        }
        let support: Vec<usize> = (0..k).filter(|&s| kd.get(sd, s) > 0.0).collect();
        dof += support.len().saturating_sub(1);
        for &s in &support {
            let e = tot as f64 * kd.get(sd, s);
            stat += (row[s] as f64 - e).powi(2) / e;
        }
    }
    ChiSquare { statistic: stat, dof }
}

/// Grid over `u (outer) x sigma_w^2 x feedback x d (inner)` for a two-state
/// chain with ratio `c`. `None` in `d` is the `d -> infinity` limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub d: Vec<Option<u64>>,
    pub u: Vec<f64>,
    pub c: f64,
    pub sigma2_w: Vec<f64>,
    pub feedback: Vec<bool>,
    /// Use the fading terms (gains `g`, `l` of the [`FadingSpec`]).
    #[serde(default)]
    pub fading: bool,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.d.len() * self.u.len() * self.sigma2_w.len() * self.feedback.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(u, sigma_w^2, feedback, d)` of grid point `index`.
    pub fn point(&self, index: usize) -> (f64, f64, bool, Option<u64>) {
        let nd = self.d.len();
        let nf = self.feedback.len();
        let nw = self.sigma2_w.len();
        let id = index % nd;
        let ifb = (index / nd) % nf;
        let iw = (index / (nd * nf)) % nw;
        let iu = index / (nd * nf * nw);
        (self.u[iu], self.sigma2_w[iw], self.feedback[ifb], self.d[id])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub index: usize,
    pub model: ContinuousModel,
    pub u: f64,
    pub c: f64,
    pub sigma2_w: f64,
    pub feedback: bool,
    pub d: Option<u64>,
    pub value: Option<f64>,
    /// Power per delayed state at the optimum.
    pub power: Option<Vec<f64>>,
    pub flags: Vec<String>,
    pub error: Option<String>,
}

fn sweep_point(grid: &SweepGrid, spec: &FadingSpec, index: usize) -> SweepRecord {
    let (u, w2, feedback, d) = grid.point(index);
    let model = match (grid.fading, feedback) {
        (false, false) => ContinuousModel::Gaussian,
        (false, true) => ContinuousModel::GaussianFeedback,
        (true, false) => ContinuousModel::Fading,
        (true, true) => ContinuousModel::FadingFeedback,
    };
    let mut rec = SweepRecord {
        index,
        model,
        u,
        c: grid.c,
        sigma2_w: w2,
        feedback,
        d,
        value: None,
        power: None,
        flags: Vec::new(),
        error: None,
    };
    let mut s = spec.clone();
    s.base.sigma2_w = w2;
    let outcome = s
        .validate()
        .and_then(|_| StateChain::two_state(u, grid.c))
        .and_then(|chain| continuous_capacity(&s, model, &chain, d));
    match outcome {
        Ok(r) => {
            rec.value = Some(r.value);
            if let Argmax::Power(p) = &r.argmax {
                rec.power = Some(p.p.clone());
            }
            rec.flags = r.flags;
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// One record per grid point, in grid order. A failing point records its
/// error and the sweep continues.
pub fn sweep(grid: &SweepGrid, spec: &FadingSpec) -> Vec<SweepRecord> {
    let n = grid.len();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(|i| sweep_point(grid, spec, i)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(|i| sweep_point(grid, spec, i)).collect()
    }
}

/// CSV with a header naming every parameter column; `d = inf` for the limit.
pub fn sweep_to_csv(records: &[SweepRecord], params_hash: &str) -> String {
    let mut out = String::from("index,model,u,c,sigma2_w,feedback,d,value,power,flags,error,params-hash\n");
    for r in records {
        let model = serde_json::to_value(r.model)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let d = r.d.map_or_else(|| "inf".to_owned(), |d| d.to_string());
        let value = r.value.map(|v| v.to_string()).unwrap_or_default();
        let power = r
            .power
            .as_ref()
            .map(|p| p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        let error = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.index,
            model,
            r.u,
            r.c,
            r.sigma2_w,
            r.feedback,
            d,
            value,
            power,
            r.flags.join(";"),
            error,
            params_hash
        ));
    }
    out
}
