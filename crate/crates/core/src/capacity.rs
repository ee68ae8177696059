//! Secrecy capacities of degraded channels: discrete input-law
//! optimization and closed-form Gaussian / fading terms with power
//! allocation over the delayed state.

use serde::{Deserialize, Serialize};

use crate::channels::{DiscreteWiretapChannel, FadingSpec, GaussianSpec};
use crate::error::{Error, Result};
use crate::markov::{DelayedJoint, StateChain};

const LOG2_E: f64 = std::f64::consts::LOG2_E;
const TWO_PI_E: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::E;

/// Largest input alphabet accepted by the discrete optimizers.
pub const MAX_INPUTS: usize = 6;

/// Recorded on every feedback result: negative `min{.,.}` terms count as 0.
pub const FLAG_MIN_FLOORED: &str = "min_terms_floored_at_zero";
/// The Lagrangian solver was replaced by coordinate ascent.
pub const FLAG_NONCONCAVE: &str = "nonconcave_fallback";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p: Vec<f64>,
}

impl PowerAllocation {
    pub fn average(&self, pi: &[f64]) -> f64 {
        self.p.iter().zip(pi).map(|(p, w)| p * w).sum()
    }
}

/// `P(x | s~)`, one row per delayed state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputLawFamily {
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Argmax {
    Power(PowerAllocation),
    Input(InputLawFamily),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Bits per channel use.
    pub value: f64,
    pub argmax: Argmax,
    /// Unweighted term at the optimum, indexed `[s~][s]`.
    pub per_state_terms: Vec<Vec<f64>>,
    /// `pi(s~) K^d(s~, s)`.
    pub weights: Vec<Vec<f64>>,
    pub flags: Vec<String>,
}

impl CapacityResult {
    pub fn weighted_sum(&self) -> f64 {
        self.weights
            .iter()
            .flatten()
            .zip(self.per_state_terms.iter().flatten())
            .map(|(w, t)| w * t)
            .sum()
    }

    pub fn has_flag(&self, f: &str) -> bool {
        self.flags.iter().any(|g| g == f)
    }
}

// ---------------------------------------------------------------------------
// discrete channels

/// Per-state conditional laws of a discrete channel in the shapes the
/// optimizers need.
#[derive(Debug, Clone)]
pub(crate) struct StateLaws {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// `main[s][x][y]`
    pub main: Vec<Vec<Vec<f64>>>,
    /// `eve[s][x][z]`
    pub eve: Vec<Vec<Vec<f64>>>,
    /// `joint[s][x][y * nz + z]`
    pub joint: Vec<Vec<Vec<f64>>>,
}

impl StateLaws {
    pub fn new(ch: &DiscreteWiretapChannel) -> Self {
        let (ns, nx, ny, nz) = (ch.states(), ch.nx(), ch.ny(), ch.nz());
        let main = (0..ns)
            .map(|s| (0..nx).map(|x| (0..ny).map(|y| ch.main_prob(s, x, y)).collect()).collect())
            .collect();
        let eve = (0..ns)
            .map(|s| (0..nx).map(|x| (0..nz).map(|z| ch.eve_prob(s, x, z)).collect()).collect())
            .collect();
        let joint = (0..ns)
            .map(|s| (0..nx).map(|x| ch.row(s, x).to_vec()).collect())
            .collect();
        Self {
            nx,
            ny,
            nz,
            main,
            eve,
            joint,
        }
    }

    pub fn i_main(&self, s: usize, q: &[f64]) -> f64 {
        mutual_info(q, &self.main[s])
    }

    pub fn i_eve(&self, s: usize, q: &[f64]) -> f64 {
        mutual_info(q, &self.eve[s])
    }

    /// `H(Y | Z, S = s)` under input law `q`.
    pub fn h_y_given_z(&self, s: usize, q: &[f64]) -> f64 {
        let (ny, nz) = (self.ny, self.nz);
        let mut pyz = vec![0.0; ny * nz];
        for (x, &qx) in q.iter().enumerate() {
            if qx > 0.0 {
                for (a, &b) in pyz.iter_mut().zip(&self.joint[s][x]) {
                    *a += qx * b;
                }
            }
        }
        let mut pz = vec![0.0; nz];
        for y in 0..ny {
            for z in 0..nz {
                pz[z] += pyz[y * nz + z];
            }
        }
        let mut h = 0.0;
        for y in 0..ny {
            for z in 0..nz {
                let p = pyz[y * nz + z];
                if p > 0.0 {
                    h -= p * (p / pz[z]).log2();
                }
            }
        }
        h.max(0.0)
    }

    /// `d/dq_x` of `I(q; W)` up to a constant shared by all `x`.
    pub(crate) fn mi_gradient(q: &[f64], w: &[Vec<f64>], out: &mut [f64], scale: f64) {
        let r = output_law(q, w);
        for (x, row) in w.iter().enumerate() {
            let mut dkl = 0.0;
            for (wy, ry) in row.iter().zip(&r) {
                if *wy > 0.0 {
                    dkl += wy * (wy / ry).log2();
                }
            }
            out[x] += scale * dkl;
        }
    }
}

fn output_law(q: &[f64], w: &[Vec<f64>]) -> Vec<f64> {
    let n = w.first().map_or(0, |r| r.len());
    let mut r = vec![0.0; n];
    for (qx, row) in q.iter().zip(w) {
        if *qx > 0.0 {
            for (a, b) in r.iter_mut().zip(row) {
                *a += qx * b;
            }
        }
    }
    r
}

/// `I(X;Y)` in bits for input `q` and channel rows `w[x][y]`.
pub fn mutual_info(q: &[f64], w: &[Vec<f64>]) -> f64 {
    let r = output_law(q, w);
    let mut acc = 0.0;
    for (qx, row) in q.iter().zip(w) {
        if *qx > 0.0 {
            for (wy, ry) in row.iter().zip(&r) {
                if *wy > 0.0 {
                    acc += qx * wy * (wy / ry).ln();
                }
            }
        }
    }
    (acc * LOG2_E).max(0.0)
}

/// Grid resolution used for an input alphabet of size `n`.
pub fn simplex_resolution(n: usize) -> usize {
    if n <= 3 {
        return 200;
    }
    let mut r = 200;
    while r > 2 && binomial(r + n - 1, n - 1) > 100_000 {
        r -= 1;
    }
    r
}

fn binomial(n: usize, k: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Calls `f` on every point of the simplex grid with resolution `r`.
pub fn for_each_simplex_point(n: usize, r: usize, mut f: impl FnMut(&[f64])) {
    let mut counts = vec![0usize; n];
    let mut q = vec![0.0; n];
    fn rec(i: usize, left: usize, r: usize, counts: &mut [usize], q: &mut [f64], f: &mut dyn FnMut(&[f64])) {
        let n = counts.len();
        if i + 1 == n {
            counts[i] = left;
            for (a, c) in q.iter_mut().zip(counts.iter()) {
                *a = *c as f64 / r as f64;
            }
            f(q);
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            rec(i + 1, left - c, r, counts, q, f);
        }
    }
    if n == 0 {
        return;
    }
    rec(0, r, r, &mut counts, &mut q, &mut f);
}

/// Best grid point, ties broken by first occurrence.
pub fn simplex_grid_max(n: usize, r: usize, f: &dyn Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let mut best = (vec![1.0 / n as f64; n], f64::NEG_INFINITY);
    for_each_simplex_point(n, r, |q| {
        let v = f(q);
        if v > best.1 {
            best = (q.to_vec(), v);
        }
    });
    best
}

/// Golden-section maximization on `[a, b]`.
pub(crate) fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let m = 0.5 * (a + b);
    let fm = f(m);
    // endpoints matter for monotone objectives
    [(m, fm), (a, f(a)), (b, f(b))]
        .into_iter()
        .fold((m, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best })
}

fn shifted(q: &[f64], i: usize, j: usize, t: f64) -> Vec<f64> {
    let mut p = q.to_vec();
    p[i] += t;
    p[j] -= t;
    p[i] = p[i].max(0.0);
    p[j] = p[j].max(0.0);
    p
}

/// Pairwise Frank-Wolfe ascent for a concave objective with gradient.
fn frank_wolfe(
    f: &dyn Fn(&[f64]) -> f64,
    grad: &dyn Fn(&[f64]) -> Vec<f64>,
    mut q: Vec<f64>,
    steps: usize,
) -> (Vec<f64>, f64) {
    let mut fq = f(&q);
    for _ in 0..steps {
        let g = grad(&q);
        let i = (0..q.len()).fold(0, |b, x| if g[x] > g[b] { x } else { b });
        let j = (0..q.len())
            .filter(|&x| q[x] > 0.0)
            .fold(None, |b: Option<usize>, x| match b {
                Some(b) if g[b] <= g[x] => Some(b),
                _ => Some(x),
            });
        let Some(j) = j else { break };
        if i == j || g[i] - g[j] < 1e-13 {
            break;
        }
        let qj = q[j];
        let (t, v) = golden_max(&|t| f(&shifted(&q, i, j, t)), 0.0, qj, 1e-13);
        if v <= fq {
            break;
        }
        q = shifted(&q, i, j, t);
        fq = v;
    }
    (q, fq)
}

/// Golden-section sweeps along every direction `e_i - e_j`.
fn pairwise_ascent(f: &dyn Fn(&[f64]) -> f64, mut q: Vec<f64>, rounds: usize) -> (Vec<f64>, f64) {
    let n = q.len();
    let mut fq = f(&q);
    for _ in 0..rounds {
        let start = fq;
        for i in 0..n {
            for j in i + 1..n {
                let (t, v) = golden_max(&|t| f(&shifted(&q, i, j, t)), -q[i], q[j], 1e-13);
                if v > fq {
                    q = shifted(&q, i, j, t);
                    fq = v;
                }
            }
        }
        if fq - start <= 1e-14 {
            break;
        }
    }
    (q, fq)
}

/// Maximizes `f` over the probability simplex: grid start, then
/// Frank-Wolfe (if a gradient is supplied) and pairwise polishing.
pub(crate) fn maximize_simplex(
    n: usize,
    f: &dyn Fn(&[f64]) -> f64,
    grad: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
) -> (Vec<f64>, f64) {
    let (q0, _) = simplex_grid_max(n, simplex_resolution(n), f);
    let (q1, _) = match grad {
        Some(g) => frank_wolfe(f, g, q0, 200),
        None => (q0, 0.0),
    };
    pairwise_ascent(f, q1, 50)
}

fn check_inputs(ch: &DiscreteWiretapChannel, dj: &DelayedJoint) -> Result<()> {
    ch.require_degraded()?;
    if ch.states() != dj.states() {
        return Err(Error::Shape(format!(
            "channel has {} states, chain has {}",
            ch.states(),
            dj.states()
        )));
    }
    if ch.nx() > MAX_INPUTS {
        return Err(Error::Guardrail {
            what: "input alphabet size",
            estimate: ch.nx() as u128,
            limit: MAX_INPUTS as u128,
        });
    }
    Ok(())
}

/// Per-`s~` objective of the no-feedback problem, with its gradient.
pub(crate) fn secrecy_objective<'a>(
    laws: &'a StateLaws,
    dj: &'a DelayedJoint,
    st: usize,
    mu: f64,
) -> (impl Fn(&[f64]) -> f64 + 'a, impl Fn(&[f64]) -> Vec<f64> + 'a) {
    let k = dj.states();
    let f = move |q: &[f64]| {
        (0..k)
            .map(|s| {
                let w = dj.transition(st, s);
                if w == 0.0 {
                    return 0.0;
                }
                let iy = laws.i_main(s, q);
                w * (iy - laws.i_eve(s, q) + mu * iy)
            })
            .sum()
    };
    let g = move |q: &[f64]| {
        let mut out = vec![0.0; q.len()];
        for s in 0..k {
            let w = dj.transition(st, s);
            if w > 0.0 {
                StateLaws::mi_gradient(q, &laws.main[s], &mut out, w * (1.0 + mu));
                StateLaws::mi_gradient(q, &laws.eve[s], &mut out, -w);
            }
        }
        out
    };
    (f, g)
}

/// Per-`s~` objective of the feedback problem.
pub(crate) fn feedback_objective<'a>(
    laws: &'a StateLaws,
    dj: &'a DelayedJoint,
    st: usize,
    mu: f64,
) -> impl Fn(&[f64]) -> f64 + 'a {
    let k = dj.states();
    move |q: &[f64]| {
        (0..k)
            .map(|s| {
                let w = dj.transition(st, s);
                if w == 0.0 {
                    return 0.0;
                }
                let iy = laws.i_main(s, q);
                w * (iy.min(laws.h_y_given_z(s, q)) + mu * iy)
            })
            .sum()
    }
}

/// `max sum pi(s~) K^d(s~,s) [I(X;Y|s,s~) - I(X;Z|s,s~)]` over `P(x|s~)`.
pub fn secrecy_capacity_discrete(
    ch: &DiscreteWiretapChannel,
    chain: &StateChain,
    d: u64,
) -> Result<CapacityResult> {
    secrecy_capacity_discrete_at(ch, &chain.delayed_joint(d))
}

pub fn secrecy_capacity_discrete_at(ch: &DiscreteWiretapChannel, dj: &DelayedJoint) -> Result<CapacityResult> {
    check_inputs(ch, dj)?;
    let laws = StateLaws::new(ch);
    let k = dj.states();
    let mut rows = Vec::with_capacity(k);
    for st in 0..k {
        let (f, g) = secrecy_objective(&laws, dj, st, 0.0);
        rows.push(maximize_simplex(laws.nx, &f, Some(&g)).0);
    }
    let terms = |st: usize, s: usize| {
        let q = &rows[st];
        (laws.i_main(s, q) - laws.i_eve(s, q)).max(0.0)
    };
    Ok(discrete_result(dj, &rows, terms, vec![]))
}

/// `max sum pi(s~) K^d(s~,s) min{I(X;Y|s,s~), H(Y|Z,s,s~)}` over `P(x|s~)`.
pub fn secrecy_capacity_discrete_feedback(
    ch: &DiscreteWiretapChannel,
    chain: &StateChain,
    d: u64,
) -> Result<CapacityResult> {
    secrecy_capacity_discrete_feedback_at(ch, &chain.delayed_joint(d))
}

pub fn secrecy_capacity_discrete_feedback_at(
    ch: &DiscreteWiretapChannel,
    dj: &DelayedJoint,
) -> Result<CapacityResult> {
    check_inputs(ch, dj)?;
    let laws = StateLaws::new(ch);
    let k = dj.states();
    let mut rows = Vec::with_capacity(k);
    for st in 0..k {
        let f = feedback_objective(&laws, dj, st, 0.0);
        rows.push(maximize_simplex(laws.nx, &f, None).0);
    }
    let terms = |st: usize, s: usize| {
        let q = &rows[st];
        laws.i_main(s, q).min(laws.h_y_given_z(s, q))
    };
    Ok(discrete_result(dj, &rows, terms, vec![FLAG_MIN_FLOORED.into()]))
}

fn discrete_result(
    dj: &DelayedJoint,
    rows: &[Vec<f64>],
    term: impl Fn(usize, usize) -> f64,
    flags: Vec<String>,
) -> CapacityResult {
    let k = dj.states();
    let per_state_terms: Vec<Vec<f64>> = (0..k).map(|st| (0..k).map(|s| term(st, s)).collect()).collect();
    let mut r = CapacityResult {
        value: 0.0,
        argmax: Argmax::Input(InputLawFamily { rows: rows.to_vec() }),
        per_state_terms,
        weights: dj.table.clone(),
        flags,
    };
    r.value = r.weighted_sum().max(0.0);
    r
}

// ---------------------------------------------------------------------------
// Gaussian and fading closed forms

fn half_log2(x: f64) -> f64 {
    0.5 * x.log2()
}

/// `1/2 log(1 + p/s2) - 1/2 log(1 + p/(s2 + w2))`.
pub fn gaussian_secrecy_term(p: f64, sigma2_s: f64, sigma2_w: f64) -> f64 {
    let v = 0.5 * ((1.0 + p / sigma2_s).ln() - (1.0 + p / (sigma2_s + sigma2_w)).ln()) * LOG2_E;
    v.max(0.0)
}

/// `max(0, min{1/2 log(1 + p/s2), 1/2 log(2 pi e w2 (p + s2) / (p + s2 + w2))})`.
pub fn gaussian_feedback_term(p: f64, sigma2_s: f64, sigma2_w: f64) -> f64 {
    let a = half_log2(1.0 + p / sigma2_s);
    let b = half_log2(TWO_PI_E * sigma2_w * (p + sigma2_s) / (p + sigma2_s + sigma2_w));
    a.min(b).max(0.0)
}

/// `1/2 log(1 + g^2 p/s2) - 1/2 log(1 + g^2 l^2 p/(l^2 s2 + w2))`, floored at 0.
pub fn fading_secrecy_term(p: f64, g: f64, l: f64, sigma2_s: f64, sigma2_w: f64) -> f64 {
    let gp = g * g * p;
    let l2 = l * l;
    let v = 0.5 * ((1.0 + gp / sigma2_s).ln() - (1.0 + l2 * gp / (l2 * sigma2_s + sigma2_w)).ln()) * LOG2_E;
    v.max(0.0)
}

/// `max(0, min{1/2 log(1 + g^2 p/s2),
///   1/2 log(2 pi e w2 (g^2 p + s2) / (g^2 l^2 p + l^2 s2 + w2))})`.
pub fn fading_feedback_term(p: f64, g: f64, l: f64, sigma2_s: f64, sigma2_w: f64) -> f64 {
    let gp = g * g * p;
    let l2 = l * l;
    let a = half_log2(1.0 + gp / sigma2_s);
    let b = half_log2(TWO_PI_E * sigma2_w * (gp + sigma2_s) / (l2 * gp + l2 * sigma2_s + sigma2_w));
    a.min(b).max(0.0)
}

/// Which closed-form term a continuous model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousModel {
    Gaussian,
    GaussianFeedback,
    Fading,
    FadingFeedback,
}

impl ContinuousModel {
    pub fn is_feedback(self) -> bool {
        matches!(self, Self::GaussianFeedback | Self::FadingFeedback)
    }

    pub fn is_fading(self) -> bool {
        matches!(self, Self::Fading | Self::FadingFeedback)
    }

    /// Term at power `p` in state `s`.
    pub fn term(self, spec: &FadingSpec, s: usize, p: f64) -> f64 {
        let (s2, w2) = (spec.base.sigma2[s], spec.base.sigma2_w);
        match self {
            Self::Gaussian => gaussian_secrecy_term(p, s2, w2),
            Self::GaussianFeedback => gaussian_feedback_term(p, s2, w2),
            Self::Fading => fading_secrecy_term(p, spec.g[s], spec.l[s], s2, w2),
            Self::FadingFeedback => fading_feedback_term(p, spec.g[s], spec.l[s], s2, w2),
        }
    }
}

/// Outcome of [`optimize_power`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSolution {
    pub allocation: PowerAllocation,
    pub value: f64,
    /// Budget multiplier; absent when the fallback ran.
    pub multiplier: Option<f64>,
    pub fallback: bool,
}

/// `F_s~(p) = sum_s K^d(s~, s) term(p, s)`.
pub fn aggregate_term(term: &dyn Fn(f64, usize) -> f64, dj: &DelayedJoint, st: usize, p: f64) -> f64 {
    (0..dj.states())
        .map(|s| {
            let w = dj.transition(st, s);
            if w == 0.0 {
                0.0
            } else {
                w * term(p, s)
            }
        })
        .sum()
}

fn ternary_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let (lo, hi) = (a, b);
    while b - a > tol {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) < f(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let m = 0.5 * (a + b);
    let mut best = (m, f(m));
    for e in [lo, hi] {
        let v = f(e);
        if v > best.1 {
            best = (e, v);
        }
    }
    best.0
}

/// Midpoint concavity test of each `F_s~` on a log grid over `[0, cap]`.
pub fn is_concave_on_grid(term: &dyn Fn(f64, usize) -> f64, dj: &DelayedJoint, p0: f64) -> bool {
    let pi = dj.delayed_marginal();
    for st in 0..dj.states() {
        if pi[st] <= 0.0 {
            continue;
        }
        let cap = p0 / pi[st];
        let mut grid = vec![0.0];
        grid.extend((0..=60).map(|i| cap * 10f64.powf(-8.0 + 8.0 * i as f64 / 60.0)));
        let f = |p: f64| aggregate_term(term, dj, st, p);
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
            if fm < 0.5 * (fa + fb) - 1e-12 * (1.0 + fa.abs().max(fb.abs())) {
                return false;
            }
        }
        for w in grid.windows(3) {
            let (a, m, b) = (w[0], w[1], w[2]);
            let t = (m - a) / (b - a);
            let (fa, fb, fm) = (f(a), f(b), f(m));
            if fm < (1.0 - t) * fa + t * fb - 1e-12 * (1.0 + fa.abs().max(fb.abs())) {
                return false;
            }
        }
    }
    true
}

/// Maximizes `sum_s~ pi(s~) F_s~(P(s~))` subject to
/// `sum_s~ pi(s~) P(s~) <= p0`, `P >= 0`.
pub fn optimize_power(term: &dyn Fn(f64, usize) -> f64, dj: &DelayedJoint, p0: f64) -> Result<PowerSolution> {
    if !(p0 >= 0.0 && p0.is_finite()) {
        return Err(Error::Domain(format!("power budget must be finite and >= 0, got {p0}")));
    }
    let pi = dj.delayed_marginal();
    let k = pi.len();
    let objective = |p: &[f64]| -> f64 {
        (0..k).map(|st| pi[st] * aggregate_term(term, dj, st, p[st])).sum()
    };
    if p0 == 0.0 {
        let p = vec![0.0; k];
        let value = objective(&p);
        return Ok(PowerSolution {
            allocation: PowerAllocation { p },
            value,
            multiplier: Some(0.0),
            fallback: false,
        });
    }
    if !is_concave_on_grid(term, dj, p0) {
        let p = coordinate_ascent(&objective, &pi, p0);
        let value = objective(&p);
        return Ok(PowerSolution {
            allocation: PowerAllocation { p },
            value,
            multiplier: None,
            fallback: true,
        });
    }

    let response = |lambda: f64| -> Vec<f64> {
        (0..k)
            .map(|st| {
                if pi[st] <= 0.0 {
                    return 0.0;
                }
                let cap = p0 / pi[st];
                let f = |p: f64| aggregate_term(term, dj, st, p) - lambda * p;
                ternary_max(&f, 0.0, cap, 1e-10 * p0)
            })
            .collect()
    };
    let usage = |p: &[f64]| p.iter().zip(&pi).map(|(a, b)| a * b).sum::<f64>();

    let at_zero = response(0.0);
    if usage(&at_zero) <= p0 * (1.0 + 1e-12) {
        let value = objective(&at_zero);
        return Ok(PowerSolution {
            allocation: PowerAllocation { p: at_zero },
            value,
            multiplier: Some(0.0),
            fallback: false,
        });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut tries = 0;
    while usage(&response(hi)) > p0 && tries < 200 {
        lo = hi;
        hi *= 2.0;
        tries += 1;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if usage(&response(mid)) > p0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p_lo = response(lo);
    let p_hi = response(hi);
    let (u_lo, u_hi) = (usage(&p_lo), usage(&p_hi));
    let p: Vec<f64> = if u_lo > u_hi && (p0 - u_hi) > 1e-9 * p0 {
        // the response can jump where some F_s~ is locally linear
        let theta = ((p0 - u_hi) / (u_lo - u_hi)).clamp(0.0, 1.0);
        p_hi.iter().zip(&p_lo).map(|(h, l)| h + theta * (l - h)).collect()
    } else {
        p_hi
    };
    let value = objective(&p);
    Ok(PowerSolution {
        allocation: PowerAllocation { p },
        value,
        multiplier: Some(0.5 * (lo + hi)),
        fallback: false,
    })
}

/// Projected ascent over pairs of delayed states with several starts.
fn coordinate_ascent(objective: &dyn Fn(&[f64]) -> f64, pi: &[f64], p0: f64) -> Vec<f64> {
    let k = pi.len();
    let live: Vec<usize> = (0..k).filter(|&i| pi[i] > 0.0).collect();
    let mut starts = vec![(0..k).map(|i| if pi[i] > 0.0 { p0 } else { 0.0 }).collect::<Vec<f64>>()];
    for &i in &live {
        let mut p = vec![0.0; k];
        p[i] = p0 / pi[i];
        starts.push(p);
    }
    let mut best = (starts[0].clone(), f64::NEG_INFINITY);
    for mut p in starts {
        let mut fp = objective(&p);
        for _ in 0..100 {
            let start = fp;
            for (ai, &a) in live.iter().enumerate() {
                for &b in &live[ai + 1..] {
                    let m = pi[a] * p[a] + pi[b] * p[b];
                    let at = |theta: f64, p: &[f64]| {
                        let mut q = p.to_vec();
                        q[a] = theta * m / pi[a];
                        q[b] = (1.0 - theta) * m / pi[b];
                        q
                    };
                    let g = |theta: f64| objective(&at(theta, &p));
                    let mut top = (0.0, g(0.0));
                    for i in 1..=64 {
                        let t = i as f64 / 64.0;
                        let v = g(t);
                        if v > top.1 {
                            top = (t, v);
                        }
                    }
                    let (t, v) = golden_max(&g, (top.0 - 1.0 / 64.0).max(0.0), (top.0 + 1.0 / 64.0).min(1.0), 1e-12);
                    let (t, v) = if v >= top.1 { (t, v) } else { top };
                    if v > fp {
                        p = at(t, &p);
                        fp = v;
                    }
                }
            }
            if fp - start <= 1e-14 {
                break;
            }
        }
        if fp > best.1 {
            best = (p, fp);
        }
    }
    best.0
}

fn continuous_result(
    spec: &FadingSpec,
    model: ContinuousModel,
    dj: &DelayedJoint,
) -> Result<CapacityResult> {
    spec.validate()?;
    if spec.base.states() != dj.states() {
        return Err(Error::Shape(format!(
            "spec has {} noise variances, chain has {} states",
            spec.base.states(),
            dj.states()
        )));
    }
    let term = |p: f64, s: usize| model.term(spec, s, p);
    let sol = optimize_power(&term, dj, spec.base.p0)?;
    let k = dj.states();
    let per_state_terms = (0..k)
        .map(|st| (0..k).map(|s| term(sol.allocation.p[st], s)).collect())
        .collect();
    let mut flags = Vec::new();
    if model.is_feedback() {
        flags.push(FLAG_MIN_FLOORED.to_string());
    }
    if sol.fallback {
        flags.push(FLAG_NONCONCAVE.to_string());
    }
    let mut r = CapacityResult {
        value: 0.0,
        argmax: Argmax::Power(sol.allocation),
        per_state_terms,
        weights: dj.table.clone(),
        flags,
    };
    r.value = r.weighted_sum().max(0.0);
    Ok(r)
}

/// Degraded Gaussian secrecy capacity, with or without output feedback.
pub fn gaussian_capacity(spec: &GaussianSpec, chain: &StateChain, d: u64, feedback: bool) -> Result<CapacityResult> {
    gaussian_capacity_at(spec, &chain.delayed_joint(d), feedback)
}

pub fn gaussian_capacity_at(spec: &GaussianSpec, dj: &DelayedJoint, feedback: bool) -> Result<CapacityResult> {
    let model = if feedback {
        ContinuousModel::GaussianFeedback
    } else {
        ContinuousModel::Gaussian
    };
    continuous_result(&spec.as_fading(), model, dj)
}

/// Degraded Gaussian fading secrecy capacity, with or without output feedback.
pub fn fading_capacity(spec: &FadingSpec, chain: &StateChain, d: u64, feedback: bool) -> Result<CapacityResult> {
    fading_capacity_at(spec, &chain.delayed_joint(d), feedback)
}

pub fn fading_capacity_at(spec: &FadingSpec, dj: &DelayedJoint, feedback: bool) -> Result<CapacityResult> {
    let model = if feedback {
        ContinuousModel::FadingFeedback
    } else {
        ContinuousModel::Fading
    };
    continuous_result(spec, model, dj)
}

/// Capacity of any continuous model; `d = None` uses the `d -> infinity` limit.
pub fn continuous_capacity(
    spec: &FadingSpec,
    model: ContinuousModel,
    chain: &StateChain,
    d: Option<u64>,
) -> Result<CapacityResult> {
    let dj = match d {
        Some(d) => chain.delayed_joint(d),
        None => chain.delayed_joint_limit(),
    };
    continuous_result(spec, model, &dj)
}

/// Value of a fixed allocation under a given delay.
pub fn continuous_value_with(
    spec: &FadingSpec,
    model: ContinuousModel,
    dj: &DelayedJoint,
    alloc: &PowerAllocation,
) -> f64 {
    let pi = dj.delayed_marginal();
    (0..dj.states())
        .map(|st| pi[st] * aggregate_term(&|p, s| model.term(spec, s, p), dj, st, alloc.p[st]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{bsc, degraded_from};
    use approx::assert_abs_diff_eq;

    fn bsc_example() -> DiscreteWiretapChannel {
        degraded_from(&[bsc(0.1), bsc(0.3)], &bsc(0.2)).unwrap()
    }

    /// Independent oracle: brute force over a binary input grid per s~.
    fn binary_grid_oracle(ch: &DiscreteWiretapChannel, dj: &DelayedJoint, feedback: bool, res: usize) -> f64 {
        let laws = StateLaws::new(ch);
        let k = dj.states();
        let mut total = 0.0;
        for st in 0..k {
            let mut best = f64::NEG_INFINITY;
            for i in 0..=res {
                let a = i as f64 / res as f64;
                let q = [a, 1.0 - a];
                let mut v = 0.0;
                for s in 0..k {
                    let t = if feedback {
                        laws.i_main(s, &q).min(laws.h_y_given_z(s, &q))
                    } else {
                        laws.i_main(s, &q) - laws.i_eve(s, &q)
                    };
                    v += dj.table[st][s] * t;
                }
                best = best.max(v);
            }
            total += best;
        }
        total
    }

    #[test]
    fn identity_wiretap_gives_zero() {
        let ch = degraded_from(&[bsc(0.1), bsc(0.3)], &bsc(0.0)).unwrap();
        let chain = StateChain::two_state(0.5, 1.0).unwrap();
        let r = secrecy_capacity_discrete(&ch, &chain, 1).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-12);
        let r = secrecy_capacity_discrete_feedback(&ch, &chain, 1).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn independent_eavesdropper_gives_fsmc_capacity() {
        let ch = degraded_from(&[bsc(0.1), bsc(0.3)], &bsc(0.5)).unwrap();
        let chain = StateChain::two_state(0.5, 1.0).unwrap();
        // uniform input is optimal for every BSC mixture
        let want = 0.5 * (1.0 - crate::infotheory::h2(0.1)) + 0.5 * (1.0 - crate::infotheory::h2(0.3));
        let r = secrecy_capacity_discrete(&ch, &chain, 1).unwrap();
        assert_abs_diff_eq!(r.value, want, epsilon = 1e-9);
        let r = secrecy_capacity_discrete_feedback(&ch, &chain, 1).unwrap();
        assert_abs_diff_eq!(r.value, want, epsilon = 1e-9);
    }

    #[test]
    fn bsc_example_matches_grid() {
        let ch = bsc_example();
        let chain = StateChain::two_state(0.5, 1.0).unwrap();
        let dj = chain.delayed_joint(1);
        let r = secrecy_capacity_discrete(&ch, &chain, 1).unwrap();
        let oracle = binary_grid_oracle(&ch, &dj, false, 400);
        assert!((r.value - oracle).abs() <= 1e-4, "{} vs {oracle}", r.value);
        assert!(r.value >= oracle - 1e-12);
        assert_abs_diff_eq!(r.value, r.weighted_sum(), epsilon = 1e-9);
        let f = secrecy_capacity_discrete_feedback(&ch, &chain, 1).unwrap();
        let oracle_f = binary_grid_oracle(&ch, &dj, true, 400);
        assert!((f.value - oracle_f).abs() <= 1e-4, "{} vs {oracle_f}", f.value);
        assert!(f.value >= r.value - 1e-12);
        assert!(f.has_flag(FLAG_MIN_FLOORED));
    }

    #[test]
    fn ternary_alphabet_against_fine_grid() {
        // 3-input, 3-output erasure-like channel
        let main = vec![
            vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.1], vec![0.3, 0.3, 0.4]],
            vec![vec![0.5, 0.3, 0.2], vec![0.2, 0.5, 0.3], vec![0.1, 0.1, 0.8]],
        ];
        let wt = vec![vec![0.7, 0.3], vec![0.4, 0.6], vec![0.5, 0.5]];
        let ch = degraded_from(&main, &wt).unwrap();
        let chain = StateChain::two_state(0.3, 2.0).unwrap();
        let dj = chain.delayed_joint(2);
        let r = secrecy_capacity_discrete_at(&ch, &dj).unwrap();
        let laws = StateLaws::new(&ch);
        let mut oracle = 0.0;
        for st in 0..2 {
            let (f, _) = secrecy_objective(&laws, &dj, st, 0.0);
            oracle += dj.delayed_marginal()[st] * simplex_grid_max(3, 300, &f).1;
        }
        assert!(r.value >= oracle - 1e-9, "{} vs {oracle}", r.value);
        assert!(r.value - oracle <= 1e-4);
    }

    #[test]
    fn refuses_non_degraded() {
        let mut tab = vec![0.0; 8];
        for x in 0..2 {
            for y in 0..2 {
                tab[(x * 2 + y) * 2 + (x ^ y)] = if x == y { 0.9 } else { 0.1 };
            }
        }
        let ch = DiscreteWiretapChannel::new(1, 2, 2, 2, tab).unwrap();
        let err = secrecy_capacity_discrete(&ch, &StateChain::trivial(), 0).unwrap_err();
        assert!(matches!(err, Error::NotDegraded { .. }));
        assert!(err.to_string().contains("degraded"));
    }

    #[test]
    fn gaussian_term_examples() {
        assert_eq!(gaussian_secrecy_term(0.0, 1.0, 2000.0), 0.0);
        let want = 0.5 * 101f64.log2() - 0.5 * (1.0 + 100.0 / 2001.0f64).log2();
        assert_abs_diff_eq!(gaussian_secrecy_term(100.0, 1.0, 2000.0), want, epsilon = 1e-14);
        assert!((gaussian_secrecy_term(100.0, 1.0, 2000.0) - 3.2939).abs() < 5e-4);
        let big = gaussian_secrecy_term(100.0, 1.0, 1e15);
        assert_abs_diff_eq!(big, 0.5 * 101f64.log2(), epsilon = 1e-9);
    }

    #[test]
    fn gaussian_feedback_examples() {
        assert_eq!(gaussian_feedback_term(0.0, 1.0, 1.0), 0.0);
        assert_eq!(gaussian_feedback_term(10.0, 1.0, 1e-12), 0.0);
        let a = 0.5 * 101f64.log2();
        let b = 0.5 * (TWO_PI_E * 2000.0 * 101.0 / 2101.0).log2();
        assert_abs_diff_eq!(gaussian_feedback_term(100.0, 1.0, 2000.0), a.min(b), epsilon = 1e-14);
    }

    #[test]
    fn fading_term_examples() {
        for p in [0.0, 1.0, 37.0, 100.0] {
            assert_abs_diff_eq!(
                fading_secrecy_term(p, 1.0, 1.0, 3.0, 200.0),
                gaussian_secrecy_term(p, 3.0, 200.0),
                epsilon = 1e-14
            );
            assert_abs_diff_eq!(
                fading_feedback_term(p, 1.0, 1.0, 3.0, 200.0),
                gaussian_feedback_term(p, 3.0, 200.0),
                epsilon = 1e-14
            );
        }
        assert_eq!(fading_secrecy_term(50.0, 0.0, 0.7, 1.0, 200.0), 0.0);
        let want = 0.5 * 101f64.log2() - 0.5 * (1.0 + 64.0 / (0.64 + 200.0f64)).log2();
        assert_abs_diff_eq!(fading_secrecy_term(100.0, 1.0, 0.8, 1.0, 200.0), want, epsilon = 1e-14);
        let a = 0.5 * (1.0 + 25.0f64).log2();
        let b = 0.5 * (TWO_PI_E * (25.0 + 1.0f64)).log2();
        assert_abs_diff_eq!(fading_feedback_term(100.0, 0.5, 0.0, 1.0, 200.0), a.min(b), epsilon = 1e-12);
    }

    fn spec2(w2: f64) -> GaussianSpec {
        GaussianSpec {
            sigma2: vec![1.0, 100.0],
            sigma2_w: w2,
            p0: 100.0,
        }
    }

    fn power_grid_oracle(term: &dyn Fn(f64, usize) -> f64, dj: &DelayedJoint, p0: f64, n: usize) -> f64 {
        let pi = dj.delayed_marginal();
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            let pg = p0 / pi[0] * i as f64 / n as f64;
            let pb = ((p0 - pi[0] * pg) / pi[1]).max(0.0);
            let v = pi[0] * aggregate_term(term, dj, 0, pg) + pi[1] * aggregate_term(term, dj, 1, pb);
            best = best.max(v);
        }
        best
    }

    #[test]
    fn single_state_uses_full_power() {
        let spec = GaussianSpec {
            sigma2: vec![1.0],
            sigma2_w: 2000.0,
            p0: 100.0,
        };
        let r = gaussian_capacity(&spec, &StateChain::trivial(), 1, false).unwrap();
        let want = 0.5 * 101f64.log2() - 0.5 * (1.0 + 100.0 / 2001.0f64).log2();
        assert_abs_diff_eq!(r.value, want, epsilon = 1e-9);
        let Argmax::Power(a) = &r.argmax else { panic!() };
        assert_abs_diff_eq!(a.p[0], 100.0, epsilon = 1e-6);
    }

    #[test]
    fn symmetric_states_split_equally() {
        let spec = GaussianSpec {
            sigma2: vec![4.0, 4.0],
            sigma2_w: 50.0,
            p0: 10.0,
        };
        let chain = StateChain::two_state(0.4, 1.0).unwrap();
        let r = gaussian_capacity(&spec, &chain, 2, false).unwrap();
        let Argmax::Power(a) = &r.argmax else { panic!() };
        assert_abs_diff_eq!(a.p[0], 10.0, epsilon = 1e-5);
        assert_abs_diff_eq!(a.p[1], 10.0, epsilon = 1e-5);
    }

    #[test]
    fn asymmetric_matches_budget_grid() {
        let spec = spec2(2000.0);
        let chain = StateChain::two_state(0.9, 1.0).unwrap();
        let dj = chain.delayed_joint(1);
        let r = gaussian_capacity_at(&spec, &dj, false).unwrap();
        let f = spec.as_fading();
        let term = |p: f64, s: usize| ContinuousModel::Gaussian.term(&f, s, p);
        let oracle = power_grid_oracle(&term, &dj, 100.0, 2000);
        assert!((r.value - oracle).abs() <= 1e-3, "{} vs {oracle}", r.value);
        assert!(r.value >= oracle - 1e-9);
        let Argmax::Power(a) = &r.argmax else { panic!() };
        let used = a.average(&dj.delayed_marginal());
        assert!((used - 100.0).abs() <= 1e-7 * 100.0, "{used}");
    }

    #[test]
    fn kkt_conditions_hold() {
        let spec = spec2(2000.0);
        let f = spec.as_fading();
        for &u in &[0.0, 0.5, 0.9] {
            let chain = StateChain::two_state(u, 0.5).unwrap();
            let dj = chain.delayed_joint(1);
            let term = |p: f64, s: usize| ContinuousModel::Gaussian.term(&f, s, p);
            let sol = optimize_power(&term, &dj, 100.0).unwrap();
            let lambda = sol.multiplier.unwrap();
            for st in 0..2 {
                let p = sol.allocation.p[st];
                let h = 1e-5;
                let right = (aggregate_term(&term, &dj, st, p + h) - aggregate_term(&term, &dj, st, p)) / h;
                assert!(right <= lambda + 1e-6, "u={u} st={st}");
                if p > h {
                    let left = (aggregate_term(&term, &dj, st, p) - aggregate_term(&term, &dj, st, p - h)) / h;
                    assert!(left >= lambda - 1e-6, "u={u} st={st}");
                }
            }
        }
    }

    #[test]
    fn fading_feedback_figure_point_matches_grid() {
        let spec = FadingSpec {
            base: spec2(200.0),
            g: vec![1.0, 0.5],
            l: vec![0.8, 0.2],
        };
        let chain = StateChain::two_state(0.5, 1.0).unwrap();
        let dj = chain.delayed_joint(1);
        let r = fading_capacity_at(&spec, &dj, true).unwrap();
        let term = |p: f64, s: usize| ContinuousModel::FadingFeedback.term(&spec, s, p);
        let oracle = power_grid_oracle(&term, &dj, 100.0, 10_000);
        assert!((r.value - oracle).abs() <= 1e-4, "{} vs {oracle}", r.value);
    }

    #[test]
    fn nonconcave_terms_fall_back() {
        // floor at zero makes the term convex around its zero crossing
        let spec = GaussianSpec {
            sigma2: vec![0.05, 2.0],
            sigma2_w: 0.1,
            p0: 0.5,
        };
        let chain = StateChain::two_state(0.5, 1.0).unwrap();
        let dj = chain.delayed_joint(1);
        let f = spec.as_fading();
        let term = |p: f64, s: usize| ContinuousModel::GaussianFeedback.term(&f, s, p);
        assert!(!is_concave_on_grid(&term, &dj, 0.5));
        let r = gaussian_capacity_at(&spec, &dj, true).unwrap();
        assert!(r.has_flag(FLAG_NONCONCAVE));
        let oracle = power_grid_oracle(&term, &dj, 0.5, 4000);
        assert!(r.value >= oracle - 1e-6, "{} vs {oracle}", r.value);
    }

    #[test]
    fn memoryless_chain_is_delay_invariant() {
        let spec = spec2(2000.0);
        let chain = StateChain::two_state(0.0, 1.0).unwrap();
        let c1 = gaussian_capacity(&spec, &chain, 1, false).unwrap().value;
        for d in [2, 5, 17] {
            let cd = gaussian_capacity(&spec, &chain, d, false).unwrap().value;
            assert_abs_diff_eq!(c1, cd, epsilon = 1e-9);
        }
    }

    #[test]
    fn converges_to_limit() {
        let spec = spec2(2000.0).as_fading();
        let chain = StateChain::two_state(0.5, 1.0).unwrap();
        let lim = continuous_capacity(&spec, ContinuousModel::Gaussian, &chain, None).unwrap().value;
        let gap = |d| (continuous_capacity(&spec, ContinuousModel::Gaussian, &chain, Some(d)).unwrap().value - lim).abs();
        assert!(gap(20) < gap(2));
    }

    #[test]
    fn own_allocation_is_optimal() {
        let spec = spec2(1000.0).as_fading();
        let chain = StateChain::two_state(0.9, 1.0).unwrap();
        for d in [0u64, 1, 4] {
            let dj = chain.delayed_joint(d);
            let own = continuous_capacity(&spec, ContinuousModel::Gaussian, &chain, Some(d)).unwrap().value;
            for dp in [0u64, 1, 4, 12] {
                let other = continuous_capacity(&spec, ContinuousModel::Gaussian, &chain, Some(dp)).unwrap();
                let Argmax::Power(a) = other.argmax else { panic!() };
                let v = continuous_value_with(&spec, ContinuousModel::Gaussian, &dj, &a);
                assert!(v <= own + 1e-9, "d={d} d'={dp}");
            }
        }
    }

    #[test]
    fn feedback_dominates_when_noise_entropy_positive() {
        for &w2 in &[1.0, 10.0, 200.0, 2000.0] {
            for &u in &[0.0, 0.5, 0.9] {
                let chain = StateChain::two_state(u, 1.0).unwrap();
                let spec = spec2(w2);
                let a = gaussian_capacity(&spec, &chain, 1, false).unwrap().value;
                let b = gaussian_capacity(&spec, &chain, 1, true).unwrap().value;
                assert!(b >= a - 1e-9, "w2={w2} u={u}: {b} < {a}");
            }
        }
    }

    #[test]
    fn simplex_grid_counts() {
        let mut n = 0;
        for_each_simplex_point(3, 4, |q| {
            assert_abs_diff_eq!(q.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            n += 1;
        });
        assert_eq!(n, 15);
        assert_eq!(simplex_resolution(2), 200);
        assert!(binomial(simplex_resolution(6) + 5, 5) <= 100_000);
    }
}
