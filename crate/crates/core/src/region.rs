//! Capacity-equivocation bounds evaluated at given auxiliaries, and the
//! boundary of the degraded-case regions.

use serde::{Deserialize, Serialize};

use crate::capacity::{
    maximize_simplex, secrecy_capacity_discrete_at, secrecy_objective, StateLaws,
};
use crate::channels::DiscreteWiretapChannel;
use crate::error::{Error, Result};
use crate::infotheory::{JointTable, AXIS_S, AXIS_S_DELAYED, AXIS_U, AXIS_V, AXIS_X, AXIS_Y, AXIS_Z};
use crate::markov::{DelayedJoint, StateChain};

pub const FACTORIZATION_TOL: f64 = 1e-9;
pub const DEFAULT_REGION_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r: f64,
    pub re: f64,
}

/// Right-hand sides of the two rate constraints of a bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCaps {
    pub r_cap: f64,
    pub re_cap: f64,
}

impl BoundCaps {
    /// Largest-`R` corner of `{0 <= Re <= R, R <= r_cap, Re <= re_cap}`.
    pub fn corner(&self) -> RatePair {
        RatePair {
            r: self.r_cap,
            re: self.re_cap.min(self.r_cap),
        }
    }
}

const SS: [&str; 2] = [AXIS_S, AXIS_S_DELAYED];

fn check_aux_axes(t: &JointTable) -> Result<()> {
    for a in [AXIS_U, AXIS_V, AXIS_S, AXIS_S_DELAYED, AXIS_X, AXIS_Y, AXIS_Z] {
        t.axis_index(a)?;
    }
    Ok(())
}

/// Checks the Markov chains implied by the inner-bound product form and
/// names the first violated one.
pub fn check_inner_factorization(t: &JointTable) -> Result<()> {
    check_aux_axes(t)?;
    let chains: [(&'static str, &[&str], &[&str], &[&str]); 4] = [
        ("S -> S~ -> U", &[AXIS_S], &[AXIS_U], &[AXIS_S_DELAYED]),
        ("S -> (S~,U) -> V", &[AXIS_S], &[AXIS_V], &[AXIS_S_DELAYED, AXIS_U]),
        ("S -> (S~,U,V) -> X", &[AXIS_S], &[AXIS_X], &[AXIS_S_DELAYED, AXIS_U, AXIS_V]),
        (
            "(U,V,S~) -> (X,S) -> (Y,Z)",
            &[AXIS_U, AXIS_V, AXIS_S_DELAYED],
            &[AXIS_Y, AXIS_Z],
            &[AXIS_X, AXIS_S],
        ),
    ];
    for (chain, a, b, c) in chains {
        let residual = t.independence_residual(a, b, c)?;
        if residual > FACTORIZATION_TOL {
            return Err(Error::Factorization { chain, residual });
        }
    }
    Ok(())
}

/// Max deviation of `P(u,v,s~,s,x,y,z)` from `P(u,v,s~,s,x) P(y,z|x,s)`.
pub fn channel_residual(t: &JointTable, ch: &DiscreteWiretapChannel) -> Result<f64> {
    check_aux_axes(t)?;
    let sizes = (
        t.axis_size(AXIS_S)?,
        t.axis_size(AXIS_X)?,
        t.axis_size(AXIS_Y)?,
        t.axis_size(AXIS_Z)?,
    );
    if sizes != (ch.states(), ch.nx(), ch.ny(), ch.nz()) {
        return Err(Error::Shape(format!(
            "joint (S,X,Y,Z) sizes {sizes:?} do not match the channel"
        )));
    }
    let (nu, nv, nst) = (
        t.axis_size(AXIS_U)?,
        t.axis_size(AXIS_V)?,
        t.axis_size(AXIS_S_DELAYED)?,
    );
    let (ns, nx, ny, nz) = sizes;
    let head = [AXIS_U, AXIS_V, AXIS_S_DELAYED, AXIS_S, AXIS_X];
    let full = t.marginal(&[AXIS_U, AXIS_V, AXIS_S_DELAYED, AXIS_S, AXIS_X, AXIS_Y, AXIS_Z])?;
    let pre = t.marginal(&head)?;
    let mut r: f64 = 0.0;
    let mut i = 0;
    for h in 0..nu * nv * nst {
        for s in 0..ns {
            for x in 0..nx {
                let ph = pre[(h * ns + s) * nx + x];
                for y in 0..ny {
                    for z in 0..nz {
                        r = r.max((full[i] - ph * ch.prob(s, x, y, z)).abs());
                        i += 1;
                    }
                }
            }
        }
    }
    Ok(r)
}

fn require_channel(t: &JointTable, ch: &DiscreteWiretapChannel) -> Result<()> {
    let residual = channel_residual(t, ch)?;
    if residual > FACTORIZATION_TOL {
        return Err(Error::ChannelMismatch { residual });
    }
    Ok(())
}

fn caps_no_feedback(t: &JointTable) -> Result<BoundCaps> {
    let r_cap = t.cond_mutual_info(&[AXIS_V], &[AXIS_Y], &SS)?;
    let c = [AXIS_U, AXIS_S, AXIS_S_DELAYED];
    let re = t.cond_mutual_info(&[AXIS_V], &[AXIS_Y], &c)? - t.cond_mutual_info(&[AXIS_V], &[AXIS_Z], &c)?;
    Ok(BoundCaps {
        r_cap,
        re_cap: re.max(0.0),
    })
}

/// Inner bound without output feedback.
pub fn eval_inner(t: &JointTable) -> Result<BoundCaps> {
    check_inner_factorization(t)?;
    caps_no_feedback(t)
}

/// Outer bound without output feedback; only the channel factor is required.
pub fn eval_outer(t: &JointTable, ch: &DiscreteWiretapChannel) -> Result<BoundCaps> {
    require_channel(t, ch)?;
    caps_no_feedback(t)
}

/// Inner bound with output feedback: the key adds `H(Y|V,Z,S,S~)`.
pub fn eval_inner_feedback(t: &JointTable) -> Result<BoundCaps> {
    check_inner_factorization(t)?;
    let base = caps_no_feedback(t)?;
    let key = t.cond_entropy(&[AXIS_Y], &[AXIS_V, AXIS_Z, AXIS_S, AXIS_S_DELAYED])?;
    Ok(BoundCaps {
        r_cap: base.r_cap,
        re_cap: base.re_cap + key,
    })
}

/// Outer bound with output feedback: `Re <= H(Y|Z,U,S,S~)`.
pub fn eval_outer_feedback(t: &JointTable, ch: &DiscreteWiretapChannel) -> Result<BoundCaps> {
    require_channel(t, ch)?;
    Ok(BoundCaps {
        r_cap: t.cond_mutual_info(&[AXIS_V], &[AXIS_Y], &SS)?,
        re_cap: t.cond_entropy(&[AXIS_Y], &[AXIS_Z, AXIS_U, AXIS_S, AXIS_S_DELAYED])?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Degraded,
    DegradedFeedback,
}

impl RegionKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Degraded => "degraded",
            Self::DegradedFeedback => "degraded_feedback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundary {
    pub kind: RegionKind,
    /// Sorted by `r`.
    pub points: Vec<RatePair>,
    /// `max I(X;Y|S,S~)`.
    pub r_max: f64,
    /// No-feedback secrecy capacity; always one of the grid abscissae.
    pub secrecy_capacity: f64,
}

impl RegionBoundary {
    /// `Re` at an abscissa on the grid.
    pub fn re_at(&self, r: f64) -> Option<f64> {
        self.points.iter().find(|p| p.r == r).map(|p| p.re)
    }
}

/// Per-`s~` values of `I(X;Y|S,S~=s~)` and of the equivocation objective.
struct Evaluator<'a> {
    laws: &'a StateLaws,
    dj: &'a DelayedJoint,
    pi: Vec<f64>,
    feedback: bool,
}

impl Evaluator<'_> {
    fn info(&self, rows: &[Vec<f64>]) -> f64 {
        let k = self.dj.states();
        (0..k)
            .map(|st| (0..k).map(|s| self.dj.table[st][s] * self.laws.i_main(s, &rows[st])).sum::<f64>())
            .sum()
    }

    fn gain(&self, rows: &[Vec<f64>]) -> f64 {
        let k = self.dj.states();
        let mut g = 0.0;
        for st in 0..k {
            for s in 0..k {
                let w = self.dj.table[st][s];
                if w == 0.0 {
                    continue;
                }
                let q = &rows[st];
                g += w * if self.feedback {
                    self.laws.h_y_given_z(s, q)
                } else {
                    self.laws.i_main(s, q) - self.laws.i_eve(s, q)
                };
            }
        }
        g
    }

    /// Argmax of `gain + mu * info`, one simplex problem per `s~`.
    fn solve(&self, mu: f64) -> Vec<Vec<f64>> {
        (0..self.dj.states())
            .map(|st| {
                if self.pi[st] <= 0.0 {
                    return vec![1.0 / self.laws.nx as f64; self.laws.nx];
                }
                if self.feedback {
                    let (f, g) = entropy_objective(self.laws, self.dj, st, mu);
                    maximize_simplex(self.laws.nx, &f, Some(&g)).0
                } else {
                    let (f, g) = secrecy_objective(self.laws, self.dj, st, mu);
                    maximize_simplex(self.laws.nx, &f, Some(&g)).0
                }
            })
            .collect()
    }

    /// Argmax of `info` alone.
    fn solve_info(&self) -> Vec<Vec<f64>> {
        (0..self.dj.states())
            .map(|st| {
                let k = self.dj.states();
                let laws = self.laws;
                let dj = self.dj;
                let f = move |q: &[f64]| (0..k).map(|s| dj.transition(st, s) * laws.i_main(s, q)).sum::<f64>();
                // gain weight 0: reuse the secrecy objective gradient shape
                let g = move |q: &[f64]| {
                    let mut out = vec![0.0; q.len()];
                    for s in 0..k {
                        let w = dj.transition(st, s);
                        if w > 0.0 {
                            StateLaws::mi_gradient(q, &laws.main[s], &mut out, w);
                        }
                    }
                    out
                };
                maximize_simplex(laws.nx, &f, Some(&g)).0
            })
            .collect()
    }
}

/// Per-`s~` objective `sum_s K^d [H(Y|Z,s) + mu I(X;Y|s)]` and its gradient.
fn entropy_objective<'a>(
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
                    0.0
                } else {
                    w * (laws.h_y_given_z(s, q) + mu * laws.i_main(s, q))
                }
            })
            .sum()
    };
    let g = move |q: &[f64]| {
        let mut out = vec![0.0; q.len()];
        for s in 0..k {
            let w = dj.transition(st, s);
            if w == 0.0 {
                continue;
            }
            let (ny, nz) = (laws.ny, laws.nz);
            let mut pyz = vec![0.0; ny * nz];
            for (x, qx) in q.iter().enumerate() {
                for (a, b) in pyz.iter_mut().zip(&laws.joint[s][x]) {
                    *a += qx * b;
                }
            }
            let mut pz = vec![0.0; nz];
            for y in 0..ny {
                for z in 0..nz {
                    pz[z] += pyz[y * nz + z];
                }
            }
            // d/dq_x H(Y|Z) = -sum_{y,z} P(y,z|x) log p(y|z)
            for (x, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for y in 0..ny {
                    for z in 0..nz {
                        let c = laws.joint[s][x][y * nz + z];
                        let p = pyz[y * nz + z];
                        if c > 0.0 && p > 0.0 {
                            acc -= c * (p / pz[z]).log2();
                        }
                    }
                }
                *o += w * acc;
            }
            if mu != 0.0 {
                StateLaws::mi_gradient(q, &laws.main[s], &mut out, w * mu);
            }
        }
        out
    };
    (f, g)
}

fn mix(a: &[Vec<f64>], b: &[Vec<f64>], theta: f64) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (1.0 - theta) * x + theta * y).collect())
        .collect()
}

/// `max gain` subject to `info >= r`.
fn constrained_gain(ev: &Evaluator, r: f64, at_zero: &[Vec<f64>], info_argmax: &[Vec<f64>]) -> f64 {
    if ev.info(at_zero) >= r {
        return ev.gain(at_zero);
    }
    let mut lo = 0.0;
    let mut lo_rows = at_zero.to_vec();
    let mut hi = 1.0;
    let mut hi_rows = ev.solve(hi);
    while ev.info(&hi_rows) < r && hi < 1e9 {
        lo = hi;
        lo_rows = hi_rows;
        hi *= 4.0;
        hi_rows = ev.solve(hi);
    }
    if ev.info(&hi_rows) < r {
        hi_rows = info_argmax.to_vec();
    } else {
        for _ in 0..40 {
            if hi - lo <= 1e-9 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let rows = ev.solve(mid);
            if ev.info(&rows) >= r {
                hi = mid;
                hi_rows = rows;
            } else {
                lo = mid;
                lo_rows = rows;
            }
        }
    }
    // both objectives are concave, so mixing the bracket keeps feasibility cheap
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if ev.info(&mix(&lo_rows, &hi_rows, m)) >= r {
            b = m;
        } else {
            a = m;
        }
    }
    ev.gain(&mix(&lo_rows, &hi_rows, b)).max(ev.gain(&hi_rows))
}

/// Traces the upper boundary `Re(R) = min(R, max{G : I(X;Y|S,S~) >= R})`
/// where `G` is `I(X;Y|S,S~) - I(X;Z|S,S~)`, or `H(Y|Z,S,S~)` with feedback.
pub fn trace_degraded_region(
    ch: &DiscreteWiretapChannel,
    chain: &StateChain,
    d: u64,
    feedback: bool,
    n_points: usize,
) -> Result<RegionBoundary> {
    trace_degraded_region_at(ch, &chain.delayed_joint(d), feedback, n_points)
}

pub fn trace_degraded_region_at(
    ch: &DiscreteWiretapChannel,
    dj: &DelayedJoint,
    feedback: bool,
    n_points: usize,
) -> Result<RegionBoundary> {
    if n_points < 2 {
        return Err(Error::Domain(format!("region needs at least 2 points, got {n_points}")));
    }
    let cap = secrecy_capacity_discrete_at(ch, dj)?;
    let laws = StateLaws::new(ch);
    let ev = Evaluator {
        laws: &laws,
        dj,
        pi: dj.delayed_marginal(),
        feedback,
    };
    let plain = Evaluator {
        laws: &laws,
        dj,
        pi: dj.delayed_marginal(),
        feedback: false,
    };
    let info_argmax = ev.solve_info();
    let r_max = ev.info(&info_argmax);
    let c_star = cap.value.min(r_max);

    let mut grid: Vec<f64> = (0..n_points).map(|i| r_max * i as f64 / (n_points - 1) as f64).collect();
    if !grid.contains(&c_star) {
        grid.push(c_star);
        grid.sort_by(f64::total_cmp);
    }
    let at_zero = ev.solve(0.0);
    let plain_zero = plain.solve(0.0);
    let plain_info = plain.solve_info();

    let eval_point = |r: f64| -> RatePair {
        let mut g = constrained_gain(&ev, r, &at_zero, &info_argmax);
        if feedback {
            // H(Y|Z,S,S~) >= I(X;Y|S,S~) - I(X;Z|S,S~) at every input law
            g = g.max(constrained_gain(&plain, r, &plain_zero, &plain_info));
        }
        if !feedback && r <= c_star {
            g = g.max(cap.value);
        }
        RatePair { r, re: g.min(r).max(0.0) }
    };

    #[cfg(feature = "parallel")]
    let points: Vec<RatePair> = {
        use rayon::prelude::*;
        grid.par_iter().map(|&r| eval_point(r)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Vec<RatePair> = grid.iter().map(|&r| eval_point(r)).collect();

    Ok(RegionBoundary {
        kind: if feedback {
            RegionKind::DegradedFeedback
        } else {
            RegionKind::Degraded
        },
        points,
        r_max,
        secrecy_capacity: cap.value,
    })
}

/// CSV with header `R,Re,kind,params-hash`.
pub fn boundaries_to_csv(boundaries: &[RegionBoundary], params_hash: &str) -> String {
    let mut out = String::from("R,Re,kind,params-hash\n");
    for b in boundaries {
        for p in &b.points {
            out.push_str(&format!("{},{},{},{}\n", p.r, p.re, b.kind.label(), params_hash));
        }
    }
    out
}
