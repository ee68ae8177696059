//! Exact information measures on dense joint probability tables.
//!
//! All measures are reported in bits.  Sums run in natural log and are
//! converted once at the end; `0 log 0` and `0/0` conditionals are taken as 0.

use serde::{Deserialize, Serialize};

use crate::channels::DiscreteWiretapChannel;
use crate::error::{Error, Result};
use crate::markov::{DelayedJoint, StateChain};

pub const AXIS_U: &str = "U";
pub const AXIS_V: &str = "V";
/// Delayed state `S_{i-d}`.
pub const AXIS_S_DELAYED: &str = "S~";
pub const AXIS_S: &str = "S";
pub const AXIS_X: &str = "X";
pub const AXIS_Y: &str = "Y";
pub const AXIS_Z: &str = "Z";

/// Dense tables above this many cells are refused.
pub const MAX_CELLS: u128 = 100_000_000;

const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub size: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Self {
            name: name.into(),
            size,
        }
    }
}

/// Joint pmf over named axes, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    axes: Vec<Axis>,
    probs: Vec<f64>,
}

fn cell_count(axes: &[Axis]) -> Result<usize> {
    let n: u128 = axes.iter().map(|a| a.size as u128).product();
    if n > MAX_CELLS {
        return Err(Error::Guardrail {
            what: "joint table cells",
            estimate: n,
            limit: MAX_CELLS,
        });
    }
    Ok(n as usize)
}

impl JointTable {
    pub fn new(axes: Vec<Axis>, probs: Vec<f64>) -> Result<Self> {
        let n = cell_count(&axes)?;
        if probs.len() != n {
            return Err(Error::Shape(format!("table has {} cells, axes imply {n}", probs.len())));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.size == 0 {
                return Err(Error::Shape(format!("axis `{}` is empty", a.name)));
            }
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Shape(format!("duplicate axis `{}`", a.name)));
            }
        }
        if probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::Domain("joint probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!("joint table has total mass {total}")));
        }
        Ok(Self { axes, probs })
    }

    /// Builds a table by evaluating `f` at every multi-index.
    pub fn from_fn(axes: Vec<Axis>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n = cell_count(&axes)?;
        let mut probs = Vec::with_capacity(n);
        let mut idx = vec![0usize; axes.len()];
        for _ in 0..n {
            probs.push(f(&idx));
            for (i, a) in axes.iter().enumerate().rev() {
                idx[i] += 1;
                if idx[i] < a.size {
                    break;
                }
                idx[i] = 0;
            }
        }
        Self::new(axes, probs)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    pub fn axis_size(&self, name: &str) -> Result<usize> {
        Ok(self.axes[self.axis_index(name)?].size)
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.axis_index(n)).collect()
    }

    /// Marginal over `names`, in the given order (last fastest).
    pub fn marginal(&self, names: &[&str]) -> Result<Vec<f64>> {
        let pos = self.positions(names)?;
        Ok(self.project(&pos))
    }

    fn project(&self, keep: &[usize]) -> Vec<f64> {
        let mut stride = vec![0usize; self.axes.len()];
        let mut s = 1;
        for &p in keep.iter().rev() {
            stride[p] = s;
            s *= self.axes[p].size;
        }
        let mut out = vec![0.0; s];
        let mut idx = vec![0usize; self.axes.len()];
        let mut o = 0usize;
        for &p in &self.probs {
            out[o] += p;
            for i in (0..self.axes.len()).rev() {
                idx[i] += 1;
                o += stride[i];
                if idx[i] < self.axes[i].size {
                    break;
                }
                o -= stride[i] * idx[i];
                idx[i] = 0;
            }
        }
        out
    }

    fn entropy_nats(&self, pos: &[usize]) -> f64 {
        if pos.is_empty() {
            return 0.0;
        }
        self.project(pos)
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }

    /// Shannon entropy of the marginal over `names`.
    pub fn entropy(&self, names: &[&str]) -> Result<f64> {
        if names.is_empty() {
            return Err(Error::Shape("entropy needs at least one axis".into()));
        }
        let pos = self.positions(names)?;
        Ok(self.entropy_nats(&pos) / std::f64::consts::LN_2)
    }

    /// `H(A | C)`.
    pub fn cond_entropy(&self, a: &[&str], c: &[&str]) -> Result<f64> {
        let pa = self.positions(a)?;
        let pc = self.positions(c)?;
        disjoint(self, &pa, &pc)?;
        let ac: Vec<usize> = pa.iter().chain(&pc).copied().collect();
        Ok((self.entropy_nats(&ac) - self.entropy_nats(&pc)).max(0.0) / std::f64::consts::LN_2)
    }

    /// `I(A; B | C)`, evaluated as the divergence
    /// `sum p(a,b,c) ln[p(a,b,c) p(c) / (p(a,c) p(b,c))]`.
    pub fn cond_mutual_info(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        let pa = self.positions(a)?;
        let pb = self.positions(b)?;
        let pc = self.positions(c)?;
        disjoint(self, &pa, &pb)?;
        disjoint(self, &pa, &pc)?;
        disjoint(self, &pb, &pc)?;
        if pa.is_empty() || pb.is_empty() {
            return Ok(0.0);
        }
        Ok(self.cmi_nats(&pa, &pb, &pc) / std::f64::consts::LN_2)
    }

    fn cmi_nats(&self, pa: &[usize], pb: &[usize], pc: &[usize]) -> f64 {
        let size = |p: &[usize]| p.iter().map(|&i| self.axes[i].size).product::<usize>();
        let (na, nb, nc) = (size(pa), size(pb), size(pc));
        let abc: Vec<usize> = pa.iter().chain(pb).chain(pc).copied().collect();
        let ac: Vec<usize> = pa.iter().chain(pc).copied().collect();
        let bc: Vec<usize> = pb.iter().chain(pc).copied().collect();
        let p_abc = self.project(&abc);
        let p_ac = self.project(&ac);
        let p_bc = self.project(&bc);
        let p_c = self.project(pc);
        let mut acc = 0.0;
        for ia in 0..na {
            for ib in 0..nb {
                for ic in 0..nc {
                    let p = p_abc[(ia * nb + ib) * nc + ic];
                    if p > 0.0 {
                        acc += p * (p * p_c[ic] / (p_ac[ia * nc + ic] * p_bc[ib * nc + ic])).ln();
                    }
                }
            }
        }
        acc
    }

    /// Max over cells of `|p(a,b,c) p(c) - p(a,c) p(b,c)|`; zero iff
    /// `A` and `B` are conditionally independent given `C`.
    pub fn independence_residual(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        let pa = self.positions(a)?;
        let pb = self.positions(b)?;
        let pc = self.positions(c)?;
        let size = |p: &[usize]| p.iter().map(|&i| self.axes[i].size).product::<usize>();
        let (na, nb, nc) = (size(&pa), size(&pb), size(&pc));
        let abc: Vec<usize> = pa.iter().chain(&pb).chain(&pc).copied().collect();
        let ac: Vec<usize> = pa.iter().chain(&pc).copied().collect();
        let bc: Vec<usize> = pb.iter().chain(&pc).copied().collect();
        let p_abc = self.project(&abc);
        let p_ac = self.project(&ac);
        let p_bc = self.project(&bc);
        let p_c = self.project(&pc);
        let mut r: f64 = 0.0;
        for ia in 0..na {
            for ib in 0..nb {
                for ic in 0..nc {
                    let e = p_abc[(ia * nb + ib) * nc + ic] * p_c[ic]
                        - p_ac[ia * nc + ic] * p_bc[ib * nc + ic];
                    r = r.max(e.abs());
                }
            }
        }
        Ok(r)
    }
}

fn disjoint(t: &JointTable, a: &[usize], b: &[usize]) -> Result<()> {
    match a.iter().find(|i| b.contains(i)) {
        Some(&i) => Err(Error::OverlappingAxes(t.axes[i].name.clone())),
        None => Ok(()),
    }
}

/// Auxiliary factors `P(u|s~)`, `P(v|u,s~)`, `P(x|u,v,s~)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryScheme {
    /// `pu[s~][u]`
    pub pu: Vec<Vec<f64>>,
    /// `pv[s~][u][v]`
    pub pv: Vec<Vec<Vec<f64>>>,
    /// `px[s~][u][v][x]`
    pub px: Vec<Vec<Vec<Vec<f64>>>>,
}

impl AuxiliaryScheme {
    /// `|U| = |V| = 1`, `X ~ P(x|s~)`.
    pub fn trivial(input: &[Vec<f64>]) -> Self {
        Self {
            pu: input.iter().map(|_| vec![1.0]).collect(),
            pv: input.iter().map(|_| vec![vec![1.0]]).collect(),
            px: input.iter().map(|r| vec![vec![r.clone()]]).collect(),
        }
    }

    /// `U` constant, `V = X ~ P(x|s~)`.
    pub fn direct(input: &[Vec<f64>]) -> Self {
        let nx = input.first().map_or(0, |r| r.len());
        let eye: Vec<Vec<f64>> = (0..nx)
            .map(|v| (0..nx).map(|x| if v == x { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            pu: input.iter().map(|_| vec![1.0]).collect(),
            pv: input.iter().map(|r| vec![r.clone()]).collect(),
            px: input.iter().map(|_| vec![eye.clone()]).collect(),
        }
    }

    pub fn nu(&self) -> usize {
        self.pu.first().map_or(0, |r| r.len())
    }

    pub fn nv(&self) -> usize {
        self.pv.first().and_then(|r| r.first()).map_or(0, |r| r.len())
    }

    pub fn nx(&self) -> usize {
        self.px
            .first()
            .and_then(|r| r.first())
            .and_then(|r| r.first())
            .map_or(0, |r| r.len())
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let (nu, nv, nx) = (self.nu(), self.nv(), self.nx());
        if self.pu.len() != k || self.pv.len() != k || self.px.len() != k {
            return Err(Error::Shape(format!("auxiliary factors must have {k} delayed-state rows (axis S~)")));
        }
        let row = |r: &[f64], n: usize, what: &str| -> Result<()> {
            if r.len() != n {
                return Err(Error::Shape(format!("{what}: expected {n} entries, got {}", r.len())));
            }
            if r.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::Domain(format!("{what}: negative probability")));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > MASS_TOL {
                return Err(Error::Domain(format!("{what}: row sums to {s}")));
            }
            Ok(())
        };
        for st in 0..k {
            row(&self.pu[st], nu, "P(u|s~) (axis U)")?;
            if self.pv[st].len() != nu || self.px[st].len() != nu {
                return Err(Error::Shape("axis U: inconsistent cardinality".into()));
            }
            for u in 0..nu {
                row(&self.pv[st][u], nv, "P(v|u,s~) (axis V)")?;
                if self.px[st][u].len() != nv {
                    return Err(Error::Shape("axis V: inconsistent cardinality".into()));
                }
                for v in 0..nv {
                    row(&self.px[st][u][v], nx, "P(x|u,v,s~) (axis X)")?;
                }
            }
        }
        Ok(())
    }
}

/// Joint law over `(U, V, S~, S, X, Y, Z)` from the product
/// `P(s~) P(u|s~) P(v|u,s~) P(x|u,v,s~) K^d(s~,s) P(y,z|x,s)`.
pub fn assemble_joint(
    chain: &StateChain,
    d: u64,
    aux: &AuxiliaryScheme,
    ch: &DiscreteWiretapChannel,
) -> Result<JointTable> {
    assemble_joint_with(&chain.delayed_joint(d), aux, ch)
}

pub fn assemble_joint_with(
    dj: &DelayedJoint,
    aux: &AuxiliaryScheme,
    ch: &DiscreteWiretapChannel,
) -> Result<JointTable> {
    let k = dj.states();
    if ch.states() != k {
        return Err(Error::Shape(format!(
            "axis S: channel has {} states, chain has {k}",
            ch.states()
        )));
    }
    aux.validate(k)?;
    if aux.nx() != ch.nx() {
        return Err(Error::Shape(format!(
            "axis X: auxiliary scheme has {} inputs, channel has {}",
            aux.nx(),
            ch.nx()
        )));
    }
    let axes = vec![
        Axis::new(AXIS_U, aux.nu()),
        Axis::new(AXIS_V, aux.nv()),
        Axis::new(AXIS_S_DELAYED, k),
        Axis::new(AXIS_S, k),
        Axis::new(AXIS_X, ch.nx()),
        Axis::new(AXIS_Y, ch.ny()),
        Axis::new(AXIS_Z, ch.nz()),
    ];
    cell_count(&axes)?;
    let t = JointTable::from_fn(axes, |i| {
        let (u, v, st, s, x, y, z) = (i[0], i[1], i[2], i[3], i[4], i[5], i[6]);
        dj.table[st][s] * aux.pu[st][u] * aux.pv[st][u][v] * aux.px[st][u][v][x] * ch.prob(s, x, y, z)
    });
    // renormalize away the last-ulp drift of the product
    match t {
        Ok(t) => Ok(t),
        Err(Error::Domain(_)) => Err(Error::Domain("assembled joint does not sum to 1".into())),
        Err(e) => Err(e),
    }
}

/// Both sides of `H(Y|S,S~,Z) = I(X;Y|S,S~) - I(X;Z|S,S~) + H(Y|X,Z,S,S~)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `I(X;Z|S,S~,Y)`: zero iff `X -> (S,S~,Y) -> Z` holds.
    pub markov_violation: f64,
    /// Set when the Markov chain fails and the identity need not hold.
    pub warning: bool,
}

impl IdentityCheck {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

pub fn degraded_identity_check(t: &JointTable) -> Result<IdentityCheck> {
    let ss = [AXIS_S, AXIS_S_DELAYED];
    let lhs = t.cond_entropy(&[AXIS_Y], &[AXIS_S, AXIS_S_DELAYED, AXIS_Z])?;
    let rhs = t.cond_mutual_info(&[AXIS_X], &[AXIS_Y], &ss)?
        - t.cond_mutual_info(&[AXIS_X], &[AXIS_Z], &ss)?
        + t.cond_entropy(&[AXIS_Y], &[AXIS_X, AXIS_Z, AXIS_S, AXIS_S_DELAYED])?;
    let markov_violation =
        t.cond_mutual_info(&[AXIS_X], &[AXIS_Z], &[AXIS_S, AXIS_S_DELAYED, AXIS_Y])?;
    Ok(IdentityCheck {
        lhs,
        rhs,
        markov_violation,
        warning: markov_violation > 1e-12,
    })
}

/// Residuals of the two Csiszar sum identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsiszarCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_w: f64,
    pub rhs_w: f64,
}

impl CsiszarCheck {
    pub fn residuals(&self) -> (f64, f64) {
        ((self.lhs - self.rhs).abs(), (self.lhs_w - self.rhs_w).abs())
    }
}

pub fn y_axis(i: usize) -> String {
    format!("Y{i}")
}

pub fn z_axis(i: usize) -> String {
    format!("Z{i}")
}

/// Evaluates, for a joint over `W, Y1..Yn, Z1..Zn, S` (the whole state
/// block as one axis),
///
/// ```text
/// sum_i I(Y_i; Z_{i+1}^n | Y^{i-1}, S)      vs  sum_i I(Z_i; Y^{i-1} | Z_{i+1}^n, S)
/// sum_i I(Y_i; Z_{i+1}^n | Y^{i-1}, S, W)   vs  sum_i I(Z_i; Y^{i-1} | Z_{i+1}^n, S, W)
/// ```
pub fn csiszar_sum_check(t: &JointTable, n: usize) -> Result<CsiszarCheck> {
    if !(2..=3).contains(&n) {
        let per_block: u128 = t.axes().iter().map(|a| a.size as u128).product();
        return Err(Error::Guardrail {
            what: "Csiszar check block length",
            estimate: per_block.saturating_mul(n as u128),
            limit: 3,
        });
    }
    let ys: Vec<String> = (1..=n).map(y_axis).collect();
    let zs: Vec<String> = (1..=n).map(z_axis).collect();
    for name in ys.iter().chain(&zs).map(|s| s.as_str()).chain(["W", AXIS_S]) {
        t.axis_index(name)?;
    }
    let side = |with_w: bool| -> Result<(f64, f64)> {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 0..n {
            let past_y: Vec<&str> = ys[..i].iter().map(|s| s.as_str()).collect();
            let future_z: Vec<&str> = zs[i + 1..].iter().map(|s| s.as_str()).collect();
            let mut cond_l = past_y.clone();
            cond_l.push(AXIS_S);
            let mut cond_r = future_z.clone();
            cond_r.push(AXIS_S);
            if with_w {
                cond_l.push("W");
                cond_r.push("W");
            }
            lhs += t.cond_mutual_info(&[ys[i].as_str()], &future_z, &cond_l)?;
            rhs += t.cond_mutual_info(&[zs[i].as_str()], &past_y, &cond_r)?;
        }
        Ok((lhs, rhs))
    };
    let (lhs, rhs) = side(false)?;
    let (lhs_w, rhs_w) = side(true)?;
    Ok(CsiszarCheck {
        lhs,
        rhs,
        lhs_w,
        rhs_w,
    })
}

/// Binary entropy in bits.
pub fn h2(p: f64) -> f64 {
    let f = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    f(p) + f(1.0 - p)
}
