//! Channel state process: a finite, irreducible, aperiodic Markov chain.
//!
//! The chain is stored as a dense row-stochastic matrix `K`.  Besides the
//! stationary law `pi` and the d-step matrix `K^d`, this module builds the
//! joint law of the current state `S_i` and the delayed state `S_{i-d}` that
//! the transmitter learns through the feedback link:
//!
//! ```text
//! P(S_{i-d} = j, S_i = l) = pi(j) K^d(j, l)
//! ```
//!
//! States are indexed `0..k`.  For the two-state Gilbert-Elliott chain index
//! 0 is the good state `G` and index 1 the bad state `B`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums must be within this of 1.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Delays beyond this use the stationary-rows limit of `K^d`.
pub const MAX_EXPLICIT_DELAY: u64 = 1_000_000;

/// Dense `n x n` matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Shape("matrix has no rows".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul(&self, other: &SquareMatrix) -> SquareMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        SquareMatrix { n, data }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn normalize_rows(&mut self) {
        let n = self.n;
        for i in 0..n {
            let row = &mut self.data[i * n..(i + 1) * n];
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
    }
}

/// Stationary distribution of a [`StateChain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryLaw {
    pub pi: Vec<f64>,
}

/// A k-state Markov chain that is irreducible and aperiodic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SquareMatrix", into = "SquareMatrix")]
pub struct StateChain {
    kernel: SquareMatrix,
    stationary: StationaryLaw,
}

impl TryFrom<SquareMatrix> for StateChain {
    type Error = Error;

    fn try_from(m: SquareMatrix) -> Result<Self> {
        StateChain::new(m)
    }
}

impl From<StateChain> for SquareMatrix {
    fn from(c: StateChain) -> Self {
        c.kernel
    }
}

impl StateChain {
    /// Validates `kernel` and solves for its stationary law.
    pub fn new(kernel: SquareMatrix) -> Result<Self> {
        let k = kernel.dim();
        for i in 0..k {
            let row = kernel.row(i);
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Domain(format!(
                    "transition probability {v} in row {i} is outside [0,1]"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Domain(format!("row {i} sums to {s}, not 1")));
            }
        }
        check_irreducible(&kernel)?;
        let period = period(&kernel);
        if period != 1 {
            return Err(Error::Periodic { period });
        }
        let stationary = solve_stationary(&kernel)?;
        Ok(Self { kernel, stationary })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(SquareMatrix::from_rows(rows)?)
    }

    /// Single-state chain.
    pub fn trivial() -> Self {
        Self::new(SquareMatrix::identity(1)).expect("1-state chain is valid")
    }

    /// Gilbert-Elliott chain from memory `u = 1-g-b` and ratio `c = g/b`.
    pub fn two_state(u: f64, c: f64) -> Result<Self> {
        TwoStateParams::from_memory(u, c)?.chain()
    }

    pub fn states(&self) -> usize {
        self.kernel.dim()
    }

    pub fn kernel(&self) -> &SquareMatrix {
        &self.kernel
    }

    pub fn stationary(&self) -> &StationaryLaw {
        &self.stationary
    }

    pub fn pi(&self) -> &[f64] {
        &self.stationary.pi
    }

    /// `K^d`, with `K^0 = I`.  Computed by repeated squaring; delays above
    /// [`MAX_EXPLICIT_DELAY`] return the stationary rows.
    pub fn power(&self, d: u64) -> SquareMatrix {
        if d > MAX_EXPLICIT_DELAY {
            return self.limit_power();
        }
        let mut result = SquareMatrix::identity(self.states());
        let mut base = self.kernel.clone();
        let mut e = d;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
                result.normalize_rows();
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
                base.normalize_rows();
            }
        }
        result
    }

    /// `lim K^d`: every row equals `pi`.
    pub fn limit_power(&self) -> SquareMatrix {
        let rows: Vec<Vec<f64>> = (0..self.states()).map(|_| self.pi().to_vec()).collect();
        SquareMatrix::from_rows(&rows).expect("square by construction")
    }

    pub fn delayed_joint(&self, d: u64) -> DelayedJoint {
        DelayedJoint::from_parts(self.pi(), &self.power(d), Some(d))
    }

    /// Joint law of `(S_{i-d}, S_i)` as `d -> infinity`.
    pub fn delayed_joint_limit(&self) -> DelayedJoint {
        DelayedJoint::from_parts(self.pi(), &self.limit_power(), None)
    }
}

/// Joint law of the delayed state `S~ = S_{i-d}` (rows) and the current
/// state `S = S_i` (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayedJoint {
    /// `None` means the `d -> infinity` limit.
    pub d: Option<u64>,
    pub table: Vec<Vec<f64>>,
}

impl DelayedJoint {
    fn from_parts(pi: &[f64], kd: &SquareMatrix, d: Option<u64>) -> Self {
        let k = pi.len();
        let table = (0..k)
            .map(|j| (0..k).map(|l| pi[j] * kd.get(j, l)).collect())
            .collect();
        Self { d, table }
    }

    pub fn states(&self) -> usize {
        self.table.len()
    }

    /// Marginal of the delayed state; equals `pi`.
    pub fn delayed_marginal(&self) -> Vec<f64> {
        self.table.iter().map(|r| r.iter().sum()).collect()
    }

    /// `P(S = l | S~ = j)`, i.e. `K^d(j, l)`.
    pub fn transition(&self, j: usize, l: usize) -> f64 {
        let pj: f64 = self.table[j].iter().sum();
        if pj > 0.0 {
            self.table[j][l] / pj
        } else {
            0.0
        }
    }

    pub fn total(&self) -> f64 {
        self.table.iter().flatten().sum()
    }
}

/// Parameters of the two-state good/bad chain.
///
/// `b = P(B|G)`, `g = P(G|B)`, memory `u = 1 - g - b`, ratio `c = g / b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStateParams {
    pub g: f64,
    pub b: f64,
}

impl TwoStateParams {
    pub fn new(g: f64, b: f64) -> Result<Self> {
        let ok = |p: f64| p > 0.0 && p <= 1.0;
        if !ok(g) || !ok(b) {
            return Err(Error::Domain(format!(
                "two-state transition probabilities g={g}, b={b} must lie in (0,1]"
            )));
        }
        if g == 1.0 && b == 1.0 {
            return Err(Error::Periodic { period: 2 });
        }
        Ok(Self { g, b })
    }

    pub fn from_memory(u: f64, c: f64) -> Result<Self> {
        if !(u > -1.0 && u < 1.0) {
            return Err(Error::Domain(format!("memory u={u} must lie in (-1,1)")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("ratio c={c} must be positive")));
        }
        let g = c * (1.0 - u) / (1.0 + c);
        let b = (1.0 - u) / (1.0 + c);
        Self::new(g, b)
    }

    pub fn memory(&self) -> f64 {
        1.0 - self.g - self.b
    }

    pub fn ratio(&self) -> f64 {
        self.g / self.b
    }

    pub fn chain(&self) -> Result<StateChain> {
        StateChain::from_rows(&[
            vec![1.0 - self.b, self.b],
            vec![self.g, 1.0 - self.g],
        ])
    }
}

fn reachable(kernel: &SquareMatrix, start: usize, transpose: bool) -> Vec<bool> {
    let k = kernel.dim();
    let mut seen = vec![false; k];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for j in 0..k {
            let p = if transpose {
                kernel.get(j, i)
            } else {
                kernel.get(i, j)
            };
            if p > 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

fn check_irreducible(kernel: &SquareMatrix) -> Result<()> {
    if let Some(to) = reachable(kernel, 0, false).iter().position(|r| !r) {
        return Err(Error::Reducible { from: 0, to });
    }
    if let Some(from) = reachable(kernel, 0, true).iter().position(|r| !r) {
        return Err(Error::Reducible { from, to: 0 });
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of an irreducible chain: gcd over support edges `i -> j` of
/// `level(i) + 1 - level(j)`, with BFS levels from state 0.
fn period(kernel: &SquareMatrix) -> usize {
    let k = kernel.dim();
    let mut level = vec![usize::MAX; k];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for j in 0..k {
            if kernel.get(i, j) > 0.0 && level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    let mut g = 0;
    for i in 0..k {
        for j in 0..k {
            if kernel.get(i, j) > 0.0 {
                let diff = (level[i] + 1).abs_diff(level[j]);
                g = gcd(g, diff);
            }
        }
    }
    g.max(1)
}

/// Solves `(I - K^T) pi = 0` with the last equation replaced by `sum pi = 1`.
fn solve_stationary(kernel: &SquareMatrix) -> Result<StationaryLaw> {
    let k = kernel.dim();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().take(k).enumerate() {
            *v = if i == j { 1.0 } else { 0.0 } - kernel.get(j, i);
        }
    }
    for v in a[k - 1].iter_mut() {
        *v = 1.0;
    }
    let mut pi = gauss_solve(a).ok_or_else(|| Error::Domain("singular stationary system".into()))?;
    for p in pi.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= s);
    Ok(StationaryLaw { pi })
}

/// Gaussian elimination with partial pivoting on an augmented `n x (n+1)`
/// system.
pub(crate) fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}
