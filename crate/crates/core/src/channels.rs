//! Wiretap channel models.
//!
//! A [`DiscreteWiretapChannel`] stores the state-dependent law
//! `P(y, z | x, s)` as a dense table with axis order `s, x, y, z`.  The
//! Gaussian and Gaussian-fading families are described by [`GaussianSpec`] and
//! [`FadingSpec`]; [`gaussian_to_discrete`] quantizes them so that the finite
//! machinery (exact information measures, the toy codec, the samplers) can be
//! run on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default composition tolerance for degradedness witnesses.
pub const DEFAULT_WITNESS_TOL: f64 = 1e-8;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Factorization `P(y,z|x,s) = P(z|y) P(y|x,s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradedWitness {
    /// `main[s][x][y] = P(y | x, s)`
    pub main: Vec<Vec<Vec<f64>>>,
    /// `wiretap[y][z] = P(z | y)`
    pub wiretap: Vec<Vec<f64>>,
    /// Max absolute composition error against the full table.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteWiretapChannel {
    ns: usize,
    nx: usize,
    ny: usize,
    nz: usize,
    table: Vec<f64>,
    witness: Option<DegradedWitness>,
}

/// On-disk form: nested arrays in `s, x, y, z` order.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChannelFile {
    axes: Vec<String>,
    table: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Serialize for DiscreteWiretapChannel {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelFile {
            axes: ["s", "x", "y", "z"].iter().map(|s| s.to_string()).collect(),
            table: self.nested(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for DiscreteWiretapChannel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let file = ChannelFile::deserialize(de)?;
        if file.axes != ["s", "x", "y", "z"] {
            return Err(serde::de::Error::custom(format!(
                "unsupported axis order {:?}; expected [\"s\",\"x\",\"y\",\"z\"]",
                file.axes
            )));
        }
        DiscreteWiretapChannel::from_nested(&file.table).map_err(serde::de::Error::custom)
    }
}

impl DiscreteWiretapChannel {
    /// Builds a channel from a flat `s, x, y, z` table.
    pub fn new(ns: usize, nx: usize, ny: usize, nz: usize, table: Vec<f64>) -> Result<Self> {
        if ns == 0 || nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Shape("every alphabet must be nonempty".into()));
        }
        if table.len() != ns * nx * ny * nz {
            return Err(Error::Shape(format!(
                "table has {} entries, expected {}",
                table.len(),
                ns * nx * ny * nz
            )));
        }
        if let Some(v) = table.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("channel probability {v} is negative or not finite")));
        }
        let ch = Self {
            ns,
            nx,
            ny,
            nz,
            table,
            witness: None,
        };
        for s in 0..ns {
            for x in 0..nx {
                let sum: f64 = ch.row(s, x).iter().sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::Domain(format!(
                        "P(y,z|x={x},s={s}) sums to {sum}, not 1"
                    )));
                }
            }
        }
        Ok(ch)
    }

    pub fn from_nested(t: &[Vec<Vec<Vec<f64>>>]) -> Result<Self> {
        let ns = t.len();
        let nx = t.first().map_or(0, |v| v.len());
        let ny = t.first().and_then(|v| v.first()).map_or(0, |v| v.len());
        let nz = t
            .first()
            .and_then(|v| v.first())
            .and_then(|v| v.first())
            .map_or(0, |v| v.len());
        let mut flat = Vec::with_capacity(ns * nx * ny * nz);
        for (s, xs) in t.iter().enumerate() {
            if xs.len() != nx {
                return Err(Error::Shape(format!("state {s}: ragged x axis")));
            }
            for (x, ys) in xs.iter().enumerate() {
                if ys.len() != ny {
                    return Err(Error::Shape(format!("s={s} x={x}: ragged y axis")));
                }
                for (y, zs) in ys.iter().enumerate() {
                    if zs.len() != nz {
                        return Err(Error::Shape(format!("s={s} x={x} y={y}: ragged z axis")));
                    }
                    flat.extend_from_slice(zs);
                }
            }
        }
        Self::new(ns, nx, ny, nz, flat)
    }

    pub fn nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        (0..self.ns)
            .map(|s| {
                (0..self.nx)
                    .map(|x| {
                        (0..self.ny)
                            .map(|y| (0..self.nz).map(|z| self.prob(s, x, y, z)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn states(&self) -> usize {
        self.ns
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nz(&self) -> usize {
        self.nz
    }

    #[inline]
    pub fn prob(&self, s: usize, x: usize, y: usize, z: usize) -> f64 {
        self.table[((s * self.nx + x) * self.ny + y) * self.nz + z]
    }

    /// The `ny * nz` block `P(., . | x, s)`, row-major in `(y, z)`.
    pub fn row(&self, s: usize, x: usize) -> &[f64] {
        let w = self.ny * self.nz;
        let start = (s * self.nx + x) * w;
        &self.table[start..start + w]
    }

    /// `P(y | x, s)`.
    pub fn main_prob(&self, s: usize, x: usize, y: usize) -> f64 {
        (0..self.nz).map(|z| self.prob(s, x, y, z)).sum()
    }

    /// `P(z | x, s)`.
    pub fn eve_prob(&self, s: usize, x: usize, z: usize) -> f64 {
        (0..self.ny).map(|y| self.prob(s, x, y, z)).sum()
    }

    pub fn witness(&self) -> Option<&DegradedWitness> {
        self.witness.as_ref()
    }

    pub fn is_degraded(&self) -> bool {
        self.witness.is_some()
    }

    /// Runs [`check_degraded`] at the default tolerance and attaches the
    /// witness if one exists.
    pub fn with_detected_witness(mut self) -> Self {
        self.witness = check_degraded(&self, DEFAULT_WITNESS_TOL);
        self
    }

    pub(crate) fn require_degraded(&self) -> Result<&DegradedWitness> {
        match &self.witness {
            Some(w) => Ok(w),
            None => Err(Error::NotDegraded {
                residual: degraded_residual(self).1,
            }),
        }
    }
}

fn check_stochastic_rows(rows: &[Vec<f64>], what: &str) -> Result<()> {
    for (i, r) in rows.iter().enumerate() {
        if r.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("{what} row {i} has a negative entry")));
        }
        let s: f64 = r.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Domain(format!("{what} row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Composes a main channel `P(y|x,s)` (indexed `[s][x][y]`) with a wiretap
/// channel `P(z|y)` (indexed `[y][z]`).
pub fn degraded_from(main: &[Vec<Vec<f64>>], wiretap: &[Vec<f64>]) -> Result<DiscreteWiretapChannel> {
    let ns = main.len();
    let nx = main.first().map_or(0, |v| v.len());
    let ny = main.first().and_then(|v| v.first()).map_or(0, |v| v.len());
    if wiretap.len() != ny {
        return Err(Error::Shape(format!(
            "main channel has {ny} outputs but wiretap channel has {} input rows",
            wiretap.len()
        )));
    }
    let nz = wiretap.first().map_or(0, |v| v.len());
    if wiretap.iter().any(|r| r.len() != nz) {
        return Err(Error::Shape("ragged wiretap channel".into()));
    }
    for (s, xs) in main.iter().enumerate() {
        if xs.len() != nx || xs.iter().any(|r| r.len() != ny) {
            return Err(Error::Shape(format!("ragged main channel at state {s}")));
        }
        check_stochastic_rows(xs, "main channel")?;
    }
    check_stochastic_rows(wiretap, "wiretap channel")?;
    let mut table = Vec::with_capacity(ns * nx * ny * nz);
    for xs in main {
        for ys in xs {
            for (y, &py) in ys.iter().enumerate() {
                for &pz in &wiretap[y] {
                    table.push(py * pz);
                }
            }
        }
    }
    let mut ch = DiscreteWiretapChannel::new(ns, nx, ny, nz, table)?;
    let (_, residual) = degraded_residual(&ch);
    ch.witness = Some(DegradedWitness {
        main: main.to_vec(),
        wiretap: wiretap.to_vec(),
        residual,
    });
    Ok(ch)
}

/// Least-squares fit of a single `P(z|y)` to the whole table and the
/// resulting max composition residual.
///
/// For fixed `(y, z)` the unknown `W(z|y)` enters only the equations
/// `P(y,z|x,s) = P(y|x,s) W(z|y)` over all `(x, s)`, so the nonnegative
/// least-squares problem separates into scalar problems whose solutions are
/// automatically nonnegative and row-stochastic.
fn degraded_residual(ch: &DiscreteWiretapChannel) -> (Vec<Vec<f64>>, f64) {
    let (ns, nx, ny, nz) = (ch.ns, ch.nx, ch.ny, ch.nz);
    let mut w = vec![vec![0.0; nz]; ny];
    for (y, wy) in w.iter_mut().enumerate() {
        let mut denom = 0.0;
        for s in 0..ns {
            for x in 0..nx {
                let py = ch.main_prob(s, x, y);
                denom += py * py;
                for (z, wz) in wy.iter_mut().enumerate() {
                    *wz += py * ch.prob(s, x, y, z);
                }
            }
        }
        if denom > 0.0 {
            wy.iter_mut().for_each(|v| *v /= denom);
        } else {
            wy.iter_mut().for_each(|v| *v = 1.0 / nz as f64);
        }
    }
    let mut residual: f64 = 0.0;
    for s in 0..ns {
        for x in 0..nx {
            for y in 0..ny {
                let py = ch.main_prob(s, x, y);
                for z in 0..nz {
                    residual = residual.max((ch.prob(s, x, y, z) - py * w[y][z]).abs());
                }
            }
        }
    }
    (w, residual)
}

/// Returns a witness iff a single `P(z|y)` reproduces the table within `tol`.
pub fn check_degraded(ch: &DiscreteWiretapChannel, tol: f64) -> Option<DegradedWitness> {
    let (wiretap, residual) = degraded_residual(ch);
    if residual > tol {
        return None;
    }
    let main = (0..ch.ns)
        .map(|s| {
            (0..ch.nx)
                .map(|x| (0..ch.ny).map(|y| ch.main_prob(s, x, y)).collect())
                .collect()
        })
        .collect();
    Some(DegradedWitness {
        main,
        wiretap,
        residual,
    })
}

/// Additive Gaussian wiretap channel `Y = X + N_s`, `Z = Y + N_w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    /// Per-state main-channel noise variances.
    pub sigma2: Vec<f64>,
    /// Eavesdropper's extra noise variance.
    pub sigma2_w: f64,
    /// Average power budget.
    pub p0: f64,
}

impl GaussianSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma2.is_empty() {
            return Err(Error::Shape("no per-state noise variances".into()));
        }
        if self.sigma2.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Domain("noise variances must be positive".into()));
        }
        if !(self.sigma2_w > 0.0 && self.sigma2_w.is_finite()) {
            return Err(Error::Domain("eavesdropper noise variance must be positive".into()));
        }
        if !(self.p0 >= 0.0 && self.p0.is_finite()) {
            return Err(Error::Domain("power budget must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.sigma2.len()
    }

    /// Same channel with unit fading gains.
    pub fn as_fading(&self) -> FadingSpec {
        FadingSpec {
            base: self.clone(),
            g: vec![1.0; self.states()],
            l: vec![1.0; self.states()],
        }
    }
}

/// Fading channel `Y = g(s) X + N_s`, `Z = l(s) Y + N_w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingSpec {
    #[serde(flatten)]
    pub base: GaussianSpec,
    pub g: Vec<f64>,
    pub l: Vec<f64>,
}

impl FadingSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let k = self.base.states();
        if self.g.len() != k || self.l.len() != k {
            return Err(Error::Shape(format!(
                "fading gains need {k} entries (got g: {}, l: {})",
                self.g.len(),
                self.l.len()
            )));
        }
        if self.g.iter().chain(&self.l).any(|v| !v.is_finite()) {
            return Err(Error::Domain("fading gains must be finite".into()));
        }
        if self.g.iter().all(|g| *g == 0.0) {
            return Err(Error::Domain("at least one main-channel gain must be nonzero".into()));
        }
        Ok(())
    }
}

/// Uniform partition of `[lo, hi]`; the two edge cells extend to infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Self {
        Self { lo, hi, cells }
    }

    fn validate(&self, axis: &str) -> Result<()> {
        if self.cells == 0 || !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::Domain(format!(
                "degenerate {axis} grid [{}, {}] with {} cells",
                self.lo, self.hi, self.cells
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    /// Cell probabilities of `N(mean, var)`, tails folded into the edges.
    pub fn gaussian_masses(&self, mean: f64, var: f64) -> Vec<f64> {
        let sd = var.sqrt();
        let edge = |i: usize| -> f64 {
            if i == 0 {
                f64::NEG_INFINITY
            } else if i == self.cells {
                f64::INFINITY
            } else {
                (self.lo + i as f64 * self.width() - mean) / sd
            }
        };
        let mut m: Vec<f64> = (0..self.cells)
            .map(|i| normal_interval(edge(i), edge(i + 1)))
            .collect();
        let s: f64 = m.iter().sum();
        m.iter_mut().for_each(|v| *v /= s);
        m
    }

    /// Index of the cell containing `v`.
    pub fn cell_of(&self, v: f64) -> usize {
        let i = ((v - self.lo) / self.width()).floor();
        if i < 0.0 {
            0
        } else {
            (i as usize).min(self.cells - 1)
        }
    }
}

/// `P(a < N(0,1) <= b)`, using the tail that keeps precision.
fn normal_interval(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (libm::erfc(a * s) - libm::erfc(b * s))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * s) - libm::erfc(-a * s))
    } else {
        1.0 - 0.5 * libm::erfc(-a * s) - 0.5 * libm::erfc(b * s)
    }
}

/// Quantization descriptor: input constellation plus output grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub inputs: Vec<f64>,
    pub y: Grid,
    pub z: Grid,
}

/// Quantizes a Gaussian or fading wiretap channel.
///
/// `Y` is quantized on `q.y`; `Z` is then drawn from the quantized `Y` cell's
/// midpoint (scaled by `l(s)`) plus eavesdropper noise and quantized on
/// `q.z`.  When `l` is constant across states the result carries a
/// degradedness witness.
pub fn gaussian_to_discrete(spec: &FadingSpec, q: &Quantizer) -> Result<DiscreteWiretapChannel> {
    spec.validate()?;
    q.y.validate("y")?;
    q.z.validate("z")?;
    if q.inputs.is_empty() || q.inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("input constellation must be nonempty and finite".into()));
    }
    let ns = spec.base.states();
    let main: Vec<Vec<Vec<f64>>> = (0..ns)
        .map(|s| {
            q.inputs
                .iter()
                .map(|&x| q.y.gaussian_masses(spec.g[s] * x, spec.base.sigma2[s]))
                .collect()
        })
        .collect();
    let wiretap_for = |l: f64| -> Vec<Vec<f64>> {
        (0..q.y.cells)
            .map(|y| q.z.gaussian_masses(l * q.y.midpoint(y), spec.base.sigma2_w))
            .collect()
    };
    if spec.l.iter().all(|l| *l == spec.l[0]) {
        return degraded_from(&main, &wiretap_for(spec.l[0]));
    }
    let (nx, ny, nz) = (q.inputs.len(), q.y.cells, q.z.cells);
    let mut table = Vec::with_capacity(ns * nx * ny * nz);
    for (s, xs) in main.iter().enumerate() {
        let wt = wiretap_for(spec.l[s]);
        for ys in xs {
            for (y, &py) in ys.iter().enumerate() {
                table.extend(wt[y].iter().map(|pz| py * pz));
            }
        }
    }
    DiscreteWiretapChannel::new(ns, nx, ny, nz, table)
}

/// Binary symmetric channel rows `[[1-p, p], [p, 1-p]]`.
pub fn bsc(p: f64) -> Vec<Vec<f64>> {
    vec![vec![1.0 - p, p], vec![p, 1.0 - p]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn bsc_cascade(p_main: &[f64], p_wt: f64) -> DiscreteWiretapChannel {
        let main: Vec<_> = p_main.iter().map(|&p| bsc(p)).collect();
        degraded_from(&main, &bsc(p_wt)).unwrap()
    }

    #[test]
    fn identity_wiretap_is_supported_on_diagonal() {
        let ch = degraded_from(&[bsc(0.1)], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        for x in 0..2 {
            assert_eq!(ch.prob(0, x, 0, 1), 0.0);
            assert_eq!(ch.prob(0, x, 1, 0), 0.0);
        }
    }

    #[test]
    fn uniform_wiretap_decouples_z() {
        let ch = degraded_from(&[bsc(0.1), bsc(0.3)], &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        for s in 0..2 {
            for x in 0..2 {
                assert_abs_diff_eq!(ch.eve_prob(s, x, 0), 0.5, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn cascade_matches_hand_products() {
        let ch = bsc_cascade(&[0.1, 0.3], 0.2);
        // s, x, y, z
        let cases = [
            (0, 0, 0, 0, 0.9 * 0.8),
            (0, 0, 0, 1, 0.9 * 0.2),
            (0, 0, 1, 0, 0.1 * 0.2),
            (0, 1, 1, 1, 0.9 * 0.8),
            (1, 0, 1, 1, 0.3 * 0.8),
            (1, 1, 0, 1, 0.3 * 0.2),
            (1, 1, 1, 0, 0.7 * 0.2),
            (1, 0, 0, 0, 0.7 * 0.8),
        ];
        for (s, x, y, z, v) in cases {
            assert_abs_diff_eq!(ch.prob(s, x, y, z), v, epsilon = 1e-15);
        }
        let w = check_degraded(&ch, 1e-10).expect("witness");
        assert!(w.residual <= 1e-10);
        assert_abs_diff_eq!(w.wiretap[0][1], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let err = degraded_from(&[bsc(0.1)], &[vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn xor_eavesdropper_is_not_degraded() {
        // y = x with noise, z = x xor y deterministic
        let mut t = vec![0.0; 2 * 2 * 2];
        for x in 0..2 {
            for y in 0..2 {
                let py = if x == y { 0.9 } else { 0.1 };
                let z = x ^ y;
                t[(x * 2 + y) * 2 + z] = py;
            }
        }
        let ch = DiscreteWiretapChannel::new(1, 2, 2, 2, t).unwrap();
        assert!(check_degraded(&ch, 1e-8).is_none());
        assert!(matches!(ch.require_degraded(), Err(Error::NotDegraded { .. })));
    }

    /// Oracle: dense scan of all P(z|y) on a grid; the best residual must
    /// exceed the tolerance for the random table.
    #[test]
    fn random_table_has_no_witness() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut t = Vec::new();
        for _ in 0..4 {
            let r: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = r.iter().sum();
            t.extend(r.iter().map(|v| v / s));
        }
        let ch = DiscreteWiretapChannel::new(2, 2, 2, 2, t).unwrap();
        assert!(check_degraded(&ch, 1e-8).is_none());
        let mut best = f64::INFINITY;
        let steps = 200;
        for a in 0..=steps {
            for b in 0..=steps {
                let w = [
                    [a as f64 / steps as f64, 1.0 - a as f64 / steps as f64],
                    [b as f64 / steps as f64, 1.0 - b as f64 / steps as f64],
                ];
                let mut r: f64 = 0.0;
                for s in 0..2 {
                    for x in 0..2 {
                        for y in 0..2 {
                            for z in 0..2 {
                                let e = ch.prob(s, x, y, z) - ch.main_prob(s, x, y) * w[y][z];
                                r = r.max(e.abs());
                            }
                        }
                    }
                }
                best = best.min(r);
            }
        }
        assert!(best > 1e-3, "grid oracle found residual {best}");
    }

    #[test]
    fn json_round_trip() {
        let ch = bsc_cascade(&[0.1, 0.3], 0.2);
        let s = serde_json::to_string(&ch).unwrap();
        assert!(s.contains("\"axes\":[\"s\",\"x\",\"y\",\"z\"]"));
        let back: DiscreteWiretapChannel = serde_json::from_str(&s).unwrap();
        assert_eq!(back.nested(), ch.nested());
        assert!(serde_json::from_str::<DiscreteWiretapChannel>(
            r#"{"axes":["x","s","y","z"],"table":[[[[1.0]]]]}"#
        )
        .is_err());
    }

    #[test]
    fn quantized_rows_are_stochastic() {
        let spec = FadingSpec {
            base: GaussianSpec {
                sigma2: vec![1.0, 4.0],
                sigma2_w: 2.0,
                p0: 1.0,
            },
            g: vec![1.0, 0.5],
            l: vec![0.8, 0.2],
        };
        let q = Quantizer {
            inputs: vec![-1.0, 0.0, 1.0],
            y: Grid::new(-4.0, 4.0, 8),
            z: Grid::new(-4.0, 4.0, 6),
        };
        let ch = gaussian_to_discrete(&spec, &q).unwrap();
        assert!(!ch.is_degraded());
        for s in 0..2 {
            for x in 0..3 {
                assert_abs_diff_eq!(ch.row(s, x).iter().sum::<f64>(), 1.0, epsilon = 1e-13);
            }
        }
        let degraded = gaussian_to_discrete(&GaussianSpec { ..spec.base.clone() }.as_fading(), &q).unwrap();
        assert!(degraded.is_degraded());
    }

    #[test]
    fn symmetric_two_cell_grid_is_bsc_like() {
        let spec = GaussianSpec {
            sigma2: vec![1.0],
            sigma2_w: 1.0,
            p0: 1.0,
        }
        .as_fading();
        let q = Quantizer {
            inputs: vec![-1.0, 1.0],
            y: Grid::new(-1.0, 1.0, 2),
            z: Grid::new(-1.0, 1.0, 2),
        };
        let ch = gaussian_to_discrete(&spec, &q).unwrap();
        let w = ch.witness().unwrap();
        assert_abs_diff_eq!(w.main[0][0][0], w.main[0][1][1], epsilon = 1e-15);
        assert_abs_diff_eq!(w.main[0][0][1], w.main[0][1][0], epsilon = 1e-15);
        // P(N(1,1) > 0)
        assert_abs_diff_eq!(w.main[0][1][1], 0.841_344_746_068_542_9, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_grid_rejected() {
        let spec = GaussianSpec {
            sigma2: vec![1.0],
            sigma2_w: 1.0,
            p0: 1.0,
        }
        .as_fading();
        let q = Quantizer {
            inputs: vec![0.0],
            y: Grid::new(1.0, 1.0, 4),
            z: Grid::new(-1.0, 1.0, 2),
        };
        assert!(matches!(gaussian_to_discrete(&spec, &q), Err(Error::Domain(_))));
        let q = Quantizer {
            inputs: vec![0.0],
            y: Grid::new(-1.0, 1.0, 0),
            z: Grid::new(-1.0, 1.0, 2),
        };
        assert!(gaussian_to_discrete(&spec, &q).is_err());
    }
}
