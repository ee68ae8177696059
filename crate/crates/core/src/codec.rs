//! Toy-scale multiplexed wiretap code.
//!
//! One component codebook per delayed state `s~`. Component `s~` has length
//! `N_s~`, a secret index `a` and a binning index `b`; the binning alphabet is
//! split into `|J|` equal bins and the message of the component is `(a, j)`,
//! with `b` drawn uniformly inside bin `j`. The `t`-th channel use whose
//! delayed state is `s~` carries symbol `t` of component `s~`; uses past `N_s~`
//! send symbol 0.
//!
//! Alphabet sizes are powers of two, so bins always have equal size and the
//! key can be added to `j` modulo `|J|`.
//!
//! With feedback, a key is hashed from an earlier block's demultiplexed
//! output and added to `j`. Decoding is exact MAP per component and the
//! eavesdropper's equivocation is computed by exhaustive enumeration.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{secrecy_capacity_discrete_at, secrecy_capacity_discrete_feedback_at, InputLawFamily};
use crate::channels::DiscreteWiretapChannel;
use crate::infotheory::{Axis, JointTable, AXIS_S, AXIS_X, AXIS_Y, AXIS_Z};
use crate::markov::{DelayedJoint, StateChain};
use crate::streams::{derive_seed, mix64, sample_index, stream};
use crate::{Error, Result};

pub const MAX_BLOCK_LEN: usize = 12;
pub const MAX_ALPHABET: usize = 3;
pub const MAX_CODE_STATES: usize = 3;
/// Total codewords over all component books.
pub const MAX_CODEWORDS: u128 = 1 << 16;
/// Limit on `|Z|^N * |S|^N` for exact equivocation.
pub const MAX_ENUMERATION: u128 = 1 << 24;
/// Delayed state used for the first `d` channel uses of a block.
pub const PLACEHOLDER_STATE: usize = 0;

/// Rates of one component book, in bits per component symbol.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateRate {
    /// `log2 |A| / N_s~`.
    pub secret: f64,
    /// `log2 |B| / N_s~`.
    pub binning: f64,
    /// `log2 |J| / N_s~`; must not exceed `binning`.
    #[serde(default)]
    pub bin_message: f64,
}

impl StateRate {
    /// No binning: every codeword carries message.
    pub fn plain(rate: f64) -> Self {
        Self {
            secret: rate,
            binning: 0.0,
            bin_message: 0.0,
        }
    }

    /// Secret part plus a binning part whose bin index is itself message,
    /// the degraded-case layout with `|J| = |B|`.
    pub fn wiretap(secret: f64, binning: f64) -> Self {
        Self {
            secret,
            binning,
            bin_message: binning,
        }
    }

    /// Secret part plus pure confusion randomness (`|J| = 1`).
    pub fn confusion(secret: f64, binning: f64) -> Self {
        Self {
            secret,
            binning,
            bin_message: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentBook {
    /// `N_s~`.
    pub len: usize,
    pub secret_bits: u32,
    pub binning_bits: u32,
    pub bin_bits: u32,
    /// `|A| * |B|` codewords of `len` symbols, indexed `(a * |B| + b) * len + t`.
    pub words: Vec<u8>,
}

impl ComponentBook {
    pub fn n_secret(&self) -> usize {
        1 << self.secret_bits
    }

    pub fn n_binning(&self) -> usize {
        1 << self.binning_bits
    }

    pub fn n_bins(&self) -> usize {
        1 << self.bin_bits
    }

    pub fn n_words(&self) -> usize {
        self.n_secret() * self.n_binning()
    }

    /// Message alphabet size `|A| * |J|`.
    pub fn n_messages(&self) -> usize {
        self.n_secret() * self.n_bins()
    }

    pub fn codeword(&self, a: usize, b: usize) -> &[u8] {
        let start = (a * self.n_binning() + b) * self.len;
        &self.words[start..start + self.len]
    }

    /// `g(b)`: the bin of binning index `b`.
    pub fn bin_of(&self, b: usize) -> usize {
        b % self.n_bins()
    }

    pub fn bin_size(&self, j: usize) -> usize {
        (0..self.n_binning()).filter(|&b| self.bin_of(b) == j).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplexCode {
    /// Block length `N`.
    pub n: usize,
    pub d: u64,
    pub seed: u64,
    /// One book per delayed state.
    pub books: Vec<ComponentBook>,
    /// Transition matrix, used to check delayed-state sequences.
    pub kernel: Vec<Vec<f64>>,
}

impl MultiplexCode {
    pub fn states(&self) -> usize {
        self.books.len()
    }

    pub fn message_bits(&self) -> u32 {
        self.books.iter().map(|b| b.secret_bits + b.bin_bits).sum()
    }

    /// Message bits per channel use.
    pub fn message_rate(&self) -> f64 {
        f64::from(self.message_bits()) / self.n as f64
    }

    /// Codewords as one hex string, books in order, one nibble per symbol.
    pub fn hex_books(&self) -> String {
        self.books
            .iter()
            .map(|b| b.words.iter().map(|x| format!("{x:x}")).collect::<String>())
            .collect::<Vec<_>>()
            .join(":")
    }
}

/// Component message `(a, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentMessage {
    pub a: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub parts: Vec<ComponentMessage>,
}

impl Message {
    pub fn zero(code: &MultiplexCode) -> Self {
        Self {
            parts: vec![ComponentMessage { a: 0, j: 0 }; code.states()],
        }
    }

    pub fn random<R: Rng + ?Sized>(code: &MultiplexCode, rng: &mut R) -> Self {
        Self {
            parts: code
                .books
                .iter()
                .map(|b| ComponentMessage {
                    a: rng.gen_range(0..b.n_secret()),
                    j: rng.gen_range(0..b.n_bins()),
                })
                .collect(),
        }
    }
}

/// Largest-remainder rounding of `n * pi` so the parts sum to `n`.
pub fn component_lengths(n: usize, pi: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = pi.iter().map(|p| p * n as f64).collect();
    let mut lens: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = lens.iter().sum();
    let mut order: Vec<usize> = (0..pi.len()).collect();
    // larger remainder first, lower index on ties
    order.sort_by(|&i, &j| {
        let ri = exact[i] - exact[i].floor();
        let rj = exact[j] - exact[j].floor();
        rj.partial_cmp(&ri).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        lens[i] += 1;
    }
    lens
}

fn bits_for(len: usize, rate: f64, what: &str) -> Result<u32> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::Domain(format!("{what} rate {rate} must be finite and >= 0")));
    }
    Ok((len as f64 * rate).round() as u32)
}

fn check_input_law(input: &InputLawFamily, k: usize, nx: usize) -> Result<()> {
    if input.rows.len() != k {
        return Err(Error::Shape(format!("input law has {} rows, expected {k}", input.rows.len())));
    }
    for (s, row) in input.rows.iter().enumerate() {
        if row.len() != nx {
            return Err(Error::Shape(format!("input law row {s} has {} entries, expected {nx}", row.len())));
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("input law row {s} is not a distribution")));
        }
    }
    Ok(())
}

/// Uniform `P(x | s~)` for every delayed state.
pub fn uniform_input(k: usize, nx: usize) -> InputLawFamily {
    InputLawFamily {
        rows: vec![vec![1.0 / nx as f64; nx]; k],
    }
}

/// Draws the component books i.i.d. from `input` (`P(x | s~)`).
pub fn build_code(
    ch: &DiscreteWiretapChannel,
    chain: &StateChain,
    d: u64,
    rates: &[StateRate],
    input: &InputLawFamily,
    n: usize,
    seed: u64,
) -> Result<MultiplexCode> {
    let k = chain.states();
    if ch.states() != k {
        return Err(Error::Shape(format!("channel has {} states, chain has {k}", ch.states())));
    }
    if k > MAX_CODE_STATES || [ch.nx(), ch.ny(), ch.nz()].iter().any(|&a| a > MAX_ALPHABET) {
        return Err(Error::Guardrail {
            what: "codec alphabets (states, |X|, |Y|, |Z| each <= 3)",
            estimate: [k, ch.nx(), ch.ny(), ch.nz()].into_iter().max().unwrap_or(0) as u128,
            limit: MAX_ALPHABET as u128,
        });
    }
    if n == 0 || n > MAX_BLOCK_LEN {
        return Err(Error::Guardrail {
            what: "codec block length",
            estimate: n as u128,
            limit: MAX_BLOCK_LEN as u128,
        });
    }
    if rates.len() != k {
        return Err(Error::Shape(format!("{} component rates for {k} states", rates.len())));
    }
    check_input_law(input, k, ch.nx())?;

    let lens = component_lengths(n, chain.pi());
    let mut layout = Vec::with_capacity(k);
    let mut total: u128 = 0;
    for (s, (r, &len)) in rates.iter().zip(&lens).enumerate() {
        let a = bits_for(len, r.secret, "secret")?;
        let b = bits_for(len, r.binning, "binning")?;
        let j = bits_for(len, r.bin_message, "bin-message")?;
        if j > b {
            return Err(Error::Domain(format!(
                "component {s}: {j} bin bits exceed {b} binning bits"
            )));
        }
        if a + b > 64 {
            return Err(Error::Guardrail {
                what: "codebook words",
                estimate: u128::MAX,
                limit: MAX_CODEWORDS,
            });
        }
        total += 1u128 << (a + b);
        layout.push((len, a, b, j));
    }
    if total > MAX_CODEWORDS {
        return Err(Error::Guardrail {
            what: "codebook words (about N bytes each)",
            estimate: total,
            limit: MAX_CODEWORDS,
        });
    }

    let books = layout
        .into_iter()
        .enumerate()
        .map(|(s, (len, a, b, j))| {
            let mut rng = stream(seed, &format!("codec/book/{s}"));
            let count = (1usize << (a + b)) * len;
            let words = (0..count).map(|_| sample_index(&mut rng, &input.rows[s]) as u8).collect();
            ComponentBook {
                len,
                secret_bits: a,
                binning_bits: b,
                bin_bits: j,
                words,
            }
        })
        .collect();

    Ok(MultiplexCode {
        n,
        d,
        seed,
        books,
        kernel: chain.kernel().rows(),
    })
}

/// `s~_i = s_{i-d}`, with [`PLACEHOLDER_STATE`] for the first `d` uses.
pub fn delayed_states(states: &[usize], d: u64) -> Vec<usize> {
    let d = usize::try_from(d).unwrap_or(usize::MAX);
    (0..states.len())
        .map(|i| if i >= d { states[i - d] } else { PLACEHOLDER_STATE })
        .collect()
}

/// Channel-use positions carrying each component, in order. Only the first
/// `N_s~` positions of component `s~` carry codeword symbols.
pub fn demultiplex(delayed: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut pos = vec![Vec::new(); k];
    for (i, &s) in delayed.iter().enumerate() {
        pos[s].push(i);
    }
    pos
}

fn check_delayed(code: &MultiplexCode, delayed: &[usize]) -> Result<()> {
    if delayed.len() != code.n {
        return Err(Error::Shape(format!(
            "delayed-state sequence has length {}, block length is {}",
            delayed.len(),
            code.n
        )));
    }
    if let Some(&s) = delayed.iter().find(|&&s| s >= code.states()) {
        return Err(Error::Domain(format!("delayed state {s} out of range")));
    }
    // past the placeholder prefix the sequence is a path of the chain
    let start = usize::try_from(code.d).unwrap_or(usize::MAX).min(delayed.len());
    for w in delayed[start..].windows(2) {
        if code.kernel[w[0]][w[1]] <= 0.0 {
            return Err(Error::Domain(format!(
                "delayed-state transition {} -> {} has zero probability",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

fn check_key(code: &MultiplexCode, key: Option<&[usize]>) -> Result<()> {
    if let Some(key) = key {
        if key.len() != code.states() {
            return Err(Error::Shape(format!("{} key symbols for {} components", key.len(), code.states())));
        }
        for (s, (&kv, book)) in key.iter().zip(&code.books).enumerate() {
            if kv >= book.n_bins() {
                return Err(Error::Domain(format!(
                    "key symbol {kv} of component {s} exceeds the {} bins",
                    book.n_bins()
                )));
            }
        }
    }
    Ok(())
}

/// Encodes one block. With a key, the transmitted bin is `(j + key) mod |J|`.
pub fn encode<R: Rng + ?Sized>(
    code: &MultiplexCode,
    message: &Message,
    delayed: &[usize],
    key: Option<&[usize]>,
    rng: &mut R,
) -> Result<Vec<u8>> {
    check_delayed(code, delayed)?;
    check_key(code, key)?;
    if message.parts.len() != code.states() {
        return Err(Error::Shape(format!(
            "message has {} parts for {} components",
            message.parts.len(),
            code.states()
        )));
    }
    let mut words = Vec::with_capacity(code.states());
    for (s, (m, book)) in message.parts.iter().zip(&code.books).enumerate() {
        if m.a >= book.n_secret() || m.j >= book.n_bins() {
            return Err(Error::Domain(format!(
                "message ({}, {}) of component {s} out of range ({} x {})",
                m.a,
                m.j,
                book.n_secret(),
                book.n_bins()
            )));
        }
        let bin = (m.j + key.map_or(0, |k| k[s])) % book.n_bins();
        let per_bin = book.n_binning() / book.n_bins();
        let b = bin + book.n_bins() * rng.gen_range(0..per_bin);
        words.push(book.codeword(m.a, b));
    }
    let mut used = vec![0usize; code.states()];
    Ok(delayed
        .iter()
        .map(|&s| {
            let t = used[s];
            used[s] += 1;
            if t < code.books[s].len {
                words[s][t]
            } else {
                0
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub message: Message,
    /// Smallest gap, in bits, between the best and second-best log posterior
    /// over the components; infinite when no component has a rival.
    pub margin: f64,
}

/// Exact MAP decoding per component, marginalizing the bin randomness.
pub fn decode(
    code: &MultiplexCode,
    ch: &DiscreteWiretapChannel,
    y: &[usize],
    states: &[usize],
    delayed: &[usize],
    key: Option<&[usize]>,
) -> Result<Decoded> {
    check_delayed(code, delayed)?;
    check_key(code, key)?;
    if y.len() != code.n || states.len() != code.n {
        return Err(Error::Shape("output and state blocks must have the block length".into()));
    }
    let pos = demultiplex(delayed, code.states());
    let mut parts = Vec::with_capacity(code.states());
    let mut margin = f64::INFINITY;
    for (s, book) in code.books.iter().enumerate() {
        let used: Vec<usize> = pos[s].iter().copied().take(book.len).collect();
        let nb = book.n_binning();
        let nj = book.n_bins();
        let mut score = vec![0.0f64; book.n_secret() * nj];
        for a in 0..book.n_secret() {
            for b in 0..nb {
                let w = book.codeword(a, b);
                let lik: f64 = used
                    .iter()
                    .enumerate()
                    .map(|(t, &i)| ch.main_prob(states[i], usize::from(w[t]), y[i]))
                    .product();
                score[a * nj + book.bin_of(b)] += lik;
            }
        }
        let mut best = 0;
        for (i, &v) in score.iter().enumerate() {
            if v > score[best] {
                best = i;
            }
        }
        let second = score
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != best)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if second > f64::NEG_INFINITY {
            margin = margin.min(score[best].log2() - second.log2());
        }
        let (a, jt) = (best / nj, best % nj);
        let k = key.map_or(0, |k| k[s]);
        parts.push(ComponentMessage {
            a,
            j: (jt + nj - k % nj) % nj,
        });
    }
    Ok(Decoded {
        message: Message { parts },
        margin,
    })
}

fn color(y: &[usize], bits: u32, seed: u64) -> usize {
    if bits == 0 {
        return 0;
    }
    let mut h = mix64(seed);
    for &v in y {
        h = mix64(h ^ (v as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    h = mix64(h ^ y.len() as u64);
    (h >> (64 - bits.min(63))) as usize
}

/// Key cells for a block of `len` outputs at `key_rate` bits per symbol.
pub fn key_bits(len: usize, key_rate: f64) -> u32 {
    if key_rate <= 0.0 {
        0
    } else {
        ((len as f64 * key_rate) - 1e-9).ceil().max(0.0) as u32
    }
}

/// Hash coloring of a y-block into `2^ceil(len * key_rate)` cells.
pub fn generate_key(y: &[usize], key_rate: f64, seed: u64) -> usize {
    color(y, key_bits(y.len(), key_rate), seed)
}

/// Per-delayed-state quantities of the degraded scheme (`V = X`, constant
/// `U`) at a fixed input law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRates {
    /// `I(X;Y|S,S~=s~)`.
    pub main: f64,
    /// `I(X;Z|S,S~=s~)`.
    pub eve: f64,
    /// `min{H(Y|X,Z,S,S~=s~), I(X;Z|S,S~=s~)}`, the key-rate ceiling.
    pub key_bound: f64,
}

impl ConditionalRates {
    pub fn secrecy(&self) -> f64 {
        (self.main - self.eve).max(0.0)
    }
}

pub fn conditional_rates(
    ch: &DiscreteWiretapChannel,
    dj: &DelayedJoint,
    input: &InputLawFamily,
) -> Result<Vec<ConditionalRates>> {
    let k = dj.states();
    if ch.states() != k {
        return Err(Error::Shape(format!("channel has {} states, chain has {k}", ch.states())));
    }
    check_input_law(input, k, ch.nx())?;
    (0..k)
        .map(|j| {
            let axes = vec![
                Axis::new(AXIS_S, k),
                Axis::new(AXIS_X, ch.nx()),
                Axis::new(AXIS_Y, ch.ny()),
                Axis::new(AXIS_Z, ch.nz()),
            ];
            let t = JointTable::from_fn(axes, |ix| {
                dj.transition(j, ix[0]) * input.rows[j][ix[1]] * ch.prob(ix[0], ix[1], ix[2], ix[3])
            })?;
            let main = t.cond_mutual_info(&[AXIS_X], &[AXIS_Y], &[AXIS_S])?;
            let eve = t.cond_mutual_info(&[AXIS_X], &[AXIS_Z], &[AXIS_S])?;
            let h = t.cond_entropy(&[AXIS_Y], &[AXIS_X, AXIS_Z, AXIS_S])?;
            Ok(ConditionalRates {
                main,
                eve,
                key_bound: h.min(eve).max(0.0),
            })
        })
        .collect()
}

/// Key-rate ceiling per delayed state.
pub fn key_rate_bounds(
    ch: &DiscreteWiretapChannel,
    dj: &DelayedJoint,
    input: &InputLawFamily,
) -> Result<Vec<f64>> {
    Ok(conditional_rates(ch, dj, input)?.iter().map(|r| r.key_bound).collect())
}

/// Component rates of the degraded scheme: secret part `I_Y - I_Z` and a
/// binning part `I_Z` whose bin index is message.
pub fn degraded_scheme_rates(
    ch: &DiscreteWiretapChannel,
    dj: &DelayedJoint,
    input: &InputLawFamily,
) -> Result<Vec<StateRate>> {
    Ok(conditional_rates(ch, dj, input)?
        .iter()
        .map(|r| StateRate::wiretap(r.secrecy(), r.eve.max(0.0)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyMap {
    /// Requested key rate per component, bits per symbol.
    pub rates: Vec<f64>,
    /// Realized key bits per component, capped at the bin bits.
    pub bits: Vec<u32>,
    /// Analytic ceiling per component.
    pub bounds: Vec<f64>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl KeyMap {
    pub fn new(
        code: &MultiplexCode,
        ch: &DiscreteWiretapChannel,
        chain: &StateChain,
        input: &InputLawFamily,
        rates: &[f64],
        seed: u64,
    ) -> Result<Self> {
        if rates.len() != code.states() {
            return Err(Error::Shape(format!("{} key rates for {} components", rates.len(), code.states())));
        }
        let bounds = key_rate_bounds(ch, &chain.delayed_joint(code.d), input)?;
        let mut warnings = Vec::new();
        let mut bits = Vec::with_capacity(rates.len());
        for (s, ((&r, book), &bound)) in rates.iter().zip(&code.books).zip(&bounds).enumerate() {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Domain(format!("key rate {r} must be finite and >= 0")));
            }
            if r > bound + 1e-12 {
                warnings.push(format!(
                    "key rate {r:.4} of component {s} exceeds min{{H(Y|X,Z,S,S~), I(X;Z|S,S~)}} = {bound:.4}"
                ));
            }
            let want = key_bits(book.len, r);
            if want > book.bin_bits {
                warnings.push(format!(
                    "component {s}: key needs {want} bits but only {} bin bits exist; key truncated",
                    book.bin_bits
                ));
            }
            bits.push(want.min(book.bin_bits));
        }
        Ok(Self {
            rates: rates.to_vec(),
            bits,
            bounds,
            seed,
            warnings,
        })
    }

    pub fn cells(&self, component: usize) -> usize {
        1 << self.bits[component]
    }

    /// Key symbol of one component from its demultiplexed y-block.
    pub fn key(&self, component: usize, y_block: &[usize]) -> usize {
        let seed = derive_seed(self.seed, &format!("codec/key/{component}"));
        color(y_block, self.bits[component], seed)
    }

    /// Key bits per channel use.
    pub fn rate(&self, n: usize) -> f64 {
        f64::from(self.bits.iter().sum::<u32>()) / n as f64
    }
}

/// `H(W_s~ | Z observations)` in bits for one component whose used symbols
/// see states `states`; the key (if any) is uniform on `key_cells` values.
fn component_equivocation(book: &ComponentBook, eve: &[Vec<Vec<f64>>], states: &[usize], key_cells: usize) -> f64 {
    let nm = book.n_messages();
    if nm == 1 {
        return 0.0;
    }
    let m = states.len();
    if m == 0 {
        return (nm as f64).log2();
    }
    let nz = eve[0][0].len();
    let nw = book.n_words();
    let nb = book.n_binning();
    let nj = book.n_bins();
    let per_bin = (nb / nj) as f64;
    let weight = 1.0 / nm as f64;

    let mut prods = vec![vec![1.0f64; nw]; m + 1];
    let mut z = vec![0usize; m];
    let mut q = vec![0.0f64; book.n_secret() * nj];
    let mut joint = vec![0.0f64; nm];
    let mut h = 0.0;
    // odometer over z^m, refreshing products from the first changed digit
    let mut from = 0;
    loop {
        for t in from..m {
            let (head, tail) = prods.split_at_mut(t + 1);
            let prev = &head[t];
            let next = &mut tail[0];
            for w in 0..nw {
                let x = usize::from(book.words[w * book.len + t]);
                next[w] = prev[w] * eve[states[t]][x][z[t]];
            }
        }
        let leaf = &prods[m];
        q.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..book.n_secret() {
            for b in 0..nb {
                q[a * nj + b % nj] += leaf[a * nb + b] / per_bin;
            }
        }
        let mut pz = 0.0;
        for a in 0..book.n_secret() {
            for j in 0..nj {
                let lik: f64 = (0..key_cells).map(|k| q[a * nj + (j + k) % nj]).sum::<f64>() / key_cells as f64;
                joint[a * nj + j] = lik * weight;
                pz += lik * weight;
            }
        }
        if pz > 0.0 {
            h -= joint
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| p * (p / pz).log2())
                .sum::<f64>();
        }
        // advance
        let mut t = m;
        loop {
            if t == 0 {
                return h;
            }
            t -= 1;
            z[t] += 1;
            if z[t] < nz {
                break;
            }
            z[t] = 0;
        }
        from = t;
    }
}

/// `H(W | Z^N, S^N) / N` in bits per channel use, exact.
///
/// Enumerates every state path of the block (stationary start); given the
/// path, the components see disjoint channel uses, so the conditional
/// entropy splits into per-component terms. With a key map the key is
/// modeled as uniform and independent of the current block.
pub fn exact_equivocation(
    code: &MultiplexCode,
    ch: &DiscreteWiretapChannel,
    chain: &StateChain,
    key: Option<&KeyMap>,
) -> Result<f64> {
    let k = chain.states();
    if k != code.states() || ch.states() != k {
        return Err(Error::Shape("code, channel and chain disagree on the state count".into()));
    }
    let n = code.n;
    let estimate = (ch.nz() as u128).pow(n as u32) * (k as u128).pow(n as u32);
    if estimate > MAX_ENUMERATION {
        return Err(Error::Guardrail {
            what: "equivocation enumeration |Z|^N |S|^N",
            estimate,
            limit: MAX_ENUMERATION,
        });
    }
    let eve: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|s| {
            (0..ch.nx())
                .map(|x| (0..ch.nz()).map(|z| ch.eve_prob(s, x, z)).collect())
                .collect()
        })
        .collect();

    // weight of each (component, states seen by its used symbols) class
    let mut classes: BTreeMap<(usize, Vec<usize>), f64> = BTreeMap::new();
    let pi = chain.pi();
    let kern = chain.kernel();
    let mut path = vec![0usize; n];
    let total_paths = k.pow(n as u32);
    for idx in 0..total_paths {
        let mut r = idx;
        for p in path.iter_mut().rev() {
            *p = r % k;
            r /= k;
        }
        let mut prob = pi[path[0]];
        for w in path.windows(2) {
            prob *= kern.get(w[0], w[1]);
        }
        if prob <= 0.0 {
            continue;
        }
        let delayed = delayed_states(&path, code.d);
        for (s, positions) in demultiplex(&delayed, k).into_iter().enumerate() {
            let seen: Vec<usize> = positions.iter().take(code.books[s].len).map(|&i| path[i]).collect();
            *classes.entry((s, seen)).or_insert(0.0) += prob;
        }
    }

    let entries: Vec<((usize, Vec<usize>), f64)> = classes.into_iter().collect();
    let eval = |((s, seen), _): &((usize, Vec<usize>), f64)| -> f64 {
        let cells = key.map_or(1, |km| km.cells(*s));
        component_equivocation(&code.books[*s], &eve, seen, cells)
    };
    #[cfg(feature = "parallel")]
    let values: Vec<f64> = {
        use rayon::prelude::*;
        entries.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = entries.iter().map(eval).collect();

    let h: f64 = entries.iter().zip(&values).map(|((_, w), v)| w * v).sum();
    Ok((h / n as f64).clamp(0.0, code.message_rate()))
}

/// `sum pi K^d [I(X;Y|s,s~) - I(X;Z|s,s~)]` at a fixed input law.
pub fn secrecy_rate_at_input(
    ch: &DiscreteWiretapChannel,
    dj: &DelayedJoint,
    input: &InputLawFamily,
) -> Result<f64> {
    let pi = dj.delayed_marginal();
    Ok(conditional_rates(ch, dj, input)?
        .iter()
        .zip(&pi)
        .map(|(r, p)| p * (r.main - r.eve))
        .sum())
}

/// `I(X;Y|S,S~)` at a fixed input law.
pub fn main_rate_at_input(ch: &DiscreteWiretapChannel, dj: &DelayedJoint, input: &InputLawFamily) -> Result<f64> {
    let pi = dj.delayed_marginal();
    Ok(conditional_rates(ch, dj, input)?.iter().zip(&pi).map(|(r, p)| p * r.main).sum())
}

#[derive(Debug, Clone)]
pub struct CodecExperiment {
    pub channel: DiscreteWiretapChannel,
    pub chain: StateChain,
    pub d: u64,
    pub rates: Vec<StateRate>,
    /// `P(x | s~)`; uniform when absent.
    pub input: Option<InputLawFamily>,
    pub n: usize,
    pub blocks: usize,
    pub seed: u64,
    pub feedback: bool,
    /// Key rate per component, bits per symbol; used only with feedback.
    pub key_rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub error_rate: f64,
    /// Block average of the exact `H(W|Z^N,S^N)/N`, bits per channel use.
    pub equivocation: f64,
    pub equivocation_unkeyed: f64,
    pub equivocation_keyed: Option<f64>,
    pub message_rate: f64,
    /// Realized key bits per channel use (0 without feedback).
    pub key_rate: f64,
    /// Secrecy capacity from the capacity module (feedback form when keyed);
    /// absent for channels that are not degraded.
    pub analytic_target: Option<f64>,
    /// Secrecy rate of the code's own input law.
    pub analytic_rate_at_input: f64,
    pub blocks: usize,
    pub keyed_blocks: usize,
    pub warnings: Vec<String>,
}

/// Blocks `1..=max(2d, 1)` run without a key; block `i` after that uses the
/// key hashed from the output of block `i - max(d, 1)`.
pub fn run_experiment(cfg: &CodecExperiment) -> Result<RunReport> {
    let k = cfg.chain.states();
    let ch = &cfg.channel;
    let input = cfg.input.clone().unwrap_or_else(|| uniform_input(k, ch.nx()));
    let code = build_code(ch, &cfg.chain, cfg.d, &cfg.rates, &input, cfg.n, cfg.seed)?;
    let keymap = if cfg.feedback {
        Some(KeyMap::new(&code, ch, &cfg.chain, &input, &cfg.key_rate, derive_seed(cfg.seed, "codec/keymap"))?)
    } else {
        None
    };
    let dj = cfg.chain.delayed_joint(cfg.d);
    let lag = usize::try_from(cfg.d.max(1)).unwrap_or(usize::MAX);
    let unkeyed = usize::try_from(cfg.d.saturating_mul(2).max(1)).unwrap_or(usize::MAX);

    let mut st_rng = stream(cfg.seed, "codec/run/states");
    let mut msg_rng = stream(cfg.seed, "codec/run/messages");
    let mut enc_rng = stream(cfg.seed, "codec/run/encoder");
    let mut ch_rng = stream(cfg.seed, "codec/run/channel");
    let kern = cfg.chain.kernel();
    let mut state = sample_index(&mut st_rng, cfg.chain.pi());

    // (y block, delayed states) of past blocks for key derivation
    let mut history: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(cfg.blocks);
    let mut errors = 0usize;
    let mut keyed_blocks = 0usize;
    for i in 1..=cfg.blocks {
        let mut states = Vec::with_capacity(cfg.n);
        for t in 0..cfg.n {
            if i > 1 || t > 0 {
                state = sample_index(&mut st_rng, kern.row(state));
            }
            states.push(state);
        }
        let delayed = delayed_states(&states, cfg.d);
        let key: Option<Vec<usize>> = match &keymap {
            Some(km) if i > unkeyed => {
                let (py, pd) = &history[i - 1 - lag];
                let pos = demultiplex(pd, k);
                Some(
                    (0..k)
                        .map(|s| {
                            let yb: Vec<usize> = pos[s].iter().take(code.books[s].len).map(|&p| py[p]).collect();
                            km.key(s, &yb)
                        })
                        .collect(),
                )
            }
            _ => None,
        };
        if key.is_some() {
            keyed_blocks += 1;
        }
        let msg = Message::random(&code, &mut msg_rng);
        let x = encode(&code, &msg, &delayed, key.as_deref(), &mut enc_rng)?;
        let y: Vec<usize> = x
            .iter()
            .zip(&states)
            .map(|(&xi, &s)| sample_index(&mut ch_rng, ch.row(s, usize::from(xi))) / ch.nz())
            .collect();
        let dec = decode(&code, ch, &y, &states, &delayed, key.as_deref())?;
        if dec.message != msg {
            errors += 1;
        }
        history.push((y, delayed));
    }

    let unkeyed_eq = exact_equivocation(&code, ch, &cfg.chain, None)?;
    let keyed_eq = match &keymap {
        Some(km) => Some(exact_equivocation(&code, ch, &cfg.chain, Some(km))?),
        None => None,
    };
    let equivocation = if cfg.blocks == 0 {
        unkeyed_eq
    } else {
        let kb = keyed_blocks as f64;
        ((cfg.blocks - keyed_blocks) as f64 * unkeyed_eq + kb * keyed_eq.unwrap_or(unkeyed_eq)) / cfg.blocks as f64
    };
    let mut warnings = keymap.as_ref().map(|km| km.warnings.clone()).unwrap_or_default();
    let witnessed = if ch.is_degraded() { ch.clone() } else { ch.clone().with_detected_witness() };
    let target = if cfg.feedback {
        secrecy_capacity_discrete_feedback_at(&witnessed, &dj)
    } else {
        secrecy_capacity_discrete_at(&witnessed, &dj)
    };
    let analytic_target = match target {
        Ok(r) => Some(r.value),
        Err(e) => {
            warnings.push(format!("no analytic target: {e}"));
            None
        }
    };
    Ok(RunReport {
        error_rate: if cfg.blocks == 0 { 0.0 } else { errors as f64 / cfg.blocks as f64 },
        equivocation,
        equivocation_unkeyed: unkeyed_eq,
        equivocation_keyed: keyed_eq,
        message_rate: code.message_rate(),
        key_rate: keymap.as_ref().map_or(0.0, |km| km.rate(cfg.n)),
        analytic_target,
        analytic_rate_at_input: secrecy_rate_at_input(ch, &dj, &input)?,
        blocks: cfg.blocks,
        keyed_blocks,
        warnings,
    })
}
