//! Exact sampling from tree models, the binary symmetric channel, and
//! empirical pair correlations.

use std::io::{BufRead, Write};

use rand::distributions::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tree::{check_spins, TreeDistribution};

/// Generator behind every sampling routine.
pub type SampleRng = ChaCha8Rng;

/// Seeds the crate's generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SampleRng {
    SampleRng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a master seed and a path of
/// indices (e.g. `[q_index, n_index, trial]`). The result depends only on its
/// inputs, so trials can run in any order.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Memoryless binary symmetric channel: flips each sign independently with
/// probability `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseChannel {
    q: f64,
}

impl NoiseChannel {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&q) {
            return Err(Error::DegenerateChannel(q));
        }
        Ok(NoiseChannel { q })
    }

    pub fn noiseless() -> Self {
        NoiseChannel { q: 0.0 }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `E[N] = 1 - 2q`; pair correlations shrink by its square.
    pub fn c_q(&self) -> f64 {
        1.0 - 2.0 * self.q
    }

    fn flips(&self) -> Bernoulli {
        Bernoulli::new(self.q).expect("q validated in [0, 0.5)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchKind {
    Hidden,
    Noisy,
}

impl BatchKind {
    fn as_str(self) -> &'static str {
        match self {
            BatchKind::Hidden => "hidden",
            BatchKind::Noisy => "noisy",
        }
    }
}

/// `n` samples of `p` signs, stored row-major one byte per spin.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    p: usize,
    n: usize,
    data: Vec<i8>,
    kind: BatchKind,
    q_used: f64,
    seed: u64,
}

impl SampleBatch {
    pub fn new(p: usize, data: Vec<i8>, kind: BatchKind, q_used: f64, seed: u64) -> Result<Self> {
        if p == 0 || data.is_empty() || !data.len().is_multiple_of(p) {
            return Err(Error::InvalidBatch(format!(
                "{} values cannot form n >= 1 rows of p = {p}",
                data.len()
            )));
        }
        check_spins(&data).map_err(|e| Error::InvalidBatch(e.to_string()))?;
        Ok(SampleBatch { p, n: data.len() / p, data, kind, q_used, seed })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> BatchKind {
        self.kind
    }

    /// Crossover probability applied to produce this batch (0 when hidden).
    pub fn q_used(&self) -> f64 {
        self.q_used
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    pub fn row(&self, k: usize) -> &[i8] {
        &self.data[k * self.p..(k + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.data.chunks_exact(self.p)
    }

    /// Writes the batch as CSV: a `# p=..,n=..,kind=..,q=..,seed=..` line, a
    /// column header, then one row of -1/1 entries per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# p={},n={},kind={},q={},seed={}",
            self.p,
            self.n,
            self.kind.as_str(),
            self.q_used,
            self.seed
        )?;
        let header: Vec<String> = (0..self.p).map(|v| format!("x{v}")).collect();
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::with_capacity(3 * self.p);
        for row in self.rows() {
            line.clear();
            for (v, &s) in row.iter().enumerate() {
                if v > 0 {
                    line.push(',');
                }
                line.push_str(if s > 0 { "1" } else { "-1" });
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let meta = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::InvalidBatch("empty input".into()))?;
        let meta = meta
            .strip_prefix('#')
            .ok_or_else(|| Error::InvalidBatch("line 1: expected '# p=..,n=..,kind=..,q=..,seed=..'".into()))?;
        let (mut p, mut n, mut kind, mut q, mut seed) = (None, None, None, None, None);
        for field in meta.trim().split(',') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::InvalidBatch(format!("line 1: malformed field '{field}'")))?;
            let bad = |what: &str| Error::InvalidBatch(format!("line 1: invalid {what} '{value}'"));
            match key.trim() {
                "p" => p = Some(value.parse::<usize>().map_err(|_| bad("p"))?),
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad("n"))?),
                "kind" => {
                    kind = Some(match value {
                        "hidden" => BatchKind::Hidden,
                        "noisy" => BatchKind::Noisy,
                        _ => return Err(bad("kind")),
                    })
                }
                "q" => q = Some(value.parse::<f64>().map_err(|_| bad("q"))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("seed"))?),
                other => return Err(Error::InvalidBatch(format!("line 1: unknown field '{other}'"))),
            }
        }
        let missing = |what: &str| Error::InvalidBatch(format!("line 1: missing {what}"));
        let p = p.ok_or_else(|| missing("p"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        lines.next().transpose()?.ok_or_else(|| Error::InvalidBatch("missing column header".into()))?;
        let mut data = Vec::with_capacity(n * p);
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for cell in line.split(',') {
                data.push(match cell.trim() {
                    "1" | "+1" => 1,
                    "-1" => -1,
                    other => {
                        return Err(Error::InvalidBatch(format!("line {}: invalid spin '{other}'", k + 3)))
                    }
                });
            }
            if data.len() - before != p {
                return Err(Error::InvalidBatch(format!("line {}: expected {p} entries", k + 3)));
            }
        }
        if data.len() != n * p {
            return Err(Error::InvalidBatch(format!("header declares n = {n}, found {} rows", data.len() / p.max(1))));
        }
        SampleBatch::new(
            p,
            data,
            kind.ok_or_else(|| missing("kind"))?,
            q.ok_or_else(|| missing("q"))?,
            seed.ok_or_else(|| missing("seed"))?,
        )
    }
}

/// Root-to-leaf sampler: the root is a fair sign, and each child copies its
/// parent with probability `(1 + mu_e) / 2`.
#[derive(Debug, Clone)]
pub struct TreeSampler {
    p: usize,
    root: usize,
    // (vertex, parent, flip law) in BFS order, root excluded
    steps: Vec<(usize, usize, Bernoulli)>,
}

impl TreeSampler {
    pub fn new<D: TreeDistribution + ?Sized>(dist: &D) -> Self {
        let topo = dist.topology();
        let mu = dist.edge_mu();
        let steps = topo
            .bfs_order()
            .iter()
            .skip(1)
            .map(|&v| {
                let parent = topo.parent(v).expect("non-root vertex has a parent");
                let edge = topo.parent_edge(v).expect("non-root vertex has a parent edge");
                let flip = ((1.0 - mu[edge]) / 2.0).clamp(0.0, 1.0);
                (v, parent, Bernoulli::new(flip).expect("probability in [0, 1]"))
            })
            .collect();
        TreeSampler { p: topo.vertex_count(), root: topo.root(), steps }
    }

    /// Overwrites `out` (length p) with one sample.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [i8]) {
        out[self.root] = if rng.gen::<bool>() { 1 } else { -1 };
        for (v, parent, flip) in &self.steps {
            out[*v] = if flip.sample(rng) { -out[*parent] } else { out[*parent] };
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.p
    }
}

/// Draws `n` i.i.d. samples from a tree distribution.
pub fn sample_hidden<D: TreeDistribution + ?Sized>(dist: &D, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count n must be at least 1".into()));
    }
    let sampler = TreeSampler::new(dist);
    let p = sampler.vertex_count();
    let mut rng = rng_from_seed(seed);
    let mut data = vec![0i8; n * p];
    for row in data.chunks_exact_mut(p) {
        sampler.draw(&mut rng, row);
    }
    Ok(SampleBatch { p, n, data, kind: BatchKind::Hidden, q_used: 0.0, seed })
}

/// Passes a hidden batch through the channel, flipping each entry
/// independently (row-major draw order).
pub fn apply_channel(batch: &SampleBatch, channel: &NoiseChannel, seed: u64) -> Result<SampleBatch> {
    if batch.kind != BatchKind::Hidden {
        return Err(Error::InvalidBatch("the channel applies to hidden batches only".into()));
    }
    let flips = channel.flips();
    let mut rng = rng_from_seed(seed);
    let data = batch
        .data
        .iter()
        .map(|&x| if flips.sample(&mut rng) { -x } else { x })
        .collect();
    Ok(SampleBatch { data, kind: BatchKind::Noisy, q_used: channel.q(), seed, ..*batch })
}

/// Symmetric p x p matrix of pair correlations with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    p: usize,
    values: Vec<f64>,
}

impl CorrelationTable {
    /// `values` is row-major p x p.
    pub fn new(p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != p * p {
            return Err(Error::DimensionMismatch { expected: p * p, found: values.len() });
        }
        for i in 0..p {
            if values[i * p + i] != 1.0 {
                return Err(Error::InvalidParameter(format!("diagonal entry ({i}, {i}) must be 1")));
            }
            for j in 0..i {
                let v = values[i * p + j];
                if v != values[j * p + i] {
                    return Err(Error::InvalidParameter(format!("entries ({i}, {j}) and ({j}, {i}) differ")));
                }
                if !(v.abs() <= 1.0) {
                    return Err(Error::InvalidParameter(format!("entry ({i}, {j}) = {v} outside [-1, 1]")));
                }
            }
        }
        Ok(CorrelationTable { p, values })
    }

    /// Exact pair correlations of a tree distribution.
    pub fn from_distribution<D: TreeDistribution + ?Sized>(dist: &D) -> Self {
        let p = dist.vertex_count();
        let mut values = Vec::with_capacity(p * p);
        for i in 0..p {
            values.extend(dist.correlations_from(i));
        }
        // the two traversal directions can differ in the last ulp
        for i in 0..p {
            for j in 0..i {
                values[i * p + j] = values[j * p + i];
            }
        }
        CorrelationTable { p, values }
    }

    /// Exact correlations of the channel output: off-diagonal entries scaled
    /// by `(1 - 2q)^2`.
    pub fn exact_noisy<D: TreeDistribution + ?Sized>(dist: &D, channel: &NoiseChannel) -> Self {
        Self::from_distribution(dist).scaled(channel.c_q() * channel.c_q())
    }

    /// Multiplies every off-diagonal entry by `factor` (|factor| <= 1).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut values = self.values.clone();
        for i in 0..self.p {
            for j in 0..self.p {
                if i != j {
                    values[i * self.p + j] *= factor;
                }
            }
        }
        CorrelationTable { p: self.p, values }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn from_pair_sums(p: usize, n: usize, sums: &[i64]) -> Self {
        let mut values = vec![1.0; p * p];
        for i in 0..p {
            for j in (i + 1)..p {
                let v = sums[i * p + j] as f64 / n as f64;
                values[i * p + j] = v;
                values[j * p + i] = v;
            }
        }
        CorrelationTable { p, values }
    }
}

/// `(1/n) sum_k x_i^(k) x_j^(k)` for every pair.
pub fn empirical_correlations(batch: &SampleBatch) -> CorrelationTable {
    let p = batch.p;
    let mut sums = vec![0i64; p * p];
    for row in batch.rows() {
        for i in 0..p {
            let xi = row[i];
            let base = i * p;
            for j in (i + 1)..p {
                sums[base + j] += i64::from(xi * row[j]);
            }
        }
    }
    CorrelationTable::from_pair_sums(p, batch.n, &sums)
}

/// Samples `n` hidden rows, applies the channel, and accumulates pair
/// correlations without materializing the batch.
///
/// Consumes both generators in the same order as [`sample_hidden`] followed by
/// [`apply_channel`], so for equal seeds the result is identical to
/// `empirical_correlations(apply_channel(sample_hidden(..)))`.
pub fn sample_noisy_correlations<D: TreeDistribution + ?Sized>(
    dist: &D,
    channel: &NoiseChannel,
    n: usize,
    hidden_seed: u64,
    noise_seed: u64,
) -> Result<CorrelationTable> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count n must be at least 1".into()));
    }
    let sampler = TreeSampler::new(dist);
    let p = sampler.vertex_count();
    let flips = channel.flips();
    let mut hidden_rng = rng_from_seed(hidden_seed);
    let mut noise_rng = rng_from_seed(noise_seed);
    let mut row = vec![0i8; p];
    // bit k of columns[v] is set when sample k of the current block has y_v = -1
    let mut columns = vec![0u64; p];
    let mut sums = vec![0i64; p * p];
    let mut filled = 0u32;
    let flush = |columns: &mut [u64], filled: u32, sums: &mut [i64]| {
        for i in 0..p {
            for j in (i + 1)..p {
                let disagree = i64::from((columns[i] ^ columns[j]).count_ones());
                sums[i * p + j] += i64::from(filled) - 2 * disagree;
            }
        }
        columns.iter_mut().for_each(|c| *c = 0);
    };
    for _ in 0..n {
        sampler.draw(&mut hidden_rng, &mut row);
        for (v, &x) in row.iter().enumerate() {
            let y = if flips.sample(&mut noise_rng) { -x } else { x };
            if y < 0 {
                columns[v] |= 1u64 << filled;
            }
        }
        filled += 1;
        if filled == 64 {
            flush(&mut columns, filled, &mut sums);
            filled = 0;
        }
    }
    if filled > 0 {
        flush(&mut columns, filled, &mut sums);
    }
    Ok(CorrelationTable::from_pair_sums(p, n, &sums))
}
