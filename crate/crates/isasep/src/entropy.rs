//! Nonparametric differential-entropy and mutual-information estimation.
//!
//! One-dimensional entropies use the Vasicek m-spacing estimator; joint
//! entropies use the Kozachenko-Leonenko k-nearest-neighbor estimator. Both
//! report a resampling standard error so downstream inequality checks can set
//! statistically honest tolerances. All entropies are in nats.

use nalgebra::DMatrix;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::RngSeed;

/// Default neighbor count for the k-NN estimator.
pub const DEFAULT_KNN_K: usize = 5;

/// Number of resamples behind every reported standard error.
pub const RESAMPLES: usize = 50;

/// Jitter magnitude used to break exactly duplicated points.
const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMethod {
    /// Vasicek m-spacing on sorted samples.
    Spacing { m: usize },
    /// Kozachenko-Leonenko with k nearest neighbors.
    Knn { k: usize },
}

/// A differential-entropy value in nats with a resampling standard error.
#[derive(Debug, Clone, Copy)]
pub struct EntropyEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub method: EstimatorMethod,
}

/// Vasicek m-spacing estimate of H(x) with a 50-resample bootstrap standard
/// error. `m` defaults to floor(sqrt(n)).
pub fn entropy_1d(samples: &[f64], m: Option<usize>, seed: RngSeed) -> Result<EntropyEstimate> {
    entropy_1d_impl(samples, m, seed, false)
}

/// Vasicek estimate with the Ebrahimi boundary-weight correction; slightly
/// less biased near the sample extremes.
pub fn entropy_1d_bias_corrected(
    samples: &[f64],
    m: Option<usize>,
    seed: RngSeed,
) -> Result<EntropyEstimate> {
    entropy_1d_impl(samples, m, seed, true)
}

fn entropy_1d_impl(
    samples: &[f64],
    m: Option<usize>,
    seed: RngSeed,
    ebrahimi: bool,
) -> Result<EntropyEstimate> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::TooFewSamples { need: 100, got: n });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    if !sorted[0].is_finite() || !sorted[n - 1].is_finite() {
        return Err(Error::NonFiniteEntries("entropy input".into()));
    }
    let q1 = sorted[n / 4];
    let q3 = sorted[(3 * n) / 4];
    if q3 - q1 <= 0.0 {
        return Err(Error::DegenerateSample("interquartile range is zero".into()));
    }
    let m = m.unwrap_or_else(|| (n as f64).sqrt().floor() as usize).max(1);
    if m >= n {
        return Err(Error::InvalidArgument(format!("spacing m = {m} must be < n = {n}")));
    }
    let value = if ebrahimi {
        vasicek_sorted_ebrahimi(&sorted, m)
    } else {
        vasicek_sorted(&sorted, m)
    };

    // bootstrap on the sorted sample: resampling with replacement commutes
    // with sorting, so each resample is built by a counting pass
    let mut rng = seed.rng();
    let mut counts = vec![0u32; n];
    let mut resample = vec![0.0f64; n];
    let mut boots = Vec::with_capacity(RESAMPLES);
    for _ in 0..RESAMPLES {
        counts.fill(0);
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
        let mut k = 0;
        for (i, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                resample[k] = sorted[i];
                k += 1;
            }
        }
        boots.push(if ebrahimi {
            vasicek_sorted_ebrahimi(&resample, m)
        } else {
            vasicek_sorted(&resample, m)
        });
    }
    Ok(EntropyEstimate {
        value,
        stderr: sample_std(&boots),
        n,
        method: EstimatorMethod::Spacing { m },
    })
}

/// Core Vasicek sum over a sorted slice; window indices clamp at the ends.
fn vasicek_sorted(sorted: &[f64], m: usize) -> f64 {
    let n = sorted.len();
    let scale = n as f64 / (2.0 * m as f64);
    let mut acc = 0.0;
    for i in 0..n {
        let lo = i.saturating_sub(m);
        let hi = (i + m).min(n - 1);
        let spacing = (sorted[hi] - sorted[lo]).max(f64::MIN_POSITIVE);
        acc += (scale * spacing).ln();
    }
    acc / n as f64
}

fn vasicek_sorted_ebrahimi(sorted: &[f64], m: usize) -> f64 {
    let n = sorted.len();
    let mf = m as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let pos = i + 1; // 1-based rank
        let c = if pos <= m {
            1.0 + (pos as f64 - 1.0) / mf
        } else if pos >= n - m + 1 {
            1.0 + (n - pos) as f64 / mf
        } else {
            2.0
        };
        let lo = i.saturating_sub(m);
        let hi = (i + m).min(n - 1);
        let spacing = (sorted[hi] - sorted[lo]).max(f64::MIN_POSITIVE);
        acc += (n as f64 * spacing / (c * mf)).ln();
    }
    acc / n as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var.sqrt()
}

/// Kozachenko-Leonenko estimate of the joint entropy of n points in d
/// dimensions, with a subsampling standard error. Duplicate points are
/// broken by seeded jitter of magnitude 1e-10 before the neighbor search.
pub fn entropy_knn(samples: &Matrix, k: usize, seed: RngSeed) -> Result<EntropyEstimate> {
    let (n, d) = (samples.rows(), samples.cols());
    if n < 500 {
        return Err(Error::TooFewSamples { need: 500, got: n });
    }
    if k < 1 || k > 20 {
        return Err(Error::InvalidArgument(format!("k must be in 1..=20, got {k}")));
    }
    let flat = flatten_rows(samples.as_dmatrix());
    let value = knn_entropy_point(&flat, n, d, k, seed.derive(0))?;

    // the k-NN functional is not bootstrap-friendly (resampled duplicates
    // collapse neighbor distances), so the standard error comes from
    // half-size subsamples without replacement, rescaled by sqrt(m/n)
    let m = n / 2;
    let mut rng = seed.derive(1).rng();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut sub = vec![0.0f64; m * d];
    let mut estimates = Vec::with_capacity(RESAMPLES);
    for b in 0..RESAMPLES {
        partial_shuffle(&mut idx, m, &mut rng);
        for (row, &src) in idx[..m].iter().enumerate() {
            sub[row * d..(row + 1) * d].copy_from_slice(&flat[src * d..(src + 1) * d]);
        }
        estimates.push(knn_entropy_point(&sub, m, d, k, seed.derive(100 + b as u64))?);
    }
    let stderr = sample_std(&estimates) * (m as f64 / n as f64).sqrt();
    Ok(EntropyEstimate {
        value,
        stderr,
        n,
        method: EstimatorMethod::Knn { k },
    })
}

fn flatten_rows(m: &DMatrix<f64>) -> Vec<f64> {
    let (n, d) = (m.nrows(), m.ncols());
    let mut flat = vec![0.0f64; n * d];
    for i in 0..n {
        for j in 0..d {
            flat[i * d + j] = m[(i, j)];
        }
    }
    flat
}

/// First m elements of a seeded Fisher-Yates pass.
fn partial_shuffle(idx: &mut [usize], m: usize, rng: &mut ChaCha8Rng) {
    let n = idx.len();
    for i in 0..m {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
}

/// Point estimate on flat row-major data; used by both the public estimator
/// and the mutual-information path, which needs no standard error.
fn knn_entropy_point(flat: &[f64], n: usize, d: usize, k: usize, jitter_seed: RngSeed) -> Result<f64> {
    if k >= n {
        return Err(Error::TooFewSamples { need: k + 1, got: n });
    }
    let mut data = flat.to_vec();
    break_ties(&mut data, n, d, jitter_seed);

    let ln_vd = (d as f64 / 2.0) * std::f64::consts::PI.ln() - ln_gamma(d as f64 / 2.0 + 1.0);
    let sum_log_eps = if d == 1 {
        kth_neighbor_distances_1d(&data, k).iter().map(|e| e.ln()).sum::<f64>()
    } else {
        let tree = KdTree::build(&data, n, d);
        let mut acc = 0.0;
        let mut heap = vec![f64::INFINITY; k];
        for i in 0..n {
            let eps = tree.kth_neighbor_distance(&data[i * d..(i + 1) * d], i, &mut heap);
            acc += eps.ln();
        }
        acc
    };
    Ok(digamma(n as f64) - digamma(k as f64) + ln_vd + (d as f64 / n as f64) * sum_log_eps)
}

/// Jitters every repeated occurrence of an exactly duplicated point.
fn break_ties(data: &mut [f64], n: usize, d: usize, seed: RngSeed) {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| {
        let ra = &data[a * d..(a + 1) * d];
        let rb = &data[b * d..(b + 1) * d];
        ra.iter()
            .zip(rb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| !o.is_eq())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut rng = seed.rng();
    let mut any = false;
    for w in 1..n {
        let (prev, cur) = (order[w - 1], order[w]);
        let equal = (0..d).all(|j| data[prev * d + j] == data[cur * d + j]);
        if equal {
            for j in 0..d {
                data[cur * d + j] += rng.random_range(-JITTER..JITTER);
            }
            any = true;
        }
    }
    // a second pass handles the measure-zero chance that jitter re-collided
    if any {
        let recheck = {
            let mut o: Vec<usize> = (0..n).collect();
            o.sort_unstable_by(|&a, &b| {
                data[a * d..(a + 1) * d]
                    .iter()
                    .zip(&data[b * d..(b + 1) * d])
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| !o.is_eq())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            o.windows(2).any(|w| (0..d).all(|j| data[w[0] * d + j] == data[w[1] * d + j]))
        };
        if recheck {
            break_ties(data, n, d, seed.derive(0xDEAD));
        }
    }
}

/// Distance to the k-th nearest neighbor of every point of a 1-D sample,
/// excluding the point itself; two-pointer scan over the sorted order.
fn kth_neighbor_distances_1d(data: &[f64], k: usize) -> Vec<f64> {
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| data[a].total_cmp(&data[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| data[i]).collect();
    let mut eps = vec![0.0f64; n];
    for pos in 0..n {
        let x = sorted[pos];
        let (mut l, mut r) = (pos, pos + 1);
        let mut dist = 0.0;
        for _ in 0..k {
            let left = if l > 0 { x - sorted[l - 1] } else { f64::INFINITY };
            let right = if r < n { sorted[r] - x } else { f64::INFINITY };
            if left <= right {
                dist = left;
                l -= 1;
            } else {
                dist = right;
                r += 1;
            }
        }
        eps[order[pos]] = dist.max(f64::MIN_POSITIVE);
    }
    eps
}

/// Static median-split k-d tree over row-major points.
struct KdTree<'a> {
    data: &'a [f64],
    dim: usize,
    nodes: Vec<KdNode>,
    root: i32,
}

struct KdNode {
    point: u32,
    axis: u8,
    left: i32,
    right: i32,
}

impl<'a> KdTree<'a> {
    fn build(data: &'a [f64], n: usize, dim: usize) -> Self {
        let mut idx: Vec<u32> = (0..n as u32).collect();
        let mut tree = KdTree {
            data,
            dim,
            nodes: Vec::with_capacity(n),
            root: -1,
        };
        tree.root = tree.build_rec(&mut idx, 0);
        tree
    }

    fn build_rec(&mut self, idx: &mut [u32], depth: usize) -> i32 {
        if idx.is_empty() {
            return -1;
        }
        let axis = depth % self.dim;
        let mid = idx.len() / 2;
        let data = self.data;
        let dim = self.dim;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            data[a as usize * dim + axis].total_cmp(&data[b as usize * dim + axis])
        });
        let point = idx[mid];
        let node_slot = self.nodes.len() as i32;
        self.nodes.push(KdNode {
            point,
            axis: axis as u8,
            left: -1,
            right: -1,
        });
        let (lo, rest) = idx.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = self.build_rec(lo, depth + 1);
        let right = self.build_rec(hi, depth + 1);
        self.nodes[node_slot as usize].left = left;
        self.nodes[node_slot as usize].right = right;
        node_slot
    }

    /// Returns the distance to the k-th nearest neighbor of `query`, where
    /// k = heap.len(); the query point itself is skipped by index.
    fn kth_neighbor_distance(&self, query: &[f64], self_index: usize, heap: &mut [f64]) -> f64 {
        heap.fill(f64::INFINITY);
        self.search(self.root, query, self_index, heap);
        heap[heap.len() - 1].sqrt().max(f64::MIN_POSITIVE)
    }

    fn search(&self, node: i32, query: &[f64], self_index: usize, heap: &mut [f64]) {
        if node < 0 {
            return;
        }
        let nd = &self.nodes[node as usize];
        let p = nd.point as usize;
        if p != self_index {
            let base = p * self.dim;
            let mut dist_sq = 0.0;
            for j in 0..self.dim {
                let diff = self.data[base + j] - query[j];
                dist_sq += diff * diff;
            }
            let worst = heap[heap.len() - 1];
            if dist_sq < worst {
                // insertion into the small sorted buffer
                let mut pos = heap.len() - 1;
                while pos > 0 && heap[pos - 1] > dist_sq {
                    heap[pos] = heap[pos - 1];
                    pos -= 1;
                }
                heap[pos] = dist_sq;
            }
        }
        let axis = nd.axis as usize;
        let delta = query[axis] - self.data[p * self.dim + axis];
        let (near, far) = if delta <= 0.0 {
            (nd.left, nd.right)
        } else {
            (nd.right, nd.left)
        };
        self.search(near, query, self_index, heap);
        if delta * delta < heap[heap.len() - 1] {
            self.search(far, query, self_index, heap);
        }
    }
}

/// Mutual information between two scalar samples via the entropy identity
/// I = H(x) + H(y) - H(x, y), all three terms from the k-NN estimator with a
/// shared k; clamped at zero. Exactly symmetric in its arguments.
pub fn mutual_info_pair(x: &[f64], y: &[f64], k: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "mutual information needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 500 {
        return Err(Error::TooFewSamples { need: 500, got: n });
    }
    // canonical argument order makes the estimate bit-exactly symmetric
    let (a, b) = if lex_le(x, y) { (x, y) } else { (y, x) };
    let jitter = RngSeed::new(0x15A_5EED);
    let ha = knn_entropy_point(a, n, 1, k, jitter.derive(1))?;
    let hb = knn_entropy_point(b, n, 1, k, jitter.derive(2))?;
    let mut joint = vec![0.0f64; 2 * n];
    for i in 0..n {
        joint[2 * i] = a[i];
        joint[2 * i + 1] = b[i];
    }
    let hab = knn_entropy_point(&joint, n, 2, k, jitter.derive(3))?;
    Ok((ha + hb - hab).max(0.0))
}

fn lex_le(x: &[f64], y: &[f64]) -> bool {
    for (a, b) in x.iter().zip(y) {
        match a.total_cmp(b) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => continue,
        }
    }
    true
}

/// Symmetric D x D matrix of pairwise mutual-information estimates between
/// the coordinates of Y; diagonal is zero.
#[derive(Debug, Clone)]
pub struct DependenceMatrix {
    entries: DMatrix<f64>,
}

impl DependenceMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Builds a dependence matrix from explicit entries (upper triangle is
    /// mirrored; diagonal forced to zero; negatives clamped).
    pub fn from_upper(dim: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != dim * (dim - 1) / 2 {
            return Err(Error::ShapeMismatch(format!(
                "expected {} upper-triangle entries, got {}",
                dim * (dim - 1) / 2,
                upper.len()
            )));
        }
        let mut m = DMatrix::zeros(dim, dim);
        let mut t = 0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let v = upper[t].max(0.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
                t += 1;
            }
        }
        Ok(DependenceMatrix { entries: m })
    }
}

/// Pairwise mutual information between all column pairs of Y.
pub fn dependence_matrix(y: &Matrix, k: usize) -> Result<DependenceMatrix> {
    let dim = y.cols();
    if y.rows() < 500 {
        return Err(Error::TooFewSamples { need: 500, got: y.rows() });
    }
    let cols: Vec<Vec<f64>> = (0..dim).map(|j| y.column_vec(j)).collect();
    let mut upper = Vec::with_capacity(dim * (dim - 1) / 2);
    for i in 0..dim {
        for j in (i + 1)..dim {
            upper.push(mutual_info_pair(&cols[i], &cols[j], k)?);
        }
    }
    DependenceMatrix::from_upper(dim, &upper)
}
