//! Second stage of the separation: permute the ICA coordinates into dependent
//! blocks by maximizing within-block pairwise dependence.

use crate::entropy::DependenceMatrix;
use crate::error::{Error, Result};
use crate::instance::Grouping;
use crate::linalg::{permutation_from_grouping, Matrix, OrthogonalMatrix};

/// Cap on the number of partitions the exhaustive search will enumerate.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStrategy {
    Exhaustive,
    Greedy,
}

/// A found grouping together with its within-block dependence score.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub grouping: Grouping,
    pub score: f64,
}

/// Number of unordered partitions of D elements into blocks of the given
/// sizes: D! / (prod sizes_m! * prod multiplicity_k!), computed in logs.
pub fn partition_count(dims: &[usize]) -> f64 {
    let d: usize = dims.iter().sum();
    let mut log = ln_factorial(d);
    for &s in dims {
        log -= ln_factorial(s);
    }
    let mut sorted = dims.to_vec();
    sorted.sort_unstable();
    let mut run = 1usize;
    for i in 1..=sorted.len() {
        if i < sorted.len() && sorted[i] == sorted[i - 1] {
            run += 1;
        } else {
            log -= ln_factorial(run);
            run = 1;
        }
    }
    log.exp()
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|v| (v as f64).ln()).sum()
}

fn within_block_score(dep: &DependenceMatrix, blocks: &[Vec<usize>]) -> f64 {
    let mut score = 0.0;
    for block in blocks {
        for (a, &i) in block.iter().enumerate() {
            for &j in &block[a + 1..] {
                score += dep.get(i, j);
            }
        }
    }
    score
}

fn validate_dims(dep: &DependenceMatrix, dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument("block sizes must be positive".into()));
    }
    let total: usize = dims.iter().sum();
    if total != dep.dim() {
        return Err(Error::ShapeMismatch(format!(
            "block sizes sum to {total} but the dependence matrix is {}x{}",
            dep.dim(),
            dep.dim()
        )));
    }
    Ok(())
}

/// Exhaustive search over all partitions with the given block-size multiset.
/// Returns the score maximizer; exact ties resolve to the lexicographically
/// smallest canonical block list, which is the enumeration order.
pub fn group_exhaustive(dep: &DependenceMatrix, dims: &[usize]) -> Result<SearchOutcome> {
    validate_dims(dep, dims)?;
    let count = partition_count(dims);
    if count > EXHAUSTIVE_LIMIT as f64 {
        return Err(Error::SearchSpaceTooLarge {
            count,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let remaining: Vec<usize> = (0..dep.dim()).collect();
    let mut sizes = dims.to_vec();
    sizes.sort_unstable();
    let mut current: Vec<Vec<usize>> = Vec::with_capacity(dims.len());
    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    enumerate_partitions(&remaining, &mut sizes, &mut current, &mut |blocks| {
        let score = within_block_score(dep, blocks);
        let better = match &best {
            None => true,
            Some((s, _)) => score > *s,
        };
        if better {
            best = Some((score, blocks.to_vec()));
        }
    });
    let (score, blocks) = best.expect("at least one partition exists");
    Ok(SearchOutcome {
        grouping: Grouping::new(blocks)?,
        score,
    })
}

/// Visits every partition of `remaining` into blocks whose sizes form the
/// `sizes` multiset, in lexicographic order of the canonical block list: the
/// block containing the smallest free index is chosen first, sizes ascending,
/// companions in combination order.
fn enumerate_partitions(
    remaining: &[usize],
    sizes: &mut Vec<usize>,
    current: &mut Vec<Vec<usize>>,
    visit: &mut impl FnMut(&[Vec<usize>]),
) {
    if remaining.is_empty() {
        visit(current);
        return;
    }
    let head = remaining[0];
    let rest = &remaining[1..];
    let mut tried: Vec<usize> = Vec::new();
    for si in 0..sizes.len() {
        let size = sizes[si];
        if tried.contains(&size) {
            continue;
        }
        tried.push(size);
        sizes.remove(si);
        let mut combo_buf = vec![0usize; size - 1];
        for_each_combination(rest, size - 1, &mut combo_buf, 0, 0, &mut |companions| {
            let mut block = Vec::with_capacity(size);
            block.push(head);
            block.extend_from_slice(companions);
            let next: Vec<usize> = rest.iter().filter(|v| !companions.contains(v)).copied().collect();
            current.push(block);
            enumerate_partitions(&next, sizes, current, visit);
            current.pop();
        });
        sizes.insert(si, size);
    }
}

fn for_each_combination(
    pool: &[usize],
    k: usize,
    buf: &mut Vec<usize>,
    start: usize,
    depth: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        visit(&buf[..k]);
        return;
    }
    for i in start..pool.len() {
        if pool.len() - i < k - depth {
            break;
        }
        buf[depth] = pool[i];
        for_each_combination(pool, k, buf, i + 1, depth + 1, visit);
    }
}

/// Agglomerative merging: start from singleton clusters and repeatedly merge
/// the pair with maximal average inter-cluster dependence among merges that
/// keep the target block sizes assemblable; ties break on the smallest
/// (cluster, cluster) index pair. Terminates when the cluster sizes match the
/// requested multiset.
pub fn group_greedy(dep: &DependenceMatrix, dims: &[usize]) -> Result<SearchOutcome> {
    validate_dims(dep, dims)?;
    let mut target = dims.to_vec();
    target.sort_unstable();

    let mut clusters: Vec<Vec<usize>> = (0..dep.dim()).map(|i| vec![i]).collect();
    loop {
        let mut sizes: Vec<usize> = clusters.iter().map(|c| c.len()).collect();
        sizes.sort_unstable();
        if sizes == target {
            break;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                if !merge_is_feasible(&clusters, a, b, &target) {
                    continue;
                }
                let mut sum = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        sum += dep.get(i, j);
                    }
                }
                let avg = sum / (clusters[a].len() * clusters[b].len()) as f64;
                let better = match best {
                    None => true,
                    Some((s, _, _)) => avg > s,
                };
                if better {
                    best = Some((avg, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else {
            return Err(Error::InfeasibleDims);
        };
        let absorbed = clusters.remove(b);
        clusters[a].extend(absorbed);
        clusters[a].sort_unstable();
    }
    let score = within_block_score(dep, &clusters);
    Ok(SearchOutcome {
        grouping: Grouping::new(clusters)?,
        score,
    })
}

/// Would the cluster sizes still be assemblable into `target` (sorted) after
/// merging clusters a and b? Exact-cover check over sums, small inputs only.
fn merge_is_feasible(clusters: &[Vec<usize>], a: usize, b: usize, target: &[usize]) -> bool {
    let mut sizes: Vec<usize> = Vec::with_capacity(clusters.len() - 1);
    for (i, c) in clusters.iter().enumerate() {
        if i == a {
            sizes.push(c.len() + clusters[b].len());
        } else if i != b {
            sizes.push(c.len());
        }
    }
    sizes.sort_unstable_by(|x, y| y.cmp(x));
    let mut bins = target.to_vec();
    fill_bins(&sizes, 0, &mut bins)
}

fn fill_bins(sizes: &[usize], idx: usize, bins: &mut [usize]) -> bool {
    if idx == sizes.len() {
        return bins.iter().all(|&b| b == 0);
    }
    let s = sizes[idx];
    let mut tried: Vec<usize> = Vec::new();
    for bi in 0..bins.len() {
        if bins[bi] >= s && !tried.contains(&bins[bi]) {
            tried.push(bins[bi]);
            bins[bi] -= s;
            if fill_bins(sizes, idx + 1, bins) {
                bins[bi] += s;
                return true;
            }
            bins[bi] += s;
        }
    }
    false
}

/// Stacks the grouped rows of the ICA separation matrix: P W_ica with P the
/// permutation induced by the grouping, rows ordered block by block.
pub fn assemble_separation(ica_w: &OrthogonalMatrix, grouping: &Grouping) -> Result<OrthogonalMatrix> {
    if grouping.dim() != ica_w.dim() {
        return Err(Error::ShapeMismatch(format!(
            "grouping covers {} coordinates but W is {}x{}",
            grouping.dim(),
            ica_w.dim(),
            ica_w.dim()
        )));
    }
    let p = permutation_from_grouping(&grouping.flatten())?;
    let permuted = p.apply_rows(ica_w.matrix())?;
    OrthogonalMatrix::new(permuted)
}

/// Rescores a grouping by the joint entropy of its blocks instead of pairwise
/// sums: sum over blocks of the k-NN joint entropy of the block coordinates.
/// Useful when a block's coordinates are pairwise independent but jointly
/// dependent; lower is better.
pub fn joint_entropy_score(y: &Matrix, grouping: &Grouping, k: usize, seed: crate::rng::RngSeed) -> Result<f64> {
    let mut total = 0.0;
    for (m, block) in grouping.blocks().iter().enumerate() {
        let sub = nalgebra::DMatrix::from_fn(y.rows(), block.len(), |i, j| y.get(i, block[j]));
        let est = crate::entropy::entropy_knn(&Matrix::from_dmatrix(sub)?, k, seed.derive(m as u64))?;
        total += est.value;
    }
    Ok(total)
}
