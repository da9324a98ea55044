//! Synthetic ISA problem instances — ground-truth sources, orthogonal mixing,
//! observations — plus the block permutation metrics used to score recoveries.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{random_orthogonal, Matrix, OrthogonalMatrix};
use crate::rng::RngSeed;
use crate::sources::{standardize_block, SourceSpec};

/// A partition of the coordinate indices 0..D into disjoint blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    blocks: Vec<Vec<usize>>,
}

impl Grouping {
    /// Validates that the blocks are disjoint, nonempty, and cover 0..D.
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("grouping needs at least one block".into()));
        }
        let dim: usize = blocks.iter().map(|b| b.len()).sum();
        let mut seen = vec![false; dim];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidArgument("empty block in grouping".into()));
            }
            for &i in block {
                if i >= dim {
                    return Err(Error::InvalidArgument(format!(
                        "index {i} out of range for dimension {dim}"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidArgument(format!("index {i} appears twice")));
                }
                seen[i] = true;
            }
        }
        for block in &mut blocks {
            block.sort_unstable();
        }
        Ok(Grouping { blocks })
    }

    /// The canonical grouping with contiguous blocks of the given sizes.
    pub fn contiguous(dims: &[usize]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(dims.len());
        let mut next = 0;
        for &d in dims {
            blocks.push((next..next + d).collect());
            next += d;
        }
        Grouping::new(blocks)
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    /// Concatenation of the blocks in order; feeding this to
    /// `permutation_from_grouping` yields the permutation that sorts rows
    /// block by block.
    pub fn flatten(&self) -> Vec<usize> {
        self.blocks.iter().flatten().copied().collect()
    }

    /// Blocks sorted internally and by smallest member, for order-insensitive
    /// comparison of partitions.
    pub fn canonical_blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = self.blocks.clone();
        blocks.sort_by_key(|b| b[0]);
        blocks
    }

    pub fn same_partition(&self, other: &Grouping) -> bool {
        self.canonical_blocks() == other.canonical_blocks()
    }

    /// Single-line serialization: `block0: 1,2 ; block1: 3,4` (1-based).
    pub fn serialize(&self) -> String {
        self.blocks
            .iter()
            .enumerate()
            .map(|(m, block)| {
                let ids: Vec<String> = block.iter().map(|i| (i + 1).to_string()).collect();
                format!("block{m}: {}", ids.join(","))
            })
            .collect::<Vec<_>>()
            .join(" ; ")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for part in text.trim().split(';') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (_, ids) = part
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad grouping fragment {part:?}")))?;
            let mut block = Vec::new();
            for tok in ids.split(',') {
                let v: usize = tok
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad grouping index {tok:?}")))?;
                if v == 0 {
                    return Err(Error::Parse("grouping indices are 1-based".into()));
                }
                block.push(v - 1);
            }
            blocks.push(block);
        }
        Grouping::new(blocks)
    }
}

/// How the mixing matrix of an instance is chosen.
#[derive(Debug, Clone)]
pub enum Mixing {
    HaarRandom,
    Given(OrthogonalMatrix),
    Identity,
}

/// One complete synthetic ISA problem.
#[derive(Debug, Clone)]
pub struct IsaInstance {
    pub dims: Vec<usize>,
    /// Orthogonal mixing matrix A, observation = A source per sample.
    pub mixing: OrthogonalMatrix,
    /// n x D ground-truth sources; each block standardized to zero mean and
    /// identity covariance.
    pub sources: Matrix,
    /// n x D observations Z = S A^T row-wise.
    pub observations: Matrix,
    pub true_grouping: Grouping,
}

impl IsaInstance {
    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn sample_count(&self) -> usize {
        self.sources.rows()
    }
}

/// Builds an instance from independent source components: samples each spec
/// with a derived sub-seed, standardizes per block, concatenates, and mixes.
pub fn make_instance(
    specs: &[SourceSpec],
    n: usize,
    seed: RngSeed,
    mixing: Mixing,
) -> Result<IsaInstance> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("need at least one source spec".into()));
    }
    let dims: Vec<usize> = specs.iter().map(|s| s.dim()).collect();
    let total: usize = dims.iter().sum();
    if n < 10 * total {
        return Err(Error::TooFewSamples { need: 10 * total, got: n });
    }

    let mut s = DMatrix::zeros(n, total);
    let mut col = 0;
    for (m, spec) in specs.iter().enumerate() {
        let block = spec.sample(n, seed.derive(m as u64))?;
        let block = standardize_block(&block)?;
        for j in 0..spec.dim() {
            s.set_column(col + j, &block.samples.as_dmatrix().column(j));
        }
        col += spec.dim();
    }
    let sources = Matrix::from_dmatrix(s)?;

    let a = match mixing {
        Mixing::HaarRandom => random_orthogonal(total, seed.derive(0xA17)),
        Mixing::Identity => OrthogonalMatrix::new(Matrix::identity(total))?,
        Mixing::Given(q) => {
            if q.dim() != total {
                return Err(Error::ShapeMismatch(format!(
                    "mixing matrix is {}x{} but sources have dimension {}",
                    q.dim(),
                    q.dim(),
                    total
                )));
            }
            q
        }
    };

    let observations = Matrix::from_dmatrix(sources.as_dmatrix() * a.as_dmatrix().transpose())?;
    Ok(IsaInstance {
        true_grouping: Grouping::contiguous(&dims)?,
        dims,
        mixing: a,
        sources,
        observations,
    })
}

/// Normalized block Amari index of a global transfer matrix G under the given
/// grouping: 0 iff G is a block-scaled permutation, 1 for maximally mixed.
pub fn block_amari_index(g: &Matrix, grouping: &Grouping) -> Result<f64> {
    let d = grouping.dim();
    if g.rows() != d || g.cols() != d {
        return Err(Error::ShapeMismatch(format!(
            "transfer matrix is {}x{}, grouping covers {}",
            g.rows(),
            g.cols(),
            d
        )));
    }
    let m = grouping.num_blocks();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "the block Amari index needs at least two blocks".into(),
        ));
    }
    let blocks = grouping.blocks();
    let gm = g.as_dmatrix();
    let mut b = DMatrix::zeros(m, m);
    for (i, rows) in blocks.iter().enumerate() {
        for (j, cols) in blocks.iter().enumerate() {
            let mut frob = 0.0;
            for &r in rows {
                for &c in cols {
                    frob += gm[(r, c)] * gm[(r, c)];
                }
            }
            b[(i, j)] = frob.sqrt();
        }
    }
    let mut total = 0.0;
    for i in 0..m {
        let row_max = (0..m).map(|j| b[(i, j)]).fold(0.0, f64::max);
        let col_max = (0..m).map(|j| b[(j, i)]).fold(0.0, f64::max);
        if row_max == 0.0 || col_max == 0.0 {
            return Err(Error::ZeroBlockRow);
        }
        total += (0..m).map(|j| b[(i, j)]).sum::<f64>() / row_max - 1.0;
        total += (0..m).map(|j| b[(j, i)]).sum::<f64>() / col_max - 1.0;
    }
    Ok(total / (2.0 * m as f64 * (m as f64 - 1.0)))
}

/// Fraction of coordinates placed in the correct block under the best
/// bijection between estimated and true blocks (optimal assignment on
/// block-overlap counts).
pub fn grouping_accuracy(estimated: &Grouping, truth: &Grouping) -> Result<f64> {
    if estimated.dim() != truth.dim() {
        return Err(Error::ShapeMismatch(format!(
            "groupings cover different dimensions: {} vs {}",
            estimated.dim(),
            truth.dim()
        )));
    }
    let mut est_sizes = estimated.sizes();
    let mut true_sizes = truth.sizes();
    est_sizes.sort_unstable();
    true_sizes.sort_unstable();
    if est_sizes != true_sizes {
        return Err(Error::ShapeMismatch(
            "groupings have different block-size multisets".into(),
        ));
    }
    let m = estimated.num_blocks();
    let mut overlap = vec![vec![0usize; m]; m];
    for (i, eb) in estimated.blocks().iter().enumerate() {
        for (j, tb) in truth.blocks().iter().enumerate() {
            overlap[i][j] = eb.iter().filter(|v| tb.contains(v)).count();
        }
    }
    let mut used = vec![false; m];
    let best = assign_max(&overlap, 0, &mut used);
    Ok(best as f64 / estimated.dim() as f64)
}

fn assign_max(overlap: &[Vec<usize>], row: usize, used: &mut [bool]) -> usize {
    if row == overlap.len() {
        return 0;
    }
    let mut best = 0;
    for j in 0..overlap.len() {
        if !used[j] {
            used[j] = true;
            best = best.max(overlap[row][j] + assign_max(overlap, row + 1, used));
            used[j] = false;
        }
    }
    best
}
