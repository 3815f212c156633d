//! Interpolation-perturbed views of node embeddings and labels.
//!
//! A view mixes every node with a randomly chosen partner,
//! `λ·H_i + (1-λ)·H_{π(i)}`. The permutation `π` is drawn within blocks
//! (train nodes with train nodes, the rest with the rest) so that every
//! labeled node is mixed with another labeled node and the mixed label is
//! always defined.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::graphdata::SplitMasks;
use crate::ndiff::{Matrix, Tape, TensorError, Var};

#[derive(Debug, Error)]
pub enum MixError {
    #[error("interpolation rate {0} is outside [0, 1]")]
    BadRate(f64),
    #[error("permutation has length {found}, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("permutation sends train node {0} to non-train node {1}")]
    NotTrainClosed(usize, usize),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// A bijection on `[0, N)` that maps the train set onto itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPermutation(Vec<usize>);

impl BlockPermutation {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Wraps an explicit mapping after checking it is a train-closed bijection.
    pub fn new(perm: Vec<usize>, splits: &SplitMasks) -> Result<Self, MixError> {
        let n = splits.num_nodes();
        if perm.len() != n {
            return Err(MixError::Length { expected: n, found: perm.len() });
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(MixError::Length { expected: n, found: perm.len() });
            }
        }
        let p = Self(perm);
        p.check_train_closed(splits)?;
        Ok(p)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_train_closed(&self, splits: &SplitMasks) -> Result<(), MixError> {
        let mask = splits.train_mask();
        for &i in &splits.train {
            let p = self.0[i];
            if !mask[p] {
                return Err(MixError::NotTrainClosed(i, p));
            }
        }
        Ok(())
    }
}

/// Independent uniform shuffles of the train set and of its complement.
pub fn sample_block_permutation<R: Rng + ?Sized>(splits: &SplitMasks, rng: &mut R) -> BlockPermutation {
    let n = splits.num_nodes();
    let mask = splits.train_mask();
    let rest: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
    let mut perm = vec![0; n];
    for block in [&splits.train, &rest] {
        let mut shuffled = block.clone();
        shuffled.shuffle(rng);
        for (&src, &dst) in block.iter().zip(&shuffled) {
            perm[src] = dst;
        }
    }
    BlockPermutation(perm)
}

fn check_rate(lambda: f64) -> Result<(), MixError> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(MixError::BadRate(lambda))
    }
}

/// One perturbed view: mixed embeddings and, when built, mixed train labels.
#[derive(Clone, Debug)]
pub struct MixedView {
    pub view_id: u8,
    pub permutation: BlockPermutation,
    pub h_mixed: Var,
    pub y_mixed: Option<Matrix>,
    pub lambda: f64,
}

/// `λ·H + (1-λ)·H[π]` on the tape.
pub fn mix_embeddings(tape: &mut Tape<'_>, h: Var, perm: &BlockPermutation, lambda: f64) -> Result<Var, MixError> {
    check_rate(lambda)?;
    let rows = tape.shape(h).0;
    if perm.len() != rows {
        return Err(MixError::Length { expected: rows, found: perm.len() });
    }
    Ok(tape.mix_rows(h, perm.as_slice(), lambda)?)
}

/// Mixed labels for the train nodes. `y_train` holds one row per node of
/// `splits.train`, in that order.
pub fn mix_labels(
    y_train: &Matrix,
    perm: &BlockPermutation,
    lambda: f64,
    splits: &SplitMasks,
) -> Result<Matrix, MixError> {
    check_rate(lambda)?;
    if y_train.rows() != splits.train.len() {
        return Err(MixError::Length { expected: splits.train.len(), found: y_train.rows() });
    }
    if perm.len() != splits.num_nodes() {
        return Err(MixError::Length { expected: splits.num_nodes(), found: perm.len() });
    }
    perm.check_train_closed(splits)?;
    if lambda == 1.0 {
        return Ok(y_train.clone());
    }
    let mut row_of = vec![usize::MAX; splits.num_nodes()];
    for (r, &i) in splits.train.iter().enumerate() {
        row_of[i] = r;
    }
    let mut out = Matrix::zeros(y_train.rows(), y_train.cols());
    for (r, &i) in splits.train.iter().enumerate() {
        let partner = row_of[perm.as_slice()[i]];
        let (own, other) = (y_train.row(r), y_train.row(partner));
        for (j, o) in out.row_mut(r).iter_mut().enumerate() {
            *o = lambda * own[j] + (1.0 - lambda) * other[j];
        }
    }
    Ok(out)
}

/// Builds a complete view: mixed embeddings plus (optionally) mixed labels.
pub fn build_view(
    tape: &mut Tape<'_>,
    view_id: u8,
    h: Var,
    permutation: BlockPermutation,
    lambda: f64,
    labels: Option<(&Matrix, &SplitMasks)>,
) -> Result<MixedView, MixError> {
    let h_mixed = mix_embeddings(tape, h, &permutation, lambda)?;
    let y_mixed = labels.map(|(y, splits)| mix_labels(y, &permutation, lambda, splits)).transpose()?;
    Ok(MixedView { view_id, permutation, h_mixed, y_mixed, lambda })
}

/// Cross-entropy between predictions on the train rows of a view and the
/// view's mixed labels.
pub fn classification_loss(tape: &mut Tape<'_>, y_hat_train: Var, y_mixed: &Matrix) -> Result<Var, MixError> {
    Ok(tape.cross_entropy(y_hat_train, y_mixed)?)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn splits(n: usize, train: &[usize]) -> SplitMasks {
        let rest: Vec<usize> = (0..n).filter(|i| !train.contains(i)).collect();
        SplitMasks { train: train.to_vec(), val: vec![], test: rest }
    }

    #[test]
    fn singleton_train_block_is_fixed() {
        let s = splits(3, &[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let p = sample_block_permutation(&s, &mut rng);
            assert_eq!(p.as_slice()[0], 0);
            let mut rest = p.as_slice()[1..].to_vec();
            rest.sort();
            assert_eq!(rest, [1, 2]);
        }
    }

    #[test]
    fn pair_swap_frequency() {
        let s = splits(6, &[0, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let swaps = (0..10_000).filter(|_| sample_block_permutation(&s, &mut rng).as_slice()[0] == 1).count();
        let freq = swaps as f64 / 1e4;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn embedding_mix_hand_case() {
        let mut t = Tape::new();
        let h = t.leaf(Matrix::identity(2));
        let s = splits(2, &[0, 1]);
        let swap = BlockPermutation::new(vec![1, 0], &s).unwrap();
        let m = mix_embeddings(&mut t, h, &swap, 0.9).unwrap();
        let v = t.value(m);
        assert!((v.get(0, 0) - 0.9).abs() < 1e-15 && (v.get(1, 0) - 0.1).abs() < 1e-15);
        let same = mix_embeddings(&mut t, h, &swap, 1.0).unwrap();
        assert_eq!(t.value(same), &Matrix::identity(2));
        assert!(matches!(mix_embeddings(&mut t, h, &swap, 1.2), Err(MixError::BadRate(_))));
        assert!(matches!(mix_embeddings(&mut t, h, &BlockPermutation::identity(3), 0.5), Err(MixError::Length { .. })));
    }

    #[test]
    fn label_mix_cases() {
        let s = splits(3, &[0, 2]);
        let y = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let swap = BlockPermutation::new(vec![2, 1, 0], &s).unwrap();
        let m = mix_labels(&y, &swap, 0.9, &s).unwrap();
        assert!((m.get(0, 0) - 0.9).abs() < 1e-15 && (m.get(0, 1) - 0.1).abs() < 1e-15);
        let id = BlockPermutation::identity(3);
        assert_eq!(mix_labels(&y, &id, 0.3, &s).unwrap(), y);
        let leaky = BlockPermutation(vec![1, 0, 2]);
        assert!(matches!(mix_labels(&y, &leaky, 0.9, &s), Err(MixError::NotTrainClosed(0, 1))));
        assert!(BlockPermutation::new(vec![1, 0, 2], &s).is_err());
    }

    #[test]
    fn classification_loss_cases() {
        let mut t = Tape::new();
        let target = Matrix::from_rows(&[[0.9, 0.1], [0.1, 0.9]]).unwrap();
        let perfect = t.leaf(target.clone());
        let uniform = t.leaf(Matrix::filled(2, 2, 0.5));
        let l0 = classification_loss(&mut t, perfect, &target).unwrap();
        let entropy = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        // perfect prediction of a soft label leaves only its entropy
        assert!((t.scalar(l0) - entropy).abs() < 1e-10);
        let l1 = classification_loss(&mut t, uniform, &target).unwrap();
        assert!((t.scalar(l1) - std::f64::consts::LN_2).abs() < 1e-10);
        let one_hot = Matrix::identity(2);
        let exact = t.leaf(one_hot.clone());
        let l2 = classification_loss(&mut t, exact, &one_hot).unwrap();
        assert!(t.scalar(l2).abs() < 1e-11);
    }

    proptest! {
        #[test]
        fn mixed_labels_stay_on_simplex(seed in 0u64..1000, n in 2usize..30, lambda in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let train: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
            prop_assume!(!train.is_empty());
            let s = splits(n, &train);
            let c = 4;
            let mut y = Matrix::zeros(train.len(), c);
            for r in 0..train.len() {
                y.set(r, rng.random_range(0..c), 1.0);
            }
            let p = sample_block_permutation(&s, &mut rng);
            p.check_train_closed(&s).unwrap();
            let mut sorted = p.as_slice().to_vec();
            sorted.sort();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            let m = mix_labels(&y, &p, lambda, &s).unwrap();
            for r in 0..m.rows() {
                prop_assert!((m.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(m.row(r).iter().all(|&v| v >= 0.0));
            }
        }
    }
}
