//! Weight-matrix selection and the augmented leading block
//! `A_k = A + BᵀW_kB`.
//!
//! `W_k` is a diagonal 0/1 matrix, so selecting it means selecting rows of
//! `B`. The structural phase greedily accepts rows (sparsest first) that
//! increase the structural rank of the dropped pattern of `A`; a numerical
//! phase appends further rows until the augmented block factorizes and is
//! acceptably conditioned.

use thiserror::Error;

use crate::chol::{condest_one, dense_cholesky, CholeskyFactor, FactorError};
use crate::scalar::{cast, Scalar};
use crate::sparse::SparseMatrix;

/// Condition-estimate cap for the numerical phase; beyond this a double
/// precision Cholesky solve carries no accurate digits.
pub const CONDITION_CAP: f64 = 1e14;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AugmentError {
    #[error("augmented block is not positive definite")]
    NotPositiveDefinite,
    #[error("structural rank {achieved} cannot reach {needed} with all rows of B")]
    StructuralDeficiency { achieved: usize, needed: usize },
    #[error("weight selection invalid: {0}")]
    InvalidSelection(&'static str),
}

/// Which augmentation family a selection belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind<T> {
    /// Structural-rank driven subset of rows of `B`.
    Partial,
    /// All rows of `B` (`W = I`).
    Full,
    /// `A + rho I` instead of a row selection.
    Identity { rho: T },
}

/// Selected rows of `B` defining the diagonal 0/1 weight matrix `W_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSelection<T> {
    rows: Vec<usize>,
    kind: WeightKind<T>,
    /// Rows appended by the numerical phase (subset of `rows`).
    numerical_rows: Vec<usize>,
}

impl<T: Scalar> WeightSelection<T> {
    pub fn partial(mut rows: Vec<usize>) -> Self {
        rows.sort_unstable();
        rows.dedup();
        Self {
            rows,
            kind: WeightKind::Partial,
            numerical_rows: Vec::new(),
        }
    }

    pub fn full(m: usize) -> Self {
        Self {
            rows: (0..m).collect(),
            kind: WeightKind::Full,
            numerical_rows: Vec::new(),
        }
    }

    pub fn identity(rho: T) -> Result<Self, AugmentError> {
        if rho <= T::zero() {
            return Err(AugmentError::InvalidSelection("identity rho must be > 0"));
        }
        Ok(Self {
            rows: Vec::new(),
            kind: WeightKind::Identity { rho },
            numerical_rows: Vec::new(),
        })
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn kind(&self) -> WeightKind<T> {
        self.kind
    }

    /// Rank of `W_k` (number of selected rows; 0 for identity augmentation).
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Rows added by `ensure_numerical_rank`, flagged separately from the
    /// structural-phase rows.
    pub fn numerical_rows(&self) -> &[usize] {
        &self.numerical_rows
    }

    pub fn contains(&self, row: usize) -> bool {
        self.rows.binary_search(&row).is_ok()
    }

    /// Applies the diagonal weight matrix: `(W_k + beta I) r` with `beta = 0`.
    pub fn apply_weight(&self, r: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); r.len()];
        match self.kind {
            WeightKind::Identity { rho } => {
                for (o, &v) in out.iter_mut().zip(r) {
                    *o = rho * v;
                }
            }
            _ => {
                for &i in &self.rows {
                    out[i] = r[i];
                }
            }
        }
        out
    }

    /// Dense `m x m` weight matrix.
    pub fn weight_matrix(&self, m: usize) -> SparseMatrix<T> {
        match self.kind {
            WeightKind::Identity { rho } => {
                let d = vec![rho; m];
                SparseMatrix::from_diagonal(&d)
            }
            _ => {
                let mut d = vec![T::zero(); m];
                for &i in &self.rows {
                    d[i] = T::one();
                }
                SparseMatrix::from_diagonal(&d)
            }
        }
    }
}

/// Augmented leading block with its selection; construction certifies SPD.
#[derive(Debug, Clone)]
pub struct AugmentedBlock<T> {
    ak: SparseMatrix<T>,
    selection: WeightSelection<T>,
    droptol_used: T,
}

impl<T: Scalar> AugmentedBlock<T> {
    pub fn ak(&self) -> &SparseMatrix<T> {
        &self.ak
    }

    pub fn selection(&self) -> &WeightSelection<T> {
        &self.selection
    }

    /// Absolute threshold used when forming the dropped pattern of `A`
    /// during structural selection (zero when no dropping was involved).
    pub fn droptol_used(&self) -> T {
        self.droptol_used
    }

    pub fn dim(&self) -> usize {
        self.ak.nrows()
    }

    /// Dense Cholesky of `A_k`; succeeds on every certified block.
    pub fn factor(&self) -> Result<CholeskyFactor<T>, FactorError> {
        dense_cholesky(&self.ak.to_dense())
    }
}

/// Removes entries with `|a_ij| < eps_machine * max|a_kl|`; everything else
/// is preserved exactly.
pub fn drop_small<T: Scalar>(a: &SparseMatrix<T>) -> SparseMatrix<T> {
    let scale = a.max_abs();
    if scale == T::zero() {
        return a.clone();
    }
    let cutoff = T::epsilon() * scale;
    let mut trip = Vec::with_capacity(a.nnz());
    for i in 0..a.nrows() {
        for (j, v) in a.row(i) {
            if v.abs() >= cutoff {
                trip.push((i, j, v));
            }
        }
    }
    SparseMatrix::from_triplets(a.nrows(), a.ncols(), &trip).unwrap()
}

/// Maximum bipartite matching between rows and columns of a nonzero pattern,
/// with support for incremental edge insertion and re-augmentation.
struct PatternMatcher {
    ncols: usize,
    adj: Vec<Vec<usize>>,
    match_of_row: Vec<Option<usize>>,
    match_of_col: Vec<Option<usize>>,
    size: usize,
}

impl PatternMatcher {
    fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            ncols,
            adj: vec![Vec::new(); nrows],
            match_of_row: vec![None; nrows],
            match_of_col: vec![None; ncols],
            size: 0,
        }
    }

    fn add_edge(&mut self, r: usize, c: usize) -> bool {
        debug_assert!(c < self.ncols);
        if self.adj[r].contains(&c) {
            return false;
        }
        self.adj[r].push(c);
        true
    }

    fn try_augment(&mut self, r: usize, seen: &mut [bool]) -> bool {
        for idx in 0..self.adj[r].len() {
            let c = self.adj[r][idx];
            if seen[c] {
                continue;
            }
            seen[c] = true;
            match self.match_of_col[c] {
                None => {
                    self.match_of_col[c] = Some(r);
                    self.match_of_row[r] = Some(c);
                    return true;
                }
                Some(r2) => {
                    if self.try_augment(r2, seen) {
                        self.match_of_col[c] = Some(r);
                        self.match_of_row[r] = Some(c);
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Re-augments from every unmatched row; returns the gained matching size.
    fn reaugment(&mut self) -> usize {
        let mut gained = 0;
        loop {
            let mut advanced = false;
            for r in 0..self.adj.len() {
                if self.match_of_row[r].is_some() {
                    continue;
                }
                let mut seen = vec![false; self.ncols];
                if self.try_augment(r, &mut seen) {
                    gained += 1;
                    advanced = true;
                }
            }
            if !advanced {
                break;
            }
        }
        self.size += gained;
        gained
    }
}

/// Structural rank: the size of a maximum bipartite matching on the nonzero
/// pattern. Upper bound on the numerical rank.
pub fn structural_rank<T: Scalar>(m: &SparseMatrix<T>) -> usize {
    let mut matcher = PatternMatcher::new(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for (j, _) in m.row(i) {
            matcher.add_edge(i, j);
        }
    }
    matcher.reaugment();
    matcher.size
}

/// Structural rank of the union of `pattern(A)` and the outer-product
/// patterns of the given rows of `B`, reusing one matcher.
fn selection_matcher<T: Scalar>(a_drop: &SparseMatrix<T>) -> PatternMatcher {
    let n = a_drop.ncols();
    let mut matcher = PatternMatcher::new(a_drop.nrows(), n);
    for i in 0..a_drop.nrows() {
        for (j, _) in a_drop.row(i) {
            matcher.add_edge(i, j);
        }
    }
    matcher.reaugment();
    matcher
}

fn add_row_pattern<T: Scalar>(
    matcher: &mut PatternMatcher,
    b: &SparseMatrix<T>,
    row: usize,
) -> Vec<(usize, usize)> {
    let support: Vec<usize> = b.row(row).map(|(j, _)| j).collect();
    let mut added = Vec::new();
    for &r in &support {
        for &c in &support {
            if matcher.add_edge(r, c) {
                added.push((r, c));
            }
        }
    }
    added
}

fn remove_edges(matcher: &mut PatternMatcher, edges: &[(usize, usize)]) {
    // only valid when no augmentation involving these edges has happened
    for &(r, c) in edges {
        if let Some(pos) = matcher.adj[r].iter().position(|&x| x == c) {
            matcher.adj[r].remove(pos);
        }
    }
}

/// Greedy structural-rank selection of rows of `B`.
///
/// Rows are scanned in ascending nonzero count (ties by index); a row is
/// accepted iff its outer-product pattern strictly increases the structural
/// rank of the running pattern. A final pruning pass (densest rows first)
/// removes rows made redundant by later acceptances, so every returned row
/// is irredundant. Stops once the structural rank reaches `n`.
pub fn select_weight_rows<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &SparseMatrix<T>,
) -> Result<WeightSelection<T>, AugmentError> {
    assert_eq!(a.nrows(), a.ncols(), "A must be square");
    assert_eq!(a.ncols(), b.ncols(), "B column count must match A");
    let n = a.nrows();
    let m = b.nrows();
    let a_drop = drop_small(a);

    let mut matcher = selection_matcher(&a_drop);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| (b.row_nnz(i), i));

    let mut selected = Vec::new();
    for &row in &order {
        if matcher.size == n {
            break;
        }
        if b.row_nnz(row) == 0 {
            continue;
        }
        let added = add_row_pattern(&mut matcher, b, row);
        if added.is_empty() {
            continue;
        }
        if matcher.reaugment() > 0 {
            selected.push(row);
        } else {
            remove_edges(&mut matcher, &added);
        }
    }
    if matcher.size < n {
        return Err(AugmentError::StructuralDeficiency {
            achieved: matcher.size,
            needed: n,
        });
    }

    // pruning pass: drop rows whose removal keeps full structural rank,
    // trying the densest rows first so the kept set stays sparse
    let mut keep: Vec<usize> = selected.clone();
    let mut prune_order = keep.clone();
    prune_order.sort_by_key(|&i| (usize::MAX - b.row_nnz(i), usize::MAX - i));
    for row in prune_order {
        let candidate: Vec<usize> = keep.iter().copied().filter(|&r| r != row).collect();
        if selection_rank(&a_drop, b, &candidate) == n {
            keep = candidate;
        }
    }

    Ok(WeightSelection::partial(keep))
}

fn selection_rank<T: Scalar>(
    a_drop: &SparseMatrix<T>,
    b: &SparseMatrix<T>,
    rows: &[usize],
) -> usize {
    let mut matcher = selection_matcher(a_drop);
    for &row in rows {
        add_row_pattern(&mut matcher, b, row);
    }
    matcher.reaugment();
    matcher.size
}

/// Builds `A_k` for the given selection and certifies it SPD by attempting a
/// dense Cholesky factorization.
pub fn build_augmented<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &SparseMatrix<T>,
    sel: &WeightSelection<T>,
) -> Result<AugmentedBlock<T>, AugmentError> {
    let blk = build_augmented_uncertified(a, b, sel)?;
    match dense_cholesky(&blk.ak.to_dense()) {
        Ok(_) => Ok(blk),
        Err(_) => Err(AugmentError::NotPositiveDefinite),
    }
}

/// Builds `A_k` without the SPD certificate; feed the result to
/// [`ensure_numerical_rank`] when the certified path fails.
pub fn build_augmented_uncertified<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &SparseMatrix<T>,
    sel: &WeightSelection<T>,
) -> Result<AugmentedBlock<T>, AugmentError> {
    assert_eq!(a.nrows(), a.ncols(), "A must be square");
    let ak = match sel.kind() {
        WeightKind::Identity { rho } => a.add_scaled_identity(rho),
        WeightKind::Partial | WeightKind::Full => {
            for &r in sel.rows() {
                if r >= b.nrows() {
                    return Err(AugmentError::InvalidSelection("selected row out of range"));
                }
            }
            if matches!(sel.kind(), WeightKind::Full) && sel.rows().len() != b.nrows() {
                return Err(AugmentError::InvalidSelection(
                    "full selection must cover every row",
                ));
            }
            let g = b.triple_product(sel.rows()).expect("rows checked in range");
            a.add(&g)
        }
    };
    let droptol_used = match sel.kind() {
        WeightKind::Partial => T::epsilon() * a.max_abs(),
        _ => T::zero(),
    };
    Ok(AugmentedBlock {
        ak,
        selection: sel.clone(),
        droptol_used,
    })
}

/// Numerical rescue phase: appends unselected rows of `B` (ascending nonzero
/// count) until the block factorizes with a 1-norm condition estimate below
/// [`CONDITION_CAP`]. Already-healthy blocks are returned unchanged.
pub fn ensure_numerical_rank<T: Scalar>(
    blk: AugmentedBlock<T>,
    b: &SparseMatrix<T>,
) -> Result<AugmentedBlock<T>, AugmentError> {
    let cap = cast::<T>(CONDITION_CAP);
    if let Some(factor) = spd_factor(&blk) {
        if matches!(blk.selection.kind(), WeightKind::Identity { .. })
            || condest_one(blk.ak(), &factor) <= cap
        {
            // identity augmentation has no rows to append; a factorizable
            // block is the best it can offer
            return Ok(blk);
        }
    } else if matches!(blk.selection.kind(), WeightKind::Identity { .. }) {
        return Err(AugmentError::NotPositiveDefinite);
    }

    let mut remaining: Vec<usize> = (0..b.nrows())
        .filter(|&r| !blk.selection.contains(r))
        .collect();
    remaining.sort_by_key(|&i| (b.row_nnz(i), i));

    let mut ak = blk.ak.clone();
    let mut rows = blk.selection.rows().to_vec();
    let mut numerical = blk.selection.numerical_rows().to_vec();
    for row in remaining {
        let g = b.triple_product(&[row]).expect("row in range");
        ak = ak.add(&g);
        rows.push(row);
        numerical.push(row);
        if let Ok(factor) = dense_cholesky(&ak.to_dense()) {
            if condest_one(&ak, &factor) <= cap {
                let mut selection = WeightSelection::partial(rows);
                numerical.sort_unstable();
                selection.numerical_rows = numerical;
                return Ok(AugmentedBlock {
                    ak,
                    selection,
                    droptol_used: blk.droptol_used,
                });
            }
        }
    }
    Err(AugmentError::StructuralDeficiency {
        achieved: structural_rank(&ak),
        needed: ak.nrows(),
    })
}

fn spd_factor<T: Scalar>(blk: &AugmentedBlock<T>) -> Option<CholeskyFactor<T>> {
    dense_cholesky(&blk.ak.to_dense()).ok()
}

/// Build-then-ensure pipeline used by the experiment harness and the
/// interior-point preconditioner policy. The numerical phase also catches
/// blocks whose Cholesky "succeeds" on roundoff-positive pivots: those show
/// up as condition estimates beyond the cap.
pub fn augment_spd<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &SparseMatrix<T>,
    sel: &WeightSelection<T>,
) -> Result<AugmentedBlock<T>, AugmentError> {
    let blk = match build_augmented(a, b, sel) {
        Ok(blk) => blk,
        Err(AugmentError::NotPositiveDefinite) => build_augmented_uncertified(a, b, sel)?,
        Err(e) => return Err(e),
    };
    ensure_numerical_rank(blk, b)
}
