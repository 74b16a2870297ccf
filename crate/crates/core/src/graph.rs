//! Leader–follower communication topology.
//!
//! Edge convention: `a_ij > 0` means follower `i` *receives* information
//! from follower `j`; `b_il > 0` means follower `i` receives from leader `l`.
//! Information therefore flows `j → i`, and an iSCC cell is a strongly
//! connected component of the follower graph that receives nothing from
//! outside itself (a source of the condensation).
//!
//! Indices are zero-based throughout: followers are `0..m`, leaders are
//! addressed either by agent index `m..N` or by leader offset `0..N-m`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{lit, to_f64, Real};

/// Weighted digraph with `m` followers and `N - m` leaders.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedNetwork<T: Real> {
    adjacency: DMatrix<T>,
    coupling: DMatrix<T>,
}

impl<T: Real> DirectedNetwork<T> {
    /// Builds a network from the `m × m` follower adjacency `a_ij` and the
    /// `m × (N-m)` leader coupling `b_il`.
    pub fn new(adjacency: DMatrix<T>, coupling: DMatrix<T>) -> Result<Self> {
        let m = adjacency.nrows();
        if m == 0 {
            return Err(Error::InvalidNetwork(
                "at least one follower is required".into(),
            ));
        }
        if adjacency.ncols() != m {
            return Err(Error::InvalidNetwork(format!(
                "follower adjacency must be square, got {}x{}",
                m,
                adjacency.ncols()
            )));
        }
        if coupling.nrows() != m {
            return Err(Error::InvalidNetwork(format!(
                "leader coupling has {} rows, expected {m}",
                coupling.nrows()
            )));
        }
        if coupling.ncols() == 0 {
            return Err(Error::InvalidNetwork(
                "at least one leader is required".into(),
            ));
        }
        for i in 0..m {
            if adjacency[(i, i)] != T::zero() {
                return Err(Error::InvalidNetwork(format!(
                    "self-loop at follower {}",
                    i + 1
                )));
            }
        }
        let bad = adjacency
            .iter()
            .chain(coupling.iter())
            .find(|w| !w.is_finite() || **w < T::zero());
        if let Some(w) = bad {
            return Err(Error::InvalidNetwork(format!(
                "edge weights must be finite and nonnegative, got {}",
                to_f64(*w)
            )));
        }
        Ok(Self {
            adjacency,
            coupling,
        })
    }

    /// Builds a network from edge lists.
    ///
    /// `follower_edges` holds `(from, to, weight)` meaning `to` receives from
    /// `from`; `leader_couplings` holds `(follower, leader_agent, weight)`
    /// with `leader_agent` in `m..agents`. Repeated edges accumulate.
    pub fn from_edges(
        agents: usize,
        followers: usize,
        follower_edges: &[(usize, usize, T)],
        leader_couplings: &[(usize, usize, T)],
    ) -> Result<Self> {
        if followers == 0 || agents <= followers {
            return Err(Error::InvalidNetwork(format!(
                "need 1 <= followers < agents, got followers = {followers}, agents = {agents}"
            )));
        }
        let m = followers;
        let mut adjacency = DMatrix::zeros(m, m);
        for &(from, to, w) in follower_edges {
            if from >= m || to >= m {
                return Err(Error::InvalidNetwork(format!(
                    "follower edge ({}, {}) references a non-follower vertex",
                    from + 1,
                    to + 1
                )));
            }
            if from == to {
                return Err(Error::InvalidNetwork(format!(
                    "self-loop at follower {}",
                    to + 1
                )));
            }
            adjacency[(to, from)] += w;
        }
        let mut coupling = DMatrix::zeros(m, agents - m);
        for &(f, l, w) in leader_couplings {
            if f >= m || l < m || l >= agents {
                return Err(Error::InvalidNetwork(format!(
                    "leader coupling ({}, {}) must join a follower to a leader",
                    f + 1,
                    l + 1
                )));
            }
            coupling[(f, l - m)] += w;
        }
        Self::new(adjacency, coupling)
    }

    /// Number of followers `m`.
    pub fn followers(&self) -> usize {
        self.adjacency.nrows()
    }

    /// Number of leaders `N - m`.
    pub fn leaders(&self) -> usize {
        self.coupling.ncols()
    }

    /// Total vertex count `N`.
    pub fn agents(&self) -> usize {
        self.followers() + self.leaders()
    }

    pub fn adjacency(&self) -> &DMatrix<T> {
        &self.adjacency
    }

    pub fn coupling(&self) -> &DMatrix<T> {
        &self.coupling
    }

    /// `Σ_l b_il`, the total leader weight entering follower `i`.
    pub fn pinning_weight(&self, i: usize) -> T {
        self.coupling.row(i).sum()
    }

    /// Followers `j` with `a_ij > 0`.
    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (0..self.followers())
            .map(move |j| (j, self.adjacency[(i, j)]))
            .filter(|(_, w)| *w > T::zero())
    }

    /// Weak connectivity of the follower subgraph (edge directions ignored,
    /// leader edges excluded).
    pub fn is_weakly_connected(&self) -> bool {
        let m = self.followers();
        let mut seen = vec![false; m];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in 0..m {
                let linked =
                    self.adjacency[(v, w)] > T::zero() || self.adjacency[(w, v)] > T::zero();
                if linked && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Relabels followers: new follower `k` is old follower `perm[k]`.
    pub fn permute_followers(&self, perm: &[usize]) -> Result<Self> {
        let m = self.followers();
        let mut check = perm.to_vec();
        check.sort_unstable();
        if check != (0..m).collect::<Vec<_>>() {
            return Err(Error::InvalidNetwork(
                "not a permutation of the followers".into(),
            ));
        }
        let adjacency = DMatrix::from_fn(m, m, |r, c| self.adjacency[(perm[r], perm[c])]);
        let coupling = DMatrix::from_fn(m, self.leaders(), |r, c| self.coupling[(perm[r], c)]);
        Self::new(adjacency, coupling)
    }
}

/// Follower Laplacian `L_F = D - A` with `D = diag(Σ_j a_ij)`.
pub fn laplacian<T: Real>(net: &DirectedNetwork<T>) -> DMatrix<T> {
    let a = net.adjacency();
    let m = a.nrows();
    let mut l = -a.clone();
    for i in 0..m {
        l[(i, i)] = a.row(i).sum();
    }
    l
}

/// Strongly connected components of the follower graph (Tarjan), each
/// sorted ascending, components ordered by smallest member.
pub fn strongly_connected_components<T: Real>(net: &DirectedNetwork<T>) -> Vec<Vec<usize>> {
    let m = net.followers();
    // Information flows j -> i whenever a_ij > 0.
    let out: Vec<Vec<usize>> = (0..m)
        .map(|j| {
            (0..m)
                .filter(|&i| net.adjacency()[(i, j)] > T::zero())
                .collect()
        })
        .collect();

    struct Tarjan<'a> {
        out: &'a [Vec<usize>],
        next: usize,
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        comps: Vec<Vec<usize>>,
    }

    impl Tarjan<'_> {
        fn visit(&mut self, v: usize) {
            self.index[v] = Some(self.next);
            self.low[v] = self.next;
            self.next += 1;
            self.stack.push(v);
            self.on_stack[v] = true;
            for k in 0..self.out[v].len() {
                let w = self.out[v][k];
                match self.index[w] {
                    None => {
                        self.visit(w);
                        self.low[v] = self.low[v].min(self.low[w]);
                    }
                    Some(iw) if self.on_stack[w] => self.low[v] = self.low[v].min(iw),
                    Some(_) => {}
                }
            }
            if Some(self.low[v]) == self.index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = self.stack.pop().expect("tarjan stack underflow");
                    self.on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                self.comps.push(comp);
            }
        }
    }

    let mut t = Tarjan {
        out: &out,
        next: 0,
        index: vec![None; m],
        low: vec![0; m],
        on_stack: vec![false; m],
        stack: Vec::new(),
        comps: Vec::new(),
    };
    for v in 0..m {
        if t.index[v].is_none() {
            t.visit(v);
        }
    }
    let mut comps = t.comps;
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Partition of the followers into iSCC cells and the remaining vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsccPartition {
    pub cells: Vec<Vec<usize>>,
    pub non_iscc: Vec<usize>,
}

impl IsccPartition {
    /// Number of cells `c`.
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }
}

pub fn iscc_partition<T: Real>(net: &DirectedNetwork<T>) -> IsccPartition {
    let m = net.followers();
    let comps = strongly_connected_components(net);
    let mut comp_of = vec![0; m];
    for (k, c) in comps.iter().enumerate() {
        for &v in c {
            comp_of[v] = k;
        }
    }
    let mut cells = Vec::new();
    let mut non_iscc = Vec::new();
    for (k, c) in comps.into_iter().enumerate() {
        let receives_from_outside = c
            .iter()
            .any(|&i| net.in_neighbors(i).any(|(j, _)| comp_of[j] != k));
        if receives_from_outside {
            non_iscc.extend(c);
        } else {
            cells.push(c);
        }
    }
    non_iscc.sort_unstable();
    IsccPartition { cells, non_iscc }
}

/// Outcome of comparing the Laplacian rank with the iSCC count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankCheck {
    pub rank: usize,
    pub cell_count: usize,
    /// `rank == m - cell_count`
    pub consistent: bool,
}

pub fn laplacian_rank_check<T: Real>(net: &DirectedNetwork<T>) -> Result<RankCheck> {
    if !net.is_weakly_connected() {
        return Err(Error::NotWeaklyConnected);
    }
    let rank = linalg::numerical_rank(&laplacian(net));
    let cell_count = iscc_partition(net).cell_count();
    Ok(RankCheck {
        rank,
        cell_count,
        consistent: rank + cell_count == net.followers(),
    })
}

/// True iff every iSCC cell contains a follower with positive leader weight.
pub fn pinning_check<T: Real>(net: &DirectedNetwork<T>) -> bool {
    iscc_partition(net)
        .cells
        .iter()
        .all(|cell| cell.iter().any(|&i| net.pinning_weight(i) > T::zero()))
}

/// `B_oj = diag(b_1j, …, b_mj)` for leader offset `j`.
pub fn leader_diagonal<T: Real>(net: &DirectedNetwork<T>, leader: usize) -> DMatrix<T> {
    DMatrix::from_diagonal(&net.coupling().column(leader).into_owned())
}

/// `M = L_F + Σ_j B_oj` without any certificate.
pub fn assemble_grounded<T: Real>(net: &DirectedNetwork<T>) -> DMatrix<T> {
    let mut m = laplacian(net);
    for i in 0..net.followers() {
        m[(i, i)] += net.pinning_weight(i);
    }
    m
}

/// Grounded matrix `M` with a diagonal certificate `ΨM + MᵀΨ ⪰ ηΨ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedMatrix<T: Real> {
    pub matrix: DMatrix<T>,
    /// Diagonal of `Ψ`, normalized so that its largest entry is one.
    pub psi: DVector<T>,
    pub eta: T,
    /// Weak dominance in every row and strict dominance in at least one.
    pub diagonally_dominant: bool,
    pub eigenvalues: Vec<Complex<T>>,
}

impl<T: Real> GroundedMatrix<T> {
    pub fn psi_matrix(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&self.psi)
    }

    pub fn psi_min(&self) -> T {
        self.psi.min()
    }

    pub fn psi_max(&self) -> T {
        self.psi.max()
    }

    /// Spectral norm `‖M‖`.
    pub fn norm(&self) -> T {
        linalg::spectral_norm(&self.matrix)
    }
}

/// `λ_min(Ψ^{-1/2}(ΨM + MᵀΨ)Ψ^{-1/2})`; `-inf` if some `ψ_i <= 0`.
pub fn certificate_eta<T: Real>(m: &DMatrix<T>, psi: &DVector<T>) -> T {
    if psi.iter().any(|&p| p <= T::zero()) {
        return T::min_value().unwrap();
    }
    let n = m.nrows();
    let s = DMatrix::from_fn(n, n, |i, j| {
        (psi[i] * m[(i, j)] + m[(j, i)] * psi[j]) / (psi[i] * psi[j]).sqrt()
    });
    linalg::sym_min_eigenvalue(&s)
}

fn lemma_dominance<T: Real>(m: &DMatrix<T>) -> bool {
    let n = m.nrows();
    let mut strict = false;
    for i in 0..n {
        let diag = m[(i, i)].abs();
        let off: T = (0..n)
            .filter(|&k| k != i)
            .map(|k| m[(i, k)].abs())
            .fold(T::zero(), |a, b| a + b);
        if diag < off {
            return false;
        }
        if diag > off {
            strict = true;
        }
    }
    strict
}

const PSI_SEARCH_SWEEPS: usize = 200;

fn search_psi<T: Real>(m: &DMatrix<T>, start: DVector<T>) -> (DVector<T>, T) {
    let factors: [T; 4] = [lit(2.0), lit(0.5), lit(1.1), lit(1.0 / 1.1)];
    let mut psi = start;
    let mut best = certificate_eta(m, &psi);
    for _ in 0..PSI_SEARCH_SWEEPS {
        let mut improved = false;
        for i in 0..psi.len() {
            for &f in &factors {
                let mut trial = psi.clone();
                trial[i] *= f;
                let e = certificate_eta(m, &trial);
                if e > best {
                    best = e;
                    psi = trial;
                    improved = true;
                }
            }
        }
        if !improved || best > T::zero() {
            break;
        }
    }
    (psi, best)
}

/// Assembles `M` and certifies it with `Ψ = diag(u_i / v_i)`, where
/// `M v = 1` and `Mᵀ u = 1`; falls back to a multiplicative coordinate search
/// when that choice does not give `η > 0`.
pub fn grounded_matrix<T: Real>(net: &DirectedNetwork<T>) -> Result<GroundedMatrix<T>> {
    let matrix = assemble_grounded(net);
    let n = matrix.nrows();
    let sv = linalg::singular_values(&matrix);
    let (smax, smin) = (sv[0], sv[n - 1]);
    if smax <= T::zero() || smin <= smax * lit(linalg::RANK_TOLERANCE) {
        return Err(Error::SingularGroundedMatrix(to_f64(smin)));
    }

    let ones = DVector::from_element(n, T::one());
    let v = linalg::solve_vec(&matrix, &ones);
    let u = linalg::solve_vec(&matrix.transpose(), &ones);
    let candidate = match (v, u) {
        (Some(v), Some(u)) if v.iter().chain(u.iter()).all(|&x| x > T::zero()) => {
            u.component_div(&v)
        }
        _ => ones.clone(),
    };
    let mut psi = candidate;
    let mut eta = certificate_eta(&matrix, &psi);
    if eta <= T::zero() {
        (psi, eta) = search_psi(&matrix, psi);
    }
    if eta <= T::zero() {
        return Err(Error::CertificateFailure(to_f64(eta)));
    }
    // η is invariant under scaling of Ψ.
    let top = psi.max();
    psi /= top;

    let eigenvalues = linalg::eigenvalues(&matrix);
    if let Some(z) = eigenvalues.iter().find(|z| z.re <= T::zero()) {
        return Err(Error::SingularGroundedMatrix(to_f64(linalg::modulus(z))));
    }
    Ok(GroundedMatrix {
        diagonally_dominant: lemma_dominance(&matrix),
        matrix,
        psi,
        eta,
        eigenvalues,
    })
}

/// Laplacian reordered so that iSCC cells come first.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTriangularForm<T: Real> {
    /// New position `k` holds old follower `permutation[k]`.
    pub permutation: Vec<usize>,
    pub permuted: DMatrix<T>,
    /// Sizes of the cell blocks followed by the trailing block (possibly 0).
    pub block_sizes: Vec<usize>,
    /// Every cell block has exactly one zero eigenvalue, the rest in the
    /// open right half-plane.
    pub cells_have_simple_zero: bool,
    /// The trailing block has all eigenvalues in the open right half-plane,
    /// i.e. its negation is Hurwitz. Vacuously true when empty.
    pub trailing_block_stable: bool,
    /// Entries above the block diagonal are all zero.
    pub lower_block_triangular: bool,
}

pub fn block_triangular_form<T: Real>(net: &DirectedNetwork<T>) -> Result<BlockTriangularForm<T>> {
    if !net.is_weakly_connected() {
        return Err(Error::NotWeaklyConnected);
    }
    let part = iscc_partition(net);
    let mut permutation: Vec<usize> = part.cells.iter().flatten().copied().collect();
    permutation.extend(part.non_iscc.iter().copied());
    let l = laplacian(net);
    let m = net.followers();
    let permuted = DMatrix::from_fn(m, m, |r, c| l[(permutation[r], permutation[c])]);

    let mut block_sizes: Vec<usize> = part.cells.iter().map(Vec::len).collect();
    block_sizes.push(part.non_iscc.len());

    let scale = linalg::spectral_norm(&l).max(T::one());
    let zero_tol = scale * lit(1e-9);
    let mut offset = 0;
    let mut cells_have_simple_zero = true;
    let mut lower_block_triangular = true;
    for (k, &size) in block_sizes.iter().enumerate() {
        let block = permuted.view((offset, offset), (size, size)).into_owned();
        let ev = linalg::eigenvalues(&block);
        let is_cell = k + 1 < block_sizes.len();
        if is_cell {
            let zeros = ev.iter().filter(|z| linalg::modulus(z) <= zero_tol).count();
            let rest_positive = ev
                .iter()
                .filter(|z| linalg::modulus(z) > zero_tol)
                .all(|z| z.re > T::zero());
            cells_have_simple_zero &= zeros == 1 && rest_positive;
            // a cell receives nothing from outside itself
            for r in offset..offset + size {
                for c in 0..m {
                    if (c < offset || c >= offset + size) && permuted[(r, c)] != T::zero() {
                        lower_block_triangular = false;
                    }
                }
            }
        }
        offset += size;
    }
    let trailing = *block_sizes.last().unwrap();
    let trailing_block_stable = trailing == 0 || {
        let start = m - trailing;
        let block = permuted
            .view((start, start), (trailing, trailing))
            .into_owned();
        linalg::min_real_part(&block) > zero_tol
    };
    Ok(BlockTriangularForm {
        permutation,
        permuted,
        block_sizes,
        cells_have_simple_zero,
        trailing_block_stable,
        lower_block_triangular,
    })
}
