//! Leader-rooted communication graphs: weighted follower adjacency, leader
//! coupling, Laplacian and the invertibility certificate behind the
//! "null consensus error implies consensus" argument.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for the L + M nonsingularity test.
const INVERTIBILITY_TOL: f64 = 1e-10;

/// Follower communication graph plus leader coupling.
///
/// Convention: `a[(i, j)] > 0` means agent `i` listens to agent `j`, and
/// `b[i] > 0` means agent `i` listens to the leader. Undirected graphs are
/// stored as symmetric `a`; there is no separate code path.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    a: DMatrix<f64>,
    b: DVector<f64>,
    directed: bool,
}

/// Result of [`Network::rootedness_certificate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootednessCertificate {
    /// Whether `L + M` is nonsingular (tested via SVD at relative
    /// tolerance 1e-10).
    pub invertible: bool,
    /// `inf`-norm of `(L + M) 1_N - m`; ~0 by the zero row sums of `L`,
    /// reported as a construction check.
    pub identity_residual: f64,
}

impl Network {
    /// Builds a network from follower adjacency `a` and leader adjacency `b`.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "adjacency must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "leader adjacency has length {}, expected {n}",
                b.len()
            )));
        }
        for i in 0..n {
            if a[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "self-loop on agent {} (a[{i}][{i}] = {})",
                    i + 1,
                    a[(i, i)]
                )));
            }
            for j in 0..n {
                if !(a[(i, j)] >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "negative or non-finite weight a[{i}][{j}] = {}",
                        a[(i, j)]
                    )));
                }
            }
            if !(b[i] >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "negative or non-finite leader weight b[{i}] = {}",
                    b[i]
                )));
            }
        }
        let directed = a != a.transpose();
        Ok(Network { a, b, directed })
    }

    pub fn follower_count(&self) -> usize {
        self.a.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn leader_adjacency(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    pub fn leader_weight(&self, i: usize) -> f64 {
        self.b[i]
    }

    /// In-neighbors of agent `i` among the followers.
    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.follower_count()).filter_map(move |j| {
            let w = self.a[(i, j)];
            (w > 0.0).then_some((j, w))
        })
    }

    /// Degree sum `beta_i = b_i + sum_j a_ij`; the divisor in every protocol.
    /// Equals the i-th diagonal entry of `L + M`.
    pub fn beta(&self, i: usize) -> f64 {
        self.b[i] + self.a.row(i).sum()
    }

    pub fn betas(&self) -> DVector<f64> {
        DVector::from_fn(self.follower_count(), |i, _| self.beta(i))
    }

    /// Graph Laplacian: `l_ij = -a_ij` off-diagonal, diagonal set to the row
    /// sum so every row sums to zero exactly.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.follower_count();
        let mut l = -self.a.clone();
        for i in 0..n {
            l[(i, i)] = self.a.row(i).sum();
        }
        l
    }

    /// `M = diag(b)`.
    pub fn leader_coupling(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.b)
    }

    /// `m = M 1_N = b`.
    pub fn leader_vector(&self) -> DVector<f64> {
        self.b.clone()
    }

    /// True iff every follower is reachable from the leader through edges
    /// `{l -> i : b_i > 0}` and `{j -> i : a_ij > 0}` (information flow).
    pub fn leader_rooted(&self) -> bool {
        let n = self.follower_count();
        let mut reached = vec![false; n];
        let mut queue: Vec<usize> = (0..n).filter(|&i| self.b[i] > 0.0).collect();
        for &i in &queue {
            reached[i] = true;
        }
        while let Some(j) = queue.pop() {
            for i in 0..n {
                if !reached[i] && self.a[(i, j)] > 0.0 {
                    reached[i] = true;
                    queue.push(i);
                }
            }
        }
        reached.iter().all(|&r| r)
    }

    /// Numerical certificate for the rootedness criterion: nonsingularity of
    /// `L + M` together with the residual of `(L + M) 1_N = m`. The scalar
    /// identity suffices; the Kronecker form follows structurally.
    pub fn rootedness_certificate(&self) -> RootednessCertificate {
        let lm = self.laplacian() + self.leader_coupling();
        let n = self.follower_count();
        let ones = DVector::from_element(n, 1.0);
        let identity_residual = (&lm * ones - self.leader_vector()).amax();
        let svd = lm.svd(false, false);
        let max_sv = svd.singular_values.max();
        let min_sv = svd.singular_values.min();
        let invertible = max_sv > 0.0 && min_sv > INVERTIBILITY_TOL * max_sv;
        RootednessCertificate {
            invertible,
            identity_residual,
        }
    }

    /// Topological order of the followers with respect to listening edges
    /// (`j` before `i` whenever `a_ij > 0`), for the zero-delay evaluation
    /// mode. Fails on cyclic follower graphs.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.follower_count();
        let mut indegree = vec![0usize; n];
        for i in 0..n {
            indegree[i] = (0..n).filter(|&j| self.a[(i, j)] > 0.0).count();
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(j) = ready.pop() {
            order.push(j);
            for i in 0..n {
                if self.a[(i, j)] > 0.0 {
                    indegree[i] -= 1;
                    if indegree[i] == 0 {
                        ready.push(i);
                    }
                }
            }
        }
        if order.len() != n {
            return Err(Error::CyclicFollowerGraph);
        }
        Ok(order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(a: DMatrix<f64>, b: &[f64]) -> Network {
        Network::new(a, DVector::from_row_slice(b)).unwrap()
    }

    /// Directed 8-follower graph used by the bundled scenarios (best-effort
    /// transcription; tests rely only on its properties).
    pub(crate) fn sample_tree() -> Network {
        let mut a = DMatrix::zeros(8, 8);
        for (to, from) in [(1, 0), (2, 1), (3, 1), (4, 3), (5, 4), (6, 2), (7, 6)] {
            a[(to, from)] = 1.0;
        }
        net(a, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    #[test]
    fn single_follower_laplacian_is_zero() {
        let n = net(DMatrix::zeros(1, 1), &[1.0]);
        assert_eq!(n.laplacian(), DMatrix::zeros(1, 1));
    }

    #[test]
    fn two_follower_laplacian() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        let n = net(a, &[1.0, 0.0]);
        let l = n.laplacian();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn laplacian_rows_sum_to_zero_exactly() {
        let g = sample_tree();
        let l = g.laplacian();
        for i in 0..8 {
            assert_eq!(l.row(i).sum(), 0.0);
        }
    }

    #[test]
    fn beta_equals_diagonal_of_l_plus_m() {
        let g = sample_tree();
        let lm = g.laplacian() + g.leader_coupling();
        for i in 0..8 {
            assert_eq!(g.beta(i), lm[(i, i)]);
        }
    }

    #[test]
    fn no_leader_edge_means_not_rooted() {
        let mut a = DMatrix::zeros(3, 3);
        a[(1, 0)] = 1.0;
        a[(2, 1)] = 1.0;
        let n = net(a, &[0.0, 0.0, 0.0]);
        assert!(!n.leader_rooted());
        assert!(!n.rootedness_certificate().invertible);
    }

    #[test]
    fn chain_from_leader_is_rooted() {
        let len = 5;
        let mut a = DMatrix::zeros(len, len);
        for i in 1..len {
            a[(i, i - 1)] = 1.0;
        }
        let mut b = vec![0.0; len];
        b[0] = 1.0;
        let n = net(a, &b);
        assert!(n.leader_rooted());
    }

    #[test]
    fn sample_tree_is_rooted_with_certificate() {
        let g = sample_tree();
        assert!(g.leader_rooted());
        let cert = g.rootedness_certificate();
        assert!(cert.invertible);
        assert!(cert.identity_residual < 1e-12);
    }

    #[test]
    fn topological_order_respects_edges() {
        let g = sample_tree();
        let order = g.topological_order().unwrap();
        let pos: Vec<usize> = {
            let mut p = vec![0; 8];
            for (rank, &i) in order.iter().enumerate() {
                p[i] = rank;
            }
            p
        };
        for i in 0..8 {
            for (j, _) in g.in_neighbors(i) {
                assert!(pos[j] < pos[i], "neighbor {j} must precede {i}");
            }
        }
    }

    #[test]
    fn cycle_has_no_topological_order() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        let n = net(a, &[1.0, 0.0]);
        assert!(matches!(
            n.topological_order(),
            Err(Error::CyclicFollowerGraph)
        ));
    }

    #[test]
    fn rejects_self_loops_and_negative_weights() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 0)] = 1.0;
        assert!(Network::new(a, DVector::zeros(2)).is_err());
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = -1.0;
        assert!(Network::new(a, DVector::zeros(2)).is_err());
    }
}
