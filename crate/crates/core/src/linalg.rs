//! Linear algebra on mesh-structured matrices.
//!
//! [`ChainFactor`] is a symmetric (not Hermitian) `LDLᵀ` factorization that
//! exploits the graph structure: interior nodes of every edge form a chain
//! touching only the two endpoint vertices, so eliminating them edge by edge
//! creates fill only inside the small dense vertex block. Work and storage are
//! `O(N + |V|³)`.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretize::{Mesh, MeshMatrix};
use crate::error::{Error, Result};
use crate::metric_graph::EdgeId;

const PIVOT_RTOL: f64 = 1e-13;

#[derive(Clone, Debug)]
struct Chain {
    first: usize,
    len: usize,
}

#[derive(Clone, Debug)]
struct Couplings<T> {
    items: [(usize, T); 2],
    len: usize,
}

impl<T: Copy> Couplings<T> {
    fn one(v: usize, c: T) -> Self {
        Self {
            items: [(v, c), (v, c)],
            len: 1,
        }
    }

    fn push(&mut self, v: usize, c: T) {
        self.items[self.len] = (v, c);
        self.len += 1;
    }

    fn as_slice(&self) -> &[(usize, T)] {
        &self.items[..self.len]
    }
}

#[derive(Clone, Debug)]
pub struct ChainFactor<T: ComplexField> {
    n: usize,
    nv: usize,
    chains: Vec<Chain>,
    pivots: Vec<T>,
    next: Vec<T>,
    couplings: Vec<Couplings<T>>,
    schur: DMatrix<T>,
    schur_lu: nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<T: ComplexField<RealField = f64> + Copy> ChainFactor<T> {
    pub fn new(mesh: &Mesh, a: &MeshMatrix<T>) -> Result<Self> {
        let n = mesh.node_count();
        if a.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: a.dim(),
            });
        }
        let nv = mesh.vertex_node_count();
        let mut schur = DMatrix::<T>::zeros(nv, nv);
        for v in 0..nv {
            schur[(v, v)] = a.diag[v];
        }
        let ni = n - nv;
        let mut pivots = vec![T::zero(); ni];
        let mut next = vec![T::zero(); ni];
        let mut couplings = Vec::with_capacity(ni);
        let mut chains = Vec::with_capacity(mesh.graph().edge_count());

        for (ei, edge) in mesh.graph().edges().iter().enumerate() {
            let e = EdgeId(ei);
            let els = mesh.edge_elements(e);
            let (va, vb) = (edge.a.0, edge.b.0);
            let m = mesh.subdivisions()[ei] - 1;
            let first = mesh.first_interior(e);
            chains.push(Chain { first, len: m });
            if m == 0 {
                if va != vb {
                    let o = a.off[els.start];
                    schur[(va, vb)] += o;
                    schur[(vb, va)] += o;
                }
                continue;
            }
            let mut d = a.diag[first];
            let mut cpl = Couplings::one(va, a.off[els.start]);
            for k in 0..m {
                let node = first + k;
                let nxt = if k + 1 == m {
                    cpl.push(vb, a.off[els.start + m]);
                    T::zero()
                } else {
                    a.off[els.start + k + 1]
                };
                let scale = a.diag[node].modulus().max(f64::MIN_POSITIVE);
                if d.modulus() <= PIVOT_RTOL * scale {
                    return Err(Error::SingularPivot {
                        index: node,
                        magnitude: d.modulus(),
                    });
                }
                for &(vi, ci) in cpl.as_slice() {
                    for &(vj, cj) in cpl.as_slice() {
                        schur[(vi, vj)] -= ci * cj / d;
                    }
                }
                pivots[node - nv] = d;
                next[node - nv] = nxt;
                couplings.push(cpl.clone());
                if k + 1 < m {
                    let factor = nxt / d;
                    d = a.diag[node + 1] - nxt * factor;
                    let (v0, c0) = cpl.as_slice()[0];
                    cpl = Couplings::one(v0, -(c0 * factor));
                }
            }
        }
        let schur_lu = schur.clone().lu();
        if !schur_lu.is_invertible() {
            return Err(Error::SingularPivot {
                index: 0,
                magnitude: 0.0,
            });
        }
        Ok(Self {
            n,
            nv,
            chains,
            pivots,
            next,
            couplings,
            schur,
            schur_lu,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &DVector<T>) -> DVector<T> {
        let nv = self.nv;
        let mut y = rhs.clone();
        for ch in &self.chains {
            for k in 0..ch.len {
                let node = ch.first + k;
                let i = node - nv;
                let r = y[node];
                let d = self.pivots[i];
                if k + 1 < ch.len {
                    y[node + 1] -= self.next[i] / d * r;
                }
                for &(v, c) in self.couplings[i].as_slice() {
                    y[v] -= c / d * r;
                }
            }
        }
        let yv = y.rows(0, nv).into_owned();
        let xv = self
            .schur_lu
            .solve(&yv)
            .expect("vertex block checked invertible at factorization");
        y.rows_mut(0, nv).copy_from(&xv);
        for ch in &self.chains {
            for k in (0..ch.len).rev() {
                let node = ch.first + k;
                let i = node - nv;
                let mut val = y[node];
                if k + 1 < ch.len {
                    val -= self.next[i] * y[node + 1];
                }
                for &(v, c) in self.couplings[i].as_slice() {
                    val -= c * y[v];
                }
                y[node] = val / self.pivots[i];
            }
        }
        y
    }
}

impl ChainFactor<f64> {
    /// Sylvester inertia `(negative, zero, positive)` of the factored real
    /// symmetric matrix. Values within `zero_tol·scale` count as zero.
    pub fn inertia(&self, zero_tol: f64) -> (usize, usize, usize) {
        let mut neg = 0;
        let mut zero = 0;
        let mut pos = 0;
        let mut classify = |x: f64, scale: f64| {
            if x.abs() <= zero_tol * scale {
                zero += 1;
            } else if x < 0.0 {
                neg += 1;
            } else {
                pos += 1;
            }
        };
        let pscale = self.pivots.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        for &p in &self.pivots {
            classify(p, pscale);
        }
        let eig = SymmetricEigen::new(self.schur.clone()).eigenvalues;
        let sscale = eig.amax();
        for &x in eig.iter() {
            classify(x, sscale);
        }
        (neg, zero, pos)
    }
}

/// Generalized symmetric-definite eigenproblem `A x = θ B x` solved densely
/// through the Cholesky factor of `B`. Eigenvalues ascending, eigenvectors
/// `B`-orthonormal (columns).
pub fn dense_generalized_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let chol = b.clone().cholesky().ok_or_else(|| {
        Error::InvalidParameter("generalized eigenproblem: B is not positive definite".into())
    })?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::InvalidParameter("singular Cholesky factor".into()))?;
    let mut c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::InvalidParameter("singular Cholesky factor".into()))?;
    c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut y = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        y.set_column(col, &eig.eigenvectors.column(i));
    }
    let vectors = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::InvalidParameter("singular Cholesky factor".into()))?;
    Ok((values, vectors))
}

/// Options for [`subspace_smallest`].
#[derive(Clone, Debug)]
pub struct SubspaceOptions {
    /// `A + shift·B` must be positive definite.
    pub shift: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// A known exact eigenpair `(B-normalized vector, eigenvalue)` kept out of
    /// the iteration and prepended to the result.
    pub deflate: Option<(DVector<f64>, f64)>,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SubspaceResult {
    pub values: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
    pub iterations: usize,
}

/// The `k` smallest eigenpairs of `A x = θ B x` by shift-invert block
/// inverse iteration with Rayleigh–Ritz extraction.
pub fn subspace_smallest(
    mesh: &Mesh,
    a: &MeshMatrix<f64>,
    b: &MeshMatrix<f64>,
    k: usize,
    opts: &SubspaceOptions,
) -> Result<SubspaceResult> {
    let n = a.dim();
    let deflated = usize::from(opts.deflate.is_some());
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("requested {k} eigenpairs of a {n}-dimensional pencil")));
    }
    let k_free = k - deflated;
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    if let Some((v, lambda)) = &opts.deflate {
        values.push(*lambda);
        vectors.push(v.clone());
    }
    if k_free == 0 {
        return Ok(SubspaceResult {
            values,
            vectors,
            iterations: 0,
        });
    }
    let block = (k_free + k_free.max(6)).min(n - deflated);
    let shifted = a.combine(1.0, b, opts.shift);
    let factor = ChainFactor::new(mesh, &shifted)?;
    let (neg, zero, _) = factor.inertia(0.0);
    if neg + zero > 0 {
        return Err(Error::InvalidParameter(format!(
            "shift {} does not make the pencil positive definite",
            opts.shift
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<DVector<f64>> = (0..block)
        .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    b_orthonormalize(b, &mut basis, opts.deflate.as_ref().map(|d| &d.0), &mut rng);

    let mut last_max_res = f64::INFINITY;
    let mut best = (f64::INFINITY, 0usize);
    for iter in 1..=opts.max_iter {
        let mut z: Vec<DVector<f64>> = basis.iter().map(|x| factor.solve(&b.apply(x))).collect();
        b_orthonormalize(b, &mut z, opts.deflate.as_ref().map(|d| &d.0), &mut rng);
        let az: Vec<DVector<f64>> = z.iter().map(|v| a.apply(v)).collect();
        let h = DMatrix::from_fn(block, block, |i, j| 0.5 * (z[i].dot(&az[j]) + z[j].dot(&az[i])));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

        let mut ritz_vecs = Vec::with_capacity(block);
        for &c in &order {
            let mut x = DVector::zeros(n);
            for (j, zj) in z.iter().enumerate() {
                x.axpy(eig.eigenvectors[(j, c)], zj, 1.0);
            }
            ritz_vecs.push(x);
        }
        let mut max_res: f64 = 0.0;
        for (i, x) in ritz_vecs.iter().take(k_free).enumerate() {
            let theta = eig.eigenvalues[order[i]];
            let ax = a.apply(x);
            let bx = b.apply(x);
            let r = &ax - &bx * theta;
            let denom = ax.norm() + theta.abs() * bx.norm() + opts.shift * bx.norm();
            max_res = max_res.max(r.norm() / denom.max(f64::MIN_POSITIVE));
        }
        basis = ritz_vecs;
        last_max_res = max_res;
        if max_res < 0.5 * best.0 {
            best = (max_res, iter);
        }
        // round-off floor: accept a stalled residual close to the target
        let stalled = iter - best.1 > 30 && max_res <= 1e3 * opts.tol;
        if max_res <= opts.tol || stalled {
            for (i, x) in basis.iter().take(k_free).enumerate() {
                values.push(eig.eigenvalues[order[i]]);
                vectors.push(x.clone());
            }
            return Ok(SubspaceResult {
                values,
                vectors,
                iterations: iter,
            });
        }
    }
    Err(Error::EigenNonConvergence {
        iterations: opts.max_iter,
        max_residual: last_max_res,
    })
}

/// Modified Gram–Schmidt (twice) in the `B` inner product, optionally
/// against a fixed `B`-unit vector. Collapsed columns are re-randomized.
fn b_orthonormalize(
    b: &MeshMatrix<f64>,
    vs: &mut [DVector<f64>],
    against: Option<&DVector<f64>>,
    rng: &mut ChaCha8Rng,
) {
    let n = b.dim();
    for j in 0..vs.len() {
        for attempt in 0..3 {
            let before = b.form(&vs[j]).max(0.0).sqrt();
            for _ in 0..2 {
                if let Some(c) = against {
                    let coef = b.bilinear(c, &vs[j]);
                    vs[j].axpy(-coef, c, 1.0);
                }
                for i in 0..j {
                    let (head, tail) = vs.split_at_mut(j);
                    let coef = b.bilinear(&head[i], &tail[0]);
                    tail[0].axpy(-coef, &head[i], 1.0);
                }
            }
            let norm = b.form(&vs[j]).max(0.0).sqrt();
            if norm > 1e-10 * before && norm > 0.0 {
                vs[j] /= norm;
                break;
            }
            assert!(attempt < 2, "could not extend a B-orthonormal basis");
            vs[j] = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        }
    }
}

/// Solves with a real mesh matrix, falling back to dense LU when the chain
/// elimination meets a tiny pivot (indefinite Jacobians).
pub fn solve_real(mesh: &Mesh, a: &MeshMatrix<f64>, rhs: &[&DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    match ChainFactor::new(mesh, a) {
        Ok(f) => Ok(rhs.iter().map(|r| f.solve(r)).collect()),
        Err(Error::SingularPivot { .. }) => {
            let lu = a.to_dense().lu();
            rhs.iter()
                .map(|r| {
                    lu.solve(r).ok_or(Error::SingularPivot {
                        index: 0,
                        magnitude: 0.0,
                    })
                })
                .collect()
        }
        Err(e) => Err(e),
    }
}
