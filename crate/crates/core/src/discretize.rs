//! Piecewise-linear finite elements on a metric graph.
//!
//! Every edge `e` of length `L_e` is split into `n_e` equal elements. Edge
//! endpoints attached to the same vertex share one global node, so nodal
//! functions are continuous at vertices and the Kirchhoff condition appears
//! as the natural boundary condition of the Dirichlet form; no flux
//! constraint is ever assembled.
//!
//! Global numbering: vertex nodes first (node `v` is vertex `v`), then the
//! interior nodes of edge 0 ordered from endpoint `a` to `b`, then edge 1, ...

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::format::sig;
use crate::metric_graph::{EdgeId, MetricGraph};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeCoord {
    pub edge: EdgeId,
    pub arclength: f64,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    graph: Arc<MetricGraph>,
    subdivisions: Vec<usize>,
    first_interior: Vec<usize>,
    first_element: Vec<usize>,
    pairs: Arc<Vec<[usize; 2]>>,
    widths: Vec<f64>,
    coords: Vec<NodeCoord>,
}

impl Mesh {
    /// `n_e = ceil(L_e / target_h)` elements on each edge.
    pub fn build(graph: &MetricGraph, target_h: f64) -> Result<Arc<Mesh>> {
        if !(target_h.is_finite() && target_h > 0.0) {
            return Err(Error::InvalidParameter(format!("target_h = {target_h} must be positive")));
        }
        let counts = graph
            .edges()
            .iter()
            .map(|e| {
                let ratio = e.length / target_h;
                // absorb round-off such as 0.3 / 0.1 = 3.0000000000000004
                ((ratio * (1.0 - 1e-12)).ceil() as usize).max(1)
            })
            .collect();
        Self::with_subdivisions(graph, counts)
    }

    /// Default resolution: at least eight elements on the shortest edge and
    /// a width no larger than `ℓ/100`.
    pub fn default_target_h(graph: &MetricGraph) -> f64 {
        (graph.min_edge_length() / 8.0).min(graph.total_length() / 100.0)
    }

    pub fn with_subdivisions(graph: &MetricGraph, counts: Vec<usize>) -> Result<Arc<Mesh>> {
        if counts.len() != graph.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: graph.edge_count(),
                actual: counts.len(),
            });
        }
        if counts.contains(&0) {
            return Err(Error::InvalidParameter("every edge needs at least one element".into()));
        }
        let nv = graph.vertex_count();
        let mut coords = Vec::with_capacity(nv + counts.iter().sum::<usize>());
        // vertex nodes are reported on their first incident edge
        for v in graph.vertices() {
            let (i, e) = graph
                .edges()
                .iter()
                .enumerate()
                .find(|(_, e)| e.a == v || e.b == v)
                .expect("connected graph: every vertex has an edge");
            let s = if e.a == v { 0.0 } else { e.length };
            coords.push(NodeCoord {
                edge: EdgeId(i),
                arclength: s,
            });
        }
        let mut first_interior = Vec::with_capacity(counts.len());
        let mut first_element = Vec::with_capacity(counts.len());
        let mut pairs = Vec::new();
        let mut widths = Vec::new();
        let mut next = nv;
        for (i, (e, &n)) in graph.edges().iter().zip(&counts).enumerate() {
            let h = e.length / n as f64;
            first_interior.push(next);
            first_element.push(pairs.len());
            for k in 1..n {
                coords.push(NodeCoord {
                    edge: EdgeId(i),
                    arclength: k as f64 * h,
                });
            }
            let node = |k: usize| -> usize {
                if k == 0 {
                    e.a.0
                } else if k == n {
                    e.b.0
                } else {
                    next + k - 1
                }
            };
            for k in 0..n {
                pairs.push([node(k), node(k + 1)]);
                widths.push(h);
            }
            next += n - 1;
        }
        Ok(Arc::new(Mesh {
            graph: Arc::new(graph.clone()),
            subdivisions: counts,
            first_interior,
            first_element,
            pairs: Arc::new(pairs),
            widths,
            coords,
        }))
    }

    /// Same graph with every subdivision count doubled (nested space).
    pub fn refined(&self) -> Result<Arc<Mesh>> {
        Self::with_subdivisions(&self.graph, self.subdivisions.iter().map(|n| 2 * n).collect())
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn vertex_node_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn element_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn subdivisions(&self) -> &[usize] {
        &self.subdivisions
    }

    pub fn element_nodes(&self, el: usize) -> [usize; 2] {
        self.pairs[el]
    }

    pub fn element_width(&self, el: usize) -> f64 {
        self.widths[el]
    }

    pub fn elements(&self) -> impl Iterator<Item = ([usize; 2], f64)> + '_ {
        self.pairs.iter().copied().zip(self.widths.iter().copied())
    }

    pub fn h_max(&self) -> f64 {
        self.widths.iter().copied().fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.widths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn coord(&self, node: usize) -> NodeCoord {
        self.coords[node]
    }

    /// Global node of the `k`-th point (`0..=n_e`) along edge `e`.
    pub fn edge_node(&self, e: EdgeId, k: usize) -> usize {
        let n = self.subdivisions[e.0];
        let edge = self.graph.edge(e);
        match k {
            0 => edge.a.0,
            k if k == n => edge.b.0,
            k => self.first_interior[e.0] + k - 1,
        }
    }

    /// Element indices of edge `e`, ordered from `a` to `b`.
    pub fn edge_elements(&self, e: EdgeId) -> std::ops::Range<usize> {
        let start = self.first_element[e.0];
        start..start + self.subdivisions[e.0]
    }

    pub fn first_interior(&self, e: EdgeId) -> usize {
        self.first_interior[e.0]
    }

    pub(crate) fn shared_pairs(&self) -> Arc<Vec<[usize; 2]>> {
        Arc::clone(&self.pairs)
    }

    /// Graph distance from `source` to every node along mesh elements.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let n = self.node_count();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for ([i, j], h) in self.elements() {
            adj[i].push((j, h));
            adj[j].push((i, h));
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push((Reverse(OrdF64(0.0)), source));
        while let Some((Reverse(OrdF64(d)), i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            for &(j, h) in &adj[i] {
                let nd = d + h;
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push((Reverse(OrdF64(nd)), j));
                }
            }
        }
        dist
    }
}

#[derive(Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Symmetric matrix with the sparsity pattern of the mesh: a diagonal plus
/// one off-diagonal value per element (the entry coupling its two nodes).
#[derive(Clone, Debug)]
pub struct MeshMatrix<T> {
    pairs: Arc<Vec<[usize; 2]>>,
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

impl<T: ComplexField + Copy> MeshMatrix<T> {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            pairs: mesh.shared_pairs(),
            diag: vec![T::zero(); mesh.node_count()],
            off: vec![T::zero(); mesh.element_count()],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Adds a 2×2 element block `[[d0, o], [o, d1]]`.
    pub fn add_element(&mut self, el: usize, d0: T, d1: T, o: T) {
        let [i, j] = self.pairs[el];
        if i == j {
            self.diag[i] += d0 + d1 + o + o;
        } else {
            self.diag[i] += d0;
            self.diag[j] += d1;
            self.off[el] += o;
        }
    }

    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        let mut y = DVector::from_iterator(x.len(), self.diag.iter().zip(x.iter()).map(|(&d, &v)| d * v));
        for (&[i, j], &o) in self.pairs.iter().zip(&self.off) {
            if i != j {
                y[i] += o * x[j];
                y[j] += o * x[i];
            }
        }
        y
    }

    /// `self·a + other·b` on the shared pattern.
    pub fn combine(&self, a: T, other: &MeshMatrix<T>, b: T) -> MeshMatrix<T> {
        MeshMatrix {
            pairs: Arc::clone(&self.pairs),
            diag: self.diag.iter().zip(&other.diag).map(|(&x, &y)| x * a + y * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(&x, &y)| x * a + y * b).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let n = self.dim();
        let mut m = DMatrix::from_diagonal(&DVector::from_vec(self.diag.clone()));
        for (&[i, j], &o) in self.pairs.iter().zip(&self.off) {
            if i != j {
                m[(i, j)] += o;
                m[(j, i)] += o;
            }
        }
        debug_assert_eq!(m.nrows(), n);
        m
    }

    pub fn pairs(&self) -> &[[usize; 2]] {
        &self.pairs
    }
}

impl MeshMatrix<f64> {
    pub fn to_complex(&self) -> MeshMatrix<Complex64> {
        MeshMatrix {
            pairs: Arc::clone(&self.pairs),
            diag: self.diag.iter().map(|&d| Complex64::new(d, 0.0)).collect(),
            off: self.off.iter().map(|&o| Complex64::new(o, 0.0)).collect(),
        }
    }

    pub fn apply_complex(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        let mut y = DVector::from_iterator(x.len(), self.diag.iter().zip(x.iter()).map(|(&d, &v)| v * d));
        for (&[i, j], &o) in self.pairs.iter().zip(&self.off) {
            if i != j {
                y[i] += x[j] * o;
                y[j] += x[i] * o;
            }
        }
        y
    }

    /// `xᵀAx`.
    pub fn form(&self, x: &DVector<f64>) -> f64 {
        self.bilinear(x, x)
    }

    /// `xᵀAy`.
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let mut s: f64 = self.diag.iter().zip(x.iter().zip(y.iter())).map(|(d, (a, b))| d * a * b).sum();
        for (&[i, j], &o) in self.pairs.iter().zip(&self.off) {
            if i != j {
                s += o * (x[i] * y[j] + x[j] * y[i]);
            }
        }
        s
    }

    /// `Re(xᴴAy)`.
    pub fn bilinear_complex(&self, x: &DVector<Complex64>, y: &DVector<Complex64>) -> f64 {
        let mut s: f64 = self
            .diag
            .iter()
            .zip(x.iter().zip(y.iter()))
            .map(|(d, (a, b))| d * (a.conj() * b).re)
            .sum();
        for (&[i, j], &o) in self.pairs.iter().zip(&self.off) {
            if i != j {
                s += o * ((x[i].conj() * y[j]).re + (x[j].conj() * y[i]).re);
            }
        }
        s
    }

    /// `xᴴAx`, real for symmetric real `A`.
    pub fn form_complex(&self, x: &DVector<Complex64>) -> f64 {
        self.bilinear_complex(x, x)
    }
}

/// Stiffness `K` (Dirichlet form), consistent mass `M` and the lumped mass
/// diagonal.
#[derive(Clone, Debug)]
pub struct AssembledForms {
    pub mesh: Arc<Mesh>,
    pub stiffness: MeshMatrix<f64>,
    pub mass: MeshMatrix<f64>,
    pub lumped_mass: Vec<f64>,
}

impl AssembledForms {
    /// Standard linear-element matrices: `(1/h)[[1,-1],[-1,1]]` and
    /// `(h/6)[[2,1],[1,2]]` per element.
    pub fn assemble(mesh: &Arc<Mesh>) -> Self {
        let mut k = MeshMatrix::zeros(mesh);
        let mut m = MeshMatrix::zeros(mesh);
        let mut lumped = vec![0.0; mesh.node_count()];
        for el in 0..mesh.element_count() {
            let h = mesh.element_width(el);
            k.add_element(el, 1.0 / h, 1.0 / h, -1.0 / h);
            m.add_element(el, h / 3.0, h / 3.0, h / 6.0);
            let [i, j] = mesh.element_nodes(el);
            lumped[i] += 0.5 * h;
            lumped[j] += 0.5 * h;
        }
        Self {
            mesh: Arc::clone(mesh),
            stiffness: k,
            mass: m,
            lumped_mass: lumped,
        }
    }

    pub fn dim(&self) -> usize {
        self.mesh.node_count()
    }

    /// `M·1`, the nodal weights of `∫_G u dx`.
    pub fn mass_weights(&self) -> DVector<f64> {
        self.mass.apply(&DVector::from_element(self.dim(), 1.0))
    }

    /// `∫|u'|²` summed element by element as `|u_j − u_i|²/h`; expanding
    /// `uᴴKu` instead loses about `max|u|²/h²` relative accuracy.
    pub fn dirichlet(&self, u: &DVector<Complex64>) -> f64 {
        self.mesh.elements().map(|([i, j], h)| (u[j] - u[i]).norm_sqr() / h).sum()
    }

    pub fn dirichlet_real(&self, u: &DVector<f64>) -> f64 {
        self.mesh.elements().map(|([i, j], h)| (u[j] - u[i]).powi(2) / h).sum()
    }

    /// `∫_G u dx` for a nodal function.
    pub fn integral(&self, u: &DVector<Complex64>) -> Complex64 {
        let w = self.mass_weights();
        u.iter().zip(w.iter()).map(|(&a, &b)| a * b).sum()
    }
}

/// A continuous piecewise-linear complex function on the mesh.
#[derive(Clone, Debug)]
pub struct GraphFunction {
    mesh: Arc<Mesh>,
    values: DVector<Complex64>,
}

impl GraphFunction {
    pub fn new(mesh: &Arc<Mesh>, values: DVector<Complex64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::DimensionMismatch {
                expected: mesh.node_count(),
                actual: values.len(),
            });
        }
        Ok(Self {
            mesh: Arc::clone(mesh),
            values,
        })
    }

    pub fn real(mesh: &Arc<Mesh>, values: DVector<f64>) -> Result<Self> {
        Self::new(mesh, values.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn constant(mesh: &Arc<Mesh>, c: Complex64) -> Self {
        Self {
            mesh: Arc::clone(mesh),
            values: DVector::from_element(mesh.node_count(), c),
        }
    }

    pub fn zeros(mesh: &Arc<Mesh>) -> Self {
        Self::constant(mesh, Complex64::new(0.0, 0.0))
    }

    /// Nodal interpolant of `f(edge, arclength)`. At vertices the value
    /// from the first incident edge is used, so `f` must be continuous.
    pub fn interpolate(mesh: &Arc<Mesh>, f: impl Fn(EdgeId, f64) -> Complex64) -> Self {
        let values = DVector::from_iterator(
            mesh.node_count(),
            (0..mesh.node_count()).map(|i| {
                let c = mesh.coord(i);
                f(c.edge, c.arclength)
            }),
        );
        Self {
            mesh: Arc::clone(mesh),
            values,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &DVector<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<Complex64> {
        self.values
    }

    pub fn with_values(&self, values: DVector<Complex64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            mesh: Arc::clone(&self.mesh),
            values,
        }
    }

    pub fn re(&self) -> DVector<f64> {
        self.values.map(|z| z.re)
    }

    pub fn im(&self) -> DVector<f64> {
        self.values.map(|z| z.im)
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.with_values(self.values.map(|z| z * c))
    }

    /// `uᴴMu = ‖u‖₂²`.
    pub fn mass(&self, forms: &AssembledForms) -> f64 {
        forms.mass.form_complex(&self.values)
    }

    /// `uᴴKu = ‖u'‖₂²`.
    pub fn dirichlet(&self, forms: &AssembledForms) -> f64 {
        forms.dirichlet(&self.values)
    }

    /// CSV with columns `node,edge,arclength,re,im`; each edge lists all of
    /// its `n_e + 1` points, so vertex nodes appear once per incident edge end.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "node,edge,arclength,re,im")?;
        let g = self.mesh.graph();
        for (i, e) in g.edges().iter().enumerate() {
            let n = self.mesh.subdivisions()[i];
            let h = e.length / n as f64;
            for k in 0..=n {
                let node = self.mesh.edge_node(EdgeId(i), k);
                let z = self.values[node];
                writeln!(w, "{},{},{},{},{}", node, e.label, sig(k as f64 * h), sig(z.re), sig(z.im))?;
            }
        }
        Ok(())
    }

    /// Reads the CSV written by [`GraphFunction::write_csv`]. Repeated nodes
    /// must carry identical values.
    pub fn read_csv<R: BufRead>(mesh: &Arc<Mesh>, r: R) -> Result<Self> {
        let mut values: Vec<Option<Complex64>> = vec![None; mesh.node_count()];
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if idx == 0 || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = |m: &str| Error::Parse {
                line: line_no,
                message: m.to_string(),
            };
            if f.len() != 5 {
                return Err(bad("expected 5 columns"));
            }
            let node: usize = f[0].trim().parse().map_err(|_| bad("invalid node id"))?;
            let re: f64 = f[3].trim().parse().map_err(|_| bad("invalid real part"))?;
            let im: f64 = f[4].trim().parse().map_err(|_| bad("invalid imaginary part"))?;
            let slot = values.get_mut(node).ok_or_else(|| bad("node id out of range"))?;
            let z = Complex64::new(re, im);
            match slot {
                Some(prev) if (*prev - z).norm() > 1e-9 * (1.0 + z.norm()) => {
                    return Err(bad("conflicting values for a shared vertex node"));
                }
                _ => *slot = Some(z),
            }
        }
        let values: Option<Vec<Complex64>> = values.into_iter().collect();
        let values = values.ok_or_else(|| Error::Parse {
            line: 0,
            message: "some nodes have no value".into(),
        })?;
        Self::new(mesh, DVector::from_vec(values))
    }
}

/// Composite Simpson rule per element applied to `|u_h|^p`, where `u_h` is
/// the linear interpolant. Returns `∫_G |u_h|^p dx`.
pub fn lp_integral(mesh: &Mesh, u: &DVector<Complex64>, p: f64) -> f64 {
    mesh.elements()
        .map(|([i, j], h)| {
            let a = u[i].norm();
            let b = u[j].norm();
            let m = ((u[i] + u[j]) * 0.5).norm();
            h / 6.0 * (a.powf(p) + 4.0 * m.powf(p) + b.powf(p))
        })
        .sum()
}

/// `‖u‖_p = (∫_G |u|^p dx)^{1/p}` with the quadrature of [`lp_integral`].
pub fn lp_norm(u: &GraphFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be at least 1")));
    }
    Ok(lp_integral(u.mesh(), u.values(), p).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_graph::MetricGraph;
    use approx::assert_relative_eq;

    #[test]
    fn mesh_counts() {
        let m = Mesh::build(&MetricGraph::interval(1.0).unwrap(), 0.25).unwrap();
        assert_eq!((m.element_count(), m.node_count()), (4, 5));
        let m = Mesh::build(&MetricGraph::circle(1.0).unwrap(), 0.25).unwrap();
        assert_eq!((m.element_count(), m.node_count()), (4, 4));
        let m = Mesh::build(&MetricGraph::dumbbell(1.0, 3.0, 1.0).unwrap(), 0.5).unwrap();
        assert_eq!(m.subdivisions(), &[2, 6, 2]);
        let expected: usize = m.subdivisions().iter().map(|n| n - 1).sum::<usize>() + 2;
        assert_eq!(m.node_count(), expected);
    }

    #[test]
    fn ceiling_absorbs_round_off() {
        let m = Mesh::build(&MetricGraph::interval(0.3).unwrap(), 0.1).unwrap();
        assert_eq!(m.subdivisions(), &[3]);
        assert!(Mesh::build(&MetricGraph::interval(1.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn single_element_matrices() {
        let m = Mesh::build(&MetricGraph::interval(1.0).unwrap(), 1.0).unwrap();
        let f = AssembledForms::assemble(&m);
        let k = f.stiffness.to_dense();
        let mm = f.mass.to_dense();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        assert_relative_eq!(mm, DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0]), epsilon = 1e-15);
    }

    #[test]
    fn constants_in_kernel_and_partition_of_unity() {
        for g in [
            MetricGraph::dumbbell(1.0, 3.0, 1.0).unwrap(),
            MetricGraph::theta(&[1.0, 2.0, 0.5]).unwrap(),
            MetricGraph::circle(1.0).unwrap(),
        ] {
            let mesh = Mesh::build(&g, 0.3).unwrap();
            let f = AssembledForms::assemble(&mesh);
            let ones = DVector::from_element(f.dim(), 1.0);
            assert!(f.stiffness.apply(&ones).amax() < 1e-12);
            assert_relative_eq!(f.mass.form(&ones), g.total_length(), max_relative = 1e-14);
            assert_relative_eq!(f.lumped_mass.iter().sum::<f64>(), g.total_length(), max_relative = 1e-14);
        }
    }

    #[test]
    fn degenerate_loop_elements() {
        // loops with one or two elements produce repeated / self pairs
        for n in [1, 2] {
            let g = MetricGraph::circle(1.0).unwrap();
            let mesh = Mesh::with_subdivisions(&g, vec![n]).unwrap();
            let f = AssembledForms::assemble(&mesh);
            let ones = DVector::from_element(f.dim(), 1.0);
            assert!(f.stiffness.apply(&ones).amax() < 1e-12);
            assert_relative_eq!(f.mass.form(&ones), 1.0, max_relative = 1e-14);
            assert_eq!(f.stiffness.to_dense(), f.stiffness.to_dense().transpose());
        }
    }

    #[test]
    fn lp_norms() {
        let g = MetricGraph::dumbbell(1.0, 3.0, 1.0).unwrap();
        let mesh = Mesh::build(&g, 0.5).unwrap();
        let c = GraphFunction::constant(&mesh, Complex64::new(0.0, -2.0));
        for p in [1.0, 2.0, 3.5, 6.0] {
            assert_relative_eq!(lp_norm(&c, p).unwrap(), 2.0 * 5f64.powf(1.0 / p), max_relative = 1e-13);
        }
        assert!(lp_norm(&c, 0.5).is_err());

        // hat function on one unit element
        let mesh = Mesh::build(&MetricGraph::interval(1.0).unwrap(), 1.0).unwrap();
        let hat = GraphFunction::real(&mesh, DVector::from_vec(vec![0.0, 1.0])).unwrap();
        assert_relative_eq!(lp_norm(&hat, 2.0).unwrap(), (1.0f64 / 3.0).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn simpson_is_exact_for_the_mass() {
        let g = MetricGraph::tadpole(1.3, 0.7).unwrap();
        let mesh = Mesh::build(&g, 0.1).unwrap();
        let f = AssembledForms::assemble(&mesh);
        let u = GraphFunction::interpolate(&mesh, |e, s| Complex64::new((3.0 * s).sin() + e.0 as f64, s * s));
        assert_relative_eq!(lp_norm(&u, 2.0).unwrap().powi(2), u.mass(&f), max_relative = 1e-10);
    }

    #[test]
    fn csv_round_trip() {
        let mesh = Mesh::build(&MetricGraph::dumbbell(1.0, 2.0, 1.0).unwrap(), 0.4).unwrap();
        let v = GraphFunction::constant(&mesh, Complex64::new(0.125, -3.0));
        let mut buf = Vec::new();
        v.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("node,edge,arclength,re,im\n"));
        // subdivisions (3, 5, 3) give 4 + 6 + 4 rows
        assert_eq!(text.lines().count(), 1 + 4 + 6 + 4);
        let back = GraphFunction::read_csv(&mesh, buf.as_slice()).unwrap();
        assert_eq!(back.values(), v.values());

        let bad = "node,edge,arclength,re,im\n0,loop1,0,1,0\n0,bridge,0,2,0\n";
        assert!(GraphFunction::read_csv(&mesh, bad.as_bytes()).is_err());
    }
}
