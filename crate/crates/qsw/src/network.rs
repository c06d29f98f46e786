//! Network topologies, the walk Hamiltonian and golden-rule hopping rates.
//!
//! Each node `k` of an undirected graph carries a basis vector `|k>`. The
//! Hamiltonian of the coherent walk is the connectivity matrix of the graph
//! (Laplacian or adjacency convention), and the incoherent hopping rates
//! follow Fermi's golden rule, `rate(n -> m) = |<m|H0|n>|^2` with the
//! proportionality constant fixed to 1.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::Write;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QswError, Result};

/// Hermiticity tolerance for [`HermitianMatrix`].
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Largest Sierpinski generation accepted by [`make_sierpinski`].
/// Generation 8 already has 3282 nodes; dense propagation beyond that is
/// outside desk scale.
pub const MAX_SIERPINSKI_GENERATION: u32 = 8;

/// Which connectivity matrix serves as the walk Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Degree on the diagonal, -1 per edge. Default.
    #[default]
    Laplacian,
    /// +1 per edge, zero diagonal.
    Adjacency,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Convention::Laplacian => write!(f, "laplacian"),
            Convention::Adjacency => write!(f, "adjacency"),
        }
    }
}

/// Generator label attached to a [`Network`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Chain,
    Sierpinski,
    Dimer,
    Custom,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Chain => write!(f, "chain"),
            Topology::Sierpinski => write!(f, "sierpinski"),
            Topology::Dimer => write!(f, "dimer"),
            Topology::Custom => write!(f, "custom"),
        }
    }
}

/// Connected undirected graph with deterministic node indexing.
///
/// Invariants enforced on construction: no self-loops, no duplicate edges,
/// all endpoints in range, and the graph is connected.
#[derive(Debug, Clone)]
pub struct Network {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    topology: Topology,
    generation: Option<u32>,
    corners: Vec<usize>,
}

impl Network {
    /// Build a network from an edge list, validating all invariants.
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize)>, topology: Topology) -> Result<Self> {
        let mut normalized = BTreeSet::new();
        for &(a, b) in &edges {
            if a == b {
                return Err(QswError::InvalidNetwork(format!("self-loop at node {a}")));
            }
            if a >= n_nodes || b >= n_nodes {
                return Err(QswError::InvalidNetwork(format!(
                    "edge ({a}, {b}) out of range for {n_nodes} nodes"
                )));
            }
            let e = (a.min(b), a.max(b));
            if !normalized.insert(e) {
                return Err(QswError::InvalidNetwork(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
        }
        let net = Network {
            n_nodes,
            edges: normalized.into_iter().collect(),
            topology,
            generation: None,
            corners: Vec::new(),
        };
        if !net.is_connected() {
            return Err(QswError::InvalidNetwork(
                "graph is not connected".to_string(),
            ));
        }
        Ok(net)
    }

    /// Two nodes joined by one edge, tagged as the dimer.
    pub fn dimer() -> Network {
        Network {
            n_nodes: 2,
            edges: vec![(0, 1)],
            topology: Topology::Dimer,
            generation: None,
            corners: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Edges as sorted `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Gasket generation, when this network was built by [`make_sierpinski`].
    pub fn generation(&self) -> Option<u32> {
        self.generation
    }

    /// Apex (corner) node indices of the gasket; empty for other topologies.
    pub fn corners(&self) -> &[usize] {
        &self.corners
    }

    /// Node degrees.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_nodes];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// BFS reachability from node 0.
    pub fn is_connected(&self) -> bool {
        if self.n_nodes == 0 {
            return false;
        }
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n_nodes];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n_nodes
    }

    /// Write the edge list as text: a header line `# nodes=N topology=TAG`
    /// followed by one `i j` pair per line.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# nodes={} topology={}", self.n_nodes, self.topology)?;
        for &(a, b) in &self.edges {
            writeln!(w, "{a} {b}")?;
        }
        Ok(())
    }
}

/// Path graph on `n` nodes, edges `(i, i+1)`.
pub fn make_chain(n: usize) -> Result<Network> {
    if n < 2 {
        return Err(QswError::InvalidNetwork(format!(
            "chain needs at least 2 nodes, got {n}"
        )));
    }
    let edges = (0..n - 1).map(|i| (i, i + 1)).collect();
    Ok(Network {
        n_nodes: n,
        edges,
        topology: Topology::Chain,
        generation: None,
        corners: Vec::new(),
    })
}

/// Number of nodes of the generation-`g` Sierpinski gasket,
/// `3 (3^{g-1} + 1) / 2`.
pub fn sierpinski_node_count(g: u32) -> usize {
    3 * (3usize.pow(g - 1) + 1) / 2
}

/// Sierpinski gasket of generation `g` (`g = 1` is a single triangle),
/// capped at [`MAX_SIERPINSKI_GENERATION`].
pub fn make_sierpinski(g: u32) -> Result<Network> {
    make_sierpinski_capped(g, MAX_SIERPINSKI_GENERATION)
}

/// As [`make_sierpinski`] with an explicit generation cap.
///
/// The gasket is built by recursive midpoint subdivision on an integer
/// two-corner lattice basis, so node deduplication is exact. Nodes are
/// indexed lexicographically by their lattice coordinates.
pub fn make_sierpinski_capped(g: u32, max_generation: u32) -> Result<Network> {
    if g < 1 {
        return Err(QswError::InvalidNetwork(
            "gasket generation must be >= 1".to_string(),
        ));
    }
    if g > max_generation {
        return Err(QswError::InvalidNetwork(format!(
            "gasket generation {g} exceeds cap {max_generation}"
        )));
    }
    let depth = g - 1;
    let side = 1i64 << depth;
    // Coordinates live in the basis of the two triangle edge vectors; all
    // midpoints of points with coordinates divisible by 2^k stay integral.
    let mut nodes: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut edges: BTreeSet<((i64, i64), (i64, i64))> = BTreeSet::new();

    type P = (i64, i64);
    fn mid(a: P, b: P) -> P {
        ((a.0 + b.0) / 2, (a.1 + b.1) / 2)
    }
    fn subdivide(
        a: P,
        b: P,
        c: P,
        depth: u32,
        nodes: &mut BTreeMap<P, usize>,
        edges: &mut BTreeSet<(P, P)>,
    ) {
        if depth == 0 {
            for p in [a, b, c] {
                nodes.entry(p).or_insert(0);
            }
            for (p, q) in [(a, b), (b, c), (a, c)] {
                edges.insert((p.min(q), p.max(q)));
            }
        } else {
            let mab = mid(a, b);
            let mbc = mid(b, c);
            let mac = mid(a, c);
            subdivide(a, mab, mac, depth - 1, nodes, edges);
            subdivide(mab, b, mbc, depth - 1, nodes, edges);
            subdivide(mac, mbc, c, depth - 1, nodes, edges);
        }
    }

    let corners = [(0, 0), (side, 0), (0, side)];
    subdivide(
        corners[0], corners[1], corners[2],
        depth,
        &mut nodes,
        &mut edges,
    );

    // Lexicographic index assignment; BTreeMap iterates in sorted order.
    for (k, (_, idx)) in nodes.iter_mut().enumerate() {
        *idx = k;
    }
    let n_nodes = nodes.len();
    debug_assert_eq!(n_nodes, sierpinski_node_count(g));

    let edge_indices = edges
        .iter()
        .map(|&(p, q)| {
            let (i, j) = (nodes[&p], nodes[&q]);
            (i.min(j), i.max(j))
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    Ok(Network {
        n_nodes,
        edges: edge_indices,
        topology: Topology::Sierpinski,
        generation: Some(g),
        corners: corners.iter().map(|p| nodes[p]).collect(),
    })
}

/// Dense complex matrix with an enforced Hermiticity contract.
#[derive(Debug, Clone)]
pub struct HermitianMatrix {
    entries: Array2<Complex64>,
    // Cached real/imaginary planes; `im` is None when exactly real.
    re: Array2<f64>,
    im: Option<Array2<f64>>,
}

impl HermitianMatrix {
    /// Validate squareness and Hermiticity (tolerance 1e-12).
    pub fn new(entries: Array2<Complex64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(QswError::DimensionMismatch(format!(
                "matrix is {r}x{c}, expected square"
            )));
        }
        let mut dev: f64 = 0.0;
        for i in 0..r {
            for j in i..r {
                dev = dev.max((entries[(i, j)] - entries[(j, i)].conj()).norm());
            }
        }
        if dev > HERMITICITY_TOL {
            return Err(QswError::NotHermitian {
                deviation: dev,
                tolerance: HERMITICITY_TOL,
            });
        }
        let re = entries.mapv(|z| z.re);
        let im_plane = entries.mapv(|z| z.im);
        let im = if im_plane.iter().all(|&x| x == 0.0) {
            None
        } else {
            Some(im_plane)
        };
        Ok(HermitianMatrix { entries, re, im })
    }

    /// Wrap a real symmetric matrix.
    pub fn from_real(m: Array2<f64>) -> Result<Self> {
        Self::new(m.mapv(|x| Complex64::new(x, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub(crate) fn real_plane(&self) -> &Array2<f64> {
        &self.re
    }

    pub(crate) fn imag_plane(&self) -> Option<&Array2<f64>> {
        self.im.as_ref()
    }
}

/// Nonnegative symmetric hopping rates with zero diagonal.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    rates: Array2<f64>,
}

impl RateMatrix {
    pub fn new(rates: Array2<f64>) -> Result<Self> {
        let (r, c) = rates.dim();
        if r != c {
            return Err(QswError::DimensionMismatch(format!(
                "rate matrix is {r}x{c}, expected square"
            )));
        }
        for i in 0..r {
            if rates[(i, i)] != 0.0 {
                return Err(QswError::InvalidParameter(format!(
                    "rate matrix diagonal entry ({i}, {i}) = {} must be zero",
                    rates[(i, i)]
                )));
            }
            for j in 0..r {
                if rates[(i, j)] < 0.0 {
                    return Err(QswError::InvalidParameter(format!(
                        "negative rate at ({i}, {j})"
                    )));
                }
            }
            for j in i + 1..r {
                if rates[(i, j)] != rates[(j, i)] {
                    return Err(QswError::InvalidParameter(format!(
                        "rate matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(RateMatrix { rates })
    }

    pub fn dim(&self) -> usize {
        self.rates.nrows()
    }

    pub fn rates(&self) -> &Array2<f64> {
        &self.rates
    }

    /// Total outflow rate per node: column sums `gamma_n = sum_m rates[m][n]`.
    pub fn out_rates(&self) -> Array1<f64> {
        self.rates.sum_axis(ndarray::Axis(0))
    }
}

/// Walk Hamiltonian of a network under the given convention.
///
/// Laplacian: `H[i][i] = degree(i)`, `H[i][j] = -1` per edge.
/// Adjacency: `H[i][j] = +1` per edge, zero diagonal.
/// Both are real symmetric.
pub fn hamiltonian(net: &Network, convention: Convention) -> HermitianMatrix {
    let n = net.n_nodes();
    let mut m = Array2::<f64>::zeros((n, n));
    match convention {
        Convention::Laplacian => {
            for &(a, b) in net.edges() {
                m[(a, b)] = -1.0;
                m[(b, a)] = -1.0;
                m[(a, a)] += 1.0;
                m[(b, b)] += 1.0;
            }
        }
        Convention::Adjacency => {
            for &(a, b) in net.edges() {
                m[(a, b)] = 1.0;
                m[(b, a)] = 1.0;
            }
        }
    }
    HermitianMatrix::from_real(m).expect("real symmetric construction is Hermitian")
}

/// Fermi-golden-rule rates from a Hamiltonian:
/// `rates[m][n] = |H[m][n]|^2` off the diagonal, zero on it.
pub fn golden_rule_rates(h: &HermitianMatrix) -> RateMatrix {
    let n = h.dim();
    let mut rates = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                rates[(i, j)] = h.entries()[(i, j)].norm_sqr();
            }
        }
    }
    RateMatrix::new(rates).expect("golden-rule rates are symmetric and nonnegative")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_of_two_is_the_dimer_structure() {
        let net = make_chain(2).unwrap();
        assert_eq!(net.n_nodes(), 2);
        assert_eq!(net.edges(), &[(0, 1)]);
    }

    #[test]
    fn chain_100_has_99_edges() {
        let net = make_chain(100).unwrap();
        assert_eq!(net.n_nodes(), 100);
        assert_eq!(net.edges().len(), 99);
        assert!(net.is_connected());
    }

    #[test]
    fn chain_3_is_a_path() {
        let net = make_chain(3).unwrap();
        assert_eq!(net.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn chain_rejects_single_node() {
        assert!(make_chain(1).is_err());
        assert!(make_chain(0).is_err());
    }

    #[test]
    fn sierpinski_base_case_is_a_triangle() {
        let net = make_sierpinski(1).unwrap();
        assert_eq!(net.n_nodes(), 3);
        assert_eq!(net.edges().len(), 3);
        assert_eq!(net.corners().len(), 3);
    }

    #[test]
    fn sierpinski_g5_has_123_nodes() {
        let net = make_sierpinski(5).unwrap();
        assert_eq!(net.n_nodes(), 123);
    }

    #[test]
    fn sierpinski_g3_has_15_nodes_by_formula_and_construction() {
        assert_eq!(sierpinski_node_count(3), 15);
        let net = make_sierpinski(3).unwrap();
        assert_eq!(net.n_nodes(), 15);
    }

    #[test]
    fn sierpinski_counts_match_closed_formulas() {
        for g in 1..=6u32 {
            let net = make_sierpinski(g).unwrap();
            assert_eq!(net.n_nodes(), sierpinski_node_count(g), "nodes at g={g}");
            assert_eq!(net.edges().len(), 3usize.pow(g), "edges at g={g}");
            assert!(net.is_connected(), "connectivity at g={g}");
        }
    }

    #[test]
    fn sierpinski_rejects_beyond_cap() {
        assert!(make_sierpinski(9).is_err());
        assert!(make_sierpinski_capped(9, 9).is_ok());
        assert!(make_sierpinski(0).is_err());
    }

    #[test]
    fn sierpinski_corners_have_degree_two() {
        let net = make_sierpinski(4).unwrap();
        let deg = net.degrees();
        for &c in net.corners() {
            assert_eq!(deg[c], 2);
        }
    }

    #[test]
    fn laplacian_of_chain_3() {
        let net = make_chain(3).unwrap();
        let h = hamiltonian(&net, Convention::Laplacian);
        let expect = [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h.entries()[(i, j)], Complex64::new(expect[i][j], 0.0));
            }
        }
        // Laplacian rows sum to zero.
        for i in 0..3 {
            let s: Complex64 = (0..3).map(|j| h.entries()[(i, j)]).sum();
            assert_eq!(s, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn adjacency_of_dimer() {
        let net = Network::dimer();
        let h = hamiltonian(&net, Convention::Adjacency);
        assert_eq!(h.entries()[(0, 0)], Complex64::new(0.0, 0.0));
        assert_eq!(h.entries()[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(h.entries()[(1, 0)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn golden_rule_on_chain_3_laplacian() {
        let net = make_chain(3).unwrap();
        let h = hamiltonian(&net, Convention::Laplacian);
        let rates = golden_rule_rates(&h);
        assert_eq!(rates.rates()[(0, 1)], 1.0);
        assert_eq!(rates.rates()[(1, 0)], 1.0);
        assert_eq!(rates.rates()[(0, 2)], 0.0);
        assert_eq!(rates.rates()[(0, 0)], 0.0);
    }

    #[test]
    fn golden_rule_on_dimer_adjacency() {
        let h = hamiltonian(&Network::dimer(), Convention::Adjacency);
        let rates = golden_rule_rates(&h);
        assert_eq!(rates.rates()[(0, 1)], 1.0);
        assert_eq!(rates.rates()[(1, 0)], 1.0);
    }

    #[test]
    fn rates_are_convention_independent_for_unit_edges() {
        for net in [make_chain(10).unwrap(), make_sierpinski(3).unwrap()] {
            let rl = golden_rule_rates(&hamiltonian(&net, Convention::Laplacian));
            let ra = golden_rule_rates(&hamiltonian(&net, Convention::Adjacency));
            assert_eq!(rl.rates(), ra.rates());
            // One unit rate per edge, zero elsewhere.
            let total: f64 = rl.rates().sum();
            assert_eq!(total, 2.0 * net.edges().len() as f64);
        }
    }

    #[test]
    fn network_rejects_self_loops_duplicates_and_disconnection() {
        assert!(Network::new(3, vec![(0, 0)], Topology::Custom).is_err());
        assert!(Network::new(3, vec![(0, 1), (1, 0), (1, 2)], Topology::Custom).is_err());
        assert!(Network::new(4, vec![(0, 1), (2, 3)], Topology::Custom).is_err());
        assert!(Network::new(3, vec![(0, 1), (1, 5)], Topology::Custom).is_err());
        assert!(Network::new(3, vec![(0, 1), (1, 2)], Topology::Custom).is_ok());
    }

    #[test]
    fn edge_list_export_format() {
        let net = make_chain(3).unwrap();
        let mut buf = Vec::new();
        net.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# nodes=3 topology=chain\n0 1\n1 2\n");
    }

    #[test]
    fn hermitian_matrix_rejects_non_hermitian() {
        let mut m = Array2::<Complex64>::zeros((2, 2));
        m[(0, 1)] = Complex64::new(1.0, 0.5);
        m[(1, 0)] = Complex64::new(1.0, 0.5); // should be the conjugate
        assert!(HermitianMatrix::new(m).is_err());
    }

    #[test]
    fn rate_matrix_rejects_invalid_input() {
        let mut m = Array2::<f64>::zeros((2, 2));
        m[(0, 0)] = 1.0;
        assert!(RateMatrix::new(m).is_err());
        let mut m = Array2::<f64>::zeros((2, 2));
        m[(0, 1)] = -1.0;
        m[(1, 0)] = -1.0;
        assert!(RateMatrix::new(m).is_err());
        let mut m = Array2::<f64>::zeros((2, 2));
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 2.0;
        assert!(RateMatrix::new(m).is_err());
    }
}
