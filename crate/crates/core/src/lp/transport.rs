use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_AFTER: usize = 50;

/// Dense row-major `I × J` matrix of transport costs.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("cost matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn negated(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }
}

/// `c_ij = cost(x_i, y_j)`.
pub fn cost_matrix(
    m1: &DiscreteMeasure,
    m2: &DiscreteMeasure,
    cost: impl Fn(&[f64], &[f64]) -> f64,
) -> CostMatrix {
    let mut data = Vec::with_capacity(m1.len() * m2.len());
    for x in m1.atoms() {
        for y in m2.atoms() {
            data.push(cost(x, y));
        }
    }
    CostMatrix {
        rows: m1.len(),
        cols: m2.len(),
        data,
    }
}

/// Nonnegative `I × J` matrix with prescribed marginals, stored by its nonzero cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
    entries: Vec<(usize, usize, f64)>,
}

impl Coupling {
    /// Entries are `(i, j, mass)`; cells listed twice are added.
    pub fn new(
        row_marginal: Vec<f64>,
        col_marginal: Vec<f64>,
        entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        let (ni, nj) = (row_marginal.len(), col_marginal.len());
        if let Some(&(i, j, _)) = entries.iter().find(|(i, j, _)| *i >= ni || *j >= nj) {
            return Err(Error::InvalidParameter(format!(
                "cell ({i}, {j}) outside {ni}x{nj} coupling"
            )));
        }
        if entries.iter().any(|e| !(e.2 >= 0.0 && e.2.is_finite())) {
            return Err(Error::InvalidParameter(
                "coupling masses must be finite and nonnegative".into(),
            ));
        }
        let mut entries: Vec<_> = entries.into_iter().filter(|e| e.2 > 0.0).collect();
        entries.sort_by_key(|e| (e.0, e.1));
        entries.dedup_by(|b, a| {
            if a.0 == b.0 && a.1 == b.1 {
                a.2 += b.2;
                true
            } else {
                false
            }
        });
        Ok(Self {
            row_marginal,
            col_marginal,
            entries,
        })
    }

    /// Coupling from a dense row-major mass matrix.
    pub fn from_dense(
        row_marginal: Vec<f64>,
        col_marginal: Vec<f64>,
        masses: &[f64],
    ) -> Result<Self> {
        let nj = col_marginal.len();
        if masses.len() != row_marginal.len() * nj {
            return Err(Error::DimensionMismatch {
                expected: row_marginal.len() * nj,
                found: masses.len(),
            });
        }
        let entries = masses
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, &v)| (k / nj, k % nj, v))
            .collect();
        Self::new(row_marginal, col_marginal, entries)
    }

    pub fn rows(&self) -> usize {
        self.row_marginal.len()
    }

    pub fn cols(&self) -> usize {
        self.col_marginal.len()
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    /// Nonzero cells `(i, j, mass)` sorted by `(i, j)`.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let nj = self.cols();
        let mut out = vec![0.0; self.rows() * nj];
        for &(i, j, v) in &self.entries {
            out[i * nj + j] += v;
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.rows()];
        for &(i, _, v) in &self.entries {
            s[i] += v;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols()];
        for &(_, j, v) in &self.entries {
            s[j] += v;
        }
        s
    }

    /// `max(‖rows − p‖∞, ‖cols − q‖∞)`.
    pub fn marginal_residual(&self) -> f64 {
        let (rows, cols) = (self.row_sums(), self.col_sums());
        let r = rows
            .iter()
            .zip(&self.row_marginal)
            .map(|(a, b)| (a - b).abs());
        let c = cols
            .iter()
            .zip(&self.col_marginal)
            .map(|(a, b)| (a - b).abs());
        r.chain(c).fold(0.0, f64::max)
    }

    /// `Σ π_ij c_ij`.
    pub fn cost(&self, c: &CostMatrix) -> f64 {
        self.entries.iter().map(|&(i, j, v)| v * c.get(i, j)).sum()
    }

    /// Conditional means `m_i = Σ_j π_ij y_j / p_i`.
    pub fn barycenters(&self, targets: &DiscreteMeasure) -> Vec<Vec<f64>> {
        let d = targets.dim();
        let mut m = vec![vec![0.0; d]; self.rows()];
        for &(i, j, v) in &self.entries {
            for (mk, yk) in m[i].iter_mut().zip(targets.atom(j)) {
                *mk += v * yk;
            }
        }
        for (mi, p) in m.iter_mut().zip(&self.row_marginal) {
            mi.iter_mut().for_each(|v| *v /= p);
        }
        m
    }

    /// `max_i ‖Σ_j π_ij (y_j − x_i)‖∞`.
    pub fn martingale_residual(&self, sources: &DiscreteMeasure, targets: &DiscreteMeasure) -> f64 {
        let d = sources.dim();
        let mut acc = vec![vec![0.0; d]; self.rows()];
        for &(i, j, v) in &self.entries {
            let (x, y) = (sources.atom(i), targets.atom(j));
            for k in 0..d {
                acc[i][k] += v * (y[k] - x[k]);
            }
        }
        acc.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Initial basis of the transportation simplex.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StartRule {
    /// Northwest-corner rule on rows and columns in their natural order.
    #[default]
    NorthWest,
    /// Northwest-corner rule with the column order reversed.
    NorthEast,
}

/// Transportation simplex on a fixed pair of marginals.
///
/// The basis survives between calls, so a sequence of cost matrices (as in
/// Frank–Wolfe) is solved from a warm, primal-feasible start.
#[derive(Clone, Debug)]
pub struct TransportSolver {
    p: Vec<f64>,
    q: Vec<f64>,
    /// `I + J − 1` basic cells forming a spanning tree of the bipartite graph.
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    pub pivots: usize,
}

impl TransportSolver {
    pub fn new(p: Vec<f64>, q: Vec<f64>, start: StartRule) -> Result<Self> {
        if p.is_empty() || q.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
        if (sp - sq).abs() > 1e-9 * sp.max(1.0) || p.iter().chain(&q).any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidWeights(
                "marginals must be nonnegative with equal totals".into(),
            ));
        }
        let (cells, flow) = northwest(&p, &q, start);
        Ok(Self {
            p,
            q,
            cells,
            flow,
            pivots: 0,
        })
    }

    pub fn for_measures(
        m1: &DiscreteMeasure,
        m2: &DiscreteMeasure,
        start: StartRule,
    ) -> Result<Self> {
        Self::new(m1.weights().to_vec(), m2.weights().to_vec(), start)
    }

    /// Current basic solution, without optimizing.
    pub fn coupling(&self) -> Coupling {
        let entries = self
            .cells
            .iter()
            .zip(&self.flow)
            .filter(|(_, &f)| f > 0.0)
            .map(|(&(i, j), &f)| (i, j, f))
            .collect();
        Coupling::new(self.p.clone(), self.q.clone(), entries).expect("basis cells are in range")
    }

    /// Optimal coupling for `cost`, starting from the current basis.
    pub fn solve(&mut self, cost: &CostMatrix) -> Result<Coupling> {
        let (ni, nj) = (self.p.len(), self.q.len());
        if cost.rows() != ni || cost.cols() != nj {
            return Err(Error::DimensionMismatch {
                expected: ni * nj,
                found: cost.rows() * cost.cols(),
            });
        }
        let tol = 1e-12 * cost.max_abs().max(1.0);
        let limit = 50 * (ni + nj) * (ni + nj) + 1000;
        let mut degenerate_run = 0;
        let block = ((ni * nj) as f64).sqrt().ceil().max(16.0) as usize;
        let mut cursor = 0;
        let mut tree = Tree::new(ni, nj);
        let mut basic = vec![false; ni * nj];
        for &(i, j) in &self.cells {
            basic[i * nj + j] = true;
        }
        for _ in 0..limit {
            tree.rebuild(&self.cells, cost);
            let (u, v) = (tree.u(), tree.v());
            let bland = degenerate_run >= BLAND_AFTER;
            let reduced = |k: usize| cost.data()[k] - u[k / nj] - v[k % nj];
            let entering = if bland {
                (0..ni * nj).find(|&k| !basic[k] && reduced(k) < -tol)
            } else {
                // block search: best candidate of the first block, from a rotating cursor, that has one
                let total = ni * nj;
                let mut best: Option<(usize, f64)> = None;
                let mut scanned = 0;
                while scanned < total {
                    let end = (scanned + block).min(total);
                    for step in scanned..end {
                        let k = (cursor + step) % total;
                        if basic[k] {
                            continue;
                        }
                        let d = reduced(k);
                        if d < -tol && best.is_none_or(|b| d < b.1) {
                            best = Some((k, d));
                        }
                    }
                    scanned = end;
                    if best.is_some() {
                        cursor = (cursor + scanned) % total;
                        break;
                    }
                }
                best.map(|b| b.0)
            };
            let Some(k) = entering else {
                return Ok(self.coupling());
            };
            let (ei, ej) = (k / nj, k % nj);

            // cycle: entering cell, then the tree path from column ej back to row ei
            let path = tree.path(ni + ej, ei);
            let mut leave: Option<usize> = None;
            for (pos, &c) in path.iter().enumerate() {
                if pos % 2 == 1 {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some(l) => {
                        let (fc, fl) = (self.flow[c], self.flow[l]);
                        if bland {
                            fc < fl
                                || (fc == fl
                                    && cell_index(self.cells[c], nj)
                                        < cell_index(self.cells[l], nj))
                        } else {
                            fc < fl
                        }
                    }
                };
                if better {
                    leave = Some(c);
                }
            }
            let leave = leave.expect("cycle has a decreasing cell");
            let theta = self.flow[leave];
            for (pos, &c) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    self.flow[c] = (self.flow[c] - theta).max(0.0);
                } else {
                    self.flow[c] += theta;
                }
            }
            let (li, lj) = self.cells[leave];
            basic[li * nj + lj] = false;
            basic[ei * nj + ej] = true;
            self.cells[leave] = (ei, ej);
            self.flow[leave] = theta;
            self.pivots += 1;
            degenerate_run = if theta > 0.0 { 0 } else { degenerate_run + 1 };
        }
        Err(Error::Solver(
            "transportation simplex hit its pivot limit".into(),
        ))
    }
}

fn cell_index((i, j): (usize, usize), nj: usize) -> usize {
    i * nj + j
}

fn northwest(p: &[f64], q: &[f64], start: StartRule) -> (Vec<(usize, usize)>, Vec<f64>) {
    let (ni, nj) = (p.len(), q.len());
    let col = |k: usize| match start {
        StartRule::NorthWest => k,
        StartRule::NorthEast => nj - 1 - k,
    };
    let mut supply = p[0];
    let mut demand = q[col(0)];
    let (mut i, mut k) = (0, 0);
    let mut cells = Vec::with_capacity(ni + nj - 1);
    let mut flow = Vec::with_capacity(ni + nj - 1);
    loop {
        let amount = supply.min(demand).max(0.0);
        cells.push((i, col(k)));
        flow.push(amount);
        supply -= amount;
        demand -= amount;
        if i + 1 == ni && k + 1 == nj {
            break;
        }
        // advance exactly one index so the basis stays a spanning tree
        if (supply <= demand && i + 1 < ni) || k + 1 == nj {
            i += 1;
            supply += p[i];
        } else {
            k += 1;
            demand += q[col(k)];
        }
    }
    (cells, flow)
}

/// Spanning tree on `I + J` nodes (rows first, then columns) given by basic cells,
/// rooted at row 0. Buffers are reused across pivots.
struct Tree {
    ni: usize,
    /// CSR adjacency: neighbours of node `a` are `adj[start[a]..start[a + 1]]` as `(node, cell)`.
    start: Vec<usize>,
    adj: Vec<(usize, usize)>,
    parent: Vec<usize>,
    parent_cell: Vec<usize>,
    depth: Vec<usize>,
    /// Row potentials followed by column potentials; `u_0 = 0`, `u_i + v_j = c_ij` on basic cells.
    pot: Vec<f64>,
    queue: Vec<usize>,
}

impl Tree {
    fn new(ni: usize, nj: usize) -> Self {
        let n = ni + nj;
        Self {
            ni,
            start: vec![0; n + 1],
            adj: vec![(0, 0); 2 * (n - 1)],
            parent: vec![usize::MAX; n],
            parent_cell: vec![usize::MAX; n],
            depth: vec![0; n],
            pot: vec![0.0; n],
            queue: Vec::with_capacity(n),
        }
    }

    fn rebuild(&mut self, cells: &[(usize, usize)], cost: &CostMatrix) {
        let (ni, n) = (self.ni, self.parent.len());
        self.start.iter_mut().for_each(|s| *s = 0);
        for &(i, j) in cells {
            self.start[i + 1] += 1;
            self.start[ni + j + 1] += 1;
        }
        for a in 0..n {
            self.start[a + 1] += self.start[a];
        }
        let mut fill = self.start[..n].to_vec();
        for (c, &(i, j)) in cells.iter().enumerate() {
            self.adj[fill[i]] = (ni + j, c);
            fill[i] += 1;
            self.adj[fill[ni + j]] = (i, c);
            fill[ni + j] += 1;
        }
        self.parent.iter_mut().for_each(|p| *p = usize::MAX);
        self.parent[0] = 0;
        self.depth[0] = 0;
        self.pot[0] = 0.0;
        self.queue.clear();
        self.queue.push(0);
        let mut head = 0;
        while head < self.queue.len() {
            let a = self.queue[head];
            head += 1;
            for k in self.start[a]..self.start[a + 1] {
                let (b, c) = self.adj[k];
                if self.parent[b] == usize::MAX {
                    self.parent[b] = a;
                    self.parent_cell[b] = c;
                    self.depth[b] = self.depth[a] + 1;
                    let (i, j) = cells[c];
                    self.pot[b] = cost.get(i, j) - self.pot[a];
                    self.queue.push(b);
                }
            }
        }
    }

    fn u(&self) -> &[f64] {
        &self.pot[..self.ni]
    }

    fn v(&self) -> &[f64] {
        &self.pot[self.ni..]
    }

    /// Cells on the tree path from node `from` to node `to`, in order.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let (mut a, mut b) = (from, to);
        let (mut head, mut tail) = (Vec::new(), Vec::new());
        while self.depth[a] > self.depth[b] {
            head.push(self.parent_cell[a]);
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            tail.push(self.parent_cell[b]);
            b = self.parent[b];
        }
        while a != b {
            head.push(self.parent_cell[a]);
            a = self.parent[a];
            tail.push(self.parent_cell[b]);
            b = self.parent[b];
        }
        head.extend(tail.into_iter().rev());
        head
    }
}

/// Optimal coupling of `m1` and `m2` for the cost matrix `cost`.
pub fn ot_plan(m1: &DiscreteMeasure, m2: &DiscreteMeasure, cost: &CostMatrix) -> Result<Coupling> {
    if cost.rows() != m1.len() || cost.cols() != m2.len() {
        return Err(Error::DimensionMismatch {
            expected: m1.len() * m2.len(),
            found: cost.rows() * cost.cols(),
        });
    }
    TransportSolver::for_measures(m1, m2, StartRule::NorthWest)?.solve(cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum()
    }

    #[test]
    fn identical_measures_stay_put() {
        let m = DiscreteMeasure::uniform_1d(vec![0.0, 1.0]).unwrap();
        let pi = ot_plan(&m, &m, &cost_matrix(&m, &m, sq)).unwrap();
        assert_eq!(pi.entries(), &[(0, 0, 0.5), (1, 1, 0.5)]);
    }

    #[test]
    fn forced_split() {
        let a = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let b = DiscreteMeasure::uniform_1d(vec![-1.0, 1.0]).unwrap();
        let c = cost_matrix(&a, &b, |x, y| (x[0] - y[0]).abs());
        let pi = ot_plan(&a, &b, &c).unwrap();
        assert_eq!(pi.cost(&c), 1.0);
    }

    #[test]
    fn northwest_spans() {
        for start in [StartRule::NorthWest, StartRule::NorthEast] {
            let (cells, flow) = northwest(&[0.5, 0.5], &[0.25, 0.25, 0.5], start);
            assert_eq!(cells.len(), 4);
            assert!((flow.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        // equal partial sums force a degenerate zero cell
        let (cells, flow) = northwest(&[0.5, 0.5], &[0.5, 0.5], StartRule::NorthWest);
        assert_eq!(cells.len(), 3);
        assert!(flow.contains(&0.0));
    }

    #[test]
    fn coupling_bookkeeping() {
        let pi = Coupling::new(
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![(0, 1, 0.25), (0, 1, 0.25), (1, 0, 0.5)],
        )
        .unwrap();
        assert_eq!(pi.entries(), &[(0, 1, 0.5), (1, 0, 0.5)]);
        assert_eq!(pi.marginal_residual(), 0.0);
        assert!(Coupling::new(vec![1.0], vec![1.0], vec![(0, 1, 1.0)]).is_err());
    }
}
