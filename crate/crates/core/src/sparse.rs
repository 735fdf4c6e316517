//! Sparse linear algebra for the finite element systems: a CSR matrix
//! with fixed triangle-derived pattern, a banded LU with partial pivoting
//! on a reverse Cuthill-McKee ordering, and Jacobi-preconditioned
//! BiCGSTAB for large systems.

use std::collections::VecDeque;

/// CSR matrix whose sparsity pattern is the node adjacency of a mesh.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Pattern containing `(i, j)` whenever nodes `i` and `j` share a triangle.
    pub fn from_triangles(n: usize, triangles: &[[usize; 3]]) -> Self {
        let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for t in triangles {
            for &a in t {
                for &b in t {
                    adj[a].push(b);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        let values = vec![0.0; cols.len()];
        Self { n, row_ptr, cols, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Storage slot of entry `(i, j)`; panics if outside the pattern.
    pub fn slot(&self, i: usize, j: usize) -> usize {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        self.row_ptr[i] + row.binary_search(&j).expect("entry outside sparsity pattern")
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn add(&mut self, slot: usize, v: f64) {
        self.values[slot] += v;
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// Replaces row `i` by the identity row.
    pub fn set_identity_row(&mut self, i: usize) {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            self.values[k] = if self.cols[k] == i { 1.0 } else { 0.0 };
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.values[self.slot(i, i)]).collect()
    }

    fn neighbours(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }
}

/// Reverse Cuthill-McKee ordering of the pattern graph. Returns `order`
/// with `order[k]` the original index placed at position `k`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.neighbours(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        // Start each component from its minimum-degree unvisited node,
        // pushed towards the periphery by repeated BFS.
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i)).unwrap();
        let start = pseudo_peripheral(a, seed, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = a.neighbours(v).iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(a: &CsrMatrix, seed: usize, degree: &[usize]) -> usize {
    let mut root = seed;
    let mut depth = 0;
    for _ in 0..8 {
        let (levels, far) = bfs_levels(a, root, degree);
        if levels <= depth {
            break;
        }
        depth = levels;
        root = far;
    }
    root
}

fn bfs_levels(a: &CsrMatrix, root: usize, degree: &[usize]) -> (usize, usize) {
    let mut dist = vec![usize::MAX; a.dim()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut far = root;
    while let Some(v) = queue.pop_front() {
        if dist[v] > dist[far] || (dist[v] == dist[far] && degree[v] < degree[far]) {
            far = v;
        }
        for &w in a.neighbours(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    (dist[far], far)
}

/// Symbolic information for banded factorisations of one pattern.
#[derive(Clone, Debug)]
pub struct BandOrdering {
    order: Vec<usize>,
    position: Vec<usize>,
    bandwidth: usize,
}

impl BandOrdering {
    pub fn new(a: &CsrMatrix) -> Self {
        let order = reverse_cuthill_mckee(a);
        let mut position = vec![0; order.len()];
        for (k, &i) in order.iter().enumerate() {
            position[i] = k;
        }
        let bandwidth = (0..a.dim())
            .flat_map(|i| a.neighbours(i).iter().map(move |&j| (i, j)))
            .map(|(i, j)| position[i].abs_diff(position[j]))
            .max()
            .unwrap_or(0);
        Self { order, position, bandwidth }
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularMatrix;

/// LU factors of a permuted banded matrix with row pivoting.
///
/// Row `k` of the work array stores columns `k - bw ..= k + 2 bw`; the
/// extra `bw` upper diagonals absorb fill from pivoting.
pub struct BandLu<'a> {
    ordering: &'a BandOrdering,
    data: Vec<f64>,
    pivots: Vec<usize>,
    width: usize,
}

impl<'a> BandLu<'a> {
    pub fn factor(a: &CsrMatrix, ordering: &'a BandOrdering) -> Result<Self, SingularMatrix> {
        let n = a.dim();
        let bw = ordering.bandwidth;
        let width = 3 * bw + 1;
        let mut data = vec![0.0; n * width];
        let at = |i: usize, j: usize| i * width + (j + bw - i);
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (pi, pj) = (ordering.position[i], ordering.position[j]);
                data[at(pi, pj)] = v;
            }
        }

        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + bw).min(n - 1);
            let last_col = (k + 2 * bw).min(n - 1);
            let (mut p, mut best) = (k, data[at(k, k)].abs());
            for i in k + 1..=last_row {
                let v = data[at(i, k)].abs();
                if v > best {
                    p = i;
                    best = v;
                }
            }
            if best <= scale * 1e-14 || !best.is_finite() {
                return Err(SingularMatrix);
            }
            pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    data.swap(at(k, j), at(p, j));
                }
            }
            let pivot = data[at(k, k)];
            for i in k + 1..=last_row {
                let l = data[at(i, k)] / pivot;
                data[at(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        data[at(i, j)] -= l * data[at(k, j)];
                    }
                }
            }
        }
        Ok(Self { ordering, data, pivots, width })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let bw = self.ordering.bandwidth;
        let at = |i: usize, j: usize| i * self.width + (j + bw - i);
        let mut y: Vec<f64> = self.ordering.order.iter().map(|&i| rhs[i]).collect();
        for k in 0..n {
            y.swap(k, self.pivots[k]);
            let yk = y[k];
            for i in k + 1..=(k + bw).min(n - 1) {
                y[i] -= self.data[at(i, k)] * yk;
            }
        }
        for k in (0..n).rev() {
            let mut s = y[k];
            for j in k + 1..=(k + 2 * bw).min(n - 1) {
                s -= self.data[at(k, j)] * y[j];
            }
            y[k] = s / self.data[at(k, k)];
        }
        let mut x = vec![0.0; n];
        for (k, &i) in self.ordering.order.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeFailure {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned BiCGSTAB; stops once `||b - Ax|| <= tol ||b||`.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, IterativeFailure> {
    let n = b.len();
    let dinv: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let norm = |x: &[f64]| dot(x, x).sqrt();

    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];

    for it in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            return Err(IterativeFailure { iterations: it, residual: norm(&r) / bnorm });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            phat[i] = dinv[i] * p[i];
        }
        a.mul_vec(&phat, &mut v);
        alpha = rho / dot(&r_hat, &v);
        let mut s = r.clone();
        for i in 0..n {
            s[i] -= alpha * v[i];
        }
        if norm(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok(x);
        }
        for i in 0..n {
            shat[i] = dinv[i] * s[i];
        }
        a.mul_vec(&shat, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= tol * bnorm {
            return Ok(x);
        }
        if omega == 0.0 || !omega.is_finite() {
            return Err(IterativeFailure { iterations: it, residual: norm(&r) / bnorm });
        }
    }
    Err(IterativeFailure { iterations: max_iter, residual: norm(&r) / bnorm })
}
