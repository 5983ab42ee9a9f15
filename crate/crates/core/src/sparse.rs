//! Compressed-row sparse matrices sharing the node-adjacency pattern of a mesh.

use std::sync::Arc;

use crate::mesh::SurfaceMesh;

/// Row offsets and sorted column indices of a symmetric sparsity pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
}

impl Pattern {
    /// Node adjacency (including the diagonal) of a triangle mesh.
    pub fn from_mesh(mesh: &SurfaceMesh) -> Self {
        let n = mesh.node_count();
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for tri in &mesh.triangles {
            for &a in tri {
                for &b in tri {
                    rows[a].push(b);
                }
            }
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            col_indices.extend(row);
            row_offsets.push(col_indices.len());
        }
        Self { row_offsets, col_indices }
    }

    pub fn dim(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    /// Position of entry `(row, col)` in the value array.
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let (lo, hi) = (self.row_offsets[row], self.row_offsets[row + 1]);
        self.col_indices[lo..hi].binary_search(&col).ok().map(|k| lo + k)
    }
}

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn identity(n: usize) -> Self {
        let pattern = Pattern { row_offsets: (0..=n).collect(), col_indices: (0..n).collect() };
        Self { pattern: Arc::new(pattern), values: vec![1.0; n] }
    }

    /// Builds a matrix from dense rows, keeping only nonzero entries.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self { pattern: Arc::new(Pattern { row_offsets, col_indices }), values }
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.find(row, col).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` at `(row, col)`. Panics if the entry is outside the pattern.
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let k = self.pattern.find(row, col).unwrap_or_else(|| panic!("entry ({row}, {col}) not in pattern"));
        self.values[k] += v;
    }

    pub fn add_element(&mut self, nodes: &[usize; 3], local: &[[f64; 3]; 3]) {
        for (a, &i) in nodes.iter().enumerate() {
            for (b, &j) in nodes.iter().enumerate() {
                self.add(i, j, local[a][b]);
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (p.row_offsets[i], p.row_offsets[i + 1]);
            *yi = p.col_indices[lo..hi].iter().zip(&self.values[lo..hi]).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `alpha * self + beta * other` for operators on the same pattern.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern,
            "operators have different sparsity patterns"
        );
        let values = self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + beta * b).collect();
        Self { pattern: self.pattern.clone(), values }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self { pattern: self.pattern.clone(), values: self.values.iter().map(|v| alpha * v).collect() }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let p = &self.pattern;
        (0..self.dim()).all(|i| {
            (p.row_offsets[i]..p.row_offsets[i + 1])
                .all(|k| (self.values[k] - self.get(p.col_indices[k], i)).abs() <= tol)
        })
    }

    /// Largest entrywise difference relative to the larger entry magnitude,
    /// with entries below `floor * max_abs` compared absolutely.
    pub fn max_relative_difference(&self, other: &Self, floor: f64) -> f64 {
        assert_eq!(self.dim(), other.dim());
        let scale = self.max_abs().max(other.max_abs());
        let p = &self.pattern;
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for k in p.row_offsets[i]..p.row_offsets[i + 1] {
                let j = p.col_indices[k];
                let (a, b) = (self.values[k], other.get(i, j));
                let denom = a.abs().max(b.abs()).max(floor * scale);
                if denom > 0.0 {
                    worst = worst.max((a - b).abs() / denom);
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_of_icosahedron() {
        let mesh = SurfaceMesh::icosphere(0).unwrap();
        let p = Pattern::from_mesh(&mesh);
        assert_eq!(p.dim(), 12);
        // Every icosahedron vertex has 5 neighbours.
        assert_eq!(p.nnz(), 12 * 6);
        assert!(p.find(0, 0).is_some());
        assert!(p.find(0, 3).is_none());
    }

    #[test]
    fn matvec_and_combine() {
        let a = SparseOperator::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 3.0]);
        let b = a.combine(2.0, &a, -1.0);
        assert_eq!(b.values(), a.values());
        assert!(a.is_symmetric(0.0));
        assert_eq!(a.bilinear(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(a.diagonal(), vec![2.0, 2.0]);
    }
}
