use super::Matrix;

/// Density at or below which [`InputMatrix::auto`] stores rows sparsely.
pub const SPARSE_DENSITY: f64 = 0.1;

/// Row-compressed non-zero entries of a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRows {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    pub fn from_dense(m: &Matrix) -> Self {
        let mut indptr = Vec::with_capacity(m.rows() + 1);
        let (mut indices, mut values) = (Vec::new(), Vec::new());
        indptr.push(0);
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { rows: m.rows(), cols: m.cols(), indptr, indices, values }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m.set(i, self.indices[k], self.values[k]);
            }
        }
        m
    }

    /// `S · b` where `S` has this pattern and the entries `values`.
    pub(crate) fn matmul_with(&self, values: &[f64], b: &Matrix) -> Matrix {
        debug_assert_eq!(values.len(), self.nnz());
        let mut out = Matrix::zeros(self.rows, b.cols());
        for i in 0..self.rows {
            let out_row = out.row_mut(i);
            let range = self.indptr[i]..self.indptr[i + 1];
            for (&j, &v) in self.indices[range.clone()].iter().zip(&values[range]) {
                for (o, w) in out_row.iter_mut().zip(b.row(j)) {
                    *o += v * w;
                }
            }
        }
        out
    }

    /// `Sᵀ · g` where `S` has this pattern and the entries `values`.
    pub(crate) fn t_matmul_with(&self, values: &[f64], g: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.cols, g.cols());
        for i in 0..self.rows {
            let g_row = g.row(i);
            let range = self.indptr[i]..self.indptr[i + 1];
            for (&j, &v) in self.indices[range.clone()].iter().zip(&values[range]) {
                for (o, w) in out.row_mut(j).iter_mut().zip(g_row) {
                    *o += v * w;
                }
            }
        }
        out
    }
}

/// Borrowed constant input to [`super::Tape::input_linear`].
#[derive(Clone, Copy, Debug)]
pub enum Input<'a> {
    Dense(&'a Matrix),
    Sparse(&'a SparseRows),
}

impl Input<'_> {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Input::Dense(m) => m.shape(),
            Input::Sparse(s) => s.shape(),
        }
    }
}

/// Owned input matrix in whichever layout suits its density.
#[derive(Clone, Debug, PartialEq)]
pub enum InputMatrix {
    Dense(Matrix),
    Sparse(SparseRows),
}

impl InputMatrix {
    /// Sparse when at most [`SPARSE_DENSITY`] of the entries are non-zero.
    pub fn auto(m: &Matrix) -> Self {
        let nnz = m.data().iter().filter(|&&v| v != 0.0).count();
        if m.is_empty() || nnz as f64 > SPARSE_DENSITY * m.len() as f64 {
            Self::Dense(m.clone())
        } else {
            Self::Sparse(SparseRows::from_dense(m))
        }
    }

    pub fn as_input(&self) -> Input<'_> {
        match self {
            Self::Dense(m) => Input::Dense(m),
            Self::Sparse(s) => Input::Sparse(s),
        }
    }
}
