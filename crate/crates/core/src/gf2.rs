//! Dense bit-packed GF(2) matrices and row-echelon elimination.

/// A dense GF(2) matrix stored row-major in 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        BitMatrix {
            rows,
            cols,
            words_per_row,
            data: vec![0; rows * words_per_row],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        let w = self.data[row * self.words_per_row + col / 64];
        (w >> (col % 64)) & 1 == 1
    }

    /// Adds one (mod 2) to entry `(row, col)`.
    pub fn toggle(&mut self, row: usize, col: usize) {
        self.data[row * self.words_per_row + col / 64] ^= 1 << (col % 64);
    }

    fn row(&self, row: usize) -> &[u64] {
        &self.data[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let w = self.words_per_row;
        for k in 0..w {
            self.data.swap(a * w + k, b * w + k);
        }
    }

    /// `row[dst] ^= row[src]`, touching only words at or after `from_word`.
    fn xor_row_into(&mut self, src: usize, dst: usize, from_word: usize) {
        let w = self.words_per_row;
        let (s, d) = (src * w, dst * w);
        for k in from_word..w {
            let v = self.data[s + k];
            self.data[d + k] ^= v;
        }
    }

    /// Parity of `row . x` where `x` is given as one bit per byte.
    fn dot(&self, row: usize, x: &[u8]) -> u8 {
        let mut acc = 0u8;
        for (k, &word) in self.row(row).iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                acc ^= x[k * 64 + b];
                bits &= bits - 1;
            }
        }
        acc
    }
}

/// Row-echelon form of a parity-check matrix, ready for sampling kernel vectors.
#[derive(Debug, Clone)]
pub struct EchelonForm {
    matrix: BitMatrix,
    /// Pivot column of each of the first `rank` rows, strictly increasing.
    pivots: Vec<usize>,
    free: Vec<usize>,
}

impl EchelonForm {
    /// Gaussian elimination over GF(2). Columns are visited left to right; the
    /// pivot for a column is the first row at or below the current position
    /// with a one in that column.
    pub fn new(mut matrix: BitMatrix) -> Self {
        let (rows, cols) = (matrix.rows, matrix.cols);
        let mut pivots = Vec::new();
        let mut free = Vec::new();
        let mut next = 0;
        for col in 0..cols {
            if next == rows {
                free.push(col);
                continue;
            }
            let Some(p) = (next..rows).find(|&r| matrix.get(r, col)) else {
                free.push(col);
                continue;
            };
            matrix.swap_rows(next, p);
            let from = col / 64;
            for r in next + 1..rows {
                if matrix.get(r, col) {
                    matrix.xor_row_into(next, r, from);
                }
            }
            pivots.push(col);
            next += 1;
        }
        EchelonForm {
            matrix,
            pivots,
            free,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Columns without a pivot; their values can be chosen freely.
    pub fn free_columns(&self) -> &[usize] {
        &self.free
    }

    /// Completes an assignment of the free columns to a kernel vector.
    ///
    /// `free_values[k]` is the value of `free_columns()[k]`.
    pub fn kernel_vector(&self, free_values: &[u8]) -> Vec<u8> {
        assert_eq!(free_values.len(), self.free.len());
        let mut x = vec![0u8; self.matrix.cols];
        for (&c, &v) in self.free.iter().zip(free_values) {
            x[c] = v & 1;
        }
        // Back substitution: every row is zero left of its pivot, so solving
        // the rows bottom-up only reads already-determined entries.
        for (row, &pc) in self.pivots.iter().enumerate().rev() {
            x[pc] = 0;
            x[pc] = self.matrix.dot(row, &x);
        }
        x
    }
}
