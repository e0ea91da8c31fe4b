//! Three-mode image tensors and their mode-n unfoldings.
//!
//! A [`Tensor3`] holds `n3` images of size `n1 × n2`. Unfoldings put the
//! fibers of the chosen mode in the columns and enumerate the other two
//! modes in the rows, earlier mode varying fastest:
//!
//! | mode | shape           | row index         | column |
//! |------|-----------------|-------------------|--------|
//! | 1    | `(n2·n3) × n1`  | `i3·n2 + i2`      | `i1`   |
//! | 2    | `(n1·n3) × n2`  | `i3·n1 + i1`      | `i2`   |
//! | 3    | `(n1·n2) × n3`  | `i2·n1 + i1`      | `i3`   |

use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    pub fn from_index(m: usize) -> Result<Mode> {
        match m {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            _ => Err(Error::InvalidParameter(format!("mode must be 1, 2 or 3, got {m}"))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Mode::One => 1,
            Mode::Two => 2,
            Mode::Three => 3,
        }
    }
}

/// Dense `n1 × n2 × n3` tensor. Storage is image-major: slab `i3` is
/// contiguous and stored row-major, so entry `(i1, i2, i3)` lives at
/// `(i3·n1 + i1)·n2 + i2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    /// `data` must use the image-major layout described on the type.
    pub fn new(n1: usize, n2: usize, n3: usize, data: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return Err(shape(format!("tensor dimensions must be positive, got {n1}x{n2}x{n3}")));
        }
        if data.len() != n1 * n2 * n3 {
            return Err(shape(format!(
                "{n1}x{n2}x{n3} tensor needs {} entries, got {}",
                n1 * n2 * n3,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite tensor entry".into()));
        }
        Ok(Self {
            dims: (n1, n2, n3),
            data,
        })
    }

    pub fn from_fn(
        n1: usize,
        n2: usize,
        n3: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(n1 * n2 * n3);
        for i3 in 0..n3 {
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    data.push(f(i1, i2, i3));
                }
            }
        }
        Self::new(n1, n2, n3, data)
    }

    /// Stacks equally-sized images along mode 3.
    pub fn from_slabs(slabs: &[Matrix]) -> Result<Self> {
        let first = slabs.first().ok_or_else(|| shape("no slabs"))?;
        let (n1, n2) = first.shape();
        let mut data = Vec::with_capacity(n1 * n2 * slabs.len());
        for (k, s) in slabs.iter().enumerate() {
            if s.shape() != (n1, n2) {
                return Err(shape(format!(
                    "slab {k} is {:?}, expected {:?}",
                    s.shape(),
                    (n1, n2)
                )));
            }
            data.extend_from_slice(s.as_slice());
        }
        Self::new(n1, n2, slabs.len(), data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn n3(&self) -> usize {
        self.dims.2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn offset(&self, i1: usize, i2: usize, i3: usize) -> usize {
        let (n1, n2, _) = self.dims;
        (i3 * n1 + i1) * n2 + i2
    }

    pub fn get(&self, i1: usize, i2: usize, i3: usize) -> f64 {
        self.data[self.offset(i1, i2, i3)]
    }

    fn slab_slice(&self, i3: usize) -> &[f64] {
        let size = self.dims.0 * self.dims.1;
        &self.data[i3 * size..(i3 + 1) * size]
    }

    /// Image `i3` as an `n1 × n2` matrix.
    pub fn slab(&self, i3: usize) -> Matrix {
        Matrix::from_vec_unchecked(self.dims.0, self.dims.1, self.slab_slice(i3).to_vec())
    }
}

pub fn unfold(t: &Tensor3, mode: Mode) -> Matrix {
    let (n1, n2, n3) = t.dims;
    let (rows, cols) = unfolded_shape(t.dims, mode);
    let mut out = vec![0.0; rows * cols];
    for i3 in 0..n3 {
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let (r, c) = match mode {
                    Mode::One => (i3 * n2 + i2, i1),
                    Mode::Two => (i3 * n1 + i1, i2),
                    Mode::Three => (i2 * n1 + i1, i3),
                };
                out[r * cols + c] = t.get(i1, i2, i3);
            }
        }
    }
    Matrix::from_vec_unchecked(rows, cols, out)
}

pub fn unfolded_shape(dims: (usize, usize, usize), mode: Mode) -> (usize, usize) {
    let (n1, n2, n3) = dims;
    match mode {
        Mode::One => (n2 * n3, n1),
        Mode::Two => (n1 * n3, n2),
        Mode::Three => (n1 * n2, n3),
    }
}

/// Inverse of [`unfold`].
pub fn refold(m: &Matrix, mode: Mode, dims: (usize, usize, usize)) -> Result<Tensor3> {
    let (n1, n2, n3) = dims;
    if n1 == 0 || n2 == 0 || n3 == 0 {
        return Err(shape("tensor dimensions must be positive"));
    }
    let expected = unfolded_shape(dims, mode);
    if m.shape() != expected {
        return Err(shape(format!(
            "mode-{} refold to {n1}x{n2}x{n3} needs a {}x{} matrix, got {}x{}",
            mode.index(),
            expected.0,
            expected.1,
            m.rows(),
            m.cols()
        )));
    }
    Tensor3::from_fn(n1, n2, n3, |i1, i2, i3| match mode {
        Mode::One => m[(i3 * n2 + i2, i1)],
        Mode::Two => m[(i3 * n1 + i1, i2)],
        Mode::Three => m[(i2 * n1 + i1, i3)],
    })
}

/// Images per person, in mode-3 order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonPartition {
    counts: Vec<usize>,
}

impl PersonPartition {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidParameter("partition has no persons".into()));
        }
        if counts.contains(&0) {
            return Err(Error::InvalidParameter("every person needs at least one image".into()));
        }
        Ok(Self { counts })
    }

    /// `persons` blocks of `per_person` images each.
    pub fn uniform(persons: usize, per_person: usize) -> Result<Self> {
        Self::new(vec![per_person; persons])
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn persons(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn min_count(&self) -> usize {
        self.counts.iter().copied().min().unwrap_or(0)
    }
}

/// Splits `t` along mode 3 into one sub-tensor per person.
pub fn slice_mode3(t: &Tensor3, part: &PersonPartition) -> Result<Vec<Tensor3>> {
    let (n1, n2, n3) = t.dims;
    if part.total() != n3 {
        return Err(shape(format!(
            "partition covers {} images, tensor has {n3}",
            part.total()
        )));
    }
    let size = n1 * n2;
    let mut start = 0;
    part.counts
        .iter()
        .map(|&count| {
            let data = t.data[start * size..(start + count) * size].to_vec();
            start += count;
            Tensor3::new(n1, n2, count, data)
        })
        .collect()
}

/// Concatenates sub-tensors along mode 3 in list order.
pub fn merge_mode3(parts: &[Tensor3]) -> Result<Tensor3> {
    let first = parts.first().ok_or_else(|| shape("nothing to merge"))?;
    let (n1, n2, _) = first.dims;
    let mut data = Vec::new();
    let mut n3 = 0;
    for (k, p) in parts.iter().enumerate() {
        if (p.dims.0, p.dims.1) != (n1, n2) {
            return Err(shape(format!(
                "part {k} has images of {}x{}, expected {n1}x{n2}",
                p.dims.0, p.dims.1
            )));
        }
        data.extend_from_slice(&p.data);
        n3 += p.dims.2;
    }
    Tensor3::new(n1, n2, n3, data)
}

/// Concatenates the rows of an image into a single row vector.
pub fn flatten_image(img: &Matrix) -> Matrix {
    Matrix::from_vec_unchecked(1, img.rows() * img.cols(), img.as_slice().to_vec())
}

/// One flattened image per row, `n3 × (n1·n2)`.
pub fn flatten_slabs(t: &Tensor3) -> Matrix {
    let (n1, n2, n3) = t.dims;
    Matrix::from_vec_unchecked(n3, n1 * n2, t.data.clone())
}
