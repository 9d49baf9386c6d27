use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::{Error, Result, Scalar};

fn check_finite<T: Scalar>(values: &Array2<T>) -> Result<()> {
    for ((row, col), v) in values.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

/// M×N data matrix; column `j` is the sample `x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix<T> {
    values: Array2<T>,
}

impl<T: Scalar> SampleMatrix<T> {
    pub fn new(values: Array2<T>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        check_finite(&values)?;
        Ok(Self { values })
    }

    /// Builds an M×N matrix from column-major values.
    pub fn from_column_major(rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        let values = Array2::from_shape_vec((cols, rows), values)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?
            .reversed_axes();
        Self::new(values)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, T> {
        self.values.column(j)
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.values.view()
    }

    pub fn into_array(self) -> Array2<T> {
        self.values
    }

    /// Values in column-major order.
    pub fn to_column_major(&self) -> Vec<T> {
        self.values.t().iter().copied().collect()
    }
}

/// M×K dictionary; every atom has Euclidean norm at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary<T> {
    atoms: Array2<T>,
}

impl<T: Scalar> Dictionary<T> {
    /// Slack allowed on the unit-norm bound.
    pub fn norm_slack() -> T {
        T::lit(1e-12).max(T::epsilon() * T::lit(16.0))
    }

    pub fn new(atoms: Array2<T>) -> Result<Self> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        check_finite(&atoms)?;
        let bound = T::one() + Self::norm_slack();
        for (k, col) in atoms.axis_iter(Axis(1)).enumerate() {
            let norm = col.dot(&col).sqrt();
            if norm > bound {
                return Err(Error::InvalidParameter(format!(
                    "atom {k} has norm {norm} > 1"
                )));
            }
        }
        Ok(Self { atoms })
    }

    /// Rescales each column to unit norm. Zero columns are rejected.
    pub fn normalized(mut atoms: Array2<T>) -> Result<Self> {
        for (k, mut col) in atoms.axis_iter_mut(Axis(1)).enumerate() {
            let norm = col.dot(&col).sqrt();
            if !(norm > T::zero()) || !norm.is_finite() {
                return Err(Error::InvalidParameter(format!("atom {k} has zero norm")));
            }
            col.mapv_inplace(|v| v / norm);
        }
        Self::new(atoms)
    }

    /// Projects each column with norm above one back onto the unit sphere.
    pub fn projected(mut atoms: Array2<T>) -> Result<Self> {
        project_columns(&mut atoms);
        Self::new(atoms)
    }

    pub fn rows(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atom(&self, k: usize) -> ArrayView1<'_, T> {
        self.atoms.column(k)
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.atoms.view()
    }

    pub fn into_array(self) -> Array2<T> {
        self.atoms
    }

    /// DᵀD.
    pub fn gram(&self) -> Array2<T> {
        self.atoms.t().dot(&self.atoms)
    }
}

pub(crate) fn project_columns<T: Scalar>(atoms: &mut Array2<T>) {
    for mut col in atoms.axis_iter_mut(Axis(1)) {
        let norm = col.dot(&col).sqrt();
        if norm > T::one() {
            col.mapv_inplace(|v| v / norm);
        }
    }
}

/// K×N coefficient matrix; column `j` codes sample `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix<T> {
    values: Array2<T>,
}

impl<T: Scalar> CoeffMatrix<T> {
    pub fn new(values: Array2<T>) -> Self {
        Self { values }
    }

    pub fn zeros(atoms: usize, samples: usize) -> Self {
        Self::new(Array2::zeros((atoms, samples)))
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, T> {
        self.values.column(j)
    }

    pub fn row(&self, k: usize) -> ArrayView1<'_, T> {
        self.values.row(k)
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.values.view()
    }

    pub fn view_mut(&mut self) -> ndarray::ArrayViewMut2<'_, T> {
        self.values.view_mut()
    }

    pub fn into_array(self) -> Array2<T> {
        self.values
    }

    /// Checks that `D·A` is defined and matches `X`.
    pub fn check_pair(&self, dict: &Dictionary<T>, samples: &SampleMatrix<T>) -> Result<()> {
        if self.rows() != dict.atoms()
            || self.cols() != samples.cols()
            || dict.rows() != samples.rows()
        {
            return Err(Error::DimensionMismatch(format!(
                "D is {}x{}, A is {}x{}, X is {}x{}",
                dict.rows(),
                dict.atoms(),
                self.rows(),
                self.cols(),
                samples.rows(),
                samples.cols()
            )));
        }
        Ok(())
    }
}

/// Sorted, duplicate-free set of atom indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActiveSet {
    indices: Vec<usize>,
}

impl ActiveSet {
    pub fn new(mut indices: Vec<usize>, atoms: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= atoms {
                return Err(Error::InvalidParameter(format!(
                    "atom index {last} out of range for {atoms} atoms"
                )));
            }
        }
        Ok(Self { indices })
    }

    /// Indices with `|a_k| > threshold`.
    pub fn from_coeffs<T: Scalar>(coeffs: ArrayView1<'_, T>, threshold: T) -> Self {
        let indices = coeffs
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > threshold)
            .map(|(k, _)| k)
            .collect();
        Self { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }

    /// Size of the symmetric difference.
    pub fn hamming(&self, other: &ActiveSet) -> usize {
        let (a, b) = (&self.indices, &other.indices);
        let (mut i, mut j, mut common) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        a.len() + b.len() - 2 * common
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn column_major_layout() {
        let m = SampleMatrix::from_column_major(2, 2, vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(m.view(), array![[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(m.to_column_major(), vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(
            SampleMatrix::<f64>::new(Array2::zeros((0, 3))),
            Err(Error::EmptyMatrix)
        ));
        let err = SampleMatrix::new(array![[1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn dictionary_norm_bound() {
        assert!(Dictionary::new(array![[1.0, 0.6], [0.0, 0.8]]).is_ok());
        assert!(Dictionary::new(array![[1.1], [0.0]]).is_err());
        let d = Dictionary::<f64>::projected(array![[3.0, 0.5], [4.0, 0.0]]).unwrap();
        assert!((d.atom(0)[0] - 0.6).abs() < 1e-15);
        assert_eq!(d.atom(1)[0], 0.5);
    }

    #[test]
    fn active_set_sorted_and_bounded() {
        let s = ActiveSet::new(vec![3, 1, 3, 2], 4).unwrap();
        assert_eq!(s.indices(), &[1, 2, 3]);
        assert!(ActiveSet::new(vec![4], 4).is_err());
    }

    #[test]
    fn hamming_distance() {
        let a = ActiveSet::new(vec![1, 2, 3], 10).unwrap();
        let b = ActiveSet::new(vec![2, 3, 4], 10).unwrap();
        assert_eq!(a.hamming(&a), 0);
        assert_eq!(a.hamming(&b), 2);
        let c = ActiveSet::new((0..5).collect(), 10).unwrap();
        let d = ActiveSet::new((5..10).collect(), 10).unwrap();
        assert_eq!(c.hamming(&d), 10);
    }
}
