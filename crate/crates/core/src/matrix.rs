use std::borrow::Cow;

use crate::error::{Error, Result};

/// Genes × arrays matrix of expression values, stored gene-major so that each
/// gene's sample is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    genes: usize,
    arrays: usize,
    values: Vec<f64>,
    gene_ids: Option<Vec<String>>,
    array_ids: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(genes: usize, arrays: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != genes * arrays {
            return Err(Error::domain(format!(
                "matrix of {genes} genes × {arrays} arrays needs {} values, got {}",
                genes * arrays,
                values.len()
            )));
        }
        Ok(DataMatrix {
            genes,
            arrays,
            values,
            gene_ids: None,
            array_ids: None,
        })
    }

    pub fn with_ids(mut self, gene_ids: Vec<String>, array_ids: Vec<String>) -> Result<Self> {
        if gene_ids.len() != self.genes || array_ids.len() != self.arrays {
            return Err(Error::domain(format!(
                "expected {} gene ids and {} array ids, got {} and {}",
                self.genes,
                self.arrays,
                gene_ids.len(),
                array_ids.len()
            )));
        }
        self.gene_ids = Some(gene_ids);
        self.array_ids = Some(array_ids);
        Ok(self)
    }

    pub fn genes(&self) -> usize {
        self.genes
    }

    pub fn arrays(&self) -> usize {
        self.arrays
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gene(&self, j: usize) -> &[f64] {
        &self.values[j * self.arrays..(j + 1) * self.arrays]
    }

    pub fn gene_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.arrays..(j + 1) * self.arrays]
    }

    pub fn get(&self, gene: usize, array: usize) -> f64 {
        self.values[gene * self.arrays + array]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.arrays.max(1))
    }

    pub fn gene_id(&self, j: usize) -> Cow<'_, str> {
        match &self.gene_ids {
            Some(ids) => Cow::Borrowed(ids[j].as_str()),
            None => Cow::Owned(format!("gene{}", j + 1)),
        }
    }

    pub fn array_id(&self, i: usize) -> Cow<'_, str> {
        match &self.array_ids {
            Some(ids) => Cow::Borrowed(ids[i].as_str()),
            None => Cow::Owned(format!("array{}", i + 1)),
        }
    }

    pub fn array_ids(&self) -> Vec<String> {
        (0..self.arrays)
            .map(|i| self.array_id(i).into_owned())
            .collect()
    }

    pub fn gene_ids(&self) -> Vec<String> {
        (0..self.genes)
            .map(|j| self.gene_id(j).into_owned())
            .collect()
    }

    /// Base-2 logarithm of every cell; all cells must be positive.
    pub fn log2_transform(&mut self) -> Result<()> {
        if let Some(pos) = self.values.iter().position(|&v| v <= 0.0) {
            return Err(Error::domain(format!(
                "log2 transform needs positive values; gene `{}`, array `{}` holds {}",
                self.gene_id(pos / self.arrays),
                self.array_id(pos % self.arrays),
                self.values[pos]
            )));
        }
        self.values.iter_mut().for_each(|v| *v = v.log2());
        Ok(())
    }

    /// Subtracts each array's mean over genes. A crude stand-in for
    /// array-level normalization.
    pub fn center_arrays(&mut self) {
        if self.genes == 0 {
            return;
        }
        let mut means = vec![0.0; self.arrays];
        for row in self.values.chunks_exact(self.arrays) {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= self.genes as f64);
        for row in self.values.chunks_exact_mut(self.arrays) {
            for (v, m) in row.iter_mut().zip(&means) {
                *v -= m;
            }
        }
    }

    /// Largest absolute cell-wise difference to another matrix of the same
    /// shape.
    pub fn max_abs_diff(&self, other: &DataMatrix) -> f64 {
        assert_eq!((self.genes, self.arrays), (other.genes, other.arrays));
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}
