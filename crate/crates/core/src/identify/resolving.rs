use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::compose::CompositionSpec;
use crate::error::Result;
use crate::finitedist::{ensure_same, FiniteDistribution, SpaceRef};

/// Default relative singular-value threshold for numerical rank.
pub const RANK_REL_TOL: f64 = 1e-8;

/// `R[z][y] = sum_x p(x) 1[z = c(x, y)]`, built from the atoms of `p_x` with
/// positive mass.
#[derive(Debug, Clone)]
pub struct ResolvingMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    entries: Vec<f64>,
    /// x atoms skipped because they carry no mass.
    pub pruned_x: Vec<usize>,
    z_space: SpaceRef,
    y_space: SpaceRef,
}

impl Serialize for ResolvingMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ResolvingMatrix", 4)?;
        st.serialize_field("n_rows", &self.n_rows)?;
        st.serialize_field("n_cols", &self.n_cols)?;
        st.serialize_field("entries", &self.rows())?;
        st.serialize_field("pruned_x", &self.pruned_x)?;
        st.end()
    }
}

impl ResolvingMatrix {
    #[inline]
    pub fn get(&self, z: usize, y: usize) -> f64 {
        self.entries[z * self.n_cols + y]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n_cols).map(|r| r.to_vec()).collect()
    }

    pub fn z_space(&self) -> &SpaceRef {
        &self.z_space
    }

    /// Space of the component the matrix resolves (its columns).
    pub fn y_space(&self) -> &SpaceRef {
        &self.y_space
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n_cols];
        for z in 0..self.n_rows {
            for (y, sy) in s.iter_mut().enumerate() {
                *sy += self.get(z, y);
            }
        }
        s
    }

    /// `R p` for a vector over the column space.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|z| (0..self.n_cols).map(|y| self.get(z, y) * p[y]).sum())
            .collect()
    }

    /// `R^T w` for a vector over the row space.
    pub fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for z in 0..self.n_rows {
            let wz = w[z];
            if wz != 0.0 {
                for (y, o) in out.iter_mut().enumerate() {
                    *o += self.get(z, y) * wz;
                }
            }
        }
        out
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows, self.n_cols, &self.entries)
    }

    /// Singular values, largest first. The matrix is zero-padded to at least
    /// as many rows as columns so the count always equals `n_cols`.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = padded(&self.to_matrix()).singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
        sv
    }
}

pub(crate) fn padded(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() >= m.ncols() {
        return m.clone();
    }
    let mut p = DMatrix::zeros(m.ncols(), m.ncols());
    p.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    p
}

/// Resolving matrix of `p_x` and `spec`, columns indexed by `spec.y_space()`.
pub fn resolving_matrix(p_x: &FiniteDistribution, spec: &CompositionSpec) -> Result<ResolvingMatrix> {
    ensure_same(p_x.space(), spec.x_space(), "p_x vs composition")?;
    let (nz, ny) = (spec.z_space().len(), spec.y_space().len());
    let mut entries = vec![0.0; nz * ny];
    let mut pruned = Vec::new();
    for x in 0..spec.x_space().len() {
        let px = p_x.prob(x);
        if px <= 0.0 {
            pruned.push(x);
            continue;
        }
        for y in 0..ny {
            entries[spec.apply(x, y) * ny + y] += px;
        }
    }
    Ok(ResolvingMatrix {
        n_rows: nz,
        n_cols: ny,
        entries,
        pruned_x: pruned,
        z_space: spec.z_space().clone(),
        y_space: spec.y_space().clone(),
    })
}

/// Count of singular values above `rel_tol` times the largest.
pub fn column_rank(r: &ResolvingMatrix, rel_tol: f64) -> usize {
    rank_of(&r.singular_values(), rel_tol)
}

pub(crate) fn rank_of(sv: &[f64], rel_tol: f64) -> usize {
    let max = sv.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}
