use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};

use super::EmbeddingSpace;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Orthogonal `R` minimizing `||X R - Y||_F`, from the SVD of `X^T Y`.
/// Reflections are allowed.
pub fn orthogonal_procrustes(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!(
            "Procrustes inputs {:?} and {:?}",
            x.dim(),
            y.dim()
        )));
    }
    let d = x.ncols();
    let m = x.t().dot(&y);
    let m = DMatrix::from_fn(d, d, |i, j| m[[i, j]]);
    let svd = m.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Degenerate("SVD did not converge".into()));
    };
    let r = u * v_t;
    Ok(Array2::from_shape_fn((d, d), |(i, j)| r[(i, j)]))
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub rotation: Array2<f64>,
    /// The source space mapped into the reference space's coordinates.
    pub aligned: EmbeddingSpace,
    pub shared: usize,
}

/// Rotate `source` onto `reference` using the lemmas the two spaces share.
pub fn procrustes_align(source: &EmbeddingSpace, reference: &EmbeddingSpace) -> Result<Alignment> {
    if source.dim() != reference.dim() {
        return Err(Error::Dimension(format!(
            "cannot align dimension {} to {}",
            source.dim(),
            reference.dim()
        )));
    }
    let shared: Vec<&String> = source
        .vocab()
        .lemmas()
        .iter()
        .filter(|l| reference.vocab().index_of(l).is_some())
        .collect();
    let d = source.dim();
    if shared.len() < d {
        return Err(Error::Invalid(format!(
            "only {} shared lemmas for dimension {d}; alignment is underdetermined",
            shared.len()
        )));
    }
    let gather = |space: &EmbeddingSpace| {
        Array2::from_shape_fn((shared.len(), d), |(i, j)| {
            space.vector(shared[i]).expect("shared lemma")[j]
        })
    };
    let rotation = orthogonal_procrustes(gather(source).view(), gather(reference).view())?;
    let aligned = EmbeddingSpace::new(
        Vocabulary::from_lemmas(source.vocab().lemmas().iter().cloned()),
        source.vectors().dot(&rotation),
        source.meta.clone(),
    )?;
    Ok(Alignment {
        rotation,
        aligned,
        shared: shared.len(),
    })
}
