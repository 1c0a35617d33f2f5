//! Cosine similarity structure over an embedding matrix.

use std::fs::File;
use std::path::Path;

use rayon::prelude::*;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};
use crate::vocabulary::{CategoryId, CategoryScheme, Vocabulary};

pub const SIMILARITY_TOL: f64 = 1e-12;

/// Symmetric N×N cosine matrix with a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    entries: DenseMatrix,
}

impl SimilarityMatrix {
    /// Wraps a precomputed matrix after checking the similarity invariants.
    pub fn from_matrix(entries: DenseMatrix) -> Result<Self> {
        if !entries.is_square() || entries.rows() == 0 {
            return Err(Error::validation("similarity matrix must be square and non-empty"));
        }
        let n = entries.rows();
        for i in 0..n {
            if (entries.get(i, i) - 1.0).abs() > SIMILARITY_TOL {
                return Err(Error::validation(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..n {
                let v = entries.get(i, j);
                if !v.is_finite() || v.abs() > 1.0 + SIMILARITY_TOL {
                    return Err(Error::validation(format!("entry ({i},{j}) = {v} outside [-1, 1]")));
                }
                if (v - entries.get(j, i)).abs() > SIMILARITY_TOL {
                    return Err(Error::validation(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(SimilarityMatrix { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.rows() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(i, j)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.entries.row(i)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.entries
    }

    /// Mean off-diagonal similarity, split by whether the pair shares a category.
    pub fn mean_within_and_across(&self, scheme: &CategoryScheme) -> (f64, f64) {
        let (mut w, mut nw, mut c, mut nc) = (0.0, 0usize, 0.0, 0usize);
        for i in 0..self.len() {
            for j in 0..self.len() {
                if i == j {
                    continue;
                }
                if scheme.shares_category(i, j) {
                    w += self.get(i, j);
                    nw += 1;
                } else {
                    c += self.get(i, j);
                    nc += 1;
                }
            }
        }
        (w / nw.max(1) as f64, c / nc.max(1) as f64)
    }
}

/// `S[i][j] = v_i·v_j / (‖v_i‖‖v_j‖)`, norms computed once per row.
pub fn cosine_similarity_matrix(e: &EmbeddingMatrix) -> Result<SimilarityMatrix> {
    let n = e.len();
    let norms: Vec<f64> = (0..n).map(|i| dot(e.row(i), e.row(i)).sqrt()).collect();
    if let Some(i) = norms.iter().position(|&x| !(x > 1e-12)) {
        return Err(Error::validation(format!("embedding {i} has zero norm")));
    }
    let mut m = DenseMatrix::zeros(n, n);
    m.rows_mut()
        .collect::<Vec<_>>()
        .into_par_iter()
        .enumerate()
        .for_each(|(i, out)| {
            let vi = e.row(i);
            for (j, slot) in out.iter_mut().enumerate() {
                // elementwise products commute, so S[i][j] and S[j][i] are bit-identical
                *slot = if i == j {
                    1.0
                } else {
                    dot(vi, e.row(j)) / (norms[i] * norms[j])
                };
            }
        });
    Ok(SimilarityMatrix { entries: m })
}

/// `A[i][j] = S[i][j] × |categories in subset shared by i and j|`.
pub fn additive_category_matrix(
    s: &SimilarityMatrix,
    scheme: &CategoryScheme,
    subset: &[CategoryId],
) -> Result<DenseMatrix> {
    if subset.is_empty() {
        return Err(Error::validation("category subset is empty"));
    }
    if scheme.num_items() != s.len() {
        return Err(Error::validation(format!(
            "scheme covers {} items but similarity matrix has {}",
            scheme.num_items(),
            s.len()
        )));
    }
    let mask = scheme.subset_mask(subset)?;
    let n = s.len();
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let shared = scheme.shared_count_within(i, j, &mask);
            if shared > 0 {
                a.set(i, j, s.get(i, j) * f64::from(shared));
            }
        }
    }
    Ok(a)
}

/// Header row of names, then one labeled row per item.
pub fn export_matrix_csv(m: &DenseMatrix, vocab: &Vocabulary, path: &Path) -> Result<()> {
    if m.rows() != vocab.len() || m.cols() != vocab.len() {
        return Err(Error::validation(format!(
            "matrix is {}x{} but vocabulary has {} items",
            m.rows(),
            m.cols(),
            vocab.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut header = vec![String::new()];
    header.extend(vocab.names().map(str::to_string));
    w.write_record(&header).map_err(io)?;
    for (i, name) in vocab.names().enumerate() {
        let mut record = Vec::with_capacity(m.cols() + 1);
        record.push(name.to_string());
        record.extend(m.row(i).iter().map(|v| format!("{v:?}")));
        w.write_record(&record).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a matrix written by [`export_matrix_csv`]; returns (names, matrix).
pub fn import_matrix_csv(path: &Path) -> Result<(Vec<String>, DenseMatrix)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty matrix file"))?
        .map_err(|e| Error::parse(path, 1, e.to_string()))?;
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = names.len();
    let mut data = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (k, rec) in records.enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, k + 2, e.to_string()))?;
        if rec.len() != n + 1 {
            return Err(Error::parse(path, k + 2, format!("expected {} fields", n + 1)));
        }
        for field in rec.iter().skip(1) {
            data.push(
                field
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, k + 2, format!("{field:?}: {e}")))?,
            );
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::parse(path, 0, format!("expected {n} rows, found {rows}")));
    }
    Ok((names, DenseMatrix::from_vec(n, n, data)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sim(rows: &[&[f64]]) -> SimilarityMatrix {
        cosine_similarity_matrix(&EmbeddingMatrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn analytic_cases() {
        let s = sim(&[&[3.0, 4.0], &[3.0, 4.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        assert_abs_diff_eq!(s.get(0, 1), 1.0, epsilon = 1e-15);
        assert_eq!(s.get(2, 3), 0.0);
        assert_abs_diff_eq!(s.get(4, 2), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn antipodal_vectors_are_legal() {
        let s = sim(&[&[1.0, 2.0], &[-1.0, -2.0]]);
        assert_abs_diff_eq!(s.get(0, 1), -1.0, epsilon = 1e-15);
    }

    fn scheme() -> CategoryScheme {
        // item 0: {0,1}, item 1: {0,1}, item 2: {1}, item 3: {}
        CategoryScheme::new(
            vec!["a".into(), "b".into()],
            vec![vec![0, 1], vec![0, 1], vec![1], vec![]],
        )
        .unwrap()
    }

    fn constant_similarity(n: usize, v: f64) -> SimilarityMatrix {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, if i == j { 1.0 } else { v });
            }
        }
        SimilarityMatrix::from_matrix(m).unwrap()
    }

    /// Literal sum over subset categories of the joint membership indicator.
    fn brute_force_additive(s: &SimilarityMatrix, sc: &CategoryScheme, subset: &[usize]) -> DenseMatrix {
        let n = s.len();
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut total = 0.0;
                for &c in subset {
                    let both = sc.categories_of(i).contains(&c) && sc.categories_of(j).contains(&c);
                    if both {
                        total += s.get(i, j);
                    }
                }
                a.set(i, j, total);
            }
        }
        a
    }

    #[test]
    fn additive_matrix_membership_cases() {
        let s = constant_similarity(4, 0.8);
        let sc = scheme();
        let a = additive_category_matrix(&s, &sc, &[0, 1]).unwrap();
        assert_eq!(a.get(0, 3), 0.0);
        assert_eq!(a.get(0, 2), 0.8);
        assert_abs_diff_eq!(a.get(0, 1), 1.6, epsilon = 1e-15);
        assert_eq!(a.max_abs_diff(&brute_force_additive(&s, &sc, &[0, 1])), 0.0);
        let only_a = additive_category_matrix(&s, &sc, &[0]).unwrap();
        assert_eq!(only_a.get(0, 1), 0.8);
        assert_eq!(only_a.get(0, 2), 0.0);
    }

    #[test]
    fn additive_matrix_errors() {
        let s = constant_similarity(4, 0.5);
        assert!(additive_category_matrix(&s, &scheme(), &[]).is_err());
        assert!(additive_category_matrix(&s, &scheme(), &[2]).is_err());
    }

    #[test]
    fn export_and_reimport() {
        let vocab = Vocabulary::from_entries([("x", None, vec![]), ("y, z", None, vec![])]).unwrap();
        let m = DenseMatrix::from_rows(&[[1.0, 0.1 + 0.2], [1.0 / 3.0, 1.0]]);
        let f = tempfile::NamedTempFile::new().unwrap();
        export_matrix_csv(&m, &vocab, f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text.lines().count(), 3);
        let (names, back) = import_matrix_csv(f.path()).unwrap();
        assert_eq!(names, ["x", "y, z"]);
        assert_eq!(back, m);
        let wrong = DenseMatrix::zeros(3, 3);
        assert!(export_matrix_csv(&wrong, &vocab, f.path()).is_err());
    }

    fn embeddings() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..8, 1usize..6).prop_flat_map(|(n, d)| {
            prop::collection::vec(
                prop::collection::vec(-10.0f64..10.0, d).prop_filter("nonzero", |v| {
                    v.iter().map(|x| x * x).sum::<f64>() > 1e-6
                }),
                n,
            )
        })
    }

    proptest! {
        #[test]
        fn invariants_hold(rows in embeddings()) {
            let e = EmbeddingMatrix::from_rows(&rows).unwrap();
            let s = cosine_similarity_matrix(&e).unwrap();
            prop_assert!(SimilarityMatrix::from_matrix(s.matrix().clone()).is_ok());
        }

        #[test]
        fn scale_invariance(rows in embeddings(), scale in 1e-3f64..1e3, which in 0usize..8) {
            let s = cosine_similarity_matrix(&EmbeddingMatrix::from_rows(&rows).unwrap()).unwrap();
            let mut scaled = rows.clone();
            let k = which % rows.len();
            scaled[k].iter_mut().for_each(|x| *x *= scale);
            let t = cosine_similarity_matrix(&EmbeddingMatrix::from_rows(&scaled).unwrap()).unwrap();
            prop_assert!(s.matrix().max_abs_diff(t.matrix()) <= 1e-10);
        }

        #[test]
        fn unit_rows_give_gram_matrix(rows in embeddings()) {
            let unit: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    let n = dot(r, r).sqrt();
                    r.iter().map(|x| x / n).collect()
                })
                .collect();
            let s = cosine_similarity_matrix(&EmbeddingMatrix::from_rows(&unit).unwrap()).unwrap();
            for i in 0..unit.len() {
                for j in 0..unit.len() {
                    prop_assert!((s.get(i, j) - dot(&unit[i], &unit[j])).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn additive_all_categories_symmetric(rows in embeddings(), seed in any::<u64>()) {
            let n = rows.len();
            let membership: Vec<Vec<usize>> = (0..n)
                .map(|i| (0..3).filter(|c| (seed >> (i * 3 + c)) & 1 == 1).collect())
                .collect();
            let sc = CategoryScheme::new(vec!["a".into(), "b".into(), "c".into()], membership).unwrap();
            let s = cosine_similarity_matrix(&EmbeddingMatrix::from_rows(&rows).unwrap()).unwrap();
            let a = additive_category_matrix(&s, &sc, &[0, 1, 2]).unwrap();
            prop_assert_eq!(a.max_abs_diff(&brute_force_additive(&s, &sc, &[0, 1, 2])), 0.0);
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((a.get(i, j) - a.get(j, i)).abs() <= 1e-12);
                }
            }
        }
    }
}
