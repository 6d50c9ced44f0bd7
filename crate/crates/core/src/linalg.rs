//! Small dense helpers on plain `f64` slices. Everything here works in the
//! ambient Euclidean structure that makes the fixed Heisenberg basis
//! orthonormal.

use nalgebra::DMatrix;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn unit(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

/// Matrix of pairwise inner products `<a_i, b_j>`.
pub fn gram(a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| dot(&a[i], &b[j]))
}

pub fn det(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    m.determinant()
}

/// Removes from `v` its components along the (orthonormal) vectors of `basis`.
/// Two passes of modified Gram-Schmidt.
pub fn reject(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            axpy(-c, b, v);
        }
    }
}

/// Orthonormalizes `vectors` in order. Returns `None` if they are dependent
/// (relative residual below `rel_tol`).
pub fn orthonormalize(vectors: &[Vec<f64>], rel_tol: f64) -> Option<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let scale = norm(v);
        if scale == 0.0 {
            return None;
        }
        let mut r = v.clone();
        reject(&mut r, &out);
        let rn = norm(&r);
        if rn <= rel_tol * scale {
            return None;
        }
        out.push(r.into_iter().map(|x| x / rn).collect());
    }
    Some(out)
}

/// Extends an orthonormal family inside the subspace spanned by the
/// coordinate directions `candidates` until it has `target` vectors, picking
/// greedily the candidate with the largest residual each round.
pub fn complete_orthonormal(
    family: &[Vec<f64>],
    candidates: &[Vec<f64>],
    target: usize,
) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = family.to_vec();
    let mut added = Vec::new();
    while all.len() < target {
        let best = candidates
            .iter()
            .map(|c| {
                let mut r = c.clone();
                reject(&mut r, &all);
                let n = norm(&r);
                (n, r)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0));
        match best {
            Some((n, r)) if n > 1e-8 => {
                let u: Vec<f64> = r.into_iter().map(|x| x / n).collect();
                all.push(u.clone());
                added.push(u);
            }
            _ => break,
        }
    }
    added
}

/// Largest principal-angle sine between the spans of two orthonormal
/// families of equal size.
pub fn max_principal_sine(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    // sin(max angle) = ||(I - P_b) Q_a||_2
    if a.is_empty() {
        return 0.0;
    }
    let dim = a[0].len();
    let residuals: Vec<Vec<f64>> = a
        .iter()
        .map(|v| {
            let mut r = v.clone();
            reject(&mut r, b);
            r
        })
        .collect();
    let m = DMatrix::from_fn(dim, residuals.len(), |i, j| residuals[j][i]);
    m.singular_values().max()
}

/// Solves `m x = rhs` for square `m`.
pub fn solve(m: &DMatrix<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    let b = nalgebra::DVector::from_column_slice(rhs);
    m.clone().lu().solve(&b).map(|x| x.iter().copied().collect())
}
