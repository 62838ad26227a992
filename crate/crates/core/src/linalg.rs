//! Dense complex linear algebra helpers shared by all modules.
//!
//! Everything here works on `nalgebra` dynamic matrices over `Complex<f64>`.
//! Dimensions stay small (Hilbert spaces of a few levels, moment matrices of
//! a few dozen rows), so dense spectral methods are used throughout.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

/// Default numerical tolerance for structural invariants (hermiticity,
/// trace normalization, positivity).
pub const TOL: f64 = 1e-9;

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn zeros(dim: usize) -> CMat {
    CMat::zeros(dim, dim)
}

/// Max-norm of `a - a†`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let adj = a.adjoint();
    (a - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(a: &CMat, tol: f64) -> bool {
    hermiticity_defect(a) <= tol
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().sum()
}

pub fn trace_re(a: &CMat) -> f64 {
    trace(a).re
}

/// Entrywise max-norm.
pub fn max_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = a
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigenvalues(a)
        .first()
        .copied()
        .unwrap_or(f64::NAN)
}

/// Spectral decomposition of a Hermitian matrix: (eigenvalues, eigenvectors
/// as columns), eigenvalues ascending.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let se = a.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let dim = a.nrows();
    let mut vecs = CMat::zeros(dim, dim);
    for (col, &i) in idx.iter().enumerate() {
        vecs.set_column(col, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Principal square root of a Hermitian PSD matrix via spectral
/// decomposition. Eigenvalues with |v| <= clamp are snapped to zero (the
/// square root is infinitely steep at 0, so round-off dust must not leak
/// into the root); anything below `-clamp` is a caller error surfaced as
/// `None`.
pub fn psd_sqrt(a: &CMat, clamp: f64) -> Option<CMat> {
    let (vals, vecs) = hermitian_eigen(a);
    let mut d = CVec::zeros(vals.len());
    for (i, &v) in vals.iter().enumerate() {
        if v < -clamp {
            return None;
        }
        let v = if v.abs() <= clamp { 0.0 } else { v };
        d[i] = C64::new(v.sqrt(), 0.0);
    }
    let mut root = CMat::zeros(a.nrows(), a.ncols());
    for i in 0..vals.len() {
        let col = vecs.column(i);
        root += (&col * col.adjoint()).scale(d[i].re);
    }
    Some(root)
}

/// Apply a Kraus list: rho -> sum_i K_i rho K_i†.
pub fn apply_kraus(kraus: &[CMat], rho: &CMat) -> CMat {
    let dim = rho.nrows();
    let mut out = CMat::zeros(dim, dim);
    for k in kraus {
        out += k * rho * k.adjoint();
    }
    out
}

/// Adjoint (Heisenberg-picture) action of a Kraus list: X -> sum_i K_i† X K_i.
pub fn apply_kraus_adjoint(kraus: &[CMat], x: &CMat) -> CMat {
    let dim = x.nrows();
    let mut out = CMat::zeros(dim, dim);
    for k in kraus {
        out += k.adjoint() * x * k;
    }
    out
}

/// Sum of K† K over a Kraus list.
pub fn kraus_gram(kraus: &[CMat]) -> CMat {
    let dim = kraus[0].nrows();
    let mut out = CMat::zeros(dim, dim);
    for k in kraus {
        out += k.adjoint() * k;
    }
    out
}

/// Outer product |v><v|.
pub fn projector(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Real-symmetric embedding of a Hermitian matrix:
/// H = A + iB  ->  [[A, -B], [B, A]].  PSD is preserved in both directions.
pub fn hermitian_to_real(h: &CMat) -> RMat {
    let d = h.nrows();
    let mut m = RMat::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = h[(i, j)];
            m[(i, j)] = z.re;
            m[(i + d, j + d)] = z.re;
            m[(i, j + d)] = -z.im;
            m[(i + d, j)] = z.im;
        }
    }
    m
}

/// Pauli matrices and common qubit states.
pub mod qubit {
    use super::{C64, CMat, CVec};

    pub fn sigma_x() -> CMat {
        CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
    }

    pub fn sigma_y() -> CMat {
        CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)])
    }

    pub fn sigma_z() -> CMat {
        CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)])
    }

    /// n · sigma for a real unit vector n = (nx, ny, nz).
    pub fn bloch_observable(n: [f64; 3]) -> CMat {
        sigma_x().scale(n[0]) + sigma_y().scale(n[1]) + sigma_z().scale(n[2])
    }

    pub fn ket0() -> CVec {
        CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
    }

    pub fn ket1() -> CVec {
        CVec::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)])
    }
}

/// exp(-i H t) for Hermitian H, via spectral decomposition.
pub fn unitary_evolution(h: &CMat, t: f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(h);
    let dim = h.nrows();
    let mut u = CMat::zeros(dim, dim);
    for i in 0..vals.len() {
        let phase = C64::new(0.0, -vals[i] * t).exp();
        let col = vecs.column(i);
        u += (&col * col.adjoint()).scale(1.0) * phase;
    }
    u
}

/// Deterministically seeded random Hermitian PSD matrix with unit trace
/// (a random density operator), from a caller-provided RNG.
pub fn random_density(dim: usize, rng: &mut impl rand::Rng) -> CMat {
    let mut g = CMat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            g[(i, j)] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
    }
    let p = &g * g.adjoint();
    let t = trace_re(&p);
    p.scale(1.0 / t)
}

/// Random pure state vector.
pub fn random_ket(dim: usize, rng: &mut impl rand::Rng) -> CVec {
    let mut v = CVec::zeros(dim);
    loop {
        for i in 0..dim {
            v[i] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
        let n = v.norm();
        if n > 1e-6 {
            return v.scale(1.0 / n);
        }
    }
}

/// Random unitary via Gram-Schmidt on a random complex matrix.
pub fn random_unitary(dim: usize, rng: &mut impl rand::Rng) -> CMat {
    loop {
        let mut cols: Vec<CVec> = Vec::with_capacity(dim);
        for _ in 0..dim {
            let mut v = random_ket(dim, rng);
            for c in &cols {
                let overlap = c.dotc(&v);
                v -= c.scale(1.0) * overlap;
            }
            let n = v.norm();
            if n < 1e-8 {
                cols.clear();
                continue;
            }
            cols.push(v.scale(1.0 / n));
        }
        let mut u = CMat::zeros(dim, dim);
        for (i, c) in cols.iter().enumerate() {
            u.set_column(i, c);
        }
        return u;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hermitian_eigen_recovers_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random_density(4, &mut rng);
        let (vals, vecs) = hermitian_eigen(&rho);
        let mut rebuilt = CMat::zeros(4, 4);
        for i in 0..4 {
            let col = vecs.column(i).clone_owned();
            rebuilt += projector(&col).scale(vals[i]);
        }
        assert!(max_norm(&(rebuilt - rho)) < 1e-10);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_density(3, &mut rng);
        let root = psd_sqrt(&rho, TOL).unwrap();
        assert!(max_norm(&(&root * &root - rho)) < 1e-10);
        assert!(is_hermitian(&root, 1e-10));
    }

    #[test]
    fn psd_sqrt_rejects_negative() {
        let m = qubit::sigma_z();
        assert!(psd_sqrt(&m, TOL).is_none());
    }

    #[test]
    fn unitary_evolution_is_unitary() {
        let u = unitary_evolution(&qubit::sigma_x(), 0.37);
        assert!(max_norm(&(&u * u.adjoint() - identity(2))) < 1e-12);
    }

    #[test]
    fn real_embedding_preserves_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_density(3, &mut rng);
        let r = hermitian_to_real(&h);
        let ev = r.symmetric_eigen().eigenvalues;
        let hv = hermitian_eigenvalues(&h);
        // each complex eigenvalue appears twice in the real embedding
        let mut rv: Vec<f64> = ev.iter().copied().collect();
        rv.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, v) in hv.iter().enumerate() {
            assert!((rv[2 * i] - v).abs() < 1e-10);
            assert!((rv[2 * i + 1] - v).abs() < 1e-10);
        }
    }
}
