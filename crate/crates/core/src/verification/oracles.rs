use nalgebra::{DMatrix, Schur};

use crate::error::{Error, Result};
use crate::sbfem::{build_hamiltonian, CMatrix, ElementCoefficients, ModalBasis, C64};

/// Stiffness from an ordered complex Schur form of `Zp`: the leading `n`
/// Schur vectors span the bounded invariant subspace `[Q11; Q21]` and
/// `K = Q21 Q11⁻¹`. No eigenvectors are formed.
pub fn schur_stiffness_oracle(coeffs: &ElementCoefficients) -> Result<DMatrix<f64>> {
    let h = build_hamiltonian(coeffs, f64::INFINITY)?;
    let n = h.n;
    let zc: CMatrix = h.zp.map(|v| C64::new(v, 0.0));
    let (mut q, mut t) = Schur::try_new(zc, 1e-15 * h.zp.norm().max(1.0), 10_000)
        .ok_or_else(|| Error::Decomposition {
            element: 0,
            detail: "Schur iteration did not converge".into(),
        })?
        .unpack();
    let m = 2 * n;
    // Bubble eigenvalues with positive real part to the front.
    let mut sorted = false;
    let mut sweeps = 0;
    while !sorted {
        sorted = true;
        sweeps += 1;
        if sweeps > 4 * m {
            return Err(Error::Selection {
                element: 0,
                detail: "Schur reordering did not settle".into(),
            });
        }
        for k in 0..m - 1 {
            if t[(k, k)].re <= 0.0 && t[(k + 1, k + 1)].re > 0.0 {
                swap_adjacent(&mut t, &mut q, k);
                sorted = false;
            }
        }
    }
    let pos = (0..m).filter(|&k| t[(k, k)].re > 0.0).count();
    if pos != n {
        return Err(Error::Selection {
            element: 0,
            detail: format!("{pos} eigenvalues with positive real part, expected {n}"),
        });
    }
    let q11 = q.view((0, 0), (n, n)).into_owned();
    let q21 = q.view((n, 0), (n, n)).into_owned();
    // K = Q21 Q11⁻¹ ⇔ Q11ᵀ Kᵀ = Q21ᵀ.
    let kt = q11
        .transpose()
        .lu()
        .solve(&q21.transpose())
        .ok_or_else(|| Error::ModalBasis {
            element: 0,
            detail: "singular leading Schur block".into(),
        })?;
    let k = kt.transpose();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        0.5 * (k[(i, j)].re + k[(j, i)].re)
    }))
}

/// Swaps diagonal entries `k` and `k+1` of the upper triangular `t` with a
/// unitary rotation, updating the Schur vectors `q`.
fn swap_adjacent(t: &mut CMatrix, q: &mut CMatrix, k: usize) {
    let a = t[(k, k)];
    let b = t[(k + 1, k + 1)];
    let c = t[(k, k + 1)];
    // Eigenvector of the 2×2 block for eigenvalue b.
    let (x1, x2) = (c, b - a);
    let norm = (x1.norm_sqr() + x2.norm_sqr()).sqrt();
    if norm == 0.0 {
        return;
    }
    let (v1, v2) = (x1 / norm, x2 / norm);
    let g = nalgebra::Matrix2::new(v1, -v2.conj(), v2, v1.conj());
    let gh = g.adjoint();
    let m = t.nrows();
    for j in 0..m {
        let (r0, r1) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = gh[(0, 0)] * r0 + gh[(0, 1)] * r1;
        t[(k + 1, j)] = gh[(1, 0)] * r0 + gh[(1, 1)] * r1;
    }
    for i in 0..m {
        let (c0, c1) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = c0 * g[(0, 0)] + c1 * g[(1, 0)];
        t[(i, k + 1)] = c0 * g[(0, 1)] + c1 * g[(1, 1)];
        let (c0, c1) = (q[(i, k)], q[(i, k + 1)]);
        q[(i, k)] = c0 * g[(0, 0)] + c1 * g[(1, 0)];
        q[(i, k + 1)] = c0 * g[(0, 1)] + c1 * g[(1, 1)];
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
    t[(k, k)] = b;
    t[(k + 1, k + 1)] = a;
}

/// Gauss–Legendre nodes and weights on [0, 1] by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x.push(0.5 * (1.0 - z));
        w.push(1.0 / ((1.0 - z * z) * dp * dp));
    }
    (x, w)
}

/// Mass matrix from numerical radial quadrature of
/// `∫₀¹ ξ² h(ξ) h(ξ)ᵀ` over the modal solution, using 8-point Gauss–Legendre
/// on geometrically shrinking panels towards the scaling centre.
pub fn radial_mass_oracle(
    mb: &ModalBasis,
    m0: &DMatrix<f64>,
    n_radial: usize,
) -> Result<DMatrix<f64>> {
    if n_radial < 8 {
        return Err(Error::Config(
            "radial quadrature needs at least 8 points".into(),
        ));
    }
    let n = mb.len();
    let (gx, gw) = gauss_legendre01(8);
    let panels = n_radial / 8;
    let mut edges = vec![0.0];
    for k in (0..panels).rev() {
        edges.push(0.5f64.powi(k as i32));
    }
    let base = mb.phi_h.transpose() * m0.map(|v| C64::new(v, 0.0)) * &mb.phi_h;
    let mut m = CMatrix::zeros(n, n);
    for win in edges.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        for (x, w) in gx.iter().zip(&gw) {
            let xi = lo + (hi - lo) * x;
            let wt = w * (hi - lo) * xi * xi;
            let d = mb.radial(xi);
            m += d.transpose() * &base * d * C64::new(wt, 0.0);
        }
    }
    let inv = mb
        .phi_h
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::ModalBasis {
            element: 0,
            detail: "singular modal head matrix".into(),
        })?;
    let full = inv.transpose() * m * inv;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        0.5 * (full[(i, j)].re + full[(j, i)].re)
    }))
}
