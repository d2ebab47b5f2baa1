use nalgebra::{DMatrix, SymmetricEigen};

use super::{CMatrix, ElementCoefficients, C64};
use crate::error::{Error, Result};

/// Coefficient matrix of the first-order radial system `ξ X' = Zp X`, with
/// `X = [ξ^½ h; ξ^-½ q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSystem {
    pub zp: DMatrix<f64>,
    pub n: usize,
    /// Condition estimate of E0.
    pub e0_condition: f64,
    /// Whether constant heads are in the kernel of E2 and E1ᵀ, so that a
    /// constant-head mode must appear in the bounded block.
    pub has_constant_mode: bool,
}

/// Bounded modal block of `Zp`: `Zp [Φh; Φq] = [Φh; Φq] T` with `T` block
/// diagonal. Isolated eigenvalues give 1×1 blocks; a cluster of close
/// eigenvalues keeps a small coupled block instead of individual
/// eigenvectors, which are ill-determined there.
#[derive(Clone, Debug)]
pub struct ModalBasis {
    pub phi_h: CMatrix,
    pub phi_q: CMatrix,
    /// Eigenvalues of `Zp` for the selected modes; the radial head of mode i
    /// varies as `ξ^(λ_i − ½)`.
    pub lambda: Vec<C64>,
    /// Block diagonal modal matrix, `diag(λ)` away from clusters.
    pub t: CMatrix,
    /// `(start, len)` of each diagonal block of `t`.
    pub blocks: Vec<(usize, usize)>,
    /// Index of the constant-head mode (`λ = ½`).
    pub constant_mode: Option<usize>,
    /// 2-norm condition number of `phi_h`.
    pub condition: f64,
}

impl ModalBasis {
    /// Basis of isolated modes.
    pub fn diagonal(phi_h: CMatrix, phi_q: CMatrix, lambda: Vec<C64>) -> Self {
        let n = lambda.len();
        let t = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda.clone()));
        let condition = complex_condition(&phi_h);
        Self {
            phi_h,
            phi_q,
            lambda,
            t,
            blocks: (0..n).map(|i| (i, 1)).collect(),
            constant_mode: None,
            condition,
        }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Block diagonal `ξ^(T − ½I)`; at `ξ = 0` only the constant mode survives.
    pub fn radial(&self, xi: f64) -> CMatrix {
        let n = self.len();
        let mut r = CMatrix::zeros(n, n);
        for &(s, len) in &self.blocks {
            if len == 1 {
                let e = self.t[(s, s)] - 0.5;
                r[(s, s)] = if xi > 0.0 {
                    (e * xi.ln()).exp()
                } else if e.norm() < 1e-8 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
            } else {
                let a = (self.t.view((s, s), (len, len))
                    - CMatrix::identity(len, len) * C64::new(0.5, 0.0))
                    * C64::new(xi.max(1e-300).ln(), 0.0);
                r.view_mut((s, s), (len, len)).copy_from(&a.exp());
            }
        }
        r
    }
}

pub fn build_hamiltonian(
    coeffs: &ElementCoefficients,
    max_condition: f64,
) -> Result<HamiltonianSystem> {
    let n = coeffs.len();
    let sym = (&coeffs.e0 + coeffs.e0.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
        (lo.min(v), hi.max(v.abs()))
    });
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > max_condition {
        return Err(Error::Conditioning {
            element: 0,
            condition,
        });
    }
    let e0_inv = coeffs
        .e0
        .clone()
        .cholesky()
        .ok_or(Error::Conditioning {
            element: 0,
            condition,
        })?
        .inverse();
    let e1t = coeffs.e1.transpose();
    let half = DMatrix::<f64>::identity(n, n) * 0.5;
    let a11 = -(&e0_inv * &e1t) + &half;
    let a21 = &coeffs.e2 - &coeffs.e1 * &e0_inv * &e1t;
    let a22 = &coeffs.e1 * &e0_inv - &half;
    let mut zp = DMatrix::zeros(2 * n, 2 * n);
    zp.view_mut((0, 0), (n, n)).copy_from(&a11);
    zp.view_mut((0, n), (n, n)).copy_from(&e0_inv);
    zp.view_mut((n, 0), (n, n)).copy_from(&a21);
    zp.view_mut((n, n), (n, n)).copy_from(&a22);
    let ones = nalgebra::DVector::from_element(n, 1.0);
    let scale = coeffs.e0.norm() + coeffs.e2.norm();
    let has_constant_mode =
        (&coeffs.e2 * &ones).norm() <= 1e-10 * scale && (&e1t * &ones).norm() <= 1e-10 * scale;
    Ok(HamiltonianSystem {
        zp,
        n,
        e0_condition: condition,
        has_constant_mode,
    })
}

/// Eigenvalues and right eigenvectors of a real matrix.
pub(crate) fn eigen_decompose(a: &DMatrix<f64>) -> Result<(Vec<C64>, CMatrix)> {
    let m = a.nrows();
    let fa = faer::Mat::<f64>::from_fn(m, m, |i, j| a[(i, j)]);
    let e = fa.eigen().map_err(|err| Error::Decomposition {
        element: 0,
        detail: format!("{err:?}"),
    })?;
    let s = e.S().column_vector();
    let u = e.U();
    let values = (0..m).map(|i| C64::new(s[i].re, s[i].im)).collect();
    let vectors = CMatrix::from_fn(m, m, |i, j| C64::new(u[(i, j)].re, u[(i, j)].im));
    Ok((values, vectors))
}

// nalgebra's complex SVD can stall on large modal matrices; faer's does not.
pub(crate) fn complex_condition(a: &CMatrix) -> f64 {
    let fa = faer::Mat::<faer::c64>::from_fn(a.nrows(), a.ncols(), |i, j| {
        let z = a[(i, j)];
        faer::c64::new(z.re, z.im)
    });
    let Ok(sv) = fa.singular_values() else {
        return f64::INFINITY;
    };
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Relative distance below which eigenvalues are grouped into one block.
const CLUSTER_TOLERANCE: f64 = 1e-3;

/// Cap on inverse subspace sweeps per cluster.
const MAX_SWEEPS: usize = 200;

/// Groups eigenvalues (sorted by real part) into runs of close values, then
/// merges neighbouring runs until each is separated from the next by more
/// than three times the wider one's diameter.
fn clusters(lambda: &[C64]) -> Vec<(usize, usize)> {
    let close =
        |a: C64, b: C64| (a - b).norm() <= CLUSTER_TOLERANCE * a.norm().max(b.norm()).max(1.0);
    let mut out: Vec<(usize, usize)> = Vec::new();
    for i in 0..lambda.len() {
        match out.last_mut() {
            Some(last) if close(lambda[i - 1], lambda[i]) => last.1 += 1,
            _ => out.push((i, 1)),
        }
    }
    let diameter = |&(s, len): &(usize, usize)| {
        let v = &lambda[s..s + len];
        v.iter()
            .flat_map(|a| v.iter().map(move |b| (a - b).norm()))
            .fold(0.0, f64::max)
    };
    let mut merged = true;
    while merged {
        merged = false;
        for k in 0..out.len().saturating_sub(1) {
            let (a, b) = (out[k], out[k + 1]);
            let gap = (lambda[a.0 + a.1 - 1] - lambda[b.0]).norm();
            if gap <= 3.0 * diameter(&a).max(diameter(&b)) {
                out[k].1 += b.1;
                out.remove(k + 1);
                merged = true;
                break;
            }
        }
    }
    out
}

/// Orthonormal basis of the invariant subspace belonging to a cluster, by
/// shifted inverse subspace iteration started from the solver's (possibly
/// degenerate) eigenvectors. Returns the basis and `T = Vᴴ Zp V`.
fn cluster_subspace(zp: &CMatrix, lambda: &[C64], start: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let m = zp.nrows();
    let c = start.ncols();
    let mean = lambda.iter().copied().sum::<C64>() / c as f64;
    // Shifting to the centre of the cluster makes each sweep reduce the
    // unwanted components by about radius / gap; the imaginary offset keeps
    // the solve regular when an eigenvalue sits on the mean.
    let shift = mean + C64::new(0.0, 1e-6 * mean.norm().max(1.0));
    let shifted = zp - CMatrix::identity(m, m) * shift;
    let lu = shifted.lu();
    let scale = zp.norm();
    // A fixed perturbation restores directions missing from a degenerate start.
    let mut v = CMatrix::from_fn(m, c, |i, j| {
        start[(i, j)] + C64::new(1e-3 * ((7 * i + 13 * j + 1) as f64).sin(), 0.0)
    })
    .qr()
    .q();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let t = v.adjoint() * zp * &v;
        residual = (zp * &v - &v * &t).norm();
        if residual <= 1e-13 * scale {
            break;
        }
        v = lu
            .solve(&v)
            .ok_or_else(|| Error::Decomposition {
                element: 0,
                detail: "singular shifted matrix".into(),
            })?
            .qr()
            .q();
    }
    if residual > 1e-10 * scale {
        return Err(Error::Decomposition {
            element: 0,
            detail: format!(
                "cluster at {mean} did not give an invariant subspace (residual {residual:.3e})"
            ),
        });
    }
    let t = v.adjoint() * zp * &v;
    Ok((v, t))
}

/// Largest accepted condition number of the modal head matrix.
const MAX_MODAL_CONDITION: f64 = 1e10;

pub fn eigen_split(h: &HamiltonianSystem) -> Result<ModalBasis> {
    let n = h.n;
    let (values, vectors) = eigen_decompose(&h.zp)?;
    if values
        .iter()
        .any(|v| !v.re.is_finite() || !v.im.is_finite())
    {
        return Err(Error::Decomposition {
            element: 0,
            detail: "non-finite eigenvalue".into(),
        });
    }
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .re
            .total_cmp(&values[a].re)
            .then(values[b].im.total_cmp(&values[a].im))
    });
    let selected = &order[..n];
    let rejected = &order[n..];
    let lowest = values[selected[n - 1]].re;
    let highest_rejected = values[rejected[0]].re;
    if lowest <= 0.0 || highest_rejected >= 0.0 {
        return Err(Error::Selection {
            element: 0,
            detail: format!(
                "no spectral gap at zero: selected min Re {lowest:.3e}, rejected max Re {highest_rejected:.3e}"
            ),
        });
    }
    let lambda: Vec<C64> = selected.iter().map(|&i| values[i]).collect();
    let mut modes = CMatrix::from_fn(2 * n, n, |r, c| vectors[(r, selected[c])]);
    let blocks = clusters(&lambda);
    let mut t = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda.clone()));
    // The dense eigensolver occasionally hands back a NaN vector for a
    // simple eigenvalue; those get the same subspace iteration as clusters.
    let broken = |s: usize, len: usize, m: &CMatrix| {
        m.columns(s, len)
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
    };
    let refine: Vec<(usize, usize)> = blocks
        .iter()
        .copied()
        .filter(|&(s, len)| len > 1 || broken(s, len, &modes))
        .collect();
    if !refine.is_empty() {
        let zc = h.zp.map(|v| C64::new(v, 0.0));
        for (s, len) in refine {
            if broken(s, len, &modes) {
                modes
                    .columns_mut(s, len)
                    .iter_mut()
                    .filter(|z| !z.re.is_finite() || !z.im.is_finite())
                    .for_each(|z| *z = C64::new(0.0, 0.0));
            }
            let (v, tb) = cluster_subspace(
                &zc,
                &lambda[s..s + len],
                &modes.columns(s, len).into_owned(),
            )?;
            modes.columns_mut(s, len).copy_from(&v);
            t.view_mut((s, s), (len, len)).copy_from(&tb);
        }
    }
    let mut phi_h = modes.rows(0, n).into_owned();
    let mut phi_q = modes.rows(n, n).into_owned();
    // Unit head part with its largest entry real and positive; T follows the
    // column scaling.
    let mut scale = vec![C64::new(1.0, 0.0); n];
    for c in 0..n {
        let norm = phi_h.column(c).norm();
        let big = phi_h
            .column(c)
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or(C64::new(1.0, 0.0));
        if norm == 0.0 || big.norm() == 0.0 {
            return Err(Error::ModalBasis {
                element: 0,
                detail: format!("mode {c} has zero head"),
            });
        }
        let f = (big / big.norm()).conj() / norm;
        scale[c] = f;
        for r in 0..n {
            phi_h[(r, c)] *= f;
            phi_q[(r, c)] *= f;
        }
    }
    for &(s, len) in &blocks {
        for i in s..s + len {
            for j in s..s + len {
                t[(i, j)] *= scale[j] / scale[i];
            }
        }
    }

    let constant_mode = if h.has_constant_mode {
        let i = (0..n)
            .min_by(|&a, &b| {
                (lambda[a] - 0.5)
                    .norm()
                    .total_cmp(&(lambda[b] - 0.5).norm())
            })
            .unwrap();
        let spectral_radius = lambda.iter().map(|l| l.norm()).fold(0.0, f64::max);
        if (lambda[i] - 0.5).norm() > 1e-8 * spectral_radius.max(1.0) {
            return Err(Error::Selection {
                element: 0,
                detail: format!("no constant mode: nearest eigenvalue {}", lambda[i]),
            });
        }
        let col = phi_h.column(i);
        let mean = col.iter().copied().sum::<C64>() / n as f64;
        let spread = col.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
        if mean.norm() == 0.0 || spread > 1e-6 * mean.norm() {
            return Err(Error::Selection {
                element: 0,
                detail: "mode with eigenvalue ½ is not a constant head".into(),
            });
        }
        Some(i)
    } else {
        None
    };
    let condition = complex_condition(&phi_h);
    if condition > MAX_MODAL_CONDITION {
        return Err(Error::ModalBasis {
            element: 0,
            detail: format!("modal head matrix condition {condition:.3e}"),
        });
    }
    Ok(ModalBasis {
        phi_h,
        phi_q,
        lambda,
        t,
        blocks,
        constant_mode,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(e0: f64, e1: f64, e2: f64) -> ElementCoefficients {
        ElementCoefficients {
            e0: DMatrix::from_element(1, 1, e0),
            e1: DMatrix::from_element(1, 1, e1),
            e2: DMatrix::from_element(1, 1, e2),
            m0: DMatrix::from_element(1, 1, 1.0),
            dof_map: vec![0],
        }
    }

    #[test]
    fn scalar_hamiltonians() {
        let h = build_hamiltonian(&scalar(1.0, 0.0, 0.0), 1e12).unwrap();
        assert_eq!(h.zp, DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, -0.5]));
        let h = build_hamiltonian(&scalar(1.0, 0.0, 1.0), 1e12).unwrap();
        assert_eq!(h.zp, DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, -0.5]));
        let (vals, _) = eigen_decompose(&h.zp).unwrap();
        let mut re: Vec<f64> = vals.iter().map(|v| v.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[1] - 1.25f64.sqrt()).abs() < 1e-14);
        assert!((re[0] + 1.25f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn scalar_split_selects_positive_branch() {
        let h = build_hamiltonian(&scalar(1.0, 0.0, 1.0), 1e12).unwrap();
        let mb = eigen_split(&h).unwrap();
        assert!((mb.lambda[0] - C64::new(1.25f64.sqrt(), 0.0)).norm() < 1e-14);
        assert!((mb.phi_h[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((mb.phi_q[(0, 0)] - C64::new(1.25f64.sqrt() - 0.5, 0.0)).norm() < 1e-14);
        assert_eq!(mb.constant_mode, None);
    }

    #[test]
    fn ill_conditioned_e0_is_rejected() {
        let mut c = scalar(1.0, 0.0, 1.0);
        c.e0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1e-14]));
        c.e1 = DMatrix::zeros(2, 2);
        c.e2 = DMatrix::zeros(2, 2);
        assert!(matches!(
            build_hamiltonian(&c, 1e12),
            Err(Error::Conditioning { .. })
        ));
    }
}
