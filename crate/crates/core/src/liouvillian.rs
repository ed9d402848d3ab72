//! Rotating-frame Hamiltonian, collective Lindblad generator, steady state and
//! a fixed-step time integrator.
//!
//! Basis convention: the Hilbert space is the Kronecker product of the atomic
//! two-level spaces with atom 1 as the most significant factor. Each factor is
//! ordered `(|g>, |e>)`, so basis index `b` has atom `i` excited exactly when bit
//! `N - i` of `b` is set, and index 0 is the all-ground state.
//!
//! Density matrices are vectorised row-major: `vec(rho)[a * D + b] = rho[a][b]`,
//! so `vec(A rho B) = (A kron B^T) vec(rho)`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::ChainConfig;
use crate::couplings::CouplingMatrices;
use crate::error::{Error, Result};
use crate::linalg::PivotedQr;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Pivots below this fraction of the leading one count towards the kernel.
pub const KERNEL_TOLERANCE: f64 = 1e-12;
/// Accepted `||L rho||_2 / ||L||_F` for a steady state.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Default step of the RK4 integrator, in units of 1/gamma.
pub const DEFAULT_DT: f64 = 0.01;
const TRACE_DRIFT_LIMIT: f64 = 1e-6;

/// Bit of basis index that flags atom `i` (1-based) as excited.
pub fn excitation_bit(n_atoms: usize, i: usize) -> usize {
    1 << (n_atoms - i)
}

/// Lowering operator `S_i^- = |g_i><e_i|` on the full chain, built as a
/// Kronecker product with identities.
pub fn lowering(n_atoms: usize, i: usize) -> DMatrix<Complex64> {
    assert!(
        i >= 1 && i <= n_atoms,
        "atom index {i} outside 1..={n_atoms}"
    );
    let identity = DMatrix::<Complex64>::identity(2, 2);
    let sigma_minus = DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
    (1..=n_atoms).fold(DMatrix::from_element(1, 1, ONE), |acc, k| {
        acc.kronecker(if k == i { &sigma_minus } else { &identity })
    })
}

pub fn raising(n_atoms: usize, i: usize) -> DMatrix<Complex64> {
    lowering(n_atoms, i).adjoint()
}

/// Rotating-frame Hamiltonian in units of hbar * gamma.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian(pub DMatrix<Complex64>);

impl Hamiltonian {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.0 - self.0.adjoint()).camax()
    }
}

/// `H = w [ (Omega/2)(S_l^+ + S_l^-) + sum_{i != j} Omega_ij S_i^+ S_j^- ]` with the
/// coherent weight `w` from the config.
pub fn build_hamiltonian(cfg: &ChainConfig, cpl: &CouplingMatrices) -> Result<Hamiltonian> {
    let cfg = cfg.validate()?;
    let n = cfg.n_atoms;
    if cpl.n_atoms() != n {
        return Err(Error::Unsupported(format!(
            "coupling matrices are {}x{} for a {n}-atom chain",
            cpl.n_atoms(),
            cpl.n_atoms()
        )));
    }
    let w = cfg.coherent_weight.factor();
    let minus: Vec<_> = (1..=n).map(|i| lowering(n, i)).collect();
    let plus: Vec<_> = minus.iter().map(|m| m.adjoint()).collect();
    let l = cfg.driven_atom - 1;
    let mut h = (&plus[l] + &minus[l]) * Complex64::from(w * cfg.rabi_over_gamma / 2.0);
    for (i, p) in plus.iter().enumerate() {
        for (j, m) in minus.iter().enumerate() {
            if i != j && cpl.omega[(i, j)] != 0.0 {
                h += (p * m) * Complex64::from(w * cpl.omega[(i, j)]);
            }
        }
    }
    Ok(Hamiltonian(h))
}

/// Compressed-row copy of the generator for repeated products.
#[derive(Debug, Clone)]
struct Csr {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
}

impl Csr {
    fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let mut row_start = Vec::with_capacity(m.nrows() + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_start.push(0);
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != ZERO {
                    cols.push(c);
                    values.push(v);
                }
            }
            row_start.push(cols.len());
        }
        Csr {
            row_start,
            cols,
            values,
        }
    }

    fn mul_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_start[r]..self.row_start[r + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }
}

/// Superoperator of the master equation acting on row-major vectorised density
/// matrices.
#[derive(Debug, Clone)]
pub struct Generator {
    n_atoms: usize,
    matrix: DMatrix<Complex64>,
    sparse: Csr,
}

/// Adds `coef * (A kron B^T)` to `l`, i.e. the superoperator of `rho -> coef A rho B`.
fn add_sandwich(
    l: &mut DMatrix<Complex64>,
    coef: Complex64,
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) {
    let d = a.nrows();
    let nz = |m: &DMatrix<Complex64>| -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                if m[(r, c)] != ZERO {
                    out.push((r, c, m[(r, c)]));
                }
            }
        }
        out
    };
    let a_nz = nz(a);
    let b_nz = nz(b);
    for &(ar, ac, av) in &a_nz {
        for &(br, bc, bv) in &b_nz {
            // (A kron B^T)[(ar, bc), (ac, br)] = A[ar][ac] * B[br][bc]
            l[(ar * d + bc, ac * d + br)] += coef * av * bv;
        }
    }
}

/// `d rho/dt = -i[H, rho] - (1/2) sum_ij gamma_ij (S_i^+ S_j^- rho + rho S_i^+ S_j^- - 2 S_j^- rho S_i^+)`.
pub fn build_generator(h: &Hamiltonian, cpl: &CouplingMatrices) -> Generator {
    let n = cpl.n_atoms();
    let d = 1usize << n;
    assert_eq!(
        h.0.nrows(),
        d,
        "Hamiltonian dimension does not match {n} atoms"
    );
    let id = DMatrix::<Complex64>::identity(d, d);
    let mut l = DMatrix::<Complex64>::zeros(d * d, d * d);

    add_sandwich(&mut l, -I, &h.0, &id);
    add_sandwich(&mut l, I, &id, &h.0);

    let minus: Vec<_> = (1..=n).map(|i| lowering(n, i)).collect();
    let plus: Vec<_> = minus.iter().map(|m| m.adjoint()).collect();
    for (i, p) in plus.iter().enumerate() {
        for (j, m) in minus.iter().enumerate() {
            let g = cpl.gamma[(i, j)];
            if g == 0.0 {
                continue;
            }
            let hop = p * m;
            add_sandwich(&mut l, Complex64::from(-0.5 * g), &hop, &id);
            add_sandwich(&mut l, Complex64::from(-0.5 * g), &id, &hop);
            add_sandwich(&mut l, Complex64::from(g), m, p);
        }
    }
    let sparse = Csr::from_dense(&l);
    Generator {
        n_atoms: n,
        matrix: l,
        sparse,
    }
}

impl Generator {
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    /// Hilbert-space dimension `2^N`.
    pub fn hilbert_dim(&self) -> usize {
        1 << self.n_atoms
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = self.hilbert_dim();
        let x = to_vec(rho);
        let mut out = vec![ZERO; d * d];
        self.sparse.mul_into(&x, &mut out);
        from_vec(&out, d)
    }

    /// The generator restricted to Hermitian operators, written in the
    /// orthonormal basis described in [`hermitian_coordinates`]. Real, and with
    /// the same spectrum as the full superoperator.
    pub fn hermitian_representation(&self) -> DMatrix<f64> {
        let d = self.hilbert_dim();
        let n = d * d;
        let mut out = DMatrix::<f64>::zeros(n, n);
        let mut column = vec![ZERO; n];
        for a in 0..d {
            for b in 0..d {
                let l = a * d + b;
                // L applied to basis operator number l
                let ab = self.matrix.column(a * d + b);
                let ba = self.matrix.column(b * d + a);
                for p in 0..n {
                    column[p] = match a.cmp(&b) {
                        std::cmp::Ordering::Equal => ab[p],
                        std::cmp::Ordering::Less => (ab[p] + ba[p]) * FRAC_1_SQRT_2,
                        std::cmp::Ordering::Greater => (ab[p] - ba[p]) * I * FRAC_1_SQRT_2,
                    };
                }
                for r in 0..d {
                    for c in 0..d {
                        let k = r * d + c;
                        let rc = column[r * d + c];
                        let cr = column[c * d + r];
                        out[(k, l)] = match r.cmp(&c) {
                            std::cmp::Ordering::Equal => rc.re,
                            std::cmp::Ordering::Less => (rc.re + cr.re) * FRAC_1_SQRT_2,
                            std::cmp::Ordering::Greater => (rc.im - cr.im) * FRAC_1_SQRT_2,
                        };
                    }
                }
            }
        }
        out
    }
}

fn to_vec(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            v.push(m[(a, b)]);
        }
    }
    v
}

fn from_vec(v: &[Complex64], d: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |a, b| v[a * d + b])
}

/// Real coordinates of a Hermitian matrix in the orthonormal basis
/// `E_aa`, `(E_ab + E_ba)/sqrt2` (a < b) and `i(E_ab - E_ba)/sqrt2` (a > b).
/// Coordinate `a * D + b` is `rho_aa`, `sqrt2 Re rho_ab` above the diagonal and
/// `sqrt2 Im rho_ab` below it.
pub fn hermitian_coordinates(rho: &DMatrix<Complex64>) -> DVector<f64> {
    let d = rho.nrows();
    DVector::from_fn(d * d, |k, _| {
        let (a, b) = (k / d, k % d);
        match a.cmp(&b) {
            std::cmp::Ordering::Equal => rho[(a, a)].re,
            std::cmp::Ordering::Less => std::f64::consts::SQRT_2 * rho[(a, b)].re,
            std::cmp::Ordering::Greater => std::f64::consts::SQRT_2 * rho[(a, b)].im,
        }
    })
}

/// Inverse of [`hermitian_coordinates`].
pub fn from_hermitian_coordinates(x: &DVector<f64>, d: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |a, b| match a.cmp(&b) {
        std::cmp::Ordering::Equal => Complex64::from(x[a * d + a]),
        std::cmp::Ordering::Less => Complex64::new(x[a * d + b], -x[b * d + a]) * FRAC_1_SQRT_2,
        std::cmp::Ordering::Greater => Complex64::new(x[b * d + a], x[a * d + b]) * FRAC_1_SQRT_2,
    })
}

/// Atomic density matrix of an `N`-atom chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(DMatrix<Complex64>);

/// Distances of a density matrix from the physical set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateChecks {
    pub hermiticity_error: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl StateChecks {
    pub fn passes(&self, hermiticity: f64, trace: f64, eigen_floor: f64) -> bool {
        self.hermiticity_error <= hermiticity
            && self.trace_error <= trace
            && self.min_eigenvalue >= eigen_floor
    }
}

impl DensityMatrix {
    /// Wraps a matrix without checking it; see [`DensityMatrix::checks`].
    pub fn from_matrix(m: DMatrix<Complex64>) -> Self {
        assert!(
            m.is_square() && m.nrows().is_power_of_two(),
            "not a chain density matrix"
        );
        DensityMatrix(m)
    }

    /// Every atom in its ground state.
    pub fn ground(n_atoms: usize) -> Self {
        Self::basis_state(n_atoms, 0)
    }

    /// Projector onto basis state `index` (see the module-level convention).
    pub fn basis_state(n_atoms: usize, index: usize) -> Self {
        let d = 1 << n_atoms;
        let mut m = DMatrix::zeros(d, d);
        m[(index, index)] = ONE;
        DensityMatrix(m)
    }

    /// Projector onto a normalised pure state.
    pub fn pure(state: &DVector<Complex64>) -> Self {
        Self::from_matrix(state * state.adjoint())
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn checks(&self) -> StateChecks {
        let hermiticity_error = (&self.0 - self.0.adjoint()).camax();
        let trace_error = (self.trace() - ONE).norm();
        let hermitian = (&self.0 + self.0.adjoint()) * Complex64::from(0.5);
        let min_eigenvalue = hermitian.symmetric_eigenvalues().min();
        StateChecks {
            hermiticity_error,
            trace_error,
            min_eigenvalue,
        }
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (&self.0 - &other.0)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Relabels atoms `i -> N + 1 - i`.
    pub fn mirrored(&self) -> Self {
        let n = self.n_atoms();
        let flip = |b: usize| (0..n).fold(0, |acc, k| acc | (((b >> k) & 1) << (n - 1 - k)));
        let d = self.dim();
        DensityMatrix(DMatrix::from_fn(d, d, |a, b| self.0[(flip(a), flip(b))]))
    }

    /// Text dump: a `# dim D` header, then one line per row of space-separated
    /// `re,im` pairs in row-major order.
    pub fn to_text(&self) -> String {
        let d = self.dim();
        let mut s = format!("# dim {d}\n");
        for a in 0..d {
            let row: Vec<String> = (0..d)
                .map(|b| format!("{:e},{:e}", self.0[(a, b)].re, self.0[(a, b)].im))
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Io(format!("malformed density matrix dump: {msg}"));
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|pair| {
                    let (re, im) = pair.split_once(',').ok_or_else(|| bad("missing comma"))?;
                    let re: f64 = re.parse().map_err(|_| bad(re))?;
                    let im: f64 = im.parse().map_err(|_| bad(im))?;
                    Ok(Complex64::new(re, im))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let d = rows.len();
        if d == 0 || !d.is_power_of_two() || rows.iter().any(|r| r.len() != d) {
            return Err(bad("not a square 2^N matrix"));
        }
        Ok(DensityMatrix(DMatrix::from_fn(d, d, |a, b| rows[a][b])))
    }
}

/// Steady state together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// `||L vec(rho)||_2 / ||L||_F`.
    pub residual: f64,
    pub kernel_dimension: usize,
}

/// Solves `L rho = 0`, `tr rho = 1`.
///
/// The generator is written on the real Hermitian basis and factorised by
/// column-pivoted QR, whose diagonal gives the kernel dimension and whose null
/// vector gives a first solution. That solution then rescales the columns of the
/// trace-augmented system, which is solved again in the least-squares sense, so
/// that small elements (multi-excitation coherences of a weakly driven chain)
/// come out with relative rather than absolute accuracy.
pub fn steady_state(generator: &Generator) -> Result<SteadyState> {
    let d = generator.hilbert_dim();
    let n = d * d;
    let m = generator.hermitian_representation();

    let qr = PivotedQr::new(&m);
    let kernel_dimension = n - qr.rank(KERNEL_TOLERANCE);
    if kernel_dimension > 1 {
        return Err(Error::DegenerateKernel {
            dimension: kernel_dimension,
        });
    }
    let trace_of = |x: &DVector<f64>| (0..d).map(|a| x[a * d + a]).sum::<f64>();
    let first = qr.null_vector();
    let first = &first / trace_of(&first);

    let floor = f64::MIN_POSITIVE.sqrt();
    let scale: Vec<f64> = first.iter().map(|v| v.abs().max(floor)).collect();
    let mut augmented = DMatrix::<f64>::zeros(n + 1, n);
    for j in 0..n {
        for i in 0..n {
            augmented[(i, j)] = m[(i, j)] * scale[j];
        }
    }
    for a in 0..d {
        let j = a * d + a;
        augmented[(n, j)] = scale[j];
    }
    let mut rhs = DVector::<f64>::zeros(n + 1);
    rhs[n] = 1.0;
    for i in 0..=n {
        let row_max = augmented.row(i).camax();
        if row_max > 0.0 {
            augmented.row_mut(i).scale_mut(1.0 / row_max);
            rhs[i] /= row_max;
        }
    }
    let refined_qr = PivotedQr::new(&augmented);
    let rank = refined_qr.rank(1e-15);
    let y = refined_qr.least_squares(&rhs, rank);
    let x = DVector::from_fn(n, |j, _| y[j] * scale[j]);
    let x = &x / trace_of(&x);

    let rho = from_hermitian_coordinates(&x, d);
    let lrho = generator.apply(&rho);
    let residual = lrho.norm() / generator.matrix.norm();
    if residual.is_nan() || residual > RESIDUAL_TOLERANCE {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    Ok(SteadyState {
        rho: DensityMatrix(rho),
        residual,
        kernel_dimension: kernel_dimension.max(1),
    })
}

/// Classical fourth-order Runge-Kutta integration of the master equation from
/// `rho0` to `t_final` with step `dt` (shortened so the steps divide `t_final`).
pub fn evolve(
    rho0: &DensityMatrix,
    generator: &Generator,
    t_final: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    if t_final.is_nan() || dt.is_nan() || t_final <= 0.0 || dt <= 0.0 || !t_final.is_finite() {
        return Err(Error::InvalidTimeStep { t_final, dt });
    }
    let d = generator.hilbert_dim();
    assert_eq!(rho0.dim(), d, "state and generator sizes differ");
    let steps = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;

    let n = d * d;
    let mut x = to_vec(&rho0.0);
    let trace0 = rho0.trace();
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    let mut tmp = vec![ZERO; n];
    let half = Complex64::from(h / 2.0);
    let full = Complex64::from(h);
    let sixth = Complex64::from(h / 6.0);
    let two = Complex64::from(2.0);

    for _ in 0..steps {
        generator.sparse.mul_into(&x, &mut k1);
        for p in 0..n {
            tmp[p] = x[p] + half * k1[p];
        }
        generator.sparse.mul_into(&tmp, &mut k2);
        for p in 0..n {
            tmp[p] = x[p] + half * k2[p];
        }
        generator.sparse.mul_into(&tmp, &mut k3);
        for p in 0..n {
            tmp[p] = x[p] + full * k3[p];
        }
        generator.sparse.mul_into(&tmp, &mut k4);
        for p in 0..n {
            x[p] += sixth * (k1[p] + two * k2[p] + two * k3[p] + k4[p]);
        }
        let trace: Complex64 = (0..d).map(|a| x[a * d + a]).sum();
        let drift = (trace - trace0).norm();
        if drift.is_nan() || drift > TRACE_DRIFT_LIMIT {
            return Err(Error::UnstableIntegration { drift, dt: h });
        }
    }
    Ok(DensityMatrix(from_vec(&x, d)))
}

/// Convenience: config -> couplings -> Hamiltonian -> generator.
pub fn generator_for(cfg: &ChainConfig) -> Result<(CouplingMatrices, Hamiltonian, Generator)> {
    let cpl = crate::couplings::build_couplings(cfg)?;
    let h = build_hamiltonian(cfg, &cpl)?;
    let l = build_generator(&h, &cpl);
    Ok((cpl, h, l))
}

#[cfg(test)]
mod tests;
