//! Qubit dissipation with an exponential memory kernel k(t) = gamma
//! exp(-gamma t) convolved against the Markovian semigroup. The damping
//! basis diagonalizes the map, so each basis coefficient just gets a scalar
//! factor xi_k(t) with a closed Laplace inverse.

use crate::bell::{CorrelationModel, SearchBox};
use crate::phase_space::{displaced_parity_coherent, CatState, Spin};
use crate::{Error, Result};
use num_complex::Complex64 as C64;

#[derive(Clone, Copy, Debug)]
pub struct PostMarkovParams {
    /// Markovian dissipation rate.
    pub gamma0: f64,
    /// Memory-kernel rate; large gamma/gamma0 is the Markovian limit.
    pub gamma: f64,
    /// Thermal occupation of the qubit bath.
    pub nbar: f64,
}

impl PostMarkovParams {
    pub fn new(gamma0: f64, gamma: f64, nbar: f64) -> Result<Self> {
        if !(gamma0 > 0.0) || !(gamma > 0.0) || !(nbar >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need gamma0 > 0, gamma > 0, nbar >= 0, got ({gamma0}, {gamma}, {nbar})"
            )));
        }
        Ok(PostMarkovParams { gamma0, gamma, nbar })
    }
}

type Spin2 = [[C64; 2]; 2];

const ZERO2: Spin2 = [[C64::new(0.0, 0.0), C64::new(0.0, 0.0)]; 2];

/// Eigenoperators Q_k of the thermal damping Liouvillian and their rates:
/// Q1 the stationary state, Q2 = sigma_z, Q3 = sigma_+, Q4 = sigma_-, with
/// lambda = (0, -gamma0 (2 nbar + 1), -gamma0 (nbar + 1/2) twice).
/// Basis order is fixed; `index` arguments below are 1-based to match it.
#[derive(Clone, Debug)]
pub struct DampingBasis {
    pub operators: [Spin2; 4],
    pub lambdas: [f64; 4],
}

pub fn damping_basis(p: &PostMarkovParams) -> DampingBasis {
    let w = 2.0 * p.nbar + 1.0;
    let mut q1 = ZERO2;
    q1[0][0] = C64::new(p.nbar / w, 0.0);
    q1[1][1] = C64::new((p.nbar + 1.0) / w, 0.0);
    let mut q2 = ZERO2;
    q2[0][0] = C64::new(1.0, 0.0);
    q2[1][1] = C64::new(-1.0, 0.0);
    let mut q3 = ZERO2;
    q3[0][1] = C64::new(1.0, 0.0);
    let mut q4 = ZERO2;
    q4[1][0] = C64::new(1.0, 0.0);
    DampingBasis {
        operators: [q1, q2, q3, q4],
        lambdas: [0.0, -p.gamma0 * w, -0.5 * p.gamma0 * w, -0.5 * p.gamma0 * w],
    }
}

/// Thermal damping Liouvillian on a 2x2 operator, spin order (up, down);
/// up is the excited state, sigma_- = |down><up|. Only the tests drive the
/// generator directly; evolution goes through the damping basis.
#[cfg(test)]
fn liouvillian_apply(rho: &Spin2, p: &PostMarkovParams) -> Spin2 {
    let a = rho[0][0];
    let b = rho[0][1];
    let c = rho[1][0];
    let d = rho[1][1];
    let down = p.gamma0 * (p.nbar + 1.0);
    let up = p.gamma0 * p.nbar;
    let mut out = ZERO2;
    out[0][0] = -down * a + up * d;
    out[1][1] = down * a - up * d;
    out[0][1] = -0.5 * (down + up) * b;
    out[1][0] = -0.5 * (down + up) * c;
    out
}

/// xi_k(t) = [gamma e^{lambda t} + lambda e^{-gamma t}] / (gamma + lambda),
/// the Laplace inverse of 1/(s - lambda k~(s - lambda)). Evaluated as
/// e^{-gamma t} [1 + gamma expm1((gamma + lambda) t)/(gamma + lambda)] so the
/// confluent point gamma + lambda = 0 is the series limit (1 + gamma t)
/// e^{-gamma t} instead of 0/0.
pub fn kernel_coefficient(k: usize, t: f64, p: &PostMarkovParams) -> Result<f64> {
    if !(1..=4).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "damping-basis index must be 1..=4, got {k}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    let lambda = damping_basis(p).lambdas[k - 1];
    if lambda == 0.0 {
        // trace conservation
        return Ok(1.0);
    }
    let s = p.gamma + lambda;
    let st = s * t;
    if st.abs() < 1e-8 {
        let bracket = 1.0 + p.gamma * t * (1.0 + 0.5 * st);
        return Ok((-p.gamma * t).exp() * bracket);
    }
    if st < 50.0 {
        // near the confluence the two exponentials nearly cancel; the
        // expm1 grouping keeps full precision there
        let bracket = 1.0 + p.gamma * st.exp_m1() / s;
        return Ok((-p.gamma * t).exp() * bracket);
    }
    // far from the confluence both terms are well separated and the naive
    // grouping avoids overflowing expm1
    Ok((p.gamma * (lambda * t).exp() + lambda * (-p.gamma * t).exp()) / s)
}

/// Expansion of a 2x2 operator in the damping basis. The dual coefficients
/// are alpha = (tr X, X_uu - tr X nbar/(2 nbar + 1), X_ud, X_du).
fn basis_coefficients(x: &Spin2, p: &PostMarkovParams) -> [C64; 4] {
    let tr = x[0][0] + x[1][1];
    [
        tr,
        x[0][0] - tr * (p.nbar / (2.0 * p.nbar + 1.0)),
        x[0][1],
        x[1][0],
    ]
}

/// Apply the evolved map: expand, scale each coefficient by xi_k(t), resum.
pub fn evolve_spin_operator(x: &Spin2, t: f64, p: &PostMarkovParams) -> Result<Spin2> {
    let basis = damping_basis(p);
    let alphas = basis_coefficients(x, p);
    let mut out = ZERO2;
    for k in 0..4 {
        let xi = kernel_coefficient(k + 1, t, p)?;
        let q = &basis.operators[k];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] += alphas[k] * xi * q[r][c];
            }
        }
    }
    Ok(out)
}

/// Evolved basis block Lambda_t(|i><j|).
pub fn evolve_spin_block(i: Spin, j: Spin, t: f64, p: &PostMarkovParams) -> Result<Spin2> {
    let mut x = ZERO2;
    let row = if i == Spin::Up { 0 } else { 1 };
    let col = if j == Spin::Up { 0 } else { 1 };
    x[row][col] = C64::new(1.0, 0.0);
    evolve_spin_operator(&x, t, p)
}

/// Choi matrix of the map at time t, sum_ij |i><j| (x) Lambda_t(|i><j|),
/// as a dense 4x4 in the (spin, spin) product basis. Its minimum eigenvalue
/// certifies complete positivity.
pub fn choi_matrix(t: f64, p: &PostMarkovParams) -> Result<ndarray::Array2<C64>> {
    let mut choi = ndarray::Array2::<C64>::zeros((4, 4));
    for (i, si) in [Spin::Up, Spin::Down].iter().enumerate() {
        for (j, sj) in [Spin::Up, Spin::Down].iter().enumerate() {
            let block = evolve_spin_block(*si, *sj, t, p)?;
            for a in 0..2 {
                for b in 0..2 {
                    choi[[2 * i + a, 2 * j + b]] = block[a][b];
                }
            }
        }
    }
    Ok(choi)
}

/// Correlation model: evolved spin blocks tensored with the static coherent
/// CV blocks. The sweep variable is tau_sl = gamma0 t.
pub struct PostMarkovModel {
    pub params: PostMarkovParams,
    pub cat: CatState,
}

impl PostMarkovModel {
    pub fn new(params: PostMarkovParams, cat: CatState) -> Self {
        PostMarkovModel { params, cat }
    }
}

impl CorrelationModel for PostMarkovModel {
    fn components(&self, beta: C64, t: f64) -> Result<(f64, f64)> {
        let t_phys = t / self.params.gamma0;
        let d = self.cat.d();
        let mut fs = C64::new(0.0, 0.0);
        let mut fc = C64::new(0.0, 0.0);
        for i in [Spin::Up, Spin::Down] {
            for j in [Spin::Up, Spin::Down] {
                let s = evolve_spin_block(i, j, t_phys, &self.params)?;
                // CV factor of the block |xi_i><xi_j| is <xi_j|Pi(b)|xi_i>
                let t_cv = displaced_parity_coherent(
                    beta,
                    C64::new(j.branch_amplitude(d), 0.0),
                    C64::new(i.branch_amplitude(d), 0.0),
                );
                let tr_x = s[1][0] + s[0][1];
                let tr_z = s[0][0] - s[1][1];
                fs += 0.5 * tr_x * t_cv;
                fc += 0.5 * tr_z * t_cv;
            }
        }
        debug_assert!(fs.im.abs() < 1e-10 && fc.im.abs() < 1e-10);
        Ok((fs.re, fc.re))
    }

    fn descriptor(&self) -> String {
        format!(
            "postmarkov(gamma0={}, gamma={}, nbar={}, D={})",
            self.params.gamma0, self.params.gamma, self.params.nbar,
            self.cat.d()
        )
    }

    fn search_box(&self) -> SearchBox {
        SearchBox::real_axis()
    }
}
