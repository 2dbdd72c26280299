//! Lumped R-L circuit with coupled inductors, solved by modified nodal
//! analysis and stepped with the trapezoidal rule.
//!
//! Unknowns are `[node voltages..., branch currents...]`. Node 0 is ground
//! and carries no unknown. Every branch `k` between nodes `a -> b` obeys
//! `v_a - v_b = R_k i_k + sum_j L_kj di_j/dt + e_k(t)`, where `e_k` is an
//! optional sinusoidal source; branches with an all-zero inductance row are
//! algebraic, and open branches pin their current to zero.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::GenError;

pub const GROUND: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// Phase in radians: `e(n) = amplitude * sin(angle(n) + phase)`.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub resistance: f64,
    pub source: Option<Sinusoid>,
    pub open: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Trapezoidal,
    BackwardEuler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_nodes: usize,
    branches: Vec<Branch>,
    inductance: DMatrix<f64>,
}

/// Factored one-step update `A x_{n+1} = C x_n + S1 e_{n+1} + S0 e_n`.
pub struct Stepper {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    c: DMatrix<f64>,
    s_next: Vec<(usize, Sinusoid)>,
    s_prev: Vec<(usize, Sinusoid)>,
}

impl Circuit {
    /// Circuit with `n_nodes` nodes including ground.
    pub fn new(n_nodes: usize) -> Self {
        Self { n_nodes, branches: Vec::new(), inductance: DMatrix::zeros(0, 0) }
    }

    pub fn add_node(&mut self) -> usize {
        self.n_nodes += 1;
        self.n_nodes - 1
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_nodes - 1 + self.branches.len()
    }

    /// Index of branch `k`'s current in the unknown vector.
    pub fn current_index(&self, k: usize) -> usize {
        self.n_nodes - 1 + k
    }

    pub fn voltage_index(&self, node: usize) -> Option<usize> {
        (node != GROUND).then(|| node - 1)
    }

    pub fn add_branch(&mut self, from: usize, to: usize, resistance: f64, source: Option<Sinusoid>) -> usize {
        assert!(from < self.n_nodes && to < self.n_nodes, "branch endpoint out of range");
        self.branches.push(Branch { from, to, resistance, source, open: false });
        let n = self.branches.len();
        self.inductance = self.inductance.clone().resize(n, n, 0.0);
        n - 1
    }

    /// Series R-L branch with its own self inductance.
    pub fn add_rl(&mut self, from: usize, to: usize, r: f64, l: f64, source: Option<Sinusoid>) -> usize {
        let k = self.add_branch(from, to, r, source);
        self.inductance[(k, k)] = l;
        k
    }

    /// Couple existing branches through a symmetric inductance block.
    pub fn couple(&mut self, branches: &[usize], block: &DMatrix<f64>) {
        assert_eq!(block.nrows(), branches.len());
        for (i, &bi) in branches.iter().enumerate() {
            for (j, &bj) in branches.iter().enumerate() {
                self.inductance[(bi, bj)] = block[(i, j)];
            }
        }
    }

    pub fn set_open(&mut self, k: usize, open: bool) {
        self.branches[k].open = open;
    }

    pub fn branch(&self, k: usize) -> &Branch {
        &self.branches[k]
    }

    fn is_inductive(&self, k: usize) -> bool {
        !self.branches[k].open && self.inductance.row(k).iter().any(|&v| v != 0.0)
    }

    fn assemble(
        &self,
        method: Integrator,
        h: f64,
    ) -> (DMatrix<f64>, DMatrix<f64>, Vec<(usize, Sinusoid)>, Vec<(usize, Sinusoid)>) {
        let n = self.n_unknowns();
        let mut a = DMatrix::zeros(n, n);
        let mut c = DMatrix::zeros(n, n);
        let mut s_next = Vec::new();
        let mut s_prev = Vec::new();
        let kcl_row = |node: usize| node - 1;
        let nv = self.n_nodes - 1;
        for (k, br) in self.branches.iter().enumerate() {
            let ik = nv + k;
            if br.from != GROUND {
                a[(kcl_row(br.from), ik)] += 1.0;
            }
            if br.to != GROUND {
                a[(kcl_row(br.to), ik)] -= 1.0;
            }
            let row = nv + k;
            if br.open {
                a[(row, ik)] = 1.0;
                continue;
            }
            let inductive = self.is_inductive(k);
            let gain = match (inductive, method) {
                (false, _) => 0.0,
                (true, Integrator::Trapezoidal) => 2.0 / h,
                (true, Integrator::BackwardEuler) => 1.0 / h,
            };
            // v_a - v_b - R i - gain * L i
            if let Some(va) = self.voltage_index(br.from) {
                a[(row, va)] += 1.0;
                if inductive && method == Integrator::Trapezoidal {
                    c[(row, va)] -= 1.0;
                }
            }
            if let Some(vb) = self.voltage_index(br.to) {
                a[(row, vb)] -= 1.0;
                if inductive && method == Integrator::Trapezoidal {
                    c[(row, vb)] += 1.0;
                }
            }
            a[(row, ik)] -= br.resistance;
            if inductive && method == Integrator::Trapezoidal {
                c[(row, ik)] += br.resistance;
            }
            if inductive {
                for j in 0..self.branches.len() {
                    let l = self.inductance[(k, j)];
                    if l != 0.0 && !self.branches[j].open {
                        a[(row, nv + j)] -= gain * l;
                        c[(row, nv + j)] -= gain * l;
                    }
                }
            }
            if let Some(src) = br.source {
                s_next.push((row, src));
                if inductive && method == Integrator::Trapezoidal {
                    s_prev.push((row, src));
                }
            }
        }
        // A node reached only through open branches floats; pin it to ground.
        for node in 1..self.n_nodes {
            let connected = self.branches.iter().any(|b| !b.open && (b.from == node || b.to == node));
            if !connected {
                let row = kcl_row(node);
                a.row_mut(row).fill(0.0);
                a[(row, node - 1)] = 1.0;
            }
        }
        (a, c, s_next, s_prev)
    }

    pub fn stepper(&self, method: Integrator, h: f64) -> Result<Stepper, GenError> {
        let (a, c, s_next, s_prev) = self.assemble(method, h);
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(GenError::SingularMatrix("circuit system matrix".into()));
        }
        Ok(Stepper { lu, c, s_next, s_prev })
    }

    /// Exact periodic orbit of the trapezoidal recurrence under the circuit's
    /// sources at `theta` radians per step. Returns the complex amplitude
    /// `X` with `x_n = Im(X e^{j angle(n)})`.
    pub fn discrete_steady_state(&self, h: f64, theta: f64) -> Result<Vec<Complex64>, GenError> {
        let (a, c, s_next, s_prev) = self.assemble(Integrator::Trapezoidal, h);
        let n = a.nrows();
        let z = Complex64::from_polar(1.0, theta);
        let m = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * z - c[(i, j)]);
        let mut rhs = DVector::from_element(n, Complex64::new(0.0, 0.0));
        for &(row, s) in &s_next {
            rhs[row] += Complex64::from_polar(s.amplitude, s.phase) * z;
        }
        for &(row, s) in &s_prev {
            rhs[row] += Complex64::from_polar(s.amplitude, s.phase);
        }
        let x = m.lu().solve(&rhs).ok_or_else(|| GenError::SingularMatrix("steady-state phasor system".into()))?;
        Ok(x.iter().copied().collect())
    }

    /// Stored magnetic energy `1/2 i^T L i` of a state vector.
    pub fn magnetic_energy(&self, x: &[f64]) -> f64 {
        let nv = self.n_nodes - 1;
        let nb = self.branches.len();
        let i = DVector::from_iterator(nb, x[nv..nv + nb].iter().copied());
        0.5 * i.dot(&(&self.inductance * &i))
    }
}

pub fn phasor_sample(x: &[Complex64], angle: f64) -> Vec<f64> {
    let rot = Complex64::from_polar(1.0, angle);
    x.iter().map(|v| (v * rot).im).collect()
}

impl Stepper {
    /// Advance one step. `angle_prev`/`angle_next` are the source angles at
    /// the old and new sample.
    pub fn step(&self, x: &[f64], angle_prev: f64, angle_next: f64) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        let mut rhs = &self.c * xv;
        for &(row, s) in &self.s_next {
            rhs[row] += s.amplitude * (angle_next + s.phase).sin();
        }
        for &(row, s) in &self.s_prev {
            rhs[row] += s.amplitude * (angle_prev + s.phase).sin();
        }
        self.lu.solve(&rhs).expect("factored matrix is invertible").as_slice().to_vec()
    }
}
