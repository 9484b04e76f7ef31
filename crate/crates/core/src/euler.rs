//! Compressible Euler physics for a calorically perfect gas in one or two dimensions.
//!
//! States are stored in `[f64; 4]`; in 1D only the first three slots
//! `(ρ, ρu, e)` are used and the last one stays zero.

use crate::error::{DgdError, Result};
use crate::mesh::Point;

pub type State = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gas {
    pub gamma: f64,
    pub dim: usize,
}

/// Precomputed Ismail–Roe parameter vector `z = sqrt(ρ/p) (1, u, v, p)` and its logs.
#[derive(Debug, Clone, Copy)]
pub struct IrParams {
    pub z1: f64,
    pub zu: [f64; 2],
    pub z4: f64,
    pub ln_z1: f64,
    pub ln_z4: f64,
}

/// Logarithmic mean `(a - b) / (ln a - ln b)`, by series when `a ≈ b`.
pub fn logmean(a: f64, b: f64) -> f64 {
    logmean_with_logs(a, b, a.ln(), b.ln())
}

fn logmean_with_logs(a: f64, b: f64, ln_a: f64, ln_b: f64) -> f64 {
    let xi = b / a;
    let f = (xi - 1.0) / (xi + 1.0);
    let u = f * f;
    if u < 1e-4 {
        // ln(xi) / (2 f) = 1 + u/3 + u^2/5 + u^3/7 + ...
        let series = 1.0 + u / 3.0 + u * u / 5.0 + u * u * u / 7.0;
        0.5 * (a + b) / series
    } else {
        (a - b) / (ln_a - ln_b)
    }
}

impl Gas {
    pub fn new(gamma: f64, dim: usize) -> Self {
        assert!(dim == 1 || dim == 2, "dimension must be 1 or 2");
        Gas { gamma, dim }
    }

    pub fn nvar(&self) -> usize {
        self.dim + 2
    }

    fn energy_index(&self) -> usize {
        self.dim + 1
    }

    /// Conservative state from density, velocity and pressure.
    pub fn from_primitive(&self, rho: f64, vel: Point, p: f64) -> State {
        let mut u = [0.0; 4];
        u[0] = rho;
        let mut ke = 0.0;
        for d in 0..self.dim {
            u[1 + d] = rho * vel[d];
            ke += vel[d] * vel[d];
        }
        u[self.energy_index()] = p / (self.gamma - 1.0) + 0.5 * rho * ke;
        u
    }

    pub fn velocity(&self, u: &State) -> Point {
        let mut v = [0.0; 2];
        for d in 0..self.dim {
            v[d] = u[1 + d] / u[0];
        }
        v
    }

    pub fn pressure(&self, u: &State) -> f64 {
        let mut m2 = 0.0;
        for d in 0..self.dim {
            m2 += u[1 + d] * u[1 + d];
        }
        (self.gamma - 1.0) * (u[self.energy_index()] - 0.5 * m2 / u[0])
    }

    pub fn is_physical(&self, u: &State) -> bool {
        u[0] > 0.0 && self.pressure(u) > 0.0 && u.iter().all(|x| x.is_finite())
    }

    pub fn sound_speed(&self, u: &State) -> f64 {
        (self.gamma * self.pressure(u) / u[0]).sqrt()
    }

    /// `|u·n| + c` for a unit `n`.
    pub fn wave_speed(&self, u: &State, n: Point) -> f64 {
        let v = self.velocity(u);
        (v[0] * n[0] + v[1] * n[1]).abs() + self.sound_speed(u)
    }

    /// Largest `|u·n| + c` over all directions.
    pub fn max_wave_speed(&self, u: &State) -> f64 {
        let v = self.velocity(u);
        (v[0] * v[0] + v[1] * v[1]).sqrt() + self.sound_speed(u)
    }

    /// Directional flux `n_x F_x + n_y F_y` (`n` need not be unit).
    pub fn flux(&self, u: &State, n: Point) -> State {
        let p = self.pressure(u);
        let v = self.velocity(u);
        let un = v[0] * n[0] + v[1] * n[1];
        let mut f = [0.0; 4];
        f[0] = u[0] * un;
        for d in 0..self.dim {
            f[1 + d] = u[1 + d] * un + p * n[d];
        }
        let ie = self.energy_index();
        f[ie] = (u[ie] + p) * un;
        f
    }

    /// Thermodynamic entropy `s = ln(p / ρ^γ)`.
    pub fn thermo_entropy(&self, u: &State) -> f64 {
        (self.pressure(u) / u[0].powf(self.gamma)).ln()
    }

    /// Mathematical entropy `𝒮 = -ρ s / (γ - 1)`.
    pub fn entropy(&self, u: &State) -> f64 {
        -u[0] * self.thermo_entropy(u) / (self.gamma - 1.0)
    }

    /// Entropy flux potential `ψ_n = ρ u·n`.
    pub fn entropy_potential(&self, u: &State, n: Point) -> f64 {
        let mut s = 0.0;
        for d in 0..self.dim {
            s += u[1 + d] * n[d];
        }
        s
    }

    /// Entropy flux `𝒢_n = 𝒮 u·n`.
    pub fn entropy_flux(&self, u: &State, n: Point) -> f64 {
        let v = self.velocity(u);
        self.entropy(u) * (v[0] * n[0] + v[1] * n[1])
    }

    /// `w = ∂𝒮/∂u`.
    pub fn entropy_vars(&self, u: &State) -> Result<State> {
        let p = self.pressure(u);
        if !(u[0] > 0.0 && p > 0.0) {
            return Err(DgdError::Nonphysical { element: usize::MAX, node: usize::MAX, rho: u[0], pressure: p });
        }
        let g = self.gamma;
        let s = (p / u[0].powf(g)).ln();
        let v = self.velocity(u);
        let beta = u[0] / p;
        let mut w = [0.0; 4];
        w[0] = (g - s) / (g - 1.0) - 0.5 * beta * (v[0] * v[0] + v[1] * v[1]);
        for d in 0..self.dim {
            w[1 + d] = beta * v[d];
        }
        w[self.energy_index()] = -beta;
        Ok(w)
    }

    /// Inverse of [`Gas::entropy_vars`].
    pub fn state_from_entropy_vars(&self, w: &State) -> Result<State> {
        let beta = -w[self.energy_index()];
        if !(beta > 0.0) || w.iter().any(|x| !x.is_finite()) {
            return Err(DgdError::InadmissibleEntropyVars(w[self.energy_index()]));
        }
        let g = self.gamma;
        let mut vel = [0.0; 2];
        let mut v2 = 0.0;
        for d in 0..self.dim {
            vel[d] = w[1 + d] / beta;
            v2 += vel[d] * vel[d];
        }
        let s = g - (g - 1.0) * (w[0] + 0.5 * beta * v2);
        let p = ((s + g * beta.ln()) / (1.0 - g)).exp();
        let rho = beta * p;
        if !(rho > 0.0 && p > 0.0 && rho.is_finite() && p.is_finite()) {
            return Err(DgdError::InadmissibleEntropyVars(w[self.energy_index()]));
        }
        Ok(self.from_primitive(rho, vel, p))
    }

    /// `∂u/∂w`, symmetric positive definite for physical states.
    pub fn dudw(&self, u: &State) -> [[f64; 4]; 4] {
        let g = self.gamma;
        let p = self.pressure(u);
        let rho = u[0];
        let v = self.velocity(u);
        let ie = self.energy_index();
        let e = u[ie];
        let h = (e + p) / rho;
        let a2 = g * p / rho;
        let mut m = [[0.0; 4]; 4];
        m[0][0] = rho;
        m[0][ie] = e;
        m[ie][ie] = rho * h * h - a2 * p / (g - 1.0);
        for d in 0..self.dim {
            m[0][1 + d] = rho * v[d];
            m[1 + d][ie] = rho * v[d] * h;
            for c in 0..self.dim {
                m[1 + d][1 + c] = rho * v[d] * v[c] + if c == d { p } else { 0.0 };
            }
        }
        for i in 0..4 {
            for j in 0..i {
                m[i][j] = m[j][i];
            }
        }
        m
    }

    pub fn ir_params(&self, u: &State) -> IrParams {
        let p = self.pressure(u);
        let z1 = (u[0] / p).sqrt();
        let v = self.velocity(u);
        let z4 = (u[0] * p).sqrt();
        IrParams { z1, zu: [z1 * v[0], z1 * v[1]], z4, ln_z1: z1.ln(), ln_z4: z4.ln() }
    }

    /// Ismail–Roe entropy-conservative flux from precomputed parameters.
    /// Linear in `n`, which need not be unit.
    pub fn ismail_roe_params(&self, a: &IrParams, b: &IrParams, n: Point) -> State {
        let g = self.gamma;
        let z1 = 0.5 * (a.z1 + b.z1);
        let z4 = 0.5 * (a.z4 + b.z4);
        let z1_ln = logmean_with_logs(a.z1, b.z1, a.ln_z1, b.ln_z1);
        let z4_ln = logmean_with_logs(a.z4, b.z4, a.ln_z4, b.ln_z4);
        let rho = z1 * z4_ln;
        let mut vel = [0.0; 2];
        let mut v2 = 0.0;
        for d in 0..self.dim {
            vel[d] = 0.5 * (a.zu[d] + b.zu[d]) / z1;
            v2 += vel[d] * vel[d];
        }
        let p1 = z4 / z1;
        let p2 = (g + 1.0) / (2.0 * g) * z4_ln / z1_ln + (g - 1.0) / (2.0 * g) * z4 / z1;
        let hh = g * p2 / (rho * (g - 1.0)) + 0.5 * v2;
        let mflux = rho * (vel[0] * n[0] + vel[1] * n[1]);
        let mut f = [0.0; 4];
        f[0] = mflux;
        for d in 0..self.dim {
            f[1 + d] = mflux * vel[d] + p1 * n[d];
        }
        f[self.energy_index()] = mflux * hh;
        f
    }

    pub fn ismail_roe_flux(&self, ul: &State, ur: &State, n: Point) -> State {
        self.ismail_roe_params(&self.ir_params(ul), &self.ir_params(ur), n)
    }

    /// Local Lax–Friedrichs penalty `½ λ_max (u_L - u_R)` for a unit normal `n`.
    pub fn interface_dissipation(&self, ul: &State, ur: &State, n: Point) -> State {
        let lam = self.wave_speed(ul, n).max(self.wave_speed(ur, n));
        let mut d = [0.0; 4];
        for i in 0..self.nvar() {
            d[i] = 0.5 * lam * (ul[i] - ur[i]);
        }
        d
    }

    /// Same penalty taking entropy variables.
    pub fn interface_dissipation_w(&self, wl: &State, wr: &State, n: Point) -> Result<State> {
        let ul = self.state_from_entropy_vars(wl)?;
        let ur = self.state_from_entropy_vars(wr)?;
        Ok(self.interface_dissipation(&ul, &ur, n))
    }
}
