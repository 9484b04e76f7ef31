//! Initial conditions and exact solutions.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{DgdError, Result};
use crate::euler::{Gas, State};
use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemId {
    Advection,
    EntropyWave,
    UnsteadyVortex,
    Sod,
}

impl FromStr for ProblemId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "advection" => Ok(ProblemId::Advection),
            "entropy-wave" => Ok(ProblemId::EntropyWave),
            "unsteady-vortex" => Ok(ProblemId::UnsteadyVortex),
            "sod" => Ok(ProblemId::Sod),
            _ => Err(format!("unknown problem '{s}' (advection, entropy-wave, unsteady-vortex, sod)")),
        }
    }
}

impl ProblemId {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemId::Advection => "advection",
            ProblemId::EntropyWave => "entropy-wave",
            ProblemId::UnsteadyVortex => "unsteady-vortex",
            ProblemId::Sod => "sod",
        }
    }

    pub fn default_final_time(&self) -> f64 {
        match self {
            ProblemId::Advection | ProblemId::EntropyWave => 1.0,
            ProblemId::UnsteadyVortex => 1.0 / VortexParams::default().k,
            ProblemId::Sod => 0.3,
        }
    }

    /// CFL number for the implicit runs. The shock tube uses 0.5: at 1.0 the
    /// temporal error already shows in the p = 2 L1 errors at K = 400.
    pub fn default_cfl(&self) -> f64 {
        match self {
            ProblemId::UnsteadyVortex => 10.0,
            ProblemId::Sod => 0.5,
            ProblemId::Advection | ProblemId::EntropyWave => 1.0,
        }
    }

    pub fn default_dim(&self) -> usize {
        match self {
            ProblemId::UnsteadyVortex => 2,
            _ => 1,
        }
    }

    pub fn supports_dim(&self, dim: usize) -> bool {
        match self {
            ProblemId::Advection => dim == 1 || dim == 2,
            _ => dim == self.default_dim(),
        }
    }
}

/// Periodic sine profile advected with velocity `λ`: `sin 2π(x - λ_x t)`, times
/// `sin 2π(y - λ_y t)` in 2D.
pub fn advection_exact(dim: usize, velocity: Point, x: Point, t: f64) -> f64 {
    let a = (2.0 * PI * (x[0] - velocity[0] * t)).sin();
    if dim == 1 {
        a
    } else {
        a * (2.0 * PI * (x[1] - velocity[1] * t)).sin()
    }
}

/// Entropy wave `ρ = 2 + ½ sin 2π(x - t)`, `u = 1`, `p = 1` (exact 1D Euler solution).
pub fn entropy_wave(gas: &Gas, x: f64, t: f64) -> State {
    let rho = 2.0 + 0.5 * (2.0 * PI * (x - t)).sin();
    gas.from_primitive(rho, [1.0, 0.0], 1.0)
}

/// How the vortex formula is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VortexForm {
    /// The standard isentropic vortex scaled by `k`: velocity `k (1 - ε/2π (y-y₀) e^{f/2}, ε/2π (x-x₀) e^{f/2})`,
    /// pressure `k² ρ^γ/(γM²)`, center moving with speed `k`. An exact Euler solution.
    Scaled,
    /// The printed formula taken at face value: the `u`, `v` rows are momenta with the extra
    /// factors of `k`, and `p = ρ^γ` in the energy row. Not a solution of the Euler equations.
    Literal,
}

impl FromStr for VortexForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "scaled" => Ok(VortexForm::Scaled),
            "literal" => Ok(VortexForm::Literal),
            _ => Err(format!("unknown vortex form '{s}' (scaled, literal)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexParams {
    pub mach: f64,
    pub epsilon: f64,
    pub k: f64,
    pub center: Point,
    pub form: VortexForm,
}

impl Default for VortexParams {
    fn default() -> Self {
        VortexParams { mach: 0.5, epsilon: 1.0, k: 15.0, center: [0.5, 0.5], form: VortexForm::Scaled }
    }
}

/// Unsteady vortex at time `t` (only `t = 0` for the literal form, which has no exact evolution).
pub fn unsteady_vortex(gas: &Gas, prm: &VortexParams, x: Point, t: f64) -> State {
    let g = gas.gamma;
    let k = prm.k;
    let (x0, y0) = (prm.center[0], prm.center[1]);
    let (dx, dy) = match prm.form {
        VortexForm::Scaled => (x[0] - x0 - k * t, x[1] - y0),
        VortexForm::Literal => (x[0] - x0 - t, x[1] - y0),
    };
    let f = 1.0 - (dx * dx + dy * dy);
    let rho = (1.0 - prm.epsilon.powi(2) * (g - 1.0) * prm.mach.powi(2) / (8.0 * PI * PI) * f.exp()).powf(1.0 / (g - 1.0));
    let ef = (0.5 * f).exp();
    let a = prm.epsilon / (2.0 * PI) * ef;
    match prm.form {
        VortexForm::Scaled => {
            let vel = [k * (1.0 - a * dy), k * a * dx];
            gas.from_primitive(rho, vel, k * k * rho.powf(g) / (g * prm.mach * prm.mach))
        }
        VortexForm::Literal => {
            let mu = rho * k * (1.0 - a * k * dy);
            let mv = rho * k * k * a * dx;
            let e = k * k * rho.powf(g) / (g - 1.0) + (mu * mu + mv * mv) / (2.0 * rho);
            [rho, mu, mv, e]
        }
    }
}

pub fn unsteady_vortex_ic(gas: &Gas, prm: &VortexParams, x: Point) -> State {
    unsteady_vortex(gas, prm, x, 0.0)
}

/// Left and right primitive states `(ρ, u, p)` of the shock tube.
pub const SOD_LEFT: (f64, f64, f64) = (5.0, 0.0, 1.0);
pub const SOD_RIGHT: (f64, f64, f64) = (0.5, 0.0, 0.1);
pub const SOD_INTERFACE: f64 = 0.5;

/// Shock-tube initial state; `x = 0.5` belongs to the right state.
pub fn sod_ic(gas: &Gas, x: f64) -> State {
    let (r, u, p) = if x < SOD_INTERFACE { SOD_LEFT } else { SOD_RIGHT };
    gas.from_primitive(r, [u, 0.0], p)
}

/// Exact solution of a 1D Riemann problem for a perfect gas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannSolution {
    pub gamma: f64,
    pub left: (f64, f64, f64),
    pub right: (f64, f64, f64),
    pub x0: f64,
    pub p_star: f64,
    pub u_star: f64,
}

impl RiemannSolution {
    /// Solve for the star state by Newton iteration on the pressure function.
    pub fn new(gamma: f64, left: (f64, f64, f64), right: (f64, f64, f64), x0: f64) -> Result<Self> {
        let (rl, ul, pl) = left;
        let (rr, ur, pr) = right;
        let cl = (gamma * pl / rl).sqrt();
        let cr = (gamma * pr / rr).sqrt();
        if 2.0 * (cl + cr) / (gamma - 1.0) <= ur - ul {
            return Err(DgdError::Riemann("vacuum generated".into()));
        }
        let mut p = (0.5 * (pl + pr)).max(1e-8);
        for _ in 0..100 {
            let (fl, dl) = pressure_function(gamma, p, rl, pl);
            let (fr, dr) = pressure_function(gamma, p, rr, pr);
            let g = fl + fr + ur - ul;
            let dp = g / (dl + dr);
            let mut next = p - dp;
            if next <= 0.0 {
                next = 0.5 * p;
            }
            let change = (next - p).abs() / (0.5 * (next + p));
            p = next;
            if change < 1e-15 {
                break;
            }
        }
        let (fl, _) = pressure_function(gamma, p, rl, pl);
        let (fr, _) = pressure_function(gamma, p, rr, pr);
        let res = fl + fr + ur - ul;
        if !(res.abs() < 1e-12) {
            return Err(DgdError::Riemann(format!("star pressure iteration did not converge (residual {res:e})")));
        }
        let u = 0.5 * (ul + ur) + 0.5 * (fr - fl);
        Ok(RiemannSolution { gamma, left, right, x0, p_star: p, u_star: u })
    }

    pub fn sod() -> Result<Self> {
        Self::new(1.4, SOD_LEFT, SOD_RIGHT, SOD_INTERFACE)
    }

    /// Residual of the pressure equation at the computed star pressure.
    pub fn pressure_residual(&self) -> f64 {
        let (fl, _) = pressure_function(self.gamma, self.p_star, self.left.0, self.left.2);
        let (fr, _) = pressure_function(self.gamma, self.p_star, self.right.0, self.right.2);
        fl + fr + self.right.1 - self.left.1
    }

    /// Primitive state `(ρ, u, p)` at `(x, t)`.
    pub fn primitive(&self, x: f64, t: f64) -> (f64, f64, f64) {
        if t <= 0.0 {
            return if x < self.x0 { self.left } else { self.right };
        }
        let g = self.gamma;
        let s = (x - self.x0) / t;
        let ps = self.p_star;
        let us = self.u_star;
        if s <= us {
            let (rl, ul, pl) = self.left;
            let cl = (g * pl / rl).sqrt();
            if ps > pl {
                let sl = ul - cl * ((g + 1.0) / (2.0 * g) * ps / pl + (g - 1.0) / (2.0 * g)).sqrt();
                if s <= sl {
                    self.left
                } else {
                    let r = rl * (ps / pl + (g - 1.0) / (g + 1.0)) / ((g - 1.0) / (g + 1.0) * ps / pl + 1.0);
                    (r, us, ps)
                }
            } else {
                let head = ul - cl;
                let cs = cl * (ps / pl).powf((g - 1.0) / (2.0 * g));
                let tail = us - cs;
                if s <= head {
                    self.left
                } else if s >= tail {
                    (rl * (ps / pl).powf(1.0 / g), us, ps)
                } else {
                    let c = 2.0 / (g + 1.0) * (cl + (g - 1.0) / 2.0 * (ul - s));
                    let u = 2.0 / (g + 1.0) * (cl + (g - 1.0) / 2.0 * ul + s);
                    let r = rl * (c / cl).powf(2.0 / (g - 1.0));
                    (r, u, pl * (c / cl).powf(2.0 * g / (g - 1.0)))
                }
            }
        } else {
            let (rr, ur, pr) = self.right;
            let cr = (g * pr / rr).sqrt();
            if ps > pr {
                let sr = ur + cr * ((g + 1.0) / (2.0 * g) * ps / pr + (g - 1.0) / (2.0 * g)).sqrt();
                if s >= sr {
                    self.right
                } else {
                    let r = rr * (ps / pr + (g - 1.0) / (g + 1.0)) / ((g - 1.0) / (g + 1.0) * ps / pr + 1.0);
                    (r, us, ps)
                }
            } else {
                let head = ur + cr;
                let cs = cr * (ps / pr).powf((g - 1.0) / (2.0 * g));
                let tail = us + cs;
                if s >= head {
                    self.right
                } else if s <= tail {
                    (rr * (ps / pr).powf(1.0 / g), us, ps)
                } else {
                    let c = 2.0 / (g + 1.0) * (cr - (g - 1.0) / 2.0 * (ur - s));
                    let u = 2.0 / (g + 1.0) * (-cr + (g - 1.0) / 2.0 * ur + s);
                    let r = rr * (c / cr).powf(2.0 / (g - 1.0));
                    (r, u, pr * (c / cr).powf(2.0 * g / (g - 1.0)))
                }
            }
        }
    }

    pub fn state(&self, gas: &Gas, x: f64, t: f64) -> State {
        let (r, u, p) = self.primitive(x, t);
        gas.from_primitive(r, [u, 0.0], p)
    }

    /// Positions of the wave features at time `t`: rarefaction head and tail
    /// (or left shock), contact, right shock (or rarefaction head).
    pub fn wave_positions(&self, t: f64) -> Vec<f64> {
        let g = self.gamma;
        let (rl, ul, pl) = self.left;
        let (rr, ur, pr) = self.right;
        let cl = (g * pl / rl).sqrt();
        let cr = (g * pr / rr).sqrt();
        let ps = self.p_star;
        let mut speeds = Vec::new();
        if ps > pl {
            speeds.push(ul - cl * ((g + 1.0) / (2.0 * g) * ps / pl + (g - 1.0) / (2.0 * g)).sqrt());
        } else {
            speeds.push(ul - cl);
            speeds.push(self.u_star - cl * (ps / pl).powf((g - 1.0) / (2.0 * g)));
        }
        speeds.push(self.u_star);
        if ps > pr {
            speeds.push(ur + cr * ((g + 1.0) / (2.0 * g) * ps / pr + (g - 1.0) / (2.0 * g)).sqrt());
        } else {
            speeds.push(self.u_star + cr * (ps / pr).powf((g - 1.0) / (2.0 * g)));
            speeds.push(ur + cr);
        }
        speeds.iter().map(|s| self.x0 + s * t).collect()
    }
}

/// Toro's pressure function `f_K(p)` and its derivative.
fn pressure_function(g: f64, p: f64, rk: f64, pk: f64) -> (f64, f64) {
    if p > pk {
        let a = 2.0 / ((g + 1.0) * rk);
        let b = (g - 1.0) / (g + 1.0) * pk;
        let q = (a / (p + b)).sqrt();
        ((p - pk) * q, q * (1.0 - 0.5 * (p - pk) / (b + p)))
    } else {
        let c = (g * pk / rk).sqrt();
        let e = (g - 1.0) / (2.0 * g);
        (2.0 * c / (g - 1.0) * ((p / pk).powf(e) - 1.0), (p / pk).powf(-(g + 1.0) / (2.0 * g)) / (rk * c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vortex_center_and_far_field() {
        let gas = Gas::new(1.4, 2);
        let prm = VortexParams::default();
        let u = unsteady_vortex_ic(&gas, &prm, [0.5, 0.5]);
        let expect = (1.0 - 0.4 * 0.25 / (8.0 * PI * PI) * 1f64.exp()).powf(2.5);
        assert!((u[0] - expect).abs() < 1e-15);
        // far away f → -∞
        let far = unsteady_vortex_ic(&gas, &prm, [50.0, 50.0]);
        assert!((far[0] - 1.0).abs() < 1e-15);
        for i in 0..100 {
            for j in 0..100 {
                let x = [(i as f64 + 0.5) / 100.0, (j as f64 + 0.5) / 100.0];
                let s = unsteady_vortex_ic(&gas, &prm, x);
                assert!(gas.is_physical(&s));
            }
        }
    }

    #[test]
    fn vortex_pressure_closure() {
        let gas = Gas::new(1.4, 2);
        let prm = VortexParams::default();
        let u = unsteady_vortex_ic(&gas, &prm, [0.3, 0.6]);
        let p = gas.pressure(&u);
        assert!((p - prm.k * prm.k * u[0].powf(1.4) / (1.4 * 0.25)).abs() < 1e-12 * p);
        // free-stream Mach number M
        let far = unsteady_vortex_ic(&gas, &prm, [50.0, 50.0]);
        assert!((gas.velocity(&far)[0] / gas.sound_speed(&far) - 0.5).abs() < 1e-14);
        let lit = VortexParams { form: VortexForm::Literal, ..prm };
        let u = unsteady_vortex_ic(&gas, &lit, [0.3, 0.6]);
        assert!((gas.pressure(&u) - prm.k * prm.k * u[0].powf(1.4)).abs() < 1e-10 * gas.pressure(&u));
        assert_eq!("literal".parse::<VortexForm>().unwrap(), VortexForm::Literal);
    }

    /// Eighth-order central difference.
    fn d8(f: impl Fn(f64) -> State, h: f64) -> State {
        let c = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let mut out = [0.0; 4];
        for (i, ci) in c.iter().enumerate() {
            let s = (i + 1) as f64 * h;
            let (a, b) = (f(s), f(-s));
            for v in 0..4 {
                out[v] += ci * (a[v] - b[v]) / h;
            }
        }
        out
    }

    #[test]
    fn scaled_vortex_solves_euler() {
        let gas = Gas::new(1.4, 2);
        let prm = VortexParams::default();
        for (x, t) in [([0.4, 0.55], 0.0), ([0.71, 0.2], 0.03), ([0.5, 0.9], 0.06)] {
            let ut = d8(|s| unsteady_vortex(&gas, &prm, x, t + s), 1e-3);
            let fx = d8(|s| gas.flux(&unsteady_vortex(&gas, &prm, [x[0] + s, x[1]], t), [1.0, 0.0]), 1e-2);
            let fy = d8(|s| gas.flux(&unsteady_vortex(&gas, &prm, [x[0], x[1] + s], t), [0.0, 1.0]), 1e-2);
            let u = unsteady_vortex(&gas, &prm, x, t);
            for c in 0..4 {
                let r = ut[c] + fx[c] + fy[c];
                assert!(r.abs() < 1e-10 * prm.k * u[3], "c={c} r={r:e}");
            }
        }
        // one period returns the vortex to its start
        let a = unsteady_vortex(&gas, &prm, [0.3, 0.4], 0.0);
        let b = unsteady_vortex(&gas, &prm, [1.3, 0.4], 1.0 / prm.k);
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12 * q.abs().max(1.0)));
    }

    #[test]
    fn sod_states() {
        let gas = Gas::new(1.4, 1);
        let at = |x: f64| {
            let u = sod_ic(&gas, x);
            (u[0], gas.velocity(&u)[0], gas.pressure(&u))
        };
        assert_eq!(at(0.25), (5.0, 0.0, 1.0));
        let r = at(0.75);
        assert!(r.0 == 0.5 && r.1 == 0.0 && (r.2 - 0.1).abs() < 1e-15);
        assert_eq!(at(0.5).0, 0.5);
    }

    #[test]
    fn riemann_solution_properties() {
        let sol = RiemannSolution::sod().unwrap();
        assert!(sol.pressure_residual().abs() < 1e-14);
        assert!(sol.p_star > 0.1 && sol.p_star < 1.0);
        assert_eq!(sol.primitive(0.3, 0.0), SOD_LEFT);
        assert_eq!(sol.primitive(0.5, 0.0), SOD_RIGHT);
        // mass is conserved while waves stay inside [0, 1]
        // composite Gauss rule split at the wave positions (1e4 points in total)
        let pos = sol.wave_positions(0.3);
        let mass = |t: f64, breaks: &[f64]| {
            let mut cuts = vec![0.0];
            cuts.extend_from_slice(breaks);
            cuts.push(1.0);
            let (gx, gw) = crate::quadrature::gauss_legendre(10);
            let sub = 10_000 / (10 * (cuts.len() - 1));
            let mut total = 0.0;
            for w in cuts.windows(2) {
                let h = (w[1] - w[0]) / sub as f64;
                for i in 0..sub {
                    let a = w[0] + i as f64 * h;
                    for (x, wt) in gx.iter().zip(&gw) {
                        total += 0.5 * h * wt * sol.primitive(a + 0.5 * h * (x + 1.0), t).0;
                    }
                }
            }
            total
        };
        assert!((mass(0.3, &pos) - mass(0.0, &[0.5])).abs() < 1e-10);
        assert!(pos.first().unwrap() > &0.0 && pos.last().unwrap() < &1.0);
        // pressure and velocity are continuous across the contact
        let xc = pos[2];
        let (a, b) = (sol.primitive(xc - 1e-9, 0.3), sol.primitive(xc + 1e-9, 0.3));
        assert!((a.1 - b.1).abs() < 1e-12 && (a.2 - b.2).abs() < 1e-12 && (a.0 - b.0).abs() > 0.1);
    }

    #[test]
    fn entropy_wave_solves_euler() {
        let gas = Gas::new(1.4, 1);
        for (x, t) in [(0.13, 0.2), (0.77, 0.9), (0.5, 0.33)] {
            let ut = d8(|s| entropy_wave(&gas, x, t + s), 1e-2);
            let fx = d8(|s| gas.flux(&entropy_wave(&gas, x + s, t), [1.0, 0.0]), 1e-2);
            for c in 0..3 {
                let r = ut[c] + fx[c];
                assert!(r.abs() < 1e-10, "c={c} r={r:e}");
            }
        }
    }

    #[test]
    fn advection_is_periodic() {
        let v = [1.0, 0.5];
        assert!((advection_exact(1, v, [0.3, 0.0], 1.0) - advection_exact(1, v, [0.3, 0.0], 0.0)).abs() < 1e-14);
        assert!((advection_exact(2, v, [0.3, 0.7], 2.0) - advection_exact(2, v, [0.3, 0.7], 0.0)).abs() < 1e-14);
        let sc = |f: f64| [f, 0.0, 0.0, 0.0];
        for (x, t) in [([0.21, 0.63], 0.4), ([0.9, 0.05], 1.7)] {
            let ut = d8(|s| sc(advection_exact(2, v, x, t + s)), 1e-2)[0];
            let ux = d8(|s| sc(advection_exact(2, v, [x[0] + s, x[1]], t)), 1e-2)[0];
            let uy = d8(|s| sc(advection_exact(2, v, [x[0], x[1] + s], t)), 1e-2)[0];
            assert!((ut + v[0] * ux + v[1] * uy).abs() < 1e-10);
        }
    }

    #[test]
    fn problem_ids_round_trip() {
        for id in [ProblemId::Advection, ProblemId::EntropyWave, ProblemId::UnsteadyVortex, ProblemId::Sod] {
            assert_eq!(id.name().parse::<ProblemId>().unwrap(), id);
        }
        assert!("nope".parse::<ProblemId>().is_err());
    }
}
