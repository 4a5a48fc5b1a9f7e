//! Gradient flow `dω/dt = -F'(ω)` by classical fourth-order Runge–Kutta.

use serde::Serialize;

use crate::io::Table;
use crate::potential::{dot, PotentialSpec};
use crate::{Error, Result};

const MAX_HALVINGS: u32 = 40;

#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub potential: PotentialSpec,
    pub dt: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Dissipation {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

fn rk4_step(f: &PotentialSpec, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + s * q).collect() };
    let k1 = f.grad(x)?;
    let k2 = f.grad(&axpy(x, -0.5 * h, &k1))?;
    let k3 = f.grad(&axpy(x, -0.5 * h, &k2))?;
    let k4 = f.grad(&axpy(x, -h, &k3))?;
    let out: Vec<f64> = (0..x.len())
        .map(|i| x[i] - h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    f.check(&out)?;
    Ok(out)
}

/// One step of length `h`, recursively halved on domain violations.
fn guarded_step(f: &PotentialSpec, x: &[f64], h: f64, depth: u32) -> Result<Vec<f64>> {
    match rk4_step(f, x, h) {
        Ok(y) => {
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("gradient flow state".into()));
            }
            Ok(y)
        }
        Err(Error::DomainViolation { what, point }) => {
            if depth >= MAX_HALVINGS {
                return Err(Error::DomainViolation { what, point });
            }
            let mid = guarded_step(f, x, 0.5 * h, depth + 1)?;
            guarded_step(f, &mid, 0.5 * h, depth + 1)
        }
        Err(e) => Err(e),
    }
}

/// Integrates on the grid `k dt`, the last step shortened to land on `t_end`.
pub fn evolve(f: &PotentialSpec, x0: &[f64], t_end: f64, dt: f64) -> Result<FlowTrajectory> {
    f.check(x0)?;
    if !(t_end >= 0.0 && t_end.is_finite()) || !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("need t_end >= 0 and dt > 0, got {t_end}, {dt}")));
    }
    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    if t_end > 0.0 {
        let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
        let mut x = x0.to_vec();
        for k in 1..=steps {
            let t = if k == steps { t_end } else { k as f64 * dt };
            let h = t - times[k - 1];
            x = guarded_step(f, &x, h, 0)?;
            times.push(t);
            states.push(x.clone());
        }
    }
    Ok(FlowTrajectory { times, states, potential: f.clone(), dt })
}

/// `S_t x`.
pub fn flow_map(f: &PotentialSpec, x0: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    Ok(evolve(f, x0, t, dt)?.states.pop().expect("non-empty trajectory"))
}

impl FlowTrajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("non-empty trajectory")
    }

    pub fn energies(&self) -> Result<Vec<f64>> {
        self.states.iter().map(|x| self.potential.eval(x)).collect()
    }

    pub fn fisher(&self) -> Result<Vec<f64>> {
        self.states.iter().map(|x| self.potential.fisher_info(x)).collect()
    }

    /// Largest increase of `F` between consecutive states beyond `1e-10 (1 + |F|)`.
    pub fn lyapunov_violation(&self) -> Result<Option<usize>> {
        let e = self.energies()?;
        Ok((1..e.len()).find(|&k| e[k] > e[k - 1] + 1e-10 * (1.0 + e[k - 1].abs())))
    }

    /// `½∫(|ω̇|² + |F'(ω)|²) dr` against `F(ω_0) − F(ω_T)`.
    ///
    /// The quadrature is the trapezoid rule with its Euler–Maclaurin end
    /// correction `−h²/12 [I'(b) − I'(a)]` per panel, where
    /// `I' = −2 F'ᵀ F'' F'` along the flow. The gap is then fourth order.
    pub fn dissipation_identity(&self) -> Result<Dissipation> {
        let f = &self.potential;
        let mut i_vals = Vec::with_capacity(self.states.len());
        let mut di_vals = Vec::with_capacity(self.states.len());
        for x in &self.states {
            let g = f.grad(x)?;
            let hg = f.hessian_vector(x, &g)?;
            i_vals.push(dot(&g, &g));
            di_vals.push(-2.0 * dot(&g, &hg));
        }
        let mut lhs = 0.0;
        for k in 1..self.times.len() {
            let h = self.times[k] - self.times[k - 1];
            lhs += 0.5 * h * (i_vals[k] + i_vals[k - 1]) - h * h / 12.0 * (di_vals[k] - di_vals[k - 1]);
        }
        let rhs = f.eval(&self.states[0])? - f.eval(self.final_state())?;
        Ok(Dissipation { lhs, rhs, gap: lhs - rhs })
    }

    /// Columns `t, x_1..x_n, F, I`.
    pub fn table(&self) -> Result<Table> {
        let n = self.potential.dim();
        let mut columns = vec!["t".to_string()];
        columns.extend((1..=n).map(|i| format!("x_{i}")));
        columns.push("F".into());
        columns.push("I".into());
        let e = self.energies()?;
        let fi = self.fisher()?;
        let rows = (0..self.times.len())
            .map(|k| {
                let mut r = vec![self.times[k]];
                r.extend_from_slice(&self.states[k]);
                r.push(e[k]);
                r.push(fi[k]);
                r
            })
            .collect();
        Ok(Table { columns, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_halves_at_ln2() {
        let q = PotentialSpec::quadratic(1, 1.0).unwrap();
        let x = flow_map(&q, &[4.0], std::f64::consts::LN_2, 1e-3).unwrap();
        assert!((x[0] - 2.0).abs() <= 1e-8);
    }

    #[test]
    fn zero_time_is_identity() {
        let p = PotentialSpec::polynomial(vec![vec![0.0, 1.0, 0.0, 0.3]]).unwrap();
        let tr = evolve(&p, &[0.37], 0.0, 0.1).unwrap();
        assert_eq!(tr.states, vec![vec![0.37]]);
    }

    #[test]
    fn last_step_is_shortened() {
        let q = PotentialSpec::quadratic(1, 1.0).unwrap();
        let tr = evolve(&q, &[1.0], 0.25, 0.1).unwrap();
        assert_eq!(tr.times.len(), 4);
        assert_eq!(*tr.times.last().unwrap(), 0.25);
    }

    #[test]
    fn critical_point_has_zero_gap() {
        let q = PotentialSpec::quadratic(2, 1.0).unwrap();
        let tr = evolve(&q, &[0.0, 0.0], 1.0, 0.1).unwrap();
        assert_eq!(tr.dissipation_identity().unwrap().gap, 0.0);
    }

    #[test]
    fn csv_columns() {
        let q = PotentialSpec::quadratic(2, 1.0).unwrap();
        let t = evolve(&q, &[1.0, 2.0], 0.1, 0.05).unwrap().table().unwrap();
        assert_eq!(t.columns, vec!["t", "x_1", "x_2", "F", "I"]);
        assert_eq!(t.rows.len(), 3);
    }
}
