//! Nodal DG discretization of the scalar model with classical RK4 in time.
//!
//! On a Cartesian periodic mesh with a tensor basis every term of the
//! operator is a 1-D reference operator applied along x-rows or y-columns
//! of an element block, plus face terms from the four neighbours.

use std::f64::consts::PI;
use std::time::Instant;

use crate::dg::basis::{Basis, MAX_DEGREE};
use crate::dg::field::{DrawTag, Field};
use crate::dg::mesh::Mesh2D;
use crate::dg::problem::{source_coefficients, Forcing, ProblemSpec};
use crate::error::{Error, Result};
use crate::hierarchy::LevelSpec;
use crate::random::SampleDraw;

/// Number of stages of the time integrator.
pub const RK_STAGES: usize = 4;

/// Per-degree reduction of the viscous bound. The BR1 operator's spectral
/// radius grows faster than `(2q+1)^2 / h^2`; the factors (measured by power
/// iteration on periodic meshes) rescale it to the growth seen at `q = 1`.
const VISCOUS_SCALE: [f64; MAX_DEGREE + 1] = [
    1.0, 1.0, 0.61, 0.42, 0.31, 0.24, 0.19, 0.15, 0.125, 0.105, 0.09, 0.078, 0.068,
];

/// Same for the upwind advection operator, whose radius only outgrows
/// `(2q+1) / h` noticeably at the highest degrees.
const CONVECTIVE_SCALE: [f64; MAX_DEGREE + 1] = [
    1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.92, 0.85,
];

/// Time-step bound combining the convective and viscous restrictions.
///
/// Each branch is `h / (lambda_c (2q+1))` and `(h / (2q+1))^2 / nu` scaled by
/// a degree factor; when both are active they are combined harmonically so
/// that the sum of the two operators stays inside the RK4 stability region.
pub fn cfl_timestep(mesh: &Mesh2D, basis: &Basis, problem: &ProblemSpec, cfl_safety: f64) -> Result<f64> {
    if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
        return Err(Error::config("cfl_safety", format!("must lie in (0, 1], got {cfl_safety}")));
    }
    let h = mesh.h();
    let q = basis.q.min(MAX_DEGREE);
    let spread = (2 * basis.q + 1) as f64;
    let speed = problem.advection_speed();
    let nu = problem.diffusion;
    let mut rate = 0.0;
    if speed > 0.0 {
        rate += speed * spread / (h * CONVECTIVE_SCALE[q]);
    }
    if nu > 0.0 {
        let r = h / spread;
        rate += nu / (r * r * VISCOUS_SCALE[q]);
    }
    if rate == 0.0 {
        return Err(Error::config(
            "problem",
            "no transport and no diffusion: the time step is unbounded",
        ));
    }
    Ok(cfl_safety / rate)
}

/// Deterministic and measured cost of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveWork {
    /// Stages x elements x nodes per element, summed over time steps.
    pub units: f64,
    pub seconds: f64,
    pub steps: usize,
}

/// Reference-interval operators, identical in both directions.
///
/// Element blocks are stored row-major, `v[j * p + i]` with `i` along x.
#[derive(Debug, Clone)]
struct ElementOps {
    p: usize,
    /// 2 / h
    scale: f64,
    /// Weak derivative `dhat[i*p+k] = w_k D[k][i] / w_i`.
    dhat: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    left_over_w: Vec<f64>,
    right_over_w: Vec<f64>,
}

impl ElementOps {
    fn new(basis: &Basis, mesh: &Mesh2D) -> Self {
        let p = basis.n_nodes();
        let w = &basis.weights;
        let d = &basis.diff_matrix;
        let mut dhat = vec![0.0; p * p];
        for i in 0..p {
            for k in 0..p {
                dhat[i * p + k] = w[k] * d[k * p + i] / w[i];
            }
        }
        ElementOps {
            p,
            scale: 2.0 / mesh.h(),
            dhat,
            left: basis.left.clone(),
            right: basis.right.clone(),
            left_over_w: basis.left.iter().zip(w).map(|(l, w)| l / w).collect(),
            right_over_w: basis.right.iter().zip(w).map(|(r, w)| r / w).collect(),
        }
    }

    /// West and east traces of every row.
    fn x_traces(&self, v: &[f64], west: &mut [f64], east: &mut [f64]) {
        let p = self.p;
        for j in 0..p {
            let row = &v[j * p..(j + 1) * p];
            west[j] = row.iter().zip(&self.left).map(|(a, b)| a * b).sum();
            east[j] = row.iter().zip(&self.right).map(|(a, b)| a * b).sum();
        }
    }

    /// South and north traces of every column.
    fn y_traces(&self, v: &[f64], south: &mut [f64], north: &mut [f64]) {
        let p = self.p;
        south.fill(0.0);
        north.fill(0.0);
        for j in 0..p {
            let (l, r) = (self.left[j], self.right[j]);
            for (i, x) in v[j * p..(j + 1) * p].iter().enumerate() {
                south[i] += l * x;
                north[i] += r * x;
            }
        }
    }

    /// `out (+)= scale (sign Dhat_x v + face_sign (east r/w - west l/w))`.
    #[allow(clippy::too_many_arguments)]
    fn x_weak(&self, v: &[f64], sign: f64, face_sign: f64, east: &[f64], west: &[f64], out: &mut [f64], add: bool) {
        let p = self.p;
        let sc = self.scale;
        for j in 0..p {
            let row = &v[j * p..(j + 1) * p];
            let (fe, fw) = (face_sign * east[j], face_sign * west[j]);
            for i in 0..p {
                let dr = &self.dhat[i * p..(i + 1) * p];
                let dx: f64 = dr.iter().zip(row).map(|(a, b)| a * b).sum();
                let val = sc * (sign * dx + fe * self.right_over_w[i] - fw * self.left_over_w[i]);
                if add {
                    out[j * p + i] += val;
                } else {
                    out[j * p + i] = val;
                }
            }
        }
    }

    /// `out (+)= scale (sign Dhat_y v + face_sign (north r/w - south l/w))`.
    #[allow(clippy::too_many_arguments)]
    fn y_weak(&self, v: &[f64], sign: f64, face_sign: f64, north: &[f64], south: &[f64], out: &mut [f64], add: bool) {
        let p = self.p;
        let sc = self.scale;
        for j in 0..p {
            let o = &mut out[j * p..(j + 1) * p];
            if !add {
                o.fill(0.0);
            }
            let (rw, lw) = (face_sign * self.right_over_w[j], face_sign * self.left_over_w[j]);
            for i in 0..p {
                o[i] += sc * (north[i] * rw - south[i] * lw);
            }
            for k in 0..p {
                let d = sc * sign * self.dhat[j * p + k];
                for (oi, x) in o.iter_mut().zip(&v[k * p..(k + 1) * p]) {
                    *oi += d * x;
                }
            }
        }
    }
}

/// Scratch arrays of one right-hand-side evaluation. Face arrays hold `p`
/// values per element.
#[derive(Debug, Clone)]
struct Workspace {
    west: Vec<f64>,
    east: Vec<f64>,
    south: Vec<f64>,
    north: Vec<f64>,
    gx_west: Vec<f64>,
    gx_east: Vec<f64>,
    gy_south: Vec<f64>,
    gy_north: Vec<f64>,
    /// Numerical value on the east face of every element.
    fx: Vec<f64>,
    /// Numerical value on the north face of every element.
    fy: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
    flux: Vec<f64>,
}

impl Workspace {
    fn new(n_elem: usize, p: usize) -> Self {
        let face = vec![0.0; n_elem * p];
        let full = vec![0.0; n_elem * p * p];
        Workspace {
            west: face.clone(),
            east: face.clone(),
            south: face.clone(),
            north: face.clone(),
            gx_west: face.clone(),
            gx_east: face.clone(),
            gy_south: face.clone(),
            gy_north: face.clone(),
            fx: face.clone(),
            fy: face,
            gx: full.clone(),
            gy: full,
            flux: vec![0.0; p * p],
        }
    }
}

/// Periodic neighbours `[east, west, north, south]` of every element.
fn neighbours(mesh: &Mesh2D) -> Vec<[usize; 4]> {
    let n = mesh.n_per_dim;
    (0..mesh.n_elements())
        .map(|e| {
            let (ex, ey) = (e % n, e / n);
            [
                ey * n + (ex + 1) % n,
                ey * n + (ex + n - 1) % n,
                ((ey + 1) % n) * n + ex,
                ((ey + n - 1) % n) * n + ex,
            ]
        })
        .collect()
}

/// Precomputed DG operator for one (mesh, degree, problem) triple.
#[derive(Debug, Clone)]
pub struct DgSolver {
    pub mesh: Mesh2D,
    pub basis: Basis,
    pub problem: ProblemSpec,
    pub dt: f64,
    ops: ElementOps,
    nbr: Vec<[usize; 4]>,
    /// cos and sin of `4 pi (x1 + x2)` at every node.
    phase_cos: Vec<f64>,
    phase_sin: Vec<f64>,
}

impl DgSolver {
    pub fn new(mesh: Mesh2D, q: usize, problem: &ProblemSpec) -> Result<Self> {
        problem.validate()?;
        let basis = Basis::new(q)?;
        let dt = cfl_timestep(&mesh, &basis, problem, problem.cfl_safety)?;
        let ops = ElementOps::new(&basis, &mesh);
        let nbr = neighbours(&mesh);
        let coords = Field::zeros(mesh, q).node_coordinates();
        let (phase_cos, phase_sin) = coords
            .iter()
            .map(|&(x1, x2)| {
                let th = 4.0 * PI * (x1 + x2);
                (th.cos(), th.sin())
            })
            .unzip();
        Ok(DgSolver {
            mesh,
            basis,
            problem: problem.clone(),
            dt,
            ops,
            nbr,
            phase_cos,
            phase_sin,
        })
    }

    pub fn q(&self) -> usize {
        self.basis.q
    }

    fn n_values(&self) -> usize {
        let p = self.basis.n_nodes();
        self.mesh.n_elements() * p * p
    }

    /// Work units of one time step.
    pub fn units_per_step(&self) -> f64 {
        (RK_STAGES * self.n_values()) as f64
    }

    /// Number of steps needed to cover `[t0, t1]`.
    pub fn steps_for(&self, t0: f64, t1: f64) -> usize {
        let span = t1 - t0;
        let k = (span / self.dt).ceil() as usize;
        // guard against ceil landing one short through round-off
        if (k as f64) * self.dt < span * (1.0 - 1e-14) {
            k + 1
        } else {
            k.max(1)
        }
    }

    /// Initial state by nodal interpolation of the manufactured solution.
    pub fn initial_state(&self, y: &[f64]) -> Field {
        let pr = &self.problem;
        Field::interpolate(self.mesh, self.q(), |x1, x2| pr.exact_state(0.0, [x1, x2], y))
    }

    /// Semi-discrete right-hand side `du/dt`.
    pub fn rhs(&self, u: &[f64], t: f64, y: &[f64], out: &mut [f64]) {
        let mut ws = self.workspace();
        self.rhs_with(u, t, y, out, &mut ws);
    }

    fn workspace(&self) -> Workspace {
        Workspace::new(self.mesh.n_elements(), self.basis.n_nodes())
    }

    fn rhs_with(&self, u: &[f64], t: f64, y: &[f64], out: &mut [f64], ws: &mut Workspace) {
        let p = self.basis.n_nodes();
        let pp = p * p;
        let ne = self.mesh.n_elements();
        let nu = self.problem.diffusion;
        let [ax, ay] = self.problem.advection;
        let ops = &self.ops;
        let fr = |e: usize| e * p..(e + 1) * p;
        let br = |e: usize| e * pp..(e + 1) * pp;

        for e in 0..ne {
            ops.x_traces(&u[br(e)], &mut ws.west[fr(e)], &mut ws.east[fr(e)]);
            ops.y_traces(&u[br(e)], &mut ws.south[fr(e)], &mut ws.north[fr(e)]);
        }

        if nu > 0.0 {
            // BR1 lifted gradient from averaged traces
            for e in 0..ne {
                let [east, _, north, _] = self.nbr[e];
                for k in 0..p {
                    ws.fx[e * p + k] = 0.5 * (ws.east[e * p + k] + ws.west[east * p + k]);
                    ws.fy[e * p + k] = 0.5 * (ws.north[e * p + k] + ws.south[north * p + k]);
                }
            }
            for e in 0..ne {
                let [_, west, _, south] = self.nbr[e];
                ops.x_weak(&u[br(e)], -1.0, 1.0, &ws.fx[fr(e)], &ws.fx[fr(west)], &mut ws.gx[br(e)], false);
                ops.y_weak(&u[br(e)], -1.0, 1.0, &ws.fy[fr(e)], &ws.fy[fr(south)], &mut ws.gy[br(e)], false);
                ops.x_traces(&ws.gx[br(e)], &mut ws.gx_west[fr(e)], &mut ws.gx_east[fr(e)]);
                ops.y_traces(&ws.gy[br(e)], &mut ws.gy_south[fr(e)], &mut ws.gy_north[fr(e)]);
            }
        }

        // upwind advective plus averaged viscous flux on east and north faces
        for e in 0..ne {
            let [east, _, north, _] = self.nbr[e];
            for k in 0..p {
                let (i, ie, inn) = (e * p + k, east * p + k, north * p + k);
                let upx = if ax >= 0.0 { ws.east[i] } else { ws.west[ie] };
                let upy = if ay >= 0.0 { ws.north[i] } else { ws.south[inn] };
                ws.fx[i] = ax * upx;
                ws.fy[i] = ay * upy;
                if nu > 0.0 {
                    ws.fx[i] -= nu * 0.5 * (ws.gx_east[i] + ws.gx_west[ie]);
                    ws.fy[i] -= nu * 0.5 * (ws.gy_north[i] + ws.gy_south[inn]);
                }
            }
        }

        for e in 0..ne {
            let [_, west, _, south] = self.nbr[e];
            let ue = &u[br(e)];
            for (f, x) in ws.flux.iter_mut().zip(ue) {
                *f = ax * x;
            }
            if nu > 0.0 {
                for (f, g) in ws.flux.iter_mut().zip(&ws.gx[br(e)]) {
                    *f -= nu * g;
                }
            }
            ops.x_weak(&ws.flux, 1.0, -1.0, &ws.fx[fr(e)], &ws.fx[fr(west)], &mut out[br(e)], false);
            for (f, x) in ws.flux.iter_mut().zip(ue) {
                *f = ay * x;
            }
            if nu > 0.0 {
                for (f, g) in ws.flux.iter_mut().zip(&ws.gy[br(e)]) {
                    *f -= nu * g;
                }
            }
            ops.y_weak(&ws.flux, 1.0, -1.0, &ws.fy[fr(e)], &ws.fy[fr(south)], &mut out[br(e)], true);
        }

        if self.problem.forcing == Forcing::Manufactured {
            let amp = self.problem.amplitude(y);
            let freq = self.problem.frequency(y);
            if amp != 0.0 {
                let (c_cos, c_sin) = source_coefficients(&self.problem, amp, freq);
                let (st, ct) = (4.0 * PI * freq * t).sin_cos();
                // phase = theta - omega t
                let k_cos = c_cos * ct - c_sin * st;
                let k_sin = c_cos * st + c_sin * ct;
                for ((o, c), sn) in out.iter_mut().zip(&self.phase_cos).zip(&self.phase_sin) {
                    *o += k_cos * c + k_sin * sn;
                }
            }
        }
    }

    /// Integrates from `t0` to `t1` with classical RK4; the last step is
    /// shortened to land exactly on `t1`.
    pub fn advance(&self, state: &Field, t0: f64, t1: f64, y: &[f64]) -> Result<(Field, SolveWork)> {
        if !(t1 > t0) {
            return Err(Error::contract(format!("advance needs t1 > t0, got [{t0}, {t1}]")));
        }
        if state.mesh != self.mesh || state.q != self.q() {
            return Err(Error::contract("state does not match the solver discretization"));
        }
        let start = Instant::now();
        let m = self.n_values();
        let steps = self.steps_for(t0, t1);
        let mut u = state.values.clone();
        let mut k = vec![0.0; m];
        let mut acc = vec![0.0; m];
        let mut stage = vec![0.0; m];
        let mut ws = self.workspace();
        let mut t = t0;
        for step in 0..steps {
            let dt = if step + 1 == steps { t1 - t } else { self.dt };
            // k1
            self.rhs_with(&u, t, y, &mut k, &mut ws);
            for i in 0..m {
                acc[i] = k[i];
                stage[i] = u[i] + 0.5 * dt * k[i];
            }
            // k2
            self.rhs_with(&stage, t + 0.5 * dt, y, &mut k, &mut ws);
            for i in 0..m {
                acc[i] += 2.0 * k[i];
                stage[i] = u[i] + 0.5 * dt * k[i];
            }
            // k3
            self.rhs_with(&stage, t + 0.5 * dt, y, &mut k, &mut ws);
            for i in 0..m {
                acc[i] += 2.0 * k[i];
                stage[i] = u[i] + dt * k[i];
            }
            // k4
            self.rhs_with(&stage, t + dt, y, &mut k, &mut ws);
            let mut finite = true;
            for i in 0..m {
                u[i] += dt / 6.0 * (acc[i] + k[i]);
                finite &= u[i].is_finite();
            }
            t = if step + 1 == steps { t1 } else { t + dt };
            if !finite {
                return Err(Error::Divergence { step, time: t });
            }
        }
        let field = Field {
            mesh: self.mesh,
            q: self.q(),
            values: u,
            origin: state.origin,
        };
        Ok((
            field,
            SolveWork {
                units: steps as f64 * self.units_per_step(),
                seconds: start.elapsed().as_secs_f64(),
                steps,
            },
        ))
    }

    /// Interpolates the initial state and advances it to the final time.
    pub fn solve(&self, y: &[f64]) -> Result<(Field, SolveWork)> {
        let init = self.initial_state(y);
        self.advance(&init, 0.0, self.problem.final_time, y)
    }
}

/// Advances `state` from `t0` to `t1` for parameters `y`.
pub fn advance(state: &Field, t0: f64, t1: f64, problem: &ProblemSpec, y: &[f64]) -> Result<Field> {
    let solver = DgSolver::new(state.mesh, state.q, problem)?;
    solver.advance(state, t0, t1, y).map(|(f, _)| f)
}

/// Solves one sample on `level` and returns the field at the final time
/// together with its cost.
pub fn solve_sample(level: &LevelSpec, draw: &SampleDraw, problem: &ProblemSpec) -> Result<(Field, SolveWork)> {
    let mesh = Mesh2D::on_square(level.n_per_dim, problem.domain_lower, problem.domain_side);
    let solver = DgSolver::new(mesh, level.q, problem)?;
    let (field, work) = solver.solve(&draw.y)?;
    Ok((field.with_origin(DrawTag::from(draw)), work))
}
