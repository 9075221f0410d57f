use super::mesh::ClothMesh;
use crate::{Error, Result};

/// Physical constants of the mass-spring system. Stiffness ratios are
/// structural : shear : bending = 1 : 0.5 : 0.25 of `stiffness`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SimParams {
    /// Total cloth mass in kg, spread uniformly over vertices.
    pub total_mass: f64,
    /// Structural spring stiffness in N/m.
    pub stiffness: f64,
    /// Velocity damping factor per substep.
    pub damping: f64,
    /// Gravity along -z, m/s^2.
    pub gravity: f64,
    /// Ground plane height.
    pub ground_z: f64,
    /// Ground contact present.
    pub ground: bool,
    /// Tangential velocity damping on ground contact.
    pub friction: f64,
    /// Substeps per exposed step.
    pub substeps: usize,
    /// Grasp radius for pick actions, in meters.
    pub grasp_radius: f64,
    /// End-effector travel speed for pick-and-place, m/s.
    pub travel_speed: f64,
    /// Settling terminates when max vertex speed drops below this (m/s).
    pub settle_speed: f64,
    /// Settling step budget.
    pub settle_steps: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            total_mass: 0.1,
            stiffness: 60.0,
            damping: 0.02,
            gravity: 9.81,
            ground_z: 0.0,
            ground: true,
            friction: 0.4,
            substeps: 3,
            grasp_radius: 0.2,
            travel_speed: 0.6,
            settle_speed: 0.02,
            settle_steps: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Spring {
    a: usize,
    b: usize,
    rest: f64,
    k: f64,
}

/// Simulator state: mesh positions, per-vertex velocities, optional grasped
/// vertex, and the spring network (fixed topology).
#[derive(Debug, Clone)]
pub struct SimState {
    mesh: ClothMesh,
    velocities: Vec<[f64; 3]>,
    pinned: Option<usize>,
    params: SimParams,
    springs: Vec<Spring>,
    mass: f64,
}

impl SimState {
    /// Flat resting cloth at ground height; also the canonical flattened mesh.
    pub fn init_flat(
        grid_h: usize,
        grid_w: usize,
        side: f64,
        center: [f64; 2],
        params: SimParams,
    ) -> Result<Self> {
        let mesh = ClothMesh::flat(grid_h, grid_w, side, center, params.ground_z)?;
        Ok(SimState::from_mesh(mesh, params))
    }

    pub fn from_mesh(mesh: ClothMesh, params: SimParams) -> Self {
        let n = mesh.vertex_count();
        let springs = build_springs(&mesh, params.stiffness);
        SimState {
            velocities: vec![[0.0; 3]; n],
            pinned: None,
            mass: params.total_mass / n as f64,
            mesh,
            params,
            springs,
        }
    }

    pub fn mesh(&self) -> &ClothMesh {
        &self.mesh
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn velocities(&self) -> &[[f64; 3]] {
        &self.velocities
    }

    pub fn pinned(&self) -> Option<usize> {
        self.pinned
    }

    pub fn pin(&mut self, vertex: usize) {
        debug_assert!(vertex < self.mesh.vertex_count());
        self.pinned = Some(vertex);
        self.velocities[vertex] = [0.0; 3];
    }

    pub fn release(&mut self) {
        self.pinned = None;
    }

    /// Move the pinned vertex directly (end-effector control).
    pub fn move_pinned(&mut self, pos: [f64; 3], dt: f64) {
        if let Some(p) = self.pinned {
            let old = self.mesh.vertices()[p];
            self.mesh.vertices_mut()[p] = pos;
            self.velocities[p] = [
                (pos[0] - old[0]) / dt,
                (pos[1] - old[1]) / dt,
                (pos[2] - old[2]) / dt,
            ];
        }
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn momentum(&self) -> [f64; 3] {
        let mut p = [0.0; 3];
        for v in &self.velocities {
            for k in 0..3 {
                p[k] += self.mass * v[k];
            }
        }
        p
    }

    /// One exposed step: `substeps` semi-implicit Euler substeps of `dt` each.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt <= 5e-3) {
            return Err(Error::InvalidArgument(format!("dt {dt} outside (0, 5e-3]")));
        }
        for _ in 0..self.params.substeps {
            self.substep(dt);
        }
        if self.mesh.vertices().iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::SimUnstable("non-finite vertex position after step".into()));
        }
        Ok(())
    }

    fn substep(&mut self, dt: f64) {
        let n = self.mesh.vertex_count();
        let mut forces = vec![[0.0f64; 3]; n];
        if self.params.gravity != 0.0 {
            for f in &mut forces {
                f[2] = -self.params.gravity * self.mass;
            }
        }
        let vs = self.mesh.vertices();
        for s in &self.springs {
            let (pa, pb) = (vs[s.a], vs[s.b]);
            let d = [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]];
            let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if len < 1e-12 {
                continue;
            }
            let mag = s.k * (len - s.rest) / len;
            let f = [mag * d[0], mag * d[1], mag * d[2]];
            for k in 0..3 {
                forces[s.a][k] += f[k];
                forces[s.b][k] -= f[k];
            }
        }
        let damp = 1.0 - self.params.damping;
        let inv_m = 1.0 / self.mass;
        for i in 0..n {
            if Some(i) == self.pinned {
                continue;
            }
            let v = &mut self.velocities[i];
            for k in 0..3 {
                v[k] = (v[k] + dt * forces[i][k] * inv_m) * damp;
            }
            let p = &mut self.mesh.vertices_mut()[i];
            for k in 0..3 {
                p[k] += dt * self.velocities[i][k];
            }
            if self.params.ground && p[2] < self.params.ground_z {
                p[2] = self.params.ground_z;
                let v = &mut self.velocities[i];
                if v[2] < 0.0 {
                    v[2] = 0.0;
                }
                v[0] *= 1.0 - self.params.friction;
                v[1] *= 1.0 - self.params.friction;
            }
        }
    }

    /// Step until max speed drops below the settle threshold or the budget
    /// runs out.
    pub fn settle(&mut self, dt: f64) -> Result<()> {
        for _ in 0..self.params.settle_steps {
            self.step(dt)?;
            if self.max_speed() < self.params.settle_speed {
                break;
            }
        }
        Ok(())
    }
}

fn build_springs(mesh: &ClothMesh, stiffness: f64) -> Vec<Spring> {
    let (h, w) = (mesh.grid_h(), mesh.grid_w());
    let vs = mesh.vertices();
    let mut springs = Vec::new();
    let mut push = |a: usize, b: usize, k: f64| {
        let d = [
            vs[b][0] - vs[a][0],
            vs[b][1] - vs[a][1],
            vs[b][2] - vs[a][2],
        ];
        let rest = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        springs.push(Spring { a, b, rest, k });
    };
    for i in 0..h {
        for j in 0..w {
            let a = i * w + j;
            // structural
            if j + 1 < w {
                push(a, a + 1, stiffness);
            }
            if i + 1 < h {
                push(a, a + w, stiffness);
            }
            // shear
            if i + 1 < h && j + 1 < w {
                push(a, a + w + 1, stiffness * 0.5);
                push(a + 1, a + w, stiffness * 0.5);
            }
            // bending
            if j + 2 < w {
                push(a, a + 2, stiffness * 0.25);
            }
            if i + 2 < h {
                push(a, a + 2 * w, stiffness * 0.25);
            }
        }
    }
    springs
}
