use super::state::SimState;
use crate::{Error, Result};

/// A single grasp-move-release primitive.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PickPlaceAction {
    pub pick: [f64; 2],
    pub place: [f64; 2],
    pub lift: f64,
}

impl SimState {
    /// Pin the vertex nearest to the pick point, lift it, carry it linearly
    /// to the place point, release, and settle. Deterministic given the
    /// action and the current state.
    pub fn apply_pick_and_place(&mut self, action: &PickPlaceAction, dt: f64) -> Result<()> {
        if !action.pick.iter().chain(&action.place).all(|c| c.is_finite()) || action.lift < 0.0 {
            return Err(Error::InvalidArgument("non-finite or negative action fields".into()));
        }
        let (vertex, dist) = nearest_vertex_xy(self, action.pick);
        if dist > self.params().grasp_radius {
            return Err(Error::GraspMiss);
        }
        self.pin(vertex);
        let start = self.mesh().vertices()[vertex];
        let up = [start[0], start[1], start[2] + action.lift];
        let target = [action.place[0], action.place[1], start[2] + action.lift];
        self.sweep_pinned(start, up, dt)?;
        self.sweep_pinned(up, target, dt)?;
        self.release();
        self.settle(dt)
    }

    /// Carry the pinned vertex from `from` to `to` at the configured travel
    /// speed, stepping the simulation along the way.
    fn sweep_pinned(&mut self, from: [f64; 3], to: [f64; 3], dt: f64) -> Result<()> {
        let dist = ((to[0] - from[0]).powi(2) + (to[1] - from[1]).powi(2)
            + (to[2] - from[2]).powi(2))
        .sqrt();
        if dist == 0.0 {
            return Ok(());
        }
        let step_len = self.params().travel_speed * dt * self.params().substeps as f64;
        let steps = (dist / step_len).ceil() as usize;
        for s in 1..=steps {
            let a = s as f64 / steps as f64;
            let pos = [
                from[0] + a * (to[0] - from[0]),
                from[1] + a * (to[1] - from[1]),
                from[2] + a * (to[2] - from[2]),
            ];
            self.move_pinned(pos, dt * self.params().substeps as f64);
            self.step(dt)?;
        }
        Ok(())
    }
}

fn nearest_vertex_xy(state: &SimState, p: [f64; 2]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, v) in state.mesh().vertices().iter().enumerate() {
        let d = ((v[0] - p[0]).powi(2) + (v[1] - p[1]).powi(2)).sqrt();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// A vertex is occluded when a vertex from a different cloth region sits at
/// or above it within half a rest length in the plane.
pub fn occluded_vertex_count(state: &SimState) -> usize {
    let mesh = state.mesh();
    let w = mesh.grid_w();
    // half the mean structural edge length as the overlap radius
    let edges = mesh.edges();
    let mean_edge = edges
        .iter()
        .map(|&(a, b)| {
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2)).sqrt()
        })
        .sum::<f64>()
        / edges.len() as f64;
    let r = 0.5 * mean_edge;
    let vs = mesh.vertices();
    let mut count = 0;
    for i in 0..vs.len() {
        let (gi, gj) = (i / w, i % w);
        let mut occluded = false;
        for j in 0..vs.len() {
            if j == i {
                continue;
            }
            let (hj, wj) = (j / w, j % w);
            let grid_dist = gi.abs_diff(hj) + gj.abs_diff(wj);
            if grid_dist <= 2 {
                continue; // same neighborhood, not a separate layer
            }
            let dx = vs[j][0] - vs[i][0];
            let dy = vs[j][1] - vs[i][1];
            if dx * dx + dy * dy < r * r && vs[j][2] >= vs[i][2] {
                occluded = true;
                break;
            }
        }
        if occluded {
            count += 1;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::super::state::SimParams;
    use super::*;

    #[test]
    fn noop_action_leaves_state_settled() {
        let mut st = SimState::init_flat(8, 8, 1.0, [0.0, 0.0], SimParams::default()).unwrap();
        let before = st.mesh().vertices().to_vec();
        let act = PickPlaceAction { pick: [0.5, 0.5], place: [0.5, 0.5], lift: 0.0 };
        st.apply_pick_and_place(&act, 1e-3).unwrap();
        let max_disp = st
            .mesh()
            .vertices()
            .iter()
            .zip(&before)
            .map(|(a, b)| {
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max);
        assert!(max_disp < 0.02, "no-op action displaced cloth by {max_disp}");
    }

    #[test]
    fn grasp_outside_radius_is_an_error() {
        let mut st = SimState::init_flat(4, 4, 0.5, [0.0, 0.0], SimParams::default()).unwrap();
        let act = PickPlaceAction { pick: [5.0, 5.0], place: [0.0, 0.0], lift: 0.1 };
        assert!(matches!(st.apply_pick_and_place(&act, 1e-3), Err(Error::GraspMiss)));
    }

    #[test]
    fn corner_to_corner_fold_creates_overlap() {
        let mut st = SimState::init_flat(8, 8, 1.0, [0.0, 0.0], SimParams::default()).unwrap();
        let act = PickPlaceAction { pick: [-0.5, -0.5], place: [0.5, 0.5], lift: 0.5 };
        st.apply_pick_and_place(&act, 1e-3).unwrap();
        let occ = occluded_vertex_count(&st);
        let frac = occ as f64 / st.mesh().vertex_count() as f64;
        assert!(frac >= 0.10, "only {frac:.2} of vertices occluded after fold");
    }

    #[test]
    fn action_is_deterministic() {
        let run = || {
            let mut st =
                SimState::init_flat(6, 6, 1.0, [0.0, 0.0], SimParams::default()).unwrap();
            let act = PickPlaceAction { pick: [-0.5, -0.5], place: [0.3, 0.2], lift: 0.2 };
            st.apply_pick_and_place(&act, 1e-3).unwrap();
            st.mesh().vertices().to_vec()
        };
        assert_eq!(run(), run());
    }
}
