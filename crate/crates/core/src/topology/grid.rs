//! Discretized torus (energy contour) x (pump cycle) carrying a solution
//! frame at the fiducial point for every node.

use crate::numkernel::Contour;
use crate::par::{map_indexed, Parallelism};
use crate::potential::PumpProblem;
use crate::solutions::{cell_span, CellGrid, FrameBundle, SolutionFrame, SolveError};
use crate::topology::{resolve_mu, TopologyError};

/// Minimum distance kept between plaquette s nodes and detected crossing
/// times; the grid is shifted by whole multiples of three times this until
/// every node clears it.
const CROSSING_CLEARANCE: f64 = 1e-6;

#[derive(Clone)]
pub struct TorusGrid {
    /// Plaquette z nodes around the energy contour; node 0 sits at mu.
    pub contour: Contour,
    /// Plaquette s nodes covering one cycle, possibly shifted to clear
    /// crossing times.
    pub s_nodes: Vec<f64>,
    pub mu: f64,
    pub e_below: f64,
    pub n: usize,
    pub parallelism: Parallelism,
    pub(crate) frames: Vec<SolutionFrame>,
}

impl TorusGrid {
    /// Number of contour nodes.
    pub fn nz(&self) -> usize {
        self.contour.nodes.len()
    }

    /// Number of cycle nodes.
    pub fn ns(&self) -> usize {
        self.s_nodes.len()
    }

    /// Frame at contour node `jz` and cycle node `ks`; indices wrap, so
    /// plaquette loops can address neighbours without special casing the
    /// torus seam.
    pub fn frame(&self, jz: usize, ks: usize) -> &SolutionFrame {
        let j = jz % self.nz();
        let k = ks % self.ns();
        &self.frames[k * self.nz() + j]
    }

    /// Build the torus grid for the problem, using its plaquette resolution.
    /// `avoid` lists cycle times (detected crossings) that no s node may
    /// approach closer than the clearance.
    pub fn build(problem: &PumpProblem, avoid: &[f64]) -> Result<TorusGrid, TopologyError> {
        let mu = resolve_mu(problem)?;
        let nz = problem.plaquette_z.max(4);
        let ns = problem.plaquette_s.max(4);
        let contour = Contour::ellipse(problem.e_below, mu, problem.contour_aspect, nz);
        let s_nodes = deformed_cycle(ns, avoid);

        let (lo, hi) = cell_span(&problem.spec, problem.x0);
        let spec = problem.spec.clone();
        let x_step = problem.x_step;
        let x0 = problem.x0;
        let nodes = contour.nodes.clone();
        let columns: Vec<Result<Vec<SolutionFrame>, SolveError>> =
            map_indexed(ns, problem.parallelism, |k| {
                let grid = CellGrid::build(&spec, s_nodes[k], lo, hi, x_step)?;
                let j0 = grid.node_index(x0)?;
                let mut col = Vec::with_capacity(nz);
                for &z in &nodes {
                    let bundle = FrameBundle::build(&spec, &grid, z)?;
                    col.push(bundle.frame_at_node(&grid, j0));
                }
                Ok(col)
            });
        let mut frames = Vec::with_capacity(nz * ns);
        for col in columns {
            frames.extend(col?);
        }
        Ok(TorusGrid {
            contour,
            s_nodes,
            mu,
            e_below: problem.e_below,
            n: problem.spec.n,
            parallelism: problem.parallelism,
            frames,
        })
    }
}

/// Uniform cycle grid shifted by the smallest multiple of three clearances
/// that keeps every node away from the given times.
fn deformed_cycle(ns: usize, avoid: &[f64]) -> Vec<f64> {
    let tau = 2.0 * std::f64::consts::PI;
    let h = tau / ns as f64;
    let clear = |shift: f64| -> bool {
        avoid.iter().all(|&a| {
            let pos = (a - shift).rem_euclid(h);
            pos.min(h - pos) >= CROSSING_CLEARANCE
        })
    };
    let mut shift = 0.0;
    let mut step = 1usize;
    while !clear(shift) {
        shift = 3.0 * CROSSING_CLEARANCE * step as f64;
        step += 1;
        assert!(
            step < 1000,
            "could not clear crossing times with a small grid shift"
        );
    }
    (0..ns).map(|k| shift + h * k as f64).collect()
}
