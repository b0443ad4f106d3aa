use rand::Rng;

use super::grid::{astar_path, Cell, GridMap};
use crate::config::HazardConfig;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Layer {
    Wind,
    LowSignal,
}

/// Replaces the hazard layers with freshly sampled zones.
///
/// Each zone is a contiguous run of `zone_length` cells cut from the A* path
/// between two random active patients. With fewer than two active patients
/// the path runs from a random drone to a random free cell instead. Cells in
/// `protected` (drones, patients, landing zones) are never marked.
pub(crate) fn refresh(
    grid: &mut GridMap,
    cfg: &HazardConfig,
    rng: &mut impl Rng,
    patient_cells: &[Cell],
    drone_cells: [Cell; 2],
    protected: &[Cell],
) {
    grid.clear_hazards();
    let layers =
        std::iter::repeat_n(Layer::Wind, cfg.wind_zones).chain(std::iter::repeat_n(Layer::LowSignal, cfg.lowsig_zones));
    let free: Vec<Cell> = if patient_cells.len() < 2 { grid.free_cells().collect() } else { Vec::new() };

    for layer in layers {
        let (from, to) = if patient_cells.len() >= 2 {
            let i = rng.gen_range(0..patient_cells.len());
            let mut j = rng.gen_range(0..patient_cells.len() - 1);
            if j >= i {
                j += 1;
            }
            (patient_cells[i], patient_cells[j])
        } else {
            let d = drone_cells[rng.gen_range(0..2)];
            (d, free[rng.gen_range(0..free.len())])
        };
        let Ok(Some(path)) = astar_path(grid, from, to) else {
            continue;
        };
        let len = cfg.zone_length.min(path.len());
        if len == 0 {
            continue;
        }
        let start = rng.gen_range(0..=path.len() - len);
        for &c in &path[start..start + len] {
            if protected.contains(&c) {
                continue;
            }
            match layer {
                Layer::Wind => grid.mark_wind(c),
                Layer::LowSignal => grid.mark_lowsig(c),
            }
        }
    }
}
