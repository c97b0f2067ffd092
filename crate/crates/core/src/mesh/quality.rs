use serde::{Deserialize, Serialize};

use super::PolyMesh;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellQuality {
    pub body: u8,
    pub cell: usize,
    pub h_k: f64,
    pub h_min_edge: f64,
    pub star_center_ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshQualityReport {
    /// Maximum cell diameter.
    pub h: f64,
    /// Smallest edge length over all cells.
    pub h_m: f64,
    /// max over cells of log(1 + h_K / h_{m(K)}).
    pub log_factor: f64,
    pub cells: Vec<CellQuality>,
}

impl MeshQualityReport {
    pub fn all_star_centers_ok(&self) -> bool {
        self.cells.iter().all(|c| c.star_center_ok)
    }
}

fn cells_of(mesh: &PolyMesh) -> Vec<CellQuality> {
    (0..mesh.n_cells())
        .map(|c| {
            let g = mesh.cell_geometry(c);
            CellQuality {
                body: mesh.body_id(),
                cell: c,
                h_k: g.diameter,
                h_min_edge: g.min_edge_length(),
                star_center_ok: g.centroid_sees_all_edges(),
            }
        })
        .collect()
}

fn summarize(cells: Vec<CellQuality>) -> MeshQualityReport {
    let h = cells.iter().map(|c| c.h_k).fold(0.0, f64::max);
    let h_m = cells.iter().map(|c| c.h_min_edge).fold(f64::INFINITY, f64::min);
    let log_factor = cells
        .iter()
        .map(|c| (1.0 + c.h_k / c.h_min_edge).ln())
        .fold(0.0, f64::max);
    MeshQualityReport {
        h,
        h_m,
        log_factor,
        cells,
    }
}

pub fn quality_report(mesh: &PolyMesh) -> MeshQualityReport {
    summarize(cells_of(mesh))
}

pub fn quality_report_pair(a: &PolyMesh, b: &PolyMesh) -> MeshQualityReport {
    let mut cells = cells_of(a);
    cells.extend(cells_of(b));
    summarize(cells)
}
