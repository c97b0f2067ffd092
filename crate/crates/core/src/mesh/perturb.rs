use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BoundaryLabel, PolyMesh};
use crate::error::{Result, VemError};

/// Slides every interior node of the contact polyline along the line by
/// `±U(lo, hi)·h_max`, so that node insertion against an initially matching
/// partner creates contact edges of that length. Endpoints of the polyline stay
/// fixed. A move that would cross a neighbouring node or invalidate a cell is
/// skipped.
pub fn perturb_contact_band(mesh: &PolyMesh, fraction_range: (f64, f64), seed: u64) -> Result<PolyMesh> {
    let (lo, hi) = fraction_range;
    if !(0.0 <= lo && lo <= hi && hi < 0.5) {
        return Err(VemError::InvalidArgument(format!(
            "fraction range ({lo}, {hi}) must satisfy 0 <= lo <= hi < 0.5"
        )));
    }
    let contact = mesh.edges_with_label(BoundaryLabel::Contact);
    if contact.is_empty() {
        return Err(VemError::InvalidMesh("no contact edges to perturb".into()));
    }
    let mut out = mesh.clone();
    if hi == 0.0 {
        return Ok(out);
    }
    let h_max = mesh.max_diameter();
    // contact-node neighbours along the polyline
    let mut nbrs: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &e in &contact {
        let [a, b] = mesh.edge(e).vertices;
        nbrs.entry(a).or_default().push(b);
        nbrs.entry(b).or_default().push(a);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (&v, nb) in &nbrs {
        let magnitude = lo + (hi - lo) * rng.gen::<f64>();
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        if nb.len() != 2 {
            continue;
        }
        let p = out.vertex(v);
        let (qa, qb) = (out.vertex(nb[0]), out.vertex(nb[1]));
        let t = (qb - qa).normalize();
        let shift = sign * magnitude * h_max;
        let target = p + t * shift;
        // stay strictly between the two neighbours, with clearance
        let sa = (qa - p).dot(&t);
        let sb = (qb - p).dot(&t);
        if !(shift > 0.5 * sa && shift < 0.5 * sb) {
            continue;
        }
        let _ = out.move_vertex(v, target);
    }
    Ok(out)
}
