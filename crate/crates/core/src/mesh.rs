//! Structured grid of a thin semi-spherical shell sector.
//!
//! The model domain is a 3-degree azimuthal slice of a semi-spherical shell
//! (posterior half of the eye wall), with the polar axis along global z and
//! the equator in the z = 0 plane:
//!
//! ```text
//!          z (polar axis)
//!          |   __
//!          | /    \  <- pole (apex): lamina cribrosa, then peripapillary
//!          |/      \    sclera, then peripheral sclera toward the equator
//!    ------+--------+---- z = 0 (equator, sliding plane)
//! ```
//!
//! The grid is stations-along-the-meridian x layers-through-the-wall x one
//! azimuthal division. The meridional ring touching the polar axis is filled
//! with wedge elements (the axis nodes are shared between both sector
//! faces); every other ring is hexahedral.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements::{quadrature, shape, ElementKind};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh config: {0}")]
    InvalidConfig(String),
    #[error("degenerate pole element: {0}")]
    DegeneratePole(String),
    #[error("non-positive Jacobian in element {element} at gauss point {gauss_point}: {value}")]
    NonPositiveJacobian {
        element: usize,
        gauss_point: usize,
        value: f64,
    },
}

/// Tissue region along the meridian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Lamina cribrosa (pole side).
    Lc,
    /// Peripapillary sclera.
    Pps,
    /// Peripheral sclera (equator side).
    Ps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    /// Inner shell radius (m).
    pub inner_radius: f64,
    /// Wall thickness (m).
    pub thickness: f64,
    /// Azimuthal sector angle (degrees).
    pub sector_deg: f64,
    /// Meridional angle of the LC/PPS boundary (degrees from the pole).
    pub lc_boundary_deg: f64,
    /// Meridional angle of the PPS/PS boundary (degrees from the pole).
    pub pps_boundary_deg: f64,
    /// Meridional divisions within each region (LC, PPS, PS).
    pub divisions: [usize; 3],
    /// Through-thickness layers.
    pub layers: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            inner_radius: 0.012,
            thickness: 0.0005,
            sector_deg: 3.0,
            lc_boundary_deg: 4.0,
            pps_boundary_deg: 30.0,
            divisions: [2, 9, 20],
            layers: 30,
        }
    }
}

impl MeshConfig {
    /// Distribute a total meridional division count across the regions
    /// proportionally to angular span, with at least 2 divisions in the LC
    /// (it spans only a few degrees but hosts the weakening event).
    pub fn with_total_divisions(total: usize, layers: usize) -> Self {
        let base = MeshConfig::default();
        let spans = [
            base.lc_boundary_deg,
            base.pps_boundary_deg - base.lc_boundary_deg,
            90.0 - base.pps_boundary_deg,
        ];
        let lc = ((total as f64 * spans[0] / 90.0).round() as usize).max(2);
        let pps = (total as f64 * spans[1] / 90.0).round() as usize;
        let ps = total.saturating_sub(lc + pps).max(1);
        MeshConfig {
            divisions: [lc, pps.max(1), ps],
            layers,
            ..base
        }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.inner_radius <= 0.0 || self.thickness <= 0.0 {
            return Err(MeshError::InvalidConfig(format!(
                "radius {} and thickness {} must be positive",
                self.inner_radius, self.thickness
            )));
        }
        if !(self.sector_deg > 0.0 && self.sector_deg < 90.0) {
            return Err(MeshError::InvalidConfig(format!(
                "sector angle {} degrees out of range (0, 90)",
                self.sector_deg
            )));
        }
        if !(self.lc_boundary_deg > 0.0
            && self.lc_boundary_deg < self.pps_boundary_deg
            && self.pps_boundary_deg < 90.0)
        {
            return Err(MeshError::InvalidConfig(format!(
                "region boundaries ({}, {}) must satisfy 0 < lc < pps < 90",
                self.lc_boundary_deg, self.pps_boundary_deg
            )));
        }
        if self.divisions.iter().any(|&d| d == 0) || self.layers == 0 {
            return Err(MeshError::InvalidConfig(
                "divisions and layers must all be >= 1".into(),
            ));
        }
        // pole ring angular width; zero would collapse the wedge ring
        let first = self.lc_boundary_deg / self.divisions[0] as f64;
        if first < 1e-9 {
            return Err(MeshError::DegeneratePole(format!(
                "first meridional ring spans {first} degrees"
            )));
        }
        Ok(())
    }

    pub fn total_divisions(&self) -> usize {
        self.divisions.iter().sum()
    }

    pub fn outer_radius(&self) -> f64 {
        self.inner_radius + self.thickness
    }

    /// Analytic volume of the spherical shell sector (m^3).
    pub fn analytic_volume(&self) -> f64 {
        let (ri, ro) = (self.inner_radius, self.outer_radius());
        (2.0 * std::f64::consts::PI / 3.0) * (ro.powi(3) - ri.powi(3)) * self.sector_deg / 360.0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Element {
    pub kind: ElementKind,
    /// Global node indices, VTK ordering.
    pub nodes: Vec<usize>,
    pub region: Region,
}

/// Orthonormal material triad at a Gauss point (reference configuration).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Frame {
    /// Circumferential fiber direction.
    pub a0_fc: Vector3<f64>,
    /// Meridional fiber direction.
    pub a0_fm: Vector3<f64>,
    /// Transmural (radial) direction.
    pub a0_perp: Vector3<f64>,
}

/// One loaded face on the inner surface, node-ordered so the bilinear
/// normal points radially outward (from the cavity into the tissue).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Facet {
    pub element: usize,
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FaceConstraint {
    pub nodes: Vec<usize>,
    /// Unit normal of the constrained plane; displacement along it is zero.
    pub normal: Vector3<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintSets {
    /// Nodes on the equator plane: zero displacement along the polar axis.
    pub equator: Vec<usize>,
    /// The two meridian sector faces (0 degrees and `sector_deg`).
    pub faces: [FaceConstraint; 2],
}

impl ConstraintSets {
    /// Total constrained DOF count, counting a node once per plane it lies in.
    pub fn constrained_dof_count(&self) -> usize {
        self.equator.len() + self.faces[0].nodes.len() + self.faces[1].nodes.len()
    }
}

/// One through-thickness column of nodes (inner surface first), used for
/// thickness measurements on the deformed grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeColumn {
    pub nodes: Vec<usize>,
    /// Meridional angle of the column in degrees from the pole.
    pub angle_deg: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mesh {
    pub config: MeshConfig,
    pub nodes: Vec<Vector3<f64>>,
    pub elements: Vec<Element>,
    /// Per element, per Gauss point.
    pub frames: Vec<Vec<Frame>>,
    pub facets: Vec<Facet>,
    pub constraints: ConstraintSets,
    pub columns: Vec<NodeColumn>,
    pub warnings: Vec<String>,
}

/// Meridional station angles in degrees (pole = 0 to equator = 90),
/// concatenating the per-region subdivisions.
fn station_angles(config: &MeshConfig) -> Vec<f64> {
    let mut angles = vec![0.0];
    let bounds = [
        (0.0, config.lc_boundary_deg, config.divisions[0]),
        (config.lc_boundary_deg, config.pps_boundary_deg, config.divisions[1]),
        (config.pps_boundary_deg, 90.0, config.divisions[2]),
    ];
    for (lo, hi, n) in bounds {
        for i in 1..=n {
            angles.push(lo + (hi - lo) * i as f64 / n as f64);
        }
    }
    angles
}

fn spherical_point(r: f64, phi_deg: f64, omega_deg: f64) -> Vector3<f64> {
    let phi = phi_deg.to_radians();
    let omega = omega_deg.to_radians();
    Vector3::new(
        r * phi.sin() * omega.cos(),
        r * phi.sin() * omega.sin(),
        r * phi.cos(),
    )
}

/// Material triad from a reference position (spherical basis).
pub fn frame_at(position: &Vector3<f64>) -> Frame {
    let r = position.norm();
    let rho = (position.x * position.x + position.y * position.y).sqrt();
    let omega = position.y.atan2(position.x);
    let (sin_phi, cos_phi) = (rho / r, position.z / r);
    Frame {
        a0_fc: Vector3::new(-omega.sin(), omega.cos(), 0.0),
        a0_fm: Vector3::new(cos_phi * omega.cos(), cos_phi * omega.sin(), -sin_phi),
        a0_perp: position / r,
    }
}

fn region_of(centroid: &Vector3<f64>, config: &MeshConfig) -> Region {
    let rho = (centroid.x * centroid.x + centroid.y * centroid.y).sqrt();
    let phi_deg = rho.atan2(centroid.z).to_degrees();
    if phi_deg < config.lc_boundary_deg {
        Region::Lc
    } else if phi_deg < config.pps_boundary_deg {
        Region::Pps
    } else {
        Region::Ps
    }
}

/// Position of a natural point inside an element (isoparametric map).
pub fn map_point(mesh_nodes: &[Vector3<f64>], element: &Element, xi: [f64; 3]) -> Vector3<f64> {
    let (n, _) = shape(element.kind, xi);
    let mut x = Vector3::zeros();
    for (a, &node) in element.nodes.iter().enumerate() {
        x += mesh_nodes[node] * n[a];
    }
    x
}

/// Jacobian determinant of the isoparametric map at a natural point.
pub fn jacobian_det(mesh_nodes: &[Vector3<f64>], element: &Element, xi: [f64; 3]) -> f64 {
    let (_, dn) = shape(element.kind, xi);
    let mut jac = nalgebra::Matrix3::<f64>::zeros();
    for (a, &node) in element.nodes.iter().enumerate() {
        for i in 0..3 {
            for d in 0..3 {
                jac[(i, d)] += mesh_nodes[node][i] * dn[a][d];
            }
        }
    }
    jac.determinant()
}

/// Numerically integrated element volume.
pub fn element_volume(mesh_nodes: &[Vector3<f64>], element: &Element) -> f64 {
    quadrature(element.kind)
        .iter()
        .map(|(xi, w)| w * jacobian_det(mesh_nodes, element, *xi))
        .sum()
}

/// Numerically integrated mesh volume.
pub fn mesh_volume(mesh: &Mesh) -> f64 {
    mesh.elements
        .iter()
        .map(|e| element_volume(&mesh.nodes, e))
        .sum()
}

fn aspect_ratio(mesh_nodes: &[Vector3<f64>], element: &Element) -> f64 {
    // edge list per topology
    let edges: &[(usize, usize)] = match element.kind {
        ElementKind::Hex8 => &[
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 0),
            (4, 5),
            (5, 6),
            (6, 7),
            (7, 4),
            (0, 4),
            (1, 5),
            (2, 6),
            (3, 7),
        ],
        ElementKind::Wedge6 => &[
            (0, 1),
            (1, 2),
            (2, 0),
            (3, 4),
            (4, 5),
            (5, 3),
            (0, 3),
            (1, 4),
            (2, 5),
        ],
    };
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &(a, b) in edges {
        let l = (mesh_nodes[element.nodes[a]] - mesh_nodes[element.nodes[b]]).norm();
        lo = lo.min(l);
        hi = hi.max(l);
    }
    hi / lo
}

/// Generate the structured shell-sector grid with frames, pressure facets,
/// and constraint sets.
pub fn generate(config: &MeshConfig) -> Result<Mesh, MeshError> {
    config.validate()?;
    let angles = station_angles(config);
    let n_m = angles.len() - 1; // meridional divisions
    let n_layers = config.layers;
    let n_radial = n_layers + 1;
    let radius = |k: usize| {
        config.inner_radius + config.thickness * k as f64 / n_layers as f64
    };

    // nodes: polar-axis column first, then (station, azimuth)-major columns
    let mut nodes = Vec::with_capacity(n_radial * (1 + 2 * n_m));
    for k in 0..n_radial {
        nodes.push(Vector3::new(0.0, 0.0, radius(k)));
    }
    let omegas = [0.0, config.sector_deg];
    for station in 1..=n_m {
        for omega in omegas {
            for k in 0..n_radial {
                nodes.push(spherical_point(radius(k), angles[station], omega));
            }
        }
    }
    let axis_node = |k: usize| k;
    let grid_node = |station: usize, s: usize, k: usize| {
        n_radial + ((station - 1) * 2 + s) * n_radial + k
    };

    // elements: wedge ring at the pole, hexes beyond
    let mut elements = Vec::with_capacity(n_m * n_layers);
    for k in 0..n_layers {
        // bottom triangle at inner radius; orientation gives positive J
        elements.push(Element {
            kind: ElementKind::Wedge6,
            nodes: vec![
                axis_node(k),
                grid_node(1, 0, k),
                grid_node(1, 1, k),
                axis_node(k + 1),
                grid_node(1, 0, k + 1),
                grid_node(1, 1, k + 1),
            ],
            region: Region::Lc, // provisional; retagged below from centroid
        });
    }
    for station in 1..n_m {
        for k in 0..n_layers {
            elements.push(Element {
                kind: ElementKind::Hex8,
                nodes: vec![
                    grid_node(station, 0, k),
                    grid_node(station + 1, 0, k),
                    grid_node(station + 1, 1, k),
                    grid_node(station, 1, k),
                    grid_node(station, 0, k + 1),
                    grid_node(station + 1, 0, k + 1),
                    grid_node(station + 1, 1, k + 1),
                    grid_node(station, 1, k + 1),
                ],
                region: Region::Lc,
            });
        }
    }

    // region tags from centroid meridional angle
    for e in elements.iter_mut() {
        let centroid = e
            .nodes
            .iter()
            .fold(Vector3::zeros(), |acc, &n| acc + nodes[n])
            / e.nodes.len() as f64;
        e.region = region_of(&centroid, config);
    }

    // Jacobian positivity and quality at all quadrature points
    let mut warnings = Vec::new();
    let mut worst_aspect = 0.0f64;
    for (ei, e) in elements.iter().enumerate() {
        for (gi, (xi, _)) in quadrature(e.kind).iter().enumerate() {
            let det = jacobian_det(&nodes, e, *xi);
            if det <= 0.0 {
                return Err(MeshError::NonPositiveJacobian {
                    element: ei,
                    gauss_point: gi,
                    value: det,
                });
            }
        }
        worst_aspect = worst_aspect.max(aspect_ratio(&nodes, e));
    }
    if worst_aspect > 50.0 {
        warnings.push(format!(
            "element aspect ratio {worst_aspect:.1} exceeds 50; thin-shell grid may \
             degrade solver conditioning"
        ));
    }

    // material frames at Gauss points (always strictly off the polar axis)
    let frames: Vec<Vec<Frame>> = elements
        .iter()
        .map(|e| {
            quadrature(e.kind)
                .iter()
                .map(|(xi, _)| frame_at(&map_point(&nodes, e, *xi)))
                .collect()
        })
        .collect();

    // inner-surface pressure facets: the k = 0 faces of the innermost layer.
    // Node order chosen so (x_,xi x x_,eta) points radially outward.
    let mut facets = Vec::with_capacity(n_m);
    facets.push(Facet {
        element: 0,
        nodes: vec![axis_node(0), grid_node(1, 0, 0), grid_node(1, 1, 0)],
    });
    for station in 1..n_m {
        let ei = n_layers + (station - 1) * n_layers; // k = 0 element of the ring
        facets.push(Facet {
            element: ei,
            nodes: vec![
                grid_node(station, 0, 0),
                grid_node(station + 1, 0, 0),
                grid_node(station + 1, 1, 0),
                grid_node(station, 1, 0),
            ],
        });
    }

    // constraint sets
    let equator: Vec<usize> = (0..2)
        .flat_map(|s| (0..n_radial).map(move |k| grid_node(n_m, s, k)))
        .collect();
    let face_nodes = |s: usize| -> Vec<usize> {
        let mut v: Vec<usize> = (0..n_radial).map(axis_node).collect();
        for station in 1..=n_m {
            for k in 0..n_radial {
                v.push(grid_node(station, s, k));
            }
        }
        v
    };
    // through-thickness node columns: the polar-axis column plus one per
    // (station, sector face)
    let mut columns = Vec::with_capacity(1 + 2 * n_m);
    columns.push(NodeColumn {
        nodes: (0..n_radial).map(axis_node).collect(),
        angle_deg: 0.0,
    });
    for station in 1..=n_m {
        for s in 0..2 {
            columns.push(NodeColumn {
                nodes: (0..n_radial).map(|k| grid_node(station, s, k)).collect(),
                angle_deg: angles[station],
            });
        }
    }

    let sector_rad = config.sector_deg.to_radians();
    let constraints = ConstraintSets {
        equator,
        faces: [
            FaceConstraint {
                nodes: face_nodes(0),
                normal: Vector3::new(0.0, 1.0, 0.0),
            },
            FaceConstraint {
                nodes: face_nodes(1),
                normal: Vector3::new(-sector_rad.sin(), sector_rad.cos(), 0.0),
            },
        ],
    };

    Ok(Mesh {
        config: config.clone(),
        nodes,
        elements,
        frames,
        facets,
        constraints,
        columns,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn default_grid_matches_reference_counts() {
        let mesh = generate(&MeshConfig::default()).unwrap();
        let hexes = mesh
            .elements
            .iter()
            .filter(|e| e.kind == ElementKind::Hex8)
            .count();
        let wedges = mesh
            .elements
            .iter()
            .filter(|e| e.kind == ElementKind::Wedge6)
            .count();
        assert_eq!(hexes, 900);
        assert_eq!(wedges, 30);
        assert_eq!(mesh.nodes.len(), 31 + 31 * 2 * 31);
        assert!(mesh.warnings.is_empty(), "{:?}", mesh.warnings);
    }

    #[test]
    fn minimal_grid() {
        let config = MeshConfig {
            divisions: [1, 1, 1],
            layers: 1,
            ..MeshConfig::default()
        };
        // 3 meridional divisions x 1 layer: 1 wedge + 2 hex; also try the
        // smallest two-division slice via wide custom boundaries
        let mesh = generate(&config).unwrap();
        assert_eq!(mesh.elements.len(), 3);
        for (ei, e) in mesh.elements.iter().enumerate() {
            for (xi, _) in quadrature(e.kind) {
                assert!(jacobian_det(&mesh.nodes, e, xi) > 0.0, "element {ei}");
            }
        }
    }

    #[test]
    fn volume_matches_analytic_sector() {
        let config = MeshConfig::default();
        let mesh = generate(&config).unwrap();
        let v = mesh_volume(&mesh);
        let exact = config.analytic_volume();
        assert!(
            (v - exact).abs() / exact < 5e-3,
            "volume {v:.6e} vs analytic {exact:.6e}"
        );
    }

    #[test]
    fn nodes_lie_on_spherical_surfaces() {
        let config = MeshConfig::default();
        let mesh = generate(&config).unwrap();
        let dr = config.thickness / config.layers as f64;
        for n in &mesh.nodes {
            let r = n.norm();
            let k = (r - config.inner_radius) / dr;
            assert!((k - k.round()).abs() < 1e-9, "radius {r} off-surface");
        }
    }

    #[test]
    fn region_partition_by_meridional_angle() {
        let config = MeshConfig::default();
        let mesh = generate(&config).unwrap();
        let mut counts = HashMap::new();
        for e in &mesh.elements {
            *counts.entry(format!("{:?}", e.region)).or_insert(0usize) += 1;
            let centroid = e
                .nodes
                .iter()
                .fold(Vector3::zeros(), |acc, &n| acc + mesh.nodes[n])
                / e.nodes.len() as f64;
            let rho = (centroid.x * centroid.x + centroid.y * centroid.y).sqrt();
            let phi = rho.atan2(centroid.z).to_degrees();
            match e.region {
                Region::Lc => assert!(phi < config.lc_boundary_deg),
                Region::Pps => {
                    assert!(phi >= config.lc_boundary_deg && phi < config.pps_boundary_deg)
                }
                Region::Ps => assert!(phi >= config.pps_boundary_deg),
            }
        }
        // 2 LC rings, 9 PPS rings, 20 PS rings x 30 layers
        assert_eq!(counts["Lc"], 60);
        assert_eq!(counts["Pps"], 270);
        assert_eq!(counts["Ps"], 600);
    }

    #[test]
    fn frames_orthonormal_and_spherical() {
        let mesh = generate(&MeshConfig::default()).unwrap();
        for (e, frames) in mesh.elements.iter().zip(&mesh.frames) {
            for (gi, fr) in frames.iter().enumerate() {
                assert!((fr.a0_fc.norm() - 1.0).abs() < 1e-12);
                assert!((fr.a0_fm.norm() - 1.0).abs() < 1e-12);
                assert!((fr.a0_perp.norm() - 1.0).abs() < 1e-12);
                assert!(fr.a0_fc.dot(&fr.a0_fm).abs() < 1e-12);
                assert!(fr.a0_fc.dot(&fr.a0_perp).abs() < 1e-12);
                assert!(fr.a0_fm.dot(&fr.a0_perp).abs() < 1e-12);
                // right-handed triad (fm, fc, perp)
                assert!((fr.a0_fm.cross(&fr.a0_fc) - fr.a0_perp).norm() < 1e-12);
                // circumferential direction is horizontal and tangent
                assert!(fr.a0_fc.z.abs() < 1e-12);
                let x = map_point(&mesh.nodes, e, quadrature(e.kind)[gi].0);
                assert!(fr.a0_fc.dot(&x).abs() < 1e-12 * x.norm());
            }
        }
        // equator point: meridional tangent is the (negative) polar axis
        let fr = frame_at(&Vector3::new(0.012, 0.0, 0.0));
        assert!((fr.a0_fm - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!(fr.a0_perp.z.abs() < 1e-12);
    }

    #[test]
    fn constraint_sets_counts_and_geometry() {
        let config = MeshConfig::default();
        let mesh = generate(&config).unwrap();
        let n_radial = config.layers + 1;
        let n_m = config.total_divisions();
        assert_eq!(mesh.constraints.equator.len(), 2 * n_radial);
        for &n in &mesh.constraints.equator {
            assert!(mesh.nodes[n].z.abs() < 1e-12 * config.inner_radius);
        }
        for face in &mesh.constraints.faces {
            assert_eq!(face.nodes.len(), n_radial * (1 + n_m));
            for &n in &face.nodes {
                assert!(
                    mesh.nodes[n].dot(&face.normal).abs() < 1e-12 * config.inner_radius,
                    "node off its sector plane"
                );
            }
        }
        assert!((mesh.constraints.faces[0].normal - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        // set-arithmetic oracle on the structured grid
        assert_eq!(
            mesh.constraints.constrained_dof_count(),
            2 * n_radial + 2 * n_radial * (1 + n_m)
        );
    }

    #[test]
    fn watertight_interior_facets() {
        let mesh = generate(&MeshConfig {
            divisions: [2, 3, 4],
            layers: 4,
            ..MeshConfig::default()
        })
        .unwrap();
        // count every element face; interior faces must appear exactly twice
        let mut face_count: HashMap<Vec<usize>, usize> = HashMap::new();
        for e in &mesh.elements {
            let faces: Vec<Vec<usize>> = match e.kind {
                ElementKind::Hex8 => vec![
                    vec![0, 1, 2, 3],
                    vec![4, 5, 6, 7],
                    vec![0, 1, 5, 4],
                    vec![1, 2, 6, 5],
                    vec![2, 3, 7, 6],
                    vec![3, 0, 4, 7],
                ],
                ElementKind::Wedge6 => vec![
                    vec![0, 1, 2],
                    vec![3, 4, 5],
                    vec![0, 1, 4, 3],
                    vec![1, 2, 5, 4],
                    vec![2, 0, 3, 5],
                ],
            };
            for f in faces {
                let mut key: Vec<usize> = f.iter().map(|&a| e.nodes[a]).collect();
                key.sort_unstable();
                *face_count.entry(key).or_insert(0) += 1;
            }
        }
        for (face, count) in &face_count {
            assert!(
                *count == 1 || *count == 2,
                "face {face:?} shared by {count} elements"
            );
        }
        // boundary face count: inner + outer shells, 2 sector planes, equator
        let boundary = face_count.values().filter(|&&c| c == 1).count();
        let n_m = mesh.config.total_divisions();
        let n_l = mesh.config.layers;
        assert_eq!(boundary, 2 * n_m + 2 * n_m * n_l + n_l);
    }

    #[test]
    fn pressure_facets_cover_inner_surface_once() {
        let config = MeshConfig::default();
        let mesh = generate(&config).unwrap();
        assert_eq!(mesh.facets.len(), config.total_divisions());
        let mut seen = std::collections::HashSet::new();
        for f in &mesh.facets {
            for &n in &f.nodes {
                assert!(
                    (mesh.nodes[n].norm() - config.inner_radius).abs()
                        < 1e-12 * config.inner_radius
                );
            }
            assert!(seen.insert(f.nodes.clone()), "duplicate facet");
            assert!(f.element < mesh.elements.len());
        }
    }

    #[test]
    fn node_columns_span_the_wall() {
        let config = MeshConfig::default();
        let mesh = generate(&config).unwrap();
        assert_eq!(mesh.columns.len(), 1 + 2 * config.total_divisions());
        for col in &mesh.columns {
            assert_eq!(col.nodes.len(), config.layers + 1);
            let inner = mesh.nodes[col.nodes[0]];
            let outer = mesh.nodes[*col.nodes.last().unwrap()];
            assert!((inner.norm() - config.inner_radius).abs() < 1e-12);
            assert!((outer.norm() - config.outer_radius()).abs() < 1e-12);
            assert!(((outer - inner).norm() - config.thickness).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = MeshConfig {
            layers: 0,
            ..MeshConfig::default()
        };
        assert!(generate(&bad).is_err());
        let bad = MeshConfig {
            lc_boundary_deg: 0.0,
            ..MeshConfig::default()
        };
        assert!(generate(&bad).is_err());
        let bad = MeshConfig {
            thickness: -1.0,
            ..MeshConfig::default()
        };
        assert!(generate(&bad).is_err());
    }

    #[test]
    fn total_divisions_split_default() {
        let config = MeshConfig::with_total_divisions(31, 30);
        assert_eq!(config.divisions, [2, 9, 20]);
        assert_eq!(config, MeshConfig::default());
        let refined = MeshConfig::with_total_divisions(62, 60);
        assert_eq!(refined.divisions.iter().sum::<usize>(), 62);
    }
}
