//! Isoparametric shape functions and quadrature rules for the two element
//! types in the shell grid: 8-node hexahedra and 6-node wedges (VTK node
//! ordering, cell types 12 and 13).

/// Element topology.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ElementKind {
    Hex8,
    Wedge6,
}

impl ElementKind {
    pub fn node_count(self) -> usize {
        match self {
            ElementKind::Hex8 => 8,
            ElementKind::Wedge6 => 6,
        }
    }

    pub fn gauss_count(self) -> usize {
        match self {
            ElementKind::Hex8 => 8,
            ElementKind::Wedge6 => 2,
        }
    }

    pub fn vtk_cell_type(self) -> u8 {
        match self {
            ElementKind::Hex8 => 12,
            ElementKind::Wedge6 => 13,
        }
    }
}

/// Natural coordinates of the hex corner nodes (VTK order).
const HEX_CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Shape functions and natural-coordinate gradients of one element type,
/// evaluated at a natural point. Only the first `node_count()` entries are
/// meaningful for wedges.
pub fn shape(kind: ElementKind, xi: [f64; 3]) -> ([f64; 8], [[f64; 3]; 8]) {
    let mut n = [0.0; 8];
    let mut dn = [[0.0; 3]; 8];
    match kind {
        ElementKind::Hex8 => {
            for (a, c) in HEX_CORNERS.iter().enumerate() {
                let f = [
                    0.5 * (1.0 + c[0] * xi[0]),
                    0.5 * (1.0 + c[1] * xi[1]),
                    0.5 * (1.0 + c[2] * xi[2]),
                ];
                n[a] = f[0] * f[1] * f[2];
                dn[a] = [
                    0.5 * c[0] * f[1] * f[2],
                    f[0] * 0.5 * c[1] * f[2],
                    f[0] * f[1] * 0.5 * c[2],
                ];
            }
        }
        ElementKind::Wedge6 => {
            // triangle coordinates (xi, eta), extrusion coordinate zeta
            let (r, s, t) = (xi[0], xi[1], xi[2]);
            let tri = [1.0 - r - s, r, s];
            let dtri = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
            for a in 0..3 {
                let lo = 0.5 * (1.0 - t);
                let hi = 0.5 * (1.0 + t);
                n[a] = tri[a] * lo;
                n[a + 3] = tri[a] * hi;
                dn[a] = [dtri[a][0] * lo, dtri[a][1] * lo, -0.5 * tri[a]];
                dn[a + 3] = [dtri[a][0] * hi, dtri[a][1] * hi, 0.5 * tri[a]];
            }
        }
    }
    (n, dn)
}

/// Gauss points (natural coordinates, weight) for one element type:
/// 2x2x2 for hexes, 2-point (triangle centroid x two extrusion stations)
/// for wedges. Weights sum to the reference-element volume.
pub fn quadrature(kind: ElementKind) -> Vec<([f64; 3], f64)> {
    let g = 1.0 / 3.0f64.sqrt();
    match kind {
        ElementKind::Hex8 => {
            let mut pts = Vec::with_capacity(8);
            for c in &HEX_CORNERS {
                pts.push(([c[0] * g, c[1] * g, c[2] * g], 1.0));
            }
            pts
        }
        ElementKind::Wedge6 => {
            vec![
                ([1.0 / 3.0, 1.0 / 3.0, -g], 0.5),
                ([1.0 / 3.0, 1.0 / 3.0, g], 0.5),
            ]
        }
    }
}
