//! Equation numbering with constraints eliminated in rotated local frames.
//!
//! Each constrained node gets an orthonormal local basis whose leading
//! directions are the constraint normals (equator plane and/or sector-face
//! planes); displacement along those directions is exactly zero, and the
//! remaining local directions receive global equation numbers.

use nalgebra::{Matrix3, Vector3};

use crate::mesh::Mesh;

pub const UNCONSTRAINED: usize = usize::MAX;

#[derive(Clone, Debug)]
pub struct DofMap {
    /// Local basis per node; columns are the local directions, constrained
    /// ones first. Identity for unconstrained nodes.
    pub rotation: Vec<Matrix3<f64>>,
    /// Equation index per (node, local direction); UNCONSTRAINED if fixed.
    pub eq: Vec<[usize; 3]>,
    pub n_equations: usize,
}

impl DofMap {
    pub fn build(mesh: &Mesh) -> Self {
        let n_nodes = mesh.nodes.len();
        let mut normals: Vec<Vec<Vector3<f64>>> = vec![Vec::new(); n_nodes];
        for &n in &mesh.constraints.equator {
            normals[n].push(Vector3::z());
        }
        for face in &mesh.constraints.faces {
            for &n in &face.nodes {
                normals[n].push(face.normal);
            }
        }

        let mut rotation = Vec::with_capacity(n_nodes);
        let mut eq = Vec::with_capacity(n_nodes);
        let mut n_equations = 0;
        for node_normals in &normals {
            // orthonormalize the constraint normals, dropping duplicates
            let mut basis: Vec<Vector3<f64>> = Vec::new();
            for n in node_normals {
                let mut v = *n;
                for b in &basis {
                    v -= b * b.dot(&v);
                }
                if v.norm() > 1e-8 {
                    basis.push(v.normalize());
                }
            }
            let n_fixed = basis.len();
            // complete to a right-handed-agnostic orthonormal triad
            for cand in [Vector3::x(), Vector3::y(), Vector3::z()] {
                if basis.len() == 3 {
                    break;
                }
                let mut v = cand;
                for b in &basis {
                    v -= b * b.dot(&v);
                }
                if v.norm() > 1e-8 {
                    basis.push(v.normalize());
                }
            }
            debug_assert_eq!(basis.len(), 3);
            rotation.push(Matrix3::from_columns(&basis));
            let mut node_eq = [UNCONSTRAINED; 3];
            for (d, e) in node_eq.iter_mut().enumerate() {
                if d >= n_fixed {
                    *e = n_equations;
                    n_equations += 1;
                }
            }
            eq.push(node_eq);
        }
        DofMap {
            rotation,
            eq,
            n_equations,
        }
    }

    /// Global nodal displacements from the solution vector (constrained
    /// local components are zero by construction).
    pub fn expand(&self, solution: &[f64]) -> Vec<Vector3<f64>> {
        self.eq
            .iter()
            .zip(&self.rotation)
            .map(|(node_eq, q)| {
                let mut local = Vector3::zeros();
                for d in 0..3 {
                    if node_eq[d] != UNCONSTRAINED {
                        local[d] = solution[node_eq[d]];
                    }
                }
                q * local
            })
            .collect()
    }

    /// Number of constrained directions at a node.
    pub fn fixed_count(&self, node: usize) -> usize {
        self.eq[node].iter().filter(|&&e| e == UNCONSTRAINED).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, MeshConfig};

    #[test]
    fn equation_count_matches_constraint_arithmetic() {
        let mesh = generate(&MeshConfig::default()).unwrap();
        let dofmap = DofMap::build(&mesh);
        let total_dofs = 3 * mesh.nodes.len();
        assert_eq!(
            dofmap.n_equations,
            total_dofs - mesh.constraints.constrained_dof_count()
        );
    }

    #[test]
    fn axis_nodes_keep_only_axial_motion() {
        let mesh = generate(&MeshConfig::default()).unwrap();
        let dofmap = DofMap::build(&mesh);
        // polar-axis nodes (first layer-count+1 indices) sit in both sector
        // planes: two independent normals, one free direction left (z)
        for node in 0..=mesh.config.layers {
            assert_eq!(dofmap.fixed_count(node), 2);
            let free_dir = dofmap.rotation[node].column(2);
            assert!(
                (free_dir.z.abs() - 1.0).abs() < 1e-12,
                "free axis direction should be polar"
            );
        }
    }

    #[test]
    fn rotations_orthonormal_and_expand_respects_constraints() {
        let mesh = generate(&MeshConfig {
            divisions: [2, 2, 3],
            layers: 2,
            ..MeshConfig::default()
        })
        .unwrap();
        let dofmap = DofMap::build(&mesh);
        for q in &dofmap.rotation {
            assert!((q.transpose() * q - Matrix3::identity()).norm() < 1e-12);
        }
        let solution: Vec<f64> = (0..dofmap.n_equations)
            .map(|i| (i as f64 * 0.1).sin())
            .collect();
        let u = dofmap.expand(&solution);
        for &n in &mesh.constraints.equator {
            assert!(u[n].z.abs() < 1e-15);
        }
        for face in &mesh.constraints.faces {
            for &n in &face.nodes {
                assert!(u[n].dot(&face.normal).abs() < 1e-14);
            }
        }
    }
}
