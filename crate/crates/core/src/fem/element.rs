//! Element-level integration: internal force and consistent stiffness in
//! the current configuration, plus follower-pressure facet loads.
//!
//! Hexes and wedges are fully integrated; the near-incompressible
//! volumetric response of the ground matrix is treated by mean dilatation
//! (one effective elastic dilatation per element) with its exact,
//! symmetric consistent tangent. The deviatoric/fiber part uses the
//! Truesdell-rate modulus with a separate geometric stiffness, which
//! together make the assembled tangent the exact derivative of the
//! internal force.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::elements::{quadrature, shape, ElementKind};
use crate::material::{eval_point, GaussPointState, ModelOptions, RegionParams};
use crate::mesh::Element;
use crate::tensor::{Tensor2, VOIGT};

use super::FemError;

/// Internal force and tangent stiffness of one element, in global
/// displacement components (rows/cols grouped 3 per node).
pub struct ElementMatrices {
    pub force: Vec<Vector3<f64>>,
    pub stiffness: DMatrix<f64>,
}

/// Deformation gradient at one Gauss point from nodal positions and
/// displacements.
fn gauss_kinematics(
    coords: &[Vector3<f64>],
    disp: &[Vector3<f64>],
    kind: ElementKind,
    xi: [f64; 3],
) -> (Tensor2, Vec<Vector3<f64>>, f64, f64) {
    let (_, dn) = shape(kind, xi);
    let n = kind.node_count();
    let mut jac_ref = Matrix3::<f64>::zeros();
    let mut jac_cur = Matrix3::<f64>::zeros();
    for a in 0..n {
        let x_cur = coords[a] + disp[a];
        for i in 0..3 {
            for d in 0..3 {
                jac_ref[(i, d)] += coords[a][i] * dn[a][d];
                jac_cur[(i, d)] += x_cur[i] * dn[a][d];
            }
        }
    }
    let det_ref = jac_ref.determinant();
    let det_cur = jac_cur.determinant();
    let inv_ref = jac_ref.try_inverse().unwrap_or_else(Matrix3::zeros);
    let inv_cur = jac_cur.try_inverse().unwrap_or_else(Matrix3::zeros);
    // F = dx/dX = (dx/dxi)(dX/dxi)^{-1}
    let f = jac_cur * inv_ref;
    // spatial shape gradients dN/dx
    let grad_x: Vec<Vector3<f64>> = (0..n)
        .map(|a| {
            let mut g = Vector3::zeros();
            for i in 0..3 {
                for d in 0..3 {
                    g[i] += dn[a][d] * inv_cur[(d, i)];
                }
            }
            g
        })
        .collect();
    (f, grad_x, det_ref, det_cur)
}

/// Deformation gradients at all Gauss points of an element (used by the
/// growth-and-remodeling driver to evaluate stimuli at equilibrium).
pub fn element_deformation_gradients(
    coords: &[Vector3<f64>],
    disp: &[Vector3<f64>],
    kind: ElementKind,
) -> Vec<Tensor2> {
    quadrature(kind)
        .iter()
        .map(|(xi, _)| gauss_kinematics(coords, disp, kind, *xi).0)
        .collect()
}

pub fn element_force_stiffness(
    element_index: usize,
    element: &Element,
    coords: &[Vector3<f64>],
    disp: &[Vector3<f64>],
    gp_states: &[GaussPointState],
    params: &RegionParams,
    opts: &ModelOptions,
) -> Result<ElementMatrices, FemError> {
    let n = element.kind.node_count();
    let ndof = 3 * n;
    let mut force = vec![Vector3::zeros(); n];
    let mut stiffness = DMatrix::<f64>::zeros(ndof, ndof);

    // mean-dilatation accumulators (volumetric term is element-level)
    let mut v0 = 0.0; // reference volume
    let mut q_dil = 0.0; // integral of J/theta_g
    let mut g_dil = vec![Vector3::zeros(); n]; // integral of (J/theta) dN/dx
    let mut h_dil = DMatrix::<f64>::zeros(ndof, ndof);

    let mut b_mat = DMatrix::<f64>::zeros(6, ndof);
    for (gi, (xi, w)) in quadrature(element.kind).iter().enumerate() {
        let (f, grad_x, det_ref, det_cur) =
            gauss_kinematics(coords, disp, element.kind, *xi);
        if det_ref <= 0.0 || det_cur <= 0.0 {
            return Err(FemError::InvertedElement {
                element: element_index,
                gauss_point: gi,
                det: det_cur.min(det_ref),
            });
        }
        let state = &gp_states[gi];
        let resp = eval_point(&f, state, params, opts).map_err(|source| {
            FemError::Material {
                element: element_index,
                source,
            }
        })?;
        let dv = w * det_cur;
        let dv0 = w * det_ref;

        // internal force of the deviatoric + fiber stress
        for a in 0..n {
            force[a] += resp.sigma_devfib * grad_x[a] * dv;
        }

        // material stiffness: B^T D B with the Truesdell modulus
        b_mat.fill(0.0);
        for a in 0..n {
            let g = grad_x[a];
            for (row, &(i, j)) in VOIGT.iter().enumerate() {
                if i == j {
                    b_mat[(row, 3 * a + i)] = g[j];
                } else {
                    // engineering shear rows
                    b_mat[(row, 3 * a + i)] = g[j];
                    b_mat[(row, 3 * a + j)] = g[i];
                }
            }
        }
        let d_voigt = resp.c_truesdell_devfib.to_voigt();
        stiffness.gemm(dv, &(b_mat.transpose() * d_voigt), &b_mat, 1.0);

        // geometric stiffness of the same stress
        for a in 0..n {
            for b in 0..n {
                let s = (grad_x[a].transpose() * resp.sigma_devfib * grad_x[b])[(0, 0)] * dv;
                for i in 0..3 {
                    stiffness[(3 * a + i, 3 * b + i)] += s;
                }
            }
        }

        // mean-dilatation bookkeeping
        let j_over_theta = resp.j_e; // J / theta_g by the multiplicative split
        v0 += dv0;
        q_dil += j_over_theta * dv0;
        for a in 0..n {
            g_dil[a] += grad_x[a] * (j_over_theta * dv0);
        }
        for a in 0..n {
            for b in 0..n {
                for i in 0..3 {
                    for j in 0..3 {
                        h_dil[(3 * a + i, 3 * b + j)] += j_over_theta
                            * dv0
                            * (grad_x[a][i] * grad_x[b][j] - grad_x[a][j] * grad_x[b][i]);
                    }
                }
            }
        }
    }

    // element-level volumetric force and exact tangent
    let theta_bar = q_dil / v0;
    let rho_k = gp_states[0].rho0_m * params.bulk_k;
    let fv = 2.0 * rho_k * (theta_bar - 1.0);
    for a in 0..n {
        force[a] += g_dil[a] * fv;
    }
    for a in 0..n {
        for b in 0..n {
            for i in 0..3 {
                for j in 0..3 {
                    stiffness[(3 * a + i, 3 * b + j)] += 2.0 * rho_k
                        * (g_dil[a][i] * g_dil[b][j] / v0
                            + (theta_bar - 1.0) * h_dil[(3 * a + i, 3 * b + j)]);
                }
            }
        }
    }

    Ok(ElementMatrices { force, stiffness })
}

/// Element-averaged elastic dilatation (the mean-dilatation field), used
/// when reporting volumetric response.
pub fn element_mean_dilatation(
    element: &Element,
    coords: &[Vector3<f64>],
    disp: &[Vector3<f64>],
    gp_states: &[GaussPointState],
) -> f64 {
    let mut v0 = 0.0;
    let mut q = 0.0;
    for (gi, (xi, w)) in quadrature(element.kind).iter().enumerate() {
        let (f, _, det_ref, _) = gauss_kinematics(coords, disp, element.kind, *xi);
        let theta = match gp_states[gi].growth_mode {
            crate::material::GrowthMode::Transmural => gp_states[gi].theta_g,
            crate::material::GrowthMode::MassDensity => 1.0,
        };
        v0 += w * det_ref;
        q += w * det_ref * f.determinant() / theta;
    }
    q / v0
}

/// Follower pressure on one inner-surface facet: external force (pointing
/// into the tissue) and the unsymmetrized load-stiffness contribution
/// d f_ext / d u.
pub fn facet_force_stiffness(
    facet_index: usize,
    current: &[Vector3<f64>],
    p: f64,
) -> Result<(Vec<Vector3<f64>>, DMatrix<f64>), FemError> {
    let n = current.len();
    let ndof = 3 * n;
    let mut force = vec![Vector3::zeros(); n];
    let mut k_load = DMatrix::<f64>::zeros(ndof, ndof);

    // (shape values, shape gradients, weight) at each surface Gauss point
    let gauss: Vec<(Vec<f64>, Vec<[f64; 2]>, f64)> = match n {
        4 => {
            let g = 1.0 / 3.0f64.sqrt();
            let corners = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
            corners
                .iter()
                .map(|&[xi, eta]| {
                    let (xi, eta) = (xi * g, eta * g);
                    let nv: Vec<f64> = corners
                        .iter()
                        .map(|c| 0.25 * (1.0 + c[0] * xi) * (1.0 + c[1] * eta))
                        .collect();
                    let dv: Vec<[f64; 2]> = corners
                        .iter()
                        .map(|c| {
                            [
                                0.25 * c[0] * (1.0 + c[1] * eta),
                                0.25 * c[1] * (1.0 + c[0] * xi),
                            ]
                        })
                        .collect();
                    (nv, dv, 1.0)
                })
                .collect()
        }
        3 => {
            // flat linear triangle: the centroid rule is exact
            let nv = vec![1.0 / 3.0; 3];
            let dv = vec![[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
            vec![(nv, dv, 0.5)]
        }
        other => {
            return Err(FemError::DegenerateFacet {
                facet: facet_index,
                detail: format!("unsupported facet node count {other}"),
            })
        }
    };

    let area_scale: f64 = current
        .iter()
        .zip(current.iter().cycle().skip(1))
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    for (nv, dv, w) in &gauss {
        let mut t_xi = Vector3::zeros();
        let mut t_eta = Vector3::zeros();
        for a in 0..n {
            t_xi += current[a] * dv[a][0];
            t_eta += current[a] * dv[a][1];
        }
        let normal = t_xi.cross(&t_eta);
        if normal.norm() < 1e-12 * area_scale.max(1e-30) {
            return Err(FemError::DegenerateFacet {
                facet: facet_index,
                detail: "zero-area facet".into(),
            });
        }
        for a in 0..n {
            force[a] += normal * (p * nv[a] * w);
            // d(t_xi x t_eta)/du_{b,j} = dN_b/dxi e_j x t_eta + dN_b/deta t_xi x e_j
            for b in 0..n {
                for j in 0..3 {
                    let mut ej = Vector3::zeros();
                    ej[j] = 1.0;
                    let dn = ej.cross(&t_eta) * dv[b][0] + t_xi.cross(&ej) * dv[b][1];
                    for i in 0..3 {
                        k_load[(3 * a + i, 3 * b + j)] += p * nv[a] * w * dn[i];
                    }
                }
            }
        }
    }
    Ok((force, k_load))
}
