//! Small-dimension tensor algebra for the constitutive kernel.
//!
//! Second-order tensors are plain `nalgebra::Matrix3<f64>` (full 3x3 storage,
//! even for symmetric quantities -- deformation gradients are generally
//! non-symmetric and uniform storage avoids conversion bugs). Fourth-order
//! tensors carry all 81 components; the nonstandard square products
//! `(A ⊗̲ B)_ijkl = A_ik B_jl` and `(A ⊗̄ B)_ijkl = A_il B_jk` used in the
//! tangent derivations do not have minor symmetries in general, so a 6x6
//! pair representation alone would not be closed under them. Elasticity
//! tensors (which do have minor symmetries) are lowered to a 6x6 Voigt
//! block via [`Tensor4::to_voigt`] for element assembly.
//!
//! Voigt pair ordering used throughout: (11, 22, 33, 12, 23, 13).

use nalgebra::{Matrix3, Matrix6};

/// 3x3 second-order tensor.
pub type Tensor2 = Matrix3<f64>;

/// Voigt index pairs, ordering (11, 22, 33, 12, 23, 13).
pub const VOIGT: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];

/// Dense fourth-order tensor over R^3.
#[derive(Clone, Debug)]
pub struct Tensor4 {
    c: [f64; 81],
}

#[inline(always)]
fn idx(i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * 3 + j) * 3 + k) * 3 + l
}

impl Tensor4 {
    pub fn zeros() -> Self {
        Tensor4 { c: [0.0; 81] }
    }

    /// The identity on symmetric second-order tensors,
    /// `S_ijkl = (δ_ik δ_jl + δ_il δ_jk) / 2`.
    pub fn sym_identity() -> Self {
        let mut t = Tensor4::zeros();
        for i in 0..3 {
            for j in 0..3 {
                t.c[idx(i, j, i, j)] += 0.5;
                t.c[idx(i, j, j, i)] += 0.5;
            }
        }
        t
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.c[idx(i, j, k, l)]
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.c[idx(i, j, k, l)] = v;
    }

    #[inline(always)]
    pub fn add(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.c[idx(i, j, k, l)] += v;
    }

    pub fn scale(&self, s: f64) -> Tensor4 {
        let mut out = self.clone();
        for v in out.c.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn add_assign(&mut self, other: &Tensor4) {
        for (a, b) in self.c.iter_mut().zip(other.c.iter()) {
            *a += *b;
        }
    }

    pub fn add_scaled(&mut self, other: &Tensor4, s: f64) {
        for (a, b) in self.c.iter_mut().zip(other.c.iter()) {
            *a += s * *b;
        }
    }

    /// Double contraction with a second-order tensor: `(T : X)_ij = T_ijkl X_kl`.
    pub fn contract(&self, x: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += self.c[idx(i, j, k, l)] * x[(k, l)];
                    }
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    /// Maximum deviation from the minor symmetries ijkl = jikl = ijlk.
    pub fn minor_symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let v = self.c[idx(i, j, k, l)];
                        d = d.max((v - self.c[idx(j, i, k, l)]).abs());
                        d = d.max((v - self.c[idx(i, j, l, k)]).abs());
                    }
                }
            }
        }
        d
    }

    /// Lower to the 6x6 Voigt block (assumes minor symmetries).
    pub fn to_voigt(&self) -> Matrix6<f64> {
        let mut m = Matrix6::zeros();
        for (p, &(i, j)) in VOIGT.iter().enumerate() {
            for (q, &(k, l)) in VOIGT.iter().enumerate() {
                m[(p, q)] = self.c[idx(i, j, k, l)];
            }
        }
        m
    }
}

/// Standard dyadic product `(A ⊗ B)_ijkl = A_ij B_kl`.
pub fn dyad(a: &Tensor2, b: &Tensor2) -> Tensor4 {
    let mut t = Tensor4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    t.c[idx(i, j, k, l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    t
}

/// Symmetrized square product `(A ⊙ B)_ijkl = (A_ik B_jl + A_il B_jk) / 2`.
///
/// For symmetric `A`, `B` the result has minor symmetries; `sym_outer(I, I)`
/// is the identity on symmetric tensors.
pub fn sym_outer(a: &Tensor2, b: &Tensor2) -> Tensor4 {
    let mut t = Tensor4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    t.c[idx(i, j, k, l)] = 0.5 * (a[(i, k)] * b[(j, l)] + a[(i, l)] * b[(j, k)]);
                }
            }
        }
    }
    t
}

/// Both nonstandard square products: `(A ⊗̲ B)_ijkl = A_ik B_jl` (under-bar)
/// and `(A ⊗̄ B)_ijkl = A_il B_jk` (over-bar).
pub fn square_dyads(a: &Tensor2, b: &Tensor2) -> (Tensor4, Tensor4) {
    let mut under = Tensor4::zeros();
    let mut over = Tensor4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    under.c[idx(i, j, k, l)] = a[(i, k)] * b[(j, l)];
                    over.c[idx(i, j, k, l)] = a[(i, l)] * b[(j, k)];
                }
            }
        }
    }
    (under, over)
}

/// Push-forward of a material elasticity tensor to the spatial configuration,
/// `c_ijkl = (1/J) F_iI F_jJ F_kK F_lL C_IJKL`.
pub fn push_forward(cmat: &Tensor4, f: &Tensor2, jac: f64) -> Result<Tensor4, String> {
    if jac <= 0.0 {
        return Err(format!("push_forward: non-positive Jacobian {jac}"));
    }
    // Two-stage contraction keeps this O(3^5) per stage.
    let mut tmp = Tensor4::zeros();
    for big_i in 0..3 {
        for big_j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let mut s = 0.0;
                    for big_k in 0..3 {
                        for big_l in 0..3 {
                            s += cmat.c[idx(big_i, big_j, big_k, big_l)]
                                * f[(k, big_k)]
                                * f[(l, big_l)];
                        }
                    }
                    tmp.c[idx(big_i, big_j, k, l)] = s;
                }
            }
        }
    }
    let inv_j = 1.0 / jac;
    let mut out = Tensor4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let mut s = 0.0;
                    for big_i in 0..3 {
                        for big_j in 0..3 {
                            s += tmp.c[idx(big_i, big_j, k, l)] * f[(i, big_i)] * f[(j, big_j)];
                        }
                    }
                    out.c[idx(i, j, k, l)] = s * inv_j;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rand_t2(rng: &mut impl Rng) -> Tensor2 {
        Tensor2::from_fn(|_, _| rng.gen_range(-1.0..1.0))
    }

    fn rand_sym(rng: &mut impl Rng) -> Tensor2 {
        let a = rand_t2(rng);
        (a + a.transpose()) * 0.5
    }

    fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
        (a - b).abs() / scale.max(1e-30)
    }

    #[test]
    fn dyad_identity_contraction_gives_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_sym(&mut rng);
        let d = dyad(&Tensor2::identity(), &Tensor2::identity());
        let y = d.contract(&x);
        let expect = Tensor2::identity() * x.trace();
        assert!((y - expect).norm() < 1e-14);
    }

    #[test]
    fn dyad_contraction_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = rand_t2(&mut rng);
        let b = rand_t2(&mut rng);
        let c = rand_sym(&mut rng);
        let y = dyad(&a, &b).contract(&c);
        let expect = a * b.dot(&c);
        assert!((y - expect).norm() < 1e-13);
    }

    #[test]
    fn dyad_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = rand_t2(&mut rng);
            let b = rand_t2(&mut rng);
            let d = dyad(&a, &b);
            // spot indices incl. the spec's (0,1,2,2)
            assert!(rel_err(d.get(0, 1, 2, 2), a[(0, 1)] * b[(2, 2)], 1.0) < 1e-14);
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            assert!(rel_err(d.get(i, j, k, l), a[(i, j)] * b[(k, l)], 1.0) < 1e-14);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sym_outer_identity_is_s() {
        let s = sym_outer(&Tensor2::identity(), &Tensor2::identity());
        let sid = Tensor4::sym_identity();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        assert!((s.get(i, j, k, l) - sid.get(i, j, k, l)).abs() < 1e-15);
                    }
                }
            }
        }
        // S : X = X for symmetric X
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = rand_sym(&mut rng);
            assert!((sid.contract(&x) - x).norm() < 1e-15);
        }
    }

    #[test]
    fn sym_outer_diag_case() {
        // C = diag(4,1,1), C^{-1} = diag(1/4,1,1): component (0,0,0,0) = 1/16
        let cinv = Tensor2::from_diagonal(&nalgebra::Vector3::new(0.25, 1.0, 1.0));
        let t = sym_outer(&cinv, &cinv);
        assert!((t.get(0, 0, 0, 0) - 1.0 / 16.0).abs() < 1e-16);
    }

    #[test]
    fn sym_outer_matches_loop_oracle_and_minor_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a = rand_sym(&mut rng);
            let b = rand_sym(&mut rng);
            let t = sym_outer(&a, &b);
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            let oracle = 0.5 * (a[(i, k)] * b[(j, l)] + a[(i, l)] * b[(j, k)]);
                            assert!(rel_err(t.get(i, j, k, l), oracle, 1.0) < 1e-14);
                        }
                    }
                }
            }
            // minor symmetry in both index pairs holds when both arguments agree
            assert!(sym_outer(&a, &a).minor_symmetry_defect() < 1e-14);
        }
    }

    #[test]
    fn square_dyads_identity_and_average() {
        let id = Tensor2::identity();
        let (under, over) = square_dyads(&id, &id);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let delta =
                            |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                        assert_eq!(under.get(i, j, k, l), delta(i, k) * delta(j, l));
                        assert_eq!(over.get(i, j, k, l), delta(i, l) * delta(j, k));
                    }
                }
            }
        }
        // average of the two with symmetric A equals sym_outer(A, A)
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = rand_sym(&mut rng);
        let (u, o) = square_dyads(&a, &a);
        let s = sym_outer(&a, &a);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let avg = 0.5 * (u.get(i, j, k, l) + o.get(i, j, k, l));
                        assert!((avg - s.get(i, j, k, l)).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn square_dyads_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a = rand_t2(&mut rng);
            let b = rand_t2(&mut rng);
            let (u, o) = square_dyads(&a, &b);
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            assert!(rel_err(u.get(i, j, k, l), a[(i, k)] * b[(j, l)], 1.0) < 1e-14);
                            assert!(rel_err(o.get(i, j, k, l), a[(i, l)] * b[(j, k)], 1.0) < 1e-14);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn push_forward_identity_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut cmat = Tensor4::zeros();
        for v in 0..81 {
            cmat.c[v] = rng.gen_range(-1.0..1.0);
        }
        let c = push_forward(&cmat, &Tensor2::identity(), 1.0).unwrap();
        for v in 0..81 {
            assert!((c.c[v] - cmat.c[v]).abs() < 1e-15);
        }
        // F = 2I, J = 8 -> 2^4/8 = 2 x Cmat
        let c2 = push_forward(&cmat, &(Tensor2::identity() * 2.0), 8.0).unwrap();
        for v in 0..81 {
            assert!((c2.c[v] - 2.0 * cmat.c[v]).abs() < 1e-13);
        }
    }

    #[test]
    fn push_forward_matches_loop_oracle_and_preserves_minor_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            // minor-symmetric random input
            let mut cmat = Tensor4::zeros();
            for i in 0..3 {
                for j in i..3 {
                    for k in 0..3 {
                        for l in k..3 {
                            let v = rng.gen_range(-1.0..1.0);
                            cmat.set(i, j, k, l, v);
                            cmat.set(j, i, k, l, v);
                            cmat.set(i, j, l, k, v);
                            cmat.set(j, i, l, k, v);
                        }
                    }
                }
            }
            let f = Tensor2::identity() + rand_t2(&mut rng) * 0.3;
            let jac = f.determinant();
            if jac <= 0.1 {
                continue;
            }
            let c = push_forward(&cmat, &f, jac).unwrap();
            assert!(c.minor_symmetry_defect() < 1e-13);
            // 8-index loop oracle on a few components
            for &(i, j, k, l) in &[(0, 0, 0, 0), (0, 1, 2, 2), (1, 2, 0, 1), (2, 2, 1, 1)] {
                let mut s = 0.0;
                for bi in 0..3 {
                    for bj in 0..3 {
                        for bk in 0..3 {
                            for bl in 0..3 {
                                s += f[(i, bi)] * f[(j, bj)] * f[(k, bk)] * f[(l, bl)]
                                    * cmat.get(bi, bj, bk, bl);
                            }
                        }
                    }
                }
                s /= jac;
                assert!(rel_err(c.get(i, j, k, l), s, s.abs().max(1.0)) < 1e-13);
            }
        }
    }

    #[test]
    fn push_forward_rejects_inverted() {
        let cmat = Tensor4::zeros();
        assert!(push_forward(&cmat, &Tensor2::identity(), -1.0).is_err());
    }
}
