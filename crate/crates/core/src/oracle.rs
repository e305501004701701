//! Independent verification oracles.
//!
//! Everything in this module recomputes the physics from scratch — scalar
//! strain energy, brute-force finite differences, textbook shell statics,
//! and a tiny-step scalar ODE integrator — and never calls into the
//! analytic stress/tangent code it is checking. Tests and the `verify`
//! CLI verb compare the two sides.

use nalgebra::Vector3;
use serde::Serialize;

use crate::material::{
    eval_point, total_stress_tangent, FiberState, GaussPointState, GrowthMode, ModelOptions,
    RegionParams,
};
use crate::tensor::{Tensor2, Tensor4};

/// Relative FD step on deformation components; halving it must reduce the
/// error (Richardson check), which the default battery asserts.
pub const FD_STEP: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Independent scalar energy
// ---------------------------------------------------------------------------

/// Growth gradient rebuilt from first principles (diagonal in the frame
/// spanned by the transmural direction).
fn oracle_growth_gradient(state: &GaussPointState) -> Tensor2 {
    match state.growth_mode {
        GrowthMode::MassDensity => Tensor2::identity(),
        GrowthMode::Transmural => {
            let n = state.a0_perp;
            Tensor2::identity() + (n * n.transpose()) * (state.theta_g - 1.0)
        }
    }
}

fn fiber_energy_density(
    c: &Tensor2,
    fiber: &FiberState,
    lambda_g: f64,
    params: &RegionParams,
    opts: &ModelOptions,
) -> f64 {
    let i4_total = (fiber.a0.transpose() * c * fiber.a0)[(0, 0)];
    let i4e = i4_total / (lambda_g * fiber.lambda_r).powi(2);
    let g = i4e - 1.0;
    if opts.tension_gate && g <= 0.0 {
        return 0.0;
    }
    fiber.rho0 * params.c3 / (2.0 * params.c4) * ((params.c4 * g * g).exp() - 1.0)
}

/// Total strain energy per unit reference volume as a function of the right
/// Cauchy-Green tensor, with the internal state frozen.
pub fn energy_density(
    c: &Tensor2,
    state: &GaussPointState,
    params: &RegionParams,
    opts: &ModelOptions,
) -> f64 {
    let f_g = oracle_growth_gradient(state);
    let theta = f_g.determinant();
    let f_g_inv = f_g
        .try_inverse()
        .expect("growth gradient of an admissible state is invertible");
    // Matrix elastic right Cauchy-Green: C_e = F_g^{-T} C F_g^{-1}.
    let c_e = f_g_inv.transpose() * c * f_g_inv;
    let j = c.determinant().sqrt();
    let j_e = j / theta;
    let i1e_bar = c_e.trace() * j_e.powf(-2.0 / 3.0);
    let w_matrix = state.rho0_m
        * (state.c1_current * (i1e_bar - 3.0) + params.bulk_k * (j_e - 1.0).powi(2));
    let lg_c = (f_g * state.fiber_c.a0).norm();
    let lg_m = (f_g * state.fiber_m.a0).norm();
    w_matrix
        + fiber_energy_density(c, &state.fiber_c, lg_c, params, opts)
        + fiber_energy_density(c, &state.fiber_m, lg_m, params, opts)
}

// ---------------------------------------------------------------------------
// Finite-difference stress
// ---------------------------------------------------------------------------

/// Cauchy stress by central-difference differentiation of the scalar energy
/// with respect to C, pushed forward: sigma = (2/J) F (dPsi/dC) F^T.
pub fn fd_stress_oracle(
    f: &Tensor2,
    state: &GaussPointState,
    params: &RegionParams,
    opts: &ModelOptions,
    step: f64,
) -> Tensor2 {
    let c = f.transpose() * f;
    let h = step * c.norm().max(1.0);
    let mut grad = Tensor2::zeros();
    for a in 0..3 {
        for b in a..3 {
            // perturb the (a,b) and (b,a) entries together to stay symmetric
            let mut delta = Tensor2::zeros();
            delta[(a, b)] += h;
            delta[(b, a)] += h;
            let wp = energy_density(&(c + delta), state, params, opts);
            let wm = energy_density(&(c - delta), state, params, opts);
            // the symmetric perturbation doubles the diagonal entry and
            // hits both off-diagonal mirror entries, so one divisor serves
            let d = (wp - wm) / (4.0 * h);
            grad[(a, b)] = d;
            grad[(b, a)] = d;
        }
    }
    // Off-diagonal entries of dPsi/dC each carry half of the symmetric pair.
    // With the convention above grad is already the symmetric gradient.
    let j = f.determinant();
    f * (grad * 2.0) * f.transpose() / j
}

// ---------------------------------------------------------------------------
// Finite-difference Jaumann tangent
// ---------------------------------------------------------------------------

/// Closed-form Cauchy stress rebuilt inside the oracle (no shared code with
/// the analytic module); used only to difference the Kirchhoff stress.
fn oracle_cauchy_stress(
    f: &Tensor2,
    state: &GaussPointState,
    params: &RegionParams,
    opts: &ModelOptions,
) -> Tensor2 {
    let f_g = oracle_growth_gradient(state);
    let f_g_inv = f_g.try_inverse().expect("invertible growth gradient");
    let f_e = f * f_g_inv;
    let j = f.determinant();
    let j_e = f_e.determinant();
    let b_e_bar = f_e * f_e.transpose() * j_e.powf(-2.0 / 3.0);
    let id = Tensor2::identity();
    let mut sigma = (b_e_bar - id * (b_e_bar.trace() / 3.0))
        * (2.0 / j * state.rho0_m * state.c1_current);
    sigma += id * (2.0 / j * state.rho0_m * params.bulk_k * (j_e - 1.0) * j_e);
    for fiber in [&state.fiber_c, &state.fiber_m] {
        let fa = f * fiber.a0;
        let lambda = fa.norm();
        let lambda_g = (f_g * fiber.a0).norm();
        let i4e = (lambda / (lambda_g * fiber.lambda_r)).powi(2);
        let g = i4e - 1.0;
        if opts.tension_gate && g <= 0.0 {
            continue;
        }
        let a = fa / lambda;
        sigma += (a * a.transpose())
            * (2.0 / j * fiber.rho0 * params.c3 * i4e * g * (params.c4 * g * g).exp());
    }
    sigma
}

/// Jaumann-rate spatial tangent by central differencing of the Kirchhoff
/// stress under symmetric velocity-gradient perturbations of F.
pub fn fd_tangent_oracle(
    f: &Tensor2,
    state: &GaussPointState,
    params: &RegionParams,
    opts: &ModelOptions,
    step: f64,
) -> Tensor4 {
    let j = f.determinant();
    let mut c = Tensor4::zeros();
    for k in 0..3 {
        for l in k..3 {
            let mut pert = Tensor2::zeros();
            pert[(k, l)] += 0.5 * step;
            pert[(l, k)] += 0.5 * step;
            let id = Tensor2::identity();
            let fp = (id + pert) * f;
            let fm = (id - pert) * f;
            let tau_p = oracle_cauchy_stress(&fp, state, params, opts) * fp.determinant();
            let tau_m = oracle_cauchy_stress(&fm, state, params, opts) * fm.determinant();
            let dtau = (tau_p - tau_m) / (2.0 * step * j);
            for i in 0..3 {
                for jj in 0..3 {
                    c.set(i, jj, k, l, dtau[(i, jj)]);
                    c.set(i, jj, l, k, dtau[(i, jj)]);
                }
            }
        }
    }
    c
}

// ---------------------------------------------------------------------------
// Thin-shell statics
// ---------------------------------------------------------------------------

/// Laplace law for a pressurized thin spherical shell: in-plane stress
/// p * R / (2 t).
pub fn laplace_oracle(p: f64, r_mid: f64, t: f64) -> f64 {
    p * r_mid / (2.0 * t)
}

// ---------------------------------------------------------------------------
// Single-point relaxation
// ---------------------------------------------------------------------------

/// Trajectory of the coupled mass/remodeling scalar ODEs at one material
/// point with the total deformation frozen.
#[derive(Clone, Debug, Serialize)]
pub struct RelaxationTrajectory {
    pub days: Vec<f64>,
    pub delta_g: Vec<f64>,
    pub lambda_e: Vec<f64>,
    pub rho0: Vec<f64>,
    /// |DeltaG| < 1e-4 at the end of the integration window.
    pub converged: bool,
}

/// Integrate growth and remodeling of a single fiber family under a frozen
/// uniaxial total stretch, with a tiny explicit step (dt = 0.01 day),
/// entirely independent of the solver's state-update path.
pub fn single_point_relaxation_oracle(
    params: &RegionParams,
    lambda_e0: f64,
    sign: f64,
) -> RelaxationTrajectory {
    let c3 = params.c3;
    let c4 = params.c4;
    let jac = 1.0; // frozen isochoric surrogate configuration
    let sigma = |rho: f64, le: f64| -> f64 {
        let i4 = le * le;
        let g = i4 - 1.0;
        if g <= 0.0 {
            0.0
        } else {
            2.0 / jac * rho * c3 * i4 * g * (c4 * g * g).exp()
        }
    };
    // deposition: lambda_r chosen so the frozen total stretch produces
    // lambda_e0 right away; homeostatic stress frozen at lambda_h
    let lambda_total = lambda_e0;
    let mut rho = params.rho0_fc0;
    let mut lambda_r = 1.0;
    let sigma_h = sigma(rho, params.lambda_h);

    let dt = 0.01;
    let t_end = 10.0 * params.turnover_days;
    let n = (t_end / dt).round() as usize;
    let sample_every = (1.0 / dt).round() as usize;
    let mut out = RelaxationTrajectory {
        days: Vec::new(),
        delta_g: Vec::new(),
        lambda_e: Vec::new(),
        rho0: Vec::new(),
        converged: false,
    };
    let mut last_dg = 0.0;
    for step_i in 0..=n {
        let lambda_e = lambda_total / lambda_r;
        let sf = sigma(rho, lambda_e);
        let dg = (sf - sigma_h) / sigma_h;
        last_dg = dg;
        if step_i % sample_every == 0 {
            out.days.push(step_i as f64 * dt);
            out.delta_g.push(dg);
            out.lambda_e.push(lambda_e);
            out.rho0.push(rho);
        }
        if !dg.is_finite() || rho <= 0.0 || lambda_r <= 0.0 {
            break;
        }
        let rho_dot = rho * params.k_sigma * dg;
        // dW/dlambda_e and d2W/dlambda_e2 of the exponential fiber energy
        let g = lambda_e * lambda_e - 1.0;
        let e = (c4 * g * g).exp();
        let d1 = 2.0 * c3 * lambda_e * g * e;
        let d2 = 2.0 * c3 * e * (g + 2.0 * lambda_e * lambda_e * (1.0 + 2.0 * c4 * g * g));
        let denom = rho / jac * (d1 + lambda_e * d2);
        let lr_dot = if g <= 0.0 || denom.abs() < 1e-12 {
            0.0
        } else {
            (rho_dot / rho + sign / params.turnover_days) * (sf - sigma_h) / denom
                * (lambda_r / lambda_e)
        };
        rho += rho_dot * dt;
        lambda_r += lr_dot * dt;
    }
    out.converged = last_dg.is_finite() && last_dg.abs() < 1e-4;
    out
}

// ---------------------------------------------------------------------------
// Report plumbing
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct OracleReport {
    pub checks: Vec<CheckResult>,
}

impl OracleReport {
    pub fn push(&mut self, name: &str, max_rel_error: f64, tolerance: f64) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            max_rel_error,
            tolerance,
            pass: max_rel_error < tolerance,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render_table(&self) -> String {
        let mut s = format!(
            "{:<44} {:>12} {:>10} {:>6}\n",
            "check", "max rel err", "tol", "pass"
        );
        for c in &self.checks {
            s.push_str(&format!(
                "{:<44} {:>12.3e} {:>10.1e} {:>6}\n",
                c.name,
                c.max_rel_error,
                c.tolerance,
                if c.pass { "ok" } else { "FAIL" }
            ));
        }
        s
    }
}

/// Deterministic pseudo-random admissible state generator (splitmix-style;
/// kept local so the oracle layer has no RNG crate coupling).
pub struct StateSampler {
    s: u64,
}

impl StateSampler {
    pub fn new(seed: u64) -> Self {
        StateSampler { s: seed }
    }

    pub fn next_f64(&mut self) -> f64 {
        self.s = self.s.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.s;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z = z ^ (z >> 31);
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    fn unit_vector(&mut self) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                self.uniform(-1.0, 1.0),
                self.uniform(-1.0, 1.0),
                self.uniform(-1.0, 1.0),
            );
            let n = v.norm();
            if n > 0.2 {
                return v / n;
            }
        }
    }

    /// Random orthonormal frame (fc, fm, perp).
    pub fn frame(&mut self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let a = self.unit_vector();
        let mut b = self.unit_vector();
        b -= a * a.dot(&b);
        let b = b.normalize();
        let c = a.cross(&b);
        (a, b, c)
    }

    /// Moderate random deformation gradient with positive determinant.
    pub fn deformation(&mut self) -> Tensor2 {
        loop {
            let mut f = Tensor2::identity();
            for i in 0..3 {
                for j in 0..3 {
                    f[(i, j)] += self.uniform(-0.1, 0.1);
                }
            }
            if f.determinant() > 0.3 {
                return f;
            }
        }
    }

    /// Random admissible internal state for the given region parameters.
    pub fn state(&mut self, params: &RegionParams) -> GaussPointState {
        let (fc, fm, perp) = self.frame();
        let mode = if self.next_f64() < 0.5 {
            GrowthMode::Transmural
        } else {
            GrowthMode::MassDensity
        };
        let mut st = GaussPointState::fresh(fc, fm, perp, params, mode);
        st.fiber_c.lambda_r = self.uniform(0.95, 1.05);
        st.fiber_m.lambda_r = self.uniform(0.95, 1.05);
        st.fiber_c.rho0 *= self.uniform(0.8, 1.2);
        st.fiber_m.rho0 *= self.uniform(0.8, 1.2);
        if mode == GrowthMode::Transmural {
            st.theta_g = self.uniform(0.9, 1.1);
        }
        st
    }
}

fn rel_err2(a: &Tensor2, b: &Tensor2, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}

fn rel_err4(a: &Tensor4, b: &Tensor4, floor: f64) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let x = a.get(i, j, k, l);
                    let y = b.get(i, j, k, l);
                    diff += (x - y) * (x - y);
                    scale += y * y;
                }
            }
        }
    }
    diff.sqrt() / scale.sqrt().max(floor)
}

/// Run the full verification battery. Deterministic for a given seed.
pub fn run_all(seed: u64) -> OracleReport {
    let mut report = OracleReport::default();
    let opts = ModelOptions::default();
    let regions = [
        ("lc", RegionParams::lc_default()),
        ("pps", RegionParams::pps_default()),
        ("ps", RegionParams::ps_default()),
    ];

    // stress: analytic vs FD energy, and tangent: analytic vs FD Kirchhoff
    let mut sampler = StateSampler::new(seed);
    let mut worst_stress = 0.0f64;
    let mut worst_tangent = 0.0f64;
    let mut worst_richardson = 0.0f64;
    for trial in 0..100 {
        let params = &regions[trial % 3].1;
        let st = sampler.state(params);
        let f = sampler.deformation();
        let analytic = total_stress_tangent(&f, &st, params, &opts).unwrap();
        let fd = fd_stress_oracle(&f, &st, params, &opts, FD_STEP);
        worst_stress = worst_stress.max(rel_err2(&fd, &analytic.sigma, 1.0));
        let fd_c = fd_tangent_oracle(&f, &st, params, &opts, FD_STEP);
        worst_tangent = worst_tangent.max(rel_err4(&fd_c, &analytic.c_jau, 1.0));
        if trial < 5 {
            // Richardson: halving the step must reduce the error. Checked at
            // a coarse step where truncation dominates round-off (at the
            // production step the error already sits on the round-off floor).
            let coarse = 1e-3;
            let fd_coarse = fd_stress_oracle(&f, &st, params, &opts, coarse);
            let fd_half = fd_stress_oracle(&f, &st, params, &opts, coarse / 2.0);
            let e_coarse = rel_err2(&fd_coarse, &analytic.sigma, 1.0);
            let e_half = rel_err2(&fd_half, &analytic.sigma, 1.0);
            worst_richardson = worst_richardson.max(e_half / e_coarse.max(1e-16));
        }
    }
    report.push("stress: analytic vs FD energy", worst_stress, 1e-7);
    report.push("tangent: analytic vs FD Jaumann", worst_tangent, 1e-5);
    report.push("FD Richardson ratio (half/full step)", worst_richardson, 0.6);

    // matrix-only and fiber-only tangent decompositions
    let mut sampler = StateSampler::new(seed ^ 0xABCD);
    let params = RegionParams::pps_default();
    let mut worst_matrix = 0.0f64;
    let mut worst_fiber = 0.0f64;
    for _ in 0..20 {
        let mut st = sampler.state(&params);
        let f = sampler.deformation();
        st.fiber_c.rho0 = 0.0;
        st.fiber_m.rho0 = 0.0;
        let analytic = total_stress_tangent(&f, &st, &params, &opts).unwrap();
        let fd_c = fd_tangent_oracle(&f, &st, &params, &opts, FD_STEP);
        worst_matrix = worst_matrix.max(rel_err4(&fd_c, &analytic.c_jau, 1.0));

        let mut st = sampler.state(&params);
        st.rho0_m = 0.0;
        let analytic = total_stress_tangent(&f, &st, &params, &opts).unwrap();
        let fd_c = fd_tangent_oracle(&f, &st, &params, &opts, FD_STEP);
        worst_fiber = worst_fiber.max(rel_err4(&fd_c, &analytic.c_jau, 1.0));
    }
    report.push("tangent: matrix-only vs FD", worst_matrix, 1e-5);
    report.push("tangent: fiber-only vs FD", worst_fiber, 1e-5);

    // gate: compressed fibers contribute nothing
    let mut gate_err = 0.0f64;
    {
        let (fc, fm, perp) = StateSampler::new(seed ^ 7).frame();
        let mut with_fibers =
            GaussPointState::fresh(fc, fm, perp, &params, GrowthMode::Transmural);
        let mut without = with_fibers.clone();
        without.fiber_c.rho0 = 0.0;
        without.fiber_m.rho0 = 0.0;
        // uniform compression closes the gate for both families
        let f = Tensor2::identity() * 0.97;
        with_fibers.fiber_c.lambda_r = 1.0;
        with_fibers.fiber_m.lambda_r = 1.0;
        let a = total_stress_tangent(&f, &with_fibers, &params, &opts).unwrap();
        let b = total_stress_tangent(&f, &without, &params, &opts).unwrap();
        gate_err = gate_err
            .max(rel_err2(&a.sigma, &b.sigma, 1.0))
            .max(rel_err4(&a.c_jau, &b.c_jau, 1.0));
        let resp = eval_point(&f, &with_fibers, &params, &opts).unwrap();
        gate_err = gate_err.max(resp.sigma_fc.abs()).max(resp.sigma_fm.abs());
    }
    report.push("tension gate: closed fibers inert", gate_err, 1e-14);

    // Laplace law values
    let lp = laplace_oracle(1999.84, 12.25e-3, 0.5e-3);
    report.push(
        "laplace: 15 mmHg, R 12.25 mm, t 0.5 mm",
        (lp - 24498.04) .abs() / 24498.04,
        1e-6,
    );

    // single-point relaxation: stable sign converges, flipped sign does not
    let traj = single_point_relaxation_oracle(&params, 1.012, 1.0);
    report.push(
        "relaxation s=+1 converges to homeostasis",
        if traj.converged { 0.0 } else { 1.0 },
        0.5,
    );
    let traj = single_point_relaxation_oracle(&params, 1.012, -1.0);
    report.push(
        "relaxation s=-1 diverges",
        if traj.converged { 1.0 } else { 0.0 },
        0.5,
    );
    let traj = single_point_relaxation_oracle(&params, params.lambda_h, 1.0);
    let drift = traj
        .delta_g
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()));
    report.push("relaxation at lambda_h stays put", drift, 1e-9);

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::state_rates;
    use approx::assert_relative_eq;

    #[test]
    fn fd_stress_zero_at_reference() {
        let params = RegionParams::pps_default();
        let (fc, fm, perp) = StateSampler::new(1).frame();
        let st = GaussPointState::fresh(fc, fm, perp, &params, GrowthMode::Transmural);
        // fibers sit exactly on the tension-gate kink at the reference, where
        // central differences degrade to O(h); with the gate off the energy
        // is smooth and the gradient vanishes to FD precision
        let smooth = ModelOptions {
            tension_gate: false,
            ..ModelOptions::default()
        };
        let s = fd_stress_oracle(&Tensor2::identity(), &st, &params, &smooth, FD_STEP);
        assert!(s.norm() < 1e-6);
        let s = fd_stress_oracle(
            &Tensor2::identity(),
            &st,
            &params,
            &ModelOptions::default(),
            FD_STEP,
        );
        assert!(s.norm() < 1.0, "gated reference noise {:.3e} Pa", s.norm());
    }

    #[test]
    fn fd_stress_pure_dilation_matches_vol_term() {
        let params = RegionParams::pps_default();
        let opts = ModelOptions::default();
        // fibers along x/y; stretch only z so the gate keeps them inert,
        // with a whisker of remodeling slack to stay off the gate kink
        let mut st = GaussPointState::fresh(
            Vector3::x(),
            Vector3::y(),
            Vector3::z(),
            &params,
            GrowthMode::Transmural,
        );
        st.fiber_c.lambda_r = 1.001;
        st.fiber_m.lambda_r = 1.001;
        let mut f = Tensor2::identity();
        f[(2, 2)] = 1.05;
        let fd = fd_stress_oracle(&f, &st, &params, &opts, FD_STEP);
        let analytic = total_stress_tangent(&f, &st, &params, &opts).unwrap();
        assert!(rel_err2(&fd, &analytic.sigma, 1.0) < 1e-7);
        // volumetric F with unstretched fibers: uniform dilation triggers
        // the fibers, so instead verify the matrix-only decomposition
        let mut matrix_only = st.clone();
        matrix_only.fiber_c.rho0 = 0.0;
        matrix_only.fiber_m.rho0 = 0.0;
        let f = Tensor2::identity() * 1.04;
        let fd = fd_stress_oracle(&f, &matrix_only, &params, &opts, FD_STEP);
        let vol = crate::material::matrix_vol_stress(
            f.determinant(),
            f.determinant(),
            matrix_only.rho0_m,
            params.bulk_k,
        );
        assert!(rel_err2(&fd, &vol, 1.0) < 1e-7);
    }

    #[test]
    fn laplace_values() {
        assert_relative_eq!(
            laplace_oracle(1999.84, 12.25e-3, 0.5e-3),
            24498.04,
            max_relative = 1e-6
        );
        assert_eq!(laplace_oracle(0.0, 12.25e-3, 0.5e-3), 0.0);
        assert_relative_eq!(
            laplace_oracle(1000.0, 0.012, 0.002),
            laplace_oracle(1000.0, 0.012, 0.001) / 2.0
        );
    }

    #[test]
    fn full_battery_passes() {
        let report = run_all(42);
        assert!(report.all_pass(), "\n{}", report.render_table());
    }

    #[test]
    fn relaxation_is_monotone_for_stable_sign() {
        let params = RegionParams::pps_default();
        let traj = single_point_relaxation_oracle(&params, 1.012, 1.0);
        assert!(traj.converged);
        // |DeltaG| decays (sampled coarsely to tolerate tiny wiggles)
        let n = traj.delta_g.len();
        assert!(traj.delta_g[0].abs() > traj.delta_g[n / 2].abs());
        assert!(traj.delta_g[n / 2].abs() > traj.delta_g[n - 1].abs());
    }

    #[test]
    fn state_rates_zero_without_gr() {
        let mut params = RegionParams::ps_default();
        params.k_sigma = 2e-3;
        let (fc, fm, perp) = StateSampler::new(9).frame();
        let st = GaussPointState::fresh(fc, fm, perp, &params, GrowthMode::Transmural);
        let rates = state_rates(
            &(Tensor2::identity() * 1.02),
            &st,
            &params,
            &ModelOptions::default(),
        )
        .unwrap();
        assert_eq!(rates.rho_dot_c, 0.0);
        assert_eq!(rates.lambda_r_dot_m, 0.0);
    }
}
