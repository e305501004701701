//! The three-step simulation protocol and scenario presets.
//!
//! 1. Equilibrate: deposit collagen with its homeostatic prestretch,
//!    pressurize to physiological IOP, and freeze the homeostatic fiber
//!    stress at the converged state (growth stimulus exactly zero).
//! 2. Weaken: knock down the ground-matrix shear stiffness in the
//!    peripapillary sclera and lamina cribrosa, re-solve.
//! 3. March growth and remodeling: staggered loop alternating implicit
//!    mechanical equilibrium with explicit internal-variable updates.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{
    element::element_deformation_gradients, initial_states, FemError, FemModel, NewtonConfig,
    RegionTable,
};
use crate::material::{
    advance_state, elastic_invariants, eval_point, freeze_homeostatic_stress,
    set_deposition_stretch, sigma_h_effective, state_rates, GaussPointState, GrowthMode,
    MaterialError, ModelOptions, StateRates,
};
use crate::mesh::{jacobian_det, Mesh, Region};
use crate::tensor::Tensor2;

pub const MMHG_TO_PA: f64 = 133.322;
/// Physiological intraocular pressure (15 mmHg) in Pa.
pub const IOP_PA: f64 = 15.0 * MMHG_TO_PA;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("mechanical solve failed at day {day}: {source}")]
    Solve { day: f64, source: FemError },
    #[error("internal state collapsed at day {day}: {source}")]
    StateCollapse { day: f64, source: MaterialError },
    #[error(transparent)]
    Material(#[from] MaterialError),
}

/// Complete description of one growth-and-remodeling experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub k_sigma: f64,
    pub growth_mode: GrowthMode,
    pub duration_days: f64,
    pub dt_days: f64,
    /// Multiplier on the matrix shear coefficient at the weakening event.
    pub weakening_factor: f64,
    pub weakened_regions: Vec<Region>,
    pub gr_regions: Vec<Region>,
    /// Time-series output cadence (days).
    pub output_every_days: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self::preset(1)
    }
}

impl ScenarioSpec {
    /// The three published scenarios.
    pub fn preset(id: u8) -> Self {
        let (k_sigma, growth_mode) = match id {
            1 => (2e-4, GrowthMode::Transmural),
            2 => (2e-3, GrowthMode::Transmural),
            3 => (2e-3, GrowthMode::MassDensity),
            other => panic!("scenario id {other} out of range 1..=3"),
        };
        ScenarioSpec {
            k_sigma,
            growth_mode,
            duration_days: 5000.0,
            dt_days: 5.0,
            weakening_factor: 0.15,
            weakened_regions: vec![Region::Pps, Region::Lc],
            gr_regions: vec![Region::Pps, Region::Lc],
            output_every_days: 25.0,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.dt_days <= 0.0 {
            return Err(ProtocolError::InvalidScenario(format!(
                "dt must be > 0, got {}",
                self.dt_days
            )));
        }
        if self.duration_days < self.dt_days {
            return Err(ProtocolError::InvalidScenario(format!(
                "duration {} shorter than dt {}",
                self.duration_days, self.dt_days
            )));
        }
        if !(self.weakening_factor > 0.0 && self.weakening_factor <= 1.0) {
            return Err(ProtocolError::InvalidScenario(format!(
                "weakening factor must be in (0, 1], got {}",
                self.weakening_factor
            )));
        }
        if self.k_sigma < 0.0 {
            return Err(ProtocolError::InvalidScenario(format!(
                "k_sigma must be >= 0, got {}",
                self.k_sigma
            )));
        }
        if self.output_every_days <= 0.0 {
            return Err(ProtocolError::InvalidScenario(
                "output cadence must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// One emitted time-series sample.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub day: f64,
    pub max_dg_circ_pps: f64,
    pub max_dg_merid_pps: f64,
    pub mean_pps_thickness_mm: f64,
    pub circ_fraction_pct: f64,
    pub merid_fraction_pct: f64,
    pub apex_disp_mm: f64,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct SolverStats {
    pub mechanical_solves: usize,
    pub newton_iterations: usize,
    pub load_halvings: usize,
    pub dt_halvings: usize,
    /// Solves that needed the frozen-active-set fallback.
    pub gate_freezes: usize,
}

/// Mutable simulation state threaded through the protocol steps.
pub struct Simulation<'m> {
    pub model: FemModel<'m>,
    pub table: RegionTable,
    pub states: Vec<Vec<GaussPointState>>,
    pub solution: Vec<f64>,
    pub pressure: f64,
    pub newton: NewtonConfig,
    pub stats: SolverStats,
    /// While true, `resolve` freezes the tension-gate active set from the
    /// last converged configuration before each solve (kink episode).
    gate_pinned: bool,
}

impl<'m> Simulation<'m> {
    pub fn mesh(&self) -> &'m Mesh {
        self.model.mesh
    }

    pub fn displacements(&self) -> Vec<Vector3<f64>> {
        self.model.displacements(&self.solution)
    }

    /// Deformation gradients at every Gauss point of every element.
    pub fn deformation_gradients(&self) -> Vec<Vec<Tensor2>> {
        let u = self.displacements();
        let mesh = self.mesh();
        mesh.elements
            .par_iter()
            .map(|e| {
                let coords: Vec<Vector3<f64>> =
                    e.nodes.iter().map(|&n| mesh.nodes[n]).collect();
                let disp: Vec<Vector3<f64>> = e.nodes.iter().map(|&n| u[n]).collect();
                element_deformation_gradients(&coords, &disp, e.kind)
            })
            .collect()
    }

    fn solve_to(&mut self, p_start: f64, p_target: f64) -> Result<(), FemError> {
        let report = self.model.newton_solve(
            &self.states,
            &self.table,
            &mut self.solution,
            p_start,
            p_target,
            &self.newton,
        )?;
        self.stats.mechanical_solves += 1;
        self.stats.newton_iterations += report.iterations;
        self.stats.load_halvings += report.load_halvings;
        self.pressure = p_target;
        Ok(())
    }

    /// Re-solve equilibrium at the current pressure (after a state change).
    ///
    /// If Newton fails under sign-based tension gating — an equilibrium
    /// pinned exactly on a gate kink traps the iteration in a limit cycle
    /// because the tangent jumps across the kink — the gate branches are
    /// frozen at their status in the last converged configuration and the
    /// solve is retried with that fixed active set, which makes the force
    /// field smooth. The branch pin is dropped again afterwards, so state
    /// rates and observables always use sign-based gating.
    pub fn resolve(&mut self) -> Result<(), FemError> {
        if self.gate_pinned {
            // Ongoing kink episode: pin the active set up front instead of
            // paying for a doomed sign-gated solve every step. Unpin once a
            // converged solution agrees with its own gate signs.
            self.freeze_gates();
            let out = self.solve_to(self.pressure, self.pressure);
            if out.is_ok() && self.gates_sign_consistent() {
                self.gate_pinned = false;
            }
            self.clear_gates();
            self.stats.gate_freezes += 1;
            return out;
        }
        let backup = self.solution.clone();
        match self.solve_to(self.pressure, self.pressure) {
            Err(FemError::Nonconvergence { .. }) => {
                self.solution.clone_from(&backup);
                self.freeze_gates();
                let out = self.solve_to(self.pressure, self.pressure);
                self.clear_gates();
                self.stats.gate_freezes += 1;
                if out.is_ok() {
                    self.gate_pinned = true;
                }
                out
            }
            other => other,
        }
    }

    /// Whether every pinned gate branch matches the sign of its stretch in
    /// the current configuration.
    fn gates_sign_consistent(&self) -> bool {
        let fs = self.deformation_gradients();
        for (ei, element_states) in self.states.iter().enumerate() {
            for (f, st) in fs[ei].iter().zip(element_states) {
                let Ok(kin) = elastic_invariants(f, st) else {
                    return false;
                };
                if st.gate_frozen_c.is_some_and(|o| o != (kin.fiber_c.i4e > 1.0))
                    || st.gate_frozen_m.is_some_and(|o| o != (kin.fiber_m.i4e > 1.0))
                {
                    return false;
                }
            }
        }
        true
    }

    /// Pin every family's tension-gate branch to its status in the current
    /// configuration. Points whose kinematics cannot be evaluated keep
    /// sign-based gating.
    fn freeze_gates(&mut self) {
        let fs = self.deformation_gradients();
        for (ei, element_states) in self.states.iter_mut().enumerate() {
            for (f, st) in fs[ei].iter().zip(element_states.iter_mut()) {
                match elastic_invariants(f, st) {
                    Ok(kin) => {
                        st.gate_frozen_c = Some(kin.fiber_c.i4e > 1.0);
                        st.gate_frozen_m = Some(kin.fiber_m.i4e > 1.0);
                    }
                    Err(_) => {
                        st.gate_frozen_c = None;
                        st.gate_frozen_m = None;
                    }
                }
            }
        }
    }

    fn clear_gates(&mut self) {
        for element_states in &mut self.states {
            for st in element_states {
                st.gate_frozen_c = None;
                st.gate_frozen_m = None;
            }
        }
    }

    /// Growth stimulus of both families at every Gauss point.
    pub fn stimulus_fields(&self) -> Result<Vec<Vec<(f64, f64)>>, ProtocolError> {
        let fs = self.deformation_gradients();
        let mesh = self.mesh();
        let out: Result<Vec<Vec<(f64, f64)>>, MaterialError> = mesh
            .elements
            .par_iter()
            .enumerate()
            .map(|(ei, e)| {
                let params = self.table.get(e.region);
                fs[ei]
                    .iter()
                    .zip(&self.states[ei])
                    .map(|(f, st)| {
                        let resp = eval_point(f, st, params, &self.model.opts)?;
                        let sh_c = sigma_h_effective(&st.fiber_c, params.rho0_fc0, &self.model.opts);
                        let sh_m = sigma_h_effective(&st.fiber_m, params.rho0_fm0, &self.model.opts);
                        let dg_c = if sh_c > 0.0 { (resp.sigma_fc - sh_c) / sh_c } else { 0.0 };
                        let dg_m = if sh_m > 0.0 { (resp.sigma_fm - sh_m) / sh_m } else { 0.0 };
                        Ok((dg_c, dg_m))
                    })
                    .collect()
            })
            .collect();
        Ok(out?)
    }

    /// Signed maxima of the stimulus over PPS Gauss points, per family.
    pub fn max_pps_stimulus(&self) -> Result<(f64, f64), ProtocolError> {
        let fields = self.stimulus_fields()?;
        let mut max_c = f64::NEG_INFINITY;
        let mut max_m = f64::NEG_INFINITY;
        for (e, gps) in self.mesh().elements.iter().zip(&fields) {
            if e.region != Region::Pps {
                continue;
            }
            for &(dg_c, dg_m) in gps {
                max_c = max_c.max(dg_c);
                max_m = max_m.max(dg_m);
            }
        }
        Ok((max_c, max_m))
    }

    /// Largest |stimulus| over all G&R-active Gauss points.
    pub fn max_abs_stimulus(&self) -> Result<f64, ProtocolError> {
        let fields = self.stimulus_fields()?;
        let mut worst = 0.0f64;
        for (e, gps) in self.mesh().elements.iter().zip(&fields) {
            if !self.table.get(e.region).gr_enabled {
                continue;
            }
            for &(dg_c, dg_m) in gps {
                worst = worst.max(dg_c.abs()).max(dg_m.abs());
            }
        }
        Ok(worst)
    }

    /// Volume-weighted mean largest principal stretch minus one, over the
    /// Gauss points of one region.
    pub fn mean_principal_strain(&self, region: Region) -> f64 {
        let fs = self.deformation_gradients();
        let mesh = self.mesh();
        let mut acc = 0.0;
        let mut vol = 0.0;
        for (ei, e) in mesh.elements.iter().enumerate() {
            if e.region != region {
                continue;
            }
            for (gi, (xi, w)) in crate::elements::quadrature(e.kind).iter().enumerate() {
                let dv = w * jacobian_det(&mesh.nodes, e, *xi);
                let c = fs[ei][gi].transpose() * fs[ei][gi];
                let lambda_max = c
                    .symmetric_eigenvalues()
                    .iter()
                    .fold(0.0f64, |m, &v| m.max(v))
                    .sqrt();
                acc += (lambda_max - 1.0) * dv;
                vol += dv;
            }
        }
        acc / vol
    }

    pub fn record(&self, day: f64) -> Result<TimeSeriesRecord, ProtocolError> {
        let (max_c, max_m) = self.max_pps_stimulus()?;
        let u = self.displacements();
        let (circ, merid) = measure_fiber_fractions(self.mesh(), &self.states);
        Ok(TimeSeriesRecord {
            day,
            max_dg_circ_pps: max_c,
            max_dg_merid_pps: max_m,
            mean_pps_thickness_mm: measure_pps_thickness(self.mesh(), &u),
            circ_fraction_pct: circ,
            merid_fraction_pct: merid,
            apex_disp_mm: apex_displacement_mm(self.mesh(), &u),
        })
    }
}

/// Mean deformed PPS wall thickness (mm), measured along through-thickness
/// node columns.
pub fn measure_pps_thickness(mesh: &Mesh, u: &[Vector3<f64>]) -> f64 {
    let lo = mesh.config.lc_boundary_deg;
    let hi = mesh.config.pps_boundary_deg;
    let mut acc = 0.0;
    let mut count = 0usize;
    for col in &mesh.columns {
        if col.angle_deg < lo || col.angle_deg >= hi {
            continue;
        }
        let inner = col.nodes[0];
        let outer = *col.nodes.last().unwrap();
        let xi = mesh.nodes[inner] + u[inner];
        let xo = mesh.nodes[outer] + u[outer];
        acc += (xo - xi).norm();
        count += 1;
    }
    acc / count as f64 * 1000.0
}

/// Volume-weighted PPS collagen mass fractions in percent
/// (circumferential, meridional).
pub fn measure_fiber_fractions(mesh: &Mesh, states: &[Vec<GaussPointState>]) -> (f64, f64) {
    let mut wc = 0.0;
    let mut wm = 0.0;
    for (ei, e) in mesh.elements.iter().enumerate() {
        if e.region != Region::Pps {
            continue;
        }
        for (gi, (xi, w)) in crate::elements::quadrature(e.kind).iter().enumerate() {
            let dv = w * jacobian_det(&mesh.nodes, e, *xi);
            wc += states[ei][gi].fiber_c.rho0 * dv;
            wm += states[ei][gi].fiber_m.rho0 * dv;
        }
    }
    let total = wc + wm;
    (100.0 * wc / total, 100.0 * wm / total)
}

/// Outward (polar-axis) displacement of the inner apex node, in mm.
pub fn apex_displacement_mm(mesh: &Mesh, u: &[Vector3<f64>]) -> f64 {
    let apex = mesh.columns[0].nodes[0];
    u[apex].z * 1000.0
}

/// Build the scenario-specific region table from base parameters.
pub fn scenario_table(base: &RegionTable, spec: &ScenarioSpec) -> RegionTable {
    let mut table = base.clone();
    for (region, params) in [
        (Region::Lc, &mut table.lc),
        (Region::Pps, &mut table.pps),
        (Region::Ps, &mut table.ps),
    ] {
        params.k_sigma = spec.k_sigma;
        params.gr_enabled = spec.gr_regions.contains(&region);
        params.matrix_weakening_factor = if spec.weakened_regions.contains(&region) {
            spec.weakening_factor
        } else {
            1.0
        };
    }
    table
}

/// Step 1: deposit collagen at its homeostatic prestretch, ramp the IOP in
/// substeps, and freeze the homeostatic fiber stress at the converged
/// equilibrium so the growth stimulus starts at exactly zero.
pub fn step1_equilibrate<'m>(
    mesh: &'m Mesh,
    table: RegionTable,
    opts: ModelOptions,
    growth_mode: GrowthMode,
    newton: NewtonConfig,
) -> Result<Simulation<'m>, ProtocolError> {
    let model = FemModel::new(mesh, opts);
    let mut states = initial_states(mesh, &table, growth_mode);
    for (e, element_states) in mesh.elements.iter().zip(states.iter_mut()) {
        let params = table.get(e.region);
        for st in element_states.iter_mut() {
            set_deposition_stretch(st, &Tensor2::identity(), params)?;
        }
    }
    let mut sim = Simulation {
        solution: vec![0.0; model.n_equations()],
        model,
        table,
        states,
        pressure: 0.0,
        newton,
        stats: SolverStats::default(),
        gate_pinned: false,
    };
    // initial pressurization: 5 equal substeps (each with automatic
    // halving below that if needed)
    let ramp_steps = 5;
    for i in 1..=ramp_steps {
        let target = IOP_PA * i as f64 / ramp_steps as f64;
        let from = sim.pressure;
        sim.solve_to(from, target)
            .map_err(|source| ProtocolError::Solve { day: 0.0, source })?;
    }
    // freeze sigma_h at the actual converged fiber stress
    let fs = sim.deformation_gradients();
    for (ei, e) in mesh.elements.iter().enumerate() {
        let params = sim.table.get(e.region);
        for (gi, st) in sim.states[ei].iter_mut().enumerate() {
            freeze_homeostatic_stress(st, &fs[ei][gi], params, &sim.model.opts)?;
        }
    }
    Ok(sim)
}

/// Step 2: weaken the ground matrix in the configured regions and re-solve
/// at constant IOP. Applied as one event; if the single re-solve diverges,
/// the multiplier is reached through geometric continuation sub-increments
/// (same final state).
pub fn step2_weaken(sim: &mut Simulation, spec: &ScenarioSpec) -> Result<(), ProtocolError> {
    let apply = |sim: &mut Simulation, factor: f64| {
        for (e, element_states) in sim
            .model
            .mesh
            .elements
            .iter()
            .zip(sim.states.iter_mut())
        {
            if spec.weakened_regions.contains(&e.region) {
                let c1_full = sim.table.get(e.region).c1;
                for st in element_states.iter_mut() {
                    st.c1_current = c1_full * factor;
                }
            }
        }
    };
    apply(sim, spec.weakening_factor);
    let backup = sim.solution.clone();
    if sim.resolve().is_ok() {
        return Ok(());
    }
    // continuation fallback
    sim.solution = backup;
    let n_sub = 8;
    for i in 1..=n_sub {
        let factor = spec
            .weakening_factor
            .powf(i as f64 / n_sub as f64);
        apply(sim, factor);
        sim.resolve()
            .map_err(|source| ProtocolError::Solve { day: 0.0, source })?;
    }
    Ok(())
}

/// Step 3: staggered growth-and-remodeling time loop. Calls `on_record`
/// for every emitted sample (day order).
pub fn step3_timeloop<F>(
    sim: &mut Simulation,
    spec: &ScenarioSpec,
    mut on_record: F,
) -> Result<Vec<TimeSeriesRecord>, ProtocolError>
where
    F: FnMut(&TimeSeriesRecord, &Simulation) -> Result<(), ProtocolError>,
{
    spec.validate()?;
    let mut records = Vec::new();
    let mut emit = |day: f64,
                    sim: &mut Simulation,
                    records: &mut Vec<TimeSeriesRecord>|
     -> Result<(), ProtocolError> {
        let rec = sim.record(day)?;
        on_record(&rec, sim)?;
        records.push(rec);
        Ok(())
    };
    emit(0.0, sim, &mut records)?;

    let dt_min = spec.dt_days / 1024.0;
    let mut dt = spec.dt_days;
    let mut day = 0.0;
    let mut next_mark = spec.output_every_days;
    let tiny = 1e-9 * spec.duration_days.max(1.0);
    // previous converged solution and its step size, for the Newton
    // predictor (linear extrapolation in time)
    let mut previous: Option<(Vec<f64>, f64)> = None;
    while day < spec.duration_days - tiny {
        // rates at the current equilibrium (frozen mechanics)
        let fs = sim.deformation_gradients();
        let mesh = sim.model.mesh;
        let rates: Result<Vec<Vec<StateRates>>, MaterialError> = mesh
            .elements
            .par_iter()
            .enumerate()
            .map(|(ei, e)| {
                let params = sim.table.get(e.region);
                fs[ei]
                    .iter()
                    .zip(&sim.states[ei])
                    .map(|(f, st)| state_rates(f, st, params, &sim.model.opts))
                    .collect()
            })
            .collect();
        let rates = rates.map_err(|source| ProtocolError::StateCollapse { day, source })?;

        let mut max_lr_rate = 0.0f64;
        let mut max_rho_rate = 0.0f64;
        for (element_rates, element_states) in rates.iter().zip(&sim.states) {
            for (r, st) in element_rates.iter().zip(element_states) {
                max_lr_rate = max_lr_rate
                    .max(r.lambda_r_dot_c.abs())
                    .max(r.lambda_r_dot_m.abs());
                max_rho_rate = max_rho_rate
                    .max((r.rho_dot_c / st.fiber_c.rho0).abs())
                    .max((r.rho_dot_m / st.fiber_m.rho0).abs());
            }
        }

        let mut dt_step = dt.min(next_mark - day).min(spec.duration_days - day);
        // adaptive halving when a step would move any internal variable by
        // more than 1%
        while (max_lr_rate * dt_step > 0.01 || max_rho_rate * dt_step > 0.01) && dt > dt_min {
            dt *= 0.5;
            sim.stats.dt_halvings += 1;
            dt_step = dt.min(next_mark - day).min(spec.duration_days - day);
        }

        // snapshots for rollback if the step is rejected
        let state_backup = sim.states.clone();
        let converged = sim.solution.clone();
        loop {
            let mut advance_err = None;
            'advance: for (element_rates, element_states) in
                rates.iter().zip(sim.states.iter_mut())
            {
                for (r, st) in element_rates.iter().zip(element_states.iter_mut()) {
                    if let Err(source) = advance_state(st, r, dt_step) {
                        advance_err = Some(source);
                        break 'advance;
                    }
                }
            }
            let solve_err = if advance_err.is_none() {
                if let Some((prev, dt_prev)) = &previous {
                    let ratio = (dt_step / dt_prev).min(2.0);
                    for (u, p) in sim.solution.iter_mut().zip(prev) {
                        *u += ratio * (*u - p);
                    }
                }
                match sim.resolve() {
                    Ok(()) => None,
                    Err(_) => {
                        // retry from the unextrapolated solution first
                        sim.solution.copy_from_slice(&converged);
                        sim.resolve().err()
                    }
                }
            } else {
                None
            };
            if advance_err.is_none() && solve_err.is_none() {
                break;
            }
            // reject the step: roll back, shrink dt, try again
            sim.states.clone_from(&state_backup);
            sim.solution.copy_from_slice(&converged);
            if dt_step <= dt_min {
                return Err(match (advance_err, solve_err) {
                    (Some(source), _) => ProtocolError::StateCollapse { day, source },
                    (_, Some(source)) => ProtocolError::Solve { day, source },
                    _ => unreachable!("rejected step carries an error"),
                });
            }
            dt = (0.5 * dt_step).max(dt_min);
            sim.stats.dt_halvings += 1;
            dt_step = dt.min(next_mark - day).min(spec.duration_days - day);
        }
        previous = Some((converged, dt_step));
        day += dt_step;

        if day >= next_mark - tiny {
            emit(next_mark.min(spec.duration_days), sim, &mut records)?;
            next_mark += spec.output_every_days;
        }
        // gradual restore once the dynamics calm down
        if dt < spec.dt_days
            && max_lr_rate * dt * 2.0 < 0.008
            && max_rho_rate * dt * 2.0 < 0.008
        {
            dt = (dt * 2.0).min(spec.dt_days);
        }
    }
    // final sample if the duration is not an output multiple
    if let Some(last) = records.last() {
        if (last.day - spec.duration_days).abs() > tiny {
            emit(spec.duration_days, sim, &mut records)?;
        }
    }
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Stable,
    Unstable,
}

/// Classify a finished run from its stimulus history and locate the
/// characteristic day.
///
/// Unstable means the stimulus has a tipping point: after the initial
/// decay it turns and rises persistently through the end of the run; the
/// event day is that minimum. Everything else is stable — either the
/// stimulus settles below 0.02 (event day = first day it stays there) or
/// it is still decaying toward homeostasis at the end of the run (event
/// day = final day, i.e. not yet settled).
pub fn classify(records: &[TimeSeriesRecord]) -> (Classification, f64) {
    let level = |r: &TimeSeriesRecord| r.max_dg_circ_pps.max(r.max_dg_merid_pps);
    let last = records.last().expect("nonempty record stream");
    let minimum = records
        .iter()
        .filter(|r| r.day > 0.0)
        .min_by(|a, b| level(a).total_cmp(&level(b)));
    if let Some(m) = minimum {
        let turned = m.day + 250.0 <= last.day && level(last) > level(m) + 1e-4;
        if turned && level(last).abs() >= 0.02 {
            return (Classification::Unstable, m.day);
        }
    }
    let mut day = last.day;
    for r in records.iter().rev() {
        if level(r).abs() < 0.02 {
            day = r.day;
        } else {
            break;
        }
    }
    (Classification::Stable, day)
}

/// Everything a finished scenario reports.
#[derive(Clone, Debug, Serialize)]
pub struct ScenarioResult {
    pub spec: ScenarioSpec,
    pub records: Vec<TimeSeriesRecord>,
    pub classification: Classification,
    /// Tipping day (unstable) or stabilization day (stable).
    pub event_day: f64,
    pub initial_thickness_mm: f64,
    pub final_thickness_mm: f64,
    pub thickness_reduction_pct: f64,
    pub final_circ_fraction_pct: f64,
    pub final_merid_fraction_pct: f64,
    pub solver: SolverStats,
}

/// Execute steps 1-3 for one scenario.
pub fn run_scenario<'m, F>(
    mesh: &'m Mesh,
    base_table: &RegionTable,
    spec: &ScenarioSpec,
    opts: ModelOptions,
    newton: NewtonConfig,
    on_record: F,
) -> Result<(ScenarioResult, Simulation<'m>), ProtocolError>
where
    F: FnMut(&TimeSeriesRecord, &Simulation) -> Result<(), ProtocolError>,
{
    spec.validate()?;
    let table = scenario_table(base_table, spec);
    let mut sim = step1_equilibrate(mesh, table, opts, spec.growth_mode, newton)?;
    step2_weaken(&mut sim, spec)?;
    let records = step3_timeloop(&mut sim, spec, on_record)?;
    let (classification, event_day) = classify(&records);
    let first = records.first().expect("record stream");
    let last = records.last().expect("record stream");
    let initial_thickness_mm = first.mean_pps_thickness_mm;
    let result = ScenarioResult {
        spec: spec.clone(),
        classification,
        event_day,
        initial_thickness_mm,
        final_thickness_mm: last.mean_pps_thickness_mm,
        thickness_reduction_pct: 100.0
            * (1.0 - last.mean_pps_thickness_mm / initial_thickness_mm),
        final_circ_fraction_pct: last.circ_fraction_pct,
        final_merid_fraction_pct: last.merid_fraction_pct,
        solver: sim.stats,
        records,
    };
    Ok((result, sim))
}
