//! The two experiments: adiabatic initialization into |0_L> and logical
//! manipulation by a collective drive pulse, both with optional static
//! noise held fixed over the whole run.
//!
//! Initialization interpolates H_t = f(t) H0 + (1 - f(t)) S^y starting
//! from the ferromagnetic -y product state and reports the error
//! 1 - |<0_L|psi(t)>|^2. Manipulation evolves both logical states under
//! H = H0 + g(t) S^u (+ f S^v), assembles the 2x2 logical block, strips
//! the ground-state dynamical phase, and decomposes over {1, tau}.
//!
//! Additive noise (directional or per-site random orientation) is an error
//! source measured against the ideal logical frame. Coupling fluctuations
//! instead deform the protection Hamiltonian itself while preserving its
//! symmetries; for those runs the logical frame is re-extracted from the
//! deformed Hamiltonian, whose own protected doublet is the qubit.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::build::{
    build_collective_field, build_pauli_string, build_protection_hamiltonian,
    build_protection_hamiltonian_scaled, build_symmetry_operators,
};
use crate::dense::DenseOperator;
use crate::dynamics::{
    default_dt, evolve_block, evolve_state, AccuracyBudget, EvolveOptions, PulseSpec, Schedule,
    StateVector, TimeDependentHamiltonian,
};
use crate::error::{Error, Result};
use crate::fit::{loglog_slope, Trim};
use crate::lattice::{Axis, LatticeSpec, PauliString};
use crate::spectrum::{extract_logical_basis, inner, LogicalBasis};

/// Leakage above this flags a non-adiabatic pulse.
pub const TOL_LEAKAGE: f64 = 1e-3;

/// Static noise added to the Hamiltonian for a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSpec {
    None,
    /// f * S^axis.
    Directional { axis: Axis, amplitude: f64 },
    /// One frozen unit vector per site, uniform on the sphere, coupled
    /// with the given amplitude.
    RandomOrientation { amplitude: f64, seed: u64 },
    /// Per-row and per-column coupling factors 1 + eps_k, |eps_k| <= epsilon.
    CouplingFluctuation { epsilon: f64, seed: u64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let amp = match self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Directional { amplitude, .. } => *amplitude,
            NoiseSpec::RandomOrientation { amplitude, .. } => *amplitude,
            NoiseSpec::CouplingFluctuation { epsilon, .. } => *epsilon,
        };
        if amp < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise amplitude must be nonnegative, got {amp}"
            )));
        }
        if let NoiseSpec::CouplingFluctuation { epsilon, .. } = self {
            if *epsilon > 0.5 {
                return Err(Error::InvalidParameter(format!(
                    "relative coupling fluctuation {epsilon} is not small"
                )));
            }
        }
        Ok(())
    }

    /// Same kind with a different amplitude (for sweeps).
    pub fn with_amplitude(&self, value: f64) -> NoiseSpec {
        match *self {
            NoiseSpec::None => NoiseSpec::None,
            NoiseSpec::Directional { axis, .. } => NoiseSpec::Directional {
                axis,
                amplitude: value,
            },
            NoiseSpec::RandomOrientation { seed, .. } => NoiseSpec::RandomOrientation {
                amplitude: value,
                seed,
            },
            NoiseSpec::CouplingFluctuation { seed, .. } => NoiseSpec::CouplingFluctuation {
                epsilon: value,
                seed,
            },
        }
    }

    /// Same kind with a different seed; no-op for deterministic kinds.
    pub fn with_seed(&self, value: u64) -> NoiseSpec {
        match *self {
            NoiseSpec::RandomOrientation { amplitude, .. } => NoiseSpec::RandomOrientation {
                amplitude,
                seed: value,
            },
            NoiseSpec::CouplingFluctuation { epsilon, .. } => NoiseSpec::CouplingFluctuation {
                epsilon,
                seed: value,
            },
            other => other,
        }
    }

    pub fn is_seeded(&self) -> bool {
        matches!(
            self,
            NoiseSpec::RandomOrientation { .. } | NoiseSpec::CouplingFluctuation { .. }
        )
    }

    /// Additive noise operator and its spectral-norm bound.
    fn additive_term(&self, lattice: &LatticeSpec) -> Result<Option<(DenseOperator, f64)>> {
        match *self {
            NoiseSpec::None | NoiseSpec::CouplingFluctuation { .. } => Ok(None),
            NoiseSpec::Directional { axis, amplitude } => {
                if amplitude == 0.0 {
                    return Ok(None);
                }
                let field = build_collective_field(lattice, axis)?;
                let mut op =
                    DenseOperator::new(Array2::zeros((lattice.dim(), lattice.dim())), false)?;
                op.add_scaled(Complex64::new(amplitude, 0.0), &field)?;
                Ok(Some((op, amplitude * lattice.spins() as f64)))
            }
            NoiseSpec::RandomOrientation { amplitude, seed } => {
                if amplitude == 0.0 {
                    return Ok(None);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut acc =
                    DenseOperator::new(Array2::zeros((lattice.dim(), lattice.dim())), false)?;
                for (row, col) in lattice.sites() {
                    // z uniform in [-1, 1) and azimuth uniform in [0, 2 pi).
                    let z = 2.0 * rng.random::<f64>() - 1.0;
                    let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let dir = [r * phi.cos(), r * phi.sin(), z];
                    for (axis, component) in [(Axis::X, dir[0]), (Axis::Y, dir[1]), (Axis::Z, dir[2])]
                    {
                        let op =
                            build_pauli_string(lattice, &PauliString::single(row, col, axis))?;
                        acc.add_scaled(Complex64::new(amplitude * component, 0.0), &op)?;
                    }
                }
                Ok(Some((acc, amplitude * lattice.spins() as f64)))
            }
        }
    }

    /// Per-row / per-column coupling factors for the protection Hamiltonian.
    fn coupling_scales(&self, n: usize) -> (Vec<f64>, Vec<f64>, f64) {
        match *self {
            NoiseSpec::CouplingFluctuation { epsilon, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut draw = |count: usize| -> Vec<f64> {
                    (0..count)
                        .map(|_| 1.0 + epsilon * (2.0 * rng.random::<f64>() - 1.0))
                        .collect()
                };
                let rows = draw(n);
                let cols = draw(n);
                (rows, cols, epsilon)
            }
            _ => (vec![1.0; n], vec![1.0; n], 0.0),
        }
    }
}

/// The protection Hamiltonian a run actually evolves under, with the
/// logical frame that defines its protected qubit.
struct RunFrame {
    h0: DenseOperator,
    basis: LogicalBasis,
}

fn run_frame(lattice: &LatticeSpec, ideal: &LogicalBasis, noise: &NoiseSpec) -> Result<RunFrame> {
    let (rows, cols, eps) = noise.coupling_scales(lattice.n());
    if eps == 0.0 {
        Ok(RunFrame {
            h0: build_protection_hamiltonian(lattice)?,
            basis: ideal.clone(),
        })
    } else {
        let h0 = build_protection_hamiltonian_scaled(lattice, &rows, &cols)?;
        let syms = build_symmetry_operators(lattice)?;
        let basis = extract_logical_basis(&h0, &syms)?;
        Ok(RunFrame { h0, basis })
    }
}

/// Ferromagnetic product state with every spin in the -1 eigenstate of
/// sigma^y: amplitude 2^(-n^2/2) (-i)^popcount in the sigma^z basis.
pub fn prepare_product_state(lattice: &LatticeSpec) -> StateVector {
    let spins = lattice.spins() as i32;
    let dim = lattice.dim();
    let scale = 2f64.powi(-spins / 2) * if spins % 2 == 1 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
    let phases = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    let mut amps = Array1::<Complex64>::zeros(dim);
    for (b, a) in amps.iter_mut().enumerate() {
        *a = scale * phases[b.count_ones() as usize % 4];
    }
    StateVector::new(amps).expect("product state is normalized")
}

/// Knobs shared by the experiment runners.
#[derive(Debug, Clone, Copy)]
pub struct ProtocolOptions {
    /// Integration step; defaults to [`default_dt`] under `budget`.
    pub dt: Option<f64>,
    pub budget: AccuracyBudget,
    /// Number of (t, error) samples kept from an initialization run.
    pub trace_samples: usize,
    /// Step-halving verification on the underlying evolution.
    pub verify_convergence: bool,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            dt: None,
            budget: AccuracyBudget::default(),
            trace_samples: 0,
            verify_convergence: false,
        }
    }
}

/// Outcome of one initialization run.
#[derive(Debug, Clone)]
pub struct InitializationRun {
    /// Sampled (t, 1 - F(t)).
    pub trace: Vec<(f64, f64)>,
    pub final_error: f64,
    pub norm_drift: f64,
    pub dt: f64,
}

/// Evolve the ferromagnetic product state through the ramp and report the
/// error against the protected target state.
pub fn run_initialization(
    lattice: &LatticeSpec,
    basis: &LogicalBasis,
    schedule: &Schedule,
    noise: &NoiseSpec,
    opts: &ProtocolOptions,
) -> Result<InitializationRun> {
    noise.validate()?;
    let frame = run_frame(lattice, basis, noise)?;
    let spins = lattice.spins() as f64;

    let h0_bound = frame.basis.ground_energy.abs().max(frame.basis.max_energy.abs());
    let additive = noise.additive_term(lattice)?;
    let noise_bound = additive.as_ref().map_or(0.0, |(_, b)| *b);
    let bound = h0_bound.max(spins) + noise_bound;

    let t_final = schedule.t_final();
    let dt = opts.dt.unwrap_or_else(|| default_dt(bound, t_final, &opts.budget));

    let mut h = TimeDependentHamiltonian::new(lattice.dim(), bound)?;
    let ramp = *schedule;
    h.add_term(&frame.h0, move |t| ramp.ramp_value(t).unwrap_or(1.0))?;
    let sy = build_collective_field(lattice, Axis::Y)?;
    h.add_term(&sy, move |t| 1.0 - ramp.ramp_value(t).unwrap_or(1.0))?;
    if let Some((op, _)) = &additive {
        h.add_term(op, |_| 1.0)?;
    }

    let psi0 = prepare_product_state(lattice);
    let evolve_opts = EvolveOptions {
        dt,
        trace_samples: opts.trace_samples,
        verify_convergence: opts.verify_convergence,
    };
    let out = evolve_state(&psi0, &h, 0.0, t_final, &evolve_opts)?;

    let target = &frame.basis.zero_l;
    let error_of = |state: &StateVector| -> f64 {
        let f = inner(&target.view(), &state.amplitudes().view()).norm_sqr();
        (1.0 - f).max(0.0)
    };
    let trace = out
        .trace
        .iter()
        .map(|s| (s.t, error_of(&s.state)))
        .collect();
    Ok(InitializationRun {
        trace,
        final_error: error_of(&out.state),
        norm_drift: out.norm_drift,
        dt,
    })
}

/// One row of an initialization sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InitSweepPoint {
    pub tau: f64,
    pub seed: Option<u64>,
    pub final_error: f64,
    pub norm_drift: f64,
}

/// Initialization error across a tau grid, optionally over noise seeds.
///
/// Points run in parallel; rows come back in (tau, seed) input order.
pub fn initialization_sweep(
    lattice: &LatticeSpec,
    basis: &LogicalBasis,
    taus: &[f64],
    noise: &NoiseSpec,
    seeds: &[u64],
    opts: &ProtocolOptions,
) -> Result<Vec<InitSweepPoint>> {
    let mut tasks = Vec::new();
    for &tau in taus {
        if noise.is_seeded() {
            for &seed in seeds {
                tasks.push((tau, Some(seed)));
            }
        } else {
            tasks.push((tau, None));
        }
    }
    tasks
        .par_iter()
        .map(|&(tau, seed)| -> Result<InitSweepPoint> {
            let schedule = Schedule::new(tau)?;
            let noise = match seed {
                Some(s) => noise.with_seed(s),
                None => *noise,
            };
            let run = run_initialization(lattice, basis, &schedule, &noise, opts)?;
            Ok(InitSweepPoint {
                tau,
                seed,
                final_error: run.final_error,
                norm_drift: run.norm_drift,
            })
        })
        .collect()
}

/// Expansion of an effective logical map over {1, tau^x, tau^y, tau^z},
/// with the weight lost outside the doublet.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogicalDecomposition {
    pub alpha_1: Complex64,
    pub alpha_x: Complex64,
    pub alpha_y: Complex64,
    pub alpha_z: Complex64,
    /// 1 - sum |alpha|^2, clamped at zero.
    pub leakage: f64,
}

impl LogicalDecomposition {
    /// [|alpha_1|, |alpha_x|, |alpha_y|, |alpha_z|].
    pub fn moduli(&self) -> [f64; 4] {
        [
            self.alpha_1.norm(),
            self.alpha_x.norm(),
            self.alpha_y.norm(),
            self.alpha_z.norm(),
        ]
    }

    /// sum |alpha|^2 + leakage; equals 1 by construction.
    pub fn completeness(&self) -> f64 {
        let m = self.moduli();
        m.iter().map(|x| x * x).sum::<f64>() + self.leakage
    }

    /// Rotation angle folded into [0, pi/2]: atan2(|vector part|, |alpha_1|).
    pub fn folded_angle(&self) -> f64 {
        let m = self.moduli();
        let vec = (m[1] * m[1] + m[2] * m[2] + m[3] * m[3]).sqrt();
        vec.atan2(m[0])
    }
}

/// Outcome of one manipulation run.
#[derive(Debug, Clone)]
pub struct ManipulationRun {
    pub decomposition: LogicalDecomposition,
    pub norm_drift: f64,
    pub dt: f64,
}

/// Drive both logical states through the pulse and decompose the induced
/// logical block.
pub fn run_manipulation(
    lattice: &LatticeSpec,
    basis: &LogicalBasis,
    pulse: &PulseSpec,
    noise: &NoiseSpec,
    opts: &ProtocolOptions,
) -> Result<ManipulationRun> {
    let mut runs = run_manipulation_sweep(lattice, basis, pulse, &[pulse.g_max], noise, opts)?;
    Ok(runs.pop().unwrap())
}

/// Manipulation runs for several drive strengths sharing one pulse shape.
///
/// All strengths propagate side by side through one block integration:
/// the per-column arithmetic is independent, so each result is identical
/// to a standalone run at that strength.
pub fn run_manipulation_sweep(
    lattice: &LatticeSpec,
    basis: &LogicalBasis,
    pulse: &PulseSpec,
    g_values: &[f64],
    noise: &NoiseSpec,
    opts: &ProtocolOptions,
) -> Result<Vec<ManipulationRun>> {
    noise.validate()?;
    if g_values.is_empty() {
        return Err(Error::InvalidParameter("empty g_max sweep".into()));
    }
    let frame = run_frame(lattice, basis, noise)?;
    let gap = frame.basis.gap;
    let g_top = g_values.iter().cloned().fold(0.0, f64::max);
    pulse.with_g_max(g_top.max(pulse.g_max)).validate_against_gap(gap)?;
    for &g in g_values {
        if !(g >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "drive strength must be nonnegative, got {g}"
            )));
        }
    }

    let spins = lattice.spins() as f64;
    let e0 = frame.basis.ground_energy;
    let e_top = frame.basis.max_energy;
    let shift = 0.5 * (e0 + e_top);
    let additive = noise.additive_term(lattice)?;
    let noise_bound = additive.as_ref().map_or(0.0, |(_, b)| *b);
    let bound = 0.5 * (e_top - e0) + g_top * spins + noise_bound;

    let duration = pulse.duration;
    let dt = opts
        .dt
        .unwrap_or_else(|| default_dt(bound, duration, &opts.budget));

    // Static part: H0 - shift (+ additive noise), applied with coefficient 1.
    let mut static_term = frame.h0.clone();
    static_term.add_scaled(
        Complex64::new(-shift, 0.0),
        &DenseOperator::identity(lattice.dim()),
    )?;
    if let Some((op, _)) = &additive {
        static_term.add_scaled(Complex64::new(1.0, 0.0), op)?;
    }

    let drive = build_collective_field(lattice, pulse.axis)?;
    let envelope = pulse.envelope;
    let mut h = TimeDependentHamiltonian::new(lattice.dim(), bound)?;
    h.add_term(&static_term, |_| 1.0)?;
    let mut col_scales = Vec::with_capacity(2 * g_values.len());
    for &g in g_values {
        col_scales.push(g);
        col_scales.push(g);
    }
    h.add_term_per_column(
        &drive,
        move |t| envelope.value(t / duration),
        col_scales,
    )?;

    let zero = StateVector::new(frame.basis.zero_l.clone())?;
    let one = StateVector::new(frame.basis.one_l.clone())?;
    let mut states = Vec::with_capacity(2 * g_values.len());
    for _ in g_values {
        states.push(zero.clone());
        states.push(one.clone());
    }

    let block = evolve_block(&states, &h, 0.0, duration, dt)?;

    // Undo the ground-sector dynamical phase accumulated under H - shift.
    let phase = Complex64::from_polar(1.0, (e0 - shift) * duration);
    let bras = [&frame.basis.zero_l, &frame.basis.one_l];
    let mut out = Vec::with_capacity(g_values.len());
    for (k, _) in g_values.iter().enumerate() {
        let mut u = Array2::<Complex64>::zeros((2, 2));
        for b in 0..2 {
            let ket = block.states[2 * k + b].amplitudes();
            for (a, bra) in bras.iter().enumerate() {
                u[(a, b)] = inner(&bra.view(), &ket.view()) * phase;
            }
        }
        let decomposition = decompose_block(&u)?;
        out.push(ManipulationRun {
            decomposition,
            norm_drift: block.norm_drift,
            dt,
        });
    }
    Ok(out)
}

/// Decompose a 2x2 logical block over {1, tau}, fix the global-phase
/// gauge, and flag non-adiabatic leakage.
fn decompose_block(u: &Array2<Complex64>) -> Result<LogicalDecomposition> {
    let alpha_1 = (u[(0, 0)] + u[(1, 1)]) / 2.0;
    let alpha_x = (u[(0, 1)] + u[(1, 0)]) / 2.0;
    let alpha_y = Complex64::new(0.0, 1.0) * (u[(0, 1)] - u[(1, 0)]) / 2.0;
    let alpha_z = (u[(0, 0)] - u[(1, 1)]) / 2.0;

    let mut alphas = [alpha_1, alpha_x, alpha_y, alpha_z];
    // Gauge: alpha_1 real nonnegative; if alpha_1 vanishes, the largest
    // coefficient is made real positive instead.
    let anchor = if alphas[0].norm() > 1e-12 {
        alphas[0]
    } else {
        *alphas
            .iter()
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
            .unwrap()
    };
    if anchor.norm() > 0.0 {
        let phase = anchor.conj() / anchor.norm();
        for a in alphas.iter_mut() {
            *a *= phase;
        }
    }

    let weight: f64 = alphas.iter().map(|a| a.norm_sqr()).sum();
    let leakage = (1.0 - weight).max(0.0);
    if leakage > TOL_LEAKAGE {
        return Err(Error::NonAdiabaticPulse { leakage });
    }
    Ok(LogicalDecomposition {
        alpha_1: alphas[0],
        alpha_x: alphas[1],
        alpha_y: alphas[2],
        alpha_z: alphas[3],
        leakage,
    })
}

/// Axis-angle form of a logical rotation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RotationReport {
    /// Unit rotation axis; `None` for the identity (null axis).
    pub axis: Option<[f64; 3]>,
    /// Rotation angle in [0, pi/2] under the alpha_1 >= 0 gauge.
    pub angle: f64,
    /// Residual global phase.
    pub phase: f64,
}

/// Extract phase, angle, and axis from a decomposition,
/// e^(i phase) (cos(angle) 1 + i sin(angle) axis . tau).
pub fn rotation_axis_angle(d: &LogicalDecomposition) -> Result<RotationReport> {
    if d.leakage >= 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "axis extraction needs leakage < 1e-6, got {:.3e}",
            d.leakage
        )));
    }
    let alphas = [d.alpha_1, d.alpha_x, d.alpha_y, d.alpha_z];
    let phase = if d.alpha_1.norm() > 1e-12 {
        d.alpha_1.arg()
    } else {
        let dominant = alphas[1..]
            .iter()
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
            .unwrap();
        dominant.arg() - std::f64::consts::FRAC_PI_2
    };
    let rot = Complex64::from_polar(1.0, -phase);
    let a1 = (d.alpha_1 * rot).re;
    let v: Vec<f64> = alphas[1..].iter().map(|a| (a * rot).im).collect();
    let vnorm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();

    let (axis, angle) = if vnorm < 1e-12 {
        (None, 0.0)
    } else {
        (
            Some([v[0] / vnorm, v[1] / vnorm, v[2] / vnorm]),
            vnorm.atan2(a1),
        )
    };

    // Unitarity: reconstruct and compare.
    let (c, s) = (angle.cos(), angle.sin());
    let n = axis.unwrap_or([0.0, 0.0, 0.0]);
    let back = Complex64::from_polar(1.0, phase);
    let recon = [
        back * c,
        back * Complex64::new(0.0, s * n[0]),
        back * Complex64::new(0.0, s * n[1]),
        back * Complex64::new(0.0, s * n[2]),
    ];
    let residual = alphas
        .iter()
        .zip(recon.iter())
        .map(|(a, r)| (a - r).norm())
        .fold(0.0, f64::max);
    if residual > 1e-8 + d.leakage {
        return Err(Error::NonUnitaryBlock { residual });
    }
    Ok(RotationReport { axis, angle, phase })
}

/// Monotone continuation of folded angles: each folded value theta_k in
/// [0, pi/2] lifts to the branch m pi +/- theta_k closest to the forward
/// prediction from the previous points. The underlying angle must grow by
/// less than pi between neighboring points.
pub fn unfold_angles(folded: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(folded.len());
    for (k, &theta) in folded.iter().enumerate() {
        if k == 0 {
            out.push(theta);
            continue;
        }
        let prev = out[k - 1];
        let predicted = if k >= 2 {
            prev + (prev - out[k - 2]).max(0.0)
        } else {
            prev
        };
        let m_max = ((prev + std::f64::consts::PI) / std::f64::consts::PI).ceil() as i64 + 1;
        let mut best = prev;
        let mut best_dist = f64::INFINITY;
        for m in 0..=m_max {
            for cand in [
                m as f64 * std::f64::consts::PI + theta,
                m as f64 * std::f64::consts::PI - theta,
            ] {
                if cand < prev - 1e-9 {
                    continue;
                }
                let dist = (cand - predicted).abs();
                if dist < best_dist {
                    best_dist = dist;
                    best = cand;
                }
            }
        }
        out.push(best);
    }
    out
}

/// Fit quality of (|alpha_1|, |alpha_x|) against (cos, sin) of one smooth
/// unfolded angle.
#[derive(Debug, Clone)]
pub struct RabiFit {
    pub unfolded: Vec<f64>,
    pub max_residual: f64,
}

/// Check that a drive-strength sweep traces a cosine/sine pair.
pub fn rabi_cos_sin_fit(decomps: &[LogicalDecomposition]) -> RabiFit {
    let folded: Vec<f64> = decomps.iter().map(|d| d.folded_angle()).collect();
    let unfolded = unfold_angles(&folded);
    let mut max_residual = 0.0f64;
    for (d, theta) in decomps.iter().zip(unfolded.iter()) {
        let m = d.moduli();
        let rc = (m[0] - theta.cos().abs()).abs();
        let rs = (m[1] - theta.sin().abs()).abs();
        max_residual = max_residual.max(rc).max(rs);
    }
    RabiFit {
        unfolded,
        max_residual,
    }
}

/// Find the drive strength whose rotation angle hits `target` (radians),
/// by bisection on the monotone small-angle branch.
pub fn calibrate_pulse_amplitude(
    lattice: &LatticeSpec,
    basis: &LogicalBasis,
    pulse: &PulseSpec,
    target: f64,
    tol: f64,
    opts: &ProtocolOptions,
) -> Result<f64> {
    if !(target > 0.0 && target < std::f64::consts::FRAC_PI_2) {
        return Err(Error::CalibrationFailed(format!(
            "target angle {target} outside the monotone window (0, pi/2)"
        )));
    }
    let angle_at = |g: f64| -> Result<f64> {
        let run = run_manipulation(lattice, basis, &pulse.with_g_max(g), &NoiseSpec::None, opts)?;
        Ok(run.decomposition.folded_angle())
    };

    let mut lo = 0.0;
    let mut hi = basis.gap / 20.0;
    let mut theta_hi = angle_at(hi)?;
    while theta_hi < target {
        lo = hi;
        hi *= 1.5;
        if hi >= 0.95 * basis.gap {
            return Err(Error::CalibrationFailed(format!(
                "target angle {target} not reached below the gap"
            )));
        }
        theta_hi = angle_at(hi)?;
    }

    let mut mid = 0.5 * (lo + hi);
    for _ in 0..64 {
        mid = 0.5 * (lo + hi);
        let theta = angle_at(mid)?;
        if (theta - target).abs() < tol {
            return Ok(mid);
        }
        if theta < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::CalibrationFailed(format!(
        "bisection stalled at g = {mid}"
    )))
}

/// One amplitude of a noise-deviation sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeviationRow {
    pub amplitude: f64,
    /// Median |delta |alpha_k|| for k = x, y, z.
    pub deviation: [f64; 3],
    /// Interquartile range across seeds (zero for deterministic noise).
    pub iqr: [f64; 3],
}

/// Deviations of the |alpha| moduli away from the noiseless pulse.
#[derive(Debug, Clone)]
pub struct NoiseDeviationSweep {
    pub reference: LogicalDecomposition,
    pub rows: Vec<DeviationRow>,
    /// Log-log slopes of the median deviations against amplitude.
    pub slopes: [f64; 3],
}

/// Sweep the static-noise amplitude at fixed pulse and measure how far
/// each |alpha| moves from the noiseless reference.
pub fn sweep_noise_deviation(
    lattice: &LatticeSpec,
    basis: &LogicalBasis,
    pulse: &PulseSpec,
    noise_proto: &NoiseSpec,
    amplitudes: &[f64],
    seeds: &[u64],
    opts: &ProtocolOptions,
) -> Result<NoiseDeviationSweep> {
    if matches!(noise_proto, NoiseSpec::None) {
        return Err(Error::InvalidParameter(
            "deviation sweep needs a noise kind to sweep".into(),
        ));
    }
    let reference =
        run_manipulation(lattice, basis, pulse, &NoiseSpec::None, opts)?.decomposition;
    let ref_m = reference.moduli();

    let seed_list: Vec<u64> = if noise_proto.is_seeded() {
        if seeds.is_empty() {
            return Err(Error::InvalidParameter(
                "seeded noise sweep needs at least one seed".into(),
            ));
        }
        seeds.to_vec()
    } else {
        vec![0]
    };

    let rows: Vec<DeviationRow> = amplitudes
        .par_iter()
        .map(|&f| -> Result<DeviationRow> {
            let mut per_seed: Vec<[f64; 3]> = Vec::with_capacity(seed_list.len());
            for &seed in &seed_list {
                let noise = noise_proto.with_amplitude(f).with_seed(seed);
                let run = run_manipulation(lattice, basis, pulse, &noise, opts)?;
                let m = run.decomposition.moduli();
                per_seed.push([
                    (m[1] - ref_m[1]).abs(),
                    (m[2] - ref_m[2]).abs(),
                    (m[3] - ref_m[3]).abs(),
                ]);
            }
            let mut deviation = [0.0; 3];
            let mut iqr = [0.0; 3];
            for k in 0..3 {
                let mut vals: Vec<f64> = per_seed.iter().map(|d| d[k]).collect();
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                deviation[k] = vals[vals.len() / 2];
                if vals.len() >= 4 {
                    iqr[k] = vals[(3 * vals.len()) / 4] - vals[vals.len() / 4];
                }
            }
            Ok(DeviationRow {
                amplitude: f,
                deviation,
                iqr,
            })
        })
        .collect::<Result<_>>()?;

    let mut slopes = [f64::NAN; 3];
    for k in 0..3 {
        let xs: Vec<f64> = rows.iter().map(|r| r.amplitude).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.deviation[k]).collect();
        // A channel pinned at the numerical floor has no slope to fit.
        if ys.iter().all(|&y| y > 0.0) {
            if let Ok(s) = loglog_slope(&xs, &ys, Trim::None) {
                slopes[k] = s;
            }
        }
    }

    Ok(NoiseDeviationSweep {
        reference,
        rows,
        slopes,
    })
}
