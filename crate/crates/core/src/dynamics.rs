//! Time-dependent propagation of state vectors.
//!
//! The integrator is classic fixed-step fourth-order Runge-Kutta on
//! i dpsi/dt = H(t) psi. H(t) is a sum of dense operators with real
//! time-dependent coefficients; each operator is split into real and
//! imaginary parts so every product in the hot loop is a real GEMM.
//! The state norm is monitored and never silently renormalized: drift is
//! the integrator's error signal.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::dense::DenseOperator;
use crate::error::{Error, Result};
use crate::lattice::Axis;

/// Norm drift above this fails a run.
pub const TOL_NORM_DRIFT: f64 = 1e-9;

/// Step-halving must move the final-state overlap deficit by less than this.
pub const TOL_CONVERGENCE: f64 = 1e-10;

/// Normalized quantum state on the full Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Array1<Complex64>,
}

impl StateVector {
    /// Wrap an amplitude vector; must be normalized within 1e-9.
    pub fn new(amplitudes: Array1<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > TOL_NORM_DRIFT {
            return Err(Error::NotNormalized {
                deviation: (norm - 1.0).abs(),
            });
        }
        Ok(Self { amplitudes })
    }

    /// Wrap without the norm check (monitored states mid-flight).
    pub(crate) fn new_unchecked(amplitudes: Array1<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amplitudes
    }

    /// <self|other>.
    pub fn overlap(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// Squared overlap |<a|b>|^2, clamped to [0, 1].
///
/// Both states must be normalized within 1e-9.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    for s in [a, b] {
        let dev = (s.norm() - 1.0).abs();
        if dev > TOL_NORM_DRIFT {
            return Err(Error::NotNormalized { deviation: dev });
        }
    }
    let f = a.overlap(b)?.norm_sqr();
    Ok(f.clamp(0.0, 1.0))
}

/// Adiabatic ramp f(t) for the initialization interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RampForm {
    /// f(t) = 1 - exp(-(t/tau)^2): zero at t = 0, saturating to 1.
    GaussianRise,
}

/// Ramp schedule with characteristic time tau; the run window ends at
/// t_final (default 5 tau, where 1 - f = e^-25 < 1e-10).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    tau: f64,
    t_final: f64,
    form: RampForm,
}

impl Schedule {
    pub fn new(tau: f64) -> Result<Self> {
        Self::with_t_final(tau, 5.0 * tau)
    }

    pub fn with_t_final(tau: f64, t_final: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        if !(t_final > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_final must be positive, got {t_final}"
            )));
        }
        Ok(Self {
            tau,
            t_final,
            form: RampForm::GaussianRise,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// f(t); rejects negative times.
    pub fn ramp_value(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        match self.form {
            RampForm::GaussianRise => {
                let s = t / self.tau;
                Ok(-(-s * s).exp_m1())
            }
        }
    }
}

/// Drive envelope shape, normalized to peak value 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    /// sin^2(pi t / T): symmetric in time about T/2.
    SinSquared,
    /// sin^2(pi (t/T)^power): same endpoints, peak shifted off-center.
    /// A time-asymmetric drive; power = 1 recovers the symmetric shape.
    SkewedSinSquared { power: f64 },
}

impl Envelope {
    /// Value at scaled time s = t / T in [0, 1]; max over s is exactly 1.
    pub fn value(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self {
            Envelope::SinSquared => {
                let x = (std::f64::consts::PI * s).sin();
                x * x
            }
            Envelope::SkewedSinSquared { power } => {
                let x = (std::f64::consts::PI * s.powf(*power)).sin();
                x * x
            }
        }
    }
}

/// Smooth drive pulse g(t) = g_max * envelope(t/T) along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub axis: Axis,
    pub g_max: f64,
    pub duration: f64,
    pub envelope: Envelope,
}

impl PulseSpec {
    pub fn new(axis: Axis, g_max: f64, duration: f64, envelope: Envelope) -> Result<Self> {
        if !(g_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "g_max must be positive, got {g_max}"
            )));
        }
        if !(duration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pulse duration must be positive, got {duration}"
            )));
        }
        if let Envelope::SkewedSinSquared { power } = envelope {
            if !(power > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "envelope power must be positive, got {power}"
                )));
            }
        }
        Ok(Self {
            axis,
            g_max,
            duration,
            envelope,
        })
    }

    /// g(t); zero outside [0, duration], rejects negative times.
    pub fn amplitude(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if t > self.duration {
            return Ok(0.0);
        }
        Ok(self.g_max * self.envelope.value(t / self.duration))
    }

    /// The pulse must stay below the protecting gap (no level crossing).
    pub fn validate_against_gap(&self, gap: f64) -> Result<()> {
        if self.g_max >= gap {
            return Err(Error::GMaxExceedsGap {
                g_max: self.g_max,
                gap,
            });
        }
        Ok(())
    }

    pub fn with_g_max(mut self, g_max: f64) -> Self {
        self.g_max = g_max;
        self
    }
}

/// Error budgets that set the default integration step.
#[derive(Debug, Clone, Copy)]
pub struct AccuracyBudget {
    /// Accumulated RK4 phase error allowance over the run.
    pub phase_error: f64,
    /// Accumulated norm-contraction allowance over the run.
    pub norm_drift: f64,
}

impl Default for AccuracyBudget {
    fn default() -> Self {
        Self {
            phase_error: 1e-9,
            norm_drift: 2e-10,
        }
    }
}

/// Largest step honoring both the hard cap dt <= 0.01 / |H| and the
/// accumulated-error budgets.
///
/// Per step at theta = |H| dt, RK4 phases drift by theta^5/120 and the
/// norm contracts by theta^6/72; both are summed over total_time / dt.
pub fn default_dt(norm_bound: f64, total_time: f64, budget: &AccuracyBudget) -> f64 {
    assert!(norm_bound > 0.0 && total_time > 0.0);
    let cap = 0.01 / norm_bound;
    let phase = (120.0 * budget.phase_error / (total_time * norm_bound.powi(5))).powf(0.25);
    let drift = (72.0 * budget.norm_drift / (total_time * norm_bound.powi(6))).powf(0.2);
    cap.min(phase).min(drift)
}

/// Dense operator split into real and imaginary parts (H = R + i W), so
/// applications run as real GEMMs on the interleaved complex layout.
#[derive(Debug, Clone)]
struct SplitMatrix {
    re: Option<Array2<f64>>,
    im: Option<Array2<f64>>,
}

impl SplitMatrix {
    fn from_dense(op: &DenseOperator) -> Self {
        let entries = op.entries();
        let mut max_re = 0.0f64;
        let mut max_im = 0.0f64;
        for z in entries.iter() {
            max_re = max_re.max(z.re.abs());
            max_im = max_im.max(z.im.abs());
        }
        let re = (max_re > 0.0).then(|| entries.mapv(|z| z.re));
        let im = (max_im > 0.0).then(|| entries.mapv(|z| z.im));
        Self { re, im }
    }
}

type CoeffFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

struct HamiltonianTerm {
    op: SplitMatrix,
    coeff: CoeffFn,
    /// Extra per-column factors (one per evolved column), for sweeps that
    /// batch several drive strengths through one propagation.
    col_scales: Option<Vec<f64>>,
}

/// H(t) = sum_k c_k(t) * H_k with dense H_k and real coefficients.
///
/// Carries a caller-supplied spectral-norm bound over the integration
/// window; the bound gates the allowed step size.
pub struct TimeDependentHamiltonian {
    dim: usize,
    terms: Vec<HamiltonianTerm>,
    norm_bound: f64,
}

impl TimeDependentHamiltonian {
    pub fn new(dim: usize, norm_bound: f64) -> Result<Self> {
        if !(norm_bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "norm bound must be positive, got {norm_bound}"
            )));
        }
        Ok(Self {
            dim,
            terms: Vec::new(),
            norm_bound,
        })
    }

    /// Single constant operator.
    pub fn constant(op: &DenseOperator, norm_bound: f64) -> Result<Self> {
        let mut h = Self::new(op.dim(), norm_bound)?;
        h.add_term(op, |_| 1.0)?;
        Ok(h)
    }

    pub fn add_term(
        &mut self,
        op: &DenseOperator,
        coeff: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<()> {
        self.push_term(op, Box::new(coeff), None)
    }

    /// Term whose strength additionally differs per evolved column.
    pub fn add_term_per_column(
        &mut self,
        op: &DenseOperator,
        coeff: impl Fn(f64) -> f64 + Send + Sync + 'static,
        col_scales: Vec<f64>,
    ) -> Result<()> {
        self.push_term(op, Box::new(coeff), Some(col_scales))
    }

    fn push_term(&mut self, op: &DenseOperator, coeff: CoeffFn, scales: Option<Vec<f64>>) -> Result<()> {
        if op.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: op.dim(),
            });
        }
        self.terms.push(HamiltonianTerm {
            op: SplitMatrix::from_dense(op),
            coeff,
            col_scales: scales,
        });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// y = -i H(t) x over a block of column states.
    fn rhs(&self, t: f64, x: &Array2<Complex64>, y: &mut Array2<Complex64>, scratch: &mut Array2<Complex64>) {
        y.fill(Complex64::new(0.0, 0.0));
        for term in &self.terms {
            let c = (term.coeff)(t);
            if c == 0.0 {
                continue;
            }
            // Imaginary part W: -i * (i W) x = W x -> real GEMM accumulated directly.
            if let Some(w) = &term.op.im {
                match &term.col_scales {
                    None => gemm_block(c, w, x, 1.0, y),
                    Some(scales) => {
                        gemm_block(1.0, w, x, 0.0, scratch);
                        for (k, col) in scratch.columns().into_iter().enumerate() {
                            let s = c * scales[k];
                            for (yv, &sv) in y.column_mut(k).iter_mut().zip(col.iter()) {
                                *yv += s * sv;
                            }
                        }
                    }
                }
            }
            // Real part R: contributes -i c R x.
            if let Some(r) = &term.op.re {
                gemm_block(1.0, r, x, 0.0, scratch);
                match &term.col_scales {
                    None => {
                        for (yv, &sv) in y.iter_mut().zip(scratch.iter()) {
                            *yv += c * Complex64::new(sv.im, -sv.re);
                        }
                    }
                    Some(scales) => {
                        for (k, col) in scratch.columns().into_iter().enumerate() {
                            let s = c * scales[k];
                            for (yv, &sv) in y.column_mut(k).iter_mut().zip(col.iter()) {
                                *yv += s * Complex64::new(sv.im, -sv.re);
                            }
                        }
                    }
                }
            }
        }
    }

    fn check_col_scales(&self, ncols: usize) -> Result<()> {
        for term in &self.terms {
            if let Some(s) = &term.col_scales {
                if s.len() != ncols {
                    return Err(Error::DimensionMismatch {
                        left: s.len(),
                        right: ncols,
                    });
                }
            }
        }
        Ok(())
    }
}

/// y_complex = alpha * A_real * x_complex + beta * y_complex, computed as a
/// real GEMM on the interleaved (re, im) layout. Rows are split across the
/// rayon pool for large problems; the per-element arithmetic is identical
/// either way, so results do not depend on the thread count.
fn gemm_block(alpha: f64, a: &Array2<f64>, x: &Array2<Complex64>, beta: f64, y: &mut Array2<Complex64>) {
    let dim = a.nrows();
    let ncols = x.ncols() * 2;
    let x_real =
        unsafe { std::slice::from_raw_parts(x.as_slice().unwrap().as_ptr() as *const f64, x.len() * 2) };
    let y_real = unsafe {
        std::slice::from_raw_parts_mut(y.as_slice_mut().unwrap().as_mut_ptr() as *mut f64, y.len() * 2)
    };
    let a_slice = a.as_slice().unwrap();

    // BLAS call overhead swamps the arithmetic on tiny lattices.
    if dim <= 64 {
        small_gemm(dim, ncols, alpha, a_slice, x_real, beta, y_real);
        return;
    }

    let threads = rayon::current_num_threads();
    let chunks = if dim >= 256 && x.ncols() >= 2 && threads > 1 {
        threads.min(4)
    } else {
        1
    };
    if chunks == 1 {
        dgemm_raw(dim, ncols, dim, alpha, a_slice, x_real, beta, y_real);
        return;
    }
    let rows_per = dim.div_ceil(chunks);
    let a_chunks: Vec<&[f64]> = a_slice.chunks(rows_per * dim).collect();
    let y_chunks: Vec<&mut [f64]> = y_real.chunks_mut(rows_per * ncols).collect();
    rayon::scope(|s| {
        for (a_c, y_c) in a_chunks.into_iter().zip(y_chunks) {
            s.spawn(move |_| {
                let m = a_c.len() / dim;
                dgemm_raw(m, ncols, dim, alpha, a_c, x_real, beta, y_c);
            });
        }
    });
}

fn small_gemm(dim: usize, ncols: usize, alpha: f64, a: &[f64], x: &[f64], beta: f64, y: &mut [f64]) {
    for i in 0..dim {
        let yi = &mut y[i * ncols..(i + 1) * ncols];
        if beta == 0.0 {
            yi.fill(0.0);
        } else if beta != 1.0 {
            for v in yi.iter_mut() {
                *v *= beta;
            }
        }
        let ai = &a[i * dim..(i + 1) * dim];
        for (l, &alv) in ai.iter().enumerate() {
            let w = alpha * alv;
            if w == 0.0 {
                continue;
            }
            let xr = &x[l * ncols..(l + 1) * ncols];
            for (yv, &xv) in yi.iter_mut().zip(xr.iter()) {
                *yv += w * xv;
            }
        }
    }
}

fn dgemm_raw(m: usize, n: usize, k: usize, alpha: f64, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    unsafe {
        cblas_sys::cblas_dgemm(
            cblas_sys::CBLAS_LAYOUT::CblasRowMajor,
            cblas_sys::CBLAS_TRANSPOSE::CblasNoTrans,
            cblas_sys::CBLAS_TRANSPOSE::CblasNoTrans,
            m as i32,
            n as i32,
            k as i32,
            alpha,
            a.as_ptr(),
            k as i32,
            b.as_ptr(),
            n as i32,
            beta,
            c.as_mut_ptr(),
            n as i32,
        );
    }
}

/// Integration controls.
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Fixed step; must satisfy dt <= 0.01 / norm_bound.
    pub dt: f64,
    /// Collect roughly this many (t, state) samples along the way.
    pub trace_samples: usize,
    /// Re-run at dt/2 and require the final-state overlap deficit to move
    /// by less than [`TOL_CONVERGENCE`].
    pub verify_convergence: bool,
}

impl EvolveOptions {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            trace_samples: 0,
            verify_convergence: false,
        }
    }
}

/// One sampled point of an evolution.
#[derive(Debug, Clone)]
pub struct TraceSample {
    pub t: f64,
    pub state: StateVector,
}

/// Result of a single-state evolution.
#[derive(Debug)]
pub struct EvolveOutcome {
    pub state: StateVector,
    /// max |norm - 1| over the monitored samples and the final state.
    pub norm_drift: f64,
    pub trace: Vec<TraceSample>,
    /// Overlap-deficit change measured by the step-halving check.
    pub convergence_change: Option<f64>,
}

/// Result of a block evolution.
#[derive(Debug)]
pub struct BlockOutcome {
    pub states: Vec<StateVector>,
    pub norm_drift: f64,
}

/// Propagate one state under H(t) from t0 to t1 with fixed-step RK4.
pub fn evolve_state(
    psi0: &StateVector,
    h: &TimeDependentHamiltonian,
    t0: f64,
    t1: f64,
    opts: &EvolveOptions,
) -> Result<EvolveOutcome> {
    let dev = (psi0.norm() - 1.0).abs();
    if dev > TOL_NORM_DRIFT {
        return Err(Error::NotNormalized { deviation: dev });
    }
    let (final_block, norm_drift, trace) = propagate(
        &[psi0.clone()],
        h,
        t0,
        t1,
        opts.dt,
        opts.trace_samples,
    )?;
    let state = final_block.into_iter().next().unwrap();

    let mut convergence_change = None;
    if opts.verify_convergence {
        let (fine, _, _) = propagate(&[psi0.clone()], h, t0, t1, opts.dt / 2.0, 0)?;
        let deficit = 1.0 - state.overlap(&fine[0])?.norm();
        if deficit.abs() >= TOL_CONVERGENCE {
            return Err(Error::ConvergenceCheck { change: deficit });
        }
        convergence_change = Some(deficit);
    }

    if norm_drift > TOL_NORM_DRIFT {
        return Err(Error::NormDrift {
            drift: norm_drift,
            tol: TOL_NORM_DRIFT,
        });
    }
    Ok(EvolveOutcome {
        state,
        norm_drift,
        trace,
        convergence_change,
    })
}

/// Propagate several states side by side under the same H(t).
pub fn evolve_block(
    states: &[StateVector],
    h: &TimeDependentHamiltonian,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<BlockOutcome> {
    for s in states {
        let dev = (s.norm() - 1.0).abs();
        if dev > TOL_NORM_DRIFT {
            return Err(Error::NotNormalized { deviation: dev });
        }
    }
    let (finals, norm_drift, _) = propagate(states, h, t0, t1, dt, 0)?;
    if norm_drift > TOL_NORM_DRIFT {
        return Err(Error::NormDrift {
            drift: norm_drift,
            tol: TOL_NORM_DRIFT,
        });
    }
    Ok(BlockOutcome {
        states: finals,
        norm_drift,
    })
}

fn propagate(
    states: &[StateVector],
    h: &TimeDependentHamiltonian,
    t0: f64,
    t1: f64,
    dt: f64,
    trace_samples: usize,
) -> Result<(Vec<StateVector>, f64, Vec<TraceSample>)> {
    let dim = h.dim();
    let ncols = states.len();
    if ncols == 0 {
        return Err(Error::InvalidParameter("no states to evolve".into()));
    }
    for s in states {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: s.dim(),
            });
        }
    }
    h.check_col_scales(ncols)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let limit = 0.01 / h.norm_bound();
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, limit });
    }
    if t1 < t0 {
        return Err(Error::InvalidParameter(format!(
            "t1 = {t1} earlier than t0 = {t0}"
        )));
    }

    let span = t1 - t0;
    let steps = if span == 0.0 {
        0
    } else {
        (span / dt).ceil() as usize
    };
    let dt_eff = if steps == 0 { 0.0 } else { span / steps as f64 };

    // Column-major packing: each state is one column of the block.
    let mut x = Array2::<Complex64>::zeros((dim, ncols));
    for (k, s) in states.iter().enumerate() {
        x.column_mut(k).assign(s.amplitudes());
    }

    let mut k1 = Array2::<Complex64>::zeros((dim, ncols));
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut xt = k1.clone();
    let mut scratch = k1.clone();

    let stride = if trace_samples > 0 && steps > 0 {
        (steps / trace_samples).max(1)
    } else {
        0
    };
    let mut trace = Vec::new();
    let mut norm_drift = 0.0f64;

    let record = |t: f64, x: &Array2<Complex64>, drift: &mut f64, trace: &mut Vec<TraceSample>| {
        for k in 0..ncols {
            let norm = x.column(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            *drift = drift.max((norm - 1.0).abs());
        }
        if stride > 0 {
            trace.push(TraceSample {
                t,
                state: StateVector::new_unchecked(x.column(0).to_owned()),
            });
        }
    };

    if stride > 0 {
        record(t0, &x, &mut norm_drift, &mut trace);
    }

    for step in 0..steps {
        let t = t0 + step as f64 * dt_eff;
        let half = 0.5 * dt_eff;

        h.rhs(t, &x, &mut k1, &mut scratch);

        assign_axpy(&mut xt, &x, half, &k1);
        h.rhs(t + half, &xt, &mut k2, &mut scratch);

        assign_axpy(&mut xt, &x, half, &k2);
        h.rhs(t + half, &xt, &mut k3, &mut scratch);

        assign_axpy(&mut xt, &x, dt_eff, &k3);
        h.rhs(t + dt_eff, &xt, &mut k4, &mut scratch);

        let w = dt_eff / 6.0;
        ndarray::Zip::from(&mut x)
            .and(&k1)
            .and(&k2)
            .and(&k3)
            .and(&k4)
            .for_each(|xv, &a, &b, &c, &d| {
                *xv += w * (a + 2.0 * b + 2.0 * c + d);
            });

        if stride > 0 && ((step + 1) % stride == 0 || step + 1 == steps) {
            record(t0 + (step + 1) as f64 * dt_eff, &x, &mut norm_drift, &mut trace);
        }
    }

    // Final norm check even when not tracing.
    for k in 0..ncols {
        let norm = x.column(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        norm_drift = norm_drift.max((norm - 1.0).abs());
    }

    let finals = (0..ncols)
        .map(|k| StateVector::new_unchecked(x.column(k).to_owned()))
        .collect();
    Ok((finals, norm_drift, trace))
}

/// xt = x + c * k, elementwise.
fn assign_axpy(xt: &mut Array2<Complex64>, x: &Array2<Complex64>, c: f64, k: &Array2<Complex64>) {
    ndarray::Zip::from(xt).and(x).and(k).for_each(|o, &xv, &kv| {
        *o = xv + c * kv;
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build::{build_protection_hamiltonian, build_symmetry_operators};
    use crate::lattice::LatticeSpec;
    use crate::spectrum::{diagonalize, extract_logical_basis};

    fn lat2() -> LatticeSpec {
        LatticeSpec::new(2, 1.0, 1.0).unwrap()
    }

    /// Oracle: propagate under a constant hermitian H through its
    /// eigendecomposition, psi(t) = V exp(-i E t) V^dag psi(0).
    fn exact_propagate(h: &DenseOperator, psi: &StateVector, t: f64) -> StateVector {
        let spec = diagonalize(h).unwrap();
        let v = &spec.eigenvectors;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); v.ncols()];
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c = v
                .column(k)
                .iter()
                .zip(psi.amplitudes().iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
        }
        let mut out = Array1::<Complex64>::zeros(psi.dim());
        for (k, c) in coeffs.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -spec.eigenvalues[k] * t);
            out.scaled_add(c * phase, &v.column(k));
        }
        StateVector::new_unchecked(out)
    }

    fn random_state(dim: usize, seed: u64) -> StateVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut amps = Array1::<Complex64>::zeros(dim);
        for a in amps.iter_mut() {
            *a = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        amps.mapv_inplace(|z| z / norm);
        StateVector::new(amps).unwrap()
    }

    #[test]
    fn ramp_boundary_values() {
        let s = Schedule::new(10.0).unwrap();
        assert_eq!(s.ramp_value(0.0).unwrap(), 0.0);
        let end = s.ramp_value(s.t_final()).unwrap();
        assert!(1.0 - end < 1e-10, "1 - f(5 tau) = {:.3e}", 1.0 - end);
        assert!((end - (1.0 - (-25.0f64).exp())).abs() < 1e-15);
        assert!(s.ramp_value(-1.0).is_err());
        // monotone nondecreasing on a grid
        let mut prev = -1.0;
        for k in 0..=200 {
            let f = s.ramp_value(50.0 * k as f64 / 200.0).unwrap();
            assert!(f >= prev);
            prev = f;
        }
    }

    #[test]
    fn pulse_envelope_values() {
        let p = PulseSpec::new(Axis::X, 0.3, 10.0, Envelope::SinSquared).unwrap();
        assert_eq!(p.amplitude(0.0).unwrap(), 0.0);
        assert!((p.amplitude(5.0).unwrap() - 0.3).abs() < 1e-15);
        assert!(p.amplitude(10.0).unwrap() < 1e-30);
        assert!(p.amplitude(-0.1).is_err());

        let skew = PulseSpec::new(
            Axis::Y,
            0.2,
            1.0,
            Envelope::SkewedSinSquared { power: 1.5 },
        )
        .unwrap();
        // peak at s = (1/2)^(1/power), still exactly g_max
        let s_peak = 0.5f64.powf(1.0 / 1.5);
        assert!((skew.amplitude(s_peak).unwrap() - 0.2).abs() < 1e-12);
        assert!(skew.amplitude(1.0).unwrap() < 1e-30);
        assert!(p.validate_against_gap(0.82).unwrap() == ());
        assert!(p.validate_against_gap(0.25).is_err());
    }

    #[test]
    fn stationary_state_stays_put() {
        let lat = lat2();
        let h0 = build_protection_hamiltonian(&lat).unwrap();
        let syms = build_symmetry_operators(&lat).unwrap();
        let basis = extract_logical_basis(&h0, &syms).unwrap();
        let psi0 = StateVector::new(basis.zero_l.clone()).unwrap();
        let bound = basis.ground_energy.abs();
        let h = TimeDependentHamiltonian::constant(&h0, bound).unwrap();
        let dt = default_dt(bound, 10.0, &AccuracyBudget::default());
        let out = evolve_state(&psi0, &h, 0.0, 10.0, &EvolveOptions::with_dt(dt)).unwrap();
        let f = fidelity(&out.state, &psi0).unwrap();
        assert!(1.0 - f < 1e-9, "fidelity deficit {:.2e}", 1.0 - f);
        assert!(out.norm_drift < TOL_NORM_DRIFT);
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let dim = 16;
        let zero = DenseOperator::new(Array2::zeros((dim, dim)), true).unwrap();
        let h = TimeDependentHamiltonian::constant(&zero, 1.0).unwrap();
        let psi0 = random_state(dim, 3);
        let out = evolve_state(&psi0, &h, 0.0, 2.0, &EvolveOptions::with_dt(1e-3)).unwrap();
        let f = fidelity(&out.state, &psi0).unwrap();
        assert!((1.0 - f).abs() < 1e-12);
    }

    #[test]
    fn matches_exact_propagator_and_conserves_energy() {
        let lat = lat2();
        let h0 = build_protection_hamiltonian(&lat).unwrap();
        let psi0 = random_state(16, 7);
        let bound = 7.0;
        let h = TimeDependentHamiltonian::constant(&h0, bound).unwrap();
        let dt = default_dt(bound, 3.0, &AccuracyBudget::default());
        let out = evolve_state(&psi0, &h, 0.0, 3.0, &EvolveOptions::with_dt(dt)).unwrap();
        let exact = exact_propagate(&h0, &psi0, 3.0);
        let dev = out
            .state
            .amplitudes()
            .iter()
            .zip(exact.amplitudes().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-8, "deviation from exact propagator {dev:.2e}");

        let e0 = energy(&h0, &psi0);
        let e1 = energy(&h0, &out.state);
        assert!((e1 - e0).abs() < 1e-9, "energy drift {:.2e}", e1 - e0);
    }

    fn energy(h: &DenseOperator, psi: &StateVector) -> f64 {
        let hv = h.apply(&psi.amplitudes().view()).unwrap();
        psi.amplitudes()
            .iter()
            .zip(hv.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    #[test]
    fn fourth_order_convergence() {
        // Global error against the eigendecomposition reference scales as dt^4.
        let lat = lat2();
        let h0 = build_protection_hamiltonian(&lat).unwrap();
        let psi0 = random_state(16, 11);
        let h = TimeDependentHamiltonian::constant(&h0, 7.0).unwrap();
        let t1 = 1.0;
        let exact = exact_propagate(&h0, &psi0, t1);
        let dts = [1.4e-3, 8e-4, 4.5e-4, 2.5e-4, 1.4e-4];
        let mut errs = Vec::new();
        for &dt in &dts {
            let out = evolve_state(&psi0, &h, 0.0, t1, &EvolveOptions::with_dt(dt)).unwrap();
            let err = out
                .state
                .amplitudes()
                .iter()
                .zip(exact.amplitudes().iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            errs.push(err);
        }
        let slope = crate::fit::loglog_slope(&dts, &errs, crate::fit::Trim::None).unwrap();
        assert!(
            (slope - 4.0).abs() < 0.4,
            "integrator order fit {slope:.3} (want 4 +- 10%)"
        );
    }

    #[test]
    fn time_reversal_roundtrip() {
        let lat = lat2();
        let h0 = build_protection_hamiltonian(&lat).unwrap();
        let sy = crate::build::build_collective_field(&lat, Axis::Y).unwrap();
        let tau = 3.0;
        let t1 = 6.0;
        let sched = Schedule::with_t_final(tau, t1).unwrap();
        let bound = 11.0;
        let mut h = TimeDependentHamiltonian::new(16, bound).unwrap();
        h.add_term(&h0, move |t| {
            let s = t / tau;
            -(-s * s).exp_m1()
        })
        .unwrap();
        h.add_term(&sy, move |t| (-(t / tau) * (t / tau)).exp())
            .unwrap();
        let _ = sched;

        let psi0 = random_state(16, 5);
        let dt = default_dt(bound, 2.0 * t1, &AccuracyBudget::default());
        let fwd = evolve_state(&psi0, &h, 0.0, t1, &EvolveOptions::with_dt(dt)).unwrap();

        // Reversed window: H~(t) = -H(t1 - t).
        let mut hr = TimeDependentHamiltonian::new(16, bound).unwrap();
        hr.add_term(&h0, move |t| {
            let s = (t1 - t) / tau;
            (-s * s).exp_m1()
        })
        .unwrap();
        hr.add_term(&sy, move |t| {
            let s = (t1 - t) / tau;
            -(-s * s).exp()
        })
        .unwrap();
        let back = evolve_state(&fwd.state, &hr, 0.0, t1, &EvolveOptions::with_dt(dt)).unwrap();
        let deficit = 1.0 - back.state.overlap(&psi0).unwrap().norm();
        assert!(deficit < 1e-8, "roundtrip overlap deficit {deficit:.2e}");
    }

    #[test]
    fn convergence_check_reports_small_change() {
        let lat = lat2();
        let h0 = build_protection_hamiltonian(&lat).unwrap();
        let psi0 = random_state(16, 13);
        let h = TimeDependentHamiltonian::constant(&h0, 7.0).unwrap();
        let dt = default_dt(7.0, 1.0, &AccuracyBudget::default());
        let opts = EvolveOptions {
            dt,
            trace_samples: 0,
            verify_convergence: true,
        };
        let out = evolve_state(&psi0, &h, 0.0, 1.0, &opts).unwrap();
        assert!(out.convergence_change.unwrap().abs() < TOL_CONVERGENCE);
    }

    #[test]
    fn oversized_step_rejected() {
        let lat = lat2();
        let h0 = build_protection_hamiltonian(&lat).unwrap();
        let psi0 = random_state(16, 1);
        let h = TimeDependentHamiltonian::constant(&h0, 7.0).unwrap();
        let res = evolve_state(&psi0, &h, 0.0, 1.0, &EvolveOptions::with_dt(0.01));
        assert!(matches!(res, Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn fidelity_basics() {
        let psi = random_state(8, 2);
        assert!((fidelity(&psi, &psi).unwrap() - 1.0).abs() < 1e-12);
        let phased = StateVector::new(psi.amplitudes().mapv(|z| z * Complex64::from_polar(1.0, 0.7)))
            .unwrap();
        assert!((fidelity(&psi, &phased).unwrap() - 1.0).abs() < 1e-12);
        let other = random_state(4, 3);
        assert!(fidelity(&psi, &other).is_err());
    }

    #[test]
    fn logical_states_are_orthogonal() {
        let lat = lat2();
        let h0 = build_protection_hamiltonian(&lat).unwrap();
        let syms = build_symmetry_operators(&lat).unwrap();
        let basis = extract_logical_basis(&h0, &syms).unwrap();
        let zero = StateVector::new(basis.zero_l.clone()).unwrap();
        let one = StateVector::new(basis.one_l.clone()).unwrap();
        assert!(fidelity(&zero, &one).unwrap() < 1e-12);
    }

    #[test]
    fn block_evolution_matches_single() {
        let lat = lat2();
        let h0 = build_protection_hamiltonian(&lat).unwrap();
        let a = random_state(16, 21);
        let b = random_state(16, 22);
        let h = TimeDependentHamiltonian::constant(&h0, 7.0).unwrap();
        let dt = 1e-3;
        let block = evolve_block(&[a.clone(), b.clone()], &h, 0.0, 1.0, dt).unwrap();
        let ea = evolve_state(&a, &h, 0.0, 1.0, &EvolveOptions::with_dt(dt)).unwrap();
        let eb = evolve_state(&b, &h, 0.0, 1.0, &EvolveOptions::with_dt(dt)).unwrap();
        assert_eq!(block.states[0], ea.state);
        assert_eq!(block.states[1], eb.state);
    }

    #[test]
    fn per_column_scales_differentiate_columns() {
        let lat = lat2();
        let h0 = build_protection_hamiltonian(&lat).unwrap();
        let sx = crate::build::build_collective_field(&lat, Axis::X).unwrap();
        let psi = random_state(16, 31);
        let bound = 12.0;
        let dt = 2e-4;

        let mut batched = TimeDependentHamiltonian::new(16, bound).unwrap();
        batched.add_term(&h0, |_| 1.0).unwrap();
        batched
            .add_term_per_column(&sx, |t| (t * 0.7).sin().powi(2), vec![0.1, 0.25])
            .unwrap();
        let block =
            evolve_block(&[psi.clone(), psi.clone()], &batched, 0.0, 1.5, dt).unwrap();

        for (k, g) in [0.1, 0.25].iter().enumerate() {
            let g = *g;
            let mut single = TimeDependentHamiltonian::new(16, bound).unwrap();
            single.add_term(&h0, |_| 1.0).unwrap();
            single
                .add_term(&sx, move |t| g * (t * 0.7).sin().powi(2))
                .unwrap();
            let out = evolve_state(&psi, &single, 0.0, 1.5, &EvolveOptions::with_dt(dt)).unwrap();
            let dev = out
                .state
                .amplitudes()
                .iter()
                .zip(block.states[k].amplitudes().iter())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-13, "column {k} deviates by {dev:.2e}");
        }
    }
}
