// Scratch measurement harness used while pinning canned-config parameters.
use std::time::Instant;

use pqlab_core::classifier;
use pqlab_core::dynamics::{Envelope, PulseSpec, Schedule};
use pqlab_core::fit::{log_spaced, loglog_slope, Trim};
use pqlab_core::protocols::{
    calibrate_pulse_amplitude, initialization_sweep, rabi_cos_sin_fit, rotation_axis_angle,
    run_initialization, run_manipulation, run_manipulation_sweep, sweep_noise_deviation,
    NoiseSpec, ProtocolOptions,
};
use pqlab_core::{
    build_protection_hamiltonian, build_symmetry_operators, extract_logical_basis,
    ground_splitting_scan, Axis, LatticeSpec,
};

fn main() {
    pqlab_core::init_runtime();
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    let t0 = Instant::now();
    let lat2 = LatticeSpec::new(2, 1.0, 1.0).unwrap();
    let h02 = build_protection_hamiltonian(&lat2).unwrap();
    let syms2 = build_symmetry_operators(&lat2).unwrap();
    let basis2 = extract_logical_basis(&h02, &syms2).unwrap();
    println!(
        "n=2: E0={:.12} gap={:.12} Emax={:.6} [{:?}]",
        basis2.ground_energy,
        basis2.gap,
        basis2.max_energy,
        t0.elapsed()
    );

    if which == "all" || which == "init" {
        let t = Instant::now();
        let opts = ProtocolOptions::default();
        for tau in [5.0, 10.0, 20.0, 50.0, 100.0] {
            let run = run_initialization(
                &lat2,
                &basis2,
                &Schedule::new(tau).unwrap(),
                &NoiseSpec::None,
                &opts,
            )
            .unwrap();
            println!(
                "init tau={tau}: err={:.4e} drift={:.2e} dt={:.3e}",
                run.final_error, run.norm_drift, run.dt
            );
        }
        println!("[init block {:?}]", t.elapsed());
    }

    if which == "all" || which == "noisy" {
        let t = Instant::now();
        let noise = NoiseSpec::RandomOrientation {
            amplitude: 1e-2,
            seed: 0,
        };
        let seeds: Vec<u64> = (1..=20).collect();
        let taus = [5.0, 10.0, 20.0, 40.0, 80.0];
        let rows = initialization_sweep(
            &lat2,
            &basis2,
            &taus,
            &noise,
            &seeds,
            &ProtocolOptions::default(),
        )
        .unwrap();
        for &tau in &taus {
            let mut errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.tau == tau)
                .map(|r| r.final_error)
                .collect();
            errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            println!(
                "noisy tau={tau}: median={:.3e} min={:.3e} max={:.3e}",
                errs[errs.len() / 2],
                errs[0],
                errs[errs.len() - 1]
            );
        }
        println!("[noisy block {:?}]", t.elapsed());
    }

    if which == "all" || which == "theta2" {
        let t = Instant::now();
        let pulse = PulseSpec::new(Axis::X, 0.05, 150.0 / basis2.gap, Envelope::SinSquared).unwrap();
        for axis in [Axis::X, Axis::Y] {
            let gs = log_spaced(0.015 * basis2.gap, 0.12 * basis2.gap, 5);
            let pulse = PulseSpec { axis, ..pulse };
            let runs = run_manipulation_sweep(
                &lat2,
                &basis2,
                &pulse,
                &gs,
                &NoiseSpec::None,
                &ProtocolOptions::default(),
            )
            .unwrap();
            let thetas: Vec<f64> = runs.iter().map(|r| r.decomposition.folded_angle()).collect();
            let leaks: Vec<f64> = runs.iter().map(|r| r.decomposition.leakage).collect();
            let slope = loglog_slope(&gs, &thetas, Trim::None).unwrap();
            println!(
                "theta(g) n=2 axis={axis:?}: slope={slope:.4} theta=[{:.3e},{:.3e}] leak_max={:.2e}",
                thetas[0],
                thetas[4],
                leaks.iter().cloned().fold(0.0, f64::max)
            );
        }
        println!("[theta2 block {:?}]", t.elapsed());
    }

    if which == "all" || which == "rabi" {
        let t = Instant::now();
        let pulse = PulseSpec::new(Axis::X, 0.05, 150.0 / basis2.gap, Envelope::SinSquared).unwrap();
        let gs: Vec<f64> = (1..=12).map(|k| 0.012 * k as f64).collect();
        let runs = run_manipulation_sweep(
            &lat2,
            &basis2,
            &pulse,
            &gs,
            &NoiseSpec::None,
            &ProtocolOptions::default(),
        )
        .unwrap();
        let decs: Vec<_> = runs.iter().map(|r| r.decomposition).collect();
        let fit = rabi_cos_sin_fit(&decs);
        let max_yz = decs
            .iter()
            .map(|d| d.alpha_y.norm().max(d.alpha_z.norm()))
            .fold(0.0, f64::max);
        println!(
            "rabi: residual={:.3e} unfolded=[{:.3},..,{:.3}] max|ay|,|az|={:.2e} leak_max={:.2e}",
            fit.max_residual,
            fit.unfolded[0],
            fit.unfolded[11],
            max_yz,
            decs.iter().map(|d| d.leakage).fold(0.0, f64::max)
        );
        println!("[rabi block {:?}]", t.elapsed());
    }

    if which == "all" || which == "noise8" {
        let t = Instant::now();
        let target = std::f64::consts::PI / 8.0;
        let proto = PulseSpec::new(
            Axis::Y,
            0.02,
            150.0 / basis2.gap,
            Envelope::SkewedSinSquared { power: 1.5 },
        )
        .unwrap();
        let opts = ProtocolOptions::default();
        let gstar =
            calibrate_pulse_amplitude(&lat2, &basis2, &proto, target, 1e-6, &opts).unwrap();
        println!("criterion8 g*={gstar:.8} [{:?}]", t.elapsed());
        let pulse = proto.with_g_max(gstar);
        let fs = log_spaced(1e-4, 1e-2, 5);
        let sweep = sweep_noise_deviation(
            &lat2,
            &basis2,
            &pulse,
            &NoiseSpec::Directional {
                axis: Axis::X,
                amplitude: 0.0,
            },
            &fs,
            &[],
            &opts,
        )
        .unwrap();
        for row in &sweep.rows {
            println!(
                "  f={:.2e}: dax={:.3e} day={:.3e} daz={:.3e}",
                row.amplitude, row.deviation[0], row.deviation[1], row.deviation[2]
            );
        }
        println!(
            "criterion8 slopes: x={:.3} y={:.3} z={:.3} ratio(x/z @f=1e-3)={:.1}",
            sweep.slopes[0],
            sweep.slopes[1],
            sweep.slopes[2],
            sweep.rows[2].deviation[0] / sweep.rows[2].deviation[2]
        );
        println!("[noise8 block {:?}]", t.elapsed());
    }

    if which == "all" || which == "noise9" {
        let t = Instant::now();
        let target = std::f64::consts::PI / 8.0;
        let proto =
            PulseSpec::new(Axis::Y, 0.02, 150.0 / basis2.gap, Envelope::SinSquared).unwrap();
        let opts = ProtocolOptions::default();
        let gstar =
            calibrate_pulse_amplitude(&lat2, &basis2, &proto, target, 1e-6, &opts).unwrap();
        let pulse = proto.with_g_max(gstar);
        let reference = run_manipulation(&lat2, &basis2, &pulse, &NoiseSpec::None, &opts)
            .unwrap()
            .decomposition;
        let theta_ref = reference.folded_angle();
        let fs = log_spaced(1e-4, 1e-2, 5);
        let mut dthetas = Vec::new();
        for &f in &fs {
            let run = run_manipulation(
                &lat2,
                &basis2,
                &pulse,
                &NoiseSpec::Directional {
                    axis: Axis::Y,
                    amplitude: f,
                },
                &opts,
            )
            .unwrap();
            let rep = rotation_axis_angle(&run.decomposition).unwrap();
            dthetas.push((run.decomposition.folded_angle() - theta_ref).abs());
            println!(
                "  f={f:.2e}: dtheta={:.3e} axis={:?}",
                dthetas.last().unwrap(),
                rep.axis
            );
        }
        let slope = loglog_slope(&fs, &dthetas, Trim::None).unwrap();
        println!("criterion9 g*={gstar:.8} slope={slope:.4}");
        println!("[noise9 block {:?}]", t.elapsed());
    }

    if which == "all" || which == "n3" {
        let t = Instant::now();
        let lat3 = LatticeSpec::new(3, 1.0, 1.0).unwrap();
        let h03 = build_protection_hamiltonian(&lat3).unwrap();
        let syms3 = build_symmetry_operators(&lat3).unwrap();
        let basis3 = extract_logical_basis(&h03, &syms3).unwrap();
        println!(
            "n=3: E0={:.12} gap={:.12} Emax={:.6} sector={:?} [{:?}]",
            basis3.ground_energy,
            basis3.gap,
            basis3.max_energy,
            basis3.p_sector,
            t.elapsed()
        );

        let t = Instant::now();
        let hs = log_spaced(1e-3, 1e-1, 9);
        let scan = ground_splitting_scan(&lat3, Axis::X, &hs).unwrap();
        println!("n=3 splitting slope={:.4} [{:?}]", scan.slope, t.elapsed());

        let t = Instant::now();
        let opts = ProtocolOptions {
            budget: pqlab_core::AccuracyBudget {
                phase_error: 1e-7,
                norm_drift: 2e-10,
            },
            ..ProtocolOptions::default()
        };
        let gs = log_spaced(0.05 * basis3.gap, 0.11 * basis3.gap, 4);
        for axis in [Axis::Y] {
            let pulse =
                PulseSpec::new(axis, gs[3], 80.0 / basis3.gap, Envelope::SinSquared).unwrap();
            let runs =
                run_manipulation_sweep(&lat3, &basis3, &pulse, &gs, &NoiseSpec::None, &opts)
                    .unwrap();
            let thetas: Vec<f64> = runs.iter().map(|r| r.decomposition.folded_angle()).collect();
            let slope = loglog_slope(&gs, &thetas, Trim::None).unwrap();
            println!(
                "n=3 theta slope axis={axis:?}: {slope:.4} thetas=[{:.3e}..{:.3e}] leak_max={:.2e} drift={:.2e} dt={:.3e}",
                thetas[0],
                thetas[3],
                runs.iter().map(|r| r.decomposition.leakage).fold(0.0, f64::max),
                runs.iter().map(|r| r.norm_drift).fold(0.0, f64::max),
                runs[0].dt
            );
        }
        println!("[n=3 manip block {:?}]", t.elapsed());

        let t = Instant::now();
        let mut count = 0usize;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let weight = 1 + (rng.random::<u64>() % 5) as usize;
            let mut sites: Vec<(u8, u8)> = Vec::new();
            while sites.len() < weight {
                let row = 1 + (rng.random::<u64>() % 3) as u8;
                let col = 1 + (rng.random::<u64>() % 3) as u8;
                if !sites.contains(&(row, col)) {
                    sites.push((row, col));
                }
            }
            let axes = [Axis::X, Axis::Y, Axis::Z];
            let factors: Vec<_> = sites
                .iter()
                .map(|&s| (s, axes[(rng.random::<u64>() % 3) as usize]))
                .collect();
            let s = pqlab_core::PauliString::from_factors(factors).unwrap();
            classifier::logical_projection_oracle(&s, &lat3, &basis3).unwrap();
            count += 1;
        }
        println!("n=3 oracle x{count} [{:?}]", t.elapsed());
    }

    println!("[total {:?}]", t0.elapsed());
}
