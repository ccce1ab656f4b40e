use grazing::sim::*;

fn main() {
    for seed in [1u64, 777, 20_240_501, 987_654_321] {
        let base = SimulationConfig {
            n_particles: 10_000,
            exponent_s: ExponentSpec::Named("hard_sphere".into()),
            theta_min: 1e-2,
            dt: 0.02,
            t_end: 6.0,
            init: InitKind::Bimodal,
            seed,
            record_every: 10,
        };
        let report = compare_sweep(&base, &[7.0, 15.0, 40.0], 16).unwrap();
        let sups: Vec<f64> = report.rows.iter().map(|r| r.sup_m4_mean).collect();
        let hists: Vec<f64> = report.rows.iter().map(|r| r.hist_l1_mean).collect();
        println!(
            "seed={seed}: sup={:.3?} hist={:.4?} monotone={:?} min_sep={:.2?} hist_mono={:?}",
            sups, hists, report.monotone_decreasing, report.min_separation_sigmas,
            report.hist_monotone_decreasing
        );
    }
}
