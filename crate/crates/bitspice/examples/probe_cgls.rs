use bitspice::bench::{draw_threshold, Algorithm, Scenario};
use bitspice::numerics::{seq_parallelism, CglsOptions};
use bitspice::onebit::{onebit_estimate, OneBitVariant, SolverKind};
use bitspice::quantizer::signc;
use bitspice::spice::CovarianceOp;
use bitspice::waveforms::add_noise;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    seq_parallelism();
    for &n in &[256usize, 1024, 4096] {
        let mut scenario = Scenario::five_sinusoids(n, vec![20.0]);
        scenario.solver = SolverKind::Cgls;
        let dict = scenario.build_dictionary().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scene = scenario.draw_scene(&mut rng).unwrap();
        let y = scenario.synthesize(&scene).unwrap();
        let signal_power: f64 = scene.targets.iter().map(|t| t.amp.norm_sqr()).sum();
        let (y_noisy, sigma2) = add_noise(&y, 20.0, signal_power, &mut rng);
        let h_max = 0.5 * (signal_power + sigma2).sqrt();
        let threshold = draw_threshold(&scenario, y.len(), h_max, &mut rng);
        let z = signc(&y_noisy, &threshold).unwrap();

        let cfg = scenario.onebit_config(OneBitVariant::Slim);
        let start = Instant::now();
        let est = onebit_estimate(&z, &dict, &threshold.values, &cfg).unwrap();
        let total = start.elapsed().as_secs_f64();

        let noise = vec![2.0; n];
        let op = CovarianceOp::new(&dict, &est.powers, &noise).unwrap();
        let t0 = Instant::now();
        let (_, report) = op.solve(&threshold.values, &CglsOptions::default()).unwrap();
        let solve_t = t0.elapsed().as_secs_f64();
        println!(
            "N={n}: total {total:.2}s / {} iters = {:.2} ms/iter; final-p solve: {} cgls iters, rel_res {:.1e}, {:.2} ms",
            est.iterations,
            1e3 * total / est.iterations as f64,
            report.iterations,
            report.rel_residual,
            1e3 * solve_t
        );
        let _ = Algorithm::OneBitPeriodogram;
    }
}
