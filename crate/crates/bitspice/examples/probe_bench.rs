use bitspice::bench::{nmse, run_trial, Algorithm, Scenario};
use bitspice::numerics::seq_parallelism;
use bitspice::onebit::OneBitVariant;

fn main() {
    seq_parallelism();
    let s = Scenario::five_sinusoids(1024, vec![10.0, 20.0, 30.0]);
    let d = s.build_dictionary().unwrap();
    let seeds: Vec<u64> = (1..=50).collect();

    for alg in [
        Algorithm::OneBitPeriodogram,
        Algorithm::OneBit(OneBitVariant::Spice),
        Algorithm::OneBit(OneBitVariant::Slim),
    ] {
        for snr in [10.0, 30.0] {
            let mut trials = Vec::new();
            for &seed in &seeds {
                let t = run_trial(&s, &d, alg, snr, seed).unwrap();
                let worst = t
                    .targets
                    .iter()
                    .map(|tg| ((t.peak_amplitude(tg.bin) - tg.amplitude) / tg.amplitude).abs())
                    .fold(0.0, f64::max);
                if worst > 0.5 {
                    println!("  outlier: {} snr={snr} seed={seed} worst_rel_err={worst:.3}", alg.label());
                }
                trials.push(t);
            }
            println!("{:6} snr={snr:2} nmse={:.5}", alg.label(), nmse(&trials).unwrap());
        }
    }
}
