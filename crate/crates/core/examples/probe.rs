use online_alloc::*;
use online_alloc::generators::{self, Rng};

fn main() {
    let perms = 100usize;
    let targets30 = [("esa.05", 0.87), ("dla.05", 0.80), ("ola.1", 0.65), ("krtv", 0.84), ("krtv5", 0.87)];
    let targets60 = [("esa.05", 0.92), ("dla.05", 0.84), ("ola.1", 0.72), ("krtv", 0.88), ("krtv5", 0.90)];
    for (c, targets) in [(30.0f64, targets30), (60.0, targets60)] {
        println!("== c = {c}");
        let mut sums = vec![0.0f64; 5];
        for i in 0..3u64 {
            let spec = generators::WorstCaseSpec::new(3, c, 1000 + i).unwrap();
            let inst = generators::build_worst_case(&spec);
            let off = offline_optimum(&inst).unwrap();
            for j in 0..perms as u64 {
                let pseed = (42 ^ generators::mix(i)) ^ generators::mix(j);
                let mut rng = Rng::new(pseed);
                let perm = generators::sample_permutation(inst.n(), &mut rng);
                let opts = RunOptions::with_noise_seed(pseed);
                let runs = [
                    esa_run(&inst, &perm, 0.05, spec.gamma()).unwrap(),
                    algorithms::dla_run_opts(&inst, &perm, 0.05, opts).unwrap().0,
                    algorithms::ola_run_opts(&inst, &perm, 0.1, opts).unwrap().0,
                    algorithms::krtv_run_opts(&inst, &perm, 1, opts).unwrap().0,
                    algorithms::krtv_run_opts(&inst, &perm, 5, opts).unwrap().0,
                ];
                for (s, r) in sums.iter_mut().zip(&runs) {
                    assert!(r.feasible);
                    *s += r.objective / off.p_star;
                }
            }
        }
        for (k, (name, target)) in targets.iter().enumerate() {
            let mean = sums[k] / (3.0 * perms as f64);
            let dev = mean - target;
            let ok = dev.abs() <= 0.07;
            println!("  {name:8} mean {mean:.3} target {target:.2} dev {dev:+.3} {}", if ok {"PASS"} else {"FAIL"});
        }
    }
}
