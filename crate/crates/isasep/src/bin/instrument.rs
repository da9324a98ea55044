// temporary probe binary
use isasep::config::parse_config;
use isasep::ica::{fastica, IcaConfig};
use isasep::instance::{make_instance, Mixing};
use isasep::linalg::whiten;
use isasep::rng::RngSeed;

fn main() {
    let text = "\
[experiment]
samples = 20000
seed = 0

[source.1]
kind = spherical
dim = 2
radial = chi

[source.2]
kind = spherical
dim = 2
radial = constant:1.0
";
    let cfg = parse_config(text).unwrap();
    for seed in [1000u64, 1001, 1003, 1005] {
        let inst = make_instance(&cfg.sources, 20_000, RngSeed::new(seed).derive(1), Mixing::HaarRandom).unwrap();
        let (_, zw) = whiten(&inst.observations).unwrap();
        print!("seed={seed}: ");
        for attempt in 0..6u64 {
            // emulate one restart by seeding directly with the derived seed
            let mut c = IcaConfig::new(RngSeed::new(seed).derive(2).derive(attempt));
            // the internal restart loop derives attempt seeds itself from
            // config.seed; with restarts=0 attempt 0 uses derive(0)
            c.max_iterations = 3000;
            c.tolerance = 1e-8;
            c.restarts = 0;
            let r = fastica(&zw, &c).unwrap();
            print!("[a{attempt}: conv={} it={} d={:.1e}] ", r.converged as u8, r.iterations, r.final_delta);
        }
        println!();
    }
}
