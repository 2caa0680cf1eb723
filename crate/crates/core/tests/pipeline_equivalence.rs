use std::collections::HashMap;

use scclab::degree_law::JointDegreeLaw;
use scclab::exploration::run_edfs;
use scclab::graph::{pair_configuration, sample_conditioned_degrees};
use scclab::rng::derive_seed;
use scclab::staged::{exploration_outcome_code, run_staged, staged_outcome_code, stream_discovery_degrees, StreamMode, StreamSource};
use scclab::stats::chi_square_two_sample;

fn compare(n: usize, samples: u64, base: u64) -> f64 {
    let law = JointDegreeLaw::table(&[(1, 1, 0.5), (2, 2, 0.5)]).unwrap();
    let mut full: HashMap<String, u64> = HashMap::new();
    let mut staged: HashMap<String, u64> = HashMap::new();
    for i in 0..samples {
        let s = derive_seed(base, &[i, 0]);
        let seq = sample_conditioned_degrees(&law, n, s, 1000).unwrap();
        let g = pair_configuration(&seq, s).unwrap();
        let x = run_edfs(&g, s);
        *full.entry(exploration_outcome_code(&x)).or_default() += 1;

        let s = derive_seed(base, &[i, 1]);
        let seq = sample_conditioned_degrees(&law, n, s, 1000).unwrap();
        let mut stream = stream_discovery_degrees(StreamSource::Sequence(&seq), StreamMode::ExactReorder, s).unwrap();
        let run = run_staged(&mut stream, seq.total, usize::MAX, s).unwrap();
        *staged.entry(staged_outcome_code(&run)).or_default() += 1;
    }
    chi_square_two_sample(&full, &staged, 5).unwrap().p_value
}

#[test]
fn staged_matches_full_pipeline_small_n() {
    for (n, base) in [(4, 11), (5, 12)] {
        let p = compare(n, 40_000, base);
        assert!(p > 0.01, "n = {n}: p = {p}");
    }
}
