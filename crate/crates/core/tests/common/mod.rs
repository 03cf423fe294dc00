#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Normal};

use wordstorm::config::RunConfig;
use wordstorm::corpus::{Grouping, StopList};
use wordstorm::fixtures;
use wordstorm::layout::{independent_layout, Storm, StormSpec};
use wordstorm::pipeline::prepare;
use wordstorm::rng;

pub fn grouped_config() -> RunConfig {
    RunConfig {
        grouping: Grouping::ByGroup,
        ..Default::default()
    }
}

pub fn programme_spec() -> StormSpec {
    prepare(&fixtures::programmes(), &StopList::default(), &grouped_config()).unwrap()
}

pub fn programme_storm() -> Storm {
    independent_layout(&programme_spec(), &grouped_config().layout()).unwrap()
}

/// The fixture storm with every position jittered and every size redrawn.
pub fn random_state(base: &Storm, seed: u64) -> Storm {
    let mut r = rng::stream(seed, &["test-state"]);
    let jitter = Normal::new(0.0, 15.0).unwrap();
    let mut s = base.clone();
    for w in s.clouds.iter_mut().flat_map(|c| c.words.iter_mut()) {
        w.pos.x += jitter.sample(&mut r);
        w.pos.y += jitter.sample(&mut r);
        w.size = r.random_range(12.0..64.0);
    }
    s
}

/// Shared words share one jittered position across clouds and sizes stay
/// near their targets: the regime the optimizer works in.
pub fn coordinated_state(base: &Storm, seed: u64) -> Storm {
    let mut r = rng::stream(seed, &["test-coordinated"]);
    let jitter = Normal::new(0.0, 4.0).unwrap();
    let mut anchor = std::collections::BTreeMap::new();
    for w in base.clouds.iter().flat_map(|c| c.words.iter()) {
        anchor.entry(w.text.clone()).or_insert(w.pos);
    }
    let mut s = base.clone();
    for w in s.clouds.iter_mut().flat_map(|c| c.words.iter_mut()) {
        let a = anchor[&w.text];
        w.pos.x = a.x + jitter.sample(&mut r);
        w.pos.y = a.y + jitter.sample(&mut r);
        w.size = (w.target + jitter.sample(&mut r)).clamp(12.0, 64.0);
    }
    s
}
