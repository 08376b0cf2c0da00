use std::cell::Cell;

use rand::Rng;
use wpctc_core::streaming::{emission_schedule, latency, stream, ChunkEncoder, MovingAverage, StreamConfig};
use wpctc_testkit::rng;

/// Leaky running sum (left context only through state) plus the sum of
/// the next `reach` frames.
struct LeakyLookahead {
    decay: f64,
    reach: usize,
    calls: Cell<usize>,
}

impl ChunkEncoder for LeakyLookahead {
    type State = Vec<f64>;

    fn initial_state(&self) -> Vec<f64> {
        Vec::new()
    }

    fn right_reach(&self) -> usize {
        self.reach
    }

    fn process(&self, chunk: &[Vec<f64>], state: &Vec<f64>, keep: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.calls.set(self.calls.get() + 1);
        let dim = chunk[0].len();
        let mut h = if state.is_empty() { vec![0.0; dim] } else { state.clone() };
        let mut at_keep = h.clone();
        let mut out = Vec::with_capacity(chunk.len());
        for (t, x) in chunk.iter().enumerate() {
            for (hi, xi) in h.iter_mut().zip(x) {
                *hi = self.decay * *hi + xi;
            }
            let mut y = h.clone();
            for f in chunk.iter().skip(t + 1).take(self.reach) {
                for (yi, fi) in y.iter_mut().zip(f) {
                    *yi += fi;
                }
            }
            out.push(y);
            if t + 1 == keep {
                at_keep = h.clone();
            }
        }
        (out, at_keep)
    }
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs())).fold(0.0, f64::max)
}

#[test]
fn chunked_equals_full_sequence() {
    let mut r = rng(71);
    let mut configs = 0;
    for cs in 1..=10 {
        for rc in 0..cs {
            configs += 1;
            let cfg = StreamConfig::new(cs, rc).unwrap();
            for len in 1..=50 {
                let x: Vec<Vec<f64>> =
                    (0..len).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
                for reach in 0..=rc {
                    let avg = MovingAverage { left: r.random_range(0..4), right: reach };
                    assert!(max_abs_diff(&stream(&x, &avg, &cfg).unwrap(), &avg.apply(&x)) < 1e-6);

                    let leaky = LeakyLookahead { decay: 0.7, reach, calls: Cell::new(0) };
                    let full = leaky.process(&x, &Vec::new(), len).0;
                    leaky.calls.set(0);
                    let got = stream(&x, &leaky, &cfg).unwrap();
                    assert!(max_abs_diff(&got, &full) < 1e-6, "CS={cs} RC={rc} r={reach} T={len}");
                    assert_eq!(leaky.calls.get(), cfg.chunk_count(len));
                }
            }
        }
    }
    assert_eq!(configs, 55);
}

#[test]
fn too_little_right_context_is_visible() {
    let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
    let enc = MovingAverage { left: 0, right: 3 };
    let cfg = StreamConfig::new(6, 1).unwrap();
    assert!(max_abs_diff(&stream(&x, &enc, &cfg).unwrap(), &enc.apply(&x)) > 0.1);
}

#[test]
fn emission_delay_within_latency_bound() {
    let mut r = rng(72);
    for _ in 0..300 {
        let cs = r.random_range(1..=30);
        let cfg = StreamConfig::new(cs, r.random_range(0..cs)).unwrap();
        let frames = r.random_range(1..200);
        let shift = 10.0;
        let schedule = emission_schedule(frames, &cfg);
        assert_eq!(schedule.len(), frames);
        let worst = schedule.iter().enumerate().map(|(t, &e)| (e - t) as f64 * shift).fold(0.0, f64::max);
        assert!(worst <= latency(&cfg, shift), "{cfg:?} T={frames}: {worst}");
        assert!(schedule.windows(2).all(|w| w[0] <= w[1]));
    }
}
