use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layout::{Approach, Movement};

/// Substream layout: one per road (by [`Approach::index`]), then one for
/// route draws and one for initial speeds.
const ROUTE_STREAM: u64 = 4;
const SPEED_STREAM: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpawnModel {
    /// Spawn probability per draw for each road, by [`Approach::index`].
    pub p_road: [f64; 4],
    pub p_left: f64,
    pub p_straight: f64,
    /// Initial speed range in m/s.
    pub speed: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpawnEvent {
    pub road: Approach,
    pub movement: Movement,
    pub speed: f64,
}

pub struct Spawner {
    model: SpawnModel,
    roads: [ChaCha8Rng; 4],
    routes: ChaCha8Rng,
    speeds: ChaCha8Rng,
}

impl Spawner {
    pub fn new(model: SpawnModel, seed: u64) -> Self {
        Self {
            model,
            roads: [0, 1, 2, 3].map(|i| stream(seed, i)),
            routes: stream(seed, ROUTE_STREAM),
            speeds: stream(seed, SPEED_STREAM),
        }
    }

    pub fn model(&self) -> &SpawnModel {
        &self.model
    }

    /// One Bernoulli draw per road. Every road's stream advances on every
    /// call, so one road's outcome never shifts another's.
    pub fn draw(&mut self) -> Vec<SpawnEvent> {
        let mut out = Vec::new();
        for road in Approach::ALL {
            let i = road.index();
            let u: f64 = self.roads[i].gen();
            if u >= self.model.p_road[i] {
                continue;
            }
            let r: f64 = self.routes.gen();
            let movement = if r < self.model.p_left {
                Movement::Left
            } else if r < self.model.p_left + self.model.p_straight {
                Movement::Straight
            } else {
                Movement::Right
            };
            let (lo, hi) = self.model.speed;
            let speed = if hi > lo {
                self.speeds.gen_range(lo..=hi)
            } else {
                lo
            };
            out.push(SpawnEvent {
                road,
                movement,
                speed,
            });
        }
        out
    }
}
