//! Synthetic detections from route-following agents, and loop-closure style
//! topology events for the navigational graph.

use flowmap_core::{NavGraph, Orientation, Position, TopologyChange, TopologyEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::SceneConfig;

/// One detection of one agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub agent: u32,
    pub position: Position,
    pub theta: Orientation,
}

/// Every active agent is detected at every tick in `[0, duration)`. Headings come from the
/// noiseless motion, positions get isotropic Gaussian noise.
pub fn generate_scene(cfg: &SceneConfig) -> Result<Vec<Observation>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for k in 0u64.. {
        let t = k as f64 * cfg.dt;
        if t >= cfg.duration {
            break;
        }
        for (agent, route) in cfg.routes.iter().enumerate() {
            let Some((p, heading)) = route.pose_at(t) else { continue };
            let position = if route.noise > 0.0 {
                let n = Normal::new(0.0, route.noise).map_err(|e| Error::Usage(e.to_string()))?;
                Position::new(p.x + n.sample(&mut rng), p.y + n.sample(&mut rng), p.z)
            } else {
                p
            };
            out.push(Observation {
                t,
                agent: agent as u32,
                position,
                theta: Orientation::new(heading)?,
            });
        }
    }
    Ok(out)
}

/// Derives `n` scenes from a template: each gets its own seed, and every
/// route's phase and speed are jittered.
pub fn generate_dataset(n: usize, template: &SceneConfig, master_seed: u64) -> Result<Vec<SceneConfig>> {
    if n == 0 {
        return Err(Error::Usage("at least one scene is required".into()));
    }
    template.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(master_seed);
    let mut scenes = Vec::with_capacity(n);
    for i in 0..n {
        let seed: u64 = master.random();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cfg = template.clone();
        cfg.id = format!("{}-{i:02}", template.id);
        cfg.seed = seed;
        for route in &mut cfg.routes {
            route.phase += rng.random_range(0.0..0.2) * route.period;
            route.speed *= rng.random_range(0.8..1.2);
        }
        scenes.push(cfg);
    }
    Ok(scenes)
}

/// Each node independently, with probability `density`, is either nudged by
/// at most 0.5 m or removed at a random time inside `window`.
pub fn inject_topology_events(
    seed: u64,
    graph: &NavGraph,
    density: f64,
    window: (f64, f64),
) -> Result<Vec<TopologyEvent>> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::Usage("event density must lie in [0, 1]".into()));
    }
    if !(window.0.is_finite() && window.1.is_finite() && window.0 <= window.1) {
        return Err(Error::Usage("event window must be a finite, ordered interval".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    if density == 0.0 {
        return Ok(events);
    }
    for node in graph.nodes() {
        if !rng.random_bool(density) {
            continue;
        }
        let t = if window.0 < window.1 {
            rng.random_range(window.0..window.1)
        } else {
            window.0
        };
        let change = if rng.random_bool(0.5) {
            let r = 0.5 * rng.random::<f64>().sqrt();
            let a = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let p = node.position;
            TopologyChange::Reposition(Position::new(p.x + r * a.cos(), p.y + r * a.sin(), p.z))
        } else {
            TopologyChange::Remove
        };
        events.push(TopologyEvent {
            t,
            node: node.id,
            change,
        });
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.node.cmp(&b.node)));
    Ok(events)
}
