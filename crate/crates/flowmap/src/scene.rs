//! Scene description: free-space regions, walls and the periodic routes the
//! simulated agents follow.

use flowmap_core::Position;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Wall {
    /// Whether the open segment `p`–`q` crosses this wall.
    pub fn blocks(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
            (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        }
        let d1 = orient(self.a, self.b, p);
        let d2 = orient(self.a, self.b, q);
        let d3 = orient(p, q, self.a);
        let d4 = orient(p, q, self.b);
        d1 * d2 < 0.0 && d3 * d4 < 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRoute {
    pub waypoints: Vec<Position>,
    /// Meters per second.
    pub speed: f64,
    /// Length of one activity cycle, seconds.
    pub period: f64,
    /// Fraction of each cycle the agent is walking.
    pub duty: f64,
    /// Offset of the cycle start, seconds.
    pub phase: f64,
    /// Standard deviation of the isotropic position noise, meters.
    pub noise: f64,
}

impl AgentRoute {
    pub fn validate(&self) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::Usage("a route needs at least two waypoints".into()));
        }
        if self.waypoints.iter().any(|p| !p.is_finite()) {
            return Err(Error::Usage("route waypoints must be finite".into()));
        }
        if self.length() <= 0.0 {
            return Err(Error::Usage("route has zero length".into()));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::Usage("route speed must be positive".into()));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::Usage("route period must be positive".into()));
        }
        if !(self.duty > 0.0 && self.duty <= 1.0) {
            return Err(Error::Usage("route duty must lie in (0, 1]".into()));
        }
        if !self.phase.is_finite() || !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Usage(
                "route phase and noise must be finite, noise non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    /// Whether the agent is walking at `t`.
    pub fn is_active(&self, t: f64) -> bool {
        (t - self.phase).rem_euclid(self.period) < self.duty * self.period
    }

    /// Position and heading after walking `s` meters along the polyline,
    /// wrapping back to the first waypoint at the end.
    pub fn pose_at_arc(&self, s: f64) -> (Position, f64) {
        let mut s = s.rem_euclid(self.length());
        for w in self.waypoints.windows(2) {
            let seg = w[0].distance(&w[1]);
            if seg == 0.0 {
                continue;
            }
            if s < seg {
                let f = s / seg;
                let p = Position::new(
                    w[0].x + f * (w[1].x - w[0].x),
                    w[0].y + f * (w[1].y - w[0].y),
                    w[0].z + f * (w[1].z - w[0].z),
                );
                return (p, w[0].heading_to(&w[1]));
            }
            s -= seg;
        }
        let n = self.waypoints.len();
        let (a, b) = (self.waypoints[n - 2], self.waypoints[n - 1]);
        (b, a.heading_to(&b))
    }

    /// Noiseless pose at `t`, or `None` outside the duty window.
    pub fn pose_at(&self, t: f64) -> Option<(Position, f64)> {
        if !self.is_active(t) {
            return None;
        }
        let walked = (t - self.phase).rem_euclid(self.period) * self.speed;
        Some(self.pose_at_arc(walked))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub id: String,
    /// Seconds.
    pub duration: f64,
    /// Tick length, seconds.
    pub dt: f64,
    pub seed: u64,
    /// Free space where navigational nodes may be placed.
    pub regions: Vec<Rect>,
    pub walls: Vec<Wall>,
    pub routes: Vec<AgentRoute>,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Usage("scene duration must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Usage("scene tick must be positive".into()));
        }
        for r in &self.regions {
            if !(r.max[0] > r.min[0] && r.max[1] > r.min[1]) {
                return Err(Error::Usage("regions must have positive extent".into()));
            }
        }
        self.routes.iter().try_for_each(AgentRoute::validate)
    }

    pub fn line_of_sight(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        !self.walls.iter().any(|w| w.blocks(p, q))
    }

    pub fn in_free_space(&self, x: f64, y: f64) -> bool {
        self.regions.iter().any(|r| r.contains(x, y))
    }

    /// A central workspace joined to a long hallway, walked by six agents on
    /// cycles of 150, 300 and 600 seconds.
    pub fn two_region(id: impl Into<String>, seed: u64) -> Self {
        let p = |x, y| Position::new(x, y, 0.0);
        let wall = |a: [f64; 2], b: [f64; 2]| Wall { a, b };
        let route = |waypoints: Vec<Position>, speed, period, duty, phase| AgentRoute {
            waypoints,
            speed,
            period,
            duty,
            phase,
            noise: 0.05,
        };
        Self {
            id: id.into(),
            duration: 1200.0,
            dt: 0.5,
            seed,
            regions: vec![
                Rect {
                    min: [0.0, 0.0],
                    max: [12.0, 10.0],
                },
                Rect {
                    min: [12.0, 3.5],
                    max: [30.0, 6.5],
                },
            ],
            walls: vec![
                wall([0.0, 0.0], [12.0, 0.0]),
                wall([12.0, 0.0], [12.0, 3.5]),
                wall([12.0, 3.5], [30.0, 3.5]),
                wall([30.0, 3.5], [30.0, 6.5]),
                wall([30.0, 6.5], [12.0, 6.5]),
                wall([12.0, 6.5], [12.0, 10.0]),
                wall([12.0, 10.0], [0.0, 10.0]),
                wall([0.0, 10.0], [0.0, 0.0]),
                // Partition inside the workspace.
                wall([4.0, 3.0], [4.0, 7.0]),
            ],
            routes: vec![
                route(vec![p(1.0, 1.0), p(11.0, 1.0), p(11.0, 9.0)], 1.2, 150.0, 0.5, 0.0),
                route(
                    vec![p(2.0, 8.5), p(8.0, 5.5), p(13.0, 5.5), p(29.0, 5.5)],
                    1.0,
                    300.0,
                    0.5,
                    20.0,
                ),
                route(vec![p(29.0, 4.5), p(13.0, 4.5), p(8.0, 2.5)], 1.1, 600.0, 0.5, 100.0),
                route(vec![p(2.0, 2.0), p(2.0, 8.0)], 0.9, 150.0, 0.4, 40.0),
                route(vec![p(6.0, 9.0), p(6.0, 1.0)], 1.0, 300.0, 0.3, 60.0),
                route(vec![p(10.5, 8.5), p(5.0, 8.5), p(5.0, 2.0)], 1.3, 600.0, 0.4, 250.0),
            ],
        }
    }
}
