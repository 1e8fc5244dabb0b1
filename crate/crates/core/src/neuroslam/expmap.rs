use super::SlamError;
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Angle wrapped into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    /// World-frame displacement; headings add modulo 2π.
    pub fn plus(self, d: Pose) -> Pose {
        Pose::new(self.x + d.x, self.y + d.y, (self.theta + d.theta).rem_euclid(TAU))
    }

    pub fn minus(self, d: Pose) -> Pose {
        Pose::new(self.x - d.x, self.y - d.y, (self.theta - d.theta).rem_euclid(TAU))
    }

    pub fn distance(self, o: Pose) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Odometry,
    LoopClosure,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::Odometry => "odometry",
            EdgeKind::LoopClosure => "loop_closure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub id: usize,
    pub pose: Pose,
    /// Pose-cell packet centroid when the experience was created.
    pub cell: [f64; 3],
    pub template: usize,
}

/// `to` is expected at `from.pose + delta` (world frame).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceEdge {
    pub from: usize,
    pub to: usize,
    pub delta: Pose,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceMap {
    pub origin: Pose,
    pub nodes: Vec<Experience>,
    pub edges: Vec<ExperienceEdge>,
    pub current: Option<usize>,
}

/// What the front end reports for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub cell: [f64; 3],
    pub template: usize,
    /// Odometry accumulated since the current experience was entered.
    pub delta: Pose,
    /// Experience linked to a matched template, when that is a loop closure.
    pub loop_match: Option<usize>,
    /// Template or pose-cell state differs enough to warrant a new experience.
    pub novel: bool,
}

impl ExperienceMap {
    pub fn new(origin: Pose) -> Self {
        Self { origin, nodes: Vec::new(), edges: Vec::new(), current: None }
    }

    pub fn current_pose(&self) -> Option<Pose> {
        self.current.map(|c| self.nodes[c].pose)
    }

    pub fn loop_closures(&self) -> usize {
        self.edges.iter().filter(|e| e.kind == EdgeKind::LoopClosure).count()
    }

    /// Sum over edges of squared disagreement between stored poses and the
    /// edge measurement; heading differences are wrapped.
    pub fn residual(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                let (a, b) = (self.nodes[e.from].pose, self.nodes[e.to].pose);
                let dx = b.x - a.x - e.delta.x;
                let dy = b.y - a.y - e.delta.y;
                let dt = wrap_angle(b.theta - a.theta - e.delta.theta);
                dx * dx + dy * dy + dt * dt
            })
            .sum()
    }

    fn push_node(&mut self, pose: Pose, cell: [f64; 3], template: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Experience { id, pose, cell, template });
        id
    }
}

/// Adds experiences and links. The first observation creates node 0 at the
/// origin. A loop match adds a loop-closure edge carrying the accumulated
/// odometry and makes the matched experience current; otherwise a novel
/// observation creates a node joined to the current one by an odometry edge.
pub fn expmap_update(map: &ExperienceMap, obs: &Observation) -> Result<ExperienceMap, SlamError> {
    if !obs.delta.is_finite() {
        return Err(SlamError::Config("non-finite odometry".into()));
    }
    let mut out = map.clone();
    let Some(cur) = map.current else {
        let id = out.push_node(map.origin, obs.cell, obs.template);
        out.current = Some(id);
        return Ok(out);
    };
    if let Some(m) = obs.loop_match {
        if m >= map.nodes.len() {
            return Err(SlamError::DanglingExperience(m));
        }
        if m != cur {
            out.edges.push(ExperienceEdge { from: cur, to: m, delta: obs.delta, kind: EdgeKind::LoopClosure });
            out.current = Some(m);
        }
        return Ok(out);
    }
    if obs.novel {
        let pose = map.nodes[cur].pose.plus(obs.delta);
        let id = out.push_node(pose, obs.cell, obs.template);
        out.edges.push(ExperienceEdge { from: cur, to: id, delta: obs.delta, kind: EdgeKind::Odometry });
        out.current = Some(id);
    }
    Ok(out)
}

/// Jacobi relaxation: every node except node 0 (the anchor) moves half-way
/// toward the mean of the poses its edges predict for it.
pub fn expmap_relax(map: &ExperienceMap, iterations: usize) -> ExperienceMap {
    let mut out = map.clone();
    let n = out.nodes.len();
    for _ in 0..iterations {
        let mut acc = vec![(0.0, 0.0, 0.0, 0usize); n];
        for e in &out.edges {
            let (a, b) = (out.nodes[e.from].pose, out.nodes[e.to].pose);
            let to = &mut acc[e.to];
            to.0 += a.x + e.delta.x - b.x;
            to.1 += a.y + e.delta.y - b.y;
            to.2 += wrap_angle(a.theta + e.delta.theta - b.theta);
            to.3 += 1;
            let from = &mut acc[e.from];
            from.0 += b.x - e.delta.x - a.x;
            from.1 += b.y - e.delta.y - a.y;
            from.2 += wrap_angle(b.theta - e.delta.theta - a.theta);
            from.3 += 1;
        }
        for (node, (sx, sy, st, k)) in out.nodes.iter_mut().zip(acc).skip(1) {
            if k == 0 {
                continue;
            }
            let k = k as f64;
            node.pose.x += 0.5 * sx / k;
            node.pose.y += 0.5 * sy / k;
            node.pose.theta = (node.pose.theta + 0.5 * st / k).rem_euclid(TAU);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(delta: Pose, novel: bool, loop_match: Option<usize>) -> Observation {
        Observation { cell: [0.0; 3], template: 0, delta, loop_match, novel }
    }

    fn chain(steps: &[Pose]) -> ExperienceMap {
        let mut m = expmap_update(&ExperienceMap::new(Pose::default()), &obs(Pose::default(), true, None)).unwrap();
        for &d in steps {
            m = expmap_update(&m, &obs(d, true, None)).unwrap();
        }
        m
    }

    #[test]
    fn first_observation_single_node() {
        let m = chain(&[]);
        assert_eq!((m.nodes.len(), m.edges.len(), m.current), (1, 0, Some(0)));
    }

    #[test]
    fn linear_motion_builds_chain() {
        let m = chain(&[Pose::new(1.0, 0.0, 0.0); 6]);
        assert_eq!((m.nodes.len(), m.edges.len()), (7, 6));
        assert!(m.edges.iter().all(|e| e.kind == EdgeKind::Odometry && e.to == e.from + 1));
        assert!((m.nodes[6].pose.x - 6.0).abs() < 1e-12);
        let same = expmap_update(&m, &obs(Pose::new(0.1, 0.0, 0.0), false, None)).unwrap();
        assert_eq!(same, m);
    }

    #[test]
    fn revisiting_start_adds_one_loop_edge() {
        let m = chain(&[Pose::new(1.0, 0.0, 0.0), Pose::new(0.0, 1.0, 0.0), Pose::new(-1.0, 0.0, 0.0)]);
        let closed = expmap_update(&m, &obs(Pose::new(0.0, -1.0, 0.0), false, Some(0))).unwrap();
        assert_eq!(closed.loop_closures(), 1);
        assert_eq!(closed.current, Some(0));
        assert!(matches!(expmap_update(&m, &obs(Pose::default(), false, Some(9))), Err(SlamError::DanglingExperience(9))));
        let self_match = expmap_update(&m, &obs(Pose::default(), false, Some(3))).unwrap();
        assert_eq!(self_match, m);
    }

    #[test]
    fn relax_fixed_points() {
        let m = chain(&[Pose::new(1.0, 0.5, 0.1); 4]);
        assert!(m.residual() < 1e-20);
        assert_eq!(expmap_relax(&m, 0), m);
        let r = expmap_relax(&m, 10);
        for (a, b) in r.nodes.iter().zip(&m.nodes) {
            assert!(a.pose.distance(b.pose) < 1e-12);
        }
    }

    /// Square of side 5 walked in 20 unit steps with a small rotational bias
    /// on every step, closed back onto node 0.
    fn drifting_square() -> ExperienceMap {
        let mut steps = Vec::new();
        let mut theta: f64 = 0.0;
        for side in 0..4 {
            for k in 0..5 {
                if k == 0 && side > 0 {
                    theta += PI / 2.0;
                }
                theta += 0.02;
                steps.push(Pose::new(theta.cos(), theta.sin(), 0.0));
            }
        }
        let last = steps.pop().unwrap();
        let m = chain(&steps);
        expmap_update(&m, &obs(last, false, Some(0))).unwrap()
    }

    fn loop_gap(m: &ExperienceMap) -> f64 {
        let e = m.edges.iter().find(|e| e.kind == EdgeKind::LoopClosure).unwrap();
        m.nodes[e.from].pose.plus(e.delta).distance(m.nodes[e.to].pose)
    }

    #[test]
    fn relaxation_closes_square_gap() {
        let m = drifting_square();
        let before = loop_gap(&m);
        let after = loop_gap(&expmap_relax(&m, 50));
        assert!(before > 0.5, "{before}");
        assert!(after < 0.5 * before, "{before} -> {after}");
    }

    #[test]
    fn relaxation_residual_non_increasing() {
        let mut m = drifting_square();
        let mut prev = m.residual();
        for _ in 0..100 {
            m = expmap_relax(&m, 1);
            let r = m.residual();
            assert!(r <= prev + 1e-12, "{prev} -> {r}");
            prev = r;
        }
        assert_eq!(m.nodes[0].pose, Pose::default());
    }
}
