//! Episode execution: receding-horizon loop, scripted obstacles, exact
//! clearance checks and data accounting against the ground-truth radio maps.

use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comm::{bits_per_slot, CommParams, Sensor};
use crate::dynamics::{step_nonlinear, Control};
use crate::geometry::{angle_diff, ConvexPolytope, PlacedShape, Pose, Shape, Vec2};
use crate::planner::{
    mm_solve, ArcPath, CommMode, PlanProblem, PlanResult, Planner, PlannerConfig, PlannerError,
};
use crate::radio::{
    fit_distance_model, fit_multizone, generate_radio_map, segment_zones, ChannelModel,
    DistanceModel, FitSettings, GridSpec, MultiZoneFit, RadioError, RadioMapGrid, WallSegment,
};

/// Reported clearance when there is nothing to collide with.
pub const NO_OBSTACLE_CLEARANCE: f64 = 1e9;
/// Clearance at or below this counts as contact.
pub const CONTACT_TOL: f64 = 1e-9;
const BITS_PER_MEGABYTE: f64 = 8e6;
/// Arc length ahead of the current progress searched for the nearest path point.
const PROGRESS_WINDOW: f64 = 3.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error("planner failed at the first step: {0}")]
    PlannerFailure(PlannerError),
    #[error(transparent)]
    Config(PlannerError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub time: f64,
    pub pose: Pose,
}

/// A rigid obstacle moving along a piecewise-linear script.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub shape: Shape,
    pub script: Vec<Knot>,
}

impl Obstacle {
    pub fn fixed(shape: Shape, pose: Pose) -> Self {
        Self {
            shape,
            script: vec![Knot { time: 0.0, pose }],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.script.first() {
            Some(k) if k.time == 0.0 => {}
            _ => return Err("obstacle script must start at t = 0".into()),
        }
        if self.script.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err("obstacle script times must be strictly increasing".into());
        }
        if let Shape::Circle { radius } = self.shape {
            if !(radius > 0.0) {
                return Err("circle radius must be positive".into());
            }
        }
        Ok(())
    }

    fn segment(&self, t: f64) -> Option<(Knot, Knot)> {
        let i = self.script.partition_point(|k| k.time <= t);
        (i > 0 && i < self.script.len()).then(|| (self.script[i - 1], self.script[i]))
    }

    pub fn pose_at(&self, t: f64) -> Pose {
        match self.segment(t) {
            Some((a, b)) => {
                let s = (t - a.time) / (b.time - a.time);
                Pose::from_parts(
                    a.pose.position.lerp(b.pose.position, s),
                    a.pose.heading + angle_diff(b.pose.heading, a.pose.heading) * s,
                )
            }
            None if t < 0.0 => self.script[0].pose,
            None => self.script.last().unwrap().pose,
        }
    }

    /// Linear and angular velocity of the active script segment.
    pub fn velocity_at(&self, t: f64) -> (Vec2, f64) {
        match self.segment(t) {
            Some((a, b)) => {
                let dt = b.time - a.time;
                (
                    (b.pose.position - a.pose.position) / dt,
                    angle_diff(b.pose.heading, a.pose.heading) / dt,
                )
            }
            None => (Vec2::ZERO, 0.0),
        }
    }

    /// Constant-velocity extrapolation `dt` seconds past `t`.
    pub fn predict(&self, t: f64, dt: f64) -> Pose {
        let p = self.pose_at(t);
        let (v, w) = self.velocity_at(t);
        Pose::from_parts(p.position + v * dt, p.heading + w * dt)
    }

    pub fn placed_at(&self, t: f64) -> PlacedShape {
        self.shape.place(&self.pose_at(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: Vec2,
    pub max: Vec2,
}

impl Workspace {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub min_megabytes: f64,
    pub time_limit_seconds: f64,
}

/// A sensor as declared by a scenario: the generator parameters of its
/// ground truth and the zones handed to the multi-zone fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub position: Vec2,
    #[serde(default)]
    pub params: CommParams,
    /// Log-distance parameters fed to the ray-cast generator.
    pub truth: DistanceModel,
    /// Zones for the multi-zone fit; empty means segment the map automatically.
    #[serde(default)]
    pub zones: Vec<ConvexPolytope>,
    /// Pin the line-of-sight zone's gain to the generator's `rho0`.
    #[serde(default)]
    pub pin_los_beta: bool,
}

fn default_goal_tolerance() -> f64 {
    0.3
}

fn default_min_progress_speed() -> f64 {
    0.4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub workspace: Workspace,
    #[serde(default)]
    pub walls: Vec<WallSegment>,
    pub robot_body: ConvexPolytope,
    pub start: Pose,
    pub global_path: Vec<Pose>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub sensors: Vec<SensorSpec>,
    pub task: Task,
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
    #[serde(default)]
    pub seed: u64,
    pub radio_grid: GridSpec,
    /// Half-width (m) of the uniform per-seed offset applied to every obstacle script.
    #[serde(default)]
    pub obstacle_jitter: f64,
    /// The reference never advances along the path slower than this (m/s).
    #[serde(default = "default_min_progress_speed")]
    pub min_progress_speed: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if self.global_path.len() < 2 {
            return bad("global_path needs at least two waypoints".into());
        }
        for end in [self.global_path[0], *self.global_path.last().unwrap()] {
            if !self.workspace.contains(end.position) {
                return bad(format!(
                    "path endpoint {:?} outside the workspace",
                    end.position
                ));
            }
        }
        if !(self.task.min_megabytes >= 0.0) || !(self.task.time_limit_seconds > 0.0) {
            return bad("task needs min_megabytes >= 0 and a positive time limit".into());
        }
        if !(self.goal_tolerance >= 0.0) || !(self.obstacle_jitter >= 0.0) {
            return bad("goal_tolerance and obstacle_jitter must be non-negative".into());
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate()
                .map_err(|e| SimError::InvalidScenario(format!("obstacle {i}: {e}")))?;
        }
        for s in &self.sensors {
            s.params.validate().map_err(SimError::InvalidScenario)?;
        }
        let placed: Vec<_> = self.obstacles.iter().map(|o| o.placed_at(0.0)).collect();
        if exact_clearance(&self.start, &self.robot_body, &placed) <= CONTACT_TOL {
            return bad("start pose is in collision".into());
        }
        Ok(())
    }

    /// Copy with every obstacle script shifted by a seeded uniform offset.
    pub fn with_seed(&self, seed: u64) -> Scenario {
        let mut out = self.clone();
        out.seed = seed;
        if self.obstacle_jitter > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = self.obstacle_jitter;
            for o in &mut out.obstacles {
                let d = Vec2::new(rng.random_range(-j..=j), rng.random_range(-j..=j));
                for k in &mut o.script {
                    k.pose.position += d;
                }
            }
        }
        out
    }

    /// Generates the ground-truth maps and fits both channel models.
    pub fn prepare(&self) -> Result<PreparedScenario, SimError> {
        self.validate()?;
        let sensors = self
            .sensors
            .iter()
            .map(|s| PreparedSensor::build(s, &self.walls, &self.radio_grid))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PreparedScenario {
            scenario: self.clone(),
            sensors,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedSensor {
    pub spec: SensorSpec,
    pub map: RadioMapGrid,
    pub multizone: MultiZoneFit,
    pub distance: DistanceModel,
    pub distance_rmse_db: f64,
}

impl PreparedSensor {
    pub fn build(
        spec: &SensorSpec,
        walls: &[WallSegment],
        grid: &GridSpec,
    ) -> Result<Self, SimError> {
        let map = generate_radio_map(walls, spec.position, grid, &spec.truth)?;
        Self::from_map(spec, map)
    }

    pub fn from_map(spec: &SensorSpec, map: RadioMapGrid) -> Result<Self, SimError> {
        let settings = FitSettings {
            d_min: spec.truth.d_min,
            pinned_los_beta: spec.pin_los_beta.then_some(spec.truth.rho0),
            ..FitSettings::default()
        };
        let zones = if spec.zones.is_empty() {
            segment_zones(&map, 6.0, 20, &settings)?
        } else {
            spec.zones.clone()
        };
        let multizone = fit_multizone(&map, &zones, &settings)?;
        let (distance, distance_rmse_db) = fit_distance_model(&map, &settings);
        Ok(Self {
            spec: spec.clone(),
            map,
            multizone,
            distance,
            distance_rmse_db,
        })
    }

    /// The sensor as seen by a planner using `mode`.
    pub fn planner_sensor(&self, mode: CommMode, tau: f64) -> Option<Sensor> {
        let model = match mode {
            CommMode::Multizone => ChannelModel::MultiZone(self.multizone.model.clone()),
            CommMode::Distance => ChannelModel::Distance(self.distance),
            CommMode::None => return None,
        };
        Some(Sensor {
            position: self.spec.position,
            params: CommParams {
                slot: tau,
                ..self.spec.params
            },
            model,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedScenario {
    pub scenario: Scenario,
    pub sensors: Vec<PreparedSensor>,
}

impl PreparedScenario {
    /// Same maps and fits, obstacles re-jittered for `seed`.
    pub fn with_seed(&self, seed: u64) -> PreparedScenario {
        PreparedScenario {
            scenario: self.scenario.with_seed(seed),
            sensors: self.sensors.clone(),
        }
    }
}

/// Smallest distance between the footprint at `pose` and any obstacle.
pub fn exact_clearance(pose: &Pose, robot_body: &ConvexPolytope, obstacles: &[PlacedShape]) -> f64 {
    let footprint = robot_body.transform(pose);
    obstacles
        .iter()
        .map(|o| o.distance_from(&footprint).distance)
        .fold(NO_OBSTACLE_CLEARANCE, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub time: f64,
    pub pose: Pose,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub median: f64,
    pub p95: f64,
}

impl LatencyStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| s[((p * (s.len() - 1) as f64).round() as usize).min(s.len() - 1)];
        Self {
            median: q(0.5),
            p95: q(0.95),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scenario: String,
    pub trajectory: Vec<TimedPose>,
    pub controls: Vec<Control>,
    /// Bits harvested in each slot, one entry per sensor.
    pub per_step_bits: Vec<Vec<f64>>,
    pub total_megabytes: f64,
    pub navigation_time: f64,
    pub rdg_efficiency: f64,
    pub min_clearance: f64,
    pub collided: bool,
    pub reached_goal: bool,
    pub success: bool,
    /// Slots where the planner failed and the robot braked instead.
    pub planner_failures: usize,
    /// Wall-clock seconds per solve.
    pub planner_latency_stats: LatencyStats,
    pub mean_mm_iterations: f64,
}

/// Advances the reference along the path: nearest point ahead of the last
/// progress, but never slower than `min_speed`.
struct ProgressTracker {
    path: ArcPath,
    arc: Option<f64>,
}

impl ProgressTracker {
    fn advance(&mut self, p: Vec2, min_step: f64) -> f64 {
        let s = match self.arc {
            None => self.path.nearest(p, 0.0, PROGRESS_WINDOW),
            Some(last) => self
                .path
                .nearest(p, last, last + PROGRESS_WINDOW)
                .max(last + min_step),
        };
        let s = s.min(self.path.length());
        self.arc = Some(s);
        s
    }
}

pub fn run_episode(
    prepared: &PreparedScenario,
    config: &PlannerConfig,
) -> Result<EpisodeResult, SimError> {
    let sc = &prepared.scenario;
    sc.validate()?;
    let tau = config.tau;
    let horizon = config.horizon;
    let mut planner = Planner::new(config.clone()).map_err(SimError::Config)?;
    let sensors = planner_sensors(prepared, config);
    let truth_params: Vec<CommParams> = prepared
        .sensors
        .iter()
        .map(|s| CommParams {
            slot: tau,
            ..s.spec.params
        })
        .collect();
    let mut tracker = ProgressTracker {
        path: ArcPath::new(&sc.global_path).map_err(SimError::Config)?,
        arc: None,
    };
    let goal = tracker.path.end().position;

    let mut pose = sc.start;
    let mut previous = Control::ZERO;
    let mut trajectory = vec![TimedPose { time: 0.0, pose }];
    let mut controls = Vec::new();
    let mut per_step_bits = Vec::new();
    let mut latencies = Vec::new();
    let mut iterations = 0usize;
    let mut failures = 0usize;
    let initial: Vec<_> = sc.obstacles.iter().map(|o| o.placed_at(0.0)).collect();
    let mut min_clearance = exact_clearance(&pose, &sc.robot_body, &initial);
    let mut collided = min_clearance <= CONTACT_TOL;
    let mut reached_goal = false;
    let mut step = 0usize;

    loop {
        let t = step as f64 * tau;
        if pose.position.distance(goal) <= sc.goal_tolerance {
            reached_goal = true;
            break;
        }
        if t >= sc.task.time_limit_seconds - 1e-9 {
            break;
        }
        let s0 = tracker.advance(pose.position, sc.min_progress_speed * tau);
        let reference = tracker.path.window(s0, horizon, config.lookahead());
        let predicted = predicted_obstacles(sc, t, horizon, tau);
        let problem = PlanProblem {
            current: pose,
            previous_control: previous,
            reference: &reference,
            sensors: &sensors,
            obstacles: &predicted,
            robot_body: &sc.robot_body,
        };
        let started = Instant::now();
        let planned = planner.plan(&problem);
        latencies.push(started.elapsed().as_secs_f64());
        let u = match planned {
            Ok(plan) => {
                iterations += plan.mm_iterations;
                plan.controls[0]
            }
            Err(e) if step == 0 => return Err(SimError::PlannerFailure(e)),
            Err(e) => {
                log::warn!("planner failed at t = {t:.1} s ({e}); braking");
                failures += 1;
                config.limits.clamp(Control::ZERO, previous)
            }
        };

        per_step_bits.push(
            prepared
                .sensors
                .iter()
                .zip(&truth_params)
                .map(|(s, params)| bits_per_slot(s.map.interpolate_gain(pose.position), params))
                .collect::<Vec<f64>>(),
        );
        pose = step_nonlinear(&pose, &u, tau);
        previous = u;
        controls.push(u);
        step += 1;
        let t_next = step as f64 * tau;
        trajectory.push(TimedPose { time: t_next, pose });
        let placed: Vec<_> = sc.obstacles.iter().map(|o| o.placed_at(t_next)).collect();
        let clearance = exact_clearance(&pose, &sc.robot_body, &placed);
        min_clearance = min_clearance.min(clearance);
        collided |= clearance <= CONTACT_TOL;
    }

    let navigation_time = step as f64 * tau;
    let total_bits: f64 = per_step_bits.iter().flatten().sum();
    let total_megabytes = total_bits / BITS_PER_MEGABYTE;
    let rdg_efficiency = if navigation_time > 0.0 {
        total_megabytes / navigation_time
    } else {
        0.0
    };
    let success = total_megabytes >= sc.task.min_megabytes
        && reached_goal
        && !collided
        && navigation_time <= sc.task.time_limit_seconds;
    Ok(EpisodeResult {
        scenario: sc.name.clone(),
        trajectory,
        controls,
        per_step_bits,
        total_megabytes,
        navigation_time,
        rdg_efficiency,
        min_clearance,
        collided,
        reached_goal,
        success,
        planner_failures: failures,
        planner_latency_stats: LatencyStats::from_samples(&latencies),
        mean_mm_iterations: if step > 0 {
            iterations as f64 / step as f64
        } else {
            0.0
        },
    })
}

fn planner_sensors(prepared: &PreparedScenario, config: &PlannerConfig) -> Vec<Sensor> {
    prepared
        .sensors
        .iter()
        .filter_map(|s| s.planner_sensor(config.comm_mode, config.tau))
        .collect()
}

/// Obstacle shapes predicted at each step `0..=horizon` from time `t`.
fn predicted_obstacles(sc: &Scenario, t: f64, horizon: usize, tau: f64) -> Vec<Vec<PlacedShape>> {
    sc.obstacles
        .iter()
        .map(|o| {
            (0..=horizon)
                .map(|h| o.shape.place(&o.predict(t, h as f64 * tau)))
                .collect()
        })
        .collect()
}

/// Solves the planning problem the first slot of an episode would pose.
pub fn plan_at_start(prepared: &PreparedScenario, config: &PlannerConfig) -> Result<PlanResult, SimError> {
    let sc = &prepared.scenario;
    sc.validate()?;
    config.validate().map_err(SimError::Config)?;
    let path = ArcPath::new(&sc.global_path).map_err(SimError::Config)?;
    let s0 = path.nearest(sc.start.position, 0.0, PROGRESS_WINDOW);
    let reference = path.window(s0, config.horizon, config.lookahead());
    let sensors = planner_sensors(prepared, config);
    let predicted = predicted_obstacles(sc, 0.0, config.horizon, config.tau);
    let problem = PlanProblem {
        current: sc.start,
        previous_control: Control::ZERO,
        reference: &reference,
        sensors: &sensors,
        obstacles: &predicted,
        robot_body: &sc.robot_body,
    };
    mm_solve(&problem, config).map_err(SimError::PlannerFailure)
}

/// One episode of a suite.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub scenario: String,
    pub label: String,
    pub repeat: usize,
    pub seed: u64,
    pub result: Result<EpisodeResult, String>,
}

/// Means over the completed episodes of one (scenario, config) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub scenario: String,
    pub label: String,
    pub runs: usize,
    pub failed_runs: usize,
    pub rdg_efficiency: f64,
    pub navigation_time: f64,
    pub total_megabytes: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    /// Percent deltas against the first config on the same scenario.
    pub efficiency_delta_pct: Option<f64>,
    pub navigation_time_delta_pct: Option<f64>,
    pub throughput_delta_pct: Option<f64>,
}

impl SuiteRow {
    pub fn failed(&self) -> bool {
        self.failed_runs == self.runs
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteTable {
    pub rows: Vec<SuiteRow>,
    pub entries: Vec<SuiteEntry>,
}

/// `value` with an optional signed percent delta, e.g. `0.371 (+14.86%)`.
pub fn format_cell(value: f64, delta_pct: Option<f64>) -> String {
    match delta_pct {
        Some(d) if d.is_finite() => format!("{value:.3} ({d:+.2}%)"),
        _ => format!("{value:.3}"),
    }
}

fn percent_delta(value: f64, base: f64) -> Option<f64> {
    (base != 0.0 && base.is_finite() && value.is_finite()).then(|| 100.0 * (value - base) / base)
}

/// Runs every (scenario, config) pair `repeats` times; repeat `r` uses seed
/// `scenario.seed + r`. Rows keep input order.
pub fn evaluate_suite(
    scenarios: &[PreparedScenario],
    configs: &[(String, PlannerConfig)],
    repeats: usize,
) -> SuiteTable {
    let jobs: Vec<(usize, usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..configs.len()).flat_map(move |c| (0..repeats).map(move |r| (s, c, r))))
        .collect();
    let entries: Vec<SuiteEntry> = jobs
        .par_iter()
        .map(|&(s, c, r)| {
            let base = &scenarios[s];
            let seed = base.scenario.seed.wrapping_add(r as u64);
            let prepared = base.with_seed(seed);
            let result = run_episode(&prepared, &configs[c].1).map_err(|e| e.to_string());
            SuiteEntry {
                scenario: base.scenario.name.clone(),
                label: configs[c].0.clone(),
                repeat: r,
                seed,
                result,
            }
        })
        .collect();

    let mut rows = Vec::new();
    for (s, sc) in scenarios.iter().enumerate() {
        let first_row = rows.len();
        for (c, (label, _)) in configs.iter().enumerate() {
            let cell = &entries[(s * configs.len() + c) * repeats..][..repeats];
            let done: Vec<&EpisodeResult> =
                cell.iter().filter_map(|e| e.result.as_ref().ok()).collect();
            let mean = |f: &dyn Fn(&EpisodeResult) -> f64| {
                if done.is_empty() {
                    f64::NAN
                } else {
                    done.iter().map(|e| f(e)).sum::<f64>() / done.len() as f64
                }
            };
            let mut row = SuiteRow {
                scenario: sc.scenario.name.clone(),
                label: label.clone(),
                runs: repeats,
                failed_runs: repeats - done.len(),
                rdg_efficiency: mean(&|e| e.rdg_efficiency),
                navigation_time: mean(&|e| e.navigation_time),
                total_megabytes: mean(&|e| e.total_megabytes),
                success_rate: mean(&|e| f64::from(u8::from(e.success))),
                collision_rate: mean(&|e| f64::from(u8::from(e.collided))),
                efficiency_delta_pct: None,
                navigation_time_delta_pct: None,
                throughput_delta_pct: None,
            };
            if c > 0 {
                let base: &SuiteRow = &rows[first_row];
                row.efficiency_delta_pct = percent_delta(row.rdg_efficiency, base.rdg_efficiency);
                row.navigation_time_delta_pct =
                    percent_delta(row.navigation_time, base.navigation_time);
                row.throughput_delta_pct = percent_delta(row.total_megabytes, base.total_megabytes);
            }
            rows.push(row);
        }
    }
    SuiteTable { rows, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{make_baseline, BaselineKind};
    use crate::radio::GridSpec;
    use approx::assert_abs_diff_eq;

    fn straight_scenario(len: f64) -> Scenario {
        Scenario {
            name: "straight".into(),
            workspace: Workspace {
                min: Vec2::new(-2.0, -3.0),
                max: Vec2::new(len + 2.0, 3.0),
            },
            walls: vec![],
            robot_body: ConvexPolytope::centered_box(0.8, 0.5).unwrap(),
            start: Pose::new(0.0, 0.0, 0.0),
            global_path: vec![Pose::new(0.0, 0.0, 0.0), Pose::new(len, 0.0, 0.0)],
            obstacles: vec![],
            sensors: vec![SensorSpec {
                position: Vec2::new(len / 2.0, 2.0),
                params: CommParams::default(),
                truth: DistanceModel::new(1.6e-4, 2.0),
                zones: vec![ConvexPolytope::rectangle(
                    Vec2::new(-2.0, -3.0),
                    Vec2::new(len + 2.0, 3.0),
                )
                .unwrap()],
                pin_los_beta: false,
            }],
            task: Task {
                min_megabytes: 0.0,
                time_limit_seconds: 30.0,
            },
            goal_tolerance: 0.3,
            seed: 7,
            radio_grid: GridSpec {
                origin: Vec2::new(-2.0, -3.0),
                resolution: 0.25,
                width: ((len + 4.0) / 0.25) as usize,
                height: 24,
            },
            obstacle_jitter: 0.0,
            min_progress_speed: 0.4,
        }
    }

    #[test]
    fn script_interpolation_hits_knots() {
        let o = Obstacle {
            shape: Shape::Circle { radius: 0.3 },
            script: vec![
                Knot {
                    time: 0.0,
                    pose: Pose::new(0.0, 0.0, 0.0),
                },
                Knot {
                    time: 2.0,
                    pose: Pose::new(2.0, 1.0, 0.5),
                },
                Knot {
                    time: 3.0,
                    pose: Pose::new(2.0, 3.0, -0.5),
                },
            ],
        };
        for k in &o.script {
            assert_eq!(o.pose_at(k.time), k.pose);
        }
        assert_abs_diff_eq!(o.pose_at(1.0).position.x, 1.0);
        let (v, _) = o.velocity_at(1.0);
        assert_abs_diff_eq!(v.x, 1.0);
        assert_abs_diff_eq!(o.predict(1.0, 0.5).position.y, 0.75);
        assert_eq!(o.velocity_at(10.0).0, Vec2::ZERO);
    }

    #[test]
    fn clearance_examples() {
        let body = ConvexPolytope::centered_box(1.0, 1.0).unwrap();
        assert_eq!(
            exact_clearance(&Pose::default(), &body, &[]),
            NO_OBSTACLE_CLEARANCE
        );
        let touching = Shape::Polygon(body.clone()).place(&Pose::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(
            exact_clearance(&Pose::default(), &body, &[touching]),
            0.0,
            epsilon = 1e-12
        );
        let circle = Shape::Circle { radius: 0.5 }.place(&Pose::new(3.0, 0.0, 0.0));
        assert_abs_diff_eq!(
            exact_clearance(&Pose::default(), &body, &[circle]),
            2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn degenerate_task_succeeds_immediately() {
        let mut sc = straight_scenario(4.0);
        sc.global_path = vec![sc.start, sc.start];
        let r = run_episode(&sc.prepare().unwrap(), &PlannerConfig::default()).unwrap();
        assert!(r.success && r.reached_goal);
        assert_eq!(r.navigation_time, 0.0);
        assert_eq!(r.total_megabytes, 0.0);
    }

    #[test]
    fn straight_run_reaches_goal() {
        let sc = straight_scenario(6.0).prepare().unwrap();
        let cfg = make_baseline(BaselineKind::Rda, &PlannerConfig::default());
        let r = run_episode(&sc, &cfg).unwrap();
        assert!(r.reached_goal && !r.collided && r.success);
        assert!(r.navigation_time < 12.0, "{}", r.navigation_time);
        let total: f64 = r.per_step_bits.iter().flatten().sum();
        assert_eq!(r.total_megabytes, total / 8e6);
        assert_abs_diff_eq!(
            r.rdg_efficiency * r.navigation_time,
            r.total_megabytes,
            epsilon = 1e-12
        );
    }

    #[test]
    fn megabyte_bookkeeping() {
        // 1 bps/Hz over 0.1 MHz for 16 s
        let params = CommParams::default();
        let gain_for_snr_one = params.noise_power / params.transmit_power;
        let slots = 160;
        let bits: f64 = (0..slots)
            .map(|_| bits_per_slot(gain_for_snr_one, &params))
            .sum();
        assert_abs_diff_eq!(bits / 8e6, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn harvest_ignores_the_planner_model() {
        let sc = straight_scenario(6.0).prepare().unwrap();
        let p = Vec2::new(2.0, 0.3);
        let params = CommParams::default();
        let bits = |s: &PreparedSensor| bits_per_slot(s.map.interpolate_gain(p), &params);
        let a = bits(&sc.sensors[0]);
        let mut other = sc.clone();
        other.sensors[0].distance = DistanceModel::new(1e-9, 5.0);
        assert_eq!(a, bits(&other.sensors[0]));
    }

    #[test]
    fn suite_rows_and_determinism() {
        let sc = vec![straight_scenario(3.0).prepare().unwrap()];
        let base = PlannerConfig::default();
        let configs = vec![
            (
                "mpcom".to_string(),
                make_baseline(BaselineKind::Mpcom, &base),
            ),
            ("rda".to_string(), make_baseline(BaselineKind::Rda, &base)),
        ];
        let a = evaluate_suite(&sc, &configs, 1);
        let b = evaluate_suite(&sc, &configs, 1);
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 2);
        assert!(a.rows[0].efficiency_delta_pct.is_none());
        assert!(a.rows[1].efficiency_delta_pct.is_some());
        assert!(a.rows.iter().all(|r| r.collision_rate == 0.0));
        assert_eq!(format_cell(0.371, Some(14.8634)), "0.371 (+14.86%)");
        assert_eq!(format_cell(2.5, Some(-3.0)), "2.500 (-3.00%)");
    }
}
