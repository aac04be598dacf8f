//! Built-in desk-scale scenarios.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::comm::CommParams;
use crate::geometry::{ConvexPolytope, Pose, Shape, Vec2};
use crate::radio::{DistanceModel, GridSpec, WallSegment};
use crate::sim::{Knot, Obstacle, Scenario, SensorSpec, Task, Workspace};

/// 1 m gain of the built-in transmitters (about -38 dB).
pub const RHO0: f64 = 1.6e-4;
/// Power transmission of one wall (-20 dB).
pub const WALL_TRANSMISSION: f64 = 0.01;

/// Default robot footprint: 0.8 m long, 0.5 m wide.
pub fn robot_body() -> ConvexPolytope {
    ConvexPolytope::centered_box(0.8, 0.5).expect("valid box")
}

/// Poses through `points` with headings along the polyline.
pub fn tangent_path(points: &[Vec2]) -> Vec<Pose> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let d = if i + 1 < n {
                points[i + 1] - points[i]
            } else {
                points[i] - points[i - 1]
            };
            Pose::from_parts(points[i], d.y.atan2(d.x))
        })
        .collect()
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> ConvexPolytope {
    ConvexPolytope::rectangle(Vec2::new(x0, y0), Vec2::new(x1, y1)).expect("valid rectangle")
}

fn grid_over(min: Vec2, max: Vec2, resolution: f64) -> GridSpec {
    GridSpec {
        origin: min,
        resolution,
        width: ((max.x - min.x) / resolution).round() as usize,
        height: ((max.y - min.y) / resolution).round() as usize,
    }
}

fn wall(a: (f64, f64), b: (f64, f64)) -> WallSegment {
    WallSegment {
        a: Vec2::new(a.0, a.1),
        b: Vec2::new(b.0, b.1),
        transmission: WALL_TRANSMISSION,
    }
}

/// Static slabs of the given thickness covering an axis-aligned wall, cut
/// into pieces no longer than `WALL_PIECE` so that each has a small
/// circumradius.
fn wall_obstacles(w: &WallSegment, thickness: f64) -> Vec<Obstacle> {
    let h = 0.5 * thickness;
    let pieces = (w.a.distance(w.b) / WALL_PIECE).ceil().max(1.0) as usize;
    (0..pieces)
        .map(|i| {
            let a = w.a + (w.b - w.a) * (i as f64 / pieces as f64);
            let b = w.a + (w.b - w.a) * ((i + 1) as f64 / pieces as f64);
            let (lo, hi) = (
                Vec2::new(a.x.min(b.x) - h, a.y.min(b.y) - h),
                Vec2::new(a.x.max(b.x) + h, a.y.max(b.y) + h),
            );
            let c = (lo + hi) * 0.5;
            let body = rect(lo.x - c.x, lo.y - c.y, hi.x - c.x, hi.y - c.y);
            Obstacle::fixed(Shape::Polygon(body), Pose::from_parts(c, 0.0))
        })
        .collect()
}

const WALL_PIECE: f64 = 1.0;

const ARC_RADIUS: f64 = 5.0;
/// Radial offsets of the posts from the path.
const INNER_POST_INSET: f64 = 1.2;
const OUTER_POST_INSET: f64 = 0.8;

fn arc_point(angle: f64, radius: f64) -> Vec2 {
    Vec2::new(radius * angle.cos(), radius * angle.sin())
}

/// Open field with a half-circle path around an interior sensor and eight
/// circular posts flanking the path alternately inside and outside. With
/// `moving`, the outer posts drift slowly along the path.
pub fn wide_open(moving: bool) -> Scenario {
    let n = 48;
    let points: Vec<Vec2> = (0..=n)
        .map(|i| arc_point(-FRAC_PI_2 + PI * i as f64 / n as f64, ARC_RADIUS))
        .collect();
    let mut obstacles = Vec::new();
    for k in 0..8 {
        let a = (-70.0 + 20.0 * k as f64).to_radians();
        let r = if k % 2 == 0 {
            ARC_RADIUS - INNER_POST_INSET
        } else {
            ARC_RADIUS + OUTER_POST_INSET
        };
        let p = arc_point(a, r);
        let shape = Shape::Circle { radius: 0.3 };
        if moving && k % 2 == 1 {
            let q = arc_point(a + 0.1, r);
            obstacles.push(Obstacle {
                shape,
                script: vec![
                    Knot {
                        time: 0.0,
                        pose: Pose::from_parts(p, 0.0),
                    },
                    Knot {
                        time: 20.0,
                        pose: Pose::from_parts(q, 0.0),
                    },
                ],
            });
        } else {
            obstacles.push(Obstacle::fixed(shape, Pose::from_parts(p, 0.0)));
        }
    }
    let (min, max) = (Vec2::new(-3.0, -7.0), Vec2::new(7.0, 7.0));
    Scenario {
        name: if moving {
            "wide_open_moving"
        } else {
            "wide_open"
        }
        .into(),
        workspace: Workspace { min, max },
        walls: vec![],
        robot_body: robot_body(),
        start: tangent_path(&points)[0],
        global_path: tangent_path(&points),
        obstacles,
        sensors: vec![SensorSpec {
            position: Vec2::new(2.5, 0.0),
            params: CommParams::default(),
            truth: DistanceModel::new(RHO0, 2.0),
            zones: vec![rect(min.x, min.y, max.x, max.y)],
            pin_los_beta: false,
        }],
        task: Task {
            min_megabytes: 0.0,
            time_limit_seconds: 40.0,
        },
        goal_tolerance: 0.3,
        seed: 11,
        radio_grid: grid_over(min, max, 0.2),
        obstacle_jitter: 0.05,
        min_progress_speed: 0.4,
    }
}

/// Regularizer weight at which the corridor exhibits the detour toward the
/// window. Below about 5 the pull of the shadowed sensor is weaker than
/// the tracking cost.
pub const CORRIDOR_RHO: f64 = 6.0;

const HALL_TOP: f64 = 3.5;
const HALL_BOTTOM: f64 = -1.5;
/// Side room `[5, 9] x [3.5, 7.5]` with an open window onto the hallway at `x in [6, 8]`.
const WINDOW: (f64, f64) = (6.0, 8.0);
const SIDE_ROOM: (f64, f64, f64) = (5.0, 9.0, 7.5);

/// Walls of the corridor layout: a hallway along x with a side room above it.
fn corridor_walls() -> Vec<WallSegment> {
    let (top, bottom) = (HALL_TOP, HALL_BOTTOM);
    let (x0, x1, y1) = SIDE_ROOM;
    vec![
        wall((0.0, bottom), (14.0, bottom)),
        wall((0.0, top), (WINDOW.0, top)),
        wall((WINDOW.1, top), (14.0, top)),
        wall((x0, top), (x0, y1)),
        wall((x1, top), (x1, y1)),
        wall((x0, y1), (x1, y1)),
        wall((0.0, bottom), (0.0, top)),
        wall((14.0, bottom), (14.0, top)),
    ]
}

fn polygon(points: &[(f64, f64)]) -> ConvexPolytope {
    let v: Vec<Vec2> = points.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
    ConvexPolytope::from_vertices(&v).expect("convex zone")
}

/// Hallway run past the window of a side room holding the sensor. Only the
/// cone seen through the window is in line of sight; the rest of the hallway
/// is shadowed by the room walls. The window passes radio but not the robot.
pub fn corridor() -> Scenario {
    let walls = corridor_walls();
    let window = WallSegment {
        a: Vec2::new(WINDOW.0, HALL_TOP),
        b: Vec2::new(WINDOW.1, HALL_TOP),
        transmission: 1.0,
    };
    let obstacles = walls
        .iter()
        .chain([&window])
        .flat_map(|w| wall_obstacles(w, 0.2))
        .collect();
    let (min, max) = (Vec2::new(-0.6, HALL_BOTTOM - 0.6), Vec2::new(14.6, SIDE_ROOM.2 + 0.6));
    let sensor = Vec2::new(7.0, 5.5);
    // Edges of the line-of-sight cone through the window, at the bottom of the grid.
    let spread = |x: f64| x + (x - sensor.x) * (HALL_TOP - min.y) / (sensor.y - HALL_TOP);
    let (cone_lo, cone_hi) = (spread(WINDOW.0), spread(WINDOW.1));
    let (x0, x1, _) = SIDE_ROOM;
    let zones = vec![
        rect(x0, HALL_TOP, x1, max.y),
        polygon(&[(cone_lo, min.y), (cone_hi, min.y), (WINDOW.1, HALL_TOP), (WINDOW.0, HALL_TOP)]),
        polygon(&[(min.x, min.y), (cone_lo, min.y), (WINDOW.0, HALL_TOP), (min.x, HALL_TOP)]),
        polygon(&[(cone_hi, min.y), (max.x, min.y), (max.x, HALL_TOP), (WINDOW.1, HALL_TOP)]),
        rect(min.x, HALL_TOP, x0, max.y),
        rect(x1, HALL_TOP, max.x, max.y),
    ];
    let points = [Vec2::new(1.5, 0.0), Vec2::new(12.5, 0.0)];
    Scenario {
        name: "corridor".into(),
        workspace: Workspace { min, max },
        walls,
        robot_body: robot_body(),
        start: tangent_path(&points)[0],
        global_path: tangent_path(&points),
        obstacles,
        sensors: vec![SensorSpec {
            position: sensor,
            params: CommParams::default(),
            truth: DistanceModel::new(RHO0, 2.0),
            zones,
            pin_los_beta: true,
        }],
        task: Task {
            min_megabytes: 0.2,
            time_limit_seconds: 30.0,
        },
        goal_tolerance: 0.3,
        seed: 23,
        radio_grid: grid_over(min, max, 0.2),
        obstacle_jitter: 0.0,
        min_progress_speed: 0.4,
    }
}

/// Walls of a closed inner room `[5, 9] x [4, 7]` with a door at `x in [6, 7]`.
fn room_walls() -> Vec<WallSegment> {
    vec![
        wall((5.0, 4.0), (6.0, 4.0)),
        wall((7.0, 4.0), (9.0, 4.0)),
        wall((5.0, 7.0), (9.0, 7.0)),
        wall((5.0, 4.0), (5.0, 7.0)),
        wall((9.0, 4.0), (9.0, 7.0)),
    ]
}

/// A path passing below an inner room that holds the sensor.
pub fn room() -> Scenario {
    let walls = room_walls();
    let obstacles = walls.iter().flat_map(|w| wall_obstacles(w, 0.2)).collect();
    let (min, max) = (Vec2::new(0.0, 0.0), Vec2::new(11.0, 8.0));
    let points = [Vec2::new(1.0, 2.0), Vec2::new(10.0, 2.0)];
    Scenario {
        name: "room".into(),
        workspace: Workspace { min, max },
        walls,
        robot_body: robot_body(),
        start: tangent_path(&points)[0],
        global_path: tangent_path(&points),
        obstacles,
        sensors: vec![SensorSpec {
            position: Vec2::new(7.5, 5.5),
            params: CommParams::default(),
            truth: DistanceModel::new(RHO0, 2.0),
            zones: vec![
                rect(5.0, 4.0, 9.0, 7.0),
                rect(5.5, 0.0, 7.5, 4.0),
                rect(min.x, min.y, 5.5, max.y),
                rect(7.5, min.y, max.x, 4.0),
                rect(5.0, 4.0, max.x, max.y),
            ],
            pin_los_beta: true,
        }],
        task: Task {
            min_megabytes: 0.0,
            time_limit_seconds: 30.0,
        },
        goal_tolerance: 0.3,
        seed: 31,
        radio_grid: grid_over(min, max, 0.2),
        obstacle_jitter: 0.0,
        min_progress_speed: 0.4,
    }
}

/// Every built-in scenario, by name.
pub fn builtin() -> Vec<Scenario> {
    vec![wide_open(false), wide_open(true), corridor(), room()]
}

pub fn by_name(name: &str) -> Option<Scenario> {
    builtin().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate_and_prepare() {
        for s in builtin() {
            let p = s.prepare().unwrap_or_else(|e| panic!("{}: {e}", s.name));
            assert_eq!(p.sensors.len(), 1);
        }
    }

    #[test]
    fn tangent_headings_follow_segments() {
        let p = tangent_path(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
        ]);
        assert!((p[0].heading - FRAC_PI_2).abs() < 1e-12);
        assert!(p[1].heading.abs() < 1e-12);
        assert!(p[2].heading.abs() < 1e-12);
    }
}
