//! SVG figures: radio-map heatmaps, trajectories and speed profiles.

use mpcom::geometry::{PlacedShape, Pose, Vec2};
use mpcom::radio::{RadioMapGrid, WallSegment};
use mpcom::sim::{EpisodeResult, Scenario};
use svg::node::element::{
    Circle, Definitions, Group, Line, LinearGradient, Polygon, Polyline, Rectangle, Stop, Text,
};
use svg::{Document, Node};

/// Fixed heatmap color range, so figures from different runs compare.
pub const DB_RANGE: (f64, f64) = (-120.0, -20.0);

const PX_PER_M: f64 = 40.0;
const MARGIN: f64 = 20.0;
const LEGEND_WIDTH: f64 = 80.0;

fn db_color(db: f64) -> String {
    let t = ((db - DB_RANGE.0) / (DB_RANGE.1 - DB_RANGE.0)).clamp(0.0, 1.0);
    format!("#{:x}", colorous::VIRIDIS.eval_continuous(t))
}

/// World-to-pixel mapping with the y axis pointing up.
struct Frame {
    min: Vec2,
    max: Vec2,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.min.x) * PX_PER_M
    }

    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.max.y - y) * PX_PER_M
    }

    fn point(&self, p: Vec2) -> String {
        format!("{:.2},{:.2}", self.x(p.x), self.y(p.y))
    }

    fn plot_width(&self) -> f64 {
        (self.max.x - self.min.x) * PX_PER_M
    }

    fn plot_height(&self) -> f64 {
        (self.max.y - self.min.y) * PX_PER_M
    }

    fn document(&self, legend: bool) -> Document {
        let extra = if legend { LEGEND_WIDTH } else { 0.0 };
        let w = self.plot_width() + 2.0 * MARGIN + extra;
        let h = self.plot_height() + 2.0 * MARGIN;
        Document::new()
            .set("xmlns", "http://www.w3.org/2000/svg")
            .set("width", format!("{w:.0}"))
            .set("height", format!("{h:.0}"))
            .set("viewBox", format!("0 0 {w:.0} {h:.0}"))
            .set("font-family", "sans-serif")
            .set("font-size", 11)
    }
}

fn points(frame: &Frame, pts: impl IntoIterator<Item = Vec2>) -> String {
    pts.into_iter()
        .map(|p| frame.point(p))
        .collect::<Vec<_>>()
        .join(" ")
}

fn heat_cells(frame: &Frame, map: &RadioMapGrid) -> Group {
    let g = &map.grid;
    let side = g.resolution * PX_PER_M;
    let mut group = Group::new().set("id", "radio-map").set("shape-rendering", "crispEdges");
    for j in 0..g.height {
        for i in 0..g.width {
            let c = g.cell_center(i, j);
            group = group.add(
                Rectangle::new()
                    .set("x", format!("{:.2}", frame.x(c.x) - side / 2.0))
                    .set("y", format!("{:.2}", frame.y(c.y) - side / 2.0))
                    .set("width", format!("{side:.2}"))
                    .set("height", format!("{side:.2}"))
                    .set("fill", db_color(map.gain_db(i, j))),
            );
        }
    }
    group
}

fn legend(frame: &Frame) -> (Definitions, Group) {
    let mut gradient = LinearGradient::new()
        .set("id", "db-ramp")
        .set("x1", 0)
        .set("y1", 1)
        .set("x2", 0)
        .set("y2", 0);
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        gradient = gradient.add(
            Stop::new()
                .set("offset", format!("{t:.1}"))
                .set("stop-color", db_color(DB_RANGE.0 + t * (DB_RANGE.1 - DB_RANGE.0))),
        );
    }
    let x0 = MARGIN + frame.plot_width() + 15.0;
    let (top, height) = (MARGIN, frame.plot_height());
    let mut group = Group::new().set("id", "legend").add(
        Rectangle::new()
            .set("x", x0)
            .set("y", top)
            .set("width", 14)
            .set("height", format!("{height:.2}"))
            .set("fill", "url(#db-ramp)")
            .set("stroke", "black"),
    );
    let mut db = DB_RANGE.0;
    while db <= DB_RANGE.1 + 1e-9 {
        let y = top + height * (DB_RANGE.1 - db) / (DB_RANGE.1 - DB_RANGE.0);
        group = group.add(
            Text::new(format!("{db:.0}"))
                .set("x", x0 + 18.0)
                .set("y", format!("{:.2}", y + 4.0)),
        );
        db += 20.0;
    }
    group = group.add(
        Text::new("dB")
            .set("x", x0)
            .set("y", top + height + 14.0),
    );
    (Definitions::new().add(gradient), group)
}

fn walls(frame: &Frame, walls: &[WallSegment]) -> Group {
    walls.iter().fold(Group::new().set("id", "walls"), |g, w| {
        g.add(
            Line::new()
                .set("x1", format!("{:.2}", frame.x(w.a.x)))
                .set("y1", format!("{:.2}", frame.y(w.a.y)))
                .set("x2", format!("{:.2}", frame.x(w.b.x)))
                .set("y2", format!("{:.2}", frame.y(w.b.y)))
                .set("stroke", "white")
                .set("stroke-width", 3),
        )
    })
}

fn sensor_marker(frame: &Frame, p: Vec2) -> Circle {
    Circle::new()
        .set("cx", format!("{:.2}", frame.x(p.x)))
        .set("cy", format!("{:.2}", frame.y(p.y)))
        .set("r", 6)
        .set("fill", "red")
        .set("stroke", "black")
}

/// Heatmap of one radio map in dB, with walls and the sensor.
pub fn heatmap_svg(map: &RadioMapGrid, wall_segments: &[WallSegment]) -> String {
    let (min, max) = map.grid.extent();
    let frame = Frame { min, max };
    let (defs, legend) = legend(&frame);
    frame
        .document(true)
        .add(defs)
        .add(heat_cells(&frame, map))
        .add(walls(&frame, wall_segments))
        .add(sensor_marker(&frame, map.sensor))
        .add(legend)
        .to_string()
}

fn obstacle(frame: &Frame, shape: &PlacedShape) -> svg::node::element::Element {
    let mut element: svg::node::element::Element = match shape {
        PlacedShape::Polygon { polytope, .. } => Polygon::new()
            .set("points", points(frame, polytope.vertices().iter().copied()))
            .into(),
        PlacedShape::Circle { center, radius } => Circle::new()
            .set("cx", format!("{:.2}", frame.x(center.x)))
            .set("cy", format!("{:.2}", frame.y(center.y)))
            .set("r", format!("{:.2}", radius * PX_PER_M))
            .into(),
    };
    element.assign("fill", "#555555");
    element.assign("fill-opacity", 0.8);
    element
}

/// Reference path, driven path and obstacles over the first sensor's map.
pub fn trajectory_svg(scenario: &Scenario, underlay: Option<&RadioMapGrid>, result: &EpisodeResult) -> String {
    let frame = Frame {
        min: scenario.workspace.min,
        max: scenario.workspace.max,
    };
    let mut doc = frame.document(underlay.is_some());
    if let Some(map) = underlay {
        let (defs, legend) = legend(&frame);
        doc = doc.add(defs).add(heat_cells(&frame, map)).add(legend);
    }
    doc = doc.add(walls(&frame, &scenario.walls));
    let obstacles = scenario
        .obstacles
        .iter()
        .fold(Group::new().set("id", "obstacles"), |g, o| {
            g.add(obstacle(&frame, &o.placed_at(0.0)))
        });
    let reference = Polyline::new()
        .set("id", "reference")
        .set(
            "points",
            points(&frame, scenario.global_path.iter().map(|p| p.position)),
        )
        .set("fill", "none")
        .set("stroke", "white")
        .set("stroke-width", 1.5)
        .set("stroke-dasharray", "6 4");
    let driven = Polyline::new()
        .set("id", "trajectory")
        .set(
            "points",
            points(&frame, result.trajectory.iter().map(|t| t.pose.position)),
        )
        .set("fill", "none")
        .set("stroke", "orange")
        .set("stroke-width", 2.5);
    let mut sensors = Group::new().set("id", "sensors");
    for s in &scenario.sensors {
        sensors = sensors.add(sensor_marker(&frame, s.position));
    }
    let end: &Pose = &result.trajectory.last().expect("trajectory has the start pose").pose;
    let body = scenario.robot_body.transform(end);
    doc.add(obstacles)
        .add(reference)
        .add(driven)
        .add(
            Polygon::new()
                .set("id", "robot")
                .set("points", points(&frame, body.vertices().iter().copied()))
                .set("fill", "orange")
                .set("stroke", "black"),
        )
        .add(sensors)
        .to_string()
}

/// Commanded linear speed over time.
pub fn speed_svg(result: &EpisodeResult, tau: f64) -> String {
    let (w, h) = (560.0, 260.0);
    let (left, right, top, bottom) = (50.0, 15.0, 15.0, 35.0);
    let t_max = (result.controls.len() as f64 * tau).max(tau);
    let (v_lo, v_hi) = (-0.2, 1.0);
    let px = |t: f64| left + (w - left - right) * t / t_max;
    let py = |v: f64| top + (h - top - bottom) * (v_hi - v) / (v_hi - v_lo);

    let mut axes = Group::new()
        .set("id", "axes")
        .set("stroke", "black")
        .add(Line::new().set("x1", left).set("y1", py(v_lo)).set("x2", left).set("y2", py(v_hi)))
        .add(
            Line::new()
                .set("x1", left)
                .set("y1", format!("{:.2}", py(0.0)))
                .set("x2", w - right)
                .set("y2", format!("{:.2}", py(0.0))),
        );
    let mut labels = Group::new().set("id", "labels");
    for k in 0..=6 {
        let v = v_lo + 0.2 * k as f64;
        labels = labels.add(
            Text::new(format!("{v:.1}"))
                .set("x", 10)
                .set("y", format!("{:.2}", py(v) + 4.0)),
        );
    }
    let step = [1.0, 2.0, 5.0, 10.0, 20.0]
        .into_iter()
        .find(|s| t_max / s <= 8.0)
        .unwrap_or(50.0);
    let mut t = 0.0;
    while t <= t_max + 1e-9 {
        axes = axes.add(
            Line::new()
                .set("x1", format!("{:.2}", px(t)))
                .set("y1", py(v_lo))
                .set("x2", format!("{:.2}", px(t)))
                .set("y2", py(v_lo) + 4.0),
        );
        labels = labels.add(
            Text::new(format!("{t:.0}"))
                .set("x", format!("{:.2}", px(t) - 4.0))
                .set("y", py(v_lo) + 16.0),
        );
        t += step;
    }
    labels = labels
        .add(Text::new("time (s)").set("x", w / 2.0).set("y", h - 4.0))
        .add(Text::new("v (m/s)").set("x", 4).set("y", 11));
    let line: Vec<String> = result
        .controls
        .iter()
        .enumerate()
        .flat_map(|(k, u)| {
            let y = py(u.v);
            [
                format!("{:.2},{y:.2}", px(k as f64 * tau)),
                format!("{:.2},{y:.2}", px((k + 1) as f64 * tau)),
            ]
        })
        .collect();
    Document::new()
        .set("xmlns", "http://www.w3.org/2000/svg")
        .set("width", w)
        .set("height", h)
        .set("viewBox", format!("0 0 {w} {h}"))
        .set("font-family", "sans-serif")
        .set("font-size", 11)
        .add(axes)
        .add(labels)
        .add(
            Polyline::new()
                .set("id", "speed")
                .set("points", line.join(" "))
                .set("fill", "none")
                .set("stroke", "steelblue")
                .set("stroke-width", 1.5),
        )
        .to_string()
}
