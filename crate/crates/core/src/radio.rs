//! Synthetic radio maps, the multi-zone pathloss model and its fitting.
//!
//! Ground-truth maps come from a 2D ray-cast generator: log-distance pathloss
//! attenuated by every wall the direct sensor-to-cell segment crosses. The
//! planner never sees these maps directly, only the models fitted to them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConvexPolytope, Vec2};

/// Near-field clamp distance in meters.
pub const DEFAULT_D_MIN: f64 = 0.5;
pub const DEFAULT_BETA_RANGE: (f64, f64) = (1e-12, 1.0);
pub const LOS_ALPHA_RANGE: (f64, f64) = (2.0, 5.0);
pub const NLOS_ALPHA_RANGE: (f64, f64) = (0.0, 8.0);
pub const ALPHA_STEP: f64 = 0.01;
const MIN_ZONE_CELLS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point ({x:.3}, {y:.3}) lies outside all zones")]
    OutsideAllZones { x: f64, y: f64 },
    #[error("zone {zone} contains {cells} cell centers, need at least {MIN_ZONE_CELLS}")]
    EmptyZone { zone: usize, cells: usize },
}

/// Straight wall that multiplies the gain of every crossing ray by `transmission`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallSegment {
    pub a: Vec2,
    pub b: Vec2,
    pub transmission: f64,
}

impl WallSegment {
    pub fn new(a: Vec2, b: Vec2, transmission: f64) -> Result<Self, RadioError> {
        let w = Self { a, b, transmission };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), RadioError> {
        if self.a.distance(self.b) <= 0.0 {
            return Err(RadioError::InvalidParameter(
                "wall endpoints coincide".into(),
            ));
        }
        if !(self.transmission > 0.0 && self.transmission <= 1.0) {
            return Err(RadioError::InvalidParameter(format!(
                "wall transmission {} outside (0, 1]",
                self.transmission
            )));
        }
        Ok(())
    }

    /// True when the open segment `p -> q` properly crosses this wall.
    /// Touching an endpoint or running collinear does not count.
    pub fn crosses(&self, p: Vec2, q: Vec2) -> bool {
        let w = self.b - self.a;
        let o1 = w.cross(p - self.a);
        let o2 = w.cross(q - self.a);
        let s = q - p;
        let o3 = s.cross(self.a - p);
        let o4 = s.cross(self.b - p);
        o1 * o2 < 0.0 && o3 * o4 < 0.0
    }
}

/// Raster placement shared by maps and the generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Lower-left corner of cell (0, 0).
    pub origin: Vec2,
    /// Cell edge length in meters.
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), RadioError> {
        if self.width == 0 || self.height == 0 {
            return Err(RadioError::InvalidGrid(format!(
                "grid is {}x{} cells",
                self.width, self.height
            )));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(RadioError::InvalidGrid(format!(
                "resolution {} must be positive",
                self.resolution
            )));
        }
        Ok(())
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        self.origin
            + Vec2::new(
                (i as f64 + 0.5) * self.resolution,
                (j as f64 + 0.5) * self.resolution,
            )
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    /// Row-major cell centers: index `j * width + i`.
    pub fn centers(&self) -> impl Iterator<Item = Vec2> + '_ {
        (0..self.height).flat_map(move |j| (0..self.width).map(move |i| self.cell_center(i, j)))
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        (i < self.width && j < self.height).then_some((i, j))
    }

    pub fn extent(&self) -> (Vec2, Vec2) {
        (
            self.origin,
            self.origin
                + Vec2::new(
                    self.width as f64 * self.resolution,
                    self.height as f64 * self.resolution,
                ),
        )
    }
}

/// Rasterized linear channel gain for one sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RadioMapFile", into = "RadioMapFile")]
pub struct RadioMapGrid {
    pub grid: GridSpec,
    pub sensor: Vec2,
    /// Row-major linear gains, all finite and strictly positive.
    pub gains: Vec<f64>,
}

/// On-disk form: gains in dB with six decimals.
#[derive(Serialize, Deserialize)]
struct RadioMapFile {
    origin: Vec2,
    resolution: f64,
    width: usize,
    height: usize,
    sensor: Vec2,
    gains_db: Vec<f64>,
}

impl TryFrom<RadioMapFile> for RadioMapGrid {
    type Error = RadioError;
    fn try_from(f: RadioMapFile) -> Result<Self, Self::Error> {
        let grid = GridSpec {
            origin: f.origin,
            resolution: f.resolution,
            width: f.width,
            height: f.height,
        };
        let gains = f.gains_db.iter().map(|db| from_db(*db)).collect();
        RadioMapGrid::new(grid, f.sensor, gains)
    }
}

impl From<RadioMapGrid> for RadioMapFile {
    fn from(m: RadioMapGrid) -> Self {
        RadioMapFile {
            origin: m.grid.origin,
            resolution: m.grid.resolution,
            width: m.grid.width,
            height: m.grid.height,
            sensor: m.sensor,
            gains_db: m
                .gains
                .iter()
                .map(|g| (to_db(*g) * 1e6).round() / 1e6)
                .collect(),
        }
    }
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl RadioMapGrid {
    pub fn new(grid: GridSpec, sensor: Vec2, gains: Vec<f64>) -> Result<Self, RadioError> {
        grid.validate()?;
        if gains.len() != grid.cell_count() {
            return Err(RadioError::InvalidGrid(format!(
                "{} gains for a {}x{} grid",
                gains.len(),
                grid.width,
                grid.height
            )));
        }
        if let Some(bad) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(RadioError::InvalidGrid(format!(
                "gain {bad} is not finite and positive"
            )));
        }
        Ok(Self {
            grid,
            sensor,
            gains,
        })
    }

    pub fn gain(&self, i: usize, j: usize) -> f64 {
        self.gains[j * self.grid.width + i]
    }

    pub fn gain_db(&self, i: usize, j: usize) -> f64 {
        to_db(self.gain(i, j))
    }

    /// Bilinear interpolation of dB values between cell centers, clamped at the border.
    pub fn interpolate_db(&self, p: Vec2) -> f64 {
        let g = &self.grid;
        let fx = ((p.x - g.origin.x) / g.resolution - 0.5).clamp(0.0, (g.width - 1) as f64);
        let fy = ((p.y - g.origin.y) / g.resolution - 0.5).clamp(0.0, (g.height - 1) as f64);
        let i0 = (fx.floor() as usize).min(g.width.saturating_sub(2));
        let j0 = (fy.floor() as usize).min(g.height.saturating_sub(2));
        let i1 = (i0 + 1).min(g.width - 1);
        let j1 = (j0 + 1).min(g.height - 1);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let a = self.gain_db(i0, j0) * (1.0 - tx) + self.gain_db(i1, j0) * tx;
        let b = self.gain_db(i0, j1) * (1.0 - tx) + self.gain_db(i1, j1) * tx;
        a * (1.0 - ty) + b * ty
    }

    pub fn interpolate_gain(&self, p: Vec2) -> f64 {
        from_db(self.interpolate_db(p))
    }

    /// `(cell center, gain in dB)` in row-major order.
    pub fn samples_db(&self) -> impl Iterator<Item = (Vec2, f64)> + '_ {
        self.grid
            .centers()
            .zip(&self.gains)
            .map(|(c, g)| (c, to_db(*g)))
    }
}

/// Single-exponent log-distance model `rho0 * max(d, d_min)^-lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceModel {
    pub rho0: f64,
    pub lambda: f64,
    #[serde(default = "default_d_min")]
    pub d_min: f64,
}

fn default_d_min() -> f64 {
    DEFAULT_D_MIN
}

impl DistanceModel {
    pub fn new(rho0: f64, lambda: f64) -> Self {
        Self {
            rho0,
            lambda,
            d_min: DEFAULT_D_MIN,
        }
    }

    pub fn validate(&self) -> Result<(), RadioError> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(RadioError::InvalidParameter(format!(
                "rho0 {} must be > 0",
                self.rho0
            )));
        }
        if !(self.d_min > 0.0) {
            return Err(RadioError::InvalidParameter(format!(
                "d_min {} must be > 0",
                self.d_min
            )));
        }
        if !self.lambda.is_finite() {
            return Err(RadioError::InvalidParameter("lambda must be finite".into()));
        }
        Ok(())
    }
}

/// Direct-link gain.
pub fn eval_los(model: &DistanceModel, robot: Vec2, sensor: Vec2) -> f64 {
    model.rho0 * robot.distance(sensor).max(model.d_min).powf(-model.lambda)
}

/// Piecewise pathloss model: zone `l` contributes `beta_l * d^-alpha_l`.
///
/// Zone 0 is the line-of-sight zone. Overlaps resolve to the lowest index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiZoneModel {
    pub zones: Vec<ConvexPolytope>,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sensor: Vec2,
    #[serde(default = "default_d_min")]
    pub d_min: f64,
}

impl MultiZoneModel {
    pub fn validate(&self) -> Result<(), RadioError> {
        let l = self.zones.len();
        if l == 0 || self.beta.len() != l || self.alpha.len() != l {
            return Err(RadioError::InvalidParameter(format!(
                "{} zones, {} betas, {} alphas",
                l,
                self.beta.len(),
                self.alpha.len()
            )));
        }
        if self.beta.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(RadioError::InvalidParameter(
                "zone gains must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn zone_index(&self, p: Vec2) -> Option<usize> {
        self.zones.iter().position(|z| z.contains(p))
    }

    /// Gain at `robot` using the given zone's parameters, regardless of membership.
    pub fn eval_in_zone(&self, zone: usize, robot: Vec2) -> f64 {
        self.beta[zone]
            * robot
                .distance(self.sensor)
                .max(self.d_min)
                .powf(-self.alpha[zone])
    }
}

pub fn eval_multizone(model: &MultiZoneModel, robot: Vec2) -> Result<f64, RadioError> {
    let zone = model.zone_index(robot).ok_or(RadioError::OutsideAllZones {
        x: robot.x,
        y: robot.y,
    })?;
    Ok(model.eval_in_zone(zone, robot))
}

/// The channel model a planner believes in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    MultiZone(MultiZoneModel),
    Distance(DistanceModel),
}

/// Pathloss parameters active at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZoneParams {
    pub zone: usize,
    pub beta: f64,
    pub alpha: f64,
}

impl ChannelModel {
    pub fn d_min(&self) -> f64 {
        match self {
            ChannelModel::MultiZone(m) => m.d_min,
            ChannelModel::Distance(m) => m.d_min,
        }
    }

    pub fn zone_params(&self, p: Vec2) -> Option<ZoneParams> {
        match self {
            ChannelModel::MultiZone(m) => m.zone_index(p).map(|zone| ZoneParams {
                zone,
                beta: m.beta[zone],
                alpha: m.alpha[zone],
            }),
            ChannelModel::Distance(m) => Some(ZoneParams {
                zone: 0,
                beta: m.rho0,
                alpha: m.lambda,
            }),
        }
    }

    pub fn zone(&self, index: usize) -> Option<&ConvexPolytope> {
        match self {
            ChannelModel::MultiZone(m) => m.zones.get(index),
            ChannelModel::Distance(_) => None,
        }
    }

    pub fn gain(&self, robot: Vec2, sensor: Vec2) -> Result<f64, RadioError> {
        match self {
            ChannelModel::MultiZone(m) => eval_multizone(m, robot),
            ChannelModel::Distance(m) => Ok(eval_los(m, robot, sensor)),
        }
    }
}

/// Ray-cast ground truth: log-distance gain times the transmission of every
/// wall properly crossed by the sensor-to-cell segment.
pub fn generate_radio_map(
    walls: &[WallSegment],
    sensor: Vec2,
    grid: &GridSpec,
    truth: &DistanceModel,
) -> Result<RadioMapGrid, RadioError> {
    grid.validate()?;
    truth.validate()?;
    if !(2.0..=5.0).contains(&truth.lambda) {
        return Err(RadioError::InvalidParameter(format!(
            "lambda {} outside [2, 5]",
            truth.lambda
        )));
    }
    for w in walls {
        w.validate()?;
    }
    let gains = grid
        .centers()
        .map(|c| {
            let blocked: f64 = walls
                .iter()
                .filter(|w| w.crosses(sensor, c))
                .map(|w| w.transmission)
                .product();
            eval_los(truth, c, sensor) * blocked
        })
        .collect();
    RadioMapGrid::new(*grid, sensor, gains)
}

/// Fitting bounds shared by the zone fits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub d_min: f64,
    pub beta_range: (f64, f64),
    pub los_alpha_range: (f64, f64),
    pub nlos_alpha_range: (f64, f64),
    /// When set, zone 0's gain is pinned to this 1 m pathloss.
    pub pinned_los_beta: Option<f64>,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            d_min: DEFAULT_D_MIN,
            beta_range: DEFAULT_BETA_RANGE,
            los_alpha_range: LOS_ALPHA_RANGE,
            nlos_alpha_range: NLOS_ALPHA_RANGE,
            pinned_los_beta: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneFit {
    pub beta: f64,
    pub alpha: f64,
    pub rmse_db: f64,
}

/// Log-domain samples: `x = 10 log10 max(d, d_min)`, `y = gain in dB`.
struct LogSamples {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl LogSamples {
    fn collect<'a>(
        samples: impl Iterator<Item = (Vec2, f64)> + 'a,
        sensor: Vec2,
        d_min: f64,
    ) -> Self {
        let (x, y) = samples
            .map(|(c, db)| (to_db(c.distance(sensor).max(d_min)), db))
            .unzip();
        Self { x, y }
    }

    fn len(&self) -> usize {
        self.x.len()
    }

    /// Best `10 log10 beta` for a fixed exponent, and the resulting mean squared error.
    fn profile(&self, alpha: f64, beta_db: (f64, f64), pinned: Option<f64>) -> (f64, f64) {
        let n = self.len() as f64;
        let b = match pinned {
            Some(b) => b,
            None => {
                let mean = self
                    .x
                    .iter()
                    .zip(&self.y)
                    .map(|(x, y)| y + alpha * x)
                    .sum::<f64>()
                    / n;
                mean.clamp(beta_db.0, beta_db.1)
            }
        };
        let mse = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(x, y)| {
                let r = y - (b - alpha * x);
                r * r
            })
            .sum::<f64>()
            / n;
        (b, mse)
    }

    /// Grid search over the exponent in `ALPHA_STEP` increments, then golden-section
    /// refinement within the neighbouring grid cells. The profiled objective is convex
    /// in the exponent, so the refinement stays in the right basin.
    fn fit(
        &self,
        alpha_range: (f64, f64),
        beta_range: (f64, f64),
        pinned_beta: Option<f64>,
    ) -> ZoneFit {
        let beta_db = (to_db(beta_range.0), to_db(beta_range.1));
        let pinned = pinned_beta.map(|b| to_db(b.clamp(beta_range.0, beta_range.1)));
        let (lo, hi) = alpha_range;
        let steps = ((hi - lo) / ALPHA_STEP).round().max(0.0) as usize;
        let alpha_at = |i: usize| {
            if steps == 0 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / steps as f64
            }
        };
        let mut best = (0usize, f64::INFINITY);
        for i in 0..=steps {
            let (_, mse) = self.profile(alpha_at(i), beta_db, pinned);
            if mse < best.1 {
                best = (i, mse);
            }
        }
        let mut alpha = alpha_at(best.0);
        let mut mse = best.1;
        if steps > 0 {
            let mut a = alpha_at(best.0.saturating_sub(1));
            let mut b = alpha_at((best.0 + 1).min(steps));
            let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
            let f = |t: f64| self.profile(t, beta_db, pinned).1;
            let mut c = b - inv_phi * (b - a);
            let mut d = a + inv_phi * (b - a);
            let (mut fc, mut fd) = (f(c), f(d));
            for _ in 0..60 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - inv_phi * (b - a);
                    fc = f(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + inv_phi * (b - a);
                    fd = f(d);
                }
            }
            let t = 0.5 * (a + b);
            let ft = f(t);
            if ft < mse {
                alpha = t;
                mse = ft;
            }
        }
        let (b, mse_final) = self.profile(alpha, beta_db, pinned);
        debug_assert!((mse_final - mse).abs() <= 1e-9 * (1.0 + mse));
        ZoneFit {
            beta: from_db(b),
            alpha,
            rmse_db: mse_final.max(0.0).sqrt(),
        }
    }
}

fn fit_zone_indexed(
    map: &RadioMapGrid,
    zone: &ConvexPolytope,
    index: usize,
    alpha_range: (f64, f64),
    beta_range: (f64, f64),
    pinned_beta: Option<f64>,
    d_min: f64,
) -> Result<ZoneFit, RadioError> {
    let samples = LogSamples::collect(
        map.samples_db().filter(|(c, _)| zone.contains(*c)),
        map.sensor,
        d_min,
    );
    if samples.len() < MIN_ZONE_CELLS {
        return Err(RadioError::EmptyZone {
            zone: index,
            cells: samples.len(),
        });
    }
    Ok(samples.fit(alpha_range, beta_range, pinned_beta))
}

/// Least-squares fit (in dB) of `beta * d^-alpha` over the cells inside `zone`.
pub fn fit_zone(
    map: &RadioMapGrid,
    zone: &ConvexPolytope,
    alpha_range: (f64, f64),
    settings: &FitSettings,
) -> Result<ZoneFit, RadioError> {
    fit_zone_indexed(
        map,
        zone,
        0,
        alpha_range,
        settings.beta_range,
        None,
        settings.d_min,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiZoneFit {
    pub model: MultiZoneModel,
    pub zone_fits: Vec<ZoneFit>,
    /// RMSE over every cell covered by some zone, using the lowest-index zone.
    pub rmse_db: f64,
}

/// Fits each zone independently; zone 0 is the line-of-sight zone.
pub fn fit_multizone(
    map: &RadioMapGrid,
    zones: &[ConvexPolytope],
    settings: &FitSettings,
) -> Result<MultiZoneFit, RadioError> {
    if zones.is_empty() {
        return Err(RadioError::InvalidParameter("no zones to fit".into()));
    }
    let zone_fits = zones
        .iter()
        .enumerate()
        .map(|(l, z)| {
            if l == 0 {
                fit_zone_indexed(
                    map,
                    z,
                    0,
                    settings.los_alpha_range,
                    settings.beta_range,
                    settings.pinned_los_beta,
                    settings.d_min,
                )
            } else {
                fit_zone_indexed(
                    map,
                    z,
                    l,
                    settings.nlos_alpha_range,
                    settings.beta_range,
                    None,
                    settings.d_min,
                )
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let model = MultiZoneModel {
        zones: zones.to_vec(),
        beta: zone_fits.iter().map(|f| f.beta).collect(),
        alpha: zone_fits.iter().map(|f| f.alpha).collect(),
        sensor: map.sensor,
        d_min: settings.d_min,
    };
    let rmse_db = model_rmse_db(map, &ChannelModel::MultiZone(model.clone()));
    Ok(MultiZoneFit {
        model,
        zone_fits,
        rmse_db,
    })
}

/// Single log-distance fit over the whole map, exponent in `[2, 5]`.
pub fn fit_distance_model(map: &RadioMapGrid, settings: &FitSettings) -> (DistanceModel, f64) {
    let samples = LogSamples::collect(map.samples_db(), map.sensor, settings.d_min);
    let fit = samples.fit(settings.los_alpha_range, settings.beta_range, None);
    (
        DistanceModel {
            rho0: fit.beta,
            lambda: fit.alpha,
            d_min: settings.d_min,
        },
        fit.rmse_db,
    )
}

/// RMSE in dB over the cells where the model is defined.
pub fn model_rmse_db(map: &RadioMapGrid, model: &ChannelModel) -> f64 {
    let (sum, n) = map
        .samples_db()
        .filter_map(|(c, db)| {
            model
                .gain(c, map.sensor)
                .ok()
                .map(|g| (db - to_db(g)).powi(2))
        })
        .fold((0.0, 0usize), |(s, n), r| (s + r, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Splits the map into rectangular zones by banding the residual of the best
/// single distance-model fit.
///
/// Residuals are rounded to multiples of `level_width_db`, equal bands are
/// flood-filled over 4-neighbours, and each surviving region becomes its
/// bounding rectangle. The sensor's region comes first, then the rest by size.
pub fn segment_zones(
    map: &RadioMapGrid,
    level_width_db: f64,
    min_region_cells: usize,
    settings: &FitSettings,
) -> Result<Vec<ConvexPolytope>, RadioError> {
    if !(level_width_db > 0.0) {
        return Err(RadioError::InvalidParameter(
            "level width must be > 0".into(),
        ));
    }
    let (model, _) = fit_distance_model(map, settings);
    let g = &map.grid;
    let bands: Vec<i64> = map
        .samples_db()
        .map(|(c, db)| {
            ((db - to_db(eval_los(&model, c, map.sensor))) / level_width_db).round() as i64
        })
        .collect();

    let mut label = vec![usize::MAX; g.cell_count()];
    // (cell count, bounding box in cell indices, first cell)
    let mut regions: Vec<(usize, (usize, usize, usize, usize), usize)> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..g.cell_count() {
        if label[start] != usize::MAX {
            continue;
        }
        let id = regions.len();
        let band = bands[start];
        label[start] = id;
        stack.push(start);
        let (mut count, mut bb) = (0usize, (usize::MAX, usize::MAX, 0usize, 0usize));
        while let Some(idx) = stack.pop() {
            let (i, j) = (idx % g.width, idx / g.width);
            count += 1;
            bb = (bb.0.min(i), bb.1.min(j), bb.2.max(i), bb.3.max(j));
            let mut visit = |ni: usize, nj: usize| {
                let n = nj * g.width + ni;
                if label[n] == usize::MAX && bands[n] == band {
                    label[n] = id;
                    stack.push(n);
                }
            };
            if i > 0 {
                visit(i - 1, j);
            }
            if i + 1 < g.width {
                visit(i + 1, j);
            }
            if j > 0 {
                visit(i, j - 1);
            }
            if j + 1 < g.height {
                visit(i, j + 1);
            }
        }
        regions.push((count, bb, start));
    }

    let sensor_region = g.cell_of(map.sensor).map(|(i, j)| label[j * g.width + i]);
    let mut kept: Vec<usize> = (0..regions.len())
        .filter(|&r| regions[r].0 >= min_region_cells)
        .collect();
    kept.sort_by(|&a, &b| {
        let key = |r: usize| {
            (
                Some(r) != sensor_region,
                std::cmp::Reverse(regions[r].0),
                regions[r].2,
            )
        };
        key(a).cmp(&key(b))
    });
    kept.iter()
        .map(|&r| {
            let (i0, j0, i1, j1) = regions[r].1;
            let lo = g.origin + Vec2::new(i0 as f64 * g.resolution, j0 as f64 * g.resolution);
            let hi = g.origin
                + Vec2::new(
                    (i1 + 1) as f64 * g.resolution,
                    (j1 + 1) as f64 * g.resolution,
                );
            ConvexPolytope::rectangle(lo, hi)
                .map_err(|e| RadioError::InvalidGrid(format!("zone rectangle: {e}")))
        })
        .collect()
}
