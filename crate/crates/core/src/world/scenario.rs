//! Scenario documents: schema, map decoding and validation.
//!
//! Scenarios are TOML. The static map is either inline run-length rows or a
//! referenced portable graymap; see `docs/scenario-format.md` for the
//! field-by-field layout.

use std::collections::{BTreeSet, VecDeque};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec2};
use crate::grid::{GridGeometry, OccupancyGrid};
use crate::world::region::Region;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian {
    pub id: String,
    pub identity: String,
    #[serde(default = "default_ped_radius")]
    pub radius: f64,
    #[serde(default)]
    pub vulnerable: bool,
    /// `[t, x, y]` waypoints with strictly increasing `t`.
    pub trajectory: Vec<[f64; 3]>,
}

fn default_ped_radius() -> f64 {
    0.3
}

impl Pedestrian {
    /// Linear interpolation along the annotated trajectory, clamped to its ends.
    pub fn position_at(&self, t: f64) -> Vec2 {
        let tr = &self.trajectory;
        let first = tr[0];
        if t <= first[0] {
            return Vec2::new(first[1], first[2]);
        }
        let last = tr[tr.len() - 1];
        if t >= last[0] {
            return Vec2::new(last[1], last[2]);
        }
        let k = tr.partition_point(|w| w[0] <= t);
        let (a, b) = (tr[k - 1], tr[k]);
        if t == a[0] {
            return Vec2::new(a[1], a[2]);
        }
        let s = (t - a[0]) / (b[0] - a[0]);
        Vec2::new(a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2]))
    }

    pub fn duration(&self) -> f64 {
        self.trajectory[self.trajectory.len() - 1][0] - self.trajectory[0][0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoalRule {
    Region { region: String },
    Point { point: [f64; 2], radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowBandRule {
    pub target: String,
    pub d_min: f64,
    pub d_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionUpdate {
    pub at: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRules {
    pub goal: GoalRule,
    pub time_limit: f64,
    /// Hard constraints: any tick inside one of these fails the episode.
    #[serde(default)]
    pub forbidden: Vec<String>,
    /// Soft constraints: scored by the region metric only.
    #[serde(default)]
    pub caution: Vec<String>,
    #[serde(default)]
    pub follow: Option<FollowBandRule>,
    /// Pedestrians scored with the keep-away subject metric.
    #[serde(default)]
    pub keep_away: Vec<String>,
    #[serde(default)]
    pub instruction_updates: Vec<InstructionUpdate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub start: [f64; 3],
    #[serde(default = "default_robot_radius")]
    pub radius: f64,
}

fn default_robot_radius() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub resolution: f64,
    #[serde(default)]
    pub origin: [f64; 2],
    #[serde(default)]
    pub width: Option<usize>,
    #[serde(default)]
    pub height: Option<usize>,
    /// Run-length rows, top row first.
    #[serde(default)]
    pub rows: Vec<String>,
    /// Graymap path, relative to the scenario file.
    #[serde(default)]
    pub pgm: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScenarioFile {
    id: String,
    instruction: String,
    #[serde(default)]
    seed: u64,
    map: MapSpec,
    robot: RobotSpec,
    #[serde(default)]
    regions: Vec<Region>,
    #[serde(default)]
    pedestrians: Vec<Pedestrian>,
    task: TaskRules,
}

/// A validated benchmark episode description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: String,
    pub instruction: String,
    pub seed: u64,
    pub static_map: OccupancyGrid,
    pub regions: Vec<Region>,
    pub pedestrians: Vec<Pedestrian>,
    pub robot_start: Pose,
    pub robot_radius: f64,
    pub task: TaskRules,
}

impl ScenarioSpec {
    pub fn region(&self, id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn pedestrian(&self, id: &str) -> Option<&Pedestrian> {
        self.pedestrians.iter().find(|p| p.id == id)
    }

    /// True when `p` satisfies the task's success goal.
    pub fn goal_reached(&self, p: Vec2) -> bool {
        match &self.task.goal {
            GoalRule::Region { region } => self.region(region).is_some_and(|r| r.contains(p)),
            GoalRule::Point { point, radius } => Vec2::from(*point).distance(p) <= *radius,
        }
    }

    pub fn goal_point(&self) -> Vec2 {
        match &self.task.goal {
            GoalRule::Region { region } => self.region(region).map(|r| r.anchor_point()).unwrap_or_default(),
            GoalRule::Point { point, .. } => Vec2::from(*point),
        }
    }

    /// Checks every invariant of a scenario. Called by the loaders.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for r in &self.regions {
            r.validate()?;
            if !ids.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("duplicate region id `{}`", r.id)));
            }
        }
        let mut ped_ids = BTreeSet::new();
        for p in &self.pedestrians {
            if !ped_ids.insert(p.id.as_str()) {
                return Err(Error::Validation(format!("duplicate pedestrian id `{}`", p.id)));
            }
            if !(p.radius > 0.0) {
                return Err(Error::Validation(format!("pedestrian `{}` needs radius > 0", p.id)));
            }
            if p.trajectory.is_empty() {
                return Err(Error::Validation(format!("pedestrian `{}` has no trajectory", p.id)));
            }
            if p.trajectory.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("pedestrian `{}` has non-finite waypoints", p.id)));
            }
            if p.trajectory.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                return Err(Error::Validation(format!(
                    "pedestrian `{}` trajectory timestamps are not strictly increasing",
                    p.id
                )));
            }
        }
        if !(self.robot_radius > 0.0) {
            return Err(Error::Validation("robot radius must be > 0".into()));
        }
        if !(self.task.time_limit > 0.0) {
            return Err(Error::Validation("task time_limit must be > 0".into()));
        }
        match &self.task.goal {
            GoalRule::Region { region } => {
                if self.region(region).is_none() {
                    return Err(Error::Validation(format!("goal references unknown region `{region}`")));
                }
            }
            GoalRule::Point { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::Validation("goal radius must be > 0".into()));
                }
            }
        }
        for id in self.task.forbidden.iter().chain(&self.task.caution) {
            if self.region(id).is_none() {
                return Err(Error::Validation(format!("task references unknown region `{id}`")));
            }
        }
        for id in &self.task.keep_away {
            if self.pedestrian(id).is_none() {
                return Err(Error::Validation(format!("task references unknown pedestrian `{id}`")));
            }
        }
        if let Some(f) = &self.task.follow {
            if self.pedestrian(&f.target).is_none() {
                return Err(Error::Validation(format!("follow rule references unknown pedestrian `{}`", f.target)));
            }
            if !(f.d_min > 0.0 && f.d_min < f.d_max) {
                return Err(Error::Validation("follow band needs 0 < d_min < d_max".into()));
            }
        }
        let start = self.robot_start.position();
        if !start.is_finite() || self.static_map.geometry.world_to_cell(start).is_none() {
            return Err(Error::Validation("robot start lies outside the map".into()));
        }
        if self.static_map.disc_hits_occupied(start, self.robot_radius) {
            return Err(Error::Validation("robot start is in collision with the static map".into()));
        }
        if !self.goal_reachable_on_static_map() {
            return Err(Error::Validation("goal is not reachable on the static map".into()));
        }
        Ok(())
    }

    fn goal_reachable_on_static_map(&self) -> bool {
        let map = &self.static_map;
        let g = map.geometry;
        let Some((si, sj)) = g.world_to_cell(self.robot_start.position()) else {
            return false;
        };
        let goal_cell = g.world_to_cell(self.goal_point());
        let mut seen = vec![false; g.len()];
        let mut queue = VecDeque::from([(si, sj)]);
        seen[g.index(si, sj)] = true;
        while let Some((i, j)) = queue.pop_front() {
            if Some((i, j)) == goal_cell || self.goal_reached(g.cell_center(i, j)) {
                return true;
            }
            for (di, dj) in NEIGHBORS_8 {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if !g.in_bounds(ni, nj) {
                    continue;
                }
                let (ni, nj) = (ni as usize, nj as usize);
                let idx = g.index(ni, nj);
                if !seen[idx] && !map.is_occupied(ni, nj) {
                    seen[idx] = true;
                    queue.push_back((ni, nj));
                }
            }
        }
        false
    }
}

pub(crate) const NEIGHBORS_8: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Reads, decodes and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
        other => other,
    })
}

/// Parses a scenario document; graymap references resolve against `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<ScenarioSpec> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::parse("scenario", e))?;
    let static_map = decode_map(&file.map, base_dir)?;
    let [x, y, theta] = file.robot.start;
    let spec = ScenarioSpec {
        id: file.id,
        instruction: file.instruction,
        seed: file.seed,
        static_map,
        regions: file.regions,
        pedestrians: file.pedestrians,
        robot_start: Pose::new(x, y, theta),
        robot_radius: file.robot.radius,
        task: file.task,
    };
    spec.validate()?;
    Ok(spec)
}

fn decode_map(map: &MapSpec, base_dir: &Path) -> Result<OccupancyGrid> {
    if !(map.resolution > 0.0) {
        return Err(Error::Validation("map resolution must be > 0".into()));
    }
    let origin = Vec2::from(map.origin);
    match (&map.pgm, map.rows.is_empty()) {
        (Some(_), false) => Err(Error::parse("map", "give either `rows` or `pgm`, not both")),
        (None, true) => Err(Error::parse("map", "missing `rows` or `pgm`")),
        (Some(rel), true) => {
            let path = base_dir.join(rel);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let (w, h, pixels) = parse_pgm(&bytes)?;
            if map.width.is_some_and(|mw| mw != w) || map.height.is_some_and(|mh| mh != h) {
                return Err(Error::Validation("graymap size disagrees with map width/height".into()));
            }
            let geometry = GridGeometry::new(map.resolution, origin, w, h);
            let mut grid = OccupancyGrid::empty(geometry);
            for r in 0..h {
                for c in 0..w {
                    if pixels[r * w + c] < 128 {
                        grid.set(c, h - 1 - r, true);
                    }
                }
            }
            Ok(grid)
        }
        (None, false) => {
            let width = map.width.ok_or_else(|| Error::parse("map", "`width` is required with inline rows"))?;
            let rows = decode_rle_rows(&map.rows, width)?;
            if map.height.is_some_and(|h| h != rows.len()) {
                return Err(Error::Validation(format!(
                    "map declares height {} but rows decode to {}",
                    map.height.unwrap_or_default(),
                    rows.len()
                )));
            }
            let h = rows.len();
            let geometry = GridGeometry::new(map.resolution, origin, width, h);
            let mut grid = OccupancyGrid::empty(geometry);
            for (r, row) in rows.iter().enumerate() {
                for (c, &occ) in row.iter().enumerate() {
                    if occ {
                        grid.set(c, h - 1 - r, true);
                    }
                }
            }
            Ok(grid)
        }
    }
}

/// Decodes run-length rows. Each entry is `[N*]tokens`, where the optional
/// `N*` prefix repeats the row `N` times and tokens are `<count><c>` with `c`
/// one of `.` (free) or `#` (occupied); a missing count means 1.
pub fn decode_rle_rows(rows: &[String], width: usize) -> Result<Vec<Vec<bool>>> {
    let mut out = Vec::new();
    for (k, entry) in rows.iter().enumerate() {
        let entry: String = entry.chars().filter(|c| !c.is_whitespace()).collect();
        let (repeat, body) = match entry.split_once('*') {
            Some((n, body)) => (
                n.parse::<usize>().map_err(|_| Error::parse("map rows", format!("row {k}: bad repeat `{n}`")))?,
                body.to_string(),
            ),
            None => (1, entry),
        };
        let mut row = Vec::with_capacity(width);
        let mut count = String::new();
        for c in body.chars() {
            match c {
                '0'..='9' => count.push(c),
                '.' | '#' => {
                    let n = if count.is_empty() { 1 } else { count.parse::<usize>().unwrap_or(0) };
                    count.clear();
                    row.extend(std::iter::repeat_n(c == '#', n));
                }
                other => {
                    return Err(Error::parse("map rows", format!("row {k}: unexpected `{other}`")));
                }
            }
        }
        if !count.is_empty() {
            return Err(Error::parse("map rows", format!("row {k}: dangling count")));
        }
        if row.len() != width {
            return Err(Error::parse("map rows", format!("row {k} decodes to {} cells, expected {width}", row.len())));
        }
        for _ in 0..repeat {
            out.push(row.clone());
        }
    }
    Ok(out)
}

/// Encodes a grid as compact run-length rows (top row first, repeats folded).
pub fn encode_rle_rows(grid: &OccupancyGrid) -> Vec<String> {
    let g = grid.geometry;
    let mut encoded: Vec<(usize, String)> = Vec::new();
    for r in 0..g.height {
        let j = g.height - 1 - r;
        let mut s = String::new();
        let mut i = 0;
        while i < g.width {
            let v = grid.is_occupied(i, j);
            let mut n = 0;
            while i < g.width && grid.is_occupied(i, j) == v {
                n += 1;
                i += 1;
            }
            s.push_str(&n.to_string());
            s.push(if v { '#' } else { '.' });
        }
        match encoded.last_mut() {
            Some((count, last)) if *last == s => *count += 1,
            _ => encoded.push((1, s)),
        }
    }
    encoded.into_iter().map(|(n, s)| if n == 1 { s } else { format!("{n}*{s}") }).collect()
}

/// Minimal P2/P5 graymap reader returning `(width, height, pixels)` scaled to 0–255.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut pos = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse("pgm", "unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = next_token(bytes)?;
    let num = |s: String| s.parse::<usize>().map_err(|_| Error::parse("pgm", format!("bad number `{s}`")));
    let w = num(next_token(bytes)?)?;
    let h = num(next_token(bytes)?)?;
    let maxval = num(next_token(bytes)?)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::parse("pgm", "only 8-bit graymaps are supported"));
    }
    let scale = |v: usize| ((v * 255) / maxval) as u8;
    let pixels = match magic.as_str() {
        "P5" => {
            let data = &bytes[pos + 1..];
            if data.len() < w * h {
                return Err(Error::parse("pgm", "truncated pixel data"));
            }
            data[..w * h].iter().map(|&v| scale(v as usize)).collect()
        }
        "P2" => {
            let mut px = Vec::with_capacity(w * h);
            for _ in 0..w * h {
                px.push(scale(num(next_token(bytes)?)?));
            }
            px
        }
        other => return Err(Error::parse("pgm", format!("unsupported magic `{other}`"))),
    };
    Ok((w, h, pixels))
}

/// Writes an 8-bit binary graymap, first row at the top.
pub fn write_pgm(width: usize, height: usize, rows_top_down: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rows_top_down);
    out
}
