use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::GraspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Camera,
    World,
}

impl FromStr for Frame {
    type Err = GraspError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "camera" => Ok(Frame::Camera),
            "world" => Ok(Frame::World),
            other => Err(GraspError::Parse {
                line: 0,
                message: format!("unknown frame `{other}`"),
            }),
        }
    }
}

impl Frame {
    fn as_str(self) -> &'static str {
        match self {
            Frame::Camera => "camera",
            Frame::World => "world",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>, frame: Frame) -> Result<Self, GraspError> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(GraspError::NonFinite(i));
        }
        Ok(Self { points, frame })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            frame: self.frame,
        }
    }

    /// ASCII PLY with `x y z` vertex properties; other properties are ignored.
    pub fn from_ply(text: &str) -> Result<Self, GraspError> {
        let err = |line: usize, message: &str| GraspError::Parse {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, "ply")) => {}
            _ => return Err(err(1, "missing `ply` magic")),
        }
        let mut vertex_count = None;
        let mut in_vertex = false;
        let mut props: Vec<String> = Vec::new();
        let mut frame = Frame::World;
        loop {
            let Some((n, line)) = lines.next() else {
                return Err(err(0, "missing end_header"));
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["format", "ascii", _] => {}
                ["format", ..] => return Err(err(n, "only ascii PLY is supported")),
                ["comment", "frame", f] => frame = f.parse()?,
                ["comment", ..] | ["obj_info", ..] => {}
                ["element", "vertex", count] => {
                    vertex_count = Some(count.parse::<usize>().map_err(|_| err(n, "bad vertex count"))?);
                    in_vertex = true;
                }
                ["element", ..] => in_vertex = false,
                ["property", .., name] if in_vertex => props.push(name.to_string()),
                ["property", ..] => {}
                ["end_header"] => break,
                [] => {}
                _ => return Err(err(n, "unexpected header line")),
            }
        }
        let count = vertex_count.ok_or_else(|| err(0, "no vertex element"))?;
        let col = |name: &str| {
            props
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| err(0, &format!("no `{name}` property")))
        };
        let (ix, iy, iz) = (col("x")?, col("y")?, col("z")?);
        let mut points = Vec::with_capacity(count);
        for (n, line) in lines.by_ref() {
            if points.len() == count {
                break;
            }
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| err(n, "bad number"))?;
            if vals.len() < props.len() {
                return Err(err(n, "too few values"));
            }
            points.push(Point3::new(vals[ix], vals[iy], vals[iz]));
        }
        if points.len() != count {
            return Err(err(0, "fewer vertices than declared"));
        }
        PointCloud::new(points, frame)
    }

    pub fn to_ply(&self) -> String {
        let mut out = format!(
            "ply\nformat ascii 1.0\ncomment frame {}\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
            self.frame.as_str(),
            self.points.len()
        );
        for p in &self.points {
            let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
        }
        out
    }

    /// `x,y,z` rows; a non-numeric first line is taken as a header.
    pub fn from_csv(text: &str) -> Result<Self, GraspError> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            match vals {
                Ok(v) if v.len() >= 3 => points.push(Point3::new(v[0], v[1], v[2])),
                Err(_) if points.is_empty() && i == 0 => {}
                _ => {
                    return Err(GraspError::Parse {
                        line: i + 1,
                        message: "expected x,y,z".into(),
                    })
                }
            }
        }
        PointCloud::new(points, Frame::World)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.x, p.y, p.z);
        }
        out
    }

    /// Reads PLY or CSV by extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraspError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GraspError::Io(e.to_string()))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::from_csv(&text),
            _ => Self::from_ply(&text),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraspError> {
        let path = path.as_ref();
        let text = match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => self.to_csv(),
            _ => self.to_ply(),
        };
        std::fs::write(path, text).map_err(|e| GraspError::Io(e.to_string()))
    }
}
