use std::path::Path as FsPath;

use nalgebra::{Isometry3, Point2, Point3, Translation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::camera::CameraSpec;
use super::SimError;
use crate::controller::{fk_unchecked, GraspPose, KinematicChain, Pose, RobotState, WorldView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Box,
    Cylinder,
    Sphere,
}

/// Solid primitive centred on its local origin, axis along local z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Box { half: Vector3<f64> },
    Cylinder { radius: f64, half_height: f64 },
    Sphere { radius: f64 },
}

impl Shape {
    fn from_dims(kind: ShapeKind, dims: &[f64]) -> Result<Self, SimError> {
        let bad = || SimError::InvalidWorld(format!("{kind:?} has bad dims {dims:?}"));
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(bad());
        }
        match (kind, dims) {
            (ShapeKind::Box, [x, y, z]) => Ok(Shape::Box {
                half: Vector3::new(*x, *y, *z) / 2.0,
            }),
            (ShapeKind::Cylinder, [r, h]) => Ok(Shape::Cylinder {
                radius: *r,
                half_height: h / 2.0,
            }),
            (ShapeKind::Sphere, [r]) => Ok(Shape::Sphere { radius: *r }),
            _ => Err(bad()),
        }
    }

    fn kind_and_dims(&self) -> (ShapeKind, Vec<f64>) {
        match *self {
            Shape::Box { half } => (ShapeKind::Box, (half * 2.0).iter().copied().collect()),
            Shape::Cylinder { radius, half_height } => (ShapeKind::Cylinder, vec![radius, half_height * 2.0]),
            Shape::Sphere { radius } => (ShapeKind::Sphere, vec![radius]),
        }
    }

    pub fn half_height(&self) -> f64 {
        match *self {
            Shape::Box { half } => half.z,
            Shape::Cylinder { half_height, .. } => half_height,
            Shape::Sphere { radius } => radius,
        }
    }

    /// Nearest ray parameter `t > 0` where the local-frame ray enters.
    pub fn ray_hit(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<f64> {
        match *self {
            Shape::Box { half } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for a in 0..3 {
                    if d[a].abs() < 1e-15 {
                        if o[a].abs() > half[a] {
                            return None;
                        }
                        continue;
                    }
                    let (mut ta, mut tb) = ((-half[a] - o[a]) / d[a], (half[a] - o[a]) / d[a]);
                    if ta > tb {
                        std::mem::swap(&mut ta, &mut tb);
                    }
                    t0 = t0.max(ta);
                    t1 = t1.min(tb);
                }
                (t0 <= t1 && t0 > 0.0).then_some(t0)
            }
            Shape::Sphere { radius } => {
                let b = o.coords.dot(d);
                let c = o.coords.norm_squared() - radius * radius;
                let disc = b * b - d.norm_squared() * c;
                if disc < 0.0 {
                    return None;
                }
                let t = (-b - disc.sqrt()) / d.norm_squared();
                (t > 0.0).then_some(t)
            }
            Shape::Cylinder { radius, half_height } => {
                let mut best: Option<f64> = None;
                let mut take = |t: f64| {
                    if t > 0.0 && best.is_none_or(|b| t < b) {
                        best = Some(t);
                    }
                };
                // side
                let a = d.x * d.x + d.y * d.y;
                if a > 1e-15 {
                    let b = o.x * d.x + o.y * d.y;
                    let c = o.x * o.x + o.y * o.y - radius * radius;
                    let disc = b * b - a * c;
                    if disc >= 0.0 {
                        let t = (-b - disc.sqrt()) / a;
                        if (o.z + t * d.z).abs() <= half_height {
                            take(t);
                        }
                    }
                }
                // caps
                if d.z.abs() > 1e-15 {
                    for zc in [-half_height, half_height] {
                        let t = (zc - o.z) / d.z;
                        let (x, y) = (o.x + t * d.x, o.y + t * d.y);
                        if x * x + y * y <= radius * radius {
                            take(t);
                        }
                    }
                }
                best
            }
        }
    }

    /// Length of the local-frame xy line through `p` along `u` inside the
    /// footprint, if `p` is inside.
    pub fn chord(&self, p: &Point2<f64>, u: &Vector2<f64>) -> Option<f64> {
        match *self {
            Shape::Box { half } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for a in 0..2 {
                    if p[a].abs() > half[a] {
                        return None;
                    }
                    if u[a].abs() < 1e-15 {
                        continue;
                    }
                    let (ta, tb) = ((-half[a] - p[a]) / u[a], (half[a] - p[a]) / u[a]);
                    t0 = t0.max(ta.min(tb));
                    t1 = t1.min(ta.max(tb));
                }
                Some(t1 - t0)
            }
            Shape::Cylinder { radius, .. } | Shape::Sphere { radius } => {
                let off = p.coords.dot(&Vector2::new(-u.y, u.x));
                if p.coords.norm() > radius {
                    return None;
                }
                Some(2.0 * (radius * radius - off * off).max(0.0).sqrt())
            }
        }
    }

    /// Distance from a local xy point to the footprint (0 inside).
    pub fn footprint_distance(&self, p: &Point2<f64>) -> f64 {
        match *self {
            Shape::Box { half } => {
                let dx = (p.x.abs() - half.x).max(0.0);
                let dy = (p.y.abs() - half.y).max(0.0);
                dx.hypot(dy)
            }
            Shape::Cylinder { radius, .. } | Shape::Sphere { radius } => (p.coords.norm() - radius).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose {
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    /// High-level Objects word, e.g. `TeddyBear`.
    pub name: String,
    pub shape: ShapeKind,
    pub dims: Vec<f64>,
    pub pose: ObjectPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from((Vector3::from(self.min) + Vector3::from(self.max)) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub id: String,
    #[serde(default = "default_bin_name")]
    pub name: String,
    pub region: Region,
}

fn default_bin_name() -> String {
    "Bin".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub table_z: f64,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub bins: Vec<Bin>,
    #[serde(default)]
    pub camera: CameraSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Object {
    pub id: String,
    pub name: String,
    pub shape: Shape,
    pub pose: Isometry3<f64>,
}

impl Object {
    pub fn position(&self) -> Point3<f64> {
        Point3::from(self.pose.translation.vector)
    }

    pub fn bottom_z(&self) -> f64 {
        self.pose.translation.vector.z - self.shape.half_height()
    }

    pub fn top_z(&self) -> f64 {
        self.pose.translation.vector.z + self.shape.half_height()
    }
}

/// Rigid grasp: object pose in the tool frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub object: String,
    pub offset: Isometry3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub table_z: f64,
    pub objects: Vec<Object>,
    pub bins: Vec<Bin>,
    pub camera: CameraSpec,
    pub chain: KinematicChain,
    pub robot: RobotState,
    /// Current jaw opening, metres.
    pub opening: f64,
    pub attached: Option<Attachment>,
    pub(crate) fault: Option<String>,
    pub(crate) resume: Option<crate::controller::JointTrajectory>,
}

impl World {
    pub fn new(spec: WorldSpec, chain: KinematicChain) -> Result<Self, SimError> {
        let mut objects: Vec<Object> = Vec::with_capacity(spec.objects.len());
        for o in &spec.objects {
            if objects.iter().any(|p| p.id == o.id) {
                return Err(SimError::InvalidWorld(format!("duplicate object id `{}`", o.id)));
            }
            let shape = Shape::from_dims(o.shape, &o.dims)?;
            let pose = Isometry3::from_parts(
                Translation3::from(Vector3::from(o.pose.position)),
                UnitQuaternion::from_axis_angle(&Vector3::z_axis(), o.pose.yaw),
            );
            let obj = Object {
                id: o.id.clone(),
                name: o.name.clone(),
                shape,
                pose,
            };
            if obj.bottom_z() < spec.table_z - 1e-9 {
                return Err(SimError::InvalidWorld(format!("object `{}` is below the table", o.id)));
            }
            objects.push(obj);
        }
        let robot = RobotState::at_home(&chain);
        Ok(Self {
            table_z: spec.table_z,
            objects,
            bins: spec.bins,
            camera: spec.camera,
            chain,
            robot,
            opening: crate::grasp::MAX_GRIPPER_WIDTH,
            attached: None,
            fault: None,
            resume: None,
        })
    }

    /// The bundled scene with the bundled chain.
    pub fn shipped() -> Self {
        Self::from_json(include_str!("../../data/world.json"), KinematicChain::shipped())
            .expect("bundled world is valid")
    }

    pub fn from_json(text: &str, chain: KinematicChain) -> Result<Self, SimError> {
        let spec: WorldSpec = serde_json::from_str(text).map_err(|e| SimError::InvalidWorld(e.to_string()))?;
        Self::new(spec, chain)
    }

    pub fn load(path: impl AsRef<FsPath>, chain: KinematicChain) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(e.to_string()))?;
        Self::from_json(&text, chain)
    }

    pub fn spec(&self) -> WorldSpec {
        WorldSpec {
            table_z: self.table_z,
            objects: self
                .objects
                .iter()
                .map(|o| {
                    let (shape, dims) = o.shape.kind_and_dims();
                    ObjectSpec {
                        id: o.id.clone(),
                        name: o.name.clone(),
                        shape,
                        dims,
                        pose: ObjectPose {
                            position: o.pose.translation.vector.into(),
                            yaw: o.pose.rotation.euler_angles().2,
                        },
                    }
                })
                .collect(),
            bins: self.bins.clone(),
            camera: self.camera,
        }
    }

    pub fn object(&self, id: &str) -> Result<&Object, SimError> {
        self.objects
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| SimError::ObjectUnknown(id.to_string()))
    }

    /// First object with the given id or high-level name.
    pub fn find_object(&self, key: &str) -> Option<&Object> {
        self.objects.iter().find(|o| o.id == key || o.name == key)
    }

    pub fn bin(&self, id: &str) -> Result<&Bin, SimError> {
        self.bins
            .iter()
            .find(|b| b.id == id || b.name == id)
            .ok_or_else(|| SimError::BinUnknown(id.to_string()))
    }

    pub fn ee_pose(&self) -> Pose {
        fk_unchecked(&self.chain, &self.robot.joints)
    }

    pub fn is_faulted(&self) -> bool {
        self.fault.is_some()
    }

    /// Testing hook: the next execution tick reports this fault.
    pub fn inject_fault(&mut self, message: impl Into<String>) {
        self.fault = Some(message.into());
    }

    /// Clears the fault flag; the arm does not move.
    pub fn recover(&mut self) {
        self.fault = None;
        self.robot.faulted = false;
    }

    /// Remainder of the last interrupted execution.
    pub fn pending_resume(&self) -> Option<&crate::controller::JointTrajectory> {
        self.resume.as_ref()
    }

    pub fn take_resume(&mut self) -> Option<crate::controller::JointTrajectory> {
        self.resume.take()
    }

    /// Tool position at which opening the gripper leaves the held object
    /// centred in the bin region, keeping the current orientation.
    pub fn drop_point(&self, bin: &str) -> Result<[f64; 3], SimError> {
        let centre = self.bin(bin)?.region.center();
        let ee = self.ee_pose();
        let lever = match &self.attached {
            Some(a) => {
                let obj = self.object(&a.object)?;
                obj.pose.translation.vector - ee.position
            }
            None => Vector3::zeros(),
        };
        Ok((centre.coords - lever).into())
    }

    /// Controller's view: the given selected grasps plus drop points for
    /// every bin.
    pub fn view(&self, selected: impl IntoIterator<Item = (String, GraspPose)>) -> WorldView {
        let mut v = WorldView {
            selected: selected.into_iter().collect(),
            ..WorldView::default()
        };
        for b in &self.bins {
            if let Ok(p) = self.drop_point(&b.id) {
                v.drop_points.insert(b.name.clone(), p);
                v.drop_points.insert(b.id.clone(), p);
            }
        }
        v
    }

    /// Object the closing jaws would catch, if any.
    pub(crate) fn graspable_at(&self, ee: &Pose) -> Option<usize> {
        const REACH: f64 = 0.01;
        let closing = ee.orientation * Vector3::y();
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| {
                let local = o.pose.inverse() * Point3::from(ee.position);
                let u_local = o.pose.rotation.inverse() * closing;
                let u = Vector2::new(u_local.x, u_local.y);
                if u.norm() < 1e-6 {
                    return false;
                }
                let p = Point2::new(local.x, local.y);
                let z_ok = local.z.abs() <= o.shape.half_height();
                let near = o.shape.footprint_distance(&p) <= REACH;
                let fits = o
                    .shape
                    .chord(&p, &u.normalize())
                    .is_none_or(|c| c <= self.opening + 1e-9);
                z_ok && near && fits
            })
            .min_by(|a, b| {
                let da = (a.1.position() - Point3::from(ee.position)).norm();
                let db = (b.1.position() - Point3::from(ee.position)).norm();
                da.total_cmp(&db)
            })
            .map(|(i, _)| i)
    }

    pub(crate) fn attach(&mut self, index: usize, ee: &Pose) {
        let tool = Isometry3::from_parts(Translation3::from(ee.position), ee.orientation);
        let obj = &self.objects[index];
        self.attached = Some(Attachment {
            object: obj.id.clone(),
            offset: tool.inverse() * obj.pose,
        });
    }

    /// Moves the held object with the tool.
    pub(crate) fn carry(&mut self, ee: &Pose) {
        if let Some(a) = &self.attached {
            let tool = Isometry3::from_parts(Translation3::from(ee.position), ee.orientation);
            let pose = tool * a.offset;
            if let Some(o) = self.objects.iter_mut().find(|o| o.id == a.object) {
                o.pose = pose;
            }
        }
    }
}
