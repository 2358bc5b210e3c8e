use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// A set of 3D points in meters, expressed in the frame named by `frame_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    frame_id: String,
}

impl PointCloud {
    /// Builds a cloud, rejecting non-finite coordinates. An empty point list
    /// is allowed here; operations that need points check for themselves.
    pub fn new(points: Vec<Point>, frame_id: impl Into<String>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            points,
            frame_id: frame_id.into(),
        })
    }

    pub fn from_xyz(xyz: &[[f64; 3]], frame_id: impl Into<String>) -> Result<Self> {
        Self::new(xyz.iter().map(|p| Point::new(p[0], p[1], p[2])).collect(), frame_id)
    }

    pub fn empty(frame_id: impl Into<String>) -> Self {
        Self {
            points: Vec::new(),
            frame_id: frame_id.into(),
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn with_frame_id(mut self, frame_id: impl Into<String>) -> Self {
        self.frame_id = frame_id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::EmptyCloud)
        } else {
            Ok(())
        }
    }

    pub fn centroid(&self) -> Result<Point> {
        self.ensure_non_empty()?;
        let sum = self.points.iter().fold(Point::zeros(), |acc, p| acc + p);
        Ok(sum / self.points.len() as f64)
    }

    /// Axis-aligned (min, max) corners.
    pub fn bounds(&self) -> Result<(Point, Point)> {
        self.ensure_non_empty()?;
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points[1..] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        Ok((lo, hi))
    }

    pub fn extents(&self) -> Result<Point> {
        let (lo, hi) = self.bounds()?;
        Ok(hi - lo)
    }

    /// Uniform scaling about the centroid.
    pub fn scaled_about_centroid(&self, factor: f64) -> Result<Self> {
        self.scaled_about(&self.centroid()?, factor)
    }

    /// Uniform scaling about `c`.
    pub fn scaled_about(&self, c: &Point, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidInput(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        Ok(Self {
            points: self.points.iter().map(|p| c + (p - c) * factor).collect(),
            frame_id: self.frame_id.clone(),
        })
    }

    pub fn translated(&self, offset: &Point) -> Self {
        Self {
            points: self.points.iter().map(|p| p + offset).collect(),
            frame_id: self.frame_id.clone(),
        }
    }

    /// Concatenates clouds into one, keeping the frame id of `self`.
    pub fn merged(&self, other: &PointCloud) -> Self {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        Self {
            points,
            frame_id: self.frame_id.clone(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            frame_id: self.frame_id.clone(),
        }
    }
}
