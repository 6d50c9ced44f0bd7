//! The two test surfaces of `H^1` used by the verification suites.

use crate::calculus::DefiningFunction;
use crate::error::Result;
use crate::graph::{SurfaceModel, WBox};
use crate::group::Point;
use crate::split::Split;

/// `{x_1 = 0}` with the coordinate split, over `|x_2|, |τ| <= 2`.
pub fn vertical_plane() -> Result<SurfaceModel> {
    let f = DefiningFunction::from_exprs(1, &["x1"])?;
    SurfaceModel::new(f, Split::coordinate(1, 1)?, vec![0.0], WBox::new(vec![0.0, 0.0], vec![2.0, 2.0])?)
}

/// `{x_1 + x_3 = 0}` with the coordinate split. `J_V f = 1 - x_2/2`
/// vanishes at `x_2 = 2`, so the domain keeps `|x_2| <= 1.5`.
pub fn tilted_surface() -> Result<SurfaceModel> {
    let f = DefiningFunction::from_exprs(1, &["x1 + x3"])?;
    SurfaceModel::new(f, Split::coordinate(1, 1)?, vec![0.0], WBox::new(vec![0.0, 1.0], vec![1.5, 2.0])?)
}

/// Three points of each surface, given by `W`-coordinates.
pub fn sample_points(m: &SurfaceModel, which: Shipped) -> Result<Vec<Point>> {
    let w = m.split().w();
    let coords: &[[f64; 2]] = match which {
        Shipped::VerticalPlane => &[[0.0, 0.0], [0.3, 0.2], [-0.2, 0.4]],
        Shipped::Tilted => &[[0.0, 1.0], [0.0, 0.5], [0.2, 1.2]],
    };
    coords.iter().map(|c| m.graph_map(&w.point(c)?)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shipped {
    VerticalPlane,
    Tilted,
}

impl Shipped {
    pub const ALL: [Shipped; 2] = [Shipped::VerticalPlane, Shipped::Tilted];

    pub fn name(self) -> &'static str {
        match self {
            Shipped::VerticalPlane => "x1",
            Shipped::Tilted => "x1 + x3",
        }
    }

    pub fn model(self) -> Result<SurfaceModel> {
        match self {
            Shipped::VerticalPlane => vertical_plane(),
            Shipped::Tilted => tilted_surface(),
        }
    }

    pub fn points(self) -> Result<Vec<Point>> {
        sample_points(&self.model()?, self)
    }
}
