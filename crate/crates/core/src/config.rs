//! TOML run configuration for the command-line front end.
//!
//! ```toml
//! [geometry]
//! kind = "disk"
//! radius = 1.0
//! h = 0.05
//!
//! [integrand]
//! kind = "torsion"
//! lambda = 1.0
//!
//! [deformation]
//! preset = "dilation"
//! ```
//!
//! Every table rejects unknown keys, and [`RunConfig::validate`] checks ranges
//! before anything is meshed or solved.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrands::{make_anisotropic, make_p_torsion, make_torsion, ConvexPair};
use crate::linalg::{Mat2, Vec2};
use crate::mesh::{
    generate_annulus, generate_disk, generate_ellipse, generate_rectangle, read_mesh, BoundaryTag,
    DeformationField, Mesh2D,
};
use crate::solver::SolverOptions;
use crate::validation::DEFAULT_EPS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub integrand: Integrand,
    #[serde(default)]
    pub deformation: Deformation,
    #[serde(default)]
    pub routes: Routes,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub output: Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tag {
    D,
    N,
}

impl From<Tag> for BoundaryTag {
    fn from(t: Tag) -> Self {
        match t {
            Tag::D => BoundaryTag::Dirichlet,
            Tag::N => BoundaryTag::Neumann,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn dirichlet() -> Tag {
    Tag::D
}

fn all_dirichlet() -> [Tag; 4] {
    [Tag::D; 4]
}

/// Domain and mesh size. For the disk and ellipse, `dirichlet_fraction` is
/// the share of the boundary (by angle, starting at angle 0) tagged `D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    Disk {
        #[serde(default = "one")]
        radius: f64,
        h: f64,
        #[serde(default = "one")]
        dirichlet_fraction: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
        h: f64,
        #[serde(default = "one")]
        dirichlet_fraction: f64,
    },
    Annulus {
        r_inner: f64,
        r_outer: f64,
        h: f64,
        #[serde(default = "dirichlet")]
        inner: Tag,
        #[serde(default = "dirichlet")]
        outer: Tag,
    },
    Rectangle {
        width: f64,
        height: f64,
        h: f64,
        /// Bottom, right, top, left.
        #[serde(default = "all_dirichlet")]
        sides: [Tag; 4],
    },
    MeshFile { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Integrand {
    Torsion {
        #[serde(default = "one")]
        lambda: f64,
    },
    PTorsion {
        p: f64,
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default)]
        delta: f64,
    },
    Anisotropic {
        matrix: [[f64; 2]; 2],
        #[serde(default)]
        k: f64,
        #[serde(default = "one")]
        lambda: f64,
    },
}

/// Deformation field presets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Deformation {
    Zero,
    /// `V(x) = x`.
    Dilation,
    Translation { vector: [f64; 2] },
    /// `V(x) = x / radius`.
    Normal {
        #[serde(default = "one")]
        radius: f64,
    },
    RadialBump {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Spin {
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "one")]
        omega: f64,
    },
    /// Terms `[a, b, c]` contribute `c xᵃ yᵇ` to the component.
    Polynomial {
        #[serde(default)]
        x_terms: Vec<[f64; 3]>,
        #[serde(default)]
        y_terms: Vec<[f64; 3]>,
    },
}

impl Default for Deformation {
    fn default() -> Self {
        Deformation::Dilation
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Volume,
    Boundary,
    /// Torsion or p-torsion representation.
    Special,
    /// Finite-difference oracle.
    Fd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Routes {
    #[serde(default = "Routes::default_compute")]
    pub compute: Vec<Route>,
    #[serde(default = "Routes::default_eps")]
    pub eps_list: Vec<f64>,
}

impl Routes {
    fn default_compute() -> Vec<Route> {
        vec![Route::Volume, Route::Boundary, Route::Special, Route::Fd]
    }

    fn default_eps() -> Vec<f64> {
        DEFAULT_EPS.to_vec()
    }

    pub fn has(&self, r: Route) -> bool {
        self.compute.contains(&r)
    }
}

impl Default for Routes {
    fn default() -> Self {
        Self { compute: Self::default_compute(), eps_list: Self::default_eps() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    #[serde(default = "Solver::default_tol")]
    pub tol: f64,
    #[serde(default = "Solver::default_max_iter")]
    pub max_iter: usize,
}

impl Solver {
    fn default_tol() -> f64 {
        SolverOptions::<f64>::default().tol
    }

    fn default_max_iter() -> usize {
        SolverOptions::<f64>::default().max_iter
    }
}

impl Default for Solver {
    fn default() -> Self {
        Self { tol: Self::default_tol(), max_iter: Self::default_max_iter() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Number of meshes `h, h/2, …` visited by `sweep`.
    #[serde(default = "Sweep::default_levels")]
    pub levels: usize,
}

impl Sweep {
    fn default_levels() -> usize {
        3
    }
}

impl Default for Sweep {
    fn default() -> Self {
        Self { levels: Self::default_levels() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "Output::default_dir")]
    pub dir: PathBuf,
    #[serde(default = "Output::default_vtk")]
    pub vtk: bool,
}

impl Output {
    fn default_dir() -> PathBuf {
        PathBuf::from("out")
    }

    fn default_vtk() -> bool {
        true
    }
}

impl Default for Output {
    fn default() -> Self {
        Self { dir: Self::default_dir(), vtk: Self::default_vtk() }
    }
}

fn config_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), msg: msg.into() }
}

/// Name of the key a TOML error points at: the backticked field of an
/// unknown-field message, else the key on the offending line.
fn offending_key(text: &str, err: &toml::de::Error) -> String {
    let msg = err.message();
    if let Some(rest) = msg.strip_prefix("unknown field `").or_else(|| msg.strip_prefix("unknown variant `")) {
        if let Some(end) = rest.find('`') {
            return rest[..end].to_string();
        }
    }
    if let Some(span) = err.span() {
        let start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
        let line = text[start..].lines().next().unwrap_or("");
        if let Some((key, _)) = line.split_once('=') {
            return key.trim().to_string();
        }
        let line = line.trim();
        if line.starts_with('[') {
            return line.trim_matches(|c| c == '[' || c == ']').to_string();
        }
    }
    if let Some(rest) = msg.strip_prefix("missing field `") {
        if let Some(end) = rest.find('`') {
            return rest[..end].to_string();
        }
    }
    String::from("<root>")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(&offending_key(text, &e), e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err("--config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    /// Range checks; every failure names the offending key.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(config_err(key, format!("must be positive and finite (got {x})")))
            }
        };
        let fraction = |key: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(config_err(key, format!("must lie in [0, 1] (got {x})")))
            }
        };
        match &self.geometry {
            Geometry::Disk { radius, h, dirichlet_fraction } => {
                positive("geometry.radius", *radius)?;
                positive("geometry.h", *h)?;
                if h >= radius {
                    return Err(config_err("geometry.h", "must be smaller than the radius"));
                }
                fraction("geometry.dirichlet_fraction", *dirichlet_fraction)?;
            }
            Geometry::Ellipse { a, b, h, dirichlet_fraction } => {
                positive("geometry.a", *a)?;
                positive("geometry.b", *b)?;
                positive("geometry.h", *h)?;
                if *h >= a.min(*b) {
                    return Err(config_err("geometry.h", "must be smaller than both semi-axes"));
                }
                fraction("geometry.dirichlet_fraction", *dirichlet_fraction)?;
            }
            Geometry::Annulus { r_inner, r_outer, h, .. } => {
                positive("geometry.r_inner", *r_inner)?;
                positive("geometry.h", *h)?;
                if r_outer <= r_inner {
                    return Err(config_err("geometry.r_outer", "must exceed r_inner"));
                }
                if *h >= r_outer - r_inner {
                    return Err(config_err("geometry.h", "must be smaller than the annulus width"));
                }
            }
            Geometry::Rectangle { width, height, h, .. } => {
                positive("geometry.width", *width)?;
                positive("geometry.height", *height)?;
                positive("geometry.h", *h)?;
                if *h > width.min(*height) {
                    return Err(config_err("geometry.h", "must not exceed the shorter side"));
                }
            }
            Geometry::MeshFile { path } => {
                if path.as_os_str().is_empty() {
                    return Err(config_err("geometry.path", "must not be empty"));
                }
            }
        }
        match &self.integrand {
            Integrand::Torsion { lambda } => nonnegative("integrand.lambda", *lambda)?,
            Integrand::PTorsion { p, lambda, delta } => {
                if !(p.is_finite() && *p > 1.0) {
                    return Err(config_err("integrand.p", format!("must exceed 1 (got {p})")));
                }
                nonnegative("integrand.lambda", *lambda)?;
                nonnegative("integrand.delta", *delta)?;
            }
            Integrand::Anisotropic { matrix, k, lambda } => {
                let [[a, b], [c, d]] = *matrix;
                if b != c || !(a > 0.0 && a * d - b * c > 0.0) {
                    return Err(config_err("integrand.matrix", "must be symmetric positive definite"));
                }
                nonnegative("integrand.k", *k)?;
                nonnegative("integrand.lambda", *lambda)?;
            }
        }
        match &self.deformation {
            Deformation::Normal { radius } => positive("deformation.radius", *radius)?,
            Deformation::RadialBump { radius, .. } => positive("deformation.radius", *radius)?,
            Deformation::Polynomial { x_terms, y_terms } => {
                for (key, terms) in [("deformation.x_terms", x_terms), ("deformation.y_terms", y_terms)] {
                    for t in terms {
                        if t[0] < 0.0 || t[1] < 0.0 || t[0].fract() != 0.0 || t[1].fract() != 0.0 {
                            return Err(config_err(key, "exponents must be non-negative integers"));
                        }
                    }
                }
            }
            _ => {}
        }
        if self.routes.compute.is_empty() {
            return Err(config_err("routes.compute", "must list at least one route"));
        }
        if self.routes.has(Route::Fd) {
            if self.routes.eps_list.len() < 2 {
                return Err(config_err("routes.eps_list", "needs at least two steps"));
            }
            for &e in &self.routes.eps_list {
                positive("routes.eps_list", e)?;
            }
        }
        positive("solver.tol", self.solver.tol)?;
        if self.solver.max_iter == 0 {
            return Err(config_err("solver.max_iter", "must be at least 1"));
        }
        if self.sweep.levels == 0 {
            return Err(config_err("sweep.levels", "must be at least 1"));
        }
        Ok(())
    }

    /// Mesh size requested by the geometry, if it has one.
    pub fn h(&self) -> Option<f64> {
        match self.geometry {
            Geometry::Disk { h, .. }
            | Geometry::Ellipse { h, .. }
            | Geometry::Annulus { h, .. }
            | Geometry::Rectangle { h, .. } => Some(h),
            Geometry::MeshFile { .. } => None,
        }
    }

    /// The same configuration with the mesh size replaced.
    pub fn with_h(&self, new_h: f64) -> Self {
        let mut c = self.clone();
        match &mut c.geometry {
            Geometry::Disk { h, .. }
            | Geometry::Ellipse { h, .. }
            | Geometry::Annulus { h, .. }
            | Geometry::Rectangle { h, .. } => *h = new_h,
            Geometry::MeshFile { .. } => {}
        }
        c
    }

    pub fn build_mesh(&self) -> Result<Arc<Mesh2D<f64>>> {
        let mesh = match &self.geometry {
            Geometry::Disk { radius, h, dirichlet_fraction } => generate_disk(*radius, *h, *dirichlet_fraction)?,
            Geometry::Ellipse { a, b, h, dirichlet_fraction } => generate_ellipse(*a, *b, *h, *dirichlet_fraction)?,
            Geometry::Annulus { r_inner, r_outer, h, inner, outer } => {
                generate_annulus(*r_inner, *r_outer, *h, (*inner).into(), (*outer).into())?
            }
            Geometry::Rectangle { width, height, h, sides } => {
                generate_rectangle(*width, *height, *h, sides.map(BoundaryTag::from))?
            }
            Geometry::MeshFile { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_err("geometry.path", format!("{}: {e}", path.display())))?;
                read_mesh(&text)?
            }
        };
        Ok(Arc::new(mesh))
    }

    pub fn build_pair(&self) -> Result<ConvexPair<f64>> {
        match &self.integrand {
            Integrand::Torsion { lambda } => make_torsion(*lambda),
            Integrand::PTorsion { p, lambda, delta } => make_p_torsion(*p, *lambda, *delta),
            Integrand::Anisotropic { matrix, k, lambda } => {
                make_anisotropic(Mat2::new(matrix[0][0], matrix[0][1], matrix[1][0], matrix[1][1]), *k, *lambda)
            }
        }
    }

    pub fn build_field(&self) -> DeformationField<f64> {
        let v2 = |c: [f64; 2]| Vec2::new(c[0], c[1]);
        match &self.deformation {
            Deformation::Zero => DeformationField::zero(),
            Deformation::Dilation => DeformationField::dilation(),
            Deformation::Translation { vector } => DeformationField::constant(v2(*vector)),
            Deformation::Normal { radius } => DeformationField::disk_normal(*radius),
            Deformation::RadialBump { center, radius, amplitude } => {
                DeformationField::radial_bump(v2(*center), *radius, *amplitude)
            }
            Deformation::Spin { center, omega } => DeformationField::spin(v2(*center), *omega),
            Deformation::Polynomial { x_terms, y_terms } => {
                let terms = |t: &[[f64; 3]]| t.iter().map(|&[a, b, c]| (a as u32, b as u32, c)).collect();
                DeformationField::polynomial(terms(x_terms), terms(y_terms))
            }
        }
    }

    pub fn solver_options(&self) -> SolverOptions<f64> {
        SolverOptions { tol: self.solver.tol, max_iter: self.solver.max_iter, ..SolverOptions::default() }
    }
}

fn nonnegative(key: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(config_err(key, format!("must be non-negative and finite (got {x})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISK: &str = r#"
[geometry]
kind = "disk"
radius = 1.0
h = 0.1

[integrand]
kind = "torsion"
lambda = 1.0

[deformation]
preset = "dilation"
"#;

    #[test]
    fn defaults_fill_optional_tables() {
        let c = RunConfig::parse(DISK).unwrap();
        assert_eq!(c.routes, Routes::default());
        assert_eq!(c.sweep.levels, 3);
        assert_eq!(c.h(), Some(0.1));
        assert_eq!(c.with_h(0.05).h(), Some(0.05));
    }

    #[test]
    fn unknown_keys_are_named() {
        let bad = DISK.replace("lambda = 1.0", "lamda = 1.0");
        let e = RunConfig::parse(&bad).unwrap_err();
        assert_eq!(e.code(), "CONFIG");
        assert!(matches!(&e, Error::Config { key, .. } if key == "lamda"), "{e}");

        let bad = format!("{DISK}\n[output]\ndir = \"x\"\nformat = \"csv\"\n");
        assert!(matches!(RunConfig::parse(&bad).unwrap_err(), Error::Config { key, .. } if key == "format"));
    }

    #[test]
    fn bad_values_are_named() {
        let e = RunConfig::parse(&DISK.replace("h = 0.1", "h = -0.1")).unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "geometry.h"), "{e}");
        // tagged tables are buffered, so type errors point at the table
        let e = RunConfig::parse(&DISK.replace("h = 0.1", "h = \"fine\"")).unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "geometry"), "{e}");
        let e = RunConfig::parse(&format!("{DISK}\n[sweep]\nlevels = \"many\"\n")).unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "levels"), "{e}");
        let e = RunConfig::parse(&DISK.replace("\"torsion\"", "\"elastic\"")).unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "elastic"), "{e}");
    }

    #[test]
    fn round_trip_every_preset() {
        let extra = [
            "[deformation]\npreset = \"zero\"",
            "[deformation]\npreset = \"translation\"\nvector = [1.0, 0.5]",
            "[deformation]\npreset = \"normal\"\nradius = 2.0",
            "[deformation]\npreset = \"radial_bump\"\ncenter = [0.1, 0.0]\nradius = 0.4\namplitude = 0.2",
            "[deformation]\npreset = \"spin\"\nomega = 3.0",
            "[deformation]\npreset = \"polynomial\"\nx_terms = [[1, 0, 0.5], [0, 2, 0.1]]\ny_terms = [[1, 1, -0.2]]",
        ];
        let base = DISK.split("[deformation]").next().unwrap();
        for e in extra {
            let text = format!("{base}{e}\n[routes]\ncompute = [\"volume\", \"fd\"]\neps_list = [0.1, 0.05]\n");
            let c = RunConfig::parse(&text).unwrap();
            assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
        }
        for g in [
            "kind = \"annulus\"\nr_inner = 0.5\nr_outer = 1.0\nh = 0.1\ninner = \"N\"",
            "kind = \"ellipse\"\na = 1.5\nb = 1.0\nh = 0.1\ndirichlet_fraction = 0.5",
            "kind = \"rectangle\"\nwidth = 2.0\nheight = 1.0\nh = 0.1\nsides = [\"D\", \"N\", \"D\", \"N\"]",
            "kind = \"mesh_file\"\npath = \"mesh.txt\"",
        ] {
            let text = DISK.replace("kind = \"disk\"\nradius = 1.0\nh = 0.1", g);
            let c = RunConfig::parse(&text).unwrap();
            assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
        }
        let p = DISK.replace("kind = \"torsion\"", "kind = \"p_torsion\"\np = 3.0\ndelta = 1e-4");
        let c = RunConfig::parse(&p).unwrap();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn builders_follow_the_config() {
        let c = RunConfig::parse(&DISK.replace("radius = 1.0\nh = 0.1", "radius = 1.0\nh = 0.25\ndirichlet_fraction = 0.5"))
            .unwrap();
        let mesh = c.build_mesh().unwrap();
        assert!(mesh.boundary().iter().any(|e| e.tag == BoundaryTag::Neumann));
        assert_eq!(c.build_pair().unwrap().name(), "torsion");
        assert_eq!(c.build_field().value(Vec2::new(0.3, 0.2)), Vec2::new(0.3, 0.2));
    }
}
