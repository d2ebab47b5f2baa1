use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::bench;
use crate::error::{Error, Result};
use crate::free_surface::FreeSurfaceConfig;
use crate::mesh::{
    box_grid, extrude_polygons, load_mesh, mapped_quads, octree_refine_box, validate_mesh, Aabb,
    Mesh, MeshFormat,
};
use crate::sbfem::ElementOptions;
use crate::solver::{BoundarySpec, LinearSolver, Material, TimeConfig};

/// One analysis as read from a case file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisCase {
    pub name: String,
    pub mesh: MeshSource,
    /// Extra node sets, each the nodes inside a box.
    #[serde(default)]
    pub node_sets: BTreeMap<String, BoxSelector>,
    /// Extra face sets: boundary faces with every node inside a box.
    #[serde(default)]
    pub face_sets: BTreeMap<String, BoxSelector>,
    pub materials: Vec<MaterialSpec>,
    /// Element → material assignment. Without it every element takes the
    /// first material.
    #[serde(default)]
    pub element_materials: Option<ElementMaterials>,
    #[serde(default)]
    pub boundary: BoundarySpec,
    pub analysis: AnalysisKind,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub reference: Option<Reference>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

/// Where the mesh comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    /// Mesh file; relative paths are taken from the case file's directory.
    File {
        path: PathBuf,
        format: Option<MeshFormat>,
    },
    /// Five-element affine patch with sets `top` and `bottom`.
    Patch,
    /// Dam foundation block with sets `upstream` and `downstream`.
    ConcreteDam {
        layout: DamLayout,
        /// Element size (m); for octrees the base cell is fixed at 20 m.
        #[serde(default)]
        size: Option<f64>,
        /// Cells across the width: hex layers or octree base cells.
        #[serde(default)]
        ny: Option<usize>,
        #[serde(default)]
        levels: Option<usize>,
        #[serde(default)]
        region: Option<[[f64; 3]; 2]>,
    },
    /// Rectangular dam section with sets `upstream_face` and
    /// `downstream_face`.
    RectangularDam {
        width: f64,
        height: f64,
        n: usize,
        #[serde(default = "one")]
        refine: usize,
        x_band: f64,
        z_band: f64,
    },
    /// Unit-square column of `height` in z with cells `size` tall; sets
    /// `top` and `bottom`.
    Column { height: f64, size: f64 },
    /// Axis-aligned hexahedral grid; give `divisions` or a target `size`.
    Box {
        min: [f64; 3],
        max: [f64; 3],
        #[serde(default)]
        divisions: Option<[usize; 3]>,
        #[serde(default)]
        size: Option<f64>,
    },
    /// Box refined `levels` times inside `region`.
    OctreeBox {
        min: [f64; 3],
        max: [f64; 3],
        divisions: [usize; 3],
        region: [[f64; 3]; 2],
        levels: usize,
    },
    /// Vertical section `x ∈ [x0, x1]` between a `bottom` and a `top`
    /// polyline of `(x, z)` points, meshed with mapped quadrilaterals of
    /// about `size` and extruded over `width` in y. Sets `top`, `bottom`,
    /// `left`, `right`.
    Section {
        x: [f64; 2],
        bottom: Vec<[f64; 2]>,
        top: Vec<[f64; 2]>,
        size: f64,
        width: f64,
        #[serde(default = "one")]
        layers: usize,
    },
    /// Trapezoidal section with base `[b0, b1]` at z = 0 and crest `[c0, c1]`
    /// at z = `height`; sets `upstream_face` (x = b0 … c0 side),
    /// `downstream_face` and `base`.
    Trapezoid {
        base: [f64; 2],
        crest: [f64; 2],
        height: f64,
        nx: usize,
        nz: usize,
        thickness: f64,
    },
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamLayout {
    Polyhedral,
    Hex,
    Octree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSelector {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoxSelector {
    fn contains(&self, p: &crate::mesh::Point3, tol: f64) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] - tol && p[a] <= self.max[a] + tol)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub name: String,
    pub k: Conductivity,
    #[serde(default)]
    pub ss: f64,
}

/// Scalar, principal values or full symmetric tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Conductivity {
    Isotropic(f64),
    Diagonal([f64; 3]),
    Tensor([[f64; 3]; 3]),
}

impl MaterialSpec {
    pub fn to_material(&self) -> Result<Material> {
        let k = match &self.k {
            Conductivity::Isotropic(v) => Matrix3::from_diagonal_element(*v),
            Conductivity::Diagonal(d) => Matrix3::from_diagonal(&(*d).into()),
            Conductivity::Tensor(t) => Matrix3::from_fn(|i, j| t[i][j]),
        };
        let m = Material {
            name: self.name.clone(),
            k,
            ss: self.ss,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementMaterials {
    /// Material name per element.
    List(Vec<String>),
    /// First matching zone by element centroid; unmatched elements take
    /// `default`.
    Zones { default: String, zones: Vec<Zone> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub material: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisKind {
    Steady,
    Transient {
        dt: f64,
        n_steps: usize,
        #[serde(default = "one")]
        output_stride: usize,
        initial_head: f64,
    },
    FreeSurface {
        upstream_set: String,
        upstream_head: f64,
        downstream_set: String,
        downstream_head: f64,
        /// y of the sample columns; the lowest y of the mesh when absent.
        #[serde(default)]
        column_y: Option<f64>,
        #[serde(default)]
        config: Option<FreeSurfaceConfig>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverSpec {
    #[default]
    Direct,
    Cg {
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        max_iter: Option<usize>,
    },
}

impl SolverSpec {
    pub fn to_solver(self) -> LinearSolver {
        match (self, LinearSolver::cg()) {
            (SolverSpec::Direct, _) => LinearSolver::Direct,
            (
                SolverSpec::Cg { tol, max_iter },
                LinearSolver::Cg {
                    tol: t0,
                    max_iter: m0,
                },
            ) => LinearSolver::Cg {
                tol: tol.unwrap_or(t0),
                max_iter: max_iter.unwrap_or(m0),
            },
            (SolverSpec::Cg { .. }, other) => other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub gauss_order: usize,
    pub subdivisions: usize,
    pub max_condition: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        let o = ElementOptions::default();
        Self {
            gauss_order: o.gauss_order,
            subdivisions: o.subdivisions,
            max_condition: o.max_condition,
        }
    }
}

impl QuadratureSpec {
    pub fn to_options(self) -> ElementOptions {
        ElementOptions {
            gauss_order: self.gauss_order,
            subdivisions: self.subdivisions,
            max_condition: self.max_condition,
        }
    }
}

/// Known answer the run is scored against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    /// `h = a + g·x` at every node.
    Linear { a: f64, gradient: [f64; 3] },
    /// Final monitor heads.
    Monitors { values: BTreeMap<String, f64> },
    /// Free-surface exit elevation on the downstream face.
    ExitElevation { value: f64 },
    /// Step change at the top of a column, sampled at monitors.
    ColumnSeries {
        length: f64,
        diffusivity: f64,
        h0: f64,
        h1: f64,
        terms: usize,
    },
    /// Linear tetrahedral solution on the same mesh, compared at monitors.
    TetCrossCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub vtk: bool,
    pub monitors_csv: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            vtk: true,
            monitors_csv: true,
        }
    }
}

/// Case with its mesh built and materials resolved.
#[derive(Clone, Debug)]
pub struct PreparedCase {
    pub case: AnalysisCase,
    pub mesh: Mesh,
    pub materials: Vec<Material>,
    pub options: ElementOptions,
    pub solver: LinearSolver,
}

/// Parses a case, reporting line and column on failure.
pub fn parse_case(text: &str) -> Result<AnalysisCase> {
    serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
}

pub fn load_case(path: impl AsRef<Path>) -> Result<AnalysisCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_case(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

impl MeshSource {
    /// Same generator at another element size.
    pub fn with_size(&self, s: f64) -> Result<MeshSource> {
        let mut out = self.clone();
        match &mut out {
            MeshSource::ConcreteDam {
                layout: DamLayout::Octree,
                ..
            } => {
                return Err(Error::Config(
                    "octree dam meshes are sized by levels, not size".into(),
                ))
            }
            MeshSource::ConcreteDam { size, .. } | MeshSource::Box { size, .. } => {
                *size = Some(s);
                if let MeshSource::Box { divisions, .. } = &mut out {
                    *divisions = None;
                }
            }
            MeshSource::Column { size, .. } | MeshSource::Section { size, .. } => *size = s,
            _ => return Err(Error::Config("mesh generator has no size parameter".into())),
        }
        Ok(out)
    }

    pub fn build(&self, base_dir: &Path) -> Result<Mesh> {
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| Error::Config(format!("{what} is required")))
        };
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("{what} must be positive, got {v}")))
            }
        };
        let mesh = match self {
            MeshSource::File { path, format } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                let fmt = format
                    .or_else(|| MeshFormat::from_path(&full))
                    .ok_or_else(|| {
                        Error::Config(format!("cannot tell the format of {}", full.display()))
                    })?;
                return load_mesh(&full, fmt);
            }
            MeshSource::Patch => bench::patch_test().mesh,
            MeshSource::ConcreteDam {
                layout,
                size,
                ny,
                levels,
                region,
            } => match layout {
                DamLayout::Polyhedral => {
                    bench::concrete_dam_polyhedral(positive(need(*size, "size")?, "size")?).mesh
                }
                DamLayout::Hex => {
                    let s = positive(need(*size, "size")?, "size")?;
                    let ny = ny.unwrap_or(((bench::DAM_WIDTH / s).round() as usize).max(1));
                    bench::concrete_dam_hex(s, ny).mesh
                }
                DamLayout::Octree => {
                    let r =
                        region.ok_or_else(|| Error::Config("octree dam needs a region".into()))?;
                    bench::concrete_dam_octree(
                        levels.unwrap_or(1),
                        ny.unwrap_or(1),
                        Aabb::new(r[0], r[1]),
                    )?
                    .mesh
                }
            },
            MeshSource::RectangularDam {
                width,
                height,
                n,
                refine,
                x_band,
                z_band,
            } => {
                if *n == 0 || *refine == 0 {
                    return Err(Error::Config(
                        "rectangular dam needs n ≥ 1 and refine ≥ 1".into(),
                    ));
                }
                bench::rectangular_dam_mesh(
                    positive(*width, "width")?,
                    positive(*height, "height")?,
                    *n,
                    *refine,
                    *x_band,
                    *z_band,
                )
            }
            MeshSource::Column { height, size } => {
                let n = ((positive(*height, "height")? / positive(*size, "size")?).round()
                    as usize)
                    .max(1);
                let mut mesh = box_grid(Aabb::new([0.0; 3], [1.0, 1.0, *height]), [1, 1, n]);
                let tol = 1e-9 * height;
                let top = mesh.select_nodes(|p| (p.z - height).abs() < tol);
                let bottom = mesh.select_nodes(|p| p.z.abs() < tol);
                mesh.node_sets.insert("top".into(), top);
                mesh.node_sets.insert("bottom".into(), bottom);
                mesh
            }
            MeshSource::Box {
                min,
                max,
                divisions,
                size,
            } => {
                let d = match (divisions, size) {
                    (Some(d), _) => *d,
                    (None, Some(s)) => {
                        let s = positive(*s, "size")?;
                        [0, 1, 2].map(|a| (((max[a] - min[a]) / s).round() as usize).max(1))
                    }
                    (None, None) => {
                        return Err(Error::Config("box needs divisions or size".into()))
                    }
                };
                if d.contains(&0) || (0..3).any(|a| max[a] <= min[a]) {
                    return Err(Error::Config("empty box".into()));
                }
                box_grid(Aabb::new(*min, *max), d)
            }
            MeshSource::OctreeBox {
                min,
                max,
                divisions,
                region,
                levels,
            } => octree_refine_box(
                Aabb::new(*min, *max),
                *divisions,
                Aabb::new(region[0], region[1]),
                *levels,
            )?,
            MeshSource::Section {
                x,
                bottom,
                top,
                size,
                width,
                layers,
            } => section_mesh(*x, bottom, top, *size, *width, *layers)?,
            MeshSource::Trapezoid {
                base,
                crest,
                height,
                nx,
                nz,
                thickness,
            } => trapezoid_mesh(*base, *crest, *height, *nx, *nz, *thickness)?,
        };
        let report = validate_mesh(&mesh);
        if !report.is_empty() {
            return Err(Error::Validation(report.to_string()));
        }
        Ok(mesh)
    }
}

fn polyline_at(pts: &[[f64; 2]], x: f64) -> f64 {
    if x <= pts[0][0] {
        return pts[0][1];
    }
    for w in pts.windows(2) {
        if x <= w[1][0] {
            let t = (x - w[0][0]) / (w[1][0] - w[0][0]);
            return w[0][1] + t * (w[1][1] - w[0][1]);
        }
    }
    pts[pts.len() - 1][1]
}

fn check_polyline(pts: &[[f64; 2]], what: &str) -> Result<()> {
    if pts.is_empty() || pts.windows(2).any(|w| !(w[1][0] > w[0][0])) {
        return Err(Error::Config(format!(
            "{what} polyline needs strictly increasing x"
        )));
    }
    Ok(())
}

fn layers_over(width: f64, layers: usize) -> Vec<f64> {
    (0..=layers)
        .map(|j| width * j as f64 / layers as f64)
        .collect()
}

fn section_mesh(
    x: [f64; 2],
    bottom: &[[f64; 2]],
    top: &[[f64; 2]],
    size: f64,
    width: f64,
    layers: usize,
) -> Result<Mesh> {
    check_polyline(bottom, "bottom")?;
    check_polyline(top, "top")?;
    if !(size > 0.0 && width > 0.0 && layers > 0 && x[1] > x[0]) {
        return Err(Error::Config(
            "section needs x0 < x1 and positive size, width, layers".into(),
        ));
    }
    let thick = (0..=64)
        .map(|i| {
            let xi = x[0] + (x[1] - x[0]) * i as f64 / 64.0;
            polyline_at(top, xi) - polyline_at(bottom, xi)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if !(thick > 0.0)
        || (0..=64).any(|i| {
            let xi = x[0] + (x[1] - x[0]) * i as f64 / 64.0;
            polyline_at(top, xi) <= polyline_at(bottom, xi)
        })
    {
        return Err(Error::Config(
            "section top must lie above its bottom".into(),
        ));
    }
    let nu = (((x[1] - x[0]) / size).round() as usize).max(1);
    let nv = ((thick / size).round() as usize).max(1);
    let section = mapped_quads(nu, nv, |u, v| {
        let xi = x[0] + u * (x[1] - x[0]);
        let (zb, zt) = (polyline_at(bottom, xi), polyline_at(top, xi));
        [xi, zb + v * (zt - zb)]
    });
    let mut mesh = extrude_polygons(&section, &layers_over(width, layers));
    let tol = 1e-9 * (x[1] - x[0]).max(thick);
    let on_top = mesh.select_nodes(|p| (p.z - polyline_at(top, p.x)).abs() < tol);
    let on_bottom = mesh.select_nodes(|p| (p.z - polyline_at(bottom, p.x)).abs() < tol);
    let left = mesh.select_nodes(|p| (p.x - x[0]).abs() < tol);
    let right = mesh.select_nodes(|p| (p.x - x[1]).abs() < tol);
    for (name, set) in [
        ("top", on_top),
        ("bottom", on_bottom),
        ("left", left),
        ("right", right),
    ] {
        mesh.node_sets.insert(name.into(), set);
    }
    Ok(mesh)
}

fn trapezoid_mesh(
    base: [f64; 2],
    crest: [f64; 2],
    height: f64,
    nx: usize,
    nz: usize,
    thickness: f64,
) -> Result<Mesh> {
    if !(base[1] > base[0]
        && crest[1] > crest[0]
        && height > 0.0
        && thickness > 0.0
        && nx > 0
        && nz > 0)
    {
        return Err(Error::Config(
            "trapezoid needs ordered base and crest and positive sizes".into(),
        ));
    }
    let xl = |v: f64| base[0] + v * (crest[0] - base[0]);
    let xr = |v: f64| base[1] + v * (crest[1] - base[1]);
    let section = mapped_quads(nx, nz, |u, v| [xl(v) + u * (xr(v) - xl(v)), v * height]);
    let mut mesh = extrude_polygons(&section, &[0.0, thickness]);
    let tol = 1e-9 * (base[1] - base[0]).max(height);
    let up = mesh.select_nodes(|p| (p.x - xl(p.z / height)).abs() < tol);
    let down = mesh.select_nodes(|p| (p.x - xr(p.z / height)).abs() < tol);
    let bottom = mesh.select_nodes(|p| p.z.abs() < tol);
    mesh.node_sets.insert("upstream_face".into(), up);
    mesh.node_sets.insert("downstream_face".into(), down);
    mesh.node_sets.insert("base".into(), bottom);
    Ok(mesh)
}

impl AnalysisCase {
    /// Builds the mesh, adds the case's selections, resolves materials and
    /// checks that every referenced set exists.
    pub fn prepare(&self, base_dir: &Path) -> Result<PreparedCase> {
        self.prepare_with_mesh(self.mesh.build(base_dir)?)
    }

    pub fn prepare_with_mesh(&self, mut mesh: Mesh) -> Result<PreparedCase> {
        let tol = 1e-9 * mesh.bounding_box().diagonal();
        for (name, sel) in &self.node_sets {
            let nodes = mesh.select_nodes(|p| sel.contains(p, tol));
            if nodes.is_empty() {
                return Err(Error::Config(format!("node set {name} selects no nodes")));
            }
            mesh.node_sets.insert(name.clone(), nodes);
        }
        for (name, sel) in &self.face_sets {
            let faces = mesh.select_boundary_faces(|p| sel.contains(p, tol));
            if faces.is_empty() {
                return Err(Error::Config(format!(
                    "face set {name} selects no boundary faces"
                )));
            }
            mesh.face_sets.insert(name.clone(), faces);
        }
        if self.materials.is_empty() {
            return Err(Error::Config("at least one material is required".into()));
        }
        let table: Vec<Material> = self
            .materials
            .iter()
            .map(MaterialSpec::to_material)
            .collect::<Result<_>>()?;
        let by_name = |n: &str| {
            table
                .iter()
                .find(|m| m.name == n)
                .cloned()
                .ok_or_else(|| Error::Config(format!("unknown material {n}")))
        };
        let materials = match &self.element_materials {
            None => vec![table[0].clone(); mesh.num_elements()],
            Some(ElementMaterials::List(names)) => {
                if names.len() != mesh.num_elements() {
                    return Err(Error::Config(format!(
                        "element_materials lists {} entries for {} elements",
                        names.len(),
                        mesh.num_elements()
                    )));
                }
                names.iter().map(|n| by_name(n)).collect::<Result<_>>()?
            }
            Some(ElementMaterials::Zones { default, zones }) => {
                let fallback = by_name(default)?;
                let zone_mats: Vec<Material> = zones
                    .iter()
                    .map(|z| by_name(&z.material))
                    .collect::<Result<_>>()?;
                (0..mesh.num_elements())
                    .map(|e| {
                        let c = mesh.element_volume_centroid(e).1;
                        zones
                            .iter()
                            .position(|z| (0..3).all(|a| c[a] >= z.min[a] && c[a] <= z.max[a]))
                            .map_or_else(|| fallback.clone(), |i| zone_mats[i].clone())
                    })
                    .collect()
            }
        };
        let node_set = |n: &str| {
            if mesh.node_sets.contains_key(n) {
                Ok(())
            } else {
                Err(Error::Config(format!("unknown node set {n}")))
            }
        };
        for d in &self.boundary.dirichlet {
            node_set(&d.node_set)?;
        }
        for f in &self.boundary.flux {
            if !mesh.face_sets.contains_key(&f.face_set) {
                return Err(Error::Config(format!("unknown face set {}", f.face_set)));
            }
        }
        match &self.analysis {
            AnalysisKind::Steady => {
                if self.boundary.dirichlet.is_empty() {
                    return Err(Error::Config(
                        "steady analysis needs a prescribed head".into(),
                    ));
                }
            }
            AnalysisKind::Transient {
                dt,
                n_steps,
                output_stride,
                initial_head,
            } => {
                TimeConfig {
                    dt: *dt,
                    n_steps: *n_steps,
                    output_stride: *output_stride,
                }
                .validate()?;
                if !initial_head.is_finite() {
                    return Err(Error::Config("initial_head must be finite".into()));
                }
            }
            AnalysisKind::FreeSurface {
                upstream_set,
                downstream_set,
                config,
                upstream_head,
                downstream_head,
                ..
            } => {
                node_set(upstream_set)?;
                node_set(downstream_set)?;
                if upstream_head < downstream_head {
                    return Err(Error::Config(
                        "upstream head is below the downstream head".into(),
                    ));
                }
                config.unwrap_or_default().validate()?;
            }
        }
        match (&self.reference, &self.analysis) {
            (Some(Reference::ExitElevation { .. }), AnalysisKind::FreeSurface { .. }) => {}
            (Some(Reference::ExitElevation { .. }), _) => {
                return Err(Error::Config(
                    "exit_elevation reference needs a free_surface analysis".into(),
                ))
            }
            (Some(Reference::ColumnSeries { .. }), AnalysisKind::Transient { .. }) => {}
            (Some(Reference::ColumnSeries { .. }), _) => {
                return Err(Error::Config(
                    "column_series reference needs a transient analysis".into(),
                ))
            }
            (Some(Reference::TetCrossCheck), AnalysisKind::Steady) => {}
            (Some(Reference::TetCrossCheck), _) => {
                return Err(Error::Config(
                    "tet_cross_check reference needs a steady analysis".into(),
                ))
            }
            (Some(Reference::Monitors { values }), _) => {
                for label in values.keys() {
                    if !self.boundary.monitors.iter().any(|m| &m.label == label) {
                        return Err(Error::Config(format!(
                            "reference names unknown monitor {label}"
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(PreparedCase {
            case: self.clone(),
            mesh,
            materials,
            options: self.quadrature.to_options(),
            solver: self.solver.to_solver(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "cube",
        "mesh": {"generator": "box", "min": [0, 0, 0], "max": [1, 1, 1], "divisions": [2, 2, 2]},
        "node_sets": {"top": {"min": [0, 0, 1], "max": [1, 1, 1]}, "bottom": {"min": [0, 0, 0], "max": [1, 1, 0]}},
        "materials": [{"name": "a", "k": 1e-5}],
        "boundary": {"dirichlet": [{"node_set": "top", "head": 2.0}, {"node_set": "bottom", "head": 1.0}]},
        "analysis": {"kind": "steady"}
    }"#;

    #[test]
    fn minimal_case_prepares() {
        let case = parse_case(MINIMAL).unwrap();
        let p = case.prepare(Path::new(".")).unwrap();
        assert_eq!(p.mesh.num_elements(), 8);
        assert_eq!(p.mesh.node_sets["top"].len(), 9);
        assert_eq!(p.materials.len(), 8);
        assert_eq!(p.solver, LinearSolver::Direct);
    }

    #[test]
    fn unknown_field_reports_position() {
        let bad = MINIMAL.replace("\"analysis\"", "\"analysys\"");
        match parse_case(&bad) {
            Err(Error::Config(m)) => assert!(m.starts_with("line "), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_set_is_config_error() {
        let bad = MINIMAL.replace("\"node_set\": \"top\"", "\"node_set\": \"lid\"");
        let case = parse_case(&bad).unwrap();
        assert!(matches!(case.prepare(Path::new(".")), Err(Error::Config(m)) if m.contains("lid")));
    }

    #[test]
    fn conductivity_forms() {
        let k = |text: &str| {
            serde_json::from_str::<MaterialSpec>(text)
                .unwrap()
                .to_material()
                .unwrap()
                .k
        };
        assert_eq!(
            k(r#"{"name": "a", "k": 2.0}"#),
            Matrix3::from_diagonal_element(2.0)
        );
        assert_eq!(k(r#"{"name": "a", "k": [1, 2, 3]}"#)[(2, 2)], 3.0);
        assert_eq!(
            k(r#"{"name": "a", "k": [[2, 1, 0], [1, 2, 0], [0, 0, 1]]}"#)[(0, 1)],
            1.0
        );
        let bad: MaterialSpec =
            serde_json::from_str(r#"{"name": "a", "k": [[1, 2, 0], [0, 1, 0], [0, 0, 1]]}"#)
                .unwrap();
        assert!(bad.to_material().is_err());
    }

    #[test]
    fn zones_assign_by_centroid() {
        let mut text = MINIMAL.replace(
            "[{\"name\": \"a\", \"k\": 1e-5}]",
            "[{\"name\": \"a\", \"k\": 1e-5}, {\"name\": \"b\", \"k\": 1e-8}]",
        );
        text = text.replace(
            "\"analysis\"",
            "\"element_materials\": {\"default\": \"a\", \"zones\": [{\"material\": \"b\", \"min\": [0, 0, 0], \"max\": [0.5, 1, 1]}]}, \"analysis\"",
        );
        let p = parse_case(&text).unwrap().prepare(Path::new(".")).unwrap();
        let n_b = p.materials.iter().filter(|m| m.name == "b").count();
        assert_eq!(n_b, 4);
    }

    #[test]
    fn generators_resize() {
        let s = MeshSource::Column {
            height: 4.0,
            size: 1.0,
        };
        let m = s.with_size(0.5).unwrap().build(Path::new(".")).unwrap();
        assert_eq!(m.num_elements(), 8);
        assert!(MeshSource::Patch.with_size(1.0).is_err());
    }

    #[test]
    fn section_and_trapezoid_are_valid() {
        let s = MeshSource::Section {
            x: [0.0, 10.0],
            bottom: vec![[0.0, 0.0], [4.0, -2.0], [10.0, 0.0]],
            top: vec![[0.0, 5.0], [10.0, 5.0]],
            size: 1.0,
            width: 1.0,
            layers: 1,
        };
        let m = s.build(Path::new(".")).unwrap();
        let v: f64 = (0..m.num_elements()).map(|e| m.element_volume(e)).sum();
        // Area 50 plus the 2 m deep triangular dip of 10 m base.
        assert!((v - 60.0).abs() < 1e-9, "{v}");
        let t = MeshSource::Trapezoid {
            base: [0.0, 10.0],
            crest: [0.0, 2.0],
            height: 5.0,
            nx: 6,
            nz: 5,
            thickness: 0.5,
        };
        let m = t.build(Path::new(".")).unwrap();
        let v: f64 = (0..m.num_elements()).map(|e| m.element_volume(e)).sum();
        assert!((v - 30.0 * 0.5).abs() < 1e-9, "{v}");
        assert!(m.node_sets["downstream_face"].len() == 2 * 6);
    }
}
