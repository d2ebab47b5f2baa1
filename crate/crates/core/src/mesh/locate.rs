use super::{Aabb, Mesh, Point3};

/// Uniform bins over the mesh bounding box listing the elements whose boxes
/// overlap each bin.
#[derive(Clone, Debug, Default)]
pub struct ElementLocator {
    bb: Option<Aabb>,
    dims: [usize; 3],
    bins: Vec<Vec<usize>>,
}

impl ElementLocator {
    pub fn new(mesh: &Mesh) -> Self {
        if mesh.num_elements() == 0 {
            return Self::default();
        }
        let bb = mesh.bounding_box();
        // About one element per bin, distributed by extent.
        let target = (mesh.num_elements() as f64).max(1.0);
        let ext: Vec<f64> = (0..3)
            .map(|a| bb.extent(a).max(1e-12 * bb.diagonal()))
            .collect();
        let unit = (ext[0] * ext[1] * ext[2] / target).cbrt();
        let dims = [0, 1, 2].map(|a| ((ext[a] / unit).round() as usize).clamp(1, 256));
        let mut bins = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let cell = |p: [f64; 3], a: usize| -> usize {
            let t = (p[a] - bb.min[a]) / ext[a] * dims[a] as f64;
            (t.floor().max(0.0) as usize).min(dims[a] - 1)
        };
        for e in 0..mesh.num_elements() {
            let eb = mesh.element_bounding_box(e);
            let lo = [0, 1, 2].map(|a| cell(eb.min, a));
            let hi = [0, 1, 2].map(|a| cell(eb.max, a));
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        bins[(k * dims[1] + j) * dims[0] + i].push(e);
                    }
                }
            }
        }
        Self {
            bb: Some(bb),
            dims,
            bins,
        }
    }

    /// Elements that may contain `p`, or nothing when it is clearly outside
    /// the mesh box.
    pub fn candidates(&self, p: &Point3) -> &[usize] {
        let Some(bb) = self.bb else { return &[] };
        if !bb.contains(p, 1e-9 * bb.diagonal()) {
            return &[];
        }
        let idx = [0, 1, 2].map(|a| {
            let ext = bb.extent(a).max(1e-12 * bb.diagonal());
            let t = (p[a] - bb.min[a]) / ext * self.dims[a] as f64;
            (t.floor().max(0.0) as usize).min(self.dims[a] - 1)
        });
        &self.bins[(idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0]]
    }
}
