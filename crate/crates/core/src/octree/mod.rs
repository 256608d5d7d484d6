//! Semantic octree over a cubic region anchored at the origin.
//!
//! Leaves live at `max_depth`; every node has either no children or all
//! eight, indexed in Morton order (bit 0 = x, bit 1 = y, bit 2 = z). Inner
//! states are the left fold of [`fuse_children`] over the children, and
//! eight identical leaf children are pruned into their parent.

mod io;
mod node;

pub use io::{read_octree, write_octree, OctreeStats, FORMAT_VERSION, MAGIC};
pub use node::{fuse_children, node_update, NodeObservation, NodeState, OctreeParams, TOP_SLOTS};

use crate::error::{Error, Result};
use crate::geometry::{GridGeometry, Point3};
use crate::gridmap::BeliefMap;
use crate::logodds::LogOdds;
use crate::sensor::{beam_trace, Measurement, SensorParams};

#[derive(Debug, Clone, PartialEq)]
pub struct OctreeNode {
    state: NodeState,
    children: Option<Box<[OctreeNode; 8]>>,
    dirty: bool,
}

impl OctreeNode {
    pub fn leaf(state: NodeState) -> Self {
        Self {
            state,
            children: None,
            dirty: false,
        }
    }

    pub fn state(&self) -> &NodeState {
        &self.state
    }

    pub fn children(&self) -> Option<&[OctreeNode; 8]> {
        self.children.as_deref()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    fn expand(&mut self) -> &mut [OctreeNode; 8] {
        let state = self.state;
        self.children
            .get_or_insert_with(|| Box::new(std::array::from_fn(|_| OctreeNode::leaf(state))))
    }

    fn count(&self, nodes: &mut usize, leaves: &mut usize, hist: &mut Vec<usize>, depth: usize) {
        *nodes += 1;
        match &self.children {
            None => {
                *leaves += 1;
                if hist.len() <= depth {
                    hist.resize(depth + 1, 0);
                }
                hist[depth] += 1;
            }
            Some(ch) => ch
                .iter()
                .for_each(|c| c.count(nodes, leaves, hist, depth + 1)),
        }
    }
}

/// Replaces eight identical leaf children by their common state.
///
/// Returns whether the node was pruned. Class ids and all four log ratios
/// must match exactly.
pub fn try_prune(node: &mut OctreeNode) -> bool {
    let Some(children) = node.children.as_deref() else {
        return false;
    };
    let first = children[0].state;
    if children.iter().all(|c| c.is_leaf() && c.state == first) {
        node.state = first;
        node.children = None;
        true
    } else {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticOctree {
    params: OctreeParams,
    num_classes: usize,
    root: OctreeNode,
    pruning: bool,
    leaf_geometry: GridGeometry,
    prior: LogOdds,
}

impl SemanticOctree {
    pub fn new(params: OctreeParams, num_classes: usize) -> Result<Self> {
        params.validate()?;
        if num_classes == 0 {
            return Err(Error::TooFewClasses(1));
        }
        if num_classes >= u8::MAX as usize {
            return Err(Error::InvalidParameter {
                name: "num_classes",
                reason: format!("at most {} classes supported", u8::MAX - 1),
            });
        }
        let side = 1usize << params.max_depth;
        Ok(Self {
            params,
            num_classes,
            root: OctreeNode::leaf(NodeState::prior(num_classes, &params)),
            pruning: true,
            leaf_geometry: GridGeometry::new([side; 3], params.resolution)?,
            prior: LogOdds::zeros(num_classes),
        })
    }

    /// Builds a tree top-down. `classify(lo, size)` returns a state when the
    /// cube is homogeneous; it must return one for every leaf-sized cube.
    pub fn from_classifier<F>(params: OctreeParams, num_classes: usize, classify: F) -> Result<Self>
    where
        F: Fn(Point3, f64) -> Option<NodeState>,
    {
        let mut tree = Self::new(params, num_classes)?;
        let size = tree.size();
        tree.root = tree.build(&classify, [0.0; 3], size, 0)?;
        Ok(tree)
    }

    fn build<F>(&self, classify: &F, lo: Point3, size: f64, depth: u8) -> Result<OctreeNode>
    where
        F: Fn(Point3, f64) -> Option<NodeState>,
    {
        if let Some(state) = classify(lo, size) {
            return Ok(OctreeNode::leaf(state));
        }
        if depth == self.params.max_depth {
            return Err(Error::InvalidParameter {
                name: "classify",
                reason: format!("no state for leaf cube at {lo:?}"),
            });
        }
        let half = size / 2.0;
        let mut children = Vec::with_capacity(8);
        for i in 0..8 {
            let child_lo =
                std::array::from_fn(|a| lo[a] + if i >> a & 1 == 1 { half } else { 0.0 });
            children.push(self.build(classify, child_lo, half, depth + 1)?);
        }
        let children: [OctreeNode; 8] = children.try_into().expect("eight children");
        let mut node = OctreeNode {
            state: self.fuse_all(&children),
            children: Some(Box::new(children)),
            dirty: false,
        };
        if self.pruning {
            try_prune(&mut node);
        }
        Ok(node)
    }

    pub fn params(&self) -> &OctreeParams {
        &self.params
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn root(&self) -> &OctreeNode {
        &self.root
    }

    /// Edge length of the root cube.
    pub fn size(&self) -> f64 {
        self.params.resolution * (1u64 << self.params.max_depth) as f64
    }

    /// The grid of leaf-sized cells covering the tree.
    pub fn leaf_geometry(&self) -> &GridGeometry {
        &self.leaf_geometry
    }

    pub fn set_pruning(&mut self, enabled: bool) {
        self.pruning = enabled;
    }

    fn prior_state(&self) -> NodeState {
        NodeState::prior(self.num_classes, &self.params)
    }

    fn fuse_all(&self, children: &[OctreeNode; 8]) -> NodeState {
        children[1..].iter().fold(children[0].state, |acc, c| {
            fuse_children(&acc, &c.state, self.num_classes, &self.params)
        })
    }

    /// Applies an observation to the leaf at integer leaf coordinates,
    /// expanding pruned or unexplored nodes on the way down.
    pub fn update_leaf(
        &mut self,
        coords: [usize; 3],
        obs: NodeObservation,
        sensor: &SensorParams,
    ) -> Result<()> {
        let depth = self.params.max_depth as usize;
        let params = self.params;
        let mut node = &mut self.root;
        for level in 0..depth {
            node.dirty = true;
            let shift = depth - level - 1;
            let idx = (0..3)
                .map(|a| ((coords[a] >> shift) & 1) << a)
                .sum::<usize>();
            node = &mut node.expand()[idx];
        }
        node.state = node_update(&node.state, obs, sensor, &params)?;
        Ok(())
    }

    /// Ray-casts every beam at leaf resolution, updates the observed leaves
    /// and then refreshes inner nodes (fusion and pruning) along the touched
    /// paths.
    pub fn integrate_scan(&mut self, scan: &[Measurement], sensor: &SensorParams) -> Result<()> {
        if sensor.num_classes() != self.num_classes {
            return Err(Error::LengthMismatch {
                expected: self.num_classes,
                actual: sensor.num_classes(),
            });
        }
        let traces = scan
            .iter()
            .map(|m| beam_trace(&self.leaf_geometry, sensor, m).map(|t| (m.label, t)))
            .collect::<Result<Vec<_>>>()?;
        for (label, trace) in traces {
            for (pos, &cell) in trace.cells.iter().enumerate() {
                let obs = if trace.hit_index == Some(pos) {
                    NodeObservation::Class(label)
                } else {
                    NodeObservation::Free
                };
                self.update_leaf(self.leaf_geometry.coords(cell), obs, sensor)?;
            }
        }
        self.refresh();
        Ok(())
    }

    /// Recomputes dirty inner nodes bottom-up.
    pub fn refresh(&mut self) {
        let placeholder = OctreeNode::leaf(self.prior_state());
        let mut root = std::mem::replace(&mut self.root, placeholder);
        self.refresh_node(&mut root);
        self.root = root;
    }

    fn refresh_node(&self, node: &mut OctreeNode) {
        if !node.dirty {
            return;
        }
        node.dirty = false;
        let Some(children) = node.children.as_deref_mut() else {
            return;
        };
        for c in children.iter_mut() {
            self.refresh_node(c);
        }
        if !(self.pruning && try_prune(node)) {
            if let Some(children) = node.children.as_deref() {
                node.state = self.fuse_all(children);
            }
        }
    }

    /// Prunes every prunable node in the tree, bottom-up.
    pub fn prune_all(&mut self) -> usize {
        fn walk(node: &mut OctreeNode) -> usize {
            let mut n = 0;
            if let Some(children) = node.children.as_deref_mut() {
                for c in children.iter_mut() {
                    n += walk(c);
                }
            }
            n + usize::from(try_prune(node))
        }
        walk(&mut self.root)
    }

    /// Deepest stored node containing `point`, or its ancestor at
    /// `max_depth` when given. Returns the state and the node edge length.
    pub fn query(&self, point: Point3, max_depth: Option<u8>) -> Result<(NodeState, f64)> {
        let coords = self
            .leaf_geometry
            .cell_of(point)
            .ok_or(Error::OutOfBounds { point })?;
        let (node, depth) = self.locate(coords, max_depth.unwrap_or(self.params.max_depth));
        let size = self.params.resolution * (1u64 << (self.params.max_depth - depth)) as f64;
        Ok((node.state, size))
    }

    fn locate(&self, coords: [usize; 3], limit: u8) -> (&OctreeNode, u8) {
        let depth = self.params.max_depth as usize;
        let mut node = &self.root;
        let mut level = 0u8;
        while let Some(children) = node.children.as_deref() {
            if level >= limit {
                break;
            }
            let shift = depth - level as usize - 1;
            let idx = (0..3)
                .map(|a| ((coords[a] >> shift) & 1) << a)
                .sum::<usize>();
            node = &children[idx];
            level += 1;
        }
        (node, level)
    }

    /// Leaf state at integer leaf coordinates.
    pub fn leaf_state(&self, coords: [usize; 3]) -> NodeState {
        self.locate(coords, self.params.max_depth).0.state
    }

    pub fn stats(&self) -> OctreeStats {
        let (mut nodes, mut leaves, mut hist) = (0, 0, Vec::new());
        self.root.count(&mut nodes, &mut leaves, &mut hist, 0);
        OctreeStats {
            node_count: nodes,
            leaf_count: leaves,
            depth_histogram: hist,
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.stats().leaf_count
    }

    /// Checks the structural invariants of every node.
    pub fn validate(&self) -> Result<()> {
        fn walk(node: &OctreeNode, p: &OctreeParams) -> Result<()> {
            let s = node.state();
            let ok_sorted = s
                .top()
                .windows(2)
                .all(|w| w[0].1 >= w[1].1 && w[0].0 != w[1].0);
            let ok_range = s
                .top()
                .iter()
                .map(|t| t.1)
                .chain([s.others()])
                .all(|v| (p.min_thresh..=p.max_thresh).contains(&v));
            if !(ok_sorted && ok_range) {
                return Err(Error::Decode(format!("invalid node state {s:?}")));
            }
            if let Some(children) = node.children() {
                children.iter().try_for_each(|c| walk(c, p))?;
            }
            Ok(())
        }
        walk(&self.root, &self.params)
    }

    pub(crate) fn from_root(
        params: OctreeParams,
        num_classes: usize,
        root: OctreeNode,
    ) -> Result<Self> {
        let mut tree = Self::new(params, num_classes)?;
        tree.root = root;
        Ok(tree)
    }
}

impl BeliefMap for SemanticOctree {
    fn geometry(&self) -> &GridGeometry {
        &self.leaf_geometry
    }

    /// The octree always starts from a uniform belief.
    fn prior(&self) -> &LogOdds {
        &self.prior
    }

    fn log_odds(&self, cell: usize) -> LogOdds {
        self.leaf_state(self.leaf_geometry.coords(cell))
            .to_log_odds(self.num_classes)
    }
}
