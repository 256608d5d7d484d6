use crate::error::Result;
use crate::geometry::GridGeometry;
use crate::gridmap::BeliefMap;
use crate::logodds::{log_sum_exp, LogOdds};
use crate::mutinfo::{trajectory_mi, InformationModel};
use crate::sensor::{SensorParams, SensorPose};

/// Scores the information a candidate trajectory is expected to collect.
/// The planner divides this utility by the trajectory cost.
pub trait Strategy: Send + Sync {
    fn name(&self) -> &str;

    fn utility(
        &self,
        map: &dyn BeliefMap,
        sensor: &SensorParams,
        poses: &[SensorPose],
    ) -> Result<f64>;
}

/// Multi-class mutual information of the trajectory.
#[derive(Debug, Clone, Copy, Default)]
pub struct SemanticMi;

impl Strategy for SemanticMi {
    fn name(&self) -> &str {
        "semantic"
    }

    fn utility(
        &self,
        map: &dyn BeliefMap,
        sensor: &SensorParams,
        poses: &[SensorPose],
    ) -> Result<f64> {
        let model = InformationModel::new(sensor, map.prior())?;
        trajectory_mi(poses, sensor, map, &model)
    }
}

/// Mutual information with every object class merged into one occupied
/// class, for both the map and the sensor model.
#[derive(Debug, Clone, Copy, Default)]
pub struct BinaryMi;

impl Strategy for BinaryMi {
    fn name(&self) -> &str {
        "binary"
    }

    fn utility(
        &self,
        map: &dyn BeliefMap,
        sensor: &SensorParams,
        poses: &[SensorPose],
    ) -> Result<f64> {
        let view = BinaryView::new(map);
        let sensor = binary_sensor(sensor);
        let model = InformationModel::new(&sensor, view.prior())?;
        trajectory_mi(poses, &sensor, &view, &model)
    }
}

/// Constant utility: the score reduces to the inverse path cost, so the
/// nearest frontier wins.
#[derive(Debug, Clone, Copy, Default)]
pub struct NearestFrontier;

impl Strategy for NearestFrontier {
    fn name(&self) -> &str {
        "frontier"
    }

    fn utility(&self, _: &dyn BeliefMap, _: &SensorParams, _: &[SensorPose]) -> Result<f64> {
        Ok(1.0)
    }
}

/// Log odds of "any object class" against free: `log sum_{k>=1} exp(h_k)`.
pub fn collapse_to_binary(h: &LogOdds) -> f64 {
    log_sum_exp(&h.as_slice()[1..])
}

fn collapse(h: &LogOdds) -> LogOdds {
    LogOdds::new([0.0, collapse_to_binary(h)]).expect("finite log odds")
}

/// Two-class view of a multi-class belief map.
pub struct BinaryView<'a> {
    inner: &'a dyn BeliefMap,
    prior: LogOdds,
}

impl<'a> BinaryView<'a> {
    pub fn new(inner: &'a dyn BeliefMap) -> Self {
        Self {
            prior: collapse(inner.prior()),
            inner,
        }
    }
}

impl BeliefMap for BinaryView<'_> {
    fn geometry(&self) -> &GridGeometry {
        self.inner.geometry()
    }

    fn prior(&self) -> &LogOdds {
        &self.prior
    }

    fn log_odds(&self, cell: usize) -> LogOdds {
        collapse(&self.inner.log_odds(cell))
    }
}

/// Two-class sensor model. A hit raises the occupied log odds by the mean
/// over labels of the collapsed occupied increment; a pass adds the
/// collapsed free increment. Single-class parameters are returned as is.
pub fn binary_sensor(params: &SensorParams) -> SensorParams {
    let k = params.num_classes();
    if k == 1 {
        return params.clone();
    }
    let phi = collapse_to_binary(&params.phi_plus);
    let hit = (1..=k)
        .map(|y| collapse_to_binary(&params.occupied_log_odds(y).expect("valid class")))
        .sum::<f64>()
        / k as f64;
    let lo = |x: f64| LogOdds::new([0.0, x]).expect("finite log odds");
    // the collapsed pass increment is only meaningful relative to the
    // collapsed prior, so it may be positive and skips validation
    SensorParams {
        phi_plus: lo(phi),
        psi_plus: lo(hit - phi),
        phi_minus: lo(collapse_to_binary(&params.phi_minus)),
        r_max: params.r_max,
        rays: params.rays.clone(),
    }
}

/// Strategies addressable by name.
pub struct StrategyRegistry {
    entries: Vec<Box<dyn Strategy>>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(SemanticMi));
        r.register(Box::new(BinaryMi));
        r.register(Box::new(NearestFrontier));
        r
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// Adds a strategy, replacing any with the same name.
    pub fn register(&mut self, strategy: Box<dyn Strategy>) {
        self.entries.retain(|s| s.name() != strategy.name());
        self.entries.push(strategy);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Strategy> {
        self.entries
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|s| s.name()).collect()
    }
}
