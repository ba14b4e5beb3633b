use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::fe::CrackSpec;
use crate::hotr::{ordered_pairs, tr_surrogate, TransmissibilityRecord};
use crate::rom::SubBuilder;

/// Order of the transmissibility used for identification.
pub const IDENTIFICATION_ORDER: usize = 2;

/// `J = ‖Tr_s − Tr_m‖ / ‖Tr_m‖ × 100` over aligned record sets, with squared
/// complex magnitudes.
pub fn objective(
    simulated: &[TransmissibilityRecord],
    measured: &[TransmissibilityRecord],
) -> Result<f64> {
    if measured.is_empty() || simulated.len() != measured.len() {
        return Err(Error::invalid(
            "simulated and measured sets must be nonempty and of equal length",
        ));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (s, m) in simulated.iter().zip(measured) {
        if (s.m, s.n, s.order) != (m.m, m.n, m.order)
            || (s.omega - m.omega).abs() > 1e-9 * m.omega.abs()
        {
            return Err(Error::invalid(
                "simulated and measured records are not aligned",
            ));
        }
        num += (s.value - m.value).norm_sqr();
        den += m.value.norm_sqr();
    }
    if !(den > 0.0) {
        return Err(Error::invalid(
            "measured transmissibility is identically zero",
        ));
    }
    Ok((num / den).sqrt() * 100.0)
}

type Entry = Arc<std::result::Result<Vec<TransmissibilityRecord>, String>>;

/// Surrogate `T̂r_2` of candidate cracks at one frequency, memoized per crack.
/// The entries do not depend on the measurement, so one cache serves every
/// replicate of a campaign.
pub struct ForwardModel {
    builder: Arc<SubBuilder>,
    omega: f64,
    pairs: Vec<(usize, usize)>,
    cache: Mutex<HashMap<CrackSpec, Entry>>,
}

impl ForwardModel {
    pub fn new(builder: Arc<SubBuilder>, omega: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::invalid("measurement frequency must be positive"));
        }
        let sensors = builder.beam().config.sensor_columns.len();
        if sensors < 2 {
            return Err(Error::invalid("identification needs at least two sensors"));
        }
        Ok(ForwardModel {
            builder,
            omega,
            pairs: ordered_pairs(sensors),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn builder(&self) -> &SubBuilder {
        &self.builder
    }

    /// Candidates simulated so far.
    pub fn cached(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    fn compute(&self, crack: &CrackSpec) -> Result<Vec<TransmissibilityRecord>> {
        let model = self.builder.model(Some(crack))?;
        tr_surrogate(
            &model.structure.system,
            self.omega,
            &model.structure.sensors,
            &self.pairs,
            IDENTIFICATION_ORDER,
        )
    }

    /// Surrogate records for one crack; failures are cached as their message.
    pub fn simulate(&self, crack: &CrackSpec) -> Entry {
        if let Some(e) = self.cache.lock().unwrap().get(crack) {
            return e.clone();
        }
        let entry: Entry = Arc::new(self.compute(crack).map_err(|e| e.to_string()));
        self.cache
            .lock()
            .unwrap()
            .entry(*crack)
            .or_insert(entry)
            .clone()
    }

    /// `J` of a crack against a measurement; `+∞` when the simulation fails
    /// or its transmissibility is undefined.
    pub fn objective(&self, crack: &CrackSpec, measured: &[TransmissibilityRecord]) -> f64 {
        match &*self.simulate(crack) {
            Ok(sim) => objective(sim, measured).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    }
}
