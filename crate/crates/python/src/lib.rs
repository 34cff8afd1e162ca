use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cellsim::channel::{self, Direction, MmWavePathLossParams};
use cellsim::config::{self, MobilitySweep, Preset, ScenarioConfig};
use cellsim::metrics::{render_csv, AggregateResult, RunResult};
use cellsim::phy::{self, LinkAdaptation};
use cellsim::scenario::{self, RunOptions};
use cellsim::traffic::DropCause;
use cellsim::Rat;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_rat(rat: &str) -> PyResult<Rat> {
    rat.parse::<Rat>().map_err(value_err)
}

/// Carrier frequency in MHz of an LTE EARFCN.
#[pyfunction]
#[pyo3(signature = (earfcn, uplink = false))]
fn earfcn_to_freq_mhz(earfcn: u32, uplink: bool) -> PyResult<f64> {
    let dir = if uplink { Direction::Uplink } else { Direction::Downlink };
    channel::earfcn_to_freq_mhz(earfcn, dir).map_err(value_err)
}

/// Carrier frequency in MHz of an NR-ARFCN.
#[pyfunction]
fn nr_arfcn_to_freq_mhz(nr_arfcn: u32) -> PyResult<f64> {
    channel::nr_arfcn_to_freq_mhz(nr_arfcn).map_err(value_err)
}

/// Free-space received power; all arguments linear (W, gains, metres).
#[pyfunction]
#[pyo3(signature = (tx_power_w, gt, gr, wavelength_m, distance_m, loss = 1.0))]
fn friis_rx_power(tx_power_w: f64, gt: f64, gr: f64, wavelength_m: f64, distance_m: f64, loss: f64) -> PyResult<f64> {
    channel::friis_rx_power(tx_power_w, gt, gr, wavelength_m, distance_m, loss).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (wavelength_m, distance_m, loss = 1.0))]
fn friis_path_loss_db(wavelength_m: f64, distance_m: f64, loss: f64) -> PyResult<f64> {
    channel::friis_path_loss_db(wavelength_m, distance_m, loss).map_err(value_err)
}

#[pyfunction]
fn wavelength_m(carrier_freq_hz: f64) -> f64 {
    channel::wavelength_m(carrier_freq_hz)
}

#[pyfunction]
fn noise_power_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    channel::noise_power_dbm(bandwidth_hz, noise_figure_db)
}

/// mmWave LOS path loss in dB; raises ValueError beyond `max_range_m`.
#[pyfunction]
#[pyo3(signature = (distance_m, alpha_db = 61.4, beta = 2.0, max_range_m = 200.0, shadow_db = 0.0))]
fn mmwave_pathloss_db(distance_m: f64, alpha_db: f64, beta: f64, max_range_m: f64, shadow_db: f64) -> PyResult<f64> {
    let params = MmWavePathLossParams {
        alpha_db,
        beta,
        max_range_m,
        ..MmWavePathLossParams::default()
    };
    channel::mmwave_pathloss_db(distance_m, &params, shadow_db).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (snr_db, threshold_db = 3.0, steepness_db = 1.0))]
fn bler(snr_db: f64, threshold_db: f64, steepness_db: f64) -> f64 {
    phy::bler(snr_db, threshold_db, steepness_db)
}

/// Link-adapted rate with the default LTE or NR overhead and efficiency cap.
#[pyfunction]
fn achievable_rate_bps(snr_db: f64, bandwidth_hz: f64, rat: &str) -> PyResult<f64> {
    let la = match parse_rat(rat)? {
        Rat::Lte => LinkAdaptation::lte_default(),
        Rat::Nr => LinkAdaptation::nr_default(),
    };
    Ok(phy::achievable_rate_bps(snr_db, bandwidth_hz, &la))
}

#[pyfunction]
fn slot_duration_s(scs_khz: u32) -> PyResult<f64> {
    phy::slot_duration_s(scs_khz).map_err(value_err)
}

/// A complete scenario configuration.
#[pyclass(name = "Config", module = "cellsim_py", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        PyConfig {
            inner: ScenarioConfig::default(),
        }
    }

    /// Preset 1, 2 or 3; scenario 3 sweeps `speed` or `start_distance`.
    #[staticmethod]
    #[pyo3(signature = (number, sweep = "speed"))]
    fn preset(number: u8, sweep: &str) -> PyResult<Self> {
        let preset = match number {
            1 => Preset::Scenario1,
            2 => Preset::Scenario2,
            3 => Preset::Scenario3,
            n => return Err(PyValueError::new_err(format!("no preset {n}; expected 1, 2 or 3"))),
        };
        let sweep = match sweep {
            "speed" => MobilitySweep::Speed,
            "start_distance" => MobilitySweep::StartDistance,
            other => return Err(PyValueError::new_err(format!("unknown sweep '{other}'"))),
        };
        Ok(PyConfig {
            inner: ScenarioConfig::preset(preset, sweep),
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        config::parse_config(text)
            .map(|inner| PyConfig { inner })
            .map_err(value_err)
    }

    fn render(&self) -> String {
        self.inner.render()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in self.inner.entries() {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    fn get(&self, key: &str) -> PyResult<String> {
        self.inner
            .entries()
            .into_iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| PyValueError::new_err(format!("unknown key '{key}'")))
    }

    /// Set one key; the result must still be a valid configuration.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        if key == "preset" || key == "mobility.sweep" {
            return Err(PyValueError::new_err(format!("'{key}' is fixed; start from Config.preset()")));
        }
        let mut entries = self.inner.entries();
        let slot = entries
            .iter_mut()
            .find(|(k, _)| k == key)
            .ok_or_else(|| PyValueError::new_err(format!("unknown key '{key}'")))?;
        slot.1 = value.to_string();
        let text: String = entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        self.inner = config::parse_config(&text).map_err(value_err)?;
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(scenario={}, sweep={}, points={}, replications={})",
            self.inner.scenario_name(),
            self.inner.sweep_variable.as_str(),
            self.inner.sweep_values.len(),
            self.inner.replications
        )
    }
}

fn run_dict<'py>(py: Python<'py>, r: &RunResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rat", r.rat.as_str())?;
    d.set_item("sweep_value", r.sweep_value)?;
    d.set_item("replication", r.replication)?;
    d.set_item("seed", r.seed)?;
    d.set_item("throughput_bps", r.throughput_bps)?;
    d.set_item("loss", r.loss)?;
    d.set_item("mean_delay_s", r.mean_delay_s)?;
    let (mut created, mut delivered, mut queue, mut harq, mut coverage, mut in_flight) = (0, 0, 0, 0, 0, 0);
    for f in &r.flows {
        created += f.tx_packets;
        delivered += f.rx_packets;
        queue += f.dropped(DropCause::QueueOverflow);
        harq += f.dropped(DropCause::HarqExhausted);
        coverage += f.dropped(DropCause::OutOfCoverage);
        in_flight += f.in_flight;
    }
    d.set_item("created", created)?;
    d.set_item("delivered", delivered)?;
    d.set_item("dropped_queue", queue)?;
    d.set_item("dropped_harq", harq)?;
    d.set_item("dropped_coverage", coverage)?;
    d.set_item("in_flight", in_flight)?;
    Ok(d)
}

fn aggregate_dict<'py>(py: Python<'py>, a: &AggregateResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("scenario", &a.scenario)?;
    d.set_item("rat", a.rat.as_str())?;
    d.set_item("sweep_variable", a.sweep_variable.as_str())?;
    d.set_item("sweep_value", a.sweep_value)?;
    d.set_item("ue_count", a.ue_count)?;
    d.set_item("offered_mbps_per_ue", a.offered_mbps_per_ue)?;
    d.set_item("speed_kmh", a.speed_kmh)?;
    d.set_item("replications", a.replications)?;
    d.set_item("throughput_mbps", a.throughput_bps / 1e6)?;
    d.set_item("throughput_std_mbps", a.throughput_std_bps / 1e6)?;
    d.set_item("loss_rate", a.loss)?;
    d.set_item("loss_std", a.loss_std)?;
    d.set_item("mean_delay_ms", a.mean_delay_s.map(|s| s * 1e3))?;
    d.set_item("delay_std_ms", a.delay_std_s.map(|s| s * 1e3))?;
    Ok(d)
}

/// Results of one sweep.
#[pyclass(name = "SweepResult", module = "cellsim_py", frozen)]
struct PySweepResult {
    runs: Vec<RunResult>,
    aggregates: Vec<AggregateResult>,
}

#[pymethods]
impl PySweepResult {
    /// One dict per sweep point and RAT, averaged over replications.
    fn aggregates<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.aggregates.iter().map(|a| aggregate_dict(py, a)).collect()
    }

    /// One dict per individual run, with cell-wide packet counters.
    fn runs<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.runs.iter().map(|r| run_dict(py, r)).collect()
    }

    fn to_csv(&self) -> String {
        render_csv(&self.aggregates)
    }

    fn __len__(&self) -> usize {
        self.aggregates.len()
    }
}

/// Run every (RAT, sweep point, replication) of `config`.
#[pyfunction]
#[pyo3(signature = (config, jobs = None))]
fn run_scenario(py: Python<'_>, config: PyConfig, jobs: Option<usize>) -> PyResult<PySweepResult> {
    let opts = RunOptions { jobs, trace_dir: None };
    let out = py
        .detach(|| scenario::run_scenario_with(&config.inner, &opts))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(PySweepResult {
        runs: out.runs,
        aggregates: out.aggregates,
    })
}

#[pymodule]
fn cellsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(earfcn_to_freq_mhz, m)?)?;
    m.add_function(wrap_pyfunction!(nr_arfcn_to_freq_mhz, m)?)?;
    m.add_function(wrap_pyfunction!(friis_rx_power, m)?)?;
    m.add_function(wrap_pyfunction!(friis_path_loss_db, m)?)?;
    m.add_function(wrap_pyfunction!(wavelength_m, m)?)?;
    m.add_function(wrap_pyfunction!(noise_power_dbm, m)?)?;
    m.add_function(wrap_pyfunction!(mmwave_pathloss_db, m)?)?;
    m.add_function(wrap_pyfunction!(bler, m)?)?;
    m.add_function(wrap_pyfunction!(achievable_rate_bps, m)?)?;
    m.add_function(wrap_pyfunction!(slot_duration_s, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PySweepResult>()?;
    Ok(())
}
