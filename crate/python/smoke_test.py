"""Smoke test for the cellsim_py extension.

Build and install first:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/cellsim_py-*.whl
"""

import math

import cellsim_py as cs


def check_oracles():
    assert cs.earfcn_to_freq_mhz(100) == 2120.0
    assert cs.earfcn_to_freq_mhz(18100, uplink=True) == 1930.0
    assert cs.nr_arfcn_to_freq_mhz(2054167) == 26500.08
    assert abs(cs.friis_path_loss_db(cs.wavelength_m(2120e6), 100.0) - 78.97) < 0.01
    assert abs(cs.noise_power_dbm(5e6, 9.0) - (-98.0103)) < 1e-3
    assert cs.slot_duration_s(60) == 0.00025
    assert abs(cs.bler(3.0) - 0.5) < 1e-12
    assert cs.achievable_rate_bps(40.0, 180e3, "lte") > 0.0
    try:
        cs.mmwave_pathloss_db(250.0)
    except ValueError:
        pass
    else:
        raise AssertionError("expected out-of-coverage error")


def check_config():
    cfg = cs.Config.preset(2)
    assert cfg.get("ue_count") == "8"
    cfg.set("replications", "1")
    cfg.set("duration_s", "3")
    cfg.set("sweep_values", "1,5")
    assert cs.Config.parse(cfg.render()).render() == cfg.render()
    try:
        cfg.set("ue_count", "0")
    except ValueError:
        pass
    else:
        raise AssertionError("expected validation error")
    return cfg


def check_run(cfg):
    res = cs.run_scenario(cfg, jobs=1)
    rows = res.aggregates()
    assert len(res) == len(rows) == 4
    for run in res.runs():
        accounted = (
            run["delivered"] + run["dropped_queue"] + run["dropped_harq"] + run["dropped_coverage"]
        )
        assert run["created"] == accounted, run
    lte5 = next(r for r in rows if r["rat"] == "lte" and r["sweep_value"] == 5.0)
    nr5 = next(r for r in rows if r["rat"] == "nr" and r["sweep_value"] == 5.0)
    assert lte5["loss_rate"] > 0.5
    assert nr5["loss_rate"] < 0.01 and not math.isnan(nr5["mean_delay_ms"])
    assert res.to_csv() == cs.run_scenario(cfg, jobs=2).to_csv()
    print(res.to_csv(), end="")


if __name__ == "__main__":
    check_oracles()
    check_run(check_config())
    print("smoke test ok")
