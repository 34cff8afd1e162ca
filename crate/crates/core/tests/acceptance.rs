//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::process::ExitCode;

use cellsim::channel::{earfcn_to_freq_mhz, friis_path_loss_db, friis_rx_power, nr_arfcn_to_freq_mhz, Direction};
use cellsim::config::{MobilitySweep, Preset, ScenarioConfig};
use cellsim::engine::RngStream;
use cellsim::metrics::{render_csv, AggregateResult};
use cellsim::phy::{harq_attempts, HarqOutcome, HarqProcess};
use cellsim::scenario::{run_scenario_with, RunOptions, ScenarioOutput};
use cellsim::traffic::DropCause;
use cellsim::Rat;
use rand::Rng;

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, id: u32, name: &str, ok: bool, detail: String) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict}  {name}: {detail}");
        if !ok {
            self.failures += 1;
        }
    }
}

fn run(preset: Preset, jobs: Option<usize>) -> ScenarioOutput {
    let cfg = ScenarioConfig::preset(preset, MobilitySweep::Speed);
    run_scenario_with(&cfg, &RunOptions { jobs, trace_dir: None }).expect("scenario runs")
}

fn series(out: &ScenarioOutput, rat: Rat) -> Vec<&AggregateResult> {
    out.aggregates.iter().filter(|a| a.rat == rat).collect()
}

fn at(out: &ScenarioOutput, rat: Rat, value: f64) -> &AggregateResult {
    out.aggregates
        .iter()
        .find(|a| a.rat == rat && a.sweep_value == value)
        .unwrap_or_else(|| panic!("no {rat} point at {value}"))
}

fn mbps(a: &AggregateResult) -> f64 {
    a.throughput_bps / 1e6
}

fn delay_ms(a: &AggregateResult) -> f64 {
    a.mean_delay_s.map_or(f64::NAN, |d| d * 1e3)
}

fn main() -> ExitCode {
    let mut r = Report { failures: 0 };
    let s1 = run(Preset::Scenario1, None);
    let s2 = run(Preset::Scenario2, None);
    let s3 = run(Preset::Scenario3, None);

    // 1. LTE plateau: nondecreasing while unsaturated, then flat at 17 +- 15 %
    let lte = series(&s1, Rat::Lte);
    let rising: Vec<f64> = lte.iter().filter(|a| a.ue_count < 10).map(|a| mbps(a)).collect();
    let flat: Vec<f64> = lte.iter().filter(|a| a.ue_count >= 10).map(|a| mbps(a)).collect();
    let plateau = flat.iter().sum::<f64>() / flat.len() as f64;
    let (lo, hi) = flat.iter().fold((f64::MAX, f64::MIN), |(l, h), &x| (l.min(x), h.max(x)));
    let spread = (hi - lo) / plateau;
    let monotone = rising.windows(2).all(|w| w[1] >= w[0]) && rising.last().is_some_and(|&x| x <= lo);
    let in_band = flat.iter().all(|x| (x - 17.0).abs() <= 0.15 * 17.0);
    r.check(
        1,
        "LTE saturation plateau",
        monotone && in_band && spread <= 1e-3,
        format!("rising {rising:.3?}, plateau {plateau:.3} Mb/s over UE>=10 (range {lo:.3}..{hi:.3}, spread {spread:.1e})"),
    );

    // 2. NR tracks 2N Mb/s
    let mut worst_err: f64 = 0.0;
    let mut worst_loss: f64 = 0.0;
    for a in series(&s1, Rat::Nr) {
        let offered = 2.0 * a.ue_count as f64;
        worst_err = worst_err.max((mbps(a) - offered).abs() / offered);
        worst_loss = worst_loss.max(a.loss);
    }
    r.check(
        2,
        "5G scaling",
        worst_err <= 0.05 && worst_loss < 0.01,
        format!("max relative error {worst_err:.2e}, max loss {worst_loss:.2e}"),
    );

    // 3. LTE overload at 5 Mb/s x 8
    let lte5 = at(&s2, Rat::Lte, 5.0);
    let fluid = 1.0 - plateau / 40.0;
    r.check(
        3,
        "LTE overload loss",
        lte5.loss > 0.5 && (lte5.loss - fluid).abs() <= 0.05,
        format!("loss {:.4}, fluid estimate 1 - {plateau:.3}/40 = {fluid:.4}", lte5.loss),
    );

    // 4. NR delay bound
    let nr5 = delay_ms(at(&s2, Rat::Nr, 5.0));
    r.check(4, "5G delay bound", nr5 <= 25.0, format!("NR mean delay {nr5:.3} ms at 5 Mb/s"));

    // 5. light-load delay ratio
    let (dl, dn) = (delay_ms(at(&s1, Rat::Lte, 2.0)), delay_ms(at(&s1, Rat::Nr, 2.0)));
    let ratio = dl / dn;
    r.check(
        5,
        "light-load delay ratio",
        (ratio - 2.0).abs() <= 0.5,
        format!("LTE {dl:.3} ms / NR {dn:.3} ms = {ratio:.3}"),
    );

    // 6. mobility knee
    let nr = series(&s3, Rat::Nr);
    let nr0 = mbps(at(&s3, Rat::Nr, 0.0));
    let nr50 = mbps(at(&s3, Rat::Nr, 50.0));
    let low_ok = nr
        .iter()
        .filter(|a| a.sweep_value <= 30.0)
        .all(|a| (mbps(a) - nr0).abs() <= 0.15 * nr0);
    let high_loss: Vec<f64> = nr.iter().filter(|a| a.sweep_value >= 30.0).map(|a| a.loss).collect();
    let loss_rising = high_loss.windows(2).all(|w| w[1] > w[0]);
    let lte0 = mbps(at(&s3, Rat::Lte, 0.0));
    let lte60 = mbps(at(&s3, Rat::Lte, 60.0));
    let lte_ok = (lte60 - lte0).abs() <= 0.10 * lte0;
    r.check(
        6,
        "mobility knee",
        nr50 < 0.5 * nr0 && low_ok && loss_rising && lte_ok,
        format!(
            "NR {nr0:.3} -> {nr50:.3} Mb/s at 50 km/h, 0-30 km/h within 15%: {low_ok}, \
             loss for v>=30 {high_loss:.4?}, LTE {lte0:.3} -> {lte60:.3} Mb/s at 60 km/h"
        ),
    );

    // 7. propagation oracles
    let mut rng = RngStream::new("acceptance/friis", 7);
    let mut worst_rel: f64 = 0.0;
    for _ in 0..1000 {
        let pt: f64 = rng.random_range(1e-3..10.0);
        let gt = rng.random_range(0.5..1000.0);
        let gr = rng.random_range(0.5..1000.0);
        let lambda: f64 = rng.random_range(1e-3..1.0);
        let d: f64 = rng.random_range(0.1..5000.0);
        let l = rng.random_range(1.0..10.0);
        let expected = (pt * gt * gr * lambda.powi(2)) / ((4.0 * PI).powi(2) * d.powi(2) * l);
        let got = friis_rx_power(pt, gt, gr, lambda, d, l).unwrap();
        worst_rel = worst_rel.max(((got - expected) / expected).abs());
    }
    let lambda = 299_792_458.0 / 2120e6;
    let fspl = friis_path_loss_db(lambda, 100.0, 1.0).unwrap();
    let mut worst_doubling: f64 = 0.0;
    for d in [1.0, 3.7, 50.0, 100.0, 1234.5] {
        let step = friis_path_loss_db(lambda, 2.0 * d, 1.0).unwrap() - friis_path_loss_db(lambda, d, 1.0).unwrap();
        worst_doubling = worst_doubling.max((step - 20.0 * 2f64.log10()).abs());
    }
    r.check(
        7,
        "propagation oracles",
        worst_rel <= 1e-12 && (fspl - 78.97).abs() <= 0.01 && worst_doubling <= 1e-9,
        format!("max rel error {worst_rel:.1e}, FSPL(2120 MHz, 100 m) = {fspl:.4} dB, doubling error {worst_doubling:.1e} dB"),
    );

    // 8. raster oracles
    let cases = [
        (earfcn_to_freq_mhz(100, Direction::Downlink).ok(), 2120.0),
        (earfcn_to_freq_mhz(18100, Direction::Uplink).ok(), 1930.0),
        (nr_arfcn_to_freq_mhz(2_054_167).ok(), 26500.08),
        (nr_arfcn_to_freq_mhz(2_104_165).ok(), 29499.96),
    ];
    let got: Vec<Option<f64>> = cases.iter().map(|c| c.0).collect();
    r.check(
        8,
        "raster oracles",
        cases.iter().all(|(g, want)| *g == Some(*want)),
        format!("{got:?}"),
    );

    // 9. HARQ analytic match
    let trials = 100_000;
    let h = HarqProcess {
        max_retx: 3,
        combining_gain_db: 0.0,
        rtt_s: 0.008,
    };
    let mut details = Vec::new();
    let mut harq_ok = true;
    for p in [0.1, 0.3, 0.5] {
        let mut rng = RngStream::new("acceptance/harq", (p * 10.0) as u64);
        let delivered = (0..trials)
            .filter(|_| matches!(harq_attempts(&h, &mut rng, |_| p), HarqOutcome::Delivered { .. }))
            .count();
        let rate = delivered as f64 / trials as f64;
        let q = 1.0 - p.powi(4);
        let sigma = (q * (1.0 - q) / trials as f64).sqrt();
        let z = (rate - q) / sigma;
        harq_ok &= z.abs() <= 3.0;
        details.push(format!("p={p}: {rate:.5} vs {q:.5} ({z:+.2} sigma)"));
    }
    r.check(9, "HARQ analytic match", harq_ok, details.join(", "));

    // 10. determinism across runs and parallelism degrees
    let reference = render_csv(&s3.aggregates);
    let again = render_csv(&run(Preset::Scenario3, None).aggregates);
    let serial = render_csv(&run(Preset::Scenario3, Some(1)).aggregates);
    let four = render_csv(&run(Preset::Scenario3, Some(4)).aggregates);
    r.check(
        10,
        "determinism",
        reference == again && reference == serial && reference == four,
        format!(
            "scenario3 CSV ({} bytes) repeat: {}, jobs=1: {}, jobs=4: {}",
            reference.len(),
            reference == again,
            reference == serial,
            reference == four
        ),
    );

    // 11. per-flow conservation in every run
    let mut flows = 0usize;
    let mut broken = Vec::new();
    for out in [&s1, &s2, &s3] {
        for run in &out.runs {
            for f in &run.flows {
                flows += 1;
                let accounted = f.rx_packets
                    + f.dropped(DropCause::QueueOverflow)
                    + f.dropped(DropCause::HarqExhausted)
                    + f.dropped(DropCause::OutOfCoverage);
                if f.tx_packets != accounted || f.in_flight != 0 {
                    broken.push(format!("{} {} rep {} flow {}", run.scenario, run.rat, run.replication, f.flow_id));
                }
            }
        }
    }
    r.check(
        11,
        "conservation",
        broken.is_empty(),
        format!("{flows} flows checked, {} violations {broken:?}", broken.len()),
    );

    if r.failures == 0 {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{} acceptance criteria failed", r.failures);
        ExitCode::FAILURE
    }
}
