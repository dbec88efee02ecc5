use remote_track::config::SecondLevelConfig;
use remote_track::region::distance;
use remote_track::vdp::tau_vdp;
use remote_track::{run_scenario, ScenarioConfig};

#[test]
fn starts_on_steady_state_manifold() {
    let mut cfg = ScenarioConfig::builtin("scenario1").unwrap();
    let w0 = [1.0, 0.0];
    cfg.channel.bits = 4;
    cfg.channel.levels = Some(3);
    cfg.initial.w = w0.to_vec();
    cfg.initial.w_hat = Some(w0.to_vec());
    cfg.initial.y = w0[1];
    cfg.initial.xi = Some(tau_vdp(&w0, 1.5, 1.0).to_vec());
    let result = run_scenario(&cfg.build().unwrap().scenario).unwrap();
    let worst = result.diagnostics.e.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    assert!(worst <= 0.05, "sup |e| = {worst}");
}

#[test]
fn estimated_error_differs_by_decoder_error() {
    let built = ScenarioConfig::builtin("scenario2").unwrap().build().unwrap();
    let result = run_scenario(&built.scenario).unwrap();
    let l = result.layout;
    for (i, (_, _, x)) in result.trajectory.iter().enumerate() {
        let gap = result.diagnostics.e_hat[i] - result.diagnostics.e[i];
        let expected = x[l.w().start + 1] - x[l.w_d().start + 1];
        assert!((gap - expected).abs() <= 1e-12, "record {i}");
    }
}

#[test]
fn second_level_stays_bounded() {
    let mut cfg = ScenarioConfig::builtin("scenario1").unwrap();
    cfg.second_level = Some(SecondLevelConfig { t_bar: 0.15, ell: Some(3), t_star: None });
    let built = cfg.build().unwrap();
    let result = run_scenario(&built.scenario).unwrap();
    let l = result.layout;
    let wdp = l.w_dprime().unwrap();
    assert!(result.max_state_norm() < built.scenario.divergence_ceiling);
    let tail = result
        .trajectory
        .iter()
        .filter(|(t, _, _)| *t >= 25.0)
        .map(|(_, _, x)| distance(&x[l.w()], &x[wdp.clone()]))
        .fold(0.0, f64::max);
    assert!(tail < 0.1, "sup |w - w_d'| = {tail}");
    assert!(result.tracking_tail(25.0) <= 0.05);
}

#[test]
fn second_level_copies_decoder_at_its_period() {
    let mut cfg = ScenarioConfig::builtin("scenario1").unwrap();
    cfg.second_level = Some(SecondLevelConfig { t_bar: 0.15, ell: None, t_star: Some(0.45) });
    let result = run_scenario(&cfg.build().unwrap().scenario).unwrap();
    let l = result.layout;
    let wdp = l.w_dprime().unwrap();
    let mut copies = 0;
    for (t, x) in result.trajectory.post_jumps() {
        let m = (t / 0.45).round();
        if (t - m * 0.45).abs() < 1e-9 {
            assert_eq!(x[wdp.clone()], x[l.w_d()], "t = {t}");
            copies += 1;
        }
    }
    assert_eq!(copies, 67);
}

#[test]
fn sweep_passing_gains() {
    use remote_track::sweep::{run_sweep, GridAxis};
    let cfg = ScenarioConfig::builtin("scenario1").unwrap();
    let grid = ["k=1,2,4,8,16".parse::<GridAxis>().unwrap()];
    let rows = run_sweep(&cfg, &grid, 2).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().any(|r| r.passed));
    for r in &rows[2..] {
        assert!(r.passed, "{:?}", r.params);
    }
}

#[test]
fn both_channel_budgets_pass() {
    use remote_track::sweep::{run_sweep, GridAxis};
    let cfg = ScenarioConfig::builtin("scenario1").unwrap();
    for (bits, period) in [(2.0, 0.15), (4.0, 0.5)] {
        let grid = [
            GridAxis { key: "N_b".parse().unwrap(), values: vec![bits] },
            GridAxis { key: "T".parse().unwrap(), values: vec![period] },
        ];
        let rows = run_sweep(&cfg, &grid, 1).unwrap();
        assert!(rows[0].passed, "{:?}", rows[0]);
    }
}
