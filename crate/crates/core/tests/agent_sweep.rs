use curious_trader::agent::{run_agent, sweep, AgentParams, Verdict};
use curious_trader::evaluation::composite_score;
use curious_trader::market::{generate_gbm, GbmParams};

#[test]
fn never_confident_agent_ranks_below_a_trading_one() {
    let series = generate_gbm(
        &GbmParams {
            s0: 100.0,
            mu: 0.003,
            sigma: 0.01,
            horizon: 600,
        },
        17,
    )
    .unwrap();
    let silent = AgentParams {
        min_connected: usize::MAX,
        ..Default::default()
    };
    let active = AgentParams {
        seed: 5,
        ..Default::default()
    };

    // direct runs first
    let silent_run = run_agent(&silent, &series).unwrap();
    assert!(silent_run
        .answers
        .iter()
        .all(|a| a.answer.verdict == Verdict::DontKnow));
    assert!(silent_run.record.equity().iter().all(|e| *e == 100.0));
    assert_eq!(composite_score(&silent_run.record), f64::NEG_INFINITY);
    let active_run = run_agent(&active, &series).unwrap();
    let active_score = composite_score(&active_run.record);
    assert!(active_score.is_finite());
    assert!(active_run.record.equity().last().unwrap() > &100.0);

    let ranked = sweep(&[silent, active], &series).unwrap();
    assert_eq!(
        ranked.iter().map(|e| (e.rank, e.index)).collect::<Vec<_>>(),
        vec![(1, 1), (2, 0)]
    );
    assert_eq!(ranked[0].score, active_score);
    assert_eq!(ranked[0].run.record, active_run.record);
}

#[test]
fn sweep_is_deterministic() {
    let series = generate_gbm(
        &GbmParams {
            s0: 100.0,
            mu: 0.0,
            sigma: 0.02,
            horizon: 400,
        },
        3,
    )
    .unwrap();
    let params: Vec<AgentParams> = (0..6)
        .map(|i| AgentParams {
            seed: i,
            min_connected: 1 + i as usize,
            ..Default::default()
        })
        .collect();
    let a = sweep(&params, &series).unwrap();
    let b = sweep(&params, &series).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.rank, x.index), (y.rank, y.index));
        assert_eq!(x.run.record, y.run.record);
        assert_eq!(x.run.answers, y.run.answers);
    }
    assert!(a.windows(2).all(|w| w[0].score >= w[1].score));
}

#[test]
fn trades_carry_declared_bounds() {
    let series = generate_gbm(
        &GbmParams {
            s0: 100.0,
            mu: 0.001,
            sigma: 0.01,
            horizon: 500,
        },
        8,
    )
    .unwrap();
    let run = run_agent(&AgentParams::default(), &series).unwrap();
    let traded = run
        .answers
        .iter()
        .filter(|a| matches!(a.answer.verdict, Verdict::Buy | Verdict::Sell))
        .count();
    assert_eq!(run.record.trades().len(), traded);
    assert!(run
        .record
        .trades()
        .iter()
        .all(|t| t.declared_loss_bound >= 0.0 && t.close_t == t.open_t + 1));
}
