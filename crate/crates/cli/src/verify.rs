use anyhow::{anyhow, Result};
use linswap::efg_model::{build_counterexample_game, build_signaling_game, GameTree, Node};
use linswap::equilibrium::fixtures::{counterexample_lce, counterexample_swap, signaling_efce, signaling_swap};
use linswap::equilibrium::{is_linear_swap, Auditor, DeviationClass, JointDistribution};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Counterexample game with `delta` added to player 2's payoff at the leaf
/// after the second chance branch, `A2`, `Ql`.
pub fn perturbed_counterexample(delta: f64) -> Result<GameTree> {
    let game = build_counterexample_game();
    if delta == 0.0 {
        return Ok(game);
    }
    let step = |id: usize, k: usize| -> Result<usize> {
        match game.node(id) {
            Node::Chance { outcomes } => outcomes.get(k).map(|o| o.0),
            Node::Decision { children, .. } => children.get(k).copied(),
            Node::Terminal { .. } => None,
        }
        .ok_or_else(|| anyhow!("unexpected game shape"))
    };
    let leaf = step(step(step(0, 1)?, 1)?, 0)?;
    let Node::Terminal { utilities } = game.node(leaf) else {
        return Err(anyhow!("unexpected game shape"));
    };
    let mut u = utilities.clone();
    u[1] += delta;
    Ok(game.with_leaf_utilities(leaf, u)?)
}

fn chain(aud: &Auditor, mu: &JointDistribution, tol: f64) -> Result<(bool, String)> {
    let classes = [
        DeviationClass::External,
        DeviationClass::Trigger,
        DeviationClass::LinearSwap,
        DeviationClass::FullSwap,
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for p in 0..aud.game.num_players() {
        let gaps = classes
            .iter()
            .map(|&c| aud.gap(mu, p, c).map(|g| g.gap))
            .collect::<Result<Vec<f64>, _>>()?;
        ok &= gaps.windows(2).all(|w| w[0] <= w[1] + tol);
        parts.push(format!(
            "p{}: {}",
            p + 1,
            gaps.iter().map(|g| format!("{g:.6}")).collect::<Vec<_>>().join(" <= ")
        ));
    }
    Ok((ok, parts.join("; ")))
}

pub fn run_checks(counterexample: &GameTree) -> Result<Vec<Check>> {
    let sig = Auditor::new(&build_signaling_game());
    let cex = Auditor::new(counterexample);
    let efce = signaling_efce(&sig.game)?;
    let lce = counterexample_lce(&cex.game)?;
    let mut out = Vec::with_capacity(6);

    let g = sig.lce_gap(&efce, 0)?.gap;
    out.push(Check {
        name: "signaling EFCE linear gap = 1.5",
        passed: (g - 1.5).abs() <= 1e-6,
        detail: format!("player 1 gap {g:.9}"),
    });

    let swap = signaling_swap(&sig.game.indices[0])?;
    let linear = is_linear_swap(&sig.game.indices[0], &swap, 4096)?;
    out.push(Check {
        name: "signaling swap is linear",
        passed: linear.is_some(),
        detail: if linear.is_some() { "witness matrix found".into() } else { "no matrix in M".into() },
    });

    let gaps = (0..2).map(|p| cex.lce_gap(&lce, p).map(|c| c.gap)).collect::<Result<Vec<_>, _>>()?;
    out.push(Check {
        name: "counterexample table linear gap = 0",
        passed: gaps.iter().all(|g| g.abs() <= 1e-7),
        detail: format!("gaps {:.3e}, {:.3e}", gaps[0], gaps[1]),
    });

    let swap = counterexample_swap(&cex.game.indices[0])?;
    let gain = cex.swap_gain(&lce, 0, &swap)?;
    out.push(Check {
        name: "counterexample swap gain = 50.5",
        passed: (gain.per_recommendation - 50.5).abs() <= 1e-6,
        detail: format!(
            "per recommendation {:.9}, expected {:.9}",
            gain.per_recommendation, gain.expected
        ),
    });

    let linear = is_linear_swap(&cex.game.indices[0], &swap, 4096)?;
    out.push(Check {
        name: "counterexample swap is not linear",
        passed: linear.is_none(),
        detail: if linear.is_none() { "LP infeasible".into() } else { "a matrix in M reproduces it".into() },
    });

    let (ok_a, da) = chain(&sig, &efce, 1e-6)?;
    let (ok_b, db) = chain(&cex, &lce, 1e-6)?;
    out.push(Check {
        name: "inclusion chain external <= trigger <= linear <= full swap",
        passed: ok_a && ok_b,
        detail: format!("signaling [{da}]; counterexample [{db}]"),
    });
    Ok(out)
}
