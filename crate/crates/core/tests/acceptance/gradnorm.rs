use longtail::model::{init_parameters, Classifier, HeadShape, Objective};
use longtail::optim::{gradnorm_step, AdamState, GradNormState, MixedTargets, TaskLabels};
use longtail::{rng, Matrix};
use rand::Rng;

use crate::{ensure, tol, Outcome};

const DIM: usize = 8;
const BATCH: usize = 32;
const CLASSES: usize = 6;
const GENERA: usize = 3;
const SPECIES: usize = 6;

fn targets(objective: Objective, r: &mut impl Rng) -> MixedTargets {
    let n = match objective {
        Objective::Genus => GENERA,
        Objective::Species => SPECIES,
        _ => CLASSES,
    };
    MixedTargets::plain(match objective {
        Objective::Poisonous => TaskLabels::Binary((0..BATCH).map(|_| r.random()).collect()),
        _ => TaskLabels::Classes((0..BATCH).map(|_| r.random_range(0..n)).collect()),
    })
}

/// Runs GradNorm, checking positivity and the sum after every step, and
/// returns the weight history. With `twin = Some((a, b))` objective `b`
/// receives a copy of objective `a`'s targets.
fn run(
    objectives: Vec<Objective>,
    seed: u64,
    twin: Option<(usize, usize)>,
) -> Result<Vec<Vec<f64>>, String> {
    let shape = HeadShape::Multi {
        dim: DIM,
        classes: CLASSES,
        genera: GENERA,
        species: SPECIES,
    };
    let Classifier::Multi(mut model) = init_parameters(shape, seed) else {
        unreachable!()
    };
    let mut adam = AdamState::for_params(&model, 1e-3);
    let mut state = GradNormState::new(objectives.clone(), 1.5, 0.025);
    let t = objectives.len() as f64;
    let mut r = rng::stream(seed, &[99]);
    let mut history = Vec::new();
    for step in 0..tol::GRADNORM_STEPS {
        let data = (0..BATCH * DIM)
            .map(|_| r.random_range(-1.0..1.0))
            .collect();
        let x = Matrix::from_vec(BATCH, DIM, data).unwrap();
        let mut tg: Vec<MixedTargets> = objectives.iter().map(|&o| targets(o, &mut r)).collect();
        if let Some((a, b)) = twin {
            tg[b] = tg[a].clone();
        }
        gradnorm_step(&mut model, &x, &tg, &mut state, &mut adam).map_err(|e| e.to_string())?;
        let w = &state.task_weights;
        ensure(w.iter().all(|&v| v > 0.0), || {
            format!("step {step}: non-positive weight in {w:?}")
        })?;
        let sum: f64 = w.iter().sum();
        ensure((sum - t).abs() <= tol::GRADNORM_SUM_ABS, || {
            format!("step {step}: weights sum to {sum}, expected {t}")
        })?;
        history.push(w.clone());
    }
    Ok(history)
}

pub fn check() -> Outcome {
    let all = run(Objective::ALL.to_vec(), 1, None)?;
    let moved = all
        .last()
        .unwrap()
        .iter()
        .map(|w| (w - 1.0).abs())
        .fold(0.0, f64::max);

    let objectives = vec![Objective::Category, Objective::Genus, Objective::Category];
    let dup = run(objectives, 2, Some((0, 2)))?;
    let gap = dup.iter().map(|w| (w[0] - w[2]).abs()).fold(0.0, f64::max);
    let spread = dup.iter().map(|w| (w[0] - w[1]).abs()).fold(0.0, f64::max);
    ensure(gap <= tol::GRADNORM_SYMMETRY_ABS, || {
        format!("duplicated objective weights drift apart by {gap:.2e}")
    })?;
    Ok(format!(
        "{} steps positive and summing to T, weights moved up to {moved:.3}, duplicate gap {gap:.1e} (vs {spread:.3} to the other task)",
        tol::GRADNORM_STEPS
    ))
}
