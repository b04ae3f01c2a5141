//! Loss values against a naive re-summation and loss gradients against
//! central finite differences.

use kan_lmm::kan::{KanNetwork, KanShape};
use kan_lmm::lmm::{fdm_coefficients, Family, LmmScheme};
use kan_lmm::trajectory::Trajectory;
use kan_lmm::training::{loss_jah, loss_jh, LossKind, LossProblem};

fn data() -> Trajectory {
    Trajectory::from_fn(0.0, 0.9, 0.1, |t| vec![(1.3 * t).sin() + 0.2, (0.7 * t).cos() * t]).unwrap()
}

fn net(seed: u64) -> KanNetwork {
    let shape = KanShape {
        d_in: 2,
        hidden: 5,
        d_out: 2,
        degree: 3,
        grid: 4,
    };
    KanNetwork::init(shape, vec![(-0.2, 1.6), (-0.1, 1.0)], seed).unwrap()
}

/// Straight transcription of the residual sums, iterating rows in reverse.
fn naive(net: &KanNetwork, traj: &Trajectory, scheme: &LmmScheme, augmented: bool) -> f64 {
    let m_steps = scheme.steps();
    let n1 = traj.intervals();
    let h = traj.h;
    let x = &traj.states;
    let w = scheme.index_window(n1).unwrap();
    let mut total = 0.0;
    for n in (m_steps..=n1).rev() {
        for c in 0..traj.dim() {
            let mut lhs = 0.0;
            for m in (0..=m_steps).rev() {
                if scheme.beta()[m] != 0.0 {
                    lhs += scheme.beta()[m] * net.forward(&x[n - m]).unwrap()[c];
                }
            }
            let mut rhs = 0.0;
            for m in 0..=m_steps {
                rhs += scheme.alpha()[m] / h * x[n - m][c];
            }
            total += (lhs - rhs).powi(2);
        }
    }
    if !augmented {
        return total / (n1 - m_steps + 1) as f64;
    }
    let mu = fdm_coefficients(scheme.order()).unwrap();
    for n in w.r..w.r + w.omega_a as usize {
        let u = net.forward(&x[n]).unwrap();
        for c in 0..traj.dim() {
            let est: f64 = mu.iter().enumerate().map(|(m, v)| v * x[n + m][c] / h).sum();
            total += (u[c] - est).powi(2);
        }
    }
    total / w.tau as f64
}

#[test]
fn losses_match_naive_summation() {
    let traj = data();
    for (i, scheme) in LmmScheme::all().iter().enumerate() {
        let n = net(i as u64);
        let a = loss_jh(&n, &traj, scheme).unwrap();
        let b = naive(&n, &traj, scheme, false);
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{} jh {a} {b}", scheme.label());
        if traj.intervals() >= scheme.steps() + scheme.order() {
            let a = loss_jah(&n, &traj, scheme).unwrap();
            let b = naive(&n, &traj, scheme, true);
            assert!((a - b).abs() <= 1e-12 * b.abs(), "{} jah {a} {b}", scheme.label());
        }
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let traj = data();
    for (family, steps, kind, seed) in [
        (Family::Am, 1, LossKind::Jah, 1),
        (Family::Ab, 2, LossKind::Jah, 2),
        (Family::Bdf, 2, LossKind::Jh, 3),
        (Family::Am, 2, LossKind::Jh, 4),
    ] {
        let scheme = LmmScheme::new(family, steps).unwrap();
        let problem = LossProblem::new(kind, &scheme, &traj).unwrap();
        let mut n = net(seed);
        let (_, grad) = problem.loss_and_gradient(&n);
        let base = n.parameters().0;
        let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        for p in 0..base.len() {
            let step = 1e-6;
            let mut plus = base.clone();
            plus[p] += step;
            n.set_parameters(&plus).unwrap();
            let lp = problem.loss(&n);
            let mut minus = base.clone();
            minus[p] -= step;
            n.set_parameters(&minus).unwrap();
            let lm = problem.loss(&n);
            let fd = (lp - lm) / (2.0 * step);
            assert!(
                (fd - grad[p]).abs() <= 1e-5 * scale.max(1e-12) + 1e-5 * grad[p].abs(),
                "{} param {p}: fd {fd} analytic {}",
                scheme.label(),
                grad[p]
            );
        }
        n.set_parameters(&base).unwrap();
    }
}
