//! Per-channel diagonal recurrences and gating.

use super::{matvec, Mat};

/// How the input enters channel `alpha`'s hidden state.
#[derive(Clone, Debug)]
pub enum Injection {
    /// `b[alpha][i] x_alpha`.
    Fixed(Mat),
    /// `(W^B x)_i x_alpha` with `W^B` of shape `N x d`.
    Input(Mat),
}

#[derive(Clone, Debug)]
pub enum Readout {
    /// `y_alpha = sum_i c[alpha][i] h[alpha][i]`.
    Fixed(Mat),
    /// `y_alpha = sum_i (W^C x)_i h[alpha][i]`.
    Input(Mat),
}

#[derive(Clone, Debug)]
pub enum StepRule {
    Euler(f64),
    Zoh(f64),
    /// Step `delta_alpha = sigmoid((W_g x)_alpha + b_alpha)`, Euler update.
    SelectiveEuler { wg: Mat, bg: Vec<f64> },
    /// Same step, decay `exp(delta_alpha lambda_(alpha i))`.
    SelectiveZoh { wg: Mat, bg: Vec<f64> },
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Run from a zero state and return `y[t][alpha]` after each update.
pub fn recurrence(xs: &Mat, lambda: &Mat, inj: &Injection, ro: &Readout, rule: &StepRule) -> Mat {
    let d = lambda.len();
    let n = lambda[0].len();
    let mut h = vec![vec![0.0; n]; d];
    let mut ys = Vec::with_capacity(xs.len());
    for x in xs {
        let u: Mat = match inj {
            Injection::Fixed(b) => (0..d).map(|a| (0..n).map(|i| b[a][i] * x[a]).collect()).collect(),
            Injection::Input(wb) => {
                let bx = matvec(wb, x);
                (0..d).map(|a| (0..n).map(|i| bx[i] * x[a]).collect()).collect()
            }
        };
        for a in 0..d {
            let delta = match rule {
                StepRule::Euler(dt) | StepRule::Zoh(dt) => *dt,
                StepRule::SelectiveEuler { wg, bg } | StepRule::SelectiveZoh { wg, bg } => {
                    sigmoid(wg[a].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bg[a])
                }
            };
            for i in 0..n {
                let l = lambda[a][i];
                h[a][i] = match rule {
                    StepRule::Euler(_) | StepRule::SelectiveEuler { .. } => h[a][i] + delta * (l * h[a][i] + u[a][i]),
                    StepRule::Zoh(_) | StepRule::SelectiveZoh { .. } => (delta * l).exp() * h[a][i] + delta * u[a][i],
                };
            }
        }
        let y = match ro {
            Readout::Fixed(c) => (0..d).map(|a| (0..n).map(|i| c[a][i] * h[a][i]).sum()).collect(),
            Readout::Input(wc) => {
                let cx = matvec(wc, x);
                (0..d).map(|a| (0..n).map(|i| cx[i] * h[a][i]).sum()).collect()
            }
        };
        ys.push(y);
    }
    ys
}

/// `F(W y) * x` elementwise.
pub fn gating(x: &[f64], y: &[f64], w: &Mat, f: impl Fn(f64) -> f64) -> Vec<f64> {
    matvec(w, y).into_iter().zip(x).map(|(g, v)| f(g) * v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_euler_by_hand() {
        let xs = vec![vec![1.0], vec![0.0], vec![2.0]];
        let lam = vec![vec![-0.5]];
        let inj = Injection::Fixed(vec![vec![2.0]]);
        let ro = Readout::Fixed(vec![vec![3.0]]);
        let y = recurrence(&xs, &lam, &inj, &ro, &StepRule::Euler(0.1));
        // h1 = 0.2, h2 = 0.19, h3 = 0.19 + 0.1 * (-0.095 + 4) = 0.5805
        assert!((y[0][0] - 0.6).abs() < 1e-15);
        assert!((y[1][0] - 0.57).abs() < 1e-15);
        assert!((y[2][0] - 3.0 * 0.5805).abs() < 1e-14);
    }

    #[test]
    fn gate_by_hand() {
        let g = gating(&[2.0, 3.0], &[1.0, -1.0], &vec![vec![0.0, 0.0], vec![1.0, 1.0]], |v| v + 1.0);
        assert_eq!(g, vec![2.0, 3.0]);
    }
}
