//! Fused single-direction GRU scan.
//!
//! Per step, with gate columns ordered `[r | z | n]`:
//!
//! ```text
//! r  = sigmoid(x Wx_r + h Wh_r + b_r)
//! z  = sigmoid(x Wx_z + h Wh_z + b_z)
//! n  = tanh(x Wx_n + (r * h) Wh_n + b_n)
//! h' = (1 - z) * h + z * n
//! ```
//!
//! Recording the whole sequence as one node keeps the tape small for
//! multi-thousand-step traces; `tests/gradients.rs` checks it against the
//! same cell composed from elementary primitives.

use super::tape::{accumulate, sigmoid_f64, Op, Tape, Var};
use super::DiffError;

pub(super) struct GruCache {
    x: Var,
    w_x: Var,
    w_h: Var,
    bias: Var,
    reverse: bool,
    batch: usize,
    steps: usize,
    input: usize,
    hidden: usize,
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
}

impl Tape {
    /// Runs a GRU over `x [batch, steps, input]` and returns every hidden
    /// state as `[batch, steps, hidden]`, starting from a zero state.
    ///
    /// With `reverse` the scan runs from the last step to the first; outputs
    /// stay indexed by their original time step.
    pub fn gru_scan(&mut self, x: Var, w_x: Var, w_h: Var, bias: Var, reverse: bool) -> Result<Var, DiffError> {
        let sx = self.shape(x).to_vec();
        let swx = self.shape(w_x).to_vec();
        let swh = self.shape(w_h).to_vec();
        let sb = self.shape(bias).to_vec();
        if sx.len() != 3 {
            return Err(DiffError::ShapeMismatch {
                op: "gru_scan",
                left: sx,
                right: swx,
            });
        }
        let (batch, steps, input) = (sx[0], sx[1], sx[2]);
        if swh.len() != 2 || swh[1] != 3 * swh[0] {
            return Err(DiffError::ShapeMismatch {
                op: "gru_scan",
                left: swh.clone(),
                right: vec![swh[0], 3 * swh[0]],
            });
        }
        let hidden = swh[0];
        if swx != [input, 3 * hidden] {
            return Err(DiffError::ShapeMismatch {
                op: "gru_scan",
                left: swx,
                right: vec![input, 3 * hidden],
            });
        }
        if sb.iter().product::<usize>() != 3 * hidden {
            return Err(DiffError::ShapeMismatch {
                op: "gru_scan",
                left: sb,
                right: vec![3 * hidden],
            });
        }

        let xv = self.value(x);
        let wx = self.value(w_x);
        let wh = self.value(w_h);
        let bv = self.value(bias);
        let g3 = 3 * hidden;
        let total = batch * steps * hidden;
        let mut out = vec![0.0; total];
        let mut h_prev = vec![0.0; total];
        let mut r_all = vec![0.0; total];
        let mut z_all = vec![0.0; total];
        let mut n_all = vec![0.0; total];

        let mut a = vec![0.0; g3];
        let mut ah = vec![0.0; 2 * hidden];
        let mut rh = vec![0.0; hidden];
        let mut an = vec![0.0; hidden];
        let mut h = vec![0.0; hidden];
        for b in 0..batch {
            h.iter_mut().for_each(|v| *v = 0.0);
            for s in 0..steps {
                let t = if reverse { steps - 1 - s } else { s };
                let xt = &xv[(b * steps + t) * input..(b * steps + t + 1) * input];
                a.copy_from_slice(bv);
                for (i, &xi) in xt.iter().enumerate() {
                    for (o, &w) in a.iter_mut().zip(&wx[i * g3..(i + 1) * g3]) {
                        *o += xi * w;
                    }
                }
                ah.iter_mut().for_each(|v| *v = 0.0);
                for (j, &hj) in h.iter().enumerate() {
                    if hj == 0.0 {
                        continue;
                    }
                    for (o, &w) in ah.iter_mut().zip(&wh[j * g3..j * g3 + 2 * hidden]) {
                        *o += hj * w;
                    }
                }
                let base = (b * steps + t) * hidden;
                for j in 0..hidden {
                    let r = sigmoid_f64(a[j] + ah[j]);
                    let z = sigmoid_f64(a[hidden + j] + ah[hidden + j]);
                    r_all[base + j] = r;
                    z_all[base + j] = z;
                    rh[j] = r * h[j];
                }
                an.copy_from_slice(&a[2 * hidden..]);
                for (j, &v) in rh.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    for (o, &w) in an.iter_mut().zip(&wh[j * g3 + 2 * hidden..(j + 1) * g3]) {
                        *o += v * w;
                    }
                }
                for j in 0..hidden {
                    let n = an[j].tanh();
                    let z = z_all[base + j];
                    n_all[base + j] = n;
                    h_prev[base + j] = h[j];
                    h[j] = (1.0 - z) * h[j] + z * n;
                    out[base + j] = h[j];
                }
            }
        }

        let cache = GruCache {
            x,
            w_x,
            w_h,
            bias,
            reverse,
            batch,
            steps,
            input,
            hidden,
            h_prev,
            r: r_all,
            z: z_all,
            n: n_all,
        };
        Ok(self.push(vec![batch, steps, hidden], out, Op::Gru(Box::new(cache))))
    }
}

pub(super) fn backward(tape: &Tape, c: &GruCache, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
    let (hidden, input, steps) = (c.hidden, c.input, c.steps);
    let g3 = 3 * hidden;
    let xv = tape.value(c.x);
    let wx = tape.value(c.w_x);
    let wh = tape.value(c.w_h);

    let mut dx = vec![0.0; xv.len()];
    let mut dwx = vec![0.0; wx.len()];
    let mut dwh = vec![0.0; wh.len()];
    let mut db = vec![0.0; g3];

    let mut carry = vec![0.0; hidden];
    let mut dh = vec![0.0; hidden];
    let mut da = vec![0.0; g3];
    let mut drh = vec![0.0; hidden];
    for b in 0..c.batch {
        carry.iter_mut().for_each(|v| *v = 0.0);
        for s in (0..steps).rev() {
            let t = if c.reverse { steps - 1 - s } else { s };
            let base = (b * steps + t) * hidden;
            let hp = &c.h_prev[base..base + hidden];
            let r = &c.r[base..base + hidden];
            let z = &c.z[base..base + hidden];
            let n = &c.n[base..base + hidden];

            for j in 0..hidden {
                let dout = g[base + j] + carry[j];
                let dz = dout * (n[j] - hp[j]);
                let dn = dout * z[j];
                dh[j] = dout * (1.0 - z[j]);
                da[hidden + j] = dz * z[j] * (1.0 - z[j]);
                da[2 * hidden + j] = dn * (1.0 - n[j] * n[j]);
            }
            // candidate path through (r * h) Wh_n
            let dan = &da[2 * hidden..];
            for j in 0..hidden {
                let row = &wh[j * g3 + 2 * hidden..(j + 1) * g3];
                drh[j] = row.iter().zip(dan).map(|(w, d)| w * d).sum();
                let rhj = r[j] * hp[j];
                if rhj != 0.0 {
                    for (o, &d) in dwh[j * g3 + 2 * hidden..(j + 1) * g3].iter_mut().zip(dan) {
                        *o += rhj * d;
                    }
                }
            }
            for j in 0..hidden {
                let dr = drh[j] * hp[j];
                dh[j] += drh[j] * r[j];
                da[j] = dr * r[j] * (1.0 - r[j]);
            }
            // recurrent path through h Wh_{r,z}
            for j in 0..hidden {
                let row = &wh[j * g3..j * g3 + 2 * hidden];
                dh[j] += row.iter().zip(&da[..2 * hidden]).map(|(w, d)| w * d).sum::<f64>();
                let hj = hp[j];
                if hj != 0.0 {
                    for (o, &d) in dwh[j * g3..j * g3 + 2 * hidden].iter_mut().zip(&da[..2 * hidden]) {
                        *o += hj * d;
                    }
                }
            }
            for (o, d) in db.iter_mut().zip(&da) {
                *o += d;
            }
            let xoff = (b * steps + t) * input;
            for i in 0..input {
                let xi = xv[xoff + i];
                let row = &wx[i * g3..(i + 1) * g3];
                dx[xoff + i] = row.iter().zip(&da).map(|(w, d)| w * d).sum();
                if xi != 0.0 {
                    for (o, &d) in dwx[i * g3..(i + 1) * g3].iter_mut().zip(&da) {
                        *o += xi * d;
                    }
                }
            }
            carry.copy_from_slice(&dh);
        }
    }
    accumulate(adj, c.x, dx);
    accumulate(adj, c.w_x, dwx);
    accumulate(adj, c.w_h, dwh);
    accumulate(adj, c.bias, db);
}
