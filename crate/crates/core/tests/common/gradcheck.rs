//! Finite-difference gradient suites shared by the gradient tests and the
//! acceptance run. Each returns the worst relative error per check.

use gsalign::alignment::AlignerModel;
use gsalign::diffcore::{DiffError, ParamStore, Tape, Var};
use gsalign::layers::{BiGru, FusionWeights, LinearLayer, SincLayer};
use gsalign::prediction::{PredictorModel, Variant};
use gsalign::{AnnotationSet, FeatureMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub const TRIALS: usize = 100;
pub const TOL: f64 = 1e-4;
pub const BIGRU_TOL: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub worst: f64,
    pub tol: f64,
    pub trials: usize,
}

impl Check {
    fn new(name: &str, worst: f64, tol: f64, trials: usize) -> Self {
        Check {
            name: name.to_string(),
            worst,
            tol,
            trials,
        }
    }

    pub fn passed(&self) -> bool {
        self.worst < self.tol
    }
}

fn run_inputs(name: &str, shapes: &[Vec<usize>], lo: f64, hi: f64, build: &Build) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64 * 7919);
    let mut worst: f64 = 0.0;
    for _ in 0..TRIALS {
        let inputs: Vec<(Vec<usize>, Vec<f64>)> = shapes
            .iter()
            .map(|s| (s.clone(), uniform_vec(&mut rng, s.iter().product(), lo, hi)))
            .collect();
        worst = worst.max(check_inputs(build, &inputs, &mut rng));
    }
    Check::new(name, worst, TOL, TRIALS)
}

pub fn primitive_checks() -> Vec<Check> {
    let v = |s: &[usize]| s.to_vec();
    let mut out = Vec::new();
    out.push(run_inputs("matmul", &[v(&[3, 4]), v(&[4, 2])], -1.0, 1.0, &|t, x| t.matmul(x[0], x[1])));
    out.push(run_inputs("add", &[v(&[5]), v(&[5])], -1.0, 1.0, &|t, x| t.add(x[0], x[1])));
    out.push(run_inputs("sub", &[v(&[5]), v(&[5])], -1.0, 1.0, &|t, x| t.sub(x[0], x[1])));
    out.push(run_inputs("mul", &[v(&[5]), v(&[5])], -1.0, 1.0, &|t, x| t.mul(x[0], x[1])));
    out.push(run_inputs("div", &[v(&[5]), v(&[5])], 0.5, 1.5, &|t, x| t.div(x[0], x[1])));
    out.push(run_inputs("add_row", &[v(&[3, 4]), v(&[4])], -1.0, 1.0, &|t, x| t.add_row(x[0], x[1])));
    out.push(run_inputs("scale", &[v(&[4])], -1.0, 1.0, &|t, x| Ok(t.scale(x[0], -2.5))));
    out.push(run_inputs("offset", &[v(&[4])], -1.0, 1.0, &|t, x| Ok(t.offset(x[0], 0.7))));
    out.push(run_inputs("scale_by", &[v(&[4]), v(&[1])], -1.0, 1.0, &|t, x| t.scale_by(x[0], x[1])));
    out.push(run_inputs("tanh", &[v(&[6])], -1.0, 1.0, &|t, x| Ok(t.tanh(x[0]))));
    out.push(run_inputs("sigmoid", &[v(&[6])], -1.0, 1.0, &|t, x| Ok(t.sigmoid(x[0]))));
    out.push(run_inputs("sin", &[v(&[6])], -1.0, 1.0, &|t, x| Ok(t.sin(x[0]))));
    out.push(run_inputs("softmax", &[v(&[5])], -1.0, 1.0, &|t, x| Ok(t.softmax(x[0]))));
    out.push(run_inputs("sum", &[v(&[5])], -1.0, 1.0, &|t, x| Ok(t.sum(x[0]))));
    out.push(run_inputs("mean", &[v(&[5])], -1.0, 1.0, &|t, x| Ok(t.mean(x[0]))));
    out.push(run_inputs("variance", &[v(&[7])], -1.0, 1.0, &|t, x| Ok(t.variance(x[0]))));
    out.push(run_inputs("concat", &[v(&[2, 3]), v(&[2, 2])], -1.0, 1.0, &|t, x| t.concat(&[x[0], x[1]], 1)));
    out.push(run_inputs("concat0", &[v(&[2, 3]), v(&[1, 3])], -1.0, 1.0, &|t, x| t.concat(&[x[0], x[1]], 0)));
    out.push(run_inputs("reverse", &[v(&[2, 4, 3])], -1.0, 1.0, &|t, x| t.reverse(x[0], 1)));
    out.push(run_inputs("narrow", &[v(&[3, 5])], -1.0, 1.0, &|t, x| t.narrow(x[0], 1, 1, 3)));
    out.push(run_inputs("reshape", &[v(&[2, 3])], -1.0, 1.0, &|t, x| t.reshape(x[0], &[3, 2])));
    out.push(run_inputs("conv1d_same", &[v(&[12]), v(&[5])], -1.0, 1.0, &|t, x| t.conv1d_same(x[0], x[1])));
    // kernel longer than the signal, and the FFT path
    out.push(run_inputs("conv1d_long_kernel", &[v(&[6]), v(&[15])], -1.0, 1.0, &|t, x| t.conv1d_same(x[0], x[1])));
    out.push(run_inputs("conv1d_fft", &[v(&[300]), v(&[301])], -1.0, 1.0, &|t, x| t.conv1d_same(x[0], x[1])));
    out.push(run_inputs("ccc", &[v(&[20]), v(&[20])], -1.0, 1.0, &|t, x| t.ccc(x[0], x[1])));
    out.push(run_inputs("cross_ccc", &[v(&[30]), v(&[30])], -1.0, 1.0, &|t, x| t.cross_ccc(x[0], x[1], &[0, 2, 4, 6])));
    out.push(run_inputs("gru_fwd", &[v(&[2, 5, 2]), v(&[2, 9]), v(&[3, 9]), v(&[9])], -1.0, 1.0, &|t, x| {
        t.gru_scan(x[0], x[1], x[2], x[3], false)
    }));
    out.push(run_inputs("gru_rev", &[v(&[2, 5, 2]), v(&[2, 9]), v(&[3, 9]), v(&[9])], -1.0, 1.0, &|t, x| {
        t.gru_scan(x[0], x[1], x[2], x[3], true)
    }));
    out
}

/// Linear, softmax fusion and Sinc cutoff parameters.
pub fn layer_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_lin: f64 = 0.0;
    let mut worst_fuse: f64 = 0.0;
    let mut worst_sinc: f64 = 0.0;
    for trial in 0..TRIALS {
        // linear
        let mut store = ParamStore::new();
        let lin = LinearLayer::new(&mut store, "l", 4, 2, &mut rng).unwrap();
        let b = uniform_vec(&mut rng, 2, -1.0, 1.0);
        store.get_mut(lin.bias).values_mut().copy_from_slice(&b);
        let x = uniform_vec(&mut rng, 6 * 4, -1.0, 1.0);
        let w = uniform_vec(&mut rng, 12, -1.0, 1.0);
        worst_lin = worst_lin.max(check_params(&store, &|tape, s| {
            let xv = tape.constant(&[6, 4], x.clone()).unwrap();
            let y = lin.forward(tape, s, xv).unwrap();
            let y = tape.reshape(y, &[12]).unwrap();
            let wv = tape.constant(&[12], w.clone()).unwrap();
            let p = tape.mul(y, wv).unwrap();
            tape.sum(p)
        }));

        // softmax fusion
        let mut store = ParamStore::new();
        let fw = FusionWeights::new(&mut store, "f", 4).unwrap();
        let logits = uniform_vec(&mut rng, 4, -1.0, 1.0);
        store.get_mut(fw.logits).values_mut().copy_from_slice(&logits);
        let corrected = uniform_vec(&mut rng, 4 * 30, -1.0, 1.0);
        let target = smooth_vec(&mut rng, 30);
        worst_fuse = worst_fuse.max(check_params(&store, &|tape, s| {
            let c = tape.constant(&[4, 30], corrected.clone()).unwrap();
            let gs = fw.fuse(tape, s, c).unwrap();
            let tg = tape.constant(&[30], target.clone()).unwrap();
            tape.ccc(gs, tg).unwrap()
        }));

        // sinc cutoff, short span for speed; every tenth trial uses 20 s
        let span = if trial % 10 == 0 { 20.0 } else { 2.0 };
        let mut store = ParamStore::new();
        let fc = rng.gen_range(0.1..20.0);
        let sl = SincLayer::with_cutoff(&mut store, "s", 100.0, span, fc).unwrap();
        let sig = smooth_vec(&mut rng, 400);
        let w = uniform_vec(&mut rng, 400, -1.0, 1.0);
        worst_sinc = worst_sinc.max(check_params(&store, &|tape, s| {
            let x = tape.constant(&[400], sig.clone()).unwrap();
            let y = sl.forward(tape, s, x).unwrap();
            let wv = tape.constant(&[400], w.clone()).unwrap();
            let p = tape.mul(y, wv).unwrap();
            tape.sum(p)
        }));
    }
    vec![
        Check::new("linear", worst_lin, TOL, TRIALS),
        Check::new("fusion", worst_fuse, TOL, TRIALS),
        Check::new("sinc_cutoff", worst_sinc, TOL, TRIALS),
    ]
}

/// BiGRU + linear head under a CCC loss on 50-step sequences.
pub fn bigru_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..TRIALS {
        let mut store = ParamStore::new();
        let net = BiGru::new(&mut store, "g", 1, 3, &mut rng).unwrap();
        let head = LinearLayer::new(&mut store, "h", 6, 1, &mut rng).unwrap();
        let x = smooth_vec(&mut rng, 50);
        let target = smooth_vec(&mut rng, 50);
        worst = worst.max(check_params(&store, &|tape, s| {
            let xv = tape.constant(&[1, 50, 1], x.clone()).unwrap();
            let h = net.forward(tape, s, xv).unwrap();
            let y = head.forward(tape, s, h).unwrap();
            let y = tape.reshape(y, &[50]).unwrap();
            let tg = tape.constant(&[50], target.clone()).unwrap();
            let c = tape.ccc(y, tg).unwrap();
            let neg = tape.scale(c, -1.0);
            tape.offset(neg, 1.0)
        }));
    }
    Check::new("bigru_ccc_50_steps", worst, BIGRU_TOL, TRIALS)
}

pub fn joint_style_check() -> Check {
    // 1 - mean cross-CCC + 1 - CCC on random 200-sample sequences
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let lags: Vec<usize> = (0..=10).map(|i| i * 10).collect();
    let build = move |t: &mut Tape, x: &[Var]| -> Result<Var, DiffError> {
        let cc = t.cross_ccc(x[0], x[1], &lags)?;
        let c = t.ccc(x[1], x[2])?;
        let s = t.add(cc, c)?;
        let neg = t.scale(s, -1.0);
        Ok(t.offset(neg, 2.0))
    };
    let mut worst: f64 = 0.0;
    for _ in 0..TRIALS {
        let inputs: Vec<(Vec<usize>, Vec<f64>)> = (0..3).map(|_| (vec![200], smooth_vec(&mut rng, 200))).collect();
        worst = worst.max(check_inputs(&build, &inputs, &mut rng));
    }
    Check::new("cross_ccc_plus_ccc_200", worst, TOL, TRIALS)
}

/// Full aligner joint loss and SLTS predictor loss against every parameter.
pub fn model_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut worst_align: f64 = 0.0;
    let mut worst_slts: f64 = 0.0;
    let lags = [0usize, 2, 5, 8];
    for _ in 0..TRIALS {
        let model = AlignerModel::new(2, 3, 2, &mut rng).unwrap();
        let mut store = model.store.clone();
        let w = model.predictor.weight;
        let pw = uniform_vec(&mut rng, 3, -1.0, 1.0);
        store.get_mut(w).values_mut().copy_from_slice(&pw);
        let ann = AnnotationSet::new(vec![smooth_vec(&mut rng, 40), smooth_vec(&mut rng, 40)], 10.0).unwrap();
        let feats = FeatureMatrix::new(uniform_vec(&mut rng, 120, -1.0, 1.0), 3, 10.0).unwrap();
        worst_align = worst_align.max(check_params(&store, &|tape, s| {
            let mut m = model.clone();
            m.store = s.clone();
            m.joint_loss(tape, &ann, &feats, &lags).unwrap().0
        }));

        let mut p = PredictorModel::with_span(Variant::Slts, 3, 50.0, 2.0, &mut rng).unwrap();
        let hw = p.head.weight;
        let vals = uniform_vec(&mut rng, 3, -1.0, 1.0);
        p.store.get_mut(hw).values_mut().copy_from_slice(&vals);
        for sinc in [p.input_sinc.clone().unwrap(), p.output_sinc.clone().unwrap()] {
            let raw = rng.gen_range(-3.0..1.0);
            p.store.get_mut(sinc.raw_cutoff).values_mut()[0] = raw;
        }
        let feats = FeatureMatrix::new(uniform_vec(&mut rng, 3 * 150, -1.0, 1.0), 3, 50.0).unwrap();
        let target = smooth_vec(&mut rng, 150);
        worst_slts = worst_slts.max(check_params(&p.store, &|tape, s| {
            let mut m = p.clone();
            m.store = s.clone();
            let y = m.forward(tape, &feats).unwrap();
            let t = tape.constant(&[150], target.clone()).unwrap();
            let c = tape.ccc(y, t).unwrap();
            let neg = tape.scale(c, -1.0);
            tape.offset(neg, 1.0)
        }));
    }
    vec![
        Check::new("aligner_joint_loss", worst_align, TOL, TRIALS),
        Check::new("slts_ccc_loss", worst_slts, TOL, TRIALS),
    ]
}

pub fn all_checks() -> Vec<Check> {
    let mut out = primitive_checks();
    out.extend(layer_checks());
    out.push(bigru_check());
    out.push(joint_style_check());
    out.extend(model_checks());
    out
}
