//! Trajectory forecasting and coverage-aware workload prediction.
//!
//! Sliding 12-step windows over vehicle traces feed a five-layer stack
//! (LSTM, dropout, LSTM, dense, ReLU) that predicts the next normalized
//! position. Predicted positions are counted per RSU coverage region and
//! converted to predicted workloads.

use std::collections::BTreeMap;

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{
    checkpoint, init_dense, init_lstm, DenseLayerParams, LstmCellParams, NumericArray,
    OptimizerState, Tape, TapedDense, TapedLstm, Var,
};
use crate::parallel::par_map;
use crate::world::{distance, MobilityTrace, Position, RsuId, RsuSpec, VehicleId};
use crate::{Error, Result};

/// Min-max coordinate normalization into the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Position,
    pub max: Position,
}

impl Normalizer {
    pub fn from_positions<'a>(positions: impl Iterator<Item = &'a Position>) -> Self {
        let mut min = Position::new(f64::INFINITY, f64::INFINITY);
        let mut max = Position::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in positions {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Normalizer { min, max }
    }

    pub fn from_bounds(min: Position, max: Position) -> Self {
        Normalizer { min, max }
    }

    fn span(&self) -> (f64, f64) {
        let sx = self.max.x - self.min.x;
        let sy = self.max.y - self.min.y;
        (if sx > 0.0 { sx } else { 1.0 }, if sy > 0.0 { sy } else { 1.0 })
    }

    pub fn normalize(&self, p: Position) -> [f64; 2] {
        let (sx, sy) = self.span();
        [(p.x - self.min.x) / sx, (p.y - self.min.y) / sy]
    }

    pub fn denormalize(&self, n: [f64; 2]) -> Position {
        let (sx, sy) = self.span();
        Position::new(self.min.x + n[0] * sx, self.min.y + n[1] * sy)
    }
}

/// One training example: normalized history plus the next position.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajWindow {
    pub history: Vec<[f64; 2]>,
    pub target: [f64; 2],
}

/// Windows for all traces, kept contiguous per trace for leak-free splits.
#[derive(Debug, Clone)]
pub struct WindowDataset {
    pub windows: Vec<TrajWindow>,
    /// (vehicle, number of windows) in on-disk order; counts sum to len().
    pub per_trace: Vec<(VehicleId, usize)>,
    pub norm: Normalizer,
    /// Traces too short to produce a single window.
    pub skipped: usize,
}

impl WindowDataset {
    /// Hold out the last `frac` of each trace's windows (temporal split).
    pub fn split(&self, holdout_frac: f64) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut offset = 0;
        for (_, count) in &self.per_trace {
            let hold = ((*count as f64) * holdout_frac).floor() as usize;
            let cut = count - hold;
            train.extend(offset..offset + cut);
            test.extend(offset + cut..offset + count);
            offset += count;
        }
        (train, test)
    }
}

/// All maximal sliding windows with `hist` history steps and a target
/// `horizon` steps past the history.
pub fn window_dataset(
    traces: &[MobilityTrace],
    hist: usize,
    horizon: usize,
) -> Result<WindowDataset> {
    if hist == 0 || horizon == 0 {
        return Err(Error::config("window history and horizon must be positive"));
    }
    let norm = Normalizer::from_positions(
        traces.iter().flat_map(|t| t.samples.iter().map(|s| &s.position)),
    );
    let mut windows = Vec::new();
    let mut per_trace = Vec::new();
    let mut skipped = 0;
    for trace in traces {
        let need = hist + horizon;
        if trace.samples.len() < need {
            skipped += 1;
            continue;
        }
        let count = trace.samples.len() - need + 1;
        for start in 0..count {
            let history = trace.samples[start..start + hist]
                .iter()
                .map(|s| norm.normalize(s.position))
                .collect();
            let target = norm.normalize(trace.samples[start + need - 1].position);
            windows.push(TrajWindow { history, target });
        }
        per_trace.push((trace.vehicle_id, count));
    }
    Ok(WindowDataset { windows, per_trace, norm, skipped })
}

/// The five-layer prediction stack.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    pub lstm1: LstmCellParams,
    pub lstm2: LstmCellParams,
    pub dense: DenseLayerParams,
    pub dropout_rate: f64,
}

impl ForecastModel {
    pub fn init(hidden: usize, dropout_rate: f64, rng: &mut impl Rng) -> Self {
        ForecastModel {
            lstm1: init_lstm(hidden, 2, rng),
            lstm2: init_lstm(hidden, hidden, rng),
            dense: init_dense(2, hidden, rng),
            dropout_rate,
        }
    }

    /// All-zero parameters; predictions are exactly the zero vector.
    pub fn zeros(hidden: usize) -> Self {
        let z = |r: usize, c: usize| NumericArray::zeros(vec![r, c]);
        let zb = |n: usize| NumericArray::zeros(vec![n]);
        let cell = |input: usize| LstmCellParams {
            w_f: z(hidden, hidden + input),
            w_i: z(hidden, hidden + input),
            w_c: z(hidden, hidden + input),
            w_o: z(hidden, hidden + input),
            b_f: zb(hidden),
            b_i: zb(hidden),
            b_c: zb(hidden),
            b_o: zb(hidden),
        };
        ForecastModel {
            lstm1: cell(2),
            lstm2: cell(hidden),
            dense: DenseLayerParams { weights: z(2, hidden), bias: zb(2) },
            dropout_rate: 0.0,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm1.hidden_dim()
    }

    fn param_arrays(&self) -> Vec<&NumericArray> {
        let mut v: Vec<&NumericArray> = self.lstm1.arrays().to_vec();
        v.extend(self.lstm2.arrays());
        v.push(&self.dense.weights);
        v.push(&self.dense.bias);
        v
    }

    fn param_arrays_mut(&mut self) -> Vec<&mut NumericArray> {
        let mut v: Vec<&mut NumericArray> = self.lstm1.arrays_mut().into_iter().collect();
        v.extend(self.lstm2.arrays_mut());
        v.push(&mut self.dense.weights);
        v.push(&mut self.dense.bias);
        v
    }

    /// Deterministic inference pass (dropout off). `history` length must
    /// match the trained window length.
    pub fn predict(&self, history: &[[f64; 2]], expected_len: usize) -> Result<[f64; 2]> {
        if history.len() != expected_len {
            return Err(Error::contract(format!(
                "window length {} but model expects {expected_len}",
                history.len()
            )));
        }
        let hidden = self.hidden_dim();
        let mut h1 = NumericArray::zeros(vec![hidden]);
        let mut c1 = NumericArray::zeros(vec![hidden]);
        let mut h2 = NumericArray::zeros(vec![hidden]);
        let mut c2 = NumericArray::zeros(vec![hidden]);
        for step in history {
            let x = NumericArray::vector(step.to_vec());
            let (nh1, nc1) = self.lstm1.step(&x, &h1, &c1)?;
            h1 = nh1;
            c1 = nc1;
            let (nh2, nc2) = self.lstm2.step(&h1, &h2, &c2)?;
            h2 = nh2;
            c2 = nc2;
        }
        let out = self.dense.forward(&h2)?;
        Ok([out.values()[0].max(0.0), out.values()[1].max(0.0)])
    }
}

/// A trained model bundled with its normalization constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecaster {
    pub model: ForecastModel,
    pub norm: Normalizer,
    pub hist_len: usize,
}

impl Forecaster {
    /// Predict the next map-coordinate position from a raw position history.
    pub fn predict_position(&self, history: &[Position]) -> Result<Position> {
        let window: Vec<[f64; 2]> = history.iter().map(|p| self.norm.normalize(*p)).collect();
        let out = self.model.predict(&window, self.hist_len)?;
        Ok(self.norm.denormalize(out))
    }

    pub fn save<W: std::io::Write>(&self, w: W) -> Result<()> {
        let meta = NumericArray::vector(vec![
            self.hist_len as f64,
            self.model.dropout_rate,
            self.norm.min.x,
            self.norm.min.y,
            self.norm.max.x,
            self.norm.max.y,
        ]);
        let mut entries: Vec<(&str, &NumericArray)> = vec![("meta", &meta)];
        let names1 =
            ["l1.w_f", "l1.w_i", "l1.w_c", "l1.w_o", "l1.b_f", "l1.b_i", "l1.b_c", "l1.b_o"];
        let names2 =
            ["l2.w_f", "l2.w_i", "l2.w_c", "l2.w_o", "l2.b_f", "l2.b_i", "l2.b_c", "l2.b_o"];
        for (n, a) in names1.iter().zip(self.model.lstm1.arrays()) {
            entries.push((n, a));
        }
        for (n, a) in names2.iter().zip(self.model.lstm2.arrays()) {
            entries.push((n, a));
        }
        entries.push(("dense.w", &self.model.dense.weights));
        entries.push(("dense.b", &self.model.dense.bias));
        checkpoint::write_checkpoint(w, &entries)
    }

    pub fn load<R: std::io::Read>(r: R) -> Result<Self> {
        let mut entries = checkpoint::read_checkpoint(r)?;
        let meta = checkpoint::take_entry(&mut entries, "meta")?;
        let m = meta.values().to_vec();
        if m.len() != 6 {
            return Err(Error::validation("forecaster meta entry malformed"));
        }
        let mut cell = |prefix: &str| -> Result<LstmCellParams> {
            Ok(LstmCellParams {
                w_f: checkpoint::take_entry(&mut entries, &format!("{prefix}.w_f"))?,
                w_i: checkpoint::take_entry(&mut entries, &format!("{prefix}.w_i"))?,
                w_c: checkpoint::take_entry(&mut entries, &format!("{prefix}.w_c"))?,
                w_o: checkpoint::take_entry(&mut entries, &format!("{prefix}.w_o"))?,
                b_f: checkpoint::take_entry(&mut entries, &format!("{prefix}.b_f"))?,
                b_i: checkpoint::take_entry(&mut entries, &format!("{prefix}.b_i"))?,
                b_c: checkpoint::take_entry(&mut entries, &format!("{prefix}.b_c"))?,
                b_o: checkpoint::take_entry(&mut entries, &format!("{prefix}.b_o"))?,
            })
        };
        let lstm1 = cell("l1")?;
        let lstm2 = cell("l2")?;
        Ok(Forecaster {
            model: ForecastModel {
                lstm1,
                lstm2,
                dense: DenseLayerParams {
                    weights: checkpoint::take_entry(&mut entries, "dense.w")?,
                    bias: checkpoint::take_entry(&mut entries, "dense.b")?,
                },
                dropout_rate: m[1],
            },
            norm: Normalizer {
                min: Position::new(m[2], m[3]),
                max: Position::new(m[4], m[5]),
            },
            hist_len: m[0] as usize,
        })
    }
}

/// Training hyperparameters. Paper-default sizes; tests shrink them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainForecastConfig {
    pub hidden: usize,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Fixed gradient-chunk width; decouples results from thread count.
    pub chunk: usize,
}

impl Default for TrainForecastConfig {
    fn default() -> Self {
        TrainForecastConfig {
            hidden: 256,
            dropout_rate: 0.05,
            epochs: 500,
            batch: 40,
            step_size: 1e-3,
            seed: 0,
            chunk: 8,
        }
    }
}

/// Per-epoch full-train-set MSE alongside the final model.
pub struct TrainedForecast {
    pub model: ForecastModel,
    pub epoch_mse: Vec<f64>,
}

struct TapedForecast {
    lstm1: TapedLstm,
    lstm2: TapedLstm,
    dense: TapedDense,
}

impl TapedForecast {
    fn new(tape: &mut Tape, model: &ForecastModel) -> Self {
        TapedForecast {
            lstm1: TapedLstm::new(tape, &model.lstm1),
            lstm2: TapedLstm::new(tape, &model.lstm2),
            dense: TapedDense::new(tape, &model.dense),
        }
    }

    /// Squared-error loss for one window. `masks` holds one inverted-dropout
    /// mask per step applied between the recurrent layers (empty: inference).
    fn window_loss(
        &self,
        tape: &mut Tape,
        hidden: usize,
        window: &TrajWindow,
        masks: &[Vec<f64>],
    ) -> Var {
        let mut h1 = tape.leaf(NumericArray::zeros(vec![hidden]));
        let mut c1 = tape.leaf(NumericArray::zeros(vec![hidden]));
        let mut h2 = tape.leaf(NumericArray::zeros(vec![hidden]));
        let mut c2 = tape.leaf(NumericArray::zeros(vec![hidden]));
        for (step, xy) in window.history.iter().enumerate() {
            let x = tape.leaf_vector(xy.to_vec());
            let (nh1, nc1) = self.lstm1.step(tape, x, h1, c1);
            h1 = nh1;
            c1 = nc1;
            let dropped = if masks.is_empty() {
                h1
            } else {
                let mask = tape.leaf_vector(masks[step].clone());
                tape.mul(h1, mask)
            };
            let (nh2, nc2) = self.lstm2.step(tape, dropped, h2, c2);
            h2 = nh2;
            c2 = nc2;
        }
        let lin = self.dense.forward(tape, h2);
        let out = tape.relu(lin);
        let target = tape.leaf_vector(window.target.to_vec());
        let diff = tape.sub(out, target);
        let sq = tape.mul(diff, diff);
        tape.mean(sq)
    }

    fn grads(&self, tape: &Tape, grads: &crate::numerics::Gradients) -> Vec<Vec<f64>> {
        let mut g = self.lstm1.grads(tape, grads);
        g.extend(self.lstm2.grads(tape, grads));
        g.extend(self.dense.grads(tape, grads));
        g
    }
}

/// Mean squared error of the model over the listed windows, dropout off.
pub fn dataset_mse(model: &ForecastModel, windows: &[TrajWindow], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let hist = windows[idx[0]].history.len();
    let losses = par_map(idx, |i| {
        let w = &windows[*i];
        let pred = model.predict(&w.history, hist).expect("window length fixed");
        let dx = pred[0] - w.target[0];
        let dy = pred[1] - w.target[1];
        (dx * dx + dy * dy) / 2.0
    });
    losses.iter().sum::<f64>() / idx.len() as f64
}

/// Train the stack on the windows selected by `train_idx`. Deterministic for
/// the seed.
pub fn train_forecaster(
    windows: &[TrajWindow],
    train_idx: &[usize],
    cfg: &TrainForecastConfig,
) -> Result<TrainedForecast> {
    if windows.is_empty() || train_idx.is_empty() {
        return Err(Error::config("cannot train a forecaster on an empty dataset"));
    }
    let hist = windows[0].history.len();
    if windows.iter().any(|w| w.history.len() != hist) {
        return Err(Error::contract("inconsistent window lengths"));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = ForecastModel::init(cfg.hidden, cfg.dropout_rate, &mut init_rng);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut opt = OptimizerState::new(cfg.step_size, &model.param_arrays());
    let mut order: Vec<usize> = train_idx.to_vec();
    let mut epoch_mse = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch) {
            // Masks are pre-sampled in window order so chunked parallel
            // execution cannot perturb the rng stream.
            let masks: Vec<Vec<Vec<f64>>> = batch
                .iter()
                .map(|_| sample_masks(hist, cfg.hidden, model.dropout_rate, &mut dropout_rng))
                .collect();
            let width = cfg.chunk.max(1);
            let jobs: Vec<(usize, usize)> = (0..batch.len())
                .step_by(width)
                .map(|s| (s, (s + width).min(batch.len())))
                .collect();
            let model_ref = &model;
            let chunk_grads = par_map(&jobs, |(lo, hi)| {
                let mut tape = Tape::new();
                let taped = TapedForecast::new(&mut tape, model_ref);
                let mut loss_sum: Option<Var> = None;
                for k in *lo..*hi {
                    let loss =
                        taped.window_loss(&mut tape, cfg.hidden, &windows[batch[k]], &masks[k]);
                    loss_sum = Some(match loss_sum {
                        Some(acc) => tape.add(acc, loss),
                        None => loss,
                    });
                }
                let total = loss_sum.expect("non-empty chunk");
                let grads = tape.backward(total).expect("scalar loss");
                taped.grads(&tape, &grads)
            });
            // Ordered reduce: mean over the batch.
            let scale = 1.0 / batch.len() as f64;
            let mut total: Vec<Vec<f64>> = chunk_grads[0].clone();
            for cg in &chunk_grads[1..] {
                for (t, c) in total.iter_mut().zip(cg) {
                    for (tv, cv) in t.iter_mut().zip(c) {
                        *tv += cv;
                    }
                }
            }
            for g in &mut total {
                for v in g.iter_mut() {
                    *v *= scale;
                }
            }
            opt.step(&mut model.param_arrays_mut(), &total);
        }
        epoch_mse.push(dataset_mse(&model, windows, train_idx));
    }
    Ok(TrainedForecast { model, epoch_mse })
}

fn sample_masks(steps: usize, hidden: usize, rate: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let keep = 1.0 - rate;
    (0..steps)
        .map(|_| {
            (0..hidden)
                .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Regression metrics over flattened coordinate errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    /// `None` when the targets have zero variance.
    pub r2: Option<f64>,
    pub medae: f64,
}

pub fn eval_metrics(preds: &[[f64; 2]], targets: &[[f64; 2]]) -> Result<Metrics> {
    if preds.len() != targets.len() || preds.len() < 2 {
        return Err(Error::contract(
            "metrics need equally many predictions and targets (at least 2)",
        ));
    }
    let flat_p: Vec<f64> = preds.iter().flatten().copied().collect();
    let flat_t: Vec<f64> = targets.iter().flatten().copied().collect();
    let n = flat_p.len() as f64;
    let mut abs_errors: Vec<f64> = flat_p
        .iter()
        .zip(&flat_t)
        .map(|(p, t)| (p - t).abs())
        .collect();
    let mse = abs_errors.iter().map(|e| e * e).sum::<f64>() / n;
    let mae = abs_errors.iter().sum::<f64>() / n;
    abs_errors.sort_by(f64::total_cmp);
    let medae = if abs_errors.len() % 2 == 1 {
        abs_errors[abs_errors.len() / 2]
    } else {
        0.5 * (abs_errors[abs_errors.len() / 2 - 1] + abs_errors[abs_errors.len() / 2])
    };
    let mean_t = flat_t.iter().sum::<f64>() / n;
    let ss_tot: f64 = flat_t.iter().map(|t| (t - mean_t) * (t - mean_t)).sum();
    let ss_res: f64 = flat_p
        .iter()
        .zip(&flat_t)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    let r2 = if ss_tot > 0.0 { Some(1.0 - ss_res / ss_tot) } else { None };
    Ok(Metrics { mse, mae, r2, medae })
}

/// Count predicted positions per coverage region. A position inside several
/// disks counts toward the nearest RSU only; positions outside every disk
/// count nowhere.
pub fn region_count(positions: &[Position], rsus: &[RsuSpec]) -> BTreeMap<RsuId, usize> {
    let mut counts: BTreeMap<RsuId, usize> = rsus.iter().map(|r| (r.id, 0)).collect();
    for p in positions {
        let mut best: Option<(f64, RsuId)> = None;
        for r in rsus {
            let d = distance(*p, r.position);
            if d <= r.coverage_radius_m {
                let key = (d, r.id);
                if best.map_or(true, |b| key < b) {
                    best = Some(key);
                }
            }
        }
        if let Some((_, id)) = best {
            *counts.get_mut(&id).unwrap() += 1;
        }
    }
    counts
}

/// Predicted workload: prior plus `zeta` cycles per predicted vehicle, kept
/// inside `[0, cap]`.
pub fn predict_workload(prior_cycles: f64, zeta_cycles: f64, count: usize, cap_cycles: f64) -> f64 {
    (prior_cycles + zeta_cycles * count as f64).clamp(0.0, cap_cycles)
}
