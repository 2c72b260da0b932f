use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, OptimizerState};
use super::config::TcnConfig;
use super::conv::Sequence;
use super::model::{Mode, TcnModel};
use crate::dsp::{self, Band, Direction, Hrir, HrirPair, CANONICAL_BAND, SD_TRANSFORM_SIZE};
use crate::error::{Error, Result};
use crate::metrics::{self, CostValue, SdContext};

/// One supervised example: the measured 0 degree pair and the target-direction pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub input: HrirPair,
    pub target: HrirPair,
}

/// Cost terms of one generated pair against its target, per ear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub left: CostValue,
    pub right: CostValue,
}

impl PairMetrics {
    pub fn ears(&self) -> [CostValue; 2] {
        [self.left, self.right]
    }

    pub fn mean_cost(&self) -> f64 {
        (self.left.total + self.right.total) / 2.0
    }
}

/// Means over examples and ears.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetMetrics {
    pub cost: f64,
    pub sd: f64,
    pub sdr: f64,
}

impl SetMetrics {
    pub fn from_pairs(items: &[PairMetrics]) -> Option<Self> {
        if items.is_empty() {
            return None;
        }
        let n = (2 * items.len()) as f64;
        let ears = items.iter().flat_map(|m| m.ears());
        let (cost, sd, sdr) = ears.fold((0.0, 0.0, 0.0), |(c, s, r), e| {
            (c + e.total, s + e.sd_term, r + e.sdr())
        });
        Some(Self {
            cost: cost / n,
            sd: sd / n,
            sdr: sdr / n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train: SetMetrics,
    pub validation: Option<SetMetrics>,
}

/// Loss curves of one training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    /// Train-mode (dropout active) mean cost before the update of each epoch;
    /// entry `i` belongs to epoch `i + 1`.
    pub objective: Vec<f64>,
    /// Eval-mode metrics after the update of every recorded epoch. Epoch 0 is
    /// the untrained network.
    pub entries: Vec<EpochMetrics>,
}

impl TrainRecord {
    pub fn last(&self) -> Option<&EpochMetrics> {
        self.entries.last()
    }

    pub fn at_epoch(&self, epoch: usize) -> Option<&EpochMetrics> {
        self.entries.iter().find(|e| e.epoch == epoch)
    }
}

pub struct TrainOptions<'a> {
    /// Cadence of eval-mode metric recording; `0` records only the first and
    /// final epochs.
    pub record_every: usize,
    pub validation: &'a [TrainingPair],
    pub transform_size: usize,
    pub band: Band,
    /// Reject pairs that are not 492 samples at 44.1 kHz.
    pub require_canonical: bool,
    pub on_record: Option<&'a (dyn Fn(&EpochMetrics) + Sync)>,
}

impl Default for TrainOptions<'_> {
    fn default() -> Self {
        Self {
            record_every: 100,
            validation: &[],
            transform_size: SD_TRANSFORM_SIZE,
            band: CANONICAL_BAND,
            require_canonical: true,
            on_record: None,
        }
    }
}

pub fn pair_to_sequence(pair: &HrirPair) -> Sequence {
    Sequence::from_rows(&[pair.left.samples(), pair.right.samples()]).expect("equal ear lengths")
}

pub fn sequence_to_pair(seq: &Sequence, sample_rate: u32, direction: Direction) -> Result<HrirPair> {
    if seq.channels() != 2 {
        return Err(Error::invalid(format!(
            "expected a 2-channel output, got {} channels",
            seq.channels()
        )));
    }
    HrirPair::new(
        Hrir::new(seq.row(0).to_vec(), sample_rate)?,
        Hrir::new(seq.row(1).to_vec(), sample_rate)?,
        direction,
    )
}

/// Reference spectra for both ears of one target, computed once per run.
struct Prepared<'a> {
    input: Sequence,
    target: &'a HrirPair,
    ears: [SdContext; 2],
}

fn prepare<'a>(pairs: &'a [TrainingPair], opts: &TrainOptions<'_>) -> Result<Vec<Prepared<'a>>> {
    let first = pairs.first().map(|p| (p.input.len(), p.input.sample_rate()));
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if opts.require_canonical && !(p.input.is_canonical() && p.target.is_canonical()) {
                return Err(Error::precondition(format!(
                    "training pair {i} is not canonical (492 samples @ 44100 Hz)"
                )));
            }
            let shape = (p.input.len(), p.input.sample_rate());
            if Some(shape) != first || (p.target.len(), p.target.sample_rate()) != shape {
                return Err(Error::precondition(format!(
                    "training pair {i} differs in length or rate from the others"
                )));
            }
            let ear = |h: &Hrir| -> Result<SdContext> {
                let spec = dsp::magnitude_spectrum(h, opts.transform_size, opts.band)?;
                Ok(SdContext::new(&spec, opts.transform_size))
            };
            Ok(Prepared {
                input: pair_to_sequence(&p.input),
                target: &p.target,
                ears: [ear(&p.target.left)?, ear(&p.target.right)?],
            })
        })
        .collect()
}

/// Eval-mode cost terms of `model` on every pair, in order.
pub fn evaluate_pairs(
    model: &TcnModel,
    pairs: &[TrainingPair],
    transform_size: usize,
    band: Band,
) -> Result<Vec<PairMetrics>> {
    pairs
        .par_iter()
        .map(|p| {
            let y = model.predict(&pair_to_sequence(&p.input))?;
            let out = sequence_to_pair(&y, p.target.sample_rate(), p.target.direction)?;
            Ok(PairMetrics {
                left: metrics::cost(&p.target.left, &out.left, transform_size, band)?,
                right: metrics::cost(&p.target.right, &out.right, transform_size, band)?,
            })
        })
        .collect()
}

fn example_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | index as u64);
    rng
}

/// Full-batch training: every epoch runs all pairs through the network, takes
/// the mean cost over ears and pairs, and applies one Adam step.
pub fn train(
    config: &TcnConfig,
    pairs: &[TrainingPair],
    opts: &TrainOptions<'_>,
) -> Result<(TcnModel, TrainRecord)> {
    if pairs.is_empty() {
        return Err(Error::precondition("training needs at least one pair"));
    }
    let prepared = prepare(pairs, opts)?;
    let mut model = TcnModel::new(config.clone())?;
    let mut state = OptimizerState::new(model.num_params());
    let mut record = TrainRecord::default();
    let scale = 1.0 / (2 * pairs.len()) as f64;

    let log = |model: &TcnModel, epoch: usize, record: &mut TrainRecord| -> Result<()> {
        let train = evaluate_pairs(model, pairs, opts.transform_size, opts.band)?;
        let validation = evaluate_pairs(model, opts.validation, opts.transform_size, opts.band)?;
        let entry = EpochMetrics {
            epoch,
            train: SetMetrics::from_pairs(&train).expect("non-empty training set"),
            validation: SetMetrics::from_pairs(&validation),
        };
        if let Some(cb) = opts.on_record {
            cb(&entry);
        }
        record.entries.push(entry);
        Ok(())
    };
    log(&model, 0, &mut record)?;

    for epoch in 1..=config.epochs {
        let results: Vec<(f64, Vec<f64>)> = prepared
            .par_iter()
            .enumerate()
            .map(|(i, ex)| {
                let mut rng = example_rng(config.seed, epoch, i);
                let (y, tape) = model.forward(&ex.input, Mode::Train(&mut rng))?;
                let mut grad_out = Sequence::zeros(2, y.len());
                let mut cost = 0.0;
                for (e, (ctx, target)) in ex.ears.iter().zip(ex.target.ears()).enumerate() {
                    let (value, grad) = ctx.evaluate(target.samples(), y.row(e))?;
                    cost += value.total;
                    for (g, d) in grad_out.row_mut(e).iter_mut().zip(grad.total()) {
                        *g = d * scale;
                    }
                }
                Ok((cost * scale, model.backward(&tape, &grad_out)?))
            })
            .collect::<Result<_>>()?;

        let mut objective = 0.0;
        let mut grads = vec![0.0; model.num_params()];
        for (c, g) in results {
            objective += c;
            for (acc, v) in grads.iter_mut().zip(g) {
                *acc += v;
            }
        }
        if !objective.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                cost: objective,
            });
        }
        record.objective.push(objective);

        let mut params = model.params().to_vec();
        adam_step(
            &mut params,
            &grads,
            &mut state,
            config.learning_rate,
            config.weight_decay,
        );
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                cost: objective,
            });
        }
        model.apply_update(&params);

        let due = opts.record_every > 0 && epoch % opts.record_every == 0;
        if due || epoch == config.epochs {
            log(&model, epoch, &mut record)?;
        }
    }
    Ok((model, record))
}
