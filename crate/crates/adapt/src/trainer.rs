//! Training steps: supervised, gradient reversal, label flipping and their
//! two-level ensemble.

use std::collections::{BTreeMap, HashMap};

use hlad_core::{AdamState, GradError, Executor, GradRequest, Gradients, Graph, NodeId, ParamId, ParamSet, Scalar, Seed, Tensor};

use crate::config::TrainingConfig;
use crate::data::{DomainBatch, LabeledBatch};
use crate::error::{AdaptError, Result};
use crate::method::{AdversarialMode, MethodSpec};
use crate::model::{Discriminator, Level, LocalizationModel, ModelNodes};

/// Losses and discriminator pass counts of one step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    pub l_m: Option<f64>,
    /// Discriminator loss with true domain targets.
    pub l_d: BTreeMap<Level, f64>,
    /// Flipped-target loss driving the generator (label flipping only).
    pub l_a: BTreeMap<Level, f64>,
    /// Discriminator forward passes per level during the step.
    pub d_passes: BTreeMap<Level, usize>,
}

/// Which terms seed a localization-model gradient.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Objective {
    pub supervised: bool,
    pub levels: Vec<Level>,
}

/// Gradient of θ_m for an [`Objective`] plus the discriminator outputs it
/// was computed at.
#[derive(Clone, Debug)]
pub struct GradientProbe<T> {
    pub grads: Gradients<T>,
    pub d_outputs: BTreeMap<Level, Vec<T>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct GraphKey {
    mode: AdversarialMode,
    levels: Vec<Level>,
    n_source: usize,
    n_target: usize,
}

struct LevelNodes {
    p: NodeId,
    loss: NodeId,
    target_input: usize,
}

struct StepGraph<T> {
    graph: Graph,
    exec: Executor<T>,
    n_source: usize,
    n_target: usize,
    l_m: Option<NodeId>,
    branches: Vec<ModelNodes>,
    levels: BTreeMap<Level, LevelNodes>,
}

/// Latent codes and heatmaps of a batch, source rows first.
#[derive(Clone, Debug)]
pub struct ModelOutputs<T> {
    pub latent: Tensor<T>,
    pub heatmap: Tensor<T>,
}

/// Parameters, optimizer states and cached step graphs for one run.
pub struct Trainer<T> {
    config: TrainingConfig,
    params: ParamSet<T>,
    model: LocalizationModel,
    discriminators: BTreeMap<Level, Discriminator>,
    theta_m: Vec<ParamId>,
    theta_d: BTreeMap<Level, Vec<ParamId>>,
    adam_m: AdamState<T>,
    adam_d: BTreeMap<Level, AdamState<T>>,
    graphs: HashMap<GraphKey, StepGraph<T>>,
}

fn domain_targets<T: Scalar>(n_source: usize, n_target: usize, flipped: bool) -> Tensor<T> {
    let (s, t) = if flipped { (T::zero(), T::one()) } else { (T::one(), T::zero()) };
    let data = std::iter::repeat_n(s, n_source).chain(std::iter::repeat_n(t, n_target)).collect();
    Tensor::new(vec![n_source + n_target, 1], data).expect("length matches shape")
}

fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64_lossy()
}

impl<T: Scalar> Trainer<T> {
    /// Fresh model (and one discriminator per level) initialized from `seed`.
    /// Parameter streams are keyed by name, so the model's initial weights
    /// do not depend on which discriminators exist.
    pub fn new(levels: &[Level], config: &TrainingConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new(seed);
        let model = LocalizationModel::register(&mut params, config.model)?;
        let mut discriminators = BTreeMap::new();
        for &level in levels {
            discriminators.insert(level, Discriminator::register(&mut params, level, &config.model)?);
        }
        let theta_m = LocalizationModel::param_ids(&params);
        let theta_d: BTreeMap<Level, Vec<ParamId>> =
            discriminators.iter().map(|(&l, d)| (l, d.param_ids(&params))).collect();
        let adam_m = AdamState::new(&params, theta_m.clone(), config.adam());
        let adam_d = theta_d.iter().map(|(&l, ids)| (l, AdamState::new(&params, ids.clone(), config.adam()))).collect();
        Ok(Self {
            config: config.clone(),
            params,
            model,
            discriminators,
            theta_m,
            theta_d,
            adam_m,
            adam_d,
            graphs: HashMap::new(),
        })
    }

    pub fn for_method(method: &MethodSpec, config: &TrainingConfig, seed: u64) -> Result<Self> {
        Self::new(&method.levels, config, seed)
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn model(&self) -> &LocalizationModel {
        &self.model
    }

    pub fn levels(&self) -> Vec<Level> {
        self.discriminators.keys().copied().collect()
    }

    /// θ_m.
    pub fn model_params(&self) -> &[ParamId] {
        &self.theta_m
    }

    /// θ_d of one level.
    pub fn discriminator_params(&self, level: Level) -> Result<&[ParamId]> {
        self.theta_d.get(&level).map(Vec::as_slice).ok_or(AdaptError::LevelNotConfigured(level))
    }

    fn check_levels(&self, levels: &[Level]) -> Result<()> {
        match levels.iter().find(|l| !self.discriminators.contains_key(l)) {
            Some(&l) => Err(AdaptError::LevelNotConfigured(l)),
            None => Ok(()),
        }
    }

    fn build(&self, key: &GraphKey) -> Result<StepGraph<T>> {
        let (p, cfg) = (&self.params, &self.config.model);
        let [c, h, w] = cfg.feature_shape;
        let mut g = Graph::new();
        let mut next_input = 0;
        let mut input = |g: &mut Graph, shape: Vec<usize>| {
            next_input += 1;
            (g.input(shape), next_input - 1)
        };
        let mut l_m = None;
        let mut source = None;
        if key.n_source > 0 {
            let xs: Vec<NodeId> = (0..cfg.arrays).map(|_| input(&mut g, vec![key.n_source, c, h, w]).0).collect();
            let nodes = self.model.build(&mut g, p, &xs)?;
            let (y, _) = input(&mut g, vec![key.n_source, 1, cfg.grid, cfg.grid]);
            let loss = g.mse(nodes.heatmap, y)?;
            g.mark_output(loss);
            l_m = Some(loss);
            source = Some(nodes);
        }
        let mut target = None;
        if key.n_target > 0 {
            let xt: Vec<NodeId> = (0..cfg.arrays).map(|_| input(&mut g, vec![key.n_target, c, h, w]).0).collect();
            target = Some(self.model.build(&mut g, p, &xt)?);
        }
        let mut levels = BTreeMap::new();
        for &level in &key.levels {
            let pick = |n: &ModelNodes| match level {
                Level::Int => n.latent,
                Level::Out => n.heatmap,
            };
            let parts: Vec<NodeId> = source.iter().chain(target.iter()).map(pick).collect();
            let mut z = if parts.len() == 1 { parts[0] } else { g.concat(&parts, 0)? };
            if key.mode == AdversarialMode::Grl {
                z = g.grl(z, self.config.grl_lambda * self.config.adv_weight)?;
            }
            let prob = self.discriminators[&level].build(&mut g, p, z)?;
            let (t, target_input) = input(&mut g, vec![key.n_source + key.n_target, 1]);
            let loss = g.bce(prob, t)?;
            g.mark_output(loss);
            levels.insert(level, LevelNodes { p: prob, loss, target_input });
        }
        let branches = source.into_iter().chain(target).collect();
        Ok(StepGraph { graph: g, exec: Executor::new(), n_source: key.n_source, n_target: key.n_target, l_m, branches, levels })
    }

    fn key(mode: AdversarialMode, levels: &[Level], batch: &DomainBatch<T>) -> Result<GraphKey> {
        let n_source = batch.source.as_ref().map_or(0, |s| s.len());
        let n_target = batch.target.as_ref().map_or(0, |t| t.first().map_or(0, |x| x.shape()[0]));
        if n_source + n_target == 0 {
            return Err(AdaptError::DatasetMismatch("empty batch".into()));
        }
        let mut levels = levels.to_vec();
        levels.sort();
        levels.dedup();
        Ok(GraphKey { mode, levels, n_source, n_target })
    }

    /// Builds (or reuses) the graph for `key` and runs a forward pass.
    fn forward(&mut self, key: &GraphKey, batch: &DomainBatch<T>, flipped: bool) -> Result<()> {
        if !self.graphs.contains_key(key) {
            let sg = self.build(key)?;
            self.graphs.insert(key.clone(), sg);
        }
        let sg = self.graphs.get_mut(key).expect("inserted above");
        let mut inputs = Vec::new();
        if let Some(s) = &batch.source {
            inputs.extend(s.arrays.iter().cloned());
            inputs.push(s.heatmaps.clone());
        }
        if let Some(t) = &batch.target {
            inputs.extend(t.iter().cloned());
        }
        for _ in &key.levels {
            inputs.push(domain_targets(sg.n_source, sg.n_target, flipped));
        }
        sg.exec.reset_counters();
        sg.exec.forward(&sg.graph, &self.params, inputs)?;
        Ok(())
    }

    fn graph(&self, key: &GraphKey) -> &StepGraph<T> {
        &self.graphs[key]
    }

    fn scalar(&self, key: &GraphKey, node: NodeId) -> f64 {
        self.graph(key).exec.scalar(node).map_or(f64::NAN, to_f64)
    }

    fn report(&self, key: &GraphKey, losses_are_flipped: bool) -> StepReport {
        let sg = self.graph(key);
        let mut r = StepReport { l_m: sg.l_m.map(|n| self.scalar(key, n)), ..Default::default() };
        for (&level, nodes) in &sg.levels {
            let v = self.scalar(key, nodes.loss);
            if losses_are_flipped {
                r.l_a.insert(level, v);
            } else {
                r.l_d.insert(level, v);
            }
            r.d_passes.insert(level, sg.exec.tag_count(level.tag()));
        }
        r
    }

    fn backward(&self, key: &GraphKey, seeds: &[Seed<T>], ids: &[ParamId]) -> Result<Gradients<T>> {
        let sg = self.graph(key);
        Ok(sg.exec.backward(&sg.graph, &self.params, seeds, &GradRequest::params(ids.iter().copied()))?)
    }

    fn loss_seeds(&self, key: &GraphKey, supervised: bool, levels: &[Level], adv: T) -> Vec<Seed<T>> {
        let sg = self.graph(key);
        let mut seeds = Vec::new();
        if supervised {
            seeds.extend(sg.l_m.map(|n| Seed::scalar(n, T::one())));
        }
        for l in levels {
            if let Some(nodes) = sg.levels.get(l) {
                seeds.push(Seed::scalar(nodes.loss, adv));
            }
        }
        seeds
    }

    fn all_d_ids(&self, levels: &[Level]) -> Vec<ParamId> {
        levels.iter().flat_map(|l| self.theta_d[l].iter().copied()).collect()
    }

    fn step_discriminators(&mut self, levels: &[Level], grads: &Gradients<T>) -> Result<()> {
        for l in levels {
            self.adam_d.get_mut(l).expect("configured level").step(&mut self.params, grads)?;
        }
        Ok(())
    }

    /// One Adam update of θ_m on the localization loss alone.
    pub fn supervised_step(&mut self, batch: &LabeledBatch<T>) -> Result<StepReport> {
        let db = DomainBatch { source: Some(batch.clone()), target: None };
        let key = Self::key(AdversarialMode::None, &[], &db)?;
        self.forward(&key, &db, false)?;
        let seeds = self.loss_seeds(&key, true, &[], T::one());
        let grads = self.backward(&key, &seeds, &self.theta_m)?;
        self.adam_m.step(&mut self.params, &grads)?;
        Ok(self.report(&key, false))
    }

    /// Gradient reversal at `levels`: one forward and one backward pass give
    /// both the discriminator gradients and the reversed generator gradients.
    pub fn grl_adversarial_step(&mut self, batch: &DomainBatch<T>, levels: &[Level]) -> Result<StepReport> {
        self.check_levels(levels)?;
        let key = Self::key(AdversarialMode::Grl, levels, batch)?;
        self.forward(&key, batch, false)?;
        let seeds = self.loss_seeds(&key, true, &key.levels, T::one());
        let mut ids = self.theta_m.clone();
        ids.extend(self.all_d_ids(&key.levels));
        let grads = self.backward(&key, &seeds, &ids)?;
        self.adam_m.step(&mut self.params, &grads)?;
        self.step_discriminators(&key.levels, &grads)?;
        Ok(self.report(&key, false))
    }

    /// Label flipping at `levels`: update θ_d on true domain targets, then
    /// re-run the discriminators on flipped targets and update θ_m.
    pub fn lf_adversarial_step(&mut self, batch: &DomainBatch<T>, levels: &[Level]) -> Result<StepReport> {
        self.check_levels(levels)?;
        let key = Self::key(AdversarialMode::LabelFlip, levels, batch)?;
        self.forward(&key, batch, false)?;
        let d_seeds = self.loss_seeds(&key, false, &key.levels, T::one());
        let d_ids = self.all_d_ids(&key.levels);
        let d_grads = self.backward(&key, &d_seeds, &d_ids)?;
        let first = self.report(&key, false);
        self.step_discriminators(&key.levels, &d_grads)?;

        let sg = self.graphs.get_mut(&key).expect("built by forward");
        let flipped: Vec<(usize, Tensor<T>)> =
            sg.levels.values().map(|n| (n.target_input, domain_targets(sg.n_source, sg.n_target, true))).collect();
        sg.exec.refresh(&sg.graph, &self.params, flipped, &d_ids)?;

        let adv = T::from_f64_lossy(self.config.adv_weight);
        let seeds = self.loss_seeds(&key, true, &key.levels, adv);
        let grads = self.backward(&key, &seeds, &self.theta_m)?;
        self.adam_m.step(&mut self.params, &grads)?;
        let second = self.report(&key, true);
        Ok(StepReport { l_m: first.l_m, l_d: first.l_d, l_a: second.l_a, d_passes: second.d_passes })
    }

    /// Both discriminators train independently while their adversarial
    /// gradients and the localization gradient form one θ_m update.
    pub fn ensemble_step(&mut self, batch: &DomainBatch<T>, mode: AdversarialMode) -> Result<StepReport> {
        let levels = [Level::Int, Level::Out];
        self.check_levels(&levels)?;
        match mode {
            AdversarialMode::Grl => self.grl_adversarial_step(batch, &levels),
            AdversarialMode::LabelFlip => self.lf_adversarial_step(batch, &levels),
            AdversarialMode::None => Err(AdaptError::Config("ensemble step needs an adversarial mode".into())),
        }
    }

    /// Step for `method`, which must match this trainer's discriminators.
    pub fn method_step(&mut self, method: &MethodSpec, batch: &DomainBatch<T>) -> Result<StepReport> {
        match method.mode {
            AdversarialMode::None => {
                let source = batch.source.as_ref().ok_or_else(|| AdaptError::DatasetMismatch("no labeled batch".into()))?;
                self.supervised_step(source)
            }
            AdversarialMode::Grl => self.grl_adversarial_step(batch, &method.levels),
            AdversarialMode::LabelFlip => self.lf_adversarial_step(batch, &method.levels),
        }
    }

    /// Trains only the discriminators at `levels` on true domain targets,
    /// leaving θ_m untouched.
    pub fn discriminator_step(&mut self, batch: &DomainBatch<T>, levels: &[Level]) -> Result<StepReport> {
        self.check_levels(levels)?;
        let key = Self::key(AdversarialMode::LabelFlip, levels, batch)?;
        self.forward(&key, batch, false)?;
        let seeds = self.loss_seeds(&key, false, &key.levels, T::one());
        let ids = self.all_d_ids(&key.levels);
        let grads = self.backward(&key, &seeds, &ids)?;
        self.step_discriminators(&key.levels, &grads)?;
        Ok(self.report(&key, false))
    }

    /// θ_m gradient of `objective` under `mode` at the current parameters,
    /// without updating anything. Under gradient reversal the adversarial
    /// terms use true targets and are scaled by the reversal node; under
    /// label flipping they are the flipped-target losses weighted by
    /// `adv_weight`.
    pub fn probe_model_gradient(&mut self, batch: &DomainBatch<T>, mode: AdversarialMode, objective: &Objective) -> Result<GradientProbe<T>> {
        self.check_levels(&objective.levels)?;
        let levels = self.levels();
        let key = Self::key(mode, if mode == AdversarialMode::None { &[] } else { &levels }, batch)?;
        let flipped = mode == AdversarialMode::LabelFlip;
        self.forward(&key, batch, flipped)?;
        let adv = if flipped { T::from_f64_lossy(self.config.adv_weight) } else { T::one() };
        let seeds = self.loss_seeds(&key, objective.supervised, &objective.levels, adv);
        let grads = self.backward(&key, &seeds, &self.theta_m)?;
        let sg = self.graph(&key);
        let d_outputs = sg
            .levels
            .iter()
            .map(|(&l, n)| (l, sg.exec.value(n.p).map(|t| t.data().to_vec()).unwrap_or_default()))
            .collect();
        Ok(GradientProbe { grads, d_outputs })
    }

    /// Forward pass of the localization model alone.
    pub fn model_outputs(&mut self, batch: &DomainBatch<T>) -> Result<ModelOutputs<T>> {
        let key = Self::key(AdversarialMode::None, &[], batch)?;
        self.forward(&key, batch, false)?;
        let sg = self.graph(&key);
        let rows = |pick: fn(&ModelNodes) -> NodeId| -> Result<Tensor<T>> {
            let parts: Vec<&Tensor<T>> =
                sg.branches.iter().map(|n| sg.exec.value(pick(n)).ok_or(GradError::NotForwarded)).collect::<std::result::Result<_, _>>()?;
            let mut shape = parts[0].shape().to_vec();
            shape[0] = parts.iter().map(|t| t.shape()[0]).sum();
            Ok(Tensor::new(shape, parts.iter().flat_map(|t| t.data().iter().copied()).collect())?)
        };
        Ok(ModelOutputs { latent: rows(|n| n.latent)?, heatmap: rows(|n| n.heatmap)? })
    }

    /// Discriminator outputs at `level` for a batch, synthetic rows first.
    pub fn discriminator_outputs(&mut self, batch: &DomainBatch<T>, level: Level) -> Result<Vec<T>> {
        self.check_levels(&[level])?;
        let key = Self::key(AdversarialMode::LabelFlip, &[level], batch)?;
        self.forward(&key, batch, false)?;
        let sg = self.graph(&key);
        Ok(sg.exec.value(sg.levels[&level].p).map(|t| t.data().to_vec()).unwrap_or_default())
    }
}
