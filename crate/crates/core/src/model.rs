//! Full forward pass: embed, evolve, integrate, then the cascaded heads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, BoundParams, ParamSet, Tape, Var};
use crate::evolution::{evolve, readout, Backbone, EvolutionError, EvolutionParams};
use crate::graph::{embed_nodes, EmbedParams, FeatureSchema, GraphError, PatientGraph};
use crate::heads::{
    dfs_head, hazards_from_logits, os_head, point_estimate_time, survival_from_hazards, HazardCurve, HeadError,
    HeadParams, SurvivalCurve, TimeBins,
};
use crate::init::UniformInit;
use crate::objective::{discrete_nll_on_tape, LossWeights, ObjectiveError, SurvivalLabel};
use crate::trajectory::{integrate, integrate_mean, LstmParams, TrajectoryError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorMode {
    Lstm,
    /// Bypass the LSTM and average the raw snapshots.
    Mean,
}

/// How the latent state moves through time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rollout {
    /// `horizon` residual updates.
    Residual,
    /// No update at all; the single snapshot is the readout of the initial state.
    Frozen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub backbone: Backbone,
    /// Node-state width.
    pub latent: usize,
    pub time_width: usize,
    /// LSTM hidden width.
    pub hidden: usize,
    /// DFS context width.
    pub context: usize,
    /// Number of residual updates (and snapshots).
    pub horizon: usize,
    /// Message-passing layers inside the residual operator.
    pub depth: usize,
    pub bins: TimeBins,
    pub cascade: bool,
    pub integrator: IntegratorMode,
    pub rollout: Rollout,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            backbone: Backbone::GraphSage,
            latent: 32,
            time_width: 16,
            hidden: 32,
            context: 16,
            horizon: 12,
            depth: 1,
            bins: TimeBins::annual(12),
            cascade: true,
            integrator: IntegratorMode::Lstm,
            rollout: Rollout::Residual,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let checks = [
            (self.latent >= 1, "latent must be at least 1"),
            (self.time_width >= 1, "time_width must be at least 1"),
            (self.hidden >= 1, "hidden must be at least 1"),
            (self.context >= 1, "context must be at least 1"),
            (self.horizon >= 1, "horizon must be at least 1"),
            (self.depth >= 1, "depth must be at least 1"),
        ];
        match checks.into_iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(ModelError::Config(msg.to_string())),
            None => Ok(()),
        }
    }

    /// Width of `h*` fed to the heads.
    pub fn summary_width(&self) -> usize {
        match self.integrator {
            IntegratorMode::Lstm => self.hidden,
            IntegratorMode::Mean => self.latent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub snapshots: Vec<Var>,
    pub summary: Var,
    pub dfs_logits: Var,
    pub dfs_context: Var,
    pub os_logits: Var,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub os_hazard: HazardCurve,
    pub os_survival: SurvivalCurve,
    pub os_time: f64,
    pub dfs_hazard: HazardCurve,
    pub dfs_survival: SurvivalCurve,
    pub dfs_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyPro {
    pub config: ModelConfig,
    pub schema: FeatureSchema,
    pub params: ParamSet,
    pub embed: EmbedParams,
    pub evolution: EvolutionParams,
    pub lstm: Option<LstmParams>,
    pub heads: HeadParams,
}

impl DyPro {
    pub fn new(config: ModelConfig, schema: FeatureSchema, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut params = ParamSet::new();
        let mut init = UniformInit::new(seed);
        let mut draw = |r, c, f| init.tensor(r, c, f);
        let embed = EmbedParams::init(&mut params, &schema, config.latent, &mut draw);
        let evolution = EvolutionParams::init(
            &mut params,
            config.backbone,
            config.latent,
            config.time_width,
            config.horizon,
            config.depth,
            &mut draw,
        );
        let lstm = (config.integrator == IntegratorMode::Lstm)
            .then(|| LstmParams::init(&mut params, config.latent, config.hidden, &mut draw));
        let heads = HeadParams::init(
            &mut params,
            config.summary_width(),
            config.context,
            config.bins.count(),
            &mut draw,
        );
        Ok(Self {
            config,
            schema,
            params,
            embed,
            evolution,
            lstm,
            heads,
        })
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        graph: &PatientGraph,
    ) -> Result<ForwardOutput, ModelError> {
        let h0 = embed_nodes(tape, graph, &self.embed, bound)?;
        let snapshots = match self.config.rollout {
            Rollout::Residual => {
                let topology = graph.topology();
                evolve(tape, h0, &topology, &self.evolution, bound, self.config.horizon)?.snapshots
            }
            Rollout::Frozen => vec![readout(tape, h0)?],
        };
        let summary = match &self.lstm {
            Some(lstm) => integrate(tape, &snapshots, lstm, bound)?,
            None => integrate_mean(tape, &snapshots)?,
        };
        let (dfs_logits, dfs_context) = dfs_head(tape, summary, &self.heads, bound)?;
        let os_logits = os_head(tape, summary, dfs_context, &self.heads, bound, self.config.cascade)?;
        Ok(ForwardOutput {
            snapshots,
            summary,
            dfs_logits,
            dfs_context,
            os_logits,
        })
    }

    /// `alpha * NLL_os + beta * NLL_dfs` for one patient.
    pub fn patient_loss(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        graph: &PatientGraph,
        os: &SurvivalLabel,
        dfs: &SurvivalLabel,
        weights: &LossWeights,
    ) -> Result<Var, ModelError> {
        let out = self.forward(tape, bound, graph)?;
        self.loss_from_output(tape, &out, os, dfs, weights)
    }

    pub fn loss_from_output(
        &self,
        tape: &mut Tape,
        out: &ForwardOutput,
        os: &SurvivalLabel,
        dfs: &SurvivalLabel,
        weights: &LossWeights,
    ) -> Result<Var, ModelError> {
        let bins = &self.config.bins;
        let l_os = discrete_nll_on_tape(tape, out.os_logits, os, bins)?;
        let l_dfs = discrete_nll_on_tape(tape, out.dfs_logits, dfs, bins)?;
        let a = tape.scale(l_os, weights.alpha)?;
        let b = tape.scale(l_dfs, weights.beta)?;
        Ok(tape.add(a, b)?)
    }

    pub fn predict(&self, graph: &PatientGraph) -> Result<Prediction, ModelError> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let out = self.forward(&mut tape, &bound, graph)?;
        let bins = &self.config.bins;
        let curve = |logits: Var| {
            let h = hazards_from_logits(tape.value(logits).data());
            let s = survival_from_hazards(&h);
            let t = point_estimate_time(&s, bins);
            (h, s, t)
        };
        let (os_hazard, os_survival, os_time) = curve(out.os_logits);
        let (dfs_hazard, dfs_survival, dfs_time) = curve(out.dfs_logits);
        Ok(Prediction {
            os_hazard,
            os_survival,
            os_time,
            dfs_hazard,
            dfs_survival,
            dfs_time,
        })
    }
}
