#pragma once

#include <string>
#include <vector>

#include "primix/fusion.hpp"
#include "primix/lstm.hpp"
#include "primix/mlp.hpp"
#include "primix/model_io.hpp"
#include "primix/segmentation.hpp"
#include "primix/train.hpp"
#include "primix/types.hpp"

namespace primix {

struct PrimitiveTag {
    std::string demo_id;
    int segment_index = 0;
};

/// Trained primitive experts. Each MLP maps the normalized concatenation
/// [F_k, F_ref] to the normalized next leader state; all share one NormStats
/// and the reference lookahead they were trained with.
struct LowerBank {
    std::vector<MlpParams> primitives;
    std::vector<PrimitiveTag> tags;
    NormStats stats;
    int horizon = 20;

    Index size() const { return static_cast<Index>(primitives.size()); }
    Index state_dim() const { return stats.mean.size(); }
};

/// Leader-to-follower mapping network, operating on normalized states.
struct LToFModel {
    MlpParams mlp;
    NormStats stats;

    Vec map_norm(const Vec& leader_norm) const { return mlp_forward(mlp, leader_norm); }
    RobotState map(const RobotState& leader) const;
};

/// Baseline hierarchical model: both layers trained on the target task.
struct BaselineModel {
    LstmParams upper;  // F_k -> F_{k+n}, stepped every n ticks
    MlpParams lower;   // [F_k, F_ref] -> L_{k+1}
    NormStats stats;
    int horizon = 20;
};

/// Upper layer of the sampling-based variant: F_k -> the whole follower
/// window F_{k+1..k+n}, emitted every tick.
struct SamplingUpperModel {
    LstmParams lstm;
    NormStats stats;
    int horizon = 20;
};

/// Upper layer of the learning-based variant: F_k -> [F_{k+n}, proportion
/// logits over the bank subset].
struct LearningUpperModel {
    LstmParams lstm;
    NormStats stats;
    int horizon = 20;
    int proportion_count = 0;
};

// ---------------------------------------------------------------------------
// Shared fusion step (sampling- and playback-based variants)

struct FusionStepResult {
    RobotState command;       // L_{k+1} to apply
    ProportionVector weights; // over all candidates, zeros outside top-M
    double min_cost = 0;
    double entropy = 0;
    double effective_samples = 0;
    Mat first_elements;       // candidates x 3D, normalized leader first steps
    CandidateBatch batch;     // sequences kept only when keep_batch
};

/// Core of the sampling/playback proportion models: every primitive rolls a
/// leader sequence along the reference window, each sequence is replicated
/// with per-channel Gaussian noise (first replica noise-free), candidates are
/// mapped back to follower space through the L-to-F network and costed
/// against the window, and the cross-entropy-weighted average's first element
/// becomes the command. context_norm is the follower state F_k the first
/// rollout step conditions on (the playback entry at k, or the measured state
/// for the sampling variant); window_norm[j] is the normalized follower
/// reference at tick k+1+j. Per-candidate noise streams derive from
/// (seed, tick, candidate index) so any evaluation order gives identical
/// output.
FusionStepResult proportion_fusion_step(const LowerBank& bank, const LToFModel& ltof,
                                        const Vec& context_norm,
                                        const std::vector<Vec>& window_norm,
                                        const CostWeights& cw, const CEConfig& ce,
                                        long tick, bool keep_batch = false);

// ---------------------------------------------------------------------------
// Controllers (one closed-loop rollout each; call reset() between rollouts)

class BaselineController {
public:
    explicit BaselineController(BaselineModel model) : model_(std::move(model)) { reset(); }

    void reset();
    /// Predicts L_{k+1} from the measured follower state. The upper layer
    /// refreshes its cached reference every horizon ticks.
    RobotState step(const RobotState& follower);

    const BaselineModel& model() const { return model_; }

private:
    BaselineModel model_;
    LstmState lstm_state_;
    Vec cached_ref_;
    long tick_ = 0;
};

class LearningProportionController {
public:
    LearningProportionController(LearningUpperModel upper, LowerBank bank);

    void reset();
    RobotState step(const RobotState& follower);

    /// Proportions chosen at the last step (diagnostics).
    const ProportionVector& last_weights() const { return last_weights_; }

private:
    LearningUpperModel upper_;
    LowerBank bank_;
    LstmState lstm_state_;
    ProportionVector last_weights_;
};

class SamplingProportionController {
public:
    SamplingProportionController(SamplingUpperModel upper, LowerBank bank, LToFModel ltof,
                                 CostWeights cw, CEConfig ce);

    void reset();
    RobotState step(const RobotState& follower);

    const FusionStepResult& last_result() const { return last_result_; }

private:
    SamplingUpperModel upper_;
    LowerBank bank_;
    LToFModel ltof_;
    CostWeights cw_;
    CEConfig ce_;
    LstmState lstm_state_;
    long tick_ = 0;
    FusionStepResult last_result_;
};

class PlaybackProportionController {
public:
    /// playback is the pre-collected follower trajectory of the task. Past
    /// its end the final state is held as the reference.
    PlaybackProportionController(Trajectory playback, LowerBank bank, LToFModel ltof,
                                 CostWeights cw, CEConfig ce);

    void reset() { tick_ = 0; }
    RobotState step(const RobotState& follower);

    const FusionStepResult& last_result() const { return last_result_; }

private:
    std::vector<Vec> playback_norm_;
    LowerBank bank_;
    LToFModel ltof_;
    CostWeights cw_;
    CEConfig ce_;
    long tick_ = 0;
    FusionStepResult last_result_;
};

// ---------------------------------------------------------------------------
// Dataset builders (all in normalized space)

/// [F_k, F_ref] -> L_{k+1} pairs of one primitive dataset.
PairDataset primitive_pair_dataset(const PrimitiveDataset& ds, const NormStats& stats);

/// Same layout over a whole demonstration (baseline lower layer).
PairDataset demo_pair_dataset(const Demonstration& demo, const NormStats& stats, int horizon);

/// Subsampled next-step sequence F_{jn} -> F_{(j+1)n} (baseline upper layer).
SeqSample baseline_upper_sequence(const Demonstration& demo, const NormStats& stats,
                                  int horizon);

/// Per-tick window sequence F_k -> [F_{k+1}..F_{k+n}] (sampling upper layer).
SeqSample sampling_upper_sequence(const Demonstration& demo, const NormStats& stats,
                                  int horizon);

/// L_k -> F_k pairs over all ticks of all demos (L-to-F mapping network).
PairDataset ltof_pair_dataset(const std::vector<Demonstration>& demos, const NormStats& stats);

// ---------------------------------------------------------------------------
// Trainers

/// Input-noise augmentation applied to training data (normalized units).
/// The simulated demonstrations are noise-free, so without it the networks
/// only ever see an infinitesimally thin state manifold and the closed loop
/// sits on the edge of stability.
struct AugmentConfig {
    double sigma = 0.08;  // per-dimension std on normalized inputs
    int copies = 4;       // noisy copies appended per original sample
};

/// Appends `copies` input-noised duplicates of every pair (targets unchanged).
PairDataset augment_pairs(const PairDataset& data, const AugmentConfig& aug,
                          std::uint64_t seed);

/// Same for sequences: per-step input noise, one stream per copy.
std::vector<SeqSample> augment_sequences(const std::vector<SeqSample>& data,
                                         const AugmentConfig& aug, std::uint64_t seed);

/// Trains one MLP per primitive dataset. Per-model RNG streams derive from
/// the dataset tag, so training is embarrassingly parallel with results
/// independent of the thread count.
LowerBank train_lower_bank(const std::vector<PrimitiveDataset>& datasets,
                           const NormStats& stats, const std::vector<int>& hidden,
                           const TrainConfig& cfg, int horizon, int threads,
                           const AugmentConfig& aug = {});

LToFModel train_ltof(const std::vector<Demonstration>& demos, const NormStats& stats,
                     const std::vector<int>& hidden, const TrainConfig& cfg,
                     const AugmentConfig& aug = {});

BaselineModel train_baseline(const std::vector<Demonstration>& demos, const NormStats& stats,
                             int lstm_hidden, int lstm_layers,
                             const std::vector<int>& lower_hidden, int horizon,
                             const TrainConfig& cfg, const AugmentConfig& aug = {});

SamplingUpperModel train_sampling_upper(const std::vector<Demonstration>& demos,
                                        const NormStats& stats, int lstm_hidden,
                                        int lstm_layers, int horizon, const TrainConfig& cfg,
                                        const AugmentConfig& aug = {});

/// Evenly strided subset of the bank (the learning-based variant caps the
/// primitive count it blends).
LowerBank select_primitives(const LowerBank& bank, int max_count);

/// Trains the learning-based upper by backprop through the frozen bank:
/// per tick the loss is MSE(weighted-average leader prediction, L_{k+1})
/// plus MSE(predicted follower reference, F_{k+n}). Returns per-epoch loss.
std::vector<double> train_learning_upper(LearningUpperModel& upper, const LowerBank& bank,
                                         const std::vector<Demonstration>& demos,
                                         const TrainConfig& cfg,
                                         const AugmentConfig& aug = {});

LearningUpperModel init_learning_upper(const NormStats& stats, int lstm_hidden,
                                       int lstm_layers, int horizon, int proportion_count,
                                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Artifact files

void save_lower_bank(const std::string& path, const LowerBank& bank, const ArtifactMeta& meta);
LowerBank load_lower_bank(const std::string& path, ArtifactMeta* meta = nullptr);

void save_ltof(const std::string& path, const LToFModel& model, const ArtifactMeta& meta);
LToFModel load_ltof(const std::string& path, ArtifactMeta* meta = nullptr);

void save_baseline(const std::string& path, const BaselineModel& model, const ArtifactMeta& meta);
BaselineModel load_baseline(const std::string& path, ArtifactMeta* meta = nullptr);

void save_sampling_upper(const std::string& path, const SamplingUpperModel& model,
                         const ArtifactMeta& meta);
SamplingUpperModel load_sampling_upper(const std::string& path, ArtifactMeta* meta = nullptr);

void save_learning_upper(const std::string& path, const LearningUpperModel& model,
                         const ArtifactMeta& meta);
LearningUpperModel load_learning_upper(const std::string& path, ArtifactMeta* meta = nullptr);

}  // namespace primix
