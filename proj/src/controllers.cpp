#include "primix/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "primix/parallel.hpp"
#include "primix/rng.hpp"

namespace primix {

RobotState LToFModel::map(const RobotState& leader) const {
    return unflatten(denormalize(map_norm(normalize(leader, stats)), stats));
}

// ---------------------------------------------------------------------------
// Shared fusion step

FusionStepResult proportion_fusion_step(const LowerBank& bank, const LToFModel& ltof,
                                        const Vec& context_norm,
                                        const std::vector<Vec>& window_norm,
                                        const CostWeights& cw, const CEConfig& ce,
                                        long tick, bool keep_batch) {
    const Index p_count = bank.size();
    if (p_count == 0)
        throw std::invalid_argument("fusion_step: empty bank");
    const Index n = static_cast<Index>(window_norm.size());
    if (n < 1)
        throw std::invalid_argument("fusion_step: empty reference window");
    const Index dim = bank.state_dim();
    const Index d = dim / 3;

    // All primitives consume the same input sequence: the evolving follower
    // context (reference-driven past the first step) plus the window-end
    // reference state, mirroring the [F_k, F_{k+n}] training wiring.
    const Vec& ref_end = window_norm.back();
    Mat rollout_inputs(n, 2 * dim);
    rollout_inputs.row(0) << context_norm.transpose(), ref_end.transpose();
    for (Index i = 1; i < n; ++i)
        rollout_inputs.row(i) << window_norm[i - 1].transpose(), ref_end.transpose();

    std::vector<Mat> base(p_count, Mat(n, dim));
    parallel_for(p_count, ce.threads, [&](Index p) {
        for (Index i = 0; i < n; ++i)
            base[p].row(i) =
                mlp_forward(bank.primitives[p], rollout_inputs.row(i).transpose()).transpose();
    });

    // Noise scale in normalized units, equivalent to physical per-channel
    // sigmas added before normalization.
    Vec sigma_norm(dim);
    for (Index j = 0; j < dim; ++j) {
        const double phys = j < d ? ce.noise_sigma_theta
                                  : (j < 2 * d ? ce.noise_sigma_omega : ce.noise_sigma_tau);
        sigma_norm[j] = phys / bank.stats.stddev[j];
    }

    const Index spp = std::max(1, ce.samples_per_primitive);
    const Index m_count = p_count * spp;

    FusionStepResult res;
    res.first_elements = Mat(m_count, dim);
    Vec costs(m_count);
    const Mat reference = [&] {
        Mat r(n, dim);
        for (Index i = 0; i < n; ++i) r.row(i) = window_norm[i].transpose();
        return r;
    }();
    std::vector<Mat> kept;
    if (keep_batch) kept.assign(m_count, Mat());

    parallel_for(m_count, ce.threads, [&](Index m) {
        const Index p = m / spp;
        const Index r = m % spp;
        Mat seq = base[p];
        if (r > 0) {
            Rng noise(derive_seed({ce.seed, static_cast<std::uint64_t>(tick),
                                   static_cast<std::uint64_t>(m)}));
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < dim; ++j)
                    seq(i, j) += noise.gaussian() * sigma_norm[j];
        }
        if (ce.cost_window == CostWindow::kFirstStep) {
            const Mat mapped = ltof.map_norm(seq.row(0).transpose()).transpose();
            costs[m] = compute_cost(mapped, reference.topRows(1), cw, CostWindow::kFirstStep);
        } else {
            Mat mapped(n, dim);
            for (Index i = 0; i < n; ++i)
                mapped.row(i) = ltof.map_norm(seq.row(i).transpose()).transpose();
            costs[m] = compute_cost(mapped, reference, cw, CostWindow::kFullWindow);
        }
        res.first_elements.row(m) = seq.row(0);
        if (keep_batch) kept[m] = std::move(seq);
    });

    res.weights = ce_weights(costs, ce);
    const Vec fused = res.first_elements.transpose() * res.weights;
    res.command = unflatten(denormalize(fused, bank.stats));
    res.min_cost = costs.minCoeff();
    res.entropy = weight_entropy(res.weights);
    res.effective_samples = effective_samples(res.weights);
    if (keep_batch) {
        res.batch.sequences = std::move(kept);
        res.batch.costs = costs;
    } else {
        res.batch.costs = std::move(costs);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Controllers

void BaselineController::reset() {
    lstm_state_ = LstmState::zeros(model_.upper);
    cached_ref_ = Vec();
    tick_ = 0;
}

RobotState BaselineController::step(const RobotState& follower) {
    const Vec f_now = normalize(follower, model_.stats);
    if (tick_ % model_.horizon == 0 || cached_ref_.size() == 0)
        cached_ref_ = lstm_step(model_.upper, lstm_state_, f_now);
    Vec in(2 * f_now.size());
    in << f_now, cached_ref_;
    const Vec out = mlp_forward(model_.lower, in);
    ++tick_;
    return unflatten(denormalize(out, model_.stats));
}

LearningProportionController::LearningProportionController(LearningUpperModel upper,
                                                           LowerBank bank)
    : upper_(std::move(upper)), bank_(std::move(bank)) {
    if (upper_.proportion_count != static_cast<int>(bank_.size()))
        throw std::invalid_argument("learning controller: bank size != proportion head");
    reset();
}

void LearningProportionController::reset() {
    lstm_state_ = LstmState::zeros(upper_.lstm);
    last_weights_ = Vec();
}

RobotState LearningProportionController::step(const RobotState& follower) {
    const Vec f_now = normalize(follower, bank_.stats);
    const Index dim = f_now.size();
    const Vec head = lstm_step(upper_.lstm, lstm_state_, f_now);
    const Vec f_ref = head.segment(0, dim);
    const Vec logits = head.segment(dim, upper_.proportion_count);
    last_weights_ = softmax(logits);

    Vec in(2 * dim);
    in << f_now, f_ref;
    Vec fused = Vec::Zero(dim);
    for (Index p = 0; p < bank_.size(); ++p)
        fused += last_weights_[p] * mlp_forward(bank_.primitives[p], in);
    return unflatten(denormalize(fused, bank_.stats));
}

SamplingProportionController::SamplingProportionController(SamplingUpperModel upper,
                                                           LowerBank bank, LToFModel ltof,
                                                           CostWeights cw, CEConfig ce)
    : upper_(std::move(upper)),
      bank_(std::move(bank)),
      ltof_(std::move(ltof)),
      cw_(cw),
      ce_(ce) {
    reset();
}

void SamplingProportionController::reset() {
    lstm_state_ = LstmState::zeros(upper_.lstm);
    tick_ = 0;
}

RobotState SamplingProportionController::step(const RobotState& follower) {
    const Vec f_now = normalize(follower, bank_.stats);
    const Index dim = f_now.size();
    const Vec window_flat = lstm_step(upper_.lstm, lstm_state_, f_now);
    std::vector<Vec> window(upper_.horizon);
    for (int i = 0; i < upper_.horizon; ++i)
        window[i] = window_flat.segment(i * dim, dim);
    last_result_ =
        proportion_fusion_step(bank_, ltof_, f_now, window, cw_, ce_, tick_);
    ++tick_;
    return last_result_.command;
}

PlaybackProportionController::PlaybackProportionController(Trajectory playback,
                                                           LowerBank bank, LToFModel ltof,
                                                           CostWeights cw, CEConfig ce)
    : bank_(std::move(bank)), ltof_(std::move(ltof)), cw_(cw), ce_(ce) {
    if (playback.length() < 1)
        throw std::invalid_argument("playback controller: empty reference");
    playback_norm_.reserve(playback.states.size());
    for (const auto& s : playback.states)
        playback_norm_.push_back(normalize(s, bank_.stats));
}

RobotState PlaybackProportionController::step(const RobotState& /*follower*/) {
    // Fully reference-driven: the recording supplies the rollout context as
    // well as the cost reference, so execution copies the reference timeline.
    const Index len = static_cast<Index>(playback_norm_.size());
    std::vector<Vec> window(static_cast<std::size_t>(bank_.horizon));
    for (int i = 0; i < bank_.horizon; ++i)
        window[i] = playback_norm_[std::min<Index>(tick_ + 1 + i, len - 1)];
    const Vec& context = playback_norm_[std::min<Index>(tick_, len - 1)];
    last_result_ = proportion_fusion_step(bank_, ltof_, context, window, cw_, ce_, tick_);
    ++tick_;
    return last_result_.command;
}

// ---------------------------------------------------------------------------
// Dataset builders

PairDataset primitive_pair_dataset(const PrimitiveDataset& ds, const NormStats& stats) {
    const Index dim = stats.mean.size();
    PairDataset out;
    out.inputs = Mat(ds.size(), 2 * dim);
    out.targets = Mat(ds.size(), dim);
    for (Index i = 0; i < ds.size(); ++i) {
        out.inputs.row(i) << normalize(ds.inputs.row(i).transpose(), stats).transpose(),
            normalize(ds.references.row(i).transpose(), stats).transpose();
        out.targets.row(i) = normalize(ds.targets.row(i).transpose(), stats).transpose();
    }
    return out;
}

PairDataset demo_pair_dataset(const Demonstration& demo, const NormStats& stats, int horizon) {
    const Index t = demo.length();
    if (t < 2) throw std::invalid_argument("demo_pair_dataset: demo too short");
    const Index dim = stats.mean.size();
    PairDataset out;
    out.inputs = Mat(t - 1, 2 * dim);
    out.targets = Mat(t - 1, dim);
    for (Index k = 0; k + 1 < t; ++k) {
        const Index ref = std::min<Index>(k + horizon, t - 1);
        out.inputs.row(k) << normalize(demo.follower.states[k], stats).transpose(),
            normalize(demo.follower.states[ref], stats).transpose();
        out.targets.row(k) = normalize(demo.leader.states[k + 1], stats).transpose();
    }
    return out;
}

SeqSample baseline_upper_sequence(const Demonstration& demo, const NormStats& stats,
                                  int horizon) {
    SeqSample seq;
    const Index t = demo.length();
    for (Index k = 0; k + horizon <= t - 1; k += horizon) {
        seq.inputs.push_back(normalize(demo.follower.states[k], stats));
        seq.targets.push_back(normalize(demo.follower.states[k + horizon], stats));
    }
    if (seq.inputs.empty())
        throw std::invalid_argument("baseline_upper_sequence: demo shorter than horizon");
    return seq;
}

SeqSample sampling_upper_sequence(const Demonstration& demo, const NormStats& stats,
                                  int horizon) {
    SeqSample seq;
    const Index t = demo.length();
    if (t < 2) throw std::invalid_argument("sampling_upper_sequence: demo too short");
    const Index dim = stats.mean.size();
    for (Index k = 0; k + 1 < t; ++k) {
        seq.inputs.push_back(normalize(demo.follower.states[k], stats));
        Vec target(dim * horizon);
        for (int i = 0; i < horizon; ++i) {
            const Index idx = std::min<Index>(k + 1 + i, t - 1);
            target.segment(i * dim, dim) = normalize(demo.follower.states[idx], stats);
        }
        seq.targets.push_back(std::move(target));
    }
    return seq;
}

PairDataset ltof_pair_dataset(const std::vector<Demonstration>& demos, const NormStats& stats) {
    Index total = 0;
    for (const auto& d : demos) total += d.length();
    if (total == 0) throw std::invalid_argument("ltof_pair_dataset: no data");
    const Index dim = stats.mean.size();
    PairDataset out;
    out.inputs = Mat(total, dim);
    out.targets = Mat(total, dim);
    Index row = 0;
    for (const auto& demo : demos)
        for (Index k = 0; k < demo.length(); ++k, ++row) {
            out.inputs.row(row) = normalize(demo.leader.states[k], stats).transpose();
            out.targets.row(row) = normalize(demo.follower.states[k], stats).transpose();
        }
    return out;
}

// ---------------------------------------------------------------------------
// Trainers

namespace {

std::vector<int> layer_stack(Index in, const std::vector<int>& hidden, Index out) {
    std::vector<int> sizes;
    sizes.push_back(static_cast<int>(in));
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(static_cast<int>(out));
    return sizes;
}

std::uint64_t tag_stream(const PrimitiveTag& tag) {
    std::uint64_t h = static_cast<std::uint64_t>(tag.segment_index) + 1;
    for (char c : tag.demo_id) h = splitmix64(h ^ static_cast<std::uint64_t>(c));
    return h;
}

}  // namespace

PairDataset augment_pairs(const PairDataset& data, const AugmentConfig& aug,
                          std::uint64_t seed) {
    if (aug.copies < 1 || aug.sigma <= 0) return data;
    Rng rng(derive_seed({seed, 0x61756750ull}));
    const Index n = data.size();
    PairDataset out;
    out.inputs = Mat((aug.copies + 1) * n, data.inputs.cols());
    out.targets = Mat((aug.copies + 1) * n, data.targets.cols());
    out.inputs.topRows(n) = data.inputs;
    out.targets.topRows(n) = data.targets;
    for (int c = 0; c < aug.copies; ++c) {
        const Index off = (c + 1) * n;
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < data.inputs.cols(); ++j)
                out.inputs(off + i, j) = data.inputs(i, j) + aug.sigma * rng.gaussian();
            out.targets.row(off + i) = data.targets.row(i);
        }
    }
    return out;
}

std::vector<SeqSample> augment_sequences(const std::vector<SeqSample>& data,
                                         const AugmentConfig& aug, std::uint64_t seed) {
    if (aug.copies < 1 || aug.sigma <= 0) return data;
    Rng rng(derive_seed({seed, 0x61756753ull}));
    std::vector<SeqSample> out = data;
    for (int c = 0; c < aug.copies; ++c)
        for (const SeqSample& seq : data) {
            SeqSample noisy = seq;
            for (auto& x : noisy.inputs)
                for (Index j = 0; j < x.size(); ++j) x[j] += aug.sigma * rng.gaussian();
            out.push_back(std::move(noisy));
        }
    return out;
}

LowerBank train_lower_bank(const std::vector<PrimitiveDataset>& datasets,
                           const NormStats& stats, const std::vector<int>& hidden,
                           const TrainConfig& cfg, int horizon, int threads,
                           const AugmentConfig& aug) {
    if (datasets.empty())
        throw std::invalid_argument("train_lower_bank: no datasets");
    const Index dim = stats.mean.size();
    LowerBank bank;
    bank.stats = stats;
    bank.horizon = horizon;
    bank.primitives.resize(datasets.size());
    bank.tags.resize(datasets.size());

    parallel_for(static_cast<Index>(datasets.size()), threads, [&](Index i) {
        const auto& ds = datasets[i];
        const PrimitiveTag tag{ds.demo_id, ds.segment_index};
        TrainConfig local = cfg;
        local.seed = derive_seed({cfg.seed, tag_stream(tag)});
        Rng init_rng(derive_seed({local.seed, 0x696e6974ull}));
        MlpParams model = MlpParams::init(layer_stack(2 * dim, hidden, dim), init_rng);
        train_mlp(model, augment_pairs(primitive_pair_dataset(ds, stats), aug, local.seed),
                  local);
        bank.primitives[i] = std::move(model);
        bank.tags[i] = tag;
    });
    return bank;
}

LToFModel train_ltof(const std::vector<Demonstration>& demos, const NormStats& stats,
                     const std::vector<int>& hidden, const TrainConfig& cfg,
                     const AugmentConfig& aug) {
    const Index dim = stats.mean.size();
    Rng init_rng(derive_seed({cfg.seed, 0x6c746f66ull}));
    LToFModel model;
    model.stats = stats;
    model.mlp = MlpParams::init(layer_stack(dim, hidden, dim), init_rng);
    TrainConfig local = cfg;
    local.seed = derive_seed({cfg.seed, 0x6c746f66ull, 1});
    train_mlp(model.mlp, augment_pairs(ltof_pair_dataset(demos, stats), aug, local.seed),
              local);
    return model;
}

BaselineModel train_baseline(const std::vector<Demonstration>& demos, const NormStats& stats,
                             int lstm_hidden, int lstm_layers,
                             const std::vector<int>& lower_hidden, int horizon,
                             const TrainConfig& cfg, const AugmentConfig& aug) {
    if (demos.empty())
        throw std::invalid_argument("train_baseline: no demonstrations");
    const Index dim = stats.mean.size();

    BaselineModel model;
    model.stats = stats;
    model.horizon = horizon;

    Rng upper_rng(derive_seed({cfg.seed, 0x62617365ull}));
    model.upper = LstmParams::init(static_cast<int>(dim), lstm_hidden, lstm_layers,
                                   static_cast<int>(dim), upper_rng);
    std::vector<SeqSample> upper_data;
    for (const auto& demo : demos)
        upper_data.push_back(baseline_upper_sequence(demo, stats, horizon));
    TrainConfig upper_cfg = cfg;
    upper_cfg.seed = derive_seed({cfg.seed, 0x62617365ull, 1});
    train_lstm(model.upper, augment_sequences(upper_data, aug, upper_cfg.seed), upper_cfg);

    Rng lower_rng(derive_seed({cfg.seed, 0x62617365ull, 2}));
    model.lower = MlpParams::init(layer_stack(2 * dim, lower_hidden, dim), lower_rng);
    PairDataset lower_data = demo_pair_dataset(demos.front(), stats, horizon);
    for (std::size_t i = 1; i < demos.size(); ++i) {
        const PairDataset extra = demo_pair_dataset(demos[i], stats, horizon);
        const Index off = lower_data.inputs.rows();
        lower_data.inputs.conservativeResize(off + extra.inputs.rows(), Eigen::NoChange);
        lower_data.targets.conservativeResize(off + extra.targets.rows(), Eigen::NoChange);
        lower_data.inputs.bottomRows(extra.inputs.rows()) = extra.inputs;
        lower_data.targets.bottomRows(extra.targets.rows()) = extra.targets;
    }
    TrainConfig lower_cfg = cfg;
    lower_cfg.seed = derive_seed({cfg.seed, 0x62617365ull, 3});
    train_mlp(model.lower, augment_pairs(lower_data, aug, lower_cfg.seed), lower_cfg);
    return model;
}

SamplingUpperModel train_sampling_upper(const std::vector<Demonstration>& demos,
                                        const NormStats& stats, int lstm_hidden,
                                        int lstm_layers, int horizon, const TrainConfig& cfg,
                                        const AugmentConfig& aug) {
    if (demos.empty())
        throw std::invalid_argument("train_sampling_upper: no demonstrations");
    const Index dim = stats.mean.size();
    SamplingUpperModel model;
    model.stats = stats;
    model.horizon = horizon;
    Rng rng(derive_seed({cfg.seed, 0x73616d70ull}));
    model.lstm = LstmParams::init(static_cast<int>(dim), lstm_hidden, lstm_layers,
                                  static_cast<int>(dim) * horizon, rng);
    std::vector<SeqSample> data;
    for (const auto& demo : demos)
        data.push_back(sampling_upper_sequence(demo, stats, horizon));
    TrainConfig local = cfg;
    local.seed = derive_seed({cfg.seed, 0x73616d70ull, 1});
    train_lstm(model.lstm, augment_sequences(data, aug, local.seed), local);
    return model;
}

LowerBank select_primitives(const LowerBank& bank, int max_count) {
    if (max_count < 1)
        throw std::invalid_argument("select_primitives: max_count must be >= 1");
    if (bank.size() <= max_count) return bank;
    LowerBank out;
    out.stats = bank.stats;
    out.horizon = bank.horizon;
    for (int j = 0; j < max_count; ++j) {
        const Index i = static_cast<Index>(
            (static_cast<long>(j) * bank.size()) / max_count);
        out.primitives.push_back(bank.primitives[i]);
        out.tags.push_back(bank.tags[i]);
    }
    return out;
}

LearningUpperModel init_learning_upper(const NormStats& stats, int lstm_hidden,
                                       int lstm_layers, int horizon, int proportion_count,
                                       std::uint64_t seed) {
    const Index dim = stats.mean.size();
    LearningUpperModel model;
    model.stats = stats;
    model.horizon = horizon;
    model.proportion_count = proportion_count;
    Rng rng(derive_seed({seed, 0x6c65726eull}));
    model.lstm = LstmParams::init(static_cast<int>(dim), lstm_hidden, lstm_layers,
                                  static_cast<int>(dim) + proportion_count, rng);
    return model;
}

std::vector<double> train_learning_upper(LearningUpperModel& upper, const LowerBank& bank,
                                         const std::vector<Demonstration>& demos,
                                         const TrainConfig& cfg, const AugmentConfig& aug) {
    if (demos.empty())
        throw std::invalid_argument("train_learning_upper: no demonstrations");
    if (upper.proportion_count != static_cast<int>(bank.size()))
        throw std::invalid_argument("train_learning_upper: bank size != proportion head");
    const Index dim = bank.state_dim();
    const Index p_count = bank.size();
    const int n = upper.horizon;

    // Precompute normalized sequences per demo.
    struct DemoSeq {
        std::vector<Vec> f;         // F_k
        std::vector<Vec> l_next;    // L_{k+1}
        std::vector<Vec> f_ref;     // F_{k+n}, clipped
    };
    std::vector<DemoSeq> seqs;
    for (const auto& demo : demos) {
        DemoSeq s;
        const Index t = demo.length();
        for (Index k = 0; k + 1 < t; ++k) {
            s.f.push_back(normalize(demo.follower.states[k], bank.stats));
            s.l_next.push_back(normalize(demo.leader.states[k + 1], bank.stats));
            s.f_ref.push_back(
                normalize(demo.follower.states[std::min<Index>(k + n, t - 1)], bank.stats));
        }
        seqs.push_back(std::move(s));
    }
    if (aug.copies >= 1 && aug.sigma > 0) {
        Rng aug_rng(derive_seed({cfg.seed, 0x6175676cull}));
        const std::size_t originals = seqs.size();
        for (int c = 0; c < aug.copies; ++c)
            for (std::size_t si = 0; si < originals; ++si) {
                DemoSeq noisy = seqs[si];
                for (auto& x : noisy.f)
                    for (Index j = 0; j < x.size(); ++j)
                        x[j] += aug.sigma * aug_rng.gaussian();
                seqs.push_back(std::move(noisy));
            }
    }

    auto params = param_ptrs(upper.lstm);
    LstmGrads grads = LstmGrads::zeros_like(upper.lstm);
    auto gptrs = grad_ptrs(grads);
    AdamState adam(static_cast<Index>(params.size()));
    Rng rng(derive_seed({cfg.seed, 0x6c65726eull, 1}));

    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    const double ddim = static_cast<double>(dim);
    std::vector<double> history;
    MlpCache mlp_cache;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, rng);
        double epoch_loss = 0;
        // Each demo sequence is one BPTT unit; grads averaged over demos.
        grads.set_zero();
        for (std::size_t si : order) {
            const DemoSeq& s = seqs[si];
            const std::size_t steps = s.f.size();
            LstmState state;
            std::vector<LstmStepCache> caches(steps);
            std::vector<Vec> dys(steps);
            const double scale =
                1.0 / (static_cast<double>(steps) * static_cast<double>(seqs.size()));
            double seq_loss = 0;

            std::vector<MlpCache> prim_caches(p_count);
            for (std::size_t t = 0; t < steps; ++t) {
                const Vec head = lstm_step(upper.lstm, state, s.f[t], caches[t]);
                const Vec f_ref = head.segment(0, dim);
                const Vec logits = head.segment(dim, p_count);
                const Vec w = softmax(logits);

                Vec in(2 * dim);
                in << s.f[t], f_ref;
                Mat cands(p_count, dim);
                Vec fused = Vec::Zero(dim);
                for (Index p = 0; p < p_count; ++p) {
                    cands.row(p) =
                        mlp_forward(bank.primitives[p], in, prim_caches[p]).transpose();
                    fused += w[p] * cands.row(p).transpose();
                }

                const Vec err_l = fused - s.l_next[t];
                const Vec err_f = f_ref - s.f_ref[t];
                seq_loss += (err_l.squaredNorm() + err_f.squaredNorm()) / ddim;

                const Vec dfused = 2.0 * err_l / ddim;
                Vec dref = 2.0 * err_f / ddim;
                Vec dw(p_count);
                for (Index p = 0; p < p_count; ++p) {
                    dw[p] = dfused.dot(cands.row(p).transpose());
                    // input gradient through the frozen primitive
                    const Vec din = mlp_backward(bank.primitives[p], prim_caches[p],
                                                 (w[p] * dfused).eval(), nullptr);
                    dref += din.segment(dim, dim);
                }
                const double dot = dw.dot(w);
                Vec dlogits(p_count);
                for (Index p = 0; p < p_count; ++p) dlogits[p] = w[p] * (dw[p] - dot);

                Vec dy(dim + p_count);
                dy << dref, dlogits;
                dys[t] = dy * scale;
            }
            epoch_loss += seq_loss / static_cast<double>(steps);
            lstm_backward(upper.lstm, caches, dys, &grads);
        }
        const double mean_loss = epoch_loss / static_cast<double>(seqs.size());
        if (!std::isfinite(mean_loss))
            throw std::runtime_error("training diverged");
        if (cfg.learning_rate > 0) adam_step(params, gptrs, adam, cfg);
        history.push_back(mean_loss);
    }
    return history;
}

// ---------------------------------------------------------------------------
// Artifact files

using nlohmann::json;

void save_lower_bank(const std::string& path, const LowerBank& bank, const ArtifactMeta& meta) {
    json body;
    body["stats"] = norm_stats_to_json(bank.stats);
    body["horizon"] = bank.horizon;
    body["primitives"] = json::array();
    for (Index i = 0; i < bank.size(); ++i)
        body["primitives"].push_back(json{{"demo_id", bank.tags[i].demo_id},
                                          {"segment_index", bank.tags[i].segment_index},
                                          {"mlp", mlp_to_json(bank.primitives[i])}});
    write_model_file(path, "lower_bank", std::move(body), meta);
}

LowerBank load_lower_bank(const std::string& path, ArtifactMeta* meta) {
    const json body = read_model_file(path, "lower_bank", meta);
    LowerBank bank;
    bank.stats = norm_stats_from_json(body.at("stats"));
    bank.horizon = body.at("horizon").get<int>();
    for (const auto& p : body.at("primitives")) {
        bank.primitives.push_back(mlp_from_json(p.at("mlp")));
        bank.tags.push_back({p.at("demo_id").get<std::string>(),
                             p.at("segment_index").get<int>()});
    }
    return bank;
}

void save_ltof(const std::string& path, const LToFModel& model, const ArtifactMeta& meta) {
    json body;
    body["stats"] = norm_stats_to_json(model.stats);
    body["mlp"] = mlp_to_json(model.mlp);
    write_model_file(path, "ltof", std::move(body), meta);
}

LToFModel load_ltof(const std::string& path, ArtifactMeta* meta) {
    const json body = read_model_file(path, "ltof", meta);
    LToFModel model;
    model.stats = norm_stats_from_json(body.at("stats"));
    model.mlp = mlp_from_json(body.at("mlp"));
    return model;
}

void save_baseline(const std::string& path, const BaselineModel& model, const ArtifactMeta& meta) {
    json body;
    body["stats"] = norm_stats_to_json(model.stats);
    body["horizon"] = model.horizon;
    body["upper"] = lstm_to_json(model.upper);
    body["lower"] = mlp_to_json(model.lower);
    write_model_file(path, "baseline", std::move(body), meta);
}

BaselineModel load_baseline(const std::string& path, ArtifactMeta* meta) {
    const json body = read_model_file(path, "baseline", meta);
    BaselineModel model;
    model.stats = norm_stats_from_json(body.at("stats"));
    model.horizon = body.at("horizon").get<int>();
    model.upper = lstm_from_json(body.at("upper"));
    model.lower = mlp_from_json(body.at("lower"));
    return model;
}

void save_sampling_upper(const std::string& path, const SamplingUpperModel& model,
                         const ArtifactMeta& meta) {
    json body;
    body["stats"] = norm_stats_to_json(model.stats);
    body["horizon"] = model.horizon;
    body["lstm"] = lstm_to_json(model.lstm);
    write_model_file(path, "sampling_upper", std::move(body), meta);
}

SamplingUpperModel load_sampling_upper(const std::string& path, ArtifactMeta* meta) {
    const json body = read_model_file(path, "sampling_upper", meta);
    SamplingUpperModel model;
    model.stats = norm_stats_from_json(body.at("stats"));
    model.horizon = body.at("horizon").get<int>();
    model.lstm = lstm_from_json(body.at("lstm"));
    return model;
}

void save_learning_upper(const std::string& path, const LearningUpperModel& model,
                         const ArtifactMeta& meta) {
    json body;
    body["stats"] = norm_stats_to_json(model.stats);
    body["horizon"] = model.horizon;
    body["proportion_count"] = model.proportion_count;
    body["lstm"] = lstm_to_json(model.lstm);
    write_model_file(path, "learning_upper", std::move(body), meta);
}

LearningUpperModel load_learning_upper(const std::string& path, ArtifactMeta* meta) {
    const json body = read_model_file(path, "learning_upper", meta);
    LearningUpperModel model;
    model.stats = norm_stats_from_json(body.at("stats"));
    model.horizon = body.at("horizon").get<int>();
    model.proportion_count = body.at("proportion_count").get<int>();
    model.lstm = lstm_from_json(body.at("lstm"));
    return model;
}

}  // namespace primix
