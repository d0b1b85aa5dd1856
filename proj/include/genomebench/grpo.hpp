#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "genomebench/common.hpp"
#include "json.hpp"

namespace genomebench::grpo {

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& message) : Error("ShapeMismatch", message) {}
};

// Row-major dense matrix. Small on purpose: the toy policies here are a few
// thousand parameters at most.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }
};

// Sparse feature vector: (index, value) pairs with strictly increasing indices.
using Feature = std::pair<int, double>;
using FeatureVec = std::vector<Feature>;

FeatureVec dense_features(std::span<const double> values);

std::vector<double> softmax(std::vector<double> logits);

// Samples an index from a categorical distribution via inverse CDF on a
// single uniform draw, so one RNG call per sample.
int sample_index(std::span<const double> dist, std::mt19937_64& gen);

// Linear policy over a discrete action set: logits = x^T W, actions drawn
// from softmax. The action meaning (answer letters, expert indices) is bound
// at the use site.
struct CategoricalPolicy {
    Matrix weights;  // feature_dim x action_count

    CategoricalPolicy() = default;
    CategoricalPolicy(int feature_dim, int action_count) : weights(feature_dim, action_count) {}

    int feature_dim() const { return weights.rows; }
    int action_count() const { return weights.cols; }

    std::vector<double> logits(const FeatureVec& x) const;
    std::vector<double> action_dist(const FeatureVec& x) const;
    std::vector<double> log_action_dist(const FeatureVec& x) const;
    int greedy_action(const FeatureVec& x) const;  // argmax, ties to lowest index
};

nlohmann::json policy_to_json(const CategoricalPolicy& policy);
CategoricalPolicy policy_from_json(const nlohmann::json& j);

// One query's worth of training signal: G sampled actions with their rewards,
// the pre-update log-probs for the ratio, and the reference distribution's
// log-probs for the exact KL term.
struct GroupSample {
    FeatureVec features;
    std::vector<int> actions;
    std::vector<double> old_logprobs;
    std::vector<double> ref_log_dist;  // size K
    std::vector<double> rewards;
};

struct GrpoConfig {
    int group_size = 4;
    double clip_eps = 0.2;
    double kl_beta = 0.005;
    double std_floor = 1e-8;
    double learning_rate = 1e-5;
    int epochs = 2;
    double sampling_temperature = 0.7;

    void validate() const;
};

struct AdamWState {
    Matrix m;
    Matrix v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// A_i = (r_i - mean) / population std; all zeros when std < std_floor.
std::vector<double> group_advantages(std::span<const double> rewards, double std_floor = 1e-8);

// min(ratio * A, clip(ratio, 1-eps, 1+eps) * A), the per-token surrogate bracket.
double clipped_term(double ratio, double advantage, double eps);

// Exact KL(p||q) over a discrete action set. Both distributions are floored
// at 1e-12 and renormalized before the sum.
double kl_exact(std::span<const double> policy_dist, std::span<const double> ref_dist);

struct ObjectiveResult {
    double value = 0.0;
    Matrix gradient;  // d value / d weights (ascent direction)
};

// Mean over groups of (1/G) sum_i clipped_term(exp(logpi(a_i|x) - old_lp_i), A_i, eps)
// minus beta * KL(pi(.|x) || pi_ref(.|x)). Outputs are single-token here, so
// the per-token average inside each sample is the identity; the per-sample
// loop doubles as the token loop.
ObjectiveResult grpo_objective(const CategoricalPolicy& policy,
                               std::span<const GroupSample> batch,
                               const GrpoConfig& config);

struct SftExample {
    FeatureVec features;
    int gold_action = 0;
};

// Mean cross-entropy -ln pi(gold|x) with its analytic gradient (descent direction).
ObjectiveResult sft_loss(const CategoricalPolicy& policy, std::span<const SftExample> examples);

// Central-difference gradient estimate; the verification oracle for the
// analytic gradients above. loss_fn must be a pure function of the weights.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& loss_fn,
                        Matrix weights, double h = 1e-5);

// In-place decoupled-weight-decay Adam descent step with bias correction.
void adamw_step(Matrix& weights, const Matrix& gradient, AdamWState& state, double lr);

struct TrainLogRow {
    long step = 0;
    double mean_reward = 0.0;
    double objective = 0.0;
    double kl = 0.0;
    double accuracy = 0.0;
};

struct TrainingLog {
    std::vector<TrainLogRow> rows;
    void write_csv(std::ostream& out) const;
};

struct TrainItem {
    FeatureVec features;
    int gold_action = 0;  // index 0..K-1; ignored when a custom reward is set
};

// Reward for one sampled action on one item. sample_index runs 0..G-1 within
// the item's iteration, so adapters can tell iterations apart; the RNG is the
// training run's stream, letting adapters (the router) draw pre-generated
// records.
using RewardFn = std::function<double(std::size_t item_index, int action, int sample_index,
                                      std::mt19937_64& gen)>;
// Whether the greedy action counts as correct for the epoch accuracy column.
using CorrectFn = std::function<bool(std::size_t item_index, int action)>;

struct TrainOptions {
    std::uint64_t seed = 0;
    AdamWState optimizer;  // m/v are sized on first use
    RewardFn reward;       // default: render "<explanation>...<answer>letter" and score vs gold
    CorrectFn correct;     // default: greedy action == gold_action
};

// Renders an action as the canonical tagged response and scores it with the
// rule-based reward against the item's gold letter; totals land in {1,3}.
RewardFn make_text_reward(std::span<const TrainItem> items);

// GRPO training loop: per item per step, sample G actions at the configured
// temperature from the current policy (treated as pi_old), score them,
// normalize advantages within the group, take one objective evaluation and
// one AdamW ascent step. pi_ref stays frozen at the initial policy.
TrainingLog train_grpo(CategoricalPolicy& policy, std::span<const TrainItem> items,
                       const GrpoConfig& config, TrainOptions options = {});

// SFT baseline: full-sweep AdamW on the mean cross-entropy for the given
// number of epochs (one step per item, matching the GRPO update cadence).
TrainingLog train_sft(CategoricalPolicy& policy, std::span<const SftExample> examples,
                      int epochs, double lr, TrainOptions options = {});

}  // namespace genomebench::grpo
