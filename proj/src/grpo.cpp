#include "genomebench/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "genomebench/reward.hpp"

namespace genomebench::grpo {

namespace {

void check_features(const FeatureVec& x, int feature_dim) {
    int prev = -1;
    for (const auto& [idx, value] : x) {
        if (idx <= prev) throw ShapeMismatch("feature indices must be strictly increasing");
        if (idx >= feature_dim) {
            throw ShapeMismatch("feature index " + std::to_string(idx) + " out of range for dim " +
                                std::to_string(feature_dim));
        }
        if (!std::isfinite(value)) throw ShapeMismatch("non-finite feature value");
        prev = idx;
    }
}

double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace

FeatureVec dense_features(std::span<const double> values) {
    FeatureVec out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] != 0.0) out.emplace_back(static_cast<int>(i), values[i]);
    }
    return out;
}

std::vector<double> softmax(std::vector<double> logits) {
    const double maxLogit = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& z : logits) {
        z = std::exp(z - maxLogit);
        sum += z;
    }
    for (double& z : logits) z /= sum;
    return logits;
}

int sample_index(std::span<const double> dist, std::mt19937_64& gen) {
    const double u = uniform01(gen);
    double cumulative = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
        cumulative += dist[k];
        if (u < cumulative) return static_cast<int>(k);
    }
    return static_cast<int>(dist.size()) - 1;  // guard against fp undershoot
}

std::vector<double> CategoricalPolicy::logits(const FeatureVec& x) const {
    check_features(x, feature_dim());
    std::vector<double> z(static_cast<std::size_t>(action_count()), 0.0);
    for (const auto& [idx, value] : x) {
        const double* row = weights.data.data() + static_cast<std::size_t>(idx) * action_count();
        for (int k = 0; k < action_count(); ++k) z[static_cast<std::size_t>(k)] += value * row[k];
    }
    return z;
}

std::vector<double> CategoricalPolicy::action_dist(const FeatureVec& x) const {
    return softmax(logits(x));
}

std::vector<double> CategoricalPolicy::log_action_dist(const FeatureVec& x) const {
    std::vector<double> z = logits(x);
    const double maxLogit = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - maxLogit);
    const double logSum = maxLogit + std::log(sum);
    for (double& v : z) v -= logSum;
    return z;
}

int CategoricalPolicy::greedy_action(const FeatureVec& x) const {
    const std::vector<double> z = logits(x);
    int best = 0;
    for (int k = 1; k < action_count(); ++k) {
        if (z[static_cast<std::size_t>(k)] > z[static_cast<std::size_t>(best)]) best = k;
    }
    return best;
}

nlohmann::json policy_to_json(const CategoricalPolicy& policy) {
    return nlohmann::json{{"feature_dim", policy.feature_dim()},
                          {"action_count", policy.action_count()},
                          {"weights", policy.weights.data}};
}

CategoricalPolicy policy_from_json(const nlohmann::json& j) {
    CategoricalPolicy policy(j.at("feature_dim").get<int>(), j.at("action_count").get<int>());
    const auto weights = j.at("weights").get<std::vector<double>>();
    if (weights.size() != policy.weights.data.size()) {
        throw ShapeMismatch("weight count does not match feature_dim x action_count");
    }
    policy.weights.data = weights;
    return policy;
}

void GrpoConfig::validate() const {
    if (group_size < 2) throw Error("InvalidConfig", "group_size must be >= 2");
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw Error("InvalidConfig", "clip_eps must be in (0,1)");
    if (kl_beta < 0.0) throw Error("InvalidConfig", "kl_beta must be >= 0");
    if (!(sampling_temperature > 0.0)) {
        throw Error("InvalidConfig", "sampling_temperature must be > 0");
    }
    if (epochs < 1) throw Error("InvalidConfig", "epochs must be >= 1");
}

std::vector<double> group_advantages(std::span<const double> rewards, double std_floor) {
    if (rewards.size() < 2) throw ShapeMismatch("group must have at least 2 samples");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double variance = 0.0;
    for (double r : rewards) variance += (r - mean) * (r - mean);
    variance /= n;  // population convention, matching the 1/G averaging
    const double sigma = std::sqrt(variance);

    std::vector<double> advantages(rewards.size(), 0.0);
    if (sigma < std_floor) return advantages;
    for (std::size_t i = 0; i < rewards.size(); ++i) advantages[i] = (rewards[i] - mean) / sigma;
    return advantages;
}

double clipped_term(double ratio, double advantage, double eps) {
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
    return std::min(ratio * advantage, clipped * advantage);
}

double kl_exact(std::span<const double> policy_dist, std::span<const double> ref_dist) {
    if (policy_dist.size() != ref_dist.size()) throw ShapeMismatch("distribution sizes differ");
    constexpr double kFloor = 1e-12;
    std::vector<double> p(policy_dist.begin(), policy_dist.end());
    std::vector<double> q(ref_dist.begin(), ref_dist.end());
    double pSum = 0.0;
    double qSum = 0.0;
    for (double& v : p) {
        v = std::max(v, kFloor);
        pSum += v;
    }
    for (double& v : q) {
        v = std::max(v, kFloor);
        qSum += v;
    }
    double kl = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double pk = p[k] / pSum;
        const double qk = q[k] / qSum;
        kl += pk * std::log(pk / qk);
    }
    return kl;
}

ObjectiveResult grpo_objective(const CategoricalPolicy& policy,
                               std::span<const GroupSample> batch,
                               const GrpoConfig& config) {
    if (batch.empty()) throw ShapeMismatch("empty batch");
    const int K = policy.action_count();

    ObjectiveResult result;
    result.gradient = Matrix(policy.feature_dim(), K);

    for (const GroupSample& group : batch) {
        const std::size_t G = group.actions.size();
        if (G < 2) throw ShapeMismatch("group size must be >= 2");
        if (group.old_logprobs.size() != G || group.rewards.size() != G) {
            throw ShapeMismatch("actions/old_logprobs/rewards sizes differ");
        }
        if (group.ref_log_dist.size() != static_cast<std::size_t>(K)) {
            throw ShapeMismatch("ref_log_dist size must equal action count");
        }

        const std::vector<double> logp = policy.log_action_dist(group.features);
        std::vector<double> p(logp.size());
        for (std::size_t k = 0; k < logp.size(); ++k) p[k] = std::exp(logp[k]);

        const std::vector<double> advantages =
            group_advantages(group.rewards, config.std_floor);

        // d(group objective)/d logits, assembled before touching the weights
        std::vector<double> gradLogits(static_cast<std::size_t>(K), 0.0);

        double surrogate = 0.0;
        for (std::size_t i = 0; i < G; ++i) {
            const int a = group.actions[i];
            if (a < 0 || a >= K) throw ShapeMismatch("action index out of range");
            const double ratio = std::exp(logp[static_cast<std::size_t>(a)] - group.old_logprobs[i]);
            const double adv = advantages[i];
            surrogate += clipped_term(ratio, adv, config.clip_eps);

            // Subgradient 0 through the clipped branch; unclipped wins ties.
            const double unclipped = ratio * adv;
            const double clipped = std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps) * adv;
            if (unclipped <= clipped && adv != 0.0) {
                const double coeff = adv * ratio / static_cast<double>(G);
                for (int k = 0; k < K; ++k) {
                    const double indicator = (k == a) ? 1.0 : 0.0;
                    gradLogits[static_cast<std::size_t>(k)] +=
                        coeff * (indicator - p[static_cast<std::size_t>(k)]);
                }
            }
        }
        surrogate /= static_cast<double>(G);

        double kl = 0.0;
        if (config.kl_beta != 0.0) {
            std::vector<double> q(group.ref_log_dist.size());
            for (std::size_t k = 0; k < q.size(); ++k) q[k] = std::exp(group.ref_log_dist[k]);
            kl = kl_exact(p, q);
            for (int k = 0; k < K; ++k) {
                const std::size_t ks = static_cast<std::size_t>(k);
                gradLogits[ks] -= config.kl_beta * p[ks] * (logp[ks] - group.ref_log_dist[ks] - kl);
            }
        }

        result.value += surrogate - config.kl_beta * kl;
        for (const auto& [idx, value] : group.features) {
            double* row = result.gradient.data.data() +
                          static_cast<std::size_t>(idx) * static_cast<std::size_t>(K);
            for (int k = 0; k < K; ++k) row[k] += value * gradLogits[static_cast<std::size_t>(k)];
        }
    }

    const double scale = 1.0 / static_cast<double>(batch.size());
    result.value *= scale;
    for (double& g : result.gradient.data) g *= scale;
    return result;
}

ObjectiveResult sft_loss(const CategoricalPolicy& policy, std::span<const SftExample> examples) {
    if (examples.empty()) throw ShapeMismatch("empty example set");
    const int K = policy.action_count();

    ObjectiveResult result;
    result.gradient = Matrix(policy.feature_dim(), K);

    for (const SftExample& example : examples) {
        if (example.gold_action < 0 || example.gold_action >= K) {
            throw ShapeMismatch("gold action out of range");
        }
        const std::vector<double> logp = policy.log_action_dist(example.features);
        result.value -= logp[static_cast<std::size_t>(example.gold_action)];

        // dL/dz_k = p_k - 1{k = gold}
        for (const auto& [idx, value] : example.features) {
            double* row = result.gradient.data.data() +
                          static_cast<std::size_t>(idx) * static_cast<std::size_t>(K);
            for (int k = 0; k < K; ++k) {
                const double indicator = (k == example.gold_action) ? 1.0 : 0.0;
                row[k] += value * (std::exp(logp[static_cast<std::size_t>(k)]) - indicator);
            }
        }
    }

    const double scale = 1.0 / static_cast<double>(examples.size());
    result.value *= scale;
    for (double& g : result.gradient.data) g *= scale;
    return result;
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& loss_fn,
                        Matrix weights, double h) {
    Matrix grad(weights.rows, weights.cols);
    for (std::size_t i = 0; i < weights.data.size(); ++i) {
        const double original = weights.data[i];
        weights.data[i] = original + h;
        const double up = loss_fn(weights);
        weights.data[i] = original - h;
        const double down = loss_fn(weights);
        weights.data[i] = original;
        grad.data[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

void adamw_step(Matrix& weights, const Matrix& gradient, AdamWState& state, double lr) {
    if (!weights.same_shape(gradient)) throw ShapeMismatch("gradient shape does not match weights");
    if (state.m.data.empty()) {
        state.m = Matrix(weights.rows, weights.cols);
        state.v = Matrix(weights.rows, weights.cols);
    }
    if (!state.m.same_shape(weights)) throw ShapeMismatch("optimizer state shape does not match weights");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));

    for (std::size_t i = 0; i < weights.data.size(); ++i) {
        const double g = gradient.data[i];
        state.m.data[i] = state.beta1 * state.m.data[i] + (1.0 - state.beta1) * g;
        state.v.data[i] = state.beta2 * state.v.data[i] + (1.0 - state.beta2) * g * g;
        const double mHat = state.m.data[i] / bc1;
        const double vHat = state.v.data[i] / bc2;
        weights.data[i] -= lr * (mHat / (std::sqrt(vHat) + state.eps) + state.weight_decay * weights.data[i]);
    }
}

void TrainingLog::write_csv(std::ostream& out) const {
    out << "step,mean_reward,objective,kl,accuracy\n";
    for (const TrainLogRow& row : rows) {
        out << row.step << ',' << row.mean_reward << ',' << row.objective << ',' << row.kl << ','
            << row.accuracy << '\n';
    }
}

RewardFn make_text_reward(std::span<const TrainItem> items) {
    std::vector<int> golds;
    golds.reserve(items.size());
    for (const TrainItem& item : items) golds.push_back(item.gold_action);
    return [golds = std::move(golds)](std::size_t item_index, int action, int, std::mt19937_64&) {
        const int gold = golds.at(item_index);
        if (gold < 0 || gold > 4 || action < 0 || action > 4) {
            throw ShapeMismatch("text reward requires letter actions in [0,5)");
        }
        const char letter = static_cast<char>('a' + action);
        const std::string response =
            std::string("<explanation>policy</explanation> <answer>") + letter + "</answer>";
        return static_cast<double>(
            reward::score_response(response, static_cast<char>('a' + gold)).total);
    };
}

TrainingLog train_grpo(CategoricalPolicy& policy, std::span<const TrainItem> items,
                       const GrpoConfig& config, TrainOptions options) {
    config.validate();
    if (items.empty()) throw ShapeMismatch("empty training set");
    if (!options.reward) options.reward = make_text_reward(items);
    if (!options.correct) {
        std::vector<int> golds;
        golds.reserve(items.size());
        for (const TrainItem& item : items) golds.push_back(item.gold_action);
        options.correct = [golds = std::move(golds)](std::size_t item_index, int action) {
            return golds.at(item_index) == action;
        };
    }

    const CategoricalPolicy reference = policy;  // pi_ref frozen at the initial policy
    std::mt19937_64 gen(options.seed);
    const std::size_t G = static_cast<std::size_t>(config.group_size);

    TrainingLog log;
    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double rewardSum = 0.0;
        double objectiveSum = 0.0;
        double klSum = 0.0;

        for (std::size_t itemIndex = 0; itemIndex < items.size(); ++itemIndex) {
            const TrainItem& item = items[itemIndex];

            std::vector<double> tempered = policy.logits(item.features);
            for (double& z : tempered) z /= config.sampling_temperature;
            const std::vector<double> samplingDist = softmax(std::move(tempered));
            const std::vector<double> oldLog = policy.log_action_dist(item.features);

            GroupSample group;
            group.features = item.features;
            group.ref_log_dist = reference.log_action_dist(item.features);
            group.actions.reserve(G);
            group.old_logprobs.reserve(G);
            group.rewards.reserve(G);
            for (std::size_t i = 0; i < G; ++i) {
                const int action = sample_index(samplingDist, gen);
                group.actions.push_back(action);
                group.old_logprobs.push_back(oldLog[static_cast<std::size_t>(action)]);
                const double r = options.reward(itemIndex, action, static_cast<int>(i), gen);
                group.rewards.push_back(r);
                rewardSum += r;
            }

            const ObjectiveResult objective = grpo_objective(policy, std::span(&group, 1), config);
            objectiveSum += objective.value;
            {
                std::vector<double> q(group.ref_log_dist.size());
                for (std::size_t k = 0; k < q.size(); ++k) q[k] = std::exp(group.ref_log_dist[k]);
                klSum += kl_exact(policy.action_dist(item.features), q);
            }

            // Ascent on the objective as descent on its negation.
            Matrix descent = objective.gradient;
            for (double& g : descent.data) g = -g;
            adamw_step(policy.weights, descent, options.optimizer, config.learning_rate);
            ++step;
        }

        std::size_t correctCount = 0;
        for (std::size_t itemIndex = 0; itemIndex < items.size(); ++itemIndex) {
            if (options.correct(itemIndex, policy.greedy_action(items[itemIndex].features))) {
                ++correctCount;
            }
        }

        const double n = static_cast<double>(items.size());
        log.rows.push_back({step, rewardSum / (n * static_cast<double>(G)), objectiveSum / n,
                            klSum / n, static_cast<double>(correctCount) / n});
    }
    return log;
}

TrainingLog train_sft(CategoricalPolicy& policy, std::span<const SftExample> examples,
                      int epochs, double lr, TrainOptions options) {
    if (examples.empty()) throw ShapeMismatch("empty example set");
    if (!options.correct) {
        std::vector<int> golds;
        golds.reserve(examples.size());
        for (const SftExample& example : examples) golds.push_back(example.gold_action);
        options.correct = [golds = std::move(golds)](std::size_t item_index, int action) {
            return golds.at(item_index) == action;
        };
    }

    TrainingLog log;
    long step = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        double lossSum = 0.0;
        for (std::size_t i = 0; i < examples.size(); ++i) {
            const ObjectiveResult loss = sft_loss(policy, std::span(&examples[i], 1));
            lossSum += loss.value;
            adamw_step(policy.weights, loss.gradient, options.optimizer, lr);
            ++step;
        }
        std::size_t correctCount = 0;
        for (std::size_t i = 0; i < examples.size(); ++i) {
            if (options.correct(i, policy.greedy_action(examples[i].features))) ++correctCount;
        }
        const double n = static_cast<double>(examples.size());
        log.rows.push_back({step, 0.0, lossSum / n, 0.0, static_cast<double>(correctCount) / n});
    }
    return log;
}

}  // namespace genomebench::grpo
