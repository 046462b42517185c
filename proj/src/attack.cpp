#include "fairpoison/attack.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

namespace fairpoison {

double StepSchedule::rate(double eta, int step) const {
  switch (kind) {
    case Kind::Fixed:
      return eta;
    case Kind::Corollary1:
      return diameter / (gradient_bound * std::sqrt(static_cast<double>(step)));
  }
  return eta;
}

void AttackConfig::validate() const {
  if (epsilon < 0.0 || epsilon > 0.5)
    throw ConfigError("attack: epsilon must be in [0, 0.5]");
  if (lambda < 0.0) throw ConfigError("attack: lambda must be >= 0");
  if (!(eta > 0.0)) throw ConfigError("attack: eta must be > 0");
  if (schedule.kind == StepSchedule::Kind::Corollary1 &&
      (!(schedule.diameter > 0.0) || !(schedule.gradient_bound > 0.0)))
    throw ConfigError("attack: corollary1 schedule needs d > 0 and G > 0");
  if (loss_regularization < 0.0)
    throw ConfigError("attack: loss regularization must be >= 0");
}

FeasibleSet FeasibleSet::build(const Dataset& attack_data, AttackMode mode) {
  if (attack_data.empty()) throw DataError("feasible set: empty attack data");

  FeasibleSet fs;
  fs.mode_ = mode;
  fs.base_size_ = attack_data.size();
  if (mode == AttackMode::Sampling) {
    fs.features_ = attack_data.features();
    fs.labels_ = attack_data.labels();
    fs.groups_ = attack_data.groups();
    fs.flipped_.assign(static_cast<std::size_t>(attack_data.size()), false);
  } else {
    const Index n = attack_data.size();
    fs.features_ = Matrix(2 * n, attack_data.dim());
    fs.features_ << attack_data.features(), attack_data.features();
    fs.labels_ = IntVector(2 * n);
    fs.groups_ = IntVector(2 * n);
    fs.flipped_.assign(static_cast<std::size_t>(2 * n), false);
    for (Index i = 0; i < n; ++i) {
      fs.labels_[i] = attack_data.label(i);
      fs.labels_[n + i] = 1 - attack_data.label(i);
      fs.groups_[i] = attack_data.group(i);
      fs.groups_[n + i] = attack_data.group(i);
      fs.flipped_[static_cast<std::size_t>(n + i)] = true;
    }
  }
  fs.available_.assign(static_cast<std::size_t>(fs.features_.rows()), true);
  fs.available_count_ = fs.features_.rows();
  fs.feature_names_ = attack_data.feature_names();
  return fs;
}

Index FeasibleSet::max_selections() const {
  return mode_ == AttackMode::Labeling ? base_size_ : size();
}

Example FeasibleSet::candidate(Index i) const {
  return Example{features_.row(i).transpose(), labels_[i], groups_[i]};
}

Index FeasibleSet::sibling(Index i) const {
  if (mode_ != AttackMode::Labeling) return -1;
  return i < base_size_ ? i + base_size_ : i - base_size_;
}

bool FeasibleSet::remove(Index i) {
  if (!available_[static_cast<std::size_t>(i)])
    throw DataError("feasible set: candidate already removed");
  available_[static_cast<std::size_t>(i)] = false;
  --available_count_;
  const Index sib = sibling(i);
  if (sib >= 0 && available_[static_cast<std::size_t>(sib)]) {
    available_[static_cast<std::size_t>(sib)] = false;
    --available_count_;
    return true;
  }
  return false;
}

double contribution_proxy(const LinearModel& theta,
                          const SubgroupStats& clean_stats,
                          const Example& candidate, std::int64_t k,
                          GapKind kind) {
  if (k < 0) throw ConfigError("contribution_proxy: k must be >= 0");
  for (int y = 0; y < 2; ++y)
    for (int s = 0; s < 2; ++s)
      if (clean_stats.count[y][s] < 0)
        throw DataError("contribution_proxy: inconsistent stats");

  double per_copy = 0.0;
  if (k > 0) {
    const double v = decision_value(theta, candidate.features);
    per_copy = kind == GapKind::Exact
                   ? (predict_from_value(v) == candidate.label ? 0.0 : 1.0)
                   : linear_loss_from_value(v, candidate.label);
  }

  SubgroupStats stats = clean_stats;
  stats.count[candidate.label][candidate.group] += k;
  stats.error_mass[candidate.label][candidate.group] +=
      static_cast<double>(k) * per_copy;
  return kind == GapKind::Exact ? equalized_odds_gap(stats)
                                : linear_relaxation_gap(stats);
}

namespace {

struct CellAggregates {
  std::array<std::array<double, 2>, 2> count{};
  std::array<std::array<Vector, 2>, 2> feature_sum;
};

CellAggregates cell_aggregates(const Dataset& data) {
  CellAggregates agg;
  for (int y = 0; y < 2; ++y)
    for (int s = 0; s < 2; ++s) agg.feature_sum[y][s] = Vector::Zero(data.dim());
  for (Index i = 0; i < data.size(); ++i) {
    const int y = data.label(i);
    const int s = data.group(i);
    agg.count[y][s] += 1.0;
    agg.feature_sum[y][s] += data.row(i).transpose();
  }
  return agg;
}

inline double sign_or_zero(double x) {
  if (x > 0.0) return 1.0;
  if (x < 0.0) return -1.0;
  return 0.0;
}

Vector relaxed_gap_gradient_impl(const LinearModel& theta,
                                 const CellAggregates& clean_agg,
                                 const Example& candidate, std::int64_t k) {
  const Index dim = theta.dim();

  // Per cell: average linear loss R and its (theta-independent) gradient.
  // With yt the remapped cell label and (sx, n) the augmented sums,
  //   sum of losses = n/2 - (yt/2) (w . sx + n b),
  //   gradient sum  = -(yt/2) (sx, n).
  std::array<std::array<double, 2>, 2> rate{};
  std::array<std::array<Vector, 2>, 2> rate_grad;
  for (int y = 0; y < 2; ++y) {
    const double yt = y == 1 ? 1.0 : -1.0;
    for (int s = 0; s < 2; ++s) {
      double n = clean_agg.count[y][s];
      Vector sx = clean_agg.feature_sum[y][s];
      if (candidate.label == y && candidate.group == s && k > 0) {
        n += static_cast<double>(k);
        sx += static_cast<double>(k) * candidate.features;
      }
      rate_grad[y][s] = Vector::Zero(dim + 1);
      if (n == 0.0) {
        rate[y][s] = 0.0;  // degenerate cell: rate 0, no gradient
        continue;
      }
      const double loss_sum =
          n / 2.0 - (yt / 2.0) * (theta.feature_weights().dot(sx) + n * theta.bias());
      rate[y][s] = loss_sum / n;
      rate_grad[y][s].head(dim) = (-yt / 2.0 / n) * sx;
      rate_grad[y][s][dim] = -yt / 2.0;
    }
  }

  Vector grad = Vector::Zero(dim + 1);
  for (int y = 0; y < 2; ++y) {
    const double sign = sign_or_zero(rate[y][0] - rate[y][1]);
    if (sign != 0.0) grad += 0.5 * sign * (rate_grad[y][0] - rate_grad[y][1]);
  }
  return grad;
}

}  // namespace

Vector relaxed_gap_copies_gradient(const LinearModel& theta,
                                   const Dataset& clean,
                                   const Example& candidate, std::int64_t k) {
  return relaxed_gap_gradient_impl(theta, cell_aggregates(clean), candidate, k);
}

SelectionResult select_point(const LinearModel& theta, FeasibleSet& fs,
                             const SubgroupStats& clean_stats, double epsilon,
                             double lambda, std::int64_t k,
                             const LossSpec& loss_spec, GapKind kind) {
  if (fs.available_count() == 0)
    throw DataError("select_point: feasible set exhausted");

  SelectionResult best;
  for (Index i = 0; i < fs.size(); ++i) {
    if (!fs.available(i)) continue;
    const Example cand = fs.candidate(i);
    const double loss = point_loss(loss_spec, theta, cand.features, cand.label);
    const double gap = contribution_proxy(theta, clean_stats, cand, k, kind);
    const double score = epsilon * loss + lambda * gap;
    if (best.index < 0 || score > best.score) {
      best.index = i;
      best.score = score;
      best.loss_term = loss;
      best.gap_term = gap;
    }
  }
  best.sibling_removed = fs.remove(best.index);
  return best;
}

namespace {

LinearModel initial_theta(Index dim, const AttackConfig& config) {
  LinearModel theta = LinearModel::zeros(dim);
  if (config.gaussian_init) {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 0.01);
    for (Index j = 0; j < theta.weights.size(); ++j)
      theta.weights[j] = gauss(rng);
  }
  return theta;
}

Dataset empty_like(const Dataset& data, const char* name) {
  Dataset out(Matrix(0, data.dim()), IntVector(0), IntVector(0), name);
  out.set_feature_names(data.feature_names());
  return out;
}

// Shared loop of both online attacks; `fair_update` switches between the
// penalized update (Algorithm with the relaxed-gap term) and the plain
// unconstrained-surrogate update.
PoisonRun online_attack(const Dataset& clean, FeasibleSet fs,
                        const AttackConfig& config, bool fair_update) {
  config.validate();
  if (clean.empty()) throw DataError("attack: empty clean dataset");
  if (clean.dim() != fs.candidate(0).features.size())
    throw DataError("attack: clean/attack dimension mismatch");

  const std::int64_t count = static_cast<std::int64_t>(
      std::floor(config.epsilon * static_cast<double>(clean.size())));
  if (count > fs.max_selections())
    throw DataError("attack: feasible set smaller than requested poison size");

  const LossSpec loss_spec{fair_update ? LossKind::Hinge : LossKind::Logistic,
                           config.loss_regularization};
  const GapKind gap_kind = fair_update ? GapKind::Relaxed : GapKind::Exact;

  LinearModel theta = initial_theta(clean.dim(), config);

  PoisonRun run;
  run.theta_history.push_back(theta.weights);
  std::vector<Example> picked;
  picked.reserve(static_cast<std::size_t>(count));

  for (std::int64_t t = 1; t <= count; ++t) {
    const SubgroupStats stats = gap_kind == GapKind::Relaxed
                                    ? linear_loss_stats(theta, clean)
                                    : misprediction_stats(theta, clean);
    const SelectionResult sel = select_point(theta, fs, stats, config.epsilon,
                                             config.lambda, count, loss_spec,
                                             gap_kind);
    const Example cand = fs.candidate(sel.index);
    picked.push_back(cand);
    run.chosen.push_back(sel.index);
    run.flipped.push_back(fs.flipped(sel.index));

    Vector grad = average_loss_gradient(loss_spec, theta, clean);
    grad += config.epsilon *
            point_loss_gradient(loss_spec, theta, cand.features, cand.label);
    if (fair_update && config.lambda > 0.0)
      grad += config.lambda *
              relaxed_gap_copies_gradient(theta, clean, cand, count);

    theta.weights -=
        config.schedule.rate(config.eta, static_cast<int>(t)) * grad;
    if (!theta.weights.allFinite())
      throw NumericalError("attack: theta diverged at step " +
                           std::to_string(t));

    run.theta_history.push_back(theta.weights);
    run.trace.push_back(PoisonStep{static_cast<int>(t), sel.index, sel.score,
                                   sel.loss_term, sel.gap_term,
                                   theta.weights.norm(),
                                   sel.sibling_removed});
  }

  run.poison = picked.empty()
                   ? empty_like(clean, "poison")
                   : Dataset::from_examples(picked, clean.dim(), "poison");
  run.poison.set_feature_names(fs.feature_names());
  return run;
}

std::vector<Index> sample_without_replacement(Index pool_size, Index count,
                                              std::uint64_t seed) {
  if (count > pool_size)
    throw DataError("baseline: pool smaller than requested poison size");
  std::vector<Index> order(static_cast<std::size_t>(pool_size));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, pool_size - 1);
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(pick(rng))]);
  }
  order.resize(static_cast<std::size_t>(count));
  return order;
}

PoisonRun sampled_baseline(const Dataset& pool, Index count,
                           std::uint64_t seed, bool flip) {
  if (pool.empty() && count > 0) throw DataError("baseline: empty pool");
  PoisonRun run;
  run.chosen = sample_without_replacement(pool.size(), count, seed);
  std::vector<Example> picked;
  picked.reserve(run.chosen.size());
  for (Index idx : run.chosen) {
    Example e = pool.example(idx);
    if (flip) e.label = 1 - e.label;
    picked.push_back(std::move(e));
    run.flipped.push_back(flip);
  }
  run.poison = picked.empty()
                   ? empty_like(pool, "poison")
                   : Dataset::from_examples(picked, pool.dim(), "poison");
  run.poison.set_feature_names(pool.feature_names());
  return run;
}

}  // namespace

PoisonRun ogd_attack(const Dataset& clean, FeasibleSet fs,
                     const AttackConfig& config) {
  return online_attack(clean, std::move(fs), config, /*fair_update=*/true);
}

PoisonRun surrogate_attack(const Dataset& clean, FeasibleSet fs,
                           const AttackConfig& config) {
  return online_attack(clean, std::move(fs), config, /*fair_update=*/false);
}

PoisonRun baseline_random(const Dataset& pool, Index count,
                          std::uint64_t seed) {
  return sampled_baseline(pool, count, seed, /*flip=*/false);
}

PoisonRun baseline_flip(const Dataset& pool, Index count, std::uint64_t seed) {
  return sampled_baseline(pool, count, seed, /*flip=*/true);
}

PoisonRun baseline_hard(const Dataset& hard_pool, Index count,
                        std::uint64_t seed) {
  return sampled_baseline(hard_pool, count, seed, /*flip=*/false);
}

PoisonRun generate_poison(const Dataset& clean, const Dataset& attack_pool,
                          const Dataset& hard_pool,
                          const AttackConfig& config) {
  config.validate();
  const Index count = static_cast<Index>(
      std::floor(config.epsilon * static_cast<double>(clean.size())));
  switch (config.algorithm) {
    case AttackAlgorithm::Ogd:
      return ogd_attack(clean, FeasibleSet::build(attack_pool, config.mode),
                        config);
    case AttackAlgorithm::Surrogate:
      return surrogate_attack(clean,
                              FeasibleSet::build(attack_pool, config.mode),
                              config);
    case AttackAlgorithm::Random:
      return baseline_random(attack_pool, count, config.seed);
    case AttackAlgorithm::Flip:
      return baseline_flip(attack_pool, count, config.seed);
    case AttackAlgorithm::Hard:
      return baseline_hard(hard_pool, count, config.seed);
  }
  throw ConfigError("attack: unknown algorithm");
}

std::string PoisonRun::digest() const {
  std::uint64_t h = 1469598103934665603ull;
  const auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    mix(static_cast<std::uint64_t>(chosen[i]));
    mix(flipped[i] ? 1u : 0u);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

void write_trace_json(const PoisonRun& run, const AttackConfig& config,
                      const std::string& path) {
  nlohmann::ordered_json doc;
  doc["epsilon"] = config.epsilon;
  doc["lambda"] = config.lambda;
  doc["eta"] = config.eta;
  doc["mode"] =
      config.mode == AttackMode::Sampling ? "sampling" : "labeling";
  doc["seed"] = config.seed;
  doc["poison_size"] = run.poison.size();
  doc["digest"] = run.digest();
  doc["steps"] = nlohmann::ordered_json::array();
  for (const PoisonStep& s : run.trace) {
    nlohmann::ordered_json step;
    step["step"] = s.step;
    step["candidate"] = s.candidate;
    step["score"] = s.score;
    step["loss_term"] = s.loss_term;
    step["gap_term"] = s.gap_term;
    step["theta_norm"] = s.theta_norm;
    if (s.sibling_removed) step["sibling_removed"] = true;
    doc["steps"].push_back(std::move(step));
  }
  std::ofstream out(path);
  if (!out) throw DataError("trace: cannot write " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace fairpoison
