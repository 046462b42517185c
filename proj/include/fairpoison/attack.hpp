#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairpoison/common.hpp"
#include "fairpoison/dataset.hpp"
#include "fairpoison/metrics.hpp"
#include "fairpoison/model.hpp"

namespace fairpoison {

enum class AttackMode { Sampling, Labeling };
enum class AttackAlgorithm { Ogd, Surrogate, Random, Flip, Hard };
enum class GapKind { Exact, Relaxed };

/// Fixed learning rate, or the diameter/gradient-bound schedule
/// eta_t = d / (G sqrt(t)).
struct StepSchedule {
  enum class Kind { Fixed, Corollary1 } kind = Kind::Fixed;
  double diameter = 0.0;        // d, required positive for Corollary1
  double gradient_bound = 0.0;  // G, required positive for Corollary1

  double rate(double eta, int step) const;
};

struct AttackConfig {
  double epsilon = 0.1;  // poisoning ratio, in [0, 0.5]
  double lambda = 0.0;   // fairness-gap penalty, >= 0
  double eta = 0.001;    // learning rate, > 0
  AttackMode mode = AttackMode::Sampling;
  AttackAlgorithm algorithm = AttackAlgorithm::Surrogate;
  std::uint64_t seed = 0;
  StepSchedule schedule;
  /// L2 coefficient of the attacker's internal model.
  double loss_regularization = 1e-4;
  /// Zero initialization of theta^0 by default; seeded Gaussian when set.
  bool gaussian_init = false;

  void validate() const;
};

/// Candidate pool the attacker may draw from. Sampling mode holds each attack
/// point once, unflipped; labeling mode holds every point in both label
/// variants, flipped copies appended after the originals in stable index
/// order. Selection is without replacement via the availability mask.
class FeasibleSet {
 public:
  static FeasibleSet build(const Dataset& attack_data, AttackMode mode);

  AttackMode mode() const { return mode_; }
  Index size() const { return features_.rows(); }
  Index base_size() const { return base_size_; }
  Index available_count() const { return available_count_; }
  /// Upper bound on selections, accounting for sibling removal.
  Index max_selections() const;

  bool available(Index i) const { return available_[static_cast<std::size_t>(i)]; }
  bool flipped(Index i) const { return flipped_[static_cast<std::size_t>(i)]; }
  int label(Index i) const { return labels_[i]; }
  int group(Index i) const { return groups_[i]; }
  auto row(Index i) const { return features_.row(i); }
  Example candidate(Index i) const;

  /// Index of the other label variant of the same attack point, or -1.
  Index sibling(Index i) const;

  /// Removes a candidate and, in labeling mode, its sibling variant, so the
  /// same feature vector cannot recur with a contradictory label.
  /// Returns true when a sibling was also removed.
  bool remove(Index i);

  const std::vector<std::string>& feature_names() const {
    return feature_names_;
  }

 private:
  Matrix features_;
  IntVector labels_;
  IntVector groups_;
  std::vector<bool> flipped_;
  std::vector<bool> available_;
  std::vector<std::string> feature_names_;
  Index available_count_ = 0;
  Index base_size_ = 0;
  AttackMode mode_ = AttackMode::Sampling;
};

/// Fairness gap of theta on clean data augmented with k copies of the
/// candidate, computed incrementally from precomputed clean stats: the
/// candidate's (y,s) cell gains k to its count and k times the per-copy
/// error (exact) or linear loss (relaxed) to its error mass. `clean_stats`
/// must have been computed from theta with the matching mass kind.
double contribution_proxy(const LinearModel& theta,
                          const SubgroupStats& clean_stats,
                          const Example& candidate, std::int64_t k,
                          GapKind kind);

/// Gradient in weight space of relaxed_gap(theta, clean + {candidate}^k).
/// Absolute-value kinks take subgradient 0.
Vector relaxed_gap_copies_gradient(const LinearModel& theta,
                                   const Dataset& clean,
                                   const Example& candidate, std::int64_t k);

struct SelectionResult {
  Index index = -1;
  double score = 0.0;
  double loss_term = 0.0;  // pointwise loss of the chosen candidate
  double gap_term = 0.0;   // contribution proxy of the chosen candidate
  bool sibling_removed = false;
};

/// Argmax over available candidates of
///   epsilon * loss(theta; x, y) + lambda * contribution_proxy(theta, ..., k),
/// ties broken toward the lowest index. The chosen candidate (and its label
/// sibling, in labeling mode) is marked unavailable. Throws DataError when
/// the feasible set is exhausted.
SelectionResult select_point(const LinearModel& theta, FeasibleSet& fs,
                             const SubgroupStats& clean_stats, double epsilon,
                             double lambda, std::int64_t k,
                             const LossSpec& loss_spec, GapKind kind);

struct PoisonStep {
  int step = 0;  // 1-based
  Index candidate = -1;
  double score = 0.0;
  double loss_term = 0.0;
  double gap_term = 0.0;
  double theta_norm = 0.0;
  bool sibling_removed = false;
};

struct PoisonRun {
  Dataset poison;
  std::vector<bool> flipped;   // per poison row
  std::vector<Index> chosen;   // feasible-set (or pool) indices, in order
  std::vector<PoisonStep> trace;
  /// theta_history[0] is the initialization; theta_history[t] the parameters
  /// after step t. Baselines leave it empty.
  std::vector<Vector> theta_history;

  /// Stable 64-bit digest over the chosen indices and flip flags, hex-encoded.
  std::string digest() const;
};

/// Online gradient descent attack: per step, select with hinge loss and the
/// relaxed gap, then update theta with the fairness-penalized gradient
///   grad L(theta; D_c)/n
///   + grad[ eps * loss(theta; x_t, y_t)
///           + lambda * relaxed_gap(theta, D_c + {(x_t,y_t)}^k) ],
/// with k = floor(eps n) fixed for the whole run.
PoisonRun ogd_attack(const Dataset& clean, FeasibleSet fs,
                     const AttackConfig& config);

/// Unconstrained-surrogate attack: the same selection step but with logistic
/// loss and the exact gap in the score; the update tracks the unconstrained
/// model only
///   grad L(theta; D_c)/n + eps * grad loss(theta; x_t, y_t).
PoisonRun surrogate_attack(const Dataset& clean, FeasibleSet fs,
                           const AttackConfig& config);

/// Seeded uniform sampling without replacement from the pool.
PoisonRun baseline_random(const Dataset& pool, Index count, std::uint64_t seed);
/// As baseline_random, with every sampled label inverted.
PoisonRun baseline_flip(const Dataset& pool, Index count, std::uint64_t seed);
/// Random sampling restricted to the hard-example pool.
PoisonRun baseline_hard(const Dataset& hard_pool, Index count,
                        std::uint64_t seed);

/// Runs the configured attack with |D_p| = floor(epsilon * |clean|).
/// Ogd/Surrogate draw from the feasible set over `attack_pool`; Random/Flip
/// sample from `attack_pool`; Hard samples from `hard_pool`.
PoisonRun generate_poison(const Dataset& clean, const Dataset& attack_pool,
                          const Dataset& hard_pool, const AttackConfig& config);

/// Per-step trace log: step, candidate id, score, loss term, gap term.
void write_trace_json(const PoisonRun& run, const AttackConfig& config,
                      const std::string& path);

}  // namespace fairpoison
