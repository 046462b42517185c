#pragma once

#include <cstdint>

#include "fairpoison/common.hpp"
#include "fairpoison/dataset.hpp"
#include "fairpoison/fair_classifier.hpp"
#include "fairpoison/model.hpp"

namespace fairpoison {

/// Target fairness gap on training data and the trainer that enforces it.
/// Post-processing gives exact equalized odds (delta = 0); the reductions
/// trainer needs a strictly positive delta.
struct FairnessSpec {
  double delta = 0.0;
  enum class Method { Postprocess, Reductions } method = Method::Postprocess;
};

/// Solves the 4-variable linear program over flip probabilities
/// p[group][base prediction] that minimizes expected 0-1 loss subject to
/// equal expected TPR and FPR across groups on `data`. Requires all four
/// (y,s) cells non-empty. The returned randomized classifier has fairness
/// gap <= 1e-6 on `data`.
FairClassifier postprocess_equalized_odds(const LinearModel& base,
                                          const Dataset& data);

struct ReductionsHyper {
  int iterations = 50;              // T_f best-response rounds
  double multiplier_bound = 100.0;  // B, cap per multiplier
  double multiplier_step = 1.0;     // ascent step scale, decayed as 1/sqrt(t)
  LossSpec base_loss{LossKind::Logistic, 1e-4};
  TrainHyper base_hyper{0.5, 300, 0, false};
  bool warm_start = true;  // reuse the previous best response as the next init
};

/// Two-player constrained-ERM game for relaxed equalized odds. Multipliers
/// range over the four signed moment constraints (each of the TPR and FPR
/// group differences within +-delta) and rise by projected ascent on their
/// violations; the best response is a weighted logistic regression on
/// cost-induced labels. Returns the uniform mixture over all best-response
/// iterates.
FairClassifier reductions_equalized_odds(const Dataset& data, double delta,
                                         const ReductionsHyper& hyper = {});

}  // namespace fairpoison
