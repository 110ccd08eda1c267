#pragma once

#include "ecol/data.hpp"
#include "ecol/metrics.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ecol {

// Sparse feature vector: (column, value) pairs with strictly increasing columns.
using SparseVec = std::vector<std::pair<int, double>>;

// Word-level tf-idf with smoothed idf ln((1+n)/(1+df)) + 1 and L2-normalized
// rows. Tokens are runs of [a-z0-9_] of length >= 2 from lowercased text;
// vocabulary columns are assigned in sorted term order.
struct TfidfModel {
    std::map<std::string, int> vocab;
    std::vector<double> idf;

    static TfidfModel fit(const std::vector<std::string>& docs);
    SparseVec transform(const std::string& doc) const;
    size_t dim() const { return idf.size(); }
};

struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    double decision(const SparseVec& x) const;
};

// L2-regularized hinge-loss SVM trained by dual coordinate descent with
// seeded per-epoch permutations. Labels are +1/-1.
LinearModel train_svm(const std::vector<SparseVec>& xs, const std::vector<int>& ys,
                      uint64_t seed, double c = 1.0);

// L2-regularized logistic regression trained by full-batch L-BFGS; the bias
// is unpenalized. Deterministic (no randomness).
LinearModel train_logreg(const std::vector<SparseVec>& xs, const std::vector<int>& ys,
                         double c = 1.0);

enum class BaselineClassifier { Svm, LogReg };

// Fits tf-idf on the training split's normalized text, trains the requested
// linear classifier, and scores the eval split.
MetricsReport tfidf_baseline(const DatasetSplit& train, const DatasetSplit& eval,
                             BaselineClassifier classifier, uint64_t seed = 42,
                             std::vector<Prediction>* out_predictions = nullptr);

} // namespace ecol
