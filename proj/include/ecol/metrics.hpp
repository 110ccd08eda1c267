#pragma once

#include "ecol/model.hpp"
#include "ecol/preprocess.hpp"

#include <string>
#include <vector>

namespace ecol {

// All values are percentages in [0,100] at full precision; rounding to the
// reported 2 decimals happens only when serializing.
struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long support = 0;
};

struct MetricsReport {
    ClassMetrics fake;
    ClassMetrics real;
    double accuracy = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    long total = 0;
};

struct LinkGroup {
    double f1 = 0.0;
    long support = 0;
};

// Per-class F1 over the with-links / without-links subsets; the four groups
// (gold label x link presence) partition the split.
struct LinkBreakdown {
    LinkGroup fake_with_links;
    LinkGroup fake_without_links;
    LinkGroup real_with_links;
    LinkGroup real_without_links;
};

// Matches predictions to golds by id (order-independent); the id sets must
// coincide exactly.
MetricsReport compute_metrics(const std::vector<Prediction>& predictions,
                              const std::vector<Post>& golds);

// Splits golds by link presence (extract_urls on the raw text non-empty) and
// computes each class's F1 on its subset.
LinkBreakdown link_breakdown(const std::vector<Prediction>& predictions,
                             const std::vector<Post>& golds);

// Half-up rounding to 2 decimals, applied at report time.
double round2(double value);

std::string metrics_to_json(const MetricsReport& report);
std::string metrics_to_json(const MetricsReport& report, const LinkBreakdown& breakdown);

} // namespace ecol
