#include "ecol/metrics.hpp"

#include "ecol/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <unordered_map>

namespace ecol {

namespace {

struct Counts {
    long tp = 0, fp = 0, fn = 0;
};

ClassMetrics from_counts(const Counts& c, long support) {
    ClassMetrics m;
    m.support = support;
    const long pred_pos = c.tp + c.fp;
    const long gold_pos = c.tp + c.fn;
    m.precision = pred_pos ? 100.0 * static_cast<double>(c.tp) / static_cast<double>(pred_pos) : 0.0;
    m.recall = gold_pos ? 100.0 * static_cast<double>(c.tp) / static_cast<double>(gold_pos) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

// Pairs each prediction with its gold label; id sets must match exactly.
std::vector<std::pair<Label, Label>> align(const std::vector<Prediction>& predictions,
                                           const std::vector<Post>& golds) {
    if (predictions.size() != golds.size())
        throw DataError("prediction/gold size mismatch: " + std::to_string(predictions.size()) +
                        " vs " + std::to_string(golds.size()));
    std::unordered_map<std::string, Label> gold_by_id;
    for (const auto& g : golds) {
        if (!gold_by_id.emplace(g.id, g.label).second)
            throw DataError("duplicate gold id '" + g.id + "'");
    }
    std::vector<std::pair<Label, Label>> pairs;
    pairs.reserve(predictions.size());
    for (const auto& p : predictions) {
        auto it = gold_by_id.find(p.post_id);
        if (it == gold_by_id.end())
            throw DataError("prediction id '" + p.post_id + "' has no gold label");
        pairs.emplace_back(p.label, it->second);
        gold_by_id.erase(it);
    }
    return pairs;
}

MetricsReport metrics_from_pairs(const std::vector<std::pair<Label, Label>>& pairs) {
    Counts fake, real;
    long correct = 0;
    for (const auto& [pred, gold] : pairs) {
        if (pred == gold) ++correct;
        if (pred == Label::Fake && gold == Label::Fake) ++fake.tp;
        if (pred == Label::Fake && gold == Label::Real) ++fake.fp;
        if (pred == Label::Real && gold == Label::Fake) ++fake.fn;
        if (pred == Label::Real && gold == Label::Real) ++real.tp;
        if (pred == Label::Real && gold == Label::Fake) ++real.fp;
        if (pred == Label::Fake && gold == Label::Real) ++real.fn;
    }
    MetricsReport r;
    r.total = static_cast<long>(pairs.size());
    r.fake = from_counts(fake, fake.tp + fake.fn);
    r.real = from_counts(real, real.tp + real.fn);
    r.accuracy = r.total ? 100.0 * static_cast<double>(correct) / static_cast<double>(r.total) : 0.0;
    const double total = static_cast<double>(r.total);
    if (r.total) {
        r.weighted_precision =
            (r.fake.precision * r.fake.support + r.real.precision * r.real.support) / total;
        r.weighted_recall =
            (r.fake.recall * r.fake.support + r.real.recall * r.real.support) / total;
        r.weighted_f1 = (r.fake.f1 * r.fake.support + r.real.f1 * r.real.support) / total;
    }
    return r;
}

} // namespace

MetricsReport compute_metrics(const std::vector<Prediction>& predictions,
                              const std::vector<Post>& golds) {
    return metrics_from_pairs(align(predictions, golds));
}

LinkBreakdown link_breakdown(const std::vector<Prediction>& predictions,
                             const std::vector<Post>& golds) {
    std::unordered_map<std::string, bool> has_links;
    for (const auto& g : golds) has_links[g.id] = !extract_urls(g.raw_text).empty();

    std::vector<Prediction> with_preds, without_preds;
    std::vector<Post> with_golds, without_golds;
    for (const auto& g : golds) {
        (has_links[g.id] ? with_golds : without_golds).push_back(g);
    }
    for (const auto& p : predictions) {
        auto it = has_links.find(p.post_id);
        if (it == has_links.end())
            throw DataError("prediction id '" + p.post_id + "' has no gold label");
        (it->second ? with_preds : without_preds).push_back(p);
    }

    const MetricsReport with = compute_metrics(with_preds, with_golds);
    const MetricsReport without = compute_metrics(without_preds, without_golds);

    LinkBreakdown b;
    b.fake_with_links = {with.fake.f1, with.fake.support};
    b.fake_without_links = {without.fake.f1, without.fake.support};
    b.real_with_links = {with.real.f1, with.real.support};
    b.real_without_links = {without.real.f1, without.real.support};
    return b;
}

double round2(double value) {
    return std::floor(value * 100.0 + 0.5) / 100.0;
}

namespace {

nlohmann::json class_json(const ClassMetrics& m) {
    return {{"precision", round2(m.precision)},
            {"recall", round2(m.recall)},
            {"f1", round2(m.f1)},
            {"support", m.support}};
}

nlohmann::json report_json(const MetricsReport& r) {
    return {{"accuracy", round2(r.accuracy)},
            {"fake", class_json(r.fake)},
            {"real", class_json(r.real)},
            {"weighted",
             {{"precision", round2(r.weighted_precision)},
              {"recall", round2(r.weighted_recall)},
              {"f1", round2(r.weighted_f1)}}},
            {"total", r.total}};
}

nlohmann::json group_json(const LinkGroup& g) {
    return {{"f1", round2(g.f1)}, {"support", g.support}};
}

} // namespace

std::string metrics_to_json(const MetricsReport& report) {
    return report_json(report).dump(2);
}

std::string metrics_to_json(const MetricsReport& report, const LinkBreakdown& breakdown) {
    nlohmann::json j = report_json(report);
    j["link_breakdown"] = {{"fake_with_links", group_json(breakdown.fake_with_links)},
                           {"fake_without_links", group_json(breakdown.fake_without_links)},
                           {"real_with_links", group_json(breakdown.real_with_links)},
                           {"real_without_links", group_json(breakdown.real_without_links)}};
    return j.dump(2);
}

} // namespace ecol
