#include "ecol/baseline.hpp"

#include "ecol/errors.hpp"
#include "ecol/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace ecol {

namespace {

std::vector<std::string> word_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        char lc = static_cast<char>(std::tolower(c));
        if ((lc >= 'a' && lc <= 'z') || (lc >= '0' && lc <= '9') || lc == '_') {
            cur.push_back(lc);
        } else if (!cur.empty()) {
            if (cur.size() >= 2) tokens.push_back(cur);
            cur.clear();
        }
    }
    if (cur.size() >= 2) tokens.push_back(cur);
    return tokens;
}

double stable_log_loss(double margin) {
    // log(1 + exp(-margin)) without overflow.
    return margin > 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
}

} // namespace

TfidfModel TfidfModel::fit(const std::vector<std::string>& docs) {
    std::map<std::string, long> df;
    for (const auto& doc : docs) {
        auto tokens = word_tokens(doc);
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        for (const auto& t : tokens) ++df[t];
    }
    TfidfModel model;
    model.idf.reserve(df.size());
    const double n = static_cast<double>(docs.size());
    int col = 0;
    for (const auto& [term, count] : df) {
        model.vocab.emplace(term, col++);
        model.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return model;
}

SparseVec TfidfModel::transform(const std::string& doc) const {
    std::unordered_map<int, double> counts;
    for (const auto& t : word_tokens(doc)) {
        auto it = vocab.find(t);
        if (it != vocab.end()) counts[it->second] += 1.0;
    }
    SparseVec x;
    x.reserve(counts.size());
    for (const auto& [col, count] : counts) x.emplace_back(col, count * idf[col]);
    std::sort(x.begin(), x.end());
    double norm2 = 0.0;
    for (const auto& [col, v] : x) norm2 += v * v;
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& [col, v] : x) v *= inv;
    }
    return x;
}

double LinearModel::decision(const SparseVec& x) const {
    double z = bias;
    for (const auto& [col, v] : x) {
        if (col >= 0 && static_cast<size_t>(col) < weights.size()) z += weights[col] * v;
    }
    return z;
}

LinearModel train_svm(const std::vector<SparseVec>& xs, const std::vector<int>& ys,
                      uint64_t seed, double c) {
    if (xs.size() != ys.size()) throw DataError("svm: feature/label count mismatch");
    const size_t n = xs.size();
    size_t dim = 0;
    for (const auto& x : xs)
        for (const auto& [col, v] : x) dim = std::max(dim, static_cast<size_t>(col) + 1);

    // Bias handled as an implicit augmented feature of value 1.
    std::vector<double> w(dim + 1, 0.0);
    std::vector<double> alpha(n, 0.0);
    std::vector<double> q(n);
    for (size_t i = 0; i < n; ++i) {
        double s = 1.0; // augmented bias feature
        for (const auto& [col, v] : xs[i]) s += v * v;
        q[i] = s;
    }

    Rng rng(seed);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    const int max_epochs = 1000;
    const double tol = 1e-6;
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        rng.shuffle(order);
        double max_violation = 0.0;
        for (size_t idx : order) {
            const double y = static_cast<double>(ys[idx]);
            double z = w[dim]; // bias component
            for (const auto& [col, v] : xs[idx]) z += w[col] * v;
            const double g = y * z - 1.0;
            double pg = g;
            if (alpha[idx] <= 0.0) pg = std::min(g, 0.0);
            else if (alpha[idx] >= c) pg = std::max(g, 0.0);
            max_violation = std::max(max_violation, std::fabs(pg));
            if (std::fabs(pg) < 1e-12) continue;
            const double a_new = std::clamp(alpha[idx] - g / q[idx], 0.0, c);
            const double delta = (a_new - alpha[idx]) * y;
            alpha[idx] = a_new;
            for (const auto& [col, v] : xs[idx]) w[col] += delta * v;
            w[dim] += delta;
        }
        if (max_violation < tol) break;
    }

    LinearModel model;
    model.bias = w[dim];
    w.pop_back();
    model.weights = std::move(w);
    return model;
}

namespace {

// Objective and gradient for L2-regularized logistic loss; the final
// coordinate is the unpenalized bias.
double logreg_objective(const std::vector<SparseVec>& xs, const std::vector<int>& ys,
                        const std::vector<double>& w, double c, std::vector<double>& grad) {
    const size_t dim = w.size() - 1;
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double y = static_cast<double>(ys[i]);
        double z = w[dim];
        for (const auto& [col, v] : xs[i]) z += w[col] * v;
        const double margin = y * z;
        loss += c * stable_log_loss(margin);
        // d/dz of log(1+exp(-yz)) = -y * sigmoid(-yz)
        const double s = 1.0 / (1.0 + std::exp(margin));
        const double dz = c * (-y * s);
        for (const auto& [col, v] : xs[i]) grad[col] += dz * v;
        grad[dim] += dz;
    }
    for (size_t j = 0; j < dim; ++j) {
        loss += 0.5 * w[j] * w[j];
        grad[j] += w[j];
    }
    return loss;
}

} // namespace

LinearModel train_logreg(const std::vector<SparseVec>& xs, const std::vector<int>& ys,
                         double c) {
    if (xs.size() != ys.size()) throw DataError("logreg: feature/label count mismatch");
    size_t dim = 0;
    for (const auto& x : xs)
        for (const auto& [col, v] : x) dim = std::max(dim, static_cast<size_t>(col) + 1);
    const size_t m = dim + 1;

    std::vector<double> w(m, 0.0), grad(m, 0.0);
    double f = logreg_objective(xs, ys, w, c, grad);

    // L-BFGS with history 10 and Armijo backtracking.
    const size_t history = 10;
    std::vector<std::vector<double>> s_hist, y_hist;
    std::vector<double> rho_hist;
    std::vector<double> direction(m), w_new(m), grad_new(m);

    const int max_iters = 500;
    for (int iter = 0; iter < max_iters; ++iter) {
        double gnorm = 0.0;
        for (double g : grad) gnorm += g * g;
        gnorm = std::sqrt(gnorm);
        if (gnorm < 1e-7 * std::max(1.0, static_cast<double>(xs.size()))) break;

        // Two-loop recursion for the search direction.
        direction = grad;
        std::vector<double> alphas(s_hist.size());
        for (size_t k = s_hist.size(); k-- > 0;) {
            double dot = 0.0;
            for (size_t j = 0; j < m; ++j) dot += s_hist[k][j] * direction[j];
            alphas[k] = rho_hist[k] * dot;
            for (size_t j = 0; j < m; ++j) direction[j] -= alphas[k] * y_hist[k][j];
        }
        if (!s_hist.empty()) {
            double sy = 0.0, yy = 0.0;
            const auto& s_last = s_hist.back();
            const auto& y_last = y_hist.back();
            for (size_t j = 0; j < m; ++j) {
                sy += s_last[j] * y_last[j];
                yy += y_last[j] * y_last[j];
            }
            if (yy > 0.0) {
                const double scale = sy / yy;
                for (double& d : direction) d *= scale;
            }
        }
        for (size_t k = 0; k < s_hist.size(); ++k) {
            double dot = 0.0;
            for (size_t j = 0; j < m; ++j) dot += y_hist[k][j] * direction[j];
            const double beta = rho_hist[k] * dot;
            for (size_t j = 0; j < m; ++j) direction[j] += (alphas[k] - beta) * s_hist[k][j];
        }
        for (double& d : direction) d = -d;

        double dir_dot_grad = 0.0;
        for (size_t j = 0; j < m; ++j) dir_dot_grad += direction[j] * grad[j];
        if (dir_dot_grad > -1e-16) { // not a descent direction; restart with steepest descent
            for (size_t j = 0; j < m; ++j) direction[j] = -grad[j];
            dir_dot_grad = -gnorm * gnorm;
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        double step = 1.0;
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            for (size_t j = 0; j < m; ++j) w_new[j] = w[j] + step * direction[j];
            f_new = logreg_objective(xs, ys, w_new, c, grad_new);
            if (f_new <= f + 1e-4 * step * dir_dot_grad) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        std::vector<double> s_vec(m), y_vec(m);
        double sy = 0.0;
        for (size_t j = 0; j < m; ++j) {
            s_vec[j] = w_new[j] - w[j];
            y_vec[j] = grad_new[j] - grad[j];
            sy += s_vec[j] * y_vec[j];
        }
        if (sy > 1e-12) {
            s_hist.push_back(std::move(s_vec));
            y_hist.push_back(std::move(y_vec));
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > history) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
        }
        w.swap(w_new);
        grad.swap(grad_new);
        f = f_new;
    }

    LinearModel model;
    model.bias = w[dim];
    w.pop_back();
    model.weights = std::move(w);
    return model;
}

MetricsReport tfidf_baseline(const DatasetSplit& train, const DatasetSplit& eval,
                             BaselineClassifier classifier, uint64_t seed,
                             std::vector<Prediction>* out_predictions) {
    std::vector<std::string> train_docs;
    train_docs.reserve(train.posts.size());
    std::vector<int> ys;
    ys.reserve(train.posts.size());
    for (const auto& p : train.posts) {
        train_docs.push_back(normalize_text(p.raw_text));
        ys.push_back(p.label == Label::Fake ? 1 : -1);
    }
    const TfidfModel tfidf = TfidfModel::fit(train_docs);

    std::vector<SparseVec> xs;
    xs.reserve(train_docs.size());
    for (const auto& doc : train_docs) xs.push_back(tfidf.transform(doc));

    const LinearModel model = classifier == BaselineClassifier::Svm
                                  ? train_svm(xs, ys, seed)
                                  : train_logreg(xs, ys);

    std::vector<Prediction> preds;
    preds.reserve(eval.posts.size());
    for (const auto& p : eval.posts) {
        const double z = model.decision(tfidf.transform(normalize_text(p.raw_text)));
        const double prob_fake = 1.0 / (1.0 + std::exp(-z));
        preds.push_back(make_prediction(p.id, {prob_fake, 1.0 - prob_fake}));
    }
    MetricsReport report = compute_metrics(preds, eval.posts);
    if (out_predictions) *out_predictions = std::move(preds);
    return report;
}

} // namespace ecol
